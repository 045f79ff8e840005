use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pulseqrng::config::{ExperimentConfig, SampleFormat, ScenarioKind};
use pulseqrng::extract::{ExtractorConfig, SeedSource};
use pulseqrng::reduction::ReductionReport;
use pulseqrng::{curve, io, runner, Error};

#[derive(Parser)]
#[command(name = "pulseqrng", version, about = "Laser-pulse interference QRNG simulator and post-processor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl From<Preset> for ScenarioKind {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Fig2 => ScenarioKind::Fig2,
            Preset::Fig3 => ScenarioKind::Fig3,
            Preset::Fig4 => ScenarioKind::Fig4,
            Preset::Fig5 => ScenarioKind::Fig5,
            Preset::Fig6 => ScenarioKind::Fig6,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

/// Where the experiment configuration comes from.
#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario, used when no file is given.
    #[arg(short, long, value_enum)]
    preset: Option<Preset>,
    /// Monte-Carlo draws per run.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self, default: ScenarioKind) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_toml_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::preset(self.preset.map_or(default, Into::into)),
        };
        if let Some(n) = self.samples {
            cfg.mc_samples = n;
        }
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its histogram, report and manifest.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides the configuration).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the quantized samples.
        #[arg(long)]
        write_samples: bool,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Estimate the reduction factor of recorded samples from the PDF shape.
    Analyze {
        /// Sample file, CSV or binary.
        #[arg(value_name = "SAMPLES")]
        input: PathBuf,
        /// Lookup curve produced by `curve`.
        #[arg(long)]
        curve: PathBuf,
        /// ADC settings come from this configuration (default: fig2 preset).
        #[command(flatten)]
        config: ConfigArgs,
        /// Bit depth; defaults to the sample file header, then the config.
        #[arg(long)]
        n_bits: Option<u32>,
        /// ADC SINAD in dB (overrides the configuration).
        #[arg(long)]
        sinad_db: Option<f64>,
        /// Pick curve rows with this laser noise level.
        #[arg(long)]
        sigma_s: Option<f64>,
        /// Write the report here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Hash recorded samples into output bits with a Toeplitz extractor.
    Extract {
        /// Sample file, CSV or binary.
        #[arg(value_name = "SAMPLES")]
        input: PathBuf,
        /// Report whose `gamma_total` sets the compression.
        #[arg(long)]
        report: PathBuf,
        /// Packed output bits; metadata goes next to it.
        #[arg(short, long)]
        out: PathBuf,
        /// Raw block length in bits.
        #[arg(long, default_value_t = 4096)]
        block_len: usize,
        /// Reuse a seed written by an earlier run instead of debiasing one.
        #[arg(long)]
        seed_file: Option<PathBuf>,
        /// Bit depth; defaults to the sample file header, then the report.
        #[arg(long)]
        n_bits: Option<u32>,
    },
    /// Build the B lookup curve for every bit depth in the sweep.
    Curve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write every figure dataset as CSV.
    Figures {
        #[arg(short, long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => 2,
        Error::UntrustedSource | Error::OutOfModel { .. } | Error::UnimodalPdf { .. } => 3,
        Error::Parse { .. }
        | Error::InvalidInput(_)
        | Error::EmptyHistogram
        | Error::NeedsMoreEntropy { .. }
        | Error::Io(_) => 4,
    }
}

fn read_samples(path: &Path) -> Result<io::SampleSet, Error> {
    io::read_samples(path).map_err(|e| match e {
        Error::Io(io) => Error::Parse {
            source_name: path.display().to_string(),
            line: 0,
            message: io.to_string(),
        },
        other => other,
    })
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            write_samples,
            format,
        } => {
            let mut cfg = config.load(ScenarioKind::Fig2)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            cfg.output.write_samples |= write_samples;
            match format {
                Some(Format::Bin) => cfg.output.sample_format = SampleFormat::Binary,
                Some(Format::Csv) => cfg.output.sample_format = SampleFormat::Csv,
                None => {}
            }
            let result = runner::run_simulate(&cfg)?;
            let paths = runner::write_simulation(&result, &cfg, &cfg.output.dir)?;
            let r = &result.analysis.report;
            println!(
                "{}: H_inf = {:.4} bits, gamma_total = {}, B = {}",
                cfg.scenario.name(),
                r.h_inf,
                r.gamma_total,
                r.b_value.map_or_else(|| "none".into(), |b| format!("{b:.4}")),
            );
            print_paths(&paths);
        }
        Command::Analyze {
            input: samples,
            curve: curve_path,
            config,
            n_bits,
            sinad_db,
            sigma_s,
            out,
        } => {
            let cfg = config.load(ScenarioKind::Fig2)?;
            let set = read_samples(&samples)?;
            let mut adc = cfg.model.adc;
            adc.n = n_bits.or(set.n_bits).unwrap_or(adc.n);
            if let Some(s) = sinad_db {
                adc.sinad_db = s;
            }
            io::validate_codes(&set, adc.n, &samples.display().to_string())?;
            let text = fs::read_to_string(&curve_path)
                .map_err(|e| Error::Config(format!("{}: {e}", curve_path.display())))?;
            let rows = curve::read_csv(text.as_bytes(), &curve_path.display().to_string())?;
            let lookup = runner::select_curve(&rows, adc.n, sigma_s)?;
            let report = runner::run_analyze(&set.codes, &adc, &lookup, &cfg.b_options)?;
            match out {
                Some(path) => {
                    fs::write(&path, report.to_key_value())?;
                    println!("gamma_total = {}", report.gamma_total);
                    print_paths(&[path]);
                }
                None => print!("{}", report.to_key_value()),
            }
        }
        Command::Extract {
            input: samples,
            report,
            out,
            block_len,
            seed_file,
            n_bits,
        } => {
            let text = fs::read_to_string(&report)?;
            let rep = ReductionReport::from_key_value(&text, &report.display().to_string())?;
            let extractor = ExtractorConfig::from_reduction(block_len, rep.gamma_total)?;
            let set = read_samples(&samples)?;
            let n = n_bits.or(set.n_bits).unwrap_or(rep.n_bits);
            io::validate_codes(&set, n, &samples.display().to_string())?;
            let (seed, origin) = match &seed_file {
                Some(p) => (
                    SeedSource::Provided(runner::read_seed(p, block_len, extractor.out_len())?),
                    format!("file {}", p.display()),
                ),
                None => (SeedSource::FromRaw, "von Neumann on the head of the raw stream".to_string()),
            };
            let ex = runner::run_extract(&set.codes, n, rep.gamma_total, block_len, seed)?;
            let paths = runner::write_extraction(&ex, &out, &origin)?;
            println!(
                "{} blocks, {} -> {} bits per block, {} output bits",
                ex.blocks,
                block_len,
                extractor.out_len(),
                ex.output.len()
            );
            print_paths(&paths);
        }
        Command::Curve { config, out } => {
            let cfg = config.load(ScenarioKind::Fig6)?;
            let rows = runner::run_curve(&cfg)?;
            match out {
                Some(path) => {
                    curve::write_csv(&rows, fs::File::create(&path)?)?;
                    let mut manifest = path.as_os_str().to_owned();
                    manifest.push(".manifest.toml");
                    let manifest = PathBuf::from(manifest);
                    fs::write(&manifest, runner::manifest(&cfg, &[]))?;
                    print_paths(&[path, manifest]);
                }
                None => curve::write_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Figures { out, samples, seed } => {
            if samples < pulseqrng::config::MIN_MC_SAMPLES {
                return Err(Error::Config(format!(
                    "--samples must be at least {}",
                    pulseqrng::config::MIN_MC_SAMPLES
                )));
            }
            print_paths(&runner::run_figures(samples, seed, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
