//! Experiment orchestration: simulate, analyze, extract, curves, figures.
//!
//! The `run_*` functions compute; the `write_*` functions put results on
//! disk. Every write is accompanied by a manifest that parses back into the
//! configuration that produced it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::adc::{enob, AdcConfig, FILTER_DISCRETIZATION};
use crate::config::{ExperimentConfig, SampleFormat, ScenarioKind};
use crate::curve::{self, BCurve, CurveRow};
use crate::error::{Error, Result};
use crate::extract::{self, BitBuffer, Extraction, ExtractorConfig, SeedSource, ToeplitzSeed, TOEPLITZ_LAYOUT};
use crate::io;
use crate::pdf::{self, estimate_b, BOptions, BStatistic, EmpiricalPdf, QuantumPdfParams};
use crate::reduction::{gamma_enob, Alignment, Reduction, ReductionReport, ReportInputs};
use crate::sim::{analyze_scenario, Analysis, Chain, ANALOG_SUBBINS, CHUNK};
use crate::signal::Waveform;

/// Manifest text: conventions as comments, then the resolved configuration.
pub fn manifest(cfg: &ExperimentConfig, notes: &[(&str, String)]) -> String {
    let mut m = format!(
        "# pulseqrng {} run manifest\n\
         # rng: ChaCha8, one stream per {CHUNK}-draw chunk, stream index = chunk index\n\
         # analog histogram: {ANALOG_SUBBINS} bins per ADC code, edge on the ideal lower bound\n\
         # filter: {FILTER_DISCRETIZATION}\n\
         # toeplitz: {TOEPLITZ_LAYOUT}\n",
        env!("CARGO_PKG_VERSION"),
    );
    for (k, v) in notes {
        m.push_str(&format!("# {k}: {v}\n"));
    }
    m.push_str(&cfg.to_toml());
    m
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub struct SimulationRun {
    pub chain: Chain,
    pub analysis: Analysis,
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulationRun> {
    cfg.validate()?;
    let chain = Chain::new(&cfg.model)?;
    let analysis = analyze_scenario(&chain, &cfg.mc(), &cfg.b_options, cfg.output.write_samples)?;
    Ok(SimulationRun { chain, analysis })
}

/// Writes `histogram.csv`, `report.txt`, `report.csv`, `manifest.toml` and,
/// if requested, `samples.bin` or `samples.csv`. Returns the paths written.
pub fn write_simulation(run: &SimulationRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &mut dyn FnMut(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush()?;
        written.push(path);
        Ok(())
    };
    let a = &run.analysis;
    put("histogram.csv", &mut |w| pdf::write_csv(&a.output.codes, w))?;
    put("report.txt", &mut |w| Ok(w.write_all(a.report.to_key_value().as_bytes())?))?;
    put("report.csv", &mut |w| {
        Ok(writeln!(w, "{}\n{}", ReductionReport::csv_header(), a.report.to_csv_row())?)
    })?;
    if let Some(samples) = &a.output.samples {
        match cfg.output.sample_format {
            SampleFormat::Binary => put("samples.bin", &mut |w| io::write_binary(samples, run.chain.adc.n, w))?,
            SampleFormat::Csv => put("samples.csv", &mut |w| io::write_csv(samples, w))?,
        }
    }
    let adc = &run.chain.adc;
    let notes = [
        ("calibrated gain (V per model unit)", adc.gain.to_string()),
        ("calibrated offset (V)", adc.offset.to_string()),
        (
            "sample time (s)",
            run.chain.sample_time().map_or_else(|| "n/a".into(), |t| t.to_string()),
        ),
        (
            "B",
            match &a.b {
                Ok(b) => b.value.to_string(),
                Err(e) => e.clone(),
            },
        ),
    ];
    put("manifest.toml", &mut |w| Ok(w.write_all(manifest(cfg, &notes).as_bytes())?))?;
    Ok(written)
}

/// Code histogram over `[0, ΔU)`.
pub fn histogram_from_codes(codes: &[u16], adc: &AdcConfig) -> Result<EmpiricalPdf> {
    let mut counts = vec![0u64; adc.levels()];
    for &c in codes {
        let slot = counts
            .get_mut(c as usize)
            .ok_or_else(|| Error::InvalidInput(format!("code {c} exceeds {} bits", adc.n)))?;
        *slot += 1;
    }
    EmpiricalPdf::from_counts(0.0, adc.delta_u, counts)
}

/// Rows of a curve table for one bit depth (and `sigma_s`, if given).
pub fn select_curve(rows: &[CurveRow], n_bits: u32, sigma_s: Option<f64>) -> Result<BCurve> {
    let picked: Vec<CurveRow> = rows
        .iter()
        .filter(|r| r.n_bits == n_bits && sigma_s.is_none_or(|s| (r.sigma_s - s).abs() < 1e-12))
        .copied()
        .collect();
    if picked.is_empty() {
        return Err(Error::Config(format!("curve table has no rows for n_bits = {n_bits}")));
    }
    let first = picked[0].sigma_s;
    if sigma_s.is_none() && picked.iter().any(|r| r.sigma_s != first) {
        return Err(Error::Config(
            "curve table mixes several sigma_s values; choose one".into(),
        ));
    }
    BCurve::from_rows(picked)
}

/// Ingestion-mode analysis: `B` from the code histogram, `γ_n^Q·Γ` from the
/// curve, times `γ_ENOB` from the ADC's SINAD. The ideal support is aligned
/// to the two histogram maxima.
pub fn run_analyze(codes: &[u16], adc: &AdcConfig, curve: &BCurve, b_opts: &BOptions) -> Result<ReductionReport> {
    adc.validate()?;
    let hist = histogram_from_codes(codes, adc)?;
    let b = estimate_b(&hist, b_opts)?;
    let looked_up = curve.lookup(b.value)?;
    let n = adc.n as f64;
    let e = enob(adc.sinad_db)?;
    let g_enob = gamma_enob(n, e)?;
    let mut report = ReductionReport::compute(&ReportInputs {
        n_bits: adc.n,
        delta_u: adc.delta_u,
        enob: e,
        codes: &hist,
        analog: &hist,
        analog_draws: hist.total(),
        ideal: QuantumPdfParams::new(b.low_peak, b.high_peak)?,
        alignment: Alignment::Peaks,
        b_value: Some(b.value),
        b_options: *b_opts,
    })?;
    report.curve_gamma_nq_gamma = Some(looked_up);
    report.gamma_total = Reduction::Finite(looked_up * g_enob);
    Ok(report)
}

/// Converts samples to bits and extracts. No output exists unless the
/// reduction is finite.
pub fn run_extract(
    codes: &[u16],
    n_bits: u32,
    gamma_total: Reduction,
    block_len: usize,
    seed: SeedSource,
) -> Result<Extraction> {
    let cfg = ExtractorConfig::from_reduction(block_len, gamma_total)?;
    let raw = extract::samples_to_bits(codes, n_bits)?;
    extract::extraction_pipeline(&raw, &cfg, seed)
}

pub fn read_seed(path: &Path, block_len: usize, out_len: usize) -> Result<ToeplitzSeed> {
    let bytes = fs::read(path)?;
    let bits = BitBuffer::from_bytes(&bytes, Some(extract::seed_len(block_len, out_len))).map_err(|_| {
        Error::Parse {
            source_name: path.display().to_string(),
            line: 0,
            message: format!(
                "{} bytes cannot hold a {}-bit seed",
                bytes.len(),
                extract::seed_len(block_len, out_len)
            ),
        }
    })?;
    ToeplitzSeed::new(bits, block_len, out_len)
}

/// Writes the packed output to `out`, metadata to `out.meta` and, for a
/// seed taken from the raw stream, the seed to `out.seed`.
pub fn write_extraction(ex: &Extraction, out: &Path, seed_origin: &str) -> Result<Vec<PathBuf>> {
    let with_ext = |ext: &str| {
        let mut p = out.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let mut written = vec![out.to_path_buf()];
    fs::write(out, ex.output.to_bytes())?;
    if ex.seed_raw_bits > 0 {
        let seed_path = with_ext(".seed");
        fs::write(&seed_path, ex.seed.bits().to_bytes())?;
        written.push(seed_path);
    }
    let meta = with_ext(".meta");
    fs::write(&meta, ex.metadata(seed_origin))?;
    written.push(meta);
    Ok(written)
}

/// Lookup rows for every bit depth in the sweep.
pub fn run_curve(cfg: &ExperimentConfig) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.sweep.n_bits {
        let mut base = cfg.model;
        base.adc.n = n;
        let c = curve::b_to_gamma_curve(&base, cfg.sweep.sigma_s, &cfg.sweep.sigma_zeta, &cfg.mc(), &cfg.b_options);
        match c {
            Ok(c) => rows.extend_from_slice(c.rows()),
            Err(Error::InvalidInput(_)) => {
                return Err(Error::Config(format!("no usable curve points for n_bits = {n}")));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub n_bits: u32,
    pub sigma_zeta: f64,
    pub report: ReductionReport,
}

impl SweepPoint {
    pub fn gamma_nq_gamma(&self) -> Reduction {
        Reduction::Finite(self.report.gamma_nq).times(self.report.gamma_comparator)
    }
}

/// Full reports over `n_bits × sigma_zeta`, `σ_s1 = σ_s2 = sweep.sigma_s`.
pub fn noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &n in &cfg.sweep.n_bits {
        for &sz in &cfg.sweep.sigma_zeta {
            let mut s = cfg.model;
            s.adc.n = n;
            s.signal.laser.sigma_s1 = cfg.sweep.sigma_s;
            s.signal.laser.sigma_s2 = cfg.sweep.sigma_s;
            s.signal.noise.sigma_zeta = sz;
            let chain = Chain::new(&s)?;
            let a = analyze_scenario(&chain, &cfg.mc(), &cfg.b_options, false)?;
            out.push(SweepPoint {
                n_bits: n,
                sigma_zeta: sz,
                report: a.report,
            });
        }
    }
    Ok(out)
}

/// One bandwidth/jitter panel of a pulse-shape figure.
#[derive(Clone, Debug)]
pub struct Panel {
    pub jitter: f64,
    pub bandwidth: f64,
    pub sample_time: f64,
    /// Filtered mean pulse `p1 + p2`, volts.
    pub pulse: Waveform,
    pub pdf: EmpiricalPdf,
    pub b: std::result::Result<BStatistic, String>,
}

pub fn pulse_panels(cfg: &ExperimentConfig) -> Result<Vec<Panel>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &jitter in &cfg.sweep.jitters {
        for &bandwidth in &cfg.sweep.bandwidths {
            let mut s = cfg.model;
            s.signal.noise.sigma_jitter = jitter;
            s.adc.bandwidth = bandwidth;
            s.path = crate::sim::SignalPath::Waveform;
            let chain = Chain::new(&s)?;
            let a = analyze_scenario(&chain, &cfg.mc(), &cfg.b_options, false)?;
            let hi = chain.mean_waveform(0.0, 0.0).expect("waveform path");
            let lo = chain.mean_waveform(std::f64::consts::PI, 0.0).expect("waveform path");
            let pulse = Waveform {
                t0: hi.t0,
                dt: hi.dt,
                samples: hi
                    .samples
                    .iter()
                    .zip(&lo.samples)
                    .map(|(a, b)| chain.adc.to_volts(0.5 * (a + b)))
                    .collect(),
            };
            out.push(Panel {
                jitter,
                bandwidth,
                sample_time: chain.sample_time().expect("waveform path"),
                pulse,
                pdf: a.output.codes,
                b: a.b,
            });
        }
    }
    Ok(out)
}

fn write_panels(panels: &[Panel], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = ["pulse", "pdf", "summary"]
        .iter()
        .map(|k| dir.join(format!("{stem}_{k}.csv")))
        .collect();
    let mut pulse = create(&paths[0])?;
    let mut pdf = create(&paths[1])?;
    let mut summary = create(&paths[2])?;
    writeln!(pulse, "jitter_ps,bandwidth_ghz,t_ps,volts")?;
    writeln!(pdf, "jitter_ps,bandwidth_ghz,code,volts,probability")?;
    writeln!(summary, "jitter_ps,bandwidth_ghz,sample_time_ps,b_value,low_peak,high_peak")?;
    for p in panels {
        let (j, bw) = (p.jitter * 1e12, p.bandwidth * 1e-9);
        for (i, v) in p.pulse.samples.iter().enumerate() {
            writeln!(pulse, "{j},{bw},{},{v}", p.pulse.time(i) * 1e12)?;
        }
        for i in 0..p.pdf.bins() {
            writeln!(pdf, "{j},{bw},{i},{},{}", p.pdf.center(i), p.pdf.probability(i))?;
        }
        let (b, lo, hi) = match &p.b {
            Ok(b) => (b.value.to_string(), b.low_peak.to_string(), b.high_peak.to_string()),
            Err(_) => ("none".into(), "none".into(), "none".into()),
        };
        writeln!(summary, "{j},{bw},{},{b},{lo},{hi}", p.sample_time * 1e12)?;
    }
    for mut w in [pulse, pdf, summary] {
        w.flush()?;
    }
    Ok(paths)
}

fn write_sweep(points: &[SweepPoint], dir: &Path) -> Result<Vec<PathBuf>> {
    let p4 = dir.join("fig4.csv");
    let p5 = dir.join("fig5.csv");
    let mut f4 = create(&p4)?;
    let mut f5 = create(&p5)?;
    writeln!(f4, "n_bits,sigma_zeta,gamma_adc_relaxed,gamma_adc_strict,h_inf_first_bin,h_inf_q")?;
    writeln!(f5, "n_bits,sigma_zeta,gamma_nq_gamma,gamma_nq,gamma_comparator,h_inf_comparator")?;
    for p in points {
        let r = &p.report;
        writeln!(
            f4,
            "{},{},{},{},{},{}",
            p.n_bits, p.sigma_zeta, r.gamma_adc_relaxed, r.gamma_adc_strict, r.h_inf_first_bin, r.h_inf_q
        )?;
        writeln!(
            f5,
            "{},{},{},{},{},{}",
            p.n_bits,
            p.sigma_zeta,
            p.gamma_nq_gamma(),
            r.gamma_nq,
            r.gamma_comparator,
            r.h_inf_comparator
        )?;
    }
    f4.flush()?;
    f5.flush()?;
    Ok(vec![p4, p5])
}

/// Every figure dataset, each preset run with the given sample count and
/// seed. Returns the paths written.
pub fn run_figures(mc_samples: usize, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for kind in ScenarioKind::PRESETS {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.mc_samples = mc_samples;
        cfg.rng_seed = seed;
        cfg.output.dir = dir.to_path_buf();
        match kind {
            ScenarioKind::Fig2 | ScenarioKind::Fig3 => {
                written.extend(write_panels(&pulse_panels(&cfg)?, dir, kind.name())?);
            }
            // One sweep serves both noise figures.
            ScenarioKind::Fig4 => written.extend(write_sweep(&noise_sweep(&cfg)?, dir)?),
            ScenarioKind::Fig5 => {}
            ScenarioKind::Fig6 => {
                let path = dir.join("fig6.csv");
                curve::write_csv(&run_curve(&cfg)?, create(&path)?)?;
                written.push(path);
            }
            ScenarioKind::Custom => unreachable!("not a preset"),
        }
        let path = dir.join(format!("{}_manifest.toml", kind.name()));
        let note = [("dataset", format!("{} preset", kind.name()))];
        fs::write(&path, manifest(&cfg, &note))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parses_back() {
        let cfg = ExperimentConfig::preset(ScenarioKind::Fig3);
        let text = manifest(&cfg, &[("note", "x".into())]);
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn histogram_rejects_wide_codes() {
        let mut adc = ExperimentConfig::preset(ScenarioKind::Fig2).model.adc;
        adc.n = 3;
        let h = histogram_from_codes(&[0, 7, 7], &adc).unwrap();
        assert_eq!(h.counts()[7], 2);
        assert!(histogram_from_codes(&[8], &adc).is_err());
    }

    #[test]
    fn extraction_refuses_untrusted() {
        let r = run_extract(&[1, 2, 3], 8, Reduction::Untrusted, 8, SeedSource::FromRaw);
        assert!(matches!(r, Err(Error::UntrustedSource)));
    }

    #[test]
    fn curve_selection() {
        let row = |n, s| CurveRow {
            b: Some(1.1),
            gamma_nq_gamma: Reduction::Finite(1.5),
            n_bits: n,
            sigma_s: s,
            sigma_zeta: 0.0,
        };
        let rows = [row(8, 0.05), row(10, 0.05), row(10, 0.01)];
        assert!(select_curve(&rows, 8, None).is_ok());
        assert!(select_curve(&rows, 12, None).is_err());
        assert!(select_curve(&rows, 10, None).is_err());
        assert!(select_curve(&rows, 10, Some(0.01)).is_ok());
    }
}
