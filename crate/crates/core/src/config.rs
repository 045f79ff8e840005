//! Experiment configuration: TOML files layered over named presets.
//!
//! A file may name a preset with `scenario = "fig2"` and override any nested
//! key; the fully resolved configuration is what a run manifest echoes, and
//! it parses back to the same value.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adc::{sinad_for_enob, AdcConfig};
use crate::error::{Error, Result};
use crate::pdf::BOptions;
use crate::sim::{McSettings, PhaseSampling, Scenario, SignalPath};
use crate::signal::{LaserParams, NoiseParams, PhaseModel, PulseInterferenceConfig, PulseShape};

/// Smallest Monte-Carlo size accepted for PDF estimation.
pub const MIN_MC_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Short Gaussian pulses at 2.5 GHz, bandwidth and jitter panels.
    Fig2,
    /// Long flat-top pulses at 500 MHz, bandwidth and jitter panels.
    Fig3,
    /// Relaxed ADC reduction factor against photodetector noise.
    Fig4,
    /// Non-uniformity times comparator factor against photodetector noise.
    Fig5,
    /// Lookup curve from `B` to the non-uniformity times comparator factor.
    Fig6,
    #[default]
    Custom,
}

impl ScenarioKind {
    pub const PRESETS: [ScenarioKind; 5] = [
        ScenarioKind::Fig2,
        ScenarioKind::Fig3,
        ScenarioKind::Fig4,
        ScenarioKind::Fig5,
        ScenarioKind::Fig6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3 => "fig3",
            ScenarioKind::Fig4 => "fig4",
            ScenarioKind::Fig5 => "fig5",
            ScenarioKind::Fig6 => "fig6",
            ScenarioKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::PRESETS
            .into_iter()
            .chain([ScenarioKind::Custom])
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Parameter sweeps used by the figure and curve commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// ADC bit depths.
    pub n_bits: Vec<u32>,
    /// Relative laser power noise, shared by both pulses.
    pub sigma_s: f64,
    /// Relative photodetector noise grid.
    pub sigma_zeta: Vec<f64>,
    /// ADC bandwidths, hertz.
    pub bandwidths: Vec<f64>,
    /// RMS jitter values, seconds.
    pub jitters: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorSettings {
    /// Raw block length `N`, bits.
    pub block_len: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Also write the quantized sample sequence.
    #[serde(default)]
    pub write_samples: bool,
    #[serde(default)]
    pub sample_format: SampleFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub mc_samples: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub phase_sampling: PhaseSampling,
    pub model: Scenario,
    pub sweep: SweepSettings,
    #[serde(default)]
    pub b_options: BOptions,
    pub extractor: ExtractorSettings,
    pub output: OutputSettings,
}

const GHZ: f64 = 1e9;
const PS: f64 = 1e-12;

fn base_adc(n: u32, bandwidth: f64) -> AdcConfig {
    AdcConfig {
        n,
        delta_u: 1.0,
        bandwidth,
        sample_time: None,
        gain: 1.0,
        offset: 0.0,
        // γ_ENOB = 1.6.
        sinad_db: sinad_for_enob(n as f64 / 1.6),
    }
}

fn laser(alpha: f64, period: f64, sigma_s: f64) -> LaserParams {
    LaserParams {
        alpha,
        repetition_period: period,
        mean_s1: 1.0,
        mean_s2: 1.0,
        sigma_s1: sigma_s,
        sigma_s2: sigma_s,
    }
}

impl ExperimentConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        let noise_grid: Vec<f64> = (0..10).map(|k| k as f64 * 0.002).collect();
        let (model, sweep) = match kind {
            ScenarioKind::Fig2 | ScenarioKind::Custom => (
                Scenario {
                    signal: PulseInterferenceConfig {
                        pulse: PulseShape::gaussian(20.0 * PS),
                        laser: laser(4.0, 400.0 * PS, 0.05),
                        noise: NoiseParams::default(),
                        phase: PhaseModel::Uniform,
                    },
                    adc: base_adc(8, 20.0 * GHZ),
                    path: SignalPath::Waveform,
                    range_fill: Some(0.8),
                },
                SweepSettings {
                    n_bits: vec![8],
                    sigma_s: 0.05,
                    sigma_zeta: vec![0.0],
                    bandwidths: vec![20.0 * GHZ, 2.5 * GHZ, 1.0 * GHZ],
                    jitters: vec![0.0, 10.0 * PS],
                },
            ),
            ScenarioKind::Fig3 => {
                let mut adc = base_adc(8, 20.0 * GHZ);
                adc.sample_time = Some(600.0 * PS);
                (
                    Scenario {
                        signal: PulseInterferenceConfig {
                            pulse: PulseShape::flat_top(1000.0 * PS, 20.0 * PS),
                            laser: laser(4.0, 2000.0 * PS, 0.05),
                            noise: NoiseParams::default(),
                            phase: PhaseModel::Uniform,
                        },
                        adc,
                        path: SignalPath::Waveform,
                        range_fill: Some(0.8),
                    },
                    SweepSettings {
                        n_bits: vec![8],
                        sigma_s: 0.05,
                        sigma_zeta: vec![0.0],
                        bandwidths: vec![20.0 * GHZ, 2.5 * GHZ, 1.0 * GHZ],
                        jitters: vec![0.0, 10.0 * PS],
                    },
                )
            }
            ScenarioKind::Fig4 | ScenarioKind::Fig5 | ScenarioKind::Fig6 => (
                Scenario {
                    signal: PulseInterferenceConfig {
                        pulse: PulseShape::gaussian(20.0 * PS),
                        laser: laser(4.0, 400.0 * PS, 0.05),
                        noise: NoiseParams::default(),
                        phase: PhaseModel::Uniform,
                    },
                    adc: base_adc(10, 20.0 * GHZ),
                    path: SignalPath::Integral,
                    range_fill: Some(0.8),
                },
                SweepSettings {
                    n_bits: vec![8, 10, 12],
                    sigma_s: 0.05,
                    sigma_zeta: if kind == ScenarioKind::Fig6 {
                        (0..13).map(|k| k as f64 * 0.005).collect()
                    } else {
                        noise_grid
                    },
                    bandwidths: vec![20.0 * GHZ],
                    jitters: vec![0.0],
                },
            ),
        };
        ExperimentConfig {
            scenario: kind,
            mc_samples: 1_000_000,
            rng_seed: 1,
            phase_sampling: PhaseSampling::Stratified,
            model,
            sweep,
            b_options: BOptions::default(),
            extractor: ExtractorSettings { block_len: 4096 },
            output: OutputSettings {
                dir: PathBuf::from("out"),
                write_samples: false,
                sample_format: SampleFormat::Binary,
            },
        }
    }

    /// Parses TOML. A named `scenario` supplies defaults for every key the
    /// file leaves out.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let kind = match user.get("scenario") {
            None => ScenarioKind::Custom,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
        };
        let merged = if kind == ScenarioKind::Custom {
            user
        } else {
            let mut base = toml::Table::try_from(Self::preset(kind)).map_err(|e| Error::Config(e.to_string()))?;
            overlay(&mut base, user);
            base
        };
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples = {} is below the minimum of {MIN_MC_SAMPLES}",
                self.mc_samples
            )));
        }
        let field = |e: Error| Error::Config(e.to_string());
        self.model.signal.validate().map_err(field)?;
        self.model.adc.validate().map_err(field)?;
        if let Some(r) = self.model.range_fill {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config("model.range_fill must lie in (0, 1]".into()));
            }
        }
        if self.sweep.n_bits.is_empty() || self.sweep.n_bits.iter().any(|&n| !(1..=16).contains(&n)) {
            return Err(Error::Config("sweep.n_bits must be non-empty, each in 1..=16".into()));
        }
        if self.sweep.sigma_zeta.iter().any(|&s| !(s >= 0.0)) || !(self.sweep.sigma_s >= 0.0) {
            return Err(Error::Config("sweep noise levels must be >= 0".into()));
        }
        if self.sweep.bandwidths.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Config("sweep.bandwidths must be > 0".into()));
        }
        if self.sweep.jitters.iter().any(|&j| !(j >= 0.0)) {
            return Err(Error::Config("sweep.jitters must be >= 0".into()));
        }
        if self.extractor.block_len < 2 {
            return Err(Error::Config("extractor.block_len must be >= 2".into()));
        }
        Ok(())
    }

    pub fn mc(&self) -> McSettings {
        McSettings {
            samples: self.mc_samples,
            seed: self.rng_seed,
            phase_sampling: self.phase_sampling,
        }
    }
}

fn overlay(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => overlay(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
