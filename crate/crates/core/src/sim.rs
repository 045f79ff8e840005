//! Monte-Carlo simulation of the digitized interference signal.
//!
//! Draws are generated in fixed-size chunks. Chunk `c` uses a ChaCha8
//! stream seeded with the run seed and stream number `c`, so results do not
//! depend on how many workers process the chunks. Within a chunk the phase
//! is Latin-hypercube stratified: `m` draws get one uniform point in each of
//! `m` equal phase cells, in random order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::{check_dt, design_butterworth2, AdcConfig, Biquad};
use crate::error::{Error, Result};
use crate::pdf::{estimate_b, BOptions, BStatistic, EmpiricalPdf, QuantumPdfParams};
use crate::reduction::{Alignment, ReductionReport, ReportInputs};
use crate::signal::{EventSampler, InterferenceEvent, PairSynth, PulseInterferenceConfig, TimeGrid};

/// Draws per chunk (and per random substream).
pub const CHUNK: usize = 1 << 16;

/// Analog histogram resolution, sub-bins per ADC code.
pub const ANALOG_SUBBINS: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPath {
    /// Integrated pulse-pair signal; no time-domain filtering.
    #[default]
    Integral,
    /// Time-domain waveform, Butterworth-filtered and sampled once per pulse.
    Waveform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSampling {
    #[default]
    Stratified,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub signal: PulseInterferenceConfig,
    pub adc: AdcConfig,
    #[serde(default)]
    pub path: SignalPath,
    /// When set, gain and offset are recalibrated so the mean level sits at
    /// `ΔU/2` and the ideal signal span covers this fraction of `ΔU`.
    #[serde(default)]
    pub range_fill: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub phase_sampling: PhaseSampling,
}

/// A calibrated signal chain, ready to turn events into volts.
#[derive(Clone, Debug)]
pub struct Chain {
    pub scenario: Scenario,
    pub adc: AdcConfig,
    /// Ideal signal support, model units.
    pub ideal: QuantumPdfParams,
    /// Noiseless mean of the sampled signal, model units.
    pub mean_level: f64,
    wave: Option<WaveChain>,
}

#[derive(Clone, Debug)]
struct WaveChain {
    synth: PairSynth,
    filter: Biquad,
    sample_time: f64,
    /// Grid index of the last point needed for interpolation.
    last_index: usize,
    grid: TimeGrid,
    zeta_scale: f64,
}

impl WaveChain {
    fn sample(&self, s1: f64, s2: f64, delta_phi: f64, delta: f64, scratch: &mut Vec<f64>) -> f64 {
        let mut f = self.filter.clone();
        f.reset();
        self.synth.fill(s1, s2, delta_phi, delta, self.last_index + 1, scratch);
        for x in scratch.iter_mut() {
            *x = f.process(*x);
        }
        let pos = (self.sample_time - self.grid.t0) / self.grid.dt;
        let i = (pos.floor() as usize).min(self.last_index.saturating_sub(1));
        let frac = pos - i as f64;
        scratch[i] + frac * (scratch[i + 1] - scratch[i])
    }
}

impl Chain {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let sig = &scenario.signal;
        sig.validate()?;
        let mut adc = scenario.adc;
        let laser = &sig.laser;
        let (mean_level, ideal, wave) = match scenario.path {
            SignalPath::Integral => (
                laser.mean_level(),
                QuantumPdfParams::from_arms(laser.mean_s1, laser.mean_s2, 1.0)?,
                None,
            ),
            SignalPath::Waveform => {
                let grid = TimeGrid::for_pulse(&sig.pulse, laser.repetition_period);
                let filter = design_butterworth2(adc.bandwidth, grid.dt)?;
                check_dt(grid.dt, &filter)?;
                let synth = PairSynth::new(sig, grid);
                let sample_time = match adc.sample_time {
                    Some(t) => t,
                    None => filtered_peak_time(&synth, &filter, laser.mean_s1, laser.mean_s2, grid),
                };
                let pos = (sample_time - grid.t0) / grid.dt;
                if !(pos >= 0.0 && pos <= (grid.count - 2) as f64) {
                    return Err(Error::invalid(
                        "adc.sample_time",
                        format!("{sample_time:e} s lies outside the simulated period"),
                    ));
                }
                let last_index = pos.floor() as usize + 1;
                let mut wc = WaveChain {
                    synth,
                    filter,
                    sample_time,
                    last_index,
                    grid,
                    zeta_scale: 1.0,
                };
                let mut scratch = Vec::new();
                let (m1, m2) = (laser.mean_s1, laser.mean_s2);
                let hi = wc.sample(m1, m2, 0.0, 0.0, &mut scratch);
                let lo = wc.sample(m1, m2, std::f64::consts::PI, 0.0, &mut scratch);
                let mean = 0.5 * (hi + lo);
                wc.zeta_scale = mean / laser.mean_level();
                adc.sample_time = Some(sample_time);
                (mean, QuantumPdfParams::new(lo, hi)?, Some(wc))
            }
        };
        if let Some(fill) = scenario.range_fill {
            adc.calibrate(mean_level, ideal.width(), fill)?;
        }
        adc.validate()?;
        Ok(Chain {
            scenario: *scenario,
            adc,
            ideal,
            mean_level,
            wave,
        })
    }

    /// Ideal support in volts.
    pub fn ideal_volts(&self) -> QuantumPdfParams {
        QuantumPdfParams {
            s_min: self.adc.to_volts(self.ideal.s_min),
            s_max: self.adc.to_volts(self.ideal.s_max),
        }
    }

    pub fn sample_time(&self) -> Option<f64> {
        self.wave.as_ref().map(|w| w.sample_time)
    }

    /// Sampled value of one event in model units, noise included.
    pub fn sampled_value(&self, ev: &InterferenceEvent, scratch: &mut Vec<f64>) -> f64 {
        match &self.wave {
            None => ev.integral_signal,
            Some(w) => w.sample(ev.s1, ev.s2, ev.delta_phi, ev.delta, scratch) + ev.zeta * w.zeta_scale,
        }
    }

    /// Filtered noiseless waveform at the mean powers, for plotting.
    pub fn mean_waveform(&self, delta_phi: f64, delta: f64) -> Option<crate::signal::Waveform> {
        let w = self.wave.as_ref()?;
        let laser = &self.scenario.signal.laser;
        let mut f = w.filter.clone();
        f.reset();
        let mut raw = Vec::new();
        w.synth.fill(laser.mean_s1, laser.mean_s2, delta_phi, delta, w.grid.count, &mut raw);
        Some(crate::signal::Waveform {
            t0: w.grid.t0,
            dt: w.grid.dt,
            samples: raw.into_iter().map(|x| f.process(x)).collect(),
        })
    }

    /// Analog histogram: `ANALOG_SUBBINS` bins per code covering at least
    /// `[-ΔU/2, 3ΔU/2)`, with an edge on the ideal lower support bound so the
    /// integrable singularity there never straddles a bin.
    pub fn analog_histogram(&self) -> EmpiricalPdf {
        let du = self.adc.delta_u;
        let h = self.adc.lsb() / ANALOG_SUBBINS as f64;
        let s_min = self.ideal_volts().s_min;
        let lo = s_min - ((s_min + 0.5 * du) / h).ceil().max(0.0) * h;
        let bins = ((1.5 * du - lo) / h).ceil() as usize;
        EmpiricalPdf::new(lo, lo + bins as f64 * h, bins).expect("valid range")
    }

    pub fn code_histogram(&self) -> EmpiricalPdf {
        EmpiricalPdf::new(0.0, self.adc.delta_u, self.adc.levels()).expect("valid range")
    }
}

fn filtered_peak_time(synth: &PairSynth, filter: &Biquad, s1: f64, s2: f64, grid: TimeGrid) -> f64 {
    // Envelope p1 + p2: average of the constructive and destructive cases.
    let mut a = Vec::new();
    let mut b = Vec::new();
    synth.fill(s1, s2, 0.0, 0.0, grid.count, &mut a);
    synth.fill(s1, s2, std::f64::consts::PI, 0.0, grid.count, &mut b);
    let mut f = filter.clone();
    f.reset();
    let mut best = (0usize, f64::MIN);
    for i in 0..grid.count.saturating_sub(1) {
        let y = f.process(0.5 * (a[i] + b[i]));
        if y > best.1 {
            best = (i, y);
        }
    }
    grid.time(best.0)
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub codes: EmpiricalPdf,
    pub analog: EmpiricalPdf,
    /// Quantized samples in draw order, when requested.
    pub samples: Option<Vec<u16>>,
    pub draws: u64,
}

struct ChunkOut {
    codes: EmpiricalPdf,
    analog: EmpiricalPdf,
    samples: Option<Vec<u16>>,
}

fn run_chunk(chain: &Chain, sampler: &EventSampler, mc: &McSettings, chunk: usize, keep: bool) -> ChunkOut {
    let start = chunk * CHUNK;
    let m = CHUNK.min(mc.samples - start);
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(chunk as u64);
    let cells: Option<Vec<usize>> = match mc.phase_sampling {
        PhaseSampling::Stratified => {
            let mut c: Vec<usize> = (0..m).collect();
            c.shuffle(&mut rng);
            Some(c)
        }
        PhaseSampling::Independent => None,
    };
    let mut codes = chain.code_histogram();
    let mut analog = chain.analog_histogram();
    let mut samples = keep.then(|| Vec::with_capacity(m));
    let mut scratch = Vec::new();
    for i in 0..m {
        let ev = match &cells {
            Some(c) => {
                let phi = std::f64::consts::TAU * (c[i] as f64 + rng.random::<f64>()) / m as f64;
                sampler.sample_with_phase(&mut rng, phi)
            }
            None => sampler.sample(&mut rng),
        };
        let v = chain.adc.to_volts(chain.sampled_value(&ev, &mut scratch));
        let code = chain.adc.quantize(v);
        codes.add_index(code as usize);
        analog.add(v);
        if let Some(s) = samples.as_mut() {
            s.push(code as u16);
        }
    }
    ChunkOut {
        codes,
        analog,
        samples,
    }
}

/// Runs the Monte-Carlo simulation; `keep_samples` retains the quantized
/// sequence.
pub fn simulate(chain: &Chain, mc: &McSettings, keep_samples: bool) -> Result<SimOutput> {
    if mc.samples == 0 {
        return Err(Error::invalid("mc_samples", "must be > 0"));
    }
    let sampler = EventSampler::new(&chain.scenario.signal)?;
    let chunks = mc.samples.div_ceil(CHUNK);

    #[cfg(feature = "parallel")]
    let parts: Vec<ChunkOut> = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(chain, &sampler, mc, c, keep_samples))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<ChunkOut> = (0..chunks)
        .map(|c| run_chunk(chain, &sampler, mc, c, keep_samples))
        .collect();

    let mut codes = chain.code_histogram();
    let mut analog = chain.analog_histogram();
    let mut samples = keep_samples.then(|| Vec::with_capacity(mc.samples));
    for p in parts {
        codes.merge(&p.codes)?;
        analog.merge(&p.analog)?;
        if let (Some(all), Some(s)) = (samples.as_mut(), p.samples) {
            all.extend(s);
        }
    }
    Ok(SimOutput {
        codes,
        analog,
        samples,
        draws: mc.samples as u64,
    })
}

/// Simulated run together with its reduction report.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub output: SimOutput,
    pub b: std::result::Result<BStatistic, String>,
    pub report: ReductionReport,
}

/// Simulates and evaluates every reduction quantity with the ideal support
/// taken from the model.
pub fn analyze_scenario(chain: &Chain, mc: &McSettings, b_opts: &BOptions, keep_samples: bool) -> Result<Analysis> {
    let output = simulate(chain, mc, keep_samples)?;
    let b = estimate_b(&output.codes, b_opts).map_err(|e| e.to_string());
    let enob = crate::adc::enob(chain.adc.sinad_db)?;
    let report = ReductionReport::compute(&ReportInputs {
        n_bits: chain.adc.n,
        delta_u: chain.adc.delta_u,
        enob: enob.min(chain.adc.n as f64),
        codes: &output.codes,
        analog: &output.analog,
        analog_draws: output.draws,
        ideal: chain.ideal_volts(),
        alignment: Alignment::Model,
        b_value: b.as_ref().ok().map(|b| b.value),
        b_options: *b_opts,
    })?;
    Ok(Analysis { output, b, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{LaserParams, NoiseParams, PhaseModel, PulseShape};

    pub(crate) fn scenario(path: SignalPath) -> Scenario {
        Scenario {
            signal: PulseInterferenceConfig {
                pulse: PulseShape::gaussian(20e-12),
                laser: LaserParams {
                    alpha: 4.0,
                    repetition_period: 400e-12,
                    mean_s1: 1.0,
                    mean_s2: 1.0,
                    sigma_s1: 0.0,
                    sigma_s2: 0.0,
                },
                noise: NoiseParams::default(),
                phase: PhaseModel::Uniform,
            },
            adc: AdcConfig {
                n: 8,
                delta_u: 1.0,
                bandwidth: 2.5e9,
                sample_time: None,
                gain: 1.0,
                offset: 0.0,
                sinad_db: 40.0,
            },
            path,
            range_fill: Some(0.8),
        }
    }

    #[test]
    fn chunking_is_reproducible() {
        let chain = Chain::new(&scenario(SignalPath::Integral)).unwrap();
        let mc = McSettings {
            samples: 3 * CHUNK + 17,
            seed: 9,
            phase_sampling: PhaseSampling::Stratified,
        };
        let a = simulate(&chain, &mc, true).unwrap();
        let b = simulate(&chain, &mc, true).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.codes, b.codes);
        assert_eq!(a.codes.total(), mc.samples as u64);
        assert_eq!(a.samples.unwrap().len(), mc.samples);
    }

    #[test]
    fn stratified_noiseless_halves_exactly() {
        let chain = Chain::new(&scenario(SignalPath::Integral)).unwrap();
        let mc = McSettings {
            samples: 200_000,
            seed: 1,
            phase_sampling: PhaseSampling::Stratified,
        };
        let out = simulate(&chain, &mc, false).unwrap();
        let ideal = chain.ideal_volts();
        use crate::pdf::Density;
        let half = out.analog.mass(ideal.s_min, ideal.midpoint());
        assert!((half - 0.5).abs() < 1e-4, "{half}");
    }

    #[test]
    fn waveform_chain_is_calibrated() {
        let chain = Chain::new(&scenario(SignalPath::Waveform)).unwrap();
        let v = chain.ideal_volts();
        assert!((0.5 * (v.s_min + v.s_max) - 0.5).abs() < 1e-12);
        assert!((v.s_max - v.s_min - 0.8).abs() < 1e-12);
        // Equal arms, no jitter: the destructive case is dark.
        assert!(chain.ideal.s_min.abs() < 1e-9 * chain.ideal.s_max);
        assert!(chain.sample_time().is_some());
    }

    #[test]
    fn waveform_and_integral_paths_agree_without_jitter() {
        use crate::pdf::Density;
        let mc = McSettings {
            samples: 100_000,
            seed: 4,
            phase_sampling: PhaseSampling::Stratified,
        };
        let mut s = scenario(SignalPath::Integral);
        s.signal.laser.sigma_s1 = 0.05;
        s.signal.laser.sigma_s2 = 0.05;
        let a = simulate(&Chain::new(&s).unwrap(), &mc, false).unwrap();
        s.path = SignalPath::Waveform;
        let b = simulate(&Chain::new(&s).unwrap(), &mc, false).unwrap();
        for k in 0..8 {
            let (lo, hi) = (k as f64 / 8.0, (k + 1) as f64 / 8.0);
            assert!((a.analog.mass(lo, hi) - b.analog.mass(lo, hi)).abs() < 1e-6);
        }
    }
}
