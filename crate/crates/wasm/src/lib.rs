//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: simulate a pulse-shape panel, evaluate the reduction
//! factors at one noise level, and hash samples with the Toeplitz extractor.
//! Each has a plain Rust core (tested natively) and a thin exported wrapper.

use wasm_bindgen::prelude::*;

use pulseqrng::config::{ExperimentConfig, ScenarioKind};
use pulseqrng::extract::{extraction_pipeline, monobit_z, BitBuffer, ExtractorConfig, SeedSource};
use pulseqrng::reduction::Reduction;
use pulseqrng::sim::{analyze_scenario, Chain, PhaseSampling};
use pulseqrng::Error;

const MAX_DRAWS: usize = 2_000_000;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn draws(samples: usize) -> Result<usize, Error> {
    if !(pulseqrng::config::MIN_MC_SAMPLES..=MAX_DRAWS).contains(&samples) {
        return Err(Error::Config(format!(
            "samples must lie in {}..={MAX_DRAWS}",
            pulseqrng::config::MIN_MC_SAMPLES
        )));
    }
    Ok(samples)
}

/// Code histogram and mean pulse of one bandwidth/jitter setting.
#[wasm_bindgen]
pub struct PdfView {
    probabilities: Vec<f64>,
    pulse: Vec<f64>,
    pulse_dt_ps: f64,
    sample_time_ps: f64,
    b: Option<f64>,
    codes: Vec<u8>,
}

#[wasm_bindgen]
impl PdfView {
    /// Probability of each ADC code.
    pub fn probabilities(&self) -> Vec<f64> {
        self.probabilities.clone()
    }

    /// Filtered mean pulse in ADC volts, starting at `t = 0`.
    pub fn pulse(&self) -> Vec<f64> {
        self.pulse.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn pulse_dt_ps(&self) -> f64 {
        self.pulse_dt_ps
    }

    #[wasm_bindgen(getter)]
    pub fn sample_time_ps(&self) -> f64 {
        self.sample_time_ps
    }

    /// Bimodality statistic; `undefined` for a unimodal histogram.
    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Option<f64> {
        self.b
    }

    /// The simulated 8-bit codes, one per byte.
    pub fn codes(&self) -> Vec<u8> {
        self.codes.clone()
    }
}

pub fn simulate_panel(
    long_pulses: bool,
    bandwidth_ghz: f64,
    jitter_ps: f64,
    sigma_zeta: f64,
    samples: usize,
    seed: u64,
) -> Result<PdfView, Error> {
    let kind = if long_pulses { ScenarioKind::Fig3 } else { ScenarioKind::Fig2 };
    let mut cfg = ExperimentConfig::preset(kind);
    cfg.mc_samples = draws(samples)?;
    cfg.rng_seed = seed;
    cfg.phase_sampling = PhaseSampling::Independent;
    cfg.model.adc.bandwidth = bandwidth_ghz * 1e9;
    cfg.model.signal.noise.sigma_jitter = jitter_ps * 1e-12;
    cfg.model.signal.noise.sigma_zeta = sigma_zeta;
    cfg.validate()?;

    let chain = Chain::new(&cfg.model)?;
    let a = analyze_scenario(&chain, &cfg.mc(), &cfg.b_options, true)?;
    let hi = chain.mean_waveform(0.0, 0.0).expect("waveform path");
    let lo = chain.mean_waveform(std::f64::consts::PI, 0.0).expect("waveform path");
    // Codes are 8-bit in both presets.
    let codes = a.output.samples.unwrap_or_default().into_iter().map(|c| c as u8).collect();
    Ok(PdfView {
        probabilities: (0..a.output.codes.bins()).map(|i| a.output.codes.probability(i)).collect(),
        pulse: hi
            .samples
            .iter()
            .zip(&lo.samples)
            .map(|(x, y)| chain.adc.to_volts(0.5 * (x + y)))
            .collect(),
        pulse_dt_ps: hi.dt * 1e12,
        sample_time_ps: chain.sample_time().unwrap_or(f64::NAN) * 1e12,
        b: a.b.ok().map(|b| b.value),
        codes,
    })
}

#[wasm_bindgen]
pub fn pulse_pdf(
    long_pulses: bool,
    bandwidth_ghz: f64,
    jitter_ps: f64,
    sigma_zeta: f64,
    samples: usize,
    seed: u32,
) -> Result<PdfView, JsError> {
    simulate_panel(long_pulses, bandwidth_ghz, jitter_ps, sigma_zeta, samples, seed as u64).map_err(js)
}

/// Reduction factors of one noise setting; untrusted values are `undefined`.
#[wasm_bindgen]
pub struct Factors {
    strict: Option<f64>,
    relaxed: Option<f64>,
    gamma_nq: f64,
    gamma_nq_gamma: Option<f64>,
    b: Option<f64>,
}

#[wasm_bindgen]
impl Factors {
    #[wasm_bindgen(getter)]
    pub fn strict(&self) -> Option<f64> {
        self.strict
    }

    #[wasm_bindgen(getter)]
    pub fn relaxed(&self) -> Option<f64> {
        self.relaxed
    }

    #[wasm_bindgen(getter)]
    pub fn gamma_nq(&self) -> f64 {
        self.gamma_nq
    }

    #[wasm_bindgen(getter)]
    pub fn gamma_nq_gamma(&self) -> Option<f64> {
        self.gamma_nq_gamma
    }

    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Option<f64> {
        self.b
    }
}

pub fn compute_factors(n_bits: u32, sigma_s: f64, sigma_zeta: f64, samples: usize) -> Result<Factors, Error> {
    let mut cfg = ExperimentConfig::preset(ScenarioKind::Fig4);
    cfg.mc_samples = draws(samples)?;
    cfg.model.adc.n = n_bits;
    cfg.model.signal.laser.sigma_s1 = sigma_s;
    cfg.model.signal.laser.sigma_s2 = sigma_s;
    cfg.model.signal.noise.sigma_zeta = sigma_zeta;
    cfg.validate()?;
    let chain = Chain::new(&cfg.model)?;
    let r = analyze_scenario(&chain, &cfg.mc(), &cfg.b_options, false)?.report;
    Ok(Factors {
        strict: r.gamma_adc_strict.value(),
        relaxed: r.gamma_adc_relaxed.value(),
        gamma_nq: r.gamma_nq,
        gamma_nq_gamma: Reduction::Finite(r.gamma_nq).times(r.gamma_comparator).value(),
        b: r.b_value,
    })
}

#[wasm_bindgen]
pub fn reduction_factors(n_bits: u32, sigma_s: f64, sigma_zeta: f64, samples: usize) -> Result<Factors, JsError> {
    compute_factors(n_bits, sigma_s, sigma_zeta, samples).map_err(js)
}

/// Packed extractor output with a quick balance check.
#[wasm_bindgen]
pub struct ExtractView {
    bytes: Vec<u8>,
    out_bits: usize,
    seed_raw_bits: usize,
    monobit_z: f64,
}

#[wasm_bindgen]
impl ExtractView {
    pub fn bytes(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    #[wasm_bindgen(getter)]
    pub fn seed_raw_bits(&self) -> usize {
        self.seed_raw_bits
    }

    #[wasm_bindgen(getter)]
    pub fn monobit_z(&self) -> f64 {
        self.monobit_z
    }
}

/// Hashes `raw` (bits LSB-first within each byte) with compression `gamma`;
/// the seed is debiased from the head of the stream.
pub fn extract_bytes(raw: &[u8], gamma: f64, block_len: usize) -> Result<ExtractView, Error> {
    let cfg = ExtractorConfig::from_reduction(block_len, Reduction::Finite(gamma))?;
    let bits = BitBuffer::from_bytes(raw, None)?;
    let ex = extraction_pipeline(&bits, &cfg, SeedSource::FromRaw)?;
    Ok(ExtractView {
        bytes: ex.output.to_bytes(),
        out_bits: ex.output.len(),
        seed_raw_bits: ex.seed_raw_bits,
        monobit_z: monobit_z(&ex.output),
    })
}

#[wasm_bindgen]
pub fn toeplitz_extract(raw: &[u8], gamma: f64, block_len: usize) -> Result<ExtractView, JsError> {
    extract_bytes(raw, gamma, block_len).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_is_normalized_and_bimodal_without_jitter() {
        let v = simulate_panel(false, 20.0, 0.0, 0.0, 50_000, 1).unwrap();
        assert_eq!(v.probabilities.len(), 256);
        assert!((v.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(v.b.is_some());
        assert_eq!(v.codes.len(), 50_000);
        assert!(v.sample_time_ps > 0.0);
    }

    #[test]
    fn draw_count_is_bounded() {
        assert!(matches!(simulate_panel(false, 20.0, 0.0, 0.0, 10, 1), Err(Error::Config(_))));
        assert!(compute_factors(10, 0.0, 0.0, MAX_DRAWS + 1).is_err());
    }

    #[test]
    fn noiseless_factors_reduce_to_quantization() {
        let f = compute_factors(10, 0.0, 0.0, 100_000).unwrap();
        assert!((f.gamma_nq_gamma.unwrap() - f.gamma_nq).abs() < 1e-12);
    }

    #[test]
    fn extraction_of_simulated_codes() {
        let v = simulate_panel(false, 20.0, 0.0, 0.02, 200_000, 3).unwrap();
        let ex = extract_bytes(&v.codes, 3.2, 4096).unwrap();
        assert!(ex.out_bits > 100_000);
        assert_eq!(ex.bytes.len(), ex.out_bits.div_ceil(8));
        assert!(matches!(extract_bytes(&[0u8; 16], 2.0, 4096), Err(Error::NeedsMoreEntropy { .. })));
    }
}
