use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pulseqrng::config::{ExperimentConfig, ScenarioKind};
use pulseqrng::extract::{seed_len, von_neumann, BitBuffer, SeedSource, ToeplitzSeed};
use pulseqrng::io;
use pulseqrng::pdf::{ConvolvedArcsine, QuantumPdfParams};
use pulseqrng::reduction::{h_inf_first_bin, h_inf_q_closed_form, Reduction};
use pulseqrng::runner;
use pulseqrng::sim::{analyze_scenario, simulate, Chain};

fn bernoulli(p: f64, len: usize, seed: u64) -> BitBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_bool(p)).collect()
}

#[test]
fn von_neumann_is_unbiased_at_any_bias() {
    for (i, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let out = von_neumann(&bernoulli(p, 400_000, i as u64));
        let len = out.len() as f64;
        let expected = 400_000.0 * p * (1.0 - p);
        assert!((len - expected).abs() < 5.0 * expected.sqrt(), "p={p}: {len} bits");
        let mean = out.count_ones() as f64 / len;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / len.sqrt(), "p={p}: mean {mean}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Smearing the arcsine never concentrates the first code.
    #[test]
    fn noise_never_lowers_first_code_entropy_below_ideal(
        r in 0.5f64..1.0,
        n in 4u32..13,
        rel_sigma in 0.0f64..0.05,
    ) {
        let ideal = QuantumPdfParams::new(0.5 - r / 2.0, 0.5 + r / 2.0).unwrap();
        let smeared = ConvolvedArcsine::new(ideal, rel_sigma * r).unwrap();
        let h_q = h_inf_q_closed_form(r, n).unwrap();
        let h = h_inf_first_bin(&smeared, ideal.s_min, 1.0, n);
        prop_assert!(h >= h_q - 1e-9, "h={h} h_q={h_q}");
    }
}

#[test]
fn strict_factor_diverges_before_relaxed() {
    let mut cfg = ExperimentConfig::preset(ScenarioKind::Fig4);
    cfg.mc_samples = 200_000;
    cfg.sweep.n_bits = vec![10];
    cfg.sweep.sigma_s = 0.01;
    cfg.sweep.sigma_zeta = vec![0.0, 0.002, 0.004, 0.008, 0.016];
    let pts = runner::noise_sweep(&cfg).unwrap();
    let strict = pts.iter().position(|p| p.report.gamma_adc_strict.is_untrusted()).unwrap();
    assert!(pts.iter().all(|p| !p.report.gamma_adc_relaxed.is_untrusted()));
    for p in &pts[..strict] {
        assert!(p.report.gamma_adc_strict.order_key() >= p.report.gamma_adc_relaxed.order_key());
    }
}

#[test]
fn curve_lookup_recovers_the_simulated_factor() {
    let mut curve_cfg = ExperimentConfig::preset(ScenarioKind::Fig6);
    curve_cfg.mc_samples = 300_000;
    curve_cfg.sweep.n_bits = vec![10];
    let rows = runner::run_curve(&curve_cfg).unwrap();
    let curve = runner::select_curve(&rows, 10, None).unwrap();

    for (k, sz) in [0.01, 0.03].into_iter().enumerate() {
        let mut model = curve_cfg.model;
        model.adc.n = 10;
        model.signal.noise.sigma_zeta = sz;
        let chain = Chain::new(&model).unwrap();
        let mut mc = curve_cfg.mc();
        mc.seed = 100 + k as u64;
        let a = analyze_scenario(&chain, &mc, &curve_cfg.b_options, true).unwrap();
        let truth = Reduction::Finite(a.report.gamma_nq).times(a.report.gamma_comparator).value().unwrap();
        let codes = a.output.samples.unwrap();
        let report = runner::run_analyze(&codes, &model.adc, &curve, &curve_cfg.b_options).unwrap();
        let found = report.curve_gamma_nq_gamma.unwrap();
        assert!((found / truth - 1.0).abs() < 0.10, "sigma_zeta={sz}: {found} vs {truth}");
    }
}

#[test]
fn noiseless_analysis_reduces_to_quantization_and_enob() {
    let mut cfg = ExperimentConfig::preset(ScenarioKind::Fig2);
    cfg.model.signal.laser.sigma_s1 = 0.0;
    cfg.model.signal.laser.sigma_s2 = 0.0;
    cfg.mc_samples = 200_000;
    let run = runner::run_simulate(&cfg).unwrap();
    let r = &run.analysis.report;
    assert_eq!(r.gamma_comparator, Reduction::Finite(1.0));
    assert!(!r.model_mismatch);
    let g = r.gamma_total.value().unwrap();
    assert!((g - r.gamma_nq * r.gamma_enob).abs() < 1e-12 * g);
}

#[test]
fn output_length_follows_the_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let codes: Vec<u16> = (0..1_000_000).map(|_| rng.random_range(0..256)).collect();
    let (n, m) = (4096, 2048);
    let seed_bits: BitBuffer = (0..seed_len(n, m)).map(|_| rng.random::<bool>()).collect();
    let seed = ToeplitzSeed::new(seed_bits, n, m).unwrap();
    let ex = runner::run_extract(&codes, 8, Reduction::Finite(2.0), n, SeedSource::Provided(seed)).unwrap();
    assert_eq!(ex.seed_raw_bits, 0);
    assert!((ex.output.len() as i64 - 4_000_000).abs() <= m as i64);
    assert_eq!(ex.output.len(), ex.blocks * m);
}

#[test]
fn simulation_outputs_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(ScenarioKind::Fig4);
    cfg.mc_samples = 50_000;
    cfg.output.write_samples = true;
    let run = runner::run_simulate(&cfg).unwrap();
    let paths = runner::write_simulation(&run, &cfg, tmp.path()).unwrap();
    assert!(paths.iter().all(|p| p.exists()));

    let manifest = std::fs::read_to_string(tmp.path().join("manifest.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&manifest).unwrap(), cfg);

    let set = io::read_samples(&tmp.path().join("samples.bin")).unwrap();
    assert_eq!(set.n_bits, Some(cfg.model.adc.n));
    let again = simulate(&run.chain, &cfg.mc(), true).unwrap();
    assert_eq!(set.codes, again.samples.unwrap());
    let hist = runner::histogram_from_codes(&set.codes, &cfg.model.adc).unwrap();
    assert_eq!(hist.counts(), run.analysis.output.codes.counts());
}
