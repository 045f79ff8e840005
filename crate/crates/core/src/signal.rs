//! Random interference of two gain-switched laser pulses.
//!
//! Each pulse of a gain-switched laser starts from spontaneous emission and
//! carries an independent optical phase. When two pulses overlap in an
//! unbalanced interferometer the integrated intensity is
//!
//! ```text
//! S = s1 + s2 + 2 κ √(s1 s2) cos ΔΦ,     κ = exp(-(1 + α²) δ² / (8 w²))
//! ```
//!
//! where `δ` is the overlap error (timing jitter), `α` the linewidth
//! enhancement factor and `w` the RMS width of the Gaussian intensity
//! envelope. Photodetector noise `ζ` is added on top of `S`.
//!
//! The time-domain model uses the transient (Henry) chirp
//! `φ(t) = (α/2) ln g(t)` of the unit-peak envelope `g`. For a Gaussian
//! envelope `g = exp(-t²/2w²)` the chirp is linear in frequency and the
//! time integral of the interference term reproduces `κ` exactly.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Gaussian,
    /// Plateau of duration `width` with Gaussian rise and fall edges of RMS
    /// width `edge_width`. Only the rising edge is chirped.
    FlatTop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// RMS width of the intensity envelope (Gaussian) or plateau duration
    /// (flat-top), seconds.
    pub width: f64,
    /// RMS width of the flat-top edges, seconds. Ignored for Gaussian pulses.
    #[serde(default)]
    pub edge_width: f64,
    pub peak_power: f64,
}

impl PulseShape {
    pub fn gaussian(width: f64) -> Self {
        PulseShape {
            kind: PulseKind::Gaussian,
            width,
            edge_width: 0.0,
            peak_power: 1.0,
        }
    }

    pub fn flat_top(width: f64, edge_width: f64) -> Self {
        PulseShape {
            kind: PulseKind::FlatTop,
            width,
            edge_width,
            peak_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::invalid("pulse.width", "must be > 0"));
        }
        if self.kind == PulseKind::FlatTop && !(self.edge_width > 0.0) {
            return Err(Error::invalid(
                "pulse.edge_width",
                "must be > 0 for flat-top pulses",
            ));
        }
        if !(self.peak_power > 0.0) {
            return Err(Error::invalid("pulse.peak_power", "must be > 0"));
        }
        Ok(())
    }

    /// Unit-peak envelope. Gaussian pulses are centred on `t = 0`; flat-top
    /// plateaus start at `t = 0`.
    pub fn envelope(&self, t: f64) -> f64 {
        match self.kind {
            PulseKind::Gaussian => (-t * t / (2.0 * self.width * self.width)).exp(),
            PulseKind::FlatTop => {
                let e2 = 2.0 * self.edge_width * self.edge_width;
                if t < 0.0 {
                    (-t * t / e2).exp()
                } else if t <= self.width {
                    1.0
                } else {
                    let d = t - self.width;
                    (-d * d / e2).exp()
                }
            }
        }
    }

    /// Transient chirp phase `(α/2) ln g(t)`, radians.
    pub fn chirp_phase(&self, t: f64, alpha: f64) -> f64 {
        match self.kind {
            PulseKind::Gaussian => -alpha * t * t / (4.0 * self.width * self.width),
            PulseKind::FlatTop if t < 0.0 => {
                -alpha * t * t / (4.0 * self.edge_width * self.edge_width)
            }
            PulseKind::FlatTop => 0.0,
        }
    }

    /// Time scale the simulation grid has to resolve.
    pub fn resolving_width(&self) -> f64 {
        match self.kind {
            PulseKind::Gaussian => self.width,
            PulseKind::FlatTop => self.edge_width,
        }
    }

    /// `∫ peak_power · g(t) dt`.
    pub fn energy(&self) -> f64 {
        let root_2pi = TAU.sqrt();
        match self.kind {
            PulseKind::Gaussian => self.peak_power * root_2pi * self.width,
            PulseKind::FlatTop => self.peak_power * (self.width + root_2pi * self.edge_width),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Linewidth enhancement (Henry) factor.
    pub alpha: f64,
    pub repetition_period: f64,
    pub mean_s1: f64,
    pub mean_s2: f64,
    /// Relative standard deviations of the arm signals.
    pub sigma_s1: f64,
    pub sigma_s2: f64,
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid("laser.alpha", "must be >= 0"));
        }
        if !(self.repetition_period > 0.0) {
            return Err(Error::invalid("laser.repetition_period", "must be > 0"));
        }
        for (name, mean) in [("laser.mean_s1", self.mean_s1), ("laser.mean_s2", self.mean_s2)] {
            if !(mean > 0.0) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        for (name, sigma) in [("laser.sigma_s1", self.sigma_s1), ("laser.sigma_s2", self.sigma_s2)] {
            if !(0.0..=0.5).contains(&sigma) {
                return Err(Error::invalid(name, "must lie in [0, 0.5]"));
            }
        }
        Ok(())
    }

    pub fn mean_level(&self) -> f64 {
        self.mean_s1 + self.mean_s2
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Standard deviation of the overlap error `δ`, seconds.
    pub sigma_jitter: f64,
    /// Standard deviation of `ζ` relative to the mean level `s1 + s2`.
    pub sigma_zeta: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_jitter >= 0.0) {
            return Err(Error::invalid("noise.sigma_jitter", "must be >= 0"));
        }
        if !(self.sigma_zeta >= 0.0) {
            return Err(Error::invalid("noise.sigma_zeta", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    #[default]
    Uniform,
}

impl PhaseModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PhaseModel::Uniform => {
                let phi = rng.random::<f64>() * TAU;
                if phi >= TAU {
                    0.0
                } else {
                    phi
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseInterferenceConfig {
    pub pulse: PulseShape,
    pub laser: LaserParams,
    pub noise: NoiseParams,
    #[serde(default)]
    pub phase: PhaseModel,
}

impl PulseInterferenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.laser.validate()?;
        self.noise.validate()
    }

    /// Visibility for a given overlap error, using the pulse's resolving
    /// width (the Gaussian width, or the edge width of a flat-top pulse).
    pub fn kappa(&self, delta: f64) -> f64 {
        let w = self.pulse.resolving_width();
        let x = delta / w;
        (-(1.0 + self.laser.alpha * self.laser.alpha) * x * x / 8.0).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferenceEvent {
    pub delta_phi: f64,
    pub s1: f64,
    pub s2: f64,
    pub delta: f64,
    pub zeta: f64,
    /// Integrated interference signal plus photodetector noise.
    pub integral_signal: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn span(&self) -> f64 {
        self.count as f64 * self.dt
    }

    /// One repetition period sampled at a tenth of the pulse's resolving
    /// width, starting a quarter period before the pulse reference.
    pub fn for_pulse(pulse: &PulseShape, period: f64) -> Self {
        let dt = pulse.resolving_width() / 10.0;
        let count = (period / dt).ceil() as usize;
        let t0 = match pulse.kind {
            PulseKind::Gaussian => -period / 2.0,
            PulseKind::FlatTop => -period / 4.0,
        };
        TimeGrid { t0, dt, count }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.samples.len().saturating_sub(1))
    }

    /// Trapezoidal time integral.
    pub fn integral(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = self.samples[1..n - 1].iter().sum();
        self.dt * (inner + 0.5 * (self.samples[0] + self.samples[n - 1]))
    }
}

/// Interference visibility `exp(-(1 + α²) δ² / 8w²)`.
pub fn visibility_kappa(delta: f64, alpha: f64, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::invalid("w", "pulse width must be > 0"));
    }
    let x = delta / w;
    Ok((-(1.0 + alpha * alpha) * x * x / 8.0).exp())
}

/// `s1 + s2 + 2κ√(s1 s2) cos ΔΦ`.
pub fn integral_signal(s1: f64, s2: f64, kappa: f64, delta_phi: f64) -> Result<f64> {
    if !(s1 >= 0.0) || !(s2 >= 0.0) {
        return Err(Error::invalid("s", "arm signals must be non-negative"));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid("kappa", "must lie in [0, 1]"));
    }
    Ok(s1 + s2 + 2.0 * kappa * (s1 * s2).sqrt() * delta_phi.cos())
}

/// Pre-built distributions for repeated event draws.
#[derive(Clone, Debug)]
pub struct EventSampler {
    config: PulseInterferenceConfig,
    s1: Normal<f64>,
    s2: Normal<f64>,
    jitter: Normal<f64>,
    zeta: Normal<f64>,
}

impl EventSampler {
    pub fn new(config: &PulseInterferenceConfig) -> Result<Self> {
        config.validate()?;
        let l = &config.laser;
        let normal = |mean: f64, sd: f64| Normal::new(mean, sd).expect("validated");
        Ok(EventSampler {
            config: *config,
            s1: normal(l.mean_s1, l.sigma_s1 * l.mean_s1),
            s2: normal(l.mean_s2, l.sigma_s2 * l.mean_s2),
            jitter: normal(0.0, config.noise.sigma_jitter),
            zeta: normal(0.0, config.noise.sigma_zeta * l.mean_level()),
        })
    }

    pub fn config(&self) -> &PulseInterferenceConfig {
        &self.config
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InterferenceEvent {
        let phi = self.config.phase.sample(rng);
        self.sample_with_phase(rng, phi)
    }

    /// Draws everything except the phase, which the caller supplies (used
    /// for stratified phase sampling in Monte-Carlo batches).
    pub fn sample_with_phase<R: Rng + ?Sized>(&self, rng: &mut R, delta_phi: f64) -> InterferenceEvent {
        let s1 = positive(&self.s1, rng);
        let s2 = positive(&self.s2, rng);
        let delta = self.jitter.sample(rng);
        let zeta = self.zeta.sample(rng);
        let kappa = self.config.kappa(delta);
        let clean = s1 + s2 + 2.0 * kappa * (s1 * s2).sqrt() * delta_phi.cos();
        InterferenceEvent {
            delta_phi,
            s1,
            s2,
            delta,
            zeta,
            integral_signal: clean + zeta,
        }
    }
}

// Truncated Gaussian by resampling.
fn positive<R: Rng + ?Sized>(d: &Normal<f64>, rng: &mut R) -> f64 {
    loop {
        let x = d.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

pub fn draw_event<R: Rng + ?Sized>(rng: &mut R, config: &PulseInterferenceConfig) -> Result<InterferenceEvent> {
    Ok(EventSampler::new(config)?.sample(rng))
}

fn check_grid(config: &PulseInterferenceConfig, grid: &TimeGrid) -> Result<()> {
    if !(grid.dt > 0.0) || grid.count < 2 {
        return Err(Error::invalid("grid", "need dt > 0 and at least two points"));
    }
    if grid.dt > config.pulse.resolving_width() / 10.0 * (1.0 + 1e-9) {
        return Err(Error::invalid(
            "grid.dt",
            format!(
                "{:e} s does not resolve the pulse (need <= {:e} s)",
                grid.dt,
                config.pulse.resolving_width() / 10.0
            ),
        ));
    }
    if grid.span() < config.laser.repetition_period * (1.0 - 1e-9) {
        return Err(Error::invalid(
            "grid",
            "must span at least one repetition period",
        ));
    }
    Ok(())
}

/// Instantaneous interference intensity
/// `p1(t) + p2(t-δ) + 2√(p1 p2) cos(ΔΦ + φ(t) - φ(t-δ))` with
/// `p_i = s_i · peak_power · g`.
pub fn pulse_pair_waveform(
    config: &PulseInterferenceConfig,
    s1: f64,
    s2: f64,
    delta_phi: f64,
    delta: f64,
    grid: TimeGrid,
) -> Result<Waveform> {
    config.validate()?;
    check_grid(config, &grid)?;
    let synth = PairSynth::new(config, grid);
    let mut samples = Vec::with_capacity(grid.count);
    synth.fill(s1, s2, delta_phi, delta, grid.count, &mut samples);
    Ok(Waveform {
        t0: grid.t0,
        dt: grid.dt,
        samples,
    })
}

/// Waveform at the mean arm powers.
pub fn interference_waveform(
    config: &PulseInterferenceConfig,
    delta_phi: f64,
    delta: f64,
    grid: TimeGrid,
) -> Result<Waveform> {
    pulse_pair_waveform(
        config,
        config.laser.mean_s1,
        config.laser.mean_s2,
        delta_phi,
        delta,
        grid,
    )
}

/// Per-grid cache of the first pulse; the second, delayed pulse is
/// evaluated per event.
#[derive(Clone, Debug)]
pub(crate) struct PairSynth {
    pulse: PulseShape,
    alpha: f64,
    grid: TimeGrid,
    first_env: Vec<f64>,
    first_phase: Vec<f64>,
}

impl PairSynth {
    pub(crate) fn new(config: &PulseInterferenceConfig, grid: TimeGrid) -> Self {
        let pulse = config.pulse;
        let alpha = config.laser.alpha;
        let first_env = (0..grid.count)
            .map(|i| pulse.peak_power * pulse.envelope(grid.time(i)))
            .collect();
        let first_phase = (0..grid.count)
            .map(|i| pulse.chirp_phase(grid.time(i), alpha))
            .collect();
        PairSynth {
            pulse,
            alpha,
            grid,
            first_env,
            first_phase,
        }
    }

    /// Writes the first `len` samples of the intensity into `out`.
    pub(crate) fn fill(&self, s1: f64, s2: f64, delta_phi: f64, delta: f64, len: usize, out: &mut Vec<f64>) {
        out.clear();
        let len = len.min(self.grid.count);
        for i in 0..len {
            let t = self.grid.time(i) - delta;
            let p1 = s1 * self.first_env[i];
            let p2 = s2 * self.pulse.peak_power * self.pulse.envelope(t);
            let phase = delta_phi + self.first_phase[i] - self.pulse.chirp_phase(t, self.alpha);
            out.push(p1 + p2 + 2.0 * (p1 * p2).sqrt() * phase.cos());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn test_config() -> PulseInterferenceConfig {
        PulseInterferenceConfig {
            pulse: PulseShape::gaussian(20e-12),
            laser: LaserParams {
                alpha: 0.0,
                repetition_period: 400e-12,
                mean_s1: 1.0,
                mean_s2: 1.0,
                sigma_s1: 0.0,
                sigma_s2: 0.0,
            },
            noise: NoiseParams::default(),
            phase: PhaseModel::Uniform,
        }
    }

    #[test]
    fn kappa_values() {
        assert_eq!(visibility_kappa(0.0, 2.0, 50e-12).unwrap(), 1.0);
        let w = 13e-12;
        let k = visibility_kappa((8.0f64).sqrt() * w, 0.0, w).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        // exp(-10/72)
        let k = visibility_kappa(10e-12, 3.0, 30e-12).unwrap();
        assert!((k - 0.870_324_725_833_390_5).abs() < 1e-12, "{k}");
        assert!(visibility_kappa(1e-12, 1.0, 0.0).is_err());
    }

    #[test]
    fn kappa_depends_on_delta_over_w() {
        let a = visibility_kappa(5e-12, 3.0, 10e-12).unwrap();
        let b = visibility_kappa(10e-12, 3.0, 20e-12).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn integral_signal_limits() {
        assert!(integral_signal(1.0, 1.0, 1.0, PI).unwrap().abs() < 1e-15);
        assert_eq!(integral_signal(1.0, 1.0, 1.0, 0.0).unwrap(), 4.0);
        assert!((integral_signal(1.0, 1.0, 0.5, PI / 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(integral_signal(-1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn degenerate_event_is_pure_cosine() {
        let cfg = test_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let ev = draw_event(&mut rng, &cfg).unwrap();
            assert_eq!(ev.s1, 1.0);
            assert_eq!(ev.delta, 0.0);
            assert!((ev.integral_signal - (2.0 + 2.0 * ev.delta_phi.cos())).abs() < 1e-15);
            assert!((0.0..TAU).contains(&ev.delta_phi));
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let mut cfg = test_config();
        cfg.laser.sigma_s1 = 0.05;
        cfg.noise.sigma_zeta = 0.01;
        cfg.noise.sigma_jitter = 5e-12;
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sampler = EventSampler::new(&cfg).unwrap();
            (0..50).map(|_| sampler.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn noiseless_support_reaches_arcsine_edges() {
        let cfg = test_config();
        let sampler = EventSampler::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for _ in 0..1_000_000 {
            let s = sampler.sample(&mut rng).integral_signal;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        assert!((0.0..1e-2).contains(&lo), "{lo}");
        assert!(hi <= 4.0 && hi > 4.0 - 1e-2, "{hi}");
    }

    #[test]
    fn event_invariants_with_noise() {
        let mut cfg = test_config();
        cfg.laser.sigma_s1 = 0.5;
        cfg.laser.sigma_s2 = 0.5;
        cfg.laser.alpha = 4.0;
        cfg.noise.sigma_jitter = 10e-12;
        cfg.noise.sigma_zeta = 0.05;
        let sampler = EventSampler::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let ev = sampler.sample(&mut rng);
            assert!(ev.s1 > 0.0 && ev.s2 > 0.0);
            let k = cfg.kappa(ev.delta);
            assert!((0.0..=1.0).contains(&k));
            let clean = ev.integral_signal - ev.zeta;
            let r = 2.0 * (ev.s1 * ev.s2).sqrt();
            assert!(clean >= ev.s1 + ev.s2 - r - 1e-12 && clean <= ev.s1 + ev.s2 + r + 1e-12);
        }
    }

    #[test]
    fn waveform_constructive_and_destructive() {
        let cfg = test_config();
        let grid = TimeGrid::for_pulse(&cfg.pulse, cfg.laser.repetition_period);
        let on = interference_waveform(&cfg, 0.0, 0.0, grid).unwrap();
        let off = interference_waveform(&cfg, PI, 0.0, grid).unwrap();
        for (i, (&a, &b)) in on.samples.iter().zip(&off.samples).enumerate() {
            let p = cfg.pulse.envelope(grid.time(i));
            assert!((a - 4.0 * p).abs() < 1e-12);
            assert!(b.abs() < 1e-12);
        }
    }

    #[test]
    fn waveform_integral_matches_closed_form() {
        let cfg = test_config();
        let grid = TimeGrid::for_pulse(&cfg.pulse, cfg.laser.repetition_period);
        let e = cfg.pulse.energy();
        for phi in [0.0, 0.7, 2.0, PI] {
            let wf = interference_waveform(&cfg, phi, 0.0, grid).unwrap();
            let want = integral_signal(e, e, 1.0, phi).unwrap();
            let got = wf.integral();
            assert!((got - want).abs() <= 1e-6 * want.max(e), "{phi}: {got} vs {want}");
        }
    }

    #[test]
    fn chirped_waveform_integral_reproduces_visibility() {
        let mut cfg = test_config();
        cfg.laser.alpha = 4.0;
        let grid = TimeGrid::for_pulse(&cfg.pulse, cfg.laser.repetition_period);
        let e = cfg.pulse.energy();
        for delta in [3e-12, 10e-12, 18e-12] {
            let kappa = visibility_kappa(delta, 4.0, cfg.pulse.width).unwrap();
            for phi in [0.0, 1.1, PI] {
                let wf = interference_waveform(&cfg, phi, delta, grid).unwrap();
                let want = integral_signal(e, e, kappa, phi).unwrap();
                assert!((wf.integral() - want).abs() < 1e-6 * 4.0 * e);
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let cfg = test_config();
        let grid = TimeGrid {
            t0: -200e-12,
            dt: 5e-12,
            count: 80,
        };
        assert!(interference_waveform(&cfg, 0.0, 0.0, grid).is_err());
        let short = TimeGrid {
            t0: 0.0,
            dt: 1e-12,
            count: 100,
        };
        assert!(interference_waveform(&cfg, 0.0, 0.0, short).is_err());
    }

    #[test]
    fn flat_top_plateau_is_unchirped() {
        let p = PulseShape::flat_top(1e-9, 20e-12);
        assert_eq!(p.chirp_phase(300e-12, 4.0), 0.0);
        assert_eq!(p.envelope(500e-12), 1.0);
        assert!(p.chirp_phase(-20e-12, 4.0) < 0.0);
        assert!(p.envelope(-40e-12) < 0.2);
    }
}
