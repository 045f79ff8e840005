//! Empirical and ideal probability densities of the interference signal.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that can report the probability mass of an interval.
pub trait Density {
    /// Probability mass in `[a, b]`; zero when `b <= a`.
    fn mass(&self, a: f64, b: f64) -> f64;
}

/// Uniform-bin histogram with saturating end bins.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPdf {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalPdf {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("edges", "need finite lo < hi"));
        }
        if bins == 0 {
            return Err(Error::invalid("bins", "must be > 0"));
        }
        Ok(EmpiricalPdf {
            lo,
            hi,
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn from_counts(lo: f64, hi: f64, counts: Vec<u64>) -> Result<Self> {
        let mut pdf = Self::new(lo, hi, counts.len())?;
        pdf.total = counts.iter().sum();
        pdf.counts = counts;
        Ok(pdf)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.bin_width()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len()).map(|i| self.edge(i)).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    /// Bin index with saturation at both ends; NaN maps to bin 0.
    pub fn index_of(&self, x: f64) -> usize {
        let k = self.counts.len();
        let pos = (x - self.lo) / (self.hi - self.lo) * k as f64;
        if !(pos > 0.0) {
            0
        } else if pos >= (k - 1) as f64 {
            k - 1
        } else {
            pos as usize
        }
    }

    pub fn add(&mut self, x: f64) {
        let i = self.index_of(x);
        self.counts[i] += 1;
        self.total += 1;
    }

    /// Adds an already-binned value (e.g. an ADC code). Out-of-range indices
    /// saturate to the last bin.
    pub fn add_index(&mut self, i: usize) {
        let i = i.min(self.counts.len() - 1);
        self.counts[i] += 1;
        self.total += 1;
    }

    pub fn same_binning(&self, other: &EmpiricalPdf) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.counts.len() == other.counts.len()
    }

    pub fn merge(&mut self, other: &EmpiricalPdf) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::invalid("histogram", "cannot merge different binnings"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn probability(&self, i: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[i] as f64 / self.total as f64
        }
    }

    /// Normalized density of bin `i`.
    pub fn density(&self, i: usize) -> f64 {
        self.probability(i) / self.bin_width()
    }

    /// Highest bin probability.
    pub fn p_max(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        let max = self.counts.iter().copied().max().unwrap_or(0);
        Ok(max as f64 / self.total as f64)
    }

    /// Mass below `y`, spreading each bin uniformly over its width.
    fn mass_below(&self, y: f64) -> f64 {
        if y <= self.lo {
            return 0.0;
        }
        if y >= self.hi {
            return 1.0;
        }
        let pos = (y - self.lo) / self.bin_width();
        let full = pos.floor() as usize;
        let below: u64 = self.counts[..full].iter().sum();
        let partial = if full < self.counts.len() {
            self.counts[full] as f64 * (pos - full as f64)
        } else {
            0.0
        };
        (below as f64 + partial) / self.total as f64
    }
}

impl Density for EmpiricalPdf {
    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a || self.total == 0 {
            return 0.0;
        }
        (self.mass_below(b) - self.mass_below(a)).max(0.0)
    }
}

/// Histogram of a value stream over `bins` uniform bins on `[lo, hi)`.
pub fn accumulate<I: IntoIterator<Item = f64>>(values: I, lo: f64, hi: f64, bins: usize) -> Result<EmpiricalPdf> {
    let mut pdf = EmpiricalPdf::new(lo, hi, bins)?;
    for v in values {
        pdf.add(v);
    }
    Ok(pdf)
}

/// Interpolated CDF of the histogram.
pub fn empirical_cdf(pdf: &EmpiricalPdf, y: f64) -> Result<f64> {
    if pdf.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    Ok(pdf.mass_below(y))
}

/// Support of the ideal interference signal.
pub fn s_bounds(s1: f64, s2: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(s1 > 0.0) || !(s2 > 0.0) {
        return Err(Error::invalid("s", "arm signals must be > 0"));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid("kappa", "must lie in [0, 1]"));
    }
    let mid = s1 + s2;
    let half = 2.0 * kappa * (s1 * s2).sqrt();
    Ok((mid - half, mid + half))
}

/// Arcsine law on `(s_min, s_max)`: the signal distribution when the phase
/// difference is the only source of randomness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumPdfParams {
    pub s_min: f64,
    pub s_max: f64,
}

impl QuantumPdfParams {
    pub fn new(s_min: f64, s_max: f64) -> Result<Self> {
        if !(s_max > s_min) || !s_min.is_finite() || !s_max.is_finite() {
            return Err(Error::invalid(
                "s_bounds",
                format!("degenerate support [{s_min}, {s_max}]"),
            ));
        }
        Ok(QuantumPdfParams { s_min, s_max })
    }

    pub fn from_arms(s1: f64, s2: f64, kappa: f64) -> Result<Self> {
        let (lo, hi) = s_bounds(s1, s2, kappa)?;
        Self::new(lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.s_max - self.s_min
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.s_min + self.s_max)
    }

    /// Unchecked CDF, clamped to `[0, 1]` outside the support.
    pub(crate) fn cdf_clamped(&self, x: f64) -> f64 {
        let u = ((x - self.s_min) / self.width()).clamp(0.0, 1.0);
        2.0 / PI * u.sqrt().asin()
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", "must lie in [0, 1]"));
        }
        let s = (0.5 * PI * p).sin();
        Ok(self.s_min + self.width() * s * s)
    }
}

impl Density for QuantumPdfParams {
    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.cdf_clamped(b) - self.cdf_clamped(a)
    }
}

/// `[π √((x - s_min)(s_max - x))]⁻¹` on the open support.
pub fn quantum_pdf(x: f64, p: &QuantumPdfParams) -> Result<f64> {
    if !(x > p.s_min && x < p.s_max) {
        return Err(Error::invalid(
            "x",
            format!("{x} lies outside the open support ({}, {})", p.s_min, p.s_max),
        ));
    }
    Ok(1.0 / (PI * ((x - p.s_min) * (p.s_max - x)).sqrt()))
}

/// `(2/π) arcsin √((x - s_min)/w)`.
pub fn quantum_cdf(x: f64, p: &QuantumPdfParams) -> Result<f64> {
    if !(x >= p.s_min && x <= p.s_max) {
        return Err(Error::invalid(
            "x",
            format!("{x} lies outside the support [{}, {}]", p.s_min, p.s_max),
        ));
    }
    Ok(p.cdf_clamped(x))
}

/// Arcsine law smeared by additive zero-mean Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvolvedArcsine {
    pub arcsine: QuantumPdfParams,
    pub sigma: f64,
}

impl ConvolvedArcsine {
    pub fn new(arcsine: QuantumPdfParams, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::invalid("sigma", "must be >= 0"));
        }
        Ok(ConvolvedArcsine { arcsine, sigma })
    }

    /// Density at `x`, using `y = s_min + w sin²(θ/2)` so that the arcsine
    /// weight becomes `dθ/π` on `[0, π]`.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return quantum_pdf(x, &self.arcsine).unwrap_or(0.0);
        }
        let (lo, w, s) = (self.arcsine.s_min, self.arcsine.width(), self.sigma);
        let norm = 1.0 / (s * (2.0 * PI).sqrt());
        let f = |theta: f64| {
            let h = (0.5 * theta).sin();
            let z = (x - lo - w * h * h) / s;
            norm * (-0.5 * z * z).exp()
        };
        self.integrate_split(f, &[x]) / PI
    }

    /// Integrates over `θ ∈ [0, π]` with panels split where `y(θ)` crosses
    /// each point; for `σ ≪ w` the integrand changes within `O(σ)` of them.
    fn integrate_split<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> f64 {
        let (lo, w) = (self.arcsine.s_min, self.arcsine.width());
        let mut cuts = vec![0.0, PI];
        for &p in points {
            let u = (p - lo) / w;
            if u > 0.0 && u < 1.0 {
                cuts.push(2.0 * u.sqrt().asin());
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2).map(|c| integrate(&f, c[0], c[1])).sum()
    }
}

impl Density for ConvolvedArcsine {
    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if self.sigma == 0.0 {
            return self.arcsine.mass(a, b);
        }
        let (lo, w, s) = (self.arcsine.s_min, self.arcsine.width(), self.sigma);
        let phi = |z: f64| 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
        let f = |theta: f64| {
            let h = (0.5 * theta).sin();
            let y = lo + w * h * h;
            phi((b - y) / s) - phi((a - y) / s)
        };
        self.integrate_split(f, &[a, b]) / PI
    }
}

pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, 1e-12).integral
}

/// Parameters of the B-statistic estimator. None of them come with the
/// method itself; they are this crate's conventions and are echoed in every
/// report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BOptions {
    /// Bins with density at least this fraction of the maximum count toward
    /// the total width.
    pub width_threshold: f64,
    /// Minimum topographic prominence of a peak, as a fraction of the
    /// highest smoothed bin.
    pub min_prominence: f64,
    /// Minimum number of counts.
    pub min_counts: u64,
}

impl Default for BOptions {
    fn default() -> Self {
        BOptions {
            width_threshold: 0.01,
            min_prominence: 0.05,
            min_counts: 10_000,
        }
    }
}

/// Moving-average window: `max(3, K/64)`, rounded up to odd.
pub fn smoothing_window(bins: usize) -> usize {
    (bins / 64).max(3) | 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BStatistic {
    pub total_width: f64,
    pub peak_distance: f64,
    pub value: f64,
    /// Positions of the two selected maxima, lower first.
    pub low_peak: f64,
    pub high_peak: f64,
}

/// Ratio of the total PDF width to the distance between its two maxima.
pub fn estimate_b(pdf: &EmpiricalPdf, opts: &BOptions) -> Result<BStatistic> {
    if pdf.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if pdf.total() < opts.min_counts {
        return Err(Error::InvalidInput(format!(
            "B needs at least {} counts, histogram has {}",
            opts.min_counts,
            pdf.total()
        )));
    }
    let counts = pdf.counts();
    let max = *counts.iter().max().expect("non-empty") as f64;
    let cut = opts.width_threshold * max;
    let first = counts.iter().position(|&c| c as f64 >= cut).expect("max qualifies");
    let last = counts.iter().rposition(|&c| c as f64 >= cut).expect("max qualifies");
    let total_width = (last - first + 1) as f64 * pdf.bin_width();

    let smooth = moving_average(counts, smoothing_window(counts.len()));
    let top = smooth.iter().cloned().fold(0.0, f64::max);
    let mut peaks: Vec<(usize, f64)> = local_maxima(&smooth)
        .into_iter()
        .map(|i| (i, prominence(&smooth, i)))
        .filter(|&(_, p)| p >= opts.min_prominence * top)
        .collect();
    if peaks.len() < 2 {
        return Err(Error::UnimodalPdf { peaks: peaks.len() });
    }
    peaks.sort_by(|a, b| smooth[b.0].total_cmp(&smooth[a.0]));
    let (a, b) = (peaks[0].0.min(peaks[1].0), peaks[0].0.max(peaks[1].0));
    let low_peak = pdf.center(a);
    let high_peak = pdf.center(b);
    let peak_distance = high_peak - low_peak;
    Ok(BStatistic {
        total_width,
        peak_distance,
        value: total_width / peak_distance,
        low_peak,
        high_peak,
    })
}

// Centered moving average; windows are truncated at the ends.
fn moving_average(counts: &[u64], window: usize) -> Vec<f64> {
    let k = counts.len();
    let half = window / 2;
    let mut prefix = vec![0u64; k + 1];
    for (i, &c) in counts.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }
    (0..k)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(k);
            (prefix[b] - prefix[a]) as f64 / (b - a) as f64
        })
        .collect()
}

// Plateau-aware local maxima; a plateau reports its middle index.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let rises = i == 0 || s[i - 1] < s[i];
        let falls = j + 1 == s.len() || s[j + 1] < s[j];
        if rises && falls && s[i] > 0.0 {
            out.push((i + j) / 2);
        }
        i = j + 1;
    }
    out
}

// Height above the higher of the two saddles that separate the peak from
// taller terrain. The density is zero beyond the histogram ends.
fn prominence(s: &[f64], i: usize) -> f64 {
    let h = s[i];
    let saddle = |side: &mut dyn Iterator<Item = &f64>| {
        let mut low = h;
        for &v in side {
            if v > h {
                return low;
            }
            low = low.min(v);
        }
        0.0
    };
    let left = saddle(&mut s[..i].iter().rev());
    let right = saddle(&mut s[i + 1..].iter());
    h - left.max(right)
}

/// Writes `bin_low,bin_high,count` rows.
pub fn write_csv<W: Write>(pdf: &EmpiricalPdf, mut out: W) -> Result<()> {
    writeln!(out, "bin_low,bin_high,count")?;
    for (i, c) in pdf.counts().iter().enumerate() {
        writeln!(out, "{},{},{}", pdf.edge(i), pdf.edge(i + 1), c)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R, source_name: &str) -> Result<EmpiricalPdf> {
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "bin_low,bin_high,count" {
                return Err(parse_err(lineno, "expected header `bin_low,bin_high,count`".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 fields, got {}", fields.len())));
        }
        let lo: f64 = fields[0].parse().map_err(|e| parse_err(lineno, format!("bin_low: {e}")))?;
        let hi: f64 = fields[1].parse().map_err(|e| parse_err(lineno, format!("bin_high: {e}")))?;
        let c: u64 = fields[2].parse().map_err(|e| parse_err(lineno, format!("count: {e}")))?;
        if !(hi > lo) {
            return Err(parse_err(lineno, "bin_high must exceed bin_low".into()));
        }
        if let Some(&(_, prev_hi, _)) = rows.last() {
            if (lo - prev_hi).abs() > 1e-9 * (hi - lo).abs().max(prev_hi.abs()) {
                return Err(parse_err(lineno, "bins are not contiguous".into()));
            }
        }
        rows.push((lo, hi, c));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no bins".into()));
    }
    let lo = rows[0].0;
    let hi = rows[rows.len() - 1].1;
    let width = (hi - lo) / rows.len() as f64;
    for (i, r) in rows.iter().enumerate() {
        if ((r.1 - r.0) - width).abs() > 1e-6 * width {
            return Err(parse_err(i + 2, "bins are not uniform".into()));
        }
    }
    EmpiricalPdf::from_counts(lo, hi, rows.into_iter().map(|r| r.2).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> QuantumPdfParams {
        QuantumPdfParams::new(0.0, 4.0).unwrap()
    }

    #[test]
    fn vanishing_noise_recovers_the_arcsine_mass() {
        let p = unit();
        for sigma in [1e-9, 1e-6, 1e-3] {
            let c = ConvolvedArcsine::new(p, sigma).unwrap();
            for (a, b) in [(0.0, 0.0625), (0.3, 1.7), (3.9, 4.0)] {
                let exact = p.mass(a, b);
                let got = c.mass(a, b);
                assert!((got - exact).abs() < sigma.sqrt(), "{sigma} {a} {b}: {got} vs {exact}");
            }
            assert!((c.pdf(1.0) - quantum_pdf(1.0, &p).unwrap()).abs() < 1e-3);
        }
    }

    // Histogram holding the exact arcsine bin masses scaled to `total`.
    fn exact_arcsine(p: &QuantumPdfParams, lo: f64, hi: f64, bins: usize, total: f64) -> EmpiricalPdf {
        let mut pdf = EmpiricalPdf::new(lo, hi, bins).unwrap();
        let counts: Vec<u64> = (0..bins)
            .map(|i| (p.mass(pdf.edge(i), pdf.edge(i + 1)) * total).round() as u64)
            .collect();
        pdf = EmpiricalPdf::from_counts(lo, hi, counts).unwrap();
        pdf
    }

    #[test]
    fn bounds() {
        assert_eq!(s_bounds(1.0, 1.0, 1.0).unwrap(), (0.0, 4.0));
        assert_eq!(s_bounds(1.0, 1.0, 0.0).unwrap(), (2.0, 2.0));
        assert!(QuantumPdfParams::from_arms(1.0, 1.0, 0.0).is_err());
        assert_eq!(s_bounds(1.0, 4.0, 1.0).unwrap(), (1.0, 9.0));
        assert!(s_bounds(-1.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn arcsine_density_values() {
        let p = unit();
        assert!((quantum_pdf(2.0, &p).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        for d in [1e-6, 0.1, 0.77, 1.9] {
            let a = quantum_pdf(d, &p).unwrap();
            let b = quantum_pdf(4.0 - d, &p).unwrap();
            assert!((a - b).abs() <= 1e-9 * a);
        }
        assert!(quantum_pdf(0.0, &p).is_err());
        assert!(quantum_pdf(4.0, &p).is_err());
    }

    #[test]
    fn arcsine_density_integrates_to_one() {
        let p = QuantumPdfParams::new(-0.3, 2.9).unwrap();
        let total = integrate(|x| quantum_pdf(x, &p).unwrap_or(0.0), p.s_min, p.s_max);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn arcsine_cdf_values() {
        let p = unit();
        assert_eq!(quantum_cdf(0.0, &p).unwrap(), 0.0);
        assert!((quantum_cdf(2.0, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((quantum_cdf(1.0, &p).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((quantum_cdf(4.0, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(quantum_cdf(4.1, &p).is_err());
    }

    proptest! {
        #[test]
        fn quantile_round_trips(p in 0.0f64..=1.0, lo in -5.0f64..5.0, w in 0.01f64..10.0) {
            let q = QuantumPdfParams::new(lo, lo + w).unwrap();
            let x = q.quantile(p).unwrap();
            prop_assert!((quantum_cdf(x, &q).unwrap() - p).abs() < 1e-9);
        }

        #[test]
        fn merge_equals_single_pass(values in prop::collection::vec(-1.0f64..5.0, 0..400), split in 0usize..400) {
            let split = split.min(values.len());
            let whole = accumulate(values.iter().copied(), 0.0, 4.0, 32).unwrap();
            let mut left = accumulate(values[..split].iter().copied(), 0.0, 4.0, 32).unwrap();
            let right = accumulate(values[split..].iter().copied(), 0.0, 4.0, 32).unwrap();
            left.merge(&right).unwrap();
            prop_assert_eq!(left, whole);
        }
    }

    #[test]
    fn accumulate_basics() {
        let empty = accumulate(std::iter::empty(), 0.0, 1.0, 8).unwrap();
        assert!(empty.counts().iter().all(|&c| c == 0));
        let one = accumulate([0.3], 0.0, 1.0, 8).unwrap();
        assert_eq!(one.counts()[2], 1);
        assert_eq!(one.total(), 1);
        let sat = accumulate([-3.0, 7.0], 0.0, 1.0, 8).unwrap();
        assert_eq!(sat.counts()[0], 1);
        assert_eq!(sat.counts()[7], 1);
    }

    #[test]
    fn binning_matches_quantizer() {
        let pdf = EmpiricalPdf::new(0.0, 1.0, 256).unwrap();
        for i in 0..5000 {
            let v = -0.2 + 1.4 * i as f64 / 5000.0;
            assert_eq!(pdf.index_of(v), crate::adc::quantize(v, 1.0, 8) as usize);
        }
    }

    #[test]
    fn cdf_limits_and_median() {
        assert!(empirical_cdf(&EmpiricalPdf::new(0.0, 1.0, 4).unwrap(), 0.5).is_err());
        let pdf = accumulate((0..1000).map(|i| i as f64 / 1000.0), 0.0, 1.0, 10).unwrap();
        assert_eq!(empirical_cdf(&pdf, -1.0).unwrap(), 0.0);
        assert_eq!(empirical_cdf(&pdf, 2.0).unwrap(), 1.0);
        assert!((empirical_cdf(&pdf, 0.5).unwrap() - 0.5).abs() < 0.1);
        let mut last = 0.0;
        for i in 0..=100 {
            let c = empirical_cdf(&pdf, i as f64 / 100.0).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn sampled_arcsine_is_close_to_the_law() {
        use rand::{Rng, SeedableRng};
        let p = unit();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let draws = (0..1_000_000).map(|_| {
            let phi: f64 = rng.random::<f64>() * 2.0 * PI;
            2.0 + 2.0 * phi.cos()
        });
        let pdf = accumulate(draws, 0.0, 4.0, 1024).unwrap();
        let ks = (0..=1024)
            .map(|i| {
                let x = pdf.edge(i);
                (empirical_cdf(&pdf, x).unwrap() - quantum_cdf(x, &p).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn b_tends_to_one_for_fine_arcsine() {
        let p = unit();
        let mut last = f64::MAX;
        for bins in [256, 1024, 4096] {
            let pdf = exact_arcsine(&p, 0.0, 4.0, bins, 1e8);
            let b = estimate_b(&pdf, &BOptions::default()).unwrap();
            assert!(b.value >= 1.0 && b.value < last);
            last = b.value;
        }
        assert!(last < 1.001, "{last}");
    }

    #[test]
    fn b_grows_with_gaussian_smearing() {
        // Convolved density by quadrature, binned with headroom.
        let p = unit();
        let smeared = ConvolvedArcsine::new(p, 0.05 * p.width()).unwrap();
        let bins = 512;
        let (lo, hi) = (-1.0, 5.0);
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let counts: Vec<u64> = edges
            .windows(2)
            .map(|e| (smeared.mass(e[0], e[1]) * 1e8).round() as u64)
            .collect();
        let pdf = EmpiricalPdf::from_counts(lo, hi, counts).unwrap();
        let b = estimate_b(&pdf, &BOptions::default()).unwrap();
        assert!(b.value > 1.0, "{b:?}");
        let clean = exact_arcsine(&p, lo, hi, bins, 1e8);
        assert!(b.value > estimate_b(&clean, &BOptions::default()).unwrap().value);
    }

    #[test]
    fn unimodal_histogram_is_rejected() {
        let pdf = EmpiricalPdf::from_counts(
            -4.0,
            4.0,
            (0..256)
                .map(|i| {
                    let x = -4.0 + 8.0 * (i as f64 + 0.5) / 256.0;
                    (1e6 * (-0.5 * x * x).exp()) as u64
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            estimate_b(&pdf, &BOptions::default()),
            Err(Error::UnimodalPdf { .. })
        ));
    }

    #[test]
    fn b_is_scale_invariant() {
        let p = unit();
        let a = exact_arcsine(&p, -0.5, 4.5, 300, 1e7);
        let scaled = EmpiricalPdf::from_counts(3.0 * -0.5 + 7.0, 3.0 * 4.5 + 7.0, a.counts().to_vec()).unwrap();
        let ba = estimate_b(&a, &BOptions::default()).unwrap();
        let bs = estimate_b(&scaled, &BOptions::default()).unwrap();
        assert!((ba.value - bs.value).abs() < 1e-9);
    }

    #[test]
    fn too_few_counts() {
        let pdf = EmpiricalPdf::from_counts(0.0, 1.0, vec![10, 0, 10]).unwrap();
        assert!(estimate_b(&pdf, &BOptions::default()).is_err());
    }

    #[test]
    fn fractional_mass() {
        let pdf = EmpiricalPdf::from_counts(0.0, 4.0, vec![10, 20, 30, 40]).unwrap();
        assert!((pdf.mass(0.5, 1.5) - 15.0 / 100.0).abs() < 1e-12);
        assert!((pdf.mass(-1.0, 9.0) - 1.0).abs() < 1e-12);
        assert_eq!(pdf.mass(2.0, 1.0), 0.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let pdf = EmpiricalPdf::from_counts(-0.5, 1.5, vec![1, 0, 7, 3]).unwrap();
        let mut buf = Vec::new();
        write_csv(&pdf, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin_low,bin_high,count\n-0.5,0,1\n"));
        assert_eq!(read_csv(&buf[..], "h.csv").unwrap(), pdf);
        let bad = b"bin_low,bin_high,count\n0,1,3\n1,2,x\n";
        match read_csv(&bad[..], "h.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
