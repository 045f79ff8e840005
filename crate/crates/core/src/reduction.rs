//! Min-entropies and reduction factors for comparator and ADC digitization.
//!
//! Reduction factors can be unbounded: once classical noise dominates, the
//! source is not trusted at all. That case is carried by
//! [`Reduction::Untrusted`] rather than a floating-point infinity, so it can
//! never reach the extractor as a number.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdf::{Density, EmpiricalPdf, QuantumPdfParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Finite(f64),
    Untrusted,
}

impl Reduction {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Reduction::Finite(v) => Some(v),
            Reduction::Untrusted => None,
        }
    }

    pub fn is_untrusted(&self) -> bool {
        matches!(self, Reduction::Untrusted)
    }

    /// Total order key for comparisons; `Untrusted` sorts above every finite
    /// factor.
    pub fn order_key(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn times(self, other: Reduction) -> Reduction {
        match (self, other) {
            (Reduction::Finite(a), Reduction::Finite(b)) => Reduction::Finite(a * b),
            _ => Reduction::Untrusted,
        }
    }

    /// `n / d`, untrusted when the denominator is not positive.
    fn ratio(n: f64, d: f64) -> Reduction {
        if d > 0.0 {
            Reduction::Finite(n / d)
        } else {
            Reduction::Untrusted
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::Finite(v) => write!(f, "{v}"),
            Reduction::Untrusted => f.write_str("untrusted"),
        }
    }
}

impl FromStr for Reduction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "untrusted" => Ok(Reduction::Untrusted),
            other => other
                .parse::<f64>()
                .map(Reduction::Finite)
                .map_err(|e| format!("`{other}`: {e}")),
        }
    }
}

/// `(H∞, p_max)` with `H∞ = -log2 p_max` over the histogram bins.
pub fn min_entropy_pmax(pdf: &EmpiricalPdf) -> Result<(f64, f64)> {
    let p_max = pdf.p_max()?;
    Ok((-p_max.log2(), p_max))
}

/// `n / H∞`.
pub fn gamma_classical(n: f64, h_inf: f64) -> Result<Reduction> {
    if h_inf > n * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "min-entropy {h_inf} exceeds the word length {n}"
        )));
    }
    Ok(Reduction::ratio(n, h_inf))
}

fn neg_log2_mass(mass: f64) -> f64 {
    if mass > 0.0 {
        -mass.log2()
    } else {
        f64::INFINITY
    }
}

/// Min-entropy of a comparator with its threshold at the midpoint of the
/// ideal support: `-log2 ∫_{s_min}^{s_min + w/2} f`. Returns `+∞` when the
/// integral vanishes.
pub fn h_inf_comparator<D: Density + ?Sized>(f: &D, p: &QuantumPdfParams) -> f64 {
    neg_log2_mass(f.mass(p.s_min, p.midpoint()))
}

/// `1 / (2 - H∞)`.
pub fn gamma_comparator(h_inf: f64) -> Result<Reduction> {
    if !(h_inf >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "comparator min-entropy {h_inf} is below one bit"
        )));
    }
    Ok(Reduction::ratio(1.0, 2.0 - h_inf))
}

/// Min-entropy of the first ADC code above `s_min`:
/// `-log2 ∫_{s_min}^{s_min + ΔU/2ⁿ} f`. Returns `+∞` when the integral
/// vanishes.
pub fn h_inf_first_bin<D: Density + ?Sized>(f: &D, s_min: f64, delta_u: f64, n: u32) -> f64 {
    let lsb = delta_u / (1u64 << n) as f64;
    neg_log2_mass(f.mass(s_min, s_min + lsb))
}

/// First-code min-entropy of the ideal arcsine signal for `r = w/ΔU`.
///
/// With `q = r·2ⁿ` the first code holds `(2/π) arcsin(1/√q)` of the mass,
/// which equals `1/2 - (1/π) arctan[(q - 2) / (2√(q - 1))]`. Valid for
/// `q >= 1`; at `q = 1` the code spans the whole support and the entropy is
/// zero.
pub fn h_inf_q_closed_form(r: f64, n: u32) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", "must be > 0"));
    }
    let q = r * (1u64 << n) as f64;
    if q < 1.0 {
        return Err(Error::invalid(
            "r",
            format!("r·2ⁿ = {q} < 1: one code covers the whole signal"),
        ));
    }
    let x = (q - 2.0) / (2.0 * (q - 1.0).sqrt());
    // atan2(1, x)/π == 1/2 - atan(x)/π without cancellation for large q.
    let mass = 1.0f64.atan2(x) / std::f64::consts::PI;
    Ok(neg_log2_mass(mass).max(0.0))
}

/// `n / (1 + H∞^Q - H∞)`.
pub fn gamma_adc_strict(n: f64, h_inf_q: f64, h_inf: f64) -> Result<Reduction> {
    check_order(h_inf_q, h_inf)?;
    Ok(Reduction::ratio(n, 1.0 + h_inf_q - h_inf))
}

/// `n / (2H∞^Q - H∞)`.
pub fn gamma_adc_relaxed(n: f64, h_inf_q: f64, h_inf: f64) -> Result<Reduction> {
    check_order(h_inf_q, h_inf)?;
    Ok(Reduction::ratio(n, 2.0 * h_inf_q - h_inf))
}

fn check_order(h_inf_q: f64, h_inf: f64) -> Result<()> {
    if h_inf < h_inf_q {
        return Err(Error::InvalidInput(format!(
            "measured first-code min-entropy {h_inf} is below the ideal {h_inf_q}"
        )));
    }
    Ok(())
}

/// `n / H∞^Q`.
pub fn gamma_nq(n: f64, h_inf_q: f64) -> Result<f64> {
    if !(h_inf_q > 0.0) {
        return Err(Error::invalid("h_inf_q", "must be > 0"));
    }
    Ok(n / h_inf_q)
}

/// `n / ENOB`.
pub fn gamma_enob(n: f64, enob: f64) -> Result<f64> {
    if !(enob > 0.0) {
        return Err(Error::invalid("enob", "must be > 0"));
    }
    if enob > n {
        return Err(Error::InvalidInput(format!(
            "ENOB {enob} exceeds the bit depth {n}"
        )));
    }
    Ok(n / enob)
}

/// `γ_n^Q · γ_ENOB · Γ`.
pub fn gamma_total(gamma_nq: f64, gamma_enob: f64, gamma_comparator: Reduction) -> Reduction {
    Reduction::Finite(gamma_nq * gamma_enob).times(gamma_comparator)
}

/// Three-sigma binomial uncertainty of `-log2 p` estimated from `total`
/// draws, in bits.
pub fn entropy_tolerance(p: f64, total: u64) -> f64 {
    if !(p > 0.0) || total == 0 {
        return 0.0;
    }
    let sigma_p = (p * (1.0 - p) / total as f64).sqrt();
    3.0 * sigma_p / (p * std::f64::consts::LN_2)
}

/// How the ideal support was aligned with the measured PDF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Support from the simulation parameters.
    Model,
    /// Support from the two maxima of the measured PDF.
    Peaks,
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alignment::Model => "model",
            Alignment::Peaks => "peaks",
        })
    }
}

/// Every entropy and reduction quantity of one run, plus the conventions
/// needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub n_bits: u32,
    /// `-log2 p_max` over the ADC codes.
    pub h_inf: f64,
    pub p_max: f64,
    pub gamma_classical: Reduction,
    /// Comparator min-entropy of the measured PDF.
    pub h_inf_comparator: f64,
    /// First-code min-entropy of the measured PDF.
    pub h_inf_first_bin: f64,
    /// First-code min-entropy of the ideal PDF.
    pub h_inf_q: f64,
    /// Signal span over the ADC range, `w/ΔU`.
    pub range_ratio: f64,
    pub gamma_comparator: Reduction,
    pub gamma_adc_strict: Reduction,
    pub gamma_adc_relaxed: Reduction,
    pub gamma_nq: f64,
    pub enob: f64,
    pub gamma_enob: f64,
    pub gamma_total: Reduction,
    /// `γ_n^Q·Γ` read off a `B` lookup curve. When present, `gamma_total`
    /// is this value times `gamma_enob` rather than the product of the
    /// directly estimated factors.
    pub curve_gamma_nq_gamma: Option<f64>,
    pub b_value: Option<f64>,
    pub alignment: Alignment,
    /// The measured PDF has more mass at the lower support edge than the
    /// ideal one allows, beyond statistical tolerance. The affected
    /// factors are reported as untrusted.
    pub model_mismatch: bool,
    pub b_width_threshold: f64,
    pub b_min_prominence: f64,
    pub b_smoothing_window: usize,
}

/// Inputs to [`ReductionReport::compute`]. Voltages throughout.
pub struct ReportInputs<'a> {
    pub n_bits: u32,
    pub delta_u: f64,
    pub enob: f64,
    /// ADC code histogram.
    pub codes: &'a EmpiricalPdf,
    /// Density of the analog (pre-quantization) signal.
    pub analog: &'a dyn Density,
    /// Number of draws behind `analog`; sets the statistical tolerance.
    pub analog_draws: u64,
    pub ideal: QuantumPdfParams,
    pub alignment: Alignment,
    pub b_value: Option<f64>,
    pub b_options: crate::pdf::BOptions,
}

impl ReductionReport {
    /// Computes the full report. Estimated min-entropies that fall below
    /// their noiseless values by less than three binomial standard errors
    /// are snapped to those values; larger deficits set `model_mismatch`
    /// and make the dependent factors untrusted.
    pub fn compute(inp: &ReportInputs<'_>) -> Result<Self> {
        let n = inp.n_bits as f64;
        let (h_inf, p_max) = min_entropy_pmax(inp.codes)?;
        let gamma_classical = gamma_classical(n, h_inf)?;

        let half_mass = inp.analog.mass(inp.ideal.s_min, inp.ideal.midpoint());
        let mut h_cmp = neg_log2_mass(half_mass);
        if h_cmp < 1.0 && h_cmp >= 1.0 - entropy_tolerance(0.5, inp.analog_draws) {
            h_cmp = 1.0;
        }
        let mut model_mismatch = false;
        let gamma_comparator = if h_cmp < 1.0 {
            model_mismatch = true;
            Reduction::Untrusted
        } else {
            gamma_comparator(h_cmp)?
        };

        let range_ratio = inp.ideal.width() / inp.delta_u;
        let h_q = h_inf_q_closed_form(range_ratio, inp.n_bits)?;
        let mut h_first = h_inf_first_bin(inp.analog, inp.ideal.s_min, inp.delta_u, inp.n_bits);
        let p_first_q = (-h_q).exp2();
        if h_first < h_q && h_first >= h_q - entropy_tolerance(p_first_q, inp.analog_draws) {
            h_first = h_q;
        }
        let (gamma_adc_strict, gamma_adc_relaxed) = if h_first < h_q {
            model_mismatch = true;
            (Reduction::Untrusted, Reduction::Untrusted)
        } else {
            (gamma_adc_strict(n, h_q, h_first)?, gamma_adc_relaxed(n, h_q, h_first)?)
        };
        let g_nq = gamma_nq(n, h_q)?;
        let g_enob = gamma_enob(n, inp.enob)?;
        Ok(ReductionReport {
            n_bits: inp.n_bits,
            h_inf,
            p_max,
            gamma_classical,
            h_inf_comparator: h_cmp,
            h_inf_first_bin: h_first,
            h_inf_q: h_q,
            range_ratio,
            gamma_comparator,
            gamma_adc_strict,
            gamma_adc_relaxed,
            gamma_nq: g_nq,
            enob: inp.enob,
            gamma_enob: g_enob,
            gamma_total: gamma_total(g_nq, g_enob, gamma_comparator),
            curve_gamma_nq_gamma: None,
            b_value: inp.b_value,
            alignment: inp.alignment,
            model_mismatch,
            b_width_threshold: inp.b_options.width_threshold,
            b_min_prominence: inp.b_options.min_prominence,
            b_smoothing_window: crate::pdf::smoothing_window(inp.codes.bins()),
        })
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        vec![
            ("n_bits", self.n_bits.to_string()),
            ("h_inf", self.h_inf.to_string()),
            ("p_max", self.p_max.to_string()),
            ("gamma_classical", self.gamma_classical.to_string()),
            ("h_inf_comparator", self.h_inf_comparator.to_string()),
            ("h_inf_first_bin", self.h_inf_first_bin.to_string()),
            ("h_inf_q", self.h_inf_q.to_string()),
            ("range_ratio", self.range_ratio.to_string()),
            ("gamma_comparator", self.gamma_comparator.to_string()),
            ("gamma_adc_strict", self.gamma_adc_strict.to_string()),
            ("gamma_adc_relaxed", self.gamma_adc_relaxed.to_string()),
            ("gamma_nq", self.gamma_nq.to_string()),
            ("enob", self.enob.to_string()),
            ("gamma_enob", self.gamma_enob.to_string()),
            ("gamma_total", self.gamma_total.to_string()),
            ("curve_gamma_nq_gamma", opt(self.curve_gamma_nq_gamma)),
            ("b_value", opt(self.b_value)),
            ("alignment", self.alignment.to_string()),
            ("model_mismatch", self.model_mismatch.to_string()),
            ("b_width_threshold", self.b_width_threshold.to_string()),
            ("b_min_prominence", self.b_min_prominence.to_string()),
            ("b_smoothing_window", self.b_smoothing_window.to_string()),
        ]
    }

    /// One `key=value` pair per line.
    pub fn to_key_value(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn csv_header() -> String {
        let dummy = ReductionReport::placeholder();
        dummy
            .fields()
            .into_iter()
            .map(|(k, _)| k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v)
            .collect::<Vec<_>>()
            .join(",")
    }

    fn placeholder() -> Self {
        ReductionReport {
            n_bits: 0,
            h_inf: 0.0,
            p_max: 0.0,
            gamma_classical: Reduction::Untrusted,
            h_inf_comparator: 0.0,
            h_inf_first_bin: 0.0,
            h_inf_q: 0.0,
            range_ratio: 0.0,
            gamma_comparator: Reduction::Untrusted,
            gamma_adc_strict: Reduction::Untrusted,
            gamma_adc_relaxed: Reduction::Untrusted,
            gamma_nq: 0.0,
            enob: 0.0,
            gamma_enob: 0.0,
            gamma_total: Reduction::Untrusted,
            curve_gamma_nq_gamma: None,
            b_value: None,
            alignment: Alignment::Model,
            model_mismatch: false,
            b_width_threshold: 0.0,
            b_min_prominence: 0.0,
            b_smoothing_window: 0,
        }
    }

    pub fn from_key_value(text: &str, source_name: &str) -> Result<Self> {
        let mut r = ReductionReport::placeholder();
        let mut seen = std::collections::HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let f = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let g = |v: &str| v.parse::<Reduction>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "n_bits" => r.n_bits = value.parse().map_err(|e| err(format!("{key}: {e}")))?,
                "h_inf" => r.h_inf = f(value)?,
                "p_max" => r.p_max = f(value)?,
                "gamma_classical" => r.gamma_classical = g(value)?,
                "h_inf_comparator" => r.h_inf_comparator = f(value)?,
                "h_inf_first_bin" => r.h_inf_first_bin = f(value)?,
                "h_inf_q" => r.h_inf_q = f(value)?,
                "range_ratio" => r.range_ratio = f(value)?,
                "gamma_comparator" => r.gamma_comparator = g(value)?,
                "gamma_adc_strict" => r.gamma_adc_strict = g(value)?,
                "gamma_adc_relaxed" => r.gamma_adc_relaxed = g(value)?,
                "gamma_nq" => r.gamma_nq = f(value)?,
                "enob" => r.enob = f(value)?,
                "gamma_enob" => r.gamma_enob = f(value)?,
                "gamma_total" => r.gamma_total = g(value)?,
                "curve_gamma_nq_gamma" => {
                    r.curve_gamma_nq_gamma = if value == "none" { None } else { Some(f(value)?) }
                }
                "b_value" => {
                    r.b_value = if value == "none" { None } else { Some(f(value)?) }
                }
                "model_mismatch" => {
                    r.model_mismatch = value.parse().map_err(|e| err(format!("{key}: {e}")))?
                }
                "alignment" => {
                    r.alignment = match value {
                        "model" => Alignment::Model,
                        "peaks" => Alignment::Peaks,
                        other => return Err(err(format!("unknown alignment `{other}`"))),
                    }
                }
                "b_width_threshold" => r.b_width_threshold = f(value)?,
                "b_min_prominence" => r.b_min_prominence = f(value)?,
                "b_smoothing_window" => {
                    r.b_smoothing_window = value.parse().map_err(|e| err(format!("{key}: {e}")))?
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
            seen.insert(key.to_string());
        }
        for key in ["n_bits", "gamma_total"] {
            if !seen.contains(key) {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: 0,
                    message: format!("missing key `{key}`"),
                });
            }
        }
        Ok(r)
    }
}
