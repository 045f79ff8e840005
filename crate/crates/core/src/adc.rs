//! Digitizer model: analog bandwidth, single-point sampling, quantization.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Largest supported bit depth; sample files store codes as `u16`.
pub const MAX_BITS: u32 = 16;

/// Filter discretization, recorded in run manifests.
pub const FILTER_DISCRETIZATION: &str = "butterworth2/bilinear-prewarped";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    /// Bit depth.
    pub n: u32,
    /// Input voltage range, volts.
    pub delta_u: f64,
    /// Analog -3 dB bandwidth, hertz.
    pub bandwidth: f64,
    /// Sampling instant on the pulse profile, seconds. `None` samples at the
    /// maximum of the filtered mean pulse.
    #[serde(default)]
    pub sample_time: Option<f64>,
    /// Volts per unit of model intensity.
    pub gain: f64,
    /// Volts at zero model intensity.
    #[serde(default)]
    pub offset: f64,
    pub sinad_db: f64,
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BITS).contains(&self.n) {
            return Err(Error::invalid("adc.n", format!("must lie in 1..={MAX_BITS}")));
        }
        if !(self.delta_u > 0.0) {
            return Err(Error::invalid("adc.delta_u", "must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("adc.bandwidth", "must be > 0"));
        }
        if !(self.gain > 0.0) {
            return Err(Error::invalid("adc.gain", "must be > 0"));
        }
        if !(self.sinad_db > 1.76) {
            return Err(Error::invalid("adc.sinad_db", "must exceed 1.76 dB"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        1usize << self.n
    }

    /// Width of one code, volts.
    pub fn lsb(&self) -> f64 {
        self.delta_u / self.levels() as f64
    }

    pub fn to_volts(&self, intensity: f64) -> f64 {
        self.offset + self.gain * intensity
    }

    pub fn to_intensity(&self, volts: f64) -> f64 {
        (volts - self.offset) / self.gain
    }

    /// Sets gain and offset so that `mean_level` lands at `ΔU/2` and a signal
    /// span of `width` covers the fraction `range_fill` of the input range.
    pub fn calibrate(&mut self, mean_level: f64, width: f64, range_fill: f64) -> Result<()> {
        if !(width > 0.0) {
            return Err(Error::invalid("width", "signal span must be > 0"));
        }
        if !(range_fill > 0.0) {
            return Err(Error::invalid("range_fill", "must be > 0"));
        }
        self.gain = range_fill * self.delta_u / width;
        self.offset = self.delta_u / 2.0 - self.gain * mean_level;
        Ok(())
    }

    pub fn quantize(&self, volts: f64) -> u32 {
        quantize(volts, self.delta_u, self.n)
    }
}

/// Second-order IIR section in transposed direct form II.
#[derive(Clone, Debug, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    dt: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    /// `|H(e^{iωdt})|` of the discrete filter.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq * self.dt;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        num.0.hypot(num.1) / den.0.hypot(den.1)
    }

    /// Pole radius check: the roots of `z² + a1 z + a2` lie inside the unit
    /// circle iff `|a2| < 1` and `|a1| < 1 + a2`.
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

/// Low-pass Butterworth biquad for a grid step `dt`, designed with the
/// bilinear transform pre-warped at the cutoff.
pub fn design_butterworth2(bandwidth: f64, dt: f64) -> Result<Biquad> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    let nyquist = 0.5 / dt;
    if !(bandwidth > 0.0 && bandwidth < nyquist) {
        return Err(Error::invalid(
            "bandwidth",
            format!("{bandwidth:e} Hz must lie in (0, {nyquist:e}) Hz"),
        ));
    }
    let k = (PI * bandwidth * dt).tan();
    let k2 = k * k;
    let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
    let b0 = k2 * norm;
    Ok(Biquad {
        b0,
        b1: 2.0 * b0,
        b2: b0,
        a1: 2.0 * (k2 - 1.0) * norm,
        a2: (1.0 - SQRT_2 * k + k2) * norm,
        dt,
        z1: 0.0,
        z2: 0.0,
    })
}

/// Causal filtering from a zero initial state.
pub fn filter_waveform(w: &Waveform, f: &mut Biquad) -> Result<Waveform> {
    check_dt(w.dt, f)?;
    f.reset();
    Ok(Waveform {
        t0: w.t0,
        dt: w.dt,
        samples: w.samples.iter().map(|&x| f.process(x)).collect(),
    })
}

pub(crate) fn check_dt(dt: f64, f: &Biquad) -> Result<()> {
    if (dt - f.dt).abs() > 1e-9 * dt {
        return Err(Error::invalid(
            "dt",
            format!("waveform step {dt:e} s does not match filter step {:e} s", f.dt),
        ));
    }
    Ok(())
}

/// Linear interpolation of the waveform at `t_s`.
pub fn sample_at(w: &Waveform, t_s: f64) -> Result<f64> {
    let n = w.samples.len();
    if n == 0 {
        return Err(Error::invalid("waveform", "is empty"));
    }
    let pos = (t_s - w.t0) / w.dt;
    let last = (n - 1) as f64;
    // Tolerate rounding at the grid ends.
    if !(pos >= -1e-9 && pos <= last + 1e-9) {
        return Err(Error::invalid(
            "t_s",
            format!(
                "{t_s:e} s lies outside the waveform span [{:e}, {:e}] s",
                w.t0,
                w.t_end()
            ),
        ));
    }
    let pos = pos.clamp(0.0, last);
    let i = (pos.floor() as usize).min(n.saturating_sub(2));
    if n == 1 {
        return Ok(w.samples[0]);
    }
    let frac = pos - i as f64;
    Ok(w.samples[i] + frac * (w.samples[i + 1] - w.samples[i]))
}

/// Uniform quantization of `[0, ΔU)` into `2^n` codes with saturation.
pub fn quantize(volts: f64, delta_u: f64, n: u32) -> u32 {
    let levels = 1u64 << n;
    if !(volts > 0.0) {
        return 0;
    }
    let idx = (volts / delta_u * levels as f64).floor();
    if idx >= (levels - 1) as f64 {
        (levels - 1) as u32
    } else {
        idx as u32
    }
}

/// Effective number of bits, `(SINAD - 1.76) / 6.02`.
pub fn enob(sinad_db: f64) -> Result<f64> {
    if !(sinad_db > 1.76) {
        return Err(Error::invalid("sinad_db", "must exceed 1.76 dB"));
    }
    Ok((sinad_db - 1.76) / 6.02)
}

pub fn sinad_for_enob(enob: f64) -> f64 {
    enob * 6.02 + 1.76
}
