//! Lookup curve from the measured PDF shape statistic `B` to the product
//! `γ_n^Q·Γ`, built by sweeping the photodetector noise.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::pdf::BOptions;
use crate::reduction::Reduction;
use crate::sim::{analyze_scenario, Chain, McSettings, Scenario};

pub const CSV_HEADER: &str = "B,gamma_nq_gamma,n_bits,sigma_s,sigma_zeta";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    /// `None` when the simulated PDF was not bimodal.
    pub b: Option<f64>,
    pub gamma_nq_gamma: Reduction,
    pub n_bits: u32,
    pub sigma_s: f64,
    pub sigma_zeta: f64,
}

impl CurveRow {
    /// Rows that may enter the interpolation.
    pub fn usable(&self) -> bool {
        self.b.is_some() && !self.gamma_nq_gamma.is_untrusted()
    }
}

/// Monotone piecewise-linear map `B → γ_n^Q·Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BCurve {
    rows: Vec<CurveRow>,
    /// Strictly increasing `B`, non-decreasing value.
    knots: Vec<(f64, f64)>,
}

impl BCurve {
    pub fn from_rows(rows: Vec<CurveRow>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.usable())
            .map(|r| (r.b.unwrap(), r.gamma_nq_gamma.value().unwrap()))
            .collect();
        if pts.is_empty() {
            return Err(Error::InvalidInput("curve has no bimodal, finite rows".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(BCurve {
            rows,
            knots: isotonic(&pts),
        })
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn b_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Interpolated `γ_n^Q·Γ`. Values of `B` below the curve take the
    /// cleanest point; values above it are outside the model.
    pub fn lookup(&self, b: f64) -> Result<f64> {
        let (lo, hi) = self.b_range();
        if !b.is_finite() || b > hi {
            return Err(Error::OutOfModel { b, max: hi });
        }
        if b <= lo {
            return Ok(self.knots[0].1);
        }
        let k = self.knots.partition_point(|&(x, _)| x < b);
        let (x0, y0) = self.knots[k - 1];
        let (x1, y1) = self.knots[k];
        Ok(y0 + (y1 - y0) * (b - x0) / (x1 - x0))
    }
}

/// Pool-adjacent-violators fit to non-decreasing values; knots sharing a
/// `B` are merged.
fn isotonic(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    // Blocks of (sum_x, sum_y, count).
    let mut blocks: Vec<(f64, f64, f64)> = Vec::new();
    for &(x, y) in pts {
        blocks.push((x, y, 1.0));
        while blocks.len() >= 2 {
            let (a, b) = (blocks[blocks.len() - 2], blocks[blocks.len() - 1]);
            let same_x = a.0 / a.2 == b.0 / b.2;
            if a.1 / a.2 > b.1 / b.2 || same_x {
                blocks.pop();
                *blocks.last_mut().unwrap() = (a.0 + b.0, a.1 + b.1, a.2 + b.2);
            } else {
                break;
            }
        }
    }
    blocks.into_iter().map(|(sx, sy, c)| (sx / c, sy / c)).collect()
}

/// One Monte-Carlo run per `σ_ζ`, with `σ_s1 = σ_s2 = sigma_s`. Every run
/// reuses the same seed, so the sweep sees common random numbers.
pub fn b_to_gamma_curve(
    base: &Scenario,
    sigma_s: f64,
    sigma_zeta: &[f64],
    mc: &McSettings,
    b_opts: &BOptions,
) -> Result<BCurve> {
    let mut rows = Vec::with_capacity(sigma_zeta.len());
    for &sz in sigma_zeta {
        let mut s = *base;
        s.signal.laser.sigma_s1 = sigma_s;
        s.signal.laser.sigma_s2 = sigma_s;
        s.signal.noise.sigma_zeta = sz;
        let chain = Chain::new(&s)?;
        let a = analyze_scenario(&chain, mc, b_opts, false)?;
        rows.push(CurveRow {
            b: a.b.ok().map(|b| b.value),
            gamma_nq_gamma: Reduction::Finite(a.report.gamma_nq).times(a.report.gamma_comparator),
            n_bits: chain.adc.n,
            sigma_s,
            sigma_zeta: sz,
        });
    }
    BCurve::from_rows(rows)
}

pub fn write_csv<W: Write>(rows: &[CurveRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let b = r.b.map_or_else(|| "none".to_string(), |b| b.to_string());
        writeln!(out, "{b},{},{},{},{}", r.gamma_nq_gamma, r.n_bits, r.sigma_s, r.sigma_zeta)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R, source_name: &str) -> Result<Vec<CurveRow>> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if i == 0 {
            if line.trim() != CSV_HEADER {
                return Err(err(line_no, format!("expected header `{CSV_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(err(line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .map_err(|_| err(line_no, format!("field {} is not a number: `{}`", k + 1, f[k])))
        };
        let b = if f[0] == "none" { None } else { Some(num(0)?) };
        let gamma: Reduction = f[1]
            .parse()
            .map_err(|_| err(line_no, format!("bad reduction `{}`", f[1])))?;
        let n_bits = f[2]
            .parse::<u32>()
            .map_err(|_| err(line_no, format!("bad bit depth `{}`", f[2])))?;
        rows.push(CurveRow {
            b,
            gamma_nq_gamma: gamma,
            n_bits,
            sigma_s: num(3)?,
            sigma_zeta: num(4)?,
        });
    }
    if rows.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(b: Option<f64>, g: f64) -> CurveRow {
        CurveRow {
            b,
            gamma_nq_gamma: Reduction::Finite(g),
            n_bits: 8,
            sigma_s: 0.05,
            sigma_zeta: 0.0,
        }
    }

    #[test]
    fn lookup_interpolates_and_clamps() {
        let c = BCurve::from_rows(vec![row(Some(1.2), 1.5), row(Some(1.4), 2.5), row(None, 9.0)]).unwrap();
        assert!((c.lookup(1.3).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(c.lookup(1.0).unwrap(), 1.5);
        assert!(matches!(c.lookup(1.5), Err(Error::OutOfModel { .. })));
        assert!(c.lookup(f64::NAN).is_err());
    }

    #[test]
    fn violations_are_pooled() {
        let c = BCurve::from_rows(vec![row(Some(1.0), 2.0), row(Some(1.1), 1.0), row(Some(1.2), 3.0)]).unwrap();
        let want = [(1.05, 1.5), (1.2, 3.0)];
        assert_eq!(c.knots().len(), 2);
        for (k, w) in c.knots().iter().zip(want) {
            assert!((k.0 - w.0).abs() < 1e-12 && (k.1 - w.1).abs() < 1e-12, "{k:?}");
        }
    }

    #[test]
    fn untrusted_rows_are_excluded() {
        let mut r = row(Some(2.0), 1.0);
        r.gamma_nq_gamma = Reduction::Untrusted;
        assert!(BCurve::from_rows(vec![r]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut r = row(Some(1.25), 1.75);
        r.sigma_zeta = 0.01;
        let mut u = row(None, 0.0);
        u.gamma_nq_gamma = Reduction::Untrusted;
        let mut buf = Vec::new();
        write_csv(&[r, u], &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, vec![r, u]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = format!("{CSV_HEADER}\n1.2,1.5,8,0.05,0\n1.3,x,8,0.05,0.01\n");
        match read_csv(text.as_bytes(), "c.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_csv("B,wrong\n".as_bytes(), "c.csv").is_err());
    }

    proptest! {
        #[test]
        fn isotonic_fit_is_monotone(ys in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
            let fit = isotonic(&pts);
            for w in fit.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
                prop_assert!(w[0].1 <= w[1].1 + 1e-12);
            }
            prop_assert!(fit.iter().all(|p| p.1 >= 0.0 && p.1 <= 10.0));
        }
    }
}
