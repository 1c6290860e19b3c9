//! Power-law fits and distance-shell statistics.

use crate::error::{Error, Result};
use serde::Serialize;

/// `y ≈ C x^p` fitted in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!("{} positive points for a power fit", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Insufficient("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(PowerFit { exponent: slope, constant: intercept.exp(), r_squared, points: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellRow {
    pub lower: f64,
    pub upper: f64,
    pub inf: f64,
    pub sup: f64,
    /// Distances at which the extremes are attained.
    pub arg_inf: f64,
    pub arg_sup: f64,
    pub count: usize,
}

impl ShellRow {
    /// Geometric midpoint of the shell.
    pub fn center(&self) -> f64 {
        (self.lower * self.upper).sqrt()
    }
}

/// Statistics of sampled values over geometric distance shells `[d, ρ d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellTable {
    pub ratio: f64,
    pub rows: Vec<ShellRow>,
}

pub const SHELL_RATIO: f64 = 1.25;

impl ShellTable {
    /// Bins `(distance, value)` samples into shells starting at `d_min`; samples
    /// outside `[d_min, d_max)` are dropped and empty shells omitted.
    pub fn build(samples: &[(f64, f64)], d_min: f64, d_max: f64, ratio: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_max > d_min && ratio > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shell range [{d_min}, {d_max}) with ratio {ratio}"
            )));
        }
        let count = ((d_max / d_min).ln() / ratio.ln()).ceil() as usize;
        let mut rows: Vec<ShellRow> = (0..count)
            .map(|k| ShellRow {
                lower: d_min * ratio.powi(k as i32),
                upper: (d_min * ratio.powi(k as i32 + 1)).min(d_max),
                inf: f64::INFINITY,
                sup: f64::NEG_INFINITY,
                arg_inf: f64::NAN,
                arg_sup: f64::NAN,
                count: 0,
            })
            .collect();
        for &(d, v) in samples {
            if d < d_min || d >= d_max {
                continue;
            }
            let mut k = ((d / d_min).ln() / ratio.ln()).floor() as usize;
            k = k.min(count - 1);
            // Guard the bin edges against rounding in the logarithm.
            while k > 0 && d < rows[k].lower {
                k -= 1;
            }
            while k + 1 < count && d >= rows[k].upper {
                k += 1;
            }
            let row = &mut rows[k];
            if v < row.inf {
                row.inf = v;
                row.arg_inf = d;
            }
            if v > row.sup {
                row.sup = v;
                row.arg_sup = d;
            }
            row.count += 1;
        }
        rows.retain(|r| r.count > 0);
        Ok(Self { ratio, rows })
    }

    /// Fit of the shell infima against the distances where they occur.
    pub fn fit_inf(&self) -> Result<PowerFit> {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.arg_inf).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.inf).collect();
        power_fit(&xs, &ys)
    }

    pub fn fit_sup(&self) -> Result<PowerFit> {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.arg_sup).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.sup).collect();
        power_fit(&xs, &ys)
    }

    /// Ratio of the outermost to the innermost shell centre.
    pub fn span(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.center() / a.center(),
            _ => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_data() {
        let xs: Vec<f64> = (1..50).map(|i| i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x.powf(0.4)).collect();
        let f = power_fit(&xs, &ys).unwrap();
        assert!((f.exponent - 0.4).abs() < 1e-12);
        assert!((f.constant - 2.5).abs() < 1e-11);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(power_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Insufficient(_))));
        assert!(matches!(power_fit(&[1.0, 2.0, 3.0], &[0.0, -1.0, 2.0]), Err(Error::Insufficient(_))));
    }

    #[test]
    fn shells_are_disjoint_and_ordered() {
        let samples: Vec<(f64, f64)> = (1..2000).map(|i| (i as f64 * 1e-3, (i as f64 * 1e-3).sqrt())).collect();
        let t = ShellTable::build(&samples, 0.01, 1.5, SHELL_RATIO).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[0].upper <= w[1].lower + 1e-15);
        }
        for r in &t.rows {
            assert!(r.inf >= r.lower.sqrt() - 1e-12 && r.sup < r.upper.sqrt() + 1e-12);
        }
        let f = t.fit_inf().unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn every_sample_lands_in_its_shell(d in prop::collection::vec(0.01f64..10.0, 1..200)) {
            let samples: Vec<(f64, f64)> = d.iter().map(|&x| (x, x)).collect();
            let t = ShellTable::build(&samples, 0.01, 10.0, SHELL_RATIO).unwrap();
            let total: usize = t.rows.iter().map(|r| r.count).sum();
            prop_assert_eq!(total, samples.len());
            for r in &t.rows {
                prop_assert!(r.inf >= r.lower && r.sup < r.upper);
            }
        }
    }
}
