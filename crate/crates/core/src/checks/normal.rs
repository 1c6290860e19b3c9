use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SNormalDerivative {
    pub point: Vec<f64>,
    /// `-a` from the fit `u(x₀ + tν)/t^s ≈ a + b t`.
    pub value: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// Fit quality below 0.99.
    pub flagged: bool,
}

/// Unit inner normal of an epigraph-like domain at the boundary point above `xp`.
fn inner_normal(domain: &DomainSpec, xp: &[f64]) -> Result<Vec<f64>> {
    let phi = domain
        .phi()
        .ok_or_else(|| Error::Precondition("s-normal derivatives are taken on epigraph boundaries".into()))?;
    let eps = 1e-6;
    let mut nu: Vec<f64> = (0..xp.len())
        .map(|a| {
            let mut p = xp.to_vec();
            let mut m = xp.to_vec();
            p[a] += eps;
            m[a] -= eps;
            -(phi.eval(&p) - phi.eval(&m)) / (2.0 * eps)
        })
        .collect();
    nu.push(1.0);
    let len = crate::domain::norm(&nu);
    Ok(nu.into_iter().map(|v| v / len).collect())
}

/// `(∂_ν)_s u(x₀) = -lim_{t→0⁺} (u(x₀ + tν) - u(x₀)) / t^s` at the boundary point
/// above `xp`, extrapolated from `t ∈ [4h, 32h]` with a linear correction. The
/// boundary value `u(x₀)` is the Dirichlet datum `0`; interpolating it from the
/// grid would smear the `t^s` singularity over a cell.
pub fn s_normal_derivative(u: &GridFunction, domain: &DomainSpec, xp: &[f64], s: f64) -> Result<SNormalDerivative> {
    let nu = inner_normal(domain, xp)?;
    let phi = domain.phi().expect("checked above");
    let mut x0 = xp.to_vec();
    x0.push(phi.eval(xp));
    let h = u.grid.h();
    let (lo, hi) = (u.grid.lower(), u.grid.upper());
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for k in 4..=32 {
        let t = k as f64 * h;
        let x: Vec<f64> = x0.iter().zip(&nu).map(|(a, b)| a + t * b).collect();
        let in_box = x.iter().zip(lo.iter().zip(&hi)).all(|(x, (a, b))| a <= x && x <= b);
        if !in_box || !domain.contains(&x) {
            continue;
        }
        ts.push(t);
        ys.push(u.interpolate(&x) / t.powf(s));
    }
    if ts.len() < 5 {
        return Err(Error::Insufficient(format!("{} ray samples inside the domain", ts.len())));
    }
    let m = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let stt: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sty: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sty / stt;
    let a = my - slope * mt;
    let sse: f64 = ts.iter().zip(&ys).map(|(t, y)| (y - a - slope * t).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SNormalDerivative {
        point: x0,
        value: -a,
        slope,
        r_squared,
        samples: ts.len(),
        flagged: r_squared < 0.99,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalSpread {
    pub values: Vec<SNormalDerivative>,
    /// `(max - min) / mean |value|`.
    pub relative_spread: f64,
}

pub fn s_normal_spread(u: &GridFunction, domain: &DomainSpec, points: &[Vec<f64>], s: f64) -> Result<NormalSpread> {
    let values = points
        .iter()
        .map(|xp| s_normal_derivative(u, domain, xp, s))
        .collect::<Result<Vec<_>>>()?;
    let lo = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().map(|v| v.value.abs()).sum::<f64>() / values.len().max(1) as f64;
    Ok(NormalSpread { values, relative_spread: (hi - lo) / mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PhiSpec;
    use crate::grid::{ExteriorRule, UniformGrid};

    #[test]
    fn exact_power_of_distance() {
        let s = 0.5;
        let g = UniformGrid::from_box(&[-1.0, 0.0], &[1.0, 1.0], 1.0 / 64.0).unwrap();
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| x[1].max(0.0).powf(s));
        let r = s_normal_derivative(&u, &d, &[0.25], s).unwrap();
        assert!((r.value + 1.0).abs() < 1e-3, "{r:?}");
        assert_eq!(r.samples, 29);
    }

    #[test]
    fn tilted_boundary_uses_the_normal() {
        let s = 0.5;
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 128.0).unwrap();
        let d = DomainSpec::epigraph(2, PhiSpec::Affine(vec![0.5])).unwrap();
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| d.dist_to_boundary(x).unwrap().lower.powf(s));
        let spread = s_normal_spread(&u, &d, &[vec![-0.2], vec![0.0], vec![0.2]], s).unwrap();
        assert!(spread.relative_spread < 1e-2);
        assert!(spread.values.iter().all(|v| (v.value + 1.0).abs() < 1e-2));
    }

    #[test]
    fn needs_samples_inside() {
        let g = UniformGrid::from_box(&[-1.0, 0.0], &[1.0, 0.1], 1.0 / 64.0).unwrap();
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        let u = GridFunction::zeros(&g);
        assert!(matches!(s_normal_derivative(&u, &d, &[0.0], 0.5), Err(Error::Insufficient(_))));
    }
}
