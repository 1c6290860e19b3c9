//! Homogeneous s-harmonic profiles in cones around `e_N`.

use crate::domain::{angle_between, norm, DomainSpec};
use crate::error::{Error, Result};
use crate::fit::power_fit;
use crate::grid::{ExteriorRule, GridFunction, UniformGrid};
use crate::operator::{unit_stencil, DiscreteOperator};
use crate::quadrature::integrate_breaks;
use crate::solvers::{solve_linear, SolveOptions};
use serde::Serialize;
use std::f64::consts::PI;

/// Data prescribed in the cone outside the computational box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OuterData {
    One,
    /// `|x|^p`.
    Power(f64),
}

impl OuterData {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            OuterData::One => 1.0,
            OuterData::Power(p) => norm(x).powf(*p),
        }
    }
}

/// Fraction of directions inside a cone of half-opening `theta` around `e_N`.
pub fn solid_angle_fraction(dim: usize, theta: f64) -> f64 {
    match dim {
        1 => 0.5,
        2 => theta / PI,
        _ => 0.5 * (1.0 - theta.cos()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayFit {
    pub alpha: f64,
    pub r_squared: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Exponent over the inner half (in log scale) of the range.
    pub alpha_half: f64,
    /// `|alpha - alpha_half| ≤ 0.03`.
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct ConeProfile {
    pub theta2: f64,
    pub s: f64,
    pub values: GridFunction,
    pub fit: Option<RayFit>,
    /// `C₀` once normalized.
    pub c0: Option<f64>,
    /// Multiplier applied by the normalization.
    pub scale: f64,
}

/// Solves for the s-harmonic function in `Σ_{e_N, θ₂} ∩ box` that vanishes off
/// the cone and equals the outer data in the cone outside the box.
pub fn harmonic_profile(
    theta2: f64,
    s: f64,
    grid: &UniformGrid,
    outer: OuterData,
    opts: &SolveOptions,
) -> Result<ConeProfile> {
    let dim = grid.dim();
    let lo = grid.lower();
    let hi = grid.upper();
    let h = grid.h();
    if (0..dim).any(|a| lo[a] > -h || hi[a] < h) {
        return Err(Error::Precondition("the cone vertex must lie inside the box".into()));
    }
    let domain = DomainSpec::vertical_cone(dim, theta2)?;
    let window = grid.counts().iter().max().copied().unwrap_or(1) - 1;
    let op = DiscreteOperator::assemble(grid, &domain, s, window)?;
    let reach = op.reach();
    let fraction = solid_angle_fraction(dim, theta2);
    let far = fraction * outer.eval(&{
        let mut r = vec![0.0; dim];
        r[dim - 1] = reach;
        r
    });
    let cone = domain.clone();
    let ext = ExteriorRule::callable("cone-outer", Some(far), move |x| {
        if cone.contains(x) {
            outer.eval(x)
        } else {
            0.0
        }
    });
    let rhs = GridFunction::zeros(grid);
    let (mut values, _) = solve_linear(&op, &rhs, &ext, opts)?;
    // Clip round-off below zero; the discrete maximum principle gives v ≥ 0.
    for v in values.values.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    Ok(ConeProfile { theta2, s, values, fit: None, c0: None, scale: 1.0 })
}

impl ConeProfile {
    /// Profile from given samples, for synthetic data.
    pub fn synthetic(theta2: f64, s: f64, grid: &UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = GridFunction::from_fn(grid, ExteriorRule::Zero, f);
        Self { theta2, s, values, fit: None, c0: None, scale: 1.0 }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.values.grid
    }

    pub fn alpha(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.alpha)
    }

    fn in_cone(&self, x: &[f64], theta: f64) -> bool {
        let dim = x.len();
        let mut axis = vec![0.0; dim];
        axis[dim - 1] = 1.0;
        norm(x) > 0.0 && angle_between(x, &axis) < theta
    }

    /// Distance from `x` to the box faces.
    fn shell_gap(&self, x: &[f64]) -> f64 {
        let (lo, hi) = (self.grid().lower(), self.grid().upper());
        (0..x.len()).map(|a| (x[a] - lo[a]).min(hi[a] - x[a])).fold(f64::INFINITY, f64::min)
    }
}

/// Least-squares slope of `log v(t ray)` against `log t` on `[t_min, t_max]`,
/// sampled every grid step along the ray.
pub fn fit_homogeneity_exponent(profile: &mut ConeProfile, ray: &[f64], t_min: f64, t_max: f64) -> Result<RayFit> {
    let grid = profile.grid().clone();
    let h = grid.h();
    let dim = grid.dim();
    if ray.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: ray.len() });
    }
    let r = norm(ray);
    let dir: Vec<f64> = ray.iter().map(|v| v / r).collect();
    if !profile.in_cone(&dir, profile.theta2) {
        return Err(Error::Precondition("the fitting ray must lie inside the cone".into()));
    }
    if !(t_min >= 10.0 * h) {
        return Err(Error::Precondition(format!("t_min = {t_min} is within 10 cells of the vertex")));
    }
    let end: Vec<f64> = dir.iter().map(|d| d * t_max).collect();
    if profile.shell_gap(&end) < 10.0 * h - 1e-12 {
        return Err(Error::Precondition(format!("t_max = {t_max} is within 10 cells of the box shell")));
    }
    let sample = |a: f64, b: f64| -> (Vec<f64>, Vec<f64>) {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        let mut k = (a / h).ceil() as i64;
        while k as f64 * h <= b + 1e-12 {
            let t = k as f64 * h;
            let x: Vec<f64> = dir.iter().map(|d| d * t).collect();
            ts.push(t);
            vs.push(profile.values.interpolate(&x));
            k += 1;
        }
        (ts, vs)
    };
    let (ts, vs) = sample(t_min, t_max);
    if ts.len() < 8 {
        return Err(Error::Insufficient(format!("{} ray samples, need 8", ts.len())));
    }
    let full = power_fit(&ts, &vs)?;
    let mid = (t_min * t_max).sqrt();
    let (th, vh) = sample(t_min, mid);
    let alpha_half = if th.len() >= 8 { power_fit(&th, &vh)?.exponent } else { f64::NAN };
    let fit = RayFit {
        alpha: full.exponent,
        r_squared: full.r_squared,
        t_min,
        t_max,
        points: ts.len(),
        alpha_half,
        stable: (full.exponent - alpha_half).abs() <= 0.03,
    };
    profile.fit = Some(fit.clone());
    Ok(fit)
}

/// Nodes in `Σ_{e_N, θ}` with `r_min ≤ |x| ≤ r_max`.
fn nodes_in_cone(profile: &ConeProfile, theta: f64, r_min: f64, r_max: f64) -> Vec<usize> {
    let g = profile.grid();
    (0..g.len())
        .filter(|&i| {
            let x = g.point(i);
            let r = norm(&x);
            r >= r_min && r <= r_max && profile.in_cone(&x, theta)
        })
        .collect()
}

/// Rescales `v` so that `min v(x)/|x|^α = 1` over nodes of `Σ_{e_N, θ₁}` in the
/// fit range, and records `C₀ = max v(x)/|x|^α` over all nodes in that range.
pub fn normalize_profile(profile: &mut ConeProfile, theta1: f64) -> Result<f64> {
    if !(theta1 < profile.theta2) {
        return Err(Error::InvalidParameter("theta1 must be smaller than theta2".into()));
    }
    let fit = profile
        .fit
        .clone()
        .ok_or_else(|| Error::Precondition("profile exponent has not been fitted".into()))?;
    let alpha = fit.alpha;
    let inner = nodes_in_cone(profile, theta1, fit.t_min, fit.t_max);
    if inner.is_empty() {
        return Err(Error::Insufficient("no samples in the inner cone".into()));
    }
    let g = profile.grid().clone();
    let ratio = |i: usize, v: &GridFunction| v.values[i] / norm(&g.point(i)).powf(alpha);
    let min = inner.iter().map(|&i| ratio(i, &profile.values)).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Degenerate("profile vanishes in the inner cone".into()));
    }
    profile.values.values.iter_mut().for_each(|v| *v /= min);
    profile.scale /= min;
    let all = nodes_in_cone(profile, profile.theta2, fit.t_min, fit.t_max);
    let c0 = all.iter().map(|&i| ratio(i, &profile.values)).fold(1.0, f64::max);
    profile.c0 = Some(c0);
    Ok(c0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerCheck {
    /// `(|x|, F(x) |x|^{2s - 2α})` per sample.
    pub samples: Vec<(f64, f64)>,
    pub min_normalized: f64,
    /// Ratio of the largest to smallest sampled radius.
    pub decades: f64,
}

/// `F(x) = ∫ (v(x) - v(y))² |x - y|^{-N-2s} dy` by the windowed stencil, tail
/// dropped, so the value is a lower bound.
pub fn energy_density(profile: &ConeProfile, node: usize, window: usize) -> f64 {
    let g = profile.grid();
    let dim = g.dim();
    let st = unit_stencil(dim, profile.s, window);
    let m = g.multi_index(node);
    let v0 = profile.values.values[node];
    let mut acc = 0.0;
    let mut q = [0i64; 3];
    for (k, w) in st.offsets.iter().zip(&st.weights) {
        for a in 0..dim {
            q[a] = m[a] + k[a];
        }
        let d = v0 - profile.values.lattice_value(&q[..dim]);
        acc += w * d * d;
    }
    acc * g.h().powf(-2.0 * profile.s)
}

/// Evaluates `F(x) |x|^{2s - 2α}` at `sample_count` nodes of `Σ_{e_N, θ₁}` with
/// log-spaced radii across the fitted range.
pub fn euler_lower_bound_check(profile: &ConeProfile, theta1: f64, sample_count: usize) -> Result<EulerCheck> {
    let fit = profile
        .fit
        .clone()
        .ok_or_else(|| Error::Precondition("profile exponent has not been fitted".into()))?;
    validate_profile(profile)?;
    if sample_count < 2 {
        return Err(Error::Insufficient("need at least two samples".into()));
    }
    let g = profile.grid();
    let dim = g.dim();
    let alpha = fit.alpha;
    let s = profile.s;
    let window = (fit.t_min / g.h()).floor().max(2.0) as usize;
    let mut samples = Vec::with_capacity(sample_count);
    for j in 0..sample_count {
        let r = fit.t_min * (fit.t_max / fit.t_min).powf(j as f64 / (sample_count - 1) as f64);
        let phi = if sample_count > 1 { theta1 * (2.0 * (j % 5) as f64 / 4.0 - 1.0) * 0.9 } else { 0.0 };
        let mut x = vec![0.0; dim];
        x[dim - 1] = r * phi.cos();
        if dim > 1 {
            x[0] = r * phi.sin();
        }
        let m = g.nearest(&x);
        let node = g
            .index_of(&m[..dim])
            .ok_or_else(|| Error::Insufficient("sample outside the grid".into()))?;
        let p = g.point(node);
        if !profile.in_cone(&p, theta1) {
            continue;
        }
        let rr = norm(&p);
        let f = energy_density(profile, node, window);
        samples.push((rr, f * rr.powf(2.0 * s - 2.0 * alpha)));
    }
    if samples.len() < 2 {
        return Err(Error::Insufficient("no samples inside the inner cone".into()));
    }
    let min_normalized = samples.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let rmin = samples.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let rmax = samples.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(EulerCheck { samples, min_normalized, decades: (rmax / rmin).log10() })
}

/// Rejects constant or non-positive profiles.
pub fn validate_profile(profile: &ConeProfile) -> Result<()> {
    let v = &profile.values;
    if v.max() - v.min() <= 1e-14 * (1.0 + v.max().abs()) {
        return Err(Error::Degenerate("profile is constant".into()));
    }
    if let Some(a) = profile.alpha() {
        if !(a > 0.0 && a < 2.0 * profile.s) {
            return Err(Error::Degenerate(format!("fitted exponent {a} outside (0, 2s)")));
        }
    }
    Ok(())
}

/// `F(x)` in one dimension for `v` given analytically on `ℝ`, by adaptive
/// quadrature; the integrand is split at `0`, `x` and `2x` and the
/// far tail beyond `span` is bounded analytically for `v` growing like `|y|^α`.
pub fn energy_density_1d(v: impl Fn(f64) -> f64, x: f64, s: f64, span: f64) -> f64 {
    let two_s = 2.0 * s;
    let vx = v(x);
    let f = |y: f64| {
        let d = (y - x).abs();
        if d == 0.0 {
            0.0
        } else {
            (vx - v(y)).powi(2) / d.powf(1.0 + two_s)
        }
    };
    let lo = x - span;
    let hi = x + span;
    let mut breaks = vec![lo, hi, x];
    for b in [0.0, 2.0 * x, 0.5 * x] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    // Geometric refinement towards the singular point.
    for k in 1..40 {
        let d = x.abs().max(1e-300) * 0.5f64.powi(k);
        breaks.push(x - d);
        breaks.push(x + d);
    }
    integrate_breaks(f, &breaks, 1e-12 * (1.0 + vx * vx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(h: f64, l: f64) -> UniformGrid {
        UniformGrid::from_box(&[-l], &[l], h).unwrap()
    }

    #[test]
    fn exact_power_ray_and_normalization() {
        let g = UniformGrid::from_box(&[-2.0, -2.0], &[2.0, 2.0], 1.0 / 32.0).unwrap();
        let mut p = ConeProfile::synthetic(0.5 * PI, 0.5, &g, |x| norm(x).powf(0.4));
        let fit = fit_homogeneity_exponent(&mut p, &[0.0, 1.0], 0.5, 1.5).unwrap();
        assert!((fit.alpha - 0.4).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let c0 = normalize_profile(&mut p, PI / 3.0).unwrap();
        assert!((c0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_preconditions() {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 32.0).unwrap();
        let mut p = ConeProfile::synthetic(0.5 * PI, 0.5, &g, |x| x[1].max(0.0));
        assert!(fit_homogeneity_exponent(&mut p, &[0.0, -1.0], 0.4, 0.6).is_err());
        assert!(fit_homogeneity_exponent(&mut p, &[0.0, 1.0], 0.1, 0.6).is_err());
        assert!(fit_homogeneity_exponent(&mut p, &[0.0, 1.0], 0.4, 0.9).is_err());
        assert!(matches!(
            fit_homogeneity_exponent(&mut p, &[0.0, 1.0], 0.4, 0.5),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn half_line_profile_has_exponent_s() {
        let g = line(1.0 / 128.0, 8.0);
        let mut p = harmonic_profile(0.5 * PI, 0.5, &g, OuterData::One, &SolveOptions::default()).unwrap();
        assert!(p.values.values.iter().all(|v| *v >= 0.0));
        for i in 0..g.len() {
            if g.point(i)[0] <= 0.0 {
                assert_eq!(p.values.values[i], 0.0);
            }
        }
        let fit = fit_homogeneity_exponent(&mut p, &[1.0], 10.0 / 128.0, 1.0).unwrap();
        assert!((fit.alpha - 0.5).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn normalization_is_idempotent() {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 32.0).unwrap();
        let mut p = ConeProfile::synthetic(0.5 * PI, 0.5, &g, |x| x[1].max(0.0).sqrt() * (1.0 + 0.1 * x[0]));
        fit_homogeneity_exponent(&mut p, &[0.0, 1.0], 0.32, 0.65).unwrap();
        let c0 = normalize_profile(&mut p, PI / 3.0).unwrap();
        let again = normalize_profile(&mut p, PI / 3.0).unwrap();
        assert!(c0 >= 1.0);
        assert!((c0 - again).abs() < 1e-12);
    }

    #[test]
    fn constant_profile_is_rejected() {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 32.0).unwrap();
        let mut p = ConeProfile::synthetic(0.5 * PI, 0.5, &g, |_| 1.0);
        p.fit = Some(RayFit { alpha: 0.4, r_squared: 1.0, t_min: 0.32, t_max: 0.65, points: 10, alpha_half: 0.4, stable: true });
        assert!(matches!(euler_lower_bound_check(&p, PI / 3.0, 10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn energy_scaling_for_homogeneous_data() {
        let (s, alpha) = (0.5, 0.3);
        let v = |y: f64| y.max(0.0).powf(alpha);
        let f1 = energy_density_1d(v, 0.1, s, 1e6);
        let f2 = energy_density_1d(v, 0.2, s, 2e6);
        let expect = 2f64.powf(2.0 * alpha - 2.0 * s);
        assert!((f2 / f1 / expect - 1.0).abs() < 0.05, "{} vs {expect}", f2 / f1);
    }
}
