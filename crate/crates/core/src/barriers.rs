//! Boundary barriers built from cone profiles, and envelope fits near `∂Ω`.

use crate::cone::ConeProfile;
use crate::domain::{angle_between, norm, DomainSpec};
use crate::error::{Error, Result};
use crate::fit::{PowerFit, ShellTable, SHELL_RATIO};
use crate::grid::{ExteriorRule, GridFunction};
use crate::operator::{normalization_constant, DiscreteOperator};
use crate::quadrature::integrate_breaks;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierParams {
    pub r: f64,
    pub alpha: f64,
    pub c0: f64,
    /// Roots of `2 R^{-α} t - t² = 1`.
    pub root_lo: f64,
    pub root_hi: f64,
}

impl BarrierParams {
    pub fn new(r: f64, alpha: f64, c0: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParameter(format!("barrier radius {r} not in (0, 1]")));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent {alpha} must be positive")));
        }
        let a = r.powf(-alpha);
        let disc = (a * a - 1.0).max(0.0).sqrt();
        // root_lo via the product form avoids cancellation for small R.
        let root_hi = a + disc;
        Ok(Self { r, alpha, c0, root_lo: 1.0 / root_hi, root_hi })
    }

    /// `z_R = 2 R^{-α} v - v²`.
    pub fn z(&self, v: f64) -> f64 {
        2.0 * self.r.powf(-self.alpha) * v - v * v
    }

    /// `z_R` below `root_hi`, `1` on `D_R = {v ≥ root_hi}`.
    pub fn w(&self, v: f64) -> f64 {
        if v >= self.root_hi {
            1.0
        } else {
            self.z(v)
        }
    }
}

fn require_normalized(profile: &ConeProfile) -> Result<(f64, f64)> {
    match (profile.alpha(), profile.c0) {
        (Some(a), Some(c0)) => Ok((a, c0)),
        _ => Err(Error::Precondition("barriers need a fitted and normalized profile".into())),
    }
}

/// `v` extended beyond the fitted range by `α`-homogeneity.
pub fn homogeneous_extension(profile: &ConeProfile, x: &[f64]) -> f64 {
    let fit = profile.fit.as_ref().expect("fitted profile");
    let r = norm(x);
    if r <= fit.t_max {
        return profile.values.interpolate(x);
    }
    let scale = fit.t_max / r;
    let y: Vec<f64> = x.iter().map(|c| c * scale).collect();
    profile.values.interpolate(&y) * scale.powf(-fit.alpha)
}

fn barrier_function(profile: &ConeProfile, params: BarrierParams, cap: bool) -> GridFunction {
    let values: Vec<f64> = (0..profile.grid().len())
        .map(|i| {
            let v = homogeneous_extension(profile, &profile.grid().point(i));
            if cap {
                params.w(v)
            } else {
                params.z(v)
            }
        })
        .collect();
    let outer = profile.clone();
    let ext = ExteriorRule::callable_integrated("barrier", move |x| {
        let v = homogeneous_extension(&outer, x).max(0.0);
        if cap {
            params.w(v)
        } else {
            params.z(v)
        }
    });
    GridFunction { grid: profile.grid().clone(), values, exterior: ext }
}

pub fn barrier_zr(profile: &ConeProfile, r: f64) -> Result<GridFunction> {
    let (alpha, c0) = require_normalized(profile)?;
    Ok(barrier_function(profile, BarrierParams::new(r, alpha, c0)?, false))
}

pub fn barrier_wr(profile: &ConeProfile, r: f64) -> Result<GridFunction> {
    let (alpha, c0) = require_normalized(profile)?;
    Ok(barrier_function(profile, BarrierParams::new(r, alpha, c0)?, true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierCheck {
    pub r: f64,
    /// `min (−Δ)^s w_R(x) |x|^{2s − 2α}` over the samples.
    pub min_normalized: f64,
    pub argmin: f64,
    pub samples: usize,
}

/// Applies the operator to `w_R` at nodes of `Σ_{e_N, θ₁} ∩ B_R` with `|x| ≥ 2h`.
pub fn verify_barrier_inequality(
    w: &GridFunction,
    op: &DiscreteOperator,
    theta1: f64,
    r: f64,
    alpha: f64,
) -> Result<BarrierCheck> {
    let g = op.grid();
    let h = g.h();
    if r < 4.0 * h {
        return Err(Error::Insufficient(format!("R = {r} is below four cells")));
    }
    let dim = g.dim();
    let mut axis = vec![0.0; dim];
    axis[dim - 1] = 1.0;
    let s = op.s();
    let mut best = (f64::INFINITY, 0.0);
    let mut count = 0;
    for i in 0..g.len() {
        let x = g.point(i);
        let rr = norm(&x);
        if rr < 2.0 * h - 1e-12 || rr >= r || angle_between(&x, &axis) >= theta1 {
            continue;
        }
        let val = op.apply_at(w, i)? * rr.powf(2.0 * s - 2.0 * alpha);
        count += 1;
        if val < best.0 {
            best = (val, rr);
        }
    }
    if count == 0 {
        return Err(Error::Insufficient("no sample nodes in the inner cone".into()));
    }
    Ok(BarrierCheck { r, min_normalized: best.0, argmin: best.1, samples: count })
}

/// `(−Δ)^s w_R(x)` in one dimension for the half-line profile `v = x_+^α`, by
/// adaptive quadrature of the symmetric form with an analytic far tail.
pub fn barrier_operator_1d(params: &BarrierParams, s: f64, x: f64) -> f64 {
    let alpha = params.alpha;
    let w = |y: f64| if y <= 0.0 { 0.0 } else { params.w(y.powf(alpha)) };
    let wx = w(x);
    let two_s = 2.0 * s;
    let y_d = params.root_hi.powf(1.0 / alpha);
    let z = 4.0 * (y_d + x);
    let f = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            (2.0 * wx - w(x + t) - w(x - t)) / t.powf(1.0 + two_s)
        }
    };
    // Below t0 the second difference cancels in floating point; use its Taylor form.
    let t0 = 1e-4 * x.min((y_d - x).abs());
    let mut breaks = vec![t0, x, (y_d - x).abs(), y_d + x, z];
    for k in 1..14 {
        breaks.push(x * 0.5f64.powi(k));
    }
    breaks.retain(|b| *b >= t0 && *b <= z);
    let a = params.r.powf(-alpha);
    let w2 = if x.powf(alpha) >= params.root_hi {
        0.0
    } else {
        2.0 * a * alpha * (alpha - 1.0) * x.powf(alpha - 2.0)
            - 2.0 * alpha * (2.0 * alpha - 1.0) * x.powf(2.0 * alpha - 2.0)
    };
    let near = -w2 * t0.powf(2.0 - two_s) / (2.0 - two_s);
    let body = near + integrate_breaks(f, &breaks, 1e-11);
    // Beyond z: w(x + t) = 1 and w(x - t) = 0.
    let tail = (2.0 * wx - 1.0) * z.powf(-two_s) / two_s;
    normalization_constant(1, s).expect("valid s") * (body + tail)
}

/// Minimum of `(−Δ)^s w_R(x) x^{2s − 2α}` over `samples` log-spaced points of `(0, R)`.
pub fn verify_barrier_1d(r: f64, s: f64, samples: usize) -> Result<BarrierCheck> {
    if samples < 2 {
        return Err(Error::Insufficient("need at least two samples".into()));
    }
    let params = BarrierParams::new(r, s, 1.0)?;
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..samples {
        let x = r * 10f64.powf(-2.0 + 2.0 * (j as f64 + 0.5) / samples as f64);
        let val = barrier_operator_1d(&params, s, x) * x.powf(2.0 * s - 2.0 * params.alpha);
        if val < best.0 {
            best = (val, x);
        }
    }
    Ok(BarrierCheck { r, min_normalized: best.0, argmin: best.1, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusBisection {
    /// Largest radius found to pass.
    pub r_bar: f64,
    /// Smallest radius found to fail, if any.
    pub r_fail: Option<f64>,
    pub steps: usize,
    /// `(R, min_normalized)` per evaluation.
    pub trace: Vec<(f64, f64)>,
}

/// Bisection in `log R` on the predicate `min_normalized(R) > 0`.
pub fn bisect_radius(
    mut check: impl FnMut(f64) -> Result<f64>,
    r_lo: f64,
    r_hi: f64,
    steps: usize,
) -> Result<RadiusBisection> {
    let mut trace = Vec::new();
    let mut eval = |r: f64, trace: &mut Vec<(f64, f64)>| -> Result<bool> {
        let v = check(r)?;
        trace.push((r, v));
        Ok(v > 0.0)
    };
    if !eval(r_lo, &mut trace)? {
        return Err(Error::Precondition(format!("barrier inequality already fails at R = {r_lo}")));
    }
    if eval(r_hi, &mut trace)? {
        return Ok(RadiusBisection { r_bar: r_hi, r_fail: None, steps: 0, trace });
    }
    let (mut lo, mut hi) = (r_lo, r_hi);
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        if eval(mid, &mut trace)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RadiusBisection { r_bar: lo, r_fail: Some(hi), steps, trace })
}

/// Where to look for envelope fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellRange {
    pub d_min: f64,
    pub d_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub shells: usize,
    /// Ratio of the outermost to innermost shell.
    pub span: f64,
    pub table: ShellTable,
}

impl EnvelopeFit {
    fn from(fit: PowerFit, table: ShellTable) -> Self {
        Self {
            exponent: fit.exponent,
            constant: fit.constant,
            r_squared: fit.r_squared,
            shells: table.rows.len(),
            span: table.span(),
            table,
        }
    }
}

/// Power-law fit of the sup of `|u|` over distance shells (lower distance bound),
/// restricted to nodes accepted by `keep`.
pub fn boundary_decay_estimate(
    u: &GridFunction,
    domain: &DomainSpec,
    range: ShellRange,
    keep: impl Fn(&[f64]) -> bool,
) -> Result<EnvelopeFit> {
    let g = &u.grid;
    let mut samples = Vec::new();
    for i in 0..g.len() {
        let x = g.point(i);
        if !domain.contains(&x) || !keep(&x) {
            continue;
        }
        let d = domain.dist_to_boundary(&x)?.lower;
        samples.push((d, u.values[i].abs()));
    }
    let table = ShellTable::build(&samples, range.d_min, range.d_max, SHELL_RATIO)?;
    if table.rows.len() < 4 {
        return Err(Error::Insufficient(format!("{} distance shells", table.rows.len())));
    }
    let fit = table.fit_sup()?;
    Ok(EnvelopeFit::from(fit, table))
}

/// Power-law fit of the inf of `u` over shells of `x_N − φ(x')` in `(d_min, h₁)`.
pub fn lower_growth_fit(
    u: &GridFunction,
    domain: &DomainSpec,
    range: ShellRange,
    keep: impl Fn(&[f64]) -> bool,
) -> Result<EnvelopeFit> {
    let g = &u.grid;
    let mut samples = Vec::new();
    for i in 0..g.len() {
        let x = g.point(i);
        if !domain.contains(&x) || !keep(&x) {
            continue;
        }
        let d = match domain.graph_height(&x) {
            Some(gh) => x[x.len() - 1] - gh,
            None => domain.dist_to_boundary(&x)?.lower,
        };
        samples.push((d, u.values[i]));
    }
    let table = ShellTable::build(&samples, range.d_min, range.d_max, SHELL_RATIO)?;
    if table.rows.len() < 4 {
        return Err(Error::Insufficient(format!("{} distance shells", table.rows.len())));
    }
    if let Some(row) = table.rows.iter().find(|r| r.inf <= 0.0) {
        return Err(Error::Degenerate(format!(
            "solution vanishes on the shell [{:.4}, {:.4})",
            row.lower, row.upper
        )));
    }
    let fit = table.fit_inf()?;
    Ok(EnvelopeFit::from(fit, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{fit_homogeneity_exponent, normalize_profile};
    use crate::grid::UniformGrid;
    use std::f64::consts::PI;

    #[test]
    fn roots_satisfy_vieta() {
        for i in 1..=100 {
            let r = i as f64 / 100.0;
            for alpha in [0.1, 0.3, 0.5, 0.9] {
                let p = BarrierParams::new(r, alpha, 1.0).unwrap();
                assert!((p.root_lo * p.root_hi - 1.0).abs() < 1e-14);
                assert!(p.root_lo <= 1.0 && p.root_hi >= 1.0);
                assert!((p.z(p.root_lo) - 1.0).abs() < 1e-12);
                assert!((p.z(p.root_hi) - 1.0).abs() < 1e-12 * p.root_hi * p.root_hi);
                let a = r.powf(-alpha);
                assert!((p.z(a) - a * a).abs() < 1e-12 * a * a);
                assert_eq!(p.w(2.0 * p.root_hi), 1.0);
                assert_eq!(p.z(0.0), 0.0);
            }
        }
        assert!(BarrierParams::new(1.5, 0.5, 1.0).is_err());
    }

    fn half_line_profile(h: f64) -> ConeProfile {
        let g = UniformGrid::from_box(&[-2.0], &[2.0], h).unwrap();
        let mut p = ConeProfile::synthetic(0.5 * PI, 0.5, &g, |x| x[0].max(0.0).sqrt());
        fit_homogeneity_exponent(&mut p, &[1.0], 10.0 * h, 1.5).unwrap();
        normalize_profile(&mut p, 0.25 * PI).unwrap();
        p
    }

    #[test]
    fn barrier_is_nonnegative_and_at_least_one_away_from_the_ball() {
        let p = half_line_profile(1.0 / 64.0);
        let w = barrier_wr(&p, 0.25).unwrap();
        assert!(w.min() >= 0.0);
        let g = p.grid();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            if x > 0.25 && x < 1.0 {
                assert!(w.values[i] >= 1.0 - 1e-8, "{x} {}", w.values[i]);
            }
        }
        let unnormalized = ConeProfile::synthetic(0.5 * PI, 0.5, g, |x| x[0].max(0.0));
        assert!(barrier_wr(&unnormalized, 0.25).is_err());
    }

    #[test]
    fn quadrature_barrier_is_positive_at_quarter_radius() {
        let c = verify_barrier_1d(0.25, 0.5, 30).unwrap();
        assert!(c.min_normalized > 0.0, "{c:?}");
    }

    #[test]
    fn stencil_barrier_agrees_with_quadrature() {
        let h = 1.0 / 256.0;
        let p = half_line_profile(h);
        let w = barrier_wr(&p, 0.25).unwrap();
        let d = DomainSpec::vertical_cone(1, 0.5 * PI).unwrap();
        let op = DiscreteOperator::assemble(p.grid(), &d, 0.5, 1024).unwrap();
        let check = verify_barrier_inequality(&w, &op, 0.25 * PI, 0.25, 0.5).unwrap();
        assert!(check.min_normalized > 0.0, "{check:?}");
        let params = BarrierParams::new(0.25, 0.5, 1.0).unwrap();
        let x = 0.125;
        let node = p.grid().index_of(&[(x / h) as i64 + 512]).unwrap();
        let a = op.apply_at(&w, node).unwrap();
        let b = barrier_operator_1d(&params, 0.5, x);
        assert!((a - b).abs() < 0.02 * b.abs(), "{a} vs {b}");
        let neg = GridFunction { values: w.values.iter().map(|v| -v).collect(), ..w.clone() };
        let neg_ext = ExteriorRule::callable_integrated("neg", {
            let e = w.exterior.clone();
            move |x| match &e {
                ExteriorRule::Callable(c) => -(c.eval)(x),
                _ => 0.0,
            }
        });
        let neg = GridFunction { exterior: neg_ext, ..neg };
        let flipped = verify_barrier_inequality(&neg, &op, 0.25 * PI, 0.25, 0.5).unwrap();
        assert!(flipped.min_normalized < 0.0);
    }

    #[test]
    fn synthetic_envelopes() {
        let g = UniformGrid::from_box(&[-1.0, 0.0], &[1.0, 2.0], 1.0 / 64.0).unwrap();
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| x[1].max(0.0).powf(0.3));
        let range = ShellRange { d_min: 1.0 / 64.0, d_max: 1.5 };
        let fit = boundary_decay_estimate(&u, &d, range, |_| true).unwrap();
        assert!((fit.exponent - 0.3).abs() < 1e-3, "{}", fit.exponent);
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| x[1].max(0.0).powf(0.45));
        let fit = lower_growth_fit(&u, &d, range, |_| true).unwrap();
        assert!((fit.exponent - 0.45).abs() < 1e-3, "{}", fit.exponent);
        let zero = GridFunction::zeros(&g);
        assert!(matches!(lower_growth_fit(&zero, &d, range, |_| true), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bisection_brackets_a_threshold() {
        let b = bisect_radius(|r| Ok(0.3 - r), 0.01, 1.0, 20).unwrap();
        assert!(b.r_bar <= 0.3 && b.r_fail.unwrap() > 0.3);
        assert!(b.r_fail.unwrap() / b.r_bar < 1.0 + 1e-4);
        let all = bisect_radius(|_| Ok(1.0), 0.01, 1.0, 20).unwrap();
        assert_eq!(all.r_bar, 1.0);
        assert!(bisect_radius(|_| Ok(-1.0), 0.01, 1.0, 20).is_err());
    }
}
