//! Linear Dirichlet solves, principal eigenpairs and monotone iteration.

use crate::error::{Error, Result};
use crate::grid::{ExteriorRule, GridFunction};
use crate::nonlinearity::NonlinearitySpec;
use crate::operator::DiscreteOperator;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Relative residual tolerance of inner linear solves.
    pub linear_tol: f64,
    /// Sup-norm change that stops the outer iteration.
    pub outer_tol: f64,
    pub linear_cap: usize,
    pub outer_cap: usize,
    /// Allowed excess over the previous iterate before monotonicity is declared broken.
    pub monotone_slack: f64,
    /// Relative tolerance on the eigenvalue residual.
    pub eigen_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            linear_tol: 1e-10,
            outer_tol: 1e-8,
            linear_cap: 100_000,
            outer_cap: 500,
            monotone_slack: 1e-8,
            eigen_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup-norm residual of the discrete equation at the returned state.
    pub residual: f64,
    pub monotone: bool,
    /// Seconds.
    pub wall_time: f64,
    pub linear_iterations: usize,
}

const CHUNK: usize = 4096;

/// Dot product with a thread-count independent summation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    parts.iter().sum()
}

pub(crate) fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Conjugate gradients for `(A_int + shift I) x = b`, starting from `x`.
/// Stops when `‖r‖_∞ ≤ tol (1 + ‖b‖_∞)`; returns the iteration count.
pub fn conjugate_gradient(
    op: &DiscreteOperator,
    shift: f64,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    cap: usize,
) -> Result<usize> {
    cg(op, |_| shift, b, x, tol, cap)
}

/// Conjugate gradients for `(A_int + diag(d)) x = b` with `d ≥ 0`.
pub fn conjugate_gradient_diag(
    op: &DiscreteOperator,
    d: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    cap: usize,
) -> Result<usize> {
    if d.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), got: d.len() });
    }
    cg(op, |p| d[p], b, x, tol, cap)
}

fn cg(
    op: &DiscreteOperator,
    shift: impl Fn(usize) -> f64 + Sync,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    cap: usize,
) -> Result<usize> {
    let target = tol * (1.0 + sup(b));
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut y = op.apply_interior(v);
        y.par_iter_mut().zip(v.par_iter()).enumerate().for_each(|(p, (y, v))| *y += shift(p) * v);
        y
    };
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if sup(&r) <= target {
        return Ok(0);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=cap {
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(r, a)| *r -= alpha * a);
        let res = sup(&r);
        if res <= target {
            return Ok(it);
        }
        // Recompute the true residual now and then to avoid drift.
        if it % 200 == 0 {
            let ax = apply(x);
            r.iter_mut().zip(b.iter().zip(&ax)).for_each(|(r, (b, a))| *r = b - a);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.par_iter_mut().zip(r.par_iter()).for_each(|(p, r)| *p = r + beta * *p);
    }
    let ax = apply(x);
    let res = b.iter().zip(&ax).fold(0.0f64, |m, (b, a)| m.max((b - a).abs()));
    Err(Error::NotConverged { what: "conjugate gradients", iterations: cap, residual: res })
}

/// Interior values of `u` in the operator's interior ordering.
pub fn interior_values(op: &DiscreteOperator, u: &GridFunction) -> Vec<f64> {
    op.interior().iter().map(|&i| u.values[i]).collect()
}

/// Grid function with the given interior values; nodes of the box outside the
/// domain carry the exterior data.
pub fn with_exterior(op: &DiscreteOperator, interior: &[f64], exterior: &ExteriorRule) -> GridFunction {
    let grid = op.grid();
    let mut values = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        values[i] = match op.slot(i) {
            Some(p) => interior[p],
            None => match exterior {
                ExteriorRule::Zero | ExteriorRule::Truncated(_) => 0.0,
                ExteriorRule::Constant(c) => *c,
                ExteriorRule::Callable(c) => (c.eval)(&grid.point(i)),
            },
        };
    }
    GridFunction { grid: grid.clone(), values, exterior: exterior.clone() }
}

/// Solves `A u = g` in the domain with exterior data `exterior`.
pub fn solve_linear(
    op: &DiscreteOperator,
    rhs: &GridFunction,
    exterior: &ExteriorRule,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    let start = Instant::now();
    let g = interior_values(op, rhs);
    let mut x = vec![0.0; g.len()];
    let mut u = with_exterior(op, &x, exterior);
    let mut total = 0;
    let mut outer = 0;
    loop {
        outer += 1;
        let load = op.exterior_load(&u)?;
        let b: Vec<f64> = g.iter().zip(&load).map(|(g, l)| g + l).collect();
        let prev = x.clone();
        total += conjugate_gradient(op, 0.0, &b, &mut x, opts.linear_tol, opts.linear_cap)?;
        u = with_exterior(op, &x, exterior);
        if !exterior.depends_on_values() {
            break;
        }
        let change = x.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= opts.linear_tol * (1.0 + sup(&x)) {
            break;
        }
        if outer >= opts.outer_cap {
            return Err(Error::NotConverged { what: "exterior coupling", iterations: outer, residual: change });
        }
    }
    let au = op.apply(&u)?;
    let residual = au.iter().zip(&g).fold(0.0f64, |m, (a, g)| m.max((a - g).abs()));
    let report = SolveReport {
        iterations: outer,
        residual,
        monotone: true,
        wall_time: start.elapsed().as_secs_f64(),
        linear_iterations: total,
    };
    Ok((u, report))
}

/// Principal eigenpair of the operator with zero exterior data; `ψ₁` is
/// normalized to sup 1.
pub fn principal_eigenpair(op: &DiscreteOperator, opts: &SolveOptions) -> Result<(f64, GridFunction)> {
    if !matches!(op.domain().kind(), crate::domain::DomainKind::Ball { .. }) {
        return Err(Error::Precondition("principal eigenpair is computed on balls".into()));
    }
    let n = op.interior().len();
    let mut v = vec![1.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.outer_cap {
        let mut w = v.clone();
        conjugate_gradient(op, 0.0, &v, &mut w, opts.linear_tol * 1e-2, opts.linear_cap)?;
        let m = sup(&w);
        w.iter_mut().for_each(|x| *x /= m);
        let aw = op.apply_interior(&w);
        let lambda = dot(&w, &aw) / dot(&w, &w);
        residual = aw.iter().zip(&w).fold(0.0f64, |r, (a, x)| r.max((a - lambda * x).abs()));
        v = w;
        if residual <= opts.eigen_tol * lambda {
            let psi = with_exterior(op, &v, &ExteriorRule::Zero);
            return Ok((lambda, psi));
        }
    }
    Err(Error::NotConverged { what: "inverse power iteration", iterations: opts.outer_cap, residual })
}

/// Monotone iteration from the supersolution `μ 1_Ω`.
pub fn solve_semilinear(
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    exterior: &ExteriorRule,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    let start = vec![f.mu; op.interior().len()];
    monotone_iteration(op, f, exterior, start, Direction::Decreasing, opts)
}

/// Monotone iteration from a subsolution `seed` (interior values); the iterates
/// are asserted to increase.
pub fn solve_semilinear_from(
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    exterior: &ExteriorRule,
    seed: Vec<f64>,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    if seed.len() != op.interior().len() {
        return Err(Error::DimensionMismatch { expected: op.interior().len(), got: seed.len() });
    }
    monotone_iteration(op, f, exterior, seed, Direction::Increasing, opts)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Decreasing,
    Increasing,
}

fn monotone_iteration(
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    exterior: &ExteriorRule,
    mut x: Vec<f64>,
    dir: Direction,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    let start = Instant::now();
    let shift = f.lipschitz;
    let mut u = with_exterior(op, &x, exterior);
    let mut total = 0;
    for k in 1..=opts.outer_cap {
        let load = op.exterior_load(&u)?;
        let b: Vec<f64> = x
            .par_iter()
            .zip(load.par_iter())
            .map(|(&t, l)| f.eval(t) + shift * t + l)
            .collect();
        let mut next = x.clone();
        total += conjugate_gradient(op, shift, &b, &mut next, opts.linear_tol, opts.linear_cap)?;
        let mut change = 0.0f64;
        for (p, (new, old)) in next.iter().zip(&x).enumerate() {
            let step = new - old;
            let excess = match dir {
                Direction::Decreasing => step,
                Direction::Increasing => -step,
            };
            if excess > opts.monotone_slack {
                return Err(Error::MonotonicityViolation { iteration: k, node: op.interior()[p], excess });
            }
            change = change.max(step.abs());
        }
        x = next;
        u = with_exterior(op, &x, exterior);
        if change < opts.outer_tol {
            let residual = semilinear_residual(op, f, &u)?;
            let report = SolveReport {
                iterations: k,
                residual,
                monotone: true,
                wall_time: start.elapsed().as_secs_f64(),
                linear_iterations: total,
            };
            return Ok((u, report));
        }
    }
    let residual = semilinear_residual(op, f, &u)?;
    Err(Error::NotConverged { what: "monotone iteration", iterations: opts.outer_cap, residual })
}

/// `sup |A u - f(u)|` over interior nodes.
pub fn semilinear_residual(op: &DiscreteOperator, f: &NonlinearitySpec, u: &GridFunction) -> Result<f64> {
    let au = op.apply(u)?;
    Ok(op
        .interior()
        .iter()
        .zip(&au)
        .fold(0.0f64, |m, (&i, a)| m.max((a - f.eval(u.values[i])).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::grid::UniformGrid;
    use rand::{Rng, SeedableRng};

    fn ball_op(r: f64, h: f64) -> DiscreteOperator {
        let g = UniformGrid::from_box(&[-r], &[r], h).unwrap();
        let d = DomainSpec::ball(vec![0.0], r).unwrap();
        let w = g.counts()[0] - 1;
        DiscreteOperator::assemble(&g, &d, 0.5, w).unwrap()
    }

    #[test]
    fn torsion_matches_closed_form() {
        let op = ball_op(1.0, 2.0 / 256.0);
        let g = op.grid().clone();
        let one = GridFunction::from_fn(&g, ExteriorRule::Zero, |_| 1.0);
        let (u, rep) = solve_linear(&op, &one, &ExteriorRule::Zero, &SolveOptions::default()).unwrap();
        assert!(rep.residual <= 1e-10 * 2.0, "{}", rep.residual);
        let mut err: f64 = 0.0;
        for &i in op.interior() {
            let x = g.point(i)[0];
            if 1.0 - x.abs() > 2.0 * g.h() {
                err = err.max((u.values[i] - (1.0 - x * x).sqrt()).abs());
            }
        }
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn linearity_and_zero_rhs() {
        let op = ball_op(1.0, 1.0 / 32.0);
        let g = op.grid().clone();
        let opts = SolveOptions { linear_tol: 1e-14, ..Default::default() };
        let rhs = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| 1.0 + x[0]);
        let rhs2 = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| 2.0 * (1.0 + x[0]));
        let (u1, _) = solve_linear(&op, &rhs, &ExteriorRule::Zero, &opts).unwrap();
        let (u2, _) = solve_linear(&op, &rhs2, &ExteriorRule::Zero, &opts).unwrap();
        for (a, b) in u1.values.iter().zip(&u2.values) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        let zero = GridFunction::zeros(&g);
        let (u0, _) = solve_linear(&op, &zero, &ExteriorRule::Zero, &opts).unwrap();
        assert!(u0.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn comparison_for_ordered_right_hand_sides() {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 8.0).unwrap();
        let d = DomainSpec::ball(vec![0.0, 0.0], 0.9).unwrap();
        let op = DiscreteOperator::assemble(&g, &d, 0.6, 16).unwrap();
        let ext = ExteriorRule::callable("bump", Some(0.0), |x| (-x[0] * x[0]).exp() * 0.3);
        let opts = SolveOptions::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g1: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g2: Vec<f64> = g1.iter().map(|v| v + rng.random_range(0.0..0.5)).collect();
            let r1 = GridFunction::new(g.clone(), g1, ExteriorRule::Zero).unwrap();
            let r2 = GridFunction::new(g.clone(), g2, ExteriorRule::Zero).unwrap();
            let (u1, _) = solve_linear(&op, &r1, &ext, &opts).unwrap();
            let (u2, _) = solve_linear(&op, &r2, &ext, &opts).unwrap();
            for (a, b) in u1.values.iter().zip(&u2.values) {
                assert!(*a <= b + 1e-9);
            }
        }
    }

    #[test]
    fn eigenvector_is_positive_and_scaling_holds() {
        let opts = SolveOptions::default();
        let (l1, psi) = principal_eigenpair(&ball_op(1.0, 1.0 / 64.0), &opts).unwrap();
        let op1 = ball_op(1.0, 1.0 / 64.0);
        assert!(op1.interior().iter().all(|&i| psi.values[i] > 0.0));
        assert!((psi.max() - 1.0).abs() < 1e-12);
        let (l2, _) = principal_eigenpair(&ball_op(2.0, 1.0 / 32.0), &opts).unwrap();
        // Same number of nodes per radius: the ratio is exact up to rounding.
        assert!((l2 / l1 - 0.5).abs() < 1e-8, "{}", l2 / l1);
    }

    #[test]
    fn small_ball_collapses_to_zero() {
        let op = ball_op(0.25, 1.0 / 128.0);
        let (lambda, _) = principal_eigenpair(&op, &SolveOptions::default()).unwrap();
        assert!(lambda > 1.0);
        let (u, rep) = solve_semilinear(&op, &NonlinearitySpec::allen_cahn(), &ExteriorRule::Zero, &SolveOptions::default()).unwrap();
        assert!(rep.monotone);
        assert!(u.max() < 1e-6, "{}", u.max());
    }

    #[test]
    fn increasing_iteration_from_a_seed() {
        let op = ball_op(4.0, 1.0 / 16.0);
        let f = NonlinearitySpec::allen_cahn();
        let opts = SolveOptions::default();
        let (_, psi) = principal_eigenpair(&op, &opts).unwrap();
        let seed: Vec<f64> = interior_values(&op, &psi).iter().map(|v| 0.01 * v).collect();
        let (lo, _) = solve_semilinear_from(&op, &f, &ExteriorRule::Zero, seed, &SolveOptions { outer_tol: 1e-11, outer_cap: 5000, ..opts.clone() }).unwrap();
        let (hi, _) = solve_semilinear(&op, &f, &ExteriorRule::Zero, &SolveOptions { outer_tol: 1e-11, outer_cap: 5000, ..opts }).unwrap();
        assert!(hi.max() < 1.0 && lo.max() > 0.5);
        for (a, b) in lo.values.iter().zip(&hi.values) {
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
    }
}
