use super::truncation_margin;
use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::grid::{ExteriorRule, GridFunction, UniformGrid};
use crate::operator::DiscreteOperator;
use crate::solvers::{solve_linear, SolveOptions};
use serde::Serialize;
use std::sync::Arc;

/// Default distance from lateral faces for the symmetry check, in cells.
pub const SYMMETRY_MARGIN_CELLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalMonotonicity {
    pub direction: Vec<f64>,
    /// Steps of `h` per pair; chosen so that the shift is node-exact when possible.
    pub step: usize,
    pub interpolated: bool,
    pub pairs: usize,
    /// Smallest `u(x + step h (a, 1)) - u(x)`.
    pub min_difference: f64,
    /// The same divided by the pair distance.
    pub min_quotient: f64,
    pub argmin: Option<usize>,
    pub passed: bool,
}

fn node_exact_step(a: &[f64]) -> Option<usize> {
    (1..=8).find(|&k| a.iter().all(|&ai| (ai * k as f64 - (ai * k as f64).round()).abs() < 1e-9))
}

/// Forward differences of `u` along `(a, 1)` over interior pairs away from the
/// truncation faces. Requires `|a|² < K^{-2}`.
pub fn check_directional_monotonicity(
    u: &GridFunction,
    op: &DiscreteOperator,
    a: &[f64],
    lipschitz: f64,
    tol: f64,
    margin_cells: usize,
) -> Result<DirectionalMonotonicity> {
    let grid = &u.grid;
    let n = grid.dim();
    if a.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: a.len() });
    }
    let a2: f64 = a.iter().map(|x| x * x).sum();
    if lipschitz > 0.0 && a2 * lipschitz * lipschitz >= 1.0 {
        return Err(Error::Precondition(format!(
            "direction with |a|² = {a2} leaves the monotonicity cone |a|² < K⁻² = {}",
            1.0 / (lipschitz * lipschitz)
        )));
    }
    let exact = node_exact_step(a);
    let step = exact.unwrap_or(1);
    let h = grid.h();
    let mut dir: Vec<f64> = a.iter().map(|x| x * step as f64).collect();
    dir.push(step as f64);
    let length = h * dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut min_difference = f64::INFINITY;
    let mut argmin = None;
    let mut pairs = 0;
    for &i in op.interior() {
        if truncation_margin(grid, i) < margin_cells {
            continue;
        }
        let shifted = match exact {
            Some(_) => {
                let m = grid.multi_index(i);
                let mut t = [0i64; 3];
                for ax in 0..n {
                    t[ax] = m[ax] + dir[ax].round() as i64;
                }
                match grid.index_of(&t[..n]) {
                    Some(j) if op.slot(j).is_some() && truncation_margin(grid, j) >= margin_cells => u.values[j],
                    _ => continue,
                }
            }
            None => {
                let x: Vec<f64> = grid.point(i).iter().zip(&dir).map(|(x, d)| x + h * d).collect();
                if !op.domain().contains(&x) || !x.iter().zip(grid.lower()).zip(grid.upper()).all(|((x, lo), hi)| {
                    *x >= lo + margin_cells as f64 * h && *x <= hi - margin_cells as f64 * h
                }) {
                    continue;
                }
                u.interpolate(&x)
            }
        };
        pairs += 1;
        let diff = shifted - u.values[i];
        if diff < min_difference {
            min_difference = diff;
            argmin = Some(i);
        }
    }
    if pairs == 0 {
        return Err(Error::Insufficient("no interior pairs for the directional check".into()));
    }
    Ok(DirectionalMonotonicity {
        direction: a.to_vec(),
        step,
        interpolated: exact.is_none(),
        pairs,
        min_difference,
        min_quotient: min_difference / length,
        argmin,
        passed: min_difference >= -tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossVariation {
    pub max_variation: f64,
    /// Height of the row attaining the maximum.
    pub row_height: f64,
    pub rows: usize,
    pub passed: bool,
}

/// Largest `sup - inf` of `u` along horizontal rows of interior nodes at least
/// `margin_cells` from the lateral faces.
pub fn check_1d_symmetry(u: &GridFunction, op: &DiscreteOperator, margin_cells: usize, threshold: f64) -> Result<CrossVariation> {
    let grid = &u.grid;
    let n = grid.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("symmetry in x' needs N ≥ 2".into()));
    }
    let levels = grid.counts()[n - 1];
    let mut lo = vec![f64::INFINITY; levels];
    let mut hi = vec![f64::NEG_INFINITY; levels];
    for &i in op.interior() {
        let m = grid.multi_index(i);
        let lateral = (0..n - 1)
            .map(|ax| (m[ax] as usize).min(grid.counts()[ax] - 1 - m[ax] as usize))
            .min()
            .unwrap_or(0);
        if lateral < margin_cells {
            continue;
        }
        let k = m[n - 1] as usize;
        lo[k] = lo[k].min(u.values[i]);
        hi[k] = hi[k].max(u.values[i]);
    }
    let mut rows = 0;
    let mut max_variation = 0.0f64;
    let mut row_height = f64::NAN;
    for k in 0..levels {
        if lo[k] > hi[k] {
            continue;
        }
        rows += 1;
        if row_height.is_nan() || hi[k] - lo[k] > max_variation {
            max_variation = hi[k] - lo[k];
            row_height = grid.origin()[n - 1] + grid.h() * k as f64;
        }
    }
    if rows == 0 {
        return Err(Error::Insufficient("no interior rows away from the lateral faces".into()));
    }
    Ok(CrossVariation { max_variation, row_height, rows, passed: max_variation <= threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlidingReport {
    pub columns: usize,
    /// Smallest gap in the strict ordering of exterior data around the solution.
    pub ordering_gap: f64,
    pub min_vertical_difference: f64,
    pub passed: bool,
}

/// Exterior data and right-hand side for the sliding check on an open box.
pub struct SlidingProblem {
    pub grid: UniformGrid,
    pub domain: DomainSpec,
    pub s: f64,
    pub window: usize,
    pub exterior: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Source term, non-decreasing in `x_N`.
    pub rhs: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

/// Solves the Dirichlet problem on a box and checks that the solution increases
/// in `x_N`. The exterior data must satisfy the strict vertical ordering: along
/// every vertical line, data below the box < solution < data above the box, and
/// data is non-decreasing on lines missing the box. The ordering is validated on
/// the lattice columns of the box padded by `pad` cells.
pub fn sliding_check(p: &SlidingProblem, pad: usize, opts: &SolveOptions, tol: f64) -> Result<(GridFunction, SlidingReport)> {
    let DomainKind::Box { lo, hi } = p.domain.kind() else {
        return Err(Error::Precondition("sliding check runs on a bounded box".into()));
    };
    let grid = &p.grid;
    let n = grid.dim();
    let h = grid.h();
    let op = DiscreteOperator::assemble(grid, &p.domain, p.s, p.window)?;
    let g = GridFunction::from_fn(grid, ExteriorRule::Zero, |x| (p.rhs)(x));
    for &i in op.interior() {
        let m = grid.multi_index(i);
        let mut up = m;
        up[n - 1] += 1;
        if let Some(j) = grid.index_of(&up[..n]).filter(|&j| op.slot(j).is_some()) {
            if g.values[j] < g.values[i] {
                return Err(Error::Precondition("right-hand side decreases in x_N".into()));
            }
        }
    }
    let ext_fn = p.exterior.clone();
    let ext = ExteriorRule::callable_integrated("sliding", move |x: &[f64]| ext_fn(x));
    let (w, _) = solve_linear(&op, &g, &ext, opts)?;

    // Ordering along padded lattice columns.
    let pad = pad as i64;
    let counts: Vec<i64> = grid.counts().iter().map(|&c| c as i64).collect();
    let heights: Vec<f64> = (-pad..counts[n - 1] + pad).map(|k| grid.origin()[n - 1] + h * k as f64).collect();
    let mut columns = 0;
    let mut ordering_gap = f64::INFINITY;
    let lateral: Vec<Vec<i64>> = {
        let mut out = vec![vec![]];
        for ax in 0..n - 1 {
            out = out
                .into_iter()
                .flat_map(|c| (-pad..counts[ax] + pad).map(move |k| [c.clone(), vec![k]].concat()))
                .collect();
        }
        out
    };
    for col in lateral {
        columns += 1;
        let xp: Vec<f64> = col.iter().enumerate().map(|(ax, &k)| grid.origin()[ax] + h * k as f64).collect();
        let inside = xp.iter().enumerate().all(|(ax, &x)| lo[ax] < x && x < hi[ax]);
        let point = |t: f64| [xp.clone(), vec![t]].concat();
        if inside {
            let below = heights.iter().filter(|&&t| t <= lo[n - 1]).map(|&t| (p.exterior)(&point(t)));
            let above = heights.iter().filter(|&&t| t >= hi[n - 1]).map(|&t| (p.exterior)(&point(t)));
            let below = below.fold(f64::NEG_INFINITY, f64::max);
            let above = above.fold(f64::INFINITY, f64::min);
            let mut wmin = f64::INFINITY;
            let mut wmax = f64::NEG_INFINITY;
            for &t in heights.iter().filter(|&&t| lo[n - 1] < t && t < hi[n - 1]) {
                let v = w.interpolate(&point(t));
                wmin = wmin.min(v);
                wmax = wmax.max(v);
            }
            ordering_gap = ordering_gap.min(wmin - below).min(above - wmax);
        } else {
            let vals: Vec<f64> = heights.iter().map(|&t| (p.exterior)(&point(t))).collect();
            let worst = vals.windows(2).fold(f64::INFINITY, |m, v| m.min(v[1] - v[0]));
            if worst < 0.0 {
                ordering_gap = ordering_gap.min(worst);
            }
        }
    }
    if !(ordering_gap > 0.0) {
        return Err(Error::Precondition(format!(
            "exterior data violates the strict vertical ordering (gap {ordering_gap:.3e})"
        )));
    }
    let mono = check_directional_monotonicity(&w, &op, &vec![0.0; n - 1], 0.0, tol, 0)?;
    let report = SlidingReport {
        columns,
        ordering_gap,
        min_vertical_difference: mono.min_difference,
        passed: mono.passed,
    };
    Ok((w, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PhiSpec;

    fn corner_op() -> (UniformGrid, DiscreteOperator) {
        let g = UniformGrid::from_box(&[-2.0, -2.0], &[2.0, 2.0], 0.125).unwrap();
        let d = DomainSpec::epigraph(2, PhiSpec::Corner(1.0)).unwrap();
        let op = DiscreteOperator::assemble(&g, &d, 0.5, 8).unwrap();
        (g, op)
    }

    #[test]
    fn direction_gate() {
        let (g, op) = corner_op();
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| x[1] - x[0].abs());
        let ok = check_directional_monotonicity(&u, &op, &[0.5], 1.0, 1e-8, 2).unwrap();
        assert_eq!(ok.step, 2);
        assert!(!ok.interpolated && ok.passed);
        assert!(matches!(
            check_directional_monotonicity(&u, &op, &[1.5], 1.0, 1e-8, 2),
            Err(Error::Precondition(_))
        ));
        let irr = check_directional_monotonicity(&u, &op, &[0.3], 1.0, 1e-8, 2).unwrap();
        assert!(irr.interpolated && irr.passed);
        let down = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| -x[1]);
        assert!(!check_directional_monotonicity(&down, &op, &[0.0], 1.0, 1e-8, 2).unwrap().passed);
    }

    #[test]
    fn cross_variation() {
        let g = UniformGrid::from_box(&[-4.0, 0.0], &[4.0, 2.0], 0.0625).unwrap();
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        let op = DiscreteOperator::assemble(&g, &d, 0.5, 4).unwrap();
        let flat = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| x[1].tanh());
        assert_eq!(check_1d_symmetry(&flat, &op, 5, 1e-3).unwrap().max_variation, 0.0);
        let tilted = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| 1e-2 * x[0]);
        let r = check_1d_symmetry(&tilted, &op, 5, 1e-3).unwrap();
        assert!((r.max_variation - 1e-2 * (8.0 - 10.0 * 0.0625)).abs() < 1e-12);
        assert!(!r.passed);
    }

    fn unit_box(exterior: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, dim: usize) -> SlidingProblem {
        let grid = UniformGrid::from_box(&vec![0.0; dim], &vec![1.0; dim], 1.0 / 32.0).unwrap();
        let domain = DomainSpec::open_box(vec![0.0; dim], vec![1.0; dim]).unwrap();
        SlidingProblem { grid, domain, s: 0.5, window: 32, exterior, rhs: Arc::new(|_| 0.0) }
    }

    #[test]
    fn sliding_on_boxes() {
        let ramp: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|x| x[x.len() - 1].clamp(0.0, 1.0));
        for dim in 1..=2 {
            let (w, r) = sliding_check(&unit_box(ramp.clone(), dim), 4, &SolveOptions::default(), 1e-8).unwrap();
            assert!(r.passed && r.min_vertical_difference > 0.0, "{dim}: {r:?}");
            assert!(w.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let flat: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|_| 0.5);
        assert!(matches!(
            sliding_check(&unit_box(flat, 2), 4, &SolveOptions::default(), 1e-8),
            Err(Error::Precondition(_))
        ));
    }
}
