use super::truncation_margin;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::fit::{ShellTable, SHELL_RATIO};
use crate::grid::{ExteriorRule, GridFunction, UniformGrid};
use crate::nonlinearity::NonlinearitySpec;
use crate::operator::DiscreteOperator;
use crate::solvers::{solve_linear, SolveOptions};
use serde::Serialize;
use statrs::function::gamma::gamma;

/// Default distance from truncation faces for bound checks, in cells.
pub const BOUND_MARGIN_CELLS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBound {
    pub max_u: f64,
    /// `μ - max u`.
    pub margin: f64,
    pub argmax: Option<usize>,
    /// Nodes with `u ≥ μ`.
    pub violations: Vec<usize>,
    pub passed: bool,
}

/// `u < μ` over interior nodes at least `margin_cells` from the truncation faces.
pub fn check_upper_bound(u: &GridFunction, op: &DiscreteOperator, mu: f64, margin_cells: usize) -> UpperBound {
    let mut max_u = f64::NEG_INFINITY;
    let mut argmax = None;
    let mut violations = Vec::new();
    for &i in op.interior() {
        if truncation_margin(&u.grid, i) < margin_cells {
            continue;
        }
        let v = u.values[i];
        if v > max_u {
            max_u = v;
            argmax = Some(i);
        }
        if v >= mu {
            violations.push(i);
        }
    }
    let max_u = if argmax.is_some() { max_u } else { 0.0 };
    let margin = mu - max_u;
    UpperBound { max_u, margin, argmax, passed: violations.is_empty() && margin > 0.0, violations }
}

/// Maximum `γ_{N,s} = Γ(N/2) / (4^s Γ(1+s) Γ(N/2+s))` of the unit-ball torsion function.
pub fn torsion_maximum(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    gamma(n / 2.0) / (4f64.powf(s) * gamma(1.0 + s) * gamma(n / 2.0 + s))
}

/// Maximum of the discrete torsion function of the unit ball at spacing `h`.
pub fn torsion_constant(dim: usize, s: f64, h: f64, opts: &SolveOptions) -> Result<f64> {
    let grid = UniformGrid::from_box(&vec![-1.0; dim], &vec![1.0; dim], h)?;
    let ball = DomainSpec::ball(vec![0.0; dim], 1.0)?;
    let window = grid.counts()[0] - 1;
    let op = DiscreteOperator::assemble(&grid, &ball, s, window)?;
    let rhs = GridFunction::from_fn(&grid, ExteriorRule::Zero, |_| 1.0);
    let (u, _) = solve_linear(&op, &rhs, &ExteriorRule::Zero, opts)?;
    Ok(u.max())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub eps1: f64,
    /// Allowed decrease between consecutive shell infima.
    pub monotone_tol: f64,
    pub depth_count: usize,
    pub strip_heights: Vec<f64>,
    pub margin_cells: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            eps1: 0.1,
            monotone_tol: 1e-6,
            depth_count: 10,
            strip_heights: vec![0.5, 1.0, 2.0],
            margin_cells: BOUND_MARGIN_CELLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthSample {
    pub node: usize,
    pub depth: f64,
    pub u: f64,
    pub eps: f64,
    pub delta: f64,
    /// `C₁ δ_{ε,y}`.
    pub lhs: f64,
    /// `(dist(y) - R₀)^{-2s}`.
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripSup {
    pub height: f64,
    pub sup: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformConvergence {
    pub table: ShellTable,
    /// Largest decrease of the shell infimum from one shell to the next.
    pub monotone_defect: f64,
    pub deepest_inf: f64,
    pub eps1: f64,
    /// Inner radius of the first shell from which every shell infimum exceeds `ε₁`.
    pub r0: f64,
    pub c1: f64,
    pub depth_samples: Vec<DepthSample>,
    pub depth_passed: bool,
    pub strips: Vec<StripSup>,
    pub passed: bool,
}

/// Shell statistics of `u` against the distance to `∂Ω`, the threshold depth
/// `R₀` beyond which `u > ε₁`, the interior inequality `C₁ δ_{ε,y} ≤ (d(y) - R₀)^{-2s}`
/// at sampled depths, and `sup u < μ` on the strips `{0 < x_N - φ(x') < h}`.
pub fn check_uniform_convergence(
    u: &GridFunction,
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    c1: f64,
    cfg: &ConvergenceConfig,
) -> Result<UniformConvergence> {
    let domain = op.domain();
    let grid = &u.grid;
    let mut samples = Vec::new();
    for &i in op.interior() {
        if truncation_margin(grid, i) < cfg.margin_cells {
            continue;
        }
        let d = domain.dist_to_boundary(&grid.point(i))?.lower;
        samples.push((i, d, u.values[i]));
    }
    let d_max = samples.iter().fold(0.0f64, |m, s| m.max(s.1));
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.1, s.2)).collect();
    let table = ShellTable::build(&pairs, grid.h(), d_max * (1.0 + 1e-12), SHELL_RATIO)?;
    if table.rows.is_empty() {
        return Err(Error::Insufficient("no interior samples away from the truncation faces".into()));
    }
    let monotone_defect = table.rows.windows(2).fold(0.0f64, |m, w| m.max(w[0].inf - w[1].inf));
    let deepest_inf = table.rows.last().map(|r| r.inf).unwrap_or(0.0);

    let first = table.rows.iter().rposition(|r| r.inf <= cfg.eps1).map_or(0, |k| k + 1);
    let Some(row) = table.rows.get(first) else {
        return Err(Error::Degenerate(format!("no distance shell has inf u above {}", cfg.eps1)));
    };
    let r0 = row.lower;

    let s = op.s();
    let mut depth_samples = Vec::new();
    let deep: Vec<&(usize, f64, f64)> = samples.iter().filter(|x| x.1 > r0).collect();
    if !deep.is_empty() && cfg.depth_count > 0 {
        for k in 1..=cfg.depth_count {
            let target = r0 + (d_max - r0) * k as f64 / cfg.depth_count as f64;
            let &&(node, depth, uy) = deep
                .iter()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .expect("non-empty");
            let eps = (f.mu / uy - 1.0) / 2.0;
            let top = (1.0 + eps) * uy;
            let delta = if eps > 0.0 && top > cfg.eps1 {
                (0..=1000)
                    .map(|j| f.eval(cfg.eps1 + (top - cfg.eps1) * j as f64 / 1000.0))
                    .fold(f64::INFINITY, f64::min)
            } else {
                f64::NAN
            };
            let lhs = c1 * delta;
            let rhs = (depth - r0).powf(-2.0 * s);
            depth_samples.push(DepthSample { node, depth, u: uy, eps, delta, lhs, rhs, passed: lhs <= rhs });
        }
    }
    let depth_passed = !depth_samples.is_empty() && depth_samples.iter().all(|r| r.passed);

    let strips: Vec<StripSup> = cfg
        .strip_heights
        .iter()
        .map(|&height| {
            let sup = samples
                .iter()
                .filter(|(i, _, _)| {
                    let x = grid.point(*i);
                    let base = domain.graph_height(&x).unwrap_or(0.0);
                    x[x.len() - 1] - base < height
                })
                .fold(f64::NEG_INFINITY, |m, s| m.max(s.2));
            StripSup { height, sup, passed: sup < f.mu }
        })
        .collect();

    let passed = monotone_defect <= cfg.monotone_tol && depth_passed && strips.iter().all(|s| s.passed);
    Ok(UniformConvergence {
        table,
        monotone_defect,
        deepest_inf,
        eps1: cfg.eps1,
        r0,
        c1,
        depth_samples,
        depth_passed,
        strips,
        passed,
    })
}
