use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::grid::{ExteriorRule, GridFunction};
use crate::nonlinearity::NonlinearitySpec;
use crate::operator::DiscreteOperator;
use crate::solvers::{
    conjugate_gradient_diag, interior_values, principal_eigenpair, solve_semilinear, solve_semilinear_from,
    with_exterior, SolveOptions,
};
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRun {
    pub label: String,
    pub iterations: usize,
    pub max_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Uniqueness {
    pub runs: Vec<UniquenessRun>,
    /// Largest pairwise sup-norm distance between the limits.
    pub discrepancy: f64,
    pub passed: bool,
}

/// Runs the monotone iteration from `μ` and from each seed, and compares the
/// limits pairwise.
pub fn check_uniqueness(
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    exterior: &ExteriorRule,
    seeds: &[(String, Vec<f64>)],
    opts: &SolveOptions,
    threshold: f64,
) -> Result<Uniqueness> {
    let (top, rep) = solve_semilinear(op, f, exterior, opts)?;
    check_uniqueness_from(op, f, exterior, (&top, rep.iterations), seeds, opts, threshold)
}

/// As [`check_uniqueness`], reusing a limit already computed from `μ`.
pub fn check_uniqueness_from(
    op: &DiscreteOperator,
    f: &NonlinearitySpec,
    exterior: &ExteriorRule,
    (top, iterations): (&GridFunction, usize),
    seeds: &[(String, Vec<f64>)],
    opts: &SolveOptions,
    threshold: f64,
) -> Result<Uniqueness> {
    let mut limits = vec![interior_values(op, top)];
    let mut runs = vec![UniquenessRun { label: "supersolution".into(), iterations, max_u: top.max() }];
    for (label, seed) in seeds {
        let (u, rep) = solve_semilinear_from(op, f, exterior, seed.clone(), opts)?;
        runs.push(UniquenessRun { label: label.clone(), iterations: rep.iterations, max_u: u.max() });
        limits.push(interior_values(op, &u));
    }
    let mut discrepancy = 0.0f64;
    for a in 0..limits.len() {
        for b in a + 1..limits.len() {
            let d = limits[a].iter().zip(&limits[b]).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            discrepancy = discrepancy.max(d);
        }
    }
    Ok(Uniqueness { runs, discrepancy, passed: discrepancy < threshold })
}

/// `amplitude · ψ₁` of the ball `B_radius(center)` on the grid of `op`, zero
/// elsewhere, in the interior ordering of `op`. A subsolution whenever
/// `amplitude λ₁ ψ₁ ≤ f(amplitude ψ₁)`.
pub fn eigen_seed(op: &DiscreteOperator, center: Vec<f64>, radius: f64, amplitude: f64, opts: &SolveOptions) -> Result<(f64, Vec<f64>)> {
    let ball = DomainSpec::ball(center, radius)?;
    let bop = DiscreteOperator::assemble(op.grid(), &ball, op.s(), op.window())?;
    let (lambda, psi) = principal_eigenpair(&bop, opts)?;
    let seed = op.interior().iter().map(|&i| amplitude * psi.values[i]).collect();
    Ok((lambda, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallRow {
    pub radius: f64,
    pub lambda1: f64,
    /// Limit of the iteration from `μ`; the zero function is always a solution.
    pub max_u: f64,
    pub discrepancy: f64,
}

/// On balls, zero and (when `λ₁(B_R) < f'(0)`) a positive solution coexist.
pub fn ball_bifurcation_sweep(
    op_for: impl Fn(f64) -> Result<DiscreteOperator>,
    f: &NonlinearitySpec,
    radii: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<BallRow>> {
    radii
        .iter()
        .map(|&radius| {
            let op = op_for(radius)?;
            let (lambda1, _) = principal_eigenpair(&op, opts)?;
            let zero = vec![0.0; op.interior().len()];
            let u = check_uniqueness(&op, f, &ExteriorRule::Zero, &[("zero".into(), zero)], opts, f64::INFINITY)?;
            Ok(BallRow { radius, lambda1, max_u: u.runs[0].max_u, discrepancy: u.discrepancy })
        })
        .collect()
}

/// Half-opening of a cone contained in the complement of the domain, if any.
pub fn complement_cone_opening(domain: &DomainSpec) -> Option<f64> {
    match domain.kind() {
        DomainKind::HalfSpace { .. } | DomainKind::Ball { .. } | DomainKind::Box { .. } => Some(FRAC_PI_2),
        DomainKind::LipschitzEpigraph(phi) => Some(FRAC_PI_2 - phi.lipschitz().atan()),
        // Below a coercive graph bounded from below by its minimum.
        DomainKind::CoerciveEpigraph(_) => Some(FRAC_PI_2),
        DomainKind::Cone { theta, .. } => Some(std::f64::consts::PI - theta).filter(|&t| t > 0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    /// `max_D (A z - c z)`, at most the tolerance for a valid witness.
    pub inequality_max: f64,
    pub max_z: f64,
    pub argmax: Option<usize>,
    pub passed: bool,
}

/// For a valid witness (`A z - c z ≤ tol` in `D`, `z ≤ 0` off `D`, `c ≤ 0`)
/// returns `max_D z`, which the maximum principle forces to be `≤ 0`. Invalid
/// witnesses are input errors.
pub fn max_principle_witness(op: &DiscreteOperator, c: &[f64], z: &GridFunction, tol: f64) -> Result<WitnessReport> {
    let n = op.interior().len();
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    if complement_cone_opening(op.domain()).is_none() {
        return Err(Error::Precondition("the complement of D contains no cone".into()));
    }
    if let Some(p) = c.iter().position(|&v| v > 0.0) {
        return Err(Error::Precondition(format!("coefficient c = {} > 0 at node {}", c[p], op.interior()[p])));
    }
    let outside_ok = match &z.exterior {
        ExteriorRule::Zero | ExteriorRule::Truncated(_) => true,
        ExteriorRule::Constant(v) => *v <= 0.0,
        ExteriorRule::Callable(_) => true,
    };
    if !outside_ok {
        return Err(Error::Precondition("witness is positive outside the box".into()));
    }
    for i in 0..z.grid.len() {
        if op.slot(i).is_none() && z.values[i] > tol {
            return Err(Error::InvalidWitness { node: i, excess: z.values[i] });
        }
    }
    let az = op.apply(z)?;
    let mut inequality_max = f64::NEG_INFINITY;
    for (p, &i) in op.interior().iter().enumerate() {
        let r = az[p] - c[p] * z.values[i];
        if r > tol {
            return Err(Error::InvalidWitness { node: i, excess: r });
        }
        inequality_max = inequality_max.max(r);
    }
    let mut max_z = f64::NEG_INFINITY;
    let mut argmax = None;
    for &i in op.interior() {
        if z.values[i] > max_z {
            max_z = z.values[i];
            argmax = Some(i);
        }
    }
    Ok(WitnessReport { inequality_max, max_z, argmax, passed: max_z <= tol })
}

/// Solves `(A - c) z = -g` in `D` with exterior value `level ≤ 0`.
pub fn generate_witness(op: &DiscreteOperator, c: &[f64], g: &[f64], level: f64, opts: &SolveOptions) -> Result<GridFunction> {
    if level > 0.0 {
        return Err(Error::InvalidParameter(format!("exterior level {level} must be ≤ 0")));
    }
    let ext = if level == 0.0 { ExteriorRule::Zero } else { ExteriorRule::Constant(level) };
    let n = op.interior().len();
    let probe = with_exterior(op, &vec![0.0; n], &ext);
    let load = op.exterior_load(&probe)?;
    let b: Vec<f64> = g.iter().zip(&load).map(|(g, l)| -g + l).collect();
    let d: Vec<f64> = c.iter().map(|v| -v).collect();
    let mut x = vec![0.0; n];
    conjugate_gradient_diag(op, &d, &b, &mut x, opts.linear_tol, opts.linear_cap)?;
    Ok(with_exterior(op, &x, &ext))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PhiSpec;
    use crate::grid::UniformGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corner_op() -> DiscreteOperator {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 16.0).unwrap();
        let d = DomainSpec::epigraph(2, PhiSpec::Corner(1.0)).unwrap();
        DiscreteOperator::assemble(&g, &d, 0.5, 16).unwrap()
    }

    #[test]
    fn generated_witnesses_are_nonpositive() {
        let op = corner_op();
        let n = op.interior().len();
        let opts = SolveOptions { linear_tol: 1e-13, ..SolveOptions::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let c: Vec<f64> = (0..n).map(|_| -rng.random_range(0.0..2.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let level = -rng.random_range(0.0..1.0);
            let z = generate_witness(&op, &c, &g, level, &opts).unwrap();
            let r = max_principle_witness(&op, &c, &z, 1e-8).unwrap();
            assert!(r.passed && r.max_z <= 1e-8, "{r:?}");
        }
        let zero = with_exterior(&op, &vec![0.0; n], &ExteriorRule::Zero);
        assert_eq!(max_principle_witness(&op, &vec![-1.0; n], &zero, 1e-8).unwrap().max_z, 0.0);
    }

    #[test]
    fn invalid_witness_is_an_input_error() {
        let op = corner_op();
        let n = op.interior().len();
        let bump = with_exterior(&op, &vec![1.0; n], &ExteriorRule::Zero);
        assert!(matches!(
            max_principle_witness(&op, &vec![0.0; n], &bump, 1e-8),
            Err(Error::InvalidWitness { .. })
        ));
        assert!(matches!(
            max_principle_witness(&op, &vec![0.5; n], &bump, 1e-8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn identical_seeds_agree_and_ball_bifurcates() {
        let g = UniformGrid::from_box(&[-3.0], &[3.0], 1.0 / 16.0).unwrap();
        let op_for = |r: f64| DiscreteOperator::assemble(&g, &DomainSpec::ball(vec![0.0], r)?, 0.5, 96);
        let f = NonlinearitySpec::allen_cahn();
        let opts = SolveOptions { outer_tol: 1e-11, outer_cap: 5000, ..SolveOptions::default() };
        let rows = ball_bifurcation_sweep(op_for, &f, &[0.5, 2.5], &opts).unwrap();
        assert!(rows[0].lambda1 > 1.0 && rows[0].discrepancy < 1e-9);
        assert!(rows[1].lambda1 < 1.0 && rows[1].discrepancy > 0.1);
        let op = op_for(2.5).unwrap();
        let (_, seed) = eigen_seed(&op, vec![0.0], 2.5, 0.01, &opts).unwrap();
        let u = check_uniqueness(&op, &f, &ExteriorRule::Zero, &[("a".into(), seed.clone()), ("b".into(), seed)], &opts, 1e-7).unwrap();
        assert!(u.passed, "{u:?}");
    }
}
