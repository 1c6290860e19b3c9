//! Shared fixtures for the benchmarks.

use fraclap_core::{DiscreteOperator, DomainSpec, ExteriorRule, GridFunction, UniformGrid};

/// Half-plane operator on `[-2, 2] × [0, 4]` with spacing `h` and window `window`.
pub fn half_plane(h: f64, window: usize) -> DiscreteOperator {
    let grid = UniformGrid::from_box(&[-2.0, 0.0], &[2.0, 4.0], h).expect("grid");
    let domain = DomainSpec::half_space(2, 0.0).expect("domain");
    DiscreteOperator::assemble(&grid, &domain, 0.5, window).expect("operator")
}

/// Smooth test function vanishing below the boundary.
pub fn profile(op: &DiscreteOperator) -> GridFunction {
    GridFunction::from_fn(op.grid(), ExteriorRule::Constant(1.0), |x| x[1].max(0.0).sqrt().min(1.0))
}
