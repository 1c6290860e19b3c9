//! Domains: half-spaces, epigraphs, cones and balls in dimension 1 to 3.
//!
//! Points are plain slices `&[f64]` whose last coordinate is the vertical one,
//! `x = (x', x_N)`. Membership is strict (domains are open), so points on the
//! boundary are exterior.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Graph function `φ: ℝ^{N-1} → ℝ` of an epigraph `{x_N > φ(x')}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhiSpec {
    Constant(f64),
    /// `φ(x') = a'·x'`.
    Affine(Vec<f64>),
    /// `φ(x') = K |x'|`.
    Corner(f64),
    /// `φ(x') = A cos(ω x_1)`.
    Cosine { amplitude: f64, omega: f64 },
    /// `φ(x') = q |x'|²`; coercive, not globally Lipschitz.
    Parabola(f64),
}

impl PhiSpec {
    pub fn eval(&self, xp: &[f64]) -> f64 {
        match self {
            PhiSpec::Constant(c) => *c,
            PhiSpec::Affine(a) => a.iter().zip(xp).map(|(a, x)| a * x).sum(),
            PhiSpec::Corner(k) => k * norm(xp),
            PhiSpec::Cosine { amplitude, omega } => {
                amplitude * (omega * xp.first().copied().unwrap_or(0.0)).cos()
            }
            PhiSpec::Parabola(q) => q * xp.iter().map(|x| x * x).sum::<f64>(),
        }
    }

    /// Global Lipschitz constant; infinite for the parabola.
    pub fn lipschitz(&self) -> f64 {
        match self {
            PhiSpec::Constant(_) => 0.0,
            PhiSpec::Affine(a) => norm(a),
            PhiSpec::Corner(k) => k.abs(),
            PhiSpec::Cosine { amplitude, omega } => (amplitude * omega).abs(),
            PhiSpec::Parabola(_) => f64::INFINITY,
        }
    }

    /// Lipschitz constant of `φ` restricted to the ball of radius `r` around `xp`.
    fn local_lipschitz(&self, xp: &[f64], r: f64) -> f64 {
        match self {
            PhiSpec::Parabola(q) => 2.0 * q.abs() * (norm(xp) + r),
            other => other.lipschitz(),
        }
    }

    /// The exact distance is available in closed form.
    fn is_flat(&self) -> bool {
        matches!(self, PhiSpec::Constant(_) | PhiSpec::Affine(_))
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            PhiSpec::Constant(c) => c.is_finite(),
            PhiSpec::Affine(a) => a.len() == dim - 1 && a.iter().all(|x| x.is_finite()),
            PhiSpec::Corner(k) => k.is_finite() && *k >= 0.0,
            PhiSpec::Cosine { amplitude, omega } => amplitude.is_finite() && omega.is_finite(),
            PhiSpec::Parabola(q) => q.is_finite() && *q > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad graph function {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    HalfSpace { level: f64 },
    LipschitzEpigraph(PhiSpec),
    /// Open rotationally symmetric cone with vertex at the origin: vectors forming
    /// an angle less than `theta` with `axis`.
    Cone { axis: Vec<f64>, theta: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    CoerciveEpigraph(PhiSpec),
    /// Open axis-aligned box; bounded and convex in every direction.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    dim: usize,
    kind: DomainKind,
}

/// Distance bracket `lower ≤ dist(x, ∂Ω) ≤ upper`; equal when exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistBounds {
    pub lower: f64,
    pub upper: f64,
}

impl DistBounds {
    fn exact(d: f64) -> Self {
        Self { lower: d, upper: d }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

impl DomainSpec {
    pub fn new(dim: usize, kind: DomainKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        match &kind {
            DomainKind::HalfSpace { level } if !level.is_finite() => {
                return Err(Error::InvalidParameter("half-space level must be finite".into()))
            }
            DomainKind::LipschitzEpigraph(phi) => {
                phi.validate(dim)?;
                if !phi.lipschitz().is_finite() {
                    return Err(Error::InvalidParameter(
                        "Lipschitz epigraph needs a finite Lipschitz constant".into(),
                    ));
                }
            }
            DomainKind::CoerciveEpigraph(phi) => {
                phi.validate(dim)?;
                let coercive = match phi {
                    PhiSpec::Parabola(_) => true,
                    PhiSpec::Corner(k) => *k > 0.0,
                    _ => false,
                };
                if !coercive {
                    return Err(Error::InvalidParameter(format!("{phi:?} is not coercive")));
                }
                if dim == 1 {
                    return Err(Error::InvalidParameter("coercive epigraphs need N ≥ 2".into()));
                }
            }
            DomainKind::Cone { axis, theta } => {
                if axis.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: axis.len() });
                }
                if !(*theta > 0.0 && *theta < PI) {
                    return Err(Error::InvalidParameter(format!(
                        "cone opening {theta} not in (0, π)"
                    )));
                }
                if (norm(axis) - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("cone axis must be a unit vector".into()));
                }
            }
            DomainKind::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: center.len() });
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidParameter("ball radius must be positive".into()));
                }
            }
            DomainKind::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: lo.len().min(hi.len()) });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidParameter("box needs lo < hi on every axis".into()));
                }
            }
            _ => {}
        }
        Ok(Self { dim, kind })
    }

    pub fn half_space(dim: usize, level: f64) -> Result<Self> {
        Self::new(dim, DomainKind::HalfSpace { level })
    }

    pub fn epigraph(dim: usize, phi: PhiSpec) -> Result<Self> {
        Self::new(dim, DomainKind::LipschitzEpigraph(phi))
    }

    pub fn coercive(dim: usize, phi: PhiSpec) -> Result<Self> {
        Self::new(dim, DomainKind::CoerciveEpigraph(phi))
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(center.len(), DomainKind::Ball { center, radius })
    }

    pub fn open_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(lo.len(), DomainKind::Box { lo, hi })
    }

    /// Cone around the vertical axis `e_N`.
    pub fn vertical_cone(dim: usize, theta: f64) -> Result<Self> {
        let mut axis = vec![0.0; dim];
        axis[dim - 1] = 1.0;
        Self::new(dim, DomainKind::Cone { axis, theta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    /// Graph function for epigraph-like domains (a half-space is the constant graph).
    pub fn phi(&self) -> Option<PhiSpec> {
        match &self.kind {
            DomainKind::HalfSpace { level } => Some(PhiSpec::Constant(*level)),
            DomainKind::LipschitzEpigraph(p) | DomainKind::CoerciveEpigraph(p) => Some(p.clone()),
            _ => None,
        }
    }

    pub fn is_epigraph(&self) -> bool {
        self.phi().is_some()
    }

    /// Lipschitz constant of the graph; `None` for non-epigraphs.
    pub fn lipschitz(&self) -> Option<f64> {
        self.phi().map(|p| p.lipschitz())
    }

    /// Height of the graph below `x`; `None` for non-epigraphs.
    pub fn graph_height(&self, x: &[f64]) -> Option<f64> {
        self.phi().map(|p| p.eval(&x[..self.dim - 1]))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            Err(Error::DimensionMismatch { expected: self.dim, got: x.len() })
        } else {
            Ok(())
        }
    }

    /// Strict membership. Panics on dimension mismatch in debug builds only.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        let n = self.dim;
        match &self.kind {
            DomainKind::HalfSpace { level } => x[n - 1] > *level,
            DomainKind::LipschitzEpigraph(phi) | DomainKind::CoerciveEpigraph(phi) => {
                x[n - 1] > phi.eval(&x[..n - 1])
            }
            DomainKind::Cone { axis, theta } => in_cone(x, axis, *theta),
            DomainKind::Ball { center, radius } => dist(x, center) < *radius,
            DomainKind::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a < x && x < b),
        }
    }

    pub fn try_contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains(x))
    }

    /// Distance from `x` to `∂Ω`, zero outside. Exact for half-spaces, affine
    /// epigraphs, balls and cones; a certified bracket otherwise.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<DistBounds> {
        self.check_dim(x)?;
        if !self.contains(x) {
            return Ok(DistBounds::exact(0.0));
        }
        let n = self.dim;
        Ok(match &self.kind {
            DomainKind::HalfSpace { level } => DistBounds::exact(x[n - 1] - level),
            DomainKind::LipschitzEpigraph(phi) | DomainKind::CoerciveEpigraph(phi) => {
                let xp = &x[..n - 1];
                let vertical = x[n - 1] - phi.eval(xp);
                if phi.is_flat() {
                    let k = phi.lipschitz();
                    DistBounds::exact(vertical / (1.0 + k * k).sqrt())
                } else {
                    let k = phi.local_lipschitz(xp, vertical);
                    DistBounds { lower: vertical / (1.0 + k * k).sqrt(), upper: vertical }
                }
            }
            DomainKind::Ball { center, radius } => DistBounds::exact(radius - dist(x, center)),
            DomainKind::Box { lo, hi } => DistBounds::exact(
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .fold(f64::INFINITY, |m, (x, (a, b))| m.min(x - a).min(b - x)),
            ),
            DomainKind::Cone { axis, theta } => {
                let r = norm(x);
                let psi = angle_between(x, axis);
                let gap = theta - psi;
                // Past a right angle the nearest boundary point is the vertex.
                let d = if gap >= PI / 2.0 { r } else { r * gap.sin() };
                DistBounds::exact(d)
            }
        })
    }
}

fn in_cone(x: &[f64], axis: &[f64], theta: f64) -> bool {
    let r = norm(x);
    if r == 0.0 {
        return false;
    }
    angle_between(x, axis) < theta
}

/// Angle in `[0, π]` between `x` and the unit vector `axis`.
pub fn angle_between(x: &[f64], axis: &[f64]) -> f64 {
    let r = norm(x);
    if r == 0.0 {
        return 0.0;
    }
    let c: f64 = x.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>() / r;
    c.clamp(-1.0, 1.0).acos()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Reflection across the hyperplane `{x_N = λ}`: `(x', 2λ - x_N)`.
pub fn reflect(x: &[f64], lambda: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    if let Some(last) = y.last_mut() {
        *last = 2.0 * lambda - *last;
    }
    y
}

/// Measure of `B_r(p) ∩ Σ_{e_N,θ}` relative to `|B_r|`, estimated by counting
/// midpoints of a `resolution^N` subgrid of the cube around the ball.
///
/// `p` must lie on the cone boundary (the vertex counts).
pub fn cone_intersection_measure(theta: f64, p: &[f64], r: f64, resolution: usize) -> Result<f64> {
    let dim = p.len();
    let cone = DomainSpec::vertical_cone(dim, theta)?;
    let DomainKind::Cone { axis, .. } = cone.kind() else { unreachable!() };
    if !(r > 0.0) || resolution < 2 {
        return Err(Error::InvalidParameter("need r > 0 and resolution ≥ 2".into()));
    }
    let rp = norm(p);
    if rp > 0.0 {
        let off = (angle_between(p, axis) - theta).abs();
        if off > 1e-9 {
            return Err(Error::Precondition(format!(
                "point is not on the cone boundary (angular offset {off:e})"
            )));
        }
    }
    let step = 2.0 * r / resolution as f64;
    let total = resolution.pow(dim as u32);
    let mut in_ball = 0usize;
    let mut in_both = 0usize;
    let mut q = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut d2 = 0.0;
        for a in 0..dim {
            let i = rem % resolution;
            rem /= resolution;
            let off = -r + (i as f64 + 0.5) * step;
            q[a] = p[a] + off;
            d2 += off * off;
        }
        if d2 < r * r {
            in_ball += 1;
            if in_cone(&q, axis, theta) {
                in_both += 1;
            }
        }
    }
    Ok(in_both as f64 / in_ball as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_distance_is_point_to_line() {
        let d = DomainSpec::epigraph(2, PhiSpec::Affine(vec![1.0])).unwrap();
        let b = d.dist_to_boundary(&[0.0, 2.0]).unwrap();
        assert!(b.is_exact());
        assert!((b.lower - 2.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn halfspace_distance() {
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        assert_eq!(d.dist_to_boundary(&[3.0, 5.0]).unwrap().lower, 5.0);
        assert_eq!(d.dist_to_boundary(&[3.0, -5.0]).unwrap().upper, 0.0);
    }

    #[test]
    fn open_box() {
        let d = DomainSpec::open_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(d.contains(&[0.5, 1.5]) && !d.contains(&[0.0, 1.0]) && !d.contains(&[0.5, 2.5]));
        assert_eq!(d.dist_to_boundary(&[0.25, 1.5]).unwrap().lower, 0.25);
        assert!(DomainSpec::open_box(vec![0.0], vec![0.0]).is_err());
    }

    /// Brute-force distance to the graph of φ by a fine 1-D search in 2-D.
    fn search_dist(phi: &PhiSpec, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        let n = 400_000;
        let span = 12.0;
        for i in 0..=n {
            let t = x[0] - span + 2.0 * span * i as f64 / n as f64;
            let d = dist(x, &[t, phi.eval(&[t])]);
            best = best.min(d);
        }
        best
    }

    #[test]
    fn corner_bracket_contains_exact_distance() {
        let d = DomainSpec::epigraph(2, PhiSpec::Corner(1.0)).unwrap();
        let b = d.dist_to_boundary(&[0.0, 1.0]).unwrap();
        assert!((b.lower - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(b.upper, 1.0);
        let exact = search_dist(&PhiSpec::Corner(1.0), &[0.0, 1.0]);
        assert!((exact - 1.0 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn distance_brackets_hold_against_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for phi in [
            PhiSpec::Corner(1.0),
            PhiSpec::Cosine { amplitude: 0.5, omega: 2.0 },
            PhiSpec::Parabola(0.5),
        ] {
            let dom = if matches!(phi, PhiSpec::Parabola(_)) {
                DomainSpec::coercive(2, phi.clone()).unwrap()
            } else {
                DomainSpec::epigraph(2, phi.clone()).unwrap()
            };
            for _ in 0..100 {
                let x0: f64 = rng.random_range(-2.0..2.0);
                let x = [x0, phi.eval(&[x0]) + rng.random_range(0.01..3.0)];
                let b = dom.dist_to_boundary(&x).unwrap();
                let exact = search_dist(&phi, &x);
                assert!(b.lower <= exact + 1e-6, "{phi:?} {x:?}: {b:?} vs {exact}");
                assert!(exact <= b.upper + 1e-6, "{phi:?} {x:?}: {b:?} vs {exact}");
            }
        }
    }

    #[test]
    fn cone_distance_uses_vertex_past_right_angle() {
        let c = DomainSpec::vertical_cone(2, 0.75 * PI).unwrap();
        // Straight down the complement axis is outside.
        assert!(!c.contains(&[0.0, -1.0]));
        // Along the axis: nearest boundary point is the vertex.
        let b = c.dist_to_boundary(&[0.0, 2.0]).unwrap();
        assert!((b.lower - 2.0).abs() < 1e-14);
        let c = DomainSpec::vertical_cone(2, PI / 4.0).unwrap();
        let b = c.dist_to_boundary(&[0.0, 2.0]).unwrap();
        assert!((b.lower - 2.0 * (PI / 4.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn membership_examples() {
        let c = DomainSpec::epigraph(2, PhiSpec::Corner(1.0)).unwrap();
        assert!(c.contains(&[1.0, 2.0]));
        assert!(!c.contains(&[1.0, 1.0]));
        let b = DomainSpec::ball(vec![0.0; 3], 1.0).unwrap();
        assert!(b.contains(&[0.5, 0.5, 0.5]));
        assert!(b.try_contains(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(DomainSpec::vertical_cone(2, PI).is_err());
        assert!(DomainSpec::vertical_cone(2, 0.0).is_err());
        assert!(DomainSpec::ball(vec![0.0], 0.0).is_err());
        assert!(DomainSpec::epigraph(2, PhiSpec::Parabola(1.0)).is_err());
        assert!(DomainSpec::coercive(2, PhiSpec::Parabola(0.5)).is_ok());
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(reflect(&[1.0, 3.0], 2.0), vec![1.0, 1.0]);
        assert_eq!(reflect(&[0.0, 0.75], 0.75), vec![0.0, 0.75]);
    }

    #[test]
    fn cone_measure_examples() {
        let half = cone_intersection_measure(PI / 2.0, &[0.3, 0.0], 0.5, 400).unwrap();
        assert!((half - 0.5).abs() < 0.01, "{half}");
        let vertex = cone_intersection_measure(PI / 4.0, &[0.0, 0.0], 1.0, 400).unwrap();
        assert!((vertex - 0.25).abs() < 0.01, "{vertex}");
        let t = PI / 4.0;
        let p = [10.0 * t.sin(), 10.0 * t.cos()];
        let lateral = cone_intersection_measure(t, &p, 0.05, 400).unwrap();
        assert!((lateral - 0.5).abs() < 0.02, "{lateral}");
        assert!(cone_intersection_measure(t, &[1.0, 0.0], 0.1, 50).is_err());
    }

    #[test]
    fn cone_measure_bounded_below_across_scales() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let theta = 0.6 * PI;
        let mut min_frac: f64 = 1.0;
        for _ in 0..50 {
            let rho: f64 = rng.random_range(0.0..5.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let p = [sign * rho * theta.sin(), rho * theta.cos()];
            let r = 10f64.powf(rng.random_range(-2.0..1.0));
            min_frac = min_frac.min(cone_intersection_measure(theta, &p, r, 120).unwrap());
        }
        assert!(min_frac > 0.3, "{min_frac}");
    }

    proptest! {
        #[test]
        fn reflection_is_isometric_involution(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
            m in -40i32..40,
        ) {
            let lambda = m as f64 * 0.25;
            let back = reflect(&reflect(&x, lambda), lambda);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let d0 = dist(&x, &y);
            let d1 = dist(&reflect(&x, lambda), &reflect(&y, lambda));
            prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
        }
    }
}
