//! Uniform tensor grids, grid functions and exterior data.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Hard cap on the number of grid nodes.
pub const MAX_NODES: usize = 1 << 23;

/// Isotropic tensor-product grid. Node `i` has coordinates `origin + h * multi(i)`,
/// with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    origin: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl UniformGrid {
    pub fn new(origin: Vec<f64>, h: f64, counts: Vec<usize>) -> Result<Self> {
        let dim = origin.len();
        if !(1..=3).contains(&dim) || counts.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "grid needs 1..=3 axes with matching counts, got {dim} and {}",
                counts.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing {h} must be positive")));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidParameter("every axis needs at least two nodes".into()));
        }
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        match total {
            Some(t) if t <= MAX_NODES => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "grid {counts:?} exceeds the node cap {MAX_NODES}"
                )))
            }
        }
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(Self { origin, h, counts, strides })
    }

    /// Grid covering the box `[lo, hi]` with spacing `h`; the upper corner is
    /// rounded to the nearest node.
    pub fn from_box(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        let counts = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / h).round() as usize + 1)
            .collect();
        Self::new(lo.to_vec(), h, counts)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> Vec<f64> {
        self.origin.clone()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.counts)
            .map(|(o, &c)| o + self.h * (c - 1) as f64)
            .collect()
    }

    pub fn multi_index(&self, idx: usize) -> [i64; 3] {
        let mut m = [0i64; 3];
        for a in 0..self.dim() {
            m[a] = ((idx / self.strides[a]) % self.counts[a]) as i64;
        }
        m
    }

    /// Flat index for an integer position, `None` outside the box.
    pub fn index_of(&self, m: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for a in 0..self.dim() {
            if m[a] < 0 || m[a] >= self.counts[a] as i64 {
                return None;
            }
            idx += m[a] as usize * self.strides[a];
        }
        Some(idx)
    }

    /// Coordinates of an integer lattice position (inside or outside the box).
    pub fn lattice_point(&self, m: &[i64]) -> Vec<f64> {
        (0..self.dim()).map(|a| self.origin[a] + self.h * m[a] as f64).collect()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        self.lattice_point(&m[..self.dim()])
    }

    /// Nearest lattice position of `x` (not clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> [i64; 3] {
        let mut m = [0i64; 3];
        for a in 0..self.dim() {
            m[a] = ((x[a] - self.origin[a]) / self.h).round() as i64;
        }
        m
    }

    /// Number of cells between node `idx` and the nearest box face.
    pub fn cells_from_faces(&self, idx: usize) -> usize {
        let m = self.multi_index(idx);
        (0..self.dim())
            .map(|a| (m[a] as usize).min(self.counts[a] - 1 - m[a] as usize))
            .min()
            .unwrap_or(0)
    }

    /// Partition nodes into strict interior of `domain` and the rest.
    pub fn classify(&self, domain: &DomainSpec) -> Result<NodePartition> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: domain.dim() });
        }
        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for i in 0..self.len() {
            if domain.contains(&self.point(i)) {
                interior.push(i);
            } else {
                exterior.push(i);
            }
        }
        Ok(NodePartition { interior, exterior })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePartition {
    pub interior: Vec<usize>,
    pub exterior: Vec<usize>,
}

/// How a grid function continues outside the bounding box of its grid.
#[derive(Clone)]
pub enum ExteriorRule {
    Zero,
    Constant(f64),
    Truncated(Truncation),
    Callable(CallableExterior),
}

/// Exterior model for truncated epigraphs: zero outside `Ω`, `far_value` above the
/// top face, and across the lateral faces either the value of the nearest node on
/// the face (`lateral_clamp`) or `far_value`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub domain: DomainSpec,
    pub far_value: f64,
    pub lateral_clamp: bool,
}

#[derive(Clone)]
pub struct CallableExterior {
    pub tag: String,
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub far_value: Option<f64>,
    /// Average the data over the tail by quadrature instead of using `far_value`.
    pub integrate_tail: bool,
}

impl fmt::Debug for ExteriorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExteriorRule::Zero => write!(f, "Zero"),
            ExteriorRule::Constant(c) => write!(f, "Constant({c})"),
            ExteriorRule::Truncated(t) => write!(f, "Truncated({t:?})"),
            ExteriorRule::Callable(c) => {
                write!(f, "Callable({}, far = {:?})", c.tag, c.far_value)
            }
        }
    }
}

impl ExteriorRule {
    pub fn callable(
        tag: impl Into<String>,
        far_value: Option<f64>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ExteriorRule::Callable(CallableExterior {
            tag: tag.into(),
            eval: Arc::new(eval),
            far_value,
            integrate_tail: false,
        })
    }

    /// Callable data whose tail average is computed by quadrature at each node.
    pub fn callable_integrated(
        tag: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ExteriorRule::Callable(CallableExterior {
            tag: tag.into(),
            eval: Arc::new(eval),
            far_value: None,
            integrate_tail: true,
        })
    }

    /// True when out-of-box values depend on the grid values themselves.
    pub fn depends_on_values(&self) -> bool {
        matches!(self, ExteriorRule::Truncated(t) if t.lateral_clamp)
    }

    /// Far-field level used by the tail beyond the operator window, at node `x`
    /// with window radius `reach`.
    pub fn tail_value(&self, x: &[f64], reach: f64, s: f64) -> Result<f64> {
        match self {
            ExteriorRule::Zero => Ok(0.0),
            ExteriorRule::Constant(c) => Ok(*c),
            ExteriorRule::Callable(c) if c.integrate_tail => Ok(tail_average(&*c.eval, x, reach, s)),
            ExteriorRule::Callable(c) => c.far_value.ok_or_else(|| {
                Error::Precondition(format!(
                    "exterior rule '{}' has no far-field value but the operator has a tail",
                    c.tag
                ))
            }),
            ExteriorRule::Truncated(t) => {
                let depth = match t.domain.graph_height(x) {
                    Some(g) => x[x.len() - 1] - g,
                    None => 0.0,
                };
                Ok(t.far_value * upper_tail_fraction(x.len(), depth, reach, s))
            }
        }
    }
}

/// Kernel-weighted mean of `u` over `{|z| > reach}` around `x`.
///
/// With `q = (reach/|z|)^{2s}` the radial measure is uniform on `q ∈ (0, 1]`;
/// `q = p⁴` then tames data growing at infinity.
fn tail_average(u: &dyn Fn(&[f64]) -> f64, x: &[f64], reach: f64, s: f64) -> f64 {
    use std::f64::consts::PI;
    let dim = x.len();
    let (gx, gw) = crate::quadrature::gauss_legendre(48);
    let directions: Vec<(Vec<f64>, f64)> = match dim {
        1 => vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)],
        2 => {
            let n = 96;
            (0..n)
                .map(|i| {
                    let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                    (vec![a.cos(), a.sin()], 1.0 / n as f64)
                })
                .collect()
        }
        _ => {
            let (cx, cw) = crate::quadrature::gauss_legendre(24);
            let n = 48;
            let mut d = Vec::new();
            for (c, w) in cx.iter().zip(&cw) {
                let r = (1.0 - c * c).sqrt();
                for i in 0..n {
                    let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                    d.push((vec![r * a.cos(), r * a.sin(), *c], 0.5 * w / n as f64));
                }
            }
            d
        }
    };
    let mut acc = 0.0;
    let mut y = vec![0.0; dim];
    for (t, w) in gx.iter().zip(&gw) {
        let p = 0.5 * (t + 1.0);
        let radius = reach * p.powf(-2.0 / s);
        let jac = 0.5 * w * 4.0 * p * p * p;
        for (dir, dw) in &directions {
            for a in 0..dim {
                y[a] = x[a] + radius * dir[a];
            }
            acc += jac * dw * u(&y);
        }
    }
    acc
}

/// Fraction of the kernel mass `∫_{|z|>reach} |z|^{-N-2s}` carried by points
/// `z` with `z_N > -depth`, i.e. above a horizontal boundary `depth` below.
pub fn upper_tail_fraction(dim: usize, depth: f64, reach: f64, s: f64) -> f64 {
    if depth > 0.0 {
        1.0 - lower_fraction_below(dim, depth, reach, s)
    } else if depth < 0.0 {
        lower_fraction_below(dim, -depth, reach, s)
    } else {
        0.5
    }
}

/// Kernel-mass fraction of the tail with `z_N < -depth` (`depth > 0`).
fn lower_fraction_below(dim: usize, depth: f64, reach: f64, s: f64) -> f64 {
    let two_s = 2.0 * s;
    // Along a direction with downward component c, the tail part below the plane
    // starts at radius max(reach, depth / c); its share is min(1, reach c / depth)^{2s}.
    let share = |c: f64| (reach * c / depth).min(1.0).powf(two_s);
    match dim {
        1 => 0.5 * share(1.0),
        2 => {
            let n = 256;
            let mut acc = 0.0;
            for i in 0..n {
                let psi = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                acc += share(psi.sin());
            }
            acc / n as f64 * 0.5
        }
        _ => {
            let a = (depth / reach).min(1.0);
            let full = 1.0 - a;
            0.5 * ((reach / depth).powf(two_s) * a.powf(two_s + 1.0) / (two_s + 1.0) + full)
        }
    }
}

/// Samples on a grid plus the rule for points beyond the box.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub exterior: ExteriorRule,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>, exterior: ExteriorRule) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, exterior })
    }

    pub fn zeros(grid: &UniformGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], exterior: ExteriorRule::Zero }
    }

    pub fn from_fn(grid: &UniformGrid, exterior: ExteriorRule, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid: grid.clone(), values, exterior }
    }

    /// Value at an integer lattice position, in or out of the box.
    pub fn lattice_value(&self, m: &[i64]) -> f64 {
        if let Some(i) = self.grid.index_of(m) {
            return self.values[i];
        }
        match &self.exterior {
            ExteriorRule::Zero => 0.0,
            ExteriorRule::Constant(c) => *c,
            ExteriorRule::Callable(c) => (c.eval)(&self.grid.lattice_point(m)),
            ExteriorRule::Truncated(t) => {
                let x = self.grid.lattice_point(m);
                if !t.domain.contains(&x) {
                    return 0.0;
                }
                let dim = self.grid.dim();
                let top = self.grid.counts[dim - 1] as i64 - 1;
                if m[dim - 1] > top || !t.lateral_clamp {
                    return t.far_value;
                }
                let mut c = [0i64; 3];
                for a in 0..dim {
                    c[a] = m[a].clamp(0, self.grid.counts[a] as i64 - 1);
                }
                self.values[self.grid.index_of(&c[..dim]).expect("clamped index")]
            }
        }
    }

    /// Multilinear interpolation; points outside the box use the exterior rule at
    /// the surrounding lattice positions.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let h = self.grid.h;
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..dim {
            let t = (x[a] - self.grid.origin[a]) / h;
            let f = t.floor();
            base[a] = f as i64;
            frac[a] = t - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut m = [0i64; 3];
            for a in 0..dim {
                let bit = (corner >> a) & 1;
                m[a] = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.lattice_value(&m[..dim]);
            }
        }
        acc
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PhiSpec;

    #[test]
    fn boundary_nodes_are_exterior() {
        let g = UniformGrid::new(vec![-1.0], 1.0, vec![3]).unwrap();
        let p = g.classify(&DomainSpec::half_space(1, 0.0).unwrap()).unwrap();
        assert_eq!(p.interior, vec![2]);
        assert_eq!(p.exterior, vec![0, 1]);
    }

    #[test]
    fn classify_rejects_dimension_mismatch() {
        let g = UniformGrid::new(vec![-1.0], 1.0, vec![3]).unwrap();
        assert!(g.classify(&DomainSpec::half_space(2, 0.0).unwrap()).is_err());
    }

    #[test]
    fn epigraph_classification_is_upward_closed() {
        let g = UniformGrid::from_box(&[-2.0, -1.0], &[2.0, 3.0], 0.125).unwrap();
        for phi in [PhiSpec::Corner(1.0), PhiSpec::Cosine { amplitude: 0.5, omega: 3.0 }] {
            let d = DomainSpec::epigraph(2, phi).unwrap();
            let part = g.classify(&d).unwrap();
            let mut inside = vec![false; g.len()];
            for &i in &part.interior {
                inside[i] = true;
            }
            assert_eq!(part.interior.len() + part.exterior.len(), g.len());
            for &i in &part.interior {
                let m = g.multi_index(i);
                for k in m[1]..g.counts()[1] as i64 {
                    assert!(inside[g.index_of(&[m[0], k]).unwrap()]);
                }
            }
        }
    }

    #[test]
    fn index_roundtrip_and_caps() {
        let g = UniformGrid::new(vec![0.0, 0.0, 0.0], 0.5, vec![3, 4, 5]).unwrap();
        for i in 0..g.len() {
            let m = g.multi_index(i);
            assert_eq!(g.index_of(&m[..3]), Some(i));
        }
        assert!(UniformGrid::new(vec![0.0; 3], 0.1, vec![1000, 1000, 1000]).is_err());
    }

    #[test]
    fn truncated_exterior_rule() {
        let g = UniformGrid::from_box(&[-1.0, 0.0], &[1.0, 2.0], 0.5).unwrap();
        let d = DomainSpec::half_space(2, 0.0).unwrap();
        let rule = ExteriorRule::Truncated(Truncation { domain: d, far_value: 1.0, lateral_clamp: true });
        let u = GridFunction::from_fn(&g, rule, |x| x[1] * 0.25);
        assert_eq!(u.lattice_value(&[-3, 2]), 0.25);
        assert_eq!(u.lattice_value(&[7, 3]), 0.375);
        assert_eq!(u.lattice_value(&[0, 9]), 1.0);
        assert_eq!(u.lattice_value(&[-3, -1]), 0.0);
    }

    #[test]
    fn upper_tail_fraction_limits() {
        for dim in 1..=3 {
            // Boundary far below the window: the whole tail is above it.
            assert!((upper_tail_fraction(dim, 1e9, 1.0, 0.5) - 1.0).abs() < 1e-6);
            // Boundary within the window: the upper half plus part of the lower one.
            let near = upper_tail_fraction(dim, 0.5, 1.0, 0.5);
            if dim == 1 {
                assert!((near - 0.5).abs() < 1e-12);
            } else {
                assert!(near > 0.5 && near < 1.0);
            }
            let f = upper_tail_fraction(dim, 3.0, 1.0, 0.5);
            assert!(f > 0.5 && f < 1.0);
        }
        // 1-D closed form: 1/2 + (1 - (R/d)^{2s})/2.
        let f = upper_tail_fraction(1, 4.0, 1.0, 0.5);
        assert!((f - (0.5 + 0.5 * (1.0 - 0.25))).abs() < 1e-14);
    }

    #[test]
    fn interpolation_is_exact_on_bilinear() {
        let g = UniformGrid::from_box(&[0.0, 0.0], &[1.0, 1.0], 0.125).unwrap();
        let u = GridFunction::from_fn(&g, ExteriorRule::Zero, |x| 1.0 + 2.0 * x[0] - x[1] + x[0] * x[1]);
        let v = u.interpolate(&[0.3, 0.71]);
        assert!((v - (1.0 + 0.6 - 0.71 + 0.3 * 0.71)).abs() < 1e-13);
    }
}
