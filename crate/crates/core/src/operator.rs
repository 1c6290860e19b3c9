//! Discrete fractional Laplacian on uniform grids.
//!
//! For a node `x_i` the operator is
//!
//! ```text
//! (A u)(x_i) = Σ_k w(k) (u(x_i) - u(x_i + h k)) + τ_W (u(x_i) - ū_tail(x_i))
//! ```
//!
//! where `w(k)` is the integral of `c_{N,s} |z|^{-N-2s}` over the cell of offset `k`
//! clipped to the window ball `|z| < W h`, corrected on the nearest neighbours so
//! that the stencil reproduces the windowed integral exactly on quadratics, and
//! `τ_W` is the kernel mass outside the window.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::fft::{smooth_size, Convolver};
use crate::grid::{ExteriorRule, GridFunction, UniformGrid};
use crate::quadrature::gauss_legendre;
use rayon::prelude::*;
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// `c_{N,s} = s 4^s Γ(N/2 + s) / (π^{N/2} Γ(1 - s))`.
pub fn normalization_constant(dim: usize, s: f64) -> Result<f64> {
    check_s(s)?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let n = dim as f64;
    Ok(s * 4f64.powf(s) * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s)))
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")))
    }
}

/// Surface measure of the unit sphere in `ℝ^N`.
pub fn sphere_measure(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(n / 2.0) / gamma(n / 2.0)
}

/// `c_{N,s} ∫_{|z| > W h} |z|^{-N-2s} dz = c_{N,s} σ_{N-1} (W h)^{-2s} / (2s)`.
pub fn truncation_tail(h: f64, window: usize, s: f64, dim: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least one node".into()));
    }
    let c = normalization_constant(dim, s)?;
    Ok(c * sphere_measure(dim) * (window as f64 * h).powf(-2.0 * s) / (2.0 * s))
}

/// Kernel integrals for unit spacing and unit constant, shared between operators
/// with the same `(N, s, W)`.
#[derive(Debug)]
pub struct UnitStencil {
    pub dim: usize,
    pub window: usize,
    pub s: f64,
    /// Offsets in lexicographic order, excluding zero.
    pub offsets: Vec<[i64; 3]>,
    pub weights: Vec<f64>,
    /// Weight added to each `±e_i` to match the windowed second moment.
    pub correction: f64,
}

type StencilKey = (usize, u64, usize);

fn stencil_cache() -> &'static Mutex<HashMap<StencilKey, Arc<UnitStencil>>> {
    static CACHE: OnceLock<Mutex<HashMap<StencilKey, Arc<UnitStencil>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached unit stencil for `(dim, s, window)`.
pub fn unit_stencil(dim: usize, s: f64, window: usize) -> Arc<UnitStencil> {
    let key = (dim, s.to_bits(), window);
    if let Some(st) = stencil_cache().lock().expect("stencil cache").get(&key) {
        return st.clone();
    }
    let st = Arc::new(build_unit_stencil(dim, s, window));
    stencil_cache().lock().expect("stencil cache").insert(key, st.clone());
    st
}

fn build_unit_stencil(dim: usize, s: f64, window: usize) -> UnitStencil {
    let w = window as i64;
    let wf = window as f64;
    let two_s = 2.0 * s;
    // Integrals over canonical cells (non-negative, non-increasing coordinates).
    let mut canonical: HashMap<[i64; 3], f64> = HashMap::new();
    let span = match dim {
        1 => (-w..=w).map(|i| [i, 0, 0]).collect::<Vec<_>>(),
        2 => (-w..=w).flat_map(|i| (-w..=w).map(move |j| [i, j, 0])).collect(),
        _ => (-w..=w)
            .flat_map(|i| (-w..=w).flat_map(move |j| (-w..=w).map(move |k| [i, j, k])))
            .collect(),
    };
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for k in span {
        if k == [0, 0, 0] {
            continue;
        }
        let mut key = [k[0].abs(), k[1].abs(), k[2].abs()];
        key[..dim].sort_unstable_by(|a, b| b.cmp(a));
        let val = *canonical.entry(key).or_insert_with(|| match dim {
            1 => {
                let a = key[0] as f64 - 0.5;
                let b = (key[0] as f64 + 0.5).min(wf);
                if a >= wf {
                    0.0
                } else {
                    (a.powf(-two_s) - b.powf(-two_s)) / two_s
                }
            }
            _ => cell_integral(&key[..dim], wf, s),
        });
        if val > 0.0 {
            offsets.push(k);
            weights.push(val);
        }
    }
    let second_moment: f64 = offsets.iter().zip(&weights).map(|(k, w)| w * (k[0] * k[0]) as f64).sum();
    let exact = sphere_measure(dim) * wf.powf(2.0 - two_s) / (dim as f64 * (2.0 - two_s));
    let correction = 0.5 * (exact - second_moment);
    for (k, wt) in offsets.iter().zip(weights.iter_mut()) {
        let l1: i64 = k.iter().map(|c| c.abs()).sum();
        if l1 == 1 {
            *wt += correction;
        }
    }
    UnitStencil { dim, window, s, offsets, weights, correction }
}

/// `∫ |z|^{-N-2s}` over the unit cell centred at `k`, clipped to `|z| < radius`.
fn cell_integral(k: &[i64], radius: f64, s: f64) -> f64 {
    let dim = k.len();
    let expo = -(dim as f64 + 2.0 * s) / 2.0;
    let mut dmin2 = 0.0;
    let mut dmax2 = 0.0;
    for &c in k {
        let c = c.abs() as f64;
        dmin2 += (c - 0.5).max(0.0).powi(2);
        dmax2 += (c + 0.5).powi(2);
    }
    if dmin2 >= radius * radius {
        return 0.0;
    }
    let kmax = k.iter().map(|c| c.abs()).max().unwrap_or(0);
    let (sub, order, clip) = if dmax2 > radius * radius {
        (16, 2, true)
    } else if kmax <= 2 {
        (4, 10, false)
    } else if kmax <= 8 {
        (1, 6, false)
    } else {
        (1, 3, false)
    };
    let (gx, gw) = gauss_legendre(order);
    let sub_h = 1.0 / sub as f64;
    let pts_per_axis = sub * order;
    let total = pts_per_axis.pow(dim as u32);
    let mut acc = 0.0;
    let mut z = [0.0f64; 3];
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for a in 0..dim {
            let i = rem % pts_per_axis;
            rem /= pts_per_axis;
            let cell = i / order;
            let q = i % order;
            let lo = k[a] as f64 - 0.5 + cell as f64 * sub_h;
            z[a] = lo + 0.5 * sub_h * (gx[q] + 1.0);
            weight *= 0.5 * sub_h * gw[q];
        }
        let r2: f64 = z[..dim].iter().map(|v| v * v).sum();
        if clip && r2 >= radius * radius {
            continue;
        }
        acc += weight * r2.powf(expo);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyMode {
    /// Direct sums for small problems, FFT otherwise.
    Auto,
    Direct,
    Fft,
}

/// Assembled operator on the interior nodes of a grid.
pub struct DiscreteOperator {
    grid: UniformGrid,
    domain: DomainSpec,
    s: f64,
    constant: f64,
    scale: f64,
    stencil: Arc<UnitStencil>,
    tail: f64,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    mode: ApplyMode,
    convolver: OnceLock<Convolver>,
}

impl std::fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("dim", &self.grid.dim())
            .field("h", &self.grid.h())
            .field("s", &self.s)
            .field("window", &self.stencil.window)
            .field("interior", &self.interior.len())
            .finish()
    }
}

impl DiscreteOperator {
    pub fn assemble(grid: &UniformGrid, domain: &DomainSpec, s: f64, window: usize) -> Result<Self> {
        check_s(s)?;
        if window < 2 {
            return Err(Error::InvalidParameter("window must be at least 2 nodes".into()));
        }
        let longest = grid.counts().iter().max().copied().unwrap_or(0) - 1;
        if window > longest {
            return Err(Error::InvalidParameter(format!(
                "window of {window} nodes exceeds the grid extent of {longest} cells"
            )));
        }
        let part = grid.classify(domain)?;
        if part.interior.is_empty() {
            return Err(Error::InvalidParameter("domain has no interior grid nodes".into()));
        }
        let dim = grid.dim();
        let constant = normalization_constant(dim, s)?;
        let h = grid.h();
        let scale = constant * h.powf(-2.0 * s);
        let stencil = unit_stencil(dim, s, window);
        if stencil.weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stencil for s = {s} and window {window} has non-positive weights"
            )));
        }
        let tail = truncation_tail(h, window, s, dim)?;
        let mut slot = vec![None; grid.len()];
        for (p, &i) in part.interior.iter().enumerate() {
            slot[i] = Some(p);
        }
        Ok(Self {
            grid: grid.clone(),
            domain: domain.clone(),
            s,
            constant,
            scale,
            stencil,
            tail,
            interior: part.interior,
            slot,
            mode: ApplyMode::Auto,
            convolver: OnceLock::new(),
        })
    }

    pub fn with_mode(mut self, mode: ApplyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn window(&self) -> usize {
        self.stencil.window
    }

    /// Radius `W h` of the window.
    pub fn reach(&self) -> f64 {
        self.stencil.window as f64 * self.grid.h()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of grid node `idx` in the interior ordering.
    pub fn slot(&self, idx: usize) -> Option<usize> {
        self.slot[idx]
    }

    pub fn stencil(&self) -> &UnitStencil {
        &self.stencil
    }

    /// `(offset, weight)` pairs of the scaled stencil in summation order.
    pub fn stencil_rows(&self) -> Vec<([i64; 3], f64)> {
        self.stencil
            .offsets
            .iter()
            .zip(&self.stencil.weights)
            .map(|(k, w)| (*k, w * self.scale))
            .collect()
    }

    /// Sum of off-diagonal weights.
    pub fn weight_sum(&self) -> f64 {
        self.stencil.weights.iter().sum::<f64>() * self.scale
    }

    /// Diagonal coefficient `Σ_k w(k) + τ_W`.
    pub fn diagonal(&self) -> f64 {
        self.weight_sum() + self.tail
    }

    fn check_grid(&self, u: &GridFunction) -> Result<()> {
        if u.grid != self.grid {
            return Err(Error::InvalidParameter("grid function lives on a different grid".into()));
        }
        Ok(())
    }

    fn use_fft(&self) -> bool {
        match self.mode {
            ApplyMode::Direct => false,
            ApplyMode::Fft => true,
            ApplyMode::Auto => {
                (self.interior.len() as f64) * (self.stencil.offsets.len() as f64) > 2.0e7
            }
        }
    }

    fn padded_counts(&self) -> Vec<usize> {
        let w = self.stencil.window;
        self.grid.counts().iter().map(|c| c + 2 * w).collect()
    }

    /// Values on the box padded by `W` nodes on every side.
    fn padded(&self, value: impl Fn(&[i64]) -> f64 + Sync) -> Vec<f64> {
        let dims = self.padded_counts();
        let dim = dims.len();
        let w = self.stencil.window as i64;
        let total: usize = dims.iter().product();
        (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut rem = flat;
                let mut m = [0i64; 3];
                for a in (0..dim).rev() {
                    m[a] = (rem % dims[a]) as i64 - w;
                    rem /= dims[a];
                }
                value(&m[..dim])
            })
            .collect()
    }

    /// `Σ_k w(k) P(m_i + k)` for every interior node, from padded data `P`.
    fn neighbour_sums(&self, padded: &[f64]) -> Vec<f64> {
        let dims = self.padded_counts();
        let dim = dims.len();
        let w = self.stencil.window as i64;
        let mut pstrides = vec![1usize; dim];
        for a in (0..dim - 1).rev() {
            pstrides[a] = pstrides[a + 1] * dims[a + 1];
        }
        let pidx = |m: &[i64]| -> usize {
            (0..dim).map(|a| (m[a] + w) as usize * pstrides[a]).sum()
        };
        if self.use_fft() {
            let conv = self.convolver.get_or_init(|| {
                let sizes: Vec<usize> = dims.iter().map(|&n| smooth_size(n)).collect();
                let taps: Vec<([i64; 3], f64)> = self.stencil_rows();
                Convolver::new(sizes, &taps)
            });
            let sizes = conv.sizes().to_vec();
            let mut fstrides = vec![1usize; dim];
            for a in (0..dim - 1).rev() {
                fstrides[a] = fstrides[a + 1] * sizes[a + 1];
            }
            let mut data = vec![0.0; sizes.iter().product()];
            let total: usize = dims.iter().product();
            for flat in 0..total {
                let mut rem = flat;
                let mut idx = 0;
                for a in (0..dim).rev() {
                    idx += (rem % dims[a]) * fstrides[a];
                    rem /= dims[a];
                }
                data[idx] = padded[flat];
            }
            let out = conv.convolve(&data);
            self.interior
                .iter()
                .map(|&i| {
                    let m = self.grid.multi_index(i);
                    let idx: usize = (0..dim).map(|a| (m[a] + w) as usize * fstrides[a]).sum();
                    out[idx]
                })
                .collect()
        } else {
            let rel: Vec<isize> = self
                .stencil
                .offsets
                .iter()
                .map(|k| (0..dim).map(|a| k[a] as isize * pstrides[a] as isize).sum())
                .collect();
            let weights = &self.stencil.weights;
            let scale = self.scale;
            self.interior
                .par_iter()
                .map(|&i| {
                    let m = self.grid.multi_index(i);
                    let base = pidx(&m[..dim]) as isize;
                    let mut acc = 0.0;
                    for (r, wt) in rel.iter().zip(weights) {
                        acc += wt * padded[(base + r) as usize];
                    }
                    acc * scale
                })
                .collect()
        }
    }

    /// Far-field tail level at each interior node.
    pub fn tail_levels(&self, rule: &ExteriorRule) -> Result<Vec<f64>> {
        let reach = self.reach();
        match rule {
            ExteriorRule::Callable(c) if c.integrate_tail => {
                return self
                    .interior
                    .par_iter()
                    .map(|&i| rule.tail_value(&self.grid.point(i), reach, self.s))
                    .collect();
            }
            ExteriorRule::Truncated(_) => {}
            _ => {
                let x = self.grid.point(self.interior[0]);
                return Ok(vec![rule.tail_value(&x, reach, self.s)?; self.interior.len()]);
            }
        }
        let ExteriorRule::Truncated(t) = rule else { unreachable!() };
        // The truncated tail depends on the node only through its depth.
        let mut memo: HashMap<u64, f64> = HashMap::new();
        let mut out = Vec::with_capacity(self.interior.len());
        for &i in &self.interior {
            let x = self.grid.point(i);
            let key = t.domain.graph_height(&x).map(|g| (x[x.len() - 1] - g).to_bits()).unwrap_or(0);
            let v = match memo.get(&key) {
                Some(v) => *v,
                None => {
                    let v = rule.tail_value(&x, reach, self.s)?;
                    memo.insert(key, v);
                    v
                }
            };
            out.push(v);
        }
        Ok(out)
    }

    /// `(A u)` at every interior node, in interior order.
    pub fn apply(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.check_grid(u)?;
        let tails = self.tail_levels(&u.exterior)?;
        let padded = self.padded(|m| u.lattice_value(m));
        let sums = self.neighbour_sums(&padded);
        let wsum = self.weight_sum();
        Ok(self
            .interior
            .iter()
            .enumerate()
            .map(|(p, &i)| {
                let u0 = u.values[i];
                wsum * u0 - sums[p] + self.tail * (u0 - tails[p])
            })
            .collect())
    }

    /// `(A u)(x_i)` at a single node by direct summation.
    pub fn apply_at(&self, u: &GridFunction, node: usize) -> Result<f64> {
        self.check_grid(u)?;
        let dim = self.grid.dim();
        let m = self.grid.multi_index(node);
        let u0 = u.values[node];
        let mut acc = 0.0;
        let mut q = [0i64; 3];
        for (k, wt) in self.stencil.offsets.iter().zip(&self.stencil.weights) {
            for a in 0..dim {
                q[a] = m[a] + k[a];
            }
            acc += wt * (u0 - u.lattice_value(&q[..dim]));
        }
        let x = self.grid.point(node);
        let tail = u.exterior.tail_value(&x, self.reach(), self.s)?;
        Ok(acc * self.scale + self.tail * (u0 - tail))
    }

    /// Interior block: `A` applied to interior values with zero exterior data.
    pub fn apply_interior(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.interior.len());
        let padded = self.padded(|m| match self.grid.index_of(m).and_then(|i| self.slot[i]) {
            Some(p) => v[p],
            None => 0.0,
        });
        let sums = self.neighbour_sums(&padded);
        let d = self.diagonal();
        v.iter().zip(&sums).map(|(x, s)| d * x - s).collect()
    }

    /// Contribution of exterior data: `A u = A_int u_int - b_ext(u)`.
    pub fn exterior_load(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.check_grid(u)?;
        let tails = self.tail_levels(&u.exterior)?;
        let padded = self.padded(|m| match self.grid.index_of(m) {
            Some(i) if self.slot[i].is_some() => 0.0,
            _ => u.lattice_value(m),
        });
        let sums = self.neighbour_sums(&padded);
        Ok(sums.iter().zip(&tails).map(|(s, t)| s + self.tail * t).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::quadrature::integrate;

    #[test]
    fn constant_examples() {
        let c = normalization_constant(1, 0.5).unwrap();
        assert!((c - 1.0 / PI).abs() < 1e-15);
        assert!(normalization_constant(1, 1.3).is_err());
        assert!(normalization_constant(2, 0.0).is_err());
        for n in 1..=4 {
            for i in 1..=5 {
                let s = i as f64 / 6.0;
                assert!(normalization_constant(n, s).unwrap() > 0.0);
            }
        }
        // Fourier side: (1/2π) ∫ |ξ| √π e^{-ξ²/4} dξ = 2/√π for e^{-x²} at 0.
        let v = 2.0 * c * integrate(|y| (1.0 - (-y * y).exp()) / (y * y), 0.0, 60.0, 1e-13)
            + 2.0 * c / 60.0;
        assert!((v - 2.0 / PI.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn tail_examples() {
        let t = truncation_tail(1.0, 1, 0.5, 1).unwrap();
        assert!((t - 2.0 / PI).abs() < 1e-15);
        for s in [0.2, 0.5, 0.8] {
            let a = truncation_tail(0.01, 10, s, 2).unwrap();
            let b = truncation_tail(0.01, 20, s, 2).unwrap();
            assert!((b / a - 2f64.powf(-2.0 * s)).abs() < 1e-13);
        }
    }

    #[test]
    fn stencil_is_symmetric_and_positive() {
        for dim in 1..=3 {
            for s in [0.2, 0.5, 0.8] {
                let w = if dim == 3 { 6 } else { 12 };
                let st = unit_stencil(dim, s, w);
                let map: HashMap<[i64; 3], f64> =
                    st.offsets.iter().copied().zip(st.weights.iter().copied()).collect();
                for (k, wt) in &map {
                    assert!(*wt > 0.0);
                    assert_eq!(map[&[-k[0], -k[1], -k[2]]], *wt);
                }
            }
        }
    }

    #[test]
    fn unit_cell_integrals_match_radial_mass() {
        // All cells plus the central cube cover the window ball; compare the
        // mass outside the central cube in 2-D against a polar quadrature.
        let s = 0.5;
        let w = 20usize;
        let st = build_unit_stencil(2, s, w);
        let mass: f64 = st.weights.iter().sum::<f64>() - 4.0 * st.correction;
        let two_s = 2.0 * s;
        // ∫_{|z|<W, z ∉ [-½,½]²} |z|^{-2-2s}: polar form over the square's radial extent.
        let inner = 8.0 * integrate(|psi: f64| (0.5 / psi.cos()).powf(-two_s), 0.0, PI / 4.0, 1e-13) / two_s;
        let outer = 2.0 * PI * (w as f64).powf(-two_s) / two_s;
        let exact = inner - outer;
        assert!((mass - exact).abs() < 1e-6 * exact, "{mass} vs {exact}");
    }

    fn line_op(s: f64, h: f64, w: usize) -> (UniformGrid, DiscreteOperator) {
        let g = UniformGrid::from_box(&[-2.0], &[2.0], h).unwrap();
        let d = DomainSpec::ball(vec![0.0], 1.0).unwrap();
        let op = DiscreteOperator::assemble(&g, &d, s, w).unwrap();
        (g, op)
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let (g, op) = line_op(0.5, 1.0 / 64.0, 128);
        let u = GridFunction::from_fn(&g, ExteriorRule::Constant(5.0), |_| 5.0);
        for v in op.apply(&u).unwrap() {
            assert!(v.abs() < 1e-11, "{v}");
        }
        let g2 = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 16.0).unwrap();
        let d2 = DomainSpec::ball(vec![0.0, 0.0], 0.8).unwrap();
        let op2 = DiscreteOperator::assemble(&g2, &d2, 0.3, 16).unwrap();
        let u2 = GridFunction::from_fn(&g2, ExteriorRule::Constant(5.0), |_| 5.0);
        for v in op2.apply(&u2).unwrap() {
            assert!(v.abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn quadratics_reproduce_the_windowed_integral() {
        for (dim, s, w) in [(1usize, 0.5, 20usize), (2, 0.3, 10), (2, 0.7, 10), (3, 0.5, 5)] {
            let st = unit_stencil(dim, s, w);
            // q(z) = z_1² + 2 z_1 z_2 - z_N² + z_1 -> Δq = 0 if dim > 1, else 2.
            let q = |z: &[f64]| -> f64 {
                let mut v = z[0] * z[0] + z[0];
                if dim > 1 {
                    v += 2.0 * z[0] * z[1] - z[dim - 1] * z[dim - 1];
                }
                v
            };
            let mut acc = 0.0;
            for (k, wt) in st.offsets.iter().zip(&st.weights) {
                let z: Vec<f64> = k[..dim].iter().map(|&c| c as f64).collect();
                acc += wt * (0.0 - q(&z));
            }
            let lap = if dim == 1 { 2.0 } else { 0.0 };
            let moment = sphere_measure(dim) * (w as f64).powf(2.0 - 2.0 * s) / (dim as f64 * (2.0 - 2.0 * s));
            let exact = -0.5 * lap * moment;
            assert!((acc - exact).abs() < 1e-9 * (1.0 + moment), "{dim} {s}: {acc} vs {exact}");
        }
    }

    #[test]
    fn direct_and_fft_paths_agree() {
        let g = UniformGrid::from_box(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 16.0).unwrap();
        let d = DomainSpec::epigraph(2, crate::domain::PhiSpec::Corner(0.5)).unwrap();
        let mk = |mode| DiscreteOperator::assemble(&g, &d, 0.4, 12).unwrap().with_mode(mode);
        let (a, b) = (mk(ApplyMode::Direct), mk(ApplyMode::Fft));
        let u = GridFunction::from_fn(&g, ExteriorRule::callable("wave", Some(0.3), |x| (x[0] * 3.0).sin() + x[1]), |x| {
            (x[0] * 2.0).cos() * x[1]
        });
        let (ra, rb) = (a.apply(&u).unwrap(), b.apply(&u).unwrap());
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{x} {y}");
        }
        let v: Vec<f64> = (0..a.interior().len()).map(|i| ((i * 7919) % 13) as f64).collect();
        let (ia, ib) = (a.apply_interior(&v), b.apply_interior(&v));
        for (x, y) in ia.iter().zip(&ib) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        let node = a.interior()[a.interior().len() / 2];
        let single = a.apply_at(&u, node).unwrap();
        assert!((single - ra[a.interior().len() / 2]).abs() < 1e-10);
    }

    #[test]
    fn split_into_interior_block_and_exterior_load() {
        let (g, op) = line_op(0.5, 1.0 / 32.0, 64);
        let u = GridFunction::from_fn(&g, ExteriorRule::Constant(0.7), |x| (1.0 - x[0] * x[0]).max(0.0) + 0.2 * x[0]);
        let full = op.apply(&u).unwrap();
        let vint: Vec<f64> = op.interior().iter().map(|&i| u.values[i]).collect();
        let aint = op.apply_interior(&vint);
        let load = op.exterior_load(&u).unwrap();
        for p in 0..full.len() {
            assert!((full[p] - (aint[p] - load[p])).abs() < 1e-10);
        }
    }

    #[test]
    fn half_line_power_is_s_harmonic() {
        let h = 1.0 / 256.0;
        let g = UniformGrid::from_box(&[-2.0], &[2.0], h).unwrap();
        let d = DomainSpec::half_space(1, 0.0).unwrap();
        let op = DiscreteOperator::assemble(&g, &d, 0.5, 1024).unwrap();
        let ext = ExteriorRule::callable_integrated("sqrt", |x| x[0].max(0.0).sqrt());
        let u = GridFunction::from_fn(&g, ext, |x| x[0].max(0.0).sqrt());
        let out = op.apply(&u).unwrap();
        for (p, &i) in op.interior().iter().enumerate() {
            let x = g.point(i)[0];
            if (0.25..=0.75).contains(&x) {
                assert!(out[p].abs() < 0.02, "{x}: {}", out[p]);
            }
        }
    }

    #[test]
    fn parabola_tends_to_minus_second_derivative() {
        // Windowed part only: the full integral of x² diverges.
        let mut vals = Vec::new();
        for s in [0.9, 0.95, 0.99] {
            let st = unit_stencil(1, s, 64);
            let c = normalization_constant(1, s).unwrap();
            let h: f64 = 1.0 / 64.0;
            let acc: f64 = st.offsets.iter().zip(&st.weights).map(|(k, w)| -w * (k[0] as f64 * h).powi(2)).sum();
            vals.push(c * h.powf(-2.0 * s) * acc);
        }
        assert!((vals[2] + 2.0).abs() < 0.05, "{vals:?}");
        assert!((vals[2] + 2.0).abs() < (vals[0] + 2.0).abs());
    }

    #[test]
    fn callable_without_far_value_is_rejected() {
        let (g, op) = line_op(0.5, 1.0 / 16.0, 16);
        let u = GridFunction::from_fn(&g, ExteriorRule::callable("open", None, |_| 0.0), |_| 0.0);
        assert!(op.apply(&u).is_err());
    }

    #[test]
    fn assembly_errors() {
        let g = UniformGrid::from_box(&[-1.0], &[1.0], 0.25).unwrap();
        let d = DomainSpec::ball(vec![0.0], 0.5).unwrap();
        assert!(DiscreteOperator::assemble(&g, &d, 1.0, 4).is_err());
        assert!(DiscreteOperator::assemble(&g, &d, 0.5, 1).is_err());
        assert!(DiscreteOperator::assemble(&g, &d, 0.5, 9).is_err());
        let far = DomainSpec::ball(vec![10.0], 0.5).unwrap();
        assert!(DiscreteOperator::assemble(&g, &far, 0.5, 4).is_err());
    }
}
