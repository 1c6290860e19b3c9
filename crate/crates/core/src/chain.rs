//! Harnack chains of tangent balls climbing the vertical axis of `Σ_β`.
//!
//! `Σ_β = {|x'| < tan β · x_N}`. Starting from `x₀ = (0', x_{0,N})`, the ball of
//! radius `x_{k,N} sin β` is tangent to `∂Σ_β`, and each step moves the centre up
//! by `r_k / cos β`, so radii and heights grow by the factor `1 + tan β`.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operator::DiscreteOperator;
use serde::Serialize;
use std::f64::consts::FRAC_PI_4;

/// Number of boundary samples per ball in the inclusion check.
pub const INCLUSION_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackChain {
    pub dim: usize,
    pub beta: f64,
    pub x0n: f64,
    pub h1: f64,
    pub h2: f64,
    /// `r_k = x_{0,N} sin β (1 + tan β)^k` for `k = 0..=k0`.
    pub radii: Vec<f64>,
    /// Vertical coordinates `x_{k,N} = x_{0,N} (1 + tan β)^k`.
    pub heights: Vec<f64>,
    pub k0: usize,
    /// `v(x_{k+1}) / v(x_k)`, filled in by [`verify_chain_harnack`].
    pub ratios: Vec<f64>,
}

/// Coefficients of `μ₁ - ν₁ log x ≤ k₀ ≤ μ₂ - ν₂ log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogEnvelope {
    pub mu1: f64,
    pub nu1: f64,
    pub mu2: f64,
    pub nu2: f64,
}

impl LogEnvelope {
    pub fn bounds(&self, x0n: f64) -> (f64, f64) {
        (self.mu1 - self.nu1 * x0n.ln(), self.mu2 - self.nu2 * x0n.ln())
    }
}

fn growth(beta: f64) -> f64 {
    1.0 + beta.tan()
}

/// Left side minus one of the solvability condition on `(β, h₁, h₂)`; the chain
/// exists for every start below `h₁` iff this is positive.
pub fn chain_margin(beta: f64, h1: f64, h2: f64) -> f64 {
    ((h2 / (1.0 + beta.sin())).ln() - h1.ln()) / growth(beta).ln() - 1.0
}

pub fn log_envelope(beta: f64, h1: f64, h2: f64) -> LogEnvelope {
    let lq = growth(beta).ln();
    LogEnvelope {
        mu1: h1.ln() / lq,
        nu1: 1.0 / lq,
        mu2: (h2 / (1.0 + beta.sin())).ln() / lq,
        nu2: 1.0 / lq,
    }
}

/// Chain along the `x_N` axis in dimension `dim`.
pub fn build_chain(dim: usize, x0n: f64, beta: f64, h1: f64, h2: f64) -> Result<HarnackChain> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
    }
    if !(beta > 0.0 && beta < FRAC_PI_4) {
        return Err(Error::InvalidParameter(format!("beta = {beta} not in (0, π/4)")));
    }
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::InvalidParameter(format!("heights h1 = {h1}, h2 = {h2} must be positive")));
    }
    if !(x0n > 0.0 && x0n < h1) {
        return Err(Error::InvalidParameter(format!("start height {x0n} not in (0, {h1})")));
    }
    let margin = chain_margin(beta, h1, h2);
    if !(margin > 0.0) {
        return Err(Error::Precondition(format!(
            "h2 = {h2} too small for h1 = {h1} at beta = {beta} (margin {margin:.3e})"
        )));
    }
    let q = growth(beta);
    let lift = 1.0 + beta.sin();
    let mut k = 0usize;
    let mut top = x0n;
    while top <= h1 {
        k += 1;
        top = x0n * q.powi(k as i32);
    }
    if !(lift * top < h2) {
        return Err(Error::Precondition(format!(
            "no chain index with x_N > {h1} and (1 + sin β) x_N < {h2}"
        )));
    }
    let radii = (0..=k).map(|j| x0n * beta.sin() * q.powi(j as i32)).collect();
    let heights = (0..=k).map(|j| x0n * q.powi(j as i32)).collect();
    Ok(HarnackChain { dim, beta, x0n, h1, h2, radii, heights, k0: k, ratios: Vec::new() })
}

impl HarnackChain {
    pub fn center(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        c[self.dim - 1] = self.heights[k];
        c
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Radii and heights by the step-by-step recursion.
    pub fn iterative(&self) -> (Vec<f64>, Vec<f64>) {
        let q = growth(self.beta);
        let mut r = self.x0n * self.beta.sin();
        let mut x = self.x0n;
        let mut radii = vec![r];
        let mut heights = vec![x];
        for _ in 0..self.k0 {
            x += r / self.beta.cos();
            r *= q;
            radii.push(r);
            heights.push(x);
        }
        (radii, heights)
    }

    /// `[log(h₁/x₀)/log q, log(h₂/((1+sin β) x₀))/log q]`.
    pub fn bracket(&self) -> (f64, f64) {
        let lq = growth(self.beta).ln();
        (
            (self.h1 / self.x0n).ln() / lq,
            (self.h2 / ((1.0 + self.beta.sin()) * self.x0n)).ln() / lq,
        )
    }

    pub fn envelope(&self) -> LogEnvelope {
        log_envelope(self.beta, self.h1, self.h2)
    }

    /// Largest `|x'| - tan β · x_N` over boundary samples of ball `k`, scaled by
    /// the ball height; non-positive up to rounding when the ball lies in `Σ_β`.
    pub fn inclusion_excess(&self, k: usize, samples: usize) -> f64 {
        let c = self.heights[k];
        let r = self.radii[k];
        let t = self.beta.tan();
        let excess = |lat: f64, vert: f64| lat.abs() - t * (c + vert);
        let worst = match self.dim {
            1 => excess(0.0, -r),
            2 => (0..samples)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / samples as f64;
                    excess(r * a.cos(), r * a.sin())
                })
                .fold(f64::NEG_INFINITY, f64::max),
            _ => fibonacci_sphere(samples)
                .into_iter()
                .map(|p| excess(r * p[0].hypot(p[1]), r * p[2]))
                .fold(f64::NEG_INFINITY, f64::max),
        };
        worst / c
    }

    /// Worst inclusion excess over all balls.
    pub fn max_inclusion_excess(&self) -> f64 {
        (0..self.len())
            .map(|k| self.inclusion_excess(k, INCLUSION_SAMPLES))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [rho * a.cos(), rho * a.sin(), z]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainHarnack {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Ratios of consecutive centre values of a nonnegative function along the chain.
pub fn verify_chain_harnack(v: impl Fn(&[f64]) -> f64, chain: &mut HarnackChain) -> Result<ChainHarnack> {
    let values: Vec<f64> = (0..chain.len()).map(|k| v(&chain.center(k))).collect();
    if let Some(k) = values.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Precondition(format!("value {} at chain centre {k} is not positive", values[k])));
    }
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    let max_ratio = ratios.iter().copied().fold(1.0, f64::max);
    chain.ratios = ratios.clone();
    Ok(ChainHarnack { ratios, max_ratio })
}

/// Grid version: requires `|(-Δ)^s v| ≤ tol · diag · sup|v|` at every interior
/// node inside a chain ball past the first, then interpolates centre values.
pub fn verify_chain_harnack_grid(
    v: &GridFunction,
    op: &DiscreteOperator,
    chain: &mut HarnackChain,
    tol: f64,
) -> Result<ChainHarnack> {
    if v.grid.dim() != chain.dim {
        return Err(Error::DimensionMismatch { expected: chain.dim, got: v.grid.dim() });
    }
    let scale = tol * op.diagonal() * v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in 1..chain.len() {
        let c = chain.center(k);
        let r = chain.radii[k];
        for &node in op.interior() {
            let x = v.grid.point(node);
            if crate::domain::dist(&x, &c) >= r {
                continue;
            }
            let res = op.apply_at(v, node)?;
            if res.abs() > scale {
                return Err(Error::Precondition(format!(
                    "function is not s-harmonic on chain ball {k}: residual {res:.3e} at node {node}"
                )));
            }
        }
    }
    verify_chain_harnack(|x| v.interpolate(x), chain)
}
