//! Bistable nonlinearities and their structural assumptions.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Structural assumption on `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// `f > 0` on `(0, μ)` and `f ≤ 0` on `[μ, ∞)`.
    SignChange,
    /// `f(t) ≥ δ₀ t` on `[0, t₀]`.
    LinearGrowth,
    /// `f` non-increasing on `(t₁, μ)`.
    DecreasingNearMu,
    /// Declared Lipschitz constant below the sampled slope.
    Lipschitz,
    /// Parameters out of order (`0 < t₀ < t₁ < μ`, `δ₀ > 0`, `L ≥ 0`).
    Parameters,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::SignChange => "(f1) sign change at mu",
            Assumption::LinearGrowth => "(f2) f(t) >= delta0 t near 0",
            Assumption::DecreasingNearMu => "(f3) f non-increasing on (t1, mu)",
            Assumption::Lipschitz => "declared Lipschitz constant",
            Assumption::Parameters => "parameter ordering",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub t: f64,
}

#[derive(Clone)]
pub struct NonlinearitySpec {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub mu: f64,
    pub t0: f64,
    pub delta0: f64,
    pub t1: f64,
    pub lipschitz: f64,
    pub name: String,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("t0", &self.t0)
            .field("delta0", &self.delta0)
            .field("t1", &self.t1)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Outcome of [`NonlinearitySpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub samples: usize,
    /// Largest finite-difference slope on `[0, μ]`.
    pub lipschitz_estimate: f64,
    /// Largest finite-difference slope on `[0, 2μ]`, for reference.
    pub lipschitz_estimate_wide: f64,
}

impl NonlinearitySpec {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mu: f64,
        t0: f64,
        delta0: f64,
        t1: f64,
        lipschitz: f64,
    ) -> Self {
        Self { f: Arc::new(f), mu, t0, delta0, t1, lipschitz, name: name.into() }
    }

    /// `f(t) = t - t³` with `μ = 1`.
    pub fn allen_cahn() -> Self {
        Self::new("allen-cahn", |t| t - t * t * t, 1.0, 0.5, 0.5, 1.0 / 3f64.sqrt(), 2.0)
    }

    /// `f(t) = t (1 - t)` with `μ = 1` and the given `t₁`.
    pub fn logistic(t1: f64) -> Self {
        Self::new("logistic", |t| t * (1.0 - t), 1.0, 0.25, 0.5, t1, 1.0)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, 1.0, 0.5, 0.5, 0.7, 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Samples `[0, 2μ]` on `samples + 1` points and checks (f1)-(f3) and the
    /// declared Lipschitz constant; the constant is compared against slopes on
    /// `[0, μ]`, the range visited by the monotone iteration.
    pub fn validate(&self, samples: usize) -> Result<Validation> {
        if samples < 1000 {
            return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {samples}")));
        }
        let mut bad = Vec::new();
        let ordered = self.mu > 0.0
            && self.t0 > 0.0
            && self.t0 < self.mu
            && self.t1 > self.t0
            && self.t1 < self.mu
            && self.delta0 > 0.0
            && self.lipschitz >= 0.0;
        if !ordered {
            bad.push(Violation { assumption: Assumption::Parameters, t: f64::NAN });
            return Err(Error::Hypothesis(bad));
        }
        let ts: Vec<f64> = (0..=samples).map(|i| 2.0 * self.mu * i as f64 / samples as f64).collect();
        let fs: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        let first = |a: Assumption, t: f64, bad: &mut Vec<Violation>| {
            if !bad.iter().any(|v: &Violation| v.assumption == a) {
                bad.push(Violation { assumption: a, t });
            }
        };
        let (mut slope, mut slope_wide) = (0.0f64, 0.0f64);
        for i in 0..ts.len() {
            let (t, v) = (ts[i], fs[i]);
            if !v.is_finite() {
                first(Assumption::SignChange, t, &mut bad);
                continue;
            }
            if (t > 0.0 && t < self.mu && v <= 0.0) || (t >= self.mu && v > 0.0) {
                first(Assumption::SignChange, t, &mut bad);
            }
            if t <= self.t0 && v < self.delta0 * t {
                first(Assumption::LinearGrowth, t, &mut bad);
            }
            if i + 1 < ts.len() {
                let (tn, vn) = (ts[i + 1], fs[i + 1]);
                if t > self.t1 && tn < self.mu && vn > v {
                    first(Assumption::DecreasingNearMu, tn, &mut bad);
                }
                let sl = ((vn - v) / (tn - t)).abs();
                slope_wide = slope_wide.max(sl);
                if tn <= self.mu {
                    slope = slope.max(sl);
                }
            }
        }
        if slope > self.lipschitz * (1.0 + 1e-9) + 1e-12 {
            first(Assumption::Lipschitz, f64::NAN, &mut bad);
        }
        if bad.is_empty() {
            Ok(Validation { samples, lipschitz_estimate: slope, lipschitz_estimate_wide: slope_wide })
        } else {
            Err(Error::Hypothesis(bad))
        }
    }
}
