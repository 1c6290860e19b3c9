//! Circular convolution with a fixed symmetric kernel via FFT, for 1 to 3 axes.
//!
//! Lines along each axis are transformed independently in parallel; every line
//! is processed by the same plan in the same order, so results do not depend on
//! the number of worker threads.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Convolver {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    kernel_hat: Vec<Complex64>,
}

/// Smallest integer `≥ n` whose prime factors are all in {2, 3, 5, 7}.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl Convolver {
    /// `taps` lists `(offset, weight)` pairs; offsets are placed circularly.
    pub fn new(sizes: Vec<usize>, taps: &[([i64; 3], f64)]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let total: usize = sizes.iter().product();
        let mut kernel = vec![Complex64::new(0.0, 0.0); total];
        let strides = strides_of(&sizes);
        for (k, w) in taps {
            let mut idx = 0;
            for a in 0..sizes.len() {
                let n = sizes[a] as i64;
                idx += (k[a].rem_euclid(n)) as usize * strides[a];
            }
            kernel[idx].re += w;
        }
        let mut c = Self { sizes, forward, inverse, kernel_hat: Vec::new() };
        c.transform(&mut kernel, false);
        c.kernel_hat = kernel;
        c
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Circular convolution of `data` (length `Π sizes`) with the kernel.
    pub fn convolve(&self, data: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, false);
        buf.par_iter_mut().zip(self.kernel_hat.par_iter()).for_each(|(a, k)| *a *= k);
        self.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let strides = strides_of(&self.sizes);
        for axis in 0..self.sizes.len() {
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            let n = self.sizes[axis];
            let stride = strides[axis];
            if stride == 1 {
                buf.par_chunks_mut(n).for_each(|line| plan.process(line));
                continue;
            }
            let block = n * stride;
            let lines: Vec<Vec<Complex64>> = (0..buf.len() / n)
                .into_par_iter()
                .map(|l| {
                    let outer = l / stride;
                    let inner = l % stride;
                    let base = outer * block + inner;
                    let mut line: Vec<Complex64> = (0..n).map(|j| buf[base + j * stride]).collect();
                    plan.process(&mut line);
                    line
                })
                .collect();
            for (l, line) in lines.into_iter().enumerate() {
                let base = (l / stride) * block + l % stride;
                for (j, v) in line.into_iter().enumerate() {
                    buf[base + j * stride] = v;
                }
            }
        }
    }
}

fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1; sizes.len()];
    for a in (0..sizes.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * sizes[a + 1];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_circular_convolution_2d() {
        let sizes = vec![6, 10];
        let taps = vec![([0, 1, 0], 0.5), ([0, -1, 0], 0.5), ([1, 0, 0], 0.25), ([-1, 0, 0], 0.25), ([2, 3, 0], 0.1), ([-2, -3, 0], 0.1)];
        let c = Convolver::new(sizes.clone(), &taps);
        let data: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let out = c.convolve(&data);
        for i in 0..6i64 {
            for j in 0..10i64 {
                let mut acc = 0.0;
                for (k, w) in &taps {
                    let ii = (i - k[0]).rem_euclid(6);
                    let jj = (j - k[1]).rem_euclid(10);
                    acc += w * data[(ii * 10 + jj) as usize];
                }
                assert!((acc - out[(i * 10 + j) as usize]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(513), 525);
        assert_eq!(smooth_size(1024), 1024);
        assert_eq!(smooth_size(641), 648);
    }
}
