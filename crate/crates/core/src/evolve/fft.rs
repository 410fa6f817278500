//! Row-wise FFTs over 1D and square 2D grids.
//!
//! 2D transforms run rows, transpose, rows, transpose. Rows are independent,
//! so the output is bitwise identical for any thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par::{self, Exec};

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Spectral {
        let mut planner = FftPlanner::new();
        Spectral {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalised forward transform, `Σ_j u_j e^{-2πi jk/n}` per axis.
    pub fn forward(&self, exec: Exec, dim: usize, data: &mut [Complex64]) {
        self.apply(exec, dim, data, &self.fwd);
    }

    /// Inverse transform including the `1/n^dim` factor.
    pub fn inverse(&self, exec: Exec, dim: usize, data: &mut [Complex64]) {
        self.apply(exec, dim, data, &self.inv);
        let s = 1.0 / (self.n as f64).powi(dim as i32);
        par::for_each_chunk(exec, data, self.n, |_, row| {
            for v in row {
                *v *= s;
            }
        });
    }

    fn apply(&self, exec: Exec, dim: usize, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(dim as u32));
        let rows = |data: &mut [Complex64]| {
            par::for_each_chunk(exec, data, n, |_, row| plan.process(row));
        };
        rows(data);
        if dim == 2 {
            transpose(data, n);
            rows(data);
            transpose(data, n);
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(u: &[Complex64]) -> Vec<Complex64> {
        let n = u.len();
        (0..n)
            .map(|k| {
                u.iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform_in_2d() {
        let n = 8;
        let u: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut want = u.clone();
        for r in 0..n {
            let row = naive_dft(&want[r * n..(r + 1) * n]);
            want[r * n..(r + 1) * n].copy_from_slice(&row);
        }
        for c in 0..n {
            let col: Vec<Complex64> = (0..n).map(|r| want[r * n + c]).collect();
            for (r, v) in naive_dft(&col).into_iter().enumerate() {
                want[r * n + c] = v;
            }
        }
        let sp = Spectral::new(n);
        let mut got = u.clone();
        sp.forward(Exec::Sequential, 2, &mut got);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
        sp.inverse(Exec::default(), 2, &mut got);
        for (a, b) in got.iter().zip(&u) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn transpose_is_involution() {
        for n in [1, 5, 33, 64] {
            let u: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
            let mut v = u.clone();
            transpose(&mut v, n);
            if n > 1 {
                assert_eq!(v[1], u[n]);
            }
            transpose(&mut v, n);
            assert_eq!(u, v);
        }
    }
}
