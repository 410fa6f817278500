//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sojourn_core::microlocal::{GaborConfig, LatticeSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

pub fn point_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
            return v;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Flat-space relation: straight lines give `θ = ζ̂`, `λ = −z·ζ̂`,
/// `μ = −(z − (z·ζ̂)ζ̂)` and `ξ = λθ + μ = −z`.
pub struct FlatRelation {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub xi: Vec<f64>,
}

pub fn flat_relation(z: &[f64], d: &[f64]) -> FlatRelation {
    let lambda = -dot(z, d);
    let mu = z.iter().zip(d).map(|(zi, di)| -(zi + lambda * di)).collect();
    FlatRelation {
        theta: d.to_vec(),
        lambda,
        mu,
        xi: z.iter().map(|x| -x).collect(),
    }
}

/// `λ` for the radially outgoing geodesic from `r₀` in
/// `g = (1 + m/r) dr² + r² dω²`, with `r̃ = r + (m/2) ln r`.
///
/// Arclength is `F(r) − F(r₀)` with `F' = √(1 + m/r)`, and
/// `F(r) − r̃ → m/2 + (m/2) ln 4`.
pub fn radial_lambda(m: f64, r0: f64) -> f64 {
    let f = |r: f64| (r * r + m * r).sqrt() + 0.5 * m * (2.0 * r + m + 2.0 * (r * r + m * r).sqrt()).ln();
    0.5 * m + 0.5 * m * 4f64.ln() - f(r0)
}

/// Free evolution of `e^{-(z−c)²/2s²} e^{ipz}` in 1D.
pub fn free_gaussian(t: f64, z: f64, c: f64, s: f64, p: f64) -> Complex64 {
    let a = Complex64::new(s * s, t);
    let pre = (Complex64::new(s * s, 0.0) / a).sqrt();
    let x = z - c - p * t;
    pre * (-(x * x) / (2.0 * a)).exp() * Complex64::from_polar(1.0, p * z - 0.5 * p * p * t)
}

pub fn lattice(min: f64, max: f64, spacing: f64) -> LatticeSpec {
    LatticeSpec { min, max, spacing }
}

pub fn gabor(sigma: f64, lattice: LatticeSpec, bands: Vec<(f64, f64)>) -> GaborConfig {
    GaborConfig {
        sigma,
        lattice,
        directions: 16,
        bands,
        k_smooth: 4.0,
        abs_floor: 1e-3,
        rel_floor: 0.1,
    }
}

/// Dyadic bands `lo·2^k … lo·2^{k+1}` for `k < count`.
pub fn dyadic(lo: f64, count: usize) -> Vec<(f64, f64)> {
    (0..count).map(|k| (lo * 2f64.powi(k as i32), lo * 2f64.powi(k as i32 + 1))).collect()
}
