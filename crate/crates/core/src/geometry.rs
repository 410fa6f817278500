//! Metric and potential families.
//!
//! Three metric families are provided:
//!
//! * flat Euclidean space;
//! * a radial long-range family `g = I + m·dr²/r + k_ij dz^i dz^j / r²`, with
//!   `k_ij` a finite Fourier series in the polar angle (2D only);
//! * compact conformal bumps `g = φ(z)·I`, `φ = 1 + Σ a_k exp(-|z-c_k|²/2w_k²)·χ(|z|)`
//!   where `χ` is a smooth cutoff that vanishes identically for `|z| ≥ R_pert`.
//!
//! All families are evaluated through [`Jet`]s, so gradients and Hessians of the
//! inverse metric are exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_DIM};

/// One Gaussian conformal bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

/// Sum of Gaussian bumps multiplied by a radial cutoff.
///
/// The cutoff equals one for `|z| ≤ r_pert − cutoff_width` and zero for
/// `|z| ≥ r_pert`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpProfile {
    pub bumps: Vec<Bump>,
    pub r_pert: f64,
    pub cutoff_width: f64,
}

/// One term of the angular perturbation `k_ab / r²` of the radial family.
///
/// Contributes `r^{-2-power} (cos·cos(harmonic·φ) + sin·sin(harmonic·φ))` to
/// `g_ab` and `g_ba`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularMode {
    pub a: usize,
    pub b: usize,
    pub harmonic: u32,
    pub power: u32,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MetricFamily {
    Flat,
    RadialLongRange {
        m: f64,
        modes: Vec<AngularMode>,
        /// Points with `|z| < r_inner` are outside the domain.
        r_inner: f64,
    },
    CompactBump(BumpProfile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub dim: usize,
    pub family: MetricFamily,
}

/// Derivatives of `h = ½ ζᵀ g⁻¹(z) ζ` at a phase point.
#[derive(Clone, Debug)]
pub struct HamiltonianDerivs {
    pub h: f64,
    pub h_z: Vec<f64>,
    pub h_zeta: Vec<f64>,
    /// `∂²h/∂z_a∂z_b`
    pub h_zz: Vec<Vec<f64>>,
    /// `∂²h/∂z_a∂ζ_i`, indexed `[a][i]`
    pub h_zzeta: Vec<Vec<f64>>,
    /// `g⁻¹`
    pub h_zetazeta: Vec<Vec<f64>>,
}

/// Christoffel symbols `Γ^i_{jk}` stored densely.
#[derive(Clone, Debug)]
pub struct Christoffel {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn smooth_step_jet(x: Jet) -> Jet {
    if x.v <= 0.0 {
        return Jet::ZERO;
    }
    if x.v >= 1.0 {
        return Jet::ONE;
    }
    let psi = |u: Jet| (-u.recip()).exp();
    let a = psi(x);
    let b = psi(Jet::ONE - x);
    a / (a + b)
}

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    smooth_step_jet(Jet::constant(x)).v
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl BumpProfile {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.r_pert > 0.0) || !(self.cutoff_width > 0.0) || self.cutoff_width > self.r_pert {
            return Err(Error::Config(format!(
                "bump cutoff needs 0 < cutoff_width ≤ r_pert, got {} and {}",
                self.cutoff_width, self.r_pert
            )));
        }
        for b in &self.bumps {
            if b.center.len() != dim {
                return Err(Error::Config(format!(
                    "bump center has {} components, expected {dim}",
                    b.center.len()
                )));
            }
            if !(b.width > 0.0) || !b.amplitude.is_finite() {
                return Err(Error::Config("bump width must be positive and amplitude finite".into()));
            }
        }
        Ok(())
    }

    /// Profile `Σ a_k exp(-|z-c_k|²/2w_k²) χ(|z|)` as a jet.
    pub fn jet(&self, z: &[Jet]) -> Jet {
        let r2v: f64 = z.iter().map(|x| x.v * x.v).sum();
        if r2v >= self.r_pert * self.r_pert {
            return Jet::ZERO;
        }
        let inner = self.r_pert - self.cutoff_width;
        let cutoff = if r2v <= inner * inner {
            Jet::ONE
        } else {
            let r = z.iter().fold(Jet::ZERO, |acc, &x| acc + x * x).sqrt();
            smooth_step_jet((Jet::constant(self.r_pert) - r) * (1.0 / self.cutoff_width))
        };
        let mut sum = Jet::ZERO;
        for b in &self.bumps {
            let mut d2 = Jet::ZERO;
            for (x, c) in z.iter().zip(&b.center) {
                let d = *x - *c;
                d2 = d2 + d * d;
            }
            sum = sum + (d2 * (-0.5 / (b.width * b.width))).exp() * b.amplitude;
        }
        sum * cutoff
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let zj: Vec<Jet> = z.iter().map(|&x| Jet::constant(x)).collect();
        self.jet(&zj).v
    }
}

impl MetricSpec {
    pub fn flat(dim: usize) -> MetricSpec {
        MetricSpec {
            dim,
            family: MetricFamily::Flat,
        }
    }

    /// Single bump centered at `center`.
    pub fn single_bump(center: Vec<f64>, amplitude: f64, width: f64, r_pert: f64) -> MetricSpec {
        MetricSpec {
            dim: center.len(),
            family: MetricFamily::CompactBump(BumpProfile {
                bumps: vec![Bump {
                    center,
                    amplitude,
                    width,
                }],
                r_pert,
                cutoff_width: 1.0_f64.min(r_pert),
            }),
        }
    }

    pub fn radial(dim: usize, m: f64) -> MetricSpec {
        MetricSpec {
            dim,
            family: MetricFamily::RadialLongRange {
                m,
                modes: Vec::new(),
                r_inner: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::Config(format!(
                "dimension {} unsupported (1..={MAX_DIM})",
                self.dim
            )));
        }
        match &self.family {
            MetricFamily::Flat => Ok(()),
            MetricFamily::CompactBump(p) => {
                if self.dim < 2 {
                    return Err(Error::Config("compact-bump family needs dimension ≥ 2".into()));
                }
                p.validate(self.dim)?;
                let min_amp: f64 = p.bumps.iter().map(|b| b.amplitude.min(0.0)).sum();
                if 1.0 + min_amp <= 0.0 {
                    return Err(Error::Config(
                        "bump amplitudes could make the conformal factor non-positive".into(),
                    ));
                }
                Ok(())
            }
            MetricFamily::RadialLongRange { m, modes, r_inner } => {
                if self.dim < 2 {
                    return Err(Error::Config("radial family needs dimension ≥ 2".into()));
                }
                if !m.is_finite() || !(*r_inner >= 0.0) {
                    return Err(Error::Config("radial family needs finite m and r_inner ≥ 0".into()));
                }
                if !modes.is_empty() && self.dim != 2 {
                    return Err(Error::Config("angular modes are only supported in 2D".into()));
                }
                for md in modes {
                    if md.a >= self.dim || md.b >= self.dim {
                        return Err(Error::Config("angular mode index out of range".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Long-range coefficient `m` (zero for the compactly supported families).
    pub fn long_range_m(&self) -> f64 {
        match &self.family {
            MetricFamily::RadialLongRange { m, .. } => *m,
            _ => 0.0,
        }
    }

    pub fn is_short_range(&self) -> bool {
        self.long_range_m() == 0.0
    }

    /// Radius beyond which the metric is exactly Euclidean, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.family {
            MetricFamily::Flat => Some(0.0),
            MetricFamily::CompactBump(p) => Some(p.r_pert),
            MetricFamily::RadialLongRange { m, modes, .. } => {
                if *m == 0.0 && modes.is_empty() {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has {} components, metric dimension is {}",
                z.len(),
                self.dim
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite point".into()));
        }
        if let MetricFamily::RadialLongRange { r_inner, .. } = &self.family {
            let r = norm(z);
            if r == 0.0 || r < *r_inner {
                return Err(Error::Domain(format!(
                    "radial family evaluated at |z| = {r} (needs |z| > 0 and ≥ {r_inner})"
                )));
            }
        }
        Ok(())
    }

    /// Metric components as jets in `z`.
    pub fn metric_jets(&self, z: &[f64]) -> Result<Vec<Vec<Jet>>> {
        self.check_point(z)?;
        let n = self.dim;
        let zj = Jet::point(z);
        let mut g = vec![vec![Jet::ZERO; n]; n];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = Jet::ONE;
        }
        match &self.family {
            MetricFamily::Flat => {}
            MetricFamily::CompactBump(p) => {
                let phi = p.jet(&zj);
                for (i, row) in g.iter_mut().enumerate() {
                    row[i] = row[i] + phi;
                }
            }
            MetricFamily::RadialLongRange { m, modes, .. } => {
                let r2 = zj.iter().fold(Jet::ZERO, |acc, &x| acc + x * x);
                let r = r2.sqrt();
                if *m != 0.0 {
                    // m dr²/r = m z_i z_j / r³
                    let c = r.powi(-3) * *m;
                    for i in 0..n {
                        for j in 0..n {
                            g[i][j] = g[i][j] + c * zj[i] * zj[j];
                        }
                    }
                }
                for md in modes {
                    // (x + iy)^k / r^k = cos kφ + i sin kφ
                    let (mut re, mut im) = (Jet::ONE, Jet::ZERO);
                    for _ in 0..md.harmonic {
                        let nre = re * zj[0] - im * zj[1];
                        let nim = re * zj[1] + im * zj[0];
                        re = nre;
                        im = nim;
                    }
                    let ang = (re * md.cos + im * md.sin) * r.powi(-(md.harmonic as i32));
                    let term = ang * r.powi(-2 - md.power as i32);
                    g[md.a][md.b] = g[md.a][md.b] + term;
                    if md.a != md.b {
                        g[md.b][md.a] = g[md.b][md.a] + term;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Metric tensor `g_ij(z)`; fails outside the domain or if `g` is not
    /// positive definite there.
    pub fn metric_tensor(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric_jets(z)?;
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |i, j| g[i][j].v);
        if m.clone().cholesky().is_none() {
            return Err(Error::Domain(format!("metric not positive definite at {z:?}")));
        }
        Ok(m)
    }

    /// Inverse metric `g^{ij}` as jets, by Gauss–Jordan elimination.
    pub fn inverse_metric_jets(&self, z: &[f64]) -> Result<Vec<Vec<Jet>>> {
        let mut a = self.metric_jets(z)?;
        let n = self.dim;
        if let MetricFamily::Flat = self.family {
            return Ok(a);
        }
        let mut inv = vec![vec![Jet::ZERO; n]; n];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = Jet::ONE;
        }
        for col in 0..n {
            let p = a[col][col];
            if !(p.v > 0.0) {
                return Err(Error::Domain(format!("metric not positive definite at {z:?}")));
            }
            let pinv = p.recip();
            for j in 0..n {
                a[col][j] = a[col][j] * pinv;
                inv[col][j] = inv[col][j] * pinv;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r][col];
                if f.v == 0.0 && f.g.iter().all(|&x| x == 0.0) && f.h.iter().flatten().all(|&x| x == 0.0) {
                    continue;
                }
                for j in 0..n {
                    a[r][j] = a[r][j] - f * a[col][j];
                    inv[r][j] = inv[r][j] - f * inv[col][j];
                }
            }
        }
        Ok(inv)
    }

    pub fn inverse_metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let gi = self.inverse_metric_jets(z)?;
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| gi[i][j].v))
    }

    /// Christoffel symbols of the second kind.
    pub fn christoffel(&self, z: &[f64]) -> Result<Christoffel> {
        let n = self.dim;
        let g = self.metric_jets(z)?;
        let gi = self.inverse_metric(z)?;
        let mut data = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gi[(i, l)] * (g[l][k].g[j] + g[l][j].g[k] - g[j][k].g[l]);
                    }
                    data[(i * n + j) * n + k] = 0.5 * s;
                }
            }
        }
        Ok(Christoffel { n, data })
    }

    /// `h(z, ζ) = ½ g^{ij}(z) ζ_i ζ_j`.
    pub fn hamiltonian(&self, z: &[f64], zeta: &[f64]) -> Result<f64> {
        if zeta.len() != self.dim {
            return Err(Error::Domain("covector dimension mismatch".into()));
        }
        let gi = self.inverse_metric(z)?;
        let mut h = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                h += gi[(i, j)] * zeta[i] * zeta[j];
            }
        }
        Ok(0.5 * h)
    }

    /// Value, gradient and Hessian blocks of the Hamiltonian.
    pub fn hamiltonian_derivs(&self, z: &[f64], zeta: &[f64]) -> Result<HamiltonianDerivs> {
        let n = self.dim;
        let gi = self.inverse_metric_jets(z)?;
        let mut hj = Jet::ZERO;
        let mut h_zeta = vec![0.0; n];
        let mut h_zzeta = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                hj = hj + gi[i][j] * (0.5 * zeta[i] * zeta[j]);
                h_zeta[i] += gi[i][j].v * zeta[j];
                for (a, row) in h_zzeta.iter_mut().enumerate() {
                    row[i] += gi[i][j].g[a] * zeta[j];
                }
            }
        }
        Ok(HamiltonianDerivs {
            h: hj.v,
            h_z: hj.g[..n].to_vec(),
            h_zeta,
            h_zz: (0..n).map(|a| hj.h[a][..n].to_vec()).collect(),
            h_zzeta,
            h_zetazeta: gi.iter().map(|row| row.iter().map(|x| x.v).collect()).collect(),
        })
    }

    /// Scale a direction `ζ̂` so that `h(z, ζ) = ½`. Returns `(ζ, c)` with `ζ = c·ζ̂`.
    pub fn unit_covector(&self, z: &[f64], zeta_hat: &[f64]) -> Result<(Vec<f64>, f64)> {
        let h = self.hamiltonian(z, zeta_hat)?;
        if !(h > 0.0) {
            return Err(Error::Domain("zero covector cannot be normalized".into()));
        }
        let c = 1.0 / (2.0 * h).sqrt();
        Ok((zeta_hat.iter().map(|x| x * c).collect(), c))
    }
}

/// Potential `V = c/r + Ṽ`, with `Ṽ` a compactly supported bump profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub c: f64,
    pub bumps: Option<BumpProfile>,
}

impl PotentialSpec {
    pub fn zero() -> PotentialSpec {
        PotentialSpec { c: 0.0, bumps: None }
    }

    pub fn bump(profile: BumpProfile) -> PotentialSpec {
        PotentialSpec {
            c: 0.0,
            bumps: Some(profile),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.c.is_finite() {
            return Err(Error::Config("potential constant must be finite".into()));
        }
        if let Some(p) = &self.bumps {
            p.validate(dim)?;
        }
        Ok(())
    }

    /// Short range means both the metric constant `m` and `c` vanish.
    pub fn short_range(&self, metric: &MetricSpec) -> bool {
        self.c == 0.0 && metric.is_short_range()
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let mut v = 0.0;
        if self.c != 0.0 {
            let r = norm(z);
            if r == 0.0 {
                return Err(Error::Domain("Coulomb term evaluated at the origin".into()));
            }
            v += self.c / r;
        }
        if let Some(p) = &self.bumps {
            if p.bumps.iter().any(|b| b.center.len() != z.len()) {
                return Err(Error::Domain("potential bump dimension mismatch".into()));
            }
            v += p.value(z);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump2() -> MetricSpec {
        MetricSpec::single_bump(vec![0.4, -0.2], 0.3, 1.0, 3.0)
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bump_is_flat_outside_support() {
        let s = bump2();
        let g = s.metric_tensor(&[3.0, 0.1]).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
        let c = s.christoffel(&[0.0, -3.5]).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn radial_rr_component() {
        // oracle: polar frame e_r = z/|z|, g(e_r, e_r) = 1 + m/r
        let s = MetricSpec::radial(2, 1.0);
        let z = [10.0, 0.0];
        let g = s.metric_tensor(&z).unwrap();
        assert!((g[(0, 0)] - 1.1).abs() < 1e-15);
        assert!(g[(0, 1)].abs() < 1e-15 && (g[(1, 1)] - 1.0).abs() < 1e-15);
        let z = [3.0, 4.0];
        let g = s.metric_tensor(&z).unwrap();
        let er = [0.6, 0.8];
        let et = [-0.8, 0.6];
        let q = |u: [f64; 2], v: [f64; 2]| {
            (0..2).map(|i| (0..2).map(|j| u[i] * g[(i, j)] * v[j]).sum::<f64>()).sum::<f64>()
        };
        assert!((q(er, er) - 1.2).abs() < 1e-14);
        assert!((q(et, et) - 1.0).abs() < 1e-14);
        assert!(q(er, et).abs() < 1e-14);
    }

    #[test]
    fn radial_origin_is_domain_error() {
        let s = MetricSpec::radial(2, 1.0);
        assert!(matches!(s.metric_tensor(&[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn hamiltonian_matches_dense_solve() {
        let s = bump2();
        let z = [0.1, 0.3];
        let zeta = [0.6, 0.8];
        let g = s.metric_tensor(&z).unwrap();
        let x = g.clone().lu().solve(&nalgebra::DVector::from_row_slice(&zeta)).unwrap();
        let expect = 0.5 * (zeta[0] * x[0] + zeta[1] * x[1]);
        assert!((s.hamiltonian(&z, &zeta).unwrap() - expect).abs() < 1e-15);
        assert_eq!(MetricSpec::flat(3).hamiltonian(&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn christoffel_matches_finite_differences() {
        for s in [bump2(), MetricSpec::radial(2, 0.7)] {
            let z = [0.5, 0.9];
            let n = 2;
            let e = 1e-5;
            let mut dg = vec![DMatrix::zeros(n, n); n];
            for (l, d) in dg.iter_mut().enumerate() {
                let mut zp = z;
                let mut zm = z;
                zp[l] += e;
                zm[l] -= e;
                *d = (s.metric_tensor(&zp).unwrap() - s.metric_tensor(&zm).unwrap()) / (2.0 * e);
            }
            let gi = s.inverse_metric(&z).unwrap();
            let c = s.christoffel(&z).unwrap();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut fd = 0.0;
                        for l in 0..n {
                            fd += 0.5 * gi[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                        }
                        let an = c.get(i, j, k);
                        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{i}{j}{k}: {fd} vs {an}");
                        assert!((an - c.get(i, k, j)).abs() <= 1e-14 * an.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn potential_values() {
        assert_eq!(PotentialSpec::zero().value(&[1.0, 2.0]).unwrap(), 0.0);
        let p = PotentialSpec { c: 1.0, bumps: None };
        assert_eq!(p.value(&[0.0, 4.0]).unwrap(), 0.25);
        assert!(p.value(&[0.0, 0.0]).is_err());
        let prof = BumpProfile {
            bumps: vec![Bump { center: vec![0.0], amplitude: 0.2, width: 1.0 }],
            r_pert: 4.0,
            cutoff_width: 1.0,
        };
        let b = PotentialSpec::bump(prof);
        assert!((b.value(&[0.5]).unwrap() - 0.2 * (-0.125f64).exp()).abs() < 1e-15);
        assert_eq!(b.value(&[4.5]).unwrap(), 0.0);
    }
}
