//! Schrödinger evolution on periodic grids.
//!
//! `ψ(t) = e^{-itH}ψ₀` with `H = -½Δ + V` on a flat background. The free part
//! is applied exactly in Fourier space; a potential enters through Strang
//! splitting. The quadratic gauge `e^{-iα r̃²/2}` and the sojourn-phase
//! parametrix live here too, since both are compared against evolved data.
//!
//! Grid coordinates are `x_j = -L/2 + jh`, `h = L/N`, so index `N/2` is the
//! origin. 2D data are row-major with the first coordinate varying slowest.

pub mod airy;
pub mod fft;
pub mod presets;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{smooth_step, MetricSpec, PotentialSpec};
use crate::par::{self, Exec};
use crate::sojourn::{self, ExtrapolationConfig, SojournPoint};

pub use fft::Spectral;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("grids are 1D or 2D, got dim = {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("N must be a power of two ≥ 4, got {n}")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Config(format!("extent must be positive, got {extent}")));
        }
        Ok(Grid { dim, n, extent })
    }

    pub fn h(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.h()
    }

    /// Angular wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let jj = j as i64;
        let m = if jj < n / 2 { jj } else { jj - n };
        2.0 * PI * m as f64 / self.extent
    }

    /// Coordinates of flat index `idx`; the unused slot is zero in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coord(idx), 0.0]
        } else {
            [self.coord(idx / self.n), self.coord(idx % self.n)]
        }
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.wavenumber(idx), 0.0]
        } else {
            [self.wavenumber(idx / self.n), self.wavenumber(idx % self.n)]
        }
    }

    /// Periodic index of the sample nearest `x` along one axis.
    pub fn nearest(&self, x: f64) -> usize {
        let j = ((x + 0.5 * self.extent) / self.h()).round() as i64;
        j.rem_euclid(self.n as i64) as usize
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
}

/// Record of an applied factor `e^{-iα r̃²/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    None,
    Applied { alpha: f64, m: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub data: Vec<Complex64>,
    pub t: f64,
    pub gauge: Gauge,
}

impl Field {
    pub fn new(grid: Grid, data: Vec<Complex64>, t: f64) -> Result<Field> {
        if data.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} samples, grid expects {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid,
            data,
            t,
            gauge: Gauge::None,
        })
    }

    pub fn zeros(grid: Grid) -> Field {
        Field {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
            t: 0.0,
            gauge: Gauge::None,
        }
    }

    pub fn from_fn<F>(grid: Grid, t: f64, f: F) -> Field
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        Field::from_fn_with(Exec::default(), grid, t, f)
    }

    pub fn from_fn_with<F>(exec: Exec, grid: Grid, t: f64, f: F) -> Field
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        let mut out = Field::zeros(grid);
        out.t = t;
        let row = grid.n;
        par::for_each_chunk(exec, &mut out.data, row, |r, chunk| {
            for (j, v) in chunk.iter_mut().enumerate() {
                let p = grid.point(r * row + j);
                *v = f(&p[..grid.dim]);
            }
        });
        out
    }

    /// Discrete `L²` norm `(h^dim Σ|ψ|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (compensated_sum(self.data.iter().map(|v| v.norm_sqr())) * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Largest pointwise difference.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn conj(&self) -> Field {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Config("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn ensure_finite(&self, step: usize) -> Result<()> {
        if self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { step })
        }
    }
}

/// Neumaier summation; keeps norm comparisons on 10⁶-sample grids at
/// machine precision.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Free Schrödinger kernel `(2πit)^{-n/2} e^{i|z-w|²/2t}`.
///
/// The power of `it` uses `arg(it) = ±π/2` for `t ≷ 0`.
pub fn euclid_kernel(t: f64, z: &[f64], w: &[f64]) -> Result<Complex64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("kernel needs finite t ≠ 0, got {t}")));
    }
    let n = z.len() as f64;
    let d2: f64 = z.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
    let prefactor = Complex64::from_polar(
        (2.0 * PI * t.abs()).powf(-0.5 * n),
        -0.25 * n * PI * t.signum(),
    );
    Ok(prefactor * Complex64::from_polar(1.0, d2 / (2.0 * t)))
}

fn kinetic_multiplier(exec: Exec, grid: &Grid, t: f64, dealias: bool) -> Vec<Complex64> {
    let kmax = PI / grid.h();
    let cut = 2.0 / 3.0 * kmax;
    par::map_range(exec, grid.len(), |idx| {
        let k = grid.wavevector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1];
        if dealias && (k[0].abs() > cut || k[1].abs() > cut) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -0.5 * t * k2)
        }
    })
}

fn multiply(exec: Exec, grid: &Grid, data: &mut [Complex64], m: &[Complex64]) {
    let row = grid.n;
    par::for_each_chunk(exec, data, row, |r, chunk| {
        for (v, f) in chunk.iter_mut().zip(&m[r * row..]) {
            *v *= f;
        }
    });
}

/// `e^{-itH₀}ψ` via the exact multiplier `e^{-it|k|²/2}`. Unitary on the
/// grid; any gauge tag is dropped, since the gauge does not commute with
/// propagation.
pub fn free_propagate(psi: &Field, t: f64) -> Field {
    free_propagate_with(Exec::default(), psi, t)
}

pub fn free_propagate_with(exec: Exec, psi: &Field, t: f64) -> Field {
    let mut out = psi.clone();
    out.t += t;
    out.gauge = Gauge::None;
    if t == 0.0 {
        return out;
    }
    let sp = Spectral::new(psi.grid.n);
    let m = kinetic_multiplier(exec, &psi.grid, t, false);
    sp.forward(exec, psi.grid.dim, &mut out.data);
    multiply(exec, &psi.grid, &mut out.data, &m);
    sp.inverse(exec, psi.grid.dim, &mut out.data);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Largest split-step time step; the actual step divides `t` evenly.
    pub dt: f64,
    /// Width of the smooth absorbing layer at the box edge, `0` for none.
    pub absorbing_width: f64,
    /// Zero wavenumbers above `2/3` of Nyquist after every kinetic step.
    pub dealias: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt: 1e-3,
            absorbing_width: 0.0,
            dealias: false,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.absorbing_width >= 0.0 && self.absorbing_width < 0.25 * grid.extent) {
            return Err(Error::Config(format!(
                "absorbing layer {} must lie in [0, L/4)",
                self.absorbing_width
            )));
        }
        Ok(())
    }

    pub fn steps_for(&self, t: f64) -> usize {
        ((t.abs() / self.dt).ceil() as usize).max(1)
    }
}

/// Smooth mask equal to one away from the box edge and vanishing on it.
pub fn absorbing_mask(grid: &Grid, width: f64) -> Vec<f64> {
    let half = 0.5 * grid.extent;
    (0..grid.len())
        .map(|idx| {
            let p = grid.point(idx);
            p[..grid.dim]
                .iter()
                .map(|x| smooth_step((half - x.abs()) / width))
                .product()
        })
        .collect()
}

/// Evolve under `-½Δ + V` for time `t` by Strang splitting:
/// half potential kick, exact free flow, half kick.
pub fn split_step(psi: &Field, pot: &PotentialSpec, t: f64, cfg: &EvolveConfig) -> Result<Field> {
    split_step_with(Exec::default(), psi, pot, t, cfg)
}

pub fn split_step_with(
    exec: Exec,
    psi: &Field,
    pot: &PotentialSpec,
    t: f64,
    cfg: &EvolveConfig,
) -> Result<Field> {
    let grid = psi.grid;
    cfg.validate(&grid)?;
    pot.validate(grid.dim)?;
    if pot.c != 0.0 {
        return Err(Error::Config(
            "Coulomb-type potentials (c ≠ 0) are not supported on grids".into(),
        ));
    }
    let steps = cfg.steps_for(t);
    let d = t / steps as f64;
    let v = par::map_range(exec, grid.len(), |idx| {
        let p = grid.point(idx);
        pot.value(&p[..grid.dim])
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let kick: Vec<Complex64> = v.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * d)).collect();
    let kinetic = kinetic_multiplier(exec, &grid, d, cfg.dealias);
    let mask = (cfg.absorbing_width > 0.0).then(|| {
        absorbing_mask(&grid, cfg.absorbing_width)
            .into_iter()
            .map(|m| Complex64::new(m, 0.0))
            .collect::<Vec<_>>()
    });
    let sp = Spectral::new(grid.n);
    let mut out = psi.clone();
    out.gauge = Gauge::None;
    for step in 0..steps {
        multiply(exec, &grid, &mut out.data, &kick);
        sp.forward(exec, grid.dim, &mut out.data);
        multiply(exec, &grid, &mut out.data, &kinetic);
        sp.inverse(exec, grid.dim, &mut out.data);
        multiply(exec, &grid, &mut out.data, &kick);
        if let Some(m) = &mask {
            multiply(exec, &grid, &mut out.data, m);
        }
        out.ensure_finite(step)?;
    }
    out.t += t;
    Ok(out)
}

/// `r̃ = r + (m/2) log r`.
pub fn modified_radius(r: f64, m: f64) -> f64 {
    if m == 0.0 {
        r
    } else {
        r + 0.5 * m * r.ln()
    }
}

/// Multiply by `e^{-iα r̃²/2}`. With `m ≠ 0` the cell at the origin is
/// zeroed and its index returned.
pub fn gauge_masked(psi: &Field, alpha: f64, m: f64) -> (Field, Vec<usize>) {
    let grid = psi.grid;
    let mut out = psi.clone();
    let mut masked = Vec::new();
    for (idx, v) in out.data.iter_mut().enumerate() {
        let p = grid.point(idx);
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if m != 0.0 && r < 0.5 * grid.h() {
            *v = Complex64::new(0.0, 0.0);
            masked.push(idx);
            continue;
        }
        let rt = modified_radius(r, m);
        *v *= Complex64::from_polar(1.0, -0.5 * alpha * rt * rt);
    }
    out.gauge = match psi.gauge {
        Gauge::None => Gauge::Applied { alpha, m },
        Gauge::Applied { alpha: a0, m: m0 } if m0 == m => {
            if a0 + alpha == 0.0 {
                Gauge::None
            } else {
                Gauge::Applied { alpha: a0 + alpha, m }
            }
        }
        Gauge::Applied { .. } => Gauge::Applied { alpha, m },
    };
    if alpha == 0.0 {
        out.gauge = psi.gauge;
    }
    (out, masked)
}

pub fn gauge(psi: &Field, alpha: f64, m: f64) -> Field {
    gauge_masked(psi, alpha, m).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub r_min: f64,
    pub r_max: f64,
    /// Samples below this fraction of the ray's peak amplitude mask the ray.
    pub amp_floor: f64,
    /// Adjacent phase differences above this (radians) are ambiguous.
    pub max_jump: f64,
}

impl PhaseConfig {
    /// The annulus `[L/4, L/3]`.
    pub fn for_grid(grid: &Grid) -> PhaseConfig {
        PhaseConfig {
            r_min: grid.extent / 4.0,
            r_max: grid.extent / 3.0,
            amp_floor: 1e-3,
            max_jump: 0.75 * PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySlope {
    pub direction: Vec<f64>,
    /// Least-squares `∂_r arg ψ` over the annulus.
    pub slope: Option<f64>,
    /// Local slopes `Δφ/Δr` at the annulus sample midpoints.
    pub local: Vec<(f64, f64)>,
    pub rms: f64,
    pub masked: Option<String>,
}

/// Integer ray directions on which grid samples fall exactly.
pub fn lattice_directions(dim: usize) -> Vec<[i64; 2]> {
    if dim == 1 {
        return vec![[1, 0], [-1, 0]];
    }
    let mut dirs = Vec::new();
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            if (a, b) != (0, 0) && gcd(a.abs(), b.abs()) == 1 {
                dirs.push([a, b]);
            }
        }
    }
    dirs.sort_by(|p, q| {
        let ap = (p[1] as f64).atan2(p[0] as f64).rem_euclid(2.0 * PI);
        let aq = (q[1] as f64).atan2(q[0] as f64).rem_euclid(2.0 * PI);
        ap.partial_cmp(&aq).unwrap()
    });
    dirs
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Radial phase slopes along lattice rays, after removing `e^{ir²/2t}` when
/// `t` is given (i.e. applying the gauge with `α = 1/t`).
pub fn phase_extraction(psi: &Field, t: Option<f64>, cfg: &PhaseConfig) -> Result<Vec<RaySlope>> {
    if let Some(t) = t {
        if t == 0.0 {
            return Err(Error::Domain("phase extraction needs t ≠ 0".into()));
        }
    }
    if !(cfg.r_min >= 0.0 && cfg.r_max > cfg.r_min) {
        return Err(Error::Config("empty annulus".into()));
    }
    let grid = psi.grid;
    let n = grid.n as i64;
    let c = n / 2;
    let mut out = Vec::new();
    for d in lattice_directions(grid.dim) {
        let step = grid.h() * ((d[0] * d[0] + d[1] * d[1]) as f64).sqrt();
        let norm = step / grid.h();
        let direction = if grid.dim == 1 {
            vec![d[0] as f64]
        } else {
            vec![d[0] as f64 / norm, d[1] as f64 / norm]
        };
        let mut rs = Vec::new();
        let mut vals = Vec::new();
        let mut p = 0i64;
        loop {
            let i0 = c + p * d[0];
            let i1 = c + p * d[1];
            if i0 < 0 || i0 >= n || i1 < 0 || i1 >= n {
                break;
            }
            let r = p as f64 * step;
            if r > cfg.r_max {
                break;
            }
            if r >= cfg.r_min {
                let idx = if grid.dim == 1 { i0 } else { i0 * n + i1 } as usize;
                let mut v = psi.data[idx];
                if let Some(t) = t {
                    v *= Complex64::from_polar(1.0, -0.5 * r * r / t);
                }
                rs.push(r);
                vals.push(v);
            }
            p += 1;
        }
        out.push(fit_ray(direction, &rs, &vals, cfg));
    }
    Ok(out)
}

fn fit_ray(direction: Vec<f64>, rs: &[f64], vals: &[Complex64], cfg: &PhaseConfig) -> RaySlope {
    let masked = |why: &str| RaySlope {
        direction: direction.clone(),
        slope: None,
        local: Vec::new(),
        rms: f64::NAN,
        masked: Some(why.to_string()),
    };
    if rs.len() < 3 {
        return masked("fewer than three samples on the annulus");
    }
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 || vals.iter().any(|v| v.norm() < cfg.amp_floor * peak) {
        return masked("amplitude below floor");
    }
    let mut phase = vec![vals[0].arg()];
    let mut local = Vec::new();
    for k in 1..vals.len() {
        let d = (vals[k] * vals[k - 1].conj()).arg();
        if d.abs() > cfg.max_jump {
            return masked("phase unwrap ambiguity");
        }
        phase.push(phase[k - 1] + d);
        local.push((0.5 * (rs[k] + rs[k - 1]), d / (rs[k] - rs[k - 1])));
    }
    let n = rs.len() as f64;
    let mr = rs.iter().sum::<f64>() / n;
    let mp = phase.iter().sum::<f64>() / n;
    let sxy: f64 = rs.iter().zip(&phase).map(|(r, p)| (r - mr) * (p - mp)).sum();
    let sxx: f64 = rs.iter().map(|r| (r - mr).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (rs
        .iter()
        .zip(&phase)
        .map(|(r, p)| (p - mp - slope * (r - mr)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    RaySlope {
        direction,
        slope: Some(slope),
        local,
        rms,
        masked: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixConfig {
    pub extrapolation: ExtrapolationConfig,
    pub max_iter: usize,
    /// Target for `|θ(ζ̂) − θ_target|`.
    pub tol: f64,
    /// Converged initial directions farther apart than this are distinct.
    pub distinct_tol: f64,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        ParametrixConfig {
            extrapolation: ExtrapolationConfig::default(),
            max_iter: 40,
            tol: 1e-10,
            distinct_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametrixSample {
    pub theta: Vec<f64>,
    /// Initial direction at `w` of the geodesic reaching `θ`.
    pub zeta_hat: Vec<f64>,
    /// `S(w, θ)`, the sojourn time `λ` of that geodesic.
    pub s: f64,
    /// Radial phase slope `S/t` of the parametrix `e^{irS/t}`.
    pub phase: f64,
    pub mu: Vec<f64>,
}

/// Shoot from `w` for the geodesic with asymptotic direction `θ`.
pub fn match_direction(
    spec: &MetricSpec,
    w: &[f64],
    theta: &[f64],
    cfg: &ParametrixConfig,
) -> Result<(Vec<f64>, SojournPoint)> {
    let n = spec.dim;
    if theta.len() != n {
        return Err(Error::Domain("θ has the wrong dimension".into()));
    }
    let nt: f64 = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let theta: Vec<f64> = theta.iter().map(|x| x / nt).collect();
    if n == 1 {
        let p = sojourn::sojourn_forward(spec, w, &theta, &cfg.extrapolation)?;
        return Ok((theta, p));
    }
    let mut found: Vec<(Vec<f64>, SojournPoint)> = Vec::new();
    let mut last_err = None;
    for guess in starting_directions(&theta) {
        match newton_direction(spec, w, &theta, guess, cfg) {
            Ok((d, p)) => {
                let dup = found.iter().any(|(e, _)| {
                    e.iter().zip(&d).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < cfg.distinct_tol
                });
                if !dup {
                    found.push((d, p));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        0 => Err(Error::OutsideShootingDomain(format!(
            "no geodesic from w reaches θ = {theta:?}{}",
            last_err.map(|e| format!(" ({e})")).unwrap_or_default()
        ))),
        k => Err(Error::OutsideShootingDomain(format!(
            "{k} distinct geodesics from w reach θ = {theta:?}"
        ))),
    }
}

fn starting_directions(theta: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![theta.to_vec()];
    for t in sojourn::tangent_basis(theta) {
        for s in [0.6, -0.6] {
            let v: Vec<f64> = theta.iter().zip(&t).map(|(a, b)| a + s * b).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push(v.iter().map(|x| x / nv).collect());
        }
    }
    out
}

fn newton_direction(
    spec: &MetricSpec,
    w: &[f64],
    target: &[f64],
    mut d: Vec<f64>,
    cfg: &ParametrixConfig,
) -> Result<(Vec<f64>, SojournPoint)> {
    let n = spec.dim;
    for _ in 0..cfg.max_iter {
        let sj = sojourn::sojourn_forward_jacobian(spec, w, &d, &cfg.extrapolation)?;
        let f = DVector::from_iterator(n, sj.point.theta.iter().zip(target).map(|(a, b)| a - b));
        if f.norm() < cfg.tol {
            return Ok((d, sj.point));
        }
        let tangents = sojourn::tangent_basis(&d);
        let dirs = sojourn::direction_variations(spec, w, &d, sj.unit_factor, &tangents)?;
        let jt = DMatrix::from_columns(&dirs.iter().map(|v| &sj.d_theta * v).collect::<Vec<_>>());
        let rhs = -(jt.transpose() * &f);
        let normal = jt.transpose() * &jt;
        let delta = normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::OutsideShootingDomain("singular direction Jacobian".into()))?;
        let scale = (0.5 / delta.norm()).min(1.0);
        let mut next = d.clone();
        for (j, t) in tangents.iter().enumerate() {
            for a in 0..n {
                next[a] += scale * delta[j] * t[a];
            }
        }
        let nn = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        d = next.iter().map(|x| x / nn).collect();
    }
    Err(Error::OutsideShootingDomain("direction matching did not converge".into()))
}

/// Parametrix phase slopes `S(w, θ)/t` for a batch of asymptotic directions.
pub fn parametrix_phase(
    spec: &MetricSpec,
    w: &[f64],
    t: f64,
    thetas: &[Vec<f64>],
    cfg: &ParametrixConfig,
) -> Result<Vec<Result<ParametrixSample>>> {
    parametrix_phase_with(Exec::default(), spec, w, t, thetas, cfg)
}

pub fn parametrix_phase_with(
    exec: Exec,
    spec: &MetricSpec,
    w: &[f64],
    t: f64,
    thetas: &[Vec<f64>],
    cfg: &ParametrixConfig,
) -> Result<Vec<Result<ParametrixSample>>> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("parametrix needs finite t ≠ 0, got {t}")));
    }
    if !spec.is_short_range() {
        return Err(Error::Config("parametrix phase needs a short-range metric".into()));
    }
    Ok(par::map(exec, thetas, |theta| {
        let (zeta_hat, p) = match_direction(spec, w, theta, cfg)?;
        Ok(ParametrixSample {
            theta: p.theta.clone(),
            zeta_hat,
            s: p.lambda,
            phase: p.lambda / t,
            mu: p.mu,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_branch_and_modulus() {
        let k = euclid_kernel(-1.0, &[0.7], &[0.0]).unwrap();
        let want = Complex64::new(0.0, -2.0 * PI).powf(-0.5) * Complex64::from_polar(1.0, -0.245);
        assert!((k - want).norm() < 1e-15);
        let k2 = euclid_kernel(0.3, &[1.0, 2.0], &[-1.0, 0.5]).unwrap();
        assert!((k2.norm() - 1.0 / (2.0 * PI * 0.3)).abs() < 1e-14);
        assert!(euclid_kernel(0.0, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(2, 8, 4.0).unwrap();
        assert_eq!(g.coord(4), 0.0);
        assert_eq!(g.point(4 * 8 + 5), [0.0, 0.5]);
        assert_eq!(g.nearest(0.49), 5);
        assert!((g.wavenumber(7) + 2.0 * PI / 4.0).abs() < 1e-15);
        assert!(Grid::new(3, 8, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
    }

    #[test]
    fn lattice_directions_are_primitive() {
        let d = lattice_directions(2);
        assert_eq!(d.len(), 16);
        assert_eq!(d[0], [1, 0]);
    }

    #[test]
    fn gauge_tag_composes() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        let f = Field::from_fn(g, 0.0, |z| Complex64::new(z[0], 1.0));
        let a = gauge(&f, 0.5, 0.0);
        assert_eq!(a.gauge, Gauge::Applied { alpha: 0.5, m: 0.0 });
        let b = gauge(&a, -0.5, 0.0);
        assert_eq!(b.gauge, Gauge::None);
        assert!(b.max_diff(&f) < 1e-15);
        let (_, masked) = gauge_masked(&f, 1.0, 1.0);
        assert_eq!(masked, vec![8]);
    }
}
