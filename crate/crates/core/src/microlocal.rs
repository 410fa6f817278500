//! Numerical wavefront sets: WF, WF_sc and WF_qsc.
//!
//! Detection is a windowed-spectrum decay test. Around each lattice point
//! the field is multiplied by a Gaussian window, transformed, and the peak
//! magnitude in each dyadic band of each direction cone is fitted against
//! the band centre on a log-log scale. A cone whose fitted decay order stays
//! below `k_smooth` and whose top band carries a non-negligible amplitude is
//! reported. Every report is a statement at the stated resolution only.
//!
//! Scattering points are written `(ẑ, ζ)`, meaning "oscillates like
//! `e^{iζ·z}` towards `ẑ∞`". They are found by running the same detector on
//! the Fourier transform, where such behaviour appears at position `ζ` with
//! frequency direction `-ẑ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{self, EvolveConfig, Field, Grid, Spectral};
use crate::geometry::{smooth_step, MetricSpec, PotentialSpec};
use crate::par::{self, Exec};
use crate::sojourn::{self, ExtrapolationConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub min: f64,
    pub max: f64,
    pub spacing: f64,
}

impl LatticeSpec {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.spacing + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.min + k as f64 * self.spacing).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborConfig {
    /// Gaussian window width.
    pub sigma: f64,
    /// Per-axis sample lattice for window centres.
    pub lattice: LatticeSpec,
    /// Number of direction cones in 2D; 1D always uses `±1`.
    pub directions: usize,
    /// Dyadic bands `[lo, hi)` of angular frequency used for the decay fit.
    pub bands: Vec<(f64, f64)>,
    pub k_smooth: f64,
    /// Minimum top-band amplitude relative to `‖u‖_∞ (σ√2π)^dim`.
    pub abs_floor: f64,
    /// Minimum top-band amplitude relative to the strongest cone.
    pub rel_floor: f64,
}

impl GaborConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let h = grid.h();
        if !(self.sigma >= 4.0 * h) {
            return Err(Error::Config(format!(
                "window σ = {} is below four grid cells ({})",
                self.sigma,
                4.0 * h
            )));
        }
        if !(self.sigma < grid.extent / 4.0) {
            return Err(Error::Config("window σ must be well inside the domain".into()));
        }
        if !(self.k_smooth >= 4.0) {
            return Err(Error::Config("k_smooth must be at least 4".into()));
        }
        if self.bands.len() < 2 {
            return Err(Error::Config("at least two frequency bands are needed".into()));
        }
        let nyquist = PI / h;
        for &(lo, hi) in &self.bands {
            if !(lo > 0.0 && hi > lo && hi <= nyquist * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "band [{lo}, {hi}) must satisfy 0 < lo < hi ≤ π/h = {nyquist}"
                )));
            }
        }
        if !(self.lattice.spacing > 0.0 && self.lattice.max >= self.lattice.min) {
            return Err(Error::Config("empty lattice".into()));
        }
        if grid.dim == 2 && self.directions < 4 {
            return Err(Error::Config("2D detection needs at least four directions".into()));
        }
        Ok(())
    }

    fn direction_vectors(&self, dim: usize) -> Vec<Vec<f64>> {
        if dim == 1 {
            vec![vec![1.0], vec![-1.0]]
        } else {
            (0..self.directions)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / self.directions as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
    }

    /// Lattice spacing in angle (2D) or `2` (1D, the two directions).
    pub fn angular_cell(&self, dim: usize) -> f64 {
        if dim == 1 {
            2.0
        } else {
            2.0 * PI / self.directions as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavefrontKind {
    Wf,
    Sc,
    Qsc,
}

/// A detected point. For WF, `base = z` and `fiber = ζ̂`; for WF_sc and
/// WF_qsc, `base = ẑ` and `fiber = ζ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedPoint {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
    /// Fitted polynomial decay order of the windowed spectrum.
    pub order: f64,
    /// Top-band amplitude relative to `‖u‖_∞ (σ√2π)^dim`.
    pub amplitude: f64,
}

/// Every tested (window centre, cone) pair, in lattice order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
    pub order: f64,
    pub band_amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavefrontReport {
    pub kind: WavefrontKind,
    pub label: String,
    pub points: Vec<DetectedPoint>,
    pub samples: Vec<ConeSample>,
    pub config: GaborConfig,
    /// Strongest top-band amplitude over all cones (absolute).
    pub global_max: f64,
}

impl WavefrontReport {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct PatchLayout {
    p: usize,
    /// `(cone, band)` per FFT bin of the patch.
    bins: Vec<Option<(usize, usize)>>,
    offsets: Vec<f64>,
}

fn patch_layout(grid: &Grid, cfg: &GaborConfig) -> PatchLayout {
    let h = grid.h();
    let want = (12.0 * cfg.sigma / h).ceil().max(16.0) as usize;
    let p = want.next_power_of_two().min(grid.n);
    let kfreq = |j: usize| {
        let m = if j < p / 2 { j as f64 } else { j as f64 - p as f64 };
        2.0 * PI * m / (p as f64 * h)
    };
    let band_of = |k: f64| cfg.bands.iter().position(|&(lo, hi)| k >= lo && k < hi);
    let bins = if grid.dim == 1 {
        (0..p)
            .map(|j| {
                let k = kfreq(j);
                let cone = if k > 0.0 { 0 } else { 1 };
                band_of(k.abs()).map(|b| (cone, b)).filter(|_| k != 0.0)
            })
            .collect()
    } else {
        let nd = cfg.directions;
        (0..p * p)
            .map(|idx| {
                let (k0, k1) = (kfreq(idx / p), kfreq(idx % p));
                let r = (k0 * k0 + k1 * k1).sqrt();
                if r == 0.0 {
                    return None;
                }
                let a = k1.atan2(k0);
                let cone = ((a / (2.0 * PI / nd as f64)).round() as i64).rem_euclid(nd as i64) as usize;
                band_of(r).map(|b| (cone, b))
            })
            .collect()
    };
    let offsets = (0..p).map(|m| m as f64 - (p / 2) as f64).collect();
    PatchLayout { p, bins, offsets }
}

fn lattice_centers(dim: usize, cfg: &GaborConfig) -> Vec<Vec<f64>> {
    let pts = cfg.lattice.points();
    if dim == 1 {
        pts.into_iter().map(|x| vec![x]).collect()
    } else {
        let mut out = Vec::with_capacity(pts.len() * pts.len());
        for &a in &pts {
            for &b in &pts {
                out.push(vec![a, b]);
            }
        }
        out
    }
}

/// Peak windowed-spectrum magnitude per `(cone, band)` at one centre.
fn cone_spectrum(
    psi: &Field,
    center: &[f64],
    layout: &PatchLayout,
    sp: &Spectral,
    cfg: &GaborConfig,
) -> Vec<Vec<f64>> {
    let grid = &psi.grid;
    let h = grid.h();
    let n = grid.n as i64;
    let p = layout.p;
    let s2 = 2.0 * cfg.sigma * cfg.sigma;
    let j0: Vec<i64> = center.iter().map(|&c| grid.nearest(c) as i64).collect();
    // exact offset of patch sample m from the centre along axis a
    let off = |a: usize, m: usize| {
        let j = j0[a] + layout.offsets[m] as i64;
        let x = -0.5 * grid.extent + j as f64 * h;
        let d = x - center[a];
        (j.rem_euclid(n) as usize, d)
    };
    let mut seg = vec![Complex64::new(0.0, 0.0); p.pow(grid.dim as u32)];
    if grid.dim == 1 {
        for m in 0..p {
            let (j, d) = off(0, m);
            seg[m] = psi.data[j] * (-d * d / s2).exp();
        }
    } else {
        let ax1: Vec<(usize, f64)> = (0..p).map(|m| off(1, m)).collect();
        for m0 in 0..p {
            let (j, d) = off(0, m0);
            let w0 = (-d * d / s2).exp();
            for (m1, &(k, e)) in ax1.iter().enumerate() {
                seg[m0 * p + m1] = psi.data[j * grid.n + k] * (w0 * (-e * e / s2).exp());
            }
        }
    }
    sp.forward(Exec::Sequential, grid.dim, &mut seg);
    let ncones = if grid.dim == 1 { 2 } else { cfg.directions };
    let scale = h.powi(grid.dim as i32);
    let mut amp = vec![vec![0.0; cfg.bands.len()]; ncones];
    for (v, bin) in seg.iter().zip(&layout.bins) {
        if let Some((c, b)) = *bin {
            let a = v.norm() * scale;
            if a > amp[c][b] {
                amp[c][b] = a;
            }
        }
    }
    amp
}

fn decay_order(amps: &[f64], reference: f64, bands: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = bands.iter().map(|&(lo, hi)| 0.5 * (lo * hi).ln()).collect();
    let ys: Vec<f64> = amps.iter().map(|a| (a / reference).max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}

/// Classical wavefront set `(z, ζ̂)` of a sampled field.
pub fn detect_wf(psi: &Field, cfg: &GaborConfig) -> Result<WavefrontReport> {
    detect_wf_with(Exec::default(), psi, cfg)
}

pub fn detect_wf_with(exec: Exec, psi: &Field, cfg: &GaborConfig) -> Result<WavefrontReport> {
    let grid = psi.grid;
    cfg.validate(&grid)?;
    let layout = patch_layout(&grid, cfg);
    let sp = Spectral::new(layout.p);
    let centers = lattice_centers(grid.dim, cfg);
    let spectra = par::map(exec, &centers, |c| cone_spectrum(psi, c, &layout, &sp, cfg));
    let dirs = cfg.direction_vectors(grid.dim);
    let reference = psi.max_abs() * (cfg.sigma * (2.0 * PI).sqrt()).powi(grid.dim as i32);
    let top = cfg.bands.len() - 1;
    let global_max = spectra
        .iter()
        .flat_map(|s| s.iter().map(|a| a[top]))
        .fold(0.0f64, f64::max);
    let mut samples = Vec::new();
    let mut points = Vec::new();
    for (c, spec) in centers.iter().zip(&spectra) {
        for (d, amps) in dirs.iter().zip(spec) {
            let order = if reference > 0.0 {
                decay_order(amps, reference, &cfg.bands)
            } else {
                f64::INFINITY
            };
            let rel_top = if reference > 0.0 { amps[top] / reference } else { 0.0 };
            if order < cfg.k_smooth
                && rel_top >= cfg.abs_floor
                && amps[top] >= cfg.rel_floor * global_max
            {
                points.push(DetectedPoint {
                    base: c.clone(),
                    fiber: d.clone(),
                    order,
                    amplitude: rel_top,
                });
            }
            samples.push(ConeSample {
                center: c.clone(),
                direction: d.clone(),
                order,
                band_amplitudes: amps.iter().map(|a| a / reference.max(f64::MIN_POSITIVE)).collect(),
            });
        }
    }
    Ok(WavefrontReport {
        kind: WavefrontKind::Wf,
        label: resolution_label(cfg),
        points,
        samples,
        config: cfg.clone(),
        global_max,
    })
}

fn resolution_label(cfg: &GaborConfig) -> String {
    format!(
        "numerical wavefront at resolution σ = {}, bands = {:?}, k_smooth = {}",
        cfg.sigma, cfg.bands, cfg.k_smooth
    )
}

/// `F u(ζ) = ∫ u(z) e^{-iζ·z} dz` on the dual grid: `N` points per axis,
/// spacing `2π/L`, centred at `ζ = 0`.
pub fn fourier_field(psi: &Field) -> Field {
    fourier_field_with(Exec::default(), psi)
}

pub fn fourier_field_with(exec: Exec, psi: &Field) -> Field {
    let g = psi.grid;
    let n = g.n;
    let sp = Spectral::new(n);
    let mut data = psi.data.clone();
    sp.forward(exec, g.dim, &mut data);
    let dual = Grid {
        dim: g.dim,
        n,
        extent: 2.0 * PI * n as f64 / g.extent,
    };
    let scale = g.cell_volume();
    let half = 0.5 * g.extent;
    let shifted = |j: usize| (j + n / 2) % n;
    let mut out = Field::zeros(dual);
    out.t = psi.t;
    for idx in 0..dual.len() {
        let z = dual.point(idx);
        let src = if g.dim == 1 {
            shifted(idx)
        } else {
            shifted(idx / n) * n + shifted(idx % n)
        };
        let phase = half * (z[0] + z[1]);
        out.data[idx] = data[src] * Complex64::from_polar(scale, phase);
    }
    out
}

fn to_scattering(mut report: WavefrontReport, kind: WavefrontKind) -> WavefrontReport {
    report.kind = kind;
    for p in &mut report.points {
        let freq = std::mem::take(&mut p.base);
        p.base = p.fiber.iter().map(|x| -x).collect();
        p.fiber = freq;
    }
    report
}

/// Scattering wavefront set at finite frequency, `(ẑ, ζ)`. The config is
/// read in dual coordinates: the lattice samples `ζ`, the window width is a
/// frequency width, and the bands are conjugate to position.
pub fn detect_scwf(psi: &Field, cfg: &GaborConfig) -> Result<WavefrontReport> {
    detect_scwf_with(Exec::default(), psi, cfg)
}

pub fn detect_scwf_with(exec: Exec, psi: &Field, cfg: &GaborConfig) -> Result<WavefrontReport> {
    let f = fourier_field_with(exec, psi);
    Ok(to_scattering(detect_wf_with(exec, &f, cfg)?, WavefrontKind::Sc))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QscConfig {
    /// Points per axis of the resampled field.
    pub n: usize,
    /// Extent of the resampled box; `2(L/2)²` covers the source box.
    pub extent: f64,
    /// The source is tapered to zero between these radii.
    pub window: (f64, f64),
    /// Resampled values with `|z| < mask_cells·h̃` are zeroed, with a smooth
    /// ramp up to twice that radius.
    pub mask_cells: f64,
    /// FFT upsampling factor for the 2D interpolant.
    pub upsample: usize,
    pub gabor: GaborConfig,
}

/// Trigonometric interpolant of periodic 1D samples, evaluated off-grid.
pub fn trig_interpolate(psi: &Field, ys: &[f64], exec: Exec) -> Vec<Complex64> {
    let g = psi.grid;
    let n = g.n;
    let sp = Spectral::new(n);
    let mut coef = psi.data.clone();
    sp.forward(exec, 1, &mut coef);
    let inv_n = 1.0 / n as f64;
    let dk = 2.0 * PI / g.extent;
    par::map(exec, ys, |&y| {
        let s = y + 0.5 * g.extent;
        let step = Complex64::from_polar(1.0, dk * s);
        let mut acc = coef[0];
        let mut pos = Complex64::new(1.0, 0.0);
        for k in 1..n / 2 {
            pos *= step;
            acc += coef[k] * pos + coef[n - k] * pos.conj();
        }
        pos *= step;
        acc += coef[n / 2] * pos.re;
        acc * inv_n
    })
}

/// Catmull-Rom interpolation on a periodic square grid.
fn bicubic(data: &[Complex64], n: usize, x0: f64, x1: f64) -> Complex64 {
    let w = |t: f64| {
        [
            0.5 * (-t * t * t + 2.0 * t * t - t),
            0.5 * (3.0 * t * t * t - 5.0 * t * t + 2.0),
            0.5 * (-3.0 * t * t * t + 4.0 * t * t + t),
            0.5 * (t * t * t - t * t),
        ]
    };
    let (f0, f1) = (x0.floor(), x1.floor());
    let (w0, w1) = (w(x0 - f0), w(x1 - f1));
    let ni = n as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, wa) in w0.iter().enumerate() {
        let i = (f0 as i64 + a as i64 - 1).rem_euclid(ni) as usize;
        for (b, wb) in w1.iter().enumerate() {
            let j = (f1 as i64 + b as i64 - 1).rem_euclid(ni) as usize;
            acc += data[i * n + j] * (wa * wb);
        }
    }
    acc
}

fn upsample_2d(psi: &Field, factor: usize, exec: Exec) -> Vec<Complex64> {
    let n = psi.grid.n;
    let m = n * factor;
    let mut coef = psi.data.clone();
    Spectral::new(n).forward(exec, 2, &mut coef);
    let mut big = vec![Complex64::new(0.0, 0.0); m * m];
    let map = |k: usize| if k < n / 2 { k } else { k + m - n };
    for k0 in 0..n {
        for k1 in 0..n {
            big[map(k0) * m + map(k1)] = coef[k0 * n + k1];
        }
    }
    Spectral::new(m).inverse(exec, 2, &mut big);
    let s = (factor * factor) as f64;
    for v in &mut big {
        *v *= s;
    }
    big
}

/// `ũ(z) = u(z/√|z|)` on the resampling grid, windowed and masked near 0.
pub fn qsc_resample(psi: &Field, cfg: &QscConfig) -> Result<Field> {
    qsc_resample_with(Exec::default(), psi, cfg)
}

pub fn qsc_resample_with(exec: Exec, psi: &Field, cfg: &QscConfig) -> Result<Field> {
    let grid = Grid::new(psi.grid.dim, cfg.n, cfg.extent)?;
    let (r0, r1) = cfg.window;
    if !(r0 > 0.0 && r1 > r0 && r1 <= 0.5 * psi.grid.extent) {
        return Err(Error::Config(format!(
            "source window ({r0}, {r1}) must satisfy 0 < r0 < r1 ≤ L/2"
        )));
    }
    if !(cfg.mask_cells > 0.0) {
        return Err(Error::Config("mask radius must be positive".into()));
    }
    let hm = cfg.mask_cells * grid.h();
    let weight = |z: &[f64]| {
        let rz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ry = rz.sqrt();
        smooth_step((r1 - ry) / (r1 - r0)) * smooth_step((rz - hm) / hm)
    };
    let source = |z: &[f64]| -> Vec<f64> {
        let rz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = if rz > 0.0 { 1.0 / rz.sqrt() } else { 0.0 };
        z.iter().map(|x| x * s).collect()
    };
    let mut out = Field::zeros(grid);
    out.t = psi.t;
    let idxs: Vec<usize> = (0..grid.len())
        .filter(|&i| weight(&grid.point(i)[..grid.dim]) > 0.0)
        .collect();
    if grid.dim == 1 {
        let ys: Vec<f64> = idxs.iter().map(|&i| source(&grid.point(i)[..1])[0]).collect();
        let vals = trig_interpolate(psi, &ys, exec);
        for (&i, v) in idxs.iter().zip(vals) {
            out.data[i] = v * weight(&grid.point(i)[..1]);
        }
    } else {
        let f = cfg.upsample.max(1);
        if psi.grid.n * f > 8192 {
            return Err(Error::Config("2D upsampled interpolant would exceed 8192² samples".into()));
        }
        let big = upsample_2d(psi, f, exec);
        let m = psi.grid.n * f;
        let hb = psi.grid.extent / m as f64;
        let half = 0.5 * psi.grid.extent;
        let vals = par::map(exec, &idxs, |&i| {
            let p = grid.point(i);
            let y = source(&p);
            bicubic(&big, m, (y[0] + half) / hb, (y[1] + half) / hb) * weight(&p)
        });
        for (&i, v) in idxs.iter().zip(vals) {
            out.data[i] = v;
        }
    }
    Ok(out)
}

/// Quadratic-scattering wavefront set, `WF_sc` of the resampled field.
pub fn detect_qscwf(psi: &Field, cfg: &QscConfig) -> Result<WavefrontReport> {
    detect_qscwf_with(Exec::default(), psi, cfg)
}

pub fn detect_qscwf_with(exec: Exec, psi: &Field, cfg: &QscConfig) -> Result<WavefrontReport> {
    let u = qsc_resample_with(exec, psi, cfg)?;
    let mut r = detect_scwf_with(exec, &u, &cfg.gabor)?;
    r.kind = WavefrontKind::Qsc;
    Ok(r)
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d.clamp(-1.0, 1.0).acos()
}

/// Scattering points agree "within one lattice cell": directions within one
/// angular cell, frequencies within one lattice spacing per axis.
pub fn sc_points_match(a: (&[f64], &[f64]), b: (&[f64], &[f64]), cfg: &GaborConfig) -> bool {
    let dim = a.0.len();
    let dir_ok = if dim == 1 {
        a.0[0] == b.0[0]
    } else {
        angle_between(a.0, b.0) <= cfg.angular_cell(dim) * (1.0 + 1e-9)
    };
    let tol = cfg.lattice.spacing * (1.0 + 1e-9);
    dir_ok && a.1.iter().zip(b.1).all(|(x, y)| (x - y).abs() <= tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetComparison {
    pub predicted: Vec<(Vec<f64>, Vec<f64>)>,
    pub detected: Vec<(Vec<f64>, Vec<f64>)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl SetComparison {
    fn build(predicted: Vec<(Vec<f64>, Vec<f64>)>, detected: Vec<(Vec<f64>, Vec<f64>)>, cfg: &GaborConfig) -> Self {
        let hit = |p: &(Vec<f64>, Vec<f64>), d: &(Vec<f64>, Vec<f64>)| {
            sc_points_match((&p.0, &p.1), (&d.0, &d.1), cfg)
        };
        let unmatched_predictions = (0..predicted.len())
            .filter(|&i| !detected.iter().any(|d| hit(&predicted[i], d)))
            .collect();
        let unmatched_detections = (0..detected.len())
            .filter(|&j| !predicted.iter().any(|p| hit(p, &detected[j])))
            .collect();
        SetComparison {
            predicted,
            detected,
            unmatched_predictions,
            unmatched_detections,
        }
    }

    pub fn consistent(&self) -> bool {
        self.unmatched_predictions.is_empty() && self.unmatched_detections.is_empty()
    }
}

fn sc_pairs(r: &WavefrontReport) -> Vec<(Vec<f64>, Vec<f64>)> {
    r.points.iter().map(|p| (p.base.clone(), p.fiber.clone())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub alpha: f64,
    pub original: WavefrontReport,
    pub gauged: WavefrontReport,
    /// Original points moved by `ξ ↦ ξ − αθ/2`, against the gauged points.
    pub comparison: SetComparison,
    pub passed: bool,
}

/// Gauge covariance of WF_qsc: `(θ, ξ)` for `u` corresponds to
/// `(θ, ξ − αθ/2)` for `e^{-iαr²/2}u`.
pub fn wf1_shift_check(psi: &Field, alpha: f64, cfg: &QscConfig) -> Result<ShiftReport> {
    let original = detect_qscwf(psi, cfg)?;
    let gauged = detect_qscwf(&evolve::gauge(psi, alpha, 0.0), cfg)?;
    let predicted = original
        .points
        .iter()
        .map(|p| {
            let xi = p.fiber.iter().zip(&p.base).map(|(x, t)| x - 0.5 * alpha * t).collect();
            (p.base.clone(), xi)
        })
        .collect();
    let comparison = SetComparison::build(predicted, sc_pairs(&gauged), &cfg.gabor);
    Ok(ShiftReport {
        alpha,
        passed: comparison.consistent(),
        original,
        gauged,
        comparison,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wf2Report {
    /// WF_sc points whose direction carries no `(θ, 0)` in WF_qsc.
    pub counterexamples: Vec<DetectedPoint>,
    pub sc_points: usize,
    pub qsc_points: usize,
}

/// One-directional check: a WF_sc point over `θ` at finite frequency
/// requires `(θ, 0)` in WF_qsc (within one lattice cell of the qsc config).
pub fn wf2_check(qsc: &WavefrontReport, sc: &WavefrontReport) -> Wf2Report {
    let counterexamples = sc
        .points
        .iter()
        .filter(|p| {
            let zero = vec![0.0; p.fiber.len()];
            !qsc.points.iter().any(|q| sc_points_match((&q.base, &q.fiber), (&p.base, &zero), &qsc.config))
        })
        .cloned()
        .collect();
    Wf2Report {
        counterexamples,
        sc_points: sc.points.len(),
        qsc_points: qsc.points.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub wf: GaborConfig,
    pub scwf: GaborConfig,
    pub evolve: EvolveConfig,
    pub extrapolation: ExtrapolationConfig,
}

pub struct PropagationScenario {
    /// Data at time stamp `0`.
    pub psi0: Field,
    pub potential: PotentialSpec,
    pub t0: f64,
    pub times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentAtResolution,
    Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeComparison {
    pub t: f64,
    /// `forward` uses `S_f` (`t > t₀`), `backward` uses `S_b`.
    pub relation: String,
    pub sources: Vec<(Vec<f64>, Vec<f64>)>,
    pub comparison: SetComparison,
    pub scwf: WavefrontReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub t0: f64,
    pub wf_t0: WavefrontReport,
    pub times: Vec<TimeComparison>,
    pub unmatched_predictions: usize,
    pub unmatched_detections: usize,
    pub verdict: Verdict,
}

/// Round trip between `WF(ψ(t₀))` and `WF_sc` of the gauged `ψ(t)`.
///
/// For `t > t₀` a point `(z, ζ̂)` predicts `(θ, ξ/(t−t₀))` with
/// `(θ, ξ) = S_f(z, ζ̂)`, in `WF_sc(e^{-ir²/2(t−t₀)} ψ(t))`; for `t < t₀` the
/// same with `S_b` and `|t − t₀|`. The sojourn relations are computed
/// numerically on the flat metric.
pub fn propagation_check(scenario: &PropagationScenario, cfg: &PropagationConfig) -> Result<PropagationReport> {
    let grid = scenario.psi0.grid;
    let flat = MetricSpec::flat(grid.dim);
    let at_t0 = evolve::split_step(&scenario.psi0, &scenario.potential, scenario.t0, &cfg.evolve)?;
    let wf_t0 = detect_wf(&at_t0, &cfg.wf)?;
    let sources: Vec<(Vec<f64>, Vec<f64>)> = wf_t0.points.iter().map(|p| (p.base.clone(), p.fiber.clone())).collect();
    let mut times = Vec::new();
    for &t in &scenario.times {
        let tau = t - scenario.t0;
        if tau == 0.0 {
            return Err(Error::Config("comparison time equals t₀".into()));
        }
        let at_t = evolve::split_step(&at_t0, &scenario.potential, tau, &cfg.evolve)?;
        let u = evolve::gauge(&at_t, 1.0 / tau, 0.0);
        let scwf = detect_scwf(&u, &cfg.scwf)?;
        let mut predicted = Vec::new();
        for (z, d) in &sources {
            let s = if tau > 0.0 {
                sojourn::sojourn_forward(&flat, z, d, &cfg.extrapolation)?
            } else {
                sojourn::sojourn_backward(&flat, z, d, &cfg.extrapolation)?
            };
            predicted.push((s.theta.clone(), s.xi.iter().map(|x| x / tau.abs()).collect()));
        }
        times.push(TimeComparison {
            t,
            relation: if tau > 0.0 { "forward" } else { "backward" }.into(),
            sources: sources.clone(),
            comparison: SetComparison::build(predicted, sc_pairs(&scwf), &cfg.scwf),
            scwf,
        });
    }
    let unmatched_predictions = times.iter().map(|t| t.comparison.unmatched_predictions.len()).sum();
    let unmatched_detections = times.iter().map(|t| t.comparison.unmatched_detections.len()).sum();
    let verdict = if unmatched_predictions + unmatched_detections == 0 {
        Verdict::ConsistentAtResolution
    } else {
        Verdict::Violation
    };
    Ok(PropagationReport {
        t0: scenario.t0,
        wf_t0,
        times,
        unmatched_predictions,
        unmatched_detections,
        verdict,
    })
}
