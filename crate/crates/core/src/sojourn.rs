//! Sojourn relations `S_f`, `S_b` and the contact-form check.
//!
//! Along a unit-speed geodesic the limits
//!
//! ```text
//! θ = lim γ/|γ|,   λ = lim (s − r̃(γ(s))),   μ = lim (|γ| θ − γ),   ξ = λθ + μ
//! ```
//!
//! are taken by recording the state at geometric checkpoint radii and
//! Richardson-extrapolating in `x = 1/R` (the corrections are `O(1/R)`).
//! `θ` is read off the momentum direction `ζ/|ζ|`, which is exact once the
//! geodesic has left a compact perturbation and has the same limit as
//! `γ/|γ|` in general. `r̃ = r + (m/2) log r` removes the logarithmic
//! divergence of the long-range family and reduces to `r` when `m = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{run, Checkpoint, IntegratorConfig, PhasePoint, RunPlan, Termination};
use crate::geometry::MetricSpec;
use crate::par::{self, Exec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtrapolationConfig {
    /// Checkpoint radii, strictly increasing, all beyond the perturbation.
    pub radii: Vec<f64>,
    /// Degree of the extrapolating polynomial in `1/R`; uses the last
    /// `order + 1` checkpoints.
    pub order: usize,
    /// Accepted range for the fitted decay exponent of `λ(R) − λ`.
    pub exponent_range: (f64, f64),
    pub integrator: IntegratorConfig,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        ExtrapolationConfig {
            radii: geometric_radii(2.0, 4.0, 5),
            order: 3,
            exponent_range: (0.5, 1.5),
            integrator: IntegratorConfig {
                s_max: 1e6,
                r_escape: 50.0,
                ..Default::default()
            },
        }
    }
}

/// `count` radii `10^a … 10^b`, equally spaced in the exponent.
pub fn geometric_radii(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1).max(1) as f64))
        .collect()
}

impl ExtrapolationConfig {
    pub fn validate(&self, spec: &MetricSpec) -> Result<()> {
        if self.radii.len() < 3 {
            return Err(Error::Config("at least three checkpoint radii are required".into()));
        }
        if self.radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("checkpoint radii must be strictly increasing".into()));
        }
        if let Some(r) = spec.support_radius() {
            if !(self.radii[0] > r) {
                return Err(Error::Config(format!(
                    "checkpoint radii must exceed the perturbation radius {r}"
                )));
            }
        }
        if self.order == 0 || self.order + 1 > self.radii.len() {
            return Err(Error::Config(format!(
                "Richardson order {} needs between 2 and {} checkpoints",
                self.order,
                self.radii.len()
            )));
        }
        let (lo, hi) = self.exponent_range;
        if !(lo < hi) {
            return Err(Error::Config("empty exponent range".into()));
        }
        Ok(())
    }

    /// Same configuration with the largest radius doubled.
    pub fn with_last_radius_doubled(&self) -> ExtrapolationConfig {
        let mut c = self.clone();
        let last = c.radii.len() - 1;
        c.radii[last] *= 2.0;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournDiagnostics {
    /// Slope `p` of `|λ(R) − λ| ~ R^{-p}`; `None` when every checkpoint is
    /// already at the limit to rounding.
    pub decay_exponent: Option<f64>,
    /// Difference between the order-`p` and order-`p−1` extrapolations.
    pub residual: f64,
    /// `|μ·θ|` before the projection onto `θ^⊥`.
    pub mu_theta_violation: f64,
    /// Angle between the extrapolated `ζ/|ζ|` and `γ/|γ|` directions.
    pub direction_mismatch: f64,
    /// Set for long-range runs, where `λ` depends on the `r̃` convention.
    pub convention_dependent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournPoint {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub xi: Vec<f64>,
    /// `Σ = −λ`, the constant in `r(γ(s)) = s + Σ + O(1/s)`.
    pub sigma: f64,
    pub diagnostics: SojournDiagnostics,
}

impl SojournPoint {
    fn assemble(theta: Vec<f64>, lambda: f64, mu: Vec<f64>, diagnostics: SojournDiagnostics) -> Self {
        let xi = theta.iter().zip(&mu).map(|(t, m)| lambda * t + m).collect();
        SojournPoint {
            theta,
            lambda,
            mu,
            xi,
            sigma: -lambda,
            diagnostics,
        }
    }
}

/// Lagrange weights `w_k` with `P(0) = Σ w_k q_k` for the polynomial through
/// `(x_k, q_k)`.
pub fn richardson_weights(xs: &[f64]) -> Vec<f64> {
    (0..xs.len())
        .map(|k| {
            xs.iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &xj)| xj / (xj - xs[k]))
                .product()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Raw {
    cps: Vec<Checkpoint>,
    /// Arclength `s·|ζ|_g` at each checkpoint. Rescaling by the speed
    /// removes the linear-in-`s` drift an `O(rtol)` speed error picked up
    /// inside the perturbation would otherwise add to `λ`.
    lengths: Vec<f64>,
    start: PhasePoint,
    c: f64,
}

fn integrate_checkpoints(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
    jac: bool,
) -> Result<Raw> {
    spec.validate()?;
    cfg.validate(spec)?;
    if z.len() != spec.dim || zeta_hat.len() != spec.dim {
        return Err(Error::Domain("sample dimension mismatch".into()));
    }
    let nz = norm(zeta_hat);
    if !((nz - 1.0).abs() < 1e-9) {
        return Err(Error::Domain(format!("ζ̂ must be a unit vector (|ζ̂| = {nz})")));
    }
    if !(norm(z) < cfg.radii[0]) {
        return Err(Error::Config("start lies beyond the first checkpoint radius".into()));
    }
    let (zeta, c) = spec.unit_covector(z, zeta_hat)?;
    let start = PhasePoint::new(z.to_vec(), zeta);
    let plan = RunPlan {
        jac,
        s_end: cfg.integrator.s_max,
        stop_radius: None,
        escape_radius: None,
        checkpoints: &cfg.radii,
        keep_path: false,
    };
    let out = run(spec, &start, &cfg.integrator, &plan)?;
    if out.path.termination != Termination::Checkpoints {
        return Err(Error::NotEscaped {
            s_max: cfg.integrator.s_max,
            radius: norm(out.path.z.last().unwrap()),
        });
    }
    let lengths = out
        .checkpoints
        .iter()
        .map(|cp| Ok(cp.s * (2.0 * spec.hamiltonian(&cp.z, &cp.zeta)?).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Raw {
        lengths,
        cps: out.checkpoints,
        start,
        c,
    })
}

fn r_tilde(r: f64, m: f64) -> f64 {
    if m == 0.0 {
        r
    } else {
        r + 0.5 * m * r.ln()
    }
}

/// Extrapolated limit, lower-order companion and decay exponent of a scalar
/// checkpoint sequence.
struct ScalarLimit {
    value: f64,
    residual: f64,
    exponent: Option<f64>,
}

fn noise_floor(cfg: &ExtrapolationConfig, r: f64) -> f64 {
    100.0 * (cfg.integrator.atol + cfg.integrator.rtol) + 1024.0 * f64::EPSILON * r
}

fn scalar_limit(rs: &[f64], qs: &[f64], cfg: &ExtrapolationConfig) -> ScalarLimit {
    let p = cfg.order;
    let k = rs.len();
    let xs: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
    let w_hi = richardson_weights(&xs[k - p - 1..]);
    let w_lo = richardson_weights(&xs[k - p..]);
    let value: f64 = w_hi.iter().zip(&qs[k - p - 1..]).map(|(w, q)| w * q).sum();
    let lower: f64 = w_lo.iter().zip(&qs[k - p..]).map(|(w, q)| w * q).sum();
    let pts: Vec<(f64, f64)> = rs
        .iter()
        .zip(qs)
        .filter_map(|(&r, &q)| {
            let d = (q - value).abs();
            (d > noise_floor(cfg, r)).then(|| (r.ln(), d.ln()))
        })
        .collect();
    let exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    });
    ScalarLimit {
        value,
        residual: (value - lower).abs(),
        exponent,
    }
}

struct Limits {
    point: SojournPoint,
    raw_lambda: Vec<f64>,
    weights: Vec<f64>,
    rs: Vec<f64>,
}

fn limits(raw: &Raw, m: f64, cfg: &ExtrapolationConfig, long_range: bool) -> Limits {
    let n = raw.start.z.len();
    let rs: Vec<f64> = raw.cps.iter().map(|c| norm(&c.z)).collect();
    let k = rs.len();
    let p = cfg.order;
    let xs: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
    let weights = richardson_weights(&xs[k - p - 1..]);
    let w_lo = richardson_weights(&xs[k - p..]);

    let extrap = |w: &[f64], f: &dyn Fn(&Checkpoint) -> Vec<f64>, from: usize| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (wk, cp) in w.iter().zip(&raw.cps[from..]) {
            for (o, v) in out.iter_mut().zip(f(cp)) {
                *o += wk * v;
            }
        }
        out
    };
    let mom_dir = |cp: &Checkpoint| {
        let nz = norm(&cp.zeta);
        cp.zeta.iter().map(|x| x / nz).collect::<Vec<_>>()
    };
    let pos_dir = |cp: &Checkpoint| {
        let nz = norm(&cp.z);
        cp.z.iter().map(|x| x / nz).collect::<Vec<_>>()
    };
    let th_raw = extrap(&weights, &mom_dir, k - p - 1);
    let th_lo = extrap(&w_lo, &mom_dir, k - p);
    let th_n = norm(&th_raw);
    let theta: Vec<f64> = th_raw.iter().map(|x| x / th_n).collect();
    let pos_raw = extrap(&weights, &pos_dir, k - p - 1);
    let pos_n = norm(&pos_raw);
    let direction_mismatch = norm(
        &theta
            .iter()
            .zip(&pos_raw)
            .map(|(a, b)| a - b / pos_n)
            .collect::<Vec<_>>(),
    );

    let raw_lambda: Vec<f64> = raw
        .lengths
        .iter()
        .zip(&rs)
        .map(|(l, &r)| l - r_tilde(r, m))
        .collect();
    let lam = scalar_limit(&rs, &raw_lambda, cfg);

    let mu_of = |cp: &Checkpoint| {
        let r = norm(&cp.z);
        theta.iter().zip(&cp.z).map(|(t, z)| r * t - z).collect::<Vec<_>>()
    };
    let mu_raw = extrap(&weights, &mu_of, k - p - 1);
    let mu_lo = extrap(&w_lo, &mu_of, k - p);
    let along = dot(&mu_raw, &theta);
    let mu: Vec<f64> = mu_raw.iter().zip(&theta).map(|(m, t)| m - along * t).collect();

    // μ·θ vanishes in the limit, so its extrapolated value is itself an
    // error estimate.
    let mut residual = lam.residual.max(along.abs());
    for i in 0..n {
        residual = residual
            .max((th_raw[i] / th_n - th_lo[i] / norm(&th_lo)).abs())
            .max((mu_raw[i] - mu_lo[i]).abs());
    }
    let diagnostics = SojournDiagnostics {
        decay_exponent: lam.exponent,
        residual,
        mu_theta_violation: along.abs(),
        direction_mismatch,
        convention_dependent: long_range,
    };
    Limits {
        point: SojournPoint::assemble(theta, lam.value, mu, diagnostics),
        raw_lambda,
        weights,
        rs,
    }
}

fn check_exponent(point: &SojournPoint, cfg: &ExtrapolationConfig) -> Result<()> {
    if let Some(e) = point.diagnostics.decay_exponent {
        let (lo, hi) = cfg.exponent_range;
        if !(e >= lo && e <= hi) {
            return Err(Error::AsymptoticModel(e));
        }
    }
    Ok(())
}

/// Forward sojourn relation `S_f(z, ζ̂)` for a short-range metric.
pub fn sojourn_forward(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
) -> Result<SojournPoint> {
    if !spec.is_short_range() {
        return Err(Error::Config(
            "long-range metric: use sojourn_long_range, which subtracts the log divergence".into(),
        ));
    }
    let raw = integrate_checkpoints(spec, z, zeta_hat, cfg, false)?;
    let lim = limits(&raw, 0.0, cfg, false);
    check_exponent(&lim.point, cfg)?;
    Ok(lim.point)
}

/// Backward relation `S_b(z, ζ̂) = −S_f(z, −ζ̂)`, the minus acting on the
/// fibre: `θ_b = θ_f(z, −ζ̂)`, `λ_b = −λ_f`, `μ_b = −μ_f`, `ξ_b = −ξ_f`.
pub fn sojourn_backward(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
) -> Result<SojournPoint> {
    let neg: Vec<f64> = zeta_hat.iter().map(|x| -x).collect();
    let f = sojourn_forward(spec, z, &neg, cfg)?;
    Ok(backward_from_forward(f))
}

pub(crate) fn backward_from_forward(f: SojournPoint) -> SojournPoint {
    SojournPoint {
        theta: f.theta,
        lambda: -f.lambda,
        mu: f.mu.iter().map(|x| -x).collect(),
        xi: f.xi.iter().map(|x| -x).collect(),
        sigma: f.lambda,
        diagnostics: f.diagnostics,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRangeSojourn {
    /// Limits with `r̃ = r + (m/2) log r`.
    pub point: SojournPoint,
    /// Extrapolated `s − r` without the subtraction (not a true limit).
    pub unsubtracted_lambda: f64,
    pub unsubtracted_exponent: Option<f64>,
    /// `s − r` change between the last two checkpoints.
    pub unsubtracted_drift: f64,
    /// `s − r̃` change between the last two checkpoints.
    pub subtracted_drift: f64,
    /// Set when the subtracted sequence still fails the exponent test.
    pub residual_drift_flag: bool,
}

/// Sojourn relation for the long-range family. `λ` is flagged
/// convention-dependent: a different normalisation of `r̃` shifts it by a
/// constant.
pub fn sojourn_long_range(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
) -> Result<LongRangeSojourn> {
    let m = spec.long_range_m();
    let raw = integrate_checkpoints(spec, z, zeta_hat, cfg, false)?;
    let lim = limits(&raw, m, cfg, m != 0.0);
    let raw_r: Vec<f64> = raw.lengths.iter().zip(&lim.rs).map(|(l, r)| l - r).collect();
    let unsub = scalar_limit(&lim.rs, &raw_r, cfg);
    let k = raw_r.len();
    let (lo, hi) = cfg.exponent_range;
    let residual_drift_flag = match lim.point.diagnostics.decay_exponent {
        Some(e) => !(e >= lo && e <= hi),
        None => false,
    };
    Ok(LongRangeSojourn {
        unsubtracted_lambda: unsub.value,
        unsubtracted_exponent: unsub.exponent,
        unsubtracted_drift: (raw_r[k - 1] - raw_r[k - 2]).abs(),
        subtracted_drift: (lim.raw_lambda[k - 1] - lim.raw_lambda[k - 2]).abs(),
        residual_drift_flag,
        point: lim.point,
    })
}

/// Forward relations for a batch of samples, in input order.
pub fn sojourn_batch_with(
    exec: Exec,
    spec: &MetricSpec,
    samples: &[(Vec<f64>, Vec<f64>)],
    cfg: &ExtrapolationConfig,
) -> Vec<Result<SojournPoint>> {
    par::map(exec, samples, |(z, d)| sojourn_forward(spec, z, d, cfg))
}

/// Derivative of `S_f` with respect to the initial state `(z₀, ζ₀)`.
pub struct SojournJacobian {
    pub point: SojournPoint,
    /// `n × 2n`
    pub d_theta: DMatrix<f64>,
    /// `1 × 2n`
    pub d_lambda: DMatrix<f64>,
    /// `n × 2n`
    pub d_mu: DMatrix<f64>,
    pub start: PhasePoint,
    pub unit_factor: f64,
}

/// `S_f` together with its derivative, propagated through the extrapolation
/// from the variational flow. Checkpoint arclengths are held fixed under
/// perturbation, which is legitimate because each per-checkpoint quantity
/// converges to the same limit at fixed `s` as at fixed `R`.
pub fn sojourn_forward_jacobian(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
) -> Result<SojournJacobian> {
    if !spec.is_short_range() {
        return Err(Error::Config("contact check requires a short-range metric".into()));
    }
    let n = spec.dim;
    let raw = integrate_checkpoints(spec, z, zeta_hat, cfg, true)?;
    let lim = limits(&raw, 0.0, cfg, false);
    check_exponent(&lim.point, cfg)?;
    let k = raw.cps.len();
    let p = cfg.order;
    let used = &raw.cps[k - p - 1..];
    let w = &lim.weights;

    let mut d_th_raw = DMatrix::zeros(n, 2 * n);
    let mut th_raw = DVector::zeros(n);
    let mut d_lam = DMatrix::zeros(1, 2 * n);
    for (wk, cp) in w.iter().zip(used) {
        let j = cp.jac.as_ref().unwrap();
        let jz = j.rows(0, n);
        let jzeta = j.rows(n, n);
        let nz = norm(&cp.zeta);
        let th = DVector::from_iterator(n, cp.zeta.iter().map(|x| x / nz));
        let proj = (DMatrix::identity(n, n) - &th * th.transpose()) / nz;
        d_th_raw += (proj * jzeta) * *wk;
        th_raw += &th * *wk;
        let r = norm(&cp.z);
        let ghat = DVector::from_iterator(n, cp.z.iter().map(|x| x / r));
        d_lam -= (ghat.transpose() * jz) * *wk;
    }
    let thn = th_raw.norm();
    let theta = &th_raw / thn;
    let p_theta = DMatrix::identity(n, n) - &theta * theta.transpose();
    let d_theta = &p_theta * &d_th_raw / thn;

    let mut mu_raw = DVector::zeros(n);
    let mut d_mu_raw = DMatrix::zeros(n, 2 * n);
    for (wk, cp) in w.iter().zip(used) {
        let j = cp.jac.as_ref().unwrap();
        let jz = j.rows(0, n).into_owned();
        let r = norm(&cp.z);
        let g = DVector::from_row_slice(&cp.z);
        let ghat = &g / r;
        mu_raw += (&theta * r - &g) * *wk;
        let term = &theta * (ghat.transpose() * &jz) + &d_theta * r - jz;
        d_mu_raw += term * *wk;
    }
    let along = theta.dot(&mu_raw);
    let d_mu = &p_theta * &d_mu_raw
        - (&theta * mu_raw.transpose() + DMatrix::identity(n, n) * along) * &d_theta;

    Ok(SojournJacobian {
        point: lim.point,
        d_theta,
        d_lambda: d_lam,
        d_mu,
        start: raw.start,
        unit_factor: raw.c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub fd_step: f64,
    pub f_min: f64,
    pub residual_threshold: f64,
    /// Required relative agreement of the variational and finite-difference
    /// pullbacks.
    pub agreement: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            fd_step: 1e-5,
            f_min: 1e-6,
            residual_threshold: 1e-4,
            agreement: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub z: Vec<f64>,
    pub zeta_hat: Vec<f64>,
    /// Best-fit `f` with `S_f^*β = f·α`, variational route.
    pub pullback_factor: f64,
    pub residual: f64,
    pub fd_pullback_factor: f64,
    pub fd_residual: f64,
    /// `max |β_var − β_fd| / ‖β_var‖` over the source basis.
    pub method_disagreement: f64,
    /// `β` evaluated on the source basis `(e_1…e_n, t_1…t_{n−1})`.
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub passed: bool,
}

/// Orthonormal basis of `v^⊥` for a unit vector `v`.
pub fn tangent_basis(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut u = vec![0.0; n];
        u[k] = 1.0;
        let d = dot(&u, v);
        for i in 0..n {
            u[i] -= d * v[i];
        }
        for b in &out {
            let d = dot(&u, b);
            for i in 0..n {
                u[i] -= d * b[i];
            }
        }
        let nu = norm(&u);
        if nu > 1e-6 {
            out.push(u.iter().map(|x| x / nu).collect());
        }
        if out.len() == n - 1 {
            break;
        }
    }
    out
}

/// Initial-state variations `(dz₀, dζ₀)` induced by `dz = e_i` at fixed ζ̂,
/// with `ζ₀ = c(z, ζ̂) ζ̂` and `c = (2h(z, ζ̂))^{-1/2}`.
pub fn position_variations(spec: &MetricSpec, z: &[f64], zeta_hat: &[f64], c: f64) -> Result<Vec<DVector<f64>>> {
    let n = spec.dim;
    let d = spec.hamiltonian_derivs(z, zeta_hat)?;
    let c3 = c * c * c;
    Ok((0..n)
        .map(|i| {
            let mut v = DVector::zeros(2 * n);
            v[i] = 1.0;
            let dc = -c3 * d.h_z[i];
            for a in 0..n {
                v[n + a] = dc * zeta_hat[a];
            }
            v
        })
        .collect())
}

/// Initial-state variations induced by `dζ̂ = t` for each tangent `t`.
pub fn direction_variations(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    c: f64,
    tangents: &[Vec<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = spec.dim;
    let d = spec.hamiltonian_derivs(z, zeta_hat)?;
    let c3 = c * c * c;
    Ok(tangents
        .iter()
        .map(|t| {
            let mut v = DVector::zeros(2 * n);
            let dc = -c3 * dot(&d.h_zeta, t);
            for a in 0..n {
                v[n + a] = dc * zeta_hat[a] + c * t[a];
            }
            v
        })
        .collect())
}

fn fit(beta: &[f64], alpha: &[f64]) -> (f64, f64) {
    let f = dot(beta, alpha) / dot(alpha, alpha);
    let res: Vec<f64> = beta.iter().zip(alpha).map(|(b, a)| b - f * a).collect();
    let nb = norm(beta);
    (f, if nb > 0.0 { norm(&res) / nb } else { 0.0 })
}

/// Pull the contact form `β = dλ − μ·dθ` back through `S_f` and compare
/// with `α = ζ̂·dz` on the source basis `dz = e_i`, `dζ̂ = t_j`.
pub fn contact_check(
    spec: &MetricSpec,
    z: &[f64],
    zeta_hat: &[f64],
    cfg: &ExtrapolationConfig,
    ccfg: &ContactConfig,
) -> Result<ContactReport> {
    let n = spec.dim;
    let sj = sojourn_forward_jacobian(spec, z, zeta_hat, cfg)?;
    let tangents = tangent_basis(zeta_hat);

    let mut source: Vec<(DVector<f64>, f64)> = position_variations(spec, z, zeta_hat, sj.unit_factor)?
        .into_iter()
        .zip(zeta_hat.iter().copied())
        .collect();
    for v in direction_variations(spec, z, zeta_hat, sj.unit_factor, &tangents)? {
        source.push((v, 0.0));
    }
    let mu = DVector::from_row_slice(&sj.point.mu);
    let beta: Vec<f64> = source
        .iter()
        .map(|(v, _)| (&sj.d_lambda * v)[0] - mu.dot(&(&sj.d_theta * v)))
        .collect();
    let alpha: Vec<f64> = source.iter().map(|(_, a)| *a).collect();
    let (f, residual) = fit(&beta, &alpha);

    // finite differences of the full relation over (z, ζ̂)
    let h = ccfg.fd_step;
    let eval = |zz: &[f64], dd: &[f64]| sojourn_forward(spec, zz, dd, cfg);
    let mut beta_fd = Vec::with_capacity(source.len());
    let mut push_fd = |plus: SojournPoint, minus: SojournPoint| {
        let dl = (plus.lambda - minus.lambda) / (2.0 * h);
        let dth: Vec<f64> = plus.theta.iter().zip(&minus.theta).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        beta_fd.push(dl - dot(&sj.point.mu, &dth));
    };
    for i in 0..n {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += h;
        zm[i] -= h;
        push_fd(eval(&zp, zeta_hat)?, eval(&zm, zeta_hat)?);
    }
    for t in &tangents {
        let shift = |s: f64| {
            let v: Vec<f64> = zeta_hat.iter().zip(t).map(|(a, b)| a + s * b).collect();
            let nv = norm(&v);
            v.iter().map(|x| x / nv).collect::<Vec<_>>()
        };
        push_fd(eval(z, &shift(h))?, eval(z, &shift(-h))?);
    }
    let (f_fd, residual_fd) = fit(&beta_fd, &alpha);
    let nb = norm(&beta).max(f64::MIN_POSITIVE);
    let method_disagreement = beta
        .iter()
        .zip(&beta_fd)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / nb;

    if f.abs() < ccfg.f_min {
        return Err(Error::DegenerateContact(f));
    }
    let passed = residual <= ccfg.residual_threshold && method_disagreement <= ccfg.agreement;
    Ok(ContactReport {
        z: z.to_vec(),
        zeta_hat: zeta_hat.to_vec(),
        pullback_factor: f,
        residual,
        fd_pullback_factor: f_fd,
        fd_residual: residual_fd,
        method_disagreement,
        beta,
        alpha,
        passed,
    })
}

pub fn contact_batch_with(
    exec: Exec,
    spec: &MetricSpec,
    samples: &[(Vec<f64>, Vec<f64>)],
    cfg: &ExtrapolationConfig,
    ccfg: &ContactConfig,
) -> Vec<Result<ContactReport>> {
    par::map(exec, samples, |(z, d)| contact_check(spec, z, d, cfg, ccfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_polynomials() {
        let xs = [0.1, 0.05, 0.02, 0.01];
        let w = richardson_weights(&xs);
        let p = |x: f64| 2.0 - 3.0 * x + 0.5 * x * x + 7.0 * x * x * x;
        let v: f64 = w.iter().zip(&xs).map(|(w, &x)| w * p(x)).sum();
        assert!((v - 2.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_origin_is_trivial() {
        let spec = MetricSpec::flat(2);
        let cfg = ExtrapolationConfig::default();
        let p = sojourn_forward(&spec, &[0.0, 0.0], &[0.6, -0.8], &cfg).unwrap();
        assert!((p.theta[0] - 0.6).abs() < 1e-14 && (p.theta[1] + 0.8).abs() < 1e-14);
        assert!(p.lambda.abs() < 1e-10);
        assert!(norm(&p.mu) < 1e-10);
        assert_eq!(p.diagnostics.decay_exponent, None);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let v = [0.48, 0.6, 0.64];
        let b = tangent_basis(&v);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &v).abs() < 1e-15 && dot(&b[1], &v).abs() < 1e-15);
        assert!(dot(&b[0], &b[1]).abs() < 1e-15);
    }

    #[test]
    fn bad_radii_are_rejected() {
        let spec = MetricSpec::single_bump(vec![0.0, 0.0], 0.3, 1.0, 3.0);
        let cfg = ExtrapolationConfig {
            radii: vec![2.0, 100.0, 1000.0],
            ..Default::default()
        };
        assert!(matches!(sojourn_forward(&spec, &[0.0, 0.0], &[1.0, 0.0], &cfg), Err(Error::Config(_))));
    }
}
