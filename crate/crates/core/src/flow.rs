//! Hamiltonian geodesic flow.
//!
//! Integrates `ż = ∂h/∂ζ`, `ζ̇ = −∂h/∂z` for `h = ½ g^{ij} ζ_i ζ_j`, optionally
//! together with the variational equation `J̇ = A J`,
//!
//! ```text
//! A = [  h_ζz   h_ζζ ]
//!     [ −h_zz  −h_zζ ]
//! ```
//!
//! in one combined system. Also provides per-sample nontrapping
//! certification and geodesic distance by multi-start shooting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricSpec;
use crate::integrator::{find_root, Dopri5, Segment};
use crate::par::{self, Exec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl PhasePoint {
    pub fn new(z: Vec<f64>, zeta: Vec<f64>) -> PhasePoint {
        PhasePoint { z, zeta }
    }

    /// Unit-speed phase point with covector along the Euclidean direction `ζ̂`.
    pub fn unit(spec: &MetricSpec, z: &[f64], zeta_hat: &[f64]) -> Result<PhasePoint> {
        let (zeta, _) = spec.unit_covector(z, zeta_hat)?;
        Ok(PhasePoint {
            z: z.to_vec(),
            zeta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub s_max: f64,
    pub r_escape: f64,
    pub max_steps: usize,
    pub tol_energy: f64,
    pub h_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-12,
            atol: 1e-12,
            s_max: 100.0,
            r_escape: 10.0,
            max_steps: 200_000,
            tol_energy: 1e-9,
            h_max: f64::INFINITY,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self, spec: &MetricSpec) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.tol_energy > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        if !(self.s_max >= 0.0) {
            return Err(Error::Config("s_max must be non-negative".into()));
        }
        if let Some(r) = spec.support_radius() {
            if !(self.r_escape > r) {
                return Err(Error::Config(format!(
                    "r_escape = {} must exceed the perturbation radius {r}",
                    self.r_escape
                )));
            }
        }
        Ok(())
    }

    /// Same configuration with both step tolerances halved.
    pub fn halved(&self) -> IntegratorConfig {
        IntegratorConfig {
            rtol: 0.5 * self.rtol,
            atol: 0.5 * self.atol,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the arclength budget.
    SMax,
    /// Left the ball of radius `2·r_escape`.
    Radius,
    /// Passed `r_escape` moving radially outward.
    Escaped,
    /// Recorded every requested checkpoint.
    Checkpoints,
}

#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub dim: usize,
    pub s: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    /// `J(s_k)`, the derivative of the flow map, when requested.
    pub jac: Option<Vec<DMatrix<f64>>>,
    /// `|h(s_k)/h(0) − 1|` per sample.
    pub energy_drift: Vec<f64>,
    pub termination: Termination,
    segments: Vec<Segment>,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn end(&self) -> PhasePoint {
        PhasePoint {
            z: self.z.last().unwrap().clone(),
            zeta: self.zeta.last().unwrap().clone(),
        }
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().fold(0.0, |m, &x| m.max(x))
    }

    /// Dense-output state at arclength `s`.
    pub fn at(&self, s: f64) -> Result<PhasePoint> {
        let n = self.dim;
        let s_end = *self.s.last().unwrap();
        if !(s >= 0.0 && s <= s_end) {
            return Err(Error::Domain(format!("s = {s} outside [0, {s_end}]")));
        }
        if self.segments.is_empty() {
            return Ok(self.end());
        }
        let i = self.segments.partition_point(|seg| seg.s1() < s).min(self.segments.len() - 1);
        let y = self.segments[i].eval(s);
        Ok(PhasePoint {
            z: y[..n].to_vec(),
            zeta: y[n..2 * n].to_vec(),
        })
    }
}

/// Phase-space state recorded at a radial checkpoint `|z| = R`.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub s: f64,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub jac: Option<DMatrix<f64>>,
}

pub(crate) struct RunPlan<'a> {
    pub jac: bool,
    pub s_end: f64,
    pub stop_radius: Option<f64>,
    pub escape_radius: Option<f64>,
    pub checkpoints: &'a [f64],
    pub keep_path: bool,
}

pub(crate) struct RunOutput {
    pub path: GeodesicPath,
    pub checkpoints: Vec<Checkpoint>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unpack_jac(y: &[f64], n: usize) -> DMatrix<f64> {
    let m = 2 * n;
    DMatrix::from_row_slice(m, m, &y[m..m + m * m])
}

fn rhs(spec: &MetricSpec, n: usize, jac: bool, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let d = spec.hamiltonian_derivs(&y[..n], &y[n..2 * n])?;
    for i in 0..n {
        dy[i] = d.h_zeta[i];
        dy[n + i] = -d.h_z[i];
    }
    if jac {
        let m = 2 * n;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for k in 0..n {
                a[i * m + k] = d.h_zzeta[k][i];
                a[i * m + n + k] = d.h_zetazeta[i][k];
                a[(n + i) * m + k] = -d.h_zz[i][k];
                a[(n + i) * m + n + k] = -d.h_zzeta[i][k];
            }
        }
        let j = &y[m..];
        let dj = &mut dy[m..];
        for r in 0..m {
            for c in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += a[r * m + k] * j[k * m + c];
                }
                dj[r * m + c] = s;
            }
        }
    }
    Ok(())
}

pub(crate) fn run(
    spec: &MetricSpec,
    start: &PhasePoint,
    cfg: &IntegratorConfig,
    plan: &RunPlan,
) -> Result<RunOutput> {
    let n = spec.dim;
    if start.z.len() != n || start.zeta.len() != n {
        return Err(Error::Domain("start point dimension mismatch".into()));
    }
    let h0 = spec.hamiltonian(&start.z, &start.zeta)?;
    if !(h0 > 0.0) {
        return Err(Error::Domain("start covector must be nonzero".into()));
    }
    let m = 2 * n;
    let mut y0 = start.z.clone();
    y0.extend_from_slice(&start.zeta);
    if plan.jac {
        for r in 0..m {
            for c in 0..m {
                y0.push(if r == c { 1.0 } else { 0.0 });
            }
        }
    }
    let limit = 10.0 * cfg.tol_energy;
    let drift_of = |y: &[f64]| -> Result<f64> {
        Ok((spec.hamiltonian(&y[..n], &y[n..m])? / h0 - 1.0).abs())
    };

    let mut path = GeodesicPath {
        dim: n,
        s: vec![0.0],
        z: vec![start.z.clone()],
        zeta: vec![start.zeta.clone()],
        jac: plan.jac.then(|| vec![DMatrix::identity(m, m)]),
        energy_drift: vec![0.0],
        termination: Termination::SMax,
        segments: Vec::new(),
    };
    let mut checkpoints = Vec::new();
    let mut next_cp = 0usize;
    let record = |path: &mut GeodesicPath, s: f64, y: &[f64], drift: f64, seg: Option<&Segment>| {
        path.s.push(s);
        path.z.push(y[..n].to_vec());
        path.zeta.push(y[n..m].to_vec());
        if let Some(js) = path.jac.as_mut() {
            js.push(unpack_jac(y, n));
        }
        path.energy_drift.push(drift);
        if let Some(seg) = seg {
            path.segments.push(seg.clone());
        }
    };

    if plan.s_end <= 0.0 {
        return Ok(RunOutput { path, checkpoints });
    }
    let jac = plan.jac;
    let mut solver = Dopri5::new(
        move |_, y, dy| rhs(spec, n, jac, y, dy),
        0.0,
        y0,
        cfg.rtol,
        cfg.atol,
        cfg.h_max,
    )?;
    let mut steps = 0usize;
    loop {
        if steps >= cfg.max_steps {
            return Err(Error::Integration {
                s: solver.s(),
                reason: format!("exceeded {} steps", cfg.max_steps),
            });
        }
        steps += 1;
        let r_old = norm(&solver.y()[..n]);
        solver.step(plan.s_end)?;
        let mut y = solver.y().to_vec();
        let r_new = norm(&y[..n]);

        if next_cp < plan.checkpoints.len() {
            let target = plan.checkpoints[next_cp];
            if r_old < target && r_new >= target {
                let seg = solver.last_segment().unwrap().clone();
                let f = |s: f64| {
                    let mut q = 0.0;
                    for i in 0..n {
                        let v = seg.eval_component(s, i);
                        q += v * v;
                    }
                    q - target * target
                };
                let s_ev = find_root(f, seg.s0, seg.s1());
                solver.rewind()?;
                let h_ev = s_ev - solver.s();
                if h_ev > 0.0 {
                    solver.step_exact(h_ev)?;
                }
                y = solver.y().to_vec();
                checkpoints.push(Checkpoint {
                    s: solver.s(),
                    z: y[..n].to_vec(),
                    zeta: y[n..m].to_vec(),
                    jac: plan.jac.then(|| unpack_jac(&y, n)),
                });
                next_cp += 1;
            }
        }

        let drift = drift_of(&y)?;
        if drift > limit {
            return Err(Error::Accuracy { drift, limit });
        }
        if plan.keep_path {
            record(&mut path, solver.s(), &y, drift, solver.last_segment());
        }
        let r = norm(&y[..n]);
        if !plan.checkpoints.is_empty() && next_cp == plan.checkpoints.len() {
            path.termination = Termination::Checkpoints;
            break;
        }
        if let Some(re) = plan.escape_radius {
            if r >= re {
                let gi = spec.inverse_metric(&y[..n])?;
                let zeta = DVector::from_row_slice(&y[n..m]);
                let v = gi * zeta;
                let radial: f64 = (0..n).map(|i| y[i] * v[i]).sum();
                if radial > 0.0 {
                    path.termination = Termination::Escaped;
                    break;
                }
            }
        }
        if let Some(rs) = plan.stop_radius {
            if r > rs {
                path.termination = Termination::Radius;
                break;
            }
        }
        if solver.s() >= plan.s_end {
            path.termination = Termination::SMax;
            break;
        }
    }
    if !plan.keep_path {
        let y = solver.y().to_vec();
        let drift = drift_of(&y)?;
        record(&mut path, solver.s(), &y, drift, None);
    }
    Ok(RunOutput { path, checkpoints })
}

fn check_unit(spec: &MetricSpec, start: &PhasePoint) -> Result<()> {
    let h = spec.hamiltonian(&start.z, &start.zeta)?;
    if (2.0 * h - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "start is not unit speed (2h = {})",
            2.0 * h
        )));
    }
    Ok(())
}

/// Unit-speed geodesic from `start`, until `s_max` or `|z| > 2·r_escape`.
pub fn flow(spec: &MetricSpec, start: &PhasePoint, cfg: &IntegratorConfig) -> Result<GeodesicPath> {
    integrate(spec, start, cfg, false)
}

/// As [`flow`], additionally carrying the `2n×2n` flow derivative `J`.
pub fn variational_flow(
    spec: &MetricSpec,
    start: &PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<GeodesicPath> {
    integrate(spec, start, cfg, true)
}

fn integrate(
    spec: &MetricSpec,
    start: &PhasePoint,
    cfg: &IntegratorConfig,
    jac: bool,
) -> Result<GeodesicPath> {
    spec.validate()?;
    cfg.validate(spec)?;
    check_unit(spec, start)?;
    let plan = RunPlan {
        jac,
        s_end: cfg.s_max,
        stop_radius: Some(2.0 * cfg.r_escape),
        escape_radius: None,
        checkpoints: &[],
        keep_path: true,
    };
    Ok(run(spec, start, cfg, &plan)?.path)
}

/// Canonical skew form `Ω = [[0, I], [−I, 0]]`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = 1.0;
        o[(n + i, i)] = -1.0;
    }
    o
}

/// `‖JᵀΩJ − Ω‖_max`.
pub fn symplectic_defect(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows() / 2;
    let o = symplectic_form(n);
    (j.transpose() * &o * j - o).amax()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SampleStatus {
    Escaped { s: f64, radius: f64 },
    Undecided { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontrapEntry {
    pub index: usize,
    pub start: PhasePoint,
    pub status: SampleStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontrapReport {
    pub certified_escaped: Vec<usize>,
    pub undecided: Vec<usize>,
    pub entries: Vec<NontrapEntry>,
}

/// Classify each sample as escaped or undecided.
///
/// Covectors are rescaled to unit speed first. A sample is escaped once
/// `|z| ≥ r_escape` with `ż·z > 0`; anything else, including integration
/// failures, is undecided.
pub fn nontrapping_check(
    spec: &MetricSpec,
    samples: &[PhasePoint],
    cfg: &IntegratorConfig,
) -> NontrapReport {
    nontrapping_check_with(Exec::default(), spec, samples, cfg)
}

pub fn nontrapping_check_with(
    exec: Exec,
    spec: &MetricSpec,
    samples: &[PhasePoint],
    cfg: &IntegratorConfig,
) -> NontrapReport {
    let plan = RunPlan {
        jac: false,
        s_end: cfg.s_max,
        stop_radius: None,
        escape_radius: Some(cfg.r_escape),
        checkpoints: &[],
        keep_path: false,
    };
    let status: Vec<SampleStatus> = par::map(exec, samples, |p| {
        let res = spec
            .validate()
            .and_then(|_| cfg.validate(spec))
            .and_then(|_| PhasePoint::unit(spec, &p.z, &p.zeta))
            .and_then(|u| run(spec, &u, cfg, &plan));
        match res {
            Ok(out) if out.path.termination == Termination::Escaped => SampleStatus::Escaped {
                s: *out.path.s.last().unwrap(),
                radius: norm(out.path.z.last().unwrap()),
            },
            Ok(_) => SampleStatus::Undecided {
                reason: "s_max reached before escape".into(),
            },
            Err(e) => SampleStatus::Undecided {
                reason: e.to_string(),
            },
        }
    });
    let mut report = NontrapReport {
        certified_escaped: Vec::new(),
        undecided: Vec::new(),
        entries: Vec::with_capacity(samples.len()),
    };
    for (i, (p, st)) in samples.iter().zip(status).enumerate() {
        match st {
            SampleStatus::Escaped { .. } => report.certified_escaped.push(i),
            SampleStatus::Undecided { .. } => report.undecided.push(i),
        }
        report.entries.push(NontrapEntry {
            index: i,
            start: p.clone(),
            status: st,
        });
    }
    report
}

/// Regular 2D sample grid of positions in `[-half, half]²` times `n_dirs`
/// equally spaced directions.
pub fn phase_grid_2d(half: f64, n_pos: usize, n_dirs: usize) -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(n_pos * n_pos * n_dirs);
    let coord = |i: usize| {
        if n_pos == 1 {
            0.0
        } else {
            -half + 2.0 * half * i as f64 / (n_pos - 1) as f64
        }
    };
    for i in 0..n_pos {
        for j in 0..n_pos {
            for k in 0..n_dirs {
                let a = std::f64::consts::TAU * k as f64 / n_dirs as f64;
                out.push(PhasePoint::new(vec![coord(i), coord(j)], vec![a.cos(), a.sin()]));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    pub max_iter: usize,
    /// Endpoint miss tolerance, relative to `max(1, |z − w|)`.
    pub tol: f64,
    /// Converged covectors farther apart than this (relative) count as
    /// distinct geodesics.
    pub agree_tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            integrator: IntegratorConfig::default(),
            max_iter: 50,
            tol: 1e-12,
            agree_tol: 1e-6,
        }
    }
}

fn endpoint(
    spec: &MetricSpec,
    w: &[f64],
    p: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = w.len();
    let plan = RunPlan {
        jac: true,
        s_end: 1.0,
        stop_radius: None,
        escape_radius: None,
        checkpoints: &[],
        keep_path: false,
    };
    let out = run(spec, &PhasePoint::new(w.to_vec(), p.to_vec()), cfg, &plan)?;
    if (out.path.s.last().unwrap() - 1.0).abs() > 1e-12 {
        return Err(Error::Integration {
            s: *out.path.s.last().unwrap(),
            reason: "shooting run stopped early".into(),
        });
    }
    let j = out.path.jac.unwrap().pop().unwrap();
    Ok((out.path.z.last().unwrap().clone(), j.view((0, n), (n, n)).into_owned()))
}

fn newton_shoot(
    spec: &MetricSpec,
    w: &[f64],
    z: &[f64],
    p0: Vec<f64>,
    cfg: &ShootingConfig,
) -> Option<Vec<f64>> {
    let n = w.len();
    let scale = norm(&w.iter().zip(z).map(|(a, b)| a - b).collect::<Vec<_>>()).max(1.0);
    let miss = |p: &[f64]| -> Option<(Vec<f64>, DMatrix<f64>, f64)> {
        let (end, jz) = endpoint(spec, w, p, &cfg.integrator).ok()?;
        let f: Vec<f64> = end.iter().zip(z).map(|(a, b)| a - b).collect();
        let nf = norm(&f);
        Some((f, jz, nf))
    };
    let mut p = p0;
    let (mut f, mut jz, mut nf) = miss(&p)?;
    for _ in 0..cfg.max_iter {
        if nf <= cfg.tol * scale {
            return Some(p);
        }
        let delta = jz.clone().lu().solve(&DVector::from_row_slice(&f))?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = (0..n).map(|i| p[i] - lambda * delta[i]).collect();
            if let Some((ft, jt, nt)) = miss(&trial) {
                if nt < nf * (1.0 - 1e-4 * lambda) || nt <= cfg.tol * scale {
                    p = trial;
                    f = ft;
                    jz = jt;
                    nf = nt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
    }
    (nf <= cfg.tol * scale).then_some(p)
}

fn initial_guesses(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut out = vec![v.to_vec()];
    for s in [1.15, 0.85] {
        out.push(v.iter().map(|x| x * s).collect());
    }
    if n >= 2 {
        let nv = norm(v);
        let e = v.iter().map(|x| x / nv).collect::<Vec<_>>();
        let k = (0..n)
            .min_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap())
            .unwrap();
        let mut u = vec![0.0; n];
        u[k] = 1.0;
        let d: f64 = u.iter().zip(&e).map(|(a, b)| a * b).sum();
        for i in 0..n {
            u[i] -= d * e[i];
        }
        let nu = norm(&u);
        for a in [0.35f64, -0.35] {
            out.push((0..n).map(|i| nv * (a.cos() * e[i] + a.sin() * u[i] / nu)).collect());
        }
    }
    out
}

/// Riemannian distance `d_g(w, z)` by multi-start covector shooting.
///
/// Solves `exp_w(p) = z` for the initial covector `p` with damped Newton on
/// the endpoint map (Jacobian from the variational flow), starting from the
/// straight-line guess and four perturbations. Distinct converged solutions
/// or no convergence at all give [`Error::OutsideShootingDomain`].
pub fn geodesic_distance(spec: &MetricSpec, w: &[f64], z: &[f64], cfg: &ShootingConfig) -> Result<f64> {
    spec.validate()?;
    let n = spec.dim;
    if w.len() != n || z.len() != n {
        return Err(Error::Domain("point dimension mismatch".into()));
    }
    let v: Vec<f64> = z.iter().zip(w).map(|(a, b)| a - b).collect();
    if norm(&v) == 0.0 {
        return Ok(0.0);
    }
    let gw = spec.metric_tensor(w)?;
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for guess in initial_guesses(&v) {
        let p0 = (&gw * DVector::from_row_slice(&guess)).as_slice().to_vec();
        if let Some(p) = newton_shoot(spec, w, z, p0, cfg) {
            solutions.push(p);
        }
    }
    let first = solutions.first().ok_or_else(|| {
        Error::OutsideShootingDomain(format!("no shooting start converged for {w:?} → {z:?}"))
    })?;
    let pn = norm(first).max(1.0);
    for other in &solutions[1..] {
        let d = norm(&first.iter().zip(other).map(|(a, b)| a - b).collect::<Vec<_>>());
        if d > cfg.agree_tol * pn {
            return Err(Error::OutsideShootingDomain(format!(
                "distinct geodesics from {w:?} to {z:?} (covectors differ by {d:e})"
            )));
        }
    }
    let h = spec.hamiltonian(w, first)?;
    Ok((2.0 * h).sqrt())
}

/// `Φ − ½ g^{ij} ∂_iΦ ∂_jΦ` with `Φ = ½ d_g(·, w)²` and central differences of
/// step `h_fd`. Cells where the distance fails are `None`.
pub fn eikonal_residual(
    spec: &MetricSpec,
    w: &[f64],
    grid: &[Vec<f64>],
    h_fd: f64,
    cfg: &ShootingConfig,
) -> Vec<Option<f64>> {
    eikonal_residual_with(Exec::default(), spec, w, grid, h_fd, cfg)
}

pub fn eikonal_residual_with(
    exec: Exec,
    spec: &MetricSpec,
    w: &[f64],
    grid: &[Vec<f64>],
    h_fd: f64,
    cfg: &ShootingConfig,
) -> Vec<Option<f64>> {
    let phi = |z: &[f64]| geodesic_distance(spec, w, z, cfg).map(|d| 0.5 * d * d);
    par::map(exec, grid, |z| {
        let n = z.len();
        let p0 = phi(z).ok()?;
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h_fd;
            zm[i] -= h_fd;
            grad[i] = (phi(&zp).ok()? - phi(&zm).ok()?) / (2.0 * h_fd);
        }
        let gi = spec.inverse_metric(z).ok()?;
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += gi[(i, j)] * grad[i] * grad[j];
            }
        }
        Some(p0 - 0.5 * q)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_flow_is_a_line_and_jacobian_is_linear() {
        let spec = MetricSpec::flat(2);
        let start = PhasePoint::unit(&spec, &[0.5, -1.0], &[0.6, 0.8]).unwrap();
        let cfg = IntegratorConfig {
            s_max: 7.0,
            ..Default::default()
        };
        let p = variational_flow(&spec, &start, &cfg).unwrap();
        for (k, s) in p.s.iter().enumerate() {
            assert!((p.z[k][0] - (0.5 + 0.6 * s)).abs() <= 1e-10 * (1.0 + s));
            assert!((p.z[k][1] - (-1.0 + 0.8 * s)).abs() <= 1e-10 * (1.0 + s));
            let j = &p.jac.as_ref().unwrap()[k];
            let mut expect = DMatrix::identity(4, 4);
            expect[(0, 2)] = *s;
            expect[(1, 3)] = *s;
            assert!((j - expect).amax() < 1e-10);
        }
        assert_eq!(p.termination, Termination::SMax);
        let mid = p.at(3.3).unwrap();
        assert!((mid.z[0] - (0.5 + 0.6 * 3.3)).abs() < 1e-10);
    }

    #[test]
    fn zero_budget_is_undecided() {
        let spec = MetricSpec::flat(2);
        let cfg = IntegratorConfig {
            s_max: 0.0,
            ..Default::default()
        };
        let r = nontrapping_check(&spec, &phase_grid_2d(1.0, 2, 3), &cfg);
        assert!(r.certified_escaped.is_empty());
        assert_eq!(r.undecided.len(), 12);
    }

    #[test]
    fn flat_distance_is_euclidean() {
        let spec = MetricSpec::flat(2);
        let d = geodesic_distance(&spec, &[0.1, 0.2], &[1.3, -0.4], &ShootingConfig::default()).unwrap();
        assert!((d - (1.2f64.powi(2) + 0.6f64.powi(2)).sqrt()).abs() < 1e-13);
        assert_eq!(geodesic_distance(&spec, &[1.0, 1.0], &[1.0, 1.0], &ShootingConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn non_unit_start_is_rejected() {
        let spec = MetricSpec::flat(2);
        let start = PhasePoint::new(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert!(matches!(flow(&spec, &start, &IntegratorConfig::default()), Err(Error::Config(_))));
    }
}
