use std::path::Path;

use serde::Serialize;
use sojourn_core::evolve::{self, Field};
use sojourn_core::flow::{self, NontrapReport, PhasePoint, SampleStatus};
use sojourn_core::geometry::{MetricSpec, PotentialSpec};
use sojourn_core::io::{self, SojournRow};
use sojourn_core::microlocal::{self, WavefrontKind, WavefrontReport};
use sojourn_core::par::{self, Exec};
use sojourn_core::sojourn::{self, ContactReport, LongRangeSojourn, SojournPoint};

use crate::config::{EvolutionSection, Format, Method, ScenarioConfig};
use crate::output::Output;
use crate::svg::{self, Series};
use crate::{CliError, CliResult};

fn check_dim(spec: &MetricSpec, starts: &[PhasePoint]) -> CliResult<()> {
    if let Some(p) = starts.iter().find(|p| p.z.len() != spec.dim) {
        return Err(CliError::usage(format!(
            "[samples] start {:?} does not match metric dimension {}",
            p.z, spec.dim
        )));
    }
    Ok(())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct PathSummary {
    index: usize,
    z: Vec<f64>,
    zeta_hat: Vec<f64>,
    file: Option<String>,
    termination: Option<flow::Termination>,
    s_end: Option<f64>,
    samples: usize,
    max_energy_drift: Option<f64>,
    error: Option<String>,
}

pub fn geodesic(cfg: &ScenarioConfig, seed: u64, out: &Output) -> CliResult<()> {
    let spec = cfg.metric()?;
    let icfg = cfg.integrator();
    let starts = cfg.samples()?.phase_points(spec.dim, seed)?;
    check_dim(&spec, &starts)?;
    icfg.validate(&spec).map_err(|e| CliError::from_core("[integrator]", e))?;
    let paths = par::map(Exec::default(), &starts, |p| {
        PhasePoint::unit(&spec, &p.z, &p.zeta).and_then(|u| flow::flow(&spec, &u, &icfg))
    });
    let mut summary = Vec::with_capacity(starts.len());
    let mut series = Vec::new();
    let mut failures = Vec::new();
    let label = starts.len() <= 12;
    for (i, (start, res)) in starts.iter().zip(&paths).enumerate() {
        let mut row = PathSummary {
            index: i,
            z: start.z.clone(),
            zeta_hat: start.zeta.clone(),
            file: None,
            termination: None,
            s_end: None,
            samples: 0,
            max_energy_drift: None,
            error: None,
        };
        match res {
            Ok(path) => {
                let name = format!("paths/path_{i:04}.csv");
                out.with(Format::Csv, &name, |w| io::write_path_csv(path, w))?;
                row.file = Some(name);
                row.termination = Some(path.termination);
                row.s_end = path.s.last().copied();
                row.samples = path.len();
                row.max_energy_drift = Some(path.max_energy_drift());
                let pts = if spec.dim == 1 {
                    path.s.iter().zip(&path.z).map(|(s, z)| (*s, z[0])).collect()
                } else {
                    path.z.iter().map(|z| (z[0], z[1])).collect()
                };
                series.push(Series::line(if label { format!("#{i}") } else { String::new() }, pts));
            }
            Err(e) => {
                row.error = Some(e.to_string());
                failures.push(format!("  sample {i} at z = {:?}, ζ̂ = {:?}: {e}", start.z, start.zeta));
            }
        }
        summary.push(row);
    }
    out.json("geodesic.json", &summary)?;
    let (xl, yl) = if spec.dim == 1 { ("s", "z") } else { ("z₀", "z₁") };
    out.svg("geodesic.svg", &svg::plot("Geodesics", xl, yl, &series, spec.dim > 1))?;
    println!("geodesic: {} of {} paths integrated", starts.len() - failures.len(), starts.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "{} geodesic(s) failed:\n{}",
            failures.len(),
            failures.join("\n")
        )))
    }
}

fn pairs(starts: &[PhasePoint]) -> Vec<(Vec<f64>, Vec<f64>)> {
    starts.iter().map(|p| (p.z.clone(), p.zeta.clone())).collect()
}

fn sojourn_rows(starts: &[PhasePoint], results: &[sojourn_core::Result<SojournPoint>]) -> Vec<Vec<String>> {
    starts
        .iter()
        .zip(results)
        .map(|(p, r)| match r {
            Ok(s) => vec![
                fmt_vec(&p.z),
                fmt_vec(&p.zeta),
                fmt_vec(&s.theta),
                fmt_num(s.lambda),
                fmt_vec(&s.xi),
                s.diagnostics.decay_exponent.map_or("-".into(), |e| format!("{e:.3}")),
            ],
            Err(_) => vec![fmt_vec(&p.z), fmt_vec(&p.zeta), "failed".into()],
        })
        .collect()
}

fn write_sojourn_table(
    out: &Output,
    stem: &str,
    title: &str,
    dim: usize,
    starts: &[PhasePoint],
    results: &[sojourn_core::Result<SojournPoint>],
) -> CliResult<()> {
    let rows: Vec<SojournRow> = starts
        .iter()
        .zip(results)
        .map(|(p, r)| SojournRow {
            z: &p.z,
            zeta_hat: &p.zeta,
            result: r,
        })
        .collect();
    out.with(Format::Csv, &format!("{stem}.csv"), |w| io::write_sojourn_csv(dim, &rows, w))?;
    out.svg(
        &format!("{stem}.svg"),
        &svg::table(
            title,
            &["z", "ζ̂", "θ", "λ", "ξ", "exponent"],
            &sojourn_rows(starts, results),
            40,
        ),
    )
}

#[derive(Serialize)]
struct ContactEntry<'a> {
    index: usize,
    z: &'a [f64],
    zeta_hat: &'a [f64],
    report: Option<&'a ContactReport>,
    error: Option<String>,
}

/// Writes the contact reports; returns the failure messages.
fn write_contact(out: &Output, starts: &[PhasePoint], reports: &[sojourn_core::Result<ContactReport>]) -> CliResult<Vec<String>> {
    let mut failures = Vec::new();
    let entries: Vec<ContactEntry> = starts
        .iter()
        .zip(reports)
        .enumerate()
        .map(|(i, (p, r))| {
            match r {
                Ok(c) if !c.passed => failures.push(format!(
                    "  sample {i}: contact check failed (residual {:.3e}, f = {:.6}, disagreement {:.3e})",
                    c.residual, c.pullback_factor, c.method_disagreement
                )),
                Err(e) => failures.push(format!("  sample {i}: {e}")),
                _ => {}
            }
            ContactEntry {
                index: i,
                z: &p.z,
                zeta_hat: &p.zeta,
                report: r.as_ref().ok(),
                error: r.as_ref().err().map(|e| e.to_string()),
            }
        })
        .collect();
    out.json("contact.json", &entries)?;
    let rows: Vec<Vec<String>> = starts
        .iter()
        .zip(reports)
        .map(|(p, r)| match r {
            Ok(c) => vec![
                fmt_vec(&p.z),
                fmt_vec(&p.zeta),
                format!("{:.6}", c.pullback_factor),
                format!("{:.2e}", c.residual),
                format!("{:.2e}", c.method_disagreement),
                if c.passed { "pass" } else { "FAIL" }.into(),
            ],
            Err(_) => vec![fmt_vec(&p.z), fmt_vec(&p.zeta), "error".into()],
        })
        .collect();
    out.svg(
        "contact.svg",
        &svg::table("Contact check", &["z", "ζ̂", "f", "residual", "fd diff", ""], &rows, 40),
    )?;
    Ok(failures)
}

#[derive(Serialize)]
struct LongRangeEntry<'a> {
    index: usize,
    z: &'a [f64],
    zeta_hat: &'a [f64],
    result: Option<&'a LongRangeSojourn>,
    error: Option<String>,
}

pub fn sojourn(cfg: &ScenarioConfig, seed: u64, out: &Output) -> CliResult<()> {
    let spec = cfg.metric()?;
    let ext = cfg.extrapolation();
    ext.validate(&spec).map_err(|e| CliError::from_core("[sojourn]", e))?;
    let starts = cfg.samples()?.phase_points(spec.dim, seed)?;
    check_dim(&spec, &starts)?;
    let samples = pairs(&starts);
    let exec = Exec::default();
    let mut failures = Vec::new();
    if spec.is_short_range() {
        let fwd = sojourn::sojourn_batch_with(exec, &spec, &samples, &ext);
        let bwd = par::map(exec, &samples, |(z, d)| sojourn::sojourn_backward(&spec, z, d, &ext));
        for (i, r) in fwd.iter().enumerate() {
            if let Err(e) = r {
                failures.push(format!("  sample {i}: forward: {e}"));
            }
        }
        for (i, r) in bwd.iter().enumerate() {
            if let Err(e) = r {
                failures.push(format!("  sample {i}: backward: {e}"));
            }
        }
        write_sojourn_table(out, "sojourn_forward", "Forward sojourn relation", spec.dim, &starts, &fwd)?;
        write_sojourn_table(out, "sojourn_backward", "Backward sojourn relation", spec.dim, &starts, &bwd)?;
        let contact = sojourn::contact_batch_with(exec, &spec, &samples, &ext, &cfg.contact());
        failures.extend(write_contact(out, &starts, &contact)?);
    } else {
        let lr = par::map(exec, &samples, |(z, d)| sojourn::sojourn_long_range(&spec, z, d, &ext));
        let entries: Vec<LongRangeEntry> = starts
            .iter()
            .zip(&lr)
            .enumerate()
            .map(|(i, (p, r))| LongRangeEntry {
                index: i,
                z: &p.z,
                zeta_hat: &p.zeta,
                result: r.as_ref().ok(),
                error: r.as_ref().err().map(|e| e.to_string()),
            })
            .collect();
        out.json("sojourn_long_range.json", &entries)?;
        let pts: Vec<sojourn_core::Result<SojournPoint>> = lr
            .iter()
            .map(|r| match r {
                Ok(l) => Ok(l.point.clone()),
                Err(e) => Err(sojourn_core::Error::Domain(e.to_string())),
            })
            .collect();
        for (i, r) in lr.iter().enumerate() {
            match r {
                Err(e) => failures.push(format!("  sample {i}: {e}")),
                Ok(l) if l.residual_drift_flag => {
                    eprintln!("warning: sample {i}: subtracted λ still drifts ({:.3e})", l.subtracted_drift)
                }
                _ => {}
            }
        }
        write_sojourn_table(
            out,
            "sojourn_forward",
            "Forward sojourn relation (log-subtracted)",
            spec.dim,
            &starts,
            &pts,
        )?;
        eprintln!("note: long-range metric; λ depends on the normalisation of r̃ and no contact check is run");
    }
    println!("sojourn: {} samples, {} failure(s)", starts.len(), failures.len());
    finish(failures, "sojourn")
}

fn finish(failures: Vec<String>, what: &str) -> CliResult<()> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "{what}: {} failure(s):\n{}",
            failures.len(),
            failures.join("\n")
        )))
    }
}

pub fn contact(cfg: &ScenarioConfig, seed: u64, out: &Output) -> CliResult<()> {
    let spec = cfg.metric()?;
    if !spec.is_short_range() {
        return Err(CliError::usage("contact-check needs a short-range metric"));
    }
    let ext = cfg.extrapolation();
    ext.validate(&spec).map_err(|e| CliError::from_core("[sojourn]", e))?;
    let starts = cfg.samples()?.phase_points(spec.dim, seed)?;
    check_dim(&spec, &starts)?;
    let reports = sojourn::contact_batch_with(Exec::default(), &spec, &pairs(&starts), &ext, &cfg.contact());
    let failures = write_contact(out, &starts, &reports)?;
    println!("contact-check: {} samples, {} failure(s)", starts.len(), failures.len());
    finish(failures, "contact-check")
}

fn is_zero(p: &PotentialSpec) -> bool {
    p.c == 0.0 && p.bumps.is_none()
}

/// `ψ(t)` from `ψ(0)` with the configured method.
pub fn propagate(psi0: &Field, pot: &PotentialSpec, ev: &EvolutionSection, t: f64) -> CliResult<Field> {
    let spectral = match ev.method {
        Method::Auto => is_zero(pot),
        Method::Spectral => {
            if !is_zero(pot) {
                return Err(CliError::usage("[evolution] method = \"spectral\" needs a zero potential"));
            }
            true
        }
        Method::SplitStep => false,
    };
    if spectral {
        Ok(evolve::free_propagate(psi0, t))
    } else {
        evolve::split_step(psi0, pot, t, &ev.stepper()).map_err(|e| CliError::from_core("split-step", e))
    }
}

#[derive(Serialize)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub file: String,
    pub norm: f64,
    pub norm_drift: f64,
    pub max_abs: f64,
}

/// 1D |ψ| and phase plots, or a 2D |ψ| raster per snapshot.
pub fn field_figures(out: &Output, stem: &str, fields: &[&Field]) -> CliResult<()> {
    let Some(first) = fields.first() else { return Ok(()) };
    let g = first.grid;
    if g.dim == 1 {
        let abs: Vec<Series> = fields
            .iter()
            .map(|f| {
                Series::line(
                    format!("t = {}", f.t),
                    f.data.iter().enumerate().map(|(j, v)| (g.coord(j), v.norm())).collect(),
                )
            })
            .collect();
        out.svg(&format!("{stem}_abs.svg"), &svg::plot("|ψ|", "z", "|ψ|", &abs, false))?;
        let phase: Vec<Series> = fields
            .iter()
            .map(|f| {
                let floor = 1e-3 * f.max_abs();
                Series::line(
                    format!("t = {}", f.t),
                    f.data
                        .iter()
                        .enumerate()
                        .map(|(j, v)| (g.coord(j), if v.norm() > floor { v.arg() } else { f64::NAN }))
                        .collect(),
                )
            })
            .collect();
        out.svg(&format!("{stem}_phase.svg"), &svg::plot("arg ψ", "z", "arg ψ", &phase, false))?;
    } else {
        for (k, f) in fields.iter().enumerate() {
            out.svg(&format!("{stem}_{k:03}.svg"), &raster_abs(f))?;
        }
    }
    Ok(())
}

fn raster_abs(f: &Field) -> String {
    let g = f.grid;
    let n = g.n;
    // row 0 is the top of the figure, i.e. the largest z₁
    let rows: Vec<Vec<f64>> = (0..n)
        .rev()
        .map(|j1| (0..n).map(|j0| f.data[j0 * n + j1].norm()).collect())
        .collect();
    let half = 0.5 * g.extent;
    svg::raster(
        &format!("|ψ| at t = {}", f.t),
        "z₀",
        "z₁",
        (-half, half - g.h()),
        (-half, half - g.h()),
        &rows,
        "|ψ|",
    )
}

pub fn evolve(cfg: &ScenarioConfig, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let psi0 = cfg
        .initial()?
        .sample(&grid)
        .map_err(|e| CliError::from_core("[initial]", e))?;
    let pot = cfg.potential(grid.dim)?;
    let ev = cfg.evolution();
    ev.stepper().validate(&grid).map_err(|e| CliError::from_core("[evolution]", e))?;
    if let Some(t) = ev.times.iter().find(|t| !t.is_finite()) {
        return Err(CliError::usage(format!("[evolution] time {t} is not finite")));
    }
    let mut fields = vec![psi0.clone()];
    for &t in &ev.times {
        fields.push(propagate(&psi0, &pot, &ev, t)?);
    }
    let n0 = psi0.norm();
    let mut snaps = Vec::new();
    for (k, f) in fields.iter().enumerate() {
        let file = format!("field_{k:03}.sjf");
        out.field(&file, f)?;
        if grid.dim == 1 {
            out.with(Format::Csv, &format!("field_{k:03}.csv"), |w| io::write_field_csv(f, w))?;
        }
        let norm = f.norm();
        snaps.push(Snapshot {
            index: k,
            t: f.t,
            file,
            norm,
            norm_drift: (norm / n0 - 1.0).abs(),
            max_abs: f.max_abs(),
        });
    }
    out.json("evolve.json", &snaps)?;
    field_figures(out, "field", &fields.iter().collect::<Vec<_>>())?;
    println!(
        "evolve: {} snapshot(s) on a {}D grid, max norm drift {:.2e}",
        snaps.len(),
        grid.dim,
        snaps.iter().map(|s| s.norm_drift).fold(0.0, f64::max)
    );
    Ok(())
}

fn points_csv(r: &WavefrontReport) -> String {
    let dim = r.points.first().map_or(0, |p| p.base.len());
    let mut s = String::new();
    let head: Vec<String> = (0..dim)
        .map(|i| format!("base{i}"))
        .chain((0..dim).map(|i| format!("fiber{i}")))
        .chain(["order".into(), "amplitude".into()])
        .collect();
    s.push_str(&head.join(","));
    s.push('\n');
    for p in &r.points {
        let cells: Vec<String> = p
            .base
            .iter()
            .chain(&p.fiber)
            .chain([&p.order, &p.amplitude])
            .map(|x| x.to_string())
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Band-amplitude spectrogram (1D) or minimum fitted order per centre (2D).
pub fn spectrogram(r: &WavefrontReport, grid_dim: usize) -> String {
    let title = format!("{} ({:?})", r.label, r.kind);
    let lat = r.config.lattice.points();
    let nb = r.config.bands.len();
    let reference = if r.global_max > 0.0 { r.global_max } else { 1.0 };
    if grid_dim == 1 {
        // rows: +bands from highest to lowest, then −bands from lowest
        let mut rows = vec![vec![f64::NAN; lat.len()]; 2 * nb];
        for s in &r.samples {
            let col = lat.iter().position(|&c| (c - s.center[0]).abs() < 1e-9);
            let Some(col) = col else { continue };
            for (b, a) in s.band_amplitudes.iter().enumerate() {
                let row = if s.direction[0] > 0.0 { nb - 1 - b } else { nb + b };
                rows[row][col] = (a / reference).max(1e-16).log10();
            }
        }
        let dx = 0.5 * r.config.lattice.spacing;
        svg::raster(
            &title,
            if r.kind == WavefrontKind::Wf { "window centre" } else { "window centre (fibre)" },
            "signed band",
            (lat[0] - dx, lat[lat.len() - 1] + dx),
            (-(nb as f64), nb as f64),
            &rows,
            "log₁₀ rel. amp.",
        )
    } else {
        let m = lat.len();
        let mut rows = vec![vec![f64::NAN; m]; m];
        for s in &r.samples {
            let i0 = lat.iter().position(|&c| (c - s.center[0]).abs() < 1e-9);
            let i1 = lat.iter().position(|&c| (c - s.center[1]).abs() < 1e-9);
            if let (Some(i0), Some(i1)) = (i0, i1) {
                let cell = &mut rows[m - 1 - i1][i0];
                let v = s.order.min(2.0 * r.config.k_smooth);
                if !(*cell <= v) {
                    *cell = v;
                }
            }
        }
        let dx = 0.5 * r.config.lattice.spacing;
        let range = (lat[0] - dx, lat[m - 1] + dx);
        svg::raster(&title, "centre₀", "centre₁", range, range, &rows, "min order")
    }
}

fn emit_report(out: &Output, stem: &str, r: &WavefrontReport, grid_dim: usize) -> CliResult<()> {
    out.json(&format!("{stem}.json"), r)?;
    out.text(Format::Csv, &format!("{stem}.csv"), &points_csv(r))?;
    out.svg(&format!("{stem}.svg"), &spectrogram(r, grid_dim))
}

pub fn wavefront(cfg: &ScenarioConfig, field: &Path, alpha: Option<f64>, out: &Output) -> CliResult<()> {
    let file = std::fs::File::open(field).map_err(|e| CliError::usage(format!("cannot open {}: {e}", field.display())))?;
    let psi = io::read_field(std::io::BufReader::new(file)).map_err(|e| CliError::usage(format!("{}: {e}", field.display())))?;
    let det = cfg.detection();
    if det.wf.is_none() && det.sc.is_none() && det.qsc.is_none() {
        return Err(CliError::usage("config has no [detection.wf], [detection.sc] or [detection.qsc]"));
    }
    let dim = psi.grid.dim;
    let gauged = match alpha {
        Some(a) => evolve::gauge(&psi, a, 0.0),
        None => psi.clone(),
    };
    let mut summary = Vec::new();
    if let Some(g) = &det.wf {
        let r = microlocal::detect_wf(&psi, &g.to_config()).map_err(|e| CliError::from_core("[detection.wf]", e))?;
        summary.push(format!("WF: {} point(s)", r.points.len()));
        emit_report(out, "wavefront_wf", &r, dim)?;
    }
    let mut sc = None;
    if let Some(g) = &det.sc {
        let r = microlocal::detect_scwf(&gauged, &g.to_config()).map_err(|e| CliError::from_core("[detection.sc]", e))?;
        summary.push(format!("WF_sc: {} point(s)", r.points.len()));
        emit_report(out, "wavefront_sc", &r, dim)?;
        sc = Some(r);
    }
    let mut failure = None;
    if let Some(q) = &det.qsc {
        let r = microlocal::detect_qscwf(&gauged, &q.to_config()).map_err(|e| CliError::from_core("[detection.qsc]", e))?;
        summary.push(format!("WF_qsc: {} point(s)", r.points.len()));
        emit_report(out, "wavefront_qsc", &r, dim)?;
        if let Some(sc) = &sc {
            let w = microlocal::wf2_check(&r, sc);
            summary.push(format!("wf2 counterexamples: {}", w.counterexamples.len()));
            out.json("wf2.json", &w)?;
            if !w.counterexamples.is_empty() {
                failure = Some(format!(
                    "{} WF_sc point(s) have no matching (θ, 0) in WF_qsc",
                    w.counterexamples.len()
                ));
            }
        }
    }
    println!("wavefront: {}", summary.join(", "));
    match failure {
        Some(m) => Err(CliError::failure(m)),
        None => Ok(()),
    }
}

pub fn nontrap(cfg: &ScenarioConfig, seed: u64, out: &Output) -> CliResult<()> {
    let spec = cfg.metric()?;
    let icfg = cfg.integrator();
    icfg.validate(&spec).map_err(|e| CliError::from_core("[integrator]", e))?;
    let samples = match &cfg.samples {
        Some(s) => s.phase_points(spec.dim, seed)?,
        None => {
            if spec.dim != 2 {
                return Err(CliError::usage("the [nontrap] grid is 2D; give [samples] for other dimensions"));
            }
            let g = cfg.nontrap.clone().unwrap_or_default();
            flow::phase_grid_2d(g.half, g.positions, g.directions)
        }
    };
    check_dim(&spec, &samples)?;
    let report: NontrapReport = flow::nontrapping_check(&spec, &samples, &icfg);
    out.json("nontrap.json", &report)?;
    let mut csv = String::from("index,z,zeta,status,s,radius\n");
    for e in &report.entries {
        let (status, s, r) = match &e.status {
            SampleStatus::Escaped { s, radius } => ("escaped", s.to_string(), radius.to_string()),
            SampleStatus::Undecided { .. } => ("undecided", String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{},{},{},{status},{s},{r}\n",
            e.index,
            fmt_vec(&e.start.z),
            fmt_vec(&e.start.zeta)
        ));
    }
    out.text(Format::Csv, "nontrap.csv", &csv)?;
    if spec.dim >= 2 {
        let pick = |idx: &[usize]| -> Vec<(f64, f64)> {
            idx.iter().map(|&i| (samples[i].z[0], samples[i].z[1])).collect()
        };
        out.svg(
            "nontrap.svg",
            &svg::plot(
                "Nontrapping samples (start positions)",
                "z₀",
                "z₁",
                &[
                    Series::scatter("escaped", pick(&report.certified_escaped)),
                    Series::scatter("undecided", pick(&report.undecided)),
                ],
                true,
            ),
        )?;
    }
    println!(
        "nontrap: {} escaped, {} undecided",
        report.certified_escaped.len(),
        report.undecided.len()
    );
    Ok(())
}
