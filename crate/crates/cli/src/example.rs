//! The two worked examples: formation of `δ(z₁)` from a Euclidean chirp, and
//! the Airy datum that stays smooth.

use num_complex::Complex64;
use serde::Serialize;
use sojourn_core::evolve::presets::{airy_exact, AiryWindow, InitialData};
use sojourn_core::evolve::{Field, Grid};
use sojourn_core::geometry::PotentialSpec;
use sojourn_core::microlocal::{
    self, GaborConfig, PropagationConfig, PropagationReport, PropagationScenario, ShiftReport, Verdict,
    WavefrontReport, Wf2Report,
};
use sojourn_core::sojourn::ExtrapolationConfig;

use crate::commands::{field_figures, propagate, spectrogram};
use crate::config::{DetectionSection, EvolutionSection, GaborSection, GridSection, QscSection, ScenarioConfig};
use crate::output::Output;
use crate::svg::{self, Series};
use crate::{CliError, CliResult, ExampleName};

pub fn defaults(name: ExampleName) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::empty();
    match name {
        ExampleName::Airy => {
            let lt = 3200.0;
            cfg.grid = Some(GridSection {
                dim: 1,
                n: 4096,
                extent: 80.0,
            });
            cfg.initial = Some(InitialData::Airy(AiryWindow::default()));
            cfg.evolution = Some(EvolutionSection::default());
            cfg.detection = Some(DetectionSection {
                wf: Some(GaborSection::new(0.3, (-5.0, 5.0, 0.5), vec![(40.0, 80.0), (80.0, 160.0)])),
                sc: Some(GaborSection::new(
                    0.4,
                    (-6.0, 6.0, 0.25),
                    vec![(5.0, 10.0), (10.0, 20.0), (20.0, 40.0)],
                )),
                qsc: Some(QscSection {
                    n: 4096,
                    extent: lt,
                    window: (33.0, 39.5),
                    mask_cells: 4.0,
                    upsample: 1,
                    gabor: GaborSection::new(
                        0.06,
                        (-2.0, 2.0, 0.25),
                        vec![(lt / 16.0, lt / 8.0), (lt / 8.0, lt / 4.0), (lt / 4.0, lt / 2.0)],
                    ),
                }),
            });
        }
        ExampleName::EuclidDelta => {
            cfg.grid = Some(GridSection {
                dim: 2,
                n: 1024,
                extent: 60.0,
            });
            cfg.initial = Some(InitialData::EuclidDelta {
                window_radius: 29.0,
                window_width: 5.0,
            });
            cfg.evolution = Some(EvolutionSection {
                times: vec![0.5, 1.0, 2.0],
                ..Default::default()
            });
            cfg.detection = Some(DetectionSection {
                wf: Some(GaborSection::new(0.7, (-3.0, 3.0, 1.0), vec![(6.0, 12.0), (12.0, 24.0)])),
                ..Default::default()
            });
        }
    }
    cfg
}

fn stage<T>(name: &str, r: sojourn_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_core(&format!("stage `{name}`"), e))
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::usage(format!("example needs {what}")))
}

fn emit(out: &Output, stem: &str, r: &WavefrontReport, dim: usize) -> CliResult<()> {
    out.json(&format!("{stem}.json"), r)?;
    out.svg(&format!("{stem}.svg"), &spectrogram(r, dim))
}

fn pts(r: &WavefrontReport) -> Vec<(Vec<f64>, Vec<f64>)> {
    r.points.iter().map(|p| (p.base.clone(), p.fiber.clone())).collect()
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn report_verdict(out: &Output, summary: &impl Serialize, verdict: &str, ok: bool, failures: &[String]) -> CliResult<()> {
    out.json("summary.json", summary)?;
    println!("verdict: {verdict}");
    if ok {
        Ok(())
    } else {
        Err(CliError::failure(format!("example failed:\n  {}", failures.join("\n  "))))
    }
}

pub fn run(name: ExampleName, cfg: &ScenarioConfig, out: &Output) -> CliResult<()> {
    match name {
        ExampleName::Airy => airy(cfg, out),
        ExampleName::EuclidDelta => euclid_delta(cfg, out),
    }
}

#[derive(Serialize)]
struct AirySummary {
    verdict: String,
    /// Relative to `(2πi)^{-1/2} e^{i(z³/3 + z²/2)}` on `|z| ≤ 5`.
    max_relative_error: f64,
    /// The same comparison against `(−2πi)^{1/2} e^{i(z³/3 + z²/2)}`.
    max_relative_error_literal_constant: f64,
    wf_t1_points: usize,
    qsc_points: Vec<(Vec<f64>, Vec<f64>)>,
    wf1: Vec<ShiftSummary>,
    wf2: Wf2Report,
    propagation_verdict: Verdict,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct ShiftSummary {
    alpha: f64,
    passed: bool,
    gauged_points: Vec<(Vec<f64>, Vec<f64>)>,
}

fn max_rel_error(psi: &Field, exact: impl Fn(f64) -> Complex64, radius: f64) -> f64 {
    (0..psi.grid.n)
        .map(|j| (psi.grid.coord(j), psi.data[j]))
        .filter(|(z, _)| z.abs() <= radius)
        .map(|(z, v)| {
            let e = exact(z);
            (v - e).norm() / e.norm()
        })
        .fold(0.0, f64::max)
}

/// `e^{-iz²/2}Ai(z)` at `t = 0` evolves to `(2πi)^{-1/2} e^{i(z³/3+z²/2)}` at
/// `t = 1`, which is smooth; its only quadratic-scattering wavefront point is
/// `(−1, 1/2)`.
fn airy(cfg: &ScenarioConfig, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let psi0 = stage("initial", cfg.initial()?.sample(&grid))?;
    let pot = cfg.potential(1)?;
    let ev = cfg.evolution();
    let det = cfg.detection();
    let wf_cfg = need(&det.wf, "[detection.wf]")?.to_config();
    let sc_cfg = need(&det.sc, "[detection.sc]")?.to_config();
    let qsc_cfg = need(&det.qsc, "[detection.qsc]")?.to_config();

    let psi1 = propagate(&psi0, &pot, &ev, 1.0).map_err(|e| CliError {
        message: format!("stage `evolve`: {}", e.message),
        ..e
    })?;
    out.field("psi_0.sjf", &psi0)?;
    out.field("psi_1.sjf", &psi1)?;
    field_figures(out, "psi", &[&psi0, &psi1])?;

    let err = max_rel_error(&psi1, airy_exact, 5.0);
    let literal = Complex64::new(0.0, -2.0 * std::f64::consts::PI).powf(0.5);
    let err_literal = max_rel_error(
        &psi1,
        |z| literal * Complex64::from_polar(1.0, z * z * z / 3.0 + 0.5 * z * z),
        5.0,
    );
    let window: Vec<usize> = (0..grid.n).filter(|&j| grid.coord(j).abs() <= 6.0).collect();
    out.svg(
        "airy_compare.svg",
        &svg::plot(
            "Re ψ(1): computed and closed form",
            "z",
            "Re ψ",
            &[
                Series::line("computed", window.iter().map(|&j| (grid.coord(j), psi1.data[j].re)).collect()),
                Series::line("closed form", window.iter().map(|&j| (grid.coord(j), airy_exact(grid.coord(j)).re)).collect()),
            ],
            false,
        ),
    )?;
    out.svg(
        "airy_error.svg",
        &svg::plot(
            "Pointwise relative error at t = 1",
            "z",
            "log₁₀ error",
            &[Series::line(
                "",
                window
                    .iter()
                    .map(|&j| {
                        let z = grid.coord(j);
                        let e = airy_exact(z);
                        (z, ((psi1.data[j] - e).norm() / e.norm()).max(1e-17).log10())
                    })
                    .collect(),
            )],
            false,
        ),
    )?;

    let wf1 = stage("detect", microlocal::detect_wf(&psi1, &wf_cfg))?;
    emit(out, "wavefront_wf_t1", &wf1, 1)?;

    // WF_qsc needs the datum on the whole line, so the window is symmetric
    // rather than wrapped.
    let sym = stage(
        "initial",
        InitialData::Airy(AiryWindow {
            periodic: false,
            cut: 0.5 * grid.extent - 2.0,
            left_taper: 2.0,
            right_taper: 2.0,
        })
        .sample(&grid),
    )?;
    let qsc = stage("detect", microlocal::detect_qscwf(&sym, &qsc_cfg))?;
    emit(out, "wavefront_qsc", &qsc, 1)?;
    let mut shifts: Vec<ShiftReport> = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        shifts.push(stage("gauge", microlocal::wf1_shift_check(&sym, alpha, &qsc_cfg))?);
    }
    out.json("wf1.json", &shifts)?;
    let sc_sym = stage("detect", microlocal::detect_scwf(&sym, &sc_cfg))?;
    emit(out, "wavefront_sc", &sc_sym, 1)?;
    let wf2 = microlocal::wf2_check(&qsc, &sc_sym);

    let prop = stage(
        "propagation",
        microlocal::propagation_check(
            &PropagationScenario {
                psi0: psi0.clone(),
                potential: pot,
                t0: 0.0,
                times: vec![1.0],
            },
            &PropagationConfig {
                wf: wf_cfg,
                scwf: sc_cfg,
                evolve: ev.stepper(),
                extrapolation: cfg.extrapolation(),
            },
        ),
    )?;
    out.json("propagation.json", &prop)?;

    let mut failures = Vec::new();
    if !(err <= 1e-3) {
        failures.push(format!("pointwise error {err:.3e} exceeds 1e-3"));
    }
    if !wf1.is_empty() {
        failures.push(format!("WF(ψ(1)) has {} point(s)", wf1.points.len()));
    }
    let target = ([-1.0], [0.5]);
    let one_qsc = qsc.points.len() == 1
        && microlocal::sc_points_match((&qsc.points[0].base, &qsc.points[0].fiber), (&target.0, &target.1), &qsc.config);
    if !one_qsc {
        failures.push(format!("WF_qsc(ψ₀) = {:?}, expected one point at (−1, 1/2)", pts(&qsc)));
    }
    for s in shifts.iter().filter(|s| !s.passed) {
        failures.push(format!("wf1 shift check failed for α = {}", s.alpha));
    }
    if !wf2.counterexamples.is_empty() {
        failures.push(format!("wf2: {} counterexample(s)", wf2.counterexamples.len()));
    }
    if prop.verdict != Verdict::ConsistentAtResolution {
        failures.push("propagation round trip is inconsistent".into());
    }
    let ok = failures.is_empty();
    let verdict = if ok { "smooth at t = 1, consistent" } else { "violation" };
    println!("airy: max relative error on |z| ≤ 5 = {err:.3e}");
    println!("airy: same against the constant (−2πi)^(1/2): {err_literal:.3e}");
    println!("airy: WF(ψ(1)) points = {}, WF_qsc(ψ₀) = {:?}", wf1.points.len(), pts(&qsc));
    let summary = AirySummary {
        verdict: verdict.into(),
        max_relative_error: err,
        max_relative_error_literal_constant: err_literal,
        wf_t1_points: wf1.points.len(),
        qsc_points: pts(&qsc),
        wf1: shifts
            .iter()
            .map(|s| ShiftSummary {
                alpha: s.alpha,
                passed: s.passed,
                gauged_points: pts(&s.gauged),
            })
            .collect(),
        wf2,
        propagation_verdict: prop.verdict,
        failures: failures.clone(),
    };
    report_verdict(out, &summary, verdict, ok, &failures)
}

#[derive(Serialize)]
struct DeltaTime {
    t: f64,
    points: usize,
    z0_values: Vec<f64>,
}

#[derive(Serialize)]
struct DeltaSummary {
    verdict: String,
    singular_set: Vec<(Vec<f64>, Vec<f64>)>,
    times: Vec<DeltaTime>,
    shadow_1d: ShadowSummary,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct ShadowSummary {
    grid: GridSection,
    t0: f64,
    times: Vec<f64>,
    sources: Vec<(Vec<f64>, Vec<f64>)>,
    unmatched_predictions: usize,
    unmatched_detections: usize,
    verdict: Verdict,
}

/// One-dimensional shadow of the example: the chirp focuses to `δ` at
/// `t₀ = 1`, and the propagation round trip is checked at `t = 0` and
/// `t = 2`. Fixed resolution, independent of the 2D overrides. The window is
/// wide and slowly tapered so that its edge does not smear `WF_sc` in `ζ`.
fn shadow_1d(ev: &EvolutionSection, ext: &ExtrapolationConfig) -> CliResult<(GridSection, PropagationReport)> {
    let gs = GridSection {
        dim: 1,
        n: 8192,
        extent: 200.0,
    };
    let grid = Grid::new(gs.dim, gs.n, gs.extent).expect("fixed grid");
    let psi0 = stage(
        "initial",
        InitialData::EuclidDelta {
            window_radius: 60.0,
            window_width: 20.0,
        }
        .sample(&grid),
    )?;
    let l = gs.extent;
    let gabor = |s: GaborSection| -> GaborConfig { s.to_config() };
    let cfg = PropagationConfig {
        wf: gabor(GaborSection::new(0.1, (-2.0, 2.0, 0.25), vec![(4.0, 8.0), (8.0, 16.0)])),
        scwf: gabor(GaborSection::new(
            0.15,
            (-2.0, 2.0, 0.25),
            vec![(l / 64.0, l / 32.0), (l / 32.0, l / 16.0), (l / 16.0, l / 8.0)],
        )),
        evolve: ev.stepper(),
        extrapolation: ext.clone(),
    };
    let report = stage(
        "propagation",
        microlocal::propagation_check(
            &PropagationScenario {
                psi0,
                potential: PotentialSpec::zero(),
                t0: 1.0,
                times: vec![0.0, 2.0],
            },
            &cfg,
        ),
    )?;
    Ok((gs, report))
}

/// `(−2πi)^{-1/2} e^{-iz₁²/2}` focuses to `δ(z₁)` at `t = 1` and is smooth at
/// other times.
fn euclid_delta(cfg: &ScenarioConfig, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let init = cfg.initial()?;
    let psi0 = stage("initial", init.sample(&grid))?;
    let pot = cfg.potential(grid.dim)?;
    let ev = cfg.evolution();
    let det = cfg.detection();
    let wf_cfg = need(&det.wf, "[detection.wf]")?.to_config();
    let mut failures = Vec::new();
    let mut times = Vec::new();
    let mut singular = Vec::new();
    let mut fields = Vec::new();
    for (k, &t) in ev.times.iter().enumerate() {
        let psi = propagate(&psi0, &pot, &ev, t).map_err(|e| CliError {
            message: format!("stage `evolve`: {}", e.message),
            ..e
        })?;
        let r = stage("detect", microlocal::detect_wf(&psi, &wf_cfg))?;
        emit(out, &format!("wavefront_t{k}"), &r, grid.dim)?;
        let mut z0: Vec<f64> = r.points.iter().map(|p| p.base[0]).collect();
        z0.sort_by(f64::total_cmp);
        z0.dedup();
        if t == 1.0 {
            let cell = wf_cfg.angular_cell(grid.dim) * (1.0 + 1e-9);
            let e = [1.0, 0.0];
            let off: Vec<_> = r
                .points
                .iter()
                .filter(|p| {
                    let d = if grid.dim == 1 { vec![p.fiber[0], 0.0] } else { p.fiber.clone() };
                    let dir_ok = angle(&d, &e).min(std::f64::consts::PI - angle(&d, &e)) <= cell;
                    p.base[0].abs() > wf_cfg.lattice.spacing * (1.0 + 1e-9) || !dir_ok
                })
                .collect();
            if r.points.is_empty() {
                failures.push("no singularity detected at t = 1".into());
            }
            if !off.is_empty() {
                failures.push(format!("{} detection(s) at t = 1 away from z₁ = 0, ζ̂ = (±1, 0)", off.len()));
            }
            singular = pts(&r);
        } else if !r.is_empty() {
            failures.push(format!("{} detection(s) at t = {t}, expected none", r.points.len()));
        }
        println!("euclid-delta: t = {t}: {} detection(s), z₁ ∈ {:?}", r.points.len(), z0);
        times.push(DeltaTime {
            t,
            points: r.points.len(),
            z0_values: z0,
        });
        fields.push(psi);
    }
    field_figures(out, "psi", &fields.iter().collect::<Vec<_>>())?;

    let (gs, prop) = shadow_1d(&ev, &cfg.extrapolation())?;
    out.json("propagation_1d.json", &prop)?;
    for (k, tc) in prop.times.iter().enumerate() {
        emit(out, &format!("wavefront_sc_1d_{k}"), &tc.scwf, 1)?;
    }
    if prop.verdict != Verdict::ConsistentAtResolution {
        failures.push(format!(
            "1D propagation round trip: {} unmatched prediction(s), {} unmatched detection(s)",
            prop.unmatched_predictions, prop.unmatched_detections
        ));
    }
    println!(
        "euclid-delta: 1D round trip from WF(ψ(1)) = {:?}: {:?}",
        pts(&prop.wf_t0),
        prop.verdict
    );
    let ok = failures.is_empty();
    let verdict = if ok { "consistent" } else { "violation" };
    let summary = DeltaSummary {
        verdict: verdict.into(),
        singular_set: singular,
        times,
        shadow_1d: ShadowSummary {
            grid: gs,
            t0: prop.t0,
            times: prop.times.iter().map(|t| t.t).collect(),
            sources: pts(&prop.wf_t0),
            unmatched_predictions: prop.unmatched_predictions,
            unmatched_detections: prop.unmatched_detections,
            verdict: prop.verdict,
        },
        failures: failures.clone(),
    };
    report_verdict(out, &summary, verdict, ok, &failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        for name in [ExampleName::Airy, ExampleName::EuclidDelta] {
            let cfg = defaults(name);
            let back = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
            assert_eq!(back.to_toml(), cfg.to_toml());
            back.grid().unwrap();
        }
    }

    #[test]
    fn overlay_replaces_whole_sections() {
        let over = ScenarioConfig::parse("schema_version = 1\n[grid]\ndim = 2\nn = 256\nextent = 30.0\n").unwrap();
        let cfg = defaults(ExampleName::EuclidDelta).overlay(over);
        assert_eq!(cfg.grid().unwrap().n, 256);
        assert!(cfg.detection.is_some());
    }
}
