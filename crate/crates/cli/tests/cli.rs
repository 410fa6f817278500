use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sojourn"))
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut c = bin();
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    c.arg("--out-dir").arg(out).args(args);
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BUMP: &str = r#"
schema_version = 1
[metric]
family = "compact-bump"
dim = 2
r_pert = 3.0
bumps = [{ center = [0.0, 0.0], amplitude = 0.3, width = 1.0 }]
[integrator]
s_max = 30.0
[samples]
random = 100
radius = 2.5
"#;

/// Every regular file under `dir`, with contents, sorted by path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn flat_start_gives_straight_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "flat.toml",
        "schema_version = 1\n[metric]\nfamily = \"flat\"\ndim = 2\n[integrator]\ns_max = 6.0\n[samples]\nstarts = [[-2.0, 0.5, 2.0, 0.0]]\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["geodesic"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("paths/path_0000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "s,z0,z1,zeta0,zeta1,energy_drift");
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        // unit speed: z(s) = z₀ + s ζ̂
        assert!((v[1] - (-2.0 + v[0])).abs() < 1e-12);
        assert!((v[2] - 0.5).abs() < 1e-14);
        rows += 1;
    }
    assert!(rows >= 2);
    assert!(out.join("geodesic.svg").exists());
    assert!(out.join("scenario.toml").exists());
}

#[test]
fn malformed_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = write_config(tmp.path(), "bad.toml", "schema_version = 1\n[metric\nfamily = 3\n");
    let o = run(&["geodesic"], Some(&bad), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TOML parse error"), "{}", stderr(&o));

    let unknown = write_config(tmp.path(), "unknown.toml", "schema_version = 1\n[metric]\nfamily = \"flat\"\ndim = 2\ncurvature = 1.0\n");
    let o = run(&["geodesic"], Some(&unknown), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("curvature"), "{}", stderr(&o));

    let o = run(&["geodesic"], None, &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_example_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["example", "coulomb"], None, tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integration_failure_exits_one_with_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tight.toml",
        &BUMP.replace("s_max = 30.0", "s_max = 30.0\nmax_steps = 2").replace("random = 100", "random = 3"),
    );
    let o = run(&["geodesic"], Some(&cfg), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("sample 0") && err.contains("sample 2"), "{err}");
}

#[test]
fn bump_geodesics_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bump.toml", BUMP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["--seed", "3", "geodesic"], Some(&cfg), &a).status.success());
    assert!(run(&["--seed", "3", "--threads", "1", "geodesic"], Some(&cfg), &b).status.success());
    let names: Vec<_> = fs::read_dir(a.join("paths")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 100);
    for i in 0..100 {
        assert!(a.join(format!("paths/path_{i:04}.csv")).exists());
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    // a different seed draws different starts
    let c = tmp.path().join("c");
    assert!(run(&["--seed", "4", "geodesic"], Some(&cfg), &c).status.success());
    assert_ne!(fs::read(a.join("geodesic.json")).unwrap(), fs::read(c.join("geodesic.json")).unwrap());
}

#[test]
fn sojourn_tables_and_contact_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bump.toml", &BUMP.replace("random = 100", "random = 6"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run(&["sojourn"], Some(&cfg), &a);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run(&["sojourn"], Some(&cfg), &b).status.success());
    assert_eq!(snapshot(&a), snapshot(&b));
    let fwd = fs::read_to_string(a.join("sojourn_forward.csv")).unwrap();
    assert_eq!(fwd.lines().count(), 7);
    let contact = fs::read_to_string(a.join("contact.json")).unwrap();
    assert_eq!(contact.matches("\"passed\": true").count(), 6);

    let o = run(&["contact-check"], Some(&cfg), &tmp.path().join("c"));
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn long_range_sojourn_reports_both_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "lr.toml",
        "schema_version = 1\n[metric]\nfamily = \"radial-long-range\"\ndim = 2\nm = 1.0\n[samples]\nstarts = [[1.0, 0.0, 1.0, 0.0]]\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["sojourn"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sojourn_long_range.json")).unwrap()).unwrap();
    let lambda = v[0]["result"]["point"]["lambda"].as_f64().unwrap();
    // radial oracle: λ = m/2 + (m/2) ln 4 − F(r₀), F(r) = √(r²+mr) + (m/2) ln(2r+m+2√(r²+mr))
    let (m, r0) = (1.0f64, 1.0f64);
    let f = |r: f64| (r * r + m * r).sqrt() + 0.5 * m * (2.0 * r + m + 2.0 * (r * r + m * r).sqrt()).ln();
    let expect = 0.5 * m + 0.5 * m * 4f64.ln() - f(r0);
    assert!((lambda - expect).abs() < 1e-6, "{lambda} vs {expect}");
    assert!(v[0]["result"]["unsubtracted_drift"].as_f64().unwrap() >= 0.3);

    let o = run(&["contact-check"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evolve_then_wavefront() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ev.toml",
        r#"
schema_version = 1
[initial]
preset = "gaussian"
center = [0.0]
width = 1.0
momentum = [3.0]
[grid]
dim = 1
n = 1024
extent = 60.0
[evolution]
times = [0.5, 1.0]
[detection.wf]
sigma = 0.5
lattice = { min = -3.0, max = 3.0, spacing = 1.0 }
bands = [[8.0, 16.0], [16.0, 32.0]]
[detection.sc]
sigma = 0.5
lattice = { min = -3.0, max = 3.0, spacing = 0.5 }
bands = [[3.75, 7.5], [7.5, 15.0], [15.0, 30.0]]
"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["evolve"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..3 {
        assert!(out.join(format!("field_{k:03}.sjf")).exists());
        assert!(out.join(format!("field_{k:03}.csv")).exists());
    }
    assert!(out.join("field_abs.svg").exists() && out.join("field_phase.svg").exists());
    let evolve_json = fs::read_to_string(out.join("evolve.json")).unwrap();
    assert!(evolve_json.contains("\"norm_drift\""));

    let wout = tmp.path().join("wf");
    let field = out.join("field_002.sjf");
    let o = run(&["wavefront", "--field", field.to_str().unwrap()], Some(&cfg), &wout);
    assert!(o.status.success(), "{}", stderr(&o));
    // a Gaussian is smooth and rapidly decaying: no detections at all
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("WF: 0 point(s)") && stdout.contains("WF_sc: 0 point(s)"), "{stdout}");
    for f in ["wavefront_wf.json", "wavefront_wf.svg", "wavefront_sc.csv"] {
        assert!(wout.join(f).exists(), "{f}");
    }

    let o = run(&["wavefront", "--field", cfg.to_str().unwrap()], Some(&cfg), &wout);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nontrap_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nt.toml",
        &format!("{}\n[nontrap]\nhalf = 1.0\npositions = 3\ndirections = 4\n", BUMP.replace("[samples]\nrandom = 100\nradius = 2.5\n", "")),
    );
    let out = tmp.path().join("out");
    let o = run(&["nontrap"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("nontrap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 36);
    assert_eq!(csv.matches(",escaped,").count(), 36);
}

#[test]
fn airy_example_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["example", "airy"], None, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("verdict: smooth at t = 1, consistent"), "{stdout}");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["max_relative_error"].as_f64().unwrap() <= 1e-3);
    assert_eq!(summary["qsc_points"], serde_json::json!([[[-1.0], [0.5]]]));
    assert!(tmp.path().join("airy_compare.svg").exists());
}

#[test]
fn euclid_delta_example_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["example", "euclid-delta"], None, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("verdict: consistent"), "{stdout}");
    assert!(stdout.contains("t = 1: ") && stdout.contains("z₁ ∈ [-1.0, 0.0, 1.0]"), "{stdout}");
}

#[test]
fn example_overrides_and_format_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let over = write_config(tmp.path(), "over.toml", "schema_version = 1\n[output]\nformats = [\"json\"]\n");
    let out = tmp.path().join("out");
    let o = run(&["example", "airy"], Some(&over), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| n.ends_with(".json") || n == "scenario.toml"), "{names:?}");
}
