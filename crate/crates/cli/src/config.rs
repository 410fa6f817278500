//! Scenario files.
//!
//! A scenario is a TOML document with a `schema_version` key and optional
//! sections. Each command checks for the sections it needs. Unknown keys are
//! rejected everywhere.
//!
//! ```toml
//! schema_version = 1
//!
//! [metric]
//! family = "compact-bump"      # "flat" | "compact-bump" | "radial-long-range"
//! dim = 2
//! r_pert = 3.0
//! [[metric.bumps]]
//! center = [0.5, 0.0]
//! amplitude = 0.3
//! width = 0.7
//!
//! [potential]
//! c = 0.0
//! [potential.profile]          # optional compactly supported part
//! r_pert = 9.0
//! cutoff_width = 1.0
//! bumps = [{ center = [-5.0], amplitude = 0.2, width = 1.0 }]
//!
//! [initial]
//! preset = "airy-1d"           # euclid-delta-1d/2d, airy-1d, gaussian,
//!                              # plane-wave, chirped-gaussian
//! [grid]
//! dim = 1
//! n = 4096
//! extent = 80.0
//!
//! [evolution]
//! times = [1.0]
//! dt = 1e-3
//!
//! [detection.wf]               # also detection.sc and detection.qsc
//! sigma = 0.3
//! lattice = { min = -5.0, max = 5.0, spacing = 0.5 }
//! bands = [[40.0, 80.0], [80.0, 160.0]]
//!
//! [samples]
//! starts = [[-2.0, 0.3, 1.0, 0.0]]   # z followed by a direction
//! random = 16                        # extra starts drawn with --seed
//!
//! [output]
//! formats = ["csv", "json", "svg"]
//! ```
//!
//! `integrator`, `sojourn` and `contact` take the fields of the corresponding
//! library configs; `nontrap` sets the sample grid of the `nontrap` command.
//! Missing fields take their defaults.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sojourn_core::evolve::presets::InitialData;
use sojourn_core::evolve::{EvolveConfig, Grid};
use sojourn_core::flow::{IntegratorConfig, PhasePoint};
use sojourn_core::geometry::{AngularMode, Bump, BumpProfile, MetricFamily, MetricSpec, PotentialSpec};
use sojourn_core::microlocal::{GaborConfig, LatticeSpec, QscConfig};
use sojourn_core::sojourn::{ContactConfig, ExtrapolationConfig};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub metric: Option<MetricSection>,
    pub potential: Option<PotentialSection>,
    pub initial: Option<InitialData>,
    pub grid: Option<GridSection>,
    pub evolution: Option<EvolutionSection>,
    pub detection: Option<DetectionSection>,
    pub integrator: Option<IntegratorConfig>,
    pub sojourn: Option<ExtrapolationConfig>,
    pub contact: Option<ContactConfig>,
    pub samples: Option<SampleSection>,
    pub nontrap: Option<NontrapSection>,
    pub output: Option<OutputSection>,
}

fn default_cutoff() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSection {
    Flat {
        dim: usize,
    },
    CompactBump {
        dim: usize,
        bumps: Vec<Bump>,
        r_pert: f64,
        #[serde(default = "default_cutoff")]
        cutoff_width: f64,
    },
    RadialLongRange {
        dim: usize,
        m: f64,
        #[serde(default)]
        r_inner: f64,
        #[serde(default)]
        modes: Vec<AngularMode>,
    },
}

impl MetricSection {
    pub fn to_spec(&self) -> Result<MetricSpec, CliError> {
        let spec = match self {
            MetricSection::Flat { dim } => MetricSpec::flat(*dim),
            MetricSection::CompactBump {
                dim,
                bumps,
                r_pert,
                cutoff_width,
            } => MetricSpec {
                dim: *dim,
                family: MetricFamily::CompactBump(BumpProfile {
                    bumps: bumps.clone(),
                    r_pert: *r_pert,
                    cutoff_width: *cutoff_width,
                }),
            },
            MetricSection::RadialLongRange { dim, m, r_inner, modes } => MetricSpec {
                dim: *dim,
                family: MetricFamily::RadialLongRange {
                    m: *m,
                    modes: modes.clone(),
                    r_inner: *r_inner,
                },
            },
        };
        spec.validate().map_err(|e| CliError::usage(format!("[metric]: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub c: f64,
    pub profile: Option<BumpProfile>,
}

impl PotentialSection {
    pub fn to_spec(&self, dim: usize) -> Result<PotentialSpec, CliError> {
        let spec = PotentialSpec {
            c: self.c,
            bumps: self.profile.clone(),
        };
        spec.validate(dim).map_err(|e| CliError::usage(format!("[potential]: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
}

impl GridSection {
    pub fn to_grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.dim, self.n, self.extent).map_err(|e| CliError::usage(format!("[grid]: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Exact free propagation when the potential vanishes, split-step
    /// otherwise.
    #[default]
    Auto,
    Spectral,
    SplitStep,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub times: Vec<f64>,
    pub method: Method,
    pub dt: f64,
    pub absorbing_width: f64,
    pub dealias: bool,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let e = EvolveConfig::default();
        EvolutionSection {
            times: vec![1.0],
            method: Method::Auto,
            dt: e.dt,
            absorbing_width: e.absorbing_width,
            dealias: e.dealias,
        }
    }
}

impl EvolutionSection {
    pub fn stepper(&self) -> EvolveConfig {
        EvolveConfig {
            dt: self.dt,
            absorbing_width: self.absorbing_width,
            dealias: self.dealias,
        }
    }
}

/// Gabor detector settings; the floors and cone count default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborSection {
    pub sigma: f64,
    pub lattice: LatticeSpec,
    pub bands: Vec<(f64, f64)>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_k_smooth")]
    pub k_smooth: f64,
    #[serde(default = "default_abs_floor")]
    pub abs_floor: f64,
    #[serde(default = "default_rel_floor")]
    pub rel_floor: f64,
}

fn default_directions() -> usize {
    16
}
fn default_k_smooth() -> f64 {
    4.0
}
fn default_abs_floor() -> f64 {
    1e-3
}
fn default_rel_floor() -> f64 {
    0.1
}

impl GaborSection {
    pub fn new(sigma: f64, lattice: (f64, f64, f64), bands: Vec<(f64, f64)>) -> GaborSection {
        GaborSection {
            sigma,
            lattice: LatticeSpec {
                min: lattice.0,
                max: lattice.1,
                spacing: lattice.2,
            },
            bands,
            directions: default_directions(),
            k_smooth: default_k_smooth(),
            abs_floor: default_abs_floor(),
            rel_floor: default_rel_floor(),
        }
    }

    pub fn to_config(&self) -> GaborConfig {
        GaborConfig {
            sigma: self.sigma,
            lattice: self.lattice.clone(),
            directions: self.directions,
            bands: self.bands.clone(),
            k_smooth: self.k_smooth,
            abs_floor: self.abs_floor,
            rel_floor: self.rel_floor,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QscSection {
    pub n: usize,
    pub extent: f64,
    pub window: (f64, f64),
    #[serde(default = "default_mask_cells")]
    pub mask_cells: f64,
    #[serde(default = "default_upsample")]
    pub upsample: usize,
    pub gabor: GaborSection,
}

fn default_mask_cells() -> f64 {
    4.0
}
fn default_upsample() -> usize {
    1
}

impl QscSection {
    pub fn to_config(&self) -> QscConfig {
        QscConfig {
            n: self.n,
            extent: self.extent,
            window: self.window,
            mask_cells: self.mask_cells,
            upsample: self.upsample,
            gabor: self.gabor.to_config(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub wf: Option<GaborSection>,
    pub sc: Option<GaborSection>,
    pub qsc: Option<QscSection>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// Each start is `z` followed by a direction, normalised on load.
    #[serde(default)]
    pub starts: Vec<Vec<f64>>,
    /// Additional random starts, positions uniform in the ball of `radius`
    /// and directions uniform on the sphere.
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    2.0
}

impl SampleSection {
    pub fn phase_points(&self, dim: usize, seed: u64) -> Result<Vec<PhasePoint>, CliError> {
        let mut out = Vec::with_capacity(self.starts.len() + self.random);
        for (i, s) in self.starts.iter().enumerate() {
            if s.len() != 2 * dim {
                return Err(CliError::usage(format!(
                    "[samples] start {i} has {} numbers, expected {}",
                    s.len(),
                    2 * dim
                )));
            }
            let d = &s[dim..];
            let r = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::usage(format!("[samples] start {i} has a zero direction")));
            }
            out.push(PhasePoint::new(s[..dim].to_vec(), d.iter().map(|x| x / r).collect()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..self.random {
            let z = loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break v.into_iter().map(|x| x * self.radius).collect::<Vec<_>>();
                }
            };
            let d = loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r > 1e-3 && r <= 1.0 {
                    break v.into_iter().map(|x| x / r).collect::<Vec<_>>();
                }
            };
            out.push(PhasePoint::new(z, d));
        }
        if out.is_empty() {
            return Err(CliError::usage("[samples] selects no starts"));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NontrapSection {
    /// Positions on a regular grid in `[-half, half]²`.
    pub half: f64,
    pub positions: usize,
    pub directions: usize,
}

impl Default for NontrapSection {
    fn default() -> Self {
        NontrapSection {
            half: 2.0,
            positions: 9,
            directions: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
    Field,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Used when `--out-dir` is not given.
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg, Format::Field]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: None,
            formats: all_formats(),
        }
    }
}

impl ScenarioConfig {
    pub fn empty() -> ScenarioConfig {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            ..Default::default()
        }
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "config: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    /// Sections present in `over` replace those in `self`.
    pub fn overlay(mut self, over: ScenarioConfig) -> ScenarioConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(metric, potential, initial, grid, evolution, detection, integrator, sojourn, contact, samples, nontrap, output);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn metric(&self) -> Result<MetricSpec, CliError> {
        self.metric
            .as_ref()
            .ok_or_else(|| CliError::usage("config has no [metric] section"))?
            .to_spec()
    }

    pub fn potential(&self, dim: usize) -> Result<PotentialSpec, CliError> {
        self.potential.clone().unwrap_or_default().to_spec(dim)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::usage("config has no [grid] section"))?
            .to_grid()
    }

    pub fn initial(&self) -> Result<&InitialData, CliError> {
        self.initial
            .as_ref()
            .ok_or_else(|| CliError::usage("config has no [initial] section"))
    }

    pub fn evolution(&self) -> EvolutionSection {
        self.evolution.clone().unwrap_or_default()
    }

    pub fn detection(&self) -> DetectionSection {
        self.detection.clone().unwrap_or_default()
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.clone().unwrap_or_default()
    }

    pub fn extrapolation(&self) -> ExtrapolationConfig {
        self.sojourn.clone().unwrap_or_default()
    }

    pub fn contact(&self) -> ContactConfig {
        self.contact.clone().unwrap_or_default()
    }

    pub fn samples(&self) -> Result<&SampleSection, CliError> {
        self.samples
            .as_ref()
            .ok_or_else(|| CliError::usage("config has no [samples] section"))
    }

    pub fn output(&self) -> OutputSection {
        self.output.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start_matches(' '))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = ScenarioConfig::parse(&doc).unwrap();
        let spec = cfg.metric().unwrap();
        assert_eq!(spec.dim, 2);
        assert_eq!(cfg.potential(1).unwrap().bumps.unwrap().r_pert, 9.0);
        assert_eq!(cfg.initial().unwrap().name(), "airy");
        assert_eq!(cfg.samples().unwrap().phase_points(2, 7).unwrap().len(), 17);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::parse("schema_version = 1\n[grid]\ndim = 1\nn = 64\nextent = 8.0\nsize = 3\n").unwrap_err();
        assert!(err.message.contains("size"), "{}", err.message);
        assert!(ScenarioConfig::parse("schema_version = 2\n").is_err());
        assert!(ScenarioConfig::parse("[grid]\n").is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let mut cfg = ScenarioConfig::empty();
        cfg.metric = Some(MetricSection::RadialLongRange {
            dim: 2,
            m: 1.0,
            r_inner: 0.5,
            modes: Vec::new(),
        });
        cfg.integrator = Some(IntegratorConfig::default());
        cfg.detection = Some(DetectionSection {
            wf: Some(GaborSection::new(0.3, (-1.0, 1.0, 0.5), vec![(4.0, 8.0), (8.0, 16.0)])),
            ..Default::default()
        });
        let back = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back.to_toml(), cfg.to_toml());
        assert_eq!(back.integrator().h_max, f64::INFINITY);
    }

    #[test]
    fn random_samples_depend_only_on_seed() {
        let s = SampleSection {
            starts: Vec::new(),
            random: 5,
            radius: 3.0,
        };
        let a = s.phase_points(2, 11).unwrap();
        assert_eq!(a, s.phase_points(2, 11).unwrap());
        assert_ne!(a, s.phase_points(2, 12).unwrap());
        for p in &a {
            assert!(p.z.iter().map(|x| x * x).sum::<f64>() <= 9.0);
            assert!((p.zeta.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
