//! Named initial data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{airy::ai, euclid_kernel, Field, Grid};
use crate::error::{Error, Result};
use crate::geometry::smooth_step;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `(-2πi)^{-1/2} e^{-iz₁²/2}`, the free kernel at `t = -1`, which
    /// focuses to `δ(z₁)` at `t = 1`. Windowed in `z₁`.
    #[serde(alias = "euclid-delta-1d", alias = "euclid-delta-2d")]
    EuclidDelta {
        window_radius: f64,
        window_width: f64,
    },
    /// `e^{-iz²/2} Ai(z)` in 1D.
    #[serde(alias = "airy-1d")]
    Airy(AiryWindow),
    Gaussian {
        center: Vec<f64>,
        width: f64,
        momentum: Vec<f64>,
    },
    /// `e^{iξ·z}` under a radial window.
    PlaneWave {
        xi: Vec<f64>,
        window_radius: f64,
        window_width: f64,
    },
    /// Gaussian envelope with the chirp `e^{-i|z-z_f|²/2t_f}`; focuses at
    /// `z_f` after time `t_f`.
    ChirpedGaussian {
        focus: Vec<f64>,
        width: f64,
        focus_time: f64,
    },
}

/// Truncation of the Airy datum to the box.
///
/// `Ai` decays on the right and oscillates with growing frequency on the
/// left. In periodic mode the samples with `x ≥ cut` stand for `x − L`, which
/// places the long oscillating tail on the far side of the box and keeps it
/// away from the comparison region; both ends are tapered smoothly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AiryWindow {
    pub periodic: bool,
    pub cut: f64,
    pub left_taper: f64,
    pub right_taper: f64,
}

impl Default for AiryWindow {
    fn default() -> Self {
        AiryWindow {
            periodic: true,
            cut: 8.0,
            left_taper: 10.0,
            right_taper: 2.0,
        }
    }
}

impl AiryWindow {
    /// Representative coordinate and window weight at grid coordinate `x`.
    pub fn place(&self, x: f64, extent: f64) -> (f64, f64) {
        let (w, left) = if self.periodic {
            (if x < self.cut { x } else { x - extent }, self.cut - extent)
        } else {
            (x, -0.5 * extent)
        };
        let weight = smooth_step((w - left) / self.left_taper) * smooth_step((self.cut - w) / self.right_taper);
        (w, weight)
    }
}

/// `ψ(1, z)` for the Airy datum: `(2πi)^{-1/2} e^{i(z³/3 + z²/2)}`.
pub fn airy_exact(z: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI).powf(-0.5)
        * Complex64::from_polar(1.0, z * z * z / 3.0 + 0.5 * z * z)
}

fn check_len(v: &[f64], dim: usize, what: &str) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Config(format!("{what} has {} components, grid is {dim}D", v.len())));
    }
    Ok(())
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::EuclidDelta { .. } => "euclid-delta",
            InitialData::Airy(_) => "airy",
            InitialData::Gaussian { .. } => "gaussian",
            InitialData::PlaneWave { .. } => "plane-wave",
            InitialData::ChirpedGaussian { .. } => "chirped-gaussian",
        }
    }

    /// Sample on `grid` at time stamp `t = 0`.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        let g = *grid;
        match self {
            InitialData::EuclidDelta {
                window_radius,
                window_width,
            } => {
                if !(*window_width > 0.0) {
                    return Err(Error::Config("window width must be positive".into()));
                }
                let (r, w) = (*window_radius, *window_width);
                Ok(Field::from_fn(g, 0.0, move |z| {
                    euclid_kernel(-1.0, &z[..1], &[0.0]).unwrap() * smooth_step((r - z[0].abs()) / w)
                }))
            }
            InitialData::Airy(win) => {
                if g.dim != 1 {
                    return Err(Error::Config("the Airy datum is one-dimensional".into()));
                }
                if !(win.left_taper > 0.0 && win.right_taper > 0.0) {
                    return Err(Error::Config("taper widths must be positive".into()));
                }
                let win = win.clone();
                Ok(Field::from_fn(g, 0.0, move |z| {
                    let (w, weight) = win.place(z[0], g.extent);
                    if weight == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    Complex64::from_polar(weight * ai(w), -0.5 * w * w)
                }))
            }
            InitialData::Gaussian {
                center,
                width,
                momentum,
            } => {
                check_len(center, g.dim, "center")?;
                check_len(momentum, g.dim, "momentum")?;
                if !(*width > 0.0) {
                    return Err(Error::Config("width must be positive".into()));
                }
                let (c, k, s) = (center.clone(), momentum.clone(), *width);
                Ok(Field::from_fn(g, 0.0, move |z| {
                    let mut r2 = 0.0;
                    let mut ph = 0.0;
                    for i in 0..z.len() {
                        r2 += (z[i] - c[i]).powi(2);
                        ph += k[i] * z[i];
                    }
                    Complex64::from_polar((-0.5 * r2 / (s * s)).exp(), ph)
                }))
            }
            InitialData::PlaneWave {
                xi,
                window_radius,
                window_width,
            } => {
                check_len(xi, g.dim, "xi")?;
                if !(*window_width > 0.0) {
                    return Err(Error::Config("window width must be positive".into()));
                }
                let (xi, r, w) = (xi.clone(), *window_radius, *window_width);
                Ok(Field::from_fn(g, 0.0, move |z| {
                    let rr = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let ph: f64 = xi.iter().zip(z).map(|(a, b)| a * b).sum();
                    Complex64::from_polar(smooth_step((r - rr) / w), ph)
                }))
            }
            InitialData::ChirpedGaussian {
                focus,
                width,
                focus_time,
            } => {
                check_len(focus, g.dim, "focus")?;
                if !(*width > 0.0) || *focus_time == 0.0 {
                    return Err(Error::Config("need width > 0 and focus_time ≠ 0".into()));
                }
                let (f, s, tf) = (focus.clone(), *width, *focus_time);
                Ok(Field::from_fn(g, 0.0, move |z| {
                    let r2: f64 = z.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum();
                    Complex64::from_polar((-0.5 * r2 / (s * s)).exp(), -0.5 * r2 / tf)
                }))
            }
        }
    }
}
