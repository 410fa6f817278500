//! Dormand–Prince 5(4) with dense output.
//!
//! Adaptive embedded Runge–Kutta pair with the standard fourth-order
//! continuous extension. The driver exposes single steps so callers can
//! locate events on the dense interpolant and re-step exactly onto them.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Dense-output polynomial for one accepted step `[s0, s0 + h]`.
#[derive(Clone, Debug)]
pub struct Segment {
    pub s0: f64,
    pub h: f64,
    cont: [Vec<f64>; 5],
}

impl Segment {
    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    pub fn eval_component(&self, s: f64, i: usize) -> f64 {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.cont;
        c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])))
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        (0..self.cont[0].len()).map(|i| self.eval_component(s, i)).collect()
    }
}

pub type Rhs<'a> = dyn FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a;

pub struct Dopri5<'a> {
    f: Box<Rhs<'a>>,
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    s: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    prev: Option<(f64, Vec<f64>, Vec<f64>)>,
    last: Option<Segment>,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    pub n_steps: usize,
    pub n_rejected: usize,
}

impl<'a> Dopri5<'a> {
    pub fn new(
        f: impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a,
        s0: f64,
        y0: Vec<f64>,
        rtol: f64,
        atol: f64,
        h_max: f64,
    ) -> Result<Self> {
        if !(rtol > 0.0) || !(atol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        let n = y0.len();
        let mut me = Dopri5 {
            f: Box::new(f),
            rtol,
            atol,
            h_max: if h_max > 0.0 { h_max } else { f64::INFINITY },
            s: s0,
            y: y0,
            k1: vec![0.0; n],
            h: 0.0,
            prev: None,
            last: None,
            k: std::array::from_fn(|_| vec![0.0; n]),
            ytmp: vec![0.0; n],
            n_steps: 0,
            n_rejected: 0,
        };
        let mut k1 = vec![0.0; n];
        (me.f)(s0, &me.y, &mut k1)?;
        me.k1 = k1;
        me.h = me.initial_step()?;
        Ok(me)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn last_segment(&self) -> Option<&Segment> {
        self.last.as_ref()
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.y.len() {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let y1: Vec<f64> = self.y.iter().zip(&self.k1).map(|(y, k)| y + h0 * k).collect();
        let mut f1 = vec![0.0; self.y.len()];
        (self.f)(self.s + h0, &y1, &mut f1)?;
        let mut d2 = 0.0;
        for i in 0..self.y.len() {
            let sc = self.scale(self.y[i], self.y[i]);
            d2 += ((f1[i] - self.k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.h_max))
    }

    /// One Runge–Kutta step of size `h` from the current state. Returns the
    /// candidate state, its derivative and the scaled error norm.
    fn attempt(&mut self, h: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.y.len();
        let s = self.s;
        let y = &self.y;
        let k1 = &self.k1;
        let [_, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let yt = &mut self.ytmp;
        for i in 0..n {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        (self.f)(s + C2 * h, yt, k2)?;
        for i in 0..n {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        (self.f)(s + C3 * h, yt, k3)?;
        for i in 0..n {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        (self.f)(s + C4 * h, yt, k4)?;
        for i in 0..n {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        (self.f)(s + C5 * h, yt, k5)?;
        for i in 0..n {
            yt[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        (self.f)(s + h, yt, k6)?;
        let mut ynew = vec![0.0; n];
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        (self.f)(s + h, &ynew, k7)?;
        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            return Ok((ynew, f64::INFINITY));
        }
        Ok((ynew, err))
    }

    fn accept(&mut self, h: f64, ynew: Vec<f64>) {
        let n = self.y.len();
        let k = &self.k;
        let k1 = &self.k1;
        let mut c0 = vec![0.0; n];
        let mut c1 = vec![0.0; n];
        let mut c2 = vec![0.0; n];
        let mut c3 = vec![0.0; n];
        let mut c4 = vec![0.0; n];
        for i in 0..n {
            let ydiff = ynew[i] - self.y[i];
            let bspl = h * k1[i] - ydiff;
            c0[i] = self.y[i];
            c1[i] = ydiff;
            c2[i] = bspl;
            c3[i] = ydiff - h * k[6][i] - bspl;
            c4[i] = h
                * (D1 * k1[i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        self.last = Some(Segment {
            s0: self.s,
            h,
            cont: [c0, c1, c2, c3, c4],
        });
        let old_y = std::mem::replace(&mut self.y, ynew);
        let old_k1 = std::mem::replace(&mut self.k1, self.k[6].clone());
        self.prev = Some((self.s, old_y, old_k1));
        self.s += h;
        self.n_steps += 1;
    }

    /// Take one accepted adaptive step, never passing `s_limit`.
    pub fn step(&mut self, s_limit: f64) -> Result<()> {
        let mut h = self.h.min(self.h_max);
        let mut rejected = false;
        loop {
            let remaining = s_limit - self.s;
            if remaining <= 0.0 {
                return Err(Error::Integration {
                    s: self.s,
                    reason: "step requested beyond the integration limit".into(),
                });
            }
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            if h <= 1e-14 * self.s.abs().max(1.0) {
                return Err(Error::Integration {
                    s: self.s,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let (ynew, err) = self.attempt(h)?;
            if err <= 1.0 {
                let mut fac = if err == 0.0 { FAC_MAX } else { SAFETY * err.powf(-0.2) };
                fac = fac.clamp(FAC_MIN, if rejected { 1.0 } else { FAC_MAX });
                let h_used = h;
                self.accept(h_used, ynew);
                if clipped {
                    self.s = s_limit;
                }
                self.h = (h_used * fac).min(self.h_max);
                return Ok(());
            }
            self.n_rejected += 1;
            rejected = true;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h *= fac;
        }
    }

    /// Undo the most recent step.
    pub fn rewind(&mut self) -> Result<()> {
        let (s, y, k1) = self.prev.take().ok_or_else(|| Error::Integration {
            s: self.s,
            reason: "nothing to rewind".into(),
        })?;
        self.s = s;
        self.y = y;
        self.k1 = k1;
        self.last = None;
        self.n_steps -= 1;
        Ok(())
    }

    /// Take a step of exactly `h` with no error control. Used to land on an
    /// event located within a step that already passed the error test.
    pub fn step_exact(&mut self, h: f64) -> Result<()> {
        let keep = self.h;
        let (ynew, _) = self.attempt(h)?;
        if ynew.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                s: self.s,
                reason: "non-finite state".into(),
            });
        }
        let target = self.s + h;
        self.accept(h, ynew);
        self.s = target;
        self.h = keep;
        Ok(())
    }
}

/// Root of `f` on `[a, b]` given a sign change, by the Illinois method.
pub fn find_root(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_to(rtol: f64, t_end: f64) -> (Vec<f64>, usize) {
        // harmonic oscillator y'' = -y
        let mut d = Dopri5::new(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            vec![1.0, 0.0],
            rtol,
            rtol,
            f64::INFINITY,
        )
        .unwrap();
        while d.s() < t_end {
            d.step(t_end).unwrap();
        }
        (d.y().to_vec(), d.n_steps)
    }

    #[test]
    fn oscillator_accuracy_scales_with_tolerance() {
        let t = 10.0;
        let (y, _) = integrate_to(1e-12, t);
        assert!((y[0] - t.cos()).abs() < 1e-10);
        assert!((y[1] + t.sin()).abs() < 1e-10);
        let (y6, n6) = integrate_to(1e-6, t);
        let (_, n12) = integrate_to(1e-12, t);
        assert!((y6[0] - t.cos()).abs() < 1e-4);
        assert!(n12 > n6);
    }

    #[test]
    fn dense_output_is_fourth_order_accurate() {
        let mut d = Dopri5::new(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            vec![1.0],
            1e-10,
            1e-10,
            f64::INFINITY,
        )
        .unwrap();
        d.step(5.0).unwrap();
        d.step(5.0).unwrap();
        let seg = d.last_segment().unwrap().clone();
        for j in 0..=10 {
            let s = seg.s0 + seg.h * j as f64 / 10.0;
            assert!((seg.eval_component(s, 0) - s.exp()).abs() < 1e-8 * s.exp());
        }
    }

    #[test]
    fn rewind_and_exact_step_land_on_target() {
        let mut d = Dopri5::new(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            vec![1.0],
            1e-12,
            1e-12,
            f64::INFINITY,
        )
        .unwrap();
        d.step(10.0).unwrap();
        d.step(10.0).unwrap();
        let s1 = d.s();
        d.rewind().unwrap();
        let s0 = d.s();
        let mid = 0.5 * (s0 + s1);
        d.step_exact(mid - s0).unwrap();
        assert_eq!(d.s(), mid);
        assert!((d.y()[0] - (-mid).exp()).abs() < 1e-12);
    }

    #[test]
    fn illinois_root() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }
}
