//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to up to [`MAX_DIM`] independent variables. Metric families are
//! written once in terms of jets, which yields exact first and second
//! derivatives for the geodesic and variational equations.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest number of independent variables a jet tracks.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; MAX_DIM],
    pub h: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub const ZERO: Jet = Jet::constant(0.0);
    pub const ONE: Jet = Jet::constant(1.0);

    pub const fn constant(v: f64) -> Jet {
        Jet {
            v,
            g: [0.0; MAX_DIM],
            h: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_i` evaluated at `x`.
    pub fn var(x: f64, i: usize) -> Jet {
        let mut j = Jet::constant(x);
        j.g[i] = 1.0;
        j
    }

    /// Coordinate jets for a point.
    pub fn point(z: &[f64]) -> Vec<Jet> {
        z.iter().enumerate().map(|(i, &x)| Jet::var(x, i)).collect()
    }

    /// Compose with a scalar function given its value and first two
    /// derivatives at `self.v`.
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        for i in 0..MAX_DIM {
            out.g[i] = f1 * self.g[i];
            for k in 0..MAX_DIM {
                out.h[i][k] = f1 * self.h[i][k] + f2 * self.g[i] * self.g[k];
            }
        }
        out
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(self) -> Jet {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn powf(self, p: f64) -> Jet {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn powi(self, p: i32) -> Jet {
        let x = self.v;
        let pf = p as f64;
        self.chain(
            x.powi(p),
            pf * x.powi(p - 1),
            pf * (pf - 1.0) * x.powi(p - 2),
        )
    }

    pub fn scale(self, a: f64) -> Jet {
        let mut out = self;
        out.v *= a;
        for i in 0..MAX_DIM {
            out.g[i] *= a;
            for k in 0..MAX_DIM {
                out.h[i][k] *= a;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for i in 0..MAX_DIM {
            self.g[i] += o.g[i];
            for k in 0..MAX_DIM {
                self.h[i][k] += o.h[i][k];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..MAX_DIM {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for k in 0..MAX_DIM {
                out.h[i][k] = self.h[i][k] * o.v
                    + self.v * o.h[i][k]
                    + self.g[i] * o.g[k]
                    + self.g[k] * o.g[i];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, a: f64) -> Jet {
        self.v += a;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, a: f64) -> Jet {
        self.v -= a;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[Jet]) -> Jet, x: [f64; 2]) {
        let j = f(&Jet::point(&x));
        let val = |p: [f64; 2]| f(&[Jet::constant(p[0]), Jet::constant(p[1])]).v;
        let e = 1e-4;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += e;
            xm[i] -= e;
            let d = (val(xp) - val(xm)) / (2.0 * e);
            assert!((d - j.g[i]).abs() < 1e-7, "grad {i}: {d} vs {}", j.g[i]);
            for k in 0..2 {
                let mut pp = x;
                let mut pm = x;
                let mut mp = x;
                let mut mm = x;
                pp[i] += e;
                pp[k] += e;
                pm[i] += e;
                pm[k] -= e;
                mp[i] -= e;
                mp[k] += e;
                mm[i] -= e;
                mm[k] -= e;
                let d2 = (val(pp) - val(pm) - val(mp) + val(mm)) / (4.0 * e * e);
                assert!((d2 - j.h[i][k]).abs() < 1e-5, "hess {i}{k}: {d2} vs {}", j.h[i][k]);
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences() {
        fd_check(
            |z| {
                let r2 = z[0] * z[0] + z[1] * z[1];
                (r2.scale(-0.5)).exp() * z[0] / (r2 + 1.0).sqrt() + (z[1] + 3.0).ln()
            },
            [0.3, -0.7],
        );
        fd_check(|z| z[0].powf(1.5) * z[1].powi(3) - z[0] / z[1], [1.2, 0.8]);
    }
}
