use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Number of spatial axes a jet tracks. Problems here are at most 2-D.
pub const MAX_AXES: usize = 2;

/// Second-order jet: value, `∂/∂x_k` and `∂²/∂x_k²` for each tracked axis.
///
/// Mixed partials are never formed. Because every rule below only combines
/// components of the same axis, several axes can be seeded at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub d1: [T; MAX_AXES],
    pub d2: [T; MAX_AXES],
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(v: T) -> Self {
        let z = T::cst(0.0);
        Self {
            v,
            d1: [z; MAX_AXES],
            d2: [z; MAX_AXES],
        }
    }

    /// The coordinate `x_axis` itself: unit first derivative along `axis`.
    pub fn variable(v: T, axis: usize) -> Self {
        let mut j = Self::constant(v);
        j.d1[axis] = T::cst(1.0);
        j
    }

    fn chain(self, f: T, df: T, d2f: T) -> Self {
        let mut out = Self::constant(f);
        for k in 0..MAX_AXES {
            out.d1[k] = df * self.d1[k];
            out.d2[k] = df * self.d2[k] + d2f * self.d1[k] * self.d1[k];
        }
        out
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let dt = T::cst(1.0) - t * t;
        let d2t = T::cst(-2.0) * t * dt;
        self.chain(t, dt, d2t)
    }

    pub fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }

    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::constant(T::cst(1.0)),
            1 => self,
            _ => {
                let p = self.v.powi(n);
                let dp = self.v.powi(n - 1).scale(n as f64);
                let d2p = self.v.powi(n - 2).scale((n * (n - 1)) as f64);
                self.chain(p, dp, d2p)
            }
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            v: self.v.scale(c),
            d1: self.d1.map(|d| d.scale(c)),
            d2: self.d2.map(|d| d.scale(c)),
        }
    }

    pub fn map_scalar<U: Scalar>(self, f: impl Fn(T) -> U) -> Jet2<U> {
        Jet2 {
            v: f(self.v),
            d1: self.d1.map(&f),
            d2: self.d2.map(&f),
        }
    }
}

impl Jet2<f64> {
    /// Promote a constant `f64` jet into another scalar type.
    pub fn lift<T: Scalar>(self) -> Jet2<T> {
        self.map_scalar(T::cst)
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        let mut out = self;
        out.v = self.v + r.v;
        for k in 0..MAX_AXES {
            out.d1[k] = self.d1[k] + r.d1[k];
            out.d2[k] = self.d2[k] + r.d2[k];
        }
        out
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        self + (-r)
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d1: self.d1.map(|d| -d),
            d2: self.d2.map(|d| -d),
        }
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    /// `(fg)'' = f''g + 2f'g' + fg''`
    fn mul(self, r: Self) -> Self {
        let mut out = Self::constant(self.v * r.v);
        for k in 0..MAX_AXES {
            out.d1[k] = self.d1[k] * r.v + self.v * r.d1[k];
            out.d2[k] = self.d2[k] * r.v
                + (self.d1[k] * r.d1[k]).scale(2.0)
                + self.v * r.d2[k];
        }
        out
    }
}

impl<T: Scalar> Div for Jet2<T> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        // 1/g: first derivative -g'/g², second 2g'²/g³ - g''/g²
        let inv = T::cst(1.0) / r.v;
        let mut recip = Self::constant(inv);
        for k in 0..MAX_AXES {
            recip.d1[k] = -(r.d1[k] * inv * inv);
            recip.d2[k] = (r.d1[k] * r.d1[k] * inv * inv * inv).scale(2.0) - r.d2[k] * inv * inv;
        }
        self * recip
    }
}

/// Value, first and second derivative of `f` at `x` along `axis`.
///
/// `f` receives the coordinates as jets with `axis` seeded; other axes are
/// treated as constants.
pub fn spatial_jet<F>(f: F, x: &[f64], axis: usize) -> (f64, f64, f64)
where
    F: Fn(&[Jet2<f64>]) -> Jet2<f64>,
{
    assert!(axis < x.len() && axis < MAX_AXES, "axis {axis} out of range");
    let xs: Vec<Jet2<f64>> = x
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if k == axis {
                Jet2::variable(v, k)
            } else {
                Jet2::constant(v)
            }
        })
        .collect();
    let out = f(&xs);
    (out.v, out.d1[axis], out.d2[axis])
}
