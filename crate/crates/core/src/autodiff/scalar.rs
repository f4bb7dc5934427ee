use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type a loss can be written against once and evaluated as plain
/// `f64` or recorded on a [`Tape`](super::Tape).
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant (no derivative information).
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// `bias + Σ coeffs[i]·xs[i]` with constant coefficients.
    fn affine(bias: f64, coeffs: &[f64], xs: &[Self]) -> Self {
        let mut acc = Self::cst(bias);
        for (&c, &x) in coeffs.iter().zip(xs) {
            acc = acc + x * Self::cst(c);
        }
        acc
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn affine(bias: f64, coeffs: &[f64], xs: &[Self]) -> Self {
        coeffs.iter().zip(xs).fold(bias, |acc, (c, x)| acc + c * x)
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
}
