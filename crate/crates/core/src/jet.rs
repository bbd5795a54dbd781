//! Scalars that carry exact first and second derivatives.
//!
//! Unit geometry is written once against [`Scalar`] and evaluated either on
//! plain `f64` or on [`Jet`], which propagates the gradient and Hessian with
//! respect to a unit's four pose parameters.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(value: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn ln(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    fn cst(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Second-order forward-mode number over `N` independent variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; N], h: [[0.0; N]; N] }
    }

    /// The `index`-th independent variable at `v`.
    pub fn variable(v: f64, index: usize) -> Self {
        let mut jet = Self::constant(v);
        jet.g[index] = 1.0;
        jet
    }

    /// `f(self)` given `f`, `f'` and `f''` at `self.v`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = df * self.g[i];
            for j in 0..N {
                out.h[i][j] = df * self.h[i][j] + d2f * self.g[i] * self.g[j];
            }
        }
        out
    }

    fn recip(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..N {
            self.g[i] += rhs.g[i];
            for j in 0..N {
                self.h[i][j] += rhs.h[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for i in 0..N {
            self.g[i] = -self.g[i];
            for j in 0..N {
                self.h[i][j] = -self.h[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.v * rhs.v);
        for i in 0..N {
            out.g[i] = self.v * rhs.g[i] + rhs.v * self.g[i];
            for j in 0..N {
                out.h[i][j] = self.v * rhs.h[i][j]
                    + rhs.v * self.h[i][j]
                    + self.g[i] * rhs.g[j]
                    + rhs.g[i] * self.g[j];
            }
        }
        out
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn cst(value: f64) -> Self {
        Self::constant(value)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }
    fn scale(mut self, k: f64) -> Self {
        self.v *= k;
        for i in 0..N {
            self.g[i] *= k;
            for j in 0..N {
                self.h[i][j] *= k;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn f<T: Scalar>(x: T, y: T) -> T {
        (x * x + y).sqrt() * x.sin() / (T::cst(2.0) + y.cos()) + (x + y).ln()
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (x0, y0) = (0.7, 1.3);
        let jet = f(Jet::<2>::variable(x0, 0), Jet::<2>::variable(y0, 1));
        assert_abs_diff_eq!(jet.v, f(x0, y0), epsilon = 1e-15);
        let step = 1e-5;
        let gx = (f(x0 + step, y0) - f(x0 - step, y0)) / (2.0 * step);
        let gy = (f(x0, y0 + step) - f(x0, y0 - step)) / (2.0 * step);
        assert_abs_diff_eq!(jet.g[0], gx, epsilon = 1e-9);
        assert_abs_diff_eq!(jet.g[1], gy, epsilon = 1e-9);
        let hxy = (f(x0 + step, y0 + step) - f(x0 + step, y0 - step) - f(x0 - step, y0 + step)
            + f(x0 - step, y0 - step))
            / (4.0 * step * step);
        assert_abs_diff_eq!(jet.h[0][1], hxy, epsilon = 1e-5);
        assert_abs_diff_eq!(jet.h[1][0], jet.h[0][1], epsilon = 1e-14);
        let hxx = (f(x0 + step, y0) - 2.0 * f(x0, y0) + f(x0 - step, y0)) / (step * step);
        assert_abs_diff_eq!(jet.h[0][0], hxx, epsilon = 1e-4);
    }
}
