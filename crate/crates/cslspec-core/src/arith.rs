//! Scalar abstraction and complex layer.
//!
//! Mode functions and kernel combinations are written once against the
//! [`Real`] trait and instantiated either with the fast f64-backed scaled
//! representation or with arbitrary-precision floats, so the adaptive
//! precision escalation never risks two diverging transcriptions of the same
//! formula.

use crate::scaled::Scaled;
use num_complex::Complex64;

pub trait Real: Clone + std::fmt::Debug {
    /// A new value carrying `self`'s precision context.
    fn lift(&self, x: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// (sin, cos) of self.
    fn sin_cos(&self) -> (Self, Self);
    fn exp(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// log2 of the magnitude; −∞ for zero. Approximate; for monitoring.
    fn mag_log2(&self) -> f64;
    fn to_scaled(&self) -> Scaled;
    fn to_f64(&self) -> f64 {
        self.to_scaled().to_f64()
    }
}

impl Real for f64 {
    fn lift(&self, x: f64) -> f64 {
        x
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> f64 {
        self / o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn sin_cos(&self) -> (f64, f64) {
        f64::sin_cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn mag_log2(&self) -> f64 {
        self.abs().log2()
    }
    fn to_scaled(&self) -> Scaled {
        Scaled::from_f64(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Real for Scaled {
    fn lift(&self, x: f64) -> Self {
        Scaled::from_f64(x)
    }
    fn add(&self, o: &Self) -> Self {
        Scaled::add(*self, *o)
    }
    fn sub(&self, o: &Self) -> Self {
        Scaled::sub(*self, *o)
    }
    fn mul(&self, o: &Self) -> Self {
        Scaled::mul(*self, *o)
    }
    fn div(&self, o: &Self) -> Self {
        Scaled::div(*self, *o)
    }
    fn neg(&self) -> Self {
        Scaled::neg(*self)
    }
    fn sqrt(&self) -> Self {
        Scaled::sqrt(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        // Phases beyond f64 range would need argument reduction we cannot do
        // at this precision; the adaptive path evaluates those with big
        // floats instead.
        let x = self.to_f64();
        debug_assert!(x.is_finite(), "sin_cos argument out of f64 range: {self:?}");
        let (s, c) = x.sin_cos();
        (Scaled::from_f64(s), Scaled::from_f64(c))
    }
    fn exp(&self) -> Self {
        let x = self.to_f64();
        if x < -745.0 {
            return Scaled::ZERO;
        }
        assert!(x < 709.0, "scaled exp overflow: argument {x}");
        Scaled::from_f64(x.exp())
    }
    fn is_zero(&self) -> bool {
        Scaled::is_zero(*self)
    }
    fn mag_log2(&self) -> f64 {
        Scaled::mag_log2(*self)
    }
    fn to_scaled(&self) -> Scaled {
        *self
    }
}

/// Complex number over any [`Real`].
#[derive(Clone, Debug)]
pub struct Cx<T: Real> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cx { re, im }
    }

    pub fn from_f64(proto: &T, re: f64, im: f64) -> Self {
        Cx {
            re: proto.lift(re),
            im: proto.lift(im),
        }
    }

    /// e^{iθ}
    pub fn expi(theta: &T) -> Self {
        let (s, c) = theta.sin_cos();
        Cx { re: c, im: s }
    }

    pub fn add(&self, o: &Self) -> Self {
        Cx {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Cx {
            re: self.re.sub(&o.re),
            im: self.im.sub(&o.im),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Cx {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn conj(&self) -> Self {
        Cx {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    pub fn neg(&self) -> Self {
        Cx {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    /// Multiply by a real scalar.
    pub fn scale(&self, s: &T) -> Self {
        Cx {
            re: self.re.mul(s),
            im: self.im.mul(s),
        }
    }

    /// Divide by a real scalar.
    pub fn unscale(&self, s: &T) -> Self {
        Cx {
            re: self.re.div(s),
            im: self.im.div(s),
        }
    }

    /// Multiply by i.
    pub fn mul_i(&self) -> Self {
        Cx {
            re: self.im.neg(),
            im: self.re.clone(),
        }
    }

    /// |z|² as a real.
    pub fn abs2(&self) -> T {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn mag_log2(&self) -> f64 {
        self.re.mag_log2().max(self.im.mag_log2())
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Small positive integer power.
pub fn powi<T: Real>(x: &T, n: u32) -> T {
    let mut acc = x.lift(1.0);
    let mut base = x.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(&base);
        }
        base = base.mul(&base);
        k >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_mul_matches_num_complex() {
        let a = Cx::new(Scaled::from_f64(1.3), Scaled::from_f64(-0.7));
        let b = Cx::new(Scaled::from_f64(-2.1), Scaled::from_f64(0.4));
        let prod = a.mul(&b).to_c64();
        let direct = Complex64::new(1.3, -0.7) * Complex64::new(-2.1, 0.4);
        assert!((prod - direct).norm() < 1e-14);
    }

    #[test]
    fn expi_is_unit_modulus() {
        let th = Scaled::from_f64(2.5);
        let e = Cx::expi(&th);
        assert!((e.abs2().to_f64() - 1.0).abs() < 1e-14);
        assert!((e.to_c64() - Complex64::new(2.5f64.cos(), 2.5f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn powi_matches() {
        let x = Scaled::from_f64(1.7);
        assert!((powi(&x, 5).to_f64() - 1.7f64.powi(5)).abs() < 1e-12);
    }
}
