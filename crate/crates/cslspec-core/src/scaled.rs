//! Wide-range scaled floating point.
//!
//! A [`Scaled`] value is a signed f64 mantissa with |m| in [1, 2) (or exactly
//! zero) paired with a separate binary exponent, so that products spanning
//! thousands of decades — routine inside the collapse kernels, where single
//! factors like η′⁸ overflow f64 — never saturate. Overflow is handled by
//! exponent bookkeeping, never by clamping a mantissa.

use serde::{Deserialize, Serialize};

/// value = `mantissa` · 2^`exp2`, with `mantissa` zero or |mantissa| ∈ [1, 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub mantissa: f64,
    pub exp2: i64,
}

const SIGN_AND_FRACTION: u64 = 0x800f_ffff_ffff_ffff;
const EXP_ONE: u64 = 1023u64 << 52;

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: 0.0,
        exp2: 0,
    };
    pub const ONE: Scaled = Scaled {
        mantissa: 1.0,
        exp2: 0,
    };

    /// Exact decomposition of a finite f64 (subnormals included).
    pub fn from_f64(x: f64) -> Scaled {
        assert!(x.is_finite(), "scaled value must be finite, got {x}");
        if x == 0.0 {
            return Scaled::ZERO;
        }
        let bits = x.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        if raw_exp == 0 {
            // subnormal: renormalize through an exact power-of-two scale-up
            let s = Scaled::from_f64(x * f64::powi(2.0, 100));
            return Scaled {
                mantissa: s.mantissa,
                exp2: s.exp2 - 100,
            };
        }
        Scaled {
            mantissa: f64::from_bits((bits & SIGN_AND_FRACTION) | EXP_ONE),
            exp2: raw_exp - 1023,
        }
    }

    /// `m · 2^e` with `m` any finite f64.
    pub fn normalize(m: f64, e: i64) -> Scaled {
        if m == 0.0 {
            return Scaled::ZERO;
        }
        let s = Scaled::from_f64(m);
        Scaled {
            mantissa: s.mantissa,
            exp2: s.exp2 + e,
        }
    }

    /// Saturating conversion: ±inf beyond f64 range, signed zero below it.
    pub fn to_f64(self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        if self.exp2 > 1023 {
            return f64::INFINITY * self.mantissa.signum();
        }
        if self.exp2 < -1074 {
            return 0.0 * self.mantissa.signum();
        }
        let e1 = (self.exp2 / 2) as i32;
        let e2 = (self.exp2 - self.exp2 / 2) as i32;
        self.mantissa * f64::powi(2.0, e1) * f64::powi(2.0, e2)
    }

    pub fn is_zero(self) -> bool {
        self.mantissa == 0.0
    }

    pub fn abs(self) -> Scaled {
        Scaled {
            mantissa: self.mantissa.abs(),
            exp2: self.exp2,
        }
    }

    pub fn neg(self) -> Scaled {
        Scaled {
            mantissa: -self.mantissa,
            exp2: self.exp2,
        }
    }

    pub fn signum(self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn mul(self, o: Scaled) -> Scaled {
        if self.is_zero() || o.is_zero() {
            return Scaled::ZERO;
        }
        Scaled::normalize(self.mantissa * o.mantissa, self.exp2 + o.exp2)
    }

    pub fn div(self, o: Scaled) -> Scaled {
        assert!(!o.is_zero(), "scaled division by zero");
        if self.is_zero() {
            return Scaled::ZERO;
        }
        Scaled::normalize(self.mantissa / o.mantissa, self.exp2 - o.exp2)
    }

    pub fn recip(self) -> Scaled {
        Scaled::ONE.div(self)
    }

    /// Addition with exact exponent alignment; an addend more than ~108
    /// binary orders below the other is absorbed (beyond f64 resolution).
    pub fn add(self, o: Scaled) -> Scaled {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let d = self.exp2 - o.exp2;
        if d >= 108 {
            return self;
        }
        if d <= -108 {
            return o;
        }
        if d >= 0 {
            Scaled::normalize(self.mantissa + o.mantissa * f64::powi(2.0, -d as i32), self.exp2)
        } else {
            Scaled::normalize(o.mantissa + self.mantissa * f64::powi(2.0, d as i32), o.exp2)
        }
    }

    pub fn sub(self, o: Scaled) -> Scaled {
        self.add(o.neg())
    }

    pub fn sqrt(self) -> Scaled {
        assert!(
            self.mantissa >= 0.0,
            "scaled sqrt of negative value {self:?}"
        );
        if self.is_zero() {
            return Scaled::ZERO;
        }
        if self.exp2 % 2 == 0 {
            Scaled::normalize(self.mantissa.sqrt(), self.exp2 / 2)
        } else {
            let e = self.exp2 - 1; // even; folds one factor of 2 into the mantissa
            Scaled::normalize((self.mantissa * 2.0).sqrt(), e / 2)
        }
    }

    /// Integer power by squaring (exact exponent arithmetic throughout).
    pub fn powi(self, n: i32) -> Scaled {
        if n == 0 {
            return Scaled::ONE;
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self;
        let mut acc = Scaled::ONE;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }

    /// log2 of the magnitude; −∞ for zero. Used for cancellation monitoring.
    pub fn mag_log2(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.exp2 as f64 + self.mantissa.abs().log2()
    }

    /// Base-10 logarithm of the magnitude; −∞ for zero.
    pub fn log10_abs(self) -> f64 {
        self.mag_log2() * std::f64::consts::LOG10_2
    }

    /// Approximate (mantissa in [1,10), exponent) base-10 view for display.
    pub fn to_decimal_parts(self) -> (f64, i64) {
        if self.is_zero() {
            return (0.0, 0);
        }
        let l10 = self.log10_abs();
        let mut e10 = l10.floor() as i64;
        let mut m10 = self.signum() * f64::powf(10.0, l10 - e10 as f64);
        if m10.abs() >= 10.0 {
            m10 /= 10.0;
            e10 += 1;
        }
        (m10, e10)
    }

    /// |self| compared to |other|.
    pub fn cmp_abs(self, o: Scaled) -> std::cmp::Ordering {
        if self.is_zero() && o.is_zero() {
            return std::cmp::Ordering::Equal;
        }
        self.mag_log2()
            .partial_cmp(&o.mag_log2())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl std::fmt::Display for Scaled {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (m10, e10) = self.to_decimal_parts();
        write!(
            f,
            "{:.16e}*2^{} (~{:.4}e{})",
            self.mantissa, self.exp2, m10, e10
        )
    }
}

impl From<f64> for Scaled {
    fn from(x: f64) -> Self {
        Scaled::from_f64(x)
    }
}

/// Deterministic left-to-right sum.
pub fn scaled_sum(values: &[Scaled]) -> Scaled {
    values.iter().fold(Scaled::ZERO, |acc, v| acc.add(*v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decomposition_round_trips_exactly() {
        for &x in &[
            1.0,
            -1.0,
            0.5,
            2.0,
            -3.75,
            1e300,
            -1e-300,
            5e-324, // smallest subnormal
            f64::MAX,
            f64::MIN_POSITIVE,
            std::f64::consts::PI,
        ] {
            let s = Scaled::from_f64(x);
            assert_eq!(s.to_f64(), x, "round trip failed for {x}");
            if x != 0.0 {
                assert!((1.0..2.0).contains(&s.mantissa.abs()), "bad mantissa {s:?}");
            }
        }
        assert_eq!(Scaled::from_f64(0.0), Scaled::ZERO);
    }

    #[test]
    fn exponents_go_far_beyond_f64() {
        // eta'^8 at eta' ~ 1e59 is ~1e472: must not saturate
        let eta = Scaled::from_f64(-5.25e59);
        let p8 = eta.powi(8);
        assert!((p8.log10_abs() - 8.0 * (59.0 + 5.25f64.log10())).abs() < 1e-9);
        // and back down
        let one = p8.div(p8);
        assert!((one.to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_handles_odd_exponents() {
        let v = Scaled::normalize(3.0, 101); // 3 * 2^101
        let r = v.sqrt();
        let expect = 3f64.sqrt() * f64::powi(2.0, 50) * std::f64::consts::SQRT_2;
        assert!((r.to_f64() / expect - 1.0).abs() < 1e-15);
    }

    #[test]
    fn display_shows_decimal_magnitude() {
        // 1.9481962473403334 * 2^1063 = 1.9253872575514166e320
        let v = Scaled::normalize(1.9481962473403334, 1063);
        let (m10, e10) = v.to_decimal_parts();
        assert_eq!(e10, 320);
        assert!((m10 - 1.9253872575514166).abs() < 1e-9);
        let shown = format!("{v}");
        assert!(shown.contains("e320"), "{shown}");
    }

    proptest! {
        #[test]
        fn mul_matches_f64_in_range(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            prop_assume!(a != 0.0 && b != 0.0);
            let s = Scaled::from_f64(a).mul(Scaled::from_f64(b));
            let direct = a * b;
            prop_assert!((s.to_f64() - direct).abs() <= direct.abs() * 1e-15);
        }

        #[test]
        fn add_matches_f64_in_range(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            let s = Scaled::from_f64(a).add(Scaled::from_f64(b));
            let direct = a + b;
            if direct == 0.0 {
                prop_assert!(s.to_f64().abs() <= (a.abs() + b.abs()) * 1e-15);
            } else {
                prop_assert!((s.to_f64() - direct).abs() <= direct.abs() * 1e-14);
            }
        }

        #[test]
        fn div_matches_f64_in_range(a in -1e100f64..1e100, b in 1e-100f64..1e100) {
            prop_assume!(a != 0.0);
            let s = Scaled::from_f64(a).div(Scaled::from_f64(b));
            let direct = a / b;
            prop_assert!((s.to_f64() - direct).abs() <= direct.abs() * 1e-15);
        }

        #[test]
        fn round_trip_any_finite(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = Scaled::from_f64(x);
            prop_assert_eq!(s.to_f64(), x);
        }

        #[test]
        fn powi_matches_repeated_mul(x in 0.1f64..10.0, n in 1i32..12) {
            let p = Scaled::from_f64(x).powi(n);
            let mut direct = Scaled::ONE;
            for _ in 0..n { direct = direct.mul(Scaled::from_f64(x)); }
            prop_assert!((p.to_f64() / direct.to_f64() - 1.0).abs() < 1e-13);
        }
    }
}
