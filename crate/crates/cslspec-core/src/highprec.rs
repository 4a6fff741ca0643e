//! Arbitrary-precision [`Real`] backend.
//!
//! Wraps `astro_float::BigFloat` with a per-value precision tag; binary
//! operations run at the larger operand precision. Transcendental constants
//! are cached per thread.

use crate::arith::Real;
use crate::scaled::Scaled;
use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use std::cell::RefCell;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(
        Consts::new().expect("transcendental constants cache")
    );
}

const RM: RoundingMode = RoundingMode::ToEven;

/// Big float plus the precision (in bits) its operations should use.
#[derive(Clone, Debug)]
pub struct Bf {
    pub x: BigFloat,
    pub prec: usize,
}

impl Bf {
    pub fn with_prec(x: f64, prec: usize) -> Self {
        Bf {
            x: BigFloat::from_f64(x, prec),
            prec,
        }
    }

    /// Precision prototype: value 0 at `prec` bits.
    pub fn proto(prec: usize) -> Self {
        Bf::with_prec(0.0, prec)
    }
}

impl Real for Bf {
    fn lift(&self, v: f64) -> Self {
        Bf::with_prec(v, self.prec)
    }
    fn add(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        Bf {
            x: self.x.add(&o.x, p, RM),
            prec: p,
        }
    }
    fn sub(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        Bf {
            x: self.x.sub(&o.x, p, RM),
            prec: p,
        }
    }
    fn mul(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        Bf {
            x: self.x.mul(&o.x, p, RM),
            prec: p,
        }
    }
    fn div(&self, o: &Self) -> Self {
        let p = self.prec.max(o.prec);
        Bf {
            x: self.x.div(&o.x, p, RM),
            prec: p,
        }
    }
    fn neg(&self) -> Self {
        Bf {
            x: self.x.neg(),
            prec: self.prec,
        }
    }
    fn sqrt(&self) -> Self {
        Bf {
            x: self.x.sqrt(self.prec, RM),
            prec: self.prec,
        }
    }
    fn sin_cos(&self) -> (Self, Self) {
        CONSTS.with(|c| {
            let mut cc = c.borrow_mut();
            (
                Bf {
                    x: self.x.sin(self.prec, RM, &mut cc),
                    prec: self.prec,
                },
                Bf {
                    x: self.x.cos(self.prec, RM, &mut cc),
                    prec: self.prec,
                },
            )
        })
    }
    fn exp(&self) -> Self {
        CONSTS.with(|c| {
            let mut cc = c.borrow_mut();
            Bf {
                x: self.x.exp(self.prec, RM, &mut cc),
                prec: self.prec,
            }
        })
    }
    fn is_zero(&self) -> bool {
        self.x.is_zero()
    }
    fn mag_log2(&self) -> f64 {
        if self.x.is_zero() {
            return f64::NEG_INFINITY;
        }
        match top_mantissa(&self.x) {
            Some((m, e, _)) => e as f64 + m.log2(),
            None => f64::NEG_INFINITY,
        }
    }
    fn to_scaled(&self) -> Scaled {
        if self.x.is_zero() {
            return Scaled::ZERO;
        }
        match top_mantissa(&self.x) {
            Some((m, e, sign)) => Scaled::normalize(sign * m, e as i64),
            None => Scaled::ZERO,
        }
    }
}

/// Top 128 mantissa bits as (m ∈ [0.5, 1), binary exponent, sign), so that
/// value ≈ sign · m · 2^e.
fn top_mantissa(x: &BigFloat) -> Option<(f64, i32, f64)> {
    let (words, _n, sign, exp, _inexact) = x.as_raw_parts()?;
    if words.is_empty() {
        return None;
    }
    // words are least-significant first
    let top = words[words.len() - 1] as f64;
    let next = if words.len() >= 2 {
        words[words.len() - 2] as f64
    } else {
        0.0
    };
    let two64 = f64::powi(2.0, 64);
    let m = (top + next / two64) / two64; // in [0.5, 1) for a normalized value
    let s = match sign {
        Sign::Pos => 1.0,
        Sign::Neg => -1.0,
    };
    Some((m, exp, s))
}
