//! Floating-point values with a separate binary exponent.
//!
//! Products of several hundred factors of size `omega^2` leave the `f64`
//! range long before the sign information they carry stops being useful.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// `mant * 2^exp` with `|mant|` in `[1, 2)` (or exactly zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scaled {
    mant: f64,
    exp: i64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: 0.0, exp: 0 };
    pub const ONE: Scaled = Scaled { mant: 1.0, exp: 0 };

    pub fn new(x: f64) -> Self {
        debug_assert!(x.is_finite());
        if x == 0.0 {
            return Self::ZERO;
        }
        let (mant, exp) = frexp(x);
        Scaled { mant, exp }
    }

    fn normalized(mant: f64, exp: i64) -> Self {
        if mant == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = frexp(mant);
        Scaled { mant: m, exp: exp + e }
    }

    pub fn signum(&self) -> f64 {
        if self.mant == 0.0 {
            0.0
        } else {
            self.mant.signum()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0.0
    }

    /// Converts back, saturating to `+-inf` or `0`.
    pub fn to_f64(self) -> f64 {
        if self.mant == 0.0 {
            return 0.0;
        }
        if self.exp > 1023 {
            return self.mant.signum() * f64::INFINITY;
        }
        if self.exp < -1074 {
            return 0.0;
        }
        ldexp(self.mant, self.exp)
    }

    /// Ratio `self / other` as a plain `f64`.
    pub fn ratio(self, other: Scaled) -> f64 {
        (self / other).to_f64()
    }
}

/// Splits a finite nonzero `x` into `m * 2^e` with `|m|` in `[1, 2)`.
fn frexp(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal: lift into the normal range first
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let e = raw - 1023;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, e)
}

fn ldexp(m: f64, e: i64) -> f64 {
    // split the power so each factor stays representable
    let half = e / 2;
    m * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        Scaled::normalized(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Mul<f64> for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: f64) -> Scaled {
        self * Scaled::new(rhs)
    }
}

impl Div for Scaled {
    type Output = Scaled;
    fn div(self, rhs: Scaled) -> Scaled {
        debug_assert!(rhs.mant != 0.0);
        Scaled::normalized(self.mant / rhs.mant, self.exp - rhs.exp)
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, rhs: Scaled) -> Scaled {
        if self.mant == 0.0 {
            return rhs;
        }
        if rhs.mant == 0.0 {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = big.exp - small.exp;
        if shift > 60 {
            return big;
        }
        Scaled::normalized(big.mant + ldexp(small.mant, -shift), big.exp)
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, rhs: Scaled) -> Scaled {
        self + (-rhs)
    }
}

impl std::iter::Product for Scaled {
    fn product<I: Iterator<Item = Scaled>>(iter: I) -> Scaled {
        iter.fold(Scaled::ONE, |a, b| a * b)
    }
}

impl std::iter::Sum for Scaled {
    fn sum<I: Iterator<Item = Scaled>>(iter: I) -> Scaled {
        iter.fold(Scaled::ZERO, |a, b| a + b)
    }
}
