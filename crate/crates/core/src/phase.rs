//! Exact arithmetic on the circle group R/Z.
//!
//! A [`Frac128`] stores a point of R/Z as a 128-bit binary fraction. Sums and
//! integer multiples wrap modulo 2^128, which is exactly reduction modulo 1, so
//! `n·α mod 1` is never formed by accumulating floating increments.

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Neg, Sub};

const TWO_POW_NEG_128: f64 = 2.938_735_877_055_719e-39;

/// A point of R/Z with 128 fractional bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frac128(pub u128);

impl Frac128 {
    pub const ZERO: Frac128 = Frac128(0);
    pub const HALF: Frac128 = Frac128(1 << 127);

    /// Reduces a double modulo 1. Exact whenever the binary expansion of `x`
    /// has no bits below 2^-128, otherwise rounded to the nearest 2^-128.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 || !x.is_finite() {
            return Frac128::ZERO;
        }
        let bits = x.abs().to_bits();
        let exp_bits = ((bits >> 52) & 0x7ff) as i32;
        let (mant, exp) = if exp_bits == 0 {
            (bits & ((1u64 << 52) - 1), -1074)
        } else {
            ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), exp_bits - 1075)
        };
        // |x| = mant * 2^exp, and we want mant * 2^(exp + 128) mod 2^128.
        let shift = exp + 128;
        let raw = if shift >= 128 {
            0
        } else if shift >= 0 {
            (mant as u128).wrapping_shl(shift as u32)
        } else if shift > -64 {
            let s = (-shift) as u32;
            let m = mant as u128;
            (m >> s) + ((m >> (s - 1)) & 1)
        } else {
            0
        };
        let f = Frac128(raw);
        if x < 0.0 {
            -f
        } else {
            f
        }
    }

    /// `num/den mod 1`, truncated to 128 bits.
    pub fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if den.is_negative() {
            (-num, -den)
        } else {
            (num.clone(), den.clone())
        };
        let r = num.mod_floor(&den);
        let scaled: BigInt = (r << 128u32) / &den;
        Frac128(scaled.to_u128().unwrap_or(0))
    }

    /// Exact reduction of a binary fraction `bits / 2^scale` modulo 1.
    pub fn from_scaled(bits: &BigInt, scale: u32) -> Self {
        let modulus = BigInt::from(1) << scale;
        let r = bits.mod_floor(&modulus);
        let top = if scale >= 128 {
            r >> (scale - 128)
        } else {
            r << (128 - scale)
        };
        let (_, digits) = top.to_u64_digits();
        let lo = digits.first().copied().unwrap_or(0) as u128;
        let hi = digits.get(1).copied().unwrap_or(0) as u128;
        Frac128(lo | (hi << 64))
    }

    #[inline]
    pub fn mul_u128(self, k: u128) -> Self {
        Frac128(self.0.wrapping_mul(k))
    }

    #[inline]
    pub fn mul_int(self, k: i128) -> Self {
        let m = self.mul_u128(k.unsigned_abs());
        if k < 0 {
            -m
        } else {
            m
        }
    }

    pub fn mul_big(self, k: &BigInt) -> Self {
        let (sign, digits) = k.to_u64_digits();
        let lo = digits.first().copied().unwrap_or(0) as u128;
        let hi = digits.get(1).copied().unwrap_or(0) as u128;
        let m = self.mul_u128(lo | (hi << 64));
        if sign == Sign::Minus {
            -m
        } else {
            m
        }
    }

    /// Representative in [0, 1).
    #[inline]
    pub fn to_f64(self) -> f64 {
        let r = self.0 as f64 * TWO_POW_NEG_128;
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }

    /// Representative in [-1/2, 1/2).
    #[inline]
    pub fn centered(self) -> f64 {
        (self.0 as i128) as f64 * TWO_POW_NEG_128
    }

    /// Distance to the nearest integer.
    #[inline]
    pub fn norm(self) -> f64 {
        self.centered().abs()
    }

    /// e(θ) − 1, accurate to the resolution 2^-128.
    #[inline]
    pub fn cis_minus_one(self) -> Complex64 {
        cis_minus_one(self.centered())
    }

    /// e(θ) = exp(2πiθ).
    #[inline]
    pub fn cis(self) -> Complex64 {
        cis(self.centered())
    }
}

impl Add for Frac128 {
    type Output = Frac128;
    #[inline]
    fn add(self, rhs: Frac128) -> Frac128 {
        Frac128(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for Frac128 {
    #[inline]
    fn add_assign(&mut self, rhs: Frac128) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for Frac128 {
    type Output = Frac128;
    #[inline]
    fn sub(self, rhs: Frac128) -> Frac128 {
        Frac128(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for Frac128 {
    type Output = Frac128;
    #[inline]
    fn neg(self) -> Frac128 {
        Frac128(self.0.wrapping_neg())
    }
}

/// e(x) = exp(2πix).
#[inline]
pub fn cis(x: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    Complex64::new(c, s)
}

/// e(θ) − 1 without cancellation for small θ: 2i·sin(πθ)·e(θ/2).
#[inline]
pub fn cis_minus_one(theta: f64) -> Complex64 {
    let theta = theta - theta.round();
    let s = (PI * theta).sin();
    cis(theta / 2.0) * Complex64::new(0.0, 2.0 * s)
}

/// Fractional part in [0, 1).
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Binomial coefficient C(q, t) as u128 (wrapping is harmless when the value
/// is only used as a multiplier of a [`Frac128`]).
pub fn binom_u128(q: u128, t: u32) -> u128 {
    if (t as u128) > q {
        return 0;
    }
    // exact for the sizes used by orbit polynomials (t ≤ 8, q ≤ 2^40)
    let mut acc: u128 = 1;
    for i in 0..t as u128 {
        acc = acc * (q - i) / (i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_f64_is_exact_for_dyadics() {
        assert_eq!(Frac128::from_f64(0.5), Frac128::HALF);
        assert_eq!(Frac128::from_f64(1.25).to_f64(), 0.25);
        assert_eq!(Frac128::from_f64(-0.25).to_f64(), 0.75);
        assert_eq!(Frac128::from_f64(7.0), Frac128::ZERO);
    }

    #[test]
    fn ratio_matches_rational() {
        let third = Frac128::from_ratio(&BigInt::from(1), &BigInt::from(3));
        assert!((third.to_f64() - 1.0 / 3.0).abs() < 1e-16);
        let seven_thirds = third.mul_int(7);
        assert!((seven_thirds.to_f64() - 1.0 / 3.0).abs() < 1e-16);
        let neg = Frac128::from_ratio(&BigInt::from(-1), &BigInt::from(3));
        assert!((neg.to_f64() - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn centered_range() {
        assert_eq!(Frac128::HALF.centered(), -0.5);
        assert!((Frac128::from_f64(0.75).centered() + 0.25).abs() < 1e-18);
    }

    #[test]
    fn cis_minus_one_small_angle() {
        let t = 1e-12;
        let z = cis_minus_one(t);
        assert!((z.im - 2.0 * PI * t).abs() < 1e-24);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom_u128(5, 2), 10);
        assert_eq!(binom_u128(2, 3), 0);
        assert_eq!(binom_u128(40, 4), 91_390);
    }
}
