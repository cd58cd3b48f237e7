//! Helpers for arbitrary-precision integers: logarithms without overflow,
//! dyadic conversions and a fixed-point exponential.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::LN_2;

/// log2|x| for x ≠ 0, accurate to f64 rounding.
pub fn log2_abs(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return x.abs().to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (x.abs() >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

/// ln|x| for x ≠ 0.
pub fn ln_abs(x: &BigInt) -> f64 {
    log2_abs(x) * LN_2
}

/// `x / 2^scale` as f64 (underflows to 0, overflows to ±inf).
pub fn scaled_to_f64(x: &BigInt, scale: u64) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits();
    let (top, shift) = if bits > 64 {
        ((x >> (bits - 64)).to_f64().unwrap(), bits as i64 - 64)
    } else {
        (x.to_f64().unwrap(), 0)
    };
    let e = shift - scale as i64;
    if e > 1100 {
        return if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    if e < -1200 {
        return 0.0;
    }
    // split the power so intermediate factors stay finite
    let half = e / 2;
    top * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

/// Exact rational value of a finite double.
pub fn f64_to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

/// Best f64 approximation of a rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (n, d) = (r.numer(), r.denom());
    let shift = (d.bits() as i64 - n.bits() as i64 + 64).max(0) as u64;
    let q = (n << shift) / d;
    scaled_to_f64(&q, shift)
}

/// floor(r · 2^bits).
pub fn floor_scaled(r: &BigRational, bits: u32) -> BigInt {
    (r.numer() << bits).div_floor(r.denom())
}

/// Fractional part of a rational in [0, 1).
pub fn frac_rational(r: &BigRational) -> BigRational {
    r - r.floor()
}

/// floor(e^x · 2^frac_bits) up to an error of a few units, where
/// `x = mant · 2^exp2` is an exact dyadic with `x ≥ 0`.
///
/// Argument reduction by 2^s, Taylor series, then s squarings. The working
/// precision covers the integer bits of the result plus `s + 64` guard bits.
pub fn exp_dyadic_fixed(mant: &BigInt, exp2: i64, frac_bits: u64) -> Result<BigInt> {
    if mant.is_negative() {
        return Err(Error::Domain("exp_dyadic_fixed expects x ≥ 0".into()));
    }
    let x_log2 = if mant.is_zero() { f64::NEG_INFINITY } else { log2_abs(mant) + exp2 as f64 };
    let s: u64 = if x_log2 > -4.0 { (x_log2 + 8.0).ceil() as u64 } else { 0 };
    let result_bits = if x_log2.is_finite() { (2f64.powf(x_log2) / LN_2).ceil() as u64 + 2 } else { 2 };
    if result_bits > 1 << 26 {
        return Err(Error::Capacity(format!("e^x has about {result_bits} bits")));
    }
    let w = frac_bits + result_bits + s + 64;
    // y = x / 2^s as a fixed-point number with w fractional bits
    let shift = exp2 - s as i64 + w as i64;
    let y: BigInt = if shift >= 0 { mant << shift as u64 } else { mant >> (-shift) as u64 };
    let one = BigInt::one() << w;
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut k = 1u64;
    loop {
        term = ((&term * &y) >> w) / BigInt::from(k);
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    for _ in 0..s {
        sum = (&sum * &sum) >> w;
    }
    let drop = w - frac_bits;
    Ok(sum >> drop)
}

/// Natural log of a positive rational.
pub fn ln_rational(r: &BigRational) -> f64 {
    ln_abs(r.numer()) - ln_abs(r.denom())
}

/// The unsigned magnitude of a BigInt as u128, if it fits.
pub fn to_u128(x: &BigInt) -> Option<u128> {
    let (sign, digits) = x.to_u64_digits();
    if sign == Sign::Minus || digits.len() > 2 {
        return None;
    }
    let lo = digits.first().copied().unwrap_or(0) as u128;
    let hi = digits.get(1).copied().unwrap_or(0) as u128;
    Some(lo | (hi << 64))
}

pub fn biguint_bits(x: &BigUint) -> u64 {
    x.bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logs_of_huge_integers() {
        let x = BigInt::one() << 5000u32;
        assert!((log2_abs(&x) - 5000.0).abs() < 1e-9);
        assert!((ln_abs(&BigInt::from(1000)) - 1000f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scaled_conversion() {
        assert_eq!(scaled_to_f64(&BigInt::from(3), 1), 1.5);
        let tiny = BigInt::one();
        assert_eq!(scaled_to_f64(&tiny, 5000), 0.0);
        let r = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert!((rational_to_f64(&r) - 1.0 / 3.0).abs() < 1e-17);
    }

    #[test]
    fn exp_matches_f64() {
        for &x in &[0.0, 0.5, 1.0, 2.0, 7.25, 30.0] {
            let r = f64_to_rational(x).unwrap();
            // x is dyadic: mant / 2^k
            let den_bits = r.denom().bits() - 1;
            let v = exp_dyadic_fixed(r.numer(), -(den_bits as i64), 60).unwrap();
            let got = scaled_to_f64(&v, 60);
            assert!((got / x.exp() - 1.0).abs() < 1e-14, "x={x} got={got}");
        }
    }

    #[test]
    fn exp_large_argument_bits() {
        // e^8102 has about 11689 bits
        let v = exp_dyadic_fixed(&BigInt::from(8102), 0, 0).unwrap();
        let l = ln_abs(&v);
        assert!((l - 8102.0).abs() < 1e-9);
    }
}
