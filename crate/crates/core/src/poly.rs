//! Polynomials with rational coefficients and exact evaluation mod 1.

use crate::error::{Error, Result};
use crate::phase::Frac128;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Σ c_i x^i, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RatPoly(Vec<BigRational>);

impl RatPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        RatPoly(coeffs)
    }

    pub fn zero() -> Self {
        RatPoly(Vec::new())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    /// a + b·x
    pub fn linear(a: BigRational, b: BigRational) -> Self {
        Self::new(vec![a, b])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.0.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Degree, with the zero polynomial at 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, o: &RatPoly) -> RatPoly {
        let n = self.0.len().max(o.0.len());
        Self::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &RatPoly) -> RatPoly {
        self.add(&o.scale(&-BigRational::one()))
    }

    pub fn scale(&self, s: &BigRational) -> RatPoly {
        Self::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &RatPoly) -> RatPoly {
        if self.is_zero() || o.is_zero() {
            return RatPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// p(g(x)).
    pub fn compose(&self, g: &RatPoly) -> RatPoly {
        let mut acc = RatPoly::zero();
        for c in self.0.iter().rev() {
            acc = acc.mul(g).add(&RatPoly::constant(c.clone()));
        }
        acc
    }

    /// Binomial C(x, t) = x(x−1)…(x−t+1)/t!.
    pub fn binomial(t: usize) -> RatPoly {
        let mut acc = RatPoly::constant(BigRational::one());
        for i in 0..t {
            acc = acc.mul(&RatPoly::linear(BigRational::from(BigInt::from(-(i as i64))), BigRational::one()));
        }
        let fact: BigInt = (1..=t as u64).map(BigInt::from).product();
        acc.scale(&BigRational::new(BigInt::one(), fact))
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_int(&self, n: i64) -> BigRational {
        self.eval(&BigRational::from(BigInt::from(n)))
    }

    /// Coefficients reduced mod 1 (same values on integers only for the
    /// constant term; use for display).
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(crate::bignum::rational_to_f64).collect()
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("({c})·n"),
                _ => format!("({c})·n^{i}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

const FAST_DEN_LIMIT: u128 = 1 << 63;

/// Evaluates p(n) mod 1 exactly for integer n ≥ 0.
#[derive(Clone, Debug)]
pub struct PhaseEvaluator {
    /// (p_i mod d_i, d_i) when every denominator is below 2^63.
    fast: Option<Vec<(u128, u128)>>,
    /// Common-denominator form: p(n) = Σ a_i n^i / den.
    nums: Vec<BigInt>,
    den: BigInt,
}

fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    (a * b) % m
}

/// floor(r/d · 2^128) for 0 ≤ r < d < 2^63.
pub(crate) fn ratio_frac(r: u128, d: u128) -> Frac128 {
    let x = r << 64;
    let hi = x / d;
    let lo = ((x % d) << 64) / d;
    Frac128((hi << 64) | lo)
}

impl PhaseEvaluator {
    pub fn new(p: &RatPoly) -> Self {
        let den = p.coeffs().iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums = p.coeffs().iter().map(|c| c.numer() * (&den / c.denom())).collect();
        let fast = p
            .coeffs()
            .iter()
            .map(|c| {
                let d = c.denom().to_u128().filter(|&d| d < FAST_DEN_LIMIT)?;
                let r = c.numer().mod_floor(c.denom()).to_u128()?;
                Some((r, d))
            })
            .collect::<Option<Vec<_>>>();
        PhaseEvaluator { fast, nums, den }
    }

    pub fn is_fast(&self) -> bool {
        self.fast.is_some()
    }

    pub fn eval(&self, n: u64) -> Frac128 {
        if let Some(terms) = &self.fast {
            let mut acc = Frac128::ZERO;
            for (i, &(r, d)) in terms.iter().enumerate() {
                if r == 0 {
                    continue;
                }
                let nm = n as u128 % d;
                let mut pw = 1 % d;
                for _ in 0..i {
                    pw = mulmod(pw, nm, d);
                }
                acc += ratio_frac(mulmod(r, pw, d), d);
            }
            return acc;
        }
        let nb = BigInt::from(n);
        let mut acc = BigInt::zero();
        for a in self.nums.iter().rev() {
            acc = acc * &nb + a;
        }
        Frac128::from_ratio(&acc, &self.den)
    }
}

/// Exact vector of rationals from doubles.
pub fn rationals_from_f64(xs: &[f64]) -> Result<Vec<BigRational>> {
    xs.iter().map(|&x| crate::bignum::f64_to_rational(x)).collect()
}

/// Parses "p/q", an integer, or a finite decimal into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::Config(format!("bad rational {s:?}")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Config(format!("bad rational {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Config(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if (ip.is_empty() && fp.is_empty()) || !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Config(format!("bad rational {s:?}")));
    }
    let num: BigInt = format!("{ip}{fp}").parse().map_err(|_| Error::Config(format!("bad rational {s:?}")))?;
    let den = num_traits::pow(BigInt::from(10), fp.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// x mod 1 in [0, 1).
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Whether x is an integer.
pub fn is_integer(x: &BigRational) -> bool {
    x.denom().is_one()
}

pub fn abs_max(xs: &[BigRational]) -> BigRational {
    xs.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}
