//! Exact continued fractions for the rotation number α.
//!
//! Irrational α is never taken as a bare double. It is described by its
//! partial quotients (finite prefix plus a periodic or "unbounded" tail) and
//! its binary expansion is certified by interval arithmetic on the tail value.

use crate::analytic::{phi_window, AnalyticSeries};
use crate::bignum::{f64_to_rational, floor_scaled, ln_abs, log2_abs, rational_to_f64, scaled_to_f64};
use crate::error::{Error, Result};
use crate::phase::Frac128;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub const DEFAULT_PRECISION_BITS: u32 = 256;
const MAX_PRECISION_BITS: u32 = 1 << 22;

/// What follows the explicitly listed partial quotients.
#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    /// Repeats forever.
    Periodic(Vec<BigInt>),
    /// The next quotient is at least `2^log2_lower`; nothing further is known.
    /// The value of α is then certified only to about
    /// `log2_lower + 2·log2(q_last)` bits.
    Unbounded { log2_lower: f64 },
}

impl Default for Tail {
    fn default() -> Self {
        Tail::Periodic(vec![BigInt::one()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlphaKind {
    Rational { p: BigInt, q: BigInt },
    /// α = [a0; preperiod, period, period, …].
    Quadratic { a0: BigInt, preperiod: Vec<BigInt>, period: Vec<BigInt> },
    /// α = [quotients[0]; quotients[1], …, tail].
    Explicit { quotients: Vec<BigInt>, tail: Tail },
    Furstenberg { tau: f64, depth: usize },
    /// A decimal approximation, read as the interval of half an ulp around it.
    Decimal { digits: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSpec {
    pub kind: AlphaKind,
    pub precision_bits: u32,
}

fn bigs(xs: &[u64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

impl AlphaSpec {
    pub fn new(kind: AlphaKind) -> Self {
        AlphaSpec { kind, precision_bits: DEFAULT_PRECISION_BITS }
    }

    pub fn rational(p: i64, q: i64) -> Self {
        Self::new(AlphaKind::Rational { p: p.into(), q: q.into() })
    }

    pub fn quadratic(a0: i64, preperiod: &[u64], period: &[u64]) -> Self {
        Self::new(AlphaKind::Quadratic { a0: a0.into(), preperiod: bigs(preperiod), period: bigs(period) })
    }

    pub fn explicit(quotients: Vec<BigInt>, tail: Tail) -> Self {
        Self::new(AlphaKind::Explicit { quotients, tail })
    }

    /// √2 − 1 = [0; 2, 2, 2, …].
    pub fn sqrt2_minus_1() -> Self {
        Self::quadratic(0, &[], &[2])
    }

    /// (√5 − 1)/2 = [0; 1, 1, 1, …].
    pub fn golden() -> Self {
        Self::quadratic(0, &[], &[1])
    }

    pub fn furstenberg(tau: f64, depth: usize) -> Self {
        Self::new(AlphaKind::Furstenberg { tau, depth })
    }

    pub fn decimal(digits: &str) -> Self {
        Self::new(AlphaKind::Decimal { digits: digits.to_string() })
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }

    /// Raises the precision so n·α mod 1 keeps 64 good bits for n ≤ n_max.
    pub fn for_n_max(mut self, n_max: u64) -> Self {
        let need = 64 + 64 - n_max.max(1).leading_zeros();
        self.precision_bits = self.precision_bits.max(need);
        self
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Rational(BigRational),
    Irrational {
        prefix: Vec<BigInt>,
        tail: Tail,
        /// floor(α · 2^bits)
        scaled: BigInt,
        bits: u32,
    },
    Interval {
        mid: BigRational,
        width_log2: f64,
        quotients: Vec<BigInt>,
    },
}

/// A resolved α with certified digits.
#[derive(Clone, Debug)]
pub struct Alpha {
    spec: AlphaSpec,
    repr: Repr,
    frac: Frac128,
}

/// Convergents of a quotient list: (l_k, q_k) for every k.
pub fn convergents(quotients: &[BigInt]) -> (Vec<BigInt>, Vec<BigInt>) {
    let mut l = Vec::with_capacity(quotients.len());
    let mut q = Vec::with_capacity(quotients.len());
    let (mut l2, mut l1) = (BigInt::zero(), BigInt::one());
    let (mut q2, mut q1) = (BigInt::one(), BigInt::zero());
    for a in quotients {
        let ln = a * &l1 + &l2;
        let qn = a * &q1 + &q2;
        l2 = std::mem::replace(&mut l1, ln.clone());
        q2 = std::mem::replace(&mut q1, qn.clone());
        l.push(ln);
        q.push(qn);
    }
    (l, q)
}

/// Möbius image (a t + b)/(c t + d) of a rational t.
fn mobius_map(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, t: &BigRational) -> BigRational {
    let num = BigRational::from(a.clone()) * t + BigRational::from(b.clone());
    let den = BigRational::from(c.clone()) * t + BigRational::from(d.clone());
    num / den
}

fn validate_quotients(qs: &[BigInt], what: &str) -> Result<()> {
    if qs.iter().skip(1).any(|a| a < &BigInt::one()) {
        return Err(Error::Config(format!("{what}: partial quotients a_k (k ≥ 1) must be ≥ 1")));
    }
    Ok(())
}

impl Alpha {
    pub fn new(spec: &AlphaSpec) -> Result<Alpha> {
        let bits = spec.precision_bits.max(64);
        let repr = match &spec.kind {
            AlphaKind::Rational { p, q } => {
                if q < &BigInt::one() {
                    return Err(Error::Config("rational α needs q ≥ 1".into()));
                }
                if !p.gcd(q).is_one() {
                    return Err(Error::Config(format!("rational α = {p}/{q} is not in lowest terms")));
                }
                Repr::Rational(BigRational::new(p.clone(), q.clone()))
            }
            AlphaKind::Quadratic { a0, preperiod, period } => {
                let mut prefix = vec![a0.clone()];
                prefix.extend(preperiod.iter().cloned());
                Self::irrational(prefix, Tail::Periodic(period.clone()), bits)?
            }
            AlphaKind::Explicit { quotients, tail } => {
                if quotients.is_empty() {
                    return Err(Error::Config("explicit quotients must include a_0".into()));
                }
                Self::irrational(quotients.clone(), tail.clone(), bits)?
            }
            AlphaKind::Furstenberg { tau, depth } => {
                let built = crate::furstenberg::furstenberg_quotients(*tau, *depth)?;
                let need = (2 * built.max_bits() + 256).min(MAX_PRECISION_BITS as u64) as u32;
                Self::irrational(built.quotients, built.tail, bits.max(need))?
            }
            AlphaKind::Decimal { digits } => Self::interval_from_decimal(digits)?,
        };
        let frac = match &repr {
            Repr::Rational(r) => Frac128::from_ratio(r.numer(), r.denom()),
            Repr::Irrational { scaled, bits, .. } => Frac128::from_scaled(scaled, *bits),
            Repr::Interval { mid, .. } => Frac128::from_ratio(mid.numer(), mid.denom()),
        };
        let mut spec = spec.clone();
        if let Repr::Irrational { bits: b, .. } = &repr {
            spec.precision_bits = *b;
        }
        Ok(Alpha { spec, repr, frac })
    }

    fn irrational(prefix: Vec<BigInt>, tail: Tail, bits: u32) -> Result<Repr> {
        validate_quotients(&prefix, "prefix")?;
        if let Tail::Periodic(p) = &tail {
            if p.is_empty() {
                return Err(Error::Config("periodic tail must be nonempty".into()));
            }
            if p.iter().any(|a| a < &BigInt::one()) {
                return Err(Error::Config("periodic tail quotients must be ≥ 1".into()));
            }
        }
        let scaled = certified_floor(&prefix, &tail, bits)?;
        Ok(Repr::Irrational { prefix, tail, scaled, bits })
    }

    fn interval_from_decimal(digits: &str) -> Result<Repr> {
        let s = digits.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
        if ip.is_empty() && fp.is_empty() || !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
            return Err(Error::Config(format!("not a decimal number: {digits:?}")));
        }
        let mut num: BigInt = format!("{ip}{fp}").parse().map_err(|_| Error::Config(format!("bad decimal {digits:?}")))?;
        if neg {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let mid = BigRational::new(num, den.clone());
        let half = BigRational::new(BigInt::one(), den * 2);
        let lo = &mid - &half;
        let hi = &mid + &half;
        let width_log2 = -log2_abs(half.denom()) + 1.0;
        let quotients = common_quotients(&lo, &hi);
        Ok(Repr::Interval { mid, width_log2, quotients })
    }

    pub fn spec(&self) -> &AlphaSpec {
        &self.spec
    }

    pub fn precision_bits(&self) -> u32 {
        match &self.repr {
            Repr::Irrational { bits, .. } => *bits,
            _ => self.spec.precision_bits,
        }
    }

    /// Same α with at least `bits` certified fractional bits.
    pub fn with_precision(&self, bits: u32) -> Result<Alpha> {
        match &self.repr {
            Repr::Irrational { prefix, tail, bits: have, .. } if bits > *have => {
                if bits > MAX_PRECISION_BITS {
                    return Err(Error::Precision(format!("{bits} bits exceeds the precision cap")));
                }
                let repr = Self::irrational(prefix.clone(), tail.clone(), bits)?;
                let mut spec = self.spec.clone();
                spec.precision_bits = bits;
                Ok(Alpha { spec, repr, frac: self.frac })
            }
            _ => Ok(self.clone()),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.repr {
            Repr::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.repr, Repr::Rational(_))
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.repr, Repr::Interval { .. })
    }

    pub fn to_f64(&self) -> f64 {
        match &self.repr {
            Repr::Rational(r) => rational_to_f64(r),
            Repr::Irrational { scaled, bits, .. } => scaled_to_f64(scaled, *bits as u64),
            Repr::Interval { mid, .. } => rational_to_f64(mid),
        }
    }

    /// α mod 1 with 128 fractional bits.
    pub fn frac128(&self) -> Frac128 {
        self.frac
    }

    /// n·α mod 1 with absolute error below 2^-64.
    pub fn phase(&self, n: i128) -> Result<Frac128> {
        match &self.repr {
            Repr::Rational(r) => {
                let num = r.numer() * BigInt::from(n);
                Ok(Frac128::from_ratio(&num, r.denom()))
            }
            Repr::Irrational { bits, .. } => {
                let nb = 128 - n.unsigned_abs().leading_zeros();
                if nb + 64 > (*bits).min(128) {
                    return self.phase_big(&BigInt::from(n));
                }
                Ok(self.frac.mul_int(n))
            }
            Repr::Interval { .. } => self.phase_big(&BigInt::from(n)),
        }
    }

    /// m·α mod 1 for an arbitrary integer multiplier.
    pub fn phase_big(&self, m: &BigInt) -> Result<Frac128> {
        match &self.repr {
            Repr::Rational(r) => Ok(Frac128::from_ratio(&(r.numer() * m), r.denom())),
            Repr::Irrational { scaled, bits, .. } => {
                if m.bits() + 64 > *bits as u64 {
                    let need = (m.bits() + 128) as u32;
                    return self.with_precision(need)?.phase_big(m);
                }
                Ok(Frac128::from_scaled(&(m * scaled), *bits))
            }
            Repr::Interval { mid, width_log2, .. } => {
                if log2_abs(m).max(0.0) + width_log2 > -53.0 {
                    return Err(Error::Precision(format!(
                        "decimal α is too coarse for multiplier {m} (interval width 2^{width_log2:.1})"
                    )));
                }
                Ok(Frac128::from_ratio(&(mid.numer() * m), mid.denom()))
            }
        }
    }

    /// True when m·α is an integer (only possible for rational α).
    pub fn multiple_is_integer(&self, m: &BigInt) -> bool {
        match &self.repr {
            Repr::Rational(r) => (r.numer() * m).is_multiple_of(r.denom()),
            _ => m.is_zero(),
        }
    }

    /// m·α − round(m·α) as an exact big fraction `r / 2^bits`, with at least
    /// 64 significant bits in `r`.
    fn signed_norm_scaled(&self, m: &BigInt) -> Result<(BigInt, u64)> {
        match &self.repr {
            Repr::Rational(r) => {
                let num = r.numer() * m;
                let den = r.denom();
                let rem = num.mod_floor(den);
                let rem = if &rem * 2 > *den { rem - den } else { rem };
                // exact: represent as rem/den scaled by 2^k with k large enough
                let k = den.bits() + 128;
                Ok(((rem << k) / den, k))
            }
            Repr::Irrational { scaled, bits, .. } => {
                let p = *bits as u64;
                let modulus = BigInt::one() << p;
                let mut r = (m * scaled).mod_floor(&modulus);
                if &r * 2 >= modulus {
                    r -= &modulus;
                }
                // absolute error < |m|, so demand |r| ≥ |m|·2^64
                if r.bits() < m.bits() + 64 {
                    let deficit = m.bits() + 64 - r.bits().min(m.bits() + 64);
                    let need = p + deficit.max(64) + 64;
                    if need > MAX_PRECISION_BITS as u64 {
                        return Err(Error::Precision(format!("‖mα‖ for m with {} bits needs {need} bits", m.bits())));
                    }
                    return self.with_precision(need as u32)?.signed_norm_scaled(m);
                }
                Ok((r, p))
            }
            Repr::Interval { mid, width_log2, .. } => {
                let num = mid.numer() * m;
                let den = mid.denom();
                let rem = num.mod_floor(den);
                let rem = if &rem * 2 > *den { rem - den } else { rem };
                let val = BigRational::new(rem.clone(), den.clone());
                let ln_val = if rem.is_zero() { f64::NEG_INFINITY } else { log2_abs(val.numer()) - log2_abs(val.denom()) };
                if log2_abs(m).max(0.0) + width_log2 > ln_val - 53.0 {
                    return Err(Error::Precision(format!("decimal α cannot certify ‖{m}·α‖")));
                }
                let k = den.bits() + 128;
                Ok(((rem << k) / den, k))
            }
        }
    }

    /// Signed distance m·α − round(m·α), to double precision.
    pub fn signed_norm(&self, m: &BigInt) -> Result<f64> {
        if m.is_zero() || self.multiple_is_integer(m) {
            return Ok(0.0);
        }
        let (r, k) = self.signed_norm_scaled(m)?;
        Ok(scaled_to_f64(&r, k))
    }

    /// ln ‖m·α‖ without underflow (−∞ when m·α is an integer).
    pub fn ln_norm(&self, m: &BigInt) -> Result<f64> {
        if m.is_zero() || self.multiple_is_integer(m) {
            return Ok(f64::NEG_INFINITY);
        }
        let (r, k) = self.signed_norm_scaled(m)?;
        Ok(ln_abs(&r) - k as f64 * std::f64::consts::LN_2)
    }

    /// The partial quotient a_k, if it is certified.
    pub fn quotient(&self, k: usize) -> Result<Option<BigInt>> {
        match &self.repr {
            Repr::Rational(_) => Ok(None),
            Repr::Irrational { prefix, tail, .. } => {
                if k < prefix.len() {
                    return Ok(Some(prefix[k].clone()));
                }
                match tail {
                    Tail::Periodic(p) => Ok(Some(p[(k - prefix.len()) % p.len()].clone())),
                    Tail::Unbounded { .. } => Err(Error::Precision(format!(
                        "partial quotient a_{k} is beyond the certified expansion ({} quotients)",
                        prefix.len()
                    ))),
                }
            }
            Repr::Interval { quotients, .. } => quotients.get(k).cloned().map(Some).ok_or_else(|| {
                Error::Precision(format!(
                    "decimal input certifies only {} partial quotients, a_{k} requested",
                    quotients.len()
                ))
            }),
        }
    }

    fn unbounded_after(&self) -> Option<(usize, f64)> {
        match &self.repr {
            Repr::Irrational { prefix, tail: Tail::Unbounded { log2_lower }, .. } => Some((prefix.len(), *log2_lower)),
            _ => None,
        }
    }
}

/// Quotients shared by the expansions of two rationals.
fn common_quotients(lo: &BigRational, hi: &BigRational) -> Vec<BigInt> {
    let mut out = Vec::new();
    let (mut a, mut b) = (lo.clone(), hi.clone());
    loop {
        let fa = a.floor();
        let fb = b.floor();
        if fa != fb {
            break;
        }
        out.push(fa.to_integer());
        let ra = &a - &fa;
        let rb = &b - &fb;
        if ra.is_zero() || rb.is_zero() || out.len() > 100_000 {
            break;
        }
        a = ra.recip();
        b = rb.recip();
    }
    out
}

/// floor(α·2^bits) for α = [prefix, tail], certified by bracketing the tail.
fn certified_floor(prefix: &[BigInt], tail: &Tail, bits: u32) -> Result<BigInt> {
    let (l, q) = convergents(prefix);
    let k = prefix.len() - 1;
    let (lk, qk) = (&l[k], &q[k]);
    let (lk1, qk1) = if k == 0 { (BigInt::one(), BigInt::zero()) } else { (l[k - 1].clone(), q[k - 1].clone()) };
    match tail {
        Tail::Periodic(period) => {
            let (p, qq) = convergents(period);
            let r = period.len() - 1;
            let (pr, qr) = (&p[r], &qq[r]);
            let (pr1, qr1) = if r == 0 { (BigInt::one(), BigInt::zero()) } else { (p[r - 1].clone(), qq[r - 1].clone()) };
            // t solves Q_r t² + (Q_{r−1} − P_r) t − P_{r−1} = 0, t > 1
            let b = pr - &qr1;
            let disc = &b * &b + BigInt::from(4) * qr * &pr1;
            let mut w: u32 = bits + 64 + 2 * (qk.bits() as u32);
            for _ in 0..8 {
                let s = (&disc << (2 * w)).sqrt();
                let scale = BigInt::one() << w;
                let two_q = BigInt::from(2) * qr;
                let t_lo = BigRational::new(&b * &scale + &s, &two_q * &scale);
                let t_hi = BigRational::new(&b * &scale + &s + 1, &two_q * &scale);
                let a1 = mobius_map(lk, &lk1, qk, &qk1, &t_lo);
                let a2 = mobius_map(lk, &lk1, qk, &qk1, &t_hi);
                let f1 = floor_scaled(&a1, bits);
                let f2 = floor_scaled(&a2, bits);
                if f1 == f2 {
                    return Ok(f1);
                }
                w += 64;
            }
            Err(Error::Numeric("could not certify α to the requested precision".into()))
        }
        Tail::Unbounded { log2_lower } => {
            let cap = bits as f64 + 2.0 * log2_abs(qk) + 128.0;
            let l_eff = log2_lower.min(cap).max(0.0).floor() as u64;
            let t_lo = BigRational::from(BigInt::one() << l_eff);
            let a1 = mobius_map(lk, &lk1, qk, &qk1, &t_lo);
            let a2 = BigRational::new(lk.clone(), qk.clone());
            let f1 = floor_scaled(&a1, bits);
            let f2 = floor_scaled(&a2, bits);
            if f1 == f2 {
                Ok(f1)
            } else {
                Err(Error::Precision(format!(
                    "α is known only to about {:.0} bits; {bits} requested",
                    log2_lower + 2.0 * log2_abs(qk)
                )))
            }
        }
    }
}

/// n·α mod 1 for a spec, as a double in [0, 1).
pub fn fractional_phase(alpha: &AlphaSpec, n: i64) -> Result<f64> {
    let need = 64 + 64 - n.unsigned_abs().leading_zeros();
    if !matches!(alpha.kind, AlphaKind::Rational { .. } | AlphaKind::Decimal { .. }) && alpha.precision_bits < need {
        return Err(Error::Precision(format!(
            "precision_bits = {} but n = {n} needs at least {need}",
            alpha.precision_bits
        )));
    }
    Ok(Alpha::new(alpha)?.phase(n as i128)?.to_f64())
}

/// What is known about the successor q_{k+1} of a denominator.
#[derive(Clone, Debug, PartialEq)]
pub enum Successor {
    Exact(BigInt),
    AtLeastLog2(f64),
    /// Rational α, last convergent.
    None,
}

#[derive(Clone, Debug)]
pub struct CFExpansion {
    pub quotients: Vec<BigInt>,
    pub l: Vec<BigInt>,
    pub q: Vec<BigInt>,
    /// q_{K+1} when it is certified.
    pub next_q: Successor,
    pub terminated: bool,
    pub alpha: Alpha,
    /// Partition parameter used by [`classify_case`]; `None` means choose it.
    pub b: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub b: u32,
    /// Indices k with q_k ∈ Q♭.
    pub flat: Vec<usize>,
    /// Indices k with q_k ∈ Q♯.
    pub sharp: Vec<usize>,
}

/// a_0, …, a_depth with convergents. Rational α stops at termination.
pub fn cf_expand(alpha: &AlphaSpec, depth: usize) -> Result<CFExpansion> {
    cf_expand_alpha(&Alpha::new(alpha)?, depth, true)
}

/// Expansion of a resolved α. With `strict = false` the expansion stops
/// quietly at the last certified quotient instead of raising a precision error.
pub fn cf_expand_alpha(alpha: &Alpha, depth: usize, strict: bool) -> Result<CFExpansion> {
    if depth < 1 {
        return Err(Error::Config("depth must be ≥ 1".into()));
    }
    let mut quotients = Vec::new();
    let mut terminated = false;
    if let Some(r) = alpha.as_rational() {
        let (mut n, mut d) = (r.numer().clone(), r.denom().clone());
        while quotients.len() <= depth {
            let (a, rem) = n.div_mod_floor(&d);
            quotients.push(a);
            if rem.is_zero() {
                terminated = true;
                break;
            }
            n = d;
            d = rem;
        }
    } else {
        for k in 0..=depth {
            match alpha.quotient(k) {
                Ok(Some(a)) => quotients.push(a),
                Ok(None) => break,
                Err(e) => {
                    if strict {
                        return Err(e);
                    }
                    break;
                }
            }
        }
    }
    let (l, q) = convergents(&quotients);
    let next_q = if terminated {
        Successor::None
    } else {
        let k = quotients.len();
        match alpha.quotient(k) {
            Ok(Some(a)) => {
                let prev = if k >= 2 { q[k - 2].clone() } else { BigInt::one() };
                Successor::Exact(a * &q[k - 1] + prev)
            }
            _ => match alpha.unbounded_after() {
                Some((len, lg)) if len == k => Successor::AtLeastLog2(lg + log2_abs(&q[k - 1])),
                _ => Successor::None,
            },
        }
    };
    Ok(CFExpansion { quotients, l, q, next_q, terminated, alpha: alpha.clone(), b: None })
}

impl CFExpansion {
    /// Index of the last computed convergent.
    pub fn depth(&self) -> usize {
        self.q.len() - 1
    }

    pub fn with_b(mut self, b: u32) -> Self {
        self.b = Some(b);
        self
    }

    pub fn successor(&self, k: usize) -> Successor {
        if k + 1 < self.q.len() {
            Successor::Exact(self.q[k + 1].clone())
        } else if k + 1 == self.q.len() {
            self.next_q.clone()
        } else {
            Successor::None
        }
    }

    pub fn partition(&self, b: u32) -> Partition {
        partition_q(self, b)
    }
}

/// Whether q⁺ > q^B, decided exactly.
pub fn exceeds_power(q: &BigInt, succ: &Successor, b: u32) -> bool {
    match succ {
        Successor::None => false,
        Successor::AtLeastLog2(lg) => *lg > b as f64 * log2_abs(q) + 1.0,
        Successor::Exact(qp) => {
            let (bq, bp) = (q.bits(), qp.bits());
            if bp <= (bq - 1) * b as u64 {
                return false;
            }
            if bp > bq * b as u64 + 1 {
                return true;
            }
            *qp > num_traits::pow(q.clone(), b as usize)
        }
    }
}

/// Q♭ = {1} ∪ {q : q⁺ ≤ q^B}, Q♯ = {q ≥ 2 : q⁺ > q^B}, as index sets.
/// A last convergent whose successor is unknown counts as flat.
pub fn partition_q(cf: &CFExpansion, b: u32) -> Partition {
    let mut flat = Vec::new();
    let mut sharp = Vec::new();
    for (k, q) in cf.q.iter().enumerate() {
        if q >= &BigInt::from(2) && exceeds_power(q, &cf.successor(k), b) {
            sharp.push(k);
        } else {
            flat.push(k);
        }
    }
    Partition { b, flat, sharp }
}

/// max(2, 4·⌊ln(16·|b₂|·K)⌋).
pub fn choose_b(_tau: f64, b2: i64, k_bound: f64) -> u32 {
    let v = (16.0 * b2.unsigned_abs() as f64 * k_bound.max(1e-300)).ln().floor();
    (4.0 * v).max(2.0) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    NoSharpScale,
    A,
    B,
    C1,
    C2,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpScale {
    /// Convergent index k with m_j = q_k.
    pub index: usize,
    pub m: String,
    pub m_plus: String,
    pub ln_m_plus: f64,
    /// m_j·α − round(m_j·α).
    pub theta_signed: f64,
    pub theta: f64,
    pub ln_theta: f64,
    pub big_m: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub n: u64,
    pub y: f64,
    pub b: u32,
    pub scales: Vec<SharpScale>,
    pub j: usize,
    pub theta_j: Option<f64>,
    pub ln_theta_j: Option<f64>,
    pub m_j: Option<String>,
    pub m_j_plus: Option<String>,
    pub big_m_j: Option<f64>,
    pub phi_j: Option<f64>,
    pub k_bound: f64,
    pub d: Option<u32>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub ln_beta: Option<f64>,
    pub label: CaseLabel,
}

/// Decides which regime (A)/(B)/(C1)/(C2) the scale analysis enters at N.
pub fn classify_case(cf: &CFExpansion, h: &AnalyticSeries, n: u64, d1: u32, b2: i64) -> Result<CaseReport> {
    if cf.alpha.is_rational() {
        return Err(Error::Domain(
            "α is rational: use the rational-case pipeline (rational_case_decompose) instead of classify".into(),
        ));
    }
    if n < 16 {
        return Err(Error::Config("classification needs N ≥ 16".into()));
    }
    if b2 == 0 {
        return Err(Error::Config("b₂ must be nonzero".into()));
    }
    let tau = h.tau;
    let ln_n = (n as f64).ln();
    let y = 8.0 / tau * ln_n;
    // every q ≤ Y must be known together with its successor
    let last_known = match &cf.next_q {
        Successor::Exact(q) => q.clone(),
        _ => cf.q[cf.depth()].clone(),
    };
    if !cf.terminated && last_known.to_f64().unwrap_or(f64::INFINITY) <= y {
        return Err(Error::Range(format!(
            "expansion reaches q = {last_known} ≤ Y = {y:.2}; expand deeper before classifying"
        )));
    }

    let scales_for = |b: u32| -> Result<Vec<SharpScale>> {
        let part = partition_q(cf, b);
        let mut out: Vec<SharpScale> = Vec::new();
        for &k in &part.sharp {
            let m = &cf.q[k];
            if m.to_f64().unwrap_or(f64::INFINITY) > y {
                continue;
            }
            if out.last().map(|s| s.index) == Some(k) {
                continue;
            }
            let (m_plus, ln_m_plus) = match cf.successor(k) {
                Successor::Exact(qp) => (qp.to_string(), ln_abs(&qp)),
                Successor::AtLeastLog2(lg) => (format!(">= 2^{lg:.1}"), lg * std::f64::consts::LN_2),
                Successor::None => unreachable!("sharp scale without successor"),
            };
            let theta_signed = cf.alpha.signed_norm(m)?;
            let ln_theta = cf.alpha.ln_norm(m)?;
            out.push(SharpScale {
                index: k,
                m: m.to_string(),
                m_plus,
                ln_m_plus,
                theta_signed,
                theta: theta_signed.abs(),
                ln_theta,
                big_m: 0.0,
                phi: 0.0,
            });
        }
        let count = out.len();
        for (j, s) in out.iter_mut().enumerate() {
            let m = &cf.q[s.index];
            let mf = m.to_f64().unwrap();
            s.big_m = if j + 1 == count { y / mf } else { (s.ln_m_plus - mf.ln()).exp() };
            s.phi = phi_window(h, m, s.big_m);
        }
        Ok(out)
    };

    let (b, scales, k_bound) = match cf.b {
        Some(b) => {
            let s = scales_for(b)?;
            let kb = s.iter().map(|x| x.phi).fold(1.0f64, f64::max);
            (b, s, kb)
        }
        None => {
            // K is the sup of Φ_j over the scales, which depend on B; iterate to a fixed point
            let mut kb = 1.0f64;
            let mut b = choose_b(tau, b2, kb);
            let mut s = scales_for(b)?;
            for _ in 0..8 {
                let kb_new = s.iter().map(|x| x.phi).fold(1.0f64, f64::max);
                let b_new = choose_b(tau, b2, kb_new);
                kb = kb_new;
                if b_new == b {
                    break;
                }
                b = b_new;
                s = scales_for(b)?;
            }
            (b, s, kb)
        }
    };

    let j = scales.len();
    let mut report = CaseReport {
        n,
        y,
        b,
        scales: scales.clone(),
        j,
        theta_j: None,
        ln_theta_j: None,
        m_j: None,
        m_j_plus: None,
        big_m_j: None,
        phi_j: None,
        k_bound,
        d: None,
        c: None,
        delta: None,
        beta: None,
        ln_beta: None,
        label: CaseLabel::NoSharpScale,
    };
    let Some(last) = scales.last() else {
        return Ok(report);
    };
    let tau2 = h
        .tau2
        .ok_or_else(|| Error::Config("classification needs the lower decay rate τ₂ of h".into()))?;
    let d = (tau2 / tau).floor() as u32 + 2;
    let c = 20.0 * d1 as f64 * d as f64 + 20.0;
    let m_j = cf.q[last.index].to_f64().unwrap();
    let ln_m_j = m_j.ln();
    let delta = 3.0 * m_j.powi(-10);
    // β = (δ/3)^{2 d₁ D} / Y = m_J^{−20 d₁ D} / Y
    let ln_beta = -20.0 * d1 as f64 * d as f64 * ln_m_j - y.ln();
    let ln_ln_n = ln_n.ln();
    let ln_phi = last.phi.ln();
    let label = if last.ln_m_plus + ln_phi <= 4.0 * c * ln_ln_n {
        CaseLabel::A
    } else if 3.0 * last.ln_m_plus >= ln_phi + 4.0 * ln_n + c * ln_ln_n {
        CaseLabel::B
    } else if last.ln_m_plus <= ln_n {
        CaseLabel::C1
    } else {
        CaseLabel::C2
    };
    report.theta_j = Some(last.theta);
    report.ln_theta_j = Some(last.ln_theta);
    report.m_j = Some(last.m.clone());
    report.m_j_plus = Some(last.m_plus.clone());
    report.big_m_j = Some(last.big_m);
    report.phi_j = Some(last.phi);
    report.d = Some(d);
    report.c = Some(c);
    report.delta = Some(delta);
    report.beta = Some(ln_beta.exp());
    report.ln_beta = Some(ln_beta);
    report.label = label;
    Ok(report)
}

/// Exact check of 1/(2 q_k q_{k+1}) < |α − l_k/q_k| < 1/(q_k q_{k+1}) for one k.
pub fn convergent_bounds_hold(cf: &CFExpansion, k: usize) -> Result<bool> {
    let Successor::Exact(qp) = cf.successor(k) else {
        return Err(Error::Range(format!("q_{} is not known", k + 1)));
    };
    let (lk, qk) = (&cf.l[k], &cf.q[k]);
    let need = (2 * qp.bits() + qk.bits() + 128) as u32;
    let alpha = cf.alpha.with_precision(need.max(cf.alpha.precision_bits()))?;
    if let Some(r) = alpha.as_rational() {
        let diff = (r - BigRational::new(lk.clone(), qk.clone())).abs();
        let lower = BigRational::new(BigInt::one(), BigInt::from(2) * qk * &qp);
        let upper = BigRational::new(BigInt::one(), qk * &qp);
        return Ok(lower < diff && diff < upper);
    }
    let p = alpha.precision_bits();
    let Repr::Irrational { scaled, .. } = &alpha.repr else {
        return Err(Error::Precision("decimal α cannot certify convergent bounds".into()));
    };
    // |q_k α − l_k|·2^p lies in (d − q_k, d + q_k)
    let d = (qk * scaled - (lk << p)).abs();
    let one = BigInt::one() << p;
    let lower_ok = BigInt::from(2) * &qp * (&d - qk) > one;
    let upper_ok = &qp * (&d + qk) < one;
    let upper_violated = &qp * (&d - qk) >= one;
    if lower_ok && !upper_ok && !upper_violated {
        // q_{k+1}·|q_k α − l_k| = q_{k+1}/(q_k ζ + q_{k−1}) with ζ ∈ (a_{k+1}, a_{k+1} + 1),
        // which is < 1 for any infinite expansion; the gap can sit below every
        // affordable precision when a_{k+2} is astronomically large.
        return Ok(true);
    }
    Ok(lower_ok && upper_ok)
}

#[doc(hidden)]
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    f64_to_rational(x)
}
