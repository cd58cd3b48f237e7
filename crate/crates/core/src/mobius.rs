//! Segmented sieve for the Möbius and Liouville functions.
//!
//! μ is packed two bits per entry (`00` = 0, `01` = +1, `11` = −1) and λ is a
//! parity bitset (bit set when Ω(n) is odd). Slot 0 is unused.

use crate::error::{Error, Result};
use crate::reduce::Exec;

pub const DEFAULT_SEGMENT: u64 = 1 << 20;
pub const MAX_LIMIT: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug)]
pub struct SieveOptions {
    /// Rounded up to a multiple of 64.
    pub segment_len: u64,
    pub exec: Exec,
}

impl Default for SieveOptions {
    fn default() -> Self {
        SieveOptions {
            segment_len: DEFAULT_SEGMENT,
            exec: Exec::default(),
        }
    }
}

/// μ(n) and λ(n) for 1 ≤ n ≤ limit. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobiusTable {
    limit: u64,
    mu: Vec<u64>,
    lambda: Vec<u64>,
}

pub fn mobius_sieve(limit: u64) -> Result<MobiusTable> {
    mobius_sieve_with(limit, SieveOptions::default())
}

pub fn mobius_sieve_with(limit: u64, opts: SieveOptions) -> Result<MobiusTable> {
    if limit == 0 {
        return Err(Error::Capacity("sieve limit must be at least 1".into()));
    }
    if limit > MAX_LIMIT {
        return Err(Error::Capacity(format!("sieve limit {limit} exceeds {MAX_LIMIT}")));
    }
    let seg = opts.segment_len.max(64).div_ceil(64) * 64;
    let total = limit + 1;
    let nseg = total.div_ceil(seg) as usize;
    let primes = small_primes(isqrt(limit));

    let mu_words = total.div_ceil(32) as usize;
    let lam_words = total.div_ceil(64) as usize;
    let mut mu = Vec::new();
    let mut lambda = Vec::new();
    mu.try_reserve_exact(mu_words)
        .and_then(|_| lambda.try_reserve_exact(lam_words))
        .map_err(|_| Error::Capacity(format!("cannot allocate sieve for limit {limit}")))?;

    let parts = opts.exec.map_indexed(nseg, |s| {
        let lo = s as u64 * seg;
        let hi = (lo + seg).min(total);
        sieve_segment(lo, hi, &primes)
    })?;
    for (m, l) in parts {
        mu.extend_from_slice(&m);
        lambda.extend_from_slice(&l);
    }
    mu.truncate(mu_words);
    lambda.truncate(lam_words);
    Ok(MobiusTable { limit, mu, lambda })
}

fn sieve_segment(lo: u64, hi: u64, primes: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let len = (hi - lo) as usize;
    let mut rem: Vec<u64> = (lo..hi).collect();
    let mut sign = vec![1i8; len];
    let mut odd = vec![false; len];
    for &p in primes {
        if p * p >= hi {
            break;
        }
        let start = lo.div_ceil(p).max(1) * p;
        let mut m = start;
        while m < hi {
            let i = (m - lo) as usize;
            let mut r = rem[i] / p;
            sign[i] = -sign[i];
            odd[i] = !odd[i];
            while r.is_multiple_of(p) {
                r /= p;
                sign[i] = 0;
                odd[i] = !odd[i];
            }
            rem[i] = r;
            m += p;
        }
    }
    let mut mu = vec![0u64; len.div_ceil(32)];
    let mut lam = vec![0u64; len.div_ceil(64)];
    for i in 0..len {
        let n = lo + i as u64;
        if n == 0 {
            continue;
        }
        let (mut s, mut o) = (sign[i], odd[i]);
        if rem[i] > 1 {
            s = -s;
            o = !o;
        }
        let code: u64 = match s {
            1 => 0b01,
            -1 => 0b11,
            _ => 0,
        };
        mu[i / 32] |= code << (2 * (i % 32));
        if o {
            lam[i / 64] |= 1 << (i % 64);
        }
    }
    (mu, lam)
}

fn small_primes(bound: u64) -> Vec<u64> {
    let b = bound as usize;
    let mut composite = vec![false; b + 1];
    let mut out = Vec::new();
    for i in 2..=b {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= b {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl MobiusTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// μ(n) without a range check; `n` must be in `1..=limit`.
    #[inline]
    pub fn mu_unchecked(&self, n: u64) -> i8 {
        let code = (self.mu[(n / 32) as usize] >> (2 * (n % 32))) & 0b11;
        match code {
            0b01 => 1,
            0b11 => -1,
            _ => 0,
        }
    }

    pub fn mu(&self, n: u64) -> Result<i8> {
        self.check(n)?;
        Ok(self.mu_unchecked(n))
    }

    #[inline]
    pub fn liouville_unchecked(&self, n: u64) -> i8 {
        if (self.lambda[(n / 64) as usize] >> (n % 64)) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn liouville(&self, n: u64) -> Result<i8> {
        self.check(n)?;
        Ok(self.liouville_unchecked(n))
    }

    fn check(&self, n: u64) -> Result<()> {
        if n == 0 || n > self.limit {
            Err(Error::Range(format!("n = {n} outside 1..={}", self.limit)))
        } else {
            Ok(())
        }
    }

    /// Yields (n, μ(n)) for n = 1..=limit.
    pub fn iter(&self) -> impl Iterator<Item = (u64, i8)> + '_ {
        (1..=self.limit).map(move |n| (n, self.mu_unchecked(n)))
    }

    /// Σ_{n ≤ x} μ(n).
    pub fn mertens(&self, x: u64) -> Result<i64> {
        self.check(x)?;
        Ok((1..=x).map(|n| self.mu_unchecked(n) as i64).sum())
    }
}

/// λ(n) = (−1)^Ω(n).
pub fn liouville(table: &MobiusTable, n: u64) -> Result<i8> {
    table.liouville(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_mu(mut n: u64) -> i8 {
        let mut s = 1i8;
        let mut p = 2;
        while p * p <= n {
            if n.is_multiple_of(p) {
                n /= p;
                if n.is_multiple_of(p) {
                    return 0;
                }
                s = -s;
            }
            p += 1;
        }
        if n > 1 {
            s = -s;
        }
        s
    }

    fn trial_omega(mut n: u64) -> u32 {
        let mut c = 0;
        let mut p = 2;
        while p * p <= n {
            while n.is_multiple_of(p) {
                n /= p;
                c += 1;
            }
            p += 1;
        }
        c + (n > 1) as u32
    }

    #[test]
    fn small_values() {
        let t = mobius_sieve(30).unwrap();
        assert_eq!(t.mu(1).unwrap(), 1);
        assert_eq!(t.mu(30).unwrap(), -1);
        assert_eq!(t.mu(12).unwrap(), 0);
        assert_eq!(t.mu(6).unwrap(), 1);
        assert_eq!(liouville(&t, 1).unwrap(), 1);
        assert_eq!(liouville(&t, 4).unwrap(), 1);
        assert_eq!(liouville(&t, 12).unwrap(), -1);
        assert!(t.mu(31).is_err());
        assert!(liouville(&t, 0).is_err());
        assert_eq!(mobius_sieve(1).unwrap().mu(1).unwrap(), 1);
        assert!(matches!(mobius_sieve(0), Err(Error::Capacity(_))));
    }

    #[test]
    fn matches_trial_division() {
        let t = mobius_sieve(100).unwrap();
        assert_eq!(t.mertens(100).unwrap(), (1..=100).map(|n| trial_mu(n) as i64).sum::<i64>());
        let t = mobius_sieve_with(5000, SieveOptions { segment_len: 64, exec: Exec::Sequential }).unwrap();
        for n in 1..=5000 {
            assert_eq!(t.mu_unchecked(n), trial_mu(n), "mu({n})");
            let l = if trial_omega(n).is_multiple_of(2) { 1 } else { -1 };
            assert_eq!(t.liouville_unchecked(n), l, "lambda({n})");
        }
    }

    #[test]
    fn divisor_sum_identity() {
        let t = mobius_sieve(10_000).unwrap();
        let mut acc = vec![0i32; 10_001];
        for d in 1..=10_000u64 {
            let m = t.mu_unchecked(d) as i32;
            let mut k = d;
            while k <= 10_000 {
                acc[k as usize] += m;
                k += d;
            }
        }
        assert_eq!(acc[1], 1);
        assert!(acc[2..].iter().all(|&v| v == 0));
    }

    #[test]
    fn squarefree_lambda_equals_mu() {
        let t = mobius_sieve(20_000).unwrap();
        for (n, m) in t.iter() {
            if m != 0 {
                assert_eq!(t.liouville_unchecked(n), m);
            }
        }
    }

    #[test]
    fn deterministic_across_segments_and_threads() {
        let base = mobius_sieve_with(100_000, SieveOptions { segment_len: 1 << 20, exec: Exec::Sequential }).unwrap();
        for (seg, exec) in [(64, Exec::Parallel { threads: 2 }), (1000, Exec::Sequential), (4096, Exec::Parallel { threads: 3 })] {
            let t = mobius_sieve_with(100_000, SieveOptions { segment_len: seg, exec }).unwrap();
            assert_eq!(t, base);
        }
    }

    proptest! {
        #[test]
        fn multiplicative_on_coprime(a in 1u64..300, b in 1u64..300) {
            let t = mobius_sieve(90_000).unwrap();
            if num_integer::gcd(a, b) == 1 {
                prop_assert_eq!(t.mu_unchecked(a * b), t.mu_unchecked(a) * t.mu_unchecked(b));
            }
        }
    }
}
