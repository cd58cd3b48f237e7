//! Fourier series with exponentially decaying coefficients.

use crate::cfrac::{Alpha, CFExpansion, CaseLabel, CaseReport, Successor};
use crate::error::{Error, Result};
use crate::phase::{cis_minus_one, Frac128};
use crate::reduce::{chunked_sum, Exec, DEFAULT_CHUNK};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// h(x) = Σ ĥ(m) e(mx) with sparse coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSeries {
    coeffs: BTreeMap<i64, Complex64>,
    /// Upper decay rate: |ĥ(m)| ≤ c_up·e^{−τ|m|}.
    pub tau: f64,
    /// Lower decay rate on the support: |ĥ(m)| ≥ c_low·e^{−τ₂|m|}.
    pub tau2: Option<f64>,
    pub c_up: f64,
    pub c_low: Option<f64>,
    /// ln of a bound on Σ|ĥ(m)| over coefficients dropped because they
    /// underflow a double (−∞ when nothing was dropped).
    pub omitted_ln_bound: f64,
}

impl AnalyticSeries {
    /// Builds a series from (m, ĥ(m)) pairs. Zero entries are dropped.
    /// `c_up` and `c_low` are the tightest constants for the given rates.
    pub fn from_coeffs<I>(entries: I, tau: f64, tau2: Option<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("τ must be positive, got {tau}")));
        }
        if let Some(t2) = tau2 {
            if !(t2 >= tau) {
                return Err(Error::Config(format!("τ₂ = {t2} must be ≥ τ = {tau}")));
            }
        }
        let mut coeffs = BTreeMap::new();
        for (m, c) in entries {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::Config(format!("coefficient at m = {m} is not finite")));
            }
            if c != Complex64::zero() {
                *coeffs.entry(m).or_insert(Complex64::zero()) += c;
            }
        }
        coeffs.retain(|_, c| *c != Complex64::zero());
        let mut s = AnalyticSeries { coeffs, tau, tau2, c_up: 0.0, c_low: None, omitted_ln_bound: f64::NEG_INFINITY };
        s.refresh_constants();
        Ok(s)
    }

    fn refresh_constants(&mut self) {
        let tau = self.tau;
        self.c_up = self
            .coeffs
            .iter()
            .map(|(&m, c)| (c.norm().ln() + tau * m.unsigned_abs() as f64).exp())
            .fold(0.0, f64::max);
        self.c_low = self.tau2.map(|t2| {
            self.coeffs
                .iter()
                .map(|(&m, c)| (c.norm().ln() + t2 * m.unsigned_abs() as f64).exp())
                .fold(f64::INFINITY, f64::min)
        });
    }

    pub fn zero(tau: f64) -> Self {
        Self::from_coeffs(std::iter::empty(), tau, None).expect("τ > 0")
    }

    /// cos(2πx): ĥ(±1) = 1/2.
    pub fn cosine(tau: f64) -> Self {
        Self::from_coeffs([(1, Complex64::new(0.5, 0.0)), (-1, Complex64::new(0.5, 0.0))], tau, Some(tau))
            .expect("valid cosine")
    }

    /// ĥ(m) = e^{−τ|m|} for 1 ≤ |m| ≤ m_max.
    pub fn exp_decay(tau: f64, m_max: i64) -> Result<Self> {
        let entries = (1..=m_max).flat_map(|m| {
            let c = Complex64::new((-tau * m as f64).exp(), 0.0);
            [(m, c), (-m, c)]
        });
        Self::from_coeffs(entries, tau, Some(tau))
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_frequency(&self) -> i64 {
        self.coeffs.keys().map(|m| m.abs()).max().unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|(&m, c)| {
            let d = self.coeff(-m).conj() - c;
            d.norm() <= 1e-15 * c.norm().max(1e-300)
        })
    }

    /// Smallest M with c_up·e^{−τM} < 10⁻¹⁴.
    pub fn default_truncation(&self) -> i64 {
        if self.c_up <= 0.0 {
            return 1;
        }
        (((self.c_up.ln() + 14.0 * std::f64::consts::LN_10) / self.tau).ceil() as i64).max(1)
    }

    /// Σ_{|m|≤M} ĥ(m)e(mx).
    pub fn eval_at(&self, x: Frac128, m_max: i64) -> Complex64 {
        self.coeffs
            .range(-m_max..=m_max)
            .map(|(&m, c)| c * x.mul_int(m as i128).cis())
            .sum()
    }

    pub fn eval_full(&self, x: Frac128) -> Complex64 {
        self.coeffs.iter().map(|(&m, c)| c * x.mul_int(m as i128).cis()).sum()
    }

    /// Adds ĝ to ĥ coefficientwise (rates and constants are recomputed).
    pub fn add(&self, other: &AnalyticSeries) -> AnalyticSeries {
        let mut out = self.clone();
        for (&m, c) in &other.coeffs {
            *out.coeffs.entry(m).or_insert(Complex64::zero()) += c;
        }
        out.coeffs.retain(|_, c| *c != Complex64::zero());
        out.tau = self.tau.min(other.tau);
        out.tau2 = match (self.tau2, other.tau2) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        out.omitted_ln_bound = ln_add(self.omitted_ln_bound, other.omitted_ln_bound);
        out.refresh_constants();
        out
    }

    /// The difference g(x+α) − g(x) in coefficient space.
    pub fn difference(&self, alpha: &Alpha) -> Result<AnalyticSeries> {
        let mut entries = Vec::with_capacity(self.coeffs.len());
        for (&m, c) in &self.coeffs {
            let th = alpha.signed_norm(&BigInt::from(m))?;
            entries.push((m, c * cis_minus_one(th)));
        }
        let mut out = Self::from_coeffs(entries, self.tau, None)?;
        out.omitted_ln_bound = self.omitted_ln_bound + 2f64.ln();
        Ok(out)
    }

    /// Keeps |m| ≤ M; the dropped mass joins `omitted_ln_bound`.
    pub fn truncated(&self, m_max: i64) -> AnalyticSeries {
        let mut out = self.clone();
        let mut dropped = f64::NEG_INFINITY;
        out.coeffs.retain(|&m, c| {
            let keep = m.abs() <= m_max;
            if !keep {
                dropped = ln_add(dropped, c.norm().ln());
            }
            keep
        });
        out.omitted_ln_bound = ln_add(self.omitted_ln_bound, dropped);
        out.refresh_constants();
        out
    }

    pub(crate) fn set_omitted_ln_bound(&mut self, v: f64) {
        self.omitted_ln_bound = v;
    }
}

/// ln(e^a + e^b) without overflow.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Σ_{|m|≤M} ĥ(m)e(mx).
pub fn eval_series(h: &AnalyticSeries, x: f64, m_max: i64) -> Result<Complex64> {
    if m_max < 1 {
        return Err(Error::Config("truncation M must be ≥ 1".into()));
    }
    Ok(h.eval_at(Frac128::from_f64(x), m_max))
}

/// Σ_{j=0}^{n−1} h(x₁ + jα) by direct evaluation.
pub fn birkhoff_sum_direct(h: &AnalyticSeries, x1: f64, alpha: &Alpha, n: u64, exec: &Exec) -> Result<Complex64> {
    birkhoff_direct_at(h, Frac128::from_f64(x1), alpha, n, exec)
}

pub fn birkhoff_direct_at(h: &AnalyticSeries, x1: Frac128, alpha: &Alpha, n: u64, exec: &Exec) -> Result<Complex64> {
    if n == 0 {
        return Ok(Complex64::zero());
    }
    // certify the largest phase once; the rest use the fast path
    alpha.phase(n as i128)?;
    chunked_sum(*exec, 0, n, DEFAULT_CHUNK, |lo, hi| {
        let mut acc = Complex64::zero();
        for j in lo..hi {
            let x = x1 + alpha.phase(j as i128).expect("phase certified above");
            acc += h.eval_full(x);
        }
        acc
    })
}

/// (e(nθ) − 1)/(e(θ) − 1), or n when θ ≡ 0.
fn geometric_ratio(alpha: &Alpha, m: i64, n: u64) -> Result<Complex64> {
    let mb = BigInt::from(m);
    if alpha.multiple_is_integer(&mb) {
        return Ok(Complex64::new(n as f64, 0.0));
    }
    // signed distances keep full relative precision when mα is very close to ℤ
    let th = alpha.signed_norm(&mb)?;
    let nth = alpha.signed_norm(&(mb * n))?;
    Ok(cis_minus_one(nth) / cis_minus_one(th))
}

/// Σ_{|m|≤M} ĥ(m)e(mx₁)(e(nmα)−1)/(e(mα)−1), with the term n·ĥ(m)e(mx₁)
/// whenever mα ∈ ℤ.
pub fn birkhoff_sum_fourier(h: &AnalyticSeries, x1: f64, alpha: &Alpha, n: u64, m_max: i64) -> Result<Complex64> {
    if m_max < 1 {
        return Err(Error::Config("truncation M must be ≥ 1".into()));
    }
    birkhoff_fourier_at(h, Frac128::from_f64(x1), alpha, n, m_max)
}

pub fn birkhoff_fourier_at(h: &AnalyticSeries, x1: Frac128, alpha: &Alpha, n: u64, m_max: i64) -> Result<Complex64> {
    let mut acc = Complex64::zero();
    if n == 0 {
        return Ok(acc);
    }
    for (&m, c) in h.coeffs.range(-m_max..=m_max) {
        acc += c * x1.mul_int(m as i128).cis() * geometric_ratio(alpha, m, n)?;
    }
    Ok(acc)
}

/// Bound on the Fourier-side truncation error: 2n·c_up·e^{−τ(M+1)}/(1−e^{−τ}).
pub fn fourier_tail_bound(h: &AnalyticSeries, n: u64, m_max: i64) -> f64 {
    let t = h.tau;
    2.0 * n as f64 * h.c_up * (-t * (m_max + 1) as f64).exp() / (1.0 - (-t).exp()) + h.omitted_ln_bound.exp() * n as f64
}

/// g with ĝ(m) = ĥ(m)/(e(mα)−1) over |m| ≤ M, skipping q | m when asked.
pub fn cobounding_series(h: &AnalyticSeries, alpha: &Alpha, exclude_divisible_by: Option<i64>, m_max: i64) -> Result<AnalyticSeries> {
    if let Some(q) = exclude_divisible_by {
        if q < 1 {
            return Err(Error::Config("exclusion modulus must be ≥ 1".into()));
        }
    }
    let mut entries = Vec::new();
    for (&m, c) in h.coeffs.range(-m_max..=m_max) {
        if let Some(q) = exclude_divisible_by {
            if m % q == 0 {
                continue;
            }
        }
        if alpha.multiple_is_integer(&BigInt::from(m)) {
            return Err(Error::Domain(format!("e(mα) = 1 at retained m = {m}: cohomological equation is singular")));
        }
        let th = alpha.signed_norm(&BigInt::from(m))?;
        entries.push((m, c / cis_minus_one(th)));
    }
    AnalyticSeries::from_coeffs(entries, h.tau, None)
}

#[derive(Clone, Debug)]
pub struct RationalDecomposition {
    /// Coboundary part over q ∤ m.
    pub g: AnalyticSeries,
    /// β(x₁) = Σ ĥ(qm)e(qm x₁), supported on multiples of q.
    pub beta: AnalyticSeries,
    pub q: i64,
}

impl RationalDecomposition {
    pub fn beta_at(&self, x1: f64) -> Complex64 {
        self.beta.eval_full(Frac128::from_f64(x1))
    }

    /// g(x₁+nα) − g(x₁) + n·β(x₁).
    pub fn birkhoff(&self, alpha: &Alpha, x1: f64, n: u64) -> Result<Complex64> {
        let x = Frac128::from_f64(x1);
        let shifted = x + alpha.phase(n as i128)?;
        Ok(self.g.eval_full(shifted) - self.g.eval_full(x) + self.beta.eval_full(x) * n as f64)
    }
}

/// Splits h for rational α = l/q into a coboundary and an n-linear part.
pub fn rational_case_decompose(h: &AnalyticSeries, alpha: &Alpha, m_max: i64) -> Result<RationalDecomposition> {
    let r = alpha
        .as_rational()
        .ok_or_else(|| Error::Domain("rational_case_decompose needs rational α".into()))?;
    let q = r
        .denom()
        .to_i64()
        .ok_or_else(|| Error::Capacity("denominator of α exceeds 64 bits".into()))?;
    let g = cobounding_series(h, alpha, Some(q), m_max)?;
    let beta = AnalyticSeries::from_coeffs(
        h.coeffs.range(-m_max..=m_max).filter(|(&m, _)| m % q == 0).map(|(&m, &c)| (m, c)),
        h.tau,
        None,
    )?;
    Ok(RationalDecomposition { g, beta, q })
}

/// One term ĥ(m)e(mx₁)(e(nmα)−1)/(e(mα)−1).
fn h_term(h_m: Complex64, m: i64, x1: Frac128, alpha: &Alpha, n: u64) -> Result<Complex64> {
    Ok(h_m * x1.mul_int(m as i128).cis() * geometric_ratio(alpha, m, n)?)
}

/// F(n) = Σ_{j ≤ J} F(n; m_j), truncated at Y as in the report.
pub fn big_f(report: &CaseReport, h: &AnalyticSeries, alpha: &Alpha, n: u64, x1: f64) -> Result<Complex64> {
    let x1 = Frac128::from_f64(x1);
    let mut acc = Complex64::zero();
    for (j, s) in report.scales.iter().enumerate() {
        let Some(mj) = s.m.parse::<i64>().ok() else { continue };
        let upper = if j + 1 == report.scales.len() { report.y } else { s.big_m * mj as f64 };
        for (&m, c) in &h.coeffs {
            if m % mj == 0 && m != 0 && ((m.unsigned_abs() as f64) < upper) {
                acc += h_term(*c, m, x1, alpha, n)?;
            }
        }
    }
    Ok(acc)
}

/// H(n) over every sharp denominator of the expansion, with full windows
/// q ≤ |m| < q⁺.
pub fn big_h_full(cf: &CFExpansion, b: u32, h: &AnalyticSeries, n: u64, x1: f64) -> Result<Complex64> {
    let x1 = Frac128::from_f64(x1);
    let part = cf.partition(b);
    let mut acc = Complex64::zero();
    for &k in &part.sharp {
        let Some(q) = cf.q[k].to_i64() else { continue };
        let q_plus = match cf.successor(k) {
            Successor::Exact(qp) => qp.to_f64().unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        };
        for (&m, c) in &h.coeffs {
            let am = m.unsigned_abs() as f64;
            if m % q == 0 && am >= q as f64 && am < q_plus {
                acc += h_term(*c, m, x1, alpha_of(cf), n)?;
            }
        }
    }
    Ok(acc)
}

fn alpha_of(cf: &CFExpansion) -> &Alpha {
    &cf.alpha
}

/// Window Σ_{1≤|m|<M} |m|^p·|ĥ(m_j m)| over the sparse support.
pub fn window_moment(h: &AnalyticSeries, m_j: &BigInt, big_m: f64, p: i32) -> f64 {
    let Some(mj) = m_j.to_i64() else { return 0.0 };
    if mj == 0 {
        return 0.0;
    }
    h.coeffs
        .iter()
        .filter(|(&k, _)| k != 0 && k % mj == 0 && ((k / mj).unsigned_abs() as f64) < big_m)
        .map(|(&k, c)| ((k / mj).unsigned_abs() as f64).powi(p) * c.norm())
        .sum()
}

/// Φ = Σ_{1≤|m|<M} |m|²|ĥ(m_j m)|.
pub fn phi_window(h: &AnalyticSeries, m_j: &BigInt, big_m: f64) -> f64 {
    window_moment(h, m_j, big_m, 2)
}

pub fn phi_j(report: &CaseReport, h: &AnalyticSeries, j: usize) -> Result<f64> {
    let s = report
        .scales
        .get(j)
        .ok_or_else(|| Error::Range(format!("scale index {j} out of range (J = {})", report.j)))?;
    let m: BigInt = s.m.parse().map_err(|_| Error::Numeric("bad m_j".into()))?;
    Ok(phi_window(h, &m, s.big_m))
}

/// The scale function f_j(x) = Σ ĥ(m_j m)e(m_j m x₁)(e(xm)−1)/(e(mθ_j)−1),
/// with θ_j the signed distance m_jα − round(m_jα).
#[derive(Clone, Debug)]
pub struct ScaleFunction {
    pub m_j: i64,
    pub big_m: f64,
    pub theta: f64,
    pub x1: Frac128,
    /// (m, ĥ(m_j m)e(m_j m x₁)) over the window.
    terms: Vec<(i64, Complex64)>,
}

impl ScaleFunction {
    pub fn new(h: &AnalyticSeries, m_j: i64, big_m: f64, theta_signed: f64, x1: f64) -> Self {
        let x1 = Frac128::from_f64(x1);
        let terms = h
            .coeffs
            .iter()
            .filter(|(&k, _)| k != 0 && k % m_j == 0 && ((k / m_j).unsigned_abs() as f64) < big_m)
            .map(|(&k, c)| (k / m_j, c * x1.mul_int(k as i128).cis()))
            .collect();
        ScaleFunction { m_j, big_m, theta: theta_signed, x1, terms }
    }

    pub fn from_report(report: &CaseReport, h: &AnalyticSeries, j: usize, x1: f64) -> Result<Self> {
        let s = report
            .scales
            .get(j)
            .ok_or_else(|| Error::Range(format!("scale index {j} out of range (J = {})", report.j)))?;
        let mj = s.m.parse::<i64>().map_err(|_| Error::Capacity(format!("m_j = {} exceeds 64 bits", s.m)))?;
        Ok(Self::new(h, mj, s.big_m, s.theta_signed, x1))
    }

    pub fn window(&self) -> &[(i64, Complex64)] {
        &self.terms
    }

    /// f_j(x) for real x.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(m, w)| {
                let num = Frac128::from_f64(x * m as f64).cis_minus_one();
                let den = cis_minus_one(m as f64 * self.theta);
                w * num / den
            })
            .sum()
    }

    /// F_j(n) computed from exact phases of n·m·m_j·α.
    pub fn eval_exact(&self, alpha: &Alpha, n: u64) -> Result<Complex64> {
        let mut acc = Complex64::zero();
        for &(m, w) in &self.terms {
            acc += w * geometric_ratio(alpha, m * self.m_j, n)?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseBTaylor {
    pub c0: Complex64,
    pub c1: Complex64,
    pub c2: Complex64,
    /// c̃₃ = Σ |m|³|ĥ(m_J m)|.
    pub c3_tilde: f64,
    pub theta: f64,
    /// (2π)³/24 · c̃₃ · |θ|³ · N⁴.
    pub remainder_bound: f64,
}

impl CaseBTaylor {
    /// c₀n + ½c₁θn(n−1) + (1/6)c₂θ²(n−1)n(2n−1).
    pub fn quadratic_model(&self, n: u64) -> Complex64 {
        let n = n as f64;
        let t = self.theta;
        self.c0 * n + self.c1 * (0.5 * t * n * (n - 1.0)) + self.c2 * (t * t * (n - 1.0) * n * (2.0 * n - 1.0) / 6.0)
    }
}

/// Taylor coefficients of f_J for a given window; no case check.
pub fn taylor_coefficients(f: &ScaleFunction, n_max: u64) -> CaseBTaylor {
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut c = [Complex64::zero(); 3];
    let mut c3 = 0.0;
    for &(m, w) in f.window() {
        let mf = m as f64;
        c[0] += w;
        c[1] += w * mf;
        c[2] += w * mf * mf;
        c3 += mf.abs().powi(3) * w.norm();
    }
    c[1] *= two_pi_i;
    c[2] *= two_pi_i * two_pi_i / 2.0;
    let th = f.theta.abs();
    let remainder_bound = (2.0 * PI).powi(3) / 24.0 * c3 * th.powi(3) * (n_max as f64).powi(4);
    CaseBTaylor { c0: c[0], c1: c[1], c2: c[2], c3_tilde: c3, theta: f.theta, remainder_bound }
}

/// Case-(B) expansion of f_J(nθ_J) up to N.
pub fn case_b_taylor(report: &CaseReport, h: &AnalyticSeries, x1: f64) -> Result<CaseBTaylor> {
    if report.label != CaseLabel::B {
        return Err(Error::Domain(format!("case label is {:?}, not B", report.label)));
    }
    let f = ScaleFunction::from_report(report, h, report.j - 1, x1)?;
    Ok(taylor_coefficients(&f, report.n))
}
