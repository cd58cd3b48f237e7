//! Weighted correlation sums, polynomial-phase sums, the bilinear prime
//! criterion, and the analytic checks used in the hard case of the scale
//! analysis.

use crate::analytic::ScaleFunction;
use crate::error::{Error, Result};
use crate::flows::{character_phase, skew_step, Character, SkewFlow, TorusPoint, UnipotentAffine, unipotent_phase_polys};
use crate::mobius::MobiusTable;
use crate::phase::{cis_minus_one, Frac128};
use crate::poly::PhaseEvaluator;
use crate::reduce::{checkpoint_sums, chunked_sum, Exec, DEFAULT_CHUNK};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Arithmetic weight w(n) in Σ w(n)·f(Tⁿx).
#[derive(Clone, Copy, Debug)]
pub enum Weight<'a> {
    One,
    Mobius(&'a MobiusTable),
    Liouville(&'a MobiusTable),
}

impl Weight<'_> {
    #[inline]
    pub fn at(&self, n: u64) -> i8 {
        match self {
            Weight::One => 1,
            Weight::Mobius(t) => t.mu_unchecked(n),
            Weight::Liouville(t) => t.liouville_unchecked(n),
        }
    }

    pub fn check(&self, n_max: u64) -> Result<()> {
        match self {
            Weight::One => Ok(()),
            Weight::Mobius(t) | Weight::Liouville(t) => {
                if n_max > t.limit() {
                    Err(Error::Range(format!("N = {n_max} exceeds the sieve limit {}", t.limit())))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Weight::One => "one",
            Weight::Mobius(_) => "mobius",
            Weight::Liouville(_) => "liouville",
        }
    }
}

/// Evaluates chunk sums Σ_{lo ≤ n < hi} w(n)·f(n) for a prepared observable.
pub trait ChunkSummer: Sync {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64>;
}

/// A sequence n ↦ f(Tⁿx) with random access by chunk.
pub trait Observable: Sync {
    /// Certifies every phase up to `n_max` and builds the chunk evaluator.
    fn prepare(&self, n_max: u64) -> Result<Box<dyn ChunkSummer + '_>>;
    fn describe(&self) -> serde_json::Value;
}

/// First error raised inside a reduction, if any.
struct ErrSlot(Mutex<Option<Error>>);

impl ErrSlot {
    fn new() -> Self {
        ErrSlot(Mutex::new(None))
    }

    fn take(&self, r: Result<Complex64>) -> Complex64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut g = self.0.lock().unwrap();
                if g.is_none() {
                    *g = Some(e);
                }
                Complex64::zero()
            }
        }
    }

    fn finish<T>(self, v: T) -> Result<T> {
        match self.0.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// S(N_i) = Σ_{1 ≤ n ≤ N_i} w(n)·f(n) at every checkpoint.
pub fn checkpoint_series(obs: &dyn Observable, weight: Weight, checkpoints: &[u64], exec: &Exec) -> Result<Vec<Complex64>> {
    let Some(&n_max) = checkpoints.last() else {
        return Ok(Vec::new());
    };
    if checkpoints[0] == 0 {
        return Err(Error::Config("checkpoints must be ≥ 1".into()));
    }
    weight.check(n_max)?;
    let summer = obs.prepare(n_max)?;
    let slot = ErrSlot::new();
    let sums = checkpoint_sums(*exec, checkpoints, DEFAULT_CHUNK, |lo, hi| slot.take(summer.sum(lo, hi, &weight)))?;
    slot.finish(sums)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub checkpoints: Vec<u64>,
    pub sums: Vec<Complex64>,
    pub metadata: serde_json::Value,
}

impl CorrelationSeries {
    /// S(N_i)/N_i.
    pub fn normalized(&self) -> Vec<Complex64> {
        self.sums.iter().zip(&self.checkpoints).map(|(s, &n)| s / n as f64).collect()
    }

    pub fn abs_over_n(&self) -> Vec<f64> {
        self.normalized().iter().map(|z| z.norm()).collect()
    }

    /// `N,re,im,abs_over_N` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,re,im,abs_over_N\n");
        for (s, &n) in self.sums.iter().zip(&self.checkpoints) {
            out.push_str(&format!("{n},{:e},{:e},{:e}\n", s.re, s.im, s.norm() / n as f64));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "checkpoints": self.checkpoints,
            "sums": self.sums.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "abs_over_n": self.abs_over_n(),
            "metadata": self.metadata,
        })
    }
}

/// Weighted series with the bound |S(N)| ≤ N checked.
pub fn correlation_series(obs: &dyn Observable, weight: Weight, checkpoints: &[u64], exec: &Exec) -> Result<CorrelationSeries> {
    let sums = checkpoint_series(obs, weight, checkpoints, exec)?;
    for (s, &n) in sums.iter().zip(checkpoints) {
        if s.norm() > n as f64 * (1.0 + 1e-9) {
            return Err(Error::Numeric(format!("|S({n})| = {} exceeds N", s.norm())));
        }
    }
    Ok(CorrelationSeries {
        checkpoints: checkpoints.to_vec(),
        sums,
        metadata: json!({ "observable": obs.describe(), "weight": weight.name() }),
    })
}

/// Σ_{n ≤ N_i} μ(n)·f(Tⁿx).
pub fn mobius_correlate(obs: &dyn Observable, table: &MobiusTable, checkpoints: &[u64], exec: &Exec) -> Result<CorrelationSeries> {
    correlation_series(obs, Weight::Mobius(table), checkpoints, exec)
}

/// n ↦ e(⟨b, Tⁿx⟩) for a skew product.
pub struct SkewObservable<'a> {
    pub flow: &'a SkewFlow,
    pub x0: TorusPoint,
    pub b: Character,
}

impl<'a> SkewObservable<'a> {
    pub fn new(flow: &'a SkewFlow, x0: TorusPoint, b: Character) -> Self {
        SkewObservable { flow, x0, b }
    }
}

impl Observable for SkewObservable<'_> {
    fn prepare(&self, n_max: u64) -> Result<Box<dyn ChunkSummer + '_>> {
        // the largest phase certifies all smaller ones
        character_phase(self.flow, &self.x0, self.b, n_max)?;
        if self.flow.is_normalized() {
            let alpha = self.flow.alpha.frac128();
            let mut terms = Vec::new();
            let mut h0 = 0.0;
            for (&m, &c) in self.flow.h.coeffs() {
                if m == 0 {
                    h0 = c.re;
                } else if m > 0 {
                    terms.push((m, c, self.flow.alpha.phase(m as i128)?.cis()));
                }
            }
            return Ok(Box::new(NormalizedSkew { obs: self, alpha, h0, terms }));
        }
        // non-normalized variants have no fast closed form: store anchors
        let stride = DEFAULT_CHUNK;
        let count = (n_max / stride + 1) as usize;
        let mut anchors = Vec::with_capacity(count);
        let mut p = self.x0;
        for i in 0..count {
            anchors.push(p);
            if i + 1 < count {
                for _ in 0..stride {
                    p = skew_step(self.flow, &p);
                }
            }
        }
        Ok(Box::new(AnchoredSkew { obs: self, anchors, stride }))
    }

    fn describe(&self) -> serde_json::Value {
        let (x1, x2) = self.x0.to_f64();
        json!({
            "kind": "skew",
            "a": self.flow.a, "c": self.flow.c, "d": self.flow.d,
            "alpha": self.flow.alpha.to_f64(),
            "h_support": self.flow.h.support_len(),
            "x": [x1, x2],
            "b": [self.b.b1, self.b.b2],
        })
    }
}

struct NormalizedSkew<'a> {
    obs: &'a SkewObservable<'a>,
    alpha: Frac128,
    h0: f64,
    /// (m, ĥ(m), e(mα)) for m > 0.
    terms: Vec<(i64, Complex64, Complex64)>,
}

impl ChunkSummer for NormalizedSkew<'_> {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64> {
        let flow = self.obs.flow;
        let b = self.obs.b;
        let start = crate::flows::skew_orbit_closed(flow, &self.obs.x0, lo, crate::flows::BirkhoffMode::Fourier)?;
        let (mut y1, mut y2) = (start.x1, start.x2);
        // z_m = e(m·y1), advanced by e(mα) and refreshed at every chunk start
        let mut z: Vec<Complex64> = self.terms.iter().map(|&(m, _, _)| y1.mul_int(m as i128).cis()).collect();
        let c = flow.c as i128;
        let mut acc = Complex64::zero();
        for n in lo..hi {
            let w = weight.at(n);
            if w != 0 {
                let ph = y1.mul_int(b.b1 as i128) + y2.mul_int(b.b2 as i128);
                acc += ph.cis() * w as f64;
            }
            if n + 1 < hi && b.b2 != 0 {
                let mut h = self.h0;
                for (zm, &(_, hm, wm)) in z.iter_mut().zip(&self.terms) {
                    h += 2.0 * (hm * *zm).re;
                    *zm *= wm;
                }
                y2 += y1.mul_int(c) + Frac128::from_f64(h);
            }
            y1 += self.alpha;
        }
        Ok(acc)
    }
}

struct AnchoredSkew<'a> {
    obs: &'a SkewObservable<'a>,
    anchors: Vec<TorusPoint>,
    stride: u64,
}

impl ChunkSummer for AnchoredSkew<'_> {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64> {
        let idx = (lo / self.stride) as usize;
        let mut p = self.anchors[idx];
        for _ in idx as u64 * self.stride..lo {
            p = skew_step(self.obs.flow, &p);
        }
        let mut acc = Complex64::zero();
        for n in lo..hi {
            let w = weight.at(n);
            if w != 0 {
                acc += self.obs.b.phase(&p).cis() * w as f64;
            }
            p = skew_step(self.obs.flow, &p);
        }
        Ok(acc)
    }
}

/// n ↦ e(⟨v, Tⁿx⟩) for a unipotent affine map, from exact phase polynomials.
pub struct UnipotentObservable<'a> {
    pub aff: &'a UnipotentAffine,
    pub x: Vec<BigRational>,
    pub v: Vec<i64>,
}

impl<'a> UnipotentObservable<'a> {
    pub fn new(aff: &'a UnipotentAffine, x: Vec<BigRational>, v: Vec<i64>) -> Self {
        UnipotentObservable { aff, x, v }
    }
}

struct ResidueEvaluators {
    evals: Vec<PhaseEvaluator>,
}

impl ChunkSummer for ResidueEvaluators {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64> {
        let nu = self.evals.len() as u64;
        let mut acc = Complex64::zero();
        for n in lo..hi {
            let w = weight.at(n);
            if w != 0 {
                acc += self.evals[(n % nu) as usize].eval(n).cis() * w as f64;
            }
        }
        Ok(acc)
    }
}

impl Observable for UnipotentObservable<'_> {
    fn prepare(&self, _n_max: u64) -> Result<Box<dyn ChunkSummer + '_>> {
        let polys = unipotent_phase_polys(self.aff, &self.x, &self.v)?;
        Ok(Box::new(ResidueEvaluators { evals: polys.iter().map(PhaseEvaluator::new).collect() }))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": "unipotent_affine",
            "matrix": self.aff.matrix,
            "translation": self.aff.translation.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "nu": self.aff.nu,
            "x": self.x.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "v": self.v,
        })
    }
}

/// φ(n) = Σ α_i nⁱ restricted to n ≡ l (mod ν). Coefficients are stored lowest
/// degree first and taken at their exact binary value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyPhase {
    pub coeffs: Vec<f64>,
    pub nu: u64,
    pub l: u64,
}

impl PolyPhase {
    pub fn new(coeffs: Vec<f64>, nu: u64, l: u64) -> Result<Self> {
        if nu == 0 || l >= nu {
            return Err(Error::Config(format!("need 0 ≤ l < ν, got l = {l}, ν = {nu}")));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(PolyPhase { coeffs, nu, l })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// φ(n) mod 1.
    pub fn phase(&self, n: u64) -> Frac128 {
        let mut acc = Frac128::ZERO;
        let mut pw: u128 = 1;
        for &c in &self.coeffs {
            acc += Frac128::from_f64(c).mul_u128(pw);
            pw = pw.wrapping_mul(n as u128);
        }
        acc
    }
}

impl Observable for PolyPhase {
    fn prepare(&self, _n_max: u64) -> Result<Box<dyn ChunkSummer + '_>> {
        Ok(Box::new(PolySummer(self)))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "poly_phase", "coeffs": self.coeffs, "nu": self.nu, "l": self.l })
    }
}

struct PolySummer<'a>(&'a PolyPhase);

impl ChunkSummer for PolySummer<'_> {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64> {
        let p = self.0;
        let mut acc = Complex64::zero();
        for n in lo..hi {
            if n % p.nu != p.l {
                continue;
            }
            let w = weight.at(n);
            if w != 0 {
                acc += p.phase(n).cis() * w as f64;
            }
        }
        Ok(acc)
    }
}

/// Σ_{n ≤ N, n ≡ l (ν)} μ(n)e(φ(n)).
pub fn poly_exp_sum(phase: &PolyPhase, table: &MobiusTable, n: u64, exec: &Exec) -> Result<Complex64> {
    if n == 0 {
        return Ok(Complex64::zero());
    }
    Ok(checkpoint_series(phase, Weight::Mobius(table), &[n], exec)?[0])
}

/// Sequences accepted by the bilinear test from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceSpec {
    /// f ≡ 1.
    One,
    /// f(n) = e(nθ).
    Rotation(f64),
    /// f(n) = e(Σ c_i nⁱ).
    Poly(Vec<f64>),
}

impl SequenceSpec {
    /// `one`, `rot:θ`, or `poly:c0,c1,…`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" {
            return Ok(SequenceSpec::One);
        }
        let bad = || Error::Config(format!("unknown sequence {s:?}; expected one, rot:θ or poly:c0,c1,..."));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match kind {
            "rot" if nums.len() == 1 => Ok(SequenceSpec::Rotation(nums[0])),
            "poly" if !nums.is_empty() => Ok(SequenceSpec::Poly(nums)),
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, n: u64) -> Complex64 {
        match self {
            SequenceSpec::One => Complex64::new(1.0, 0.0),
            SequenceSpec::Rotation(t) => Frac128::from_f64(*t).mul_u128(n as u128).cis(),
            SequenceSpec::Poly(c) => PolyPhase { coeffs: c.clone(), nu: 1, l: 0 }.phase(n).cis(),
        }
    }
}

pub const DEFAULT_PRIME_CAP: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct BszReport {
    pub tau: f64,
    pub m: u64,
    pub n: u64,
    /// e^{1/τ}.
    pub prime_limit: f64,
    pub prime_cap: usize,
    pub primes_tested: usize,
    /// True when the cap cut the prime range short.
    pub truncated: bool,
    pub worst_pair: [u64; 2],
    pub worst_ratio: f64,
    pub hypothesis_holds: bool,
    pub mobius_sum_ratio: f64,
    pub conclusion_bound: f64,
    pub conclusion_holds: bool,
}

fn primes_up_to(limit: u64, cap: usize) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for p in 2..=limit {
        if composite[p] {
            continue;
        }
        out.push(p as u64);
        if out.len() >= cap {
            break;
        }
        let mut k = p * p;
        while k <= limit {
            composite[k] = true;
            k += p;
        }
    }
    out
}

/// Bilinear prime-dilation test for f against the Möbius-weighted sum.
pub fn bsz_test(
    f: &(dyn Fn(u64) -> Complex64 + Sync),
    tau: f64,
    m: u64,
    n: u64,
    table: &MobiusTable,
    prime_cap: usize,
    exec: &Exec,
) -> Result<BszReport> {
    if !(tau > 0.0 && tau < (-1.0f64).exp()) {
        return Err(Error::Domain(format!("τ = {tau} must lie in (0, 1/e)")));
    }
    if m == 0 || n == 0 {
        return Err(Error::Config("M and N must be positive".into()));
    }
    Weight::Mobius(table).check(n)?;
    let prime_limit = (1.0 / tau).exp();
    // the 10^4-th prime is 104729, so sieving further never helps the cap
    let sieve_to = prime_limit.min(2e6).floor() as u64;
    let primes = primes_up_to(sieve_to, prime_cap.max(2));
    if primes.len() < 2 {
        return Err(Error::Domain(format!("fewer than two primes below e^(1/τ) = {prime_limit:.2}")));
    }
    let truncated = primes.len() >= prime_cap && (primes[primes.len() - 1] as f64) < prime_limit && {
        let next = primes_up_to(sieve_to, prime_cap + 1);
        next.len() > primes.len()
    };
    let cells = primes.len() as u64 * m;
    if cells > 50_000_000 {
        return Err(Error::Capacity(format!("{} primes × M = {m} is too many sequence values", primes.len())));
    }
    let rows: Vec<Vec<Complex64>> = exec.map_indexed(primes.len(), |i| (1..=m).map(|k| f(primes[i] * k)).collect())?;
    if rows.iter().flatten().any(|z| z.norm() > 1.0 + 1e-12) {
        return Err(Error::Domain("sequence violates |f| ≤ 1".into()));
    }
    let per_row: Vec<(f64, usize)> = exec.map_indexed(primes.len(), |i| {
        let mut best = (f64::NEG_INFINITY, i);
        for j in i + 1..primes.len() {
            let s: Complex64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b.conj()).sum();
            let r = s.norm() / m as f64;
            if r > best.0 {
                best = (r, j);
            }
        }
        best
    })?;
    let (mut worst_ratio, mut worst_pair) = (f64::NEG_INFINITY, [0, 0]);
    for (i, &(r, j)) in per_row.iter().enumerate() {
        if r > worst_ratio {
            worst_ratio = r;
            worst_pair = [primes[i], primes[j]];
        }
    }
    let slot = ErrSlot::new();
    let total = chunked_sum(*exec, 1, n + 1, DEFAULT_CHUNK, |lo, hi| {
        let mut acc = Complex64::zero();
        for k in lo..hi {
            let mu = table.mu_unchecked(k);
            if mu != 0 {
                let v = f(k);
                if v.norm() > 1.0 + 1e-12 {
                    return slot.take(Err(Error::Domain(format!("|f({k})| > 1"))));
                }
                acc += v * mu as f64;
            }
        }
        acc
    })?;
    let total = slot.finish(total)?;
    let mobius_sum_ratio = total.norm() / n as f64;
    let conclusion_bound = 2.0 * (tau * (1.0 / tau).ln()).sqrt();
    Ok(BszReport {
        tau,
        m,
        n,
        prime_limit,
        prime_cap,
        primes_tested: primes.len(),
        truncated,
        worst_pair,
        worst_ratio,
        hypothesis_holds: worst_ratio <= tau,
        mobius_sum_ratio,
        conclusion_bound,
        conclusion_holds: mobius_sum_ratio <= conclusion_bound,
    })
}

/// Trigonometric polynomial Σ c_k e(kx), keyed by frequency.
pub type TrigPoly = BTreeMap<i64, Complex64>;

pub fn trig_eval(p: &TrigPoly, x: f64) -> Complex64 {
    p.iter().map(|(&k, c)| c * Frac128::from_f64(x).mul_int(k as i128).cis()).sum()
}

/// The long polynomial φ, its cut φ_D, and the cut norm Φ.
#[derive(Clone, Debug)]
pub struct PhiPolys {
    pub d: u32,
    pub d1: u32,
    pub d2: u32,
    pub phi: TrigPoly,
    pub phi_d: TrigPoly,
    /// (Σ_{|m| ≤ D} m⁴|ĥ(m_J m)|²)^{1/2}.
    pub big_phi: f64,
    /// Explicit bound on sup |φ − φ_D|.
    pub tail_bound: f64,
    /// K with tail_bound = K·d₁³e^{−τ D m_J}.
    pub k_const: f64,
}

impl PhiPolys {
    /// ‖φ_D‖₂ over the circle.
    pub fn norm_d(&self) -> f64 {
        self.phi_d.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coefficients c₀…c_{2d₁D} of P(z) = z^{d₁D}φ_D with z = e(x).
    pub fn shifted_poly(&self) -> Vec<Complex64> {
        let shift = self.d1 as i64 * self.d as i64;
        let mut out = vec![Complex64::zero(); (2 * shift + 1) as usize];
        for (&k, &c) in &self.phi_d {
            out[(k + shift) as usize] += c;
        }
        out
    }
}

/// Builds φ and φ_D from the window of f_J. `h_tau` and `c_up` bound the
/// coefficients beyond the stored window.
pub fn phi_polys(f: &ScaleFunction, d: u32, d1: u32, d2: u32, tau: f64, c_up: f64) -> Result<PhiPolys> {
    if !(d1 > d2 && d2 >= 1) {
        return Err(Error::Config(format!("need d₁ > d₂ ≥ 1, got d₁ = {d1}, d2 = {d2}")));
    }
    if d == 0 {
        return Err(Error::Config("cut D must be ≥ 1".into()));
    }
    let (c1, c2) = ((d1 as f64).powi(3), (d2 as f64).powi(3));
    let mut phi = TrigPoly::new();
    let mut phi_d = TrigPoly::new();
    let mut phi_sq = 0.0;
    for &(m, w) in f.window() {
        let m2 = (m * m) as f64;
        let a = w * m2;
        for target in [&mut phi].into_iter().chain((m.unsigned_abs() <= d as u64).then_some(&mut phi_d)) {
            *target.entry(d1 as i64 * m).or_insert(Complex64::zero()) += a * c1;
            *target.entry(d2 as i64 * m).or_insert(Complex64::zero()) -= a * c2;
        }
        if m.unsigned_abs() <= d as u64 {
            phi_sq += m2 * m2 * w.norm_sqr();
        }
    }
    // Σ_{m>D} m² c_up e^{−τ m m_J}, both signs, both dilations
    let mj = f.m_j as f64;
    let mut tail = 0.0;
    let mut m = d as f64 + 1.0;
    loop {
        let t = m * m * (-tau * m * mj).exp();
        tail += t;
        if t < 1e-18 * tail.max(1e-300) || m > d as f64 + 1e6 {
            break;
        }
        m += 1.0;
    }
    let tail_bound = 2.0 * (c1 + c2) * c_up * tail;
    let k_const = if tail_bound > 0.0 { tail_bound / (c1 * (-tau * d as f64 * mj).exp()) } else { 0.0 };
    Ok(PhiPolys { d, d1, d2, phi, phi_d, big_phi: phi_sq.sqrt(), tail_bound, k_const })
}

/// f̃(x) = f_J(d₁x) − f_J(d₂x).
pub fn ftilde(f: &ScaleFunction, d1: u32, d2: u32, x: f64) -> Complex64 {
    f.window()
        .iter()
        .map(|&(m, w)| {
            let num = Frac128::from_f64(d1 as f64 * m as f64 * x).cis() - Frac128::from_f64(d2 as f64 * m as f64 * x).cis();
            w * num / cis_minus_one(m as f64 * f.theta)
        })
        .sum()
}

/// f̃⁽³⁾(x) by term-wise differentiation of the window.
pub fn ftilde_third_derivative(f: &ScaleFunction, d1: u32, d2: u32, x: f64) -> Complex64 {
    let i2pi = Complex64::new(0.0, 2.0 * PI);
    let (c1, c2) = ((d1 as f64).powi(3), (d2 as f64).powi(3));
    let sum: Complex64 = f
        .window()
        .iter()
        .map(|&(m, w)| {
            let mf = m as f64;
            let num = Frac128::from_f64(d1 as f64 * mf * x).cis() * c1 - Frac128::from_f64(d2 as f64 * mf * x).cis() * c2;
            w * mf.powi(3) * num / cis_minus_one(mf * f.theta)
        })
        .sum();
    i2pi * i2pi * i2pi * sum
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub degree: usize,
    pub delta: f64,
    pub norm2: f64,
    pub roots: Vec<[f64; 2]>,
    /// max |P(z_j)| over the computed roots.
    pub max_residual: f64,
    pub samples: usize,
    pub excluded: usize,
    /// min |P(z)| / ((δ/3)ⁿ‖P‖₂) over the kept samples.
    pub min_ratio: f64,
    pub holds: bool,
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// All roots of Σ c_k z^k by Aberth–Ehrlich iteration.
pub fn poly_roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = c[n];
    // Cauchy radius
    let radius = 1.0 + c[..n].iter().map(|a| (a / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius * 0.5 + 0.1, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut worst = f64::INFINITY;
    for _ in 0..2000 {
        worst = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(c, z[i]);
            if p == Complex64::zero() {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * s);
            if step.is_finite() {
                z[i] -= step;
                worst = worst.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if worst < 1e-15 {
            return Ok(z);
        }
    }
    if worst < 1e-10 {
        return Ok(z);
    }
    Err(Error::Numeric(format!("root iteration did not converge: last relative step {worst:e} for degree {n}")))
}

/// Samples the unit circle off the δ-discs around the roots and reports
/// min |P(z)|/((δ/3)ⁿ‖P‖₂).
pub fn poly_lower_bound_check(coeffs: &[Complex64], delta: f64, samples: usize) -> Result<LowerBoundReport> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|a| a.norm() == 0.0) {
        c.pop();
    }
    if c.len() < 2 {
        return Err(Error::Domain("polynomial degree must be ≥ 1".into()));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("δ = {delta} must lie in (0, 1/2)")));
    }
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let n = c.len() - 1;
    let roots = poly_roots(&c)?;
    let norm2 = c.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let scale = (delta / 3.0).powi(n as i32) * norm2;
    let mut min_ratio = f64::INFINITY;
    let mut excluded = 0;
    for k in 0..samples {
        let z = Frac128::from_ratio(&(k as u64).into(), &(samples as u64).into()).cis();
        if roots.iter().any(|r| (z - r).norm() < delta) {
            excluded += 1;
            continue;
        }
        min_ratio = min_ratio.min(horner(&c, z).0.norm() / scale);
    }
    let max_residual = roots.iter().map(|&r| horner(&c, r).0.norm()).fold(0.0, f64::max);
    Ok(LowerBoundReport {
        degree: n,
        delta,
        norm2,
        roots: roots.iter().map(|r| [r.re, r.im]).collect(),
        max_residual,
        samples,
        excluded,
        min_ratio,
        holds: min_ratio >= 1.0,
    })
}

/// A real phase with an explicit third derivative.
pub trait ThirdDerivPhase: Sync {
    fn value(&self, x: f64) -> f64;
    fn third(&self, x: f64) -> f64;
}

/// Σ a_i xⁱ with real coefficients, lowest first.
pub struct RealPoly(pub Vec<f64>);

impl ThirdDerivPhase for RealPoly {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    fn third(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(3)
            .map(|(i, &a)| a * (i * (i - 1) * (i - 2)) as f64 * x.powi(i as i32 - 3))
            .sum()
    }
}

/// E(x) = b₂f̃(xθ). For real h the window is conjugate-symmetric and f̃ is
/// real, so only the real part is kept.
pub struct EPhase<'a> {
    pub f: &'a ScaleFunction,
    pub d1: u32,
    pub d2: u32,
    pub b2: i64,
}

impl ThirdDerivPhase for EPhase<'_> {
    fn value(&self, x: f64) -> f64 {
        self.b2 as f64 * ftilde(self.f, self.d1, self.d2, x * self.f.theta).re
    }

    fn third(&self, x: f64) -> f64 {
        let t = self.f.theta;
        self.b2 as f64 * ftilde_third_derivative(self.f, self.d1, self.d2, x * t).re * t.powi(3)
    }
}

pub const VDC_CONSTANT: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct VdcReport {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub eta: f64,
    pub precondition_ok: bool,
    /// Sample points where Λ ≤ |F⁽³⁾| ≤ ηΛ failed, with |F⁽³⁾| there.
    pub violations: Vec<[f64; 2]>,
    pub actual: f64,
    pub bound: f64,
    pub ratio: f64,
    pub constant: f64,
}

/// Compares |Σ_{a<n<b} e(F(n))| with the third-derivative bound.
pub fn vdc_sum_check(f: &dyn ThirdDerivPhase, lambda: f64, eta: f64, a: f64, b: f64, samples: usize) -> Result<VdcReport> {
    if b - a < 1.0 {
        return Err(Error::Domain(format!("need b − a ≥ 1, got {}", b - a)));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain("Λ must be positive".into()));
    }
    if !(eta >= 1.0) {
        return Err(Error::Domain("η must be ≥ 1".into()));
    }
    let mut violations = Vec::new();
    for k in 0..samples {
        let x = a + (b - a) * (k as f64 + 0.5) / samples as f64;
        let d3 = f.third(x).abs();
        if !(d3 >= lambda && d3 <= eta * lambda) {
            violations.push([x, d3]);
        }
    }
    let lo = a.floor() as i64 + 1;
    let hi = b.ceil() as i64 - 1;
    let mut acc = Complex64::zero();
    for n in lo..=hi {
        acc += Frac128::from_f64(f.value(n as f64)).cis();
    }
    let len = b - a;
    let bound = VDC_CONSTANT * (eta.sqrt() * lambda.powf(1.0 / 6.0) * len + lambda.powf(-1.0 / 6.0) * len.sqrt());
    Ok(VdcReport {
        a,
        b,
        lambda,
        eta,
        precondition_ok: violations.is_empty(),
        violations,
        actual: acc.norm(),
        bound,
        ratio: acc.norm() / bound,
        constant: VDC_CONSTANT,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EWindowReport {
    pub samples: usize,
    pub excluded: usize,
    /// min |E⁽³⁾| / (βθ²Φ_J) over kept samples.
    pub lower_ratio: f64,
    /// max |E⁽³⁾| / (d₁³θ²Φ_J) over all samples.
    pub upper_ratio: f64,
    /// The absolute constant 4π³|b₂| the upper ratio never exceeds.
    pub upper_constant: f64,
    pub holds: bool,
}

/// Samples |E⁽³⁾(x)| = |b₂ f̃⁽³⁾(xθ)θ³| on (0, 1/θ], skipping x with e(xθ)
/// within δ of a zero of z^{d₁D}φ_D, and brackets it by βθ²Φ_J and d₁³θ²Φ_J.
pub fn e_window_check(f: &ScaleFunction, phi: &PhiPolys, b2: i64, beta: f64, phi_j: f64, delta: f64, samples: usize) -> Result<EWindowReport> {
    let roots = poly_roots(&phi.shifted_poly())?;
    let t = f.theta.abs();
    let e = EPhase { f, d1: phi.d1, d2: phi.d2, b2 };
    let base = t * t * phi_j;
    let (mut lower, mut upper, mut excluded) = (f64::INFINITY, 0.0f64, 0usize);
    for k in 1..=samples {
        let x = k as f64 / samples as f64 / t;
        let d3 = e.third(x).abs();
        upper = upper.max(d3 / ((phi.d1 as f64).powi(3) * base));
        let z = Frac128::from_f64(x * f.theta).cis();
        if roots.iter().any(|r| (z - r).norm() < delta) {
            excluded += 1;
            continue;
        }
        lower = lower.min(d3 / (beta * base));
    }
    let upper_constant = 4.0 * PI.powi(3) * b2.unsigned_abs() as f64;
    Ok(EWindowReport {
        samples,
        excluded,
        lower_ratio: lower,
        upper_ratio: upper,
        upper_constant,
        holds: lower >= 1.0 && upper <= upper_constant,
    })
}

/// ln of the right side of d₁³ ≤ (δ/3)^{2d₁D}e^{(τD−τ₂)m_J}/(2Km_J) with
/// δ = 3m_J^{−10}, minus 3 ln d₁, as a function of ln m_J.
pub fn scale_condition_margin(tau: f64, tau2: f64, d1: u32, k_const: f64, ln_m_j: f64) -> f64 {
    let d = (tau2 / tau).floor() + 2.0;
    let growth = if ln_m_j > 700.0 { f64::INFINITY } else { (tau * d - tau2) * ln_m_j.exp() };
    growth - 20.0 * d1 as f64 * d * ln_m_j - (2.0 * k_const.max(1e-300)).ln() - ln_m_j - 3.0 * (d1 as f64).ln()
}

/// m_J beyond which the margin is increasing.
pub fn scale_condition_threshold(tau: f64, tau2: f64, d1: u32) -> f64 {
    let d = (tau2 / tau).floor() + 2.0;
    (20.0 * d1 as f64 * d + 1.0) / (tau * d - tau2)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleConditionReport {
    pub threshold: f64,
    /// (ln m_J, margin) for every scale.
    pub margins: Vec<[f64; 2]>,
    pub monotone_beyond_threshold: bool,
    pub last_positive: bool,
}

/// Evaluates the margin at each ln m_J and checks that it grows past the
/// threshold and is eventually positive.
pub fn scale_condition_growth(tau: f64, tau2: f64, d1: u32, k_const: f64, ln_scales: &[f64]) -> ScaleConditionReport {
    let threshold = scale_condition_threshold(tau, tau2, d1);
    let margins: Vec<[f64; 2]> = ln_scales.iter().map(|&l| [l, scale_condition_margin(tau, tau2, d1, k_const, l)]).collect();
    let beyond: Vec<f64> = margins.iter().filter(|m| m[0] >= threshold.ln()).map(|m| m[1]).collect();
    ScaleConditionReport {
        threshold,
        monotone_beyond_threshold: beyond.windows(2).all(|w| w[1] >= w[0]),
        last_positive: margins.last().is_some_and(|m| m[1] > 0.0),
        margins,
    }
}
