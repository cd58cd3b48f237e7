//! Zero-entropy maps on tori: analytic skew products and affine maps with
//! quasi-unipotent linear part.

use crate::analytic::{birkhoff_direct_at, birkhoff_fourier_at, AnalyticSeries};
use crate::cfrac::Alpha;
use crate::error::{Error, Result};
use crate::phase::Frac128;
use crate::poly::{frac, RatPoly};
use crate::reduce::Exec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A point of T², coordinates kept exactly mod 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusPoint {
    pub x1: Frac128,
    pub x2: Frac128,
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        TorusPoint { x1: Frac128::from_f64(x1), x2: Frac128::from_f64(x2) }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.x1.to_f64(), self.x2.to_f64())
    }

    /// max over coordinates of the circle distance.
    pub fn dist(&self, o: &TorusPoint) -> f64 {
        (self.x1 - o.x1).norm().max((self.x2 - o.x2).norm())
    }
}

/// ψ(x) = e(b₁x₁ + b₂x₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Character {
    pub b1: i64,
    pub b2: i64,
}

impl Character {
    pub fn new(b1: i64, b2: i64) -> Self {
        Character { b1, b2 }
    }

    pub fn phase(&self, p: &TorusPoint) -> Frac128 {
        p.x1.mul_int(self.b1 as i128) + p.x2.mul_int(self.b2 as i128)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BirkhoffMode {
    Direct,
    Fourier,
}

/// T(x₁, x₂) = (a x₁ + α, c x₁ + d x₂ + h(x₁)) with a, d ∈ {±1}.
#[derive(Clone, Debug)]
pub struct SkewFlow {
    pub a: i64,
    pub c: i64,
    pub d: i64,
    pub alpha: Alpha,
    /// Real-valued h, truncated to the frequencies used in evaluation.
    pub h: AnalyticSeries,
}

impl SkewFlow {
    pub fn new(a: i64, c: i64, d: i64, alpha: Alpha, h: AnalyticSeries) -> Result<Self> {
        if !(a == 1 || a == -1) || !(d == 1 || d == -1) {
            return Err(Error::Config(format!("need a, d ∈ {{±1}} for zero entropy, got a = {a}, d = {d}")));
        }
        if !h.is_real() {
            return Err(Error::Config("h must be real-valued: ĥ(−m) = conj ĥ(m)".into()));
        }
        Ok(SkewFlow { a, c, d, alpha, h })
    }

    /// The normalized form (x₁, x₂) ↦ (x₁ + α, c x₁ + x₂ + h(x₁)).
    pub fn normalized(c: i64, alpha: Alpha, h: AnalyticSeries) -> Result<Self> {
        Self::new(1, c, 1, alpha, h)
    }

    pub fn is_normalized(&self) -> bool {
        self.a == 1 && self.d == 1
    }

    fn h_at(&self, x: Frac128) -> Frac128 {
        Frac128::from_f64(self.h.eval_full(x).re)
    }

    /// x₁ after n steps.
    fn base_orbit(&self, x1: Frac128, n: u64) -> Result<Frac128> {
        if self.a == 1 {
            Ok(x1 + self.alpha.phase(n as i128)?)
        } else if n.is_multiple_of(2) {
            Ok(x1)
        } else {
            Ok(-x1 + self.alpha.frac128())
        }
    }

    /// y₂(n) per the closed form; O(1) Fourier evaluations or O(n) direct ones
    /// for the normalized flow, O(n) for the other variants.
    fn fibre_closed(&self, p: &TorusPoint, n: u64, mode: BirkhoffMode) -> Result<Frac128> {
        if self.is_normalized() {
            let c = self.c as i128;
            let n128 = n as i128;
            let tri = n128 * (n128 - 1) / 2;
            let quad = match c.checked_mul(tri) {
                Some(ct) => self.alpha.phase(ct)?,
                None => self.alpha.phase_big(&(BigInt::from(c) * BigInt::from(tri)))?,
            };
            let lin = p.x1.mul_int(c * n128);
            let birk = match mode {
                BirkhoffMode::Direct => birkhoff_direct_at(&self.h, p.x1, &self.alpha, n, &Exec::Sequential)?.re,
                BirkhoffMode::Fourier => birkhoff_fourier_at(&self.h, p.x1, &self.alpha, n, self.h.max_frequency().max(1))?.re,
            };
            return Ok(quad + lin + p.x2 + Frac128::from_f64(birk));
        }
        // y₂(n) = dⁿx₂ + Σ_{j<n} d^{n−1−j}(c y₁(j) + h(y₁(j)))
        let sign = |k: u64| if self.d == -1 && k % 2 == 1 { -1i128 } else { 1 };
        let mut lin = p.x2.mul_int(sign(n));
        let mut hsum = 0.0f64;
        let mut y1 = p.x1;
        for j in 0..n {
            let s = sign(n - 1 - j);
            lin += y1.mul_int(self.c as i128 * s);
            hsum += s as f64 * self.h.eval_full(y1).re;
            y1 = y1.mul_int(self.a as i128) + self.alpha.frac128();
        }
        Ok(lin + Frac128::from_f64(hsum))
    }
}

/// One application of T.
pub fn skew_step(flow: &SkewFlow, p: &TorusPoint) -> TorusPoint {
    let x1 = p.x1.mul_int(flow.a as i128) + flow.alpha.frac128();
    let x2 = p.x1.mul_int(flow.c as i128) + p.x2.mul_int(flow.d as i128) + flow.h_at(p.x1);
    TorusPoint { x1, x2 }
}

/// Tⁿ(p) from the closed-form orbit.
pub fn skew_orbit_closed(flow: &SkewFlow, p: &TorusPoint, n: u64, mode: BirkhoffMode) -> Result<TorusPoint> {
    Ok(TorusPoint { x1: flow.base_orbit(p.x1, n)?, x2: flow.fibre_closed(p, n, mode)? })
}

/// ⟨b, Tⁿ(p)⟩ mod 1. With b₂ = 0 no value of h is computed.
pub fn character_phase(flow: &SkewFlow, p: &TorusPoint, b: Character, n: u64) -> Result<Frac128> {
    let y1 = flow.base_orbit(p.x1, n)?;
    if b.b2 == 0 {
        return Ok(y1.mul_int(b.b1 as i128));
    }
    let y2 = flow.fibre_closed(p, n, BirkhoffMode::Fourier)?;
    Ok(b.phase(&TorusPoint { x1: y1, x2: y2 }))
}

/// P(n) = b₁(x₁ + nα) + b₂(c·n(n−1)/2·α + c n x₁ + x₂) mod 1.
pub fn polynomial_part(flow: &SkewFlow, p: &TorusPoint, b: Character, n: u64) -> Result<Frac128> {
    if !flow.is_normalized() {
        return Err(Error::Domain("P(n) is defined for the normalized flow a = d = 1".into()));
    }
    let n128 = n as i128;
    let y1 = p.x1 + flow.alpha.phase(n128)?;
    let tri = BigInt::from(flow.c) * BigInt::from(n128 * (n128 - 1) / 2);
    let y2 = flow.alpha.phase_big(&tri)? + p.x1.mul_int(flow.c as i128 * n128) + p.x2;
    Ok(y1.mul_int(b.b1 as i128) + y2.mul_int(b.b2 as i128))
}

/// A finite cyclic factor: the last `count` coordinates live in (1/M)ℤ/ℤ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicFactor {
    pub modulus: u64,
    pub count: usize,
}

/// x ↦ A x + b on T^t × (ℤ/M)^r with quasi-unipotent A.
#[derive(Clone, Debug)]
pub struct UnipotentAffine {
    pub matrix: Vec<Vec<i64>>,
    pub translation: Vec<BigRational>,
    pub cyclic: Option<CyclicFactor>,
    /// Period ν: the torus block satisfies A^ν = I + N with N nilpotent and
    /// the cyclic block has order dividing ν.
    pub nu: u64,
    /// Nilpotency order k of the augmented map (phase degree ≤ k).
    pub k: usize,
}

type IMat = Vec<Vec<BigInt>>;

fn imat(m: &[Vec<i64>]) -> IMat {
    m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let n = a.len();
    let p = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| (0..p).map(|j| (0..k).map(|t| &a[i][t] * &b[t][j]).sum()).collect())
        .collect()
}

fn identity(n: usize) -> IMat {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

fn mat_sub_identity(a: &IMat) -> IMat {
    let mut m = a.clone();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= 1;
    }
    m
}

fn is_zero_mat(a: &IMat) -> bool {
    a.iter().all(|r| r.iter().all(|x| x.is_zero()))
}

fn mat_pow(a: &IMat, mut e: u64) -> IMat {
    let mut base = a.clone();
    let mut acc = identity(a.len());
    while e > 0 {
        if e & 1 == 1 {
            acc = mat_mul(&acc, &base);
        }
        base = mat_mul(&base, &base);
        e >>= 1;
    }
    acc
}

/// Nilpotency index: smallest s with N^s = 0 (None if not nilpotent).
fn nilpotency(n: &IMat) -> Option<usize> {
    let d = n.len();
    let mut p = identity(d);
    for s in 0..=d {
        if is_zero_mat(&p) {
            return Some(s);
        }
        p = mat_mul(&p, n);
    }
    None
}

fn det(m: &IMat) -> BigInt {
    // Bareiss fraction-free elimination
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(sw) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, sw);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

const MAX_NU: u64 = 5040;

impl UnipotentAffine {
    pub fn new(matrix: Vec<Vec<i64>>, translation: Vec<BigRational>, cyclic: Option<CyclicFactor>) -> Result<Self> {
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|r| r.len() != d) {
            return Err(Error::Config("matrix must be square and nonempty".into()));
        }
        if translation.len() != d {
            return Err(Error::Config(format!("translation has {} entries, matrix is {d}×{d}", translation.len())));
        }
        let r = cyclic.as_ref().map_or(0, |c| c.count);
        if r > d {
            return Err(Error::Config("cyclic factor larger than the dimension".into()));
        }
        let t = d - r;
        let full = imat(&matrix);
        let torus: IMat = full[..t].iter().map(|row| row[..t].to_vec()).collect();
        let dt = det(&torus);
        if t > 0 && dt.abs() != BigInt::one() {
            return Err(Error::Config(format!("torus block has det {dt}, need ±1")));
        }
        let mut cyc_order = 1u64;
        if let Some(cf) = &cyclic {
            if cf.modulus < 2 {
                return Err(Error::Config("cyclic modulus must be ≥ 2".into()));
            }
            let m = BigInt::from(cf.modulus);
            for row in &matrix[t..] {
                if row[..t].iter().any(|&x| x != 0) {
                    return Err(Error::Config("cyclic rows must vanish on torus columns".into()));
                }
            }
            for b in &translation[t..] {
                if !(b * BigRational::from(m.clone())).is_integer() {
                    return Err(Error::Config("cyclic translation must lie in (1/M)ℤ".into()));
                }
            }
            let block: IMat = full[t..].iter().map(|row| row[t..].to_vec()).collect();
            if !det(&block).gcd(&m).is_one() {
                return Err(Error::Config("cyclic block is not invertible mod M".into()));
            }
            let bvec: Vec<BigInt> = translation[t..].iter().map(|b| (b * BigRational::from(m.clone())).to_integer()).collect();
            cyc_order = affine_order_mod(&block, &bvec, &m)?;
        }
        let nu_t = if t == 0 {
            1
        } else {
            (1..=MAX_NU)
                .find(|&nu| nilpotency(&mat_sub_identity(&mat_pow(&torus, nu))).is_some())
                .ok_or_else(|| Error::Domain("torus block is not quasi-unipotent (positive entropy)".into()))?
        };
        let nu = nu_t.lcm(&cyc_order);
            // augmented Ñ = [[L − I, I], [0, 0]] has Ñ^{s+1} = 0 iff (L − I)^s = 0
        let nil_t = if t == 0 { 0 } else { nilpotency(&mat_sub_identity(&mat_pow(&torus, nu))).unwrap_or(t) };
        Ok(UnipotentAffine { matrix, translation, cyclic, nu, k: nil_t })
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    fn torus_dim(&self) -> usize {
        self.dim() - self.cyclic.as_ref().map_or(0, |c| c.count)
    }

    /// One step, reduced mod 1.
    pub fn step(&self, x: &[BigRational]) -> Vec<BigRational> {
        self.matrix
            .iter()
            .zip(&self.translation)
            .map(|(row, b)| {
                let s: BigRational = row.iter().zip(x).map(|(&a, xi)| BigRational::from(BigInt::from(a)) * xi).sum();
                frac(&(s + b))
            })
            .collect()
    }

    fn check_point(&self, x: &[BigRational]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!("point has {} coordinates, need {}", x.len(), self.dim())));
        }
        if let Some(cf) = &self.cyclic {
            let m = BigRational::from(BigInt::from(cf.modulus));
            if x[self.torus_dim()..].iter().any(|xi| !(xi * &m).is_integer()) {
                return Err(Error::Config("cyclic coordinates must lie in (1/M)ℤ".into()));
            }
        }
        Ok(())
    }
}

/// Order of y ↦ C y + b on (ℤ/M)^r.
fn affine_order_mod(c: &IMat, b: &[BigInt], m: &BigInt) -> Result<u64> {
    let r = c.len();
    let modm = |x: &BigInt| x.mod_floor(m);
    let (mut pc, mut pb) = (c.iter().map(|row| row.iter().map(modm).collect::<Vec<_>>()).collect::<IMat>(), b.iter().map(modm).collect::<Vec<_>>());
    let id = identity(r);
    for k in 1..=1_000_000u64 {
        if pc == id && pb.iter().all(|x| x.is_zero()) {
            return Ok(k);
        }
        // compose with one more step: y ↦ C(pc y + pb) + b
        pb = (0..r).map(|i| modm(&((0..r).map(|j| &c[i][j] * &pb[j]).sum::<BigInt>() + &b[i]))).collect();
        pc = mat_mul(c, &pc).iter().map(|row| row.iter().map(modm).collect()).collect();
    }
    Err(Error::Capacity("cyclic factor order exceeds 10^6".into()))
}

/// φ with ψ(Tⁿx) = e(φ(n)) for n ≡ l (mod ν), n ≥ l, exactly.
pub fn unipotent_phase_poly(aff: &UnipotentAffine, x: &[BigRational], v: &[i64], l: u64) -> Result<RatPoly> {
    aff.check_point(x)?;
    if v.len() != aff.dim() {
        return Err(Error::Config("character length differs from dimension".into()));
    }
    if l >= aff.nu {
        return Err(Error::Config(format!("residue l = {l} must be < ν = {}", aff.nu)));
    }
    let t = aff.torus_dim();
    let mut state: Vec<BigRational> = x.iter().map(frac).collect();
    for _ in 0..l {
        state = aff.step(&state);
    }
    // translation of the ν-step composite on the torus block, cyclic part fixed
    let mut zero_t = vec![BigRational::zero(); t];
    zero_t.extend_from_slice(&state[t..]);
    let mut comp = zero_t;
    for _ in 0..aff.nu {
        comp = aff.step(&comp);
    }
    let c_l: Vec<BigRational> = comp[..t].to_vec();
    let torus: IMat = imat(&aff.matrix)[..t].iter().map(|row| row[..t].to_vec()).collect();
    let nmat = mat_sub_identity(&mat_pow(&torus, aff.nu));
    let apply = |m: &IMat, y: &[BigRational]| -> Vec<BigRational> {
        m.iter()
            .map(|row| row.iter().zip(y).map(|(a, yi)| BigRational::from(a.clone()) * yi).sum())
            .collect()
    };
    let dot = |y: &[BigRational]| -> BigRational {
        v[..t].iter().zip(y).map(|(&a, yi)| BigRational::from(BigInt::from(a)) * yi).sum()
    };
    // ξ_0 = x_l, ξ_s = N^{s−1}(N x_l + c_l) for s ≥ 1 (top block of Ñ^s applied to (x_l, c_l))
    let x_l = state[..t].to_vec();
    let mut u: Vec<BigRational> = apply(&nmat, &x_l).into_iter().zip(&c_l).map(|(a, b)| a + b).collect();
    let mut coeffs_q: Vec<BigRational> = vec![dot(&x_l)];
    for _ in 0..=t {
        coeffs_q.push(dot(&u));
        u = apply(&nmat, &u);
    }
    let cyc_const: BigRational = v[t..].iter().zip(&state[t..]).map(|(&a, yi)| BigRational::from(BigInt::from(a)) * yi).sum();
    // Σ_s C(q, s)·⟨v, ξ_s⟩ with q = (n − l)/ν
    let mut phi_q = RatPoly::constant(cyc_const);
    for (s, c) in coeffs_q.iter().enumerate() {
        if !c.is_zero() {
            phi_q = phi_q.add(&RatPoly::binomial(s).scale(c));
        }
    }
    let nu = BigRational::from(BigInt::from(aff.nu));
    let q_of_n = RatPoly::linear(-BigRational::from(BigInt::from(l)) / &nu, BigRational::one() / &nu);
    Ok(phi_q.compose(&q_of_n))
}

/// Phase polynomials for every residue class l = 0, …, ν − 1.
pub fn unipotent_phase_polys(aff: &UnipotentAffine, x: &[BigRational], v: &[i64]) -> Result<Vec<RatPoly>> {
    (0..aff.nu).map(|l| unipotent_phase_poly(aff, x, v, l)).collect()
}

/// ⟨v, Tⁿx⟩ by iteration, exactly.
pub fn unipotent_iterate_phase(aff: &UnipotentAffine, x: &[BigRational], v: &[i64], n: u64) -> BigRational {
    let mut s: Vec<BigRational> = x.iter().map(frac).collect();
    for _ in 0..n {
        s = aff.step(&s);
    }
    frac(&v.iter().zip(&s).map(|(&a, y)| BigRational::from(BigInt::from(a)) * y).sum::<BigRational>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfrac::AlphaSpec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn random_h(rng: &mut ChaCha8Rng, tau: f64) -> AnalyticSeries {
        let mut e = Vec::new();
        for m in 1..=6i64 {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-tau * m as f64).exp();
            e.push((m, c));
            e.push((-m, c.conj()));
        }
        e.push((0, Complex64::new(rng.gen_range(-0.5..0.5), 0.0)));
        AnalyticSeries::from_coeffs(e, tau, None).unwrap()
    }

    fn sqrt2() -> Alpha {
        Alpha::new(&AlphaSpec::sqrt2_minus_1()).unwrap()
    }

    #[test]
    fn degenerate_and_base_cases() {
        let flow = SkewFlow::normalized(0, sqrt2(), AnalyticSeries::zero(1.0)).unwrap();
        let p = TorusPoint::new(0.3, 0.6);
        let s = skew_step(&flow, &p);
        assert_eq!(s.x2, p.x2);
        assert_eq!(s.x1, p.x1 + flow.alpha.frac128());

        let quarter = Alpha::new(&AlphaSpec::rational(1, 4)).unwrap();
        let f = SkewFlow::normalized(1, quarter, AnalyticSeries::zero(1.0)).unwrap();
        let s = skew_step(&f, &TorusPoint::new(0.0, 0.0));
        assert_eq!(s.to_f64(), (0.25, 0.0));
    }

    #[test]
    fn closed_form_matches_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = random_h(&mut rng, 1.5);
            let flow = SkewFlow::normalized(rng.gen_range(-5..=5), sqrt2(), h).unwrap();
            let p = TorusPoint::new(rng.gen(), rng.gen());
            assert_eq!(skew_orbit_closed(&flow, &p, 0, BirkhoffMode::Direct).unwrap(), p);
            let mut it = p;
            for n in 1..=2000u64 {
                it = skew_step(&flow, &it);
                if [1, 10, 1000, 2000].contains(&n) {
                    for mode in [BirkhoffMode::Direct, BirkhoffMode::Fourier] {
                        let cl = skew_orbit_closed(&flow, &p, n, mode).unwrap();
                        assert!(cl.dist(&it) < 1e-9, "n = {n}: {:?} vs {:?}", cl.to_f64(), it.to_f64());
                    }
                }
            }
        }
    }

    #[test]
    fn non_normalized_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (a, d) in [(-1, 1), (1, -1), (-1, -1)] {
            let flow = SkewFlow::new(a, 2, d, sqrt2(), random_h(&mut rng, 2.0)).unwrap();
            let p = TorusPoint::new(0.1, 0.7);
            let mut it = p;
            for n in 1..=300u64 {
                it = skew_step(&flow, &it);
                let cl = skew_orbit_closed(&flow, &p, n, BirkhoffMode::Direct).unwrap();
                assert!(cl.dist(&it) < 1e-9);
            }
        }
        assert!(SkewFlow::new(2, 0, 1, sqrt2(), AnalyticSeries::zero(1.0)).is_err());
    }

    #[test]
    fn character_phase_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let flow = SkewFlow::normalized(3, sqrt2(), random_h(&mut rng, 1.0)).unwrap();
        let p = TorusPoint::new(0.25, 0.5);
        assert_eq!(character_phase(&flow, &p, Character::new(0, 0), 17).unwrap(), Frac128::ZERO);
        let ph = character_phase(&flow, &p, Character::new(1, 0), 17).unwrap();
        assert_eq!(ph, p.x1 + flow.alpha.phase(17).unwrap());
        for n in [1u64, 50, 999] {
            let b = Character::new(rng.gen_range(-4..5), rng.gen_range(-4..5));
            let orbit = skew_orbit_closed(&flow, &p, n, BirkhoffMode::Direct).unwrap();
            assert!((character_phase(&flow, &p, b, n).unwrap() - b.phase(&orbit)).norm() < 1e-9);
        }
    }

    #[test]
    fn distality_fibre_difference_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let flow = SkewFlow::normalized(2, sqrt2(), random_h(&mut rng, 1.0)).unwrap();
        let p = TorusPoint::new(0.3, 0.1);
        let p2 = TorusPoint { x1: p.x1, x2: p.x2 + Frac128::from_f64(0.25) };
        let (mut a, mut b) = (p, p2);
        for _ in 0..500 {
            a = skew_step(&flow, &a);
            b = skew_step(&flow, &b);
            assert_eq!(b.x2 - a.x2, Frac128::from_f64(0.25));
        }
    }

    #[test]
    fn identity_map_phase_is_constant() {
        let aff = UnipotentAffine::new(vec![vec![1, 0], vec![0, 1]], vec![q(0, 1), q(0, 1)], None).unwrap();
        assert_eq!((aff.nu, aff.k), (1, 1));
        let x = vec![q(1, 3), q(2, 7)];
        let p = unipotent_phase_poly(&aff, &x, &[2, 1], 0).unwrap();
        assert_eq!(p, RatPoly::constant(q(2, 3) + q(2, 7)));
    }

    #[test]
    fn shear_is_linear() {
        let aff = UnipotentAffine::new(vec![vec![1, 0], vec![1, 1]], vec![q(0, 1), q(0, 1)], None).unwrap();
        let x = vec![q(3, 11), q(5, 13)];
        let p = unipotent_phase_poly(&aff, &x, &[0, 1], 0).unwrap();
        assert_eq!(p, RatPoly::linear(q(5, 13), q(3, 11)));
    }

    #[test]
    fn rotation_of_order_four_with_translation() {
        // A = [[0,-1],[1,0]] has order 4
        let aff = UnipotentAffine::new(vec![vec![0, -1], vec![1, 0]], vec![q(1, 5), q(1, 3)], None).unwrap();
        assert_eq!(aff.nu, 4);
        let x = vec![q(1, 7), q(2, 9)];
        for l in 0..4 {
            let p = unipotent_phase_poly(&aff, &x, &[1, 2], l).unwrap();
            for n in (l..200).step_by(4) {
                assert_eq!(frac(&p.eval_int(n as i64)), unipotent_iterate_phase(&aff, &x, &[1, 2], n));
            }
        }
    }

    #[test]
    fn random_unipotent_3x3_matches_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let (a, b, c) = (rng.gen_range(-3..4), rng.gen_range(-3..4), rng.gen_range(-3..4));
            let m = vec![vec![1, 0, 0], vec![a, 1, 0], vec![b, c, 1]];
            let tr: Vec<BigRational> = (0..3).map(|_| q(rng.gen_range(0..97), 97)).collect();
            let aff = UnipotentAffine::new(m, tr, None).unwrap();
            let x: Vec<BigRational> = (0..3).map(|_| q(rng.gen_range(0..1000), 1009)).collect();
            let v = [rng.gen_range(-3..4), rng.gen_range(-3..4), 1];
            let p = unipotent_phase_poly(&aff, &x, &v, 0).unwrap();
            assert!(p.degree() <= aff.k);
            let mut s = x.clone();
            for n in 0..=1000u64 {
                let direct = frac(&v.iter().zip(&s).map(|(&vi, si)| BigRational::from(BigInt::from(vi)) * si).sum::<BigRational>());
                assert_eq!(frac(&p.eval_int(n as i64)), direct, "n = {n}");
                s = aff.step(&s);
            }
        }
    }

    #[test]
    fn cyclic_factor() {
        // torus coordinate driven by a Z/3 rotation: x₁ ↦ x₁ + x₂ + 1/10, x₂ ↦ x₂ + 1/3
        let aff = UnipotentAffine::new(
            vec![vec![1, 1], vec![0, 1]],
            vec![q(1, 10), q(1, 3)],
            Some(CyclicFactor { modulus: 3, count: 1 }),
        )
        .unwrap();
        assert_eq!(aff.nu, 3);
        let x = vec![q(2, 7), q(2, 3)];
        for l in 0..3 {
            let p = unipotent_phase_poly(&aff, &x, &[1, 1], l).unwrap();
            for n in (l..120).step_by(3) {
                assert_eq!(frac(&p.eval_int(n as i64)), unipotent_iterate_phase(&aff, &x, &[1, 1], n));
            }
        }
        assert!(UnipotentAffine::new(vec![vec![1, 0], vec![1, 1]], vec![q(0, 1), q(0, 1)], Some(CyclicFactor { modulus: 3, count: 1 })).is_err());
    }

    #[test]
    fn rejects_positive_entropy() {
        let r = UnipotentAffine::new(vec![vec![2, 1], vec![1, 1]], vec![q(0, 1), q(0, 1)], None);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
