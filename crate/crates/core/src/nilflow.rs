//! Affine maps of the Heisenberg nilmanifold G/Γ.
//!
//! Elements are stored in second-kind coordinates (v₁, v₂, v₃), meaning
//! g = exp(v₁X₁)exp(v₂X₂)exp(v₃X₃) with [X₁, X₂] = X₃. Γ is the set of
//! integer triples. All orbit arithmetic is exact over the rationals.

use crate::correlate::{correlation_series, ChunkSummer, CorrelationSeries, Observable, Weight};
use crate::error::{Error, Result};
use crate::mobius::MobiusTable;
use crate::phase::Frac128;
use crate::poly::{ratio_frac, PhaseEvaluator, RatPoly};
use crate::reduce::Exec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use num_complex::Complex64;
use serde_json::json;

pub type Coords = [BigRational; 3];

fn q(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HeisenbergElement {
    pub v: Coords,
}

impl HeisenbergElement {
    pub fn new(v: Coords) -> Self {
        HeisenbergElement { v }
    }

    pub fn identity() -> Self {
        Self::new([BigRational::zero(), BigRational::zero(), BigRational::zero()])
    }

    pub fn from_ints(a: i64, b: i64, c: i64) -> Self {
        Self::new([q(a), q(b), q(c)])
    }

    /// exp(t·X_j), j ∈ {1, 2, 3}.
    pub fn generator(j: usize, t: BigRational) -> Self {
        let mut v = Self::identity().v;
        v[j - 1] = t;
        Self::new(v)
    }

    pub fn is_identity(&self) -> bool {
        self.v.iter().all(|c| c.is_zero())
    }

    pub fn to_f64(&self) -> [f64; 3] {
        self.v.clone().map(|c| crate::bignum::rational_to_f64(&c))
    }
}

/// Product in second-kind coordinates: (a + a', b + b', c + c' − a'b).
pub fn heis_mul(x: &HeisenbergElement, y: &HeisenbergElement) -> HeisenbergElement {
    let [a, b, c] = &x.v;
    let [a2, b2, c2] = &y.v;
    HeisenbergElement::new([a + a2, b + b2, c + c2 - a2 * b])
}

pub fn heis_inv(x: &HeisenbergElement) -> HeisenbergElement {
    let [a, b, c] = &x.v;
    HeisenbergElement::new([-a, -b, -(a * b) - c])
}

/// Second kind to first kind: exp(uX₁ + vX₂ + wX₃) with w = v₃ + v₁v₂/2.
pub fn coord_first_from_second(v: &Coords) -> Coords {
    [v[0].clone(), v[1].clone(), &v[2] + &v[0] * &v[1] * half()]
}

pub fn coord_second_from_first(u: &Coords) -> Coords {
    [u[0].clone(), u[1].clone(), &u[2] - &u[0] * &u[1] * half()]
}

/// Representative x·γ with all coordinates in [0, 1), reducing v₁, then v₂,
/// then the central coordinate. Returns the representative and γ ∈ Γ.
pub fn reduce_mod_gamma(x: &HeisenbergElement) -> (HeisenbergElement, [BigInt; 3]) {
    let [v1, v2, v3] = &x.v;
    let a = -v1.floor().to_integer();
    let b = -v2.floor().to_integer();
    // x·(a, b, c) = (v₁ + a, v₂ + b, v₃ + c − a·v₂)
    let w3 = v3 - BigRational::from(a.clone()) * v2;
    let c = -w3.floor().to_integer();
    let gamma = [a.clone(), b.clone(), c.clone()];
    let out = HeisenbergElement::new([
        v1 + BigRational::from(a),
        v2 + BigRational::from(b),
        w3 + BigRational::from(c),
    ]);
    (out, gamma)
}

pub fn is_reduced(x: &HeisenbergElement) -> bool {
    x.v.iter().all(|c| !c.is_negative() && *c < BigRational::one())
}

type Mat3 = [[BigRational; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| &a[i][k] * &b[k][j]).sum()))
}

fn mat_vec(a: &Mat3, x: &Coords) -> Coords {
    std::array::from_fn(|i| (0..3).map(|k| &a[i][k] * &x[k]).sum())
}

fn mat_id() -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { BigRational::one() } else { BigRational::zero() }))
}

fn mat_pow(a: &Mat3, k: u32) -> Mat3 {
    (0..k).fold(mat_id(), |acc, _| mat_mul(&acc, a))
}

pub const MAX_NU: u32 = 12;

/// T(xΓ) = g·σ(x)Γ with σ(exp X) = exp(dσ X).
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergAffine {
    pub g: HeisenbergElement,
    /// dσ in the basis X₁, X₂, X₃ acting on first-kind coordinates.
    pub dsigma: Mat3,
    /// Smallest ν with dσ^ν unipotent.
    pub nu: u32,
}

impl HeisenbergAffine {
    /// `dsigma` = [[a₁₁, a₁₂, 0], [a₂₁, a₂₂, 0], [c₁, c₂, det A]] with A
    /// integral of determinant ±1 and c_j − a₁ⱼa₂ⱼ/2 ∈ ℤ, which is what
    /// σ(Γ) = Γ requires.
    pub fn new(g: HeisenbergElement, dsigma: Mat3) -> Result<Self> {
        let is_int = |x: &BigRational| x.is_integer();
        for i in 0..2 {
            for j in 0..2 {
                if !is_int(&dsigma[i][j]) {
                    return Err(Error::Config("the X₁, X₂ block of dσ must be integral".into()));
                }
            }
            if !dsigma[i][2].is_zero() {
                return Err(Error::Config("dσ must map X₃ into the centre".into()));
            }
        }
        let a = |i: usize, j: usize| dsigma[i][j].to_integer().to_i64().unwrap_or(i64::MAX);
        let det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        if det.abs() != 1 {
            return Err(Error::Config(format!("det of the X₁, X₂ block is {det}, need ±1")));
        }
        if dsigma[2][2] != q(det) {
            return Err(Error::Config(format!("dσ(X₃) must be det·X₃ = {det}·X₃ to preserve the bracket")));
        }
        for j in 0..2 {
            let shift = &dsigma[2][j] - q(a(0, j)) * q(a(1, j)) * half();
            if !is_int(&shift) {
                return Err(Error::Config(format!("σ(exp X_{}) is not in Γ: c_{} − a₁a₂/2 must be an integer", j + 1, j + 1)));
            }
        }
        let tr = a(0, 0) + a(1, 1);
        let quasi_unipotent = (det == 1 && tr.abs() <= 2) || (det == -1 && tr == 0);
        if !quasi_unipotent {
            return Err(Error::Domain(format!(
                "dσ is not quasi-unipotent (trace {tr}, det {det}): positive entropy"
            )));
        }
        let mut nu = 0;
        for k in 1..=MAX_NU {
            let n = mat_sub_id(&mat_pow(&dsigma, k));
            if mat_mul(&mat_mul(&n, &n), &n).iter().flatten().all(|c| c.is_zero()) {
                nu = k;
                break;
            }
        }
        if nu == 0 {
            return Err(Error::Domain(format!("no power dσ^ν with ν ≤ {MAX_NU} is unipotent")));
        }
        Ok(HeisenbergAffine { g, dsigma, nu })
    }

    /// Integer-matrix convenience constructor.
    pub fn from_ints(g: HeisenbergElement, m: [[i64; 3]; 3]) -> Result<Self> {
        Self::new(g, m.map(|row| row.map(q)))
    }

    /// σ(x), unreduced.
    pub fn sigma(&self, x: &HeisenbergElement) -> HeisenbergElement {
        HeisenbergElement::new(coord_second_from_first(&mat_vec(&self.dsigma, &coord_first_from_second(&x.v))))
    }

    /// g·σ(x), unreduced.
    pub fn apply(&self, x: &HeisenbergElement) -> HeisenbergElement {
        heis_mul(&self.g, &self.sigma(x))
    }
}

fn mat_sub_id(a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { &a[i][j] - BigRational::one() } else { a[i][j].clone() }))
}

/// T(xΓ), reduced to the fundamental domain.
pub fn nil_step(t: &HeisenbergAffine, x: &HeisenbergElement) -> HeisenbergElement {
    reduce_mod_gamma(&t.apply(x)).0
}

/// Tⁿ(xΓ) by iteration.
pub fn nil_iterate(t: &HeisenbergAffine, x: &HeisenbergElement, n: u64) -> HeisenbergElement {
    let mut y = reduce_mod_gamma(x).0;
    for _ in 0..n {
        y = nil_step(t, &y);
    }
    y
}

/// One factor b^{h(n)} with b = exp(coeff·X_generator) and h(n) = n^power.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyFactor {
    pub generator: usize,
    pub coeff: BigRational,
    pub power: usize,
}

/// Tⁿ(xΓ) = b₁^{h₁(n)}⋯b_k^{h_k(n)}Γ for n ≡ l (mod ν).
#[derive(Clone, Debug, PartialEq)]
pub struct PolyOrbitRep {
    pub nu: u32,
    pub l: u32,
    pub factors: Vec<PolyFactor>,
    /// Second-kind coordinates of the unreduced product as polynomials in n.
    pub z: [RatPoly; 3],
}

impl PolyOrbitRep {
    pub fn degree(&self) -> usize {
        self.z.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// The product of the factors at n, reduced.
    pub fn eval(&self, n: u64) -> Result<HeisenbergElement> {
        if n % self.nu as u64 != self.l as u64 {
            return Err(Error::Config(format!("n = {n} is not ≡ {} (mod {})", self.l, self.nu)));
        }
        let nb = BigInt::from(n);
        let mut acc = HeisenbergElement::identity();
        for f in &self.factors {
            let h = num_traits::pow(nb.clone(), f.power);
            acc = heis_mul(&acc, &HeisenbergElement::generator(f.generator, &f.coeff * BigRational::from(h)));
        }
        Ok(reduce_mod_gamma(&acc).0)
    }
}

/// Polynomial orbit representation on the residue class n ≡ l (mod ν).
pub fn compile_poly_orbit(t: &HeisenbergAffine, x: &HeisenbergElement, l: u32) -> Result<PolyOrbitRep> {
    if l >= t.nu {
        return Err(Error::Config(format!("residue l = {l} must be < ν = {}", t.nu)));
    }
    let mut w0 = x.clone();
    for _ in 0..l {
        w0 = t.apply(&w0);
    }
    let mut big_g = HeisenbergElement::identity();
    for _ in 0..t.nu {
        big_g = t.apply(&big_g);
    }
    // In first-kind coordinates Tᵛ(y) = G ∗ Uᵛy = Ly + G with L = (I + ½ad_G)Uᵛ.
    let gf = coord_first_from_second(&big_g.v);
    let u_nu = mat_pow(&t.dsigma, t.nu);
    let mut ad: Mat3 = std::array::from_fn(|_| std::array::from_fn(|_| BigRational::zero()));
    ad[2][0] = -&gf[1] * half();
    ad[2][1] = &gf[0] * half();
    let l_mat = {
        let corr = mat_mul(&ad, &u_nu);
        let mut m = u_nu.clone();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += &corr[i][j];
            }
        }
        mat_sub_id(&m)
    };
    // ξ_{s+1} = Ñξ_s on (y, 1) with Ñ = [[L − I, G], [0, 0]]
    let mut xi: Coords = coord_first_from_second(&w0.v);
    let mut first_poly: [RatPoly; 3] = [RatPoly::zero(), RatPoly::zero(), RatPoly::zero()];
    let mut s = 0usize;
    let mut tail = BigRational::one();
    loop {
        if s > 4 {
            return Err(Error::Domain("ν-step map is not unipotent".into()));
        }
        let b = RatPoly::binomial(s);
        for i in 0..3 {
            first_poly[i] = first_poly[i].add(&b.scale(&xi[i]));
        }
        let lx = mat_vec(&l_mat, &xi);
        let next: Coords = std::array::from_fn(|i| &lx[i] + &gf[i] * &tail);
        tail = BigRational::zero();
        s += 1;
        if next.iter().all(|c| c.is_zero()) {
            break;
        }
        xi = next;
    }
    let [u1, u2, u3] = first_poly;
    let z3 = u3.sub(&u1.mul(&u2).scale(&half()));
    let nu = q(t.nu as i64);
    let q_of_n = RatPoly::linear(-q(l as i64) / &nu, BigRational::one() / &nu);
    let z = [u1.compose(&q_of_n), u2.compose(&q_of_n), z3.compose(&q_of_n)];
    let mut factors = Vec::new();
    for (j, p) in z.iter().enumerate() {
        for (power, c) in p.coeffs().iter().enumerate() {
            if !c.is_zero() {
                factors.push(PolyFactor { generator: j + 1, coeff: c.clone(), power });
            }
        }
    }
    Ok(PolyOrbitRep { nu: t.nu, l, factors, z })
}

/// A finite sum of nilmanifold characters: e(p·v₁ + q·v₂), plus e(r·v₃) on
/// the fundamental-domain representative when `central` is set. With both
/// terms present the average is taken so that |f| ≤ 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NilCharacter {
    pub horizontal: [i64; 2],
    pub central: Option<i64>,
}

/// p(n) = N(n)/D with integer N.
#[derive(Clone, Debug)]
struct IntPoly {
    nums: Vec<BigInt>,
    den: BigInt,
    small: Option<(Vec<i128>, i128)>,
}

impl IntPoly {
    fn new(p: &RatPoly) -> Self {
        let den = p.coeffs().iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums: Vec<BigInt> = p.coeffs().iter().map(|c| c.numer() * (&den / c.denom())).collect();
        let small = nums
            .iter()
            .map(|x| x.to_i128())
            .collect::<Option<Vec<_>>>()
            .zip(den.to_i128());
        IntPoly { nums, den, small }
    }

    fn numer_small(&self, n: u64) -> Option<i128> {
        let (nums, _) = self.small.as_ref()?;
        let n = n as i128;
        let mut acc: i128 = 0;
        for &a in nums.iter().rev() {
            acc = acc.checked_mul(n)?.checked_add(a)?;
        }
        Some(acc)
    }

    fn numer_big(&self, n: u64) -> BigInt {
        let nb = BigInt::from(n);
        self.nums.iter().rev().fold(BigInt::zero(), |acc, a| acc * &nb + a)
    }
}

/// Central phase r·v₃ with v₃ = frac(Z₃ + ⌊Z₁⌋·Z₂).
struct CentralPhase {
    r: i64,
    z: [IntPoly; 3],
}

impl CentralPhase {
    fn eval(&self, n: u64) -> Frac128 {
        if let Some(v) = self.eval_small(n) {
            return v;
        }
        let [z1, z2, z3] = &self.z;
        let fl = self.z[0].numer_big(n).div_floor(&z1.den);
        let num = BigInt::from(self.r) * (z3.numer_big(n) * &z2.den + fl * z2.numer_big(n) * &z3.den);
        Frac128::from_ratio(&num, &(&z2.den * &z3.den))
    }

    fn eval_small(&self, n: u64) -> Option<Frac128> {
        let [z1, z2, z3] = &self.z;
        let (d1, d2, d3) = (z1.small.as_ref()?.1, z2.small.as_ref()?.1, z3.small.as_ref()?.1);
        let fl = z1.numer_small(n)?.div_euclid(d1);
        let a = z3.numer_small(n)?.checked_mul(d2)?;
        let b = fl.checked_mul(z2.numer_small(n)?)?.checked_mul(d3)?;
        let num = a.checked_add(b)?.checked_mul(self.r as i128)?;
        let den = d2.checked_mul(d3)?;
        if den >= 1 << 63 {
            return None;
        }
        Some(ratio_frac(num.rem_euclid(den) as u128, den as u128))
    }
}

/// n ↦ f(Tⁿ(xΓ)) evaluated through the polynomial orbit representation.
pub struct NilObservable<'a> {
    pub t: &'a HeisenbergAffine,
    pub x: HeisenbergElement,
    pub f: NilCharacter,
}

struct NilSummer {
    horizontal: Vec<PhaseEvaluator>,
    central: Vec<Option<CentralPhase>>,
}

impl ChunkSummer for NilSummer {
    fn sum(&self, lo: u64, hi: u64, weight: &Weight) -> Result<Complex64> {
        let nu = self.horizontal.len() as u64;
        let mut acc = Complex64::zero();
        for n in lo..hi {
            let w = weight.at(n);
            if w == 0 {
                continue;
            }
            let r = (n % nu) as usize;
            let h = self.horizontal[r].eval(n).cis();
            let v = match &self.central[r] {
                Some(c) => (h + c.eval(n).cis()) * 0.5,
                None => h,
            };
            acc += v * w as f64;
        }
        Ok(acc)
    }
}

impl Observable for NilObservable<'_> {
    fn prepare(&self, _n_max: u64) -> Result<Box<dyn ChunkSummer + '_>> {
        let [p, qq] = self.f.horizontal;
        let mut horizontal = Vec::new();
        let mut central = Vec::new();
        for l in 0..self.t.nu {
            let rep = compile_poly_orbit(self.t, &self.x, l)?;
            let ph = rep.z[0].scale(&q(p)).add(&rep.z[1].scale(&q(qq)));
            horizontal.push(PhaseEvaluator::new(&ph));
            central.push(self.f.central.map(|r| CentralPhase { r, z: rep.z.clone().map(|p| IntPoly::new(&p)) }));
        }
        Ok(Box::new(NilSummer { horizontal, central }))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": "heisenberg",
            "g": self.t.g.v.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "dsigma": self.t.dsigma.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "nu": self.t.nu,
            "x": self.x.v.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "horizontal": self.f.horizontal,
            "central": self.f.central,
        })
    }
}

/// S(N_i) = Σ_{n ≤ N_i} μ(n)f(Tⁿ(xΓ)).
pub fn correlate_nil(
    t: &HeisenbergAffine,
    x: &HeisenbergElement,
    f: NilCharacter,
    table: &MobiusTable,
    checkpoints: &[u64],
    exec: &Exec,
) -> Result<CorrelationSeries> {
    let obs = NilObservable { t, x: x.clone(), f };
    correlation_series(&obs, Weight::Mobius(table), checkpoints, exec)
}

/// f at a reduced point, for cross-checks.
pub fn nil_character_value(f: NilCharacter, y: &HeisenbergElement) -> Complex64 {
    let [p, qq] = f.horizontal;
    let h = (&y.v[0] * q(p) + &y.v[1] * q(qq)).frac_mod1();
    let hv = h.cis();
    match f.central {
        Some(r) => (hv + (&y.v[2] * q(r)).frac_mod1().cis()) * 0.5,
        None => hv,
    }
}

trait FracMod1 {
    fn frac_mod1(&self) -> Frac128;
}

impl FracMod1 for BigRational {
    fn frac_mod1(&self) -> Frac128 {
        Frac128::from_ratio(self.numer(), self.denom())
    }
}
