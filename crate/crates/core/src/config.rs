//! Experiment configuration documents.
//!
//! A config is JSON. It is parsed and fully validated by [`ExperimentConfig::load`]
//! before anything is computed; [`ExperimentConfig::build`] then resolves the
//! flow into owned objects that can hand out observables.

use crate::analytic::AnalyticSeries;
use crate::cfrac::{Alpha, AlphaSpec, Tail};
use crate::correlate::{correlation_series, CorrelationSeries, Observable, SkewObservable, UnipotentObservable, Weight};
use crate::error::{Error, Result};
use crate::flows::{Character, CyclicFactor, SkewFlow, TorusPoint, UnipotentAffine};
use crate::furstenberg::FurstenbergSystem;
use crate::mobius::MobiusTable;
use crate::nilflow::{HeisenbergAffine, HeisenbergElement, NilCharacter, NilObservable};
use crate::poly::parse_rational;
use crate::reduce::Exec;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flow: FlowConfig,
    pub observable: ObservableConfig,
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub weight: WeightKind,
    /// Seed for the randomized check suites.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    Skew {
        #[serde(default = "one")]
        a: i64,
        #[serde(default)]
        c: i64,
        #[serde(default = "one")]
        d: i64,
        alpha: AlphaConfig,
        h: SeriesConfig,
        #[serde(default)]
        point: [f64; 2],
    },
    UnipotentAffine {
        matrix: Vec<Vec<i64>>,
        /// Rationals as strings, "p/q" or decimal.
        translation: Vec<String>,
        #[serde(default)]
        cyclic: Option<CyclicConfig>,
        point: Vec<String>,
    },
    Heisenberg {
        /// Second-kind coordinates of the translation.
        g: [String; 3],
        dsigma: [[String; 3]; 3],
        point: [String; 3],
    },
}

fn one() -> i64 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicConfig {
    pub modulus: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaConfig {
    #[serde(rename = "sqrt2_minus_1")]
    Sqrt2Minus1 {
        #[serde(default)]
        precision_bits: Option<u32>,
    },
    Golden {
        #[serde(default)]
        precision_bits: Option<u32>,
    },
    Rational {
        p: i64,
        q: i64,
    },
    Quadratic {
        a0: i64,
        #[serde(default)]
        preperiod: Vec<u64>,
        period: Vec<u64>,
        #[serde(default)]
        precision_bits: Option<u32>,
    },
    /// Partial quotients as decimal strings; the tail repeats `period`, or is
    /// unbounded when `period` is absent.
    Explicit {
        quotients: Vec<String>,
        #[serde(default)]
        period: Option<Vec<String>>,
        #[serde(default)]
        tail_log2_lower: Option<f64>,
        #[serde(default)]
        precision_bits: Option<u32>,
    },
    Furstenberg {
        tau: f64,
        depth: usize,
    },
    Decimal {
        digits: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesConfig {
    Zero { tau: f64 },
    Cosine { tau: f64 },
    ExpDecay { tau: f64, m_max: i64 },
    /// Entries [m, re, im]; both m and −m must be listed for a real h.
    Coeffs {
        tau: f64,
        #[serde(default)]
        tau2: Option<f64>,
        coeffs: Vec<(i64, f64, f64)>,
    },
    /// The corrected Furstenberg series h + H, truncated at its default
    /// truncation. The alpha must be the matching Furstenberg α.
    Furstenberg { tau: f64, depth: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ObservableConfig {
    Character { b: [i64; 2] },
    Linear { v: Vec<i64> },
    Nil {
        horizontal: [i64; 2],
        #[serde(default)]
        central: Option<i64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    List(Vec<u64>),
    Geometric { from: u64, to: u64, per_decade: u32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    #[default]
    Mobius,
    Liouville,
    One,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub json: Option<String>,
}

/// Largest checkpoint a config may request.
pub const MAX_CHECKPOINT: u64 = crate::mobius::MAX_LIMIT;

impl Checkpoints {
    /// Sorted, deduplicated, positive checkpoints.
    pub fn resolve(&self) -> Result<Vec<u64>> {
        let mut v = match self {
            Checkpoints::List(v) => v.clone(),
            Checkpoints::Geometric { from, to, per_decade } => geometric_checkpoints(*from, *to, *per_decade)?,
        };
        if v.is_empty() {
            return Err(Error::Config("no checkpoints".into()));
        }
        if v.contains(&0) {
            return Err(Error::Config("checkpoints must be positive".into()));
        }
        v.sort_unstable();
        v.dedup();
        if *v.last().unwrap() > MAX_CHECKPOINT {
            return Err(Error::Capacity(format!("checkpoint {} exceeds {MAX_CHECKPOINT}", v.last().unwrap())));
        }
        Ok(v)
    }
}

/// ⌊from·10^{k/per_decade}⌉ up to `to`, always including both ends.
pub fn geometric_checkpoints(from: u64, to: u64, per_decade: u32) -> Result<Vec<u64>> {
    if from == 0 || to < from || per_decade == 0 {
        return Err(Error::Config(format!("bad geometric checkpoints from {from} to {to} with {per_decade} per decade")));
    }
    let mut out = vec![from];
    let ratio = (to as f64 / from as f64).log10() * per_decade as f64;
    for k in 1..=ratio.floor() as u32 {
        let n = (from as f64 * 10f64.powf(k as f64 / per_decade as f64)).round() as u64;
        if n > *out.last().unwrap() && n < to {
            out.push(n);
        }
    }
    if *out.last().unwrap() != to {
        out.push(to);
    }
    Ok(out)
}

fn big(s: &str) -> Result<BigInt> {
    s.trim().parse().map_err(|_| Error::Config(format!("not an integer: {s:?}")))
}

fn rats(xs: &[String]) -> Result<Vec<BigRational>> {
    xs.iter().map(|s| parse_rational(s)).collect()
}

impl AlphaConfig {
    pub fn spec(&self) -> Result<AlphaSpec> {
        let with = |s: AlphaSpec, bits: &Option<u32>| match bits {
            Some(b) => s.with_precision(*b),
            None => s,
        };
        Ok(match self {
            AlphaConfig::Sqrt2Minus1 { precision_bits } => with(AlphaSpec::sqrt2_minus_1(), precision_bits),
            AlphaConfig::Golden { precision_bits } => with(AlphaSpec::golden(), precision_bits),
            AlphaConfig::Rational { p, q } => AlphaSpec::rational(*p, *q),
            AlphaConfig::Quadratic { a0, preperiod, period, precision_bits } => {
                with(AlphaSpec::quadratic(*a0, preperiod, period), precision_bits)
            }
            AlphaConfig::Explicit { quotients, period, tail_log2_lower, precision_bits } => {
                let qs = quotients.iter().map(|s| big(s)).collect::<Result<Vec<_>>>()?;
                let tail = match (period, tail_log2_lower) {
                    (Some(p), None) => Tail::Periodic(p.iter().map(|s| big(s)).collect::<Result<_>>()?),
                    (None, Some(l)) => Tail::Unbounded { log2_lower: *l },
                    (None, None) => Tail::Unbounded { log2_lower: 0.0 },
                    (Some(_), Some(_)) => return Err(Error::Config("give either period or tail_log2_lower, not both".into())),
                };
                with(AlphaSpec::explicit(qs, tail), precision_bits)
            }
            AlphaConfig::Furstenberg { tau, depth } => AlphaSpec::furstenberg(*tau, *depth),
            AlphaConfig::Decimal { digits } => AlphaSpec::decimal(digits),
        })
    }
}

impl SeriesConfig {
    fn build(&self) -> Result<AnalyticSeries> {
        match self {
            SeriesConfig::Zero { tau } => AnalyticSeries::from_coeffs(std::iter::empty(), *tau, None),
            SeriesConfig::Cosine { tau } => {
                let half = Complex64::new(0.5, 0.0);
                AnalyticSeries::from_coeffs([(1, half), (-1, half)], *tau, Some(*tau))
            }
            SeriesConfig::ExpDecay { tau, m_max } => {
                if *m_max < 1 {
                    return Err(Error::Config("exp_decay needs m_max ≥ 1".into()));
                }
                AnalyticSeries::exp_decay(*tau, *m_max)
            }
            SeriesConfig::Coeffs { tau, tau2, coeffs } => {
                AnalyticSeries::from_coeffs(coeffs.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))), *tau, *tau2)
            }
            SeriesConfig::Furstenberg { .. } => unreachable!("resolved with its system"),
        }
    }
}

/// A config resolved into owned dynamical objects.
pub enum Experiment {
    Skew { flow: SkewFlow, point: TorusPoint, b: Character },
    Unipotent { aff: UnipotentAffine, point: Vec<BigRational>, v: Vec<i64> },
    Heisenberg { t: HeisenbergAffine, point: HeisenbergElement, f: NilCharacter },
}

impl Experiment {
    pub fn observable(&self) -> Box<dyn Observable + '_> {
        match self {
            Experiment::Skew { flow, point, b } => Box::new(SkewObservable::new(flow, *point, *b)),
            Experiment::Unipotent { aff, point, v } => Box::new(UnipotentObservable::new(aff, point.clone(), v.clone())),
            Experiment::Heisenberg { t, point, f } => Box::new(NilObservable { t, x: point.clone(), f: *f }),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn load(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialization, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Structural checks that need no heavy computation.
    pub fn validate(&self) -> Result<()> {
        self.checkpoints.resolve()?;
        match (&self.flow, &self.observable) {
            (FlowConfig::Skew { alpha, h, point, .. }, ObservableConfig::Character { .. }) => {
                if point.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("skew point must be finite".into()));
                }
                alpha.spec()?;
                if let SeriesConfig::Furstenberg { tau, depth } = h {
                    match alpha {
                        AlphaConfig::Furstenberg { tau: t, depth: k } if t == tau && k == depth => {}
                        _ => {
                            return Err(Error::Config(
                                "the furstenberg series needs alpha {kind: furstenberg} with the same tau and depth".into(),
                            ))
                        }
                    }
                }
            }
            (FlowConfig::UnipotentAffine { matrix, translation, point, .. }, ObservableConfig::Linear { v }) => {
                let t = matrix.len();
                if translation.len() != t || point.len() != t || v.len() != t {
                    return Err(Error::Config(format!(
                        "unipotent_affine: matrix is {t}×{t} but translation, point and v have lengths {}, {}, {}",
                        translation.len(),
                        point.len(),
                        v.len()
                    )));
                }
                rats(translation)?;
                rats(point)?;
            }
            (FlowConfig::Heisenberg { g, dsigma, point }, ObservableConfig::Nil { .. }) => {
                rats(g)?;
                rats(point)?;
                for row in dsigma {
                    rats(row)?;
                }
            }
            (f, o) => {
                let fk = match f {
                    FlowConfig::Skew { .. } => "skew (needs observable {b})",
                    FlowConfig::UnipotentAffine { .. } => "unipotent_affine (needs observable {v})",
                    FlowConfig::Heisenberg { .. } => "heisenberg (needs observable {horizontal, central})",
                };
                return Err(Error::Config(format!("observable {o:?} does not fit flow {fk}")));
            }
        }
        Ok(())
    }

    /// Resolves the flow. α is certified for the largest checkpoint.
    pub fn build(&self) -> Result<Experiment> {
        let n_max = *self.checkpoints.resolve()?.last().unwrap();
        match (&self.flow, &self.observable) {
            (FlowConfig::Skew { a, c, d, alpha, h, point }, ObservableConfig::Character { b }) => {
                let (alpha, series) = match h {
                    SeriesConfig::Furstenberg { tau, depth } => {
                        let sys = FurstenbergSystem::build(*tau, *depth)?;
                        let m = sys.combined.default_truncation();
                        (sys.alpha.clone(), sys.combined.truncated(m))
                    }
                    other => (Alpha::new(&alpha.spec()?.for_n_max(n_max.saturating_mul(n_max)))?, other.build()?),
                };
                let flow = SkewFlow::new(*a, *c, *d, alpha, series)?;
                Ok(Experiment::Skew { flow, point: TorusPoint::new(point[0], point[1]), b: Character::new(b[0], b[1]) })
            }
            (FlowConfig::UnipotentAffine { matrix, translation, cyclic, point }, ObservableConfig::Linear { v }) => {
                let cyc = cyclic.as_ref().map(|c| CyclicFactor { modulus: c.modulus, count: c.count });
                let aff = UnipotentAffine::new(matrix.clone(), rats(translation)?, cyc)?;
                Ok(Experiment::Unipotent { aff, point: rats(point)?, v: v.clone() })
            }
            (FlowConfig::Heisenberg { g, dsigma, point }, ObservableConfig::Nil { horizontal, central }) => {
                let g = rats(g)?;
                let mut m: Vec<[BigRational; 3]> = Vec::new();
                for row in dsigma {
                    let r = rats(row)?;
                    m.push([r[0].clone(), r[1].clone(), r[2].clone()]);
                }
                let t = HeisenbergAffine::new(
                    HeisenbergElement::new([g[0].clone(), g[1].clone(), g[2].clone()]),
                    [m[0].clone(), m[1].clone(), m[2].clone()],
                )?;
                let p = rats(point)?;
                let point = HeisenbergElement::new([p[0].clone(), p[1].clone(), p[2].clone()]);
                Ok(Experiment::Heisenberg { t, point, f: NilCharacter { horizontal: *horizontal, central: *central } })
            }
            _ => Err(Error::Config("flow and observable do not match".into())),
        }
    }

    /// Builds the flow and runs the weighted correlation over all checkpoints.
    pub fn run(&self, table: &MobiusTable, exec: &Exec) -> Result<CorrelationSeries> {
        let checkpoints = self.checkpoints.resolve()?;
        let exp = self.build()?;
        let obs = exp.observable();
        let weight = match self.weight {
            WeightKind::Mobius => Weight::Mobius(table),
            WeightKind::Liouville => Weight::Liouville(table),
            WeightKind::One => Weight::One,
        };
        correlation_series(obs.as_ref(), weight, &checkpoints, exec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobius::mobius_sieve;

    const SKEW: &str = r#"{
        "flow": {"kind": "skew", "c": 1, "alpha": {"kind": "sqrt2_minus_1"},
                 "h": {"kind": "cosine", "tau": 1.0}, "point": [0.1, 0.2]},
        "observable": {"b": [0, 1]},
        "checkpoints": [100, 1000]
    }"#;

    #[test]
    fn skew_config_runs() {
        let cfg = ExperimentConfig::load(SKEW).unwrap();
        assert_eq!(cfg.weight, WeightKind::Mobius);
        let table = mobius_sieve(1000).unwrap();
        let s = cfg.run(&table, &Exec::Sequential).unwrap();
        assert_eq!(s.checkpoints, vec![100, 1000]);
        assert!(s.sums.iter().zip(&s.checkpoints).all(|(z, &n)| z.norm() <= n as f64));
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = ExperimentConfig::load(SKEW).unwrap();
        let again = ExperimentConfig::load(&cfg.canonical_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_before_computing() {
        let bad = SKEW.replace(r#""b": [0, 1]"#, r#""v": [0, 1]"#);
        assert!(matches!(ExperimentConfig::load(&bad), Err(Error::Config(_))));
        let bad = SKEW.replace("[100, 1000]", "[0, 10]");
        assert!(matches!(ExperimentConfig::load(&bad), Err(Error::Config(_))));
        let bad = SKEW.replace(r#""c": 1"#, r#""c": 1, "bogus": 2"#);
        assert!(ExperimentConfig::load(&bad).is_err());
        let bad = SKEW.replace(r#""kind": "cosine", "tau": 1.0"#, r#""kind": "furstenberg", "tau": 1.0, "depth": 3"#);
        assert!(matches!(ExperimentConfig::load(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn geometric_checkpoints_cover_the_range() {
        let v = geometric_checkpoints(10_000, 10_000_000, 2).unwrap();
        assert_eq!(v, vec![10_000, 31_623, 100_000, 316_228, 1_000_000, 3_162_278, 10_000_000]);
        let c = Checkpoints::Geometric { from: 5, to: 5, per_decade: 3 };
        assert_eq!(c.resolve().unwrap(), vec![5]);
    }

    #[test]
    fn unipotent_and_heisenberg_configs_build() {
        let u = r#"{
            "flow": {"kind": "unipotent_affine", "matrix": [[1, 0], [1, 1]],
                     "translation": ["1/3", "2/7"], "point": ["0", "1/5"]},
            "observable": {"v": [0, 1]},
            "checkpoints": {"from": 10, "to": 1000, "per_decade": 1},
            "weight": "liouville"
        }"#;
        let table = mobius_sieve(1000).unwrap();
        let s = ExperimentConfig::load(u).unwrap().run(&table, &Exec::Sequential).unwrap();
        assert_eq!(s.checkpoints, vec![10, 100, 1000]);
        let h = r#"{
            "flow": {"kind": "heisenberg", "g": ["1/3", "1/5", "0"],
                     "dsigma": [["1", "0", "0"], ["1", "1", "0"], ["1/2", "0", "1"]],
                     "point": ["0", "0", "0"]},
            "observable": {"horizontal": [0, 0], "central": 1},
            "checkpoints": [500]
        }"#;
        let s = ExperimentConfig::load(h).unwrap().run(&table, &Exec::Sequential).unwrap();
        assert!(s.sums[0].norm() <= 500.0);
    }
}
