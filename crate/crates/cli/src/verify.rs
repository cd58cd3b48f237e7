//! `distal verify`: the randomized check suites, one JSON record per check.

use crate::output::write_atomic;
use crate::{Failure, Run};
use distal_core::cfrac::{cf_expand_alpha, convergent_bounds_hold, Alpha, AlphaSpec};
use distal_core::correlate::{
    bsz_test, poly_lower_bound_check, scale_condition_growth, vdc_sum_check, RealPoly, SequenceSpec, DEFAULT_PRIME_CAP,
};
use distal_core::furstenberg::{build_alpha, verify_combined_coefficients, FurstenbergSystem};
use distal_core::mobius::mobius_sieve;
use distal_core::reduce::Exec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Suite {
    records: Vec<Value>,
}

impl Suite {
    fn record(&mut self, name: &str, ok: bool, detail: Value) {
        self.records.push(json!({ "check": name, "pass": ok, "detail": detail }));
    }
}

pub fn run(exec: Exec, seed: u64, out: &str) -> Run {
    let mut s = Suite { records: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut specs = vec![("sqrt2_minus_1", AlphaSpec::sqrt2_minus_1(), 30), ("golden", AlphaSpec::golden(), 30)];
    for (tau, k) in [(0.5, 5), (1.0, 3), (2.0, 2)] {
        specs.push(("furstenberg", build_alpha(tau, k)?, k + 1));
    }
    for (name, spec, depth) in specs {
        let cf = cf_expand_alpha(&Alpha::new(&spec)?, depth, true)?;
        let mut ok = true;
        for k in 2..cf.q.len() - 1 {
            ok &= convergent_bounds_hold(&cf, k)?;
        }
        s.record("convergent_bounds", ok, json!({ "alpha": name, "convergents": cf.q.len() }));
    }

    for (tau, k) in [(0.5, 5), (1.0, 3), (2.0, 2)] {
        let r = verify_combined_coefficients(&FurstenbergSystem::build(tau, k)?)?;
        s.record("furstenberg_coefficients", r.all_ok, json!({ "tau": tau, "depth": k }));
    }

    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let deg = rng.gen_range(1..=8);
        let coeffs: Vec<Complex64> = (0..=deg)
            .map(|_| {
                let (r, t): (f64, f64) = (rng.gen::<f64>().sqrt(), rng.gen());
                Complex64::from_polar(r, std::f64::consts::TAU * t)
            })
            .collect();
        let r = poly_lower_bound_check(&coeffs, 0.05, 10_000)?;
        worst = worst.min(r.min_ratio);
    }
    s.record("poly_lower_bound", worst >= 1.0, json!({ "min_ratio": worst }));

    let table = mobius_sieve(100_000)?;
    let mut counterexamples = 0;
    for i in 0..6 {
        let theta: f64 = rng.gen();
        let seq = if i % 2 == 0 { SequenceSpec::Rotation(theta) } else { SequenceSpec::Poly(vec![0.0, theta, rng.gen::<f64>() * 1e-3]) };
        let r = bsz_test(&|k| seq.eval(k), 0.3, 2_000, 100_000, &table, DEFAULT_PRIME_CAP, &exec)?;
        if r.hypothesis_holds && !r.conclusion_holds {
            counterexamples += 1;
        }
    }
    s.record("bsz_consistency", counterexamples == 0, json!({ "instances": 6, "counterexamples": counterexamples }));

    let c: f64 = 1e-7 * (1.0 + rng.gen::<f64>());
    let r = vdc_sum_check(&RealPoly(vec![0.0, 0.0, 0.0, c]), 6.0 * c, 1.0, 1_000.0, 50_000.0, 1_000)?;
    s.record("van_der_corput", r.precondition_ok && r.ratio <= 1.0, json!({ "ratio": r.ratio }));

    let scales: Vec<f64> = (1..=60).map(|k| k as f64 * 0.5).collect();
    let r = scale_condition_growth(1.0, 2.5, 1, 1.0, &scales);
    s.record("scale_condition", r.monotone_beyond_threshold, json!({ "threshold": r.threshold }));

    let all = s.records.iter().all(|r| r["pass"] == json!(true));
    let mut text = serde_json::to_string_pretty(&json!({ "seed": seed, "all_pass": all, "checks": s.records }))
        .map_err(|e| Failure::Internal(e.to_string()))?;
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    if all {
        Ok(())
    } else {
        Err(Failure::Internal("some checks failed".into()))
    }
}
