mod output;
mod verify;

use clap::{Args, Parser, Subcommand};
use distal_core::cfrac::{cf_expand_alpha, classify_case, convergent_bounds_hold, Alpha};
use distal_core::config::{AlphaConfig, Checkpoints, ExperimentConfig, Experiment, FlowConfig, ObservableConfig, SeriesConfig};
use distal_core::correlate::{correlation_series, bsz_test, PolyPhase, SequenceSpec, Weight, DEFAULT_PRIME_CAP};
use distal_core::flows::{Character, TorusPoint};
use distal_core::furstenberg::{irregularity_probe, verify_combined_coefficients, FurstenbergSystem};
use distal_core::mobius::{mobius_sieve_with, MobiusTable, SieveOptions, DEFAULT_SEGMENT};
use distal_core::nilflow::compile_poly_orbit;
use distal_core::reduce::{Exec, THREADS_ENV};
use distal_core::Error;
use output::{provenance, sha256_hex, sidecar_path, write_atomic};
use serde_json::json;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "distal", version, about = "Möbius correlation experiments for distal flows and nilsystems")]
struct Cli {
    /// Worker threads (1 = sequential; 0 = all cores). Defaults to $DISTAL_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// μ(n) for n ≤ limit.
    Sieve {
        #[arg(long)]
        limit: u64,
        /// Write n,mu rows to this path ("-" for stdout).
        #[arg(long)]
        emit_csv: Option<String>,
    },
    /// Continued-fraction expansion and the flat/sharp partition.
    Cfrac {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, default_value_t = 4)]
        b: u32,
    },
    /// Which regime the scale analysis enters at N.
    Classify {
        #[command(flatten)]
        alpha: AlphaArg,
        /// Series JSON, e.g. '{"kind":"cosine","tau":1}'.
        #[arg(long, default_value = r#"{"kind":"cosine","tau":1.0}"#)]
        h: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        d1: u32,
        #[arg(long, default_value_t = 1)]
        b2: i64,
        #[arg(long, default_value_t = 60)]
        depth: usize,
    },
    /// Weighted correlation series for a config file.
    Correlate {
        #[arg(long)]
        config: String,
        /// Override the skew character, "b1,b2".
        #[arg(long)]
        b: Option<String>,
        /// Override the checkpoints, comma separated.
        #[arg(long)]
        checkpoints: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Σ μ(n) e(φ(n)) for a polynomial phase.
    Expsum {
        /// Coefficients c0,c1,… of φ.
        #[arg(long, allow_hyphen_values = true)]
        poly: String,
        /// Checkpoints, comma separated.
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 1)]
        nu: u64,
        #[arg(long, default_value_t = 0)]
        l: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bilinear prime-dilation test.
    Bsz {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        /// one, rot:θ or poly:c0,c1,…
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = DEFAULT_PRIME_CAP)]
        prime_cap: usize,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Builds the Furstenberg system and checks its coefficients.
    Furstenberg {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        depth: usize,
        /// Birkhoff-average windows for the uncorrected flow, comma separated.
        #[arg(long)]
        windows: Option<String>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Heisenberg nil-flow correlation plus its polynomial orbit.
    Nilflow {
        #[arg(long)]
        config: String,
        /// Where to write the compiled orbit representation (JSON).
        #[arg(long)]
        rep: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Runs the randomized check suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Args)]
struct AlphaArg {
    /// Alpha JSON, e.g. '{"kind":"sqrt2_minus_1"}'.
    #[arg(long)]
    alpha: String,
}

#[derive(Args)]
struct OutArgs {
    /// CSV series path; "-" for stdout. Falls back to the config's output.csv, then stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON series path.
    #[arg(long)]
    json: Option<String>,
}

/// Errors carried to the exit code.
enum Failure {
    Usage(String),
    Core(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(format!("i/o: {e}"))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e {
                Error::Config(_) => 2,
                Error::Domain(_) => 3,
                Error::Capacity(_) | Error::Precision(_) | Error::Range(_) => 4,
                Error::Numeric(_) => 5,
            },
            Failure::Internal(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Internal(m) => m.clone(),
            Failure::Core(e) => {
                let hint = match e {
                    Error::Capacity(_) => " (lower the checkpoints or the depth)",
                    Error::Precision(_) => " (give α structurally or raise precision_bits)",
                    _ => "",
                };
                format!("{e}{hint}")
            }
        }
    }
}

type Run = std::result::Result<(), Failure>;

struct Ctx {
    exec: Exec,
    threads: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (exec, threads) = match cli.threads {
        Some(t) => (Exec::from_threads(t), t.to_string()),
        None => (Exec::from_env(), std::env::var(THREADS_ENV).unwrap_or_else(|_| "default".into())),
    };
    let ctx = Ctx { exec, threads };
    match dispatch(cli.cmd, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cmd: Cmd, ctx: &Ctx) -> Run {
    match cmd {
        Cmd::Sieve { limit, emit_csv } => sieve(ctx, limit, emit_csv),
        Cmd::Cfrac { alpha, depth, b } => cfrac(&alpha.alpha, depth, b),
        Cmd::Classify { alpha, h, n, d1, b2, depth } => classify(&alpha.alpha, &h, n, d1, b2, depth),
        Cmd::Correlate { config, b, checkpoints, out } => correlate(ctx, &config, b, checkpoints, out),
        Cmd::Expsum { poly, n, nu, l, out } => expsum(ctx, &poly, &n, nu, l, out),
        Cmd::Bsz { tau, m, n, f, prime_cap, out } => bsz(ctx, tau, m, n, &f, prime_cap, &out),
        Cmd::Furstenberg { tau, depth, windows, out } => furstenberg(ctx, tau, depth, windows, &out),
        Cmd::Nilflow { config, rep, out } => nilflow(ctx, &config, rep, out),
        Cmd::Verify { seed, out } => verify::run(ctx.exec, seed, &out),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<Vec<T>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Failure::Usage(format!("bad {what} entry {t:?} in {s:?}"))))
        .collect()
}

fn sieve_table(ctx: &Ctx, limit: u64) -> std::result::Result<MobiusTable, Failure> {
    Ok(mobius_sieve_with(limit, SieveOptions { segment_len: DEFAULT_SEGMENT, exec: ctx.exec })?)
}

fn emit_json(path: &str, v: &serde_json::Value) -> Run {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())?;
    Ok(())
}

/// Writes an artifact and, for real files, its provenance sidecar.
fn emit_artifact(path: &str, data: &[u8], command: &str, config_hash: &str, ctx: &Ctx) -> Run {
    write_atomic(path, data)?;
    if path != "-" {
        emit_json(&sidecar_path(path), &provenance(command, config_hash, &ctx.threads))?;
    }
    Ok(())
}

fn sieve(ctx: &Ctx, limit: u64, emit_csv: Option<String>) -> Run {
    let table = sieve_table(ctx, limit)?;
    match emit_csv {
        Some(path) => {
            let mut s = String::with_capacity(limit as usize * 8 + 8);
            s.push_str("n,mu\n");
            for (n, mu) in table.iter() {
                s.push_str(&format!("{n},{mu}\n"));
            }
            let hash = sha256_hex(format!("sieve --limit {limit}").as_bytes());
            emit_artifact(&path, s.as_bytes(), "sieve", &hash, ctx)
        }
        None => {
            let squarefree = table.iter().filter(|&(_, m)| m != 0).count();
            emit_json("-", &json!({ "limit": limit, "mertens": table.mertens(limit)?, "squarefree": squarefree }))
        }
    }
}

fn alpha_from_json(s: &str) -> std::result::Result<Alpha, Failure> {
    let cfg: AlphaConfig = serde_json::from_str(s).map_err(|e| Failure::Usage(format!("alpha: {e}")))?;
    Ok(Alpha::new(&cfg.spec()?)?)
}

fn cfrac(alpha: &str, depth: usize, b: u32) -> Run {
    let a = alpha_from_json(alpha)?;
    let cf = cf_expand_alpha(&a, depth, false)?;
    let strs = |v: &[num_bigint::BigInt]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let mut bounds = Vec::new();
    if !a.is_rational() {
        for k in 2..cf.q.len() {
            match convergent_bounds_hold(&cf, k) {
                Ok(ok) => bounds.push(json!({ "k": k, "holds": ok })),
                Err(Error::Range(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let partition = if cf.q.len() >= 2 { Some(cf.partition(b)) } else { None };
    emit_json(
        "-",
        &json!({
            "alpha": a.to_f64(),
            "quotients": strs(&cf.quotients),
            "l": strs(&cf.l),
            "q": strs(&cf.q),
            "terminated": cf.terminated,
            "partition": partition,
            "convergent_bounds": bounds,
        }),
    )
}

fn classify(alpha: &str, h: &str, n: u64, d1: u32, b2: i64, depth: usize) -> Run {
    let a = alpha_from_json(alpha)?;
    let series: SeriesConfig = serde_json::from_str(h).map_err(|e| Failure::Usage(format!("h: {e}")))?;
    // reuse the config machinery so the series is validated the same way
    let cfg = ExperimentConfig {
        flow: FlowConfig::Skew { a: 1, c: 0, d: 1, alpha: serde_json::from_str(alpha).expect("parsed above"), h: series, point: [0.0, 0.0] },
        observable: ObservableConfig::Character { b: [0, 1] },
        checkpoints: Checkpoints::List(vec![1]),
        weight: Default::default(),
        seed: 0,
        output: Default::default(),
    };
    cfg.validate()?;
    let Experiment::Skew { flow, .. } = cfg.build()? else { unreachable!("skew config") };
    let cf = cf_expand_alpha(&a, depth, false)?;
    let report = classify_case(&cf, &flow.h, n, d1, b2)?;
    emit_json("-", &serde_json::to_value(report).map_err(|e| Failure::Internal(e.to_string()))?)
}

fn load_config(path: &str) -> std::result::Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    Ok(ExperimentConfig::load(&text)?)
}

fn finish_series(ctx: &Ctx, command: &str, cfg: &ExperimentConfig, out: OutArgs, series: &distal_core::correlate::CorrelationSeries) -> Run {
    let hash = sha256_hex(cfg.canonical_json().as_bytes());
    let csv_path = out.out.or_else(|| cfg.output.csv.clone()).unwrap_or_else(|| "-".into());
    emit_artifact(&csv_path, series.to_csv().as_bytes(), command, &hash, ctx)?;
    if let Some(j) = out.json.or_else(|| cfg.output.json.clone()) {
        let mut s = serde_json::to_string_pretty(&series.to_json()).map_err(|e| Failure::Internal(e.to_string()))?;
        s.push('\n');
        emit_artifact(&j, s.as_bytes(), command, &hash, ctx)?;
    }
    Ok(())
}

fn correlate(ctx: &Ctx, path: &str, b: Option<String>, checkpoints: Option<String>, out: OutArgs) -> Run {
    let mut cfg = load_config(path)?;
    if let Some(b) = b {
        let v: Vec<i64> = parse_list(&b, "b")?;
        if v.len() != 2 {
            return Err(Failure::Usage("--b needs two integers".into()));
        }
        match cfg.observable {
            ObservableConfig::Character { .. } => cfg.observable = ObservableConfig::Character { b: [v[0], v[1]] },
            _ => return Err(Failure::Usage("--b applies to skew flows only".into())),
        }
    }
    if let Some(c) = checkpoints {
        cfg.checkpoints = Checkpoints::List(parse_list(&c, "checkpoint")?);
    }
    cfg.validate()?;
    let n_max = *cfg.checkpoints.resolve()?.last().unwrap();
    let table = sieve_table(ctx, n_max)?;
    let series = cfg.run(&table, &ctx.exec)?;
    finish_series(ctx, "correlate", &cfg, out, &series)
}

fn expsum(ctx: &Ctx, poly: &str, n: &str, nu: u64, l: u64, out: OutArgs) -> Run {
    let coeffs: Vec<f64> = parse_list(poly, "coefficient")?;
    let mut checkpoints: Vec<u64> = parse_list(n, "checkpoint")?;
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.first() == Some(&0) {
        return Err(Failure::Usage("checkpoints must be positive".into()));
    }
    let phase = PolyPhase::new(coeffs.clone(), nu, l)?;
    let table = sieve_table(ctx, *checkpoints.last().unwrap())?;
    let series = correlation_series(&phase, Weight::Mobius(&table), &checkpoints, &ctx.exec)?;
    let hash = sha256_hex(format!("expsum {coeffs:?} {checkpoints:?} {nu} {l}").as_bytes());
    let path = out.out.unwrap_or_else(|| "-".into());
    emit_artifact(&path, series.to_csv().as_bytes(), "expsum", &hash, ctx)?;
    if let Some(j) = out.json {
        emit_json(&j, &series.to_json())?;
    }
    Ok(())
}

fn bsz(ctx: &Ctx, tau: f64, m: u64, n: u64, f: &str, prime_cap: usize, out: &str) -> Run {
    let seq = SequenceSpec::parse(f)?;
    let table = sieve_table(ctx, n)?;
    let report = bsz_test(&|k| seq.eval(k), tau, m, n, &table, prime_cap, &ctx.exec)?;
    emit_json(out, &serde_json::to_value(report).map_err(|e| Failure::Internal(e.to_string()))?)
}

fn furstenberg(ctx: &Ctx, tau: f64, depth: usize, windows: Option<String>, out: &str) -> Run {
    let sys = FurstenbergSystem::build(tau, depth)?;
    let report = verify_combined_coefficients(&sys)?;
    let probe = match windows {
        Some(w) => {
            let w: Vec<u64> = parse_list(&w, "window")?;
            Some(irregularity_probe(&sys, Character::new(0, 1), TorusPoint::new(0.0, 0.0), &w, &ctx.exec)?)
        }
        None => None,
    };
    let q: Vec<String> = sys.quotients.q.iter().map(|x| {
        let s = x.to_string();
        if s.len() > 60 { format!("{}…({} digits)", &s[..20], s.len()) } else { s }
    }).collect();
    emit_json(
        out,
        &json!({
            "tau": tau,
            "depth": depth,
            "q": q,
            "levels": sys.levels,
            "combined_truncation": sys.combined.default_truncation(),
            "report": report,
            "irregularity": probe,
        }),
    )
}

fn nilflow(ctx: &Ctx, path: &str, rep: Option<String>, out: OutArgs) -> Run {
    let cfg = load_config(path)?;
    if !matches!(cfg.flow, FlowConfig::Heisenberg { .. }) {
        return Err(Failure::Usage("nilflow needs a config with flow kind heisenberg".into()));
    }
    let Experiment::Heisenberg { t, point, .. } = cfg.build()? else { unreachable!("heisenberg config") };
    if let Some(rp) = rep {
        let mut classes = Vec::new();
        for l in 0..t.nu {
            let r = compile_poly_orbit(&t, &point, l)?;
            let factors: Vec<_> = r
                .factors
                .iter()
                .map(|f| json!({ "generator": f.generator, "coeff": f.coeff.to_string(), "power": f.power }))
                .collect();
            classes.push(json!({ "l": l, "degree": r.degree(), "factors": factors }));
        }
        emit_json(&rp, &json!({ "nu": t.nu, "classes": classes }))?;
    }
    let n_max = *cfg.checkpoints.resolve()?.last().unwrap();
    let table = sieve_table(ctx, n_max)?;
    let series = cfg.run(&table, &ctx.exec)?;
    finish_series(ctx, "nilflow", &cfg, out, &series)
}
