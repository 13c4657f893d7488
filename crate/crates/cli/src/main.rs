//! Batch driver: every estimator and solver as a subcommand reading one TOML
//! experiment file and writing JSON/CSV results plus a manifest.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 estimator or solver error.

mod config;
mod ops;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stablekit::rng::derive_seed;
use stablekit::verify::{run_suite, VerifyConfig, CRITERIA};

use config::ExperimentConfig;
use ops::{run_operation, OpError, Table};

#[derive(Parser)]
#[command(name = "stablekit", version, about = "Experiments for stable-like jump processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the file.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the file (default `stablekit-out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Paths ÷ 10, Monte Carlo bands × √10.
    #[arg(long)]
    smoke: bool,
    /// Comma-separated criterion numbers (default: all).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u8>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Runs the operation named in the file.
    Run(Common),
    /// Kernel checks: integrability, growth, probe integrals.
    Validate(Common),
    /// Evaluates the generator on a probe function.
    Generator(Common),
    /// Monte Carlo Dirichlet solution at the given points.
    Dirichlet(Common),
    /// Exit-time moments E τ^m.
    ExitMoments(Common),
    /// Mean exit time against distance to the boundary.
    BoundaryDecay(Common),
    /// Harnack ratio sup/inf over a compact subset.
    Harnack(Common),
    /// Survival probability in a cone and its power-law exponent.
    Cone(Common),
    /// Mean hitting times of a ball.
    Hitting(Common),
    /// Checks a power Lyapunov function along rays.
    Lyapunov(Common),
    /// Occupation and regeneration estimates of the invariant law.
    Invariant(Common),
    /// Finite-difference solution in one dimension.
    FdSolve(Common),
    /// Barrier integrals A(q) and B(q).
    Barrier(Common),
    /// Runs the acceptance battery.
    Verify(VerifyArgs),
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_ESTIMATOR: u8 = 3;

fn set_workers(n: Option<usize>) -> Result<(), String> {
    if let Some(n) = n {
        if n == 0 {
            return Err("workers must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), String> {
    fs::write(dir.join(name), body).map_err(|e| format!("writing {}: {e}", dir.join(name).display()))
}

struct Manifest {
    operation: String,
    config_path: Option<String>,
    config_sha256: Option<String>,
    seed: Option<u64>,
    sub_seeds: Vec<u64>,
    outputs: Vec<String>,
    errors: Vec<Value>,
    exit_code: u8,
}

impl Manifest {
    fn to_json(&self, started: Instant) -> String {
        let v = json!({
            "tool": "stablekit",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": stablekit::VERSION,
            "operation": self.operation,
            "config_path": self.config_path,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "sub_seeds": self.sub_seeds,
            "workers": rayon::current_num_threads(),
            "wallclock_seconds": started.elapsed().as_secs_f64(),
            "status": match self.exit_code {
                0 => "ok",
                EXIT_CHECK_FAILED => "check_failed",
                EXIT_VALIDATION => "validation_error",
                _ => "estimator_error",
            },
            "exit_code": self.exit_code,
            "errors": self.errors,
            "outputs": self.outputs,
        });
        serde_json::to_string_pretty(&v).expect("manifest serializes") + "\n"
    }
}

fn error_value(e: &OpError) -> Value {
    json!({"name": e.name(), "message": e.message()})
}

fn exit_code_of(e: &OpError) -> u8 {
    match e {
        OpError::Validation(_) => EXIT_VALIDATION,
        OpError::Estimator(_) => EXIT_ESTIMATOR,
    }
}

/// Result record and table of a whole experiment, sweeps included.
fn execute(op: &str, cfg: &ExperimentConfig, seed: u64, sub_seeds: &mut Vec<u64>) -> Result<(Value, Option<Table>), OpError> {
    let Some(sweep) = &cfg.sweep else {
        let out = run_operation(op, cfg, seed)?;
        return Ok((json!({"operation": op, "seed": seed, "result": out.record}), out.table));
    };
    if sweep.values.is_empty() {
        return Err(OpError::Validation("sweep needs at least one value".into()));
    }
    let key = serde_json::to_value(sweep.key).expect("key serializes");
    let key_name = key.as_str().unwrap_or("value").to_string();
    let mut members = Vec::new();
    let mut table: Option<Table> = None;
    for (i, &v) in sweep.values.iter().enumerate() {
        let s = derive_seed(seed, i as u64);
        sub_seeds.push(s);
        let member = cfg.member(sweep.key, v);
        let out = run_operation(op, &member, s)?;
        if let Some(t) = out.table {
            let tab = table.get_or_insert_with(|| Table {
                header: std::iter::once(key_name.clone()).chain(t.header.iter().cloned()).collect(),
                rows: Vec::new(),
            });
            for r in t.rows {
                tab.rows.push(std::iter::once(v).chain(r).collect());
            }
        }
        members.push(json!({key_name.clone(): v, "sub_seed": s, "result": out.record}));
    }
    Ok((json!({"operation": op, "seed": seed, "sweep": {"key": key, "values": sweep.values}, "members": members}), table))
}

fn run_experiment(op: Option<&str>, args: &Common) -> u8 {
    let started = Instant::now();
    let mut manifest = Manifest {
        operation: op.unwrap_or("run").to_string(),
        config_path: Some(args.config.display().to_string()),
        config_sha256: None,
        seed: None,
        sub_seeds: Vec::new(),
        outputs: Vec::new(),
        errors: Vec::new(),
        exit_code: 0,
    };
    let fail = |m: &mut Manifest, dir: &Path, e: OpError| -> u8 {
        eprintln!("error [{}]: {}", e.name(), e.message());
        m.errors.push(error_value(&e));
        m.exit_code = exit_code_of(&e);
        if fs::create_dir_all(dir).is_ok() {
            let _ = write(dir, "manifest.json", &m.to_json(started));
        }
        m.exit_code
    };
    let default_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("stablekit-out"));
    let text = match fs::read(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(&mut manifest, &default_dir, OpError::Validation(format!("reading {}: {e}", args.config.display()))),
    };
    manifest.config_sha256 = Some(sha256_hex(&text));
    let cfg = match std::str::from_utf8(&text).map_err(|e| e.to_string()).and_then(ExperimentConfig::parse) {
        Ok(c) => c,
        Err(e) => return fail(&mut manifest, &default_dir, OpError::Validation(format!("config: {e}"))),
    };
    let dir = args.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or(default_dir);
    let op = match (op, cfg.operation.as_deref()) {
        (Some(a), Some(b)) if a != b => {
            return fail(&mut manifest, &dir, OpError::Validation(format!("config names operation `{b}` but `{a}` was invoked")));
        }
        (Some(a), _) => a.to_string(),
        (None, Some(b)) => b.to_string(),
        (None, None) => return fail(&mut manifest, &dir, OpError::Validation("config names no operation".into())),
    };
    if !ops::OPERATIONS.contains(&op.as_str()) {
        return fail(&mut manifest, &dir, OpError::Validation(format!("unknown operation `{op}`")));
    }
    manifest.operation = op.clone();
    if let Err(e) = set_workers(args.workers.or(cfg.workers)) {
        return fail(&mut manifest, &dir, OpError::Validation(e));
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    manifest.seed = Some(seed);
    let mut sub_seeds = Vec::new();
    let result = execute(&op, &cfg, seed, &mut sub_seeds);
    manifest.sub_seeds = sub_seeds;
    let (record, table) = match result {
        Ok(r) => r,
        Err(e) => return fail(&mut manifest, &dir, e),
    };
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: creating {}: {e}", dir.display());
        return EXIT_VALIDATION;
    }
    let json_name = format!("{op}.json");
    let mut files = vec![(json_name, serde_json::to_string_pretty(&record).expect("record serializes") + "\n")];
    if let Some(t) = table {
        files.push((format!("{op}.csv"), t.to_csv()));
    }
    for (name, body) in &files {
        if let Err(e) = write(&dir, name, body) {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
        manifest.outputs.push(name.clone());
    }
    if let Err(e) = write(&dir, "manifest.json", &manifest.to_json(started)) {
        eprintln!("error: {e}");
        return EXIT_VALIDATION;
    }
    println!("{op}: wrote {} to {}", manifest.outputs.join(", "), dir.display());
    0
}

fn run_verify(args: &VerifyArgs) -> u8 {
    let started = Instant::now();
    if let Err(e) = set_workers(args.workers) {
        eprintln!("error: {e}");
        return EXIT_VALIDATION;
    }
    let mut cfg = VerifyConfig {
        smoke: args.smoke,
        ..VerifyConfig::default()
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let ids: Vec<u8> = if args.criteria.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        args.criteria.clone()
    };
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|c| c.0 == **i)) {
        eprintln!("error: no criterion {bad}");
        return EXIT_VALIDATION;
    }
    let results = run_suite(&ids, &cfg, |r| println!("{}", r.line()));
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let code = if failed.is_empty() { 0 } else { EXIT_CHECK_FAILED };
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if let Some(dir) = &args.out {
        let manifest = Manifest {
            operation: "verify".into(),
            config_path: None,
            config_sha256: None,
            seed: Some(cfg.seed),
            sub_seeds: Vec::new(),
            outputs: vec!["verify.json".into()],
            errors: failed.iter().map(|n| json!({"name": "CriterionFailed", "message": n})).collect(),
            exit_code: code,
        };
        let body = serde_json::to_string_pretty(&json!({"seed": cfg.seed, "smoke": cfg.smoke, "criteria": results})).expect("serializes") + "\n";
        let res = fs::create_dir_all(dir)
            .map_err(|e| e.to_string())
            .and_then(|_| write(dir, "verify.json", &body))
            .and_then(|_| write(dir, "manifest.json", &manifest.to_json(started)));
        if let Err(e) = res {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.cmd {
        Cmd::Run(a) => run_experiment(None, a),
        Cmd::Validate(a) => run_experiment(Some("validate"), a),
        Cmd::Generator(a) => run_experiment(Some("generator"), a),
        Cmd::Dirichlet(a) => run_experiment(Some("dirichlet"), a),
        Cmd::ExitMoments(a) => run_experiment(Some("exit-moments"), a),
        Cmd::BoundaryDecay(a) => run_experiment(Some("boundary-decay"), a),
        Cmd::Harnack(a) => run_experiment(Some("harnack"), a),
        Cmd::Cone(a) => run_experiment(Some("cone"), a),
        Cmd::Hitting(a) => run_experiment(Some("hitting"), a),
        Cmd::Lyapunov(a) => run_experiment(Some("lyapunov"), a),
        Cmd::Invariant(a) => run_experiment(Some("invariant"), a),
        Cmd::FdSolve(a) => run_experiment(Some("fd-solve"), a),
        Cmd::Barrier(a) => run_experiment(Some("barrier"), a),
        Cmd::Verify(a) => run_verify(a),
    };
    ExitCode::from(code)
}
