//! Batch front end: reads a run configuration, executes one command and
//! writes `result.json` plus CSV tables to the output directory.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use barrier_core::estimators::{estimate_rho, estimate_rho_curve, estimate_value};
use barrier_core::oracle::SpectrallyNegativeOracle;
use barrier_core::path::simulate_batch;
use barrier_core::solver::{barrier_sweep, solve_barrier, solve_barrier_perturbed, BarrierResult};
use barrier_core::verify::{CheckReport, Verifier};
use barrier_core::Error;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{CheckKind, ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "barrier", version, about = "Optimal reflecting barriers for Levy models by Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config entry, e.g. `--set sim.n_paths=2000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Also write the simulated paths (started at 0) to `paths.csv`.
    #[arg(long, global = true)]
    dump_paths: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Optimal barrier b*.
    Solve,
    /// Value v_b(x) for `[value]`.
    Value,
    /// rho(b) over `[rho].b_grid`.
    Rho,
    /// v_b(x) over `[sweep].b_grid` on shared paths.
    Sweep,
    /// Structural checks of the solved barrier.
    Verify,
    /// Barriers of the drift-perturbed compound Poisson model.
    Perturb,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Value => "value",
            Command::Rho => "rho",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Perturb => "perturb",
        }
    }
}

enum Failure {
    Config(String),
    Core(Error),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Core(e) => match e {
                Error::InvalidModel(_) | Error::NonConvexSpec(_) | Error::InvalidConfig(_) => 2,
                Error::NoSignChange { .. } | Error::AssumptionViolated(_) | Error::NotSpectrallyNegative => 3,
                Error::NonFiniteSample(_) | Error::RootNotFound(_) => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) | Failure::Io(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

/// Outcome of one command before it is written out.
struct Output {
    result: Value,
    tables: Vec<(String, String)>,
    summary: String,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("sim.seed={s}"));
    }
    if let Some(n) = cli.paths {
        overrides.push(format!("sim.n_paths={n}"));
    }
    if let Some(dt) = cli.dt {
        overrides.push(format!("sim.dt={dt:?}"));
    }
    if let Some(t) = cli.horizon {
        overrides.push(format!("sim.horizon={t:?}"));
    }
    let cfg = RunConfig::load(path, &overrides)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Io(format!("cannot create output directory {}: {e}", cli.out.display())))?;

    let out = match cli.command {
        Command::Solve => cmd_solve(&cfg)?,
        Command::Value => cmd_value(&cfg)?,
        Command::Rho => cmd_rho(&cfg)?,
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::Verify => cmd_verify(&cfg)?,
        Command::Perturb => cmd_perturb(&cfg)?,
    };

    if cli.dump_paths {
        let problem = cfg.problem()?;
        let batch = simulate_batch(&cfg.triplet()?, 0.0, &cfg.sim_config(problem.q)?)?;
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).expect("writing to memory");
        write(&cli.out, "paths.csv", &buf)?;
    }

    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let doc = json!({
        "command": cli.command.name(),
        "config": cfg,
        "provenance": {
            "config_path": path.display().to_string(),
            "overrides": overrides,
            "version": env!("CARGO_PKG_VERSION"),
        },
        "result": out.result,
        "metadata": { "unix_timestamp": timestamp },
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
    text.push('\n');
    write(&cli.out, "result.json", text.as_bytes())?;
    for (name, body) in &out.tables {
        write(&cli.out, name, body.as_bytes())?;
    }
    Ok(out.summary)
}

fn write(dir: &Path, name: &str, body: &[u8]) -> Result<(), Failure> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display())))
}

fn to_json<S: serde::Serialize>(v: &S) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn solve(cfg: &RunConfig) -> Result<BarrierResult<f64>, Failure> {
    let problem = cfg.problem()?;
    Ok(solve_barrier(&cfg.triplet()?, &problem, &cfg.sim_config(problem.q)?, cfg.solve.bisect_tol)?)
}

fn cmd_solve(cfg: &RunConfig) -> Result<Output, Failure> {
    let r = solve(cfg)?;
    let mut result = to_json(&r);
    let triplet = cfg.triplet()?;
    let problem = cfg.problem()?;
    if problem.cost.is_quadratic() {
        if let Ok(oracle) = SpectrallyNegativeOracle::new(&triplet) {
            if let Ok(b) = oracle.quadratic_bstar_closed_form(&problem) {
                result["closed_form_b_star"] = json!(b);
            }
        }
    }
    if cfg.problem.mollify.is_some() {
        let base = cfg.base_problem()?;
        let plain = solve_barrier(&triplet, &base, &cfg.sim_config(base.q)?, cfg.solve.bisect_tol)?;
        result["unmollified"] = to_json(&plain);
    }
    let summary = format!("b* = {:.6} ± {:.2e} ({} iterations)", r.b_star, r.ci_halfwidth, r.iterations);
    Ok(Output { result, tables: vec![], summary })
}

fn cmd_value(cfg: &RunConfig) -> Result<Output, Failure> {
    let section = cfg.value.as_ref().ok_or_else(|| Failure::Config("value: section is required".into()))?;
    let b = match section.b {
        Some(b) => b,
        None => solve(cfg)?.b_star,
    };
    let problem = cfg.problem()?;
    let v = estimate_value(&cfg.triplet()?, &problem, b, section.x, &cfg.sim_config(problem.q)?, None)?;
    let estimate = |e: &barrier_core::Estimate64, kind: &str| {
        json!({ "kind": kind, "b": b, "x": section.x, "mean": e.mean, "stderr": e.stderr, "n": e.n,
                "fingerprint": e.fingerprint })
    };
    let result = json!({
        "b": b,
        "x": section.x,
        "value": estimate(&v.v, "value"),
        "running_cost": estimate(&v.v1, "running_cost"),
        "control": estimate(&v.v2, "control"),
    });
    let summary = format!("v_b(x) = {:.6} ± {:.2e} at b = {b:.6}, x = {}", v.v.mean, v.v.stderr, section.x);
    Ok(Output { result, tables: vec![], summary })
}

fn cmd_rho(cfg: &RunConfig) -> Result<Output, Failure> {
    let section = cfg.rho.as_ref().ok_or_else(|| Failure::Config("rho: section is required".into()))?;
    let (triplet, problem) = (cfg.triplet()?, cfg.problem()?);
    let sim = cfg.sim_config(problem.q)?;
    let method = cfg.rho_method();
    let points = match method {
        barrier_core::estimators::RhoMethod::TimeIntegral => estimate_rho_curve(&triplet, &problem, &section.b_grid, &sim)?,
        // separate exponential clocks per barrier; no monotonicity guarantee
        barrier_core::estimators::RhoMethod::ExpClock => section
            .b_grid
            .iter()
            .map(|&b| Ok((b, estimate_rho(&triplet, &problem, b, &sim, method)?)))
            .collect::<Result<Vec<_>, Error>>()?,
    };
    let mut csv = String::from("b,rho_mean,rho_stderr\n");
    for (b, e) in &points {
        csv.push_str(&format!("{b},{},{}\n", e.mean, e.stderr));
    }
    let rows: Vec<Value> = points
        .iter()
        .map(|(b, e)| {
            json!({ "kind": "rho", "b": b, "mean": e.mean, "stderr": e.stderr, "n": e.n, "fingerprint": e.fingerprint,
                    "rejection_rate": e.rejection_rate })
        })
        .collect();
    let summary = format!("rho estimated at {} barriers", points.len());
    Ok(Output { result: json!({ "method": section.method, "points": rows }), tables: vec![("rho.csv".into(), csv)], summary })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Output, Failure> {
    let section = cfg.sweep.as_ref().ok_or_else(|| Failure::Config("sweep: section is required".into()))?;
    let problem = cfg.problem()?;
    let s = barrier_sweep(&cfg.triplet()?, &problem, section.x, &section.b_grid, &cfg.sim_config(problem.q)?)?;
    let mut csv = String::from("b,v_mean,v_stderr\n");
    for (b, e) in &s.points {
        csv.push_str(&format!("{b},{},{}\n", e.mean, e.stderr));
    }
    let argmin = (0..s.points.len())
        .min_by(|&i, &j| s.points[i].1.mean.partial_cmp(&s.points[j].1.mean).expect("finite values"))
        .expect("nonempty sweep");
    let rows: Vec<Value> = s
        .points
        .iter()
        .map(|(b, e)| {
            json!({ "kind": "value", "b": b, "x": s.x, "mean": e.mean, "stderr": e.stderr, "n": e.n,
                    "fingerprint": e.fingerprint })
        })
        .collect();
    let summary = format!("minimum of v_b({}) over the sweep at b = {}", s.x, s.points[argmin].0);
    Ok(Output {
        result: json!({ "x": s.x, "points": rows, "argmin_b": s.points[argmin].0 }),
        tables: vec![("sweep.csv".into(), csv)],
        summary,
    })
}

fn cmd_verify(cfg: &RunConfig) -> Result<Output, Failure> {
    let (triplet, problem) = (cfg.triplet()?, cfg.problem()?);
    let sim = cfg.sim_config(problem.q)?;
    let v = &cfg.verify;
    let verifier = match v.b {
        Some(b) => Verifier::with_barrier(&triplet, &problem, &sim, b),
        None => Verifier::solve(&triplet, &problem, &sim, cfg.solve.bisect_tol)?,
    };
    let b = verifier.b_star();
    let x = v.x.unwrap_or(b + 0.5);
    let grid = v.x_grid.clone().unwrap_or_else(|| (-4..=14).map(|k| b + 0.25 * f64::from(k)).collect());
    let mut reports: Vec<CheckReport<f64>> = Vec::new();
    for kind in &v.checks {
        match kind {
            CheckKind::BarrierDerivative => reports.push(verifier.check_barrier_derivative(x, b, v.h)?),
            CheckKind::SlopeIdentity => {
                reports.push(verifier.check_slope_identity(x, b, v.h)?);
            }
            CheckKind::Convexity => reports.push(verifier.check_convexity(&grid)?),
            CheckKind::Martingale => reports.push(verifier.check_martingale(x, &v.t_grid, v.h)?),
            CheckKind::Hjb => reports.extend(verifier.check_hjb(&grid, v.fd_h)?),
        }
    }
    let tables = reports
        .iter()
        .map(|r| {
            let mut buf = Vec::new();
            r.write_csv(&mut buf).expect("writing to memory");
            (format!("verify_{}.csv", r.name), String::from_utf8(buf).expect("utf-8 csv"))
        })
        .collect();
    let passed = reports.iter().filter(|r| r.passed).count();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let mut summary = format!("{passed}/{} checks passed at b* = {b:.6}", reports.len());
    if !failed.is_empty() {
        summary.push_str(&format!(" (failed: {})", failed.join(", ")));
    }
    let result = json!({ "b_star": b, "barrier": verifier.barrier(), "reports": reports });
    Ok(Output { result, tables, summary })
}

fn cmd_perturb(cfg: &RunConfig) -> Result<Output, Failure> {
    let (triplet, problem) = (cfg.triplet()?, cfg.problem()?);
    let sim = cfg.sim_config(problem.q)?;
    let r = solve_barrier_perturbed(&triplet, &problem, &sim, &cfg.perturb.eps_grid, cfg.solve.bisect_tol)?;
    let eps_sequence: Vec<Value> =
        r.levels.iter().map(|(e, l)| json!({ "eps": e, "b_star": l.b_star, "ci_halfwidth": l.ci_halfwidth })).collect();
    let last = &r.levels.last().expect("nonempty grid").1;
    let result = json!({
        "b_star": r.b_star,
        "bracket": last.bracket,
        "iterations": last.iterations,
        "ci_halfwidth": last.ci_halfwidth,
        "monotone": r.monotone,
        "eps_sequence": eps_sequence,
        "levels": r.levels,
    });
    let summary = format!(
        "b* = {:.6} ± {:.2e} at eps = {} ({})",
        r.b_star,
        last.ci_halfwidth,
        r.levels.last().expect("nonempty grid").0,
        if r.monotone { "monotone in eps" } else { "NOT monotone in eps" }
    );
    Ok(Output { result, tables: vec![], summary })
}
