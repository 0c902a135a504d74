//! The `scale-picard` experiment runner.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, oracle disagreement),
//! 2 invalid configuration, 3 contraction or admissibility violation,
//! 4 infeasible slope, 5 sampled bound violation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, LoadedConfig};
use crate::error::{Error, Result};
use crate::kimura::{entries_of, KimuraConstants};
use crate::oracles::{bound_verifier, bruteforce_oracle, evolution_laws, poisson_oracle, InequalityReport};
use crate::scale::{Lambda0, OvcyannikovConstants, ScaleNorm};
use crate::solver::{apriori_check, picard_solve, residual_check, ConvergenceReport};
use crate::stability::{evolution_convergence, stability_experiment};

#[derive(Debug, Parser)]
#[command(name = "scale-picard", version, about = "Picard solver for evolution equations in scales of Banach spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the hierarchy and write the trajectory and convergence tables.
    Solve(CommonArgs),
    /// Paired solves of a perturbed family against its limit.
    Stability(CommonArgs),
    /// Sample every declared bound; exit 5 on any violation.
    Verify(CommonArgs),
    /// Compare the solve with the brute-force and Poisson oracles.
    OracleCompare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `run.seed` (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONTRACTION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_VIOLATION: i32 = 5;

/// Failures of a subcommand with their exit code.
#[derive(Debug)]
pub enum Failure {
    Error(Error),
    Violation(String),
    Disagreement(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Model(_) | Error::Domain(_) | Error::MalformedConfiguration(_) => EXIT_CONFIG,
        Error::ContractionViolation { .. } | Error::Admissibility { .. } => EXIT_CONTRACTION,
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::OracleDomain(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_RUNTIME,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("bound violation: {msg}");
            EXIT_VIOLATION
        }
        Err(Failure::Disagreement(msg)) => {
            eprintln!("oracle disagreement: {msg}");
            EXIT_RUNTIME
        }
    }
}

pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let (args, f): (&CommonArgs, fn(&Context) -> std::result::Result<(), Failure>) = match &cli.command {
        Command::Solve(a) => (a, run_solve),
        Command::Stability(a) => (a, run_stability),
        Command::Verify(a) => (a, run_verify),
        Command::OracleCompare(a) => (a, run_oracle_compare),
    };
    let loaded = ExperimentConfig::load(&args.config)?;
    let ctx = Context {
        seed: loaded.config.seed(args.seed),
        loaded,
        out: args.out.clone(),
    };
    std::fs::create_dir_all(&ctx.out).map_err(Error::from)?;
    match args.threads {
        Some(0) => return Err(Error::config("--threads", "must be at least 1").into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("--threads", e.to_string()))?
            .install(|| f(&ctx)),
        None => f(&ctx),
    }
}

pub struct Context {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Header<'a> {
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    t: f64,
    level: usize,
    configuration: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    iterate: usize,
    increment: Option<f64>,
    ratio: Option<f64>,
    m_value: f64,
    apriori_margin: f64,
    radius_distance: Option<f64>,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    lambda0: Lambda0,
    lambda: f64,
    rho: f64,
    solution_horizon: f64,
    grid_end: f64,
    dt: f64,
    iterations: usize,
    converged: bool,
    tail_bound: f64,
    noise_floor: f64,
    certificate: OvcyannikovConstants,
    model_constants: &'a KimuraConstants,
    evolution_max_step: f64,
    evolution_calibration_error: f64,
    apriori_margin: f64,
    max_residual: Option<f64>,
}

fn convergence_rows(rep: &ConvergenceReport) -> Vec<ConvergenceRow> {
    let margins = rep.apriori_margins();
    (0..rep.m_values.len())
        .map(|k| ConvergenceRow {
            iterate: k,
            increment: rep.increments.get(k).copied(),
            ratio: rep.ratios.get(k).copied().flatten(),
            m_value: rep.m_values[k],
            apriori_margin: margins[k],
            radius_distance: rep.radius_distances.get(k).copied(),
        })
        .collect()
}

pub fn run_solve(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = ctx.config();
    let (setup, _) = cfg.setup()?;
    let (u, rep) = picard_solve(&setup.problem, &setup.window, &cfg.solver)?;
    let layout = setup.model.layout();
    let labels: Vec<_> = entries_of(layout, u.value(0));
    let rows = u.times().iter().zip(u.values()).flat_map(|(&t, v)| {
        labels.iter().zip(v).map(move |(e, &value)| TrajectoryRow {
            t,
            level: e.level,
            configuration: &e.configuration,
            value,
        })
    });
    write_csv(&ctx.out.join("trajectory.csv"), rows)?;
    write_csv(&ctx.out.join("convergence.csv"), convergence_rows(&rep))?;
    let apriori = apriori_check(&setup.problem, &setup.window, &u, cfg.solver.tau_samples)?;
    let residual = residual_check(&setup.problem, &setup.window, &u).ok();
    let summary = SolveSummary {
        header: Header {
            command: "solve",
            config_sha256: &ctx.loaded.sha256,
            seed: ctx.seed,
        },
        lambda0: rep.lambda0,
        lambda: rep.lambda,
        rho: rep.rho,
        solution_horizon: rep.solution_horizon,
        grid_end: rep.grid_end,
        dt: rep.dt,
        iterations: rep.iterations,
        converged: rep.converged,
        tail_bound: rep.tail_bound,
        noise_floor: rep.noise_floor,
        certificate: setup.problem.constants,
        model_constants: &setup.constants,
        evolution_max_step: setup.evolution.max_step(),
        evolution_calibration_error: setup.evolution.calibration_error(),
        apriori_margin: apriori.margin,
        max_residual: residual.map(|r| r.max_residual),
    };
    write_json(&ctx.out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct StabilityCsvRow {
    n: u32,
    perturbation: f64,
    deviation: f64,
    floor: f64,
    evolution_deviation: f64,
    lambda0: f64,
    tail_bound: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct StabilitySummary<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    lambda1: f64,
    lambda: f64,
    alpha: f64,
    t_prime: f64,
    limit_tail: f64,
    uniform_constants: OvcyannikovConstants,
    /// `s_n` strictly decreases while above the floor.
    decreasing_above_floor: bool,
    reaches_floor: bool,
}

pub fn run_stability(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = ctx.config();
    let (family, window) = cfg.family()?;
    let alpha = cfg.run.alpha.unwrap_or(window.alpha_top);
    let grid_end = cfg.solver.theta * window.solution_horizon();
    let t_prime = cfg.run.t_prime.unwrap_or(grid_end);
    let report = stability_experiment(&family, &window, alpha, t_prime, &cfg.solver)?;

    // sampled convergence of the evolution systems on a fixed set of vectors and time pairs
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let dim = family.limit.initial.len();
    let vectors: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let pairs: Vec<(f64, f64)> = (0..4)
        .map(|_| {
            let a = rng.random_range(0.0..=window.horizon);
            let b = rng.random_range(0.0..=window.horizon);
            if a <= b { (b, a) } else { (a, b) }
        })
        .collect();
    let ev_dev = evolution_convergence(&family, &vectors, &pairs, alpha);

    let indices = cfg.run.family.as_ref().map(|f| f.indices()).unwrap_or_default();
    let rows: Vec<StabilityCsvRow> = report
        .rows
        .iter()
        .zip(&indices)
        .zip(&ev_dev)
        .map(|((r, &n), &e)| StabilityCsvRow {
            n,
            perturbation: r.perturbation,
            deviation: r.deviation,
            floor: r.floor,
            evolution_deviation: e,
            lambda0: r.lambda0,
            tail_bound: r.tail_bound,
            iterations: r.iterations,
        })
        .collect();
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].deviation <= w[1].floor || w[1].deviation < w[0].deviation);
    let reaches = rows.iter().any(|r| r.deviation <= r.floor);
    write_csv(&ctx.out.join("stability.csv"), &rows)?;
    let summary = StabilitySummary {
        header: Header {
            command: "stability",
            config_sha256: &ctx.loaded.sha256,
            seed: ctx.seed,
        },
        lambda1: report.lambda1,
        lambda: report.lambda,
        alpha,
        t_prime,
        limit_tail: report.limit_tail,
        uniform_constants: report.uniform_constants,
        decreasing_above_floor: decreasing,
        reaches_floor: reaches,
    };
    write_json(&ctx.out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow<'a> {
    suite: &'a str,
    check: &'a str,
    samples: usize,
    worst_ratio: f64,
    worst_sample: usize,
    violations: usize,
    gating: bool,
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    samples: usize,
    lambda0: Lambda0,
    certificate: OvcyannikovConstants,
    checks: Vec<VerifyRow<'a>>,
    max_residual: Option<f64>,
    failures: Vec<String>,
}

fn single(name: &str, ratio: f64, gating: bool) -> InequalityReport {
    InequalityReport {
        name: name.into(),
        samples: 1,
        worst_ratio: ratio,
        worst_sample: 0,
        violations: usize::from(ratio > 1.0 + crate::oracles::RATIO_SLACK),
        gating,
    }
}

pub fn run_verify(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = ctx.config();
    let samples = cfg.run.samples.unwrap_or(100);
    let (setup, k0) = cfg.setup()?;
    let consts = setup.problem.constants;
    let bounds = bound_verifier(&setup.model, &setup.window, &k0, &consts, &setup.evolution, samples, ctx.seed)?;
    let laws = evolution_laws(&setup.model, &setup.window, &setup.evolution, samples, ctx.seed)?;

    let mut solve_checks = Vec::new();
    let mut max_residual = None;
    match picard_solve(&setup.problem, &setup.window, &cfg.solver) {
        Ok((u, rep)) => {
            let worst = rep.ratios.iter().flatten().fold(0.0f64, |a, &r| a.max(r));
            solve_checks.push(single("contraction", worst / rep.rho, true));
            let ap = apriori_check(&setup.problem, &setup.window, &u, cfg.solver.tau_samples)?;
            solve_checks.push(single(
                "apriori",
                if ap.bound > 0.0 { ap.worst_value / ap.bound } else { f64::INFINITY },
                true,
            ));
            let level0 = u.values().iter().fold(0.0f64, |a, v| a.max((v[0] - 1.0).abs()));
            solve_checks.push(single("normalization", level0 / 1e-12, true));
            max_residual = residual_check(&setup.problem, &setup.window, &u).ok().map(|r| r.max_residual);
        }
        Err(e @ (Error::ContractionViolation { .. } | Error::Admissibility { .. })) => {
            let name = if matches!(e, Error::ContractionViolation { .. }) { "contraction" } else { "admissibility" };
            eprintln!("solve failed: {e}");
            solve_checks.push(single(name, f64::INFINITY, true));
        }
        Err(e) => return Err(e.into()),
    }

    let suites = [("bounds", &bounds.checks), ("evolution", &laws.checks), ("solve", &solve_checks)];
    let rows: Vec<VerifyRow> = suites
        .iter()
        .flat_map(|(suite, checks)| {
            checks.iter().map(move |c| VerifyRow {
                suite,
                check: &c.name,
                samples: c.samples,
                worst_ratio: c.worst_ratio,
                worst_sample: c.worst_sample,
                violations: c.violations,
                gating: c.gating,
            })
        })
        .collect();
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| r.gating && r.violations > 0)
        .map(|r| format!("{} ({} of {} samples, worst ratio {})", r.check, r.violations, r.samples, r.worst_ratio))
        .collect();
    write_csv(&ctx.out.join("verify.csv"), &rows)?;
    let summary = VerifySummary {
        header: Header {
            command: "verify",
            config_sha256: &ctx.loaded.sha256,
            seed: ctx.seed,
        },
        samples,
        lambda0: setup.lambda0,
        certificate: consts,
        checks: rows,
        max_residual,
        failures: failures.clone(),
    };
    write_json(&ctx.out.join("summary.json"), &summary)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(failures.join("; ")))
    }
}

#[derive(Serialize)]
struct OracleRow {
    t: f64,
    bruteforce_deviation: f64,
    poisson_deviation: Option<f64>,
    poisson_vs_bruteforce: Option<f64>,
    level0_deviation: f64,
}

#[derive(Serialize)]
struct OracleSummary<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    tolerance: f64,
    grid_end: f64,
    max_bruteforce_deviation: f64,
    max_poisson_deviation: Option<f64>,
    max_poisson_vs_bruteforce: Option<f64>,
    poisson_skipped: Option<String>,
    bruteforce_halving_difference: f64,
    bruteforce_halving_ratio: Option<f64>,
    bruteforce_warning: Option<String>,
    max_level0_deviation: f64,
    agree: bool,
}

/// Relative deviation threshold the Poisson oracle itself must meet against brute force.
const POISSON_VALIDATION: f64 = 1e-8;

pub fn run_oracle_compare(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = ctx.config();
    let tolerance = cfg.run.oracle_tolerance.unwrap_or(1e-6);
    let (setup, k0) = cfg.setup()?;
    let (u, rep) = picard_solve(&setup.problem, &setup.window, &cfg.solver)?;
    let model = &setup.model;
    let norm = model.norm();
    let alpha = setup.window.alpha_top;
    let rel = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm.norm(&d, alpha) / norm.norm(b, alpha)
    };
    let bf = bruteforce_oracle(model, &k0, rep.grid_end, u.times().len() - 1)?;
    let rho0 = cfg.initial_density()?;
    let mut skipped = None;
    let mut rows = Vec::with_capacity(u.times().len());
    for (j, &t) in u.times().iter().enumerate() {
        let (pd, pb) = match poisson_oracle(model, &rho0, t) {
            Ok(o) => (Some(rel(u.value(j), o.values())), Some(rel(&bf.values[j], o.values()))),
            Err(Error::OracleDomain(msg)) => {
                skipped = Some(msg);
                (None, None)
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(OracleRow {
            t,
            bruteforce_deviation: rel(u.value(j), &bf.values[j]),
            poisson_deviation: pd,
            poisson_vs_bruteforce: pb,
            level0_deviation: (u.value(j)[0] - 1.0).abs(),
        });
    }
    let max_of = |f: &dyn Fn(&OracleRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::max);
    let max_bf = max_of(&|r| Some(r.bruteforce_deviation)).unwrap_or(0.0);
    let max_p = max_of(&|r| r.poisson_deviation);
    let max_pb = max_of(&|r| r.poisson_vs_bruteforce);
    let max_l0 = max_of(&|r| Some(r.level0_deviation)).unwrap_or(0.0);
    let mut problems = Vec::new();
    if max_bf > tolerance {
        problems.push(format!("brute force deviation {max_bf:e} exceeds {tolerance:e}"));
    }
    if let Some(pb) = max_pb {
        if pb > POISSON_VALIDATION {
            problems.push(format!("Poisson oracle fails brute-force validation: {pb:e} > {POISSON_VALIDATION:e}"));
        }
    }
    if let Some(p) = max_p {
        if p > tolerance {
            problems.push(format!("Poisson deviation {p:e} exceeds {tolerance:e}"));
        }
    }
    if max_l0 > 1e-12 {
        problems.push(format!("k(empty) drifted by {max_l0:e}"));
    }
    write_csv(&ctx.out.join("oracle.csv"), &rows)?;
    let summary = OracleSummary {
        header: Header {
            command: "oracle-compare",
            config_sha256: &ctx.loaded.sha256,
            seed: ctx.seed,
        },
        tolerance,
        grid_end: rep.grid_end,
        max_bruteforce_deviation: max_bf,
        max_poisson_deviation: max_p,
        max_poisson_vs_bruteforce: max_pb,
        poisson_skipped: skipped,
        bruteforce_halving_difference: bf.halving_difference,
        bruteforce_halving_ratio: bf.halving_ratio,
        bruteforce_warning: bf.warning,
        max_level0_deviation: max_l0,
        agree: problems.is_empty(),
    };
    write_json(&ctx.out.join("summary.json"), &summary)?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Disagreement(problems.join("; ")))
    }
}
