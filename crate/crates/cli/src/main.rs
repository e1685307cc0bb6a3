//! `jamming`: command-line driver.
//!
//! Exit status: 0 on success, 1 when a judged check fails, 2 on invalid
//! input or I/O failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use jamming_core::bounds::{lp_sup_bound, ErrorBudget};
use jamming_core::chain::{batch_hitting_steps, simulate};
use jamming_core::ctime::{batch_sup_deviations, simulate_ctime, solve_ctime_fluid, solve_ctime_variance, CtimeModel};
use jamming_core::diffusion::{clt_prediction, simulate_w_paths, solve_variance_ode, LinearSde};
use jamming_core::fluid::{solve_fluid, HitKind};
use jamming_core::graph::{batch_active_counts, explore_er_graph};
use jamming_core::io::{
    to_json, write_ctime_csv, write_diffusion_csv, write_fluid_csv, write_json, write_samples_csv,
    write_trajectory_csv, BatchSummary,
};
use jamming_core::kernel::LimitEvaluator;
use jamming_core::stats::{ks_critical_value, run_clt_experiment, run_lln_experiment, Verdict};
use jamming_core::validate::{run_preset, Preset};
use jamming_core::{Error, LimitFunctions, Result};

use config::{FileConfig, Settings};

const DEFAULT_VALIDATE_SEED: u64 = 20_240_917;

#[derive(Debug, Parser)]
#[command(name = "jamming", version, about = "Greedy exploration: simulation, fluid and diffusion limits, checks")]
struct Cli {
    /// TOML experiment file; flags and JAMMING_* variables take precedence.
    #[arg(long, global = true, env = "JAMMING_CONFIG")]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts; nothing is written without it.
    #[arg(long, global = true, env = "JAMMING_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "JAMMING_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the exploration chain.
    Simulate(Params),
    /// Explore explicit G(N, c/N) graphs.
    Graph(Params),
    /// Solve the fluid ODE.
    Fluid(Params),
    /// Solve the variance ODE of the diffusion limit.
    Diffusion(Params),
    /// CLT experiment for the hitting time.
    Clt(Params),
    /// LLN experiment: sup deviation from the fluid path.
    Lln(Params),
    /// Print the error budget.
    Bounds(Params),
    /// Continuous-time model.
    Ctime(Params),
    /// Run a preset validation suite.
    Validate(Params),
}

#[derive(Debug, Args)]
struct Params {
    /// Number of items.
    #[arg(long = "N", env = "JAMMING_N")]
    n: Option<usize>,
    /// Mean degree of the Erdős–Rényi kernel.
    #[arg(long, env = "JAMMING_C")]
    c: Option<f64>,
    #[arg(long, env = "JAMMING_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "JAMMING_RUNS")]
    runs: Option<usize>,
    /// ODE step.
    #[arg(long, env = "JAMMING_DT")]
    dt: Option<f64>,
    /// Integration horizon.
    #[arg(long = "tmax", env = "JAMMING_TMAX")]
    t_max: Option<f64>,
    /// Per-item activation rate (continuous time).
    #[arg(long, env = "JAMMING_LAMBDA")]
    lambda: Option<f64>,
    /// Horizon `T` of the error budget.
    #[arg(long, env = "JAMMING_HORIZON")]
    horizon: Option<f64>,
    /// Exponent of the L^p bound.
    #[arg(long, env = "JAMMING_P")]
    p: Option<f64>,
    /// Euler–Maruyama paths for the diffusion cross-check.
    #[arg(long, env = "JAMMING_PATHS")]
    paths: Option<usize>,
    /// Validation preset (er-c1, er-c2).
    #[arg(long, env = "JAMMING_PRESET")]
    preset: Option<String>,
}

enum Outcome {
    Done,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn settings(cli: &Cli, params: &Params) -> Result<(Settings, Option<usize>)> {
    let (file, base_dir) = match &cli.config {
        Some(path) => (
            FileConfig::load(path)?,
            path.parent().map(Path::to_path_buf),
        ),
        None => (FileConfig::default(), None),
    };
    let s = Settings {
        n: params.n,
        c: params.c,
        seed: params.seed.or(file.seed),
        runs: params.runs.or(file.runs),
        dt: params.dt.or(file.dt),
        t_max: params.t_max.or(file.t_max),
        lambda: params.lambda.or(file.lambda),
        horizon: params.horizon.or(file.horizon),
        p: params.p.or(file.p),
        paths: params.paths.or(file.paths),
        preset: params.preset.clone().or(file.preset),
        output_dir: cli.output_dir.clone().or(file.output_dir),
        kernel: file.kernel,
        base_dir,
    };
    Ok((s, cli.threads.or(file.threads)))
}

fn run(cli: Cli) -> Result<Outcome> {
    let params = match &cli.command {
        Command::Simulate(p)
        | Command::Graph(p)
        | Command::Fluid(p)
        | Command::Diffusion(p)
        | Command::Clt(p)
        | Command::Lln(p)
        | Command::Bounds(p)
        | Command::Ctime(p)
        | Command::Validate(p) => p,
    };
    let (s, threads) = settings(&cli, params)?;
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(dir) = &s.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    match cli.command {
        Command::Simulate(_) => cmd_simulate(&s),
        Command::Graph(_) => cmd_graph(&s),
        Command::Fluid(_) => cmd_fluid(&s),
        Command::Diffusion(_) => cmd_diffusion(&s),
        Command::Clt(_) => cmd_clt(&s),
        Command::Lln(_) => cmd_lln(&s),
        Command::Bounds(_) => cmd_bounds(&s),
        Command::Ctime(_) => cmd_ctime(&s),
        Command::Validate(_) => cmd_validate(&s),
    }
}

fn artifact(s: &Settings, name: &str) -> Option<PathBuf> {
    s.output_dir.as_ref().map(|d| d.join(name))
}

fn emit<T: Serialize>(s: &Settings, name: &str, value: &T) -> Result<()> {
    println!("{}", to_json(value)?);
    if let Some(path) = artifact(s, name) {
        write_json(&path, value)?;
    }
    Ok(())
}

/// Limit functions from `--c` alone, or from the configured kernel.
fn limits(s: &Settings) -> Result<LimitEvaluator> {
    match (s.er_c(), &s.kernel) {
        (Some(c), _) => {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
            }
            Ok(LimitFunctions::erdos_renyi(c).evaluator())
        }
        (None, Some(_)) => Ok(s.kernel()?.limit_eval().clone()),
        (None, None) => Err(Error::Config("missing --c or a kernel block".into())),
    }
}

fn t_max(s: &Settings, default: f64) -> f64 {
    s.t_max.unwrap_or(default)
}

fn cmd_simulate(s: &Settings) -> Result<Outcome> {
    let kernel = s.kernel()?;
    let seed = s.seed()?;
    let runs = s.runs(1)?;
    if let Some(path) = artifact(s, "trajectory.csv") {
        write_trajectory_csv(&path, &simulate(&kernel, seed, 0))?;
    }
    let steps = batch_hitting_steps(&kernel, runs, seed);
    if let Some(path) = artifact(s, "hitting_fractions.csv") {
        let fractions: Vec<f64> = steps.iter().map(|&k| k as f64 / kernel.n() as f64).collect();
        write_samples_csv(&path, "hitting_fraction", &fractions)?;
    }
    let summary = BatchSummary::from_counts(&steps, kernel.n(), kernel.er_parameter(), seed, "chain");
    emit(s, "summary.json", &summary)?;
    Ok(Outcome::Done)
}

fn cmd_graph(s: &Settings) -> Result<Outcome> {
    let kernel = s.kernel()?;
    let (n, c) = match kernel.er_parameter() {
        Some(c) => (kernel.n(), c),
        None => return Err(Error::Config("graph exploration needs an Erdős–Rényi kernel".into())),
    };
    let seed = s.seed()?;
    let runs = s.runs(1)?;
    let first = explore_er_graph(n, c, seed, 0)?;
    if let Some(path) = artifact(s, "graph_run.json") {
        write_json(&path, &first)?;
    }
    let counts = batch_active_counts(n, c, runs, seed)?;
    emit(s, "summary.json", &BatchSummary::from_counts(&counts, n, Some(c), seed, "graph"))?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct FluidReport {
    #[serde(rename = "T_star")]
    t_star: f64,
    dt: f64,
    points: usize,
    hit: HitKind,
}

fn cmd_fluid(s: &Settings) -> Result<Outcome> {
    let lim = limits(s)?;
    let sol = solve_fluid(&lim, s.dt(), t_max(s, 100.0))?;
    if let Some(path) = artifact(s, "fluid.csv") {
        write_fluid_csv(&path, &sol)?;
    }
    let report = FluidReport {
        t_star: sol.t_star(),
        dt: sol.dt(),
        points: sol.z_values().len(),
        hit: sol.hit_kind(),
    };
    emit(s, "fluid.json", &report)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct DiffusionReport {
    #[serde(rename = "T_star")]
    t_star: f64,
    m_at_t_star: f64,
    sigma_sq: Option<f64>,
    /// Euler–Maruyama variance at `T*`, when paths were requested.
    em_variance_at_t_star: Option<f64>,
}

fn cmd_diffusion(s: &Settings) -> Result<Outcome> {
    let lim = limits(s)?;
    let fluid = solve_fluid(&lim, s.dt(), t_max(s, 100.0))?;
    let sol = solve_variance_ode(&fluid, &lim)?;
    if let Some(path) = artifact(s, "diffusion.csv") {
        write_diffusion_csv(&path, &sol)?;
    }
    let em = match s.paths {
        Some(paths) => {
            let sde = LinearSde::fluctuation(&fluid, &lim);
            let moments = simulate_w_paths(&sde, fluid.t_star(), s.dt().min(1e-3), paths, s.seed()?)?;
            moments.variance.last().copied()
        }
        None => None,
    };
    emit(
        s,
        "diffusion.json",
        &DiffusionReport {
            t_star: sol.t_star(),
            m_at_t_star: sol.m_at_t_star(),
            sigma_sq: sol.sigma_sq(),
            em_variance_at_t_star: em,
        },
    )?;
    Ok(Outcome::Done)
}

fn cmd_clt(s: &Settings) -> Result<Outcome> {
    let kernel = s.kernel()?;
    let seed = s.seed()?;
    let runs = s.runs(2000)?;
    let fluid = solve_fluid(kernel.limit_eval(), s.dt(), t_max(s, 100.0))?;
    let diffusion = solve_variance_ode(&fluid, kernel.limit_eval())?;
    let prediction = clt_prediction(&kernel, &fluid, &diffusion)?;
    let summary = run_clt_experiment(&kernel, runs, seed, prediction)?;
    if let Some(path) = artifact(s, "clt_samples.csv") {
        write_samples_csv(&path, "clt_sample", &summary.clt_samples)?;
    }
    let var_ok = (summary.clt_var / prediction.sigma_sq - 1.0).abs() <= 0.15;
    let mean_ok = summary.clt_mean.abs() <= 3.0 * (prediction.sigma_sq / runs as f64).sqrt();
    let ks_ok = summary.ks_stat.is_some_and(|k| k < ks_critical_value(runs, 0.01));
    let pass = var_ok && mean_ok && ks_ok;
    emit(s, "verdict.json", &Verdict::new("clt", &kernel, &summary, pass))?;
    Ok(if pass { Outcome::Done } else { Outcome::CheckFailed })
}

fn cmd_lln(s: &Settings) -> Result<Outcome> {
    let kernel = s.kernel()?;
    let seed = s.seed()?;
    let runs = s.runs(500)?;
    let summary = run_lln_experiment(&kernel, runs, seed)?;
    let budget = ErrorBudget::new(&kernel, 1.0)?;
    let pass = summary.sup_dev_mean.is_some_and(|d| d <= budget.omega_n);
    #[derive(Serialize)]
    struct LlnReport {
        #[serde(flatten)]
        verdict: Verdict,
        sup_dev_mean: Option<f64>,
        omega_n: f64,
    }
    emit(
        s,
        "verdict.json",
        &LlnReport {
            verdict: Verdict::new("lln", &kernel, &summary, pass),
            sup_dev_mean: summary.sup_dev_mean,
            omega_n: budget.omega_n,
        },
    )?;
    Ok(if pass { Outcome::Done } else { Outcome::CheckFailed })
}

fn cmd_bounds(s: &Settings) -> Result<Outcome> {
    let kernel = s.kernel()?;
    let horizon = s.horizon.unwrap_or(1.0);
    let budget = ErrorBudget::new(&kernel, horizon)?;
    match s.p {
        Some(p) if p != 2.0 => {
            #[derive(Serialize)]
            struct WithLp {
                #[serde(flatten)]
                budget: ErrorBudget,
                p: f64,
                lp_bound_needs_norm: bool,
            }
            // Validates p; other exponents need an empirical norm.
            lp_sup_bound(&kernel, horizon, p, Some(0.0))?;
            emit(s, "bounds.json", &WithLp { budget, p, lp_bound_needs_norm: true })?;
        }
        _ => emit(s, "bounds.json", &budget)?,
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct CtimeReport {
    #[serde(rename = "N")]
    n: usize,
    lambda: f64,
    runs: usize,
    horizon: f64,
    soft_hit: f64,
    m_at_horizon: f64,
    sup_dev_mean: f64,
    sup_dev_max: f64,
    alpha_n: f64,
    c_n: f64,
    seed: u64,
}

fn cmd_ctime(s: &Settings) -> Result<Outcome> {
    let model = CtimeModel::new(s.kernel()?, s.lambda.unwrap_or(1.0))?;
    let seed = s.seed()?;
    let runs = s.runs(1)?;
    let horizon = t_max(s, 3.0);
    let fluid = solve_ctime_fluid(&model, s.dt(), horizon)?;
    let variance = solve_ctime_variance(&model, &fluid)?;
    if let Some(path) = artifact(s, "ctime.csv") {
        write_ctime_csv(&path, &simulate_ctime(&model, seed, 0))?;
    }
    if let Some(path) = artifact(s, "ctime_fluid.csv") {
        write_fluid_csv(&path, &fluid)?;
    }
    if let Some(path) = artifact(s, "ctime_diffusion.csv") {
        write_diffusion_csv(&path, &variance)?;
    }
    let devs = batch_sup_deviations(&model, &fluid, horizon, runs, seed);
    let report = CtimeReport {
        n: model.kernel().n(),
        lambda: model.lambda(),
        runs,
        horizon,
        soft_hit: fluid.t_star(),
        m_at_horizon: variance.m(horizon),
        sup_dev_mean: devs.iter().sum::<f64>() / runs as f64,
        sup_dev_max: devs.iter().copied().fold(0.0, f64::max),
        alpha_n: model.alpha_n(),
        c_n: model.c_n(),
        seed,
    };
    emit(s, "ctime.json", &report)?;
    Ok(Outcome::Done)
}

fn cmd_validate(s: &Settings) -> Result<Outcome> {
    let preset = Preset::parse(s.preset.as_deref().unwrap_or("er-c1"))?;
    let seed = s.seed.unwrap_or(DEFAULT_VALIDATE_SEED);
    let results = run_preset(preset, seed)?;
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(path) = artifact(s, "validate.json") {
        write_json(&path, &results)?;
    }
    let failed = results.iter().any(|r| !r.pass && !r.informational);
    Ok(if failed { Outcome::CheckFailed } else { Outcome::Done })
}
