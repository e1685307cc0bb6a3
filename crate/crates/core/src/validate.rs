//! Validation checks against closed forms and Monte Carlo targets.
//!
//! Each check returns a [`CheckResult`] with its measured quantities, so the
//! same code backs the `validate` command and the acceptance tests.

use serde::Serialize;

use crate::bounds::omega;
use crate::chain::{batch_hitting_steps, martingale_batch};
use crate::ctime::{batch_sup_deviations, solve_ctime_fluid, solve_ctime_variance, CtimeModel};
use crate::diffusion::{
    clt_prediction, er_sigma_sq, er_variance_closed_form, solve_variance_ode,
};
use crate::error::{Error, Result};
use crate::fluid::{er_closed_form, er_fluid_value, er_t_star, solve_fluid, DEFAULT_DT};
use crate::graph::batch_active_counts;
use crate::kernel::{poisson_approximation, Kernel, LimitFunctions};
use crate::stats::{
    ks_critical_value, ks_two_sample, ks_two_sample_critical_value, run_clt_experiment,
    run_lln_experiment,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub metrics: Vec<(String, f64)>,
    /// Reported but not judged.
    pub informational: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass: true,
            metrics: Vec::new(),
            informational: false,
        }
    }

    fn record(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.push((key.into(), value));
    }

    fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// One line: `PASS name key=value ...`.
    pub fn line(&self) -> String {
        let tag = match (self.informational, self.pass) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        format!("{tag} {} {}", self.name, metrics.join(" "))
    }
}

/// RK4 fluid path vs `rho (1 - e^{-ct})`: sup error and `T*` error below 1e-8.
pub fn fluid_oracle(cs: &[f64]) -> Result<CheckResult> {
    let mut check = CheckResult::new("fluid_oracle");
    for &c in cs {
        let sol = solve_fluid(&LimitFunctions::erdos_renyi(c).evaluator(), DEFAULT_DT, 100.0)?;
        let sup = sol
            .times()
            .zip(sol.z_values())
            .map(|(t, z)| (z - er_fluid_value(c, t)).abs())
            .fold(0.0, f64::max);
        let t_err = (sol.t_star() - er_t_star(c)).abs();
        check.record(format!("c={c}:sup_err"), sup);
        check.record(format!("c={c}:t_star_err"), t_err);
        check.require(sup < 1e-8 && t_err < 1e-8);
    }
    Ok(check)
}

/// Variance ODE vs the Erdős–Rényi closed form: sup error below 1e-6 and
/// `sigma_sq` within 1e-8 of `c / (2 (c + 1)^2)`.
pub fn variance_oracle(cs: &[f64]) -> Result<CheckResult> {
    let mut check = CheckResult::new("variance_oracle");
    for &c in cs {
        let lim = LimitFunctions::erdos_renyi(c).evaluator();
        let fluid = solve_fluid(&lim, DEFAULT_DT, 100.0)?;
        let sol = solve_variance_ode(&fluid, &lim)?;
        let sup = sol
            .times()
            .zip(sol.m_values())
            .map(|(t, m)| (m - er_variance_closed_form(c, t)).abs())
            .fold(0.0, f64::max);
        let s_err = (sol.sigma_sq().unwrap_or(f64::NAN) - er_sigma_sq(c)).abs();
        check.record(format!("c={c}:sup_err"), sup);
        check.record(format!("c={c}:sigma_sq_err"), s_err);
        check.require(sup < 1e-6 && s_err < 1e-8);
    }
    Ok(check)
}

/// Mean sup deviation over `t <= 1` for each `N`: strictly decreasing,
/// shrinking by a factor in `[2.5, 4.5]` per decade, final value below 0.02
/// and each value at most `omega_N`.
pub fn lln_scaling(c: f64, sizes: &[usize], runs: usize, seed: u64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("lln_scaling(c={c})"));
    let mut means = Vec::new();
    for &n in sizes {
        let kernel = Kernel::erdos_renyi(n, c)?;
        let s = run_lln_experiment(&kernel, runs, seed)?;
        let mean = s.sup_dev_mean.unwrap_or(f64::NAN);
        let bound = omega(&kernel, 1.0)?;
        check.record(format!("N={n}:sup_dev_mean"), mean);
        check.record(format!("N={n}:omega"), bound);
        check.require(mean <= bound);
        means.push((n, mean));
    }
    for w in means.windows(2) {
        let decades = (w[1].0 as f64 / w[0].0 as f64).log10();
        let factor = (w[0].1 / w[1].1).powf(1.0 / decades);
        check.record(format!("N={}->{}:shrink", w[0].0, w[1].0), factor);
        check.require(w[1].1 < w[0].1 && (2.5..=4.5).contains(&factor));
    }
    let last = means.last().map_or(f64::NAN, |m| m.1);
    check.require(last < 0.02);
    Ok(check)
}

/// `mean(T*_N / N)` within `tol` of `ln(1 + c) / c`.
pub fn hitting_mean(c: f64, n: usize, runs: usize, seed: u64, tol: f64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("hitting_mean(c={c}, N={n})"));
    let kernel = Kernel::erdos_renyi(n, c)?;
    let steps = batch_hitting_steps(&kernel, runs, seed);
    let mean = steps.iter().map(|&s| s as f64 / n as f64).sum::<f64>() / runs as f64;
    let target = er_t_star(c);
    check.record("mean_hit", mean);
    check.record("T_star", target);
    check.require((mean - target).abs() <= tol);
    Ok(check)
}

/// `sqrt(N) (T*_N / N - T*)`: variance within 15% of `sigma_sq`, mean within
/// three standard errors of 0 and KS against `Normal(0, sigma_sq)` below the
/// asymptotic 1% critical value.
pub fn clt(c: f64, n: usize, runs: usize, seed: u64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("clt(c={c}, N={n})"));
    let kernel = Kernel::erdos_renyi(n, c)?;
    let fluid = solve_fluid(kernel.limit_eval(), DEFAULT_DT, 100.0)?;
    let diffusion = solve_variance_ode(&fluid, kernel.limit_eval())?;
    let prediction = clt_prediction(&kernel, &fluid, &diffusion)?;
    let s = run_clt_experiment(&kernel, runs, seed, prediction)?;
    let sigma_sq = prediction.sigma_sq;
    let mean_tol = 3.0 * (sigma_sq / runs as f64).sqrt();
    let ks_crit = ks_critical_value(runs, 0.01);
    let ks = s.ks_stat.unwrap_or(f64::NAN);
    check.record("sigma_sq", sigma_sq);
    check.record("sample_var", s.clt_var);
    check.record("var_ratio", s.clt_var / sigma_sq);
    check.record("sample_mean", s.clt_mean);
    check.record("mean_tol", mean_tol);
    check.record("ks", ks);
    check.record("ks_crit", ks_crit);
    check.require((s.clt_var / sigma_sq - 1.0).abs() <= 0.15);
    check.require(s.clt_mean.abs() <= mean_tol);
    check.require(ks < ks_crit);
    Ok(check)
}

/// Chain hitting steps vs active counts of explicit graph explorations:
/// two-sample KS not rejected at 1e-3 and means within three combined
/// standard errors.
pub fn chain_graph(c: f64, n: usize, runs: usize, seed: u64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("chain_graph(c={c}, N={n})"));
    let kernel = Kernel::erdos_renyi(n, c)?;
    let chain: Vec<f64> = batch_hitting_steps(&kernel, runs, seed)
        .into_iter()
        .map(|s| s as f64 / n as f64)
        .collect();
    let graph: Vec<f64> = batch_active_counts(n, c, runs, seed)?
        .into_iter()
        .map(|s| s as f64 / n as f64)
        .collect();
    let ks = ks_two_sample(&chain, &graph)?;
    let crit = ks_two_sample_critical_value(runs, runs, 1e-3);
    let moments = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, v / xs.len() as f64)
    };
    let (m_chain, se2_chain) = moments(&chain);
    let (m_graph, se2_graph) = moments(&graph);
    let se = (se2_chain + se2_graph).sqrt();
    check.record("ks", ks.statistic);
    check.record("ks_crit", crit);
    check.record("p_value", ks.p_value);
    check.record("mean_chain", m_chain);
    check.record("mean_graph", m_graph);
    check.record("combined_se", se);
    check.require(ks.statistic < crit);
    check.require((m_chain - m_graph).abs() <= 3.0 * se);
    Ok(check)
}

/// `E[M_l]` within three standard errors of 0 and
/// `E[M_l^2] / E[sum psi_N]` in `[0.95, 1.05]` at `l = N/4, N/2, 3N/4`.
pub fn martingale(c: f64, n: usize, runs: usize, seed: u64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("martingale(c={c}, N={n})"));
    let kernel = Kernel::erdos_renyi(n, c)?;
    let steps = [n / 4, n / 2, 3 * n / 4];
    for p in martingale_batch(&kernel, runs, seed, &steps)? {
        check.record(format!("l={}:z_score", p.step), p.z_score);
        check.record(format!("l={}:ratio", p.step), p.ratio);
        check.require(p.z_score.abs() <= 3.0 && (0.95..=1.05).contains(&p.ratio));
    }
    Ok(check)
}

/// Continuous time: sup deviation over `[0, 3]` below 0.05 in at least 99%
/// of runs, and the pure-clock variance `e^{-t} - e^{-2t}` reproduced within
/// 1e-6.
pub fn ctime(c: f64, n: usize, runs: usize, seed: u64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("ctime(c={c}, N={n})"));
    let model = CtimeModel::new(Kernel::erdos_renyi(n, c)?, 1.0)?;
    let fluid = solve_ctime_fluid(&model, DEFAULT_DT, 3.0)?;
    let devs = batch_sup_deviations(&model, &fluid, 3.0, runs, seed);
    let good = devs.iter().filter(|&&d| d < 0.05).count();
    check.record("runs_below_0.05", good as f64);
    check.record("max_sup_dev", devs.iter().copied().fold(0.0, f64::max));
    check.require(good * 100 >= 99 * runs);

    let clock = CtimeModel::new(Kernel::deterministic(n)?, 1.0)?;
    let clock_fluid = solve_ctime_fluid(&clock, DEFAULT_DT, 3.0)?;
    let var = solve_ctime_variance(&clock, &clock_fluid)?;
    let sup = var
        .times()
        .zip(var.m_values())
        .map(|(t, m)| (m - ((-t).exp() - (-2.0 * t).exp())).abs())
        .fold(0.0, f64::max);
    check.record("pure_clock_m_err", sup);
    check.require(sup < 1e-6);
    Ok(check)
}

/// Reports `kappa = max |p_N - p| N / (c p)` over `k <= 30` and
/// `x in {0, N/4, N/2, 3N/4}`, and whether `kappa <= 1`.
pub fn stein_chen(c: f64, n: usize) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("stein_chen(c={c}, N={n})"));
    check.informational = true;
    let kernel = Kernel::erdos_renyi(n, c)?;
    let ks: Vec<usize> = (0..=30).collect();
    let xs = [0, n / 4, n / 2, 3 * n / 4];
    let r = poisson_approximation(&kernel, &ks, &xs)?;
    check.record("kappa", r.kappa);
    check.record("worst_k", r.worst_k as f64);
    check.record("worst_x", r.worst_x as f64);
    check.record("unit_constant_holds", if r.unit_constant_holds { 1.0 } else { 0.0 });
    check.require(r.kappa.is_finite());
    Ok(check)
}

/// Closed-form sanity of the exact fluid path (cheap smoke check).
fn closed_form_smoke(c: f64) -> Result<CheckResult> {
    let mut check = CheckResult::new(format!("closed_form(c={c})"));
    let sol = er_closed_form(c)?;
    check.record("T_star", sol.t_star());
    check.require((sol.value(sol.t_star()) - 1.0).abs() < 1e-12);
    Ok(check)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    ErC1,
    ErC2,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "er-c1" => Ok(Preset::ErC1),
            "er-c2" => Ok(Preset::ErC2),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset `{other}` (expected er-c1 or er-c2)"
            ))),
        }
    }

    pub fn c(self) -> f64 {
        match self {
            Preset::ErC1 => 1.0,
            Preset::ErC2 => 2.0,
        }
    }
}

/// Runs every check of a preset at its full acceptance scale.
pub fn run_preset(preset: Preset, seed: u64) -> Result<Vec<CheckResult>> {
    let c = preset.c();
    Ok(vec![
        closed_form_smoke(c)?,
        fluid_oracle(&[c])?,
        variance_oracle(&[c])?,
        lln_scaling(c, &[100, 1000, 10_000], 500, seed)?,
        hitting_mean(c, 10_000, 2000, seed, 0.005)?,
        clt(c, 10_000, 2000, seed)?,
        chain_graph(c, 200, 5000, seed)?,
        martingale(c, 1000, 10_000, seed)?,
        ctime(c, 10_000, 100, seed)?,
        stein_chen(c, 1000)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_lines() {
        let mut r = CheckResult::new("x");
        r.record("a", 0.5);
        assert_eq!(r.line(), "PASS x a=5.000000e-1");
        r.require(false);
        assert!(r.line().starts_with("FAIL"));
        assert_eq!(r.metric("a"), Some(0.5));
        assert!(Preset::parse("er-c3").is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        assert!(fluid_oracle(&[0.5, 3.0]).unwrap().pass);
        assert!(variance_oracle(&[0.5]).unwrap().pass);
        let sc = stein_chen(1.0, 100).unwrap();
        assert!(sc.informational && sc.metric("kappa").unwrap() > 0.0);
    }
}
