//! Monte Carlo aggregation: LLN and CLT experiments plus Kolmogorov–Smirnov
//! statistics.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::walk;
use crate::diffusion::CltPrediction;
use crate::error::{Error, Result};
use crate::fluid::{reference_fluid, FluidSolution};
use crate::kernel::Kernel;
use crate::rng::{stream, Domain};

/// One-sample KS statistic `sup_x |F_emp(x) - cdf(x)|`, taking both one-sided
/// gaps at every sample point.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Asymptotic one-sample critical value `sqrt(-ln(alpha/2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Asymptotic two-sample critical value at level `alpha`.
pub fn ks_two_sample_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoSampleKs {
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value; conservative for samples with ties.
    pub p_value: f64,
}

/// Two-sample KS statistic, exact in the presence of ties.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TwoSampleKs> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(TwoSampleKs {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Aggregate of a Monte Carlo batch.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub runs: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub kernel: String,
    /// Mean of `T*_N / N`.
    pub mean_hit: f64,
    pub var_hit: f64,
    /// `sqrt(mean((T*_N / N - T*)^2))`.
    pub hit_rmse: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub sigma_sq: Option<f64>,
    /// `sqrt(N) (T*_N / N - T*)` per run, in run order.
    pub clt_samples: Vec<f64>,
    pub clt_mean: f64,
    pub clt_var: f64,
    /// Mean over runs of `sup_{t<=1} |Z_[tN] / N - z(t)|`.
    pub sup_dev_mean: Option<f64>,
    pub sup_dev_max: Option<f64>,
    /// KS statistic of `clt_samples` against `Normal(0, sigma_sq)`.
    pub ks_stat: Option<f64>,
    pub seed: u64,
}

/// Exact `sup_{t<=1} |Z_[tN] / N - z(min(t, T*))|` of one run, together with
/// its hitting step.
///
/// On `[n/N, (n+1)/N)` the chain is constant and the stopped fluid path is
/// monotone, so the supremum is attained at an end of the interval. `zs[n]`
/// holds the stopped fluid path at `n / N` for `n = 0..=N`.
fn run_with_sup_deviation(kernel: &Kernel, zs: &[f64], seed: u64, run_index: u64) -> (usize, f64) {
    let n = kernel.n() as f64;
    let mut rng = stream(seed, Domain::Chain, run_index);
    let mut dev: f64 = 0.0;
    let hit = walk(kernel, &mut rng, |step, before, _| {
        let y = before as f64 / n;
        dev = dev.max((y - zs[step]).abs()).max((y - zs[step + 1]).abs());
    });
    // From the hitting step on, Z / N = 1 and the gap 1 - z only shrinks.
    (hit, dev.max((1.0 - zs[hit]).abs()))
}

fn stopped_grid(kernel: &Kernel, fluid: &FluidSolution) -> Vec<f64> {
    let n = kernel.n();
    (0..=n).map(|i| fluid.stopped(i as f64 / n as f64)).collect()
}

fn summarize(
    kernel: &Kernel,
    seed: u64,
    hits: &[usize],
    sup_devs: Option<&[f64]>,
    t_star: f64,
    sigma_sq: Option<f64>,
) -> Result<McSummary> {
    let n = kernel.n() as f64;
    let fractions: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
    let (mean_hit, var_hit) = mean_var(&fractions);
    let clt_samples: Vec<f64> = fractions.iter().map(|f| n.sqrt() * (f - t_star)).collect();
    let (clt_mean, clt_var) = mean_var(&clt_samples);
    let hit_rmse = (fractions.iter().map(|f| (f - t_star).powi(2)).sum::<f64>() / fractions.len() as f64).sqrt();
    let ks_stat = match sigma_sq {
        Some(s) => {
            let normal = Normal::new(0.0, s.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            Some(ks_statistic(&clt_samples, |x| normal.cdf(x))?)
        }
        None => None,
    };
    Ok(McSummary {
        runs: hits.len(),
        n: kernel.n(),
        kernel: kernel.descriptor(),
        mean_hit,
        var_hit,
        hit_rmse,
        t_star,
        sigma_sq,
        clt_samples,
        clt_mean,
        clt_var,
        sup_dev_mean: sup_devs.map(|d| d.iter().sum::<f64>() / d.len() as f64),
        sup_dev_max: sup_devs.map(|d| d.iter().copied().fold(0.0, f64::max)),
        ks_stat,
        seed,
    })
}

/// LLN experiment: hitting fractions and exact sup deviations from the
/// stopped fluid path over `t <= 1`.
pub fn run_lln_experiment(kernel: &Kernel, runs: usize, seed: u64) -> Result<McSummary> {
    if runs < 100 {
        return Err(Error::InsufficientSample { needed: 100, got: runs });
    }
    let fluid = reference_fluid(kernel)?;
    let zs = stopped_grid(kernel, &fluid);
    let (hits, devs): (Vec<usize>, Vec<f64>) = (0..runs as u64)
        .into_par_iter()
        .map(|r| run_with_sup_deviation(kernel, &zs, seed, r))
        .unzip();
    summarize(kernel, seed, &hits, Some(&devs), fluid.t_star(), None)
}

/// CLT experiment: `sqrt(N) (T*_N / N - T*)` against `Normal(0, sigma_sq)`.
pub fn run_clt_experiment(kernel: &Kernel, runs: usize, seed: u64, prediction: CltPrediction) -> Result<McSummary> {
    if runs < 1000 {
        return Err(Error::InsufficientSample { needed: 1000, got: runs });
    }
    if !(prediction.sigma_sq > 0.0) {
        return Err(Error::Domain(format!(
            "sigma_sq = {} is degenerate; the CLT experiment needs a positive variance",
            prediction.sigma_sq
        )));
    }
    let hits = crate::chain::batch_hitting_steps(kernel, runs, seed);
    summarize(kernel, seed, &hits, None, prediction.t_star, Some(prediction.sigma_sq))
}

/// JSON verdict of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub c: Option<f64>,
    pub runs: usize,
    pub mean_hit: f64,
    pub var_hit: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub sigma_sq: Option<f64>,
    pub ks_stat: Option<f64>,
    pub pass: bool,
}

impl Verdict {
    pub fn new(experiment: &str, kernel: &Kernel, summary: &McSummary, pass: bool) -> Self {
        Verdict {
            experiment: experiment.to_string(),
            n: summary.n,
            c: kernel.er_parameter(),
            runs: summary.runs,
            mean_hit: summary.mean_hit,
            var_hit: summary.var_hit,
            t_star: summary.t_star,
            sigma_sq: summary.sigma_sq,
            ks_stat: summary.ks_stat,
            pass,
        }
    }
}
