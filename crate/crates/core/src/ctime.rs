//! Continuous-time exploration.
//!
//! Every unexplored item carries an independent exponential clock of rate
//! `lambda`. When a clock rings the item is activated and `xi_Z` further items
//! are explored, so `Z` jumps by `1 + xi_Z` at total rate `lambda (N - Z)`.
//! The drift of `Z / N` is then `lambda (1 - z) (1 + gamma(z))`, and the
//! fluctuations around the fluid path solve
//!
//! ```text
//! dW = lambda [-(1 + gamma(z)) + gamma'(z) (1 - z)] W dt + sqrt(beta'(t)) dB,
//! beta'(t) = lambda (1 - z) (psi(z) + (1 + gamma(z))^2).
//! ```
//!
//! `z = 1` is only approached asymptotically; the reported hitting time is a
//! soft hit at `1 - SOFT_HIT_GAP`.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::ctime_c_n;
use crate::diffusion::{integrate_variance, without_sigma, DiffusionSolution, LinearSde};
use crate::error::{Error, Result};
use crate::fluid::{integrate_autonomous, soft_hit_solution, FluidSolution, MAX_DT, SOFT_HIT_GAP};
use crate::kernel::Kernel;
use crate::rng::{stream, Domain};

/// Integration never runs past this time, whatever the soft hit.
const T_CAP: f64 = 1e5;

#[derive(Debug, Clone)]
pub struct CtimeModel {
    kernel: Kernel,
    lambda: f64,
}

impl CtimeModel {
    pub fn new(kernel: Kernel, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        Ok(CtimeModel { kernel, lambda })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `g(z) = (1 - z) (1 + gamma(z))`, so that `z' = lambda g(z)`.
    pub fn g(&self, z: f64) -> f64 {
        (1.0 - z) * (1.0 + self.kernel.gamma(z))
    }

    /// `sup_x |g_N(x) - g(x / N)|` with `g_N(x) = (1 - x/N) (1 + gamma_N(x))`.
    pub fn alpha_n(&self) -> f64 {
        let n = self.kernel.n() as f64;
        (0..self.kernel.n())
            .map(|x| {
                let z = x as f64 / n;
                ((1.0 - z) * (1.0 + self.kernel.gamma_n(x)) - self.g(z)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `psi_bar_N / N + (1 + gamma_bar_N)^2 / N`.
    pub fn c_n(&self) -> f64 {
        ctime_c_n(&self.kernel)
    }
}

/// Event times and the explored count right after each event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtimeTrajectory {
    pub n: usize,
    /// `0, t_1, ..., t_K`.
    pub times: Vec<f64>,
    /// `Z` on `[times[i], times[i + 1])`.
    pub z_values: Vec<usize>,
    pub seed: u64,
    pub run_index: u64,
}

impl CtimeTrajectory {
    pub fn jump_count(&self) -> usize {
        self.times.len() - 1
    }

    /// `Z_t` (right-continuous).
    pub fn z_at(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s <= t);
        self.z_values[i.saturating_sub(1)]
    }

    /// Exact `sup_{t <= horizon} |Z_t / N - z(t)|` for a nondecreasing `z`.
    pub fn sup_deviation(&self, fluid: &FluidSolution, horizon: f64) -> f64 {
        let n = self.n as f64;
        let mut dev: f64 = 0.0;
        for (i, &start) in self.times.iter().enumerate() {
            if start > horizon {
                break;
            }
            let y = self.z_values[i] as f64 / n;
            let end = self.times.get(i + 1).copied().unwrap_or(horizon).min(horizon);
            dev = dev
                .max((y - fluid.stopped(start)).abs())
                .max((y - fluid.stopped(end)).abs());
        }
        dev
    }
}

/// Gillespie simulation of run `run_index` until absorption at `N`.
pub fn simulate_ctime(model: &CtimeModel, seed: u64, run_index: u64) -> CtimeTrajectory {
    let kernel = &model.kernel;
    let n = kernel.n();
    let mut rng = stream(seed, Domain::ContinuousTime, run_index);
    let mut t = 0.0;
    let mut z = 0usize;
    let mut times = vec![0.0];
    let mut z_values = vec![0];
    while z < n {
        let wait: f64 = Exp1.sample(&mut rng);
        t += wait / (model.lambda * (n - z) as f64);
        z += 1 + kernel.draw(z, &mut rng);
        times.push(t);
        z_values.push(z);
    }
    CtimeTrajectory {
        n,
        times,
        z_values,
        seed,
        run_index,
    }
}

/// Sup deviations over `[0, horizon]` of runs `0..runs`, in run order.
pub fn batch_sup_deviations(model: &CtimeModel, fluid: &FluidSolution, horizon: f64, runs: usize, seed: u64) -> Vec<f64> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| simulate_ctime(model, seed, r).sup_deviation(fluid, horizon))
        .collect()
}

/// Solves `z' = lambda (1 - z) (1 + gamma(z))` with RK4.
///
/// The grid covers at least `[0, t_max]` and extends past the soft hit.
pub fn solve_ctime_fluid(model: &CtimeModel, dt: f64, t_max: f64) -> Result<FluidSolution> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} must lie in (0, {MAX_DT}]"
        )));
    }
    if !(t_max > 0.0 && t_max <= T_CAP) {
        return Err(Error::InvalidParameter(format!("t_max = {t_max} must lie in (0, {T_CAP}]")));
    }
    let lambda = model.lambda;
    let grid = integrate_autonomous(|z| lambda * model.g(z), dt, T_CAP, 1.0 - SOFT_HIT_GAP, t_max)?;
    soft_hit_solution(grid)
}

/// `a(z) = lambda [-(1 + gamma(z)) + gamma'(z) (1 - z)]`.
fn drift_coefficient(model: &CtimeModel, z: f64) -> f64 {
    let k = &model.kernel;
    model.lambda * (-(1.0 + k.gamma(z)) + k.gamma_prime(z) * (1.0 - z))
}

/// `beta'(z) = lambda (1 - z) (psi(z) + (1 + gamma(z))^2)`.
fn beta_rate(model: &CtimeModel, z: f64) -> f64 {
    let k = &model.kernel;
    model.lambda * (1.0 - z) * (k.psi(z) + (1.0 + k.gamma(z)).powi(2))
}

/// `m' = 2 a m + beta'` along the fluid path; `sigma_sq` is not defined here.
pub fn solve_ctime_variance(model: &CtimeModel, fluid: &FluidSolution) -> Result<DiffusionSolution> {
    let (beta, m) = integrate_variance(
        fluid,
        |z| model.lambda * model.g(z),
        |z| drift_coefficient(model, z),
        |z| beta_rate(model, z),
    );
    Ok(without_sigma(beta, m, fluid.t_star()))
}

/// The fluctuation SDE of the continuous-time model.
pub fn ctime_sde<'a>(model: &'a CtimeModel, fluid: &'a FluidSolution) -> LinearSde<'a> {
    LinearSde::new(
        move |t| drift_coefficient(model, fluid.value(t)),
        move |t| beta_rate(model, fluid.value(t)),
    )
}
