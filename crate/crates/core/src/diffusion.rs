//! Diffusion approximation around the fluid path.
//!
//! The fluctuation `W^N_t = sqrt(N) (Z^N_t - z(t))` converges to the
//! Gaussian process solving the linear SDE
//!
//! ```text
//! dW = gamma'(z(t)) W dt + sqrt(beta'(t)) dB,   beta'(t) = psi(z(t)),
//! ```
//!
//! whose variance `m_t = E[W_t^2]` obeys `m' = 2 gamma'(z) m + psi(z)`,
//! `m_0 = 0` (Itô's formula). Linearising `z` at `T*` gives the limit law
//! of `sqrt(N) (T*_N / N - T*)`: centred normal with variance
//! `m(T*) / (1 + gamma(1))^2`, the denominator being `z'(T*)^2`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluid::{FluidSolution, HitKind};
use crate::kernel::{Kernel, LimitEvaluator};
use crate::ode::{rk4_step, GridFunction};
use crate::rng::{stream, Domain};

/// Threshold under which `z'(T*) = 1 + gamma(1)` is treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;
/// Diffusion rates above `-NEGATIVE_RATE_TOLERANCE` are clamped to zero.
pub const NEGATIVE_RATE_TOLERANCE: f64 = 1e-9;

/// `beta(t)` and `m(t)` on the fluid grid.
#[derive(Debug, Clone)]
pub struct DiffusionSolution {
    beta: GridFunction,
    m: GridFunction,
    t_star: f64,
    m_at_t_star: f64,
    sigma_sq: Option<f64>,
}

impl DiffusionSolution {
    pub fn dt(&self) -> f64 {
        self.m.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.m.dt();
        (0..self.m.len()).map(move |i| i as f64 * dt)
    }

    pub fn beta_values(&self) -> &[f64] {
        self.beta.values()
    }

    /// `beta'(t)` at the grid points.
    pub fn beta_rates(&self) -> &[f64] {
        self.beta.slopes()
    }

    pub fn m_values(&self) -> &[f64] {
        self.m.values()
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta.eval(t)
    }

    pub fn m(&self, t: f64) -> f64 {
        self.m.eval(t)
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn m_at_t_star(&self) -> f64 {
        self.m_at_t_star
    }

    /// Limit variance of `sqrt(N) (T*_N / N - T*)`; absent for
    /// continuous-time models.
    pub fn sigma_sq(&self) -> Option<f64> {
        self.sigma_sq
    }
}

/// Integrates `(z, beta, m)` jointly with RK4 on the grid of `fluid`:
/// `z' = field(z)`, `beta' = rate(z)`, `m' = 2 drift(z) m + rate(z)`.
pub(crate) fn integrate_variance<F, A, B>(
    fluid: &FluidSolution,
    field: F,
    drift: A,
    rate: B,
) -> (GridFunction, GridFunction)
where
    F: Fn(f64) -> f64,
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let dt = fluid.dt();
    let steps = fluid.z_values().len() - 1;
    let rhs = |_t: f64, y: &[f64; 3]| {
        let r = rate(y[0]);
        [field(y[0]), r, 2.0 * drift(y[0]) * y[2] + r]
    };
    let mut y = [0.0; 3];
    let mut beta = Vec::with_capacity(steps + 1);
    let mut beta_rate = Vec::with_capacity(steps + 1);
    let mut m = Vec::with_capacity(steps + 1);
    let mut m_rate = Vec::with_capacity(steps + 1);
    let mut record = |y: &[f64; 3]| {
        let d = rhs(0.0, y);
        beta.push(y[1]);
        beta_rate.push(d[1]);
        m.push(y[2]);
        m_rate.push(d[2]);
    };
    record(&y);
    for i in 0..steps {
        y = rk4_step(&rhs, i as f64 * dt, &y, dt);
        record(&y);
    }
    (
        GridFunction::new(dt, beta, beta_rate),
        GridFunction::new(dt, m, m_rate),
    )
}

/// Solves the variance ODE `m' = 2 gamma'(z) m + psi(z)` alongside `beta`.
///
/// `sigma_sq = m(T*) / (1 + gamma(1))^2`.
pub fn solve_variance_ode(fluid: &FluidSolution, limits: &LimitEvaluator) -> Result<DiffusionSolution> {
    if fluid.hit_kind() != HitKind::Exact {
        return Err(Error::InvalidParameter(
            "variance ODE needs a fluid path that hits 1".into(),
        ));
    }
    let slope_at_hit = 1.0 + limits.gamma(1.0);
    if slope_at_hit.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateNormalization(slope_at_hit));
    }
    let (beta, m) = integrate_variance(
        fluid,
        |z| 1.0 + limits.gamma(z),
        |z| limits.gamma_prime(z),
        |z| limits.psi(z),
    );
    let t_star = fluid.t_star();
    let m_at_t_star = m.eval(t_star);
    Ok(DiffusionSolution {
        beta,
        m,
        t_star,
        m_at_t_star,
        sigma_sq: Some(m_at_t_star / (slope_at_hit * slope_at_hit)),
    })
}

pub(crate) fn without_sigma(beta: GridFunction, m: GridFunction, t_star: f64) -> DiffusionSolution {
    let m_at_t_star = m.eval(t_star);
    DiffusionSolution {
        beta,
        m,
        t_star,
        m_at_t_star,
        sigma_sq: None,
    }
}

/// ER closed form `m_t = e^{-2ct} (1 - e^{ct}) (e^{ct} - 2c - 1) / (2c)`.
pub fn er_variance_closed_form(c: f64, t: f64) -> f64 {
    let u = (c * t).exp();
    (1.0 - u) * (u - 2.0 * c - 1.0) / (2.0 * c * u * u)
}

/// ER closed form `beta'(t) = (1 + c) e^{-ct} - 1`.
pub fn er_beta_rate(c: f64, t: f64) -> f64 {
    (1.0 + c) * (-c * t).exp() - 1.0
}

/// ER closed form `c / (2 (c + 1)^2)`.
pub fn er_sigma_sq(c: f64) -> f64 {
    c / (2.0 * (c + 1.0) * (c + 1.0))
}

/// Predicted limit law of `sqrt(N) (T*_N / N - T*)`: `Normal(0, sigma_sq)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CltPrediction {
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub sigma_sq: f64,
}

pub fn clt_prediction(kernel: &Kernel, fluid: &FluidSolution, diffusion: &DiffusionSolution) -> Result<CltPrediction> {
    let slope_at_hit = 1.0 + kernel.gamma(1.0);
    if slope_at_hit.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateNormalization(slope_at_hit));
    }
    let sigma_sq = diffusion
        .sigma_sq()
        .ok_or_else(|| Error::InvalidParameter("diffusion solution carries no sigma_sq".into()))?;
    Ok(CltPrediction {
        t_star: fluid.t_star(),
        sigma_sq,
    })
}

/// Scalar linear SDE `dW = a(t) W dt + sqrt(b(t)) dB`, `W(0) = 0`, with
/// deterministic coefficients.
pub struct LinearSde<'a> {
    drift: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    rate: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
}

impl<'a> LinearSde<'a> {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Sync + 'a,
        rate: impl Fn(f64) -> f64 + Sync + 'a,
    ) -> Self {
        LinearSde {
            drift: Box::new(drift),
            rate: Box::new(rate),
        }
    }

    /// The discrete-time fluctuation SDE: `a = gamma'(z(t))`, `b = psi(z(t))`.
    pub fn fluctuation(fluid: &'a FluidSolution, limits: &'a LimitEvaluator) -> Self {
        LinearSde::new(
            move |t| limits.gamma_prime(fluid.value(t)),
            move |t| limits.psi(fluid.value(t)),
        )
    }
}

/// Per-time sample moments of simulated `W` paths.
#[derive(Debug, Clone, Serialize)]
pub struct PathMoments {
    pub dt: f64,
    pub paths: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Grid points where a slightly negative rate was clamped to zero.
    pub clamped: usize,
}

impl PathMoments {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.mean.len()).map(move |i| i as f64 * self.dt)
    }

    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).min(self.mean.len() - 1)
    }
}

const PATHS_PER_BATCH: usize = 1000;

/// Euler–Maruyama paths of `sde` on `[0, t_end]`.
///
/// Paths are simulated in parallel, path `i` on stream `(seed, i)`, and the
/// per-time sums are reduced in path order.
pub fn simulate_w_paths(sde: &LinearSde<'_>, t_end: f64, dt: f64, n_paths: usize, seed: u64) -> Result<PathMoments> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must lie in (0, 1e-3]")));
    }
    if n_paths < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n_paths });
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    let mut clamped = 0;
    let mut drift = Vec::with_capacity(steps);
    let mut scale = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = i as f64 * dt;
        let mut b = (sde.rate)(t);
        if b < 0.0 {
            if b < -NEGATIVE_RATE_TOLERANCE {
                return Err(Error::NegativeDiffusion { t, rate: b });
            }
            b = 0.0;
            clamped += 1;
        }
        drift.push((sde.drift)(t));
        scale.push((b * dt).sqrt());
    }

    let batches = n_paths.div_ceil(PATHS_PER_BATCH);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut sum = vec![0.0; steps + 1];
            let mut sum_sq = vec![0.0; steps + 1];
            let first = b * PATHS_PER_BATCH;
            let last = (first + PATHS_PER_BATCH).min(n_paths);
            for path in first..last {
                let mut rng = stream(seed, Domain::Diffusion, path as u64);
                let mut w = 0.0;
                for i in 0..steps {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    w += drift[i] * w * dt + scale[i] * noise;
                    sum[i + 1] += w;
                    sum_sq[i + 1] += w * w;
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; steps + 1];
    let mut sum_sq = vec![0.0; steps + 1];
    for (s, q) in &partial {
        for i in 0..=steps {
            sum[i] += s[i];
            sum_sq[i] += q[i];
        }
    }
    let n = n_paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let variance = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, mu)| ((q - n * mu * mu) / (n - 1.0)).max(0.0))
        .collect();
    Ok(PathMoments {
        dt,
        paths: n_paths,
        mean,
        variance,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{er_t_star, solve_fluid};
    use crate::kernel::{LimitFunctions, Polynomial};

    fn er(c: f64) -> (FluidSolution, LimitEvaluator) {
        let lim = LimitFunctions::erdos_renyi(c).evaluator();
        (solve_fluid(&lim, 1e-3, 5.0).unwrap(), lim)
    }

    /// Independent oracle: the variance ODE integrated by a fine forward
    /// Euler scheme on the closed-form fluid path.
    fn euler_variance(c: f64, t_end: f64) -> f64 {
        let h = 1e-6;
        let steps = (t_end / h).round() as usize;
        let mut m = 0.0;
        for i in 0..steps {
            let t = i as f64 * h;
            m += h * (-2.0 * c * m + er_beta_rate(c, t));
        }
        m
    }

    #[test]
    fn closed_form_checks_against_oracle() {
        for &c in &[0.5, 1.0, 2.0] {
            let t = er_t_star(c);
            assert!((euler_variance(c, t) - er_variance_closed_form(c, t)).abs() < 1e-6);
            assert!((er_variance_closed_form(c, t) - er_sigma_sq(c)).abs() < 1e-14);
        }
        assert!((er_variance_closed_form(1.0, 2f64.ln()) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn er_variance_matches_closed_form() {
        for &c in &[0.5, 1.0, 2.0] {
            let (fluid, lim) = er(c);
            let sol = solve_variance_ode(&fluid, &lim).unwrap();
            let sup = sol
                .times()
                .zip(sol.m_values())
                .map(|(t, m)| (m - er_variance_closed_form(c, t)).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-6, "c={c}: {sup}");
            assert!((sol.sigma_sq().unwrap() - er_sigma_sq(c)).abs() < 1e-8);
            for (t, r) in sol.times().zip(sol.beta_rates()) {
                assert!((r - er_beta_rate(c, t)).abs() < 1e-9);
            }
        }
        let (fluid, lim) = er(2.0);
        let sol = solve_variance_ode(&fluid, &lim).unwrap();
        assert!((sol.sigma_sq().unwrap() - 2.0 / 18.0).abs() < 1e-8);
    }

    #[test]
    fn deterministic_kernel_has_no_variance() {
        let lim = LimitFunctions::deterministic().evaluator();
        let fluid = solve_fluid(&lim, 1e-3, 5.0).unwrap();
        let sol = solve_variance_ode(&fluid, &lim).unwrap();
        assert!(sol.m_values().iter().all(|&m| m == 0.0));
        assert_eq!(sol.sigma_sq(), Some(0.0));
        let moments = simulate_w_paths(&LinearSde::fluctuation(&fluid, &lim), 1.0, 1e-3, 100, 1).unwrap();
        assert!(moments.mean.iter().chain(&moments.variance).all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_normalization() {
        // A path with z'(T*) = 1 + gamma(1) = 0 never reaches 1 in finite
        // time, so pair a reaching path with limits where gamma(1) = -1.
        let fluid = solve_fluid(&LimitFunctions::deterministic().evaluator(), 1e-3, 5.0).unwrap();
        let lim = LimitFunctions {
            gamma: Polynomial::linear(0.0, -1.0),
            psi: Polynomial::constant(1.0),
        }
        .evaluator();
        assert!(matches!(
            solve_variance_ode(&fluid, &lim),
            Err(Error::DegenerateNormalization(_))
        ));
    }

    #[test]
    fn negative_rate_is_rejected() {
        let sde = LinearSde::new(|_| 0.0, |t| if t > 0.5 { -1e-3 } else { 1.0 });
        assert!(matches!(
            simulate_w_paths(&sde, 1.0, 1e-3, 10, 1),
            Err(Error::NegativeDiffusion { .. })
        ));
        let tiny = LinearSde::new(|_| 0.0, |_| -1e-12);
        assert_eq!(simulate_w_paths(&tiny, 0.01, 1e-3, 10, 1).unwrap().clamped, 10);
    }

    #[test]
    fn euler_maruyama_tracks_variance() {
        let (fluid, lim) = er(1.0);
        let sol = solve_variance_ode(&fluid, &lim).unwrap();
        let n_paths = 100_000;
        let moments = simulate_w_paths(&LinearSde::fluctuation(&fluid, &lim), fluid.t_star(), 1e-3, n_paths, 5).unwrap();
        let last = moments.variance.len() - 1;
        let t_end = last as f64 * 1e-3;
        let m = sol.m(t_end);
        let var = moments.variance[last];
        assert!((var - m).abs() <= 3.0 * (2.0 / n_paths as f64).sqrt() * m, "var {var} m {m}");
        assert!(moments.mean[last].abs() <= 3.0 * (m / n_paths as f64).sqrt());

        // Itô consistency on a coarse grid: the slope of the empirical variance
        // matches 2 gamma'(z) m + psi(z) at interval midpoints.
        let h = 0.1;
        let mut t = 0.1;
        while t + h <= t_end {
            let (i0, i1) = (moments.index_of(t), moments.index_of(t + h));
            let slope = (moments.variance[i1] - moments.variance[i0]) / h;
            let mid = t + 0.5 * h;
            let z = fluid.value(mid);
            let predicted = 2.0 * lim.gamma_prime(z) * sol.m(mid) + lim.psi(z);
            let mc = 6.0 * (2.0 / n_paths as f64).sqrt() * moments.variance[i1] / h;
            assert!((slope - predicted).abs() <= mc + 0.01 * predicted.abs(), "t={t}: {slope} vs {predicted}");
            t += h;
        }
    }
}
