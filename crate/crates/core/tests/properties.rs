//! Cross-module invariants, mostly as property tests.

use jamming_core::bounds::{kappa_p, omega};
use jamming_core::chain::{batch_hitting_steps, martingale_batch, simulate};
use jamming_core::ctime::{simulate_ctime, solve_ctime_fluid, CtimeModel};
use jamming_core::diffusion::{er_sigma_sq, solve_variance_ode};
use jamming_core::fluid::{er_t_star, solve_fluid};
use jamming_core::graph::{explore_graph, EdgeMode};
use jamming_core::stats::{ks_statistic, ks_two_sample, run_lln_experiment};
use jamming_core::{Kernel, LimitFunctions};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_rows_normalize(n in 1usize..300, c in 0.01f64..5.0, frac in 0.0f64..1.0) {
        prop_assume!(c < n as f64);
        let k = Kernel::erdos_renyi(n, c).unwrap();
        let x = ((n - 1) as f64 * frac) as usize;
        let sum: f64 = (0..n - x).map(|j| k.pmf(j, x).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
        prop_assert_eq!(k.pmf(n - x, x).unwrap(), 0.0);
    }

    #[test]
    fn fluid_hits_at_closed_form(c in 0.05f64..6.0) {
        let lim = LimitFunctions::erdos_renyi(c).evaluator();
        let sol = solve_fluid(&lim, 1e-3, 100.0).unwrap();
        prop_assert!((sol.t_star() - er_t_star(c)).abs() < 1e-8);
        prop_assert!(sol.z_values().windows(2).all(|w| w[1] > w[0]));
        let var = solve_variance_ode(&sol, &lim).unwrap();
        prop_assert!((var.sigma_sq().unwrap() - er_sigma_sq(c)).abs() < 1e-8);
        prop_assert!(var.m_values().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn omega_orders(n in 2usize..100_000, c in 0.1f64..3.0, t in 0.01f64..5.0) {
        prop_assume!(c < n as f64);
        let small = Kernel::erdos_renyi(n, c).unwrap();
        let large = Kernel::erdos_renyi(2 * n, c).unwrap();
        prop_assert!(omega(&large, t).unwrap() < omega(&small, t).unwrap());
        prop_assert!(omega(&small, t).unwrap() < omega(&small, 1.5 * t).unwrap());
    }

    #[test]
    fn kappa_p_above_one(p in 1.0001f64..1e6) {
        let k = kappa_p(p).unwrap();
        prop_assert!(k > 1.0);
        prop_assert!((k - p / (p - 1.0)).abs() < 1e-12 * k);
    }

    #[test]
    fn ks_in_unit_interval(xs in prop::collection::vec(-5.0f64..5.0, 1..200)) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let d = ks_statistic(&xs, |x| normal.cdf(x)).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-15);
    }

    #[test]
    fn two_sample_ks_symmetric(
        a in prop::collection::vec(0u8..20, 1..100),
        b in prop::collection::vec(0u8..20, 1..100),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn active_set_is_maximal_independent(n in 1usize..150, p in 0.0f64..1.0, seed in any::<u64>()) {
        let run = explore_graph(n, p, EdgeMode::Materialized, seed, 0).unwrap();
        prop_assert_eq!(run.is_independent(), Some(true));
        prop_assert_eq!(run.is_maximal(), Some(true));
        prop_assert_eq!(*run.explored_trace.last().unwrap(), n);
    }

    #[test]
    fn ctime_paths_are_monotone(n in 1usize..500, c in 0.1f64..3.0, lambda in 0.1f64..5.0, seed in any::<u64>()) {
        prop_assume!(c < n as f64);
        let model = CtimeModel::new(Kernel::erdos_renyi(n, c).unwrap(), lambda).unwrap();
        prop_assert_eq!(model.g(1.0), 0.0);
        prop_assert!((0..=20).all(|i| model.g(i as f64 / 20.0) >= 0.0));
        let traj = simulate_ctime(&model, seed, 0);
        prop_assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(traj.z_values.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(*traj.z_values.last().unwrap(), n);
    }
}

#[test]
fn ctime_fluid_covers_horizon() {
    let model = CtimeModel::new(Kernel::erdos_renyi(100, 1.0).unwrap(), 1.0).unwrap();
    let fluid = solve_ctime_fluid(&model, 1e-3, 3.0).unwrap();
    assert!(fluid.t_end() >= 3.0 && fluid.t_star() > 3.0);
}

/// Results do not depend on how many workers the batch ran on.
#[test]
fn batches_independent_of_thread_count() {
    let k = Kernel::erdos_renyi(2000, 1.5).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = one.install(|| batch_hitting_steps(&k, 300, 42));
    let b = many.install(|| batch_hitting_steps(&k, 300, 42));
    assert_eq!(a, b);
    let la = one.install(|| run_lln_experiment(&k, 150, 42).unwrap());
    let lb = many.install(|| run_lln_experiment(&k, 150, 42).unwrap());
    assert_eq!(la.sup_dev_mean.unwrap().to_bits(), lb.sup_dev_mean.unwrap().to_bits());
    assert_eq!(simulate(&k, 42, 7), one.install(|| simulate(&k, 42, 7)));
}

/// `E[M_l] = 0` at every point of a 20-point grid: two-sided z-test at
/// overall level 1e-3 with a Bonferroni correction.
#[test]
fn martingale_mean_zero_on_grid() {
    let n = 1000;
    let k = Kernel::erdos_renyi(n, 1.0).unwrap();
    let steps: Vec<usize> = (1..=20).map(|i| i * n / 20).collect();
    let points = martingale_batch(&k, 5000, 77, &steps).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z_crit = normal.inverse_cdf(1.0 - 1e-3 / (2.0 * steps.len() as f64));
    for p in &points {
        assert!(p.z_score.abs() < z_crit, "l = {}: z = {}", p.step, p.z_score);
    }
}

/// `sqrt(E[(T*_N/N - T*)^2])` shrinks by at least 2.5x per decade of `N`,
/// and the ratio stays within [2.5, 4.5].
#[test]
fn hitting_time_rmse_rate() {
    let mut rmse = Vec::new();
    for &n in &[100, 1000, 10_000] {
        let k = Kernel::erdos_renyi(n, 1.0).unwrap();
        rmse.push(run_lln_experiment(&k, 1000, 9).unwrap().hit_rmse);
    }
    for w in rmse.windows(2) {
        let factor = w[0] / w[1];
        assert!((2.5..=4.5).contains(&factor), "{rmse:?}");
    }
}
