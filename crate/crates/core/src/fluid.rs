//! Fluid limit of the exploration chain.
//!
//! The scaled chain `Z_[tN] / N` follows, to first order, the solution of
//! `z' = 1 + gamma(z)`, `z(0) = 0`. The hitting time `T*` solves `z(T*) = 1`
//! and is the limit of the jamming fraction `T*_N / N`.
//!
//! For the Erdős–Rényi kernel `gamma(z) = c (1 - z)` and the solution is
//! `z(t) = rho (1 - exp(-c t))` with `rho = (1 + c) / c`, so
//! `T* = ln(1 + c) / c`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, LimitEvaluator};
use crate::ode::{rk4_step, GridFunction};

pub const DEFAULT_DT: f64 = 1e-3;
/// Largest step accepted by the fixed-step solvers.
pub const MAX_DT: f64 = 1e-2;
/// Continuous-time paths only approach 1; this is where `soft_hit` is read.
pub const SOFT_HIT_GAP: f64 = 1e-6;
const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Numeric,
    /// Erdős–Rényi closed form with parameter `c`.
    ClosedForm { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    /// `z(T_star) = 1`.
    Exact,
    /// `z(T_star) = 1 - SOFT_HIT_GAP`; the path converges to 1 without reaching it.
    SoftHit,
}

/// `z(t)` on a uniform grid together with the hitting time.
#[derive(Debug, Clone)]
pub struct FluidSolution {
    grid: GridFunction,
    t_star: f64,
    hit: HitKind,
    provenance: Provenance,
}

impl FluidSolution {
    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn z_values(&self) -> &[f64] {
        self.grid.values()
    }

    /// `z'` at the grid points.
    pub fn slopes(&self) -> &[f64] {
        self.grid.slopes()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.grid.dt();
        (0..self.grid.len()).map(move |i| i as f64 * dt)
    }

    pub fn t_end(&self) -> f64 {
        self.grid.t_end()
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn hit_kind(&self) -> HitKind {
        self.hit
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `z(t)`: exact for closed forms, cubic Hermite between grid points
    /// otherwise.
    pub fn value(&self, t: f64) -> f64 {
        match self.provenance {
            Provenance::ClosedForm { c } => er_fluid_value(c, t),
            Provenance::Numeric => self.grid.eval(t),
        }
    }

    /// `z(min(t, T*))`: the fluid path stopped at its hitting time, which is
    /// what the absorbed chain follows.
    pub fn stopped(&self, t: f64) -> f64 {
        if t >= self.t_star {
            match self.hit {
                HitKind::Exact => 1.0,
                HitKind::SoftHit => self.value(t),
            }
        } else {
            self.value(t)
        }
    }
}

fn check_step(dt: f64, t_max: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} must lie in (0, {MAX_DT}]"
        )));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max = {t_max} must be positive")));
    }
    Ok(())
}

/// Integrates the autonomous `z' = field(z)` from `z(0) = 0` with RK4.
///
/// Stops one step after the first grid time at which `z >= target` and
/// `t >= min_horizon`; fails if `target` is not reached by `t_max`.
pub(crate) fn integrate_autonomous<F: Fn(f64) -> f64>(
    field: F,
    dt: f64,
    t_max: f64,
    target: f64,
    min_horizon: f64,
) -> Result<GridFunction> {
    let rhs = |_t: f64, y: &[f64; 1]| [field(y[0])];
    let mut values = vec![0.0];
    let mut slopes = vec![field(0.0)];
    let mut z = [0.0];
    let mut reached = false;
    let mut i = 0usize;
    loop {
        let t = i as f64 * dt;
        if reached {
            break;
        }
        if z[0] >= target && t >= min_horizon {
            reached = true;
        } else if t > t_max || i >= MAX_STEPS {
            return Err(Error::NoHitting { target, t_max });
        }
        z = rk4_step(&rhs, t, &z, dt);
        values.push(z[0]);
        slopes.push(field(z[0]));
        i += 1;
    }
    Ok(GridFunction::new(dt, values, slopes))
}

/// Solves `z' = 1 + gamma(z)` with fixed-step RK4.
///
/// The grid runs one step past the first grid time with `z >= 1`.
pub fn solve_fluid(limits: &LimitEvaluator, dt: f64, t_max: f64) -> Result<FluidSolution> {
    check_step(dt, t_max)?;
    let grid = integrate_autonomous(|z| 1.0 + limits.gamma(z), dt, t_max, 1.0, 0.0)?;
    let mut sol = FluidSolution {
        grid,
        t_star: f64::NAN,
        hit: HitKind::Exact,
        provenance: Provenance::Numeric,
    };
    sol.t_star = hitting_time_fluid(&sol)?;
    Ok(sol)
}

/// Root of `z(T) = 1` (or `1 - SOFT_HIT_GAP` for soft hits) by bisection on
/// the interpolant.
pub fn hitting_time_fluid(sol: &FluidSolution) -> Result<f64> {
    if let Provenance::ClosedForm { c } = sol.provenance {
        return Ok(er_t_star(c));
    }
    let target = match sol.hit {
        HitKind::Exact => 1.0,
        HitKind::SoftHit => 1.0 - SOFT_HIT_GAP,
    };
    sol.grid.first_crossing(target).ok_or(Error::NoHitting {
        target,
        t_max: sol.grid.t_end(),
    })
}

pub(crate) fn soft_hit_solution(grid: GridFunction) -> Result<FluidSolution> {
    let mut sol = FluidSolution {
        grid,
        t_star: f64::NAN,
        hit: HitKind::SoftHit,
        provenance: Provenance::Numeric,
    };
    sol.t_star = hitting_time_fluid(&sol)?;
    Ok(sol)
}

/// `rho = (1 + c) / c`, the limit of the Erdős–Rényi fluid path.
pub fn er_rho(c: f64) -> f64 {
    (1.0 + c) / c
}

/// `rho (1 - exp(-c t))`.
pub fn er_fluid_value(c: f64, t: f64) -> f64 {
    -er_rho(c) * (-c * t).exp_m1()
}

/// `ln(1 + c) / c`.
pub fn er_t_star(c: f64) -> f64 {
    c.ln_1p() / c
}

/// The Erdős–Rényi fluid path in closed form, tabulated on a `DEFAULT_DT`
/// grid covering `[0, T* + dt]`.
pub fn er_closed_form(c: f64) -> Result<FluidSolution> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let t_star = er_t_star(c);
    let dt = DEFAULT_DT;
    let points = (t_star / dt).ceil() as usize + 2;
    let values: Vec<f64> = (0..points).map(|i| er_fluid_value(c, i as f64 * dt)).collect();
    let slopes = values.iter().map(|z| 1.0 + c * (1.0 - z)).collect();
    Ok(FluidSolution {
        grid: GridFunction::new(dt, values, slopes),
        t_star,
        hit: HitKind::Exact,
        provenance: Provenance::ClosedForm { c },
    })
}

/// Fluid path of `kernel`: the closed form for Erdős–Rényi kernels, RK4 at
/// `DEFAULT_DT` otherwise.
pub fn reference_fluid(kernel: &Kernel) -> Result<FluidSolution> {
    match kernel.er_parameter() {
        Some(c) => er_closed_form(c),
        None => solve_fluid(kernel.limit_eval(), DEFAULT_DT, REFERENCE_T_MAX),
    }
}

const REFERENCE_T_MAX: f64 = 1e3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::LimitFunctions;

    fn er_limits(c: f64) -> LimitEvaluator {
        LimitFunctions::erdos_renyi(c).evaluator()
    }

    fn sup_error(sol: &FluidSolution, c: f64) -> f64 {
        sol.times()
            .zip(sol.z_values())
            .map(|(t, z)| (z - er_fluid_value(c, t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn unit_drift() {
        let sol = solve_fluid(&LimitFunctions::deterministic().evaluator(), 1e-3, 5.0).unwrap();
        for (t, z) in sol.times().zip(sol.z_values()) {
            assert!((z - t).abs() < 1e-12);
        }
        assert!((sol.t_star() - 1.0).abs() < 1e-12);
        assert!((hitting_time_fluid(&sol).unwrap() - 1.0).abs() < 1e-12);
        assert!(sol.t_end() >= 1.0 && sol.t_end() < 1.0 + 2.5e-3);
    }

    #[test]
    fn er_numeric_matches_closed_form() {
        let sol = solve_fluid(&er_limits(1.0), 1e-3, 5.0).unwrap();
        assert!((sol.t_star() - std::f64::consts::LN_2).abs() < 1e-8);
        assert!((sol.value(sol.t_star()) - 1.0).abs() < 1e-10);
        let sol2 = solve_fluid(&er_limits(2.0), 1e-3, 5.0).unwrap();
        assert!((sol2.t_star() - 3f64.ln() / 2.0).abs() < 1e-8);
        assert!((sol2.t_star() - 0.549306).abs() < 1e-6);
        let sol3 = solve_fluid(&er_limits(3.0), 1e-3, 5.0).unwrap();
        assert!(sup_error(&sol3, 3.0) < 1e-8);
    }

    #[test]
    fn rk4_order() {
        for &c in &[0.5, 1.0, 2.0] {
            let coarse = solve_fluid(&er_limits(c), 1e-2, 5.0).unwrap();
            let fine = solve_fluid(&er_limits(c), 5e-3, 5.0).unwrap();
            let (ec, ef) = (sup_error(&coarse, c), sup_error(&fine, c));
            assert!(ec / ef >= 14.0, "c={c}: ratio {}", ec / ef);
        }
    }

    #[test]
    fn monotone_and_decreasing_in_c() {
        let mut last = f64::INFINITY;
        for &c in &[0.5, 1.0, 2.0, 5.0] {
            let sol = solve_fluid(&er_limits(c), 1e-3, 5.0).unwrap();
            assert!(sol.z_values().windows(2).all(|w| w[1] > w[0]));
            assert!(sol.t_star() < last);
            last = sol.t_star();
        }
    }

    #[test]
    fn closed_form_values() {
        let sol = er_closed_form(1.0).unwrap();
        assert!((er_rho(1.0) - 2.0).abs() < 1e-15);
        assert!((sol.value(2f64.ln()) - 1.0).abs() < 1e-15);
        assert!((sol.t_star() - std::f64::consts::LN_2).abs() < 1e-15);
        let ts: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&c| er_t_star(c)).collect();
        assert!(ts[0] > ts[1] && ts[1] > ts[2]);
        assert!(er_closed_form(0.0).is_err());
        // z(inf) = rho > 1
        assert!((sol.value(60.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stopped_path_caps_at_one() {
        let sol = solve_fluid(&er_limits(1.0), 1e-3, 5.0).unwrap();
        assert_eq!(sol.stopped(0.9), 1.0);
        assert!(sol.value(0.9) > 1.0);
        assert!((sol.stopped(0.3) - er_fluid_value(1.0, 0.3)).abs() < 1e-12);
    }

    #[test]
    fn no_hitting_and_bad_steps() {
        // gamma = -1 - z gives z' = -z: z stays at 0.
        let lim = LimitFunctions {
            gamma: crate::kernel::Polynomial::linear(-1.0, -1.0),
            psi: crate::kernel::Polynomial::constant(0.0),
        };
        assert!(matches!(
            solve_fluid(&lim.evaluator(), 1e-3, 2.0),
            Err(Error::NoHitting { .. })
        ));
        assert!(solve_fluid(&er_limits(1.0), 0.1, 2.0).is_err());
        assert!(solve_fluid(&er_limits(1.0), 1e-3, 0.0).is_err());
    }
}
