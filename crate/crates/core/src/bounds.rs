//! Non-asymptotic error budgets for the fluid approximation.
//!
//! With `C_N = psi_bar_N / N`,
//!
//! ```text
//! || sup_{s<=T} |Z^N_s - z(s)| ||_p <= exp(C_L T) (delta_N T + kappa_p ||M^N_T||_p),
//! kappa_p = p / (p - 1),
//! || sup_{s<=T} |Z^N_s - z(s)| ||_2 <= omega_N = (delta_N T + 2 sqrt(2 C_N T)) exp(C_L T).
//! ```
//!
//! Constants that only exist through a proof (the `C` in the hitting-time
//! bound, the random-`N` constant) are never given numeric values here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Inputs and derived quantities of the `omega_N` budget.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBudget {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta_n: f64,
    pub c_l: f64,
    pub psi_bar_n: f64,
    pub gamma_bar_n: f64,
    pub c_n: f64,
    pub omega_n: f64,
    /// L^2 envelope `exp(C_L T) (delta_N T + 2 sqrt(C_N T))`.
    pub l2_bound: f64,
}

impl ErrorBudget {
    pub fn new(kernel: &Kernel, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        let c_n = kernel.psi_bar_n() / kernel.n() as f64;
        Ok(ErrorBudget {
            n: kernel.n(),
            horizon,
            delta_n: kernel.delta_n(),
            c_l: kernel.c_l(),
            psi_bar_n: kernel.psi_bar_n(),
            gamma_bar_n: kernel.gamma_bar_n(),
            c_n,
            omega_n: omega(kernel, horizon)?,
            l2_bound: lp_sup_bound(kernel, horizon, 2.0, None)?,
        })
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("horizon T = {t} must be positive")))
    }
}

/// `omega_N = (delta_N T + 2 sqrt(2 C_N T)) exp(C_L T)`.
pub fn omega(kernel: &Kernel, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let c_n = kernel.psi_bar_n() / kernel.n() as f64;
    Ok(omega_from(kernel.delta_n(), c_n, kernel.c_l(), horizon))
}

pub fn omega_from(delta_n: f64, c_n: f64, c_l: f64, horizon: f64) -> f64 {
    (delta_n * horizon + 2.0 * (2.0 * c_n * horizon).sqrt()) * (c_l * horizon).exp()
}

/// `p / (p - 1)`.
pub fn kappa_p(p: f64) -> Result<f64> {
    if p > 1.0 {
        Ok(p / (p - 1.0))
    } else {
        Err(Error::InvalidP(p))
    }
}

/// L^p envelope of the sup-distance to the fluid path.
///
/// For `p = 2` and no supplied norm, `||M^N_T||_2 <= sqrt(C_N T)` is used.
/// Other exponents need an estimate of `||M^N_T||_p`, e.g. from simulated
/// chain batches.
pub fn lp_sup_bound(kernel: &Kernel, horizon: f64, p: f64, martingale_norm: Option<f64>) -> Result<f64> {
    check_horizon(horizon)?;
    let kappa = kappa_p(p)?;
    let norm = match martingale_norm {
        Some(v) => v,
        None if p == 2.0 => (kernel.psi_bar_n() / kernel.n() as f64 * horizon).sqrt(),
        None => {
            return Err(Error::InvalidParameter(format!(
                "p = {p} needs an estimate of ||M_T^N||_p"
            )))
        }
    };
    Ok((kernel.c_l() * horizon).exp() * (kernel.delta_n() * horizon + kappa * norm))
}

/// `((1 - e^{-h}) / h)^{1/2}`, the `N`-dependent factor of the bound when
/// `N - 1` is Poisson(`h`). The multiplying constant is left to the caller.
pub fn poisson_n_factor(h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("h = {h} must be positive")));
    }
    Ok((-(-h).exp_m1() / h).sqrt())
}

/// `C_N` of the continuous-time model: `psi_bar_N / N + (1 + gamma_bar_N)^2 / N`.
pub fn ctime_c_n(kernel: &Kernel) -> f64 {
    let n = kernel.n() as f64;
    kernel.psi_bar_n() / n + (1.0 + kernel.gamma_bar_n()).powi(2) / n
}
