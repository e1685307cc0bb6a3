//! The one-dimensional exploration chain.
//!
//! `Z_n` counts explored items after `n` activations: `Z_0 = 0` and
//! `Z_n = Z_{n-1} + 1 + xi_{Z_{n-1}}`, absorbed at `N`. The hitting step
//! `T*_N` is the number of active items when exploration ends.
//!
//! The martingale part of the chain is
//! `M_l = Z_l - sum_{i<l} (1 + gamma_N(Z_i))`, with increasing process
//! `sum_{i<l} psi_N(Z_i)`. Both are stopped at `T*_N`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::{stream, Domain};

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Runs the chain to absorption, calling `on_step(n, z_before, z_after)`
/// for every activation. Returns the hitting step.
pub fn walk<R, F>(kernel: &Kernel, rng: &mut R, mut on_step: F) -> usize
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize, usize),
{
    let n = kernel.n();
    let mut z = 0usize;
    let mut step = 0usize;
    while z < n {
        let next = z + 1 + kernel.draw(z, rng);
        on_step(step, z, next);
        z = next;
        step += 1;
    }
    step
}

/// One full realization of the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: usize,
    /// `Z_0, ..., Z_{T*_N}`.
    pub z_values: Vec<usize>,
    /// `M_0, ..., M_{T*_N}`.
    pub m_values: Vec<f64>,
    pub hitting_step: usize,
    pub seed: u64,
    pub run_index: u64,
}

/// Simulates run `run_index` of the experiment seeded with `seed`.
pub fn simulate(kernel: &Kernel, seed: u64, run_index: u64) -> Trajectory {
    let mut rng = stream(seed, Domain::Chain, run_index);
    let mut z_values = vec![0usize];
    let mut m_values = vec![0.0];
    let mut drift = CompensatedSum::default();
    let hitting_step = walk(kernel, &mut rng, |_, before, after| {
        drift.add(1.0 + kernel.gamma_n(before));
        z_values.push(after);
        m_values.push(after as f64 - drift.value());
    });
    Trajectory {
        n: kernel.n(),
        z_values,
        m_values,
        hitting_step,
        seed,
        run_index,
    }
}

/// Only the hitting step of run `run_index`; same stream as [`simulate`].
pub fn hitting_step(kernel: &Kernel, seed: u64, run_index: u64) -> usize {
    let mut rng = stream(seed, Domain::Chain, run_index);
    walk(kernel, &mut rng, |_, _, _| {})
}

/// Hitting steps of runs `0..runs`, computed in parallel, in run order.
pub fn batch_hitting_steps(kernel: &Kernel, runs: usize, seed: u64) -> Vec<usize> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| hitting_step(kernel, seed, r))
        .collect()
}

impl Trajectory {
    /// `Z_l`, stopped at absorption.
    pub fn z_at(&self, l: usize) -> usize {
        self.z_values.get(l).copied().unwrap_or(self.n)
    }

    /// `M_l`, stopped at absorption.
    pub fn m_at(&self, l: usize) -> f64 {
        self.m_values
            .get(l)
            .copied()
            .unwrap_or_else(|| *self.m_values.last().expect("trajectory has Z_0"))
    }

    /// Number of active items at the end of exploration.
    pub fn active_count(&self) -> usize {
        self.hitting_step
    }

    pub fn hitting_fraction(&self) -> f64 {
        self.hitting_step as f64 / self.n as f64
    }

    /// The scaled path `t -> Z_[tN] / N`.
    pub fn scaled(&self) -> ScaledPath<'_> {
        ScaledPath { traj: self }
    }
}

/// Right-continuous step function `t -> Z_[tN] / N`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPath<'a> {
    traj: &'a Trajectory,
}

impl ScaledPath<'_> {
    /// Value at time `t >= 0`. `[tN]` is computed with a `1e-9` guard so that
    /// `t = k / N` maps to step `k` despite rounding.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.traj.n;
        let step = (t.max(0.0) * n as f64 + 1e-9).floor() as usize;
        self.traj.z_at(step) as f64 / n as f64
    }

    /// Values at `t_i = i / points` for `i = 0..=points`, using exact integer
    /// step indices.
    pub fn on_grid(&self, points: usize) -> Vec<f64> {
        let n = self.traj.n;
        (0..=points)
            .map(|i| self.traj.z_at(i * n / points) as f64 / n as f64)
            .collect()
    }
}

/// Martingale statistics at one step `l` over a batch of runs.
#[derive(Debug, Clone, Serialize)]
pub struct MartingalePoint {
    pub step: usize,
    pub runs: usize,
    pub mean_m: f64,
    pub sd_m: f64,
    pub mean_m_sq: f64,
    /// Mean of `sum_{i<l} psi_N(Z_i)`.
    pub mean_increasing_process: f64,
    /// `mean_m_sq / mean_increasing_process`; 1 in expectation.
    pub ratio: f64,
    /// `mean_m / (sd_m / sqrt(runs))`.
    pub z_score: f64,
}

#[derive(Debug, Clone, Default)]
struct MartingaleAccumulator {
    sum_m: f64,
    sum_m_sq: f64,
    sum_qv: f64,
}

fn martingale_samples(kernel: &Kernel, traj: &Trajectory, steps: &[usize]) -> Vec<(f64, f64)> {
    let mut qv = CompensatedSum::default();
    let mut i = 0usize;
    let mut sorted: Vec<(usize, usize)> = steps.iter().copied().enumerate().map(|(k, l)| (l, k)).collect();
    sorted.sort_unstable();
    let mut out = vec![(0.0, 0.0); steps.len()];
    for (l, k) in sorted {
        while i < l.min(traj.hitting_step) {
            qv.add(kernel.psi_n(traj.z_values[i]));
            i += 1;
        }
        out[k] = (traj.m_at(l), qv.value());
    }
    out
}

fn finish(steps: &[usize], acc: &[MartingaleAccumulator], runs: usize) -> Vec<MartingalePoint> {
    let r = runs as f64;
    steps
        .iter()
        .zip(acc)
        .map(|(&step, a)| {
            let mean_m = a.sum_m / r;
            let var = ((a.sum_m_sq - r * mean_m * mean_m) / (r - 1.0)).max(0.0);
            let sd_m = var.sqrt();
            let mean_m_sq = a.sum_m_sq / r;
            let mean_qv = a.sum_qv / r;
            MartingalePoint {
                step,
                runs,
                mean_m,
                sd_m,
                mean_m_sq,
                mean_increasing_process: mean_qv,
                ratio: if mean_qv > 0.0 { mean_m_sq / mean_qv } else { f64::NAN },
                z_score: if sd_m > 0.0 { mean_m / (sd_m / r.sqrt()) } else { 0.0 },
            }
        })
        .collect()
}

/// Empirical `E[M_l]`, `E[M_l^2]` and `E[sum_{i<l} psi_N(Z_i)]` at each
/// requested step.
pub fn martingale_diagnostics(kernel: &Kernel, batch: &[Trajectory], steps: &[usize]) -> Result<Vec<MartingalePoint>> {
    if batch.len() < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: batch.len() });
    }
    let mut acc = vec![MartingaleAccumulator::default(); steps.len()];
    for traj in batch {
        for (a, (m, qv)) in acc.iter_mut().zip(martingale_samples(kernel, traj, steps)) {
            a.sum_m += m;
            a.sum_m_sq += m * m;
            a.sum_qv += qv;
        }
    }
    Ok(finish(steps, &acc, batch.len()))
}

/// Same as [`martingale_diagnostics`] over runs `0..runs`, simulated in
/// parallel without keeping the trajectories.
pub fn martingale_batch(kernel: &Kernel, runs: usize, seed: u64, steps: &[usize]) -> Result<Vec<MartingalePoint>> {
    if runs < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: runs });
    }
    let samples: Vec<Vec<(f64, f64)>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| martingale_samples(kernel, &simulate(kernel, seed, r), steps))
        .collect();
    let mut acc = vec![MartingaleAccumulator::default(); steps.len()];
    for run in &samples {
        for (a, &(m, qv)) in acc.iter_mut().zip(run) {
            a.sum_m += m;
            a.sum_m_sq += m * m;
            a.sum_qv += qv;
        }
    }
    Ok(finish(steps, &acc, runs))
}
