//! Greedy exploration of an explicitly sampled Erdős–Rényi graph.
//!
//! Each step activates a uniformly chosen unexplored vertex and marks its
//! unexplored neighbors as explored. The active set ends up a maximal
//! independent set, and by deferred edge revelation the explored count
//! follows the same law as the homogeneous chain with the binomial kernel.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Up to this many vertices the whole edge list is sampled and kept, so
/// independence and maximality of the active set can be checked.
pub const MATERIALIZE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// Sample `G(N, p)` up front and keep the edge list.
    Materialized,
    /// Reveal the edges of each activated vertex only when it is selected.
    Deferred,
}

impl EdgeMode {
    pub fn for_size(n: usize) -> Self {
        if n <= MATERIALIZE_LIMIT {
            EdgeMode::Materialized
        } else {
            EdgeMode::Deferred
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationRun {
    pub n: usize,
    pub edge_prob: f64,
    pub active_count: usize,
    /// `|A ∪ B|` after each step.
    pub explored_trace: Vec<usize>,
    /// Active vertices in activation order.
    pub active: Vec<u32>,
    /// Sampled edges, kept in materialized mode only.
    #[serde(skip)]
    pub edges: Option<Vec<(u32, u32)>>,
    pub seed: u64,
    pub run_index: u64,
}

/// Unexplored vertices with O(1) uniform sampling and removal.
struct Pool {
    items: Vec<u32>,
    position: Vec<u32>,
}

const REMOVED: u32 = u32::MAX;

impl Pool {
    fn full(n: usize) -> Self {
        Pool {
            items: (0..n as u32).collect(),
            position: (0..n as u32).collect(),
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn contains(&self, v: u32) -> bool {
        self.position[v as usize] != REMOVED
    }

    fn remove_at(&mut self, idx: usize) -> u32 {
        let v = self.items.swap_remove(idx);
        if let Some(&moved) = self.items.get(idx) {
            self.position[moved as usize] = idx as u32;
        }
        self.position[v as usize] = REMOVED;
        v
    }

    fn remove(&mut self, v: u32) {
        let idx = self.position[v as usize];
        if idx != REMOVED {
            self.remove_at(idx as usize);
        }
    }

    fn take_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let idx = rng.random_range(0..self.items.len());
        self.remove_at(idx)
    }
}

/// Edges of `G(n, p)` by geometric skipping over the pairs `(v, w)`, `w < v`.
pub fn sample_gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    if p <= 0.0 || n < 2 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n as u32 {
            for w in 0..v {
                edges.push((w, v));
            }
        }
        return edges;
    }
    let skip = Geometric::new(p).expect("p lies in (0, 1)");
    let (mut v, mut w) = (1u64, 0u64);
    let n = n as u64;
    loop {
        w += skip.sample(rng);
        while w >= v && v < n {
            w -= v;
            v += 1;
        }
        if v >= n {
            break;
        }
        edges.push((w as u32, v as u32));
        w += 1;
    }
    edges
}

/// Greedy exploration of `G(N, edge_prob)`.
pub fn explore_graph(n: usize, edge_prob: f64, mode: EdgeMode, seed: u64, run_index: u64) -> Result<ExplorationRun> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if n >= u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("N = {n} too large")));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {edge_prob} outside [0, 1]"
        )));
    }
    let mut rng = stream(seed, Domain::Graph, run_index);
    let mut pool = Pool::full(n);
    let mut active = Vec::new();
    let mut trace = Vec::new();
    let edges = match mode {
        EdgeMode::Materialized => {
            let edges = sample_gnp(n, edge_prob, &mut rng);
            let mut adjacency = vec![Vec::new(); n];
            for &(a, b) in &edges {
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
            while pool.len() > 0 {
                let v = pool.take_uniform(&mut rng);
                active.push(v);
                for &u in &adjacency[v as usize] {
                    if pool.contains(u) {
                        pool.remove(u);
                    }
                }
                trace.push(n - pool.len());
            }
            Some(edges)
        }
        EdgeMode::Deferred => {
            while pool.len() > 0 {
                let v = pool.take_uniform(&mut rng);
                active.push(v);
                let others = pool.len() as u64;
                let blocked = if others == 0 || edge_prob == 0.0 {
                    0
                } else if edge_prob == 1.0 {
                    others
                } else {
                    Binomial::new(others, edge_prob)
                        .expect("p lies in (0, 1)")
                        .sample(&mut rng)
                };
                for _ in 0..blocked {
                    pool.take_uniform(&mut rng);
                }
                trace.push(n - pool.len());
            }
            None
        }
    };
    Ok(ExplorationRun {
        n,
        edge_prob,
        active_count: active.len(),
        explored_trace: trace,
        active,
        edges,
        seed,
        run_index,
    })
}

/// Exploration of `G(N, c/N)`; `c = 0` (the empty graph) is allowed.
pub fn explore_er_graph(n: usize, c: f64, seed: u64, run_index: u64) -> Result<ExplorationRun> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if !(c >= 0.0 && c < n as f64) {
        return Err(Error::InvalidParameter(format!("need 0 <= c < N, got c = {c}, N = {n}")));
    }
    explore_graph(n, c / n as f64, EdgeMode::for_size(n), seed, run_index)
}

/// Active counts of runs `0..runs`, in parallel, in run order.
pub fn batch_active_counts(n: usize, c: f64, runs: usize, seed: u64) -> Result<Vec<usize>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| explore_er_graph(n, c, seed, r).map(|run| run.active_count))
        .collect()
}

impl ExplorationRun {
    /// No edge joins two active vertices. `None` without an edge list.
    pub fn is_independent(&self) -> Option<bool> {
        let edges = self.edges.as_ref()?;
        let mut is_active = vec![false; self.n];
        for &v in &self.active {
            is_active[v as usize] = true;
        }
        Some(edges.iter().all(|&(a, b)| !(is_active[a as usize] && is_active[b as usize])))
    }

    /// Every inactive vertex has an active neighbor. `None` without an edge list.
    pub fn is_maximal(&self) -> Option<bool> {
        let edges = self.edges.as_ref()?;
        let mut is_active = vec![false; self.n];
        for &v in &self.active {
            is_active[v as usize] = true;
        }
        let mut dominated = is_active.clone();
        for &(a, b) in edges {
            if is_active[a as usize] {
                dominated[b as usize] = true;
            }
            if is_active[b as usize] {
                dominated[a as usize] = true;
            }
        }
        Some(dominated.into_iter().all(|d| d))
    }
}
