//! Greedy exploration on homogeneous random structures.
//!
//! Items are activated one at a time; each activation explores the item and
//! its unexplored neighbors. Under a homogeneity assumption the number of
//! explored items is a one-dimensional Markov chain whose scaled path has a
//! deterministic fluid limit and Gaussian fluctuations of order `N^{-1/2}`.
//! The final fraction of active items (the jamming fraction) is the scaled
//! hitting time of full exploration.
//!
//! Modules:
//! - [`kernel`]: neighbor-count laws `p_N(k, x)` and their limits.
//! - [`chain`]: the exploration chain and its martingale decomposition.
//! - [`graph`]: explicit exploration of `G(N, c/N)` as an oracle.
//! - [`fluid`], [`diffusion`]: the ODE limit and the linear SDE around it.
//! - [`bounds`]: non-asymptotic error budgets.
//! - [`stats`]: Monte Carlo LLN/CLT experiments and KS statistics.
//! - [`ctime`]: the continuous-time variant.

pub mod bounds;
pub mod chain;
pub mod ctime;
pub mod diffusion;
pub mod error;
pub mod fluid;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod ode;
pub mod rng;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelSpec, LimitFunctions, Polynomial};
