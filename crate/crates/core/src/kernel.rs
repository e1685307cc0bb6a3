//! Homogeneous neighbor-count kernels.
//!
//! A kernel gives, for every number `x` of already explored items, the law
//! of the number of unexplored neighbors of the next activated item. Its
//! support is `0..=N-x-1`. Alongside the finite-`N` law a kernel carries the
//! scaling-limit functions `gamma` (drift) and `psi` (variance) evaluated at
//! the explored fraction `z = x / N`, and the constants used by the error
//! budgets: the Lipschitz constant `C_L`, the uniform drift approximation
//! error `delta_N` and the suprema of the finite-`N` moments.
//!
//! `x` is always an integer count; limit functions always take `z`
//! explicitly.

use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Tolerance on the row sums of a tabular kernel.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Real polynomial with coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(Vec<f64>);

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Polynomial(coefficients)
    }

    pub fn constant(value: f64) -> Self {
        Polynomial(vec![value])
    }

    /// `a + b z`.
    pub fn linear(a: f64, b: f64) -> Self {
        Polynomial(vec![a, b])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&a| a != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &a| acc * z + a)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.0.len() <= 1 {
            return Polynomial(vec![0.0]);
        }
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| k as f64 * a)
                .collect(),
        )
    }

    /// Upper bound on `sup |p'|` over `[lo, hi]`.
    ///
    /// Exact for degree <= 2 (the derivative is affine, so the sup sits on
    /// an endpoint). Otherwise a dense scan plus the mean-value slack
    /// `h/2 * sup|p''|`, with `sup|p''|` bounded coefficient-wise.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        let d1 = self.derivative();
        if self.degree() <= 2 {
            return d1.eval(lo).abs().max(d1.eval(hi).abs());
        }
        const POINTS: usize = 4000;
        let h = (hi - lo) / POINTS as f64;
        let scan = (0..=POINTS)
            .map(|i| d1.eval(lo + i as f64 * h).abs())
            .fold(0.0, f64::max);
        let radius = lo.abs().max(hi.abs());
        let d2_bound: f64 = d1
            .derivative()
            .0
            .iter()
            .enumerate()
            .map(|(k, a)| a.abs() * radius.powi(k as i32))
            .sum();
        scan + 0.5 * h * d2_bound
    }
}

/// Scaling-limit functions of a kernel: drift `gamma(z)` and variance `psi(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitFunctions {
    pub gamma: Polynomial,
    pub psi: Polynomial,
}

impl LimitFunctions {
    /// Limits of the sparse Erdős–Rényi kernel: `gamma(z) = psi(z) = c (1 - z)`.
    pub fn erdos_renyi(c: f64) -> Self {
        LimitFunctions {
            gamma: Polynomial::linear(c, -c),
            psi: Polynomial::linear(c, -c),
        }
    }

    /// `gamma = psi = 0`: every activation explores exactly one item.
    pub fn deterministic() -> Self {
        LimitFunctions {
            gamma: Polynomial::constant(0.0),
            psi: Polynomial::constant(0.0),
        }
    }

    /// Evaluates the limit functions and the derivatives the solvers need.
    pub fn evaluator(&self) -> LimitEvaluator {
        let gamma_prime = self.gamma.derivative();
        let gamma_second = gamma_prime.derivative();
        LimitEvaluator {
            gamma: self.gamma.clone(),
            gamma_prime,
            gamma_second,
            psi: self.psi.clone(),
        }
    }
}

/// Limit functions with their derivatives precomputed.
#[derive(Debug, Clone)]
pub struct LimitEvaluator {
    gamma: Polynomial,
    gamma_prime: Polynomial,
    gamma_second: Polynomial,
    psi: Polynomial,
}

impl LimitEvaluator {
    pub fn gamma(&self, z: f64) -> f64 {
        self.gamma.eval(z)
    }
    pub fn gamma_prime(&self, z: f64) -> f64 {
        self.gamma_prime.eval(z)
    }
    pub fn gamma_second(&self, z: f64) -> f64 {
        self.gamma_second.eval(z)
    }
    pub fn psi(&self, z: f64) -> f64 {
        self.psi.eval(z)
    }
}

#[derive(Debug, Clone)]
struct TableRow {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl TableRow {
    fn new(pmf: Vec<f64>) -> Self {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let variance: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        TableRow {
            pmf,
            cdf,
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    /// `Binomial(N - x - 1, c / N)`.
    Binomial { c: f64, p: f64 },
    /// Row `b` applies to `x` in `[b * width, (b + 1) * width)`.
    Table { width: usize, rows: Vec<TableRow> },
}

/// Neighbor-count law `p_N(k, x)` together with its limit functions and
/// error-budget constants. Immutable once built.
#[derive(Debug, Clone)]
pub struct Kernel {
    n: usize,
    law: Law,
    limits: LimitFunctions,
    eval: LimitEvaluator,
    c_l: f64,
    delta_n: f64,
    psi_bar_n: f64,
    gamma_bar_n: f64,
}

impl Kernel {
    /// Kernel of the sparse Erdős–Rényi graph `G(N, c/N)`.
    ///
    /// `psi_bar_N` and `gamma_bar_N` are set to the closed-form bound `c`
    /// rather than the (slightly smaller) exact suprema; `delta_N = c/N` is
    /// exact.
    pub fn erdos_renyi(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if c >= n as f64 {
            return Err(Error::InvalidParameter(format!(
                "edge probability c/N = {c}/{n} must lie in (0, 1)"
            )));
        }
        let limits = LimitFunctions::erdos_renyi(c);
        Ok(Kernel {
            n,
            law: Law::Binomial { c, p: c / n as f64 },
            eval: limits.evaluator(),
            limits,
            c_l: c,
            delta_n: c / n as f64,
            psi_bar_n: c,
            gamma_bar_n: c,
        })
    }

    /// Kernel given by explicit probability rows.
    ///
    /// `rows[b][k]` is the probability of `k` neighbors for every `x` in
    /// bucket `b = x / bucket_width`; there must be exactly
    /// `ceil(N / bucket_width)` rows. `delta_N`, `C_L` and the moment suprema
    /// are computed by exhaustive scan.
    pub fn tabular(
        n: usize,
        bucket_width: usize,
        rows: Vec<Vec<f64>>,
        limits: LimitFunctions,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if bucket_width == 0 {
            return Err(Error::InvalidParameter("bucket width must be positive".into()));
        }
        let expected = n.div_ceil(bucket_width);
        if rows.len() != expected {
            return Err(Error::MalformedTable(format!(
                "expected {expected} rows for N = {n} and bucket width {bucket_width}, got {}",
                rows.len()
            )));
        }
        let mut table = Vec::with_capacity(rows.len());
        for (b, mut row) in rows.into_iter().enumerate() {
            if let Some(k) = row.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::MalformedTable(format!(
                    "row {b}: invalid mass {} at k = {k}",
                    row[k]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::MalformedTable(format!("row {b} sums to {sum}")));
            }
            let last_x = ((b + 1) * bucket_width).min(n) - 1;
            let max_k = n - last_x - 1;
            if let Some(k) = row.iter().rposition(|&p| p > 0.0) {
                if k > max_k {
                    return Err(Error::MalformedTable(format!(
                        "row {b}: mass at k = {k} exceeds the support bound N - x - 1 = {max_k} at x = {last_x}"
                    )));
                }
            }
            row.truncate(max_k + 1);
            if row.is_empty() {
                row.push(0.0);
            }
            table.push(TableRow::new(row));
        }

        let eval = limits.evaluator();
        let mut delta_n: f64 = 0.0;
        let mut psi_bar_n: f64 = 0.0;
        let mut gamma_bar_n: f64 = 0.0;
        for x in 0..n {
            let row = &table[x / bucket_width];
            delta_n = delta_n.max((row.mean - eval.gamma(x as f64 / n as f64)).abs());
            psi_bar_n = psi_bar_n.max(row.variance);
            gamma_bar_n = gamma_bar_n.max(row.mean);
        }
        Ok(Kernel {
            n,
            law: Law::Table {
                width: bucket_width,
                rows: table,
            },
            c_l: limits.gamma.lipschitz_on(0.0, 2.0),
            eval,
            limits,
            delta_n,
            psi_bar_n,
            gamma_bar_n,
        })
    }

    /// The kernel with all mass at 0 (`xi = 0` always).
    pub fn deterministic(n: usize) -> Result<Self> {
        Kernel::tabular(n, n.max(1), vec![vec![1.0]], LimitFunctions::deterministic())
    }

    /// Builds the kernel described by a config block. Relative CSV paths are
    /// resolved against `base_dir`.
    pub fn from_spec(spec: &KernelSpec, base_dir: Option<&Path>) -> Result<Self> {
        match spec {
            KernelSpec::Er { n, c } => Kernel::erdos_renyi(*n, *c),
            KernelSpec::Table {
                n,
                bucket_width,
                csv,
                rows,
                gamma,
                psi,
            } => {
                let rows = match (csv, rows) {
                    (Some(path), None) => {
                        let path = match base_dir {
                            Some(dir) if path.is_relative() => dir.join(path),
                            _ => path.clone(),
                        };
                        read_table_csv(&path, n.div_ceil((*bucket_width).max(1)))?
                    }
                    (None, Some(rows)) => rows.clone(),
                    _ => {
                        return Err(Error::Config(
                            "a table kernel needs exactly one of `csv` or `rows`".into(),
                        ))
                    }
                };
                Kernel::tabular(
                    *n,
                    *bucket_width,
                    rows,
                    LimitFunctions {
                        gamma: gamma.clone(),
                        psi: psi.clone(),
                    },
                )
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `c` for Erdős–Rényi kernels.
    pub fn er_parameter(&self) -> Option<f64> {
        match self.law {
            Law::Binomial { c, .. } => Some(c),
            Law::Table { .. } => None,
        }
    }

    pub fn descriptor(&self) -> String {
        match &self.law {
            Law::Binomial { c, .. } => format!("er(N={}, c={c})", self.n),
            Law::Table { width, rows } => {
                format!("table(N={}, buckets={}, width={width})", self.n, rows.len())
            }
        }
    }

    fn check_x(&self, x: usize) -> Result<()> {
        if x >= self.n {
            Err(Error::Domain(format!("x = {x} outside 0..{}", self.n)))
        } else {
            Ok(())
        }
    }

    /// `P(xi_x = k)`; zero outside the support `0..=N-x-1`.
    pub fn pmf(&self, k: usize, x: usize) -> Result<f64> {
        self.check_x(x)?;
        let m = self.n - x - 1;
        if k > m {
            return Ok(0.0);
        }
        Ok(match &self.law {
            Law::Binomial { p, .. } => binomial_pmf(m as u64, *p, k as u64),
            Law::Table { width, rows } => rows[x / width].pmf.get(k).copied().unwrap_or(0.0),
        })
    }

    /// Mean of `pmf(., x)`.
    pub fn gamma_n(&self, x: usize) -> f64 {
        debug_assert!(x < self.n);
        match &self.law {
            Law::Binomial { p, .. } => (self.n - x - 1) as f64 * p,
            Law::Table { width, rows } => rows[x / width].mean,
        }
    }

    /// Variance of `pmf(., x)`.
    pub fn psi_n(&self, x: usize) -> f64 {
        debug_assert!(x < self.n);
        match &self.law {
            Law::Binomial { p, .. } => (self.n - x - 1) as f64 * p * (1.0 - p),
            Law::Table { width, rows } => rows[x / width].variance,
        }
    }

    pub fn limits(&self) -> &LimitFunctions {
        &self.limits
    }

    pub fn limit_eval(&self) -> &LimitEvaluator {
        &self.eval
    }

    pub fn gamma(&self, z: f64) -> f64 {
        self.eval.gamma(z)
    }
    pub fn gamma_prime(&self, z: f64) -> f64 {
        self.eval.gamma_prime(z)
    }
    pub fn gamma_second(&self, z: f64) -> f64 {
        self.eval.gamma_second(z)
    }
    pub fn psi(&self, z: f64) -> f64 {
        self.eval.psi(z)
    }

    pub fn c_l(&self) -> f64 {
        self.c_l
    }
    pub fn delta_n(&self) -> f64 {
        self.delta_n
    }
    pub fn psi_bar_n(&self) -> f64 {
        self.psi_bar_n
    }
    pub fn gamma_bar_n(&self) -> f64 {
        self.gamma_bar_n
    }

    /// Draws `xi_x`.
    pub fn sample_xi<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Result<usize> {
        self.check_x(x)?;
        Ok(self.draw(x, rng))
    }

    /// Draws `xi_x` for `x < N` (unchecked in release builds).
    pub(crate) fn draw<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        debug_assert!(x < self.n);
        let m = self.n - x - 1;
        if m == 0 {
            return 0;
        }
        match &self.law {
            Law::Binomial { p, .. } => {
                let k = Binomial::new(m as u64, *p)
                    .expect("p lies in (0, 1)")
                    .sample(rng);
                k as usize
            }
            Law::Table { width, rows } => {
                let row = &rows[x / width];
                let u: f64 = rng.random::<f64>() * row.cdf.last().copied().unwrap_or(1.0);
                row.cdf.partition_point(|&c| c <= u).min(row.pmf.len() - 1)
            }
        }
    }
}

fn binomial_pmf(m: u64, p: f64, k: u64) -> f64 {
    if k > m {
        return 0.0;
    }
    let log = ln_binomial(m, k) + k as f64 * p.ln() + (m - k) as f64 * (-p).ln_1p();
    log.exp()
}

/// Mass of `Poisson(c (1 - x))` at `k`: the large-`N` limit of the
/// Erdős–Rényi kernel at explored fraction `x`.
pub fn poisson_limit_pmf(k: usize, x: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let mean = c * (1.0 - x);
    if mean == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let log = k as f64 * mean.ln() - mean - statrs::function::factorial::ln_factorial(k as u64);
    Ok(log.exp())
}

/// Largest observed `|p_N(k, x) - p(k, x/N)| * N / (c p(k, x/N))` over the
/// given `k` and `x`, i.e. the constant that the Poisson approximation
/// inequality `|p_N - p| <= kappa (c/N) p` needs on that set.
#[derive(Debug, Clone, Serialize)]
pub struct PoissonApproximation {
    pub kappa: f64,
    pub worst_k: usize,
    pub worst_x: usize,
    /// Whether `kappa <= 1` on the tested set.
    pub unit_constant_holds: bool,
}

pub fn poisson_approximation(kernel: &Kernel, ks: &[usize], xs: &[usize]) -> Result<PoissonApproximation> {
    let c = kernel.er_parameter().ok_or_else(|| {
        Error::InvalidParameter("Poisson approximation check needs an Erdős–Rényi kernel".into())
    })?;
    let n = kernel.n() as f64;
    let mut best = PoissonApproximation {
        kappa: 0.0,
        worst_k: 0,
        worst_x: 0,
        unit_constant_holds: true,
    };
    for &x in xs {
        for &k in ks {
            let limit = poisson_limit_pmf(k, x as f64 / n, c)?;
            if limit == 0.0 {
                continue;
            }
            let ratio = (kernel.pmf(k, x)? - limit).abs() * n / (c * limit);
            if ratio > best.kappa {
                best.kappa = ratio;
                best.worst_k = k;
                best.worst_x = x;
            }
        }
    }
    best.unit_constant_holds = best.kappa <= 1.0;
    Ok(best)
}

/// Kernel block of a TOML config.
///
/// ```toml
/// [kernel]
/// type = "er"
/// N = 1000
/// c = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Er {
        #[serde(rename = "N")]
        n: usize,
        c: f64,
    },
    Table {
        #[serde(rename = "N")]
        n: usize,
        #[serde(default = "one")]
        bucket_width: usize,
        /// CSV with header `x_bucket,k,prob`.
        #[serde(default)]
        csv: Option<std::path::PathBuf>,
        #[serde(default)]
        rows: Option<Vec<Vec<f64>>>,
        gamma: Polynomial,
        psi: Polynomial,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
struct TableRecord {
    x_bucket: usize,
    k: usize,
    prob: f64,
}

/// Reads rows `x_bucket,k,prob` into `buckets` dense probability rows.
/// Unlisted entries are zero.
pub fn read_table_csv(path: &Path, buckets: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = vec![Vec::new(); buckets];
    for record in reader.deserialize() {
        let TableRecord { x_bucket, k, prob } = record?;
        let row = rows.get_mut(x_bucket).ok_or_else(|| {
            Error::MalformedTable(format!("x_bucket {x_bucket} out of range 0..{buckets}"))
        })?;
        if row.len() <= k {
            row.resize(k + 1, 0.0);
        }
        row[k] += prob;
    }
    Ok(rows)
}
