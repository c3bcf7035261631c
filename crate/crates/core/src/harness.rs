//! Monte Carlo experiments: empirical size, power, bandwidth bias and the
//! trace-ratio diagnostic, plus the asymptotic power approximation.
//!
//! Replication `r` draws everything (signal positions, then data) from
//! `derive_seed(master_seed, r)`, so a report depends only on its config.
//! Power grids reuse the same replication seeds at every grid point.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{estimate_bandwidth, BandwidthConfig};
use crate::datagen::{build_setting, derive_seed, uniform_lower_band, CovarianceModel, Distribution, Setting, SettingParams};
use crate::distinct::falling_factorial;
use crate::error::{Error, Result};
use crate::hypothesis::{combine_fisher, combine_min, order_results, OrderSet, UStatResult};
use crate::sample::{BandSpec, SampleMatrix};
use crate::special::{normal_cdf, normal_upper_quantile};

pub const SCHEMA_VERSION: u32 = 1;

/// A test whose rejection rate is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TestName {
    /// Single order `U(a)`.
    U(usize),
    AdpUmin,
    AdpUf,
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestName::U(a) => write!(f, "U{a}"),
            TestName::AdpUmin => f.write_str("adpUmin"),
            TestName::AdpUf => f.write_str("adpUf"),
        }
    }
}

impl FromStr for TestName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adpUmin" => Ok(TestName::AdpUmin),
            "adpUf" => Ok(TestName::AdpUf),
            _ => s
                .strip_prefix('U')
                .and_then(|a| a.parse().ok())
                .filter(|&a| a > 0)
                .map(TestName::U)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown test {s:?}"))),
        }
    }
}

impl From<TestName> for String {
    fn from(t: TestName) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for TestName {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Single-order tests for `orders` followed by both adaptive tests.
pub fn all_tests(orders: &OrderSet) -> Vec<TestName> {
    let mut v: Vec<TestName> = orders.as_slice().iter().map(|&a| TestName::U(a)).collect();
    v.push(TestName::AdpUmin);
    v.push(TestName::AdpUf);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub setting: Setting,
    pub p: usize,
    pub distribution: Distribution,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub sparsity: usize,
    #[serde(default)]
    pub a_offset: usize,
}

impl ModelSpec {
    pub fn null(setting: Setting, p: usize, distribution: Distribution) -> Self {
        Self {
            setting,
            p,
            distribution,
            rho: 0.0,
            sparsity: 0,
            a_offset: 0,
        }
    }

    fn at(&self, point: Option<&GridPoint>) -> Self {
        let mut spec = self.clone();
        if let Some(g) = point {
            spec.rho = g.rho;
            spec.sparsity = g.sparsity;
            spec.a_offset = g.a_offset;
        }
        spec
    }

    pub fn build(&self, seed: u64) -> Result<CovarianceModel> {
        let params = SettingParams {
            rho: self.rho,
            sparsity: self.sparsity,
            a_offset: self.a_offset,
            seed,
        };
        Ok(build_setting(self.setting, self.p, &params)?.with_distribution(self.distribution))
    }

    fn is_null(&self) -> bool {
        match self.setting {
            Setting::S1 | Setting::S2 => self.sparsity == 0,
            Setting::S3 => self.a_offset == 0,
            _ => true,
        }
    }
}

/// One alternative: signal size and sparsity (`a_offset` is the S3 analogue of `sparsity`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub rho: f64,
    #[serde(default)]
    pub sparsity: usize,
    #[serde(default)]
    pub a_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub replications: usize,
    pub alpha: f64,
    #[serde(default)]
    pub orders: OrderSet,
    /// Tests to report; empty means every single-order test plus both adaptive tests.
    #[serde(default)]
    pub methods: Vec<TestName>,
    pub master_seed: u64,
    /// Bandwidth under test; defaults to the setting's null bandwidth.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub grid: Option<Vec<GridPoint>>,
    #[serde(default)]
    pub bandwidth: Option<BandwidthConfig>,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, n: usize, replications: usize, master_seed: u64) -> Self {
        Self {
            model,
            n,
            replications,
            alpha: 0.05,
            orders: OrderSet::default(),
            methods: Vec::new(),
            master_seed,
            k: None,
            grid: None,
            bandwidth: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {}", self.n)));
        }
        for t in &self.methods {
            if let TestName::U(a) = t {
                if !self.orders.as_slice().contains(a) {
                    return Err(Error::InvalidParameter(format!("{t} is not in the order set")));
                }
            }
        }
        Ok(())
    }

    fn tests(&self) -> Vec<TestName> {
        if self.methods.is_empty() {
            all_tests(&self.orders)
        } else {
            self.methods.clone()
        }
    }

    fn test_bandwidth(&self) -> Result<BandSpec> {
        let k = self.k.unwrap_or(self.model.setting.null_bandwidth());
        let spec = BandSpec::new(k, self.model.p)?;
        spec.require_testable()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Size,
    Power,
    Bandwidth,
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub test: TestName,
    pub grid_index: Option<usize>,
    pub point: Option<GridPoint>,
    pub rejections: usize,
    /// Successful replications; the denominator of `rate`.
    pub replications: usize,
    pub rate: f64,
    pub mc_se: f64,
}

impl RateRow {
    fn new(test: TestName, grid_index: Option<usize>, point: Option<GridPoint>, rejections: usize, replications: usize) -> Self {
        let rate = if replications == 0 { f64::NAN } else { rejections as f64 / replications as f64 };
        Self {
            test,
            grid_index,
            point,
            rejections,
            replications,
            rate,
            mc_se: mc_se(rate, replications),
        }
    }
}

/// Monte Carlo standard error of a proportion, `sqrt(r (1 - r) / R)`.
pub fn mc_se(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub grid_index: Option<usize>,
    pub kind: String,
    pub message: String,
}

/// Whether a test's power is non-decreasing in `rho` (within two MC-SEs) for one sparsity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneFlag {
    pub test: TestName,
    pub sparsity: usize,
    pub a_offset: usize,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSummary {
    pub true_bandwidth: usize,
    pub config: BandwidthConfig,
    pub mean_bias: f64,
    /// Standard deviation of the bias, divisor `R - 1`.
    pub sd_bias: f64,
    pub exact_recovery: f64,
    pub estimates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub population_ratio: f64,
    pub mean_sample_ratio: f64,
    pub sd_sample_ratio: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub rates: Vec<RateRow>,
    pub failures: Vec<ReplicationFailure>,
    pub failure_count: usize,
    #[serde(default)]
    pub monotone: Vec<MonotoneFlag>,
    /// Sample correlations among the z-scores of the orders (size experiments).
    #[serde(default)]
    pub z_correlation: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub bandwidth: Option<BandwidthSummary>,
    #[serde(default)]
    pub diagnostic: Option<DiagnosticSummary>,
    pub elapsed_seconds: f64,
    pub threads: usize,
}

impl ExperimentReport {
    fn empty(kind: ExperimentKind, config: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            config,
            rates: Vec::new(),
            failures: Vec::new(),
            failure_count: 0,
            monotone: Vec::new(),
            z_correlation: None,
            bandwidth: None,
            diagnostic: None,
            elapsed_seconds: 0.0,
            threads: rayon::current_num_threads(),
        }
    }

    /// Rate row for `test` at grid index `grid_index` (`None` for size experiments).
    pub fn rate(&self, test: TestName, grid_index: Option<usize>) -> Option<&RateRow> {
        self.rates.iter().find(|r| r.test == test && r.grid_index == grid_index)
    }
}

fn failure(replication: usize, grid_index: Option<usize>, e: &Error) -> ReplicationFailure {
    ReplicationFailure {
        replication,
        grid_index,
        kind: e.kind().to_string(),
        message: e.to_string(),
    }
}

/// Draws replication `rep` of `spec`: model seed and data seed both derive from the replication seed.
fn replicate(spec: &ModelSpec, n: usize, master: u64, rep: usize) -> Result<SampleMatrix> {
    let rep_seed = derive_seed(master, rep as u64);
    spec.build(derive_seed(rep_seed, 0))?.sample(n, derive_seed(rep_seed, 1))
}

/// Whether each requested test rejects, given the per-order results.
fn decisions(per_order: &[UStatResult], tests: &[TestName], alpha: f64) -> Result<Vec<bool>> {
    let p: Vec<f64> = per_order.iter().map(|r| r.p_value).collect();
    tests
        .iter()
        .map(|t| {
            let pv = match t {
                TestName::U(a) => per_order.iter().find(|r| r.order == *a).map(|r| r.p_value).unwrap(),
                TestName::AdpUmin => combine_min(&p)?,
                TestName::AdpUf => combine_fisher(&p)?.combined_p,
            };
            Ok(pv <= alpha)
        })
        .collect()
}

struct RateBlock {
    rows: Vec<RateRow>,
    failures: Vec<ReplicationFailure>,
    z: Vec<Vec<f64>>,
}

fn rejection_block(config: &ExperimentConfig, spec: &ModelSpec, grid: Option<(usize, GridPoint)>) -> Result<RateBlock> {
    let band = config.test_bandwidth()?;
    let tests = config.tests();
    let outcomes: Vec<Result<(Vec<bool>, Vec<f64>)>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let x = replicate(spec, config.n, config.master_seed, rep)?;
            let per_order = order_results(&x, band, &config.orders)?;
            let z = per_order.iter().map(|r| r.z).collect();
            Ok((decisions(&per_order, &tests, config.alpha)?, z))
        })
        .collect();
    let grid_index = grid.map(|g| g.0);
    let mut counts = vec![0usize; tests.len()];
    let mut ok = 0;
    let mut failures = Vec::new();
    let mut z = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((d, zs)) => {
                ok += 1;
                for (c, rejected) in counts.iter_mut().zip(d) {
                    *c += rejected as usize;
                }
                z.push(zs);
            }
            Err(e) => failures.push(failure(rep, grid_index, &e)),
        }
    }
    let rows = tests
        .iter()
        .zip(counts)
        .map(|(&t, c)| RateRow::new(t, grid_index, grid.map(|g| g.1), c, ok))
        .collect();
    Ok(RateBlock { rows, failures, z })
}

/// Pearson correlation matrix of the columns of `rows`.
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.first().map_or(0, Vec::len);
    let r = rows.len() as f64;
    let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|v| v[j]).sum::<f64>() / r).collect();
    let mut cov = vec![vec![0.0; m]; m];
    for v in rows {
        for a in 0..m {
            for b in 0..m {
                cov[a][b] += (v[a] - mean[a]) * (v[b] - mean[b]);
            }
        }
    }
    (0..m)
        .map(|a| (0..m).map(|b| cov[a][b] / (cov[a][a] * cov[b][b]).sqrt()).collect())
        .collect()
}

/// Empirical size under a null model.
pub fn run_size_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if !config.model.is_null() {
        return Err(Error::InvalidParameter("size experiments need a null model".into()));
    }
    let start = Instant::now();
    let block = rejection_block(config, &config.model, None)?;
    let mut report = ExperimentReport::empty(ExperimentKind::Size, config.clone());
    report.rates = block.rows;
    report.failure_count = block.failures.len();
    report.failures = block.failures;
    report.z_correlation = (block.z.len() >= 2).then(|| correlation_matrix(&block.z));
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Empirical power at every grid point.
pub fn run_power_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let grid = config
        .grid
        .as_ref()
        .filter(|g| !g.is_empty())
        .ok_or_else(|| Error::InvalidParameter("power experiments need a nonempty grid".into()))?;
    let start = Instant::now();
    let mut report = ExperimentReport::empty(ExperimentKind::Power, config.clone());
    for (i, point) in grid.iter().enumerate() {
        let spec = config.model.at(Some(point));
        let block = rejection_block(config, &spec, Some((i, *point)))?;
        report.rates.extend(block.rows);
        report.failures.extend(block.failures);
    }
    report.failure_count = report.failures.len();
    report.monotone = monotone_flags(&report.rates, &config.tests());
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn monotone_flags(rows: &[RateRow], tests: &[TestName]) -> Vec<MonotoneFlag> {
    let mut groups: Vec<(usize, usize)> = rows
        .iter()
        .filter_map(|r| r.point.map(|g| (g.sparsity, g.a_offset)))
        .collect();
    groups.sort_unstable();
    groups.dedup();
    let mut flags = Vec::new();
    for &(sparsity, a_offset) in &groups {
        for &test in tests {
            let mut curve: Vec<&RateRow> = rows
                .iter()
                .filter(|r| r.test == test && r.point.is_some_and(|g| g.sparsity == sparsity && g.a_offset == a_offset))
                .collect();
            curve.sort_by(|a, b| a.point.unwrap().rho.total_cmp(&b.point.unwrap().rho));
            let monotone = curve.windows(2).all(|w| {
                let slack = 2.0 * (w[0].mc_se.powi(2) + w[1].mc_se.powi(2)).sqrt();
                w[1].rate >= w[0].rate - slack
            });
            flags.push(MonotoneFlag { test, sparsity, a_offset, monotone });
        }
    }
    flags
}

/// Bias and spread of the adaptive bandwidth estimate.
pub fn run_bandwidth_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let k0 = config
        .model
        .build(0)?
        .true_bandwidth
        .ok_or_else(|| Error::InvalidParameter("bandwidth experiments need a model with known bandwidth".into()))?;
    let bw = config.bandwidth.unwrap_or_default();
    let start = Instant::now();
    let outcomes: Vec<Result<usize>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let x = replicate(&config.model, config.n, config.master_seed, rep)?;
            Ok(estimate_bandwidth(&x, &config.orders, &bw)?.combined)
        })
        .collect();
    let mut report = ExperimentReport::empty(ExperimentKind::Bandwidth, config.clone());
    let mut estimates = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(k) => estimates.push(k),
            Err(e) => report.failures.push(failure(rep, None, &e)),
        }
    }
    report.failure_count = report.failures.len();
    let bias: Vec<f64> = estimates.iter().map(|&k| k as f64 - k0 as f64).collect();
    let (mean, sd) = mean_sd(&bias);
    report.bandwidth = Some(BandwidthSummary {
        true_bandwidth: k0,
        config: bw,
        mean_bias: mean,
        sd_bias: sd,
        exact_recovery: estimates.iter().filter(|&&k| k == k0).count() as f64 / estimates.len().max(1) as f64,
        estimates,
    });
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Mean and standard deviation (divisor `len - 1`).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// `tr(M^4) / tr(M^2)^2` for a symmetric `d x d` row-major matrix.
pub fn trace_ratio_of(m: &[f64], d: usize) -> Result<f64> {
    let tr2: f64 = m.iter().map(|v| v * v).sum();
    if tr2 == 0.0 {
        return Err(Error::ZeroCovariance);
    }
    let mut tr4 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let s: f64 = (0..d).map(|c| m[a * d + c] * m[b * d + c]).sum();
            tr4 += s * s;
        }
    }
    Ok(tr4 / (tr2 * tr2))
}

/// `tr(S^4) / tr^2(S^2)` for the sample covariance `S` (divisor `n - 1`).
///
/// The ratio is scale free and `S` shares its nonzero spectrum with the
/// `n x n` Gram matrix of centered rows, so the smaller of the two is used.
pub fn trace_ratio_diagnostic(x: &SampleMatrix) -> Result<f64> {
    let (n, p) = (x.n(), x.p());
    let c = x.centered();
    let col = |j: usize| &c[j * n..(j + 1) * n];
    if p <= n {
        let mut s = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let v: f64 = col(a).iter().zip(col(b)).map(|(u, w)| u * w).sum();
                s[a * p + b] = v;
                s[b * p + a] = v;
            }
        }
        trace_ratio_of(&s, p)
    } else {
        let mut g = vec![0.0; n * n];
        for j in 0..p {
            let v = col(j);
            for a in 0..n {
                let va = v[a];
                for b in a..n {
                    g[a * n + b] += va * v[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                g[a * n + b] = g[b * n + a];
            }
        }
        trace_ratio_of(&g, n)
    }
}

/// Settings of the trace-ratio experiment on a lower-banded `Gamma` with `Unif(0, 5)` entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub replications: usize,
    /// Seed of the fixed `Gamma`.
    pub model_seed: u64,
    pub master_seed: u64,
}

impl DiagnosticConfig {
    /// `n = 157`, `p = 218`, `k = 200`.
    pub fn case_two(replications: usize, master_seed: u64) -> Self {
        Self {
            n: 157,
            p: 218,
            k: 200,
            replications,
            model_seed: derive_seed(master_seed, u64::MAX),
            master_seed,
        }
    }
}

/// Population and Monte Carlo mean sample trace ratio.
pub fn run_diagnostic_experiment(config: &DiagnosticConfig) -> Result<(DiagnosticSummary, f64)> {
    if config.replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    let start = Instant::now();
    let model = uniform_lower_band(config.p, config.k, config.model_seed)?;
    let population_ratio = trace_ratio_of(model.sigma(), config.p)?;
    let ratios: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let x = model.sample(config.n, derive_seed(config.master_seed, rep as u64))?;
            trace_ratio_diagnostic(&x)
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&ratios);
    Ok((
        DiagnosticSummary {
            population_ratio,
            mean_sample_ratio: mean,
            sd_sample_ratio: sd,
            ratios,
        },
        start.elapsed().as_secs_f64(),
    ))
}

/// Asymptotic power `Phi(-z_{1-alpha} + snr)` of a single-order test.
pub fn theoretical_power(snr: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if snr == 0.0 {
        return Ok(alpha);
    }
    Ok(normal_cdf(snr - normal_upper_quantile(alpha)))
}

/// `p' = (2k + 1) sqrt((p - k - 1)(p - k))`.
pub fn p_prime(p: usize, k: usize) -> f64 {
    (2 * k + 1) as f64 * (((p - k - 1) * (p - k)) as f64).sqrt()
}

fn factorial(a: usize) -> f64 {
    (1..=a).map(|t| t as f64).product()
}

/// `SNR_a` of a model: the off-band power sum over the asymptotic standard deviation.
///
/// The variance sums `(sigma_{j1 j3} sigma_{j2 j4})^a` over the quadruples of
/// the variance estimator, scaled by `2 a! kappa^a / P^n_a`.
pub fn snr_from_model(model: &CovarianceModel, k: usize, a: usize, n: usize, kappa: f64) -> Result<f64> {
    let p = model.p();
    let spec = BandSpec::new(k, p)?;
    spec.require_testable()?;
    if a == 0 || a > n {
        return Err(Error::InvalidOrder { order: a, n });
    }
    let sigma = model.sigma();
    let s = |i: usize, j: usize| sigma[i * p + j];
    let signal = model.off_band_power_sum(k, a);
    let mut quad = crate::accumulate::CompensatedSum::default();
    for j1 in 0..p {
        for j2 in 0..p {
            if j1.abs_diff(j2) <= k {
                continue;
            }
            for j3 in j1.saturating_sub(k)..(j1 + k + 1).min(p) {
                let f13 = s(j1, j3).powi(a as i32);
                if f13 == 0.0 {
                    continue;
                }
                for j4 in j2.saturating_sub(k)..(j2 + k + 1).min(p) {
                    if j3.abs_diff(j4) > k {
                        quad.add(f13 * s(j2, j4).powi(a as i32));
                    }
                }
            }
        }
    }
    let var = 2.0 * factorial(a) * kappa.powi(a as i32) * quad.value() / falling_factorial(n, a);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::DegenerateVariance { order: a, k });
    }
    Ok(signal / var.sqrt())
}

/// Equal-signal `SNR_a = |J_A| rho^a / (sqrt(2 a! kappa^a) nu^a n^{-a/2} p')`.
pub fn snr_equal_signal(sparsity: usize, rho: f64, nu: f64, a: usize, n: usize, p: usize, k: usize, kappa: f64) -> f64 {
    let ai = a as i32;
    sparsity as f64 * rho.powi(ai)
        / ((2.0 * factorial(a) * kappa.powi(ai)).sqrt() * nu.powi(ai) * (n as f64).powf(-(a as f64) / 2.0) * p_prime(p, k))
}

/// Signal `rho_a` at which order `a` reaches power `Phi(-z_{1-alpha} + M / sqrt 2)`.
pub fn rho_a(m: f64, p_prime: f64, sparsity: usize, a: usize, kappa: f64, nu: f64, n: usize) -> f64 {
    let af = a as f64;
    (m * p_prime / sparsity as f64).powf(1.0 / af) * factorial(a).powf(1.0 / (2.0 * af)) * kappa.sqrt() * nu
        / (n as f64).sqrt()
}

/// Order in `orders` with the smallest `rho_a`.
pub fn best_order(m: f64, p_prime: f64, sparsity: usize, orders: &OrderSet, kappa: f64, nu: f64, n: usize) -> usize {
    *orders
        .as_slice()
        .iter()
        .min_by(|&&a, &&b| {
            rho_a(m, p_prime, sparsity, a, kappa, nu, n).total_cmp(&rho_a(m, p_prime, sparsity, b, kappa, nu, n))
        })
        .unwrap()
}
