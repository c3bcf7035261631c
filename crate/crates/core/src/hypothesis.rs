//! Single-order and adaptive tests of `H0: sigma_{j1 j2} = 0` for all `|j1 - j2| > k`.
//!
//! Each order `a` gives a z-score `U(a) / sigma_hat(a)` with a two-sided
//! normal p-value. The standardized statistics of different orders are
//! asymptotically independent, which justifies combining them either through
//! the smallest p-value (`1 - (1 - p_min)^m`) or through Fisher's
//! `T = -2 sum log p_a`, chi-square with `2m` degrees of freedom under the null.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{BandSpec, SampleMatrix};
use crate::special::{chi2_even_sf, two_sided_p};
use crate::sweep::{band_sweep, BandSweep};

/// p-values below this are clamped before taking logs in Fisher's combination.
pub const FISHER_CLAMP: f64 = 1e-300;

/// Candidate orders, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct OrderSet(Vec<usize>);

impl OrderSet {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidParameter("order set is empty".into()));
        }
        if orders[0] == 0 || orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "orders must be positive and strictly increasing, got {orders:?}"
            )));
        }
        if *orders.last().unwrap() > crate::distinct::MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "orders above {} are not supported",
                crate::distinct::MAX_ORDER
            )));
        }
        Ok(Self(orders))
    }

    /// Even orders `{2, 4, 6}`, immune to sign cancellation among off-band entries.
    pub fn even() -> Self {
        Self(vec![2, 4, 6])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().unwrap()
    }
}

impl Default for OrderSet {
    fn default() -> Self {
        Self((1..=6).collect())
    }
}

impl TryFrom<Vec<usize>> for OrderSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OrderSet> for Vec<usize> {
    fn from(o: OrderSet) -> Self {
        o.0
    }
}

/// One order's statistic, variance estimate, z-score and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UStatResult {
    pub order: usize,
    pub value: f64,
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
}

impl UStatResult {
    fn from_parts(order: usize, k: usize, value: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::DegenerateVariance { order, k });
        }
        let z = value / variance.sqrt();
        Ok(Self {
            order,
            value,
            variance,
            z,
            p_value: two_sided_p(z),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Min,
    Fisher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub method: Method,
    pub combined_p: f64,
    pub per_order: Vec<UStatResult>,
    /// Order with the smallest p-value (first one on ties).
    pub argmin_order: usize,
    pub fisher_t: Option<f64>,
    /// True when some p-value was clamped to [`FISHER_CLAMP`].
    pub clamped: bool,
}

fn check_p_values(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidParameter("no p-values to combine".into()));
    }
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&bad) => Err(Error::InvalidPValue(bad)),
        None => Ok(()),
    }
}

/// Minimum-p combination `1 - (1 - min p)^m`.
pub fn combine_min(p_values: &[f64]) -> Result<f64> {
    check_p_values(p_values)?;
    let min = p_values.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 1.0 {
        return Ok(1.0);
    }
    let m = p_values.len() as f64;
    Ok((-(m * (-min).ln_1p()).exp_m1()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherCombination {
    pub t: f64,
    pub combined_p: f64,
    pub clamped: bool,
}

/// Fisher combination: `T = -2 sum log p` and its chi-square(2m) survival.
pub fn combine_fisher(p_values: &[f64]) -> Result<FisherCombination> {
    check_p_values(p_values)?;
    let mut clamped = false;
    let t = -2.0
        * p_values
            .iter()
            .map(|&p| {
                if p < FISHER_CLAMP {
                    clamped = true;
                    FISHER_CLAMP.ln()
                } else {
                    p.ln()
                }
            })
            .sum::<f64>();
    let t = t.max(0.0);
    Ok(FisherCombination {
        t,
        combined_p: chi2_even_sf(t, p_values.len()),
        clamped,
    })
}

fn check_orders(n: usize, orders: &[usize]) -> Result<()> {
    for &a in orders {
        if n < 2 * a {
            return Err(Error::OrderFailed {
                order: a,
                source: Box::new(Error::InsufficientSamples { order: a, n, needed: 2 * a }),
            });
        }
    }
    Ok(())
}

/// Test of a single order `a`.
pub fn single_order_test(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<UStatResult> {
    check_spec(x, spec)?;
    if a == 0 {
        return Err(Error::InvalidOrder { order: 0, n: x.n() });
    }
    if x.n() < 2 * a {
        return Err(Error::InsufficientSamples {
            order: a,
            n: x.n(),
            needed: 2 * a,
        });
    }
    let sweep = band_sweep(x, &[a], spec.k, spec.k, true)?;
    result_at(&sweep, spec.k, a)
}

fn check_spec(x: &SampleMatrix, spec: BandSpec) -> Result<()> {
    if spec.p != x.p() {
        return Err(Error::InvalidParameter(format!(
            "band spec is for p = {}, data has p = {}",
            spec.p,
            x.p()
        )));
    }
    spec.require_testable()
}

fn result_at(sweep: &BandSweep, k: usize, a: usize) -> Result<UStatResult> {
    let value = sweep.value(k, a).expect("swept order");
    let variance = sweep.variance(k, a).expect("swept order");
    UStatResult::from_parts(a, k, value, variance)
}

/// Per-order results for every order in `orders`, sharing one pass over the data.
pub fn order_results(x: &SampleMatrix, spec: BandSpec, orders: &OrderSet) -> Result<Vec<UStatResult>> {
    check_spec(x, spec)?;
    check_orders(x.n(), orders.as_slice())?;
    let sweep = band_sweep(x, orders.as_slice(), spec.k, spec.k, true)?;
    collect_orders(&sweep, spec.k, orders)
}

fn collect_orders(sweep: &BandSweep, k: usize, orders: &OrderSet) -> Result<Vec<UStatResult>> {
    orders
        .as_slice()
        .iter()
        .map(|&a| {
            result_at(sweep, k, a).map_err(|e| Error::OrderFailed {
                order: a,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Combines already computed per-order results.
pub fn combine(per_order: Vec<UStatResult>, method: Method) -> Result<AdaptiveResult> {
    let p: Vec<f64> = per_order.iter().map(|r| r.p_value).collect();
    let argmin_order = per_order
        .iter()
        .fold(None::<&UStatResult>, |best, r| match best {
            Some(b) if b.p_value <= r.p_value => Some(b),
            _ => Some(r),
        })
        .map(|r| r.order)
        .ok_or_else(|| Error::InvalidParameter("no per-order results".into()))?;
    let (combined_p, fisher_t, clamped) = match method {
        Method::Min => (combine_min(&p)?, None, false),
        Method::Fisher => {
            let f = combine_fisher(&p)?;
            (f.combined_p, Some(f.t), f.clamped)
        }
    };
    Ok(AdaptiveResult {
        method,
        combined_p,
        per_order,
        argmin_order,
        fisher_t,
        clamped,
    })
}

/// Adaptive test over `orders`. Fails as a whole if any order fails.
pub fn adaptive_test(
    x: &SampleMatrix,
    spec: BandSpec,
    orders: &OrderSet,
    method: Method,
) -> Result<AdaptiveResult> {
    combine(order_results(x, spec, orders)?, method)
}

/// Results at one bandwidth of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTests {
    pub k: usize,
    pub per_order: Vec<UStatResult>,
    pub min: AdaptiveResult,
    pub fisher: AdaptiveResult,
}

/// Runs the per-order and both adaptive tests at every `k` in `k_lo..=k_hi`.
pub fn sweep_tests(
    x: &SampleMatrix,
    orders: &OrderSet,
    k_lo: usize,
    k_hi: usize,
) -> Result<Vec<BandwidthTests>> {
    if k_lo > k_hi {
        return Err(Error::InvalidParameter(format!("empty bandwidth range {k_lo}..={k_hi}")));
    }
    BandSpec::new(k_hi, x.p())?.require_testable()?;
    check_orders(x.n(), orders.as_slice())?;
    let sweep = band_sweep(x, orders.as_slice(), k_lo, k_hi, true)?;
    (k_lo..=k_hi)
        .map(|k| {
            let per_order = collect_orders(&sweep, k, orders)?;
            Ok(BandwidthTests {
                k,
                min: combine(per_order.clone(), Method::Min)?,
                fisher: combine(per_order.clone(), Method::Fisher)?,
                per_order,
            })
        })
        .collect()
}
