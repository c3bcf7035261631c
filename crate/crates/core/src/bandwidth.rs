//! Adaptive bandwidth estimation.
//!
//! With `T_{a,k} = n^{-1} U_{a,k} / sigma_hat_{a,k}` and successive
//! differences `d_{a,k} = n^delta (T_{a,k} - T_{a,k+1})`, the per-order
//! estimate is the smallest `k` with `|d_{a,k}| < theta` and the combined
//! estimate is the maximum over orders.
//!
//! The search runs over growing blocks of bandwidths and stops as soon as
//! every order has met the threshold, so well-banded data never pays for a
//! sweep to `p - 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::OrderSet;
use crate::sample::SampleMatrix;
use crate::sweep::band_sweep;

const FIRST_BLOCK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub delta: f64,
    pub theta: f64,
    /// Largest bandwidth searched; `None` means `p - 2`.
    pub k_max: Option<usize>,
    /// Compute the whole trace up to `k_max` instead of stopping early.
    pub full_trace: bool,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            theta: 0.06,
            k_max: None,
            full_trace: false,
        }
    }
}

impl BandwidthConfig {
    /// Threshold preset for data analysis.
    pub fn data_analysis() -> Self {
        Self {
            theta: 0.005,
            ..Self::default()
        }
    }

    fn validate(&self, p: usize) -> Result<usize> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {}", self.theta)));
        }
        let k_max = self.k_max.unwrap_or(p - 2);
        if k_max + 2 > p {
            return Err(Error::InvalidBand { k: k_max, p });
        }
        Ok(k_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBandwidth {
    pub order: usize,
    /// `None` when every statistic of this order was degenerate.
    pub estimate: Option<usize>,
    /// No `k < k_max` met the threshold; the estimate is `k_max`.
    pub saturated: bool,
    /// `d_{a,k}` for `k = 0, 1, ...`; missing where either endpoint is degenerate.
    pub trace: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResult {
    pub per_order: Vec<OrderBandwidth>,
    pub combined: usize,
    pub k_max: usize,
    pub delta: f64,
    pub theta: f64,
}

impl BandwidthResult {
    pub fn estimate_for(&self, order: usize) -> Option<usize> {
        self.per_order.iter().find(|o| o.order == order)?.estimate
    }
}

fn check_order(n: usize, a: usize) -> Result<()> {
    if a == 0 {
        return Err(Error::InvalidOrder { order: 0, n });
    }
    if n < 2 * a {
        return Err(Error::InsufficientSamples { order: a, n, needed: 2 * a });
    }
    Ok(())
}

/// `T_{a,k}` for `k` in `k_lo..=k_hi` and each order; `None` where the variance is degenerate.
fn t_block(x: &SampleMatrix, orders: &[usize], k_lo: usize, k_hi: usize) -> Result<Vec<Vec<Option<f64>>>> {
    let sweep = band_sweep(x, orders, k_lo, k_hi, true)?;
    let n = x.n() as f64;
    Ok(orders
        .iter()
        .map(|&a| {
            (k_lo..=k_hi)
                .map(|k| {
                    let v = sweep.variance(k, a).unwrap();
                    (v > 0.0 && v.is_finite()).then(|| sweep.value(k, a).unwrap() / (n * v.sqrt()))
                })
                .collect()
        })
        .collect())
}

/// `(T_{a,0}, ..., T_{a,k_max+1})`; entries are `None` where the variance is degenerate.
pub fn t_path(x: &SampleMatrix, a: usize, k_max: usize) -> Result<Vec<Option<f64>>> {
    check_order(x.n(), a)?;
    if k_max + 2 > x.p() {
        return Err(Error::InvalidBand { k: k_max, p: x.p() });
    }
    let path = t_block(x, &[a], 0, k_max + 1)?.pop().unwrap();
    if path.iter().all(Option::is_none) {
        return Err(Error::BandwidthUndefined { order: a });
    }
    Ok(path)
}

struct OrderState {
    order: usize,
    t: Vec<Option<f64>>,
    trace: Vec<Option<f64>>,
    found: Option<usize>,
}

/// Per-order and combined bandwidth estimates.
pub fn estimate_bandwidth(x: &SampleMatrix, orders: &OrderSet, config: &BandwidthConfig) -> Result<BandwidthResult> {
    let k_max = config.validate(x.p())?;
    for &a in orders.as_slice() {
        check_order(x.n(), a)?;
    }
    let scale = (x.n() as f64).powf(config.delta);
    let mut states: Vec<OrderState> = orders
        .as_slice()
        .iter()
        .map(|&a| OrderState {
            order: a,
            t: Vec::new(),
            trace: Vec::new(),
            found: None,
        })
        .collect();

    // T is needed for k = 0..=k_max; the trace d_k for k < k_max.
    let mut next = 0;
    let mut width = FIRST_BLOCK;
    while next <= k_max {
        let active: Vec<usize> = states
            .iter()
            .filter(|s| config.full_trace || s.found.is_none())
            .map(|s| s.order)
            .collect();
        if active.is_empty() {
            break;
        }
        let hi = (next + width - 1).min(k_max);
        let block = t_block(x, &active, next, hi)?;
        for (a, ts) in active.iter().zip(block) {
            let s = states.iter_mut().find(|s| s.order == *a).unwrap();
            for t in ts {
                s.t.push(t);
                let k = s.t.len() - 1;
                if k == 0 {
                    continue;
                }
                let d = match (s.t[k - 1], s.t[k]) {
                    (Some(t0), Some(t1)) => Some(scale * (t0 - t1)),
                    _ => None,
                };
                s.trace.push(d);
                if s.found.is_none() && d.is_some_and(|d| d.abs() < config.theta) {
                    s.found = Some(k - 1);
                }
            }
        }
        next = hi + 1;
        width *= 2;
    }

    let per_order: Vec<OrderBandwidth> = states
        .into_iter()
        .map(|s| {
            let undefined = s.found.is_none() && s.t.iter().all(Option::is_none);
            OrderBandwidth {
                order: s.order,
                estimate: if undefined { None } else { Some(s.found.unwrap_or(k_max)) },
                saturated: !undefined && s.found.is_none(),
                trace: s.trace,
            }
        })
        .collect();
    let combined = per_order
        .iter()
        .filter_map(|o| o.estimate)
        .max()
        .ok_or(Error::BandwidthUndefined { order: orders.as_slice()[0] })?;
    Ok(BandwidthResult {
        per_order,
        combined,
        k_max,
        delta: config.delta,
        theta: config.theta,
    })
}
