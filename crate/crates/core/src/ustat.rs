//! The U-statistic family `U(a)` for the off-band set and its variance estimate.
//!
//! `U(a)` is an unbiased estimator of `sum_{k < |j1-j2| < p} sigma_{j1 j2}^a`.
//! Orders 1 and 2 are evaluated exactly through closed forms in per-pair
//! sums; orders `a >= 3` use the centered statistic
//!
//! ```text
//! U_c(a) = (P^n_a)^{-1} sum_{pairs} sum_{distinct i_1..i_a} prod_l (x_{i_l,j1} - xbar_j1)(x_{i_l,j2} - xbar_j2)
//! ```
//!
//! which is asymptotically equivalent to the exact statistic. The exact
//! definition is available in [`crate::oracle::u_stat_naive`] for small inputs.

use crate::distinct::{distinct_sums_in_place, falling_factorial, product_power_sums};
use crate::error::{Error, Result};
use crate::sample::{BandSpec, SampleMatrix};
use crate::sweep::band_sweep;

/// Non-fatal conditions attached to a computed statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// The off-band set is empty, so the statistic is identically zero.
    ZeroStatistic,
}

/// A statistic value with an optional warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatValue {
    pub value: f64,
    pub warning: Option<Warning>,
}

impl StatValue {
    fn zero_set() -> Self {
        Self {
            value: 0.0,
            warning: Some(Warning::ZeroStatistic),
        }
    }
}

fn check_spec(x: &SampleMatrix, spec: BandSpec) -> Result<()> {
    if spec.p != x.p() {
        return Err(Error::InvalidParameter(format!(
            "band spec is for p = {}, data has p = {}",
            spec.p,
            x.p()
        )));
    }
    Ok(())
}

/// Leading term `U~(a)` for data with known zero mean.
pub fn u_stat_tilde(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<StatValue> {
    check_spec(x, spec)?;
    let n = x.n();
    if a == 0 || a > n || a > crate::distinct::MAX_ORDER {
        return Err(Error::InvalidOrder { order: a, n });
    }
    if spec.is_empty() {
        return Ok(StatValue::zero_set());
    }
    let mut power = vec![0.0; a];
    let mut dsum = vec![0.0; a];
    let mut total = crate::accumulate::CompensatedSum::default();
    for j1 in 0..x.p() {
        for j2 in (j1 + spec.k + 1)..x.p() {
            product_power_sums(x.column(j1), x.column(j2), &mut power);
            distinct_sums_in_place(&power, &mut dsum);
            total.add(dsum[a - 1]);
        }
    }
    Ok(StatValue {
        value: 2.0 * total.value() / falling_factorial(n, a),
        warning: None,
    })
}

/// Unknown-mean statistic `U(a)` at bandwidth `spec.k`.
pub fn u_stat(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<StatValue> {
    check_spec(x, spec)?;
    let n = x.n();
    if a == 0 || a > crate::distinct::MAX_ORDER {
        return Err(Error::InvalidOrder { order: a, n });
    }
    if n < 2 * a {
        return Err(Error::InsufficientSamples {
            order: a,
            n,
            needed: 2 * a,
        });
    }
    if spec.is_empty() {
        return Ok(StatValue::zero_set());
    }
    let sweep = band_sweep(x, &[a], spec.k, spec.k, false)?;
    Ok(StatValue {
        value: sweep.value(spec.k, a).expect("order and k are in range"),
        warning: None,
    })
}

/// Variance estimate `sigma_hat^2(a)` of `U(a)` at bandwidth `spec.k`.
///
/// Degenerate results (empty index set or a non-positive estimate) are
/// errors so no z-score is ever formed from them.
pub fn variance_estimate(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<f64> {
    check_spec(x, spec)?;
    let n = x.n();
    if a == 0 || a > crate::distinct::MAX_ORDER {
        return Err(Error::InvalidOrder { order: a, n });
    }
    if n < a + 1 {
        return Err(Error::InsufficientSamples {
            order: a,
            n,
            needed: a + 1,
        });
    }
    if spec.is_empty() {
        return Err(Error::DegenerateVariance { order: a, k: spec.k });
    }
    let sweep = band_sweep(x, &[a], spec.k, spec.k, true)?;
    let var = sweep.variance(spec.k, a).expect("order and k are in range");
    if var > 0.0 && var.is_finite() {
        Ok(var)
    } else {
        Err(Error::DegenerateVariance { order: a, k: spec.k })
    }
}
