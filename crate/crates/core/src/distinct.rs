//! Sums over tuples of distinct indices.
//!
//! For a vector `s` of length `n`, the sum over all ordered `a`-tuples of
//! pairwise distinct indices of `s[i1] * ... * s[ia]` equals `a! * e_a(s)`,
//! where `e_a` is the elementary symmetric polynomial. `e_a` follows from the
//! power sums `P_r = sum_i s_i^r` through Newton's identities
//!
//! ```text
//! e_0 = 1,   e_r = (1/r) * sum_{t=1..r} (-1)^(t-1) e_{r-t} P_t,
//! ```
//!
//! so the cost is `O(n a + a^2)` instead of `O(n^a)`.

use crate::accumulate::CompensatedSum;
use crate::error::{Error, Result};

/// Sum over ordered `a`-tuples of distinct indices of `prod_l s[i_l]`.
pub fn distinct_product_sum(s: &[f64], a: usize) -> Result<f64> {
    if a == 0 || a > s.len() {
        return Err(Error::InvalidOrder {
            order: a,
            n: s.len(),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite entry in product vector".into()));
    }
    let mut sums = vec![CompensatedSum::default(); a];
    for &v in s {
        let mut pw = v;
        for acc in sums.iter_mut() {
            acc.add(pw);
            pw *= v;
        }
    }
    let power: Vec<f64> = sums.iter().map(CompensatedSum::value).collect();
    Ok(distinct_sums_from_power_sums(&power)[a - 1])
}

/// Given power sums `P_1..P_m`, returns `D_1..D_m` with `D_r = r! e_r`.
pub fn distinct_sums_from_power_sums(power: &[f64]) -> Vec<f64> {
    let m = power.len();
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for r in 1..=m {
        let mut acc = 0.0;
        for t in 1..=r {
            let term = e[r - t] * power[t - 1];
            if t % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[r] = acc / r as f64;
    }
    let mut fact = 1.0;
    (1..=m)
        .map(|r| {
            fact *= r as f64;
            fact * e[r]
        })
        .collect()
}

/// Largest order accepted by the statistic kernels.
pub const MAX_ORDER: usize = 32;

/// Allocation-free variant of [`distinct_sums_from_power_sums`] for
/// `power.len() <= MAX_ORDER`; writes `D_r` into `out[r - 1]`.
#[inline]
pub(crate) fn distinct_sums_in_place(power: &[f64], out: &mut [f64]) {
    let m = power.len();
    debug_assert!(m <= MAX_ORDER && out.len() >= m);
    let mut e = [0.0f64; MAX_ORDER + 1];
    e[0] = 1.0;
    let mut fact = 1.0;
    for r in 1..=m {
        let mut acc = 0.0;
        for t in 1..=r {
            let term = e[r - t] * power[t - 1];
            if t % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[r] = acc / r as f64;
        fact *= r as f64;
        out[r - 1] = fact * e[r];
    }
}

/// Number of `a`-permutations of `n`, `n! / (n - a)!`.
pub fn falling_factorial(n: usize, a: usize) -> f64 {
    if a > n {
        return 0.0;
    }
    let mut exact: u128 = 1;
    for t in 0..a {
        match exact.checked_mul((n - t) as u128) {
            Some(v) => exact = v,
            None => {
                let log: f64 = (0..a).map(|t| ((n - t) as f64).ln()).sum();
                return log.exp();
            }
        }
    }
    exact as f64
}

pub(crate) const LANES: usize = 4;

/// Power sums `sum_i (x_i y_i)^r` for `r = 1..=R`.
///
/// Lane-split accumulation with a fixed reduction order, so results are
/// reproducible bit for bit.
#[inline]
fn power_sums_fixed<const R: usize>(x: &[f64], y: &[f64], out: &mut [f64]) {
    let mut acc = [[0.0f64; LANES]; R];
    let chunks = x.len() / LANES;
    for c in 0..chunks {
        let xs = &x[c * LANES..c * LANES + LANES];
        let ys = &y[c * LANES..c * LANES + LANES];
        let mut w = [0.0f64; LANES];
        for l in 0..LANES {
            w[l] = xs[l] * ys[l];
        }
        let mut pw = w;
        for row in acc.iter_mut() {
            for l in 0..LANES {
                row[l] += pw[l];
            }
            for l in 0..LANES {
                pw[l] *= w[l];
            }
        }
    }
    for r in 0..R {
        out[r] = (acc[r][0] + acc[r][1]) + (acc[r][2] + acc[r][3]);
    }
    for i in chunks * LANES..x.len() {
        let w = x[i] * y[i];
        let mut pw = w;
        for o in out.iter_mut().take(R) {
            *o += pw;
            pw *= w;
        }
    }
}

fn power_sums_general(x: &[f64], y: &[f64], out: &mut [f64]) {
    for o in out.iter_mut() {
        *o = 0.0;
    }
    for (a, b) in x.iter().zip(y) {
        let w = a * b;
        let mut pw = w;
        for o in out.iter_mut() {
            *o += pw;
            pw *= w;
        }
    }
}

/// Power sums of the elementwise product `x * y`, orders `1..=out.len()`.
pub(crate) fn product_power_sums(x: &[f64], y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    match out.len() {
        0 => {}
        1 => power_sums_fixed::<1>(x, y, out),
        2 => power_sums_fixed::<2>(x, y, out),
        3 => power_sums_fixed::<3>(x, y, out),
        4 => power_sums_fixed::<4>(x, y, out),
        5 => power_sums_fixed::<5>(x, y, out),
        6 => power_sums_fixed::<6>(x, y, out),
        7 => power_sums_fixed::<7>(x, y, out),
        8 => power_sums_fixed::<8>(x, y, out),
        _ => power_sums_general(x, y, out),
    }
}
