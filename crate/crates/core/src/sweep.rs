//! Statistics and variance estimates for a whole range of bandwidths in one pass.
//!
//! **Statistic.** Every unordered column pair `j1 < j2` with gap
//! `d = j2 - j1` belongs to the off-band set of bandwidth `k` exactly when
//! `d > k`, so per-gap totals turn the sweep over `k` into suffix sums.
//!
//! **Variance.** The estimator sums, over ordered quadruples
//! `(j1, j2, j3, j4)` with `|j1-j2| > k`, `|j3-j4| > k`, `|j1-j3| <= k` and
//! `|j2-j4| <= k`, a distinct-index sum of the row products
//! `w_i = c_{i,j1} c_{i,j2} c_{i,j3} c_{i,j4}` of centered data. `w` only
//! depends on the multiset `{j1, j2, j3, j4}`. For a sorted multiset
//! `v1 <= v2 <= v3 <= v4` with gaps `g1, g2, g3`, the admissible role
//! assignments pair `{v1, v2}` and `{v3, v4}` as the close pairs and fall
//! into two classes, valid for `k` in
//!
//! ```text
//! A: max(g1, g3) <= k < g2 + min(g1, g3)
//! B: max(g1, g3) <= k < g2
//! ```
//!
//! each class holding `4 / sym` ordered quadruples, where `sym` is the
//! product of factorials of repeated values. Each multiset is therefore
//! evaluated once and its contribution spread over a `k`-interval through a
//! difference array.
//!
//! Work is split into fixed chunks of the outer column index and reduced in
//! chunk order, so results do not depend on the number of threads.

use rayon::prelude::*;

use crate::accumulate::CompensatedSum;
use crate::distinct::{distinct_sums_in_place, falling_factorial, product_power_sums};
use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

const CHUNK: usize = 8;
/// Pair products are cached when they fit in this many doubles.
const PAIR_CACHE_LIMIT: usize = 1 << 25;

/// Per-bandwidth statistics for `k` in `k_lo..=k_hi`.
#[derive(Debug, Clone)]
pub struct BandSweep {
    k_lo: usize,
    k_hi: usize,
    orders: Vec<usize>,
    values: Vec<f64>,
    variances: Option<Vec<f64>>,
}

impl BandSweep {
    pub fn k_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k_lo..=self.k_hi
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    fn slot(&self, k: usize, order: usize) -> Option<usize> {
        if k < self.k_lo || k > self.k_hi {
            return None;
        }
        let idx = self.orders.iter().position(|&a| a == order)?;
        Some((k - self.k_lo) * self.orders.len() + idx)
    }

    /// `U(a)` at bandwidth `k`.
    pub fn value(&self, k: usize, order: usize) -> Option<f64> {
        self.slot(k, order).map(|s| self.values[s])
    }

    /// Variance estimate of `U(a)` at bandwidth `k`, if it was computed.
    pub fn variance(&self, k: usize, order: usize) -> Option<f64> {
        let s = self.slot(k, order)?;
        self.variances.as_ref().map(|v| v[s])
    }
}

/// Computes statistics (and optionally variances) for all bandwidths in `k_lo..=k_hi`.
///
/// Orders `a <= 2` use the exact unknown-mean forms; orders `a >= 3` use the
/// centered statistic. Requires `n >= max(orders)`; callers enforce the
/// stricter sample-size preconditions of the individual statistics.
pub fn band_sweep(
    x: &SampleMatrix,
    orders: &[usize],
    k_lo: usize,
    k_hi: usize,
    with_variance: bool,
) -> Result<BandSweep> {
    let (n, p) = (x.n(), x.p());
    if orders.is_empty() {
        return Err(Error::InvalidParameter("empty order list".into()));
    }
    let a_max = *orders.iter().max().unwrap();
    if orders.contains(&0) || a_max > crate::distinct::MAX_ORDER || a_max > n {
        let bad = orders
            .iter()
            .copied()
            .find(|&a| a == 0 || a > crate::distinct::MAX_ORDER || a > n)
            .unwrap();
        return Err(Error::InvalidOrder { order: bad, n });
    }
    if k_lo > k_hi || k_hi + 1 > p {
        return Err(Error::InvalidBand { k: k_hi, p });
    }
    let centered = x.centered();
    let data = Centered {
        n,
        p,
        cols: &centered,
    };
    let values = pair_sweep(&data, orders, k_lo, k_hi);
    let variances = with_variance.then(|| quad_sweep(&data, orders, k_lo, k_hi));
    Ok(BandSweep {
        k_lo,
        k_hi,
        orders: orders.to_vec(),
        values,
        variances,
    })
}

struct Centered<'a> {
    n: usize,
    p: usize,
    cols: &'a [f64],
}

impl Centered<'_> {
    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }
}

/// Unknown-mean `U(1)` for one unordered pair from its raw sums.
#[inline]
pub(crate) fn order_one_pair(n: f64, su: f64, sv: f64, sy: f64) -> f64 {
    sy / n - (su * sv - sy) / (n * (n - 1.0))
}

/// Sums needed by the closed form of `U(2)` for one column pair `(u, v)`, `y = u v`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct OrderTwoSums {
    pub su: f64,
    pub sv: f64,
    pub suu: f64,
    pub svv: f64,
    pub sy: f64,
    pub syy: f64,
    pub suuv: f64,
    pub suvv: f64,
}

/// Unknown-mean `U(2)` for one unordered pair.
#[inline]
pub(crate) fn order_two_pair(n: usize, s: &OrderTwoSums) -> f64 {
    let u0 = s.sy * s.sy - s.syy;
    let u11 = s.su * s.sv - s.sy;
    let u12 = s.suuv * s.sv - s.syy;
    let u13 = s.suvv * s.su - s.syy;
    let u1 = s.sy * u11 - u12 - u13;
    let u2 = (s.su * s.su - s.suu) * (s.sv * s.sv - s.svv) - 2.0 * u0 - 4.0 * u1;
    u0 / falling_factorial(n, 2) - 2.0 * u1 / falling_factorial(n, 3)
        + u2 / falling_factorial(n, 4)
}

fn pair_sweep(data: &Centered<'_>, orders: &[usize], k_lo: usize, k_hi: usize) -> Vec<f64> {
    let (n, p) = (data.n, data.p);
    let m = orders.len();
    let a_max = *orders.iter().max().unwrap();
    let n_powers = a_max.max(1);
    let need_two = orders.contains(&2);
    let scale: Vec<f64> = orders.iter().map(|&a| falling_factorial(n, a)).collect();

    let col_sums: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let c = data.col(j);
            (c.iter().sum(), c.iter().map(|v| v * v).sum())
        })
        .collect();

    // Per-gap totals, gap d stored at index d.
    let n_chunks = p.div_ceil(CHUNK);
    let partial: Vec<Vec<CompensatedSum>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut gap = vec![CompensatedSum::default(); p * m];
            let mut power = vec![0.0; n_powers];
            let mut dsum = vec![0.0; n_powers];
            for j1 in chunk * CHUNK..((chunk + 1) * CHUNK).min(p) {
                let u = data.col(j1);
                for j2 in (j1 + k_lo + 1)..p {
                    let v = data.col(j2);
                    product_power_sums(u, v, &mut power);
                    let sy = power[0];
                    let mut two = OrderTwoSums::default();
                    if need_two {
                        let (mut suuv, mut suvv) = (0.0, 0.0);
                        for (a, b) in u.iter().zip(v) {
                            let y = a * b;
                            suuv += y * a;
                            suvv += y * b;
                        }
                        two = OrderTwoSums {
                            su: col_sums[j1].0,
                            sv: col_sums[j2].0,
                            suu: col_sums[j1].1,
                            svv: col_sums[j2].1,
                            sy,
                            syy: power[1],
                            suuv,
                            suvv,
                        };
                    }
                    if a_max >= 3 {
                        distinct_sums_in_place(&power, &mut dsum);
                    }
                    let d = j2 - j1;
                    for (idx, &a) in orders.iter().enumerate() {
                        let val = match a {
                            1 => order_one_pair(n as f64, col_sums[j1].0, col_sums[j2].0, sy),
                            2 => order_two_pair(n, &two),
                            _ => dsum[a - 1] / scale[idx],
                        };
                        gap[d * m + idx].add(val);
                    }
                }
            }
            gap
        })
        .collect();

    let mut gap = vec![CompensatedSum::default(); p * m];
    for part in &partial {
        for (g, q) in gap.iter_mut().zip(part) {
            g.merge(q);
        }
    }

    // U(a, k) = 2 * sum_{d > k} gap[d]
    let width = k_hi - k_lo + 1;
    let mut out = vec![0.0; width * m];
    let mut suffix = vec![CompensatedSum::default(); m];
    for d in (k_lo + 1..p).rev() {
        for idx in 0..m {
            suffix[idx].merge(&gap[d * m + idx]);
        }
        let k = d - 1;
        if k <= k_hi {
            for idx in 0..m {
                out[(k - k_lo) * m + idx] = 2.0 * suffix[idx].value();
            }
        }
    }
    out
}

fn quad_sweep(data: &Centered<'_>, orders: &[usize], k_lo: usize, k_hi: usize) -> Vec<f64> {
    let (n, p) = (data.n, data.p);
    let m = orders.len();
    let a_max = *orders.iter().max().unwrap();
    let kw = k_hi + 1;
    let width = k_hi - k_lo + 1;

    // Products c_v * c_{v+g} for g <= k_hi.
    let cache: Option<Vec<f64>> = (p * kw * n <= PAIR_CACHE_LIMIT).then(|| {
        let mut buf = vec![0.0; p * kw * n];
        for v in 0..p {
            for g in 0..kw.min(p - v) {
                let (a, b) = (data.col(v), data.col(v + g));
                let dst = &mut buf[(v * kw + g) * n..(v * kw + g + 1) * n];
                for i in 0..n {
                    dst[i] = a[i] * b[i];
                }
            }
        }
        buf
    });

    let n_chunks = p.div_ceil(CHUNK);
    let partial: Vec<Vec<CompensatedSum>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut diff = vec![CompensatedSum::default(); (width + 1) * m];
            let mut left = vec![0.0; n];
            let mut right_buf = vec![0.0; n];
            let mut power = vec![0.0; a_max];
            let mut dsum = vec![0.0; a_max];
            for v1 in chunk * CHUNK..((chunk + 1) * CHUNK).min(p) {
                for g1 in 0..kw.min(p - v1) {
                    let v2 = v1 + g1;
                    for i in 0..n {
                        left[i] = data.col(v1)[i] * data.col(v2)[i];
                    }
                    for g3 in 0..kw {
                        let lo_gap = g1.min(g3);
                        let lo = g1.max(g3);
                        let g2_start = 1
                            .max(g1.abs_diff(g3) + 1)
                            .max((k_lo + 1).saturating_sub(lo_gap));
                        let sym = if g1 == 0 { 2 } else { 1 } * if g3 == 0 { 2 } else { 1 };
                        let weight = (4 / sym) as f64;
                        let mut g2 = g2_start;
                        loop {
                            let v3 = v2 + g2;
                            let v4 = v3 + g3;
                            if v4 >= p {
                                break;
                            }
                            let start = lo.max(k_lo);
                            let end_a = (g2 + lo_gap).min(k_hi + 1);
                            let end_b = g2.min(k_hi + 1);
                            if start < end_a {
                                let right: &[f64] = match &cache {
                                    Some(buf) => &buf[(v3 * kw + g3) * n..(v3 * kw + g3 + 1) * n],
                                    None => {
                                        let (a, b) = (data.col(v3), data.col(v4));
                                        for i in 0..n {
                                            right_buf[i] = a[i] * b[i];
                                        }
                                        &right_buf
                                    }
                                };
                                product_power_sums(&left, right, &mut power);
                                distinct_sums_in_place(&power, &mut dsum);
                                let both = end_b > start;
                                for (idx, &a) in orders.iter().enumerate() {
                                    let val = weight * dsum[a - 1];
                                    let first = if both { 2.0 * val } else { val };
                                    diff[(start - k_lo) * m + idx].add(first);
                                    diff[(end_a - k_lo) * m + idx].add(-val);
                                    if both {
                                        diff[(end_b - k_lo) * m + idx].add(-val);
                                    }
                                }
                            }
                            g2 += 1;
                        }
                    }
                }
            }
            diff
        })
        .collect();

    let mut diff = vec![CompensatedSum::default(); (width + 1) * m];
    for part in &partial {
        for (d, q) in diff.iter_mut().zip(part) {
            d.merge(q);
        }
    }

    let scale: Vec<f64> = orders
        .iter()
        .map(|&a| {
            let fact: f64 = (1..=a).map(|t| t as f64).product();
            let perm = falling_factorial(n, a);
            2.0 * fact / (perm * perm)
        })
        .collect();
    let mut out = vec![0.0; width * m];
    let mut running = vec![CompensatedSum::default(); m];
    for w in 0..width {
        for idx in 0..m {
            running[idx].merge(&diff[w * m + idx]);
            out[w * m + idx] = scale[idx] * running[idx].value();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, p: usize, seed: u64) -> SampleMatrix {
        let mut state = seed;
        let data: Vec<f64> = (0..n * p)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            })
            .collect();
        SampleMatrix::from_row_major(n, p, &data).unwrap()
    }

    /// Direct quadruple enumeration at one k, distinct sums via Newton.
    fn quad_direct(x: &SampleMatrix, a: usize, k: usize) -> f64 {
        let (n, p) = (x.n(), x.p());
        let c = x.centered();
        let col = |j: usize| &c[j * n..(j + 1) * n];
        let mut total = 0.0;
        for j1 in 0..p {
            for j2 in 0..p {
                if j1.abs_diff(j2) <= k {
                    continue;
                }
                for j3 in 0..p {
                    if j1.abs_diff(j3) > k {
                        continue;
                    }
                    for j4 in 0..p {
                        if j2.abs_diff(j4) > k || j3.abs_diff(j4) <= k {
                            continue;
                        }
                        let s: Vec<f64> = (0..n)
                            .map(|i| col(j1)[i] * col(j2)[i] * col(j3)[i] * col(j4)[i])
                            .collect();
                        total += crate::distinct::distinct_product_sum(&s, a).unwrap();
                    }
                }
            }
        }
        let fact: f64 = (1..=a).map(|t| t as f64).product();
        let perm = falling_factorial(n, a);
        2.0 * fact / (perm * perm) * total
    }

    #[test]
    fn multiset_classes_match_direct_quadruples() {
        let x = toy(9, 7, 3);
        let orders = [1, 2, 3];
        let sweep = band_sweep(&x, &orders, 0, 6, true).unwrap();
        for k in 0..=6 {
            for &a in &orders {
                let want = quad_direct(&x, a, k);
                let got = sweep.variance(k, a).unwrap();
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1e-12),
                    "k={k} a={a}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn sweep_equals_single_bandwidth_runs() {
        let x = toy(12, 9, 17);
        let orders = [1, 2, 4];
        let full = band_sweep(&x, &orders, 0, 7, true).unwrap();
        for k in 0..=7 {
            let single = band_sweep(&x, &orders, k, k, true).unwrap();
            for &a in &orders {
                let (fv, sv) = (full.value(k, a).unwrap(), single.value(k, a).unwrap());
                assert!((fv - sv).abs() <= 1e-12 * sv.abs().max(1e-12));
                let (fv, sv) = (full.variance(k, a).unwrap(), single.variance(k, a).unwrap());
                assert!((fv - sv).abs() <= 1e-10 * sv.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn empty_set_at_sentinel() {
        let x = toy(6, 4, 1);
        let s = band_sweep(&x, &[1, 2], 3, 3, true).unwrap();
        assert_eq!(s.value(3, 1), Some(0.0));
        assert_eq!(s.variance(3, 2), Some(0.0));
        assert!(s.value(2, 1).is_none());
        assert!(s.value(3, 5).is_none());
    }

    #[test]
    fn rejects_bad_requests() {
        let x = toy(6, 4, 1);
        assert!(band_sweep(&x, &[], 0, 1, false).is_err());
        assert!(band_sweep(&x, &[7], 0, 1, false).is_err());
        assert!(band_sweep(&x, &[1], 0, 4, false).is_err());
        assert!(band_sweep(&x, &[1], 2, 1, false).is_err());
    }
}
