//! Brute-force enumeration of the defining sums.
//!
//! These functions follow the definitions literally and are only meant for
//! cross-checking the fast paths on tiny inputs. Every call estimates its
//! work up front and refuses with [`Error::TooLargeForOracle`] past
//! [`WORK_LIMIT`] terms.

use crate::distinct::falling_factorial;
use crate::error::{Error, Result};
use crate::sample::{off_band_pairs, BandSpec, SampleMatrix};

pub const WORK_LIMIT: f64 = 1e8;

fn guard(work: f64) -> Result<()> {
    if work > WORK_LIMIT {
        Err(Error::TooLargeForOracle { work })
    } else {
        Ok(())
    }
}

/// Calls `f(tuple)` for every ordered `len`-tuple of distinct indices below `n`.
fn for_each_distinct(n: usize, len: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, len: usize, used: &mut [bool], tuple: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if tuple.len() == len {
            f(tuple);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                tuple.push(i);
                rec(n, len, used, tuple, f);
                tuple.pop();
                used[i] = false;
            }
        }
    }
    rec(n, len, &mut vec![false; n], &mut Vec::with_capacity(len), f);
}

/// Sum over distinct `a`-tuples of `prod_l s[i_l]`, by enumeration.
pub fn distinct_product_sum_naive(s: &[f64], a: usize) -> Result<f64> {
    if a == 0 || a > s.len() {
        return Err(Error::InvalidOrder { order: a, n: s.len() });
    }
    guard(falling_factorial(s.len(), a))?;
    let mut total = 0.0;
    for_each_distinct(s.len(), a, &mut |t| total += t.iter().map(|&i| s[i]).product::<f64>());
    Ok(total)
}

/// Exact `U(a)` from its definition over ordered `2a`-tuples of distinct indices.
pub fn u_stat_naive(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<f64> {
    let n = x.n();
    if a == 0 || 2 * a > n {
        return Err(Error::InsufficientSamples { order: a, n, needed: 2 * a });
    }
    let pairs: Vec<_> = off_band_pairs(spec).collect();
    let perm = falling_factorial(n, 2 * a);
    guard(perm * pairs.len() as f64)?;
    let mut total = 0.0;
    for &(j1, j2) in &pairs {
        for_each_distinct(n, 2 * a, &mut |t| {
            let mut prod = 1.0;
            for l in 0..a {
                let (i, i2) = (t[2 * l], t[2 * l + 1]);
                prod *= x.get(i, j1) * x.get(i, j2) - x.get(i, j1) * x.get(i2, j2);
            }
            total += prod;
        });
    }
    Ok(total / perm)
}

fn product_tuple_sum(col: impl Fn(usize, usize) -> f64, n: usize, spec: BandSpec, a: usize) -> Result<f64> {
    if a == 0 || a > n {
        return Err(Error::InvalidOrder { order: a, n });
    }
    let pairs: Vec<_> = off_band_pairs(spec).collect();
    let perm = falling_factorial(n, a);
    guard(perm * pairs.len() as f64)?;
    let mut total = 0.0;
    for &(j1, j2) in &pairs {
        for_each_distinct(n, a, &mut |t| {
            total += t.iter().map(|&i| col(i, j1) * col(i, j2)).product::<f64>();
        });
    }
    Ok(total / perm)
}

/// `U~(a)` by enumeration of distinct `a`-tuples of raw products.
pub fn u_stat_tilde_naive(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<f64> {
    product_tuple_sum(|i, j| x.get(i, j), x.n(), spec, a)
}

/// Centered statistic `U_c(a)` by enumeration of distinct `a`-tuples.
pub fn u_stat_centered_naive(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<f64> {
    let means = x.column_means();
    product_tuple_sum(|i, j| x.get(i, j) - means[j], x.n(), spec, a)
}

/// Variance estimate by enumerating every constrained quadruple and every
/// distinct `a`-tuple of the four-way centered products.
pub fn variance_naive(x: &SampleMatrix, spec: BandSpec, a: usize) -> Result<f64> {
    let (n, p, k) = (x.n(), x.p(), spec.k);
    if a == 0 || a + 1 > n {
        return Err(Error::InsufficientSamples { order: a, n, needed: a + 1 });
    }
    let means = x.column_means();
    let c = |i: usize, j: usize| x.get(i, j) - means[j];
    let mut quads = Vec::new();
    for j1 in 0..p {
        for j2 in 0..p {
            if j1.abs_diff(j2) <= k {
                continue;
            }
            for j3 in 0..p {
                for j4 in 0..p {
                    if j3.abs_diff(j4) > k && j1.abs_diff(j3) <= k && j2.abs_diff(j4) <= k {
                        quads.push([j1, j2, j3, j4]);
                    }
                }
            }
        }
    }
    let perm = falling_factorial(n, a);
    guard(perm * quads.len() as f64)?;
    let mut total = 0.0;
    for q in &quads {
        let s: Vec<f64> = (0..n).map(|i| q.iter().map(|&j| c(i, j)).product()).collect();
        for_each_distinct(n, a, &mut |t| total += t.iter().map(|&i| s[i]).product::<f64>());
    }
    let fact: f64 = (1..=a).map(|t| t as f64).product();
    Ok(2.0 * fact * total / (perm * perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_tuples() {
        let mut count = 0;
        for_each_distinct(5, 3, &mut |t| {
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
            count += 1;
        });
        assert_eq!(count, 60);
        assert_eq!(distinct_product_sum_naive(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), 70.0);
    }

    #[test]
    fn zero_and_empty_cases() {
        let zero = SampleMatrix::from_rows(&vec![vec![0.0; 4]; 5]).unwrap();
        assert_eq!(u_stat_naive(&zero, BandSpec::new(0, 4).unwrap(), 2).unwrap(), 0.0);
        let x = SampleMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![3.0, 4.0, -1.0], vec![0.0, 1.0, 2.0]]).unwrap();
        assert_eq!(u_stat_naive(&x, BandSpec::new(2, 3).unwrap(), 1).unwrap(), 0.0);
    }

    #[test]
    fn guard_refuses_large_work() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 1.0, 2.0 * i as f64]).collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            u_stat_naive(&x, BandSpec::new(0, 3).unwrap(), 4),
            Err(Error::TooLargeForOracle { .. })
        ));
    }
}
