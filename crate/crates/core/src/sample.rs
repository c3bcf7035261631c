//! Sample matrices and band specifications.
//!
//! A [`SampleMatrix`] holds `n` observations of a `p`-dimensional vector.
//! Storage is column-major since every statistic in this crate walks
//! columns pairwise (or four at a time).

use std::sync::OnceLock;

use crate::accumulate::CompensatedSum;
use crate::error::{Error, Result};

/// `n x p` data matrix, rows are samples and columns are variables.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    cols: Vec<f64>,
    means: OnceLock<Vec<f64>>,
}

impl SampleMatrix {
    /// Builds a matrix from row-major data of length `n * p`.
    pub fn from_row_major(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                data.len()
            )));
        }
        let mut cols = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                cols[j * n + i] = data[i * p + j];
            }
        }
        Self::from_col_major(n, p, cols)
    }

    /// Builds a matrix from column-major data (column `j` occupies `j*n..(j+1)*n`).
    pub fn from_col_major(n: usize, p: usize, cols: Vec<f64>) -> Result<Self> {
        if n < 2 || p < 2 {
            return Err(Error::InvalidData(format!(
                "need n >= 2 and p >= 2, got n = {n}, p = {p}"
            )));
        }
        if cols.len() != n * p {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                cols.len()
            )));
        }
        if let Some(pos) = cols.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self {
            n,
            p,
            cols,
            means: OnceLock::new(),
        })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: p,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(n, p, &data)
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j * self.n + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Column means, computed once with compensated summation.
    pub fn column_means(&self) -> &[f64] {
        self.means.get_or_init(|| {
            (0..self.p)
                .map(|j| {
                    let mut acc = CompensatedSum::default();
                    for &v in self.column(j) {
                        acc.add(v);
                    }
                    acc.value() / self.n as f64
                })
                .collect()
        })
    }

    /// Column-major copy with each column shifted to mean zero.
    pub fn centered(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut out = self.cols.clone();
        for (j, &m) in means.iter().enumerate() {
            for v in &mut out[j * self.n..(j + 1) * self.n] {
                *v -= m;
            }
        }
        out
    }

    /// Row-major copy of the data.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.p];
        for j in 0..self.p {
            for i in 0..self.n {
                out[i * self.p + j] = self.cols[j * self.n + i];
            }
        }
        out
    }

    /// Returns a matrix whose rows are `self`'s rows reordered by `perm`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidData("permutation length mismatch".into()));
        }
        let mut cols = vec![0.0; self.n * self.p];
        for j in 0..self.p {
            let src = self.column(j);
            for (dst, &i) in perm.iter().enumerate() {
                cols[j * self.n + dst] = src[i];
            }
        }
        Self::from_col_major(self.n, self.p, cols)
    }
}

/// Bandwidth `k` in dimension `p`; the off-band set is `{(j1, j2): k < |j1 - j2| < p}`.
///
/// `k = p - 1` is accepted as a sentinel (empty off-band set); hypothesis
/// tests reject it through [`BandSpec::require_testable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BandSpec {
    pub k: usize,
    pub p: usize,
}

impl BandSpec {
    pub fn new(k: usize, p: usize) -> Result<Self> {
        if p == 0 || k + 1 > p {
            return Err(Error::InvalidBand { k, p });
        }
        Ok(Self { k, p })
    }

    /// True when the off-band set is empty.
    pub fn is_empty(&self) -> bool {
        self.k + 1 >= self.p
    }

    pub fn require_testable(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyHypothesisSet {
                k: self.k,
                p: self.p,
            })
        } else {
            Ok(())
        }
    }

    /// Number of ordered off-band pairs, `(p - k - 1)(p - k)`.
    pub fn off_band_count(&self) -> usize {
        (self.p - self.k - 1) * (self.p - self.k)
    }

    /// Whether the ordered pair `(j1, j2)` lies off the band.
    #[inline]
    pub fn is_off_band(&self, j1: usize, j2: usize) -> bool {
        j1.abs_diff(j2) > self.k
    }
}

/// Ordered off-band pairs (0-based) in row-major order.
pub fn off_band_pairs(spec: BandSpec) -> impl Iterator<Item = (usize, usize)> {
    let p = spec.p;
    (0..p).flat_map(move |j1| {
        (0..p)
            .filter(move |&j2| spec.is_off_band(j1, j2))
            .map(move |j2| (j1, j2))
    })
}
