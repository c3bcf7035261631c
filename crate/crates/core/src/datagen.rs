//! Covariance models `Sigma = Gamma Gamma^T` and reproducible sampling.
//!
//! `x = Gamma z` with `z` standard normal, or `x = Gamma z / sqrt(w / 7)` with
//! `w ~ chi^2_7` for the multivariate t with seven degrees of freedom. Every
//! row draws from its own ChaCha stream, so a matrix depends only on the
//! seed and never on how rows are scheduled across threads.

use std::sync::OnceLock;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

/// Mixes a master seed with an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    S1,
    S2,
    S3,
    M1,
    M2,
    M3,
    M4,
}

impl Setting {
    /// Bandwidth `k` of the null hypothesis the setting is built around.
    pub fn null_bandwidth(self) -> usize {
        match self {
            Setting::S1 => 1,
            Setting::S2 | Setting::M1 => 2,
            Setting::S3 | Setting::M2 => 5,
            Setting::M3 => 10,
            Setting::M4 => 15,
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "S1" => Setting::S1,
            "S2" => Setting::S2,
            "S3" => Setting::S3,
            "M1" => Setting::M1,
            "M2" => Setting::M2,
            "M3" => Setting::M3,
            "M4" => Setting::M4,
            _ => return Err(Error::InvalidParameter(format!("unknown setting {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Normal,
    /// Standard multivariate t_7, covariance `(7/5) Sigma`.
    T7,
    /// Multivariate t_7 rescaled to covariance `Sigma`.
    T7UnitCovariance,
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Distribution::Normal),
            "t7" => Ok(Distribution::T7),
            "t7-unit" | "t7-unit-covariance" => Ok(Distribution::T7UnitCovariance),
            _ => Err(Error::InvalidParameter(format!("unknown distribution {s:?}"))),
        }
    }
}

/// Signal parameters; unused fields are ignored by settings that do not need them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingParams {
    pub rho: f64,
    /// `|J_A|`, number of signal positions in `Gamma` (S1, S2).
    pub sparsity: usize,
    /// Signal diagonal `5 + a_offset` (S3); 0 means no signal.
    pub a_offset: usize,
    pub seed: u64,
}

impl Default for SettingParams {
    fn default() -> Self {
        Self {
            rho: 0.0,
            sparsity: 0,
            a_offset: 0,
            seed: 0,
        }
    }
}

/// Sparse `p x p` generator stored by diagonals plus scattered extra entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    p: usize,
    /// `(offset, values)`: `gamma[j][j + offset] = values[j]`; entries outside the matrix are zero.
    diagonals: Vec<(isize, Vec<f64>)>,
    extras: Vec<(usize, usize, f64)>,
}

impl GeneratorMatrix {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            diagonals: Vec::new(),
            extras: Vec::new(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn set_diagonal(&mut self, offset: isize, value: f64) {
        self.set_diagonal_values(offset, vec![value; self.p]);
    }

    pub fn set_diagonal_values(&mut self, offset: isize, mut values: Vec<f64>) {
        values.resize(self.p, 0.0);
        for (j, v) in values.iter_mut().enumerate() {
            let col = j as isize + offset;
            if col < 0 || col >= self.p as isize {
                *v = 0.0;
            }
        }
        match self.diagonals.iter_mut().find(|(o, _)| *o == offset) {
            Some(slot) => slot.1 = values,
            None => self.diagonals.push((offset, values)),
        }
    }

    pub fn add_entry(&mut self, row: usize, col: usize, value: f64) {
        self.extras.push((row, col, value));
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let offset = col as isize - row as isize;
        let band: f64 = self
            .diagonals
            .iter()
            .filter(|(o, _)| *o == offset)
            .map(|(_, v)| v[row])
            .sum();
        let extra: f64 = self
            .extras
            .iter()
            .filter(|&&(r, c, _)| r == row && c == col)
            .map(|e| e.2)
            .sum();
        band + extra
    }

    /// Nonzero entries of each row, `(column, value)`.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.p];
        for (offset, values) in &self.diagonals {
            for (j, &v) in values.iter().enumerate() {
                if v != 0.0 {
                    rows[j].push(((j as isize + offset) as usize, v));
                }
            }
        }
        for &(r, c, v) in &self.extras {
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        rows
    }

    /// Dense row-major `Gamma Gamma^T`.
    pub fn gram(&self) -> Vec<f64> {
        let p = self.p;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
        for (r, row) in self.rows().into_iter().enumerate() {
            for (c, v) in row {
                cols[c].push((r, v));
            }
        }
        let mut sigma = vec![0.0; p * p];
        for col in &cols {
            for &(a, va) in col {
                for &(b, vb) in col {
                    sigma[a * p + b] += va * vb;
                }
            }
        }
        sigma
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub gamma: GeneratorMatrix,
    pub distribution: Distribution,
    /// Exact bandwidth of `Sigma`, when known.
    pub true_bandwidth: Option<usize>,
    /// Signal positions `(j1, j2)` in `Gamma`, `j2 - j1 > k`.
    pub alternative_positions: Vec<(usize, usize)>,
    sigma: OnceLock<Vec<f64>>,
}

impl CovarianceModel {
    pub fn new(gamma: GeneratorMatrix, distribution: Distribution, true_bandwidth: Option<usize>) -> Self {
        Self {
            gamma,
            distribution,
            true_bandwidth,
            alternative_positions: Vec::new(),
            sigma: OnceLock::new(),
        }
    }

    pub fn p(&self) -> usize {
        self.gamma.p
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    /// Dense row-major `Sigma = Gamma Gamma^T`, computed on first use.
    pub fn sigma(&self) -> &[f64] {
        self.sigma.get_or_init(|| self.gamma.gram())
    }

    /// Covariance of one draw, including the t_7 scale factor.
    pub fn covariance_scale(&self) -> f64 {
        match self.distribution {
            Distribution::T7 => 7.0 / 5.0,
            _ => 1.0,
        }
    }

    /// `sum_{k < |j1 - j2| < p} sigma_{j1 j2}^a` over ordered pairs.
    pub fn off_band_power_sum(&self, k: usize, a: usize) -> f64 {
        let p = self.p();
        let sigma = self.sigma();
        let mut total = crate::accumulate::CompensatedSum::default();
        for j1 in 0..p {
            for j2 in (j1 + k + 1)..p {
                total.add(2.0 * sigma[j1 * p + j2].powi(a as i32));
            }
        }
        total.value()
    }

    /// `n` independent draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        let p = self.p();
        let rows = self.gamma.rows();
        let chi = ChiSquared::<f64>::new(7.0).expect("valid degrees of freedom");
        let mut data = vec![0.0; n * p];
        data.par_chunks_mut(p).enumerate().for_each(|(i, out)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let scale = match self.distribution {
                Distribution::Normal => 1.0,
                Distribution::T7 => 1.0 / (chi.sample(&mut rng) / 7.0).sqrt(),
                Distribution::T7UnitCovariance => (5.0f64 / 7.0).sqrt() / (chi.sample(&mut rng) / 7.0).sqrt(),
            };
            for (o, row) in out.iter_mut().zip(&rows) {
                *o = scale * row.iter().map(|&(c, v)| v * z[c]).sum::<f64>();
            }
        });
        SampleMatrix::from_row_major(n, p, &data)
    }
}

/// Uniformly chosen distinct positions `(j1, j2)` with `j2 - j1 > k`.
fn draw_positions(p: usize, k: usize, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let available = if p > k + 1 { (p - k - 1) * (p - k) / 2 } else { 0 };
    if count > available {
        return Err(Error::InvalidSparsity { requested: count, available });
    }
    // Row j1 holds p - k - 1 - j1 positions.
    let mut starts = Vec::with_capacity(p);
    let mut acc = 0;
    for j1 in 0..p.saturating_sub(k + 1) {
        starts.push(acc);
        acc += p - k - 1 - j1;
    }
    let mut idx = sample_indices(rng, available, count).into_vec();
    idx.sort_unstable();
    Ok(idx
        .into_iter()
        .map(|t| {
            let j1 = starts.partition_point(|&s| s <= t) - 1;
            (j1, j1 + k + 1 + (t - starts[j1]))
        })
        .collect())
}

fn banded(p: usize, bands: &[(std::ops::RangeInclusive<usize>, f64)]) -> GeneratorMatrix {
    let mut g = GeneratorMatrix::new(p);
    g.set_diagonal(0, 1.0);
    for (range, value) in bands {
        for d in range.clone() {
            if d < p {
                g.set_diagonal(d as isize, *value);
            }
        }
    }
    g
}

/// Builds one of the simulation covariance models. `Gamma` has unit diagonal throughout.
pub fn build_setting(setting: Setting, p: usize, params: &SettingParams) -> Result<CovarianceModel> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("p must be at least 2, got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let k = setting.null_bandwidth();
    let mut positions = Vec::new();
    let (gamma, true_bw) = match setting {
        Setting::S1 | Setting::S2 => {
            let mut g = match setting {
                Setting::S1 => banded(p, &[(1..=1, 1.0)]),
                _ => banded(p, &[(1..=1, 0.8), (2..=2, 0.6)]),
            };
            positions = draw_positions(p, k, params.sparsity, &mut rng)?;
            let signal = Uniform::new_inclusive(0.0, 2.0 * params.rho)
                .map_err(|e| Error::InvalidParameter(format!("rho: {e}")))?;
            for &(j1, j2) in &positions {
                let v = if setting == Setting::S1 { params.rho } else { signal.sample(&mut rng) };
                g.add_entry(j1, j2, v);
            }
            let bw = (positions.is_empty() && p > k).then_some(k);
            (g, bw)
        }
        Setting::S3 => {
            let mut g = banded(p, &[(1..=5, 0.6)]);
            if params.a_offset > 0 {
                let d = 5 + params.a_offset;
                if d >= p {
                    return Err(Error::InvalidParameter(format!(
                        "signal diagonal {d} does not fit in dimension {p}"
                    )));
                }
                g.set_diagonal(d as isize, params.rho);
                (g, (params.rho != 0.0).then_some(d).or(Some(5)))
            } else {
                (g, Some(5))
            }
        }
        Setting::M1 => (banded(p, &[(1..=1, 0.8), (2..=2, 0.6)]), Some(2)),
        Setting::M2 => (banded(p, &[(1..=5, 0.6)]), Some(5)),
        Setting::M3 => (banded(p, &[(1..=5, 0.2), (6..=10, 0.4)]), Some(10)),
        Setting::M4 => (banded(p, &[(1..=10, 0.2), (11..=15, 0.4)]), Some(15)),
    };
    let true_bw = true_bw.map(|b| b.min(p - 1));
    let mut model = CovarianceModel::new(gamma, Distribution::Normal, true_bw);
    model.alternative_positions = positions;
    Ok(model)
}

/// Lower-triangular `Gamma` with unit diagonal and `Unif(0, 5)` entries at `0 < j1 - j2 <= k`.
pub fn uniform_lower_band(p: usize, k: usize, seed: u64) -> Result<CovarianceModel> {
    if p < 2 || k >= p {
        return Err(Error::InvalidBand { k, p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unif = Uniform::new(0.0, 5.0).expect("valid range");
    let mut g = GeneratorMatrix::new(p);
    g.set_diagonal(0, 1.0);
    for d in 1..=k {
        let values: Vec<f64> = (0..p).map(|j| if j >= d { unif.sample(&mut rng) } else { 0.0 }).collect();
        g.set_diagonal_values(-(d as isize), values);
    }
    Ok(CovarianceModel::new(g, Distribution::Normal, Some(k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandwidth_of(sigma: &[f64], p: usize) -> usize {
        let mut bw = 0;
        for a in 0..p {
            for b in 0..p {
                if sigma[a * p + b] != 0.0 {
                    bw = bw.max(a.abs_diff(b));
                }
            }
        }
        bw
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn null_settings_have_exact_bandwidth() {
        for (setting, k0) in [
            (Setting::S1, 1),
            (Setting::S2, 2),
            (Setting::S3, 5),
            (Setting::M1, 2),
            (Setting::M2, 5),
            (Setting::M3, 10),
            (Setting::M4, 15),
        ] {
            let p = 40;
            let m = build_setting(setting, p, &SettingParams::default()).unwrap();
            assert_eq!(m.true_bandwidth, Some(k0));
            let sigma = m.sigma();
            assert_eq!(bandwidth_of(sigma, p), k0, "{setting:?}");
            for d in 1..=k0 {
                assert!((0..p - d).any(|j| sigma[j * p + j + d] != 0.0));
            }
        }
    }

    #[test]
    fn model_one_entries() {
        let m = build_setting(Setting::M1, 6, &SettingParams::default()).unwrap();
        assert_eq!(m.gamma.get(0, 1), 0.8);
        assert_eq!(m.gamma.get(0, 2), 0.6);
        assert_eq!(m.gamma.get(0, 3), 0.0);
        assert_eq!(m.gamma.get(2, 2), 1.0);
        // sigma_{j, j+1} = 0.8 + 0.8 * 0.6 for interior rows
        let s = m.sigma();
        assert!((s[6 + 2] - (0.8 + 0.48)).abs() < 1e-15);
        let m4 = build_setting(Setting::M4, 30, &SettingParams::default()).unwrap();
        assert_eq!(m4.gamma.get(3, 13), 0.2);
        assert_eq!(m4.gamma.get(3, 14), 0.4);
        assert_eq!(m4.gamma.get(3, 18), 0.4);
        assert_eq!(m4.gamma.get(3, 19), 0.0);
    }

    #[test]
    fn alternative_positions() {
        let params = SettingParams { rho: 0.5, sparsity: 10, seed: 3, ..Default::default() };
        let m = build_setting(Setting::S1, 20, &params).unwrap();
        assert_eq!(m.alternative_positions.len(), 10);
        let mut seen = std::collections::HashSet::new();
        for &(j1, j2) in &m.alternative_positions {
            assert!(j2 > j1 + 1 && j2 < 20);
            assert!(seen.insert((j1, j2)));
            assert_eq!(m.gamma.get(j1, j2), 0.5);
        }
        assert!(m.true_bandwidth.is_none());
        let again = build_setting(Setting::S1, 20, &params).unwrap();
        assert_eq!(again.alternative_positions, m.alternative_positions);
        // every position is reachable: p = 5, k = 1 has 6 slots
        let all = build_setting(Setting::S1, 5, &SettingParams { sparsity: 6, rho: 1.0, ..Default::default() }).unwrap();
        assert_eq!(all.alternative_positions, vec![(0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 4)]);
        assert!(matches!(
            build_setting(Setting::S1, 5, &SettingParams { sparsity: 7, ..Default::default() }),
            Err(Error::InvalidSparsity { requested: 7, available: 6 })
        ));
        let s2 = build_setting(Setting::S2, 30, &SettingParams { rho: 0.4, sparsity: 50, seed: 1, ..Default::default() }).unwrap();
        for &(j1, j2) in &s2.alternative_positions {
            let v = s2.gamma.get(j1, j2);
            assert!(j2 > j1 + 2 && (0.0..=0.8).contains(&v));
        }
    }

    #[test]
    fn setting_three_signal_diagonal() {
        let m = build_setting(Setting::S3, 30, &SettingParams { rho: 0.3, a_offset: 3, ..Default::default() }).unwrap();
        assert_eq!(m.gamma.get(2, 10), 0.3);
        assert_eq!(m.gamma.get(2, 7), 0.6);
        assert_eq!(m.gamma.get(2, 8), 0.0);
        assert_eq!(m.true_bandwidth, Some(8));
        assert!(build_setting(Setting::S3, 8, &SettingParams { rho: 0.3, a_offset: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = build_setting(Setting::M1, 12, &SettingParams::default()).unwrap();
        for dist in [Distribution::Normal, Distribution::T7] {
            let m = m.clone().with_distribution(dist);
            let a = m.sample(9, 42).unwrap();
            let b = m.sample(9, 42).unwrap();
            assert_eq!(a.to_row_major(), b.to_row_major());
            assert_ne!(a.to_row_major(), m.sample(9, 43).unwrap().to_row_major());
        }
    }

    #[test]
    fn lower_band_model() {
        let m = uniform_lower_band(10, 3, 5).unwrap();
        assert_eq!(m.gamma.get(4, 4), 1.0);
        assert!(m.gamma.get(4, 1) > 0.0 && m.gamma.get(4, 1) < 5.0);
        assert_eq!(m.gamma.get(4, 0), 0.0);
        assert_eq!(m.gamma.get(1, 4), 0.0);
        assert_eq!(bandwidth_of(m.sigma(), 10), 3);
    }
}
