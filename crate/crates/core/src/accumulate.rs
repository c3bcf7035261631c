//! Compensated summation.

/// Running sum that carries the rounding error of every addition
/// (Knuth two-sum), giving roughly twice the working precision.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    #[inline]
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.hi);
        self.lo += other.lo;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let acc: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
        let naive: f64 = [1e16, 1.0, -1e16, 1.0].iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 * 0.1 - 5.0).collect();
        let whole: CompensatedSum = xs.iter().copied().collect();
        let mut left: CompensatedSum = xs[..400].iter().copied().collect();
        let right: CompensatedSum = xs[400..].iter().copied().collect();
        left.merge(&right);
        assert!((whole.value() - left.value()).abs() < 1e-12);
    }
}
