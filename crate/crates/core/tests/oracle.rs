//! Fast statistics against brute-force enumeration.

use bandcov::oracle::{distinct_product_sum_naive, u_stat_centered_naive, u_stat_naive, u_stat_tilde_naive, variance_naive};
use bandcov::{distinct_product_sum, u_stat, u_stat_tilde, variance_estimate, BandSpec, SampleMatrix};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn matrix(n: usize, p: usize) -> impl Strategy<Value = SampleMatrix> {
    prop::collection::vec(-3.0f64..3.0, n * p).prop_map(move |v| SampleMatrix::from_row_major(n, p, &v).unwrap())
}

fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (5usize..=8, 4usize..=6, 0usize..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn low_orders_match_exact_definition((n, p, k) in shape(), seed in any::<u64>()) {
        let x = SampleMatrix::from_row_major(n, p, &lcg(n * p, seed)).unwrap();
        let spec = BandSpec::new(k, p).unwrap();
        for a in 1..=2 {
            if n < 2 * a { continue; }
            let fast = u_stat(&x, spec, a).unwrap().value;
            let slow = u_stat_naive(&x, spec, a).unwrap();
            prop_assert!(rel(fast, slow) < 1e-9, "a={a}: {fast} vs {slow}");
            let v = variance_estimate(&x, spec, a).unwrap();
            let vs = variance_naive(&x, spec, a).unwrap();
            prop_assert!(rel(v, vs) < 1e-9, "var a={a}: {v} vs {vs}");
        }
    }

    #[test]
    fn higher_orders_match_centered_enumeration(x in matrix(7, 5), k in 0usize..=2) {
        let spec = BandSpec::new(k, 5).unwrap();
        for a in 3..=3 {
            let fast = u_stat(&x, spec, a).unwrap().value;
            let slow = u_stat_centered_naive(&x, spec, a).unwrap();
            prop_assert!(rel(fast, slow) < 1e-9, "{fast} vs {slow}");
        }
        for a in [3, 4] {
            let v = variance_estimate(&x, spec, a).unwrap();
            let vs = variance_naive(&x, spec, a).unwrap();
            prop_assert!(rel(v, vs) < 1e-9, "var a={a}: {v} vs {vs}");
        }
    }

    #[test]
    fn tilde_matches_enumeration(x in matrix(6, 5), k in 0usize..=3, a in 1usize..=4) {
        let spec = BandSpec::new(k, 5).unwrap();
        let fast = u_stat_tilde(&x, spec, a).unwrap().value;
        let slow = u_stat_tilde_naive(&x, spec, a).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0));
    }

    #[test]
    fn distinct_sums_match_enumeration(s in prop::collection::vec(-2.0f64..2.0, 1..9), a in 1usize..=4) {
        prop_assume!(a <= s.len());
        let fast = distinct_product_sum(&s, a).unwrap();
        let slow = distinct_product_sum_naive(&s, a).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "{fast} vs {slow}");
    }
}

fn lcg(len: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        })
        .collect()
}
