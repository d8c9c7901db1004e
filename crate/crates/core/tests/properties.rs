//! Property tests for the numeric invariants that must hold on arbitrary
//! inputs.

use proptest::prelude::*;

use ttls::inference::{fdr_adjust, flat_to_pair, pair_count, pair_to_flat};
use ttls::io::fmt_float;
use ttls::shrinkage::{solve_gamma, QuadraticObjective};

proptest! {
    #[test]
    fn fdr_adjust_bounds_and_monotonicity(
        raw in proptest::collection::vec(0.0..=1.0f64, 1..200)
    ) {
        let adjusted = fdr_adjust(&raw);
        for (r, a) in raw.iter().zip(&adjusted) {
            prop_assert!(*a >= *r - 1e-15);
            prop_assert!(*a <= 1.0);
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&x, &y| raw[x].partial_cmp(&raw[y]).unwrap());
        for w in order.windows(2) {
            prop_assert!(adjusted[w[0]] <= adjusted[w[1]] + 1e-15);
        }
    }

    #[test]
    fn solve_gamma_is_always_exactly_feasible(
        m00 in -2.0..2.0f64, m01 in -2.0..2.0f64,
        m10 in -2.0..2.0f64, m11 in -2.0..2.0f64,
        b1 in -3.0..3.0f64, b2 in -3.0..3.0f64,
    ) {
        let a11 = m00 * m00 + m10 * m10;
        let a12 = m00 * m01 + m10 * m11;
        let a22 = m01 * m01 + m11 * m11;
        let obj = QuadraticObjective { a: [[a11, a12], [a12, a22]], b: [b1, b2] };
        let solve = solve_gamma(&obj);
        let g = solve.intensities;
        prop_assert!(g.gamma1 >= 0.0);
        prop_assert!(g.gamma2 >= 0.0);
        prop_assert!(g.gamma1 + g.gamma2 <= 1.0);
        // No vertex may beat the reported optimum.
        for (v1, v2) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
            prop_assert!(solve.objective_value <= obj.value(v1, v2) + 1e-9);
        }
    }

    #[test]
    fn pair_indexing_bijects(p in 2usize..60, k in 0usize..1000) {
        let flat = k % pair_count(p);
        let (i, j) = flat_to_pair(p, flat);
        prop_assert!(i < j && j < p);
        prop_assert_eq!(pair_to_flat(p, i, j), flat);
    }

    #[test]
    fn float_formatting_is_lossless(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }
}
