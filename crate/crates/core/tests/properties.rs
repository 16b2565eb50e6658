mod common;

use fgmc::dual::hadamard2;
use fgmc::value::ComplexValue;
use fgmc::{brute_force_summary, ExactCaps, GridModel, PairwiseKernel};
use num_complex::Complex64;
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = ComplexValue> + Clone {
    prop_oneof![
        (0.1f64..3.0, 0u8..4).prop_map(|(m, q)| ComplexValue::axis(m, q)),
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| ComplexValue::from_parts(re, im)),
    ]
}

fn axis_entry() -> impl Strategy<Value = ComplexValue> + Clone {
    (0.1f64..3.0, 0u8..4).prop_map(|(m, q)| ComplexValue::axis(m, q))
}

fn kernel(e: impl Strategy<Value = ComplexValue> + Clone) -> impl Strategy<Value = PairwiseKernel> {
    [[e.clone(), e.clone()], [e.clone(), e]].prop_map(PairwiseKernel::new)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tally_evaluation_matches_edge_product(k in kernel(entry()), rows in 1usize..5, cols in 1usize..6, seed: u64) {
        let g = GridModel::new(rows, cols, k).unwrap();
        let x = common::assignment(&g, seed & ((1u64 << g.n()) - 1));
        let f = g.evaluate_f(&x).unwrap().to_complex();
        prop_assert!(close(f, common::f_direct(&g, &x), 1e-10));
        prop_assert!((g.abs_f(&x).unwrap() - f.norm()).abs() <= 1e-10 * f.norm().max(1e-300));
    }

    #[test]
    fn f_is_multiplicative_over_edge_partitions(k in kernel(entry()), split in 0usize..24, seed: u64) {
        let g = GridModel::new(3, 4, k).unwrap();
        let x = common::assignment(&g, seed & 0xfff);
        let edges = g.edges();
        let split = split.min(edges.len());
        let left = g.evaluate_edges(&x, &edges[..split]).unwrap().to_complex();
        let right = g.evaluate_edges(&x, &edges[split..]).unwrap().to_complex();
        prop_assert!(close(left * right, g.evaluate_f(&x).unwrap().to_complex(), 1e-10));
    }

    #[test]
    fn scaling_the_kernel_scales_each_bin(k in kernel(axis_entry()), c in 0.2f64..4.0) {
        let g = GridModel::new(3, 3, k.clone()).unwrap();
        let h = GridModel::new(3, 3, k.scaled(c)).unwrap();
        let caps = ExactCaps::default();
        let a = brute_force_summary(&g, &caps).unwrap();
        let b = brute_force_summary(&h, &caps).unwrap();
        let e = g.edge_count() as f64;
        for q in 0..4 {
            prop_assert_eq!(a.count(q), b.count(q));
            if a.count(q).bits() > 0 {
                prop_assert!((b.log2_abs_bin(q) - a.log2_abs_bin(q) - e * c.log2()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hadamard_is_an_involution_up_to_four(k in kernel(entry())) {
        let back = hadamard2(&hadamard2(&k));
        for a in 0..2 {
            for b in 0..2 {
                let want = k.entry(a, b).to_complex() * 4.0;
                prop_assert!((back.entry(a, b).to_complex() - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn hadamard_is_linear(k1 in kernel(entry()), k2 in kernel(entry()), s in -2.0f64..2.0) {
        let sum = PairwiseKernel::new(std::array::from_fn(|a| {
            std::array::from_fn(|b| ComplexValue::from_complex(k1.entry(a, b).to_complex() + k2.entry(a, b).to_complex() * s))
        }));
        let (h1, h2, hs) = (hadamard2(&k1), hadamard2(&k2), hadamard2(&sum));
        for a in 0..2 {
            for b in 0..2 {
                let want = h1.entry(a, b).to_complex() + h2.entry(a, b).to_complex() * s;
                prop_assert!((hs.entry(a, b).to_complex() - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }
    }
}
