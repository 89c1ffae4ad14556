//! Oracle and property tests for spatial weights and joint normalization.

use approx::assert_abs_diff_eq;
use epifit_core::{adjacency_orders, joint_normalize, power_law_weights, RegionGraph};
use ndarray::Array2;
use proptest::prelude::*;

fn ring_graph(n: usize) -> RegionGraph {
    let regions: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let mut edges: Vec<(String, String)> = (0..n - 1)
        .map(|i| (format!("r{i}"), format!("r{}", i + 1)))
        .collect();
    edges.push((format!("r{}", n - 1), "r0".to_string()));
    RegionGraph::new(regions, &edges).unwrap()
}

#[test]
fn joint_normalize_matches_double_loop() {
    // oracle: explicit normalization over all (g, r) pairs
    let c = Array2::from_shape_fn((3, 3), |(i, j)| {
        0.3 + ((i * 3 + j) as f64 * 0.17).sin().abs()
    });
    let w = Array2::from_shape_fn((4, 4), |(i, j)| {
        0.1 + ((i * 4 + j) as f64 * 0.31).cos().abs()
    });
    let m = joint_normalize(&c, &w).unwrap();
    for gp in 0..3 {
        for rp in 0..4 {
            let mut total = 0.0;
            for g in 0..3 {
                for r in 0..4 {
                    total += c[(gp, g)] * w[(rp, r)];
                }
            }
            for g in 0..3 {
                for r in 0..4 {
                    let oracle = c[(gp, g)] * w[(rp, r)] / total;
                    assert_abs_diff_eq!(m[(gp * 4 + rp, g * 4 + r)], oracle, epsilon = 1e-13);
                }
            }
            let row: f64 = (0..12).map(|col| m[(gp * 4 + rp, col)]).sum();
            assert_abs_diff_eq!(row, 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn all_ones_contact_forgets_the_source_group() {
    // homogeneous mixing: the normalized row cannot depend on g'
    let c = Array2::ones((3, 3));
    let w = Array2::from_shape_fn((2, 2), |(i, j)| 1.0 + (i + 2 * j) as f64);
    let m = joint_normalize(&c, &w).unwrap();
    for rp in 0..2 {
        for col in 0..6 {
            let base = m[(rp, col)];
            for gp in 1..3 {
                assert_abs_diff_eq!(m[(gp * 2 + rp, col)], base, epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn identity_contact_keeps_mass_in_group() {
    let c = Array2::eye(3);
    let w = Array2::from_elem((2, 2), 0.5);
    let m = joint_normalize(&c, &w).unwrap();
    for gp in 0..3 {
        for rp in 0..2 {
            for g in 0..3 {
                for r in 0..2 {
                    let v = m[(gp * 2 + rp, g * 2 + r)];
                    if g == gp {
                        assert!(v > 0.0);
                    } else {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Power-law weights decrease strictly in order and in rho.
    #[test]
    fn power_law_monotonicity(rho in 0.2..5.0f64, bump in 0.1..2.0f64) {
        let graph = ring_graph(9); // orders 0..4 along the ring
        let orders = adjacency_orders(&graph).unwrap();
        let w = power_law_weights(&orders, rho, true).unwrap();
        for o in 0..4u32 {
            let lower = ((o + 2) as f64).powf(-rho);
            let higher = ((o + 1) as f64).powf(-rho);
            prop_assert!(lower < higher);
        }
        let steeper = power_law_weights(&orders, rho + bump, true).unwrap();
        // for any order >= 1 a larger rho gives a smaller weight
        for ((i, j), &v) in w.indexed_iter() {
            if orders.get(i, j) >= 1 {
                prop_assert!(steeper[(i, j)] < v);
            }
        }
    }

    /// Joint normalization is invariant to positive rescaling of both inputs.
    #[test]
    fn scale_invariance(
        a in 0.01..50.0f64,
        b in 0.01..50.0f64,
        seed in 0..1000u64,
    ) {
        let c = Array2::from_shape_fn((2, 2), |(i, j)| {
            0.2 + (((seed + (i * 2 + j) as u64) as f64) * 0.37).sin().abs()
        });
        let w = Array2::from_shape_fn((3, 3), |(i, j)| {
            0.1 + (((seed + 7 + (i * 3 + j) as u64) as f64) * 0.53).cos().abs()
        });
        let base = joint_normalize(&c, &w).unwrap();
        let scaled = joint_normalize(&(&c * a), &(&w * b)).unwrap();
        for (x, y) in base.iter().zip(scaled.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
