//! Property tests for the structural invariants.

use bottlenet_core::linalg::Matrix;
use bottlenet_core::net::{Activation, InputVector, NetworkSpec, WeightSet};
use bottlenet_core::tensor::{tuple_contract, DenseTensor, VectorTuple};
use proptest::prelude::*;

fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // contraction is linear in every slot
    #[test]
    fn contraction_slot_linearity(
        entries in small_vec(24),
        u in small_vec(4),
        w in small_vec(4),
        v0 in small_vec(3),
        v2 in small_vec(2),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let a = DenseTensor::new(vec![3, 4, 2], entries).unwrap();
        let c = |mid: Vec<f64>| {
            tuple_contract(&a, &VectorTuple::new(vec![v0.clone(), mid, v2.clone()])).unwrap()
        };
        let mix: Vec<f64> = u.iter().zip(&w).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = c(mix);
        let rhs = alpha * c(u.clone()) + beta * c(w.clone());
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    // scaling all weights scales the output by c^P
    #[test]
    fn forward_homogeneity(seed in 0u64..1000, c in 0.1f64..3.0) {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 32, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, seed);
        let x = InputVector::new(vec![0.4, -1.1]).unwrap();
        let p = spec.total_layers() as i32;
        let lhs = w.scaled(c).forward_scalar(&x).unwrap();
        let rhs = c.powi(p) * w.forward_scalar(&x).unwrap();
        let scale = lhs.abs().max(rhs.abs()).max(1e-12);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }

    // the forward is linear in the input
    #[test]
    fn forward_linear_in_input(
        seed in 0u64..1000,
        x1 in small_vec(2),
        x2 in small_vec(2),
        alpha in -2.0f64..2.0,
    ) {
        prop_assume!(x1.iter().any(|&v| v != 0.0) && x2.iter().any(|&v| v != 0.0));
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 16, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, seed);
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + alpha * b).collect();
        prop_assume!(mix.iter().any(|&v| v != 0.0));
        let f = |v: Vec<f64>| w.forward_scalar(&InputVector::new(v).unwrap()).unwrap();
        let lhs = f(mix);
        let rhs = f(x1.clone()) + alpha * f(x2.clone());
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale);
    }

    // the weight container round-trips arbitrary finite matrices exactly
    #[test]
    fn container_round_trip(vals in small_vec(4 + 4 + 4 + 2)) {
        let spec = NetworkSpec::single_bottleneck(2, 2, 1, 2, Activation::Identity).unwrap();
        let mut it = vals.into_iter();
        let mut take = |r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| it.next().unwrap()).collect())
        };
        let mats = vec![take(2, 2), take(2, 2), take(2, 2), take(1, 2)];
        let w = WeightSet::from_matrices(&spec, mats).unwrap();
        let dir = std::env::temp_dir().join(format!("bottlenet-prop-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.bin");
        bottlenet_core::net::save_weights(&w, &path).unwrap();
        let back = bottlenet_core::net::load_weights(&path).unwrap();
        prop_assert_eq!(w, back);
    }
}
