//! Shared fixtures for the criterion benches.

use bottlenet_core::net::{Activation, Direction, InputVector, NetworkSpec, WeightSet};

pub fn single_bottleneck(m: usize) -> (NetworkSpec, WeightSet, Direction, InputVector) {
    let spec = NetworkSpec::single_bottleneck(2, 1, 1, m, Activation::Identity).unwrap();
    let w = WeightSet::init(&spec, 1);
    let d = Direction::sample(&spec, 2, 1.0);
    let x = InputVector::basis(2, 1.0);
    (spec, w, d, x)
}

pub fn deep_blocks(m: usize) -> (NetworkSpec, WeightSet, Direction, InputVector) {
    let spec = NetworkSpec::new(vec![3, 3], vec![2, 1, 1], m, Activation::Identity).unwrap();
    let w = WeightSet::init(&spec, 1);
    let d = Direction::sample(&spec, 2, 1.0);
    let x = InputVector::basis(2, 1.0);
    (spec, w, d, x)
}
