//! Experiment orchestration: width sweeps, perturbation curves, Hessian
//! scans, bound suites, and report emission.
//!
//! Every run is a deterministic function of its config and master seed.
//! Work grids are embarrassingly parallel; per-record seeds are derived
//! from (master seed, width, seed index, direction index), records are
//! collected in grid order, and aggregation is order-independent, so the
//! emitted bytes do not depend on the worker count.

mod curves;
mod hessian;
mod report;
mod sweep;
mod verify;

pub use curves::{run_perturbation_curves, CurveChecks, CurveRecord, CurvesConfig, CurvesReport};
pub use hessian::{run_hessian_scan, HessianPairRecord, HessianScanConfig, HessianScanReport};
pub use report::write_atomic;
pub use sweep::{run_width_sweep, DirectionMode, PerWidth, SweepConfig, SweepRecord, SweepReport};
pub use verify::{bound_names, run_bound_suite, BoundRate, BoundSuiteConfig, BoundSuiteReport};

use crate::error::Result;
use crate::net::{Activation, NetworkSpec};
use serde::{Deserialize, Serialize};

/// Architecture template: everything but the hidden width, which the
/// sweep varies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecTemplate {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl SpecTemplate {
    /// The 4-layer single-bottleneck template with interface dims (d, r, k).
    pub fn single_bottleneck(d: usize, r: usize, k: usize) -> Self {
        Self {
            depths: vec![2, 2],
            widths: vec![d, r, k],
            activation: Activation::Identity,
        }
    }

    pub fn spec(&self, hidden: usize) -> Result<NetworkSpec> {
        NetworkSpec::new(
            self.depths.clone(),
            self.widths.clone(),
            hidden,
            self.activation,
        )
    }

    pub fn blocks(&self) -> usize {
        self.depths.len()
    }

    pub fn total_layers(&self) -> usize {
        self.depths.iter().sum()
    }
}

pub(crate) fn crate_version() -> String {
    format!("bottlenet-core {}", env!("CARGO_PKG_VERSION"))
}

/// Evenly spaced grid on `[-t_max, t_max]`.
pub(crate) fn t_grid(points: usize, t_max: f64) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -t_max + 2.0 * t_max * i as f64 / (points - 1) as f64)
        .collect()
}

/// Median of an unsorted slice (average of the middle pair for even
/// lengths); deterministic for any input order.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
