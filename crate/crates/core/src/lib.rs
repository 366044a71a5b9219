//! Bottleneck linear networks and their derivative structure.
//!
//! A cascade of wide linear blocks joined through narrow bottleneck layers
//! is, exactly, a multilinear function of its weight matrices. This crate
//! builds such networks, expands them into directional polynomials by
//! substitution, assembles the multilinear surrogate (constant + gradient
//! + cross terms), evaluates the closed-form norm bounds that control the
//! surrogate error, and runs the experiment harness that measures residual
//! decay against the hidden width.
//!
//! Modules:
//! - [`tensor`]: dense tensors, tuple contractions, spectral-norm
//!   estimation with lower-bound certificates.
//! - [`net`]: architecture, NTK initialization, forwards, weight-space
//!   directions, the weight container format.
//! - [`deriv`]: substitution expansion, gradients, the cross-Hessian, slot
//!   pair norms, the multilinear surrogate.
//! - [`maximize`]: boundary-direction search for residual suprema.
//! - [`bounds`]: closed-form bounds, witness constructions, tail checks.
//! - [`harness`]: sweeps, curves, scans, bound suites, report emission.

pub mod bounds;
pub mod deriv;
pub mod error;
pub mod fit;
pub mod harness;
pub mod linalg;
pub mod maximize;
pub mod net;
pub mod rng;
pub mod tensor;

pub use bounds::{BoundParams, BoundReport, BoundSide, TailCheck, TailKind};
pub use deriv::{
    build_surrogate, derivative_contraction, gradient_by_substitution, gradient_closed_form,
    hessian_block_norm, poly_expand, BlockTangent, PolyCurve, SurrogateModel,
};
pub use error::{Error, Result};
pub use harness::{
    run_bound_suite, run_hessian_scan, run_perturbation_curves, run_width_sweep, BoundSuiteConfig,
    BoundSuiteReport, CurvesConfig, CurvesReport, DirectionMode, HessianScanConfig,
    HessianScanReport, SpecTemplate, SweepConfig, SweepReport,
};
pub use linalg::{FactoredMatrix, Matrix};
pub use net::{
    ball_contains, load_weights, save_sidecar, save_weights, wnn_forward, Activation, Direction,
    InputVector, NetworkSpec, WeightSet,
};
pub use tensor::{
    block_subadditivity, spectral_norm_bruteforce, spectral_norm_power, tuple_contract,
    DenseTensor, IndexRegion, MultilinearOp, PowerParams, SpectralEstimate, VectorTuple,
};
