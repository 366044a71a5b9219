//! One-dimensional perturbation curves through weight space.
//!
//! Emits `g(W + tΔ; x)` over a t grid for four families: tanh with a full
//! direction, identity with a full direction, and identity with the
//! direction supported on a single block. The architecture is the 4-layer
//! single-bottleneck network with scalar interfaces (widths `[m, 1, m]`).
//!
//! Directions are normalized per matrix. The identity families use the
//! configured sphere radius; the tanh family scales each matrix to the
//! Frobenius norm of a typical weight matrix (the square root of its entry
//! count) — at unit radius a tanh curve is indistinguishable from an
//! affine function at large width, because the bottleneck barely moves.

use super::{crate_version, median, t_grid};
use crate::deriv::{coefficients_from_subsets, subset_values};
use crate::error::{Error, Result};
use crate::fit::polyfit;
use crate::net::{Activation, Direction, InputVector, NetworkSpec, WeightSet};
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesConfig {
    pub hidden: usize,
    pub seeds: usize,
    pub directions: usize,
    pub radius: f64,
    pub t_points: usize,
    pub t_max: f64,
    pub input_norm: f64,
    pub master_seed: u64,
    /// Overlay the degree-2 jet values for identity curves (rejected for
    /// tanh, which has no polynomial structure).
    pub jet_overlay: bool,
    /// Restrict emission to one activation's families (`None` = all).
    #[serde(default)]
    pub activation_filter: Option<Activation>,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self {
            hidden: 4096,
            seeds: 20,
            directions: 5,
            radius: 1.0,
            t_points: 61,
            t_max: 3.0,
            input_norm: 1.0,
            master_seed: 42,
            jet_overlay: false,
            activation_filter: None,
        }
    }
}

impl CurvesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.seeds == 0 || self.directions == 0 {
            return Err(Error::InvalidConfig(
                "hidden, seeds, directions must be positive".into(),
            ));
        }
        if self.t_points < 2 || self.t_max <= 0.0 {
            return Err(Error::InvalidConfig(
                "need a t grid with at least 2 points".into(),
            ));
        }
        if self.radius <= 0.0 {
            return Err(Error::InvalidConfig("radius must be positive".into()));
        }
        if self.jet_overlay && self.activation_filter == Some(Activation::Tanh) {
            return Err(Error::InvalidConfig(
                "jet overlays are undefined for tanh curves".into(),
            ));
        }
        Ok(())
    }

    fn spec(&self, activation: Activation) -> Result<NetworkSpec> {
        NetworkSpec::single_bottleneck(1, 1, 1, self.hidden, activation)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub curve_id: String,
    pub t: f64,
    pub value: f64,
    pub activation: String,
    pub support: String,
}

/// Shape statistics per curve family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveChecks {
    /// Median (over curves) relative quadratic-fit residual of the tanh
    /// family.
    pub tanh_quad_residual: f64,
    /// Same for the identity full-direction family.
    pub identity_quad_residual: f64,
    /// tanh residual / identity residual.
    pub contrast_ratio: f64,
    /// Max over identity full-direction curves of
    /// `(|c₃|+|c₄|) / (|c₀|+|c₁|+|c₂|)`.
    pub max_tail_coefficient_ratio: f64,
    /// Max over block-supported curves of the relative weight of
    /// coefficients beyond degree 2 (structurally zero: a two-slot block
    /// supports no cubic term).
    pub block_max_high_order: f64,
    /// Median over block-supported curves of the curvature share
    /// `|c₂|t² / (|c₀| + |c₁|t + |c₂|t²)` at `t = t_max`; the within-block
    /// quadratic term scales as 1/m, so this vanishes with width.
    pub block_median_curvature_share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvesReport {
    pub config: CurvesConfig,
    pub checks: CurveChecks,
    pub versions: String,
    pub master_seed: u64,
    #[serde(skip)]
    pub records: Vec<CurveRecord>,
}

struct FamilyOutcome {
    records: Vec<CurveRecord>,
    quad_residuals: Vec<f64>,
    tail_ratios: Vec<f64>,
    high_order: Vec<f64>,
    curvature_shares: Vec<f64>,
}

/// Relative RMS residual of the best least-squares quadratic.
fn quad_fit_rel_residual(ts: &[f64], ys: &[f64]) -> f64 {
    let c = polyfit(ts, ys, 2);
    let mut ss = 0.0;
    let mut scale = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let fit = c[0] + t * (c[1] + t * c[2]);
        ss += (y - fit) * (y - fit);
        scale += y * y;
    }
    let n = ts.len() as f64;
    (ss / n).sqrt() / (scale / n).sqrt().max(1e-300)
}

/// (high-order weight, curvature share) of a curve from its exact
/// coefficients.
fn block_curve_stats(coeffs: &[f64], t_max: f64) -> (f64, f64) {
    let head: f64 = coeffs
        .iter()
        .take(3)
        .enumerate()
        .map(|(k, c)| c.abs() * t_max.powi(k as i32))
        .sum();
    let tail: f64 = coeffs
        .iter()
        .enumerate()
        .skip(3)
        .map(|(k, c)| c.abs() * t_max.powi(k as i32))
        .sum();
    let high_order = tail / head.max(1e-300);
    let c2 = coeffs.get(2).copied().unwrap_or(0.0).abs() * t_max * t_max;
    let share = c2 / head.max(1e-300);
    (high_order, share)
}

pub fn run_perturbation_curves(cfg: &CurvesConfig) -> Result<CurvesReport> {
    cfg.validate()?;
    let grid = t_grid(cfg.t_points, cfg.t_max);
    let id_spec = cfg.spec(Activation::Identity)?;
    let tanh_spec = cfg.spec(Activation::Tanh)?;

    // family tags: (label, activation, supported blocks, weight-scale?)
    let families: [(&str, Activation, Option<usize>, bool); 4] = [
        ("tanh-full", Activation::Tanh, None, true),
        ("identity-full", Activation::Identity, None, false),
        ("identity-block1", Activation::Identity, Some(0), false),
        ("identity-block2", Activation::Identity, Some(1), false),
    ];

    let seeds: Vec<usize> = (0..cfg.seeds).collect();
    let per_seed: Vec<Result<Vec<FamilyOutcome>>> = seeds
        .par_iter()
        .map(|&seed| {
            let weights_id =
                WeightSet::init(&id_spec, rng::mix(cfg.master_seed, &[0xc03e, seed as u64]));
            // same matrices under the tanh spec
            let weights_tanh =
                WeightSet::from_matrices(&tanh_spec, weights_id.matrices().to_vec())?;
            let x = InputVector::basis(1, cfg.input_norm);
            let mut outcomes = Vec::with_capacity(families.len());
            for (fi, (label, act, support, weight_scale)) in families.iter().enumerate() {
                if let Some(only) = cfg.activation_filter {
                    if *act != only {
                        outcomes.push(FamilyOutcome {
                            records: Vec::new(),
                            quad_residuals: Vec::new(),
                            tail_ratios: Vec::new(),
                            high_order: Vec::new(),
                            curvature_shares: Vec::new(),
                        });
                        continue;
                    }
                }
                let mut records = Vec::new();
                let mut quad_residuals = Vec::new();
                let mut tail_ratios = Vec::new();
                let mut high_order = Vec::new();
                let mut curvature_shares = Vec::new();
                for dir in 0..cfg.directions {
                    let dseed = rng::mix(
                        cfg.master_seed,
                        &[0xc10d, seed as u64, fi as u64, dir as u64],
                    );
                    let spec = if *act == Activation::Tanh {
                        &tanh_spec
                    } else {
                        &id_spec
                    };
                    let weights = if *act == Activation::Tanh {
                        &weights_tanh
                    } else {
                        &weights_id
                    };
                    let mut delta = Direction::sample(spec, dseed, cfg.radius);
                    if *weight_scale {
                        // per-matrix norm = sqrt(entry count): entrywise
                        // unit scale, like the weights themselves
                        let mats = spec
                            .slots()
                            .iter()
                            .enumerate()
                            .map(|(i, s)| {
                                let target = ((s.rows * s.cols) as f64).sqrt();
                                delta.matrix(i).scaled(target / cfg.radius)
                            })
                            .collect();
                        delta = Direction::from_matrices(spec, mats)?;
                    }
                    if let Some(block) = support {
                        delta = delta.restricted_to_blocks(&[*block]);
                    }
                    let ys: Vec<f64> = grid
                        .iter()
                        .map(|&t| weights.offset(&delta, t).and_then(|w| w.forward_scalar(&x)))
                        .collect::<Result<_>>()?;
                    let curve_id = format!("{label}-s{seed}-d{dir}");
                    for (&t, &value) in grid.iter().zip(&ys) {
                        records.push(CurveRecord {
                            curve_id: curve_id.clone(),
                            t,
                            value,
                            activation: act.to_string(),
                            support: match support {
                                None => "all".to_string(),
                                Some(b) => format!("block{}", b + 1),
                            },
                        });
                    }
                    match support {
                        Some(_) => {
                            let sv = subset_values(weights, &delta, &x)?;
                            let c = coefficients_from_subsets(&sv, 4);
                            let (ho, share) = block_curve_stats(&c, cfg.t_max);
                            high_order.push(ho);
                            curvature_shares.push(share);
                        }
                        None => {
                            quad_residuals.push(quad_fit_rel_residual(&grid, &ys));
                            if *act == Activation::Identity {
                                let sv = subset_values(weights, &delta, &x)?;
                                let c = coefficients_from_subsets(&sv, 4);
                                let head = c[0].abs() + c[1].abs() + c[2].abs();
                                let tail = c[3].abs() + c[4].abs();
                                tail_ratios.push(tail / head.max(1e-300));
                                if cfg.jet_overlay {
                                    let jet_id = format!("{curve_id}-jet2");
                                    for &t in grid.iter() {
                                        let jet = c[0] + t * (c[1] + t * c[2]);
                                        records.push(CurveRecord {
                                            curve_id: jet_id.clone(),
                                            t,
                                            value: jet,
                                            activation: act.to_string(),
                                            support: "jet".to_string(),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
                outcomes.push(FamilyOutcome {
                    records,
                    quad_residuals,
                    tail_ratios,
                    high_order,
                    curvature_shares,
                });
            }
            Ok(outcomes)
        })
        .collect();

    let mut records = Vec::new();
    let mut tanh_res = Vec::new();
    let mut id_res = Vec::new();
    let mut tail_ratios = Vec::new();
    let mut high_order = Vec::new();
    let mut curvature_shares = Vec::new();
    for seed_outcomes in per_seed {
        let outcomes = seed_outcomes?;
        for (fi, o) in outcomes.into_iter().enumerate() {
            records.extend(o.records);
            match fi {
                0 => tanh_res.extend(o.quad_residuals),
                1 => {
                    id_res.extend(o.quad_residuals);
                    tail_ratios.extend(o.tail_ratios);
                }
                _ => {
                    high_order.extend(o.high_order);
                    curvature_shares.extend(o.curvature_shares);
                }
            }
        }
    }

    let tanh_quad_residual = median(&tanh_res);
    let identity_quad_residual = median(&id_res);
    let checks = CurveChecks {
        tanh_quad_residual,
        identity_quad_residual,
        contrast_ratio: tanh_quad_residual / identity_quad_residual.max(1e-300),
        max_tail_coefficient_ratio: tail_ratios.iter().copied().fold(0.0, f64::max),
        block_max_high_order: high_order.iter().copied().fold(0.0, f64::max),
        block_median_curvature_share: median(&curvature_shares),
    };

    Ok(CurvesReport {
        config: cfg.clone(),
        checks,
        versions: crate_version(),
        master_seed: cfg.master_seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_supported_curves_have_no_high_orders() {
        let cfg = CurvesConfig {
            hidden: 256,
            seeds: 2,
            directions: 2,
            t_points: 11,
            ..Default::default()
        };
        let report = run_perturbation_curves(&cfg).unwrap();
        // a two-slot block supports at most a quadratic term
        assert!(
            report.checks.block_max_high_order < 1e-10,
            "high-order weight {}",
            report.checks.block_max_high_order
        );
        assert!(report.checks.block_median_curvature_share.is_finite());
    }

    #[test]
    fn one_point_grid_rejected() {
        let cfg = CurvesConfig {
            t_points: 1,
            ..Default::default()
        };
        assert!(matches!(
            run_perturbation_curves(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn four_families_emitted() {
        let cfg = CurvesConfig {
            hidden: 32,
            seeds: 1,
            directions: 1,
            t_points: 5,
            ..Default::default()
        };
        let report = run_perturbation_curves(&cfg).unwrap();
        let mut kinds: Vec<(String, String)> = report
            .records
            .iter()
            .map(|r| (r.activation.clone(), r.support.clone()))
            .collect();
        kinds.sort();
        kinds.dedup();
        assert_eq!(kinds.len(), 4);
        assert_eq!(report.records.len(), 4 * 5);
    }
}
