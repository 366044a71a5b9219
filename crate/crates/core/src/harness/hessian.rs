//! Second-derivative block structure scan.
//!
//! For each width and seed, estimates the spectral norms of every distinct
//! slot-pair bilinear form at initialization, plus the full cross-block
//! operator, and checks them against the within-block upper bound and the
//! cross-block lower bound.

use super::{crate_version, SpecTemplate};
use crate::bounds::{cross_hessian_lower_bound, within_block_hessian_bound};
use crate::deriv::CrossHessianOp;
use crate::error::{Error, Result};
use crate::net::{InputVector, WeightSet};
use crate::rng;
use crate::tensor::{spectral_norm_power, PowerParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianScanConfig {
    pub template: SpecTemplate,
    pub widths: Vec<usize>,
    pub seeds: usize,
    pub input_norm: f64,
    pub master_seed: u64,
    pub power_restarts: usize,
    pub power_iters: usize,
}

impl Default for HessianScanConfig {
    fn default() -> Self {
        Self {
            template: SpecTemplate::single_bottleneck(2, 1, 1),
            widths: vec![512],
            seeds: 200,
            input_norm: 1.0,
            master_seed: 42,
            power_restarts: 4,
            power_iters: 200,
        }
    }
}

impl HessianScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.seeds == 0 {
            return Err(Error::InvalidConfig(
                "need at least one width and one seed".into(),
            ));
        }
        if self.template.depths != vec![2, 2] {
            return Err(Error::Unsupported(
                "the Hessian scan is defined for the 4-layer single-bottleneck template".into(),
            ));
        }
        if *self.template.widths.last().unwrap() != 1 {
            return Err(Error::Unsupported(
                "the Hessian scan requires output dim 1".into(),
            ));
        }
        Ok(())
    }
}

/// One estimated pair (or operator) norm. `slot_i = slot_j = usize::MAX`
/// marks the full cross-block operator row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HessianPairRecord {
    pub m: usize,
    pub seed: usize,
    pub slot_i: i64,
    pub slot_j: i64,
    pub kind: String,
    pub estimate: f64,
    pub reference: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HessianScanReport {
    pub config: HessianScanConfig,
    /// Fraction of seeds whose within-block pair norms all satisfied the
    /// upper bound.
    pub within_rate: f64,
    /// Fraction of seeds whose cross-block operator estimate satisfied the
    /// lower bound.
    pub cross_rate: f64,
    /// Largest same-slot estimate seen (must be exactly zero).
    pub max_same_slot: f64,
    pub versions: String,
    pub master_seed: u64,
    #[serde(skip)]
    pub records: Vec<HessianPairRecord>,
}

struct SeedOutcome {
    records: Vec<HessianPairRecord>,
    within_ok: bool,
    cross_ok: bool,
    max_same_slot: f64,
}

pub fn run_hessian_scan(cfg: &HessianScanConfig) -> Result<HessianScanReport> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .widths
        .iter()
        .flat_map(|&m| (0..cfg.seeds).map(move |s| (m, s)))
        .collect();
    let outcomes: Vec<Result<SeedOutcome>> = cells
        .par_iter()
        .map(|&(m, seed)| scan_seed(cfg, m, seed))
        .collect();

    let mut records = Vec::new();
    let mut within_ok = 0usize;
    let mut cross_ok = 0usize;
    let mut max_same_slot = 0.0f64;
    let total = cells.len();
    for o in outcomes {
        let o = o?;
        records.extend(o.records);
        within_ok += o.within_ok as usize;
        cross_ok += o.cross_ok as usize;
        max_same_slot = max_same_slot.max(o.max_same_slot);
    }

    Ok(HessianScanReport {
        config: cfg.clone(),
        within_rate: within_ok as f64 / total as f64,
        cross_rate: cross_ok as f64 / total as f64,
        max_same_slot,
        versions: crate_version(),
        master_seed: cfg.master_seed,
        records,
    })
}

fn scan_seed(cfg: &HessianScanConfig, m: usize, seed: usize) -> Result<SeedOutcome> {
    let spec = cfg.template.spec(m)?;
    let w = WeightSet::init(
        &spec,
        rng::mix(cfg.master_seed, &[0x4e55, m as u64, seed as u64]),
    );
    let x = InputVector::basis(spec.input_dim(), cfg.input_norm);
    let d = spec.widths[0];
    let r = spec.widths[1];
    let within_bound = within_block_hessian_bound(m as f64, d, x.norm())?;
    let cross_bound = cross_hessian_lower_bound(r, d, x.norm())?;
    let slots = spec.slots();
    let p = slots.len();

    let mut records = Vec::new();
    let mut within_ok = true;
    let mut max_same_slot = 0.0f64;
    for i in 0..p {
        for j in i..p {
            let params = PowerParams {
                restarts: cfg.power_restarts,
                max_iters: cfg.power_iters,
                seed: rng::mix(
                    cfg.master_seed,
                    &[0x4e57, m as u64, seed as u64, i as u64, j as u64],
                ),
                ..Default::default()
            };
            let hb = crate::deriv::hessian_block_norm(&w, &x, i, j, &params)?;
            let kind = if i == j {
                "same"
            } else if slots[i].block == slots[j].block {
                "within"
            } else {
                "cross"
            };
            let (bound, satisfied) = match kind {
                "same" => (0.0, hb.value == 0.0),
                "within" => (within_bound, hb.value <= within_bound),
                _ => (cross_bound, true), // individual cross pairs are not gated
            };
            if kind == "within" && !satisfied {
                within_ok = false;
            }
            if kind == "same" {
                max_same_slot = max_same_slot.max(hb.value.abs());
            }
            records.push(HessianPairRecord {
                m,
                seed,
                slot_i: i as i64,
                slot_j: j as i64,
                kind: kind.to_string(),
                estimate: hb.value,
                reference: hb.reference.unwrap_or(f64::NAN),
                bound,
                satisfied,
            });
        }
    }

    // full cross-block operator
    let op = CrossHessianOp { w: &w, x: &x };
    let params = PowerParams {
        restarts: cfg.power_restarts,
        max_iters: cfg.power_iters,
        seed: rng::mix(cfg.master_seed, &[0x4e58, m as u64, seed as u64]),
        ..Default::default()
    };
    let est = spectral_norm_power(&op, &params);
    let cross_ok = est.value >= cross_bound;
    records.push(HessianPairRecord {
        m,
        seed,
        slot_i: -1,
        slot_j: -1,
        kind: "cross-operator".to_string(),
        estimate: est.value,
        reference: f64::NAN,
        bound: cross_bound,
        satisfied: cross_ok,
    });

    Ok(SeedOutcome {
        records,
        within_ok,
        cross_ok,
        max_same_slot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scan_runs_and_same_slots_vanish() {
        let cfg = HessianScanConfig {
            widths: vec![64],
            seeds: 3,
            power_restarts: 2,
            power_iters: 100,
            ..Default::default()
        };
        let report = run_hessian_scan(&cfg).unwrap();
        assert_eq!(report.max_same_slot, 0.0);
        // 10 pairs (incl. 4 same-slot) + 1 operator row per seed
        assert_eq!(report.records.len(), 3 * 11);
        assert!(report.cross_rate > 0.0);
    }

    #[test]
    fn rejects_deep_templates() {
        let cfg = HessianScanConfig {
            template: SpecTemplate {
                depths: vec![3, 3],
                widths: vec![2, 1, 1],
                activation: crate::net::Activation::Identity,
            },
            ..Default::default()
        };
        assert!(run_hessian_scan(&cfg).is_err());
    }
}
