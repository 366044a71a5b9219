//! Width sweep: jet and surrogate residual decay across hidden widths.

use super::{crate_version, median, t_grid, SpecTemplate};
use crate::bounds::{
    bilinear_remainder_bound, derivative_upper_bound, BoundParams, BoundReport, BoundSide,
};
use crate::deriv::{
    coefficients_from_subsets, horner, multilinear_coefficients_from_subsets, subset_values,
};
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, SlopeFit};
use crate::maximize::{maximize_tail_coefficient, MaximizeParams};
use crate::net::{forward_line, Direction, InputVector, Tangent, WeightSet};
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How sweep directions are chosen on the per-matrix radius-R sphere.
///
/// `Random` samples isotropically; residuals along such directions decay
/// faster than the worst case over the ball. `Maximize` runs an
/// alternating search for the direction with the largest leading truncated
/// Taylor coefficient, so the recorded max residual tracks the supremum
/// over the ball — the quantity the decay rates are stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    Random,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub template: SpecTemplate,
    /// Hidden widths, strictly increasing.
    pub widths: Vec<usize>,
    pub seeds: usize,
    pub directions: usize,
    /// Per-matrix sphere radius of the sampled directions.
    pub radius: f64,
    /// Jet truncation degree; defaults to the block count.
    pub jet_degree: Option<usize>,
    pub t_points: usize,
    pub t_max: f64,
    pub direction_mode: DirectionMode,
    /// Input is `input_norm · e₁`.
    pub input_norm: f64,
    /// Acceptance band for the fitted slope of the per-width max jet
    /// residual.
    pub slope_band: (f64, f64),
    pub master_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            template: SpecTemplate::single_bottleneck(2, 1, 1),
            widths: vec![64, 128, 256, 512, 1024, 2048, 4096],
            seeds: 8,
            directions: 4,
            radius: 1.0,
            jet_degree: None,
            t_points: 41,
            t_max: 1.0,
            direction_mode: DirectionMode::Maximize,
            input_norm: 1.0,
            slope_band: (-0.65, -0.35),
            master_seed: 42,
        }
    }
}

impl SweepConfig {
    pub fn jet_degree(&self) -> usize {
        self.jet_degree.unwrap_or_else(|| self.template.blocks())
    }

    pub fn validate(&self) -> Result<()> {
        if self.template.activation != crate::net::Activation::Identity {
            return Err(Error::InvalidConfig(
                "sweeps require the identity activation".into(),
            ));
        }
        if self.widths.is_empty() || self.widths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "widths must be strictly increasing".into(),
            ));
        }
        if self.widths.len() < 4 {
            return Err(Error::InvalidConfig(
                "slope fitting needs at least 4 width points".into(),
            ));
        }
        if self.seeds == 0 || self.directions == 0 {
            return Err(Error::InvalidConfig(
                "seeds and directions must be positive".into(),
            ));
        }
        if self.radius < 0.0 {
            return Err(Error::InvalidConfig("radius must be nonnegative".into()));
        }
        if self.t_points < 2 || self.t_max <= 0.0 {
            return Err(Error::InvalidConfig(
                "need a t grid with at least 2 points".into(),
            ));
        }
        let p = self.template.total_layers();
        if self.jet_degree() > p {
            return Err(Error::InvalidConfig(format!(
                "jet degree {} exceeds the total layer count {p}",
                self.jet_degree()
            )));
        }
        self.template.spec(self.widths[0])?;
        Ok(())
    }
}

/// One (width, seed, direction) grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub m: usize,
    pub seed: usize,
    pub direction: usize,
    pub max_residual_jet: f64,
    pub max_residual_surrogate: f64,
    /// Residual of the full-degree polynomial (roundoff scale).
    pub max_residual_full: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerWidth {
    pub m: usize,
    pub max_jet: f64,
    pub median_jet: f64,
    pub max_surrogate: f64,
    pub median_surrogate: f64,
    pub max_full: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub per_m: Vec<PerWidth>,
    /// Slope of `log(max jet residual)` against `log m`.
    pub slope: Option<SlopeFit>,
    pub slope_surrogate: Option<SlopeFit>,
    /// Adjacent inversions of the per-width median jet residual.
    pub monotone_inversions: usize,
    pub bounds: Vec<BoundReport>,
    pub versions: String,
    pub master_seed: u64,
    #[serde(skip)]
    pub records: Vec<SweepRecord>,
}

impl SweepReport {
    pub fn slope_in_band(&self) -> bool {
        match &self.slope {
            Some(fit) => {
                let (lo, hi) = self.config.slope_band;
                fit.value >= lo && fit.value <= hi
            }
            None => false,
        }
    }

    /// Fraction of (m, seed) cells whose remainder satisfied the attached
    /// bound.
    pub fn bound_pass_rate(&self) -> f64 {
        if self.bounds.is_empty() {
            return 1.0;
        }
        self.bounds.iter().filter(|b| b.satisfied).count() as f64 / self.bounds.len() as f64
    }
}

struct CellOutcome {
    records: Vec<SweepRecord>,
    bound: Option<BoundReport>,
}

/// Run the sweep grid. For each (width, seed) the weights are drawn once;
/// each direction contributes one record with the max residuals over the
/// t grid.
pub fn run_width_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let jet_degree = cfg.jet_degree();
    let cells: Vec<(usize, usize)> = cfg
        .widths
        .iter()
        .flat_map(|&m| (0..cfg.seeds).map(move |s| (m, s)))
        .collect();

    let outcomes: Vec<Result<CellOutcome>> = cells
        .par_iter()
        .map(|&(m, seed)| run_cell(cfg, m, seed, jet_degree))
        .collect();

    let mut records = Vec::with_capacity(cells.len() * cfg.directions);
    let mut bounds = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        records.extend(outcome.records);
        bounds.extend(outcome.bound);
    }

    let per_m: Vec<PerWidth> = cfg
        .widths
        .iter()
        .map(|&m| {
            let jet: Vec<f64> = records
                .iter()
                .filter(|r| r.m == m)
                .map(|r| r.max_residual_jet)
                .collect();
            let sur: Vec<f64> = records
                .iter()
                .filter(|r| r.m == m)
                .map(|r| r.max_residual_surrogate)
                .collect();
            let full = records
                .iter()
                .filter(|r| r.m == m)
                .map(|r| r.max_residual_full)
                .fold(0.0f64, f64::max);
            PerWidth {
                m,
                max_jet: jet.iter().copied().fold(0.0, f64::max),
                median_jet: median(&jet),
                max_surrogate: sur.iter().copied().fold(0.0, f64::max),
                median_surrogate: median(&sur),
                max_full: full,
            }
        })
        .collect();

    let xs: Vec<f64> = per_m.iter().map(|p| p.m as f64).collect();
    let ys_jet: Vec<f64> = per_m.iter().map(|p| p.max_jet).collect();
    let ys_sur: Vec<f64> = per_m.iter().map(|p| p.max_surrogate).collect();
    let slope = if ys_jet.iter().all(|&v| v > 0.0) {
        loglog_slope(&xs, &ys_jet).ok()
    } else {
        None
    };
    let slope_surrogate = if ys_sur.iter().all(|&v| v > 0.0) {
        loglog_slope(&xs, &ys_sur).ok()
    } else {
        None
    };

    let monotone_inversions = per_m
        .windows(2)
        .filter(|w| w[1].median_jet > w[0].median_jet)
        .count();

    Ok(SweepReport {
        config: cfg.clone(),
        per_m,
        slope,
        slope_surrogate,
        monotone_inversions,
        bounds,
        versions: crate_version(),
        master_seed: cfg.master_seed,
        records,
    })
}

fn run_cell(cfg: &SweepConfig, m: usize, seed: usize, jet_degree: usize) -> Result<CellOutcome> {
    let spec = cfg.template.spec(m)?;
    let p = spec.slot_count();
    let weights = Arc::new(WeightSet::init(
        &spec,
        rng::mix(cfg.master_seed, &[0x5eed, m as u64, seed as u64]),
    ));
    let x = InputVector::basis(spec.input_dim(), cfg.input_norm);
    let grid = t_grid(cfg.t_points, cfg.t_max);

    let mut records = Vec::with_capacity(cfg.directions);
    let mut cell_max_jet = 0.0f64;
    for dir in 0..cfg.directions {
        let dir_seed = rng::mix(cfg.master_seed, &[0xd12, m as u64, seed as u64, dir as u64]);
        let use_maximizer =
            cfg.direction_mode == DirectionMode::Maximize && jet_degree < p && cfg.radius > 0.0;
        let residuals = if use_maximizer {
            let params = MaximizeParams {
                coefficient: jet_degree + 1,
                radius: cfg.radius,
                sweeps: 8,
                seed: dir_seed,
            };
            let (delta, _) = maximize_tail_coefficient(weights.as_ref(), &x, &params)?;
            residuals_on_grid(&weights, &delta, &x, &grid, jet_degree, p)?
        } else {
            let delta = Direction::sample(&spec, dir_seed, cfg.radius);
            residuals_on_grid(&weights, &delta, &x, &grid, jet_degree, p)?
        };
        records.push(SweepRecord {
            m,
            seed,
            direction: dir,
            max_residual_jet: residuals.0,
            max_residual_surrogate: residuals.1,
            max_residual_full: residuals.2,
        });
        cell_max_jet = cell_max_jet.max(residuals.0);
    }

    // attach the remainder bound for this (m, seed) when the jet degree is
    // the block count (the regime the bound is stated for)
    let bound = if jet_degree == cfg.template.blocks() && cfg.radius > 0.0 {
        let blocks = cfg.template.blocks();
        let theoretical = if spec.is_single_bottleneck() {
            bilinear_remainder_bound(
                m as f64,
                spec.widths[1],
                spec.widths[0],
                cfg.radius,
                x.norm(),
            )?
        } else {
            // Taylor-Lagrange: sup‖∂^{B+1}g‖ · ‖tΔ‖^{B+1} / (B+1)!, with the
            // full tuple norm √P·R·t_max
            let interior = &spec.widths[1..spec.widths.len() - 1];
            let norm_bound =
                derivative_upper_bound(m as f64, cfg.radius, blocks, interior, x.norm())?;
            let tuple_norm = (p as f64).sqrt() * cfg.radius * cfg.t_max;
            let mut fact = 1.0;
            for k in 2..=blocks + 1 {
                fact *= k as f64;
            }
            norm_bound * tuple_norm.powi(blocks as i32 + 1) / fact
        };
        Some(BoundReport::new(
            "remainder",
            BoundParams {
                m: Some(m),
                blocks: Some(blocks),
                depths: Some(cfg.template.depths.clone()),
                widths: Some(cfg.template.widths.clone()),
                radius: Some(cfg.radius),
                x_norm: Some(x.norm()),
                extra: None,
            },
            theoretical,
            cell_max_jet,
            BoundSide::Upper,
            seed as u64,
        ))
    } else {
        None
    };

    Ok(CellOutcome { records, bound })
}

/// Max |forward − jet|, |forward − surrogate|, |forward − full poly| over
/// the t grid, with the forward evaluated honestly at each t.
fn residuals_on_grid<T: Tangent>(
    weights: &Arc<WeightSet>,
    delta: &T,
    x: &InputVector,
    grid: &[f64],
    jet_degree: usize,
    p: usize,
) -> Result<(f64, f64, f64)> {
    let sv = subset_values(weights.as_ref(), delta, x)?;
    let coeffs = coefficients_from_subsets(&sv, p);
    let ml = multilinear_coefficients_from_subsets(&sv, weights.spec());
    let mut max_jet = 0.0f64;
    let mut max_sur = 0.0f64;
    let mut max_full = 0.0f64;
    for &t in grid {
        let fwd = forward_line(weights.as_ref(), delta, t, x)?;
        let jet = horner(&coeffs[..=jet_degree.min(p)], t);
        let sur = horner(&ml, t);
        let full = horner(&coeffs, t);
        max_jet = max_jet.max((fwd - jet).abs());
        max_sur = max_sur.max((fwd - sur).abs());
        max_full = max_full.max((fwd - full).abs());
    }
    Ok((max_jet, max_sur, max_full))
}
