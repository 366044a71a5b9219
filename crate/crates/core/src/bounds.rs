//! Closed-form bound formulas, witness constructions, and tail checks.
//!
//! Each function evaluates one theoretical bound as a pure formula;
//! logarithms are natural. The harness pairs every formula with the
//! empirical quantity it bounds and reports satisfaction per seed.

use crate::deriv::{derivative_contraction, BlockTangent};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scale, Matrix};
use crate::net::{Activation, Direction, InputVector, WeightSet};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

fn check_positive(vals: &[(&str, f64)]) -> Result<()> {
    for (name, v) in vals {
        if *v <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

/// Upper bound on the cubic Taylor remainder of the 4-layer
/// single-bottleneck network over the per-matrix radius-R ball:
/// `(8√m + 2√r + √d + 1 + 4R)·‖x‖·R³ / (m√(rd))`.
pub fn bilinear_remainder_bound(
    m: f64,
    r: usize,
    d: usize,
    radius: f64,
    x_norm: f64,
) -> Result<f64> {
    check_positive(&[("m", m), ("r", r as f64), ("d", d as f64)])?;
    let (r, d) = (r as f64, d as f64);
    Ok(
        (8.0 * m.sqrt() + 2.0 * r.sqrt() + d.sqrt() + 1.0 + 4.0 * radius) * x_norm * radius.powi(3)
            / (m * (r * d).sqrt()),
    )
}

/// Upper bound on the within-block second-derivative pair norms:
/// `2(√6 + √d)·‖x‖·log m / √(md)`.
pub fn within_block_hessian_bound(m: f64, d: usize, x_norm: f64) -> Result<f64> {
    check_positive(&[("m", m), ("d", d as f64)])?;
    let d = d as f64;
    Ok(2.0 * (6.0f64.sqrt() + d.sqrt()) * x_norm * m.ln() / (m * d).sqrt())
}

/// Lower bound on the cross-Hessian spectral norm: `‖x‖ / (24√(rd))`.
pub fn cross_hessian_lower_bound(r: usize, d: usize, x_norm: f64) -> Result<f64> {
    check_positive(&[("r", r as f64), ("d", d as f64)])?;
    Ok(x_norm / (24.0 * ((r * d) as f64).sqrt()))
}

/// Upper bound on the order-(B+1) derivative norm over the radius-R ball:
/// `(3 + R/√m)^B · ‖x‖ / (√(Π_{b<B} d_b) · √m)`.
///
/// `interior_widths` are the bottleneck dimensions `d_1..d_{B-1}`; the
/// empty product is 1 (no bottleneck).
pub fn derivative_upper_bound(
    m: f64,
    radius: f64,
    blocks: usize,
    interior_widths: &[usize],
    x_norm: f64,
) -> Result<f64> {
    check_positive(&[("m", m), ("B", blocks as f64)])?;
    let prod: f64 = interior_widths.iter().map(|&d| d as f64).product();
    Ok((3.0 + radius / m.sqrt()).powi(blocks as i32) * x_norm / (prod.sqrt() * m.sqrt()))
}

/// Lower bound on the order-B derivative norm at initialization:
/// `2‖x‖ · Π_b 1/(2^{L_b/2} √d_{b-1})`.
pub fn derivative_lower_bound(depths: &[usize], in_widths: &[usize], x_norm: f64) -> Result<f64> {
    if depths.len() != in_widths.len() || depths.is_empty() {
        return Err(Error::InvalidConfig(
            "need one input width per block for the derivative lower bound".into(),
        ));
    }
    let mut prod = 1.0;
    for (&l, &d) in depths.iter().zip(in_widths) {
        check_positive(&[("L_b", l as f64), ("d_{b-1}", d as f64)])?;
        prod /= 2.0f64.powf(l as f64 / 2.0) * (d as f64).sqrt();
    }
    Ok(2.0 * x_norm * prod)
}

/// Upper bound on a wide block's output norm over the radius-R ball:
/// `(√6/2 + R/√m)^L · log m · √c · ‖x‖/√d`.
pub fn block_output_bound(
    layers: usize,
    m: f64,
    radius: f64,
    out_dim: usize,
    in_dim: usize,
    x_norm: f64,
) -> Result<f64> {
    check_positive(&[
        ("L", layers as f64),
        ("m", m),
        ("c", out_dim as f64),
        ("d", in_dim as f64),
    ])?;
    Ok(
        (6.0f64.sqrt() / 2.0 + radius / m.sqrt()).powi(layers as i32)
            * m.ln()
            * (out_dim as f64).sqrt()
            * x_norm
            / (in_dim as f64).sqrt(),
    )
}

/// Upper bound on the order-p partial derivative of an L-layer wide block
/// over the radius-R ball: `(3√m + R)^{L-p} · ‖x‖ / (m^{(L-1)/2} √d)`.
pub fn partial_derivative_bound(
    layers: usize,
    p: usize,
    m: f64,
    radius: f64,
    in_dim: usize,
    x_norm: f64,
) -> Result<f64> {
    check_positive(&[
        ("L", layers as f64),
        ("p", p as f64),
        ("m", m),
        ("d", in_dim as f64),
    ])?;
    if p > layers {
        return Err(Error::InvalidConfig(format!(
            "p = {p} exceeds L = {layers}"
        )));
    }
    Ok((3.0 * m.sqrt() + radius).powi((layers - p) as i32) * x_norm
        / (m.powf((layers as f64 - 1.0) / 2.0) * (in_dim as f64).sqrt()))
}

/// Lower bound on the norm of the scaled hidden chain vector of block b:
/// `√m / (2^{L_b/2} √d_{b-1})`. Depth 0 is degenerate (empty chain).
pub fn hidden_norm_lower_bound(m: f64, depth: usize, in_dim: usize) -> Result<f64> {
    check_positive(&[("m", m), ("d_prev", in_dim as f64)])?;
    Ok(m.sqrt() / (2.0f64.powf(depth as f64 / 2.0) * (in_dim as f64).sqrt()))
}

// ---------------------------------------------------------------------------
// Witness constructions
// ---------------------------------------------------------------------------

/// Rank-one witness for the cross-Hessian lower bound.
#[derive(Debug, Clone)]
pub struct CrossHessianWitness {
    /// Bilinear form value `⟨v₁, H v₂⟩` computed through the operator.
    pub value_operator: f64,
    /// The same value from the explicit norm formula; available when the
    /// input is axis-aligned (the construction assumes `x ∝ e₁`).
    pub value_closed: Option<f64>,
    pub v1: BlockTangent,
    pub v2: BlockTangent,
}

/// Build the unit direction pair supported on the second layers of both
/// blocks from the first columns of the first layers, and evaluate the
/// cross-Hessian form on it. The value is a lower-bound certificate for
/// `‖H‖`; for axis-aligned `x` it equals
/// `‖x‖·‖u₁‖²‖u₂‖² / ((‖u₁‖²+‖u₂‖²)·m√(rd))`.
pub fn cross_hessian_witness(w: &WeightSet, x: &InputVector) -> Result<CrossHessianWitness> {
    let spec = w.spec();
    if !spec.is_single_bottleneck() || spec.output_dim() != 1 {
        return Err(Error::Unsupported(
            "the cross-Hessian witness is defined for the 4-layer single-bottleneck network".into(),
        ));
    }
    if spec.activation != Activation::Identity {
        return Err(Error::Unsupported("identity activation required".into()));
    }
    let m = spec.hidden as f64;
    let r = spec.widths[1];
    let d = spec.widths[0] as f64;

    // u₁ = W₁⁽¹⁾ e₁ (first column), u₂ = W₂⁽¹⁾ e₁, both unscaled
    let u1: Vec<f64> = (0..spec.hidden).map(|i| w.matrix(0).get(i, 0)).collect();
    let u2: Vec<f64> = (0..spec.hidden).map(|i| w.matrix(2).get(i, 0)).collect();
    let (n1sq, n2sq) = (dot(&u1, &u1), dot(&u2, &u2));
    let total = n1sq + n2sq;

    let mut v1 = BlockTangent::zero(spec, 0);
    let mut v2 = BlockTangent::zero(spec, 1);
    if total > 0.0 {
        let inv = 1.0 / total.sqrt();
        // first row of the r×m second layer of block 1 gets u₁ᵀ
        let mut row = u1.clone();
        scale(&mut row, inv);
        let mut m12 = Matrix::zeros(r, spec.hidden);
        m12.row_mut(0).copy_from_slice(&row);
        v1.mats[1] = m12;
        // the 1×m output layer of block 2 gets u₂ᵀ
        let mut row2 = u2.clone();
        scale(&mut row2, inv);
        v2.mats[1] = Matrix::outer(&[1.0], &row2);
    }

    let hv2 = crate::deriv::cross_hessian_apply(w, x, &v2)?;
    let value_operator = v1.inner(&hv2);
    let value_closed = if x.is_axis_aligned() && total > 0.0 {
        Some(x.norm() * n1sq * n2sq / (total * m * (r as f64 * d).sqrt()))
    } else if x.norm() == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(CrossHessianWitness {
        value_operator,
        value_closed,
        v1,
        v2,
    })
}

/// Witness tuple for the order-B derivative lower bound.
#[derive(Debug, Clone)]
pub struct DerivativeWitness {
    /// Contraction value from the chain closed form.
    pub value_closed: f64,
    /// The same value from the generic substitution contraction.
    pub value_contraction: f64,
    /// Norms of the scaled hidden chain vectors `u_b`.
    pub hidden_norms: Vec<f64>,
    /// One unit slot-supported tangent per block.
    pub directions: Vec<Direction>,
}

/// Build one unit tangent per block, supported on the first row of the
/// block's last layer and aligned with the scaled hidden chain vector
/// `u_b` (the block applied to `e₁` up to its last layer), and contract
/// the order-B derivative against the tuple.
pub fn derivative_witness(w: &WeightSet, x: &InputVector) -> Result<DerivativeWitness> {
    let spec = w.spec();
    if spec.activation != Activation::Identity || spec.output_dim() != 1 {
        return Err(Error::Unsupported(
            "the derivative witness requires identity activation and output dim 1".into(),
        ));
    }
    let slots = spec.slots();
    let mut directions = Vec::with_capacity(spec.blocks);
    let mut hidden_norms = Vec::with_capacity(spec.blocks);
    let mut closed = 1.0f64;
    for b in 0..spec.blocks {
        let depth = spec.depths[b];
        let first = spec.slot_index(b, 0)?;
        let last = spec.slot_index(b, depth - 1)?;
        // u_b: scaled chain of layers 1..L_b-1 applied to e₁
        let mut u = vec![0.0; spec.widths[b]];
        u[0] = 1.0;
        for l in 0..depth - 1 {
            let idx = first + l;
            let mut next = w.matrix(idx).matvec(&u);
            scale(&mut next, slots[idx].scale());
            u = next;
        }
        let un = norm(&u);
        hidden_norms.push(un);
        let mut mats: Vec<Matrix> = slots
            .iter()
            .map(|s| Matrix::zeros(s.rows, s.cols))
            .collect();
        let s_last = slots[last];
        let mut m_last = Matrix::zeros(s_last.rows, s_last.cols);
        if un > 0.0 {
            let mut row = u.clone();
            scale(&mut row, 1.0 / un);
            m_last.row_mut(0).copy_from_slice(&row);
        }
        mats[last] = m_last;
        directions.push(Direction::from_matrices(spec, mats)?);

        // per-block closed-form factor: last-layer scale × (u alignment)
        let factor = if b == 0 {
            // u₁ᵀ (chain applied to x) / ‖u₁‖
            let mut v = x.data().to_vec();
            for l in 0..depth - 1 {
                let idx = first + l;
                let mut next = w.matrix(idx).matvec(&v);
                scale(&mut next, slots[idx].scale());
                v = next;
            }
            if un > 0.0 {
                dot(&u, &v) / un
            } else {
                // depth-1 block: u = e₁, chain is empty, v = x
                v[0]
            }
        } else {
            un
        };
        closed *= s_last.scale() * factor;
    }

    let refs: Vec<&Direction> = directions.iter().collect();
    let value_contraction = derivative_contraction(w, x, &refs)?;
    Ok(DerivativeWitness {
        value_closed: closed,
        value_contraction,
        hidden_norms,
        directions,
    })
}

// ---------------------------------------------------------------------------
// Tail-bound Monte Carlo
// ---------------------------------------------------------------------------

/// Which concentration inequality to exercise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// `P(|z| ≥ t) ≤ 2 exp(-t²/2σ²)` for `z ~ N(0, σ²)`.
    Gaussian { sigma: f64, t: f64 },
    /// `P(|z/m − 1| ≥ t) ≤ 2 exp(-m t²/8)` for `z ~ χ²(m)`, `t ∈ (0,1)`.
    ChiSquared { m: usize, t: f64 },
    /// `P(‖A‖ > √n + √N + t) ≤ 2 exp(-t²/2)` for an N×n standard normal
    /// matrix.
    MatrixNorm { rows: usize, cols: usize, t: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCheck {
    pub kind: TailKind,
    pub trials: usize,
    pub empirical: f64,
    pub bound: f64,
    /// Three binomial standard errors of the empirical rate.
    pub slack: f64,
    pub satisfied: bool,
}

/// Monte Carlo frequency of the tail event versus the stated bound.
/// Satisfied when `empirical ≤ bound + 3·stderr`.
pub fn tail_bound_monte_carlo(kind: TailKind, trials: usize, seed: u64) -> Result<TailCheck> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let mut hits = 0usize;
    let bound = match kind {
        TailKind::Gaussian { sigma, t } => {
            check_positive(&[("sigma", sigma)])?;
            let mut rs = rng::stream(seed, &[0x7a11, 0]);
            for _ in 0..trials {
                let z: f64 = rs.sample::<f64, _>(StandardNormal) * sigma;
                if z.abs() >= t {
                    hits += 1;
                }
            }
            2.0 * (-t * t / (2.0 * sigma * sigma)).exp()
        }
        TailKind::ChiSquared { m, t } => {
            check_positive(&[("m", m as f64), ("t", t)])?;
            let mut rs = rng::stream(seed, &[0x7a11, 1]);
            for _ in 0..trials {
                let mut z = 0.0;
                for _ in 0..m {
                    let g: f64 = rs.sample(StandardNormal);
                    z += g * g;
                }
                if (z / m as f64 - 1.0).abs() >= t {
                    hits += 1;
                }
            }
            2.0 * (-(m as f64) * t * t / 8.0).exp()
        }
        TailKind::MatrixNorm { rows, cols, t } => {
            check_positive(&[("rows", rows as f64), ("cols", cols as f64)])?;
            let threshold = (cols as f64).sqrt() + (rows as f64).sqrt() + t;
            for trial in 0..trials {
                let mut rs = rng::stream(seed, &[0x7a11, 2, trial as u64]);
                let a = Matrix::standard_normal(rows, cols, &mut rs);
                if matrix_operator_norm(&a) > threshold {
                    hits += 1;
                }
            }
            2.0 * (-t * t / 2.0).exp()
        }
    };
    let empirical = hits as f64 / trials as f64;
    let stderr = (empirical * (1.0 - empirical) / trials as f64).sqrt();
    let slack = 3.0 * stderr;
    Ok(TailCheck {
        kind,
        trials,
        empirical,
        bound,
        slack,
        satisfied: empirical <= bound + slack,
    })
}

/// Operator norm of a dense matrix by Gram power iteration, with a small
/// tolerance-based stop. Used only for the matrix tail check.
pub fn matrix_operator_norm(a: &Matrix) -> f64 {
    let n = a.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma2_prev = 0.0f64;
    for _ in 0..500 {
        let av = a.matvec(&v);
        let mut next = a.rmatvec(&av);
        let nn = norm(&next);
        if nn == 0.0 {
            return 0.0;
        }
        scale(&mut next, 1.0 / nn);
        v = next;
        if (nn - sigma2_prev).abs() <= 1e-12 * nn.max(1.0) {
            return nn.sqrt();
        }
        sigma2_prev = nn;
    }
    sigma2_prev.sqrt()
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Upper,
    Lower,
}

/// Parameters a bound was evaluated at; unused fields stay `None`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<String>,
}

/// One bound evaluation paired with its empirical counterpart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub params: BoundParams,
    pub theoretical: f64,
    pub empirical: f64,
    pub side: BoundSide,
    pub satisfied: bool,
    pub seed: u64,
}

impl BoundReport {
    pub fn new(
        name: &str,
        params: BoundParams,
        theoretical: f64,
        empirical: f64,
        side: BoundSide,
        seed: u64,
    ) -> Self {
        // small relative slack absorbs floating-point roundoff on ties
        let eps = 1e-9 * theoretical.abs().max(1.0);
        let satisfied = match side {
            BoundSide::Upper => empirical <= theoretical + eps,
            BoundSide::Lower => empirical >= theoretical - eps,
        };
        Self {
            bound_name: name.to_string(),
            params,
            theoretical,
            empirical,
            side,
            satisfied,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetworkSpec;
    use approx::assert_relative_eq;

    #[test]
    fn remainder_bound_arithmetic() {
        let b = bilinear_remainder_bound(10_000.0, 1, 1, 1.0, 1.0).unwrap();
        assert_relative_eq!(b, 0.0808, max_relative = 1e-12);
        assert_eq!(
            bilinear_remainder_bound(100.0, 2, 3, 1.0, 0.0).unwrap(),
            0.0
        );
        assert_eq!(
            bilinear_remainder_bound(100.0, 2, 3, 0.0, 1.0).unwrap(),
            0.0
        );
        assert!(bilinear_remainder_bound(0.0, 1, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn remainder_bound_monotone() {
        let mut prev = f64::INFINITY;
        for m in [64.0, 256.0, 1024.0, 4096.0] {
            let b = bilinear_remainder_bound(m, 1, 2, 1.0, 1.0).unwrap();
            assert!(b < prev, "bound should decrease in m");
            prev = b;
        }
        let lo = bilinear_remainder_bound(256.0, 1, 2, 0.5, 1.0).unwrap();
        let hi = bilinear_remainder_bound(256.0, 1, 2, 1.5, 1.0).unwrap();
        assert!(hi > lo, "bound should increase in the radius");
    }

    #[test]
    fn within_block_bound_arithmetic() {
        // at m = e²: 2(√6 + 1)·2/e
        let e = std::f64::consts::E;
        let b = within_block_hessian_bound(e * e, 1, 1.0).unwrap();
        assert_relative_eq!(
            b,
            2.0 * (6.0f64.sqrt() + 1.0) * 2.0 / e,
            max_relative = 1e-12
        );
        let b2 = within_block_hessian_bound(10_000.0, 6, 1.0).unwrap();
        assert_relative_eq!(b2, 0.368414, max_relative = 1e-5);
        assert_eq!(within_block_hessian_bound(100.0, 3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cross_lower_bound_arithmetic() {
        assert_relative_eq!(
            cross_hessian_lower_bound(1, 1, 1.0).unwrap(),
            1.0 / 24.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            cross_hessian_lower_bound(4, 9, 6.0).unwrap(),
            1.0 / 24.0,
            max_relative = 1e-14
        );
        assert_eq!(cross_hessian_lower_bound(2, 2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_bounds_arithmetic() {
        let up = derivative_upper_bound(10_000.0, 1.0, 2, &[1], 1.0).unwrap();
        assert_relative_eq!(up, 3.01f64 * 3.01 / 100.0, max_relative = 1e-12);
        // no bottleneck: empty product
        let up1 = derivative_upper_bound(100.0, 1.0, 1, &[], 1.0).unwrap();
        assert_relative_eq!(up1, 3.1 / 10.0, max_relative = 1e-12);

        let lo = derivative_lower_bound(&[2, 2], &[1, 1], 1.0).unwrap();
        assert_relative_eq!(lo, 0.5, max_relative = 1e-14);
        let lo1 = derivative_lower_bound(&[2], &[4], 1.0).unwrap();
        assert_relative_eq!(lo1, 0.5, max_relative = 1e-14);
        assert_eq!(derivative_lower_bound(&[2, 2], &[1, 1], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn block_output_bound_arithmetic() {
        // at m = e with R = 0: (√6/2)·ln e = √6/2
        let b = block_output_bound(1, std::f64::consts::E, 0.0, 1, 1, 1.0).unwrap();
        assert_relative_eq!(b, 6.0f64.sqrt() / 2.0, max_relative = 1e-12);
        let b2 = block_output_bound(2, 10_000.0, 1.0, 1, 2, 1.0).unwrap();
        assert_relative_eq!(b2, 9.9285, max_relative = 1e-4);
        assert_eq!(block_output_bound(2, 100.0, 1.0, 1, 2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn partial_derivative_bound_arithmetic() {
        let b = partial_derivative_bound(2, 1, 100.0, 1.0, 1, 1.0).unwrap();
        assert_relative_eq!(b, 3.1, max_relative = 1e-12);
        let at_l = partial_derivative_bound(3, 3, 49.0, 5.0, 4, 2.0).unwrap();
        assert_relative_eq!(at_l, 2.0 / (49.0 * 2.0), max_relative = 1e-12);
        assert!(partial_derivative_bound(2, 3, 100.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn hidden_norm_bound_arithmetic() {
        assert_relative_eq!(
            hidden_norm_lower_bound(4.0, 2, 1).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        // quadrupling m doubles the bound
        let a = hidden_norm_lower_bound(16.0, 3, 2).unwrap();
        let b = hidden_norm_lower_bound(64.0, 3, 2).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        // depth 0 degenerates to √m/√d
        assert_relative_eq!(
            hidden_norm_lower_bound(9.0, 0, 1).unwrap(),
            3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn bounds_are_monotone_in_their_arguments() {
        // partial-derivative bound decreases in the derivative order
        let mut prev = f64::INFINITY;
        for p in 1..=3 {
            let b = partial_derivative_bound(3, p, 256.0, 1.0, 2, 1.0).unwrap();
            assert!(b < prev, "should decrease in p");
            prev = b;
        }
        // block-output bound increases with depth and radius
        assert!(
            block_output_bound(3, 256.0, 1.0, 1, 2, 1.0).unwrap()
                > block_output_bound(2, 256.0, 1.0, 1, 2, 1.0).unwrap()
        );
        assert!(
            block_output_bound(2, 256.0, 2.0, 1, 2, 1.0).unwrap()
                > block_output_bound(2, 256.0, 0.5, 1, 2, 1.0).unwrap()
        );
        // derivative upper bound decreases in the hidden width
        assert!(
            derivative_upper_bound(1024.0, 1.0, 2, &[1], 1.0).unwrap()
                < derivative_upper_bound(64.0, 1.0, 2, &[1], 1.0).unwrap()
        );
        // cross-Hessian lower bound decreases in the interface dims
        assert!(
            cross_hessian_lower_bound(4, 4, 1.0).unwrap()
                < cross_hessian_lower_bound(1, 1, 1.0).unwrap()
        );
    }

    #[test]
    fn bounds_scale_linearly_in_x() {
        let pairs = [
            bilinear_remainder_bound(256.0, 1, 2, 1.0, 1.0).unwrap(),
            within_block_hessian_bound(256.0, 2, 1.0).unwrap(),
            cross_hessian_lower_bound(1, 2, 1.0).unwrap(),
            derivative_upper_bound(256.0, 1.0, 2, &[1], 1.0).unwrap(),
            derivative_lower_bound(&[2, 2], &[2, 1], 1.0).unwrap(),
            block_output_bound(2, 256.0, 1.0, 1, 2, 1.0).unwrap(),
            partial_derivative_bound(2, 1, 256.0, 1.0, 2, 1.0).unwrap(),
        ];
        let doubled = [
            bilinear_remainder_bound(256.0, 1, 2, 1.0, 2.0).unwrap(),
            within_block_hessian_bound(256.0, 2, 2.0).unwrap(),
            cross_hessian_lower_bound(1, 2, 2.0).unwrap(),
            derivative_upper_bound(256.0, 1.0, 2, &[1], 2.0).unwrap(),
            derivative_lower_bound(&[2, 2], &[2, 1], 2.0).unwrap(),
            block_output_bound(2, 256.0, 1.0, 1, 2, 2.0).unwrap(),
            partial_derivative_bound(2, 1, 256.0, 1.0, 2, 2.0).unwrap(),
        ];
        for (a, b) in pairs.iter().zip(&doubled) {
            assert_relative_eq!(*b, 2.0 * *a, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_tail_vacuous_at_zero() {
        let c = tail_bound_monte_carlo(TailKind::Gaussian { sigma: 1.0, t: 0.0 }, 1000, 1).unwrap();
        assert_eq!(c.empirical, 1.0);
        assert_eq!(c.bound, 2.0);
        assert!(c.satisfied);
    }

    #[test]
    fn witness_values_agree_on_axis_input() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 128, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 3);
        let x = InputVector::basis(2, 1.0);
        let wit = cross_hessian_witness(&w, &x).unwrap();
        let closed = wit.value_closed.unwrap();
        assert_relative_eq!(wit.value_operator, closed, max_relative = 1e-9);
        assert!(closed > 0.0);
    }

    #[test]
    fn witness_zero_input() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 32, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 3);
        let x = InputVector::new(vec![0.0, 0.0]).unwrap();
        let wit = cross_hessian_witness(&w, &x).unwrap();
        assert_eq!(wit.value_operator, 0.0);
        let dw = derivative_witness(&w, &x).unwrap();
        assert_eq!(dw.value_contraction, 0.0);
        assert_eq!(dw.value_closed, 0.0);
    }

    #[test]
    fn derivative_witness_dual_routes_agree() {
        for depths in [vec![2usize, 2], vec![2, 2, 2], vec![3, 3]] {
            let blocks = depths.len();
            let mut widths = vec![2usize];
            widths.extend(std::iter::repeat(1).take(blocks));
            let spec = NetworkSpec::new(depths, widths, 96, Activation::Identity).unwrap();
            let w = WeightSet::init(&spec, 5);
            let x = InputVector::basis(2, 1.0);
            let wit = derivative_witness(&w, &x).unwrap();
            assert_relative_eq!(wit.value_contraction, wit.value_closed, max_relative = 1e-9);
            assert!(wit.value_closed.abs() > 0.0);
        }
    }
}
