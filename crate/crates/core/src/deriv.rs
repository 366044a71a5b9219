//! Exact derivative structure of identity-activation bottleneck networks.
//!
//! The network output is linear in every slot, so its restriction to a line
//! `W + tΔ` is a polynomial of degree at most `P` (the total layer count),
//! and each Taylor coefficient is a finite sum of substitution forwards:
//! replace a subset of slots by the corresponding direction slots and
//! evaluate. All operations here are built on that identity; nothing is
//! differentiated numerically outside the test oracles.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale, Matrix};
use crate::net::{
    forward_line, forward_masked, Activation, Direction, InputVector, NetworkSpec, Tangent,
    WeightSet, MAX_TOTAL_LAYERS,
};
use crate::tensor::{spectral_norm_power, MultilinearOp, PowerParams};
use std::sync::Arc;

fn require_scalar_identity(spec: &NetworkSpec) -> Result<()> {
    if spec.activation != Activation::Identity {
        return Err(Error::Unsupported(
            "derivative machinery requires the identity activation".into(),
        ));
    }
    if spec.output_dim() != 1 {
        return Err(Error::Unsupported(
            "derivative machinery requires output dim 1".into(),
        ));
    }
    Ok(())
}

/// View of one slot during a substituted forward: the weight itself or a
/// replacement matrix.
#[derive(Clone, Copy)]
pub enum SlotView<'a> {
    Keep,
    Dense(&'a Matrix),
}

/// Scalar forward with per-slot views.
pub fn forward_views(w: &WeightSet, views: &[SlotView], x: &InputVector) -> Result<f64> {
    require_scalar_identity(w.spec())?;
    let mut v = x.data().to_vec();
    for (idx, slot) in w.spec().slots().iter().enumerate() {
        let mut next = match views.get(idx).copied().unwrap_or(SlotView::Keep) {
            SlotView::Keep => w.matrix(idx).matvec(&v),
            SlotView::Dense(m) => {
                if m.rows() != slot.rows || m.cols() != slot.cols {
                    return Err(Error::DimensionMismatch(format!(
                        "replacement for slot ({}, {}) has wrong shape",
                        slot.block, slot.layer
                    )));
                }
                m.matvec(&v)
            }
        };
        scale(&mut next, slot.scale());
        v = next;
    }
    Ok(v[0])
}

/// Factored gradient of the substituted chain with respect to `slot`:
/// returns `(left, right)` with the slot scale folded into `left`, so the
/// dense gradient is `outer(left, right)` and
/// `⟨G, V⟩ = g(views with slot ← V; x)`.
fn chain_grad_factors(
    w: &WeightSet,
    views: &[SlotView],
    x: &InputVector,
    slot: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_scalar_identity(w.spec())?;
    let slots = w.spec().slots();
    let p = slots.len();
    let mut right = x.data().to_vec();
    for i in 0..slot {
        let mut next = match views.get(i).copied().unwrap_or(SlotView::Keep) {
            SlotView::Keep => w.matrix(i).matvec(&right),
            SlotView::Dense(m) => m.matvec(&right),
        };
        scale(&mut next, slots[i].scale());
        right = next;
    }
    let mut left = vec![1.0];
    for i in (slot + 1..p).rev() {
        let mut next = match views.get(i).copied().unwrap_or(SlotView::Keep) {
            SlotView::Keep => w.matrix(i).rmatvec(&left),
            SlotView::Dense(m) => m.rmatvec(&left),
        };
        scale(&mut next, slots[i].scale());
        left = next;
    }
    scale(&mut left, slots[slot].scale());
    Ok((left, right))
}

/// The matrix `G` with `⟨G, V⟩ = g(W with slot ← V; x)` for every `V`.
///
/// For a scalar output this is always rank one: the product of the scaled
/// chain after the slot (a row) and the scaled chain before it applied to
/// `x` (a column).
pub fn gradient_by_substitution(w: &WeightSet, x: &InputVector, slot: usize) -> Result<Matrix> {
    if slot >= w.spec().slot_count() {
        return Err(Error::DimensionMismatch(format!("no slot {slot}")));
    }
    let (left, right) = chain_grad_factors(w, &[], x, slot)?;
    Ok(Matrix::outer(&left, &right))
}

/// Closed-form gradient of the 4-layer single-bottleneck network, one
/// matrix per slot, assembled from the explicit products
/// `(W₂⁽²⁾W₂⁽¹⁾W₁⁽²⁾)ᵀxᵀ`, `(W₂⁽²⁾W₂⁽¹⁾)ᵀ(W₁⁽¹⁾x)ᵀ`,
/// `(W₂⁽²⁾)ᵀ(W₁⁽²⁾W₁⁽¹⁾x)ᵀ`, `(W₂⁽¹⁾W₁⁽²⁾W₁⁽¹⁾x)ᵀ`, each with the
/// global scaling folded in. This is a route independent of
/// [`gradient_by_substitution`], kept as its cross-check.
pub fn gradient_closed_form(w: &WeightSet, x: &InputVector) -> Result<Direction> {
    let spec = w.spec();
    require_scalar_identity(spec)?;
    if !spec.is_single_bottleneck() {
        return Err(Error::Unsupported(
            "closed-form gradient is defined for the 4-layer single-bottleneck architecture".into(),
        ));
    }
    let d = spec.widths[0] as f64;
    let r = spec.widths[1] as f64;
    let m = spec.hidden as f64;
    let c = 1.0 / (m * (r * d).sqrt());
    let (w11, w12, w21, w22) = (w.matrix(0), w.matrix(1), w.matrix(2), w.matrix(3));

    // forward chain pieces
    let ax = w11.matvec(x.data()); // W₁⁽¹⁾ x ∈ R^m
    let bx = w12.matvec(&ax); // W₁⁽²⁾W₁⁽¹⁾x ∈ R^r
    let cx = w21.matvec(&bx); // W₂⁽¹⁾W₁⁽²⁾W₁⁽¹⁾x ∈ R^m
                              // backward chain pieces (k = 1: rows are plain vectors)
    let t22 = w22.row(0).to_vec(); // W₂⁽²⁾ ∈ R^m
    let t21 = w21.rmatvec(&t22); // W₂⁽²⁾W₂⁽¹⁾ ∈ R^r
    let t12 = w12.rmatvec(&t21); // W₂⁽²⁾W₂⁽¹⁾W₁⁽²⁾ ∈ R^m

    let g11 = Matrix::outer(&t12, x.data()).scaled(c);
    let g12 = Matrix::outer(&t21, &ax).scaled(c);
    let g21 = Matrix::outer(&t22, &bx).scaled(c);
    let g22 = Matrix::outer(&[1.0], &cx).scaled(c);
    Direction::from_matrices(spec, vec![g11, g12, g21, g22])
}

// ---------------------------------------------------------------------------
// Directional polynomial expansion
// ---------------------------------------------------------------------------

/// All `2^P` substitution forwards of a (weights, direction, input) triple,
/// indexed by slot bitmask.
pub fn subset_values<T: Tangent>(w: &WeightSet, delta: &T, x: &InputVector) -> Result<Vec<f64>> {
    require_scalar_identity(w.spec())?;
    let p = w.spec().slot_count();
    if p > MAX_TOTAL_LAYERS {
        return Err(Error::Budget(format!(
            "substitution expansion over {p} slots exceeds the budget"
        )));
    }
    let mut out = Vec::with_capacity(1usize << p);
    for mask in 0..(1u32 << p) {
        out.push(forward_masked(w, delta, mask, x)?);
    }
    Ok(out)
}

/// Sum subset values by popcount: the Taylor coefficients of
/// `t ↦ g(W + tΔ; x)`.
pub fn coefficients_from_subsets(sv: &[f64], p: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; p + 1];
    for (mask, &v) in sv.iter().enumerate() {
        coeffs[(mask as u32).count_ones() as usize] += v;
    }
    coeffs
}

/// Sum only the subsets touching at most one slot per block: the
/// multilinear restriction used by the surrogate.
pub fn multilinear_coefficients_from_subsets(sv: &[f64], spec: &NetworkSpec) -> Vec<f64> {
    let slots = spec.slots();
    let mut coeffs = vec![0.0; spec.blocks + 1];
    'mask: for (mask, &v) in sv.iter().enumerate() {
        let mask = mask as u32;
        let mut per_block = vec![0u32; spec.blocks];
        for (i, s) in slots.iter().enumerate() {
            if mask >> i & 1 == 1 {
                per_block[s.block] += 1;
                if per_block[s.block] > 1 {
                    continue 'mask;
                }
            }
        }
        coeffs[mask.count_ones() as usize] += v;
    }
    coeffs
}

/// Polynomial restriction of the network function to a weight-space line.
#[derive(Debug, Clone)]
pub struct PolyCurve {
    coeffs: Vec<f64>,
    base: Arc<WeightSet>,
    direction: Arc<Direction>,
    input: InputVector,
}

/// Exact Taylor coefficients of `t ↦ g(W₀ + tΔ; x)` via substitution
/// expansion: `c_k` is the sum of forwards with every `k`-subset of slots
/// replaced by the corresponding direction slots.
pub fn poly_expand(
    base: Arc<WeightSet>,
    direction: Arc<Direction>,
    x: &InputVector,
) -> Result<PolyCurve> {
    if direction.spec() != base.spec() {
        return Err(Error::SpecMismatch(
            "direction built for a different spec".into(),
        ));
    }
    let sv = subset_values(base.as_ref(), direction.as_ref(), x)?;
    let coeffs = coefficients_from_subsets(&sv, base.spec().slot_count());
    Ok(PolyCurve {
        coeffs,
        base,
        direction,
        input: x.clone(),
    })
}

impl PolyCurve {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree bound `P` of the curve.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base(&self) -> &Arc<WeightSet> {
        &self.base
    }

    pub fn direction(&self) -> &Arc<Direction> {
        &self.direction
    }

    pub fn input(&self) -> &InputVector {
        &self.input
    }

    /// Full polynomial value (Horner).
    pub fn eval(&self, t: f64) -> f64 {
        horner(&self.coeffs, t)
    }

    /// Truncation to the first `degree` orders: `Σ_{k≤degree} c_k t^k`.
    pub fn jet(&self, t: f64, degree: usize) -> f64 {
        let end = (degree + 1).min(self.coeffs.len());
        horner(&self.coeffs[..end], t)
    }

    /// Network value minus the degree-`degree` jet, with the network
    /// evaluated honestly (a fresh forward pass, not the polynomial).
    pub fn remainder(&self, t: f64, degree: usize) -> Result<f64> {
        let fwd = forward_line(self.base.as_ref(), self.direction.as_ref(), t, &self.input)?;
        Ok(fwd - self.jet(t, degree))
    }
}

pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

// ---------------------------------------------------------------------------
// Cross-Hessian
// ---------------------------------------------------------------------------

/// Tangent over the slots of one block.
#[derive(Debug, Clone)]
pub struct BlockTangent {
    pub block: usize,
    pub mats: Vec<Matrix>,
}

impl BlockTangent {
    pub fn zero(spec: &NetworkSpec, block: usize) -> Self {
        let mats = spec
            .slots()
            .iter()
            .filter(|s| s.block == block)
            .map(|s| Matrix::zeros(s.rows, s.cols))
            .collect();
        Self { block, mats }
    }

    pub fn from_direction(d: &Direction, block: usize) -> Self {
        let mats = d
            .spec()
            .slots()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.block == block)
            .map(|(i, _)| d.matrix(i).clone())
            .collect();
        Self { block, mats }
    }

    pub fn inner(&self, other: &BlockTangent) -> f64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| {
                let f = m.frobenius();
                f * f
            })
            .sum::<f64>()
            .sqrt()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in &self.mats {
            out.extend_from_slice(m.data());
        }
        out
    }

    fn unflatten(spec: &NetworkSpec, block: usize, flat: &[f64]) -> Self {
        let mut mats = Vec::new();
        let mut pos = 0;
        for s in spec.slots().iter().filter(|s| s.block == block) {
            let count = s.rows * s.cols;
            mats.push(Matrix::from_vec(
                s.rows,
                s.cols,
                flat[pos..pos + count].to_vec(),
            ));
            pos += count;
        }
        Self { block, mats }
    }
}

fn require_two_blocks(spec: &NetworkSpec) -> Result<()> {
    require_scalar_identity(spec)?;
    if spec.blocks != 2 {
        return Err(Error::Unsupported(
            "the cross-Hessian operator is defined for two-block architectures".into(),
        ));
    }
    Ok(())
}

/// Apply the mixed second derivative `∂²g/∂W₁∂W₂` at `w` to a block-2
/// tangent, producing the block-1 tangent which represents the induced
/// linear functional: `⟨u₁, H v₂⟩ = Σ_{i∈1,j∈2} g(w with i←u₁ᵢ, j←v₂ⱼ)`.
pub fn cross_hessian_apply(
    w: &WeightSet,
    x: &InputVector,
    v2: &BlockTangent,
) -> Result<BlockTangent> {
    cross_hessian_impl(w, x, v2, true)
}

/// Adjoint apply: block-1 tangent in, block-2 tangent out.
pub fn cross_hessian_adjoint(
    w: &WeightSet,
    x: &InputVector,
    v1: &BlockTangent,
) -> Result<BlockTangent> {
    cross_hessian_impl(w, x, v1, false)
}

fn cross_hessian_impl(
    w: &WeightSet,
    x: &InputVector,
    v: &BlockTangent,
    input_is_block2: bool,
) -> Result<BlockTangent> {
    let spec = w.spec();
    require_two_blocks(spec)?;
    let (in_block, out_block) = if input_is_block2 { (1, 0) } else { (0, 1) };
    if v.block != in_block {
        return Err(Error::SpecMismatch(format!(
            "tangent is for block {}, expected block {}",
            v.block, in_block
        )));
    }
    let in_slots: Vec<usize> = (0..spec.depths[in_block])
        .map(|l| spec.slot_index(in_block, l).unwrap())
        .collect();
    let out_slots: Vec<usize> = (0..spec.depths[out_block])
        .map(|l| spec.slot_index(out_block, l).unwrap())
        .collect();
    let p = spec.slot_count();
    let mut out = BlockTangent::zero(spec, out_block);
    for (jr, &j) in in_slots.iter().enumerate() {
        let mut views = vec![SlotView::Keep; p];
        views[j] = SlotView::Dense(&v.mats[jr]);
        for (ir, &i) in out_slots.iter().enumerate() {
            let (left, right) = chain_grad_factors(w, &views, x, i)?;
            for (row, &l) in left.iter().enumerate() {
                if l != 0.0 {
                    axpy(out.mats[ir].row_mut(row), l, &right);
                }
            }
        }
    }
    Ok(out)
}

/// The full cross-Hessian as an implicit order-2 operator between the two
/// block tangent spaces, for spectral-norm estimation.
pub struct CrossHessianOp<'a> {
    pub w: &'a WeightSet,
    pub x: &'a InputVector,
}

impl MultilinearOp for CrossHessianOp<'_> {
    fn dims(&self) -> Vec<usize> {
        let spec = self.w.spec();
        let size = |block: usize| -> usize {
            spec.slots()
                .iter()
                .filter(|s| s.block == block)
                .map(|s| s.rows * s.cols)
                .sum()
        };
        vec![size(0), size(1)]
    }

    fn representer(&self, slot: usize, tuple: &[Vec<f64>]) -> Vec<f64> {
        let spec = self.w.spec();
        if slot == 0 {
            let v2 = BlockTangent::unflatten(spec, 1, &tuple[1]);
            cross_hessian_apply(self.w, self.x, &v2)
                .expect("valid spec")
                .flatten()
        } else {
            let v1 = BlockTangent::unflatten(spec, 0, &tuple[0]);
            cross_hessian_adjoint(self.w, self.x, &v1)
                .expect("valid spec")
                .flatten()
        }
    }
}

// ---------------------------------------------------------------------------
// Second-derivative slot pairs
// ---------------------------------------------------------------------------

/// Implicit bilinear form `(V_i, V_j) ↦ g(w with i←V_i, j←V_j; x)`.
pub struct HessianPairOp<'a> {
    w: &'a WeightSet,
    x: &'a InputVector,
    slot_i: usize,
    slot_j: usize,
}

impl MultilinearOp for HessianPairOp<'_> {
    fn dims(&self) -> Vec<usize> {
        let slots = self.w.spec().slots();
        vec![
            slots[self.slot_i].rows * slots[self.slot_i].cols,
            slots[self.slot_j].rows * slots[self.slot_j].cols,
        ]
    }

    fn representer(&self, which: usize, tuple: &[Vec<f64>]) -> Vec<f64> {
        let slots = self.w.spec().slots();
        let (grad_slot, fixed_slot, fixed_vec) = if which == 0 {
            (self.slot_i, self.slot_j, &tuple[1])
        } else {
            (self.slot_j, self.slot_i, &tuple[0])
        };
        let s = slots[fixed_slot];
        let fixed = Matrix::from_vec(s.rows, s.cols, fixed_vec.clone());
        let p = slots.len();
        let mut views = vec![SlotView::Keep; p];
        views[fixed_slot] = SlotView::Dense(&fixed);
        let (left, right) =
            chain_grad_factors(self.w, &views, self.x, grad_slot).expect("valid spec");
        let mut out = Vec::with_capacity(left.len() * right.len());
        for &l in &left {
            for &r in &right {
                out.push(l * r);
            }
        }
        out
    }
}

/// Result of estimating one second-derivative slot-pair norm.
#[derive(Debug, Clone)]
pub struct HessianBlockNorm {
    /// Alternating power-iteration estimate (lower-bound certificate).
    pub value: f64,
    /// Factorized supremum `scale·‖suffix‖·σ(middle)·‖prefix‖`, an
    /// independent route to the same quantity.
    pub reference: Option<f64>,
    /// Same-slot pairs are identically zero by per-slot linearity.
    pub same_slot: bool,
    pub converged: bool,
}

/// Spectral norm of the bilinear form obtained by differentiating twice,
/// once in each of two slots.
pub fn hessian_block_norm(
    w: &WeightSet,
    x: &InputVector,
    slot_i: usize,
    slot_j: usize,
    params: &PowerParams,
) -> Result<HessianBlockNorm> {
    require_scalar_identity(w.spec())?;
    let p = w.spec().slot_count();
    if slot_i >= p || slot_j >= p {
        return Err(Error::DimensionMismatch("slot out of range".into()));
    }
    if slot_i == slot_j {
        return Ok(HessianBlockNorm {
            value: 0.0,
            reference: Some(0.0),
            same_slot: true,
            converged: true,
        });
    }
    let op = HessianPairOp {
        w,
        x,
        slot_i,
        slot_j,
    };
    let est = spectral_norm_power(&op, params);
    let reference = pair_norm_factorized(w, x, slot_i, slot_j)?;
    Ok(HessianBlockNorm {
        value: est.value,
        reference: Some(reference),
        same_slot: false,
        converged: est.converged,
    })
}

/// Exact supremum of the two-slot bilinear form by factorization:
/// `sup = scale_a scale_b · ‖suffix after b‖ · σ_max(middle) · ‖prefix before a‖`,
/// where the middle operator is the scaled chain strictly between the two
/// slots (identity when they are adjacent).
pub fn pair_norm_factorized(
    w: &WeightSet,
    x: &InputVector,
    slot_i: usize,
    slot_j: usize,
) -> Result<f64> {
    require_scalar_identity(w.spec())?;
    let (a, b) = if slot_i < slot_j {
        (slot_i, slot_j)
    } else {
        (slot_j, slot_i)
    };
    let slots = w.spec().slots();

    let mut prefix = x.data().to_vec();
    for i in 0..a {
        let mut next = w.matrix(i).matvec(&prefix);
        scale(&mut next, slots[i].scale());
        prefix = next;
    }
    let mut suffix = vec![1.0];
    for i in (b + 1..slots.len()).rev() {
        let mut next = w.matrix(i).rmatvec(&suffix);
        scale(&mut next, slots[i].scale());
        suffix = next;
    }
    let sigma = middle_operator_norm(w, a, b);
    Ok(slots[a].scale() * slots[b].scale() * norm(&prefix) * sigma * norm(&suffix))
}

/// Operator norm of the scaled chain of slots strictly between `a` and `b`,
/// by power iteration on the implicit Gram map.
fn middle_operator_norm(w: &WeightSet, a: usize, b: usize) -> f64 {
    if b == a + 1 {
        return 1.0;
    }
    let slots = w.spec().slots();
    let dim = slots[a].rows;
    let fwd = |v: &[f64]| -> Vec<f64> {
        let mut cur = v.to_vec();
        for i in a + 1..b {
            let mut next = w.matrix(i).matvec(&cur);
            scale(&mut next, slots[i].scale());
            cur = next;
        }
        cur
    };
    let bwd = |v: &[f64]| -> Vec<f64> {
        let mut cur = v.to_vec();
        for i in (a + 1..b).rev() {
            let mut next = w.matrix(i).rmatvec(&cur);
            scale(&mut next, slots[i].scale());
            cur = next;
        }
        cur
    };
    let mut best = 0.0f64;
    for restart in 0..4u64 {
        let mut rs = crate::rng::stream(0x51d3, &[restart]);
        let mut v: Vec<f64> = (0..dim)
            .map(|_| rand::Rng::sample(&mut rs, rand_distr::StandardNormal))
            .collect();
        let n = norm(&v);
        if n == 0.0 {
            continue;
        }
        scale(&mut v, 1.0 / n);
        let mut sigma2 = 0.0f64;
        for _ in 0..300 {
            let mut next = bwd(&fwd(&v));
            let n = norm(&next);
            if n == 0.0 {
                sigma2 = 0.0;
                break;
            }
            scale(&mut next, 1.0 / n);
            v = next;
            if (n - sigma2).abs() <= 1e-13 * n.max(1.0) {
                sigma2 = n;
                break;
            }
            sigma2 = n;
        }
        best = best.max(sigma2.sqrt());
    }
    best
}

// ---------------------------------------------------------------------------
// Multilinear surrogate
// ---------------------------------------------------------------------------

/// Multilinear surrogate of the network around a base point: the sum of
/// substitution forwards over slot subsets touching at most one slot per
/// block. For two blocks this is constant + gradient + cross-Hessian form;
/// in general it is the multilinear part of the degree-B jet.
#[derive(Clone)]
pub struct SurrogateModel {
    base: Arc<WeightSet>,
    input: InputVector,
    degree: usize,
    constant: f64,
    grads: Vec<(Vec<f64>, Vec<f64>)>,
}

pub fn build_surrogate(
    base: Arc<WeightSet>,
    x: &InputVector,
    degree: usize,
) -> Result<SurrogateModel> {
    let spec = base.spec();
    require_scalar_identity(spec)?;
    if degree != spec.blocks {
        return Err(Error::Unsupported(format!(
            "surrogate degree must equal the block count {} (got {degree})",
            spec.blocks
        )));
    }
    let constant = base.forward_scalar(x)?;
    let grads = (0..spec.slot_count())
        .map(|s| chain_grad_factors(base.as_ref(), &[], x, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurrogateModel {
        base,
        input: x.clone(),
        degree,
        constant,
        grads,
    })
}

impl SurrogateModel {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn base(&self) -> &Arc<WeightSet> {
        &self.base
    }

    pub fn input(&self) -> &InputVector {
        &self.input
    }

    /// Dense gradient block for one slot (the linear part of the model).
    pub fn gradient(&self, slot: usize) -> Matrix {
        let (l, r) = &self.grads[slot];
        Matrix::outer(l, r)
    }

    /// Directional derivative `⟨g_init, Δ⟩` from the factored gradients.
    pub fn gradient_contraction(&self, delta: &Direction) -> f64 {
        let mut acc = 0.0;
        for (s, (l, r)) in self.grads.iter().enumerate() {
            let dm = delta.matrix(s);
            // ⟨outer(l, r), Δ⟩ = lᵀ Δ r
            let dr = dm.matvec(r);
            acc += dot(l, &dr);
        }
        acc
    }

    /// Evaluate the surrogate at a weight set: the restricted subset sum
    /// with `Δ = w − base`.
    pub fn eval(&self, w: &WeightSet, x: &InputVector) -> Result<f64> {
        if w.spec() != self.base.spec() {
            return Err(Error::SpecMismatch(
                "weights built for a different spec".into(),
            ));
        }
        if x.dim() != self.input.dim() {
            return Err(Error::SpecMismatch("input dimension changed".into()));
        }
        let delta = Direction::between(self.base.as_ref(), w)?;
        let spec = self.base.spec();
        let mut total = 0.0;
        for mask in restricted_masks(spec) {
            total += forward_masked(self.base.as_ref(), &delta, mask, x)?;
        }
        Ok(total)
    }

    /// Coefficients of the surrogate along the line `base + tΔ` (degree ≤
    /// block count), from a precomputed subset-value table.
    pub fn line_coefficients_from_subsets(&self, sv: &[f64]) -> Vec<f64> {
        multilinear_coefficients_from_subsets(sv, self.base.spec())
    }
}

/// Masks touching at most one slot per block, in ascending order.
fn restricted_masks(spec: &NetworkSpec) -> Vec<u32> {
    let slots = spec.slots();
    let p = slots.len();
    let mut out = Vec::new();
    'mask: for mask in 0..(1u32 << p) {
        let mut per_block = vec![0u32; spec.blocks];
        for (i, s) in slots.iter().enumerate() {
            if mask >> i & 1 == 1 {
                per_block[s.block] += 1;
                if per_block[s.block] > 1 {
                    continue 'mask;
                }
            }
        }
        out.push(mask);
    }
    out
}

// ---------------------------------------------------------------------------
// Higher-order contraction
// ---------------------------------------------------------------------------

/// Contraction of the order-`p` derivative tensor at `w` against `p`
/// weight-shaped tangents: the sum over injective assignments of tangents
/// to slots of the corresponding substitution forwards. Assignments where
/// a tangent has a zero slot component are skipped.
pub fn derivative_contraction(
    w: &WeightSet,
    x: &InputVector,
    tangents: &[&Direction],
) -> Result<f64> {
    require_scalar_identity(w.spec())?;
    let p = w.spec().slot_count();
    let order = tangents.len();
    if order == 0 || order > p {
        return Err(Error::DimensionMismatch(format!(
            "contraction order must lie in 1..={p}"
        )));
    }
    for t in tangents {
        if t.spec() != w.spec() {
            return Err(Error::SpecMismatch(
                "tangent built for a different spec".into(),
            ));
        }
    }
    let mut total = 0.0;
    let mut assignment = vec![usize::MAX; order];
    let mut used = vec![false; p];
    assign_and_sum(w, x, tangents, 0, &mut assignment, &mut used, &mut total)?;
    Ok(total)
}

fn assign_and_sum(
    w: &WeightSet,
    x: &InputVector,
    tangents: &[&Direction],
    depth: usize,
    assignment: &mut [usize],
    used: &mut [bool],
    total: &mut f64,
) -> Result<()> {
    if depth == tangents.len() {
        let mut mats: Vec<(usize, &Matrix)> = Vec::with_capacity(depth);
        for (ti, &slot) in assignment.iter().enumerate() {
            mats.push((slot, tangents[ti].matrix(slot)));
        }
        let p = w.spec().slot_count();
        let mut views = vec![SlotView::Keep; p];
        for (slot, m) in mats {
            views[slot] = SlotView::Dense(m);
        }
        *total += forward_views(w, &views, x)?;
        return Ok(());
    }
    for slot in 0..used.len() {
        if used[slot] || tangents[depth].slot_norm(slot) == 0.0 {
            continue;
        }
        used[slot] = true;
        assignment[depth] = slot;
        assign_and_sum(w, x, tangents, depth + 1, assignment, used, total)?;
        used[slot] = false;
    }
    Ok(())
}
