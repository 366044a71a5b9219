//! Dense tensors, tuple contractions, and spectral-norm estimation.
//!
//! The spectral norm of a tensor is the supremum of its contraction against
//! tuples of unit vectors. Certified upper bounds are NP-hard in general,
//! so the estimators here exhibit a feasible unit tuple and report the
//! contraction value: a lower-bound certificate. At oracle sizes (every
//! dimension ≤ 8) the multi-restart alternating maximizer serves as the
//! reference value.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense tensor in row-major layout (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, entries: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(
                "tensor dimensions must be positive".into(),
            ));
        }
        let count: usize = shape.iter().product();
        if entries.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "entry count {} does not match shape product {}",
                entries.len(),
                count
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::DimensionMismatch(
                "tensor entries must be finite".into(),
            ));
        }
        Ok(Self { shape, entries })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Self {
            shape,
            entries: vec![0.0; count],
        }
    }

    pub fn standard_normal<R: Rng>(shape: Vec<usize>, rng: &mut R) -> Self {
        let count = shape.iter().product();
        let entries = (0..count).map(|_| rng.sample(StandardNormal)).collect();
        Self { shape, entries }
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    /// Rank-1 tensor `v^1 ⊗ v^2 ⊗ ... ⊗ v^k`.
    pub fn rank_one(tuple: &VectorTuple) -> Self {
        let shape: Vec<usize> = tuple.vectors.iter().map(|v| v.len()).collect();
        let mut t = DenseTensor::zeros(shape);
        let strides = t.strides();
        let mut idx = vec![0usize; t.order()];
        for flat in 0..t.entries.len() {
            let mut rem = flat;
            for (k, s) in strides.iter().enumerate() {
                idx[k] = rem / s;
                rem %= s;
            }
            t.entries[flat] = tuple.vectors.iter().zip(&idx).map(|(v, &i)| v[i]).product();
        }
        t
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.shape.len()];
        for k in (0..self.shape.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }
}

/// Tuple of vectors `(v^1, ..., v^k)` matched to a tensor shape.
#[derive(Debug, Clone)]
pub struct VectorTuple {
    pub vectors: Vec<Vec<f64>>,
}

impl VectorTuple {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        Self { vectors }
    }

    pub fn matches(&self, shape: &[usize]) -> bool {
        self.vectors.len() == shape.len()
            && self.vectors.iter().zip(shape).all(|(v, &d)| v.len() == d)
    }

    pub fn normalized(mut self) -> Self {
        for v in &mut self.vectors {
            let n = norm(v);
            if n > 0.0 {
                scale(v, 1.0 / n);
            }
        }
        self
    }
}

/// Contraction `Σ A_{i1..ik} v^1_{i1} ... v^k_{ik}`.
///
/// Equal to the inner product of `a` with the rank-1 tensor built from the
/// tuple.
///
/// ```
/// use bottlenet_core::tensor::{tuple_contract, DenseTensor, VectorTuple};
/// let eye = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
/// let v = VectorTuple::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
/// assert_eq!(tuple_contract(&eye, &v).unwrap(), 1.0);
/// ```
pub fn tuple_contract(a: &DenseTensor, v: &VectorTuple) -> Result<f64> {
    if !v.matches(&a.shape) {
        return Err(Error::DimensionMismatch(format!(
            "tuple lengths {:?} do not match tensor shape {:?}",
            v.vectors.iter().map(|x| x.len()).collect::<Vec<_>>(),
            a.shape
        )));
    }
    Ok(contract_all_but(a, &v.vectors, usize::MAX).0)
}

/// Contract every slot except `keep` (pass `usize::MAX` to contract all).
/// Returns (scalar, representer): when a slot is kept, scalar is 0 and the
/// representer `w` satisfies value = ⟨w, v_keep⟩ for any v_keep.
fn contract_all_but(a: &DenseTensor, vs: &[Vec<f64>], keep: usize) -> (f64, Vec<f64>) {
    // Fold axes from the last to the first, skipping `keep`.
    let k = a.shape.len();
    let mut cur = a.entries.clone();
    let mut cur_shape = a.shape.clone();
    for axis in (0..k).rev() {
        if axis == keep {
            continue;
        }
        let v = &vs[axis];
        let dim = cur_shape[axis];
        // The kept axis may lie to the right of `axis`; compute the block
        // layout: cur is row-major over cur_shape with removed axes gone.
        let inner: usize = cur_shape[axis + 1..].iter().product();
        let outer: usize = cur_shape[..axis].iter().product();
        let mut next = vec![0.0; outer * inner];
        for o in 0..outer {
            let base = o * dim * inner;
            let dst = &mut next[o * inner..(o + 1) * inner];
            for (i, &vi) in v.iter().enumerate() {
                if vi != 0.0 {
                    axpy(dst, vi, &cur[base + i * inner..base + (i + 1) * inner]);
                }
            }
        }
        cur = next;
        cur_shape.remove(axis);
    }
    if keep == usize::MAX {
        (cur[0], Vec::new())
    } else {
        (0.0, cur)
    }
}

/// Implicit multilinear operator: enough structure to run alternating
/// rank-1 maximization without materializing the tensor.
pub trait MultilinearOp {
    /// Flattened dimension of each slot.
    fn dims(&self) -> Vec<usize>;

    /// With all slots but `slot` fixed to `tuple`, return the representer
    /// `w` of the induced linear functional on `slot`:
    /// contraction = ⟨w, v_slot⟩.
    fn representer(&self, slot: usize, tuple: &[Vec<f64>]) -> Vec<f64>;

    /// Contraction against a full tuple.
    fn contract(&self, tuple: &[Vec<f64>]) -> f64 {
        let w = self.representer(0, tuple);
        dot(&w, &tuple[0])
    }
}

impl MultilinearOp for DenseTensor {
    fn dims(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn representer(&self, slot: usize, tuple: &[Vec<f64>]) -> Vec<f64> {
        contract_all_but(self, tuple, slot).1
    }
}

/// Knobs for the alternating rank-1 maximizer.
#[derive(Debug, Clone, Copy)]
pub struct PowerParams {
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            restarts: 32,
            seed: 0,
        }
    }
}

/// Result of a spectral-norm estimation run. `value` is the contraction of
/// a feasible unit tuple, hence a lower bound of the true spectral norm.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub tuple: Vec<Vec<f64>>,
}

/// Alternating rank-1 power iteration over an implicit operator.
///
/// Each step fixes all slots but one and replaces that slot with the
/// normalized representer of the induced linear functional, which cannot
/// decrease the contraction. Zero representers keep the previous vector.
pub fn spectral_norm_power<O: MultilinearOp + ?Sized>(
    op: &O,
    params: &PowerParams,
) -> SpectralEstimate {
    let dims = op.dims();
    let mut best = SpectralEstimate {
        value: 0.0,
        converged: true,
        tuple: dims
            .iter()
            .map(|&d| {
                let mut v = vec![0.0; d];
                v[0] = 1.0;
                v
            })
            .collect(),
    };
    for restart in 0..params.restarts.max(1) {
        let mut rs = rng::stream(params.seed, &[0x7e50, restart as u64]);
        let mut tuple: Vec<Vec<f64>> = dims
            .iter()
            .map(|&d| {
                let mut v: Vec<f64> = (0..d).map(|_| rs.sample(StandardNormal)).collect();
                let n = norm(&v);
                if n > 0.0 {
                    scale(&mut v, 1.0 / n);
                } else {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        let mut value = 0.0f64;
        let mut converged = false;
        for _ in 0..params.max_iters {
            let mut new_value = value;
            for slot in 0..dims.len() {
                let w = op.representer(slot, &tuple);
                let n = norm(&w);
                if n > 0.0 {
                    let mut v = w;
                    scale(&mut v, 1.0 / n);
                    tuple[slot] = v;
                    new_value = n;
                } else {
                    // keep the previous unit vector
                    new_value = 0.0;
                }
            }
            let denom = new_value.abs().max(1e-300);
            if (new_value - value).abs() / denom < params.tol {
                value = new_value;
                converged = true;
                break;
            }
            value = new_value;
        }
        let value = value.abs();
        if value > best.value || restart == 0 {
            best = SpectralEstimate {
                value,
                converged,
                tuple: tuple.clone(),
            };
        }
    }
    best
}

const ORACLE_DIM_CAP: usize = 8;

/// Reference spectral norm for tiny tensors (every dimension ≤ 8).
///
/// Multi-restart alternating maximization on the dense tensor; reported
/// value is the max of |contraction| over restarts. Refuses larger tensors:
/// this is the oracle regime only.
pub fn spectral_norm_bruteforce(a: &DenseTensor, restarts: usize, iters: usize) -> Result<f64> {
    if a.shape.iter().any(|&d| d > ORACLE_DIM_CAP) {
        return Err(Error::Budget(format!(
            "oracle regime requires every dimension <= {ORACLE_DIM_CAP}, got {:?}",
            a.shape
        )));
    }
    let params = PowerParams {
        tol: 1e-12,
        max_iters: iters,
        restarts,
        seed: 0x0bf5,
    };
    Ok(spectral_norm_power(a, &params).value)
}

/// Index rectangle: one index subset per axis.
#[derive(Debug, Clone)]
pub struct IndexRegion {
    pub per_axis: Vec<Vec<usize>>,
}

/// Split `t` into rectangular blocks, compact each block, and compare
/// `‖t‖` against the sum of compacted block norms. Returns
/// `(whole, block_sum)`; the contract is `whole ≤ block_sum + tol`.
pub fn block_subadditivity(t: &DenseTensor, partition: &[IndexRegion]) -> Result<(f64, f64)> {
    let k = t.order();
    let strides = t.strides();
    // ownership map to detect overlaps and uncovered support
    let mut owner = vec![usize::MAX; t.entries.len()];
    for (which, region) in partition.iter().enumerate() {
        if region.per_axis.len() != k {
            return Err(Error::DimensionMismatch(
                "region arity does not match tensor order".into(),
            ));
        }
        for (axis, idxs) in region.per_axis.iter().enumerate() {
            if idxs.iter().any(|&i| i >= t.shape[axis]) {
                return Err(Error::DimensionMismatch("region index out of range".into()));
            }
        }
        let mut flat_indices = vec![0usize];
        for (axis, idxs) in region.per_axis.iter().enumerate() {
            let mut next = Vec::with_capacity(flat_indices.len() * idxs.len());
            for &base in &flat_indices {
                for &i in idxs {
                    next.push(base + i * strides[axis]);
                }
            }
            flat_indices = next;
        }
        for &f in &flat_indices {
            if owner[f] != usize::MAX {
                return Err(Error::DimensionMismatch(
                    "overlapping partition regions".into(),
                ));
            }
            owner[f] = which;
        }
    }
    for (f, &o) in owner.iter().enumerate() {
        if o == usize::MAX && t.entries[f] != 0.0 {
            return Err(Error::DimensionMismatch(
                "partition does not cover the support of the tensor".into(),
            ));
        }
    }

    let whole = spectral_norm_bruteforce(t, 32, 400)?;
    let mut block_sum = 0.0;
    for region in partition {
        let shape: Vec<usize> = region.per_axis.iter().map(|ix| ix.len()).collect();
        if shape.iter().any(|&d| d == 0) {
            continue;
        }
        let mut compact = DenseTensor::zeros(shape.clone());
        let cstrides = compact.strides();
        let count = compact.entries.len();
        for flat in 0..count {
            let mut rem = flat;
            let mut src = 0usize;
            for axis in 0..k {
                let ci = rem / cstrides[axis];
                rem %= cstrides[axis];
                src += region.per_axis[axis][ci] * strides[axis];
            }
            compact.entries_mut()[flat] = t.entries[src];
        }
        block_sum += spectral_norm_bruteforce(&compact, 32, 400)?;
    }
    Ok((whole, block_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_contraction() {
        let eye = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = VectorTuple::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(tuple_contract(&eye, &v).unwrap(), 1.0);
    }

    #[test]
    fn zero_tensor_contracts_to_zero() {
        let z = DenseTensor::zeros(vec![3, 2, 2]);
        let v = VectorTuple::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(tuple_contract(&z, &v).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let z = DenseTensor::zeros(vec![2, 2]);
        let v = VectorTuple::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            tuple_contract(&z, &v),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn contraction_is_linear_per_slot() {
        let mut rs = crate::rng::stream(11, &[1]);
        let a = DenseTensor::standard_normal(vec![3, 4, 2], &mut rs);
        let u: Vec<f64> = (0..4).map(|_| rs.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..4).map(|_| rs.sample(StandardNormal)).collect();
        let v0: Vec<f64> = (0..3).map(|_| rs.sample(StandardNormal)).collect();
        let v2: Vec<f64> = (0..2).map(|_| rs.sample(StandardNormal)).collect();
        let (alpha, beta) = (0.37, -1.91);
        let mix: Vec<f64> = u
            .iter()
            .zip(&w)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let c = |mid: &[f64]| {
            tuple_contract(
                &a,
                &VectorTuple::new(vec![v0.clone(), mid.to_vec(), v2.clone()]),
            )
            .unwrap()
        };
        let lhs = c(&mix);
        let rhs = alpha * c(&u) + beta * c(&w);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn rank_one_unit_tensor_has_unit_norm() {
        let t = VectorTuple::new(vec![vec![0.6, 0.8], vec![1.0, 0.0, 0.0], vec![0.0, 1.0]]);
        let a = DenseTensor::rank_one(&t);
        let n = spectral_norm_bruteforce(&a, 8, 200).unwrap();
        assert_relative_eq!(n, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn order_two_norm_is_largest_singular_value() {
        // diag(3, 4) has spectral norm 4
        let a = DenseTensor::new(vec![2, 2], vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        let n = spectral_norm_bruteforce(&a, 8, 200).unwrap();
        assert_relative_eq!(n, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn oracle_regime_cap_enforced() {
        let a = DenseTensor::zeros(vec![9, 2]);
        assert!(matches!(
            spectral_norm_bruteforce(&a, 1, 1),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn power_on_zero_operator_returns_zero() {
        let z = DenseTensor::zeros(vec![4, 3, 2]);
        let est = spectral_norm_power(&z, &PowerParams::default());
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn subadditivity_single_block_is_equality() {
        let mut rs = crate::rng::stream(3, &[9]);
        let a = DenseTensor::standard_normal(vec![3, 3], &mut rs);
        let region = IndexRegion {
            per_axis: vec![vec![0, 1, 2], vec![0, 1, 2]],
        };
        let (lhs, rhs) = block_subadditivity(&a, &[region]).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn subadditivity_diag_two_blocks() {
        let a = DenseTensor::new(vec![2, 2], vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        let r0 = IndexRegion {
            per_axis: vec![vec![0], vec![0]],
        };
        let r1 = IndexRegion {
            per_axis: vec![vec![1], vec![1]],
        };
        let (lhs, rhs) = block_subadditivity(&a, &[r0, r1]).unwrap();
        assert_relative_eq!(lhs, 4.0, max_relative = 1e-9);
        assert_relative_eq!(rhs, 7.0, max_relative = 1e-9);
    }

    #[test]
    fn subadditivity_rejects_overlap() {
        let a = DenseTensor::new(vec![2, 2], vec![1.0; 4]).unwrap();
        let r0 = IndexRegion {
            per_axis: vec![vec![0, 1], vec![0]],
        };
        let r1 = IndexRegion {
            per_axis: vec![vec![1], vec![0, 1]],
        };
        assert!(block_subadditivity(&a, &[r0, r1]).is_err());
    }
}
