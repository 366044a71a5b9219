//! Boundary-direction search for the residual supremum.
//!
//! The jet residual along a line is dominated by the first truncated
//! Taylor coefficient, and that coefficient is a multilinear function of
//! the per-slot direction matrices. This module maximizes it over the
//! product of per-slot Frobenius spheres by alternating (Gauss-Seidel)
//! updates: with all other slots fixed, the coefficient is linear in one
//! slot, and the maximizing unit matrix is the normalized representer.
//!
//! Directions are kept as low-rank factor sums throughout, so deep
//! architectures never materialize an m×m tangent. Each update is exact:
//! within a sweep, already-updated slots enter through a walking prefix
//! and not-yet-updated slots through a suffix pass taken at the start of
//! the sweep.

use crate::error::{Error, Result};
use crate::linalg::{axpy, scale, FactoredMatrix};
use crate::net::{Activation, FactoredDirection, InputVector, NetworkSpec, WeightSet};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub struct MaximizeParams {
    /// Taylor order whose coefficient is maximized (`degree + 1` for a
    /// degree-`degree` jet residual).
    pub coefficient: usize,
    /// Per-slot sphere radius of the direction.
    pub radius: f64,
    pub sweeps: usize,
    pub seed: u64,
}

/// λ-polynomial with vector coefficients, truncated at a fixed order.
struct PolyVec {
    coeffs: Vec<Vec<f64>>,
}

impl PolyVec {
    fn constant(v: Vec<f64>, cap: usize) -> Self {
        let mut coeffs = Vec::with_capacity(cap);
        coeffs.push(v);
        Self { coeffs }
    }

    /// Push through one slot: multiply by `scale (W + λΔ)` acting on the
    /// given side, truncating at `cap` coefficients.
    fn step<FW, FD>(&self, cap: usize, dim_out: usize, w_apply: FW, d_apply: FD, s: f64) -> Self
    where
        FW: Fn(&[f64]) -> Vec<f64>,
        FD: Fn(&[f64]) -> Vec<f64>,
    {
        let n = (self.coeffs.len() + 1).min(cap);
        let mut out: Vec<Vec<f64>> = (0..n).map(|_| vec![0.0; dim_out]).collect();
        for (k, c) in self.coeffs.iter().enumerate() {
            if k < n {
                let mut wv = w_apply(c);
                scale(&mut wv, s);
                axpy(&mut out[k], 1.0, &wv);
            }
            if k + 1 < n {
                let mut dv = d_apply(c);
                scale(&mut dv, s);
                axpy(&mut out[k + 1], 1.0, &dv);
            }
        }
        Self { coeffs: out }
    }

    fn coeff(&self, k: usize) -> Option<&Vec<f64>> {
        self.coeffs.get(k)
    }
}

fn random_rank_one_slots(spec: &NetworkSpec, seed: u64) -> Vec<FactoredMatrix> {
    spec.slots()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rs = rng::stream(seed, &[0x0a15, i as u64]);
            let mut l: Vec<f64> = (0..s.rows).map(|_| rs.sample(StandardNormal)).collect();
            let r: Vec<f64> = (0..s.cols).map(|_| rs.sample(StandardNormal)).collect();
            let f = FactoredMatrix::new(s.rows, s.cols, vec![(l.clone(), r.clone())]);
            let n = f.frobenius();
            if n > 0.0 {
                scale(&mut l, 1.0 / n);
            } else {
                l = vec![0.0; s.rows];
                l[0] = 1.0;
            }
            FactoredMatrix::new(s.rows, s.cols, vec![(l, r)])
        })
        .collect()
}

/// Maximize `|c_order(Δ)|` over per-slot unit directions, returning the
/// direction scaled to the requested radius and the achieved coefficient
/// magnitude at that radius.
pub fn maximize_tail_coefficient(
    w: &WeightSet,
    x: &InputVector,
    params: &MaximizeParams,
) -> Result<(FactoredDirection, f64)> {
    let spec = w.spec().clone();
    if spec.activation != Activation::Identity || spec.output_dim() != 1 {
        return Err(Error::Unsupported(
            "direction search requires identity activation and output dim 1".into(),
        ));
    }
    let p = spec.slot_count();
    let order = params.coefficient;
    if order == 0 || order > p {
        return Err(Error::DimensionMismatch(format!(
            "coefficient order must lie in 1..={p}"
        )));
    }
    let slots = spec.slots();
    let cap = order + 1; // need λ^0..λ^{order-1} for gradients, λ^order for value
    let mut facs = random_rank_one_slots(&spec, params.seed);
    let mut dir = FactoredDirection::new(spec.clone(), facs.drain(..).collect());

    for _ in 0..params.sweeps.max(1) {
        // suffix pass: for every slot s, the λ-polynomial of the chain
        // strictly after s (row side), with pre-sweep factors
        let mut suffixes: Vec<PolyVec> = Vec::with_capacity(p);
        {
            let mut cur = PolyVec::constant(vec![1.0], cap);
            let mut rev: Vec<PolyVec> = Vec::with_capacity(p);
            for i in (0..p).rev() {
                rev.push(PolyVec {
                    coeffs: cur.coeffs.clone(),
                });
                let wm = w.matrix(i);
                let dm = dir.slot(i);
                cur = cur.step(
                    cap,
                    slots[i].cols,
                    |u| wm.rmatvec(u),
                    |u| dm.rmatvec(u),
                    slots[i].scale(),
                );
            }
            rev.reverse();
            suffixes.extend(rev);
        }
        // forward walk with exact prefixes
        let mut prefix = PolyVec::constant(x.data().to_vec(), cap);
        for s in 0..p {
            // gradient of the order-`order` coefficient wrt slot s:
            // Σ_{a+b = order-1} scale_s · outer(suffix_b, prefix_a)
            let mut terms: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
            for a in 0..order {
                let b = order - 1 - a;
                if let (Some(pa), Some(sb)) = (prefix.coeff(a), suffixes[s].coeff(b)) {
                    let mut l = sb.clone();
                    scale(&mut l, slots[s].scale());
                    terms.push((l, pa.clone()));
                }
            }
            let cand = FactoredMatrix::new(slots[s].rows, slots[s].cols, terms);
            let n = cand.frobenius();
            if n > 0.0 {
                let mut unit = cand;
                unit.scale_in_place(1.0 / n);
                *dir.slot_mut(s) = unit;
            }
            // extend the walking prefix through slot s with its fresh value
            let wm = w.matrix(s);
            let dm = dir.slot(s);
            prefix = prefix.step(
                cap,
                slots[s].rows,
                |v| wm.matvec(v),
                |v| dm.matvec(v),
                slots[s].scale(),
            );
        }
    }

    // value of the maximized coefficient on the unit spheres
    let mut prefix = PolyVec::constant(x.data().to_vec(), cap);
    for s in 0..p {
        let wm = w.matrix(s);
        let dm = dir.slot(s);
        prefix = prefix.step(
            cap,
            slots[s].rows,
            |v| wm.matvec(v),
            |v| dm.matvec(v),
            slots[s].scale(),
        );
    }
    let unit_value = prefix.coeff(order).map(|c| c[0].abs()).unwrap_or(0.0);

    // scale every slot to the requested radius
    if params.radius != 1.0 {
        for s in 0..p {
            dir.slot_mut(s).scale_in_place(params.radius);
        }
    }
    Ok((dir, unit_value * params.radius.powi(order as i32)))
}
