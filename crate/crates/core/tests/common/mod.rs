//! Independent oracles for the integration and acceptance suites.
//!
//! Everything here recomputes quantities from first principles with
//! deliberately naive algorithms (nested loops, Jacobi rotations, dense
//! grids, finite differences) and must stay independent of the library's
//! own code paths.

#![allow(dead_code)]

use bottlenet_core::linalg::Matrix;
use bottlenet_core::net::{Direction, InputVector, WeightSet};
use bottlenet_core::tensor::DenseTensor;

/// Naive nested-loop tuple contraction of an order-3 tensor.
pub fn triple_loop_contract(a: &DenseTensor, v0: &[f64], v1: &[f64], v2: &[f64]) -> f64 {
    let s = a.shape();
    assert_eq!(s.len(), 3);
    let (n0, n1, n2) = (s[0], s[1], s[2]);
    let e = a.entries();
    let mut total = 0.0;
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                total += e[(i * n1 + j) * n2 + k] * v0[i] * v1[j] * v2[k];
            }
        }
    }
    total
}

/// Largest singular value by one-sided Jacobi: rotate column pairs until
/// all are orthogonal, then the largest column norm is sigma_max.
pub fn jacobi_sigma_max(rows: usize, cols: usize, data: &[f64]) -> f64 {
    assert_eq!(data.len(), rows * cols);
    // column-major copy
    let mut col: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).collect())
        .collect();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    app += col[p][i] * col[p][i];
                    aqq += col[q][i] * col[q][i];
                    apq += col[p][i] * col[q][i];
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(1e-300));
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (vp, vq) = (col[p][i], col[q][i]);
                    col[p][i] = c * vp - s * vq;
                    col[q][i] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    col.iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Dense grid search for the spectral norm of a 3-way tensor: sweep the
/// first slot over a theta/phi grid of the unit sphere and solve the two
/// remaining slots exactly as the largest singular value of the induced
/// matrix.
pub fn grid_search_order3(a: &DenseTensor, angular_step: f64) -> f64 {
    let s = a.shape();
    assert_eq!(s, &[3, 3, 3]);
    let e = a.entries();
    let n_theta = (std::f64::consts::PI / angular_step).ceil() as usize + 1;
    let n_phi = (2.0 * std::f64::consts::PI / angular_step).ceil() as usize + 1;
    let mut best = 0.0f64;
    for it in 0..n_theta {
        let theta = std::f64::consts::PI * it as f64 / (n_theta - 1) as f64;
        for ip in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * ip as f64 / (n_phi - 1) as f64;
            let v = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            // induced 3x3 matrix M_{jk} = sum_i A_{ijk} v_i
            let mut m = [0.0f64; 9];
            for i in 0..3 {
                if v[i] == 0.0 {
                    continue;
                }
                for jk in 0..9 {
                    m[jk] += e[i * 9 + jk] * v[i];
                }
            }
            best = best.max(jacobi_sigma_max(3, 3, &m));
        }
    }
    best
}

/// Solve the Vandermonde system through Gaussian elimination with partial
/// pivoting: find coefficients with `poly(ts[i]) = ys[i]`.
pub fn vandermonde_coefficients(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    assert_eq!(n, ys.len());
    let mut a: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| {
            let mut row = Vec::with_capacity(n);
            let mut p = 1.0;
            for _ in 0..n {
                row.push(p);
                p *= t;
            }
            row
        })
        .collect();
    let mut b = ys.to_vec();
    for colq in 0..n {
        let mut piv = colq;
        for r in colq + 1..n {
            if a[r][colq].abs() > a[piv][colq].abs() {
                piv = r;
            }
        }
        a.swap(colq, piv);
        b.swap(colq, piv);
        let d = a[colq][colq];
        assert!(d != 0.0, "singular Vandermonde system");
        for r in 0..n {
            if r == colq {
                continue;
            }
            let f = a[r][colq] / d;
            if f != 0.0 {
                for c in colq..n {
                    a[r][c] -= f * a[colq][c];
                }
                b[r] -= f * b[colq];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Interpolation nodes 0, 1, -1, 2, -2, ... (integers, symmetric about 0).
pub fn integer_nodes(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0i64;
    while out.len() < count {
        if k == 0 {
            out.push(0.0);
        } else {
            out.push(k as f64);
            if out.len() < count {
                out.push(-k as f64);
            }
        }
        k += 1;
    }
    out
}

/// Central finite-difference gradient of the scalar network output with
/// respect to one slot matrix.
pub fn finite_difference_gradient(
    w: &WeightSet,
    x: &InputVector,
    slot: usize,
    step: f64,
) -> Matrix {
    let s = w.spec().slots()[slot];
    let mut grad = Matrix::zeros(s.rows, s.cols);
    for r in 0..s.rows {
        for c in 0..s.cols {
            let mut plus = w.clone();
            let v = plus.matrix(slot).get(r, c);
            plus.matrix_mut(slot).set(r, c, v + step);
            let mut minus = w.clone();
            minus.matrix_mut(slot).set(r, c, v - step);
            let fp = plus.forward_scalar(x).unwrap();
            let fm = minus.forward_scalar(x).unwrap();
            grad.set(r, c, (fp - fm) / (2.0 * step));
        }
    }
    grad
}

/// Mixed second directional derivative by central differences:
/// `∂²g[u, v] ≈ [g(+u+v) − g(+u−v) − g(−u+v) + g(−u−v)] / 4h²`.
pub fn finite_difference_bilinear(
    w: &WeightSet,
    x: &InputVector,
    u: &Direction,
    v: &Direction,
    step: f64,
) -> f64 {
    let eval = |su: f64, sv: f64| -> f64 {
        w.offset(u, su * step)
            .unwrap()
            .offset(v, sv * step)
            .unwrap()
            .forward_scalar(x)
            .unwrap()
    };
    (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * step * step)
}

/// Naive forward pass: explicit row-by-row matrix products, no shared code
/// with the library's matvec.
pub fn naive_forward(w: &WeightSet, x: &[f64]) -> Vec<f64> {
    let spec = w.spec();
    let mut v = x.to_vec();
    for (idx, slot) in spec.slots().iter().enumerate() {
        let m = w.matrix(idx);
        let mut next = vec![0.0; m.rows()];
        for r in 0..m.rows() {
            let mut acc = 0.0;
            for c in 0..m.cols() {
                acc += m.get(r, c) * v[c];
            }
            next[r] = acc / (slot.cols as f64).sqrt();
        }
        v = next;
    }
    v
}
