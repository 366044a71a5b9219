//! Small dense linear algebra: row-major matrices and factored low-rank sums.
//!
//! Row-major layout is an internal contract used by the weight container
//! format and the substitution machinery. Summation order inside `dot` is
//! fixed (eight lanes, then a fixed combine tree), so results are bitwise
//! reproducible regardless of thread count.

use rand::Rng;
use rand_distr::StandardNormal;

/// Fixed-order dot product with eight accumulator lanes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn scale(v: &mut [f64], c: f64) {
    for x in v {
        *x *= c;
    }
}

/// `y += c * x`
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `M v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, v))
            .collect()
    }

    /// `uᵀ M`, returned as a plain vector over the columns.
    pub fn rmatvec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows, "rmatvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (ui, row) in u.iter().zip(self.data.chunks_exact(self.cols)) {
            if *ui != 0.0 {
                axpy(&mut out, *ui, row);
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        dot(&self.data, &other.data)
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        let mut m = self.clone();
        scale(&mut m.data, c);
        m
    }

    pub fn scale_in_place(&mut self, c: f64) {
        scale(&mut self.data, c);
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        axpy(&mut m.data, c, &other.data);
        m
    }

    pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(u.len(), v.len());
        for (r, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                axpy(m.row_mut(r), ui, v);
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Sum of outer products `Σ_k l_k r_kᵀ`, used for tangents kept in factored
/// form so that deep-spec sweeps never materialize an m×m direction.
#[derive(Debug, Clone)]
pub struct FactoredMatrix {
    rows: usize,
    cols: usize,
    terms: Vec<(Vec<f64>, Vec<f64>)>,
}

impl FactoredMatrix {
    pub fn new(rows: usize, cols: usize, terms: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        for (l, r) in &terms {
            assert_eq!(l.len(), rows);
            assert_eq!(r.len(), cols);
        }
        Self { rows, cols, terms }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            terms: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.terms
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (l, r) in &self.terms {
            axpy(&mut out, dot(r, v), l);
        }
        out
    }

    pub fn rmatvec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (l, r) in &self.terms {
            axpy(&mut out, dot(l, u), r);
        }
        out
    }

    /// Frobenius norm via the Gram expansion `Σ_{jk} (l_jᵀl_k)(r_jᵀr_k)`.
    pub fn frobenius(&self) -> f64 {
        let mut g = 0.0;
        for (lj, rj) in &self.terms {
            for (lk, rk) in &self.terms {
                g += dot(lj, lk) * dot(rj, rk);
            }
        }
        g.max(0.0).sqrt()
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for (l, _) in &mut self.terms {
            scale(l, c);
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (l, r) in &self.terms {
            for (row, &li) in l.iter().enumerate() {
                if li != 0.0 {
                    axpy(m.row_mut(row), li, r);
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matvec_matches_naive() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.rmatvec(&[1.0, -1.0]), vec![-3.0, -3.0, -3.0]);
    }

    #[test]
    fn dot_fixed_order_long() {
        let a: Vec<f64> = (0..103).map(|i| (i as f64) * 0.25).collect();
        let naive: f64 = a.iter().map(|x| x * x).sum();
        assert_relative_eq!(dot(&a, &a), naive, max_relative = 1e-14);
    }

    #[test]
    fn factored_agrees_with_dense() {
        let f = FactoredMatrix::new(
            3,
            2,
            vec![
                (vec![1.0, 2.0, -1.0], vec![0.5, 1.0]),
                (vec![0.0, 1.0, 3.0], vec![-1.0, 2.0]),
            ],
        );
        let d = f.to_dense();
        let v = [0.3, -0.7];
        assert_eq!(f.matvec(&v), d.matvec(&v));
        let u = [1.0, -2.0, 0.5];
        assert_eq!(f.rmatvec(&u), d.rmatvec(&u));
        assert_relative_eq!(f.frobenius(), d.frobenius(), max_relative = 1e-12);
    }
}
