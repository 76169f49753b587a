//! Row-major kernels for `channels × samples` data plus small symmetric
//! eigen-decompositions.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

/// `(1/T) · A Bᵀ` for row sets of equal length `T`.
pub fn cross_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    let t = a.first().map_or(1, Vec::len).max(1) as f64;
    let mut out = DMatrix::zeros(a.len(), b.len());
    for (i, ra) in a.iter().enumerate() {
        for (j, rb) in b.iter().enumerate() {
            out[(i, j)] = dot(ra, rb) / t;
        }
    }
    out
}

/// Covariance `(1/T)·X Xᵀ` of rows that are already centered.
pub fn gram(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let t = rows.first().map_or(1, Vec::len).max(1) as f64;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(&rows[i], &rows[j]) / t;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `W · X` where `X` is given as rows.
pub fn mul_rows(w: &DMatrix<f64>, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = rows.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; t]; w.nrows()];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, r) in rows.iter().enumerate() {
            let c = w[(i, j)];
            if c != 0.0 {
                for (ov, rv) in o.iter_mut().zip(r) {
                    *ov += c * rv;
                }
            }
        }
    }
    out
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue;
/// eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// `(M Mᵀ)^{-1/2} M`, the symmetric decorrelation of the rows of `M`.
pub fn symmetric_decorrelate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = m * m.transpose();
    let (vals, vecs) = sym_eigen_desc(s);
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt()),
    ));
    &vecs * inv_sqrt * vecs.transpose() * m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sym_eigen_desc(m);
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        assert_eq!(vecs[(1, 0)], 1.0);
    }

    #[test]
    fn decorrelation_yields_orthonormal_rows() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.5, 2.0, -0.1, 0.0, 0.4, 1.5]);
        let w = symmetric_decorrelate(&m);
        let id = &w * w.transpose();
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn mul_rows_matches_matrix_product() {
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 0.5]);
        let rows = vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![4.0, -1.0]];
        let out = mul_rows(&w, &rows);
        assert_eq!(out, vec![vec![13.0, 1.0], vec![1.0, -2.5]]);
        let g = gram(&rows);
        assert_eq!(g[(0, 2)], (4.0 - 2.0) / 2.0);
    }
}
