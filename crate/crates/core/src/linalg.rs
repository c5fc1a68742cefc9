//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{FrameError, Result};

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn check_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(FrameError::NonFinite { context: context.to_string() })
    }
}

/// Singular values in decreasing order, padded with zeros up to `ncols`
/// so that `sigma_min` reflects a nontrivial kernel of wide matrices.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![0.0; m.ncols()];
    }
    let svd = m.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s.resize(m.ncols().max(s.len()), 0.0);
    s
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of `m` viewed as a map on `R^ncols`.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    s.get(m.ncols() - 1).copied().unwrap_or(0.0)
}

/// Numerical rank by Gaussian elimination with complete pivoting; pivots
/// below `rel_tol * ||m||_F` count as zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.norm();
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut r = 0;
    while r < rows.min(cols) {
        let mut best = (r, r, 0.0_f64);
        for i in r..rows {
            for j in r..cols {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        a.swap_rows(r, best.0);
        a.swap_columns(r, best.1);
        let pivot = a[(r, r)];
        for i in (r + 1)..rows {
            let factor = a[(i, r)] / pivot;
            if factor != 0.0 {
                for j in r..cols {
                    let v = a[(r, j)];
                    a[(i, j)] -= factor * v;
                }
            }
        }
        r += 1;
    }
    r
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = sigma_max(m).max(1.0);
    m.clone()
        .pseudo_inverse(1e-13 * scale)
        .map_err(|e| FrameError::Numerical(format!("pseudo-inverse: {e}")))
}

pub fn inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(FrameError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| FrameError::Singular { context: context.to_string() })
}

pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| FrameError::Singular { context: context.to_string() })
}

/// Maximum entrywise deviation of `m` from the identity.
pub fn identity_deviation(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

/// Solves a small dense system in place with partial pivoting; returns
/// `None` when a pivot vanishes. Used on hot paths where allocating a
/// nalgebra decomposition per call would dominate.
pub(crate) fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let p = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / p;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

/// Builds a matrix from row-major nested rows, checking that every row has
/// the same length. `context` names the matrix in error messages.
pub fn from_rows(rows: &[Vec<f64>], context: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(FrameError::InvalidArgument(format!(
                "{context}: row {i} has length {}, expected {ncols}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(FrameError::NonFinite { context: format!("{context}: row {i}") });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows, "matrix").map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_named() {
        let err = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0, 5.0]], "matrices.G").unwrap_err();
        assert_eq!(err.to_string(), "invalid argument: matrices.G: row 1 has length 3, expected 2");
        let m = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], "m").unwrap();
        assert_eq!(to_rows(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn rank_detects_kernel() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert_eq!(rank(&m, 1e-12), 1);
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 1.0]);
        assert_eq!(rank(&m, 1e-12), 2);
        assert_eq!(rank(&DMatrix::zeros(3, 3), 1e-12), 0);
    }

    #[test]
    fn rank_of_nearly_dependent_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0 + 1e-14]);
        assert_eq!(rank(&m, 1e-12), 1);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0 + 1e-6]);
        assert_eq!(rank(&m, 1e-12), 2);
    }

    #[test]
    fn sigma_min_of_wide_matrix_is_zero() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_eq!(sigma_min(&m), 0.0);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!((sigma_min(&d) - 1.0).abs() < 1e-15);
        assert!((sigma_max(&d) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn small_solver_matches_lu() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, -1.0, 3.0, 0.0, 0.2, 0.1, 1.5]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = solve(&a, &b, "test").unwrap();
        let mut flat: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
        let mut rhs = b.as_slice().to_vec();
        solve_small(&mut flat, &mut rhs, 3).unwrap();
        for i in 0..3 {
            assert!((x[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pinv_is_left_inverse_of_injective_matrix() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 1.0]);
        let l = pinv(&m).unwrap();
        assert!(identity_deviation(&(l * m)) < 1e-12);
    }
}
