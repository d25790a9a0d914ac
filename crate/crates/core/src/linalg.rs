//! Small dense-matrix helpers shared across the solvers.

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

pub fn frob(a: &Mat) -> f64 {
    a.norm()
}

/// Sum of absolute values of all entries (diagonal included).
pub fn abs_sum(a: &Mat) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn skew(a: &Mat) -> Mat {
    (a - a.transpose()) * 0.5
}

pub fn diag_part(a: &Mat) -> Mat {
    Mat::from_diagonal(&a.diagonal())
}

pub fn off_diag(a: &Mat) -> Mat {
    let mut out = a.clone();
    out.fill_diagonal(0.0);
    out
}

/// Largest absolute entry of `a - a^T`.
pub fn asymmetry(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_off_diag(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                worst = worst.max(a[(i, j)].abs());
            }
        }
    }
    worst
}

/// Frobenius inner product.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `log det` via Cholesky; `None` when the matrix is not positive definite.
pub fn log_det_spd(a: &Mat) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Principal submatrix on the given (sorted) index set.
pub fn submatrix(a: &Mat, idx: &[usize]) -> Mat {
    Mat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

/// Symmetric permutation `P A P^T` where row `i` of the result is row `perm[i]` of `a`.
pub fn permute(a: &Mat, perm: &[usize]) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], perm[j])])
}
