//! Proximal and resolvent operators used by the ADMM updates.

use nalgebra::SymmetricEigen;

use crate::error::{domain, NjglError, Result};
use crate::linalg::{asymmetry, max_abs, sym, Mat};
use crate::model::GroupNorm;

const SYMMETRY_TOL: f64 = 1e-8;

/// Symmetric eigendecomposition `A = U diag(d) U^T`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub u: Mat,
    pub d: Vec<f64>,
}

impl EigenDecomposition {
    pub fn of(a: &Mat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(NjglError::Dimension(
                "eigendecomposition needs a square matrix".into(),
            ));
        }
        let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0).ok_or_else(|| {
            NjglError::Eigen(format!(
                "no convergence for {}x{} input",
                a.nrows(),
                a.ncols()
            ))
        })?;
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(NjglError::Eigen("non-finite eigenvalues".into()));
        }
        Ok(Self {
            u: eig.eigenvectors,
            d: eig.eigenvalues.iter().copied().collect(),
        })
    }

    /// `U diag(f(d)) U^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mut scaled = self.u.clone();
        for (j, &dj) in self.d.iter().enumerate() {
            let fj = f(dj);
            scaled.column_mut(j).scale_mut(fj);
        }
        scaled * self.u.transpose()
    }
}

fn check_lambda(lam: f64) -> Result<()> {
    if !(lam >= 0.0) || !lam.is_finite() {
        return domain(format!(
            "threshold must be a finite nonnegative number, got {lam}"
        ));
    }
    Ok(())
}

/// `argmin_Θ { −n log det Θ + ρ‖Θ − A‖_F² }` for symmetric `A`.
pub fn expand(a: &Mat, rho: f64, n: f64) -> Result<Mat> {
    if !(rho > 0.0) || !rho.is_finite() {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if !(n > 0.0) || !n.is_finite() {
        return domain(format!("n must be positive, got {n}"));
    }
    if a.nrows() != a.ncols() {
        return domain("expand needs a square matrix");
    }
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL * max_abs(a).max(1.0) {
        return domain(format!(
            "expand needs a symmetric matrix (asymmetry {asym:.3e})"
        ));
    }
    expand_sym(&sym(a), rho, n)
}

/// Solver-internal variant: symmetrizes its argument instead of rejecting it.
pub(crate) fn expand_sym(a: &Mat, rho: f64, n: f64) -> Result<Mat> {
    let eig = EigenDecomposition::of(&sym(a))?;
    let c = 2.0 * n / rho;
    let out = eig.map(|d| 0.5 * (d + (d * d + c).sqrt()));
    Ok(sym(&out))
}

#[inline]
pub(crate) fn soft(x: f64, lam: f64) -> f64 {
    if x > lam {
        x - lam
    } else if x < -lam {
        x + lam
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding.
pub fn prox_l1(a: &Mat, lam: f64) -> Result<Mat> {
    check_lambda(lam)?;
    Ok(a.map(|x| soft(x, lam)))
}

/// Columnwise group shrinkage `max(0, 1 − λ/‖A_j‖_2) A_j`.
pub fn prox_group_l2(a: &Mat, lam: f64) -> Result<Mat> {
    prox_columns(a, lam, GroupNorm::L2)
}

/// Columnwise `A_j − Π_{λB_1}(A_j)`.
pub fn prox_group_linf(a: &Mat, lam: f64) -> Result<Mat> {
    prox_columns(a, lam, GroupNorm::Linf)
}

/// `T_q(A, λ)` on the columns of a single matrix.
pub fn prox_columns(a: &Mat, lam: f64, q: GroupNorm) -> Result<Mat> {
    Ok(prox_stacked(std::slice::from_ref(a), lam, q)?
        .pop()
        .expect("one block in, one out"))
}

/// `T_q` applied to the vertically stacked matrix `[A^1; …; A^K]`, i.e. the
/// `j`-th columns of all blocks form one group.
pub fn prox_stacked(blocks: &[Mat], lam: f64, q: GroupNorm) -> Result<Vec<Mat>> {
    check_lambda(lam)?;
    let Some(first) = blocks.first() else {
        return Ok(Vec::new());
    };
    let cols = first.ncols();
    if blocks.iter().any(|b| b.ncols() != cols) {
        return domain("stacked blocks must have the same number of columns");
    }
    if q == GroupNorm::L1 {
        return Ok(blocks.iter().map(|b| b.map(|x| soft(x, lam))).collect());
    }
    let mut out: Vec<Mat> = blocks.to_vec();
    let mut buf = Vec::new();
    for j in 0..cols {
        buf.clear();
        for b in blocks {
            buf.extend(b.column(j).iter().copied());
        }
        match q {
            GroupNorm::L2 => {
                let norm = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = if norm > lam { 1.0 - lam / norm } else { 0.0 };
                for v in buf.iter_mut() {
                    *v *= scale;
                }
            }
            GroupNorm::Linf => {
                let proj = project_l1_ball(&buf, lam);
                for (v, pv) in buf.iter_mut().zip(&proj) {
                    *v -= pv;
                }
            }
            GroupNorm::L1 => unreachable!(),
        }
        let mut offset = 0;
        for b in out.iter_mut() {
            let rows = b.nrows();
            b.column_mut(j).copy_from_slice(&buf[offset..offset + rows]);
            offset += rows;
        }
    }
    Ok(out)
}

/// Euclidean projection onto `{x : ‖x‖_1 ≤ radius}` (sort-based, exact).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (k as f64 + 1.0);
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| soft(x, tau)).collect()
}

/// Prox of `λ1 Σ_k ‖X^k‖_1 + λ2 Σ_{i≠j} ‖(X^1_ij, …, X^K_ij)‖_2`.
pub fn prox_sparse_group(stack: &[Mat], lam1: f64, lam2: f64) -> Result<Vec<Mat>> {
    check_lambda(lam1)?;
    check_lambda(lam2)?;
    let Some(first) = stack.first() else {
        return Ok(Vec::new());
    };
    let (r, c) = first.shape();
    if stack.iter().any(|m| m.shape() != (r, c)) {
        return domain("sparse-group prox needs matrices of identical shape");
    }
    let mut out: Vec<Mat> = stack.iter().map(|m| m.map(|x| soft(x, lam1))).collect();
    for j in 0..c {
        for i in 0..r {
            if i == j {
                continue;
            }
            let norm = out
                .iter()
                .map(|m| m[(i, j)] * m[(i, j)])
                .sum::<f64>()
                .sqrt();
            let scale = if norm > lam2 { 1.0 - lam2 / norm } else { 0.0 };
            for m in out.iter_mut() {
                m[(i, j)] *= scale;
            }
        }
    }
    Ok(out)
}
