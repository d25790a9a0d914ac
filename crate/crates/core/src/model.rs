//! Shared domain types and objective evaluation.
//!
//! All objectives are written in minimization form: the negative
//! log-likelihood `-L = Σ_k n_k (-log det Θ^k + tr(S^k Θ^k))` plus penalties.
//! `‖Θ‖_1` always sums every entry, diagonal included.

use serde::{Deserialize, Serialize};

use crate::error::{NjglError, Result};
use crate::linalg::{abs_sum, asymmetry, frob, inner, log_det_spd, off_diag, sym, Mat};
use crate::rcon::RconCertificate;

/// Symmetry tolerance for ingested covariances; larger corrections are logged.
pub const SYMMETRY_WARN: f64 = 1e-8;

/// Relative tolerance on the coupling constraint accepted by the objective evaluators.
pub const COUPLING_TOL: f64 = 1e-6;

/// Per-class sample covariance matrices with their sample counts.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    p: usize,
    covariances: Vec<Mat>,
    counts: Vec<f64>,
}

impl EmpiricalModel {
    /// Builds a model from `(S^k, n_k)` pairs. Each `S^k` is symmetrized as
    /// `(S + S^T)/2`; a warning is logged if that moves any entry by more than 1e-8.
    pub fn new(classes: Vec<(Mat, f64)>) -> Result<Self> {
        if classes.is_empty() {
            return Err(NjglError::Validation(
                "at least one class is required".into(),
            ));
        }
        let p = classes[0].0.nrows();
        if p == 0 {
            return Err(NjglError::Validation(
                "covariance matrices must be non-empty".into(),
            ));
        }
        let mut covariances = Vec::with_capacity(classes.len());
        let mut counts = Vec::with_capacity(classes.len());
        for (k, (s, n)) in classes.into_iter().enumerate() {
            if s.nrows() != p || s.ncols() != p {
                return Err(NjglError::Dimension(format!(
                    "class {k}: covariance is {}x{}, expected {p}x{p}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if !(n >= 1.0) || !n.is_finite() {
                return Err(NjglError::Validation(format!(
                    "class {k}: sample count must be >= 1, got {n}"
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(NjglError::Validation(format!(
                    "class {k}: covariance has non-finite entries"
                )));
            }
            let correction = asymmetry(&s) / 2.0;
            if correction > SYMMETRY_WARN {
                log::warn!("class {k}: covariance symmetrized, max correction {correction:.3e}");
            }
            covariances.push(sym(&s));
            counts.push(n);
        }
        Ok(Self {
            p,
            covariances,
            counts,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of classes `K`.
    pub fn k(&self) -> usize {
        self.covariances.len()
    }

    pub fn covariance(&self, k: usize) -> &Mat {
        &self.covariances[k]
    }

    pub fn covariances(&self) -> &[Mat] {
        &self.covariances
    }

    pub fn count(&self, k: usize) -> f64 {
        self.counts[k]
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Model restricted to the principal submatrices on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self {
            p: idx.len(),
            covariances: self
                .covariances
                .iter()
                .map(|s| crate::linalg::submatrix(s, idx))
                .collect(),
            counts: self.counts.clone(),
        }
    }

    /// Single-class model for class `k`.
    pub fn class(&self, k: usize) -> Self {
        Self {
            p: self.p,
            covariances: vec![self.covariances[k].clone()],
            counts: vec![self.counts[k]],
        }
    }
}

/// Exponent of the `ℓ1/ℓq` group norm used inside the RCON penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupNorm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    Linf,
}

impl GroupNorm {
    /// Dual exponent `s` with `1/s + 1/q = 1`.
    pub fn dual_exponent(self) -> f64 {
        match self {
            GroupNorm::L1 => f64::INFINITY,
            GroupNorm::L2 => 2.0,
            GroupNorm::Linf => 1.0,
        }
    }

    pub fn dual(self) -> GroupNorm {
        match self {
            GroupNorm::L1 => GroupNorm::Linf,
            GroupNorm::L2 => GroupNorm::L2,
            GroupNorm::Linf => GroupNorm::L1,
        }
    }

    /// `ℓq` norm of a vector.
    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            GroupNorm::L1 => x.iter().map(|v| v.abs()).sum(),
            GroupNorm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            GroupNorm::Linf => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GroupNorm::L1 => "1",
            GroupNorm::L2 => "2",
            GroupNorm::Linf => "inf",
        }
    }
}

impl std::str::FromStr for GroupNorm {
    type Err = NjglError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(GroupNorm::L1),
            "2" => Ok(GroupNorm::L2),
            "inf" | "Inf" | "INF" => Ok(GroupNorm::Linf),
            other => Err(NjglError::Validation(format!(
                "q must be one of 1, 2, inf; got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for GroupNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Tuning parameters `λ1`, `λ2` and the group-norm exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub q: GroupNorm,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64, q: GroupNorm) -> Result<Self> {
        let cfg = Self {
            lambda1,
            lambda2,
            q,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(NjglError::Validation(format!(
                "lambda1 must be >= 0, got {}",
                self.lambda1
            )));
        }
        if !(self.lambda2 >= 0.0) || !self.lambda2.is_finite() {
            return Err(NjglError::Validation(format!(
                "lambda2 must be >= 0, got {}",
                self.lambda2
            )));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        self.q.dual_exponent()
    }
}

/// Estimated precision matrices plus optional solver by-products.
#[derive(Debug, Clone)]
pub struct PrecisionSet {
    pub thetas: Vec<Mat>,
    /// PNJGL: a single `V` with `Θ1 − Θ2 ≈ V + V^T`; CNJGL: one `V^k` per class
    /// with zero diagonal and `Θ^k − diag(Θ^k) ≈ V^k + (V^k)^T`.
    pub decomposition: Option<Vec<Mat>>,
    pub duals: Option<RconCertificate>,
}

impl PrecisionSet {
    pub fn from_thetas(thetas: Vec<Mat>) -> Self {
        Self {
            thetas,
            decomposition: None,
            duals: None,
        }
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }
}

/// Partition of `{0..p}` into disjoint, non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    p: usize,
}

impl BlockPartition {
    /// Validates and canonicalizes: members ascending, blocks ordered by smallest member.
    pub fn new(p: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; p];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(NjglError::Validation(
                    "partition contains an empty block".into(),
                ));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= p {
                    return Err(NjglError::Validation(format!(
                        "index {i} out of range for p = {p}"
                    )));
                }
                if seen[i] {
                    return Err(NjglError::Validation(format!(
                        "index {i} appears in two blocks"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(NjglError::Validation(format!(
                "index {missing} is not covered by the partition"
            )));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { blocks, p })
    }

    pub fn single(p: usize) -> Self {
        Self {
            blocks: vec![(0..p).collect()],
            p,
        }
    }

    pub fn singletons(p: usize) -> Self {
        Self {
            blocks: (0..p).map(|i| vec![i]).collect(),
            p,
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Block label of every index.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.p];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = b;
            }
        }
        labels
    }

    /// Whether `(i, j)` lies in the support `T = ∪ I_l × I_l`.
    pub fn in_support(&self, labels: &[usize], i: usize, j: usize) -> bool {
        labels[i] == labels[j]
    }

    /// `|T^c|`, counting ordered pairs.
    pub fn complement_size(&self) -> usize {
        let inside: usize = self.blocks.iter().map(|b| b.len() * b.len()).sum();
        self.p * self.p - inside
    }
}

fn check_shapes(model: &EmpiricalModel, thetas: &[Mat]) -> Result<()> {
    if thetas.len() != model.k() {
        return Err(NjglError::Dimension(format!(
            "expected {} precision matrices, got {}",
            model.k(),
            thetas.len()
        )));
    }
    for (k, t) in thetas.iter().enumerate() {
        if t.nrows() != model.p() || t.ncols() != model.p() {
            return Err(NjglError::Dimension(format!(
                "class {k}: precision matrix has wrong shape"
            )));
        }
    }
    Ok(())
}

/// `Σ_k n_k (−log det Θ^k + tr(S^k Θ^k))`.
pub fn neg_log_likelihood(model: &EmpiricalModel, thetas: &[Mat]) -> Result<f64> {
    check_shapes(model, thetas)?;
    let mut total = 0.0;
    for (k, theta) in thetas.iter().enumerate() {
        let ld = log_det_spd(theta).ok_or(NjglError::NotPositiveDefinite { class: k })?;
        total += model.count(k) * (-ld + inner(model.covariance(k), theta));
    }
    Ok(total)
}

fn lasso_term(thetas: &[Mat], lambda1: f64) -> f64 {
    lambda1 * thetas.iter().map(abs_sum).sum::<f64>()
}

/// `Σ_j ‖[V^1; …; V^K]_j‖_q` over the stacked columns.
pub fn stacked_column_norm_sum(vs: &[Mat], q: GroupNorm) -> f64 {
    if vs.is_empty() {
        return 0.0;
    }
    let p = vs[0].ncols();
    let mut buf = Vec::new();
    let mut total = 0.0;
    for j in 0..p {
        buf.clear();
        for v in vs {
            buf.extend(v.column(j).iter().copied());
        }
        total += q.norm(&buf);
    }
    total
}

/// PNJGL objective for `K = 2` with an explicit decomposition `Θ1 − Θ2 = V + V^T`.
pub fn pnjgl_objective(
    model: &EmpiricalModel,
    theta1: &Mat,
    theta2: &Mat,
    v: &Mat,
    cfg: &PenaltyConfig,
) -> Result<f64> {
    if model.k() != 2 {
        return Err(NjglError::Validation(format!(
            "PNJGL requires K = 2, got K = {}",
            model.k()
        )));
    }
    let diff = theta1 - theta2;
    let residual = frob(&(&diff - (v + v.transpose()))) / frob(&diff).max(1.0);
    if residual > COUPLING_TOL {
        return Err(NjglError::Constraint {
            residual,
            tolerance: COUPLING_TOL,
        });
    }
    let thetas = [theta1.clone(), theta2.clone()];
    Ok(neg_log_likelihood(model, &thetas)?
        + lasso_term(&thetas, cfg.lambda1)
        + cfg.lambda2 * stacked_column_norm_sum(std::slice::from_ref(v), cfg.q))
}

/// CNJGL objective with decompositions `Θ^k − diag(Θ^k) = V^k + (V^k)^T`.
pub fn cnjgl_objective(
    model: &EmpiricalModel,
    thetas: &[Mat],
    vs: &[Mat],
    cfg: &PenaltyConfig,
) -> Result<f64> {
    check_shapes(model, thetas)?;
    if vs.len() != thetas.len() {
        return Err(NjglError::Dimension(
            "one V matrix per class is required".into(),
        ));
    }
    for (theta, v) in thetas.iter().zip(vs) {
        let target = off_diag(theta);
        let residual = frob(&(&target - (v + v.transpose()))) / frob(&target).max(1.0);
        if residual > COUPLING_TOL {
            return Err(NjglError::Constraint {
                residual,
                tolerance: COUPLING_TOL,
            });
        }
    }
    Ok(neg_log_likelihood(model, thetas)?
        + lasso_term(thetas, cfg.lambda1)
        + cfg.lambda2 * stacked_column_norm_sum(vs, cfg.q))
}

/// Fused graphical lasso objective in the parameterization shared with
/// PNJGL at `q = 1`: `−L + λ1 Σ_k ‖Θ^k‖_1 + (λ2/2) Σ_{k<k'} Σ_{i,j} |Θ^k_ij − Θ^k'_ij|`.
pub fn fgl_objective(
    model: &EmpiricalModel,
    thetas: &[Mat],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    check_shapes(model, thetas)?;
    let mut fused = 0.0;
    for a in 0..thetas.len() {
        for b in (a + 1)..thetas.len() {
            fused += abs_sum(&(&thetas[a] - &thetas[b]));
        }
    }
    Ok(neg_log_likelihood(model, thetas)? + lasso_term(thetas, lambda1) + 0.5 * lambda2 * fused)
}

/// Group graphical lasso objective:
/// `−L + λ1 Σ_k ‖Θ^k‖_1 + λ2 Σ_{i≠j} sqrt(Σ_k (Θ^k_ij)^2)`.
pub fn ggl_objective(
    model: &EmpiricalModel,
    thetas: &[Mat],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    check_shapes(model, thetas)?;
    let p = model.p();
    let mut group = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                group += thetas
                    .iter()
                    .map(|t| t[(i, j)] * t[(i, j)])
                    .sum::<f64>()
                    .sqrt();
            }
        }
    }
    Ok(neg_log_likelihood(model, thetas)? + lasso_term(thetas, lambda1) + lambda2 * group)
}

/// Single-class graphical lasso objective with separate diagonal and
/// off-diagonal penalty weights.
pub fn gl_objective(
    s: &Mat,
    n: f64,
    theta: &Mat,
    diag_penalty: f64,
    off_penalty: f64,
) -> Result<f64> {
    let ld = log_det_spd(theta).ok_or(NjglError::NotPositiveDefinite { class: 0 })?;
    let diag: f64 = theta.diagonal().iter().map(|x| x.abs()).sum();
    let off = abs_sum(theta) - diag;
    Ok(n * (-ld + inner(s, theta)) + diag_penalty * diag + off_penalty * off)
}
