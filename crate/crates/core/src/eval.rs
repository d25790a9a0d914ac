//! Recovery metrics against a known truth and k-fold cross-validated
//! log-likelihood.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmOptions;
use crate::datagen::{sample_covariance, SyntheticTruth};
use crate::error::{NjglError, Result};
use crate::linalg::{inner, log_det_spd, Mat};
use crate::model::{EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet};
use crate::screening::{solve_direct, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Entries with magnitude above `t0` count as edges.
    pub t0: f64,
    /// Node threshold `t_s = mean + ts_multiplier · std` of a score vector.
    pub ts_multiplier: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            t0: 1e-6,
            ts_multiplier: 5.5,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t0 > 0.0
            && self.t0.is_finite()
            && self.ts_multiplier > 0.0
            && self.ts_multiplier.is_finite()
        {
            Ok(())
        } else {
            Err(NjglError::Validation(format!(
                "invalid metric config: {self:?}"
            )))
        }
    }
}

/// True precision matrices and the indices of the planted special nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub thetas: Vec<Mat>,
    pub perturbed_idx: Vec<usize>,
    pub cohub_idx: Vec<usize>,
}

impl From<&SyntheticTruth> for GroundTruth {
    fn from(t: &SyntheticTruth) -> Self {
        Self {
            thetas: vec![t.theta1.clone(), t.theta2.clone()],
            perturbed_idx: t.perturbed_idx.clone(),
            cohub_idx: t.cohub_idx.clone(),
        }
    }
}

/// Thresholded node scores for one detection rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeScores {
    /// One score vector per thresholded matrix.
    pub scores: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub positives: Vec<usize>,
    pub count: usize,
    pub true_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub positive_edges: usize,
    pub true_positive_edges: usize,
    pub ppc: usize,
    pub tppc: usize,
    pub pcc: usize,
    pub tpcc: usize,
    pub frobenius_error: f64,
    pub column_scores: BTreeMap<String, Vec<f64>>,
}

fn check_shapes(truth: &[Mat], est: &[Mat]) -> Result<()> {
    if truth.len() != est.len() {
        return Err(NjglError::Dimension(format!(
            "{} true matrices, {} estimates",
            truth.len(),
            est.len()
        )));
    }
    for (t, e) in truth.iter().zip(est) {
        if t.shape() != e.shape() || !t.is_square() {
            return Err(NjglError::Dimension(format!(
                "shape {:?} vs {:?}",
                t.shape(),
                e.shape()
            )));
        }
    }
    Ok(())
}

/// `(positives, true positives)` over the strict upper triangle of every class.
pub fn edge_metrics(truth: &[Mat], est: &[Mat], cfg: &MetricConfig) -> Result<(usize, usize)> {
    check_shapes(truth, est)?;
    let (mut pos, mut tp) = (0, 0);
    for (t, e) in truth.iter().zip(est) {
        let p = t.nrows();
        for j in 0..p {
            for i in 0..j {
                if e[(i, j)].abs() > cfg.t0 {
                    pos += 1;
                    if t[(i, j)].abs() > cfg.t0 {
                        tp += 1;
                    }
                }
            }
        }
    }
    Ok((pos, tp))
}

/// `Σ_k ‖upper(Θ^k − Θ̂^k)‖_F` over the strict upper triangle.
pub fn frobenius_error(truth: &[Mat], est: &[Mat]) -> Result<f64> {
    check_shapes(truth, est)?;
    Ok(truth
        .iter()
        .zip(est)
        .map(|(t, e)| {
            let p = t.nrows();
            let mut ss = 0.0;
            for j in 0..p {
                for i in 0..j {
                    ss += (t[(i, j)] - e[(i, j)]).powi(2);
                }
            }
            ss.sqrt()
        })
        .sum())
}

/// `ℓ2` norm of each column with its diagonal entry removed.
pub fn column_scores(a: &Mat) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            a.column(j)
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, x)| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// `mean + multiplier · std`, with the population standard deviation.
pub fn score_threshold(scores: &[f64], multiplier: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    mean + multiplier * var.sqrt()
}

/// Input for perturbed-node detection.
#[derive(Debug, Clone, Copy)]
pub enum PerturbedArtifacts<'a> {
    /// The PNJGL decomposition `V̂`.
    Pnjgl { v: &'a Mat },
    /// Two estimates, scored on `Θ̂1 − Θ̂2` (FGL, GL and any other method).
    Difference { theta1: &'a Mat, theta2: &'a Mat },
}

/// Input for co-hub detection: `V̂^k` for CNJGL, `Θ̂^k` otherwise. A node is
/// declared when its score clears the threshold in every class.
#[derive(Debug, Clone, Copy)]
pub enum CohubArtifacts<'a> {
    Cnjgl { vs: &'a [Mat] },
    Estimates { thetas: &'a [Mat] },
}

fn declared(scores: &[Vec<f64>], thresholds: &[f64], truth_idx: &[usize]) -> (Vec<usize>, usize) {
    let p = scores.first().map_or(0, Vec::len);
    let positives: Vec<usize> = (0..p)
        .filter(|&i| scores.iter().zip(thresholds).all(|(s, &t)| s[i] > t))
        .collect();
    let true_count = positives.iter().filter(|i| truth_idx.contains(i)).count();
    (positives, true_count)
}

fn check_index(truth_idx: &[usize], p: usize) -> Result<()> {
    match truth_idx.iter().find(|&&i| i >= p) {
        Some(i) => Err(NjglError::Dimension(format!(
            "node index {i} out of range for p = {p}"
        ))),
        None => Ok(()),
    }
}

pub fn perturbed_node_scores(
    art: PerturbedArtifacts<'_>,
    truth_idx: &[usize],
    cfg: &MetricConfig,
) -> Result<NodeScores> {
    let m = match art {
        PerturbedArtifacts::Pnjgl { v } => v.clone(),
        PerturbedArtifacts::Difference { theta1, theta2 } => {
            if theta1.shape() != theta2.shape() {
                return Err(NjglError::Dimension("estimates differ in shape".into()));
            }
            theta1 - theta2
        }
    };
    check_index(truth_idx, m.ncols())?;
    let scores = vec![column_scores(&m)];
    let thresholds = vec![score_threshold(&scores[0], cfg.ts_multiplier)];
    let (positives, true_count) = declared(&scores, &thresholds, truth_idx);
    Ok(NodeScores {
        count: positives.len(),
        scores,
        thresholds,
        positives,
        true_count,
    })
}

pub fn cohub_node_scores(
    art: CohubArtifacts<'_>,
    truth_idx: &[usize],
    cfg: &MetricConfig,
) -> Result<NodeScores> {
    let mats = match art {
        CohubArtifacts::Cnjgl { vs } => vs,
        CohubArtifacts::Estimates { thetas } => thetas,
    };
    let p = mats.first().map_or(0, Mat::ncols);
    if mats.is_empty() || mats.iter().any(|m| m.shape() != (p, p)) {
        return Err(NjglError::Dimension(
            "co-hub scoring needs square matrices of one size".into(),
        ));
    }
    check_index(truth_idx, p)?;
    let scores: Vec<Vec<f64>> = mats.iter().map(column_scores).collect();
    let thresholds = scores
        .iter()
        .map(|s| score_threshold(s, cfg.ts_multiplier))
        .collect::<Vec<_>>();
    let (positives, true_count) = declared(&scores, &thresholds, truth_idx);
    Ok(NodeScores {
        count: positives.len(),
        scores,
        thresholds,
        positives,
        true_count,
    })
}

/// All table metrics for one fit. The perturbed rule uses `V̂` for PNJGL and
/// `Θ̂1 − Θ̂2` otherwise; the co-hub rule uses `V̂^k` for CNJGL and `Θ̂^k`
/// otherwise.
pub fn metric_report(
    truth: &GroundTruth,
    method: Method,
    fit: &PrecisionSet,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let (positive_edges, true_positive_edges) = edge_metrics(&truth.thetas, &fit.thetas, cfg)?;
    let frob = frobenius_error(&truth.thetas, &fit.thetas)?;
    let decomposition = fit.decomposition.as_deref();

    let pert_art = match (method, decomposition) {
        (Method::Pnjgl, Some([v])) => PerturbedArtifacts::Pnjgl { v },
        (Method::Pnjgl, _) => {
            return Err(NjglError::Validation(
                "PNJGL metrics need the fitted V".into(),
            ))
        }
        _ => {
            if fit.thetas.len() != 2 {
                return Err(NjglError::Validation(
                    "perturbed-node metrics need two classes".into(),
                ));
            }
            PerturbedArtifacts::Difference {
                theta1: &fit.thetas[0],
                theta2: &fit.thetas[1],
            }
        }
    };
    let cohub_art = match (method, decomposition) {
        (Method::Cnjgl, Some(vs)) => CohubArtifacts::Cnjgl { vs },
        (Method::Cnjgl, None) => {
            return Err(NjglError::Validation(
                "CNJGL metrics need the fitted V matrices".into(),
            ))
        }
        _ => CohubArtifacts::Estimates {
            thetas: &fit.thetas,
        },
    };
    let pert = perturbed_node_scores(pert_art, &truth.perturbed_idx, cfg)?;
    let cohub = cohub_node_scores(cohub_art, &truth.cohub_idx, cfg)?;

    let mut column_scores = BTreeMap::new();
    column_scores.insert("perturbed".to_string(), pert.scores[0].clone());
    for (k, s) in cohub.scores.iter().enumerate() {
        column_scores.insert(format!("cohub_{}", k + 1), s.clone());
    }
    Ok(MetricReport {
        positive_edges,
        true_positive_edges,
        ppc: pert.count,
        tppc: pert.true_count,
        pcc: cohub.count,
        tpcc: cohub.true_count,
        frobenius_error: frob,
        column_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean over folds of `Σ_k log det Θ̂^k − tr(S^k_test Θ̂^k)`.
    pub mean_loglik: f64,
    pub fold_logliks: Vec<f64>,
    pub mean_positive_edges: f64,
    pub not_converged: usize,
}

/// Fold label of each row, per class: a seeded shuffle, then rank modulo `folds`.
pub fn fold_assignment(counts: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    counts
        .iter()
        .map(|&n| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut labels = vec![0; n];
            for (rank, &row) in order.iter().enumerate() {
                labels[row] = rank % folds;
            }
            labels
        })
        .collect()
}

fn select_rows(x: &Mat, rows: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

fn centered_covariance(x: &Mat, mean: &nalgebra::RowDVector<f64>) -> Mat {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean;
    }
    (c.transpose() * &c) / x.nrows() as f64
}

struct FoldData {
    train: EmpiricalModel,
    test: Vec<Mat>,
}

fn split(raw: &[Mat], labels: &[Vec<usize>], fold: usize) -> Result<FoldData> {
    let mut train = Vec::with_capacity(raw.len());
    let mut test = Vec::with_capacity(raw.len());
    for (x, lab) in raw.iter().zip(labels) {
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&r| lab[r] != fold);
        let xtr = select_rows(x, &tr);
        let xte = select_rows(x, &te);
        let mean = xtr.row_mean();
        test.push(centered_covariance(&xte, &mean));
        train.push((sample_covariance(&xtr), tr.len() as f64));
    }
    Ok(FoldData {
        train: EmpiricalModel::new(train)?,
        test,
    })
}

/// Held-out log-likelihood and edge counts over a `(λ1, λ2)` grid.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    raw: &[Mat],
    method: Method,
    q: GroupNorm,
    grid: &[(f64, f64)],
    folds: usize,
    seed: u64,
    opts: &AdmmOptions,
    metric: &MetricConfig,
) -> Result<Vec<CvRow>> {
    if folds < 2 {
        return Err(NjglError::Validation(format!(
            "folds must be >= 2, got {folds}"
        )));
    }
    method.check_classes(raw.len())?;
    metric.validate()?;
    let p = raw.first().map_or(0, Mat::ncols);
    if p == 0 || raw.iter().any(|x| x.ncols() != p) {
        return Err(NjglError::Dimension(
            "raw data must share a positive column count".into(),
        ));
    }
    if let Some(x) = raw.iter().find(|x| x.nrows() < folds) {
        return Err(NjglError::Validation(format!(
            "class with {} rows cannot be split into {folds} folds",
            x.nrows()
        )));
    }
    let cfgs = grid
        .iter()
        .map(|&(l1, l2)| PenaltyConfig::new(l1, l2, q))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = raw.iter().map(Mat::nrows).collect();
    let labels = fold_assignment(&counts, folds, seed);
    let data = (0..folds)
        .map(|f| split(raw, &labels, f))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfgs.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let results: Vec<Result<(f64, usize, bool)>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let fd = &data[f];
            let (set, diag) = solve_direct(method, &fd.train, &cfgs[g], opts)?;
            let mut ll = 0.0;
            for (theta, s_te) in set.thetas.iter().zip(&fd.test) {
                ll += match log_det_spd(theta) {
                    Some(ld) => ld - inner(s_te, theta),
                    None => f64::NEG_INFINITY,
                };
            }
            let (edges, _) = edge_metrics(&set.thetas, &set.thetas, metric)?;
            Ok((ll, edges, diag.converged()))
        })
        .collect();

    let mut rows = Vec::with_capacity(cfgs.len());
    let mut it = results.into_iter();
    for cfg in &cfgs {
        let mut fold_logliks = Vec::with_capacity(folds);
        let (mut edges, mut not_converged) = (0usize, 0usize);
        for _ in 0..folds {
            let (ll, e, ok) = it.next().expect("one result per job")?;
            fold_logliks.push(ll);
            edges += e;
            not_converged += usize::from(!ok);
        }
        rows.push(CvRow {
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            mean_loglik: fold_logliks.iter().sum::<f64>() / folds as f64,
            fold_logliks,
            mean_positive_edges: edges as f64 / folds as f64,
            not_converged,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_of_constant_scores_is_the_constant() {
        assert_eq!(score_threshold(&[0.0; 5], 5.5), 0.0);
        assert!((score_threshold(&[2.0; 4], 5.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn folds_are_balanced() {
        let labels = fold_assignment(&[11, 7], 5, 3);
        for lab in &labels {
            for f in 0..5 {
                let c = lab.iter().filter(|&&l| l == f).count();
                assert!(c == lab.len() / 5 || c == lab.len() / 5 + 1);
            }
        }
    }
}
