//! Block-diagonal screening: the thresholded screen graph, its connected
//! components, the necessary and sufficient conditions on a partition, and
//! decompose-solve-reassemble.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmOptions, Diagnostics};
use crate::baselines::{merge_diagnostics, solve_fgl, solve_ggl, solve_gl_classes};
use crate::cnjgl::solve_cnjgl;
use crate::error::{NjglError, Result};
use crate::linalg::Mat;
use crate::model::{BlockPartition, EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet};
use crate::pnjgl::solve_pnjgl;
use crate::rcon::RconCertificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pnjgl,
    Cnjgl,
    Fgl,
    Ggl,
    Gl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pnjgl => "pnjgl",
            Method::Cnjgl => "cnjgl",
            Method::Fgl => "fgl",
            Method::Ggl => "ggl",
            Method::Gl => "gl",
        }
    }

    /// Rejects class counts the method cannot handle.
    pub fn check_classes(self, k: usize) -> Result<()> {
        let ok = match self {
            Method::Pnjgl | Method::Fgl => k == 2,
            Method::Ggl => k >= 2,
            Method::Cnjgl | Method::Gl => k >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(NjglError::Validation(format!(
                "method {} cannot be used with {k} classes",
                self.name()
            )))
        }
    }
}

impl std::str::FromStr for Method {
    type Err = NjglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pnjgl" => Ok(Method::Pnjgl),
            "cnjgl" => Ok(Method::Cnjgl),
            "fgl" => Ok(Method::Fgl),
            "ggl" => Ok(Method::Ggl),
            "gl" => Ok(Method::Gl),
            other => Err(NjglError::Validation(format!(
                "method must be one of pnjgl, cnjgl, fgl, ggl, gl; got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solves the full problem without screening. `q` is ignored by the baselines
/// and GL ignores `λ2`.
pub fn solve_direct(
    method: Method,
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
) -> Result<(PrecisionSet, Diagnostics)> {
    method.check_classes(model.k())?;
    match method {
        Method::Pnjgl => solve_pnjgl(model, cfg, opts, None),
        Method::Cnjgl => solve_cnjgl(model, cfg, opts, None),
        Method::Fgl => solve_fgl(model, cfg.lambda1, cfg.lambda2, opts),
        Method::Ggl => solve_ggl(model, cfg.lambda1, cfg.lambda2, opts),
        Method::Gl => solve_gl_classes(model, cfg.lambda1, opts),
    }
}

/// Symmetric boolean adjacency with a true diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenGraph {
    p: usize,
    adj: Vec<bool>,
}

impl ScreenGraph {
    pub fn from_fn(p: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut adj = vec![false; p * p];
        for i in 0..p {
            for j in 0..p {
                adj[i * p + j] = i == j || f(i, j) || f(j, i);
            }
        }
        Self { p, adj }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }
}

/// `A_ij = 1` iff `i = j` or `n_k |S^k_ij| > λ1` for some class `k`.
pub fn build_screen_graph(model: &EmpiricalModel, lambda1: f64) -> Result<ScreenGraph> {
    if !(lambda1 >= 0.0) {
        return Err(NjglError::Validation(format!(
            "lambda1 must be >= 0, got {lambda1}"
        )));
    }
    Ok(ScreenGraph::from_fn(model.p(), |i, j| {
        (0..model.k()).any(|k| model.count(k) * model.covariance(k)[(i, j)].abs() > lambda1)
    }))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Maximal connected components, blocks ordered by smallest member.
pub fn connected_components(graph: &ScreenGraph) -> BlockPartition {
    let p = graph.p();
    let mut parent: Vec<usize> = (0..p).collect();
    for i in 0..p {
        for j in (i + 1)..p {
            if graph.edge(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); p];
    for i in 0..p {
        let r = find(&mut parent, i);
        by_root[r].push(i);
    }
    let blocks = by_root.into_iter().filter(|b| !b.is_empty()).collect();
    BlockPartition::new(p, blocks).expect("components form a partition")
}

/// Partition induced by screening at `λ1`.
pub fn screen_partition(model: &EmpiricalModel, lambda1: f64) -> Result<BlockPartition> {
    Ok(connected_components(&build_screen_graph(model, lambda1)?))
}

/// Which block-diagonality conditions hold for a partition.
#[derive(Debug, Clone, Serialize)]
pub struct ScreenReport {
    pub partition: BlockPartition,
    /// `n_k |S^k_ij| ≤ λ1` on `T^c` for every class.
    pub sufficient_holds: bool,
    /// `n_k |S^k_ij| ≤ λ1 + λ2/2` on `T^c` for every class.
    pub necessary_basic: bool,
    /// `|n1 S^1_ij + n2 S^2_ij| ≤ 2λ1` on `T^c`; two-class perturbed-node model only.
    pub necessary_sum: Option<bool>,
    /// `(n_k/|T^c|) Σ_{T^c} |S^k_ij| ≤ λ1 + (λ2/2)(p/|T^c|)^{1/s}`; only for `q > 1`.
    pub necessary_aggregate: Option<bool>,
    /// For `q = 1`, `K = 2` the basic and sum conditions together are also sufficient.
    pub q1_k2_exact: Option<bool>,
    /// Large-`p` form of the aggregate bound, `(n_k/|T^c|) Σ |S^k_ij| ≤ λ1`. Informational only.
    pub asymptotic_aggregate: Option<bool>,
    pub complement_size: usize,
    pub block_sizes: Vec<usize>,
}

impl ScreenReport {
    pub fn necessary_all(&self) -> bool {
        self.necessary_basic
            && self.necessary_sum.unwrap_or(true)
            && self.necessary_aggregate.unwrap_or(true)
    }
}

fn complement_pairs(partition: &BlockPartition) -> Vec<(usize, usize)> {
    let labels = partition.labels();
    let p = partition.p();
    let mut out = Vec::with_capacity(partition.complement_size());
    for j in 0..p {
        for i in 0..p {
            if labels[i] != labels[j] {
                out.push((i, j));
            }
        }
    }
    out
}

fn check_partition(model: &EmpiricalModel, partition: &BlockPartition) -> Result<()> {
    if partition.p() != model.p() {
        return Err(NjglError::Dimension(format!(
            "partition covers {} indices, model has p = {}",
            partition.p(),
            model.p()
        )));
    }
    Ok(())
}

/// `n_k |S^k_ij| ≤ λ1` for every cross-block entry and class.
pub fn check_sufficient(
    model: &EmpiricalModel,
    lambda1: f64,
    partition: &BlockPartition,
) -> Result<bool> {
    check_partition(model, partition)?;
    Ok(complement_pairs(partition).iter().all(|&(i, j)| {
        (0..model.k()).all(|k| model.count(k) * model.covariance(k)[(i, j)].abs() <= lambda1)
    }))
}

fn report(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    partition: &BlockPartition,
    with_sum: bool,
) -> Result<ScreenReport> {
    cfg.validate()?;
    check_partition(model, partition)?;
    let pairs = complement_pairs(partition);
    let (l1, l2) = (cfg.lambda1, cfg.lambda2);
    let k_range = 0..model.k();
    let nabs = |k: usize, i: usize, j: usize| model.count(k) * model.covariance(k)[(i, j)].abs();

    let sufficient_holds = pairs
        .iter()
        .all(|&(i, j)| k_range.clone().all(|k| nabs(k, i, j) <= l1));
    let necessary_basic = pairs
        .iter()
        .all(|&(i, j)| k_range.clone().all(|k| nabs(k, i, j) <= l1 + l2 / 2.0));
    let necessary_sum = with_sum.then(|| {
        pairs.iter().all(|&(i, j)| {
            (model.count(0) * model.covariance(0)[(i, j)]
                + model.count(1) * model.covariance(1)[(i, j)])
                .abs()
                <= 2.0 * l1
        })
    });
    let tc = pairs.len();
    let means: Vec<f64> = k_range
        .clone()
        .map(|k| {
            if tc == 0 {
                0.0
            } else {
                pairs.iter().map(|&(i, j)| nabs(k, i, j)).sum::<f64>() / tc as f64
            }
        })
        .collect();
    let (necessary_aggregate, asymptotic_aggregate) = if cfg.q == GroupNorm::L1 {
        (None, None)
    } else {
        let ratio = if tc == 0 {
            0.0
        } else {
            (model.p() as f64 / tc as f64).powf(1.0 / cfg.s())
        };
        let bound = l1 + 0.5 * l2 * ratio;
        (
            Some(tc == 0 || means.iter().all(|&m| m <= bound)),
            Some(tc == 0 || means.iter().all(|&m| m <= l1)),
        )
    };
    let q1_k2_exact = (with_sum && cfg.q == GroupNorm::L1)
        .then(|| necessary_basic && necessary_sum == Some(true));
    Ok(ScreenReport {
        partition: partition.clone(),
        sufficient_holds,
        necessary_basic,
        necessary_sum,
        necessary_aggregate,
        q1_k2_exact,
        asymptotic_aggregate,
        complement_size: tc,
        block_sizes: partition.blocks().iter().map(Vec::len).collect(),
    })
}

/// Conditions for the two-class perturbed-node model.
pub fn check_necessary_pnjgl(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    partition: &BlockPartition,
) -> Result<ScreenReport> {
    if model.k() != 2 {
        return Err(NjglError::Validation(format!(
            "PNJGL screening requires 2 classes, got {}",
            model.k()
        )));
    }
    report(model, cfg, partition, true)
}

/// Conditions for the co-hub model (no pairwise-sum condition).
pub fn check_necessary_cnjgl(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    partition: &BlockPartition,
) -> Result<ScreenReport> {
    report(model, cfg, partition, false)
}

/// Report matching the method's model; baselines use the co-hub form.
pub fn screen_report(
    method: Method,
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    partition: &BlockPartition,
) -> Result<ScreenReport> {
    match method {
        Method::Pnjgl | Method::Fgl => check_necessary_pnjgl(model, cfg, partition),
        _ => check_necessary_cnjgl(model, cfg, partition),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionDiagnostics {
    pub solver: Diagnostics,
    pub partition: BlockPartition,
    pub block_count: usize,
    pub block_sizes: Vec<usize>,
    pub block_wall_secs: Vec<f64>,
    pub block_converged: Vec<bool>,
    /// `Σ_l |I_l|³ / p³`, the per-iteration cost relative to the full problem.
    pub cost_ratio: f64,
    pub wall_time_secs: f64,
}

fn embed(target: &mut Mat, block: &Mat, idx: &[usize]) {
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            target[(i, j)] = block[(a, b)];
        }
    }
}

/// Screens at `λ1`, solves each block independently (in parallel), and
/// reassembles block-diagonal estimates.
pub fn solve_decomposed(
    method: Method,
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
) -> Result<(PrecisionSet, DecompositionDiagnostics)> {
    method.check_classes(model.k())?;
    let start = Instant::now();
    let partition = screen_partition(model, cfg.lambda1)?;
    let p = model.p();
    let sizes: Vec<usize> = partition.blocks().iter().map(Vec::len).collect();
    let cost_ratio = sizes.iter().map(|&s| (s as f64).powi(3)).sum::<f64>() / (p as f64).powi(3);

    if partition.len() == 1 {
        let (set, diag) = solve_direct(method, model, cfg, opts)?;
        let elapsed = start.elapsed().as_secs_f64();
        let converged = diag.converged();
        return Ok((
            set,
            DecompositionDiagnostics {
                solver: diag,
                partition,
                block_count: 1,
                block_sizes: sizes,
                block_wall_secs: vec![elapsed],
                block_converged: vec![converged],
                cost_ratio,
                wall_time_secs: elapsed,
            },
        ));
    }

    let results: Vec<Result<(PrecisionSet, Diagnostics, f64)>> = partition
        .blocks()
        .par_iter()
        .map(|idx| {
            let t0 = Instant::now();
            let sub = model.restrict(idx);
            let (set, diag) = solve_direct(method, &sub, cfg, opts)?;
            Ok((set, diag, t0.elapsed().as_secs_f64()))
        })
        .collect();

    let k = model.k();
    let mut thetas = vec![Mat::zeros(p, p); k];
    let mut decomposition: Option<Vec<Mat>> = None;
    let mut lambdas: Option<Vec<Mat>> = None;
    let mut diags = Vec::with_capacity(results.len());
    let mut walls = Vec::with_capacity(results.len());
    for (idx, res) in partition.blocks().iter().zip(results) {
        let (set, diag, wall) = res?;
        for (full, part) in thetas.iter_mut().zip(&set.thetas) {
            embed(full, part, idx);
        }
        if let Some(vs) = &set.decomposition {
            let dst = decomposition.get_or_insert_with(|| vec![Mat::zeros(p, p); vs.len()]);
            for (full, part) in dst.iter_mut().zip(vs) {
                embed(full, part, idx);
            }
        }
        if let Some(cert) = &set.duals {
            let dst = lambdas.get_or_insert_with(|| vec![Mat::zeros(p, p); cert.lambdas.len()]);
            for (full, part) in dst.iter_mut().zip(&cert.lambdas) {
                embed(full, part, idx);
            }
        }
        diags.push(diag);
        walls.push(wall);
    }
    let block_converged = diags.iter().map(Diagnostics::converged).collect();
    let mut solver = merge_diagnostics(diags);
    // Residual keys are per block; keep only the worst value under a single key.
    solver.residuals = [("max_block_residual".to_string(), solver.max_residual)]
        .into_iter()
        .collect();
    let duals = lambdas.map(|l| RconCertificate::new(l, cfg.q).into_feasible(cfg.q));
    let set = PrecisionSet {
        thetas,
        decomposition,
        duals,
    };
    Ok((
        set,
        DecompositionDiagnostics {
            solver,
            block_count: partition.len(),
            partition,
            block_sizes: sizes,
            block_wall_secs: walls,
            block_converged,
            cost_ratio,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}
