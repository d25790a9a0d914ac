//! Seeded synthetic benchmarks: two precision matrices sharing a base
//! network, differing on perturbed nodes, with identical co-hub nodes.

use nalgebra::SymmetricEigen;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NjglError, Result};
use crate::linalg::Mat;

/// Identifies the random stream and construction rules used for generation.
pub const GENERATOR_VERSION: &str = "njgl-datagen/1 (ChaCha20, rand 0.9)";

pub const EDGE_PROBABILITY: f64 = 0.02;
pub const SCALE_FREE_LINKS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Erdos,
    Scalefree,
    Community,
}

impl std::str::FromStr for Network {
    type Err = NjglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erdos" => Ok(Network::Erdos),
            "scalefree" => Ok(Network::Scalefree),
            "community" => Ok(Network::Community),
            other => Err(NjglError::Validation(format!(
                "network must be one of erdos, scalefree, community; got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub network: Network,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub n_perturbed: usize,
    pub n_cohub: usize,
}

impl GenConfig {
    pub fn new(network: Network, p: usize, n: usize, seed: u64) -> Self {
        Self {
            network,
            p,
            n,
            seed,
            n_perturbed: 2,
            n_cohub: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 8 || self.p < self.n_perturbed + self.n_cohub {
            return Err(NjglError::Validation(format!(
                "p = {} is too small (need p >= 8 and room for {} special nodes)",
                self.p,
                self.n_perturbed + self.n_cohub
            )));
        }
        if self.n < 2 {
            return Err(NjglError::Validation(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub theta1: Mat,
    pub theta2: Mat,
    pub perturbed_idx: Vec<usize>,
    pub cohub_idx: Vec<usize>,
    pub seed: u64,
    /// The diagonal shift `0.1 + |c|` added to both matrices.
    pub shift: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: GenConfig,
    pub truth: SyntheticTruth,
    pub x1: Mat,
    pub x2: Mat,
    pub s1: Mat,
    pub s2: Mat,
}

/// Draw from `Unif([−0.6, −0.3] ∪ [0.3, 0.6])`.
pub fn edge_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let mag = rng.random_range(0.3..=0.6);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Symmetric Erdős–Rényi weight matrix with zero diagonal.
pub fn erdos_base<R: Rng + ?Sized>(p: usize, prob: f64, rng: &mut R) -> Mat {
    let mut a = Mat::zeros(p, p);
    for j in 0..p {
        for i in (j + 1)..p {
            if rng.random_bool(prob) {
                let w = edge_weight(rng);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    a
}

/// Preferential-attachment edge list: a triangle on nodes 0..3, then each
/// new node links to `m` distinct existing nodes chosen proportionally to degree.
pub fn scalefree_edges<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let seed_nodes = (m + 1).min(p);
    let mut edges = Vec::new();
    // Each node appears once per incident edge, so uniform draws are degree-weighted.
    let mut ends = Vec::new();
    for i in 0..seed_nodes {
        for j in (i + 1)..seed_nodes {
            edges.push((i, j));
            ends.push(i);
            ends.push(j);
        }
    }
    for t in seed_nodes..p {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m.min(t) {
            let cand = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&cand) {
                targets.push(cand);
            }
        }
        for &u in &targets {
            edges.push((u, t));
            ends.push(u);
            ends.push(t);
        }
    }
    edges
}

pub fn scalefree_base<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Mat {
    let mut a = Mat::zeros(p, p);
    for (i, j) in scalefree_edges(p, SCALE_FREE_LINKS, rng) {
        let w = edge_weight(rng);
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    a
}

fn redraw_node<R: Rng + ?Sized>(a: &mut Mat, node: usize, rng: &mut R) {
    for j in 0..a.nrows() {
        if j != node {
            let w = edge_weight(rng);
            a[(node, j)] = w;
            a[(j, node)] = w;
        }
    }
}

/// Upper bound (exclusive) of the first community and lower bound of the second.
pub fn community_bounds(p: usize) -> (usize, usize) {
    (
        (0.4 * p as f64).round() as usize,
        (0.6 * p as f64).round() as usize,
    )
}

fn min_eigenvalue(a: &Mat) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Builds the two true precision matrices from a configured stream.
pub fn generate_truth<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<SyntheticTruth> {
    cfg.validate()?;
    let p = cfg.p;
    let base = match cfg.network {
        Network::Erdos | Network::Community => erdos_base(p, EDGE_PROBABILITY, rng),
        Network::Scalefree => scalefree_base(p, rng),
    };
    let special = sample(rng, p, cfg.n_perturbed + cfg.n_cohub).into_vec();
    let perturbed_idx = special[..cfg.n_perturbed].to_vec();
    let cohub_idx = special[cfg.n_perturbed..].to_vec();

    let mut a1 = base.clone();
    let mut a2 = base;
    for &node in &perturbed_idx {
        if rng.random_bool(0.5) {
            redraw_node(&mut a1, node, rng);
        } else {
            redraw_node(&mut a2, node, rng);
        }
    }
    for &node in &cohub_idx {
        redraw_node(&mut a1, node, rng);
        for j in 0..p {
            a2[(node, j)] = a1[(node, j)];
            a2[(j, node)] = a1[(j, node)];
        }
    }
    if cfg.network == Network::Community {
        let (lo, hi) = community_bounds(p);
        for i in 0..lo {
            for j in hi..p {
                for a in [&mut a1, &mut a2] {
                    a[(i, j)] = 0.0;
                    a[(j, i)] = 0.0;
                }
            }
        }
    }
    let c = min_eigenvalue(&a1).min(min_eigenvalue(&a2));
    let shift = 0.1 + c.abs();
    let eye = Mat::identity(p, p) * shift;
    Ok(SyntheticTruth {
        theta1: a1 + &eye,
        theta2: a2 + eye,
        perturbed_idx,
        cohub_idx,
        seed: cfg.seed,
        shift,
    })
}

/// `n` draws from `N(0, Θ^{-1})`, one per row, via the Cholesky factor of `Θ`.
pub fn sample_gaussian<R: Rng + ?Sized>(theta: &Mat, n: usize, rng: &mut R) -> Result<Mat> {
    let p = theta.nrows();
    let chol = theta
        .clone()
        .cholesky()
        .ok_or(NjglError::NotPositiveDefinite { class: 0 })?;
    let lt = chol.l().transpose();
    let z = Mat::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    // Θ = L Lᵀ, so x = L^{-T} z has covariance Θ^{-1}.
    let x = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| NjglError::Domain("triangular solve failed".into()))?;
    Ok(x.transpose())
}

/// Column-centered covariance with divisor `n`.
pub fn sample_covariance(x: &Mat) -> Mat {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    (centered.transpose() * &centered) / n
}

pub fn generate(cfg: &GenConfig) -> Result<SyntheticDataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let truth = generate_truth(cfg, &mut rng)?;
    let x1 = sample_gaussian(&truth.theta1, cfg.n, &mut rng)?;
    let x2 = sample_gaussian(&truth.theta2, cfg.n, &mut rng)?;
    let s1 = sample_covariance(&x1);
    let s2 = sample_covariance(&x2);
    Ok(SyntheticDataset {
        config: *cfg,
        truth,
        x1,
        x2,
        s1,
        s2,
    })
}

pub fn gen_erdos(p: usize, n: usize, seed: u64) -> Result<SyntheticDataset> {
    generate(&GenConfig::new(Network::Erdos, p, n, seed))
}

pub fn gen_scalefree(p: usize, n: usize, seed: u64) -> Result<SyntheticDataset> {
    generate(&GenConfig::new(Network::Scalefree, p, n, seed))
}

/// Two overlapping communities on `[0, 0.6p)` and `[0.4p, p)`.
pub fn gen_community(p: usize, n: usize, seed: u64) -> Result<SyntheticDataset> {
    generate(&GenConfig::new(Network::Community, p, n, seed))
}

impl SyntheticDataset {
    /// Empirical model built from the two sample covariances.
    pub fn model(&self) -> Result<crate::model::EmpiricalModel> {
        let n = self.config.n as f64;
        crate::model::EmpiricalModel::new(vec![(self.s1.clone(), n), (self.s2.clone(), n)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_makes_min_eigenvalue_at_least_point_one() {
        for seed in 0..5 {
            let d = gen_erdos(30, 10, seed).unwrap();
            assert!(min_eigenvalue(&d.truth.theta1) >= 0.1 - 1e-9);
            assert!(min_eigenvalue(&d.truth.theta2) >= 0.1 - 1e-9);
        }
    }

    #[test]
    fn rejects_small_p() {
        assert!(gen_erdos(7, 10, 0).is_err());
        assert!(gen_erdos(10, 1, 0).is_err());
    }

    #[test]
    fn scalefree_edge_count() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert_eq!(scalefree_edges(50, 2, &mut rng).len(), 2 * 50 - 3);
    }
}
