mod common;

use std::collections::VecDeque;

use common::*;
use njgl::datagen::{
    community_bounds, erdos_base, gen_community, gen_erdos, gen_scalefree, generate,
    sample_covariance, sample_gaussian, scalefree_edges, GenConfig, Network, EDGE_PROBABILITY,
    SCALE_FREE_LINKS,
};

fn min_eig(a: &Mat) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

fn degrees(p: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut d = vec![0; p];
    for &(i, j) in edges {
        d[i] += 1;
        d[j] += 1;
    }
    d
}

fn is_connected(p: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![vec![]; p];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[test]
fn erdos_edge_fraction_is_binomial() {
    let p = 200;
    let mut r = rng(71);
    let a = erdos_base(p, EDGE_PROBABILITY, &mut r);
    let pairs = (p * (p - 1) / 2) as f64;
    let count = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .filter(|&(i, j)| a[(i, j)] != 0.0)
        .count() as f64;
    let mean = pairs * EDGE_PROBABILITY;
    let sd = (pairs * EDGE_PROBABILITY * (1.0 - EDGE_PROBABILITY)).sqrt();
    assert!(
        (count - mean).abs() <= 3.0 * sd,
        "{count} edges, expected {mean} ± {}",
        3.0 * sd
    );
    for v in a.iter().filter(|v| **v != 0.0) {
        assert!((0.3..=0.6).contains(&v.abs()), "{v}");
    }
    assert_eq!(a, a.transpose());
    assert!(a.diagonal().iter().all(|&d| d == 0.0));
}

#[test]
fn generated_truths_have_min_eigenvalue_at_least_point_one() {
    for seed in 0..5 {
        for d in [
            gen_erdos(40, 10, seed).unwrap(),
            gen_scalefree(40, 10, seed).unwrap(),
            gen_community(40, 10, seed).unwrap(),
        ] {
            assert!(min_eig(&d.truth.theta1) >= 0.1 - 1e-9);
            assert!(min_eig(&d.truth.theta2) >= 0.1 - 1e-9);
            assert!((min_eig(&d.truth.theta1).min(min_eig(&d.truth.theta2)) - 0.1).abs() < 1e-9);
        }
    }
}

#[test]
fn scalefree_graph_is_connected_with_expected_edge_count() {
    let mut r = rng(72);
    for p in [10, 50, 200] {
        let edges = scalefree_edges(p, SCALE_FREE_LINKS, &mut r);
        assert!(is_connected(p, &edges));
        assert!(edges.len() >= p - 1 && edges.len() <= 2 * p);
        assert_eq!(edges.len(), 2 * p - 3);
        let mut sorted: Vec<_> = edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), edges.len(), "duplicate edge");
    }
}

#[test]
fn scalefree_degrees_are_heavy_tailed() {
    let p = 200;
    for seed in 0..50 {
        let mut r = rng(1000 + seed);
        let mut d = degrees(p, &scalefree_edges(p, SCALE_FREE_LINKS, &mut r));
        let max = *d.iter().max().unwrap();
        d.sort_unstable();
        let median = (d[p / 2 - 1] + d[p / 2]) as f64 / 2.0;
        assert!(
            max as f64 >= 3.0 * median,
            "seed {seed}: max {max}, median {median}"
        );
    }
}

#[test]
fn community_mask_is_exactly_zero() {
    let p = 100;
    let (lo, hi) = community_bounds(p);
    assert_eq!((lo, hi), (40, 60));
    for seed in 0..5 {
        let d = gen_community(p, 10, seed).unwrap();
        for t in [&d.truth.theta1, &d.truth.theta2] {
            for i in 0..p {
                for j in 0..p {
                    let in_block = (i < hi && j < hi) || (i >= lo && j >= lo);
                    if !in_block {
                        assert_eq!(t[(i, j)], 0.0, "({i},{j})");
                    }
                }
            }
        }
    }
}

#[test]
fn identical_seeds_are_bitwise_identical() {
    for network in [Network::Erdos, Network::Scalefree, Network::Community] {
        let cfg = GenConfig::new(network, 30, 20, 99);
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_eq!(a.truth.theta1, b.truth.theta1);
        assert_eq!(a.truth.theta2, b.truth.theta2);
        assert_eq!(a.x1, b.x1);
        assert_eq!(a.s2, b.s2);
        assert_eq!(a.truth.perturbed_idx, b.truth.perturbed_idx);
        let c = generate(&GenConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.x1, c.x1);
    }
}

#[test]
fn truths_differ_only_on_perturbed_rows_and_columns() {
    for seed in 0..10 {
        let d = gen_erdos(30, 10, seed).unwrap();
        let t = &d.truth;
        let special = |i: usize| t.perturbed_idx.contains(&i);
        for i in 0..30 {
            for j in 0..30 {
                if !special(i) && !special(j) {
                    assert_eq!(t.theta1[(i, j)], t.theta2[(i, j)]);
                }
            }
        }
        for &c in &t.cohub_idx {
            let dense = (0..30)
                .filter(|&j| j != c && t.theta1[(c, j)] != 0.0)
                .count();
            // Perturbed nodes may overwrite a co-hub's entry in one class, never more than that.
            assert!(dense >= 29 - t.perturbed_idx.len());
            for j in 0..30 {
                if !special(j) {
                    assert_eq!(t.theta1[(c, j)], t.theta2[(c, j)]);
                }
            }
        }
        assert_eq!(t.perturbed_idx.len(), 2);
        assert_eq!(t.cohub_idx.len(), 2);
    }
}

#[test]
fn sample_covariance_is_consistent() {
    let cfg = GenConfig::new(Network::Erdos, 20, 10_000, 5);
    let d = generate(&cfg).unwrap();
    for (s, theta) in [(&d.s1, &d.truth.theta1), (&d.s2, &d.truth.theta2)] {
        let sigma = lu_inverse(theta);
        let rel = (s - &sigma).norm() / sigma.norm();
        assert!(rel <= 0.1, "{rel}");
    }
}

#[test]
fn sample_covariance_centers_columns() {
    let mut r = rng(73);
    let theta = rand_spd(&mut r, 4);
    let x = sample_gaussian(&theta, 50, &mut r).unwrap();
    let shifted = x.map(|v| v + 3.0);
    assert!(max_abs_diff(&sample_covariance(&x), &sample_covariance(&shifted)) < 1e-10);
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let direct = c.transpose() * &c / 50.0;
    assert!(max_abs_diff(&sample_covariance(&x), &direct) < 1e-12);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(gen_erdos(7, 10, 0).is_err());
    assert!(gen_erdos(8, 1, 0).is_err());
    assert!(gen_erdos(8, 2, 0).is_ok());
    assert!("lattice".parse::<Network>().is_err());
}
