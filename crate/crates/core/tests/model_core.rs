mod common;

use common::*;
use njgl::linalg::off_diag;
use njgl::model::{
    cnjgl_objective, gl_objective, neg_log_likelihood, pnjgl_objective, BlockPartition,
    EmpiricalModel, GroupNorm, PenaltyConfig,
};
use njgl::NjglError;

fn model_of(classes: &[(Mat, f64)]) -> EmpiricalModel {
    EmpiricalModel::new(classes.to_vec()).unwrap()
}

#[test]
fn likelihood_at_identity() {
    let p = 4;
    let m = model_of(&[(Mat::identity(p, p), 3.0), (Mat::identity(p, p), 5.0)]);
    let v = neg_log_likelihood(&m, &[Mat::identity(p, p), Mat::identity(p, p)]).unwrap();
    assert!((v - 8.0 * p as f64).abs() < 1e-12);
}

#[test]
fn likelihood_at_inverse_covariance() {
    let mut r = rng(1);
    let s = rand_spd(&mut r, 5);
    let m = model_of(&[(s.clone(), 7.0)]);
    let v = neg_log_likelihood(&m, &[lu_inverse(&s)]).unwrap();
    let want = 7.0 * (lu_logdet(&s) + 5.0);
    assert!((v - want).abs() <= 1e-10 * want.abs().max(1.0));
}

#[test]
fn likelihood_matches_lu_oracle() {
    let mut r = rng(2);
    let (s1, s2) = (rand_spd(&mut r, 4), rand_spd(&mut r, 4));
    let (t1, t2) = (rand_spd(&mut r, 4), rand_spd(&mut r, 4));
    let m = model_of(&[(s1.clone(), 10.0), (s2.clone(), 4.0)]);
    let v = neg_log_likelihood(&m, &[t1.clone(), t2.clone()]).unwrap();
    let trace = |s: &Mat, t: &Mat| (s * t).trace();
    let want =
        10.0 * (-lu_logdet(&t1) + trace(&s1, &t1)) + 4.0 * (-lu_logdet(&t2) + trace(&s2, &t2));
    assert!((v - want).abs() <= 1e-10 * want.abs());
}

#[test]
fn likelihood_names_the_indefinite_class() {
    let p = 3;
    let m = model_of(&[(Mat::identity(p, p), 1.0), (Mat::identity(p, p), 1.0)]);
    let mut bad = Mat::identity(p, p);
    bad[(2, 2)] = -1.0;
    match neg_log_likelihood(&m, &[Mat::identity(p, p), bad]) {
        Err(NjglError::NotPositiveDefinite { class }) => assert_eq!(class, 1),
        other => panic!("expected NotPositiveDefinite, got {other:?}"),
    }
}

#[test]
fn likelihood_is_strictly_convex_at_midpoints() {
    let mut r = rng(3);
    for _ in 0..20 {
        let s = rand_spd(&mut r, 5);
        let m = model_of(&[(s, 6.0)]);
        let (a, b) = (rand_spd(&mut r, 5), rand_spd(&mut r, 5));
        let mid = (&a + &b) * 0.5;
        let f = |t: &Mat| neg_log_likelihood(&m, std::slice::from_ref(t)).unwrap();
        assert!(f(&mid) < 0.5 * (f(&a) + f(&b)));
    }
}

#[test]
fn pnjgl_objective_examples() {
    let mut r = rng(4);
    let (s1, s2) = (rand_spd(&mut r, 4), rand_spd(&mut r, 4));
    let m = model_of(&[(s1, 9.0), (s2, 9.0)]);
    let t = rand_spd(&mut r, 4);
    let cfg = PenaltyConfig::new(0.3, 0.7, GroupNorm::L2).unwrap();
    let zero = Mat::zeros(4, 4);
    let nll = neg_log_likelihood(&m, &[t.clone(), t.clone()]).unwrap();
    let got = pnjgl_objective(&m, &t, &t, &zero, &cfg).unwrap();
    assert!((got - (nll + 2.0 * 0.3 * t.abs().sum())).abs() < 1e-10);

    let t2 = rand_spd(&mut r, 4);
    let free = PenaltyConfig::new(0.0, 0.0, GroupNorm::L2).unwrap();
    let half = (&t - &t2) * 0.5;
    let got = pnjgl_objective(&m, &t, &t2, &half, &free).unwrap();
    assert!((got - neg_log_likelihood(&m, &[t.clone(), t2.clone()]).unwrap()).abs() < 1e-10);

    let q1 = PenaltyConfig::new(0.0, 0.7, GroupNorm::L1).unwrap();
    let got = pnjgl_objective(&m, &t, &t2, &half, &q1).unwrap();
    let want =
        neg_log_likelihood(&m, &[t.clone(), t2.clone()]).unwrap() + 0.35 * (&t - &t2).abs().sum();
    assert!((got - want).abs() < 1e-10);
}

#[test]
fn pnjgl_objective_rejects_infeasible_decomposition() {
    let p = 3;
    let m = model_of(&[(Mat::identity(p, p), 1.0), (Mat::identity(p, p), 1.0)]);
    let cfg = PenaltyConfig::new(0.1, 0.1, GroupNorm::L2).unwrap();
    let t2 = Mat::identity(p, p) * 2.0;
    match pnjgl_objective(&m, &Mat::identity(p, p), &t2, &Mat::zeros(p, p), &cfg) {
        Err(NjglError::Constraint { residual, .. }) => assert!(residual > 0.1),
        other => panic!("expected constraint error, got {other:?}"),
    }
}

#[test]
fn cnjgl_objective_examples() {
    let mut r = rng(5);
    let s = rand_spd(&mut r, 4);
    let m = model_of(&[(s.clone(), 5.0), (s.clone(), 8.0)]);
    let d1 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5]));
    let d2 = Mat::identity(4, 4) * 1.2;
    let cfg = PenaltyConfig::new(0.4, 3.0, GroupNorm::Linf).unwrap();
    let zero = Mat::zeros(4, 4);
    let got = cnjgl_objective(&m, &[d1.clone(), d2.clone()], &[zero.clone(), zero], &cfg).unwrap();
    let want = neg_log_likelihood(&m, &[d1.clone(), d2.clone()]).unwrap()
        + 0.4 * (d1.abs().sum() + d2.abs().sum());
    assert!((got - want).abs() < 1e-10);

    // K = 1, q = 1: the off-diagonal penalty becomes λ1 + λ2/2.
    let single = model_of(&[(s.clone(), 5.0)]);
    let t = rand_spd(&mut r, 4);
    let (l1, l2) = (0.4, 1.0);
    let cfg = PenaltyConfig::new(l1, l2, GroupNorm::L1).unwrap();
    let got = cnjgl_objective(
        &single,
        std::slice::from_ref(&t),
        &[off_diag(&t) * 0.5],
        &cfg,
    )
    .unwrap();
    let want = gl_objective(&s, 5.0, &t, l1, l1 + l2 / 2.0).unwrap();
    assert!((got - want).abs() < 1e-10);

    // λ2 = 0: a sum of independent graphical-lasso objectives.
    let (t1, t2) = (rand_spd(&mut r, 4), rand_spd(&mut r, 4));
    let cfg = PenaltyConfig::new(0.2, 0.0, GroupNorm::L2).unwrap();
    let vs = [off_diag(&t1) * 0.5, off_diag(&t2) * 0.5];
    let got = cnjgl_objective(&m, &[t1.clone(), t2.clone()], &vs, &cfg).unwrap();
    let want = gl_objective(&s, 5.0, &t1, 0.2, 0.2).unwrap()
        + gl_objective(&s, 8.0, &t2, 0.2, 0.2).unwrap();
    assert!((got - want).abs() < 1e-9);
}

#[test]
fn objectives_are_permutation_invariant() {
    let mut r = rng(6);
    let p = 5;
    let (s1, s2) = (rand_spd(&mut r, p), rand_spd(&mut r, p));
    let t1 = rand_spd(&mut r, p);
    let v = rand_mat(&mut r, p, p);
    let t2v = &t1 - (&v + v.transpose());
    // Keep Θ2 positive definite by shifting both by the same multiple of I.
    let shift = Mat::identity(p, p) * 20.0;
    let (t1, t2v) = (&t1 + &shift, &t2v + &shift);
    let perm = permutation(&mut r, p);
    let cfg = PenaltyConfig::new(0.3, 0.6, GroupNorm::L2).unwrap();
    let m = model_of(&[(s1.clone(), 4.0), (s2.clone(), 6.0)]);
    let mp = model_of(&[(permute(&s1, &perm), 4.0), (permute(&s2, &perm), 6.0)]);
    let a = pnjgl_objective(&m, &t1, &t2v, &v, &cfg).unwrap();
    let b = pnjgl_objective(
        &mp,
        &permute(&t1, &perm),
        &permute(&t2v, &perm),
        &permute(&v, &perm),
        &cfg,
    )
    .unwrap();
    assert!((a - b).abs() <= 1e-9 * a.abs());
}

#[test]
fn model_symmetrizes_and_validates() {
    let mut s = Mat::identity(3, 3);
    s[(0, 1)] = 0.2;
    let m = EmpiricalModel::new(vec![(s, 2.0)]).unwrap();
    assert_eq!(m.covariance(0)[(0, 1)], 0.1);
    assert_eq!(m.covariance(0)[(1, 0)], 0.1);
    assert!(EmpiricalModel::new(vec![(Mat::identity(3, 3), 0.5)]).is_err());
    assert!(
        EmpiricalModel::new(vec![(Mat::identity(3, 3), 2.0), (Mat::identity(2, 2), 2.0)]).is_err()
    );
    assert!(EmpiricalModel::new(vec![]).is_err());
}

#[test]
fn penalty_config_dual_exponent() {
    assert!(PenaltyConfig::new(0.1, 0.1, GroupNorm::L1)
        .unwrap()
        .s()
        .is_infinite());
    assert_eq!(
        PenaltyConfig::new(0.1, 0.1, GroupNorm::L2).unwrap().s(),
        2.0
    );
    assert_eq!(
        PenaltyConfig::new(0.1, 0.1, GroupNorm::Linf).unwrap().s(),
        1.0
    );
    assert!(PenaltyConfig::new(-0.1, 0.1, GroupNorm::L2).is_err());
    assert!(PenaltyConfig::new(0.1, f64::NAN, GroupNorm::L2).is_err());
}

#[test]
fn block_partition_validation() {
    assert!(BlockPartition::new(4, vec![vec![0, 1], vec![2]]).is_err());
    assert!(BlockPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    assert!(BlockPartition::new(3, vec![vec![0, 1], vec![], vec![2]]).is_err());
    let b = BlockPartition::new(4, vec![vec![3, 1], vec![2, 0]]).unwrap();
    assert_eq!(b.blocks(), &[vec![0, 2], vec![1, 3]]);
    assert_eq!(b.complement_size(), 8);
}
