#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type Mat = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha20Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

pub fn rand_sym(rng: &mut ChaCha20Rng, p: usize) -> Mat {
    let a = rand_mat(rng, p, p);
    (&a + a.transpose()) * 0.5
}

pub fn rand_spd(rng: &mut ChaCha20Rng, p: usize) -> Mat {
    let b = rand_mat(rng, p, p);
    b.transpose() * &b / p as f64 + Mat::identity(p, p) * 0.5
}

/// Covariance of `n` draws of a random sparse-ish model.
pub fn rand_cov(rng: &mut ChaCha20Rng, p: usize, n: usize) -> Mat {
    let x = rand_mat(rng, n, p);
    let mut c = x.clone();
    let mean = x.row_mean();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.transpose() * &c / n as f64
}

pub fn lu_inverse(a: &Mat) -> Mat {
    a.clone().lu().try_inverse().expect("invertible")
}

/// `log det` from an LU factorization.
pub fn lu_logdet(a: &Mat) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    let det_sign = lu.determinant().signum();
    assert!(det_sign > 0.0, "determinant must be positive");
    u.diagonal().iter().map(|d| d.abs().ln()).sum()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).abs().max()
}

pub fn rel_frob(a: &Mat, reference: &Mat) -> f64 {
    (a - reference).norm() / reference.norm().max(1.0)
}

/// Minimizes a convex function of one variable on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

pub fn is_spd(a: &Mat) -> bool {
    a.clone().cholesky().is_some()
}

/// Random orthogonal matrix from the QR factorization of a random matrix.
pub fn rand_orthogonal(rng: &mut ChaCha20Rng, p: usize) -> Mat {
    rand_mat(rng, p, p).qr().q()
}

pub fn permutation(rng: &mut ChaCha20Rng, p: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..p).collect();
    v.shuffle(rng);
    v
}

/// `P A Pᵀ` with `(P A Pᵀ)[i, j] = A[perm[i], perm[j]]`.
pub fn permute(a: &Mat, perm: &[usize]) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], perm[j])])
}

/// Zero crossing of a nondecreasing function on `[lo, hi]` by bisection.
pub fn bisect_root(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sgn_right(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `argmin_x ½(x − a)² + λ|x|` from the sign change of the right derivative.
pub fn scalar_l1_oracle(a: f64, lam: f64) -> f64 {
    let r = a.abs() + lam + 1.0;
    let x = bisect_root(|x| x - a + lam * sgn_right(x), -r, r);
    // The right derivative jumps by 2λ at zero; snap to the kink when it brackets zero.
    if (-a - lam) < 0.0 && (-a + lam) >= 0.0 {
        0.0
    } else {
        x
    }
}

/// `argmin_x ½‖x − a‖² + λ‖x‖₂`: for fixed `‖x‖ = r` the best `x` is `r a/‖a‖`
/// (Cauchy–Schwarz), leaving a one-dimensional problem in `r ≥ 0`.
pub fn column_l2_oracle(a: &[f64], lam: f64) -> Vec<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 {
        return vec![0.0; a.len()];
    }
    let deriv = |r: f64| r - na + lam;
    let r = if deriv(0.0) >= 0.0 {
        0.0
    } else {
        bisect_root(deriv, 0.0, na)
    };
    a.iter().map(|x| r * x / na).collect()
}

/// `argmin_x ½‖x − a‖² + λ‖x‖_∞`: for fixed `‖x‖_∞ = t` the best `x` clips `a`
/// to `[−t, t]`; the cost in `t` is convex with derivative `λ − Σ (|a_i| − t)_+`.
pub fn column_linf_oracle(a: &[f64], lam: f64) -> Vec<f64> {
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let deriv = |t: f64| lam - a.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
    let t = if deriv(0.0) >= 0.0 {
        0.0
    } else {
        bisect_root(deriv, 0.0, amax)
    };
    a.iter().map(|x| x.clamp(-t, t)).collect()
}

/// Cyclic coordinate minimization of `½‖x − a‖² + λ1‖x‖₁ + λ2‖x‖₂`, each
/// coordinate solved by bisection on its right derivative.
pub fn sparse_group_oracle(a: &[f64], lam1: f64, lam2: f64) -> Vec<f64> {
    let mut x = a.to_vec();
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for k in 0..x.len() {
            let c2: f64 = x
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, v)| v * v)
                .sum();
            let ak = a[k];
            let right = |t: f64| {
                let g = if c2 == 0.0 {
                    sgn_right(t)
                } else {
                    t / (t * t + c2).sqrt()
                };
                t - ak + lam1 * sgn_right(t) + lam2 * g
            };
            let left_at_zero = -ak - lam1 - if c2 == 0.0 { lam2 } else { 0.0 };
            let new = if left_at_zero <= 0.0 && right(0.0) >= 0.0 {
                0.0
            } else {
                let r = ak.abs() + lam1 + lam2 + 1.0;
                bisect_root(right, -r, r)
            };
            moved = moved.max((new - x[k]).abs());
            x[k] = new;
        }
        if moved < 1e-15 {
            break;
        }
    }
    x
}

/// `‖−n Θ^{-1} + 2ρ(Θ − A)‖_F` with an LU inverse.
pub fn expand_stationarity(theta: &Mat, a: &Mat, rho: f64, n: f64) -> f64 {
    (lu_inverse(theta) * (-n) + (theta - a) * (2.0 * rho)).norm()
}
