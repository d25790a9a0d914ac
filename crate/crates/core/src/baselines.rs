//! Comparator methods: graphical lasso, fused graphical lasso and group
//! graphical lasso, all on the same ADMM schedule as the node-based solvers.

use std::collections::BTreeMap;

use crate::admm::{relative_residual, run, AdmmOptions, AdmmProblem, Diagnostics, Status};
use crate::error::{NjglError, Result};
use crate::linalg::{frob, sym, Mat};
use crate::model::{
    ggl_objective, gl_objective, EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet,
};
use crate::pnjgl::solve_pnjgl;
use crate::prox::{expand_sym, prox_sparse_group, soft};

struct GlProblem<'a> {
    s: &'a Mat,
    n: f64,
    diag_penalty: f64,
    off_penalty: f64,
    theta: Vec<Mat>,
    z: Mat,
    q: Mat,
    dual: f64,
}

impl AdmmProblem for GlProblem<'_> {
    fn step(&mut self, rho: f64) -> Result<()> {
        let a = &self.z - (&self.q + self.s * self.n) / rho;
        self.theta[0] = expand_sym(&a, rho / 2.0, self.n)?;
        let arg = &self.theta[0] + &self.q / rho;
        let old = self.z.clone();
        let (dl, ol) = (self.diag_penalty / rho, self.off_penalty / rho);
        self.z = Mat::from_fn(arg.nrows(), arg.ncols(), |i, j| {
            soft(arg[(i, j)], if i == j { dl } else { ol })
        });
        self.q += (&self.theta[0] - &self.z) * rho;
        self.dual = rho * frob(&(&self.z - old)) / frob(&self.q).max(1.0);
        Ok(())
    }

    fn thetas(&self) -> &[Mat] {
        &self.theta
    }

    fn residuals(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([(
            "theta_z".to_string(),
            relative_residual(&(&self.theta[0] - &self.z), &self.theta[0]),
        )])
    }

    fn dual_residual(&self) -> f64 {
        self.dual
    }
}

/// Graphical lasso with `λ` on every entry.
pub fn solve_gl(s: &Mat, n: f64, lambda1: f64, opts: &AdmmOptions) -> Result<(Mat, Diagnostics)> {
    solve_gl_weighted(s, n, lambda1, lambda1, opts)
}

/// Graphical lasso with separate diagonal and off-diagonal penalty weights.
pub fn solve_gl_weighted(
    s: &Mat,
    n: f64,
    diag_penalty: f64,
    off_penalty: f64,
    opts: &AdmmOptions,
) -> Result<(Mat, Diagnostics)> {
    let model = EmpiricalModel::new(vec![(s.clone(), n)])?;
    for (name, v) in [
        ("diagonal penalty", diag_penalty),
        ("off-diagonal penalty", off_penalty),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(NjglError::Validation(format!(
                "{name} must be >= 0, got {v}"
            )));
        }
    }
    let p = model.p();
    let mut problem = GlProblem {
        s: model.covariance(0),
        n,
        diag_penalty,
        off_penalty,
        theta: vec![Mat::identity(p, p)],
        z: Mat::identity(p, p),
        q: Mat::zeros(p, p),
        dual: f64::INFINITY,
    };
    let mut diag = run(&mut problem, opts)?;
    let theta = sym(&problem.z);
    diag.objective = gl_objective(model.covariance(0), n, &theta, diag_penalty, off_penalty)?;
    Ok((theta, diag))
}

/// Independent graphical lasso fits, one per class.
pub fn solve_gl_classes(
    model: &EmpiricalModel,
    lambda1: f64,
    opts: &AdmmOptions,
) -> Result<(PrecisionSet, Diagnostics)> {
    let mut thetas = Vec::with_capacity(model.k());
    let mut parts = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let (t, d) = solve_gl(model.covariance(k), model.count(k), lambda1, opts)?;
        thetas.push(t);
        parts.push(d);
    }
    Ok((PrecisionSet::from_thetas(thetas), merge_diagnostics(parts)))
}

pub(crate) fn merge_diagnostics(parts: Vec<Diagnostics>) -> Diagnostics {
    let mut residuals = BTreeMap::new();
    for (k, d) in parts.iter().enumerate() {
        for (name, v) in &d.residuals {
            residuals.insert(format!("{name}_{}", k + 1), *v);
        }
    }
    Diagnostics {
        status: if parts.iter().all(|d| d.converged()) {
            Status::Converged
        } else {
            Status::NotConverged
        },
        outer_iterations: parts.iter().map(|d| d.outer_iterations).max().unwrap_or(0),
        inner_iterations: parts.iter().map(|d| d.inner_iterations).sum(),
        final_rho: parts.iter().map(|d| d.final_rho).fold(0.0, f64::max),
        last_relative_change: parts
            .iter()
            .map(|d| d.last_relative_change)
            .fold(0.0, f64::max),
        max_residual: parts.iter().map(|d| d.max_residual).fold(0.0, f64::max),
        dual_residual: parts.iter().map(|d| d.dual_residual).fold(0.0, f64::max),
        residuals,
        objective: parts.iter().map(|d| d.objective).sum(),
        wall_time_secs: parts.iter().map(|d| d.wall_time_secs).sum(),
    }
}

/// Fused graphical lasso for two classes, computed as PNJGL with `q = 1`.
pub fn solve_fgl(
    model: &EmpiricalModel,
    lambda1: f64,
    lambda2: f64,
    opts: &AdmmOptions,
) -> Result<(PrecisionSet, Diagnostics)> {
    let cfg = PenaltyConfig::new(lambda1, lambda2, GroupNorm::L1)?;
    solve_pnjgl(model, &cfg, opts, None)
}

struct GglProblem<'a> {
    model: &'a EmpiricalModel,
    lambda1: f64,
    lambda2: f64,
    theta: Vec<Mat>,
    z: Vec<Mat>,
    q: Vec<Mat>,
    dual: f64,
}

impl AdmmProblem for GglProblem<'_> {
    fn step(&mut self, rho: f64) -> Result<()> {
        for k in 0..self.theta.len() {
            let n = self.model.count(k);
            let a = &self.z[k] - (&self.q[k] + self.model.covariance(k) * n) / rho;
            self.theta[k] = expand_sym(&a, rho / 2.0, n)?;
        }
        let args: Vec<Mat> = self
            .theta
            .iter()
            .zip(&self.q)
            .map(|(t, q)| t + q / rho)
            .collect();
        let old = std::mem::take(&mut self.z);
        self.z = prox_sparse_group(&args, self.lambda1 / rho, self.lambda2 / rho)?;
        for k in 0..self.theta.len() {
            self.q[k] += (&self.theta[k] - &self.z[k]) * rho;
        }
        self.dual = old
            .iter()
            .zip(&self.z)
            .zip(&self.q)
            .map(|((o, z), q)| rho * frob(&(z - o)) / frob(q).max(1.0))
            .fold(0.0, f64::max);
        Ok(())
    }

    fn thetas(&self) -> &[Mat] {
        &self.theta
    }

    fn residuals(&self) -> BTreeMap<String, f64> {
        self.theta
            .iter()
            .zip(&self.z)
            .enumerate()
            .map(|(k, (t, z))| (format!("theta_z_{}", k + 1), relative_residual(&(t - z), t)))
            .collect()
    }

    fn dual_residual(&self) -> f64 {
        self.dual
    }
}

/// Group graphical lasso: `ℓ1` on every entry plus an `ℓ2` group across
/// classes on each off-diagonal position.
pub fn solve_ggl(
    model: &EmpiricalModel,
    lambda1: f64,
    lambda2: f64,
    opts: &AdmmOptions,
) -> Result<(PrecisionSet, Diagnostics)> {
    PenaltyConfig::new(lambda1, lambda2, GroupNorm::L2)?;
    if model.k() < 2 {
        return Err(NjglError::Validation(
            "GGL requires at least 2 classes".into(),
        ));
    }
    let (p, k) = (model.p(), model.k());
    let mut problem = GglProblem {
        model,
        lambda1,
        lambda2,
        theta: vec![Mat::identity(p, p); k],
        z: vec![Mat::identity(p, p); k],
        q: vec![Mat::zeros(p, p); k],
        dual: f64::INFINITY,
    };
    let mut diag = run(&mut problem, opts)?;
    let thetas: Vec<Mat> = problem.z.iter().map(sym).collect();
    diag.objective = ggl_objective(model, &thetas, lambda1, lambda2)?;
    Ok((PrecisionSet::from_thetas(thetas), diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_identity() {
        let (t, d) = solve_gl(&Mat::identity(3, 3), 5.0, 0.0, &AdmmOptions::default()).unwrap();
        assert!(d.converged());
        assert!((t - Mat::identity(3, 3)).abs().max() < 1e-4);
    }

    #[test]
    fn ggl_needs_two_classes() {
        let model = EmpiricalModel::new(vec![(Mat::identity(2, 2), 3.0)]).unwrap();
        assert!(solve_ggl(&model, 0.1, 0.1, &AdmmOptions::default()).is_err());
    }
}
