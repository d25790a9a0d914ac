//! Co-hub node joint graphical lasso for any number of classes.

use std::collections::BTreeMap;

use crate::admm::{relative_residual, run, AdmmOptions, AdmmProblem, Diagnostics};
use crate::error::{NjglError, Result};
use crate::linalg::{diag_part, frob, off_diag, sym, Mat};
use crate::model::{cnjgl_objective, EmpiricalModel, PenaltyConfig, PrecisionSet};
use crate::prox::{expand_sym, prox_l1, prox_stacked};
use crate::rcon::RconCertificate;

/// Per-class ADMM variables `Θ, Z, Ṽ, W` and duals `F, G, Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnjglState {
    pub theta: Vec<Mat>,
    pub z: Vec<Mat>,
    pub v_tilde: Vec<Mat>,
    pub w: Vec<Mat>,
    pub f: Vec<Mat>,
    pub g: Vec<Mat>,
    pub q: Vec<Mat>,
}

impl CnjglState {
    pub fn identity(p: usize, k: usize) -> Self {
        let i = vec![Mat::identity(p, p); k];
        let z = vec![Mat::zeros(p, p); k];
        Self {
            theta: i.clone(),
            z: i.clone(),
            v_tilde: i.clone(),
            w: i,
            f: z.clone(),
            g: z.clone(),
            q: z,
        }
    }

    pub fn p(&self) -> usize {
        self.theta.first().map_or(0, |t| t.nrows())
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    fn sweep(&mut self, model: &EmpiricalModel, cfg: &PenaltyConfig, rho: f64) -> Result<()> {
        let k = self.k();
        let h = 0.5 / rho;
        for i in 0..k {
            let a = (&self.v_tilde[i] + &self.w[i] + &self.z[i]) * 0.5
                - (&self.q[i] + model.covariance(i) * model.count(i) + &self.f[i]) * h;
            self.theta[i] = expand_sym(&a, rho, model.count(i))?;
        }
        for i in 0..k {
            self.z[i] = prox_l1(&(&self.theta[i] + &self.q[i] / rho), cfg.lambda1 / rho)?;
        }
        let c: Vec<Mat> = (0..k)
            .map(|i| {
                (self.w[i].transpose() - &self.w[i] + &self.theta[i]) * 0.5
                    + (&self.f[i] - &self.g[i]) * h
            })
            .collect();
        let offs: Vec<Mat> = c.iter().map(off_diag).collect();
        let shrunk = prox_stacked(&offs, cfg.lambda2 * h, cfg.q)?;
        for i in 0..k {
            self.v_tilde[i] = &shrunk[i] + diag_part(&c[i]);
        }
        for i in 0..k {
            self.w[i] = (self.v_tilde[i].transpose() - &self.v_tilde[i] + &self.theta[i]) * 0.5
                + (&self.f[i] + self.g[i].transpose()) * h;
        }
        for i in 0..k {
            self.f[i] += (&self.theta[i] - (&self.v_tilde[i] + &self.w[i])) * rho;
            self.g[i] += (&self.v_tilde[i] - self.w[i].transpose()) * rho;
            self.q[i] += (&self.theta[i] - &self.z[i]) * rho;
        }
        Ok(())
    }

    pub fn residuals(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for i in 0..self.k() {
            let (t, v, w) = (&self.theta[i], &self.v_tilde[i], &self.w[i]);
            out.insert(
                format!("coupling_{}", i + 1),
                relative_residual(&(t - (v + w)), t),
            );
            out.insert(
                format!("v_w_transpose_{}", i + 1),
                relative_residual(&(v - w.transpose()), v),
            );
            out.insert(
                format!("theta_z_{}", i + 1),
                relative_residual(&(t - &self.z[i]), t),
            );
        }
        out
    }
}

/// One inner sweep in the listed order: all `Θ^i`, all `Z^i`, the joint
/// `Ṽ` update, all `W^i`, then the duals.
pub fn step_cnjgl(
    state: &CnjglState,
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    rho: f64,
) -> Result<CnjglState> {
    cfg.validate()?;
    if !(rho > 0.0) {
        return Err(NjglError::Domain(format!(
            "rho must be positive, got {rho}"
        )));
    }
    check_state(state, model)?;
    let mut next = state.clone();
    next.sweep(model, cfg, rho)?;
    Ok(next)
}

fn check_state(state: &CnjglState, model: &EmpiricalModel) -> Result<()> {
    if state.k() != model.k() || state.p() != model.p() {
        return Err(NjglError::Dimension(format!(
            "state is K = {}, p = {}; model is K = {}, p = {}",
            state.k(),
            state.p(),
            model.k(),
            model.p()
        )));
    }
    Ok(())
}

struct Problem<'a> {
    state: CnjglState,
    model: &'a EmpiricalModel,
    cfg: &'a PenaltyConfig,
    dual: f64,
}

impl AdmmProblem for Problem<'_> {
    fn step(&mut self, rho: f64) -> Result<()> {
        let old = self.state.z.clone();
        self.state.sweep(self.model, self.cfg, rho)?;
        self.dual = old
            .iter()
            .zip(&self.state.z)
            .zip(&self.state.q)
            .map(|((o, z), q)| rho * frob(&(z - o)) / frob(q).max(1.0))
            .fold(0.0, f64::max);
        Ok(())
    }

    fn dual_residual(&self) -> f64 {
        self.dual
    }

    fn thetas(&self) -> &[Mat] {
        &self.state.theta
    }

    fn residuals(&self) -> BTreeMap<String, f64> {
        self.state.residuals()
    }
}

pub fn solve_cnjgl(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
    init: Option<&CnjglState>,
) -> Result<(PrecisionSet, Diagnostics)> {
    let (set, diag, _) = solve_cnjgl_with_state(model, cfg, opts, init)?;
    Ok((set, diag))
}

pub fn solve_cnjgl_with_state(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
    init: Option<&CnjglState>,
) -> Result<(PrecisionSet, Diagnostics, CnjglState)> {
    cfg.validate()?;
    let state = match init {
        Some(s) => {
            check_state(s, model)?;
            s.clone()
        }
        None => CnjglState::identity(model.p(), model.k()),
    };
    let mut problem = Problem {
        state,
        model,
        cfg,
        dual: f64::INFINITY,
    };
    let mut diag = run(&mut problem, opts)?;
    let state = problem.state;

    let thetas: Vec<Mat> = state.z.iter().map(sym).collect();
    let vs: Vec<Mat> = state.v_tilde.iter().map(off_diag).collect();
    let reported: Vec<Mat> = thetas
        .iter()
        .zip(&vs)
        .map(|(t, v)| {
            let r = off_diag(t) - (v + v.transpose());
            v + r * 0.5
        })
        .collect();
    diag.objective = cnjgl_objective(model, &thetas, &reported, cfg)?;

    let duals = (cfg.lambda2 > 0.0).then(|| {
        let lambdas = state.f.iter().map(|f| off_diag(f) / cfg.lambda2).collect();
        RconCertificate::new(lambdas, cfg.q).into_feasible(cfg.q)
    });
    let set = PrecisionSet {
        thetas,
        decomposition: Some(vs),
        duals,
    };
    Ok((set, diag, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GroupNorm;

    #[test]
    fn diagonal_pass_through() {
        let s = Mat::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0]);
        let model = EmpiricalModel::new(vec![(s.clone(), 10.0), (s, 12.0)]).unwrap();
        let cfg = PenaltyConfig::new(0.5, 2.0, GroupNorm::L2).unwrap();
        let mut st = CnjglState::identity(3, 2);
        st.w[0][(0, 1)] = 0.4;
        st.f[1][(2, 2)] = 0.7;
        let rho = 1.5;
        let next = step_cnjgl(&st, &model, &cfg, rho).unwrap();
        for i in 0..2 {
            let c = (st.w[i].transpose() - &st.w[i] + &next.theta[i]) * 0.5
                + (&st.f[i] - &st.g[i]) * (0.5 / rho);
            for j in 0..3 {
                assert_eq!(next.v_tilde[i][(j, j)], c[(j, j)]);
            }
        }
    }

    #[test]
    fn unpenalized_identity_covariance_gives_identity() {
        let i = Mat::identity(3, 3);
        let model = EmpiricalModel::new(vec![(i.clone(), 8.0), (i.clone(), 8.0), (i.clone(), 8.0)])
            .unwrap();
        let cfg = PenaltyConfig::new(0.0, 0.0, GroupNorm::Linf).unwrap();
        let (set, diag) = solve_cnjgl(&model, &cfg, &AdmmOptions::default(), None).unwrap();
        assert!(diag.converged());
        for t in &set.thetas {
            assert!((t - &i).abs().max() < 1e-4);
        }
    }
}
