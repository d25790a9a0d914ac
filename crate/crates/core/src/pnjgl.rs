//! Perturbed-node joint graphical lasso for two classes.

use std::collections::BTreeMap;

use crate::admm::{relative_residual, run, AdmmOptions, AdmmProblem, Diagnostics};
use crate::error::{NjglError, Result};
use crate::linalg::{frob, sym, Mat};
use crate::model::{pnjgl_objective, EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet};
use crate::prox::{expand_sym, prox_columns, prox_l1};
use crate::rcon::RconCertificate;

/// Full ADMM state: primal `Θ1, Θ2, Z1, Z2, V, W` and duals `F, G, Q1, Q2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PnjglState {
    pub theta1: Mat,
    pub theta2: Mat,
    pub z1: Mat,
    pub z2: Mat,
    pub v: Mat,
    pub w: Mat,
    pub f: Mat,
    pub g: Mat,
    pub q1: Mat,
    pub q2: Mat,
}

impl PnjglState {
    /// Primal variables at the identity, duals at zero.
    pub fn identity(p: usize) -> Self {
        let i = Mat::identity(p, p);
        let z = Mat::zeros(p, p);
        Self {
            theta1: i.clone(),
            theta2: i.clone(),
            z1: i.clone(),
            z2: i.clone(),
            v: i.clone(),
            w: i,
            f: z.clone(),
            g: z.clone(),
            q1: z.clone(),
            q2: z,
        }
    }

    pub fn p(&self) -> usize {
        self.theta1.nrows()
    }

    fn sweep(&mut self, model: &EmpiricalModel, cfg: &PenaltyConfig, rho: f64) -> Result<()> {
        let (n1, n2) = (model.count(0), model.count(1));
        let (s1, s2) = (model.covariance(0), model.covariance(1));
        let h = 0.5 / rho;

        let vw = &self.v + &self.w;
        let a1 = (&self.theta2 + &vw + &self.z1) * 0.5 - (&self.q1 + s1 * n1 + &self.f) * h;
        self.theta1 = expand_sym(&a1, rho, n1)?;
        let a2 = (&self.theta1 - &vw + &self.z2) * 0.5 - (&self.q2 + s2 * n2 - &self.f) * h;
        self.theta2 = expand_sym(&a2, rho, n2)?;

        self.z1 = prox_l1(&(&self.theta1 + &self.q1 / rho), cfg.lambda1 / rho)?;
        self.z2 = prox_l1(&(&self.theta2 + &self.q2 / rho), cfg.lambda1 / rho)?;

        let diff = &self.theta1 - &self.theta2;
        let cv = (self.w.transpose() - &self.w + &diff) * 0.5 + (&self.f - &self.g) * h;
        self.v = prox_columns(&cv, cfg.lambda2 * h, cfg.q)?;
        self.w = (self.v.transpose() - &self.v + &diff) * 0.5 + (&self.f + self.g.transpose()) * h;

        self.f += (&diff - (&self.v + &self.w)) * rho;
        self.g += (&self.v - self.w.transpose()) * rho;
        self.q1 += (&self.theta1 - &self.z1) * rho;
        self.q2 += (&self.theta2 - &self.z2) * rho;
        Ok(())
    }

    /// Relative coupling residuals of the current iterate.
    pub fn residuals(&self) -> BTreeMap<String, f64> {
        let diff = &self.theta1 - &self.theta2;
        BTreeMap::from([
            (
                "coupling".to_string(),
                relative_residual(&(&diff - (&self.v + &self.w)), &diff),
            ),
            (
                "v_w_transpose".to_string(),
                relative_residual(&(&self.v - self.w.transpose()), &self.v),
            ),
            (
                "theta1_z1".to_string(),
                relative_residual(&(&self.theta1 - &self.z1), &self.theta1),
            ),
            (
                "theta2_z2".to_string(),
                relative_residual(&(&self.theta2 - &self.z2), &self.theta2),
            ),
        ])
    }
}

/// One inner sweep: six primal updates followed by four dual updates.
pub fn step_pnjgl(
    state: &PnjglState,
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    rho: f64,
) -> Result<PnjglState> {
    check_inputs(model, cfg)?;
    if !(rho > 0.0) {
        return Err(NjglError::Domain(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let mut next = state.clone();
    next.sweep(model, cfg, rho)?;
    Ok(next)
}

fn check_inputs(model: &EmpiricalModel, cfg: &PenaltyConfig) -> Result<()> {
    cfg.validate()?;
    if model.k() != 2 {
        return Err(NjglError::Validation(format!(
            "PNJGL requires exactly 2 classes, got {}",
            model.k()
        )));
    }
    Ok(())
}

struct Problem<'a> {
    state: PnjglState,
    model: &'a EmpiricalModel,
    cfg: &'a PenaltyConfig,
    thetas: Vec<Mat>,
    dual: f64,
}

impl AdmmProblem for Problem<'_> {
    fn step(&mut self, rho: f64) -> Result<()> {
        let (z1, z2) = (self.state.z1.clone(), self.state.z2.clone());
        self.state.sweep(self.model, self.cfg, rho)?;
        self.dual = (rho * frob(&(&self.state.z1 - z1)) / frob(&self.state.q1).max(1.0))
            .max(rho * frob(&(&self.state.z2 - z2)) / frob(&self.state.q2).max(1.0));
        self.thetas[0].copy_from(&self.state.theta1);
        self.thetas[1].copy_from(&self.state.theta2);
        Ok(())
    }

    fn thetas(&self) -> &[Mat] {
        &self.thetas
    }

    fn residuals(&self) -> BTreeMap<String, f64> {
        self.state.residuals()
    }

    fn dual_residual(&self) -> f64 {
        self.dual
    }
}

/// Solves PNJGL and returns the estimates and diagnostics.
pub fn solve_pnjgl(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
    init: Option<&PnjglState>,
) -> Result<(PrecisionSet, Diagnostics)> {
    let (set, diag, _) = solve_pnjgl_with_state(model, cfg, opts, init)?;
    Ok((set, diag))
}

/// As [`solve_pnjgl`], also returning the final state for warm starts.
pub fn solve_pnjgl_with_state(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    opts: &AdmmOptions,
    init: Option<&PnjglState>,
) -> Result<(PrecisionSet, Diagnostics, PnjglState)> {
    check_inputs(model, cfg)?;
    let p = model.p();
    let state = match init {
        Some(s) if s.p() != p => {
            return Err(NjglError::Dimension(format!(
                "warm start has p = {}, model has p = {p}",
                s.p()
            )))
        }
        Some(s) => s.clone(),
        None => PnjglState::identity(p),
    };
    let thetas = vec![state.theta1.clone(), state.theta2.clone()];
    let mut problem = Problem {
        state,
        model,
        cfg,
        thetas,
        dual: f64::INFINITY,
    };
    let mut diag = run(&mut problem, opts)?;
    let state = problem.state;

    let t1 = sym(&state.z1);
    let t2 = sym(&state.z2);
    let v_report = feasible_v(&t1, &t2, &state.v, cfg.q);
    diag.objective = pnjgl_objective(model, &t1, &t2, &v_report, cfg)?;

    let duals = (cfg.lambda2 > 0.0)
        .then(|| RconCertificate::new(vec![&state.f / cfg.lambda2], cfg.q).into_feasible(cfg.q));
    let set = PrecisionSet {
        thetas: vec![t1, t2],
        decomposition: Some(vec![state.v.clone()]),
        duals,
    };
    Ok((set, diag, state))
}

/// Decomposition of `Θ1 − Θ2` used for objective reporting: the optimal
/// `Δ/2` for `q = 1`, otherwise the solver's `V` corrected onto the constraint.
pub(crate) fn feasible_v(t1: &Mat, t2: &Mat, v: &Mat, q: GroupNorm) -> Mat {
    let diff = t1 - t2;
    if q == GroupNorm::L1 {
        return diff * 0.5;
    }
    let r = &diff - (v + v.transpose());
    v + r * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(p: usize, n: f64) -> EmpiricalModel {
        EmpiricalModel::new(vec![(Mat::identity(p, p), n), (Mat::identity(p, p), n)]).unwrap()
    }

    #[test]
    fn unpenalized_identity_covariance_gives_identity() {
        let model = identity_model(4, 10.0);
        let cfg = PenaltyConfig::new(0.0, 0.0, GroupNorm::L2).unwrap();
        let (set, diag) = solve_pnjgl(&model, &cfg, &AdmmOptions::default(), None).unwrap();
        assert!(diag.converged());
        for t in &set.thetas {
            assert!((t - Mat::identity(4, 4)).abs().max() < 1e-4);
        }
    }

    #[test]
    fn dual_update_is_exact() {
        let model = identity_model(3, 5.0);
        let cfg = PenaltyConfig::new(0.3, 0.4, GroupNorm::L2).unwrap();
        let s0 = PnjglState::identity(3);
        let s1 = step_pnjgl(&s0, &model, &cfg, 2.0).unwrap();
        let want = &s0.f + (&s1.theta1 - &s1.theta2 - (&s1.v + &s1.w)) * 2.0;
        assert!((s1.f - want).abs().max() < 1e-14);
    }

    #[test]
    fn analytic_fixed_point_is_stationary() {
        // S = I: Θ = Z = (n/(n+λ1)) I, Q = λ1 I, all coupling variables zero.
        let (n, l1) = (10.0, 2.0);
        let model = identity_model(3, n);
        let cfg = PenaltyConfig::new(l1, 1.0, GroupNorm::L2).unwrap();
        let c = n / (n + l1);
        let z = Mat::zeros(3, 3);
        let s = PnjglState {
            theta1: Mat::identity(3, 3) * c,
            theta2: Mat::identity(3, 3) * c,
            z1: Mat::identity(3, 3) * c,
            z2: Mat::identity(3, 3) * c,
            v: z.clone(),
            w: z.clone(),
            f: z.clone(),
            g: z,
            q1: Mat::identity(3, 3) * l1,
            q2: Mat::identity(3, 3) * l1,
        };
        let next = step_pnjgl(&s, &model, &cfg, 3.0).unwrap();
        for (a, b) in [
            (&next.theta1, &s.theta1),
            (&next.z2, &s.z2),
            (&next.q1, &s.q1),
            (&next.v, &s.v),
        ] {
            assert!((a - b).abs().max() < 1e-10);
        }
    }

    #[test]
    fn rejects_three_classes() {
        let i = Mat::identity(2, 2);
        let model =
            EmpiricalModel::new(vec![(i.clone(), 1.0), (i.clone(), 1.0), (i, 1.0)]).unwrap();
        let cfg = PenaltyConfig::new(0.1, 0.1, GroupNorm::L2).unwrap();
        assert!(matches!(
            solve_pnjgl(&model, &cfg, &AdmmOptions::default(), None),
            Err(NjglError::Validation(_))
        ));
    }
}
