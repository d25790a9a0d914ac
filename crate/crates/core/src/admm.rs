//! Shared ADMM driver: increasing-ρ outer loop around an inner loop that
//! repeats one sweep until the precision iterates stop moving.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{NjglError, Result};
use crate::linalg::{frob, Mat};

/// Penalty schedule and stopping tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho0: f64,
    pub mu: f64,
    pub t_max: usize,
    pub eps: f64,
    pub inner_cap: usize,
    pub rho_max: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho0: 0.5,
            mu: 5.0,
            t_max: 1000,
            eps: 1e-4,
            inner_cap: 10_000,
            rho_max: 1e8,
        }
    }
}

impl AdmmOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rho0 > 0.0
            && self.rho0.is_finite()
            && self.mu > 1.0
            && self.mu.is_finite()
            && self.eps > 0.0
            && self.t_max >= 1
            && self.inner_cap >= 1
            && self.rho_max >= self.rho0;
        if ok {
            Ok(())
        } else {
            Err(NjglError::Validation(format!(
                "invalid ADMM options: {self:?}"
            )))
        }
    }

    /// `ρ_t = min(ρ0 μ^t, ρ_max)` for outer iteration `t ≥ 1`.
    pub fn rho_at(&self, t: usize) -> f64 {
        let exp = t.min(i32::MAX as usize) as i32;
        (self.rho0 * self.mu.powi(exp)).min(self.rho_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
}

/// Iteration counts, residuals and the reported objective of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub status: Status,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_rho: f64,
    pub last_relative_change: f64,
    /// Relative coupling residuals, keyed by constraint name.
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    /// `ρ ‖Z_new − Z_old‖_F / max(1, ‖Q‖_F)` of the last sweep; informational.
    pub dual_residual: f64,
    pub objective: f64,
    pub wall_time_secs: f64,
}

impl Diagnostics {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// One splitting scheme driven by [`run`].
pub(crate) trait AdmmProblem {
    fn step(&mut self, rho: f64) -> Result<()>;
    fn thetas(&self) -> &[Mat];
    fn residuals(&self) -> BTreeMap<String, f64>;
    /// `ρ ‖Z_new − Z_old‖_F / max(1, ‖Q‖_F)` for the last sweep, worst class.
    fn dual_residual(&self) -> f64;
}

pub(crate) fn relative_residual(diff: &Mat, reference: &Mat) -> f64 {
    frob(diff) / frob(reference).max(1.0)
}

fn max_relative_change(old: &[Mat], new: &[Mat]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(o, n)| frob(&(n - o)) / frob(o).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Runs the schedule. The outer loop stops once an inner loop is satisfied
/// after a single sweep and all coupling residuals are at most `eps`.
/// Exhausting `t_max` with residuals above `100·eps` is reported as
/// [`Status::NotConverged`]; the objective field is left at zero for the caller.
pub(crate) fn run<P: AdmmProblem>(problem: &mut P, opts: &AdmmOptions) -> Result<Diagnostics> {
    opts.validate()?;
    let start = Instant::now();
    let mut inner_total = 0;
    let mut rho = opts.rho0;
    let mut last_change = f64::INFINITY;
    let mut outer = 0;
    let mut stopped = false;
    for t in 1..=opts.t_max {
        outer = t;
        rho = opts.rho_at(t);
        let mut sweeps = 0;
        for _ in 0..opts.inner_cap {
            let before: Vec<Mat> = problem.thetas().to_vec();
            problem.step(rho)?;
            sweeps += 1;
            last_change = max_relative_change(&before, problem.thetas());
            if last_change <= opts.eps {
                break;
            }
        }
        inner_total += sweeps;
        log::debug!("outer {t}: rho {rho:.3e}, sweeps {sweeps}, change {last_change:.3e}");
        if sweeps == 1 && last_change <= opts.eps {
            let worst = problem.residuals().values().copied().fold(0.0, f64::max);
            if worst <= opts.eps {
                stopped = true;
                break;
            }
        }
    }
    let residuals = problem.residuals();
    let max_residual = residuals.values().copied().fold(0.0, f64::max);
    let status = if stopped || max_residual <= 100.0 * opts.eps {
        Status::Converged
    } else {
        Status::NotConverged
    };
    if status == Status::NotConverged {
        log::warn!("ADMM budget exhausted with max residual {max_residual:.3e}");
    }
    Ok(Diagnostics {
        status,
        outer_iterations: outer,
        inner_iterations: inner_total,
        final_rho: rho,
        last_relative_change: last_change,
        residuals,
        max_residual,
        dual_residual: problem.dual_residual(),
        objective: 0.0,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_schedule_is_capped_and_monotone() {
        let o = AdmmOptions::default();
        assert_eq!(o.rho_at(1), 2.5);
        let mut prev = 0.0;
        for t in 1..40 {
            let r = o.rho_at(t);
            assert!(r >= prev && r <= o.rho_max);
            prev = r;
        }
        assert_eq!(o.rho_at(1000), o.rho_max);
    }

    #[test]
    fn invalid_options_rejected() {
        assert!(AdmmOptions {
            mu: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdmmOptions {
            eps: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdmmOptions {
            t_max: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
