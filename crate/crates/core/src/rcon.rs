//! Row-column overlap norm `Ω_q` and its dual certificates.
//!
//! `Ω_q(Θ^1, …, Θ^K) = min Σ_j ‖[V^1; …; V^K]_j‖_q` over `Θ^k = V^k + (V^k)^T`.
//! Dually, `Ω_q = max Σ_k ⟨Λ^k, Θ^k⟩` over `Λ` whose symmetrized stacked
//! columns have dual norm at most one.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::linalg::{asymmetry, inner, max_abs, skew, sym, Mat};
use crate::model::{stacked_column_norm_sum, GroupNorm};
use crate::prox::prox_stacked;

/// Feasibility slack allowed on the dual column norms.
pub const CERT_SLACK: f64 = 1e-6;

const RCON_TOL: f64 = 1e-8;
const RCON_MAX_ITER: usize = 50_000;

/// Dual matrices `Λ^k` together with their largest symmetrized column norm.
#[derive(Debug, Clone)]
pub struct RconCertificate {
    pub lambdas: Vec<Mat>,
    pub max_dual_column_norm: f64,
}

impl RconCertificate {
    /// Wraps `Λ` and computes its dual column norm for exponent `q`.
    pub fn new(lambdas: Vec<Mat>, q: GroupNorm) -> Self {
        let max = dual_column_norms(&lambdas, q)
            .into_iter()
            .fold(0.0, f64::max);
        Self {
            lambdas,
            max_dual_column_norm: max,
        }
    }

    /// Rescales `Λ` so that every symmetrized column has dual norm ≤ 1.
    pub fn into_feasible(self, q: GroupNorm) -> Self {
        if self.max_dual_column_norm <= 1.0 {
            return self;
        }
        let c = 1.0 / self.max_dual_column_norm;
        let lambdas = self.lambdas.into_iter().map(|l| l * c).collect();
        Self::new(lambdas, q)
    }
}

/// Outcome of [`check_certificate`].
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub column_norms: Vec<f64>,
    pub max_column_norm: f64,
    pub feasible: bool,
    /// `Σ_k ⟨Λ^k, Θ^k⟩`.
    pub pairing: f64,
    /// `|pairing − Ω_q|` when `Ω_q` was supplied.
    pub gap: Option<f64>,
}

/// Full output of the `Ω_q` evaluation.
#[derive(Debug, Clone)]
pub struct RconSolution {
    pub value: f64,
    pub v: Vec<Mat>,
    pub certificate: RconCertificate,
    /// Primal minus dual value at termination (an upper bound on the error).
    pub gap: f64,
    pub iterations: usize,
}

/// `‖[(Λ^1 + Λ^1ᵀ)_j; …; (Λ^K + Λ^Kᵀ)_j]‖_s` for every column `j`.
pub fn dual_column_norms(lambdas: &[Mat], q: GroupNorm) -> Vec<f64> {
    let Some(first) = lambdas.first() else {
        return Vec::new();
    };
    let sums: Vec<Mat> = lambdas.iter().map(|l| l + l.transpose()).collect();
    let s = q.dual();
    let mut buf = Vec::new();
    (0..first.ncols())
        .map(|j| {
            buf.clear();
            for m in &sums {
                buf.extend(m.column(j).iter().copied());
            }
            s.norm(&buf)
        })
        .collect()
}

/// Checks dual feasibility of `cert` and, if `omega` is given, the duality gap.
pub fn check_certificate(
    cert: &RconCertificate,
    thetas: &[Mat],
    q: GroupNorm,
    omega: Option<f64>,
) -> CertificateReport {
    let column_norms = dual_column_norms(&cert.lambdas, q);
    let max_column_norm = column_norms.iter().copied().fold(0.0, f64::max);
    let pairing: f64 = cert
        .lambdas
        .iter()
        .zip(thetas)
        .map(|(l, t)| inner(l, t))
        .sum();
    CertificateReport {
        feasible: max_column_norm <= 1.0 + CERT_SLACK,
        column_norms,
        max_column_norm,
        pairing,
        gap: omega.map(|w| (pairing - w).abs()),
    }
}

/// `Ω_q(Θ^1, …, Θ^K)` and an optimal decomposition `V`.
pub fn rcon_value(thetas: &[Mat], q: GroupNorm) -> Result<(f64, Vec<Mat>)> {
    let sol = rcon_solve(thetas, q)?;
    Ok((sol.value, sol.v))
}

/// Evaluates `Ω_q` together with a dual certificate.
///
/// `q = 1` has the closed form `½ Σ_k ‖Θ^k‖_1`. For `q ∈ {2, ∞}` the
/// decomposition is written as `V = Θ/2 + Y` with `Y` skew-symmetric and
/// solved by a two-block ADMM until the primal-dual gap is below 1e-8
/// (relative), or 50 000 iterations.
pub fn rcon_solve(thetas: &[Mat], q: GroupNorm) -> Result<RconSolution> {
    let Some(first) = thetas.first() else {
        return domain("rcon needs at least one matrix");
    };
    let p = first.nrows();
    for t in thetas {
        if t.shape() != (p, p) {
            return domain("rcon inputs must be square and of equal size");
        }
        if asymmetry(t) > 1e-10 * max_abs(t).max(1.0) {
            return domain("rcon inputs must be symmetric");
        }
    }
    let thetas: Vec<Mat> = thetas.iter().map(sym).collect();
    let half: Vec<Mat> = thetas.iter().map(|t| t * 0.5).collect();

    let scale = thetas.iter().map(max_abs).fold(0.0, f64::max);
    if scale == 0.0 {
        let zeros = vec![Mat::zeros(p, p); thetas.len()];
        return Ok(RconSolution {
            value: 0.0,
            v: zeros.clone(),
            certificate: RconCertificate::new(zeros, q),
            gap: 0.0,
            iterations: 0,
        });
    }
    if q == GroupNorm::L1 {
        let value = 0.5 * thetas.iter().map(crate::linalg::abs_sum).sum::<f64>();
        let lambdas = thetas.iter().map(|t| t.map(|x| 0.5 * sign(x))).collect();
        return Ok(RconSolution {
            value,
            v: half,
            certificate: RconCertificate::new(lambdas, q),
            gap: 0.0,
            iterations: 0,
        });
    }

    // Work on Θ / scale; the norm is positively homogeneous.
    let target: Vec<Mat> = half.iter().map(|h| h / scale).collect();
    let k = thetas.len();
    let mut y = vec![Mat::zeros(p, p); k];
    let mut u = vec![Mat::zeros(p, p); k];
    let mut rho = 1.0;
    let mut best: Option<(f64, Vec<Mat>, Vec<Mat>, f64)> = None;
    let mut iterations = 0;
    for it in 1..=RCON_MAX_ITER {
        iterations = it;
        let arg: Vec<Mat> = (0..k).map(|i| &target[i] + &y[i] - &u[i]).collect();
        let x = prox_stacked(&arg, 1.0 / rho, q)?;
        let y_old = y.clone();
        for i in 0..k {
            y[i] = skew(&(&x[i] - &target[i] + &u[i]));
        }
        let mut r2 = 0.0;
        let mut s2 = 0.0;
        for i in 0..k {
            let r = &x[i] - &y[i] - &target[i];
            r2 += r.norm_squared();
            s2 += (&y[i] - &y_old[i]).norm_squared() * rho * rho;
            u[i] += r;
        }
        if it % 10 == 0 || it == RCON_MAX_ITER {
            let v: Vec<Mat> = (0..k).map(|i| &target[i] + &y[i]).collect();
            let primal = stacked_column_norm_sum(&v, q);
            let lambdas: Vec<Mat> = u.iter().map(|ui| sym(&(ui * (-rho * 0.5)))).collect();
            let cert = RconCertificate::new(lambdas, q).into_feasible(q);
            let dual: f64 = cert
                .lambdas
                .iter()
                .zip(&target)
                .map(|(l, t)| 2.0 * inner(l, t))
                .sum();
            let gap = primal - dual;
            if best.as_ref().is_none_or(|b| gap < b.3) {
                best = Some((primal, v, cert.lambdas, gap));
            }
            if gap <= RCON_TOL * primal.max(1.0) {
                break;
            }
            // Residual balancing keeps both residuals on the same scale.
            let (r, s) = (r2.sqrt(), s2.sqrt());
            if r > 10.0 * s {
                rho *= 2.0;
                for ui in u.iter_mut() {
                    *ui *= 0.5;
                }
            } else if s > 10.0 * r {
                rho *= 0.5;
                for ui in u.iter_mut() {
                    *ui *= 2.0;
                }
            }
        }
    }
    let (primal, v, lambdas, gap) = best.expect("at least one gap evaluation");
    if gap > RCON_TOL * primal.max(1.0) {
        log::warn!(
            "rcon evaluation stopped with relative gap {:.3e}",
            gap / primal.max(1.0)
        );
    }
    Ok(RconSolution {
        value: primal * scale,
        v: v.into_iter().map(|m| m * scale).collect(),
        certificate: RconCertificate::new(lambdas, q),
        gap: gap * scale,
        iterations,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
