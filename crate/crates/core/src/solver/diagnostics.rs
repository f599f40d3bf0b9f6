//! Convergence constants of the Newton iteration at a starting point.

use serde::Serialize;

use crate::error::Result;
use crate::family::WeightFamily;
use crate::fisher::{dense_inverse, fisher_info, inf_norm};
use crate::model::{moment_residual, BiDegree, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonDiagnostics {
    /// `‖F'(θ₀)⁻¹ F(θ₀)‖_∞`, the length of the first Newton step.
    pub r: f64,
    /// `c₁(2n-1)M²K₁ / (2m³n²) + K₂ / ((n-1)m)`; infinite when the Lipschitz
    /// constants are unavailable.
    pub rho: f64,
    pub k1: f64,
    pub k2: f64,
    pub m: f64,
    pub big_m: f64,
    pub min_pair_sum: f64,
    pub c1: f64,
    /// `ρ r < 1/2`. Advisory only.
    pub contraction_ok: bool,
    /// Why the constants could not be formed, if they could not.
    pub reason: Option<&'static str>,
}

/// Computes `r` with a dense inverse, so `n` is limited by
/// [`crate::fisher::DENSE_LIMIT`].
pub fn newton_diagnostics(theta0: &ParamVector, g: &BiDegree, family: &WeightFamily, c1: f64) -> Result<NewtonDiagnostics> {
    let info = fisher_info(theta0, family)?;
    let f = moment_residual(theta0, g, family)?;
    let inv = dense_inverse(&info)?;
    let step = inv * nalgebra::DVector::from_vec(f);
    let r = inf_norm(step.as_slice());
    let n = theta0.n();
    let (m, big_m) = (info.m(), info.big_m());
    let min_pair_sum = theta0.min_pair_sum();
    let (k1, k2, reason) = match family.lipschitz(n, min_pair_sum, r) {
        Ok((k1, k2)) => (k1, k2, None),
        Err(reason) => (f64::INFINITY, f64::INFINITY, Some(reason)),
    };
    let nf = n as f64;
    let rho = if reason.is_some() {
        f64::INFINITY
    } else {
        c1 * (2.0 * nf - 1.0) * big_m * big_m * k1 / (2.0 * m.powi(3) * nf * nf) + k2 / ((nf - 1.0) * m)
    };
    Ok(NewtonDiagnostics {
        r,
        rho,
        k1,
        k2,
        m,
        big_m,
        min_pair_sum,
        c1,
        contraction_ok: reason.is_none() && rho * r < 0.5,
        reason,
    })
}
