//! Newton step strategies, selected by name.
//!
//! A strategy maps the Fisher information `V` (positive definite) and the
//! residual `F` to the direction `V⁻¹F`. The caller applies the orientation
//! sign.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fisher::StructuredFisher;
use crate::registry::Registry;

pub trait StepStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn direction(&self, info: &StructuredFisher, residual: &[f64]) -> Result<Vec<f64>>;
}

/// Exact solve through the Schur complement of the out-degree block.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolve;

impl StepStrategy for ExactSolve {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn direction(&self, info: &StructuredFisher, residual: &[f64]) -> Result<Vec<f64>> {
        info.solve(residual)
    }
}

/// `O(n²)` step built on the closed-form approximate inverse `S`.
///
/// The plain step `S F` does not contract: `S V` maps the uniform shift of
/// the out-degree parameters to twice itself, so that component of the error
/// flips sign every iteration. `S` is used instead as the preconditioner of a
/// conjugate-gradient solve, whose first iterate is exactly `S F`.
#[derive(Debug, Clone, Copy)]
pub struct SApproxStep {
    pub rel_tol: f64,
    pub max_inner: usize,
}

impl Default for SApproxStep {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_inner: 200,
        }
    }
}

impl StepStrategy for SApproxStep {
    fn name(&self) -> &'static str {
        "s-approx"
    }

    fn direction(&self, info: &StructuredFisher, residual: &[f64]) -> Result<Vec<f64>> {
        info.solve_preconditioned(residual, self.rel_tol, self.max_inner)
    }
}

pub fn builtin_step_strategies() -> Registry<dyn StepStrategy> {
    let mut reg: Registry<dyn StepStrategy> = Registry::new("step mode");
    reg.register("exact", "Schur-complement solve of the full Newton system", |_| {
        Ok(Arc::new(ExactSolve) as Arc<dyn StepStrategy>)
    })
    .register("s-approx", "S-preconditioned CG, O(n^2) per inner iteration; s-approx:TOL sets the inner tolerance", |arg| {
        let mut step = SApproxStep::default();
        if let Some(arg) = arg {
            step.rel_tol = arg
                .parse::<f64>()
                .ok()
                .filter(|t| *t > 0.0 && *t < 1.0)
                .ok_or_else(|| Error::InvalidConfig(format!("bad s-approx tolerance `{arg}`")))?;
        }
        Ok(Arc::new(step) as Arc<dyn StepStrategy>)
    });
    reg
}

pub fn step_strategies() -> &'static Registry<dyn StepStrategy> {
    static REGISTRY: OnceLock<Registry<dyn StepStrategy>> = OnceLock::new();
    REGISTRY.get_or_init(builtin_step_strategies)
}
