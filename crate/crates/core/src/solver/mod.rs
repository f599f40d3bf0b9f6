//! Newton-Raphson fitting of the maximum-likelihood estimate.
//!
//! Iterates `θ ← θ + sign · V(θ)⁻¹ F(θ)` on the free coordinates
//! `(α₁..α_n, β₁..β_{n-1})`, where `V` is the Fisher information and `F` the
//! moment residual. `β_n = 0` is never touched.

mod diagnostics;
mod step;

pub use diagnostics::{newton_diagnostics, NewtonDiagnostics};
pub use step::{builtin_step_strategies, step_strategies, ExactSolve, SApproxStep, StepStrategy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::WeightFamily;
use crate::fisher::{fisher_info, inf_norm};
use crate::model::{moment_residual, BiDegree, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Registered step strategy, e.g. `exact` or `s-approx`.
    pub step_mode: String,
    /// Stop once `‖F‖_∞` is at most this; `None` means `1e-10 · (n-1)`.
    pub tol_residual: Option<f64>,
    pub tol_step: f64,
    pub max_iter: usize,
    /// Cap on `‖θ‖_∞` beyond which a non-contracting iteration is taken as
    /// evidence that the MLE does not exist.
    pub divergence_bound: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step_mode: "exact".into(),
            tol_residual: None,
            tol_step: 1e-10,
            max_iter: 100,
            divergence_bound: 30.0,
        }
    }
}

impl FitConfig {
    pub fn with_step_mode(mut self, mode: &str) -> Self {
        self.step_mode = mode.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if let Some(t) = self.tol_residual {
            if !positive(t) {
                return Err(Error::InvalidConfig(format!("tol_residual must be > 0, got {t}")));
            }
        }
        if !positive(self.tol_step) {
            return Err(Error::InvalidConfig(format!("tol_step must be > 0, got {}", self.tol_step)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !positive(self.divergence_bound) {
            return Err(Error::InvalidConfig(format!(
                "divergence_bound must be > 0, got {}",
                self.divergence_bound
            )));
        }
        step_strategies().resolve(&self.step_mode).map(|_| ())
    }

    pub fn residual_tol(&self, n: usize) -> f64 {
        self.tol_residual.unwrap_or(1e-10 * (n - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Existence {
    Exists,
    NonExistent,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible,
    Boundary,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub residual_inf: f64,
    pub step_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub converged: bool,
    pub existence: Existence,
    pub iterations: usize,
    pub residual_norm_inf: f64,
    pub trace: Vec<TraceEntry>,
}

/// Necessary conditions for `g` to be an interior point of the mean space.
///
/// `Feasible` does not guarantee existence; [`newton_fit`] has the final say.
/// `Boundary` means some degree or degree pair is at an extreme value, so the
/// likelihood has no maximizer. `Infeasible` means no graph has these degrees.
pub fn existence_check(g: &BiDegree, family: &WeightFamily) -> Feasibility {
    let n = g.n();
    let degrees = || g.d.iter().chain(&g.b);
    if degrees().any(|x| !x.is_finite() || *x < 0.0) {
        return Feasibility::Infeasible;
    }
    let total: f64 = g.d.iter().sum();
    let slack = 1e-9 * total.max(1.0);
    if g.sum_gap() > slack {
        return Feasibility::Infeasible;
    }
    let cap = family.support_max().map(|w| w * (n - 1) as f64);
    let mut verdict = Feasibility::Feasible;
    for &x in degrees() {
        if cap.is_some_and(|c| x > c + slack) {
            return Feasibility::Infeasible;
        }
        if x == 0.0 || cap.is_some_and(|c| x >= c - slack) {
            verdict = Feasibility::Boundary;
        }
    }
    if n >= 3 {
        // every edge touches vertex i, so all others sit at the lower bound
        let full = cap.map(|c| c * n as f64);
        for i in 0..n {
            let touching = g.d[i] + g.b[i];
            if touching > total + slack {
                return Feasibility::Infeasible;
            }
            if touching >= total - slack {
                verdict = Feasibility::Boundary;
            }
            // same for the complement graph `max - a_ij`
            if let Some(full) = full {
                let comp_touching = 2.0 * cap.unwrap() - touching;
                let comp_total = full - total;
                if comp_touching >= comp_total - slack {
                    verdict = Feasibility::Boundary;
                }
            }
        }
    }
    verdict
}

/// Moment-matched starting point.
///
/// Each vertex gets half of the pair-sum whose edge mean equals its average
/// degree, clamped away from the boundary; the result is then shifted so
/// that `β_n = 0`.
pub fn default_start(g: &BiDegree, family: &WeightFamily) -> Result<ParamVector> {
    let n = g.n();
    let per_edge = (n - 1) as f64;
    let half = |deg: f64| 0.5 * family.start_pair_sum(deg / per_edge, n);
    let shift = half(g.b[n - 1]);
    let alpha = g.d.iter().map(|&x| half(x) + shift).collect();
    let mut beta: Vec<f64> = g.b.iter().map(|&x| half(x) - shift).collect();
    beta[n - 1] = 0.0;
    let theta = ParamVector::new(alpha, beta, family.orientation())?;
    theta.validate(family)?;
    Ok(theta)
}

/// Fits from [`default_start`].
pub fn fit(g: &BiDegree, family: &WeightFamily, cfg: &FitConfig) -> Result<FitResult> {
    let theta0 = default_start(g, family)?;
    newton_fit(g, family, &theta0, cfg)
}

const STAGNATION_WINDOW: usize = 10;

pub fn newton_fit(g: &BiDegree, family: &WeightFamily, theta0: &ParamVector, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let strategy = step_strategies().resolve(&cfg.step_mode)?;
    theta0.validate(family)?;
    let n = theta0.n();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.n(),
        });
    }
    let tol = cfg.residual_tol(n);
    let sign = family.orientation().sign();
    let positive_domain = !family.in_domain(0.0);

    let mut theta = theta0.clone();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let finish = |theta: ParamVector, existence, residual, trace: Vec<TraceEntry>| {
        let converged = existence == Existence::Exists;
        Ok(FitResult {
            theta_hat: theta,
            converged,
            existence,
            iterations: trace.len(),
            residual_norm_inf: residual,
            trace,
        })
    };

    if existence_check(g, family) != Feasibility::Feasible {
        let residual = inf_norm(&moment_residual(&theta, g, family)?);
        return finish(theta, Existence::NonExistent, residual, trace);
    }

    let mut free = theta.free();
    let mut tiny_step = false;
    loop {
        let f = moment_residual(&theta, g, family)?;
        let residual = inf_norm(&f);
        if !residual.is_finite() || !theta.max_abs().is_finite() {
            return finish(theta, Existence::Undetermined, residual, trace);
        }
        if residual <= tol {
            return finish(theta, Existence::Exists, residual, trace);
        }
        let diverged = theta.max_abs() > cfg.divergence_bound;
        if tiny_step || trace.len() >= cfg.max_iter {
            let verdict = if diverged { Existence::NonExistent } else { Existence::Undetermined };
            return finish(theta, verdict, residual, trace);
        }
        if diverged && trace.len() >= 2 {
            let k = trace.len();
            if trace[k - 1].step_inf > 0.5 * trace[k - 2].step_inf {
                return finish(theta, Existence::NonExistent, residual, trace);
            }
        }
        if trace.len() >= STAGNATION_WINDOW {
            let earlier = trace[trace.len() - STAGNATION_WINDOW].residual_inf;
            if residual > 0.99 * earlier {
                let verdict = if diverged { Existence::NonExistent } else { Existence::Undetermined };
                return finish(theta, verdict, residual, trace);
            }
        }

        let info = fisher_info(&theta, family)?;
        let mut step = strategy.direction(&info, &f)?;
        for x in &mut step {
            *x *= sign;
        }
        let lambda = if positive_domain { domain_damping(&theta, &step) } else { 1.0 };
        for (x, s) in free.iter_mut().zip(&step) {
            *x += lambda * s;
        }
        theta = ParamVector::from_free(&free, family.orientation())?;
        let step_inf = lambda * inf_norm(&step);
        trace.push(TraceEntry {
            residual_inf: residual,
            step_inf,
        });
        tiny_step = step_inf <= cfg.tol_step;
    }
}

/// Largest `λ ∈ (0, 1]` keeping every pair-sum at least half the current
/// minimum after the step.
fn domain_damping(theta: &ParamVector, step: &[f64]) -> f64 {
    let n = theta.n();
    let floor = 0.5 * theta.min_pair_sum();
    let (da, db) = step.split_at(n);
    let mut lambda = 1.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let delta = da[i] + db.get(j).copied().unwrap_or(0.0);
            if delta < 0.0 {
                let s = theta.pair_sum(i, j);
                if s + delta < floor {
                    lambda = lambda.min((s - floor) / -delta);
                }
            }
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Orientation;
    use crate::model::{bi_degrees, expected_degrees};
    use crate::sampler::{design_params, replication_seed, sample_graph, SimDesign};

    fn all_families() -> Vec<WeightFamily> {
        vec![
            WeightFamily::binary(),
            WeightFamily::exponential(),
            WeightFamily::geometric(),
            WeightFamily::finite(4).unwrap(),
        ]
    }

    #[test]
    fn noise_free_binary_recovers_truth() {
        let fam = WeightFamily::binary();
        let theta = design_params(&SimDesign::new(fam.clone(), 20, 1.5)).unwrap();
        let g = expected_degrees(&theta, &fam).unwrap();
        let res = fit(&g, &fam, &FitConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 10, "{}", res.iterations);
        for (a, b) in res.theta_hat.free().iter().zip(theta.free()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn noise_free_recovery_all_families_both_modes() {
        for fam in all_families() {
            let theta = design_params(&SimDesign::new(fam.clone(), 15, 1.0)).unwrap();
            let g = expected_degrees(&theta, &fam).unwrap();
            for mode in ["exact", "s-approx"] {
                let res = fit(&g, &fam, &FitConfig::default().with_step_mode(mode)).unwrap();
                assert!(res.converged, "{fam} {mode}: {:?}", res.existence);
                for (a, b) in res.theta_hat.free().iter().zip(theta.free()) {
                    assert!((a - b).abs() < 1e-8, "{fam} {mode}");
                }
            }
        }
    }

    #[test]
    fn saturated_out_degrees_do_not_exist() {
        let fam = WeightFamily::binary();
        let g = BiDegree::new(vec![4.0; 5], vec![4.0; 5]).unwrap();
        let res = fit(&g, &fam, &FitConfig::default()).unwrap();
        assert_eq!(res.existence, Existence::NonExistent);
        assert!(!res.converged);
    }

    #[test]
    fn existence_screen_examples() {
        let bin = WeightFamily::binary();
        let g = BiDegree::new(vec![0.0, 2.0, 2.0, 2.0], vec![2.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(existence_check(&g, &bin), Feasibility::Boundary);
        let g = BiDegree::new(vec![50.0; 100], vec![50.0; 100]).unwrap();
        assert_eq!(existence_check(&g, &bin), Feasibility::Feasible);
        let g = BiDegree::new(vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(existence_check(&g, &bin), Feasibility::Infeasible);
        let g = BiDegree::new(vec![1.5, 1.0, 1.0], vec![1.5, 1.0, 1.0]).unwrap();
        // the mean space is a convex hull, so fractional degrees are fine
        assert_eq!(existence_check(&g, &bin), Feasibility::Feasible);
        assert_eq!(existence_check(&g, &WeightFamily::exponential()), Feasibility::Feasible);
        let g = BiDegree::new(vec![3.0, 1.0, 1.0], vec![2.0, 1.0, 2.0]).unwrap();
        assert_eq!(existence_check(&g, &WeightFamily::geometric()), Feasibility::Boundary);
    }

    #[test]
    fn sampled_exponential_modes_agree() {
        let fam = WeightFamily::exponential();
        let theta = design_params(&SimDesign::new(fam.clone(), 100, 0.0)).unwrap();
        let g = bi_degrees(&sample_graph(&theta, &fam, 17).unwrap());
        let exact = fit(&g, &fam, &FitConfig::default()).unwrap();
        let approx = fit(&g, &fam, &FitConfig::default().with_step_mode("s-approx")).unwrap();
        assert!(exact.converged && approx.converged);
        for (a, b) in exact.theta_hat.free().iter().zip(approx.theta_hat.free()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn binary_log_design_is_non_existent() {
        let fam = WeightFamily::binary();
        let n = 100;
        let theta = design_params(&SimDesign::new(fam.clone(), n, (n as f64).ln())).unwrap();
        let mut missing = 0;
        for r in 0..20 {
            let g = bi_degrees(&sample_graph(&theta, &fam, replication_seed(1, r)).unwrap());
            if fit(&g, &fam, &FitConfig::default()).unwrap().existence != Existence::Exists {
                missing += 1;
            }
        }
        assert!(missing >= 19, "{missing}");
    }

    #[test]
    fn quadratic_convergence_once_close() {
        let fam = WeightFamily::geometric();
        let theta = design_params(&SimDesign::new(fam.clone(), 60, 1.0)).unwrap();
        let g = bi_degrees(&sample_graph(&theta, &fam, 5).unwrap());
        let res = fit(&g, &fam, &FitConfig::default()).unwrap();
        assert!(res.converged);
        let logs: Vec<f64> = res
            .trace
            .iter()
            .map(|t| t.residual_inf)
            .chain([res.residual_norm_inf])
            .filter(|r| *r < 1.0)
            .map(f64::ln)
            .collect();
        // stop before the floating-point floor of the residual
        for w in logs.windows(2).filter(|w| w[1] > -25.0) {
            assert!(w[1] / w[0] >= 1.5, "{logs:?}");
        }
    }

    #[test]
    fn last_in_degree_parameter_stays_pinned() {
        for fam in all_families() {
            let theta = design_params(&SimDesign::new(fam.clone(), 25, 1.0)).unwrap();
            let g = bi_degrees(&sample_graph(&theta, &fam, 9).unwrap());
            let res = fit(&g, &fam, &FitConfig::default()).unwrap();
            assert_eq!(res.theta_hat.beta()[24], 0.0);
        }
    }

    #[test]
    fn fitted_degrees_match_observed() {
        for fam in all_families() {
            let theta = design_params(&SimDesign::new(fam.clone(), 40, 1.0)).unwrap();
            let g = bi_degrees(&sample_graph(&theta, &fam, 21).unwrap());
            let cfg = FitConfig::default();
            let res = fit(&g, &fam, &cfg).unwrap();
            assert_eq!(res.existence, Existence::Exists, "{fam}");
            let e = expected_degrees(&res.theta_hat, &fam).unwrap();
            let gap = g.d.iter().zip(&e.d).chain(g.b.iter().zip(&e.b)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap <= cfg.residual_tol(40) * 1.0001, "{fam}: {gap}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let fam = WeightFamily::exponential();
        let g = BiDegree::new(vec![1.0; 4], vec![1.0; 4]).unwrap();
        let bad = ParamVector::new(vec![-1.0; 4], vec![0.0; 4], Orientation::Negated).unwrap();
        assert!(newton_fit(&g, &fam, &bad, &FitConfig::default()).is_err());
        let ok = ParamVector::new(vec![1.0; 3], vec![0.0; 3], Orientation::Negated).unwrap();
        assert!(matches!(newton_fit(&g, &fam, &ok, &FitConfig::default()), Err(Error::DimensionMismatch { .. })));
        let cfg = FitConfig {
            max_iter: 0,
            ..FitConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(FitConfig::default().with_step_mode("nope").validate().is_err());
    }

    #[test]
    fn default_start_is_exact_at_homogeneous_degrees() {
        let fam = WeightFamily::binary();
        let g = BiDegree::new(vec![10.0; 21], vec![10.0; 21]).unwrap();
        let theta = default_start(&g, &fam).unwrap();
        assert!(theta.max_abs() < 1e-15);
    }
}
