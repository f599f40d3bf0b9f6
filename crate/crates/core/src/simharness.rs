//! Replicated Monte-Carlo experiments: coverage, interval length and
//! non-existence frequency per (family, n, L rule, pair) cell, plus QQ data
//! for the standardized contrasts.
//!
//! Replication `r` of every cell uses seed `replication_seed(base_seed, r)`,
//! so cells that differ only in `n` or the L rule see paired randomness, and
//! results do not depend on how replications are spread over workers.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::WeightFamily;
use crate::inference::{contrast_interval, contrast_stat, plug_in_variances, ContrastKind};
use crate::model::{bi_degrees, BiDegree, ParamVector};
use crate::normal::normal_quantile;
use crate::sampler::{design_params, replication_seed, sample_graph, LRule, SimDesign};
use crate::solver::{fit, Existence, FitConfig, FitResult};

/// Fewest existing fits a QQ export accepts.
pub const MIN_QQ_FITS: usize = 10;

fn default_replications() -> usize {
    1000
}

fn default_level() -> f64 {
    0.95
}

fn default_parallelism() -> usize {
    1
}

fn default_step_mode() -> String {
    "s-approx".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: WeightFamily,
    pub n_values: Vec<usize>,
    #[serde(rename = "L_rules")]
    pub l_rules: Vec<LRule>,
    /// 1-based vertex pairs `(i, j)`; intervals are for `α_i - α_j`.
    pub pairs: Vec<(usize, usize)>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_step_mode")]
    pub step_mode: String,
}

impl ExperimentConfig {
    pub fn new(family: WeightFamily, n_values: Vec<usize>, l_rules: Vec<LRule>, pairs: Vec<(usize, usize)>) -> Self {
        Self {
            family,
            n_values,
            l_rules,
            pairs,
            replications: default_replications(),
            level: default_level(),
            base_seed: 0,
            parallelism: default_parallelism(),
            step_mode: default_step_mode(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_values.is_empty() {
            return bad("n_values is empty".into());
        }
        if self.l_rules.is_empty() {
            return bad("L_rules is empty".into());
        }
        if self.pairs.is_empty() {
            return bad("pairs is empty".into());
        }
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if self.parallelism < 1 {
            return bad("parallelism must be at least 1".into());
        }
        for &n in &self.n_values {
            if n < 3 {
                return bad(format!("n = {n}: need at least 3 vertices"));
            }
            for &(i, j) in &self.pairs {
                if i == j || !(1..=n).contains(&i) || !(1..=n).contains(&j) {
                    return bad(format!("pair ({i}, {j}) is not a pair of distinct vertices in 1..={n}"));
                }
            }
        }
        FitConfig::default().with_step_mode(&self.step_mode).validate()
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig::default().with_step_mode(&self.step_mode)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub family: String,
    pub n: usize,
    pub l_rule: LRule,
    pub i: usize,
    pub j: usize,
    /// `None` when no replication produced an MLE.
    pub coverage_pct: Option<f64>,
    pub mean_ci_length: Option<f64>,
    pub nonexist_pct: f64,
    /// Replications with an existing MLE.
    pub reps: usize,
}

/// One replication: sample, fit, and hand back the estimate if it exists.
fn replicate<F>(truth: &ParamVector, family: &WeightFamily, seed: u64, fitter: &F) -> Option<ParamVector>
where
    F: Fn(&BiDegree, &ParamVector) -> Result<FitResult> + Sync,
{
    let graph = sample_graph(truth, family, seed).ok()?;
    let result = fitter(&bi_degrees(&graph), truth).ok()?;
    (result.existence == Existence::Exists).then_some(result.theta_hat)
}

fn collect_estimates<F>(cfg: &ExperimentConfig, truth: &ParamVector, pool: &rayon::ThreadPool, fitter: &F) -> Vec<Option<ParamVector>>
where
    F: Fn(&BiDegree, &ParamVector) -> Result<FitResult> + Sync,
{
    pool.install(|| {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| replicate(truth, &cfg.family, replication_seed(cfg.base_seed, r), fitter))
            .collect()
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let pool = cfg.pool()?;
    let fit_cfg = cfg.fit_config();
    let family = cfg.family.clone();
    let fitter = move |g: &BiDegree, _: &ParamVector| fit(g, &family, &fit_cfg);
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        for &rule in &cfg.l_rules {
            let truth = design_params(&SimDesign::with_rule(cfg.family.clone(), n, rule))?;
            let estimates = collect_estimates(cfg, &truth, &pool, &fitter);
            let existing: Vec<&ParamVector> = estimates.iter().flatten().collect();
            let nonexist_pct = 100.0 * (cfg.replications - existing.len()) as f64 / cfg.replications as f64;
            for &(i, j) in &cfg.pairs {
                let target = truth.alpha()[i - 1] - truth.alpha()[j - 1];
                let (mut covered, mut length) = (0usize, 0.0);
                for hat in &existing {
                    let cov = plug_in_variances(hat, &cfg.family)?;
                    let ci = contrast_interval(ContrastKind::Xi, i, j, hat, &cov, cfg.level)?;
                    covered += usize::from(ci.contains(target));
                    length += ci.length();
                }
                let used = existing.len();
                rows.push(ExperimentRow {
                    family: cfg.family.spec(),
                    n,
                    l_rule: rule,
                    i,
                    j,
                    coverage_pct: (used > 0).then(|| 100.0 * covered as f64 / used as f64),
                    mean_ci_length: (used > 0).then(|| length / used as f64),
                    nonexist_pct,
                    reps: used,
                });
            }
        }
    }
    Ok(rows)
}

fn single_cell(cfg: &ExperimentConfig, kind: ContrastKind, pair: (usize, usize)) -> Result<ParamVector> {
    cfg.validate()?;
    if cfg.n_values.len() != 1 || cfg.l_rules.len() != 1 {
        return Err(Error::InvalidConfig("QQ export needs exactly one n value and one L rule".into()));
    }
    let truth = design_params(&SimDesign::with_rule(cfg.family.clone(), cfg.n_values[0], cfg.l_rules[0]))?;
    // index validation for the requested kind
    let cov = plug_in_variances(&truth, &cfg.family)?;
    contrast_stat(kind, pair.0, pair.1, &truth, &truth, &cov)?;
    Ok(truth)
}

fn contrast_samples_with<F>(cfg: &ExperimentConfig, kind: ContrastKind, pair: (usize, usize), fitter: &F) -> Result<Vec<f64>>
where
    F: Fn(&BiDegree, &ParamVector) -> Result<FitResult> + Sync,
{
    let truth = single_cell(cfg, kind, pair)?;
    let pool = cfg.pool()?;
    let estimates = collect_estimates(cfg, &truth, &pool, fitter);
    estimates
        .iter()
        .flatten()
        .map(|hat| {
            let cov = plug_in_variances(hat, &cfg.family)?;
            contrast_stat(kind, pair.0, pair.1, hat, &truth, &cov)
        })
        .collect()
}

/// Standardized contrast values from every replication with an existing
/// MLE, in replication order. The config must describe a single cell.
pub fn contrast_samples(cfg: &ExperimentConfig, kind: ContrastKind, pair: (usize, usize)) -> Result<Vec<f64>> {
    let fit_cfg = cfg.fit_config();
    let family = cfg.family.clone();
    contrast_samples_with(cfg, kind, pair, &move |g: &BiDegree, _: &ParamVector| fit(g, &family, &fit_cfg))
}

/// Pairs sorted samples with `Φ⁻¹((k - 0.5) / R)`.
pub fn qq_points(mut samples: Vec<f64>) -> Result<Vec<(f64, f64)>> {
    if samples.len() < MIN_QQ_FITS {
        return Err(Error::InsufficientData {
            have: samples.len(),
            need: MIN_QQ_FITS,
        });
    }
    samples.sort_by(f64::total_cmp);
    let r = samples.len() as f64;
    Ok(samples
        .into_iter()
        .enumerate()
        .map(|(k, x)| (normal_quantile((k as f64 + 0.5) / r), x))
        .collect())
}

/// `(theoretical, empirical)` quantile pairs for one cell.
pub fn qq_export(cfg: &ExperimentConfig, kind: ContrastKind, pair: (usize, usize)) -> Result<Vec<(f64, f64)>> {
    qq_points(contrast_samples(cfg, kind, pair)?)
}

/// Largest `|empirical - theoretical|` over the points whose plotting
/// position lies in the central `fraction` of the distribution.
pub fn max_central_deviation(points: &[(f64, f64)], fraction: f64) -> f64 {
    let r = points.len() as f64;
    let tail = 0.5 * (1.0 - fraction);
    points
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let p = (*k as f64 + 0.5) / r;
            p >= tail && p <= 1.0 - tail
        })
        .map(|(_, (t, e))| (e - t).abs())
        .fold(0.0, f64::max)
}

pub const EXPERIMENT_HEADER: &str = "family,n,L_rule,i,j,coverage_pct,mean_ci_length,nonexist_pct,reps";

fn opt_cell(value: Option<f64>, digits: usize) -> String {
    value.map_or_else(|| "NA".to_string(), |v| format!("{v:.digits$}"))
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(EXPERIMENT_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.2},{}",
            row.family,
            row.n,
            row.l_rule,
            row.i,
            row.j,
            opt_cell(row.coverage_pct, 2),
            opt_cell(row.mean_ci_length, 6),
            row.nonexist_pct,
            row.reps
        );
    }
    out
}

pub fn qq_to_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("theoretical,empirical\n");
    for (t, e) in points {
        let _ = writeln!(out, "{t:.10},{e:.10}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: WeightFamily) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(family, vec![20], vec![LRule::Zero], vec![(1, 2), (3, 7)]);
        cfg.replications = 40;
        cfg.base_seed = 7;
        cfg
    }

    #[test]
    fn validation() {
        let mut cfg = small(WeightFamily::binary());
        assert!(cfg.validate().is_ok());
        cfg.pairs.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.pairs.push((2, 21));
        assert!(cfg.validate().is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.pairs.push((2, 2));
        assert!(cfg.validate().is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.level = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.step_mode = "newton-krylov".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_config_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"family": "geometric", "n_values": [50], "L_rules": ["zero", "sqrtlog"], "pairs": [[1, 2]]}"#,
        )
        .unwrap();
        assert_eq!(cfg.family, WeightFamily::geometric());
        assert_eq!(cfg.replications, 1000);
        assert_eq!(cfg.level, 0.95);
        assert_eq!(cfg.parallelism, 1);
        assert_eq!(cfg.l_rules, vec![LRule::Zero, LRule::SqrtLog]);
        assert!(ExperimentConfig::from_json(r#"{"family": "binary", "n_values": [50], "L_rules": ["zero"], "pairs": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"family": "binary", "n_values": [50], "L_rules": ["zero"], "pairs": [[1,2]], "bogus": 1}"#).is_err());
    }

    #[test]
    fn rows_are_well_formed() {
        let cfg = small(WeightFamily::exponential());
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let cov = row.coverage_pct.unwrap();
            assert!((0.0..=100.0).contains(&cov));
            let expected_used = (cfg.replications as f64 * (1.0 - row.nonexist_pct / 100.0)).round() as usize;
            assert_eq!(row.reps, expected_used);
        }
    }

    #[test]
    fn deterministic_across_parallelism() {
        let mut cfg = small(WeightFamily::geometric());
        let a = rows_to_csv(&run_experiment(&cfg).unwrap());
        cfg.parallelism = 3;
        let b = rows_to_csv(&run_experiment(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn csv_uses_na_for_empty_cells() {
        let row = ExperimentRow {
            family: "binary".into(),
            n: 200,
            l_rule: LRule::Log,
            i: 1,
            j: 2,
            coverage_pct: None,
            mean_ci_length: None,
            nonexist_pct: 100.0,
            reps: 0,
        };
        let csv = rows_to_csv(&[row]);
        assert_eq!(csv, format!("{EXPERIMENT_HEADER}\nbinary,200,log,1,2,NA,NA,100.00,0\n"));
    }

    #[test]
    fn qq_requires_a_single_cell_and_enough_fits() {
        let mut cfg = small(WeightFamily::binary());
        cfg.n_values = vec![20, 30];
        assert!(qq_export(&cfg, ContrastKind::Xi, (1, 2)).is_err());
        let mut cfg = small(WeightFamily::binary());
        cfg.replications = 5;
        assert!(matches!(
            qq_export(&cfg, ContrastKind::Xi, (1, 2)),
            Err(Error::InsufficientData { need: 10, .. })
        ));
        let cfg = small(WeightFamily::binary());
        assert!(qq_export(&cfg, ContrastKind::Eta, (1, 20)).is_err());
    }

    #[test]
    fn qq_with_exact_estimates_is_flat_zero() {
        let cfg = small(WeightFamily::exponential());
        let oracle = |_: &BiDegree, truth: &ParamVector| {
            Ok(FitResult {
                theta_hat: truth.clone(),
                converged: true,
                existence: Existence::Exists,
                iterations: 0,
                residual_norm_inf: 0.0,
                trace: Vec::new(),
            })
        };
        let samples = contrast_samples_with(&cfg, ContrastKind::Xi, (1, 2), &oracle).unwrap();
        let points = qq_points(samples).unwrap();
        assert_eq!(points.len(), 40);
        assert!(points.iter().all(|&(_, e)| e == 0.0));
        assert!((points[0].0 - normal_quantile(0.5 / 40.0)).abs() < 1e-15);
    }

    #[test]
    fn central_deviation_ignores_tails() {
        let points: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = normal_quantile((k as f64 + 0.5) / 100.0);
                (t, if k == 0 { t + 5.0 } else { t + 0.01 })
            })
            .collect();
        assert!((max_central_deviation(&points, 0.98) - 0.01).abs() < 1e-12);
        assert!((max_central_deviation(&points, 1.0) - 5.0).abs() < 1e-12);
    }
}
