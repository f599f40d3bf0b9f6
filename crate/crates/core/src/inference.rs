//! Plug-in variances, standardized contrasts and confidence intervals.
//!
//! Contrasts are formed from the stored parameters. For negated families
//! these are the rates `θ̄ = -θ`; a contrast of rates is the negated contrast
//! of natural parameters, with identical variance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::WeightFamily;
use crate::fisher::fisher_info;
use crate::model::ParamVector;
use crate::normal::two_sided_z;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCov {
    /// `v̂_{1,1}, ..., v̂_{2n-1,2n-1}, v̂_{2n,2n}` (length `2n`).
    pub v_hat_diag: Vec<f64>,
    pub level: f64,
}

impl AsymptoticCov {
    pub fn new(v_hat_diag: Vec<f64>, level: f64) -> Result<Self> {
        check_level(level)?;
        if v_hat_diag.len() < 4 || v_hat_diag.len() % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "variance diagonal needs even length >= 4, got {}",
                v_hat_diag.len()
            )));
        }
        if let Some(v) = v_hat_diag.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidConfig(format!("variance diagonal entries must be positive, got {v}")));
        }
        Ok(Self { v_hat_diag, level })
    }

    pub fn n(&self) -> usize {
        self.v_hat_diag.len() / 2
    }

    pub fn with_level(mut self, level: f64) -> Result<Self> {
        check_level(level)?;
        self.level = level;
        Ok(self)
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

/// `v̂_{i,i}` from the Fisher information at `θ̂`, with level 0.95.
pub fn plug_in_variances(theta_hat: &ParamVector, family: &WeightFamily) -> Result<AsymptoticCov> {
    let info = fisher_info(theta_hat, family)?;
    AsymptoticCov::new(info.diagonal_with_corner(), 0.95)
}

/// Which parameter combination a contrast standardizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastKind {
    /// `α_i - α_j`.
    Xi,
    /// `α_i + β_j`, `j ≤ n-1`.
    Zeta,
    /// `β_i - β_j`, `i, j ≤ n-1`.
    Eta,
}

impl ContrastKind {
    pub fn name(self) -> &'static str {
        match self {
            ContrastKind::Xi => "xi",
            ContrastKind::Zeta => "zeta",
            ContrastKind::Eta => "eta",
        }
    }
}

impl FromStr for ContrastKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xi" => Ok(ContrastKind::Xi),
            "zeta" => Ok(ContrastKind::Zeta),
            "eta" => Ok(ContrastKind::Eta),
            _ => Err(Error::Unknown {
                kind: "contrast",
                name: s.into(),
                known: "xi, zeta, eta".into(),
            }),
        }
    }
}

impl fmt::Display for ContrastKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Selects the two parameters and two variance-diagonal slots (0-based)
/// of a contrast, and whether the parameters are added or subtracted.
struct Layout {
    first: usize,
    second: usize,
    add: bool,
}

fn layout(kind: ContrastKind, i: usize, j: usize, n: usize) -> Result<Layout> {
    let check = |index: usize, max: usize| {
        if (1..=max).contains(&index) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, max })
        }
    };
    // positions in the concatenated vector (α₁..α_n, β₁..β_n)
    match kind {
        ContrastKind::Xi => {
            check(i, n)?;
            check(j, n)?;
            Ok(Layout { first: i - 1, second: j - 1, add: false })
        }
        ContrastKind::Zeta => {
            check(i, n)?;
            check(j, n - 1)?;
            Ok(Layout { first: i - 1, second: n + j - 1, add: true })
        }
        ContrastKind::Eta => {
            check(i, n - 1)?;
            check(j, n - 1)?;
            Ok(Layout { first: n + i - 1, second: n + j - 1, add: false })
        }
    }
}

fn combine(l: &Layout, alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    let at = |k: usize| if k < n { alpha[k] } else { beta[k - n] };
    if l.add {
        at(l.first) + at(l.second)
    } else {
        at(l.first) - at(l.second)
    }
}

fn std_error(l: &Layout, cov: &AsymptoticCov) -> f64 {
    (1.0 / cov.v_hat_diag[l.first] + 1.0 / cov.v_hat_diag[l.second]).sqrt()
}

fn check_dims(theta: &ParamVector, cov: &AsymptoticCov) -> Result<()> {
    if theta.n() == cov.n() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: cov.n(),
            got: theta.n(),
        })
    }
}

/// Standardized contrast, with 1-based `i`, `j`.
///
/// The standard error is `(1/v̂_a + 1/v̂_b)^{1/2}` for the two diagonal
/// entries involved; the `v̂_{2n,2n}` cross terms are left out for all three
/// kinds.
pub fn contrast_stat(
    kind: ContrastKind,
    i: usize,
    j: usize,
    theta_hat: &ParamVector,
    theta_true: &ParamVector,
    cov: &AsymptoticCov,
) -> Result<f64> {
    check_dims(theta_hat, cov)?;
    check_dims(theta_true, cov)?;
    let l = layout(kind, i, j, cov.n())?;
    let estimate = combine(&l, theta_hat.alpha(), theta_hat.beta());
    let truth = combine(&l, theta_true.alpha(), theta_true.beta());
    Ok((estimate - truth) / std_error(&l, cov))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wald interval for any contrast kind.
pub fn contrast_interval(
    kind: ContrastKind,
    i: usize,
    j: usize,
    theta_hat: &ParamVector,
    cov: &AsymptoticCov,
    level: f64,
) -> Result<Interval> {
    check_level(level)?;
    check_dims(theta_hat, cov)?;
    let l = layout(kind, i, j, cov.n())?;
    let center = combine(&l, theta_hat.alpha(), theta_hat.beta());
    let half = two_sided_z(level) * std_error(&l, cov);
    Ok(Interval {
        lo: center - half,
        hi: center + half,
    })
}

/// Interval for `α_i - α_j`.
pub fn ci_for_contrast(i: usize, j: usize, theta_hat: &ParamVector, cov: &AsymptoticCov, level: f64) -> Result<Interval> {
    contrast_interval(ContrastKind::Xi, i, j, theta_hat, cov, level)
}
