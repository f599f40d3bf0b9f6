//! Parameterization, sufficient statistics and the moment-residual system.
//!
//! A graph on `n` vertices carries `2n - 1` free parameters: the out-degree
//! effects `α₁..α_n` and the in-degree effects `β₁..β_{n-1}`, with `β_n`
//! pinned to zero. Internally vertices are 0-based; everything user-facing
//! (errors, serialized output) is 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{Orientation, WeightFamily};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamVector {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    orientation: Orientation,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    orientation: Orientation,
}

impl<'de> Deserialize<'de> for ParamVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawParams::deserialize(d)?;
        ParamVector::new(raw.alpha, raw.beta, raw.orientation).map_err(serde::de::Error::custom)
    }
}

impl ParamVector {
    /// Builds a parameter vector; `beta` must have `beta[n-1] == 0`.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, orientation: Orientation) -> Result<Self> {
        let n = alpha.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 vertices, got {n}")));
        }
        if beta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: beta.len(),
            });
        }
        if beta[n - 1] != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "identifiability requires beta_{n} = 0, got {}",
                beta[n - 1]
            )));
        }
        Ok(Self {
            alpha,
            beta,
            orientation,
        })
    }

    pub fn zeros(n: usize, orientation: Orientation) -> Result<Self> {
        Self::new(vec![0.0; n], vec![0.0; n], orientation)
    }

    /// Splits a `2n - 1` vector `(α₁..α_n, β₁..β_{n-1})`.
    pub fn from_free(free: &[f64], orientation: Orientation) -> Result<Self> {
        if free.len() < 3 || free.len() % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "free parameter vector must have odd length 2n-1 >= 3, got {}",
                free.len()
            )));
        }
        let n = (free.len() + 1) / 2;
        let alpha = free[..n].to_vec();
        let mut beta = free[n..].to_vec();
        beta.push(0.0);
        Self::new(alpha, beta, orientation)
    }

    pub fn free(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n - 1);
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.beta[..n - 1]);
        out
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// `α_i + β_j`, 0-based.
    #[inline]
    pub fn pair_sum(&self, i: usize, j: usize) -> f64 {
        self.alpha[i] + self.beta[j]
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Smallest pair-sum over `i ≠ j`.
    pub fn min_pair_sum(&self) -> f64 {
        let n = self.n();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    min = min.min(self.pair_sum(i, j));
                }
            }
        }
        min
    }

    /// Applies the identifiability-preserving shift `(α - c, β + c)`; the
    /// result no longer satisfies `β_n = 0` unless `c = 0`, so it is returned
    /// as raw vectors.
    pub fn shifted(&self, c: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.alpha.iter().map(|a| a - c).collect(),
            self.beta.iter().map(|b| b + c).collect(),
        )
    }

    /// Checks orientation and that every off-diagonal pair-sum is in the domain.
    pub fn validate(&self, family: &WeightFamily) -> Result<()> {
        if self.orientation != family.orientation() {
            return Err(Error::InvalidConfig(format!(
                "{family} parameters must be stored in {:?} orientation",
                family.orientation()
            )));
        }
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let s = self.pair_sum(i, j);
                if !family.in_domain(s) {
                    return Err(Error::InvalidParameter {
                        family: family.spec(),
                        i: i + 1,
                        j: j + 1,
                        value: s,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Observed out-degrees `d` and in-degrees `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiDegree {
    pub d: Vec<f64>,
    pub b: Vec<f64>,
}

impl BiDegree {
    pub fn new(d: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if d.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: d.len(),
                got: b.len(),
            });
        }
        if d.len() < 2 {
            return Err(Error::InvalidConfig("need at least 2 vertices".into()));
        }
        Ok(Self { d, b })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// `(d₁..d_n, b₁..b_{n-1})`.
    pub fn g(&self) -> Vec<f64> {
        let n = self.n();
        let mut g = self.d.clone();
        g.extend_from_slice(&self.b[..n - 1]);
        g
    }

    /// `|Σd - Σb|`.
    pub fn sum_gap(&self) -> f64 {
        (self.d.iter().sum::<f64>() - self.b.iter().sum::<f64>()).abs()
    }
}

/// Weighted directed graph without self-loops, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: Vec<f64>,
}

impl Graph {
    /// Validates the diagonal and that every weight lies in the family support.
    pub fn new(n: usize, weights: Vec<f64>, family: &WeightFamily) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 vertices, got {n}")));
        }
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let a = weights[i * n + j];
                let bad = if i == j { a != 0.0 } else { !family.in_support(a) };
                if bad {
                    return Err(Error::InvalidWeight {
                        family: family.spec(),
                        i: i + 1,
                        j: j + 1,
                        value: a,
                    });
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub(crate) fn from_raw(n: usize, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), n * n);
        Self { n, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of edge `i → j`, 0-based.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nonzero edges as 0-based `(src, dst, weight)`, row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(move |(k, &w)| (k / n, k % n, w))
    }
}

/// `E[a]` at pair-sum `s`.
pub fn edge_mean(family: &WeightFamily, s: f64) -> Result<f64> {
    family.check(s)?;
    Ok(family.mean(s))
}

/// `Var(a)` at pair-sum `s`.
pub fn edge_variance(family: &WeightFamily, s: f64) -> Result<f64> {
    family.check(s)?;
    Ok(family.variance(s))
}

/// Row sums become out-degrees, column sums in-degrees.
pub fn bi_degrees(graph: &Graph) -> BiDegree {
    let n = graph.n();
    let mut d = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let a = graph.weight(i, j);
            d[i] += a;
            b[j] += a;
        }
    }
    BiDegree { d, b }
}

/// Evaluates `f(s_ij)` on every off-diagonal pair, returning row-major
/// values with zero diagonal.
pub(crate) fn pair_map(theta: &ParamVector, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = theta.n();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let a = theta.alpha[i];
        let row = &mut out[i * n..(i + 1) * n];
        for (j, slot) in row.iter_mut().enumerate() {
            if i != j {
                *slot = f(a + theta.beta[j]);
            }
        }
    }
    out
}

fn row_col_sums(values: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            rows[i] += v;
            cols[j] += v;
        }
    }
    (rows, cols)
}

/// Expected out- and in-degrees under `θ`.
pub fn expected_degrees(theta: &ParamVector, family: &WeightFamily) -> Result<BiDegree> {
    theta.validate(family)?;
    let means = pair_map(theta, |s| family.mean(s));
    let (d, b) = row_col_sums(&means, theta.n());
    Ok(BiDegree { d, b })
}

/// `F(θ) = g - E_θ g`, length `2n - 1`; its root is the MLE.
pub fn moment_residual(theta: &ParamVector, g: &BiDegree, family: &WeightFamily) -> Result<Vec<f64>> {
    let n = theta.n();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.n(),
        });
    }
    let expected = expected_degrees(theta, family)?;
    let mut f = Vec::with_capacity(2 * n - 1);
    f.extend(g.d.iter().zip(&expected.d).map(|(o, e)| o - e));
    f.extend(g.b[..n - 1].iter().zip(&expected.b).map(|(o, e)| o - e));
    Ok(f)
}

/// Log-likelihood `θᵀg - Σ_{i≠j} Z₁(θ_i + θ_j)` in natural parameters.
///
/// For negated families the natural parameters are `-θ̄`, so the linear term
/// flips sign. Its gradient with respect to the stored parameters is
/// `orientation.sign() * F(θ)`.
pub fn log_likelihood(theta: &ParamVector, g: &BiDegree, family: &WeightFamily) -> Result<f64> {
    let n = theta.n();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.n(),
        });
    }
    theta.validate(family)?;
    let linear: f64 = theta.alpha.iter().zip(&g.d).map(|(a, d)| a * d).sum::<f64>()
        + theta.beta.iter().zip(&g.b).map(|(b, x)| b * x).sum::<f64>();
    let partition: f64 = pair_map(theta, |s| family.log_partition(s)).iter().sum();
    Ok(family.orientation().sign() * linear - partition)
}
