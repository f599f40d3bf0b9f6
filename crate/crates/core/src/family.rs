//! Edge-weight distributions.
//!
//! Every family is a one-parameter exponential family in the pair-sum
//! `s = α_i + β_j`. Binary edges are parameterized by the natural parameter;
//! the exponential, geometric and finite-discrete families are stored in the
//! negated orientation `s̄ = -(α_i + β_j)` so that their pair-sums act as
//! positive rates. All code paths work on the stored ("oriented") pair-sum and
//! consult [`Orientation`] for signs.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Whether stored parameters are the natural parameters or their negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Natural,
    Negated,
}

impl Orientation {
    /// `+1` for natural, `-1` for negated parameters.
    ///
    /// The derivative of the edge mean with respect to the stored pair-sum is
    /// `sign() * variance`, and the gradient of the log-likelihood with
    /// respect to stored parameters is `sign() * F(θ)`.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Natural => 1.0,
            Orientation::Negated => -1.0,
        }
    }
}

/// One edge-weight distribution, parameterized by the stored pair-sum.
pub trait EdgeFamily: Send + Sync + fmt::Debug {
    /// Canonical spec string, e.g. `binary` or `finite:4`.
    fn spec(&self) -> String;

    fn orientation(&self) -> Orientation;

    /// Is `s` a valid pair-sum for this family?
    fn in_domain(&self, s: f64) -> bool;

    /// `E[a]` at pair-sum `s`.
    fn mean(&self, s: f64) -> f64;

    /// `Var(a)` at pair-sum `s`; this is also the Fisher cross entry.
    fn variance(&self, s: f64) -> f64;

    /// Per-edge log-partition `Z₁` evaluated at the natural parameter that
    /// corresponds to the stored pair-sum `s`.
    fn log_partition(&self, s: f64) -> f64;

    /// Inverse CDF: maps `u ∈ (0, 1]` to an edge weight.
    fn draw(&self, s: f64, u: f64) -> f64;

    fn in_support(&self, a: f64) -> bool;

    /// Largest possible edge weight, if bounded.
    fn support_max(&self) -> Option<f64>;

    fn integer_valued(&self) -> bool;

    /// Constant added to the linear parameter ramp of simulation designs.
    fn design_offset(&self) -> f64;

    /// Pair-sum whose edge mean matches `mean`, after clamping `mean` into
    /// the range that keeps a graph with `n` vertices away from the boundary.
    fn start_pair_sum(&self, mean: f64, n: usize) -> f64;

    /// Lipschitz constants `(K₁, K₂)` of the Jacobian on the ball of radius
    /// `2r` around a point whose smallest pair-sum is `min_pair_sum`.
    fn lipschitz(&self, n: usize, min_pair_sum: f64, r: f64) -> Result<(f64, f64), &'static str>;
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn clamp_fraction(mean: f64, max: f64, n: usize) -> f64 {
    let margin = max / (2.0 * (n.max(2) - 1) as f64);
    mean.clamp(margin, max - margin)
}

#[derive(Debug, Clone, Copy)]
pub struct Binary;

impl EdgeFamily for Binary {
    fn spec(&self) -> String {
        "binary".into()
    }

    fn orientation(&self) -> Orientation {
        Orientation::Natural
    }

    fn in_domain(&self, s: f64) -> bool {
        s.is_finite()
    }

    fn mean(&self, s: f64) -> f64 {
        logistic(s)
    }

    fn variance(&self, s: f64) -> f64 {
        let e = (-s.abs()).exp();
        e / ((1.0 + e) * (1.0 + e))
    }

    fn log_partition(&self, s: f64) -> f64 {
        s.max(0.0) + (-s.abs()).exp().ln_1p()
    }

    fn draw(&self, s: f64, u: f64) -> f64 {
        if u <= logistic(s) {
            1.0
        } else {
            0.0
        }
    }

    fn in_support(&self, a: f64) -> bool {
        a == 0.0 || a == 1.0
    }

    fn support_max(&self) -> Option<f64> {
        Some(1.0)
    }

    fn integer_valued(&self) -> bool {
        true
    }

    fn design_offset(&self) -> f64 {
        0.0
    }

    fn start_pair_sum(&self, mean: f64, n: usize) -> f64 {
        let p = clamp_fraction(mean, 1.0, n);
        (p / (1.0 - p)).ln()
    }

    fn lipschitz(&self, n: usize, _min_pair_sum: f64, _r: f64) -> Result<(f64, f64), &'static str> {
        let k = (n - 1) as f64;
        Ok((k, k / 2.0))
    }
}

/// Exponential weights with rate `s̄ > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Exponential;

impl EdgeFamily for Exponential {
    fn spec(&self) -> String {
        "exponential".into()
    }

    fn orientation(&self) -> Orientation {
        Orientation::Negated
    }

    fn in_domain(&self, s: f64) -> bool {
        s > 0.0 && s.is_finite()
    }

    fn mean(&self, s: f64) -> f64 {
        1.0 / s
    }

    fn variance(&self, s: f64) -> f64 {
        1.0 / (s * s)
    }

    fn log_partition(&self, s: f64) -> f64 {
        -s.ln()
    }

    fn draw(&self, s: f64, u: f64) -> f64 {
        -u.ln() / s
    }

    fn in_support(&self, a: f64) -> bool {
        a >= 0.0 && a.is_finite()
    }

    fn support_max(&self) -> Option<f64> {
        None
    }

    fn integer_valued(&self) -> bool {
        false
    }

    fn design_offset(&self) -> f64 {
        1.0
    }

    fn start_pair_sum(&self, mean: f64, n: usize) -> f64 {
        1.0 / mean.max(0.5 / (n.max(2) - 1) as f64)
    }

    fn lipschitz(&self, n: usize, min_pair_sum: f64, r: f64) -> Result<(f64, f64), &'static str> {
        let gap = min_pair_sum - 4.0 * r;
        if gap <= 0.0 {
            return Err("min pair-sum does not exceed 4r");
        }
        let k = (n - 1) as f64 / gap.powi(3);
        Ok((2.0 * k, k))
    }
}

/// Geometric weights on `{0, 1, 2, ...}` with `P(a) ∝ e^{-s̄ a}`, `s̄ > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Geometric;

impl EdgeFamily for Geometric {
    fn spec(&self) -> String {
        "geometric".into()
    }

    fn orientation(&self) -> Orientation {
        Orientation::Negated
    }

    fn in_domain(&self, s: f64) -> bool {
        s > 0.0 && s.is_finite()
    }

    fn mean(&self, s: f64) -> f64 {
        // 1 / (e^s - 1), written to stay accurate for both small and large s
        (-s).exp() / -(-s).exp_m1()
    }

    fn variance(&self, s: f64) -> f64 {
        let q = -(-s).exp_m1();
        (-s).exp() / (q * q)
    }

    fn log_partition(&self, s: f64) -> f64 {
        -(-(-s).exp_m1()).ln()
    }

    fn draw(&self, s: f64, u: f64) -> f64 {
        (-u.ln() / s).floor()
    }

    fn in_support(&self, a: f64) -> bool {
        a >= 0.0 && a.is_finite() && a.fract() == 0.0
    }

    fn support_max(&self) -> Option<f64> {
        None
    }

    fn integer_valued(&self) -> bool {
        true
    }

    fn design_offset(&self) -> f64 {
        0.2
    }

    fn start_pair_sum(&self, mean: f64, n: usize) -> f64 {
        let m = mean.max(0.5 / (n.max(2) - 1) as f64);
        (1.0 / m).ln_1p()
    }

    fn lipschitz(&self, n: usize, min_pair_sum: f64, r: f64) -> Result<(f64, f64), &'static str> {
        let gap = min_pair_sum - 4.0 * r;
        if gap <= 0.0 {
            return Err("min pair-sum does not exceed 4r");
        }
        let e = gap.exp();
        let k = (n - 1) as f64 * e * (1.0 + e) / (e - 1.0).powi(2);
        Ok((2.0 * k, k))
    }
}

/// Weights on `{0, ..., q-1}` with `P(a) ∝ e^{-s̄ a}`; any finite `s̄`.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDiscrete {
    q: usize,
}

/// Moments of the finite pmf at one pair-sum.
struct FiniteMoments {
    log_z: f64,
    mean: f64,
    variance: f64,
}

impl FiniteDiscrete {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidConfig(format!(
                "finite support size must be at least 2, got {q}"
            )));
        }
        Ok(Self { q })
    }

    pub fn support_size(&self) -> usize {
        self.q
    }

    // Unnormalized log-weights are -s·a; shift by their maximum before exponentiating.
    fn shift(&self, s: f64) -> f64 {
        if s >= 0.0 {
            0.0
        } else {
            -s * (self.q - 1) as f64
        }
    }

    fn moments(&self, s: f64) -> FiniteMoments {
        let shift = self.shift(s);
        let (mut z, mut m1) = (0.0, 0.0);
        for a in 0..self.q {
            let a = a as f64;
            let w = (-s * a - shift).exp();
            z += w;
            m1 += a * w;
        }
        let mean = m1 / z;
        // second moment about the mean, summed directly to avoid cancellation
        let mut central = 0.0;
        for a in 0..self.q {
            let a = a as f64;
            let w = (-s * a - shift).exp();
            central += (a - mean) * (a - mean) * w;
        }
        FiniteMoments {
            log_z: shift + z.ln(),
            mean,
            variance: central / z,
        }
    }
}

impl EdgeFamily for FiniteDiscrete {
    fn spec(&self) -> String {
        format!("finite:{}", self.q)
    }

    fn orientation(&self) -> Orientation {
        Orientation::Negated
    }

    fn in_domain(&self, s: f64) -> bool {
        s.is_finite()
    }

    fn mean(&self, s: f64) -> f64 {
        self.moments(s).mean
    }

    fn variance(&self, s: f64) -> f64 {
        self.moments(s).variance
    }

    fn log_partition(&self, s: f64) -> f64 {
        self.moments(s).log_z
    }

    fn draw(&self, s: f64, u: f64) -> f64 {
        let shift = self.shift(s);
        let weights: Vec<f64> = (0..self.q)
            .map(|a| (-s * a as f64 - shift).exp())
            .collect();
        let target = u * weights.iter().sum::<f64>();
        let mut acc = 0.0;
        for (a, w) in weights.iter().enumerate() {
            acc += w;
            if target <= acc {
                return a as f64;
            }
        }
        (self.q - 1) as f64
    }

    fn in_support(&self, a: f64) -> bool {
        a >= 0.0 && a <= (self.q - 1) as f64 && a.fract() == 0.0
    }

    fn support_max(&self) -> Option<f64> {
        Some((self.q - 1) as f64)
    }

    fn integer_valued(&self) -> bool {
        true
    }

    fn design_offset(&self) -> f64 {
        0.0
    }

    fn start_pair_sum(&self, mean: f64, n: usize) -> f64 {
        let target = clamp_fraction(mean, (self.q - 1) as f64, n);
        // mean is strictly decreasing in s
        let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.mean(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn lipschitz(&self, n: usize, _min_pair_sum: f64, _r: f64) -> Result<(f64, f64), &'static str> {
        // |third central moment| <= (q-1)^3 / 4; scaled so q = 2 matches Binary.
        let k = (n - 1) as f64 * ((self.q - 1) as f64).powi(3);
        Ok((k, k / 2.0))
    }
}

/// Built-in families: `binary`, `exponential` (alias `continuous`),
/// `geometric` (alias `discrete`) and `finite:q`.
pub fn builtin_families() -> Registry<dyn EdgeFamily> {
    let mut reg: Registry<dyn EdgeFamily> = Registry::new("weight family");
    reg.register("binary", "Bernoulli edges on {0, 1}", |_| {
        Ok(Arc::new(Binary) as Arc<dyn EdgeFamily>)
    })
    .register("exponential", "exponential weights on [0, inf)", |_| {
        Ok(Arc::new(Exponential) as Arc<dyn EdgeFamily>)
    })
    .register("continuous", "alias of exponential", |_| {
        Ok(Arc::new(Exponential) as Arc<dyn EdgeFamily>)
    })
    .register("geometric", "geometric weights on {0, 1, 2, ...}", |_| {
        Ok(Arc::new(Geometric) as Arc<dyn EdgeFamily>)
    })
    .register("discrete", "alias of geometric", |_| {
        Ok(Arc::new(Geometric) as Arc<dyn EdgeFamily>)
    })
    .register("finite", "weights on {0, ..., q-1}; use finite:q", |arg| {
        let q = arg
            .ok_or_else(|| Error::InvalidConfig("finite family needs a support size, e.g. finite:3".into()))?
            .parse::<usize>()
            .map_err(|e| Error::InvalidConfig(format!("bad finite support size: {e}")))?;
        Ok(Arc::new(FiniteDiscrete::new(q)?) as Arc<dyn EdgeFamily>)
    });
    reg
}

pub fn families() -> &'static Registry<dyn EdgeFamily> {
    static REGISTRY: OnceLock<Registry<dyn EdgeFamily>> = OnceLock::new();
    REGISTRY.get_or_init(builtin_families)
}

/// Shared handle to a registered edge family.
#[derive(Clone)]
pub struct WeightFamily(Arc<dyn EdgeFamily>);

impl WeightFamily {
    pub fn new(inner: Arc<dyn EdgeFamily>) -> Self {
        Self(inner)
    }

    pub fn binary() -> Self {
        Self(Arc::new(Binary))
    }

    pub fn exponential() -> Self {
        Self(Arc::new(Exponential))
    }

    pub fn geometric() -> Self {
        Self(Arc::new(Geometric))
    }

    pub fn finite(q: usize) -> Result<Self> {
        Ok(Self(Arc::new(FiniteDiscrete::new(q)?)))
    }

    /// Checks a pair-sum against the domain.
    pub fn check(&self, s: f64) -> Result<()> {
        if self.in_domain(s) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                family: self.spec(),
                value: s,
            })
        }
    }
}

impl std::ops::Deref for WeightFamily {
    type Target = dyn EdgeFamily;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl fmt::Debug for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFamily({})", self.0.spec())
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.spec())
    }
}

impl PartialEq for WeightFamily {
    fn eq(&self, other: &Self) -> bool {
        self.0.spec() == other.0.spec()
    }
}

impl FromStr for WeightFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        families().resolve(s).map(WeightFamily)
    }
}

impl Serialize for WeightFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.spec())
    }
}

impl<'de> Deserialize<'de> for WeightFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = String::deserialize(deserializer)?;
        spec.parse().map_err(serde::de::Error::custom)
    }
}
