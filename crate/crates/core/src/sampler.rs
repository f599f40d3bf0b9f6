//! Random graphs drawn edge-by-edge from the model, and the linear
//! parameter designs used by the simulation harness.
//!
//! Randomness comes from `ChaCha8Rng`. A stream is fully determined by its
//! 64-bit seed; replication `r` of an experiment uses
//! `base_seed ^ splitmix64(r)` so replications can run on any worker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::WeightFamily;
use crate::model::{Graph, ParamVector};

/// How the ramp magnitude `L` scales with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LRule {
    Zero,
    LogLog,
    SqrtLog,
    Log,
    SqrtN,
}

impl LRule {
    pub fn value(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            LRule::Zero => 0.0,
            LRule::LogLog => n.ln().ln(),
            LRule::SqrtLog => n.ln().sqrt(),
            LRule::Log => n.ln(),
            LRule::SqrtN => n.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LRule::Zero => "zero",
            LRule::LogLog => "loglog",
            LRule::SqrtLog => "sqrtlog",
            LRule::Log => "log",
            LRule::SqrtN => "sqrtn",
        }
    }

    pub const ALL: [LRule; 5] = [LRule::Zero, LRule::LogLog, LRule::SqrtLog, LRule::Log, LRule::SqrtN];
}

impl std::str::FromStr for LRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LRule::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                kind: "L rule",
                name: s.to_string(),
                known: LRule::ALL.map(LRule::name).join(", "),
            })
    }
}

impl std::fmt::Display for LRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Linear-ramp parameter design: `α_{i+1} = offset + (n-1-i)·L/(n-1)`,
/// `β` equal to `α` except `β_n = 0`.
#[derive(Debug, Clone)]
pub struct SimDesign {
    pub family: WeightFamily,
    pub n: usize,
    pub l: f64,
}

impl SimDesign {
    pub fn new(family: WeightFamily, n: usize, l: f64) -> Self {
        Self { family, n, l }
    }

    pub fn with_rule(family: WeightFamily, n: usize, rule: LRule) -> Self {
        Self::new(family, n, rule.value(n))
    }

    pub fn offset(&self) -> f64 {
        self.family.design_offset()
    }
}

pub fn design_params(design: &SimDesign) -> Result<ParamVector> {
    let n = design.n;
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 vertices, got {n}")));
    }
    if !(design.l >= 0.0) || !design.l.is_finite() {
        return Err(Error::InvalidConfig(format!("ramp magnitude must be finite and >= 0, got {}", design.l)));
    }
    let offset = design.offset();
    let step = design.l / (n - 1) as f64;
    let alpha: Vec<f64> = (0..n).map(|i| offset + (n - 1 - i) as f64 * step).collect();
    let mut beta = alpha.clone();
    beta[n - 1] = 0.0;
    ParamVector::new(alpha, beta, design.family.orientation())
}

/// SplitMix64 finalizer; decorrelates consecutive replication indices.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_seed(base_seed: u64, replication: u64) -> u64 {
    base_seed ^ splitmix64(replication)
}

/// Uniform on `(0, 1]`.
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Draws the `n(n-1)` independent edges, row-major.
pub fn sample_graph(theta: &ParamVector, family: &WeightFamily, seed: u64) -> Result<Graph> {
    theta.validate(family)?;
    let n = theta.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let u = open_unit(&mut rng);
                weights[i * n + j] = family.draw(theta.pair_sum(i, j), u);
            }
        }
    }
    Ok(Graph::from_raw(n, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bi_degrees, expected_degrees};

    #[test]
    fn design_examples() {
        let theta = design_params(&SimDesign::new(WeightFamily::binary(), 100, 0.0)).unwrap();
        assert!(theta.alpha().iter().chain(theta.beta()).all(|&x| x == 0.0));

        let theta = design_params(&SimDesign::new(WeightFamily::binary(), 5, 4.0)).unwrap();
        assert_eq!(theta.alpha(), &[4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(theta.beta(), &[4.0, 3.0, 2.0, 1.0, 0.0]);

        let theta = design_params(&SimDesign::new(WeightFamily::geometric(), 5, 0.0)).unwrap();
        assert!(theta.alpha().iter().all(|&x| (x - 0.2).abs() < 1e-15));
        assert_eq!(theta.beta(), &[0.2, 0.2, 0.2, 0.2, 0.0]);
    }

    #[test]
    fn rate_designs_stay_in_domain() {
        for fam in [WeightFamily::exponential(), WeightFamily::geometric()] {
            for rule in LRule::ALL {
                let d = SimDesign::with_rule(fam.clone(), 50, rule);
                let theta = design_params(&d).unwrap();
                theta.validate(&fam).unwrap();
                assert!(theta.min_pair_sum() >= d.offset() - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(design_params(&SimDesign::new(WeightFamily::binary(), 1, 0.0)).is_err());
        assert!(design_params(&SimDesign::new(WeightFamily::binary(), 5, -1.0)).is_err());
        assert!(design_params(&SimDesign::new(WeightFamily::binary(), 5, f64::NAN)).is_err());
    }

    #[test]
    fn l_rules_parse_and_evaluate() {
        assert_eq!("SqrtLog".parse::<LRule>().unwrap(), LRule::SqrtLog);
        assert!("cubic".parse::<LRule>().is_err());
        assert!((LRule::Log.value(100) - 100f64.ln()).abs() < 1e-15);
        assert_eq!(LRule::SqrtN.value(49), 7.0);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let fam = WeightFamily::geometric();
        let theta = design_params(&SimDesign::new(fam.clone(), 20, 1.0)).unwrap();
        let a = sample_graph(&theta, &fam, 7).unwrap();
        let b = sample_graph(&theta, &fam, 7).unwrap();
        let c = sample_graph(&theta, &fam, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((0..20).all(|i| a.weight(i, i) == 0.0));
    }

    #[test]
    fn binary_density_at_zero() {
        let fam = WeightFamily::binary();
        let theta = ParamVector::zeros(100, fam.orientation()).unwrap();
        let g = sample_graph(&theta, &fam, 11).unwrap();
        let edges = g.weights().iter().sum::<f64>();
        let density = edges / 9900.0;
        // 3σ for 9900 Bernoulli(1/2)
        assert!((density - 0.5).abs() < 3.0 * 0.5 / 9900f64.sqrt(), "{density}");
    }

    #[test]
    fn exponential_pooled_mean() {
        let fam = WeightFamily::exponential();
        let n = 50;
        let theta = ParamVector::new(vec![2.0; n], vec![0.0; n], fam.orientation()).unwrap();
        let mut total = 0.0;
        let reps = 20;
        for r in 0..reps {
            let g = sample_graph(&theta, &fam, replication_seed(3, r)).unwrap();
            total += g.weights().iter().sum::<f64>();
        }
        let count = (reps as usize * n * (n - 1)) as f64;
        let mean = total / count;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / count.sqrt(), "{mean}");
    }

    #[test]
    fn empirical_degrees_track_expectation() {
        let fam = WeightFamily::geometric();
        let n = 30;
        let reps = 2000;
        let theta = design_params(&SimDesign::new(fam.clone(), n, 1.0)).unwrap();
        let expected = expected_degrees(&theta, &fam).unwrap();
        let mut sum = vec![0.0; n];
        let mut sumsq = vec![0.0; n];
        for r in 0..reps {
            let g = sample_graph(&theta, &fam, replication_seed(99, r)).unwrap();
            let bd = bi_degrees(&g);
            for i in 0..n {
                sum[i] += bd.d[i];
                sumsq[i] += bd.d[i] * bd.d[i];
            }
        }
        for i in 0..n {
            let mean = sum[i] / reps as f64;
            let var = sumsq[i] / reps as f64 - mean * mean;
            let z = (mean - expected.d[i]) / (var / reps as f64).sqrt();
            assert!(z.abs() < 4.0, "vertex {i}: z = {z}");
        }
    }

    #[test]
    fn streams_with_different_seeds_are_uncorrelated() {
        let fam = WeightFamily::exponential();
        let n = 60;
        let theta = ParamVector::new(vec![1.0; n], vec![0.0; n], fam.orientation()).unwrap();
        let a = sample_graph(&theta, &fam, replication_seed(5, 0)).unwrap();
        let b = sample_graph(&theta, &fam, replication_seed(5, 1)).unwrap();
        let xs: Vec<f64> = a.edges().map(|e| e.2).collect();
        let ys: Vec<f64> = b.edges().map(|e| e.2).collect();
        let m = xs.len().min(ys.len());
        let mx = xs[..m].iter().sum::<f64>() / m as f64;
        let my = ys[..m].iter().sum::<f64>() / m as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for k in 0..m {
            sxy += (xs[k] - mx) * (ys[k] - my);
            sxx += (xs[k] - mx).powi(2);
            syy += (ys[k] - my).powi(2);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 4.0 / (m as f64).sqrt(), "{corr}");
    }
}
