use bidegree::inference::{contrast_stat, plug_in_variances, AsymptoticCov, ContrastKind};
use bidegree::simharness::{run_experiment, ExperimentConfig};
use bidegree::solver::{default_start, existence_check, fit, newton_diagnostics, Existence, Feasibility, FitConfig};
use bidegree::{
    bi_degrees, design_params, expected_degrees, fisher_info, log_likelihood, moment_residual, normal_quantile,
    replication_seed, sample_graph, BiDegree, LRule, Orientation, ParamVector, SimDesign, WeightFamily,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn family_strategy() -> impl Strategy<Value = WeightFamily> {
    prop_oneof![
        Just(WeightFamily::binary()),
        Just(WeightFamily::exponential()),
        Just(WeightFamily::geometric()),
        (2usize..6).prop_map(|q| WeightFamily::finite(q).unwrap()),
    ]
}

/// Parameters valid for `family`: free entries in a range that keeps rate
/// families strictly inside the domain.
fn params_for(family: &WeightFamily, raw: &[f64]) -> ParamVector {
    let n = (raw.len() + 1) / 2;
    let rate = !family.in_domain(0.0);
    let map = |u: f64| if rate { 0.1 + 1.4 * u } else { 4.0 * u - 2.0 };
    let alpha: Vec<f64> = raw[..n].iter().map(|&u| map(u)).collect();
    let mut beta: Vec<f64> = raw[n..].iter().map(|&u| map(u)).collect();
    beta.push(0.0);
    ParamVector::new(alpha, beta, family.orientation()).unwrap()
}

fn theta_strategy(n: std::ops::Range<usize>) -> impl Strategy<Value = (WeightFamily, ParamVector)> {
    (family_strategy(), n).prop_flat_map(|(fam, n)| {
        prop::collection::vec(0.0f64..1.0, 2 * n - 1).prop_map(move |raw| {
            let theta = params_for(&fam, &raw);
            (fam.clone(), theta)
        })
    })
}

fn inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_vector_round_trip((fam, theta) in theta_strategy(2..12)) {
        let back = ParamVector::from_free(&theta.free(), fam.orientation()).unwrap();
        prop_assert_eq!(back.beta()[theta.n() - 1], 0.0);
        prop_assert_eq!(back, theta);
    }

    #[test]
    fn fisher_is_symmetric_and_diagonally_balanced((fam, theta) in theta_strategy(3..10)) {
        let info = fisher_info(&theta, &fam).unwrap();
        let dense = info.materialize();
        prop_assert_eq!(&dense, &dense.transpose());
        let n = theta.n();
        for i in 0..n {
            let cross: f64 = (0..n).map(|j| if i == j { 0.0 } else { info.cross(i, j) }).sum();
            prop_assert!((dense[(i, i)] - cross).abs() <= 1e-12 * cross);
        }
        prop_assert!(info.m() > 0.0 && info.m() <= info.big_m());
        prop_assert!(dense.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn s_apply_is_linear((fam, theta) in theta_strategy(3..10), a in -3.0f64..3.0, seed in any::<u64>()) {
        let info = fisher_info(&theta, &fam).unwrap();
        let s = info.s_approx();
        let dim = info.dim();
        let x: Vec<f64> = (0..dim).map(|k| ((seed.wrapping_add(k as u64) % 1000) as f64 / 500.0) - 1.0).collect();
        let y: Vec<f64> = (0..dim).map(|k| ((k * 7 % 5) as f64) - 2.0).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let lhs = s.apply(&combo).unwrap();
        let sx = s.apply(&x).unwrap();
        let sy = s.apply(&y).unwrap();
        let scale = 1.0 + inf(&lhs);
        for k in 0..dim {
            prop_assert!((lhs[k] - a * sx[k] - sy[k]).abs() <= 1e-12 * scale);
        }
        let dense = s.materialize() * DVector::from_vec(x);
        for k in 0..dim {
            prop_assert!((dense[k] - sx[k]).abs() <= 1e-12 * (1.0 + sx[k].abs()));
        }
    }

    #[test]
    fn structured_solve_inverts_matvec((fam, theta) in theta_strategy(3..15)) {
        let info = fisher_info(&theta, &fam).unwrap();
        let x: Vec<f64> = (0..info.dim()).map(|k| (k as f64 * 0.61).cos()).collect();
        let vx = info.matvec(&x).unwrap();
        let back = info.solve(&vx).unwrap();
        let pcg = info.solve_preconditioned(&vx, 1e-13, 500).unwrap();
        for k in 0..x.len() {
            prop_assert!((back[k] - x[k]).abs() < 1e-7, "schur {} vs {}", back[k], x[k]);
            prop_assert!((pcg[k] - x[k]).abs() < 1e-7, "pcg {} vs {}", pcg[k], x[k]);
        }
    }

    #[test]
    fn likelihood_gradient_is_signed_residual((fam, theta) in theta_strategy(3..7), seed in 0u64..1000) {
        let g = bi_degrees(&sample_graph(&theta, &fam, seed).unwrap());
        let f = moment_residual(&theta, &g, &fam).unwrap();
        let sign = fam.orientation().sign();
        let free = theta.free();
        let h = 1e-5;
        for k in 0..free.len() {
            let at = |delta: f64| {
                let mut p = free.clone();
                p[k] += delta;
                log_likelihood(&ParamVector::from_free(&p, fam.orientation()).unwrap(), &g, &fam).unwrap()
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((numeric - sign * f[k]).abs() <= 1e-5 * (1.0 + f[k].abs()), "{k}: {numeric} vs {}", sign * f[k]);
        }
    }

    #[test]
    fn samples_lie_in_support((fam, theta) in theta_strategy(2..8), seed in any::<u64>()) {
        let graph = sample_graph(&theta, &fam, seed).unwrap();
        for (i, j, w) in graph.edges() {
            prop_assert!(i != j);
            prop_assert!(fam.in_support(w));
        }
    }

    #[test]
    fn xi_and_eta_flip_sign_under_swap((fam, theta) in theta_strategy(4..9), shift in -0.05f64..0.05) {
        let n = theta.n();
        let hat_free: Vec<f64> = theta.free().iter().enumerate().map(|(k, v)| v + shift * (k as f64 % 3.0)).collect();
        let Ok(hat) = ParamVector::from_free(&hat_free, fam.orientation()) else { return Ok(()); };
        prop_assume!(hat.validate(&fam).is_ok());
        let cov = plug_in_variances(&hat, &fam).unwrap();
        for kind in [ContrastKind::Xi, ContrastKind::Eta] {
            let (i, j) = (1, n - 1);
            let a = contrast_stat(kind, i, j, &hat, &theta, &cov).unwrap();
            let b = contrast_stat(kind, j, i, &hat, &theta, &cov).unwrap();
            prop_assert_eq!(a, -b);
        }
    }

    #[test]
    fn normal_quantile_is_increasing(a in 1e-12f64..1.0, b in 1e-12f64..1.0) {
        prop_assume!(a < b && b < 1.0);
        prop_assert!(normal_quantile(a) <= normal_quantile(b));
    }

    #[test]
    fn noise_free_fits_recover_truth((fam, theta) in theta_strategy(4..16)) {
        let g = expected_degrees(&theta, &fam).unwrap();
        prop_assume!(existence_check(&g, &fam) == Feasibility::Feasible);
        for mode in ["exact", "s-approx"] {
            let res = fit(&g, &fam, &FitConfig::default().with_step_mode(mode)).unwrap();
            prop_assert_eq!(res.existence, Existence::Exists, "{} {}", fam, mode);
            prop_assert!(res.residual_norm_inf <= FitConfig::default().residual_tol(theta.n()));
            for (a, b) in res.theta_hat.free().iter().zip(theta.free()) {
                prop_assert!((a - b).abs() < 1e-6, "{} {}: {} vs {}", fam, mode, a, b);
            }
        }
    }
}

#[test]
fn zeta_uses_out_and_in_diagonals() {
    let n = 4;
    let diag = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
    let cov = AsymptoticCov::new(diag, 0.95).unwrap();
    let truth = ParamVector::zeros(n, Orientation::Natural).unwrap();
    let hat = ParamVector::new(vec![0.0, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.25, 0.0], Orientation::Natural).unwrap();
    let z = contrast_stat(ContrastKind::Zeta, 2, 3, &hat, &truth, &cov).unwrap();
    assert!((z - 0.75 / (1.0 / 2.0 + 1.0 / 64.0f64).sqrt()).abs() < 1e-14);
    let e = contrast_stat(ContrastKind::Eta, 3, 1, &hat, &truth, &cov).unwrap();
    assert!((e - 0.25 / (1.0 / 64.0 + 1.0 / 16.0f64).sqrt()).abs() < 1e-14);
}

#[test]
fn binary_first_step_is_short_for_sampled_degrees() {
    let fam = WeightFamily::binary();
    let n = 100;
    let theta = ParamVector::zeros(n, Orientation::Natural).unwrap();
    let mut rs: Vec<f64> = (0..200)
        .map(|r| {
            let g = bi_degrees(&sample_graph(&theta, &fam, replication_seed(31, r)).unwrap());
            newton_diagnostics(&theta, &g, &fam, 1.0).unwrap().r
        })
        .collect();
    rs.sort_by(f64::total_cmp);
    let median = 0.5 * (rs[99] + rs[100]);
    let rate = ((n as f64).ln() / n as f64).sqrt();
    // about 0.70 here; an independent dense computation agrees
    assert!(median > rate && median < 3.5 * rate, "median r = {median}, sqrt(log n / n) = {rate}");
}

#[test]
fn nonexistence_grows_with_ramp_magnitude() {
    let mut cfg = ExperimentConfig::new(
        WeightFamily::binary(),
        vec![60],
        vec![LRule::Zero, LRule::LogLog, LRule::SqrtLog, LRule::Log],
        vec![(1, 2)],
    );
    cfg.replications = 200;
    cfg.base_seed = 77;
    let rows = run_experiment(&cfg).unwrap();
    let pct: Vec<f64> = rows.iter().map(|r| r.nonexist_pct).collect();
    for w in pct.windows(2) {
        assert!(w[1] >= w[0] - 1.0, "{pct:?}");
    }
    assert_eq!(pct[3], 100.0);
}

#[test]
fn default_start_is_in_domain_for_extreme_degrees() {
    let cases = [
        (WeightFamily::binary(), vec![0.0, 9.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0]),
        (WeightFamily::exponential(), vec![0.0, 1e-9, 3.0, 1e6, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        (WeightFamily::geometric(), vec![0.0, 1.0, 300.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]),
        (WeightFamily::finite(3).unwrap(), vec![0.0, 18.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0]),
    ];
    for (fam, d) in cases {
        let g = BiDegree::new(d.clone(), d).unwrap();
        let theta = default_start(&g, &fam).unwrap();
        theta.validate(&fam).unwrap();
        assert!(theta.max_abs().is_finite());
    }
}

#[test]
fn rate_family_steps_stay_in_domain_from_a_poor_start() {
    let fam = WeightFamily::exponential();
    let truth = design_params(&SimDesign::new(fam.clone(), 30, 3.0)).unwrap();
    let g = bi_degrees(&sample_graph(&truth, &fam, 3).unwrap());
    // tiny rates, far below the truth
    let start = ParamVector::new(vec![0.02; 30], {
        let mut b = vec![0.02; 30];
        b[29] = 0.0;
        b
    }, Orientation::Negated)
    .unwrap();
    let res = bidegree::newton_fit(&g, &fam, &start, &FitConfig::default()).unwrap();
    assert_eq!(res.existence, Existence::Exists);
    res.theta_hat.validate(&fam).unwrap();
}
