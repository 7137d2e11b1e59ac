//! Monte-Carlo tests. Every tolerance is four standard errors plus, where an
//! empirical CDF enters, an explicit allowance for its bias.

mod common;

use common::{gauss_legendre, integrate};
use igo_surrogate::correlation::{estimate_kw, population_rho, population_tau};
use igo_surrogate::experiment::ExperimentConfig;
use igo_surrogate::gaussian::{
    expected_objective_j, metric_norm_m_f, sample_population, theory_rates,
};
use igo_surrogate::harness::{
    check_conditional_weight, check_descent, check_drift_theorem, check_quadratic_term,
    check_variance_identity, descent_estimate, run_monotone_experiment, MonotoneExperiment,
};
use igo_surrogate::objective::{FnEvaluator, Negated};
use igo_surrogate::ranking::utilities;
use igo_surrogate::surrogate::{BlockSwap, GateConfig, GateSource, SurrogateSpec};
use igo_surrogate::utility::weight_variance_u_u;
use igo_surrogate::{
    CorrelationKind, Evaluate, GaussianParams, QuadraticObjective, StreamKey, UtilityPolynomial,
    Verdict, WeightScheme,
};
use nalgebra::{DMatrix, DVector};

fn sphere(d: usize) -> QuadraticObjective {
    QuadraticObjective::sphere(DVector::zeros(d)).unwrap()
}

fn two_point() -> WeightScheme {
    WeightScheme::new(vec![1.0, 0.0]).unwrap()
}

fn within(x: f64, target: f64, se: f64, extra: f64) -> bool {
    (x - target).abs() <= 4.0 * se + extra
}

#[test]
fn population_tau_of_f_against_itself_and_its_negation() {
    let f = sphere(3);
    let theta = GaussianParams::isotropic(DVector::from_element(3, 1.0), 1.0).unwrap();
    let mut rng = StreamKey::new(1).rng(0);
    let same = population_tau(&f, &f, &theta, 2000, &mut rng).unwrap();
    assert_eq!((same.value, same.std_error), (1.0, 0.0));
    let neg = population_tau(&f, &Negated(f.clone()), &theta, 2000, &mut rng).unwrap();
    assert_eq!(neg.value, -1.0);
}

#[test]
fn noisy_population_tau_is_stable_and_decreasing_in_sigma() {
    let f = sphere(2);
    let theta = GaussianParams::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
    let noisy = |sigma| SurrogateSpec::additive_noise(f.clone(), sigma, 5).unwrap();
    let g = noisy(1.0);
    let a = population_tau(&f, &g, &theta, 20_000, &mut StreamKey::new(2).rng(0)).unwrap();
    let b = population_tau(&f, &g, &theta, 20_000, &mut StreamKey::new(3).rng(0)).unwrap();
    assert!(within(
        a.value,
        b.value,
        a.std_error.hypot(b.std_error),
        0.0
    ));

    let taus: Vec<_> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&s| {
            population_tau(&f, &noisy(s), &theta, 20_000, &mut StreamKey::new(4).rng(0)).unwrap()
        })
        .collect();
    for w in taus.windows(2) {
        assert!(w[1].value <= w[0].value + 4.0 * w[0].std_error.hypot(w[1].std_error));
    }
    assert!(taus[0].value > 0.8 && taus[2].value < 0.3);
}

#[test]
fn population_rho_is_one_for_f_and_its_increasing_transforms() {
    let f = sphere(2);
    let theta = GaussianParams::isotropic(DVector::from_vec(vec![0.5, -1.0]), 1.0).unwrap();
    let w = WeightScheme::default_for(8).unwrap();
    let t = FnEvaluator(|x: &[f64]| Ok((1.0 + f.evaluate(x)?).ln()));
    for g in [&f as &dyn Evaluate, &t] {
        let r = population_rho(
            &f,
            g,
            &theta,
            &w,
            2000,
            10_000,
            &mut StreamKey::new(6).rng(0),
        )
        .unwrap();
        assert_eq!(r.value, 1.0);
    }
}

#[test]
fn negated_two_point_scheme_has_closed_form_kw() {
    // u(p) = 2(1 - p) and P_g = 1 - P_f, so K_w = ∫ (4t - 2)² dt = 4/3
    let poly = UtilityPolynomial::new(&two_point());
    let oracle = integrate(4, |t| {
        (poly.eval(1.0 - t).unwrap() - poly.eval(t).unwrap()).powi(2)
    });
    assert!((oracle - 4.0 / 3.0).abs() < 1e-14);

    let f = sphere(2);
    let g = Negated(f.clone());
    let theta = GaussianParams::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
    let (kw, se) = estimate_kw(
        &f,
        &g,
        &theta,
        &two_point(),
        10_000,
        10_000,
        &mut StreamKey::new(7).rng(0),
    )
    .unwrap();
    assert!(within(kw, oracle, se, 1e-3), "{kw} ± {se}");
    let rho = population_rho(
        &f,
        &g,
        &theta,
        &two_point(),
        10_000,
        10_000,
        &mut StreamKey::new(8).rng(0),
    )
    .unwrap();
    assert!(within(rho.value, -1.0, rho.std_error, 2e-3), "{rho:?}");
}

#[test]
fn function_block_swap_correlations_match_quadrature() {
    let (lambda, mu) = (8, 4);
    let scheme = WeightScheme::truncation(lambda, mu).unwrap();
    let f = sphere(2);
    let theta = GaussianParams::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
    let swap = BlockSwap::new(
        &f,
        mu,
        lambda,
        &theta,
        100_000,
        &mut StreamKey::new(9).rng(0),
    )
    .unwrap();
    let g = SurrogateSpec::block_swap(f.clone(), swap);

    // at θ_ref the f-quantile q is uniform; the g-quantile is c - q on the
    // first block and 1 + c - q on the second
    let c = mu as f64 / lambda as f64;
    let poly = UtilityPolynomial::new(&scheme);
    let u = |p: f64| poly.eval(p.clamp(0.0, 1.0)).unwrap();
    let gl = gauss_legendre(lambda);
    let piece = |lo: f64, hi: f64, pg: &dyn Fn(f64) -> f64| -> f64 {
        gl.iter()
            .map(|&(x, w)| {
                let q = lo + (hi - lo) * x;
                (hi - lo) * w * (u(q) - u(pg(q))).powi(2)
            })
            .sum()
    };
    let kw = piece(0.0, c, &|q| c - q) + piece(c, 1.0, &|q| 1.0 + c - q);
    let rho_oracle = 1.0 - kw / (2.0 * weight_variance_u_u(&scheme));

    let rho = population_rho(
        &f,
        &g,
        &theta,
        &scheme,
        10_000,
        100_000,
        &mut StreamKey::new(10).rng(0),
    )
    .unwrap();
    assert!(
        within(rho.value, rho_oracle, rho.std_error, 0.01),
        "{} vs {rho_oracle}",
        rho.value
    );
    assert!(rho.value < 0.9);

    let tau = population_tau(&f, &g, &theta, 20_000, &mut StreamKey::new(11).rng(0)).unwrap();
    assert!(within(tau.value, 0.0, tau.std_error, 0.01), "{tau:?}");
}

#[test]
fn quadratic_term_examples() {
    let f = sphere(1);
    let theta = GaussianParams::isotropic(DVector::zeros(1), 1.0).unwrap();
    let r = check_quadratic_term(&theta, &f, &f, &two_point(), 10_000, StreamKey::new(12)).unwrap();
    assert_eq!(r.rhs_bound, 4.0);
    assert_eq!(r.verdict, Verdict::Holds);
    let r = check_quadratic_term(
        &theta,
        &f,
        &Negated(f.clone()),
        &two_point(),
        10_000,
        StreamKey::new(13),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Holds);

    let zero = WeightScheme::new(vec![0.0, 0.0, 0.0]).unwrap();
    let r = check_quadratic_term(&theta, &f, &f, &zero, 1000, StreamKey::new(14)).unwrap();
    assert_eq!(
        (r.lhs_estimate, r.rhs_bound, r.verdict),
        (0.0, 0.0, Verdict::Holds)
    );
}

#[test]
fn descent_examples() {
    let w = WeightScheme::default_for(8).unwrap();
    let at_opt = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
    let r = check_descent(&at_opt, &sphere(2), &w, 10_000, StreamKey::new(15)).unwrap();
    assert!(r.lhs_estimate < 0.0 && r.holds());

    let ill = QuadraticObjective::from_spectrum(&[100.0, 1.0], None, DVector::zeros(2)).unwrap();
    let theta = GaussianParams::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
    assert!(check_descent(&theta, &ill, &w, 10_000, StreamKey::new(16))
        .unwrap()
        .holds());

    let eq = WeightScheme::equal(8, 0.125).unwrap();
    let (lhs, se) = descent_estimate(&theta, &ill, &eq, 10_000, StreamKey::new(17)).unwrap();
    assert!(within(lhs, 0.0, se, 0.0), "{lhs} ± {se}");
}

#[test]
fn variance_identity_examples() {
    let f = sphere(2);
    let at_opt = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
    assert_eq!(metric_norm_m_f(&at_opt, &f).unwrap(), 1.0);
    assert!(
        check_variance_identity(&at_opt, &f, 100_000, StreamKey::new(18))
            .unwrap()
            .holds()
    );

    let scalar =
        QuadraticObjective::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1)).unwrap();
    let theta = GaussianParams::new(
        DVector::from_element(1, 1.0),
        DMatrix::from_element(1, 1, 3.0),
    )
    .unwrap();
    let r = check_variance_identity(&theta, &scalar, 100_000, StreamKey::new(19)).unwrap();
    assert_eq!(r.rhs_bound, 30.0);
    assert!(r.holds(), "{r:?}");
}

#[test]
fn expected_objective_matches_sample_mean() {
    let mut rng = StreamKey::new(20).rng(0);
    let a = igo_surrogate::gaussian::random_spd(3, 0.0, 1.0, &mut rng);
    let obj = QuadraticObjective::new(a, DVector::from_vec(vec![0.2, -0.1, 0.4])).unwrap();
    let c = igo_surrogate::gaussian::random_spd(3, -0.5, 0.5, &mut rng);
    let theta = GaussianParams::new(DVector::from_vec(vec![1.0, 0.0, -1.0]), c).unwrap();
    let xs = sample_population(&theta, 200_000, &mut rng);
    let v: Vec<f64> = xs.iter().map(|x| obj.value(x.as_slice())).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(within(
        mean,
        expected_objective_j(&theta, &obj).unwrap(),
        (var / n).sqrt(),
        0.0
    ));
}

#[test]
fn sampled_moments_converge() {
    let theta = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
    let n = 100_000;
    let xs = sample_population(&theta, n, &mut StreamKey::new(21).rng(0));
    let tol = 4.0 / (n as f64).sqrt();
    let mean = xs.iter().fold(DVector::zeros(2), |acc, x| acc + x) / n as f64;
    let cov = xs
        .iter()
        .fold(DMatrix::zeros(2, 2), |acc, x| acc + x * x.transpose())
        / n as f64;
    assert!(mean.iter().all(|m| m.abs() < tol));
    assert!((cov - DMatrix::<f64>::identity(2, 2))
        .iter()
        .all(|e| e.abs() < 2.0 * tol));

    let theta = GaussianParams::new(DVector::zeros(1), DMatrix::from_element(1, 1, 4.0)).unwrap();
    let xs = sample_population(&theta, n, &mut StreamKey::new(22).rng(0));
    let var = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / n as f64;
    // Var of the sample variance of N(0, 4) is 32/n
    assert!(within(var, 4.0, (32.0 / n as f64).sqrt(), 0.0));

    let again = sample_population(&theta, 16, &mut StreamKey::new(22).rng(0));
    assert_eq!(again[..], xs[..16]);
}

/// `Pr[f(X) < c]` for the sphere at the origin and `X ~ N(m, I₂)`, by polar
/// quadrature around the origin.
fn sphere_quantile(m: [f64; 2], c: f64) -> f64 {
    let r_max = (2.0 * c).sqrt();
    let n_theta = 256;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for (x, w) in gauss_legendre(64) {
        let r = r_max * x;
        let mut ring = 0.0;
        for k in 0..n_theta {
            let t = two_pi * k as f64 / n_theta as f64;
            let (dx, dy) = (r * t.cos() - m[0], r * t.sin() - m[1]);
            ring += (-(dx * dx + dy * dy) / 2.0).exp() / two_pi;
        }
        total += r_max * w * r * ring * two_pi / n_theta as f64;
    }
    total
}

#[test]
fn conditional_weight_with_three_points_matches_integration() {
    let m = [0.5, -0.3];
    let f = sphere(2);
    let theta = GaussianParams::isotropic(DVector::from_vec(m.to_vec()), 1.0).unwrap();
    let scheme = WeightScheme::log_rank(3).unwrap();
    let poly = UtilityPolynomial::new(&scheme);
    let n = 200_000;
    for (i, probe) in [[0.1, 0.2], [0.9, -0.4], [-1.2, 1.5]].iter().enumerate() {
        let p = sphere_quantile(m, f.value(probe));
        let oracle = poly.eval(p).unwrap() / 3.0;
        let mut rng = StreamKey::new(23).index(i as u64).rng(0);
        let mut acc = Vec::with_capacity(n);
        for _ in 0..n {
            let others = sample_population(&theta, 2, &mut rng);
            let vals = [
                f.value(probe),
                f.value(others[0].as_slice()),
                f.value(others[1].as_slice()),
            ];
            acc.push(utilities(&vals, &scheme).unwrap()[0]);
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        let var = acc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(
            within(mean, oracle, (var / n as f64).sqrt(), 0.0),
            "probe {i}: {mean} vs {oracle}"
        );

        let r = check_conditional_weight(
            &theta,
            &f,
            &scheme,
            probe,
            10_000,
            10_000,
            StreamKey::new(24),
        )
        .unwrap();
        assert!(r.holds(), "{r:?}");
        // the report's right side uses an empirical CDF of 10⁴ points
        let p_se = (p * (1.0 - p) / 10_000.0).sqrt();
        assert!(
            within(r.rhs_bound, oracle, poly.lipschitz() / 3.0 * p_se, 0.0),
            "{r:?} vs {oracle}"
        );
    }
}

#[test]
fn conditional_weight_boundary_examples() {
    let f = sphere(2);
    let theta = GaussianParams::isotropic(DVector::zeros(2), 1.0).unwrap();
    let at_min = check_conditional_weight(
        &theta,
        &f,
        &two_point(),
        &[0.0, 0.0],
        10_000,
        10_000,
        StreamKey::new(25),
    )
    .unwrap();
    assert_eq!((at_min.lhs_estimate, at_min.rhs_bound), (1.0, 1.0));

    // f = |x|²/2 has median ln 2 under N(0, I₂)
    let median = [(2.0 * 2f64.ln()).sqrt(), 0.0];
    let r = check_conditional_weight(
        &theta,
        &f,
        &two_point(),
        &median,
        10_000,
        10_000,
        StreamKey::new(26),
    )
    .unwrap();
    assert!(
        r.holds() && within(r.lhs_estimate, 0.5, r.lhs_std_error, 0.0),
        "{r:?}"
    );
}

fn exact_gate() -> GateConfig {
    GateConfig {
        kind: CorrelationKind::Kendall,
        threshold: 1.0,
        source: GateSource::Sample,
    }
}

#[test]
fn drift_with_exact_surrogate_decreases_in_expectation() {
    let scheme = WeightScheme::default_for(8).unwrap();
    let obj = QuadraticObjective::from_spectrum(&[1.0, 3.0], None, DVector::zeros(2)).unwrap();
    let theta = GaussianParams::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
    let rates = theory_rates(&scheme, 2, 1.0, CorrelationKind::Kendall).unwrap();
    assert_eq!(rates.gamma, 0.0);
    assert_eq!(rates.alpha_max, 2.0 * rates.beta);
    for alpha in [rates.alpha_opt, 1.9 * rates.beta] {
        let recs = check_drift_theorem(
            &theta,
            &obj,
            &obj,
            &scheme,
            exact_gate(),
            alpha,
            30,
            500,
            StreamKey::new(27),
        )
        .unwrap();
        assert_eq!(recs.len(), 30);
        for r in &recs {
            assert!(r.gate.use_surrogate);
            assert_eq!(r.verdict(), Verdict::Holds, "{r:?}");
            if alpha == rates.alpha_opt {
                assert!(r.j_mean_after < r.j_before, "{r:?}");
            }
        }
    }

    let recs = check_drift_theorem(
        &theta,
        &obj,
        &obj,
        &scheme,
        exact_gate(),
        0.0,
        3,
        10,
        StreamKey::new(28),
    )
    .unwrap();
    assert!(recs
        .iter()
        .all(|r| r.drift_mean == 0.0 && r.bound_rhs == 0.0));
    assert!(recs.windows(2).all(|w| w[0].j_before == w[1].j_before));
}

#[test]
fn trajectories_are_reproducible() {
    let exp = MonotoneExperiment {
        theta0: GaussianParams::isotropic(DVector::from_element(3, 1.0), 1.0).unwrap(),
        objective: sphere(3),
        surrogate: &SurrogateSpec::additive_noise(sphere(3), 0.1, 3).unwrap(),
        scheme: WeightScheme::default_for(6).unwrap(),
        gate: GateConfig {
            kind: CorrelationKind::Pearson,
            threshold: 0.5,
            source: GateSource::Ema { decay: 0.5 },
        },
        alpha: 0.01,
        iterations: 20,
        replicates: 10,
        key: StreamKey::new(29),
    };
    let a = run_monotone_experiment(&exp).unwrap();
    assert_eq!(a, run_monotone_experiment(&exp).unwrap());
    assert_eq!(a.len(), 21);
    let other = MonotoneExperiment {
        key: StreamKey::new(30),
        ..exp
    };
    assert_ne!(a, run_monotone_experiment(&other).unwrap());
}

#[test]
fn default_optimization_decreases_expected_objective() {
    let cfg = ExperimentConfig {
        iterations: 100,
        ..Default::default()
    };
    let rows = cfg.optimize().unwrap();
    assert_eq!(rows.len(), 101);
    for r in &rows[..100] {
        assert!(r.gate_used);
        assert!(r.drift_mean < 0.0, "{r:?}");
    }
    assert!(rows[100].j < rows[0].j);

    let none = ExperimentConfig {
        iterations: 0,
        ..Default::default()
    };
    assert_eq!(none.optimize().unwrap().len(), 1);
}

#[test]
fn kw_vanishes_for_comparison_equivalent_surrogates() {
    use igo_surrogate::correlation::utility_pairs;
    let f = sphere(3);
    let theta = GaussianParams::isotropic(DVector::from_element(3, 0.5), 2.0).unwrap();
    let w = WeightScheme::log_rank(6).unwrap();
    let t = FnEvaluator(|x: &[f64]| Ok(f.evaluate(x)?.sqrt()));
    for g in [&f as &dyn Evaluate, &t] {
        let pairs = utility_pairs(
            &f,
            g,
            &theta,
            &w,
            2000,
            20_000,
            &mut StreamKey::new(31).rng(0),
        )
        .unwrap();
        let s = pairs.statistics(&w).unwrap();
        assert!(s.quantile_bias > 0.0 && s.quantile_bias < 1e-2);
        assert!(s.kw <= 4.0 * s.kw_se + s.quantile_bias, "{s:?}");
    }
}
