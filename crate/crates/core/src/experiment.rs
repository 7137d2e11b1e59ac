//! Experiment configuration and the verification suite.
//!
//! A configuration resolves into concrete objects (objective, initial
//! distribution, surrogate, gate, learning rate) before anything is sampled,
//! so precondition failures surface as errors ahead of any Monte-Carlo work.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::correlation::CorrelationKind;
use crate::error::{invalid, Error, Result};
use crate::gaussian::{
    expected_objective_j, random_orthogonal, random_spd, sample_one, theory_rates,
    theory_rates_unchecked, GaussianParams, QuadraticObjective, TheoryRates,
};
use crate::harness::{
    check_conditional_weight, check_descent, check_drift_theorem, check_integrals,
    check_kendall_bounds, check_pearson_identity, check_quadratic_term, check_variance_identity,
    drift_report, BoundCheckReport, DriftRecord, MonotoneExperiment, TrajectoryRow,
};
use crate::math;
use crate::par;
use crate::ranking::WeightScheme;
use crate::rng::StreamKey;
use crate::surrogate::{admissible_threshold, BlockSwap, GateConfig, GateSource, SurrogateSpec};
use crate::utility::SchemeConstants;

/// Named or explicit weights.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightPreset {
    /// `μ = None` means `⌊λ/2⌋`.
    Truncation {
        mu: Option<usize>,
    },
    LogRank,
    Equal,
    Explicit(Vec<f64>),
}

impl WeightPreset {
    pub fn build(&self, lambda: usize) -> Result<WeightScheme> {
        match self {
            Self::Truncation { mu: None } => WeightScheme::default_for(lambda),
            Self::Truncation { mu: Some(mu) } => WeightScheme::truncation(lambda, *mu),
            Self::LogRank => WeightScheme::log_rank(lambda),
            Self::Equal => WeightScheme::equal(lambda, 1.0 / lambda as f64),
            Self::Explicit(w) => {
                if w.len() != lambda {
                    return Err(Error::LengthMismatch {
                        expected: lambda,
                        got: w.len(),
                    });
                }
                WeightScheme::new(w.clone())
            }
        }
    }
}

/// Eigenvalues of the objective's Hessian.
#[derive(Clone, Debug, PartialEq)]
pub enum Spectrum {
    /// All ones.
    Sphere,
    /// `1, 2, …, d`.
    Linear,
    /// `κ^{(i-1)/(d-1)}`.
    Geometric(f64),
    Explicit(Vec<f64>),
}

impl Spectrum {
    pub fn eigenvalues(&self, d: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self {
            Self::Sphere => vec![1.0; d],
            Self::Linear => (1..=d).map(|i| i as f64).collect(),
            Self::Geometric(kappa) => {
                if !(kappa.is_finite() && *kappa >= 1.0) {
                    return Err(invalid("geometric spectrum needs a condition number >= 1"));
                }
                (0..d)
                    .map(|i| {
                        if d == 1 {
                            1.0
                        } else {
                            math::powf(*kappa, i as f64 / (d - 1) as f64)
                        }
                    })
                    .collect()
            }
            Self::Explicit(v) => {
                if v.len() != d {
                    return Err(Error::LengthMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        if v.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurrogateChoice {
    Exact,
    Negated,
    Noise(f64),
    /// Random Hessian and optimum perturbation of the given size.
    HessianPerturbed(f64),
    /// Block swap with this `μ`, frozen at the initial distribution.
    BlockSwap(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// The admissible bound plus `10⁻⁴` of its gap to 1.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaPolicy {
    Fixed(f64),
    /// `β(1-γ)`.
    Optimal,
    /// `0.99 · 2β(1-γ)`.
    Max,
}

/// Monte-Carlo budgets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McBudgets {
    /// Samples for population estimators and identity checks.
    pub samples: usize,
    /// Reference sample size for empirical quantiles and the block swap.
    pub reference_size: usize,
    /// Pairs (Kendall) or samples (Pearson) spent by a population gate.
    pub gate_pairs: usize,
    /// Replicates per drift iteration in the verification suite.
    pub drift_replicates: usize,
    /// Iterations per drift trajectory in the verification suite.
    pub drift_iterations: usize,
}

impl Default for McBudgets {
    fn default() -> Self {
        Self {
            samples: 10_000,
            reference_size: 100_000,
            gate_pairs: 10_000,
            drift_replicates: 1_000,
            drift_iterations: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateSourceChoice {
    Sample,
    Ema,
    Population,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dimension: usize,
    pub lambda: usize,
    pub weights: WeightPreset,
    pub spectrum: Spectrum,
    pub rotate: bool,
    /// `None` means the origin.
    pub optimum: Option<Vec<f64>>,
    /// `None` means all ones.
    pub initial_mean: Option<Vec<f64>>,
    pub initial_cov_scale: f64,
    pub surrogate: SurrogateChoice,
    pub gate_kind: CorrelationKind,
    pub gate_threshold: ThresholdPolicy,
    pub gate_source: GateSourceChoice,
    pub ema_decay: f64,
    pub alpha: AlphaPolicy,
    pub iterations: usize,
    /// Replicates per iteration for the drift columns of `optimize`.
    pub replicates: usize,
    pub budgets: McBudgets,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dimension: 2,
            lambda: 8,
            weights: WeightPreset::Truncation { mu: None },
            spectrum: Spectrum::Sphere,
            rotate: false,
            optimum: None,
            initial_mean: None,
            initial_cov_scale: 1.0,
            surrogate: SurrogateChoice::Exact,
            gate_kind: CorrelationKind::Kendall,
            gate_threshold: ThresholdPolicy::Auto,
            gate_source: GateSourceChoice::Sample,
            ema_decay: 0.5,
            alpha: AlphaPolicy::Optimal,
            iterations: 50,
            replicates: 100,
            budgets: McBudgets::default(),
        }
    }
}

/// A configuration resolved into concrete objects.
#[derive(Clone, Debug)]
pub struct Instance {
    pub scheme: WeightScheme,
    pub objective: QuadraticObjective,
    pub theta0: GaussianParams,
    pub surrogate: SurrogateSpec,
    pub gate: GateConfig,
    pub rates: TheoryRates,
    pub alpha: f64,
}

/// `admissible + 10⁻⁴ (1 - admissible)`.
pub fn auto_threshold(scheme: &WeightScheme, kind: CorrelationKind) -> Result<f64> {
    let a = admissible_threshold(scheme, kind)?;
    Ok(a + 1e-4 * (1.0 - a))
}

fn resolve_alpha(policy: AlphaPolicy, rates: &TheoryRates) -> Result<f64> {
    let alpha = match policy {
        AlphaPolicy::Fixed(a) => a,
        AlphaPolicy::Optimal => rates.alpha_opt,
        AlphaPolicy::Max => 0.99 * rates.alpha_max,
    };
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid(format!(
            "learning rate resolves to {alpha}; a derived rate needs a gate threshold above {}",
            rates.admissible
        )));
    }
    Ok(alpha)
}

fn vector_or(v: &Option<Vec<f64>>, d: usize, fill: f64) -> Result<DVector<f64>> {
    match v {
        None => Ok(DVector::from_element(d, fill)),
        Some(v) if v.len() == d => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::LengthMismatch {
            expected: d,
            got: v.len(),
        }),
    }
}

fn build_surrogate(
    choice: &SurrogateChoice,
    objective: &QuadraticObjective,
    theta: &GaussianParams,
    lambda: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<SurrogateSpec> {
    let base = objective.clone();
    match choice {
        SurrogateChoice::Exact => Ok(SurrogateSpec::exact(base)),
        SurrogateChoice::Negated => Ok(SurrogateSpec::negated(base)),
        SurrogateChoice::Noise(sigma) => {
            SurrogateSpec::additive_noise(base, *sigma, key.child("noise").rng(0).random())
        }
        SurrogateChoice::HessianPerturbed(eps) => {
            SurrogateSpec::hessian_perturbed_random(base, *eps, &mut key.child("hessian").rng(0))
        }
        SurrogateChoice::BlockSwap(mu) => {
            let swap = BlockSwap::new(
                objective,
                *mu,
                lambda,
                theta,
                reference_size,
                &mut key.child("blockswap").rng(0),
            )?;
            Ok(SurrogateSpec::block_swap(base, swap))
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("dimension", self.dimension),
            ("lambda", self.lambda),
            ("replicates", self.replicates),
            ("samples", self.budgets.samples),
            ("reference_size", self.budgets.reference_size),
            ("gate_pairs", self.budgets.gate_pairs),
            ("drift_replicates", self.budgets.drift_replicates),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if let ThresholdPolicy::Fixed(t) = self.gate_threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(invalid("gate_threshold must lie in [-1, 1]"));
            }
        }
        if !(self.initial_cov_scale.is_finite() && self.initial_cov_scale > 0.0) {
            return Err(invalid("initial_cov_scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(invalid("ema_decay must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Result<WeightScheme> {
        self.weights.build(self.lambda)
    }

    pub fn threshold(&self, scheme: &WeightScheme) -> Result<f64> {
        match self.gate_threshold {
            ThresholdPolicy::Fixed(t) => Ok(t),
            ThresholdPolicy::Auto => auto_threshold(scheme, self.gate_kind),
        }
    }

    pub fn gate_source(&self) -> GateSource {
        match self.gate_source {
            GateSourceChoice::Sample => GateSource::Sample,
            GateSourceChoice::Ema => GateSource::Ema {
                decay: self.ema_decay,
            },
            GateSourceChoice::Population => GateSource::Population {
                n_pairs: self.budgets.gate_pairs,
                reference_size: self.budgets.reference_size,
            },
        }
    }

    /// Derived constants for the configured scheme, dimension and gate.
    pub fn constants(&self) -> Result<Vec<(&'static str, f64)>> {
        self.validate()?;
        let scheme = self.scheme()?;
        scheme.require_monotone()?;
        let k = SchemeConstants::of(&scheme);
        let threshold = self.threshold(&scheme)?;
        let rates = theory_rates_unchecked(&scheme, self.dimension, threshold, self.gate_kind)?;
        Ok(vec![
            ("lambda", k.lambda as f64),
            ("dimension", self.dimension as f64),
            ("sum_w", k.sum_w),
            ("N_w", k.n_w),
            ("M_w", k.m_w),
            ("L_u", k.l_u),
            ("U_u", k.u_u),
            (
                "tau_bar_min",
                admissible_threshold(&scheme, CorrelationKind::Kendall)?,
            ),
            (
                "rho_bar_min",
                admissible_threshold(&scheme, CorrelationKind::Pearson)?,
            ),
            ("threshold", threshold),
            ("beta", rates.beta),
            ("gamma", rates.gamma),
            ("alpha_max", rates.alpha_max),
            ("alpha_opt", rates.alpha_opt),
        ])
    }

    /// Objective, initial distribution, surrogate, gate and learning rate.
    pub fn instance(&self) -> Result<Instance> {
        self.validate()?;
        let d = self.dimension;
        let key = StreamKey::new(self.seed).child("instance");
        let scheme = self.scheme()?;
        let eig = self.spectrum.eigenvalues(d)?;
        let rotation = if self.rotate {
            Some(random_orthogonal(d, &mut key.child("rotation").rng(0)))
        } else {
            None
        };
        let objective = QuadraticObjective::from_spectrum(
            &eig,
            rotation.as_ref(),
            vector_or(&self.optimum, d, 0.0)?,
        )?;
        let theta0 = GaussianParams::new(
            vector_or(&self.initial_mean, d, 1.0)?,
            DMatrix::identity(d, d) * self.initial_cov_scale,
        )?;
        let surrogate = build_surrogate(
            &self.surrogate,
            &objective,
            &theta0,
            self.lambda,
            self.budgets.reference_size,
            key,
        )?;
        let threshold = self.threshold(&scheme)?;
        let gate = GateConfig {
            kind: self.gate_kind,
            threshold,
            source: self.gate_source(),
        };
        gate.validate()?;
        let rates = theory_rates_unchecked(&scheme, d, threshold, self.gate_kind)?;
        let alpha = resolve_alpha(self.alpha, &rates)?;
        Ok(Instance {
            scheme,
            objective,
            theta0,
            surrogate,
            gate,
            rates,
            alpha,
        })
    }

    /// Gated optimization trajectory for this configuration.
    pub fn optimize(&self) -> Result<Vec<TrajectoryRow>> {
        let inst = self.instance()?;
        crate::harness::run_monotone_experiment(&MonotoneExperiment {
            theta0: inst.theta0,
            objective: inst.objective,
            surrogate: &inst.surrogate,
            scheme: inst.scheme,
            gate: inst.gate,
            alpha: inst.alpha,
            iterations: self.iterations,
            replicates: self.replicates,
            key: StreamKey::new(self.seed).child("optimize"),
        })
    }
}

type CheckFn = Box<dyn Fn() -> Result<Vec<BoundCheckReport>> + Send + Sync>;

/// A named, not yet executed group of reports.
pub struct Check {
    /// Report names produced by this check.
    pub names: Vec<String>,
    run: CheckFn,
}

impl Check {
    fn single(name: String, run: CheckFn) -> Self {
        Self {
            names: vec![name],
            run,
        }
    }

    /// Family prefix shared by all of this check's names.
    pub fn family(&self) -> &str {
        self.names[0].split('/').next().unwrap_or("")
    }

    pub fn run(&self) -> Result<Vec<BoundCheckReport>> {
        (self.run)()
    }
}

/// Moment orders swept by the moment-bound family.
pub const MOMENT_ORDERS: [f64; 4] = [1.0, 1.5, 2.0, 4.0];
/// Noise levels of the additive-noise surrogates.
pub const NOISE_LEVELS: [f64; 3] = [0.1, 1.0, 10.0];
/// Random instances in the descent and variance families.
pub const RANDOM_INSTANCES: usize = 20;
/// Probe points per population size in the conditional-weight family.
pub const PROBES: usize = 5;

/// A grid instance: rotated objective with eigenvalues in `[1, 100]`, random
/// optimum, mean one standard deviation away, unit covariance.
fn grid_instance(d: usize, key: StreamKey) -> Result<(QuadraticObjective, GaussianParams)> {
    let mut rng = key.rng(0);
    let a = random_spd(d, 0.0, 2.0, &mut rng);
    let xs = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = &xs + DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((
        QuadraticObjective::new(a, xs)?,
        GaussianParams::new(m, DMatrix::identity(d, d))?,
    ))
}

/// Random instance with Hessian condition number up to `10⁴` and a random
/// covariance.
fn random_instance(
    i: usize,
    key: StreamKey,
) -> Result<(QuadraticObjective, GaussianParams, usize)> {
    let mut rng = key.index(i as u64).rng(0);
    let d = if i.is_multiple_of(2) { 2 } else { 5 };
    let a = random_spd(d, 0.0, 4.0, &mut rng);
    let xs = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scale = math::powf(10.0, rng.random_range(-1.0..=1.0));
    let m = &xs + DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let c = random_spd(d, -1.0, 1.0, &mut rng);
    let lambda = if i % 4 < 2 { 4 } else { 8 };
    Ok((
        QuadraticObjective::new(a, xs)?,
        GaussianParams::new(m, c)?,
        lambda,
    ))
}

fn surrogate_suite(
    obj: &QuadraticObjective,
    theta: &GaussianParams,
    lambda: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<Vec<SurrogateSpec>> {
    let mut suite = vec![
        SurrogateSpec::exact(obj.clone()),
        SurrogateSpec::negated(obj.clone()),
    ];
    for (i, &sigma) in NOISE_LEVELS.iter().enumerate() {
        suite.push(SurrogateSpec::additive_noise(
            obj.clone(),
            sigma,
            key.child("noise").index(i as u64).rng(0).random(),
        )?);
    }
    suite.push(SurrogateSpec::hessian_perturbed_random(
        obj.clone(),
        0.1,
        &mut key.child("hessian").rng(0),
    )?);
    let swap = BlockSwap::new(
        obj,
        lambda / 2,
        lambda,
        theta,
        reference_size,
        &mut key.child("blockswap").rng(0),
    )?;
    suite.push(SurrogateSpec::block_swap(obj.clone(), swap));
    Ok(suite)
}

/// Noise level used by the drift runs: `10⁻⁵ · J(θ₀)`.
pub const DRIFT_NOISE_FACTOR: f64 = 1e-5;

/// One drift run of the suite, fully resolved.
#[derive(Clone, Debug)]
pub struct DriftSetup {
    pub name: String,
    pub objective: QuadraticObjective,
    pub theta0: GaussianParams,
    pub scheme: WeightScheme,
    pub gate: GateConfig,
    pub alpha: f64,
    pub surrogate: SurrogateSpec,
    pub key: StreamKey,
}

impl DriftSetup {
    pub fn run(&self, budgets: &McBudgets) -> Result<Vec<DriftRecord>> {
        check_drift_theorem(
            &self.theta0,
            &self.objective,
            &self.surrogate,
            &self.scheme,
            self.gate,
            self.alpha,
            budgets.drift_iterations,
            budgets.drift_replicates,
            self.key,
        )
    }
}

/// The drift runs: sphere and `diag(1..d)` objectives, `d ∈ {2, 5}`,
/// truncation weights with λ = 8, additive-noise surrogate, population gate
/// of either kind.
pub fn drift_setups(config: &ExperimentConfig) -> Result<Vec<DriftSetup>> {
    config.validate()?;
    let root = StreamKey::new(config.seed);
    let scheme = WeightScheme::truncation(8, 4)?;
    let mut out = Vec::new();
    for kind in [CorrelationKind::Kendall, CorrelationKind::Pearson] {
        let family = match kind {
            CorrelationKind::Kendall => "theorem_cq",
            CorrelationKind::Pearson => "theorem_cq_pearson",
        };
        for (label, spectrum) in [("sphere", Spectrum::Sphere), ("diag", Spectrum::Linear)] {
            for d in [2usize, 5] {
                let obj = QuadraticObjective::from_spectrum(
                    &spectrum.eigenvalues(d)?,
                    None,
                    DVector::zeros(d),
                )?;
                let theta = GaussianParams::new(
                    DVector::from_element(d, 1.0),
                    DMatrix::identity(d, d) * config.initial_cov_scale,
                )?;
                let threshold = match config.gate_threshold {
                    ThresholdPolicy::Fixed(t) => t,
                    ThresholdPolicy::Auto => auto_threshold(&scheme, kind)?,
                };
                let gate = GateConfig {
                    kind,
                    threshold,
                    source: GateSource::Population {
                        n_pairs: config.budgets.gate_pairs,
                        reference_size: config.budgets.reference_size,
                    },
                };
                gate.validate()?;
                let rates = theory_rates(&scheme, d, threshold, kind)?;
                let alpha = resolve_alpha(config.alpha, &rates)?;
                if alpha >= rates.alpha_max {
                    return Err(Error::LearningRateTooLarge {
                        alpha,
                        limit: rates.alpha_max,
                    });
                }
                let name = format!("{family}/{label}/d{d}");
                let key = root.child(&name);
                let sigma = DRIFT_NOISE_FACTOR * expected_objective_j(&theta, &obj)?;
                let surrogate = SurrogateSpec::additive_noise(
                    obj.clone(),
                    sigma,
                    key.child("noise").rng(0).random(),
                )?;
                out.push(DriftSetup {
                    name,
                    objective: obj,
                    theta0: theta,
                    scheme: scheme.clone(),
                    gate,
                    alpha,
                    surrogate,
                    key,
                });
            }
        }
    }
    Ok(out)
}

/// Build every check of the verification suite whose name or family passes
/// `keep`. All preconditions are checked here, before any sampling.
pub fn verification_suite(
    config: &ExperimentConfig,
    keep: &dyn Fn(&str) -> bool,
) -> Result<Vec<Check>> {
    config.validate()?;
    let root = StreamKey::new(config.seed);
    let b = config.budgets;
    let mut checks: Vec<Check> = Vec::new();
    let want = |name: &str| keep(name) || keep(name.split('/').next().unwrap_or(""));

    for d in [2usize, 5] {
        for lambda in [4usize, 8] {
            let tag = format!("d{d}/l{lambda}");
            let ikey = root.child("grid").index(d as u64).index(lambda as u64);
            let (obj, theta) = grid_instance(d, ikey)?;
            let trunc = WeightScheme::default_for(lambda)?;
            let suite = surrogate_suite(
                &obj,
                &theta,
                lambda,
                b.reference_size,
                ikey.child("surrogates"),
            )?;

            for g in &suite {
                let label = g.label();
                let name = format!("lemma1/{tag}/{label}");
                if want(&name) {
                    let (obj, theta, g, w) = (obj.clone(), theta.clone(), g.clone(), trunc.clone());
                    let key = root.child(&name);
                    checks.push(Check::single(
                        name.clone(),
                        Box::new(move || {
                            Ok(vec![check_quadratic_term(
                                &theta, &obj, &g, &w, b.samples, key,
                            )?
                            .with_name(name.clone())])
                        }),
                    ));
                }

                let base = format!("prop3/{tag}/{label}");
                let names: Vec<String> = MOMENT_ORDERS
                    .iter()
                    .map(|s| format!("{base}/s{s}"))
                    .collect();
                if names.iter().any(|n| want(n)) {
                    let (obj, theta, g, w) = (obj.clone(), theta.clone(), g.clone(), trunc.clone());
                    let key = root.child(&base);
                    let out_names = names.clone();
                    checks.push(Check {
                        names,
                        run: Box::new(move || {
                            let reps = check_kendall_bounds(
                                &theta,
                                &obj,
                                &g,
                                &w,
                                &MOMENT_ORDERS,
                                b.samples,
                                b.reference_size,
                                key,
                            )?;
                            Ok(reps
                                .into_iter()
                                .zip(&out_names)
                                .map(|(r, n)| r.with_name(n.clone()))
                                .collect())
                        }),
                    });
                }

                let name = format!("pearson_identity/{tag}/{label}");
                if want(&name) {
                    let (obj, theta, g, w) = (obj.clone(), theta.clone(), g.clone(), trunc.clone());
                    let key = root.child(&name);
                    checks.push(Check::single(
                        name.clone(),
                        Box::new(move || {
                            Ok(vec![check_pearson_identity(
                                &theta,
                                &obj,
                                &g,
                                &w,
                                b.samples,
                                b.reference_size,
                                key,
                            )?
                            .with_name(name.clone())])
                        }),
                    ));
                }
            }

            for (sname, scheme) in [
                ("truncation", trunc.clone()),
                ("log", WeightScheme::log_rank(lambda)?),
            ] {
                let name = format!("lemma2/{tag}/{sname}");
                if want(&name) {
                    let (obj, theta) = (obj.clone(), theta.clone());
                    let key = root.child(&name);
                    checks.push(Check::single(
                        name.clone(),
                        Box::new(move || {
                            Ok(vec![check_descent(&theta, &obj, &scheme, b.samples, key)?
                                .with_name(name.clone())])
                        }),
                    ));
                }
            }
        }
    }

    for i in 0..RANDOM_INSTANCES {
        let (obj, theta, lambda) = random_instance(i, root.child("random"))?;
        let name = format!("lemma2/random{i}");
        if want(&name) {
            let (obj, theta) = (obj.clone(), theta.clone());
            let key = root.child(&name);
            checks.push(Check::single(
                name.clone(),
                Box::new(move || {
                    let w = WeightScheme::default_for(lambda)?;
                    Ok(vec![
                        check_descent(&theta, &obj, &w, b.samples, key)?.with_name(name.clone())
                    ])
                }),
            ));
        }
        let name = format!("variance_identity/random{i}");
        if want(&name) {
            let key = root.child(&name);
            checks.push(Check::single(
                name.clone(),
                Box::new(move || {
                    Ok(vec![check_variance_identity(&theta, &obj, b.samples, key)?
                        .with_name(name.clone())])
                }),
            ));
        }
    }

    {
        let (obj, theta) = grid_instance(2, root.child("conditional"))?;
        for lambda in [2usize, 3, 8] {
            let scheme = WeightScheme::default_for(lambda)?;
            let mut prng = root.child("probes").index(lambda as u64).rng(0);
            for j in 0..PROBES {
                let probe: Vec<f64> = if j == 0 {
                    obj.optimum().iter().copied().collect()
                } else {
                    sample_one(&theta, &mut prng).iter().copied().collect()
                };
                let name = format!("conditional_weight/l{lambda}/probe{j}");
                if want(&name) {
                    let (obj, theta, scheme) = (obj.clone(), theta.clone(), scheme.clone());
                    let key = root.child(&name);
                    checks.push(Check::single(
                        name.clone(),
                        Box::new(move || {
                            Ok(vec![check_conditional_weight(
                                &theta,
                                &obj,
                                &scheme,
                                &probe,
                                b.samples,
                                b.reference_size,
                                key,
                            )?
                            .with_name(name.clone())])
                        }),
                    ));
                }
            }
        }
    }

    for lambda in [2usize, 4, 8, 16] {
        for (sname, scheme) in [
            ("truncation", WeightScheme::default_for(lambda)?),
            ("log", WeightScheme::log_rank(lambda)?),
        ] {
            let base = format!("integrals/l{lambda}/{sname}");
            let names = vec![format!("{base}/u"), format!("{base}/u2")];
            if names.iter().any(|n| want(n)) {
                let key = root.child(&base);
                let out = names.clone();
                checks.push(Check {
                    names,
                    run: Box::new(move || {
                        let [a, c] = check_integrals(&scheme, b.samples, key)?;
                        Ok(vec![
                            a.with_name(out[0].clone()),
                            c.with_name(out[1].clone()),
                        ])
                    }),
                });
            }
        }
    }

    let drift_wanted = ["theorem_cq", "theorem_cq_pearson"].iter().any(|f| keep(f))
        || ["sphere", "diag"].iter().any(|l| {
            [2, 5].iter().any(|d| {
                keep(&format!("theorem_cq/{l}/d{d}"))
                    || keep(&format!("theorem_cq_pearson/{l}/d{d}"))
            })
        });
    if drift_wanted {
        for setup in drift_setups(config)? {
            if !want(&setup.name) {
                continue;
            }
            let name = setup.name.clone();
            checks.push(Check::single(
                name.clone(),
                Box::new(move || {
                    let recs = setup.run(&b)?;
                    Ok(vec![drift_report(name.clone(), &recs, b.drift_replicates)])
                }),
            ));
        }
    }
    Ok(checks)
}

/// Run checks in parallel; reports come back in suite order.
pub fn run_checks(checks: &[Check]) -> Result<Vec<BoundCheckReport>> {
    let results = par::map_indexed(checks.len(), |i| checks[i].run());
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
