//! Monte-Carlo checks of the descent bounds and moment identities, and the
//! gated drift loop.
//!
//! Every check draws replicate `k` from stream `k` of the caller's
//! [`StreamKey`], so reports are reproducible for a given key regardless of
//! thread count. One-sided bounds hold when `lhs ≤ rhs + 4·se`. Identities
//! hold when `|lhs - rhs| ≤ 4·se + 1e-12·max(1, |rhs|)`; the second term only
//! absorbs floating-point rounding in cases where both sides are exact.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::correlation::{
    population_rho, population_tau, utility_pairs, CorrelationEstimate, CorrelationKind,
    ReferenceCdf, MIN_MC_SAMPLES, MIN_REFERENCE_SIZE,
};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{
    apply_step, assemble_delta, expected_objective_j, metric_norm_m_f, objective_change,
    sample_one, sample_population, theory_rates, theory_rates_unchecked, trace_finv_h,
    GaussianParams, QuadraticObjective, TheoryRates,
};
use crate::math;
use crate::objective::Evaluate;
use crate::par;
use crate::ranking::{n_w_constant, utilities, WeightScheme};
use crate::rng::StreamKey;
use crate::surrogate::{
    gate, sample_correlation, EmaTracker, GateConfig, GateDecision, GateSource,
};
use crate::utility::{SchemeConstants, UtilityPolynomial};

/// Standard errors of slack granted before a check counts as violated.
pub const NOISE_MULTIPLIER: f64 = 4.0;
/// Replicate floor for checks whose variance is large.
pub const MIN_REPLICATES: usize = 10_000;
/// Step halvings attempted before a realized step is abandoned.
pub const MAX_HALVINGS: usize = 60;

const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Holds,
    Violated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Violated => "violated",
        }
    }
}

/// Outcome of one Monte-Carlo check. `slack = rhs_bound - lhs_estimate`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheckReport {
    pub name: String,
    pub lhs_estimate: f64,
    pub lhs_std_error: f64,
    pub rhs_bound: f64,
    pub slack: f64,
    pub n_replicates: usize,
    pub verdict: Verdict,
}

impl BoundCheckReport {
    /// One-sided: holds iff `lhs ≤ rhs + 4·se`.
    pub fn bound(name: impl Into<String>, lhs: f64, se: f64, rhs: f64, n: usize) -> Self {
        let holds = lhs <= rhs + NOISE_MULTIPLIER * se;
        Self::build(name.into(), lhs, se, rhs, n, holds)
    }

    /// Two-sided: holds iff `|lhs - rhs| ≤ 4·se` up to rounding.
    pub fn identity(name: impl Into<String>, lhs: f64, se: f64, rhs: f64, n: usize) -> Self {
        let tol = NOISE_MULTIPLIER * se + ROUNDING_FLOOR * math::abs(rhs).max(1.0);
        let holds = math::abs(lhs - rhs) <= tol;
        Self::build(name.into(), lhs, se, rhs, n, holds)
    }

    fn build(name: String, lhs: f64, se: f64, rhs: f64, n: usize, holds: bool) -> Self {
        Self {
            name,
            lhs_estimate: lhs,
            lhs_std_error: se,
            rhs_bound: rhs,
            slack: rhs - lhs,
            n_replicates: n,
            verdict: if holds {
                Verdict::Holds
            } else {
                Verdict::Violated
            },
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn require_replicates(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(invalid(format!(
            "at least {min} replicates required, got {n}"
        )));
    }
    Ok(())
}

fn evaluate_all<E: Evaluate + ?Sized>(e: &E, xs: &[DVector<f64>]) -> Result<Vec<f64>> {
    xs.iter().map(|x| e.evaluate(x.as_slice())).collect()
}

fn replicate_values<F>(n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    par::map_indexed(n, f).into_iter().collect()
}

/// Quadratic-term bound: `E[Δ_mᵀ A Δ_m] ≤ N_w Tr(CA)` for utilities ranked
/// by an arbitrary `g`.
pub fn check_quadratic_term<G>(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    g: &G,
    scheme: &WeightScheme,
    replicates: usize,
    key: StreamKey,
) -> Result<BoundCheckReport>
where
    G: Evaluate + Sync + ?Sized,
{
    require_replicates(replicates, MIN_MC_SAMPLES)?;
    let lambda = scheme.lambda();
    let a = obj.hessian();
    let vals = replicate_values(replicates, |k| {
        let mut rng = key.rng(k as u64);
        let xs = sample_population(theta, lambda, &mut rng);
        let w = utilities(&evaluate_all(g, &xs)?, scheme)?;
        let delta = assemble_delta(theta, &xs, &w)?;
        Ok(delta.d_mean.dot(&(a * &delta.d_mean)))
    })?;
    let (lhs, se) = math::mean_and_se(&vals);
    let rhs = n_w_constant(scheme) * trace_finv_h(theta, obj)?;
    Ok(BoundCheckReport::bound("lemma1", lhs, se, rhs, replicates))
}

/// Monte-Carlo `∇Jᵀ E[Δ_f] = E[Σ W_i (f(x_i) - J(θ))]` and its standard error.
/// No hypothesis on the scheme.
pub fn descent_estimate(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    scheme: &WeightScheme,
    replicates: usize,
    key: StreamKey,
) -> Result<(f64, f64)> {
    let lambda = scheme.lambda();
    let j = expected_objective_j(theta, obj)?;
    let vals = replicate_values(replicates, |k| {
        let mut rng = key.rng(k as u64);
        let xs = sample_population(theta, lambda, &mut rng);
        let fv = evaluate_all(obj, &xs)?;
        let w = utilities(&fv, scheme)?;
        Ok(w.iter().zip(&fv).map(|(w, f)| w * (f - j)).sum())
    })?;
    Ok(math::mean_and_se(&vals))
}

/// Descent bound: `∇Jᵀ E[Δ_f] ≤ -(√2/6) M_w √M_f` for monotone schemes.
pub fn check_descent(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    scheme: &WeightScheme,
    replicates: usize,
    key: StreamKey,
) -> Result<BoundCheckReport> {
    scheme.require_monotone()?;
    require_replicates(replicates, MIN_REPLICATES)?;
    let (lhs, se) = descent_estimate(theta, obj, scheme, replicates, key)?;
    let m_w = crate::utility::selection_gap_m_w(scheme);
    let rhs = -(math::sqrt(2.0) / 6.0) * m_w * math::sqrt(metric_norm_m_f(theta, obj)?);
    Ok(BoundCheckReport::bound("lemma2", lhs, se, rhs, replicates))
}

/// Moment bound `E[|u(P_f) - u(P_g)|^s]^{1/s} ≤ L_u ((1 - τ)/2)^{1/s}` for
/// several `s`, sharing one set of utility pairs and one estimate of `τ`.
///
/// The reported standard error combines the error of the left side with the
/// propagated error of `τ̂` on the right.
#[allow(clippy::too_many_arguments)]
pub fn check_kendall_bounds<G>(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    g: &G,
    scheme: &WeightScheme,
    s_values: &[f64],
    samples: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<Vec<BoundCheckReport>>
where
    G: Evaluate + Sync + ?Sized,
{
    require_replicates(samples, MIN_REPLICATES)?;
    if s_values.iter().any(|&s| !(s.is_finite() && s >= 1.0)) {
        return Err(invalid("moment order s must be finite and at least 1"));
    }
    let pairs = utility_pairs(
        obj,
        g,
        theta,
        scheme,
        samples,
        reference_size,
        &mut key.child("pairs").rng(0),
    )?;
    let tau = population_tau(obj, g, theta, samples, &mut key.child("tau").rng(0))?;
    let l_u = UtilityPolynomial::new(scheme).lipschitz();
    let half_gap = ((1.0 - tau.value) / 2.0).clamp(0.0, 1.0);

    Ok(s_values
        .iter()
        .map(|&s| {
            let moments: Vec<f64> = pairs
                .a
                .iter()
                .zip(&pairs.b)
                .map(|(a, b)| math::powf(math::abs(a - b), s))
                .collect();
            let (m, m_se) = math::mean_and_se(&moments);
            let lhs = math::powf(m, 1.0 / s);
            let lhs_se = if m > 0.0 {
                math::powf(m, 1.0 / s - 1.0) * m_se / s
            } else {
                0.0
            };
            let rhs = l_u * math::powf(half_gap, 1.0 / s);
            let rhs_se = if half_gap > 0.0 {
                l_u * math::powf(half_gap, 1.0 / s - 1.0) * tau.std_error / (2.0 * s)
            } else {
                0.0
            };
            let se = math::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
            BoundCheckReport::bound(format!("prop3_s{s}"), lhs, se, rhs, samples)
        })
        .collect())
}

/// [`check_kendall_bounds`] for a single `s`.
#[allow(clippy::too_many_arguments)]
pub fn check_kendall_bound<G>(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    g: &G,
    scheme: &WeightScheme,
    s: f64,
    samples: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<BoundCheckReport>
where
    G: Evaluate + Sync + ?Sized,
{
    let mut v = check_kendall_bounds(theta, obj, g, scheme, &[s], samples, reference_size, key)?;
    Ok(v.remove(0))
}

/// `K_w = 2 U_u (1 - ρ)` with `K̂_w` and the plain sample `ρ̂` computed on
/// the same utility pairs.
#[allow(clippy::too_many_arguments)]
pub fn check_pearson_identity<G>(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    g: &G,
    scheme: &WeightScheme,
    samples: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<BoundCheckReport>
where
    G: Evaluate + Sync + ?Sized,
{
    require_replicates(samples, MIN_REPLICATES)?;
    if scheme.is_constant() {
        return Err(Error::UndefinedCorrelation(
            "utilities have zero variance (U_u = 0)",
        ));
    }
    let pairs = utility_pairs(
        obj,
        g,
        theta,
        scheme,
        samples,
        reference_size,
        &mut key.rng(0),
    )?;
    let st = pairs.statistics(scheme)?;
    let rhs = st.kw - st.residual;
    Ok(BoundCheckReport::identity(
        "pearson_identity",
        st.kw,
        st.residual_se,
        rhs,
        samples,
    ))
}

/// `Var[f(X)] = M_f(θ)`.
pub fn check_variance_identity(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    samples: usize,
    key: StreamKey,
) -> Result<BoundCheckReport> {
    require_replicates(samples, MIN_REPLICATES)?;
    let mut rng = key.rng(0);
    let fv: Vec<f64> = (0..samples)
        .map(|_| obj.value(sample_one(theta, &mut rng).as_slice()))
        .collect();
    let n = samples as f64;
    let (mean, _) = math::mean_and_se(&fv);
    let (mut m2, mut m4) = (
        math::CompensatedSum::default(),
        math::CompensatedSum::default(),
    );
    for &v in &fv {
        let d = (v - mean) * (v - mean);
        m2.add(d);
        m4.add(d * d);
    }
    let (m2, m4) = (m2.total() / n, m4.total() / n);
    let var = m2 * n / (n - 1.0);
    let se = math::sqrt(((m4 - m2 * m2) / n).max(0.0));
    let rhs = metric_norm_m_f(theta, obj)?;
    Ok(BoundCheckReport::identity(
        "variance_identity",
        var,
        se,
        rhs,
        samples,
    ))
}

/// `E[W_1 | x_1 = probe] = u(P_f(f(probe))) / λ`.
///
/// `P_f` comes from a reference sample; the binomial error of `P̂_f` is
/// propagated through `u` and combined with the error of the left side.
#[allow(clippy::too_many_arguments)]
pub fn check_conditional_weight(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    scheme: &WeightScheme,
    probe: &[f64],
    replicates: usize,
    reference_size: usize,
    key: StreamKey,
) -> Result<BoundCheckReport> {
    require_replicates(replicates, MIN_REPLICATES)?;
    if reference_size < MIN_REFERENCE_SIZE {
        return Err(invalid("reference size must be at least 10000"));
    }
    let f_probe = obj.evaluate(probe)?;
    let lambda = scheme.lambda();
    let vals = replicate_values(replicates, |k| {
        let mut rng = key.rng(k as u64);
        let mut fv = Vec::with_capacity(lambda);
        fv.push(f_probe);
        for _ in 1..lambda {
            fv.push(obj.value(sample_one(theta, &mut rng).as_slice()));
        }
        Ok(utilities(&fv, scheme)?[0])
    })?;
    let (lhs, lhs_se) = math::mean_and_se(&vals);

    let mut rng = key.child("reference").rng(0);
    let reference = ReferenceCdf::new(
        (0..reference_size)
            .map(|_| obj.value(sample_one(theta, &mut rng).as_slice()))
            .collect(),
    )?;
    let p = reference.quantile(f_probe);
    let poly = UtilityPolynomial::new(scheme);
    let rhs = poly.eval(p)? / lambda as f64;
    // secant over the binomial interval of P̂; tangent propagation fails
    // where u is flat, e.g. in the tails of truncation schemes
    let r = reference_size as f64;
    let p_se = math::sqrt((p * (1.0 - p) + 1.0 / r) / r);
    let lo = poly.eval((p - p_se).max(0.0))?;
    let hi = poly.eval((p + p_se).min(1.0))?;
    let u_p = poly.eval(p)?;
    let rhs_se = math::abs(lo - u_p).max(math::abs(hi - u_p)) / lambda as f64;
    // Under the identity W_1 = w_{1+K} with K ~ Bin(λ-1, p), whose variance
    // is a Bernstein form in the squared weights. It floors the sample
    // variance, which is zero when rank changes are too rare to be observed.
    let squared = WeightScheme::new(scheme.weights().iter().map(|w| w * w).collect())?;
    let null_var = (UtilityPolynomial::new(&squared).eval(p)? / lambda as f64 - rhs * rhs).max(0.0);
    let lhs_se = lhs_se.max(math::sqrt(null_var / replicates as f64));
    let se = math::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
    Ok(BoundCheckReport::identity(
        "conditional_weight",
        lhs,
        se,
        rhs,
        replicates,
    ))
}

/// `∫₀¹ u = Σ w` and `∫₀¹ u² = U_u + (Σ w)²`, by Monte Carlo over uniform `p`.
pub fn check_integrals(
    scheme: &WeightScheme,
    samples: usize,
    key: StreamKey,
) -> Result<[BoundCheckReport; 2]> {
    use rand::Rng;
    require_replicates(samples, MIN_REPLICATES)?;
    let poly = UtilityPolynomial::new(scheme);
    let mut rng = key.rng(0);
    let mut u1 = Vec::with_capacity(samples);
    let mut u2 = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v = poly.eval(rng.random::<f64>())?;
        u1.push(v);
        u2.push(v * v);
    }
    let k = SchemeConstants::of(scheme);
    let (m1, s1) = math::mean_and_se(&u1);
    let (m2, s2) = math::mean_and_se(&u2);
    Ok([
        BoundCheckReport::identity("integral_u", m1, s1, k.sum_w, samples),
        BoundCheckReport::identity("integral_u2", m2, s2, k.u_u + k.sum_w * k.sum_w, samples),
    ])
}

/// One iteration of the gated drift loop.
///
/// `drift_mean` estimates `E_t[J(θ^{t+1})] - J(θ^t)` from replicated one-step
/// updates out of the same `θ^t`; `j_std_error` is its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRecord {
    pub iteration: usize,
    pub j_before: f64,
    pub j_mean_after: f64,
    pub j_std_error: f64,
    pub drift_mean: f64,
    pub alpha_used: f64,
    pub gate: GateDecision,
    /// `(-αβ(1-γ) + α²/2) N_w Tr(CA)` at `θ^t`.
    pub bound_rhs: f64,
    /// Halvings needed before the realized step kept `C` positive definite.
    pub spd_rejections: usize,
}

impl DriftRecord {
    /// `drift_mean ≤ bound_rhs + 4·se`.
    pub fn verdict(&self) -> Verdict {
        if self.drift_mean <= self.bound_rhs + NOISE_MULTIPLIER * self.j_std_error {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }
}

/// One row of an optimization trajectory. The last row carries the final
/// `J` and zeros in the per-step fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub j: f64,
    pub drift_mean: f64,
    pub drift_std_error: f64,
    pub bound_rhs: f64,
    pub measured: f64,
    pub gate_used: bool,
    pub alpha: f64,
    pub spd_rejections: usize,
}

struct DriftLoop<'a, G: ?Sized> {
    obj: &'a QuadraticObjective,
    g: &'a G,
    scheme: &'a WeightScheme,
    gate: GateConfig,
    alpha: f64,
    rates: TheoryRates,
    replicates: usize,
    key: StreamKey,
}

impl<G: Evaluate + Sync + ?Sized> DriftLoop<'_, G> {
    fn gated_utilities(&self, use_g: bool, fv: &[f64], gv: &[f64]) -> Result<Vec<f64>> {
        utilities(if use_g { gv } else { fv }, self.scheme)
    }

    fn sample_measure(&self, fv: &[f64], gv: &[f64]) -> Result<CorrelationEstimate> {
        let v = match sample_correlation(self.gate.kind, fv, gv, self.scheme) {
            Ok(v) => v,
            // an undefined statistic fails the gate
            Err(Error::UndefinedCorrelation(_)) => -1.0,
            Err(e) => return Err(e),
        };
        Ok(CorrelationEstimate::exact(v, fv.len()))
    }

    fn run(
        &self,
        theta0: &GaussianParams,
        iterations: usize,
    ) -> Result<(Vec<DriftRecord>, GaussianParams)> {
        let lambda = self.scheme.lambda();
        let n_w = n_w_constant(self.scheme);
        let mut ema = match self.gate.source {
            GateSource::Ema { decay } => Some(EmaTracker::new(decay)?),
            _ => None,
        };
        let mut theta = theta0.clone();
        let mut records = Vec::with_capacity(iterations);
        for t in 0..iterations {
            let it = self.key.index(t as u64);
            let xs = sample_population(&theta, lambda, &mut it.child("step").rng(0));
            let fv = evaluate_all(self.obj, &xs)?;
            let gv = evaluate_all(self.g, &xs)?;
            let measured = match self.gate.source {
                GateSource::Sample => self.sample_measure(&fv, &gv)?,
                GateSource::Ema { .. } => {
                    let s = self.sample_measure(&fv, &gv)?;
                    let tracker = ema.as_mut().expect("EMA gate has a tracker");
                    CorrelationEstimate::exact(tracker.update(s.value), s.n_samples)
                }
                GateSource::Population {
                    n_pairs,
                    reference_size,
                } => {
                    let mut rng = it.child("gate").rng(0);
                    match self.gate.kind {
                        CorrelationKind::Kendall => {
                            population_tau(self.obj, self.g, &theta, n_pairs, &mut rng)?
                        }
                        CorrelationKind::Pearson => population_rho(
                            self.obj,
                            self.g,
                            &theta,
                            self.scheme,
                            n_pairs,
                            reference_size,
                            &mut rng,
                        )?,
                    }
                }
            };
            let decision = gate(measured, self.gate.threshold, self.gate.kind)?;
            let use_g = decision.use_surrogate;

            let j_before = expected_objective_j(&theta, self.obj)?;
            let rep_key = it.child("replicate");
            let th = &theta;
            let drifts = replicate_values(self.replicates, |k| {
                let mut rng = rep_key.rng(k as u64);
                let xs = sample_population(th, lambda, &mut rng);
                let fv = evaluate_all(self.obj, &xs)?;
                let gv = if use_g {
                    evaluate_all(self.g, &xs)?
                } else {
                    Vec::new()
                };
                let w = self.gated_utilities(use_g, &fv, &gv)?;
                let delta = assemble_delta(th, &xs, &w)?;
                objective_change(th, self.obj, &delta, self.alpha)
            })?;
            let (drift_mean, drift_se) = math::mean_and_se(&drifts);

            let bound_rhs = if self.alpha == 0.0 {
                0.0
            } else {
                let a = self.alpha;
                (-a * self.rates.beta * (1.0 - self.rates.gamma) + 0.5 * a * a)
                    * n_w
                    * trace_finv_h(&theta, self.obj)?
            };

            let mut spd_rejections = 0;
            if self.alpha > 0.0 {
                let w = self.gated_utilities(use_g, &fv, &gv)?;
                let delta = assemble_delta(&theta, &xs, &w)?;
                let mut a = self.alpha;
                loop {
                    match apply_step(&theta, &delta, a) {
                        Ok(next) => {
                            theta = next;
                            break;
                        }
                        Err(Error::StepRejected { .. }) => {
                            spd_rejections += 1;
                            a *= 0.5;
                            if spd_rejections >= MAX_HALVINGS {
                                break;
                            }
                        }
                        Err(e) => return Err(e),
                    }
                }
            }

            records.push(DriftRecord {
                iteration: t,
                j_before,
                j_mean_after: j_before + drift_mean,
                j_std_error: drift_se,
                drift_mean,
                alpha_used: self.alpha,
                gate: decision,
                bound_rhs,
                spd_rejections,
            });
        }
        Ok((records, theta))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid("learning rate must be finite and non-negative"));
    }
    Ok(())
}

/// Gated drift trajectory under the convex-quadratic descent guarantee.
///
/// Preconditions, checked before any sampling: monotone scheme, threshold
/// strictly above the admissible bound, `0 ≤ α < 2β(1-γ)`. When the gate
/// fails the `f`-ranked step is used instead of the surrogate-ranked one.
#[allow(clippy::too_many_arguments)]
pub fn check_drift_theorem<G>(
    theta0: &GaussianParams,
    obj: &QuadraticObjective,
    g: &G,
    scheme: &WeightScheme,
    gate_config: GateConfig,
    alpha: f64,
    iterations: usize,
    replicates: usize,
    key: StreamKey,
) -> Result<Vec<DriftRecord>>
where
    G: Evaluate + Sync + ?Sized,
{
    gate_config.validate()?;
    let rates = theory_rates(scheme, obj.dim(), gate_config.threshold, gate_config.kind)?;
    check_alpha(alpha)?;
    if alpha >= rates.alpha_max {
        return Err(Error::LearningRateTooLarge {
            alpha,
            limit: rates.alpha_max,
        });
    }
    require_replicates(replicates, 2)?;
    let lp = DriftLoop {
        obj,
        g,
        scheme,
        gate: gate_config,
        alpha,
        rates,
        replicates,
        key,
    };
    lp.run(theta0, iterations).map(|(r, _)| r)
}

/// Summarize a drift trajectory as one report: the record closest to
/// violating its bound, in units of its standard error.
pub fn drift_report(
    name: impl Into<String>,
    records: &[DriftRecord],
    replicates: usize,
) -> BoundCheckReport {
    let worst = records.iter().max_by(|a, b| {
        let za = (a.drift_mean - a.bound_rhs) - NOISE_MULTIPLIER * a.j_std_error;
        let zb = (b.drift_mean - b.bound_rhs) - NOISE_MULTIPLIER * b.j_std_error;
        za.partial_cmp(&zb).unwrap_or(core::cmp::Ordering::Equal)
    });
    match worst {
        Some(r) => {
            BoundCheckReport::bound(name, r.drift_mean, r.j_std_error, r.bound_rhs, replicates)
        }
        None => BoundCheckReport::bound(name, 0.0, 0.0, 0.0, replicates),
    }
}

/// Resolved inputs of an optimization run.
pub struct MonotoneExperiment<'a, G: ?Sized> {
    pub theta0: GaussianParams,
    pub objective: QuadraticObjective,
    pub surrogate: &'a G,
    pub scheme: WeightScheme,
    pub gate: GateConfig,
    pub alpha: f64,
    pub iterations: usize,
    pub replicates: usize,
    pub key: StreamKey,
}

/// Gated optimization trajectory with per-iteration drift estimates. No
/// admissibility precondition; `bound_rhs` uses the same formulas with
/// whatever `γ` the threshold implies. Step rejections are recorded, never
/// fatal.
pub fn run_monotone_experiment<G>(exp: &MonotoneExperiment<'_, G>) -> Result<Vec<TrajectoryRow>>
where
    G: Evaluate + Sync + ?Sized,
{
    exp.gate.validate()?;
    check_alpha(exp.alpha)?;
    require_replicates(exp.replicates, 1)?;
    let rates = theory_rates_unchecked(
        &exp.scheme,
        exp.objective.dim(),
        exp.gate.threshold,
        exp.gate.kind,
    )?;
    let lp = DriftLoop {
        obj: &exp.objective,
        g: exp.surrogate,
        scheme: &exp.scheme,
        gate: exp.gate,
        alpha: exp.alpha,
        rates,
        replicates: exp.replicates,
        key: exp.key,
    };
    let (records, last) = lp.run(&exp.theta0, exp.iterations)?;
    let mut rows: Vec<TrajectoryRow> = records
        .iter()
        .map(|r| TrajectoryRow {
            iteration: r.iteration,
            j: r.j_before,
            drift_mean: r.drift_mean,
            drift_std_error: r.j_std_error,
            bound_rhs: r.bound_rhs,
            measured: r.gate.measured.value,
            gate_used: r.gate.use_surrogate,
            alpha: r.alpha_used,
            spd_rejections: r.spd_rejections,
        })
        .collect();
    rows.push(TrajectoryRow {
        iteration: exp.iterations,
        j: expected_objective_j(&last, &exp.objective)?,
        drift_mean: 0.0,
        drift_std_error: 0.0,
        bound_rhs: 0.0,
        measured: 0.0,
        gate_used: false,
        alpha: 0.0,
        spd_rejections: 0,
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::SurrogateSpec;
    use alloc::vec;
    use nalgebra::DMatrix;

    fn unit(d: usize) -> (GaussianParams, QuadraticObjective) {
        (
            GaussianParams::isotropic(DVector::zeros(d), 1.0).unwrap(),
            QuadraticObjective::sphere(DVector::zeros(d)).unwrap(),
        )
    }

    #[test]
    fn verdict_semantics() {
        assert!(BoundCheckReport::bound("b", 1.0, 0.25, 0.0, 10).holds());
        assert!(!BoundCheckReport::bound("b", 1.01, 0.25, 0.0, 10).holds());
        assert!(BoundCheckReport::identity("i", -1.0, 0.25, 0.0, 10).holds());
        assert!(!BoundCheckReport::identity("i", -1.01, 0.25, 0.0, 10).holds());
        assert_eq!(BoundCheckReport::bound("b", 1.0, 0.0, 3.0, 1).slack, 2.0);
    }

    #[test]
    fn quadratic_term_two_point() {
        let (theta, obj) = unit(1);
        let w = WeightScheme::new(vec![1.0, 0.0]).unwrap();
        let r = check_quadratic_term(&theta, &obj, &obj, &w, 2000, StreamKey::new(1)).unwrap();
        assert_eq!(r.rhs_bound, 4.0);
        assert!(r.holds());
        let z = WeightScheme::new(vec![0.0, 0.0]).unwrap();
        let r = check_quadratic_term(&theta, &obj, &obj, &z, 1000, StreamKey::new(1)).unwrap();
        assert_eq!((r.lhs_estimate, r.rhs_bound), (0.0, 0.0));
        assert!(r.holds());
        assert!(check_quadratic_term(&theta, &obj, &obj, &w, 10, StreamKey::new(1)).is_err());
    }

    #[test]
    fn descent_rejects_non_monotone() {
        let (theta, obj) = unit(2);
        let w = WeightScheme::equal(4, 0.25).unwrap();
        assert_eq!(
            check_descent(&theta, &obj, &w, 10_000, StreamKey::new(1)),
            Err(Error::NotMonotone)
        );
    }

    #[test]
    fn drift_preconditions() {
        let (theta, obj) = unit(2);
        let w = WeightScheme::truncation(4, 2).unwrap();
        let g = SurrogateSpec::exact(obj.clone());
        let cfg = GateConfig {
            kind: CorrelationKind::Kendall,
            threshold: 1.0,
            source: GateSource::Sample,
        };
        let rates = theory_rates(&w, 2, 1.0, CorrelationKind::Kendall).unwrap();
        let err = check_drift_theorem(
            &theta,
            &obj,
            &g,
            &w,
            cfg,
            rates.alpha_max,
            1,
            10,
            StreamKey::new(0),
        );
        assert!(matches!(err, Err(Error::LearningRateTooLarge { .. })));
        let low = GateConfig {
            threshold: 0.5,
            ..cfg
        };
        let err = check_drift_theorem(&theta, &obj, &g, &w, low, 0.0, 1, 10, StreamKey::new(0));
        assert!(matches!(err, Err(Error::ThresholdBelowAdmissible { .. })));

        let recs =
            check_drift_theorem(&theta, &obj, &g, &w, cfg, 0.0, 3, 10, StreamKey::new(0)).unwrap();
        for r in &recs {
            assert_eq!((r.drift_mean, r.bound_rhs, r.j_std_error), (0.0, 0.0, 0.0));
            assert_eq!(r.verdict(), Verdict::Holds);
        }
        assert_eq!(recs[0].j_before, recs[2].j_before);
    }

    #[test]
    fn zero_iterations_gives_one_row() {
        let (theta, obj) = unit(2);
        let g = SurrogateSpec::exact(obj.clone());
        let exp = MonotoneExperiment {
            theta0: theta,
            objective: obj,
            surrogate: &g,
            scheme: WeightScheme::truncation(4, 2).unwrap(),
            gate: GateConfig {
                kind: CorrelationKind::Kendall,
                threshold: 0.9,
                source: GateSource::Sample,
            },
            alpha: 0.01,
            iterations: 0,
            replicates: 4,
            key: StreamKey::new(3),
        };
        let rows = run_monotone_experiment(&exp).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].j, 1.0);
    }

    #[test]
    fn variance_identity_scalar() {
        let theta = GaussianParams::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        let obj =
            QuadraticObjective::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1)).unwrap();
        let r = check_variance_identity(&theta, &obj, 20_000, StreamKey::new(5)).unwrap();
        assert_eq!(r.rhs_bound, 30.0);
        assert!(r.holds(), "{r:?}");
    }
}
