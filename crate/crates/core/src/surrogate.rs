//! Synthetic surrogates with controllable fidelity, the correlation gate, and
//! admissible gate thresholds.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::correlation::{kendall_tau_b, pearson_weights, CorrelationEstimate, CorrelationKind};
use crate::error::{check_finite, invalid, Error, Result};
use crate::gaussian::{sample_one, GaussianParams, QuadraticObjective};
use crate::math;
use crate::objective::Evaluate;
use crate::ranking::{rank_counts, utilities, WeightScheme};
use crate::rng::{mix64, Stream};
use crate::utility::SchemeConstants;

/// Quantile-reversing surrogate built from a frozen reference distribution.
///
/// `g(x) = h(F(f(x)))` where `F` is a strictly increasing interpolation of
/// the empirical CDF of `f` under `θ_ref`, and `h` reverses order within
/// `[0, μ/λ]` and within `(μ/λ, 1]` while keeping the first block below the
/// second.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSwap {
    mu: usize,
    lambda: usize,
    knots: Vec<f64>,
    tail_scale: f64,
}

impl BlockSwap {
    pub fn new<R: Rng + ?Sized>(
        base: &QuadraticObjective,
        mu: usize,
        lambda: usize,
        theta_ref: &GaussianParams,
        reference_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if mu == 0 || mu >= lambda {
            return Err(invalid("block swap requires 1 <= mu < lambda"));
        }
        if reference_size == 0 {
            return Err(invalid("block swap reference size must be positive"));
        }
        if theta_ref.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: theta_ref.dim(),
            });
        }
        let mut knots: Vec<f64> = (0..reference_size)
            .map(|_| base.value(sample_one(theta_ref, rng).as_slice()))
            .collect();
        check_finite(&knots)?;
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        knots.dedup();
        let spread = knots[knots.len() - 1] - knots[0];
        let tail_scale = if spread > 0.0 {
            spread / knots.len() as f64
        } else {
            1.0
        };
        Ok(Self {
            mu,
            lambda,
            knots,
            tail_scale,
        })
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Strictly increasing CDF stand-in: `k/(R+1)` at the `k`-th knot, linear
    /// between knots, rational tails towards 0 and 1.
    pub fn smooth_cdf(&self, s: f64) -> f64 {
        let r = self.knots.len();
        let step = 1.0 / (r as f64 + 1.0);
        let (first, last) = (self.knots[0], self.knots[r - 1]);
        if s <= first {
            return step / (1.0 + (first - s) / self.tail_scale);
        }
        if s >= last {
            return 1.0 - step / (1.0 + (s - last) / self.tail_scale);
        }
        // knots[k - 1] < s ≤ knots[k], 1 ≤ k ≤ r - 1
        let k = self.knots.partition_point(|&v| v < s);
        let (lo, hi) = (self.knots[k - 1], self.knots[k]);
        step * (k as f64 + (s - lo) / (hi - lo))
    }

    pub fn transform(&self, f_value: f64) -> f64 {
        let cut = self.mu as f64 / self.lambda as f64;
        let q = self.smooth_cdf(f_value);
        if q <= cut {
            cut - q
        } else {
            2.0 - q
        }
    }
}

/// Population-level block swap: within a population of distinct `f` values,
/// reverse the order of the best `μ` and of the remaining `λ - μ`, keeping the
/// best `μ` first. Returns surrogate values `g_i`.
pub fn block_swap_population(f_vals: &[f64], mu: usize) -> Result<Vec<f64>> {
    let lambda = f_vals.len();
    if mu == 0 || mu >= lambda {
        return Err(invalid("block swap requires 1 <= mu < lambda"));
    }
    let ranks = rank_counts(f_vals)?;
    if ranks
        .weak
        .iter()
        .zip(&ranks.strict)
        .any(|(w, s)| w - s != 1)
    {
        return Err(invalid("block swap requires distinct f values"));
    }
    Ok(ranks
        .weak
        .iter()
        .map(|&r| {
            if r <= mu {
                (mu - r) as f64
            } else {
                (lambda + mu - r) as f64
            }
        })
        .collect())
}

/// Sample τ-b of a population against its block swap, by pair counting:
/// cross-block pairs are concordant, within-block pairs discordant. Equals
/// `(λ - (λ - 2μ)²) / (λ(λ - 1))`.
pub fn block_swap_tau(lambda: usize, mu: usize) -> Result<f64> {
    if mu == 0 || mu >= lambda {
        return Err(invalid("block swap requires 1 <= mu < lambda"));
    }
    let pairs = |n: usize| (n * (n - 1) / 2) as f64;
    let concordant = (mu * (lambda - mu)) as f64;
    Ok((concordant - pairs(mu) - pairs(lambda - mu)) / pairs(lambda))
}

/// Surrogate kinds. `HessianPerturbed` carries its own quadratic.
#[derive(Clone)]
pub enum SurrogateKind {
    Exact,
    Negated,
    /// `f(x) + σ ε(x)` with `ε(x) ~ N(0, 1)` drawn from a stream keyed by
    /// `(seed, x)`, so the same `x` always gets the same noise.
    AdditiveNoise {
        sigma: f64,
        seed: u64,
    },
    HessianPerturbed(QuadraticObjective),
    BlockSwap(BlockSwap),
    External(Arc<dyn Evaluate + Send + Sync>),
}

impl fmt::Debug for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => f.write_str("Exact"),
            Self::Negated => f.write_str("Negated"),
            Self::AdditiveNoise { sigma, seed } => f
                .debug_struct("AdditiveNoise")
                .field("sigma", sigma)
                .field("seed", seed)
                .finish(),
            Self::HessianPerturbed(q) => f.debug_tuple("HessianPerturbed").field(q).finish(),
            Self::BlockSwap(b) => f
                .debug_struct("BlockSwap")
                .field("mu", &b.mu)
                .field("lambda", &b.lambda)
                .finish(),
            Self::External(_) => f.write_str("External(..)"),
        }
    }
}

/// A surrogate `g` paired with the objective `f` it imitates. Immutable after
/// construction and safe to evaluate from several threads.
#[derive(Clone, Debug)]
pub struct SurrogateSpec {
    kind: SurrogateKind,
    base: QuadraticObjective,
}

impl SurrogateSpec {
    pub fn exact(base: QuadraticObjective) -> Self {
        Self {
            kind: SurrogateKind::Exact,
            base,
        }
    }

    pub fn negated(base: QuadraticObjective) -> Self {
        Self {
            kind: SurrogateKind::Negated,
            base,
        }
    }

    pub fn additive_noise(base: QuadraticObjective, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("noise sigma must be positive and finite"));
        }
        Ok(Self {
            kind: SurrogateKind::AdditiveNoise { sigma, seed },
            base,
        })
    }

    /// `g(x) = ½ (x - x̃)ᵀ Ã (x - x̃)`.
    pub fn hessian_perturbed(
        base: QuadraticObjective,
        a_tilde: DMatrix<f64>,
        x_tilde: DVector<f64>,
    ) -> Result<Self> {
        if x_tilde.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: x_tilde.len(),
            });
        }
        let g = QuadraticObjective::new(a_tilde, x_tilde)?;
        Ok(Self {
            kind: SurrogateKind::HessianPerturbed(g),
            base,
        })
    }

    /// Random perturbation of size `eps`: `Ã = B A Bᵀ` with
    /// `B = I + eps G / √d`, `x̃ = x* + eps z`, `G` and `z` standard normal.
    pub fn hessian_perturbed_random<R: Rng + ?Sized>(
        base: QuadraticObjective,
        eps: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(invalid("perturbation size must be non-negative and finite"));
        }
        let d = base.dim();
        let scale = eps / math::sqrt(d as f64);
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::identity(d, d) + g * scale;
        let a_tilde = &b * base.hessian() * b.transpose();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x_tilde = base.optimum() + z * eps;
        Self::hessian_perturbed(base, a_tilde, x_tilde)
    }

    pub fn block_swap(base: QuadraticObjective, swap: BlockSwap) -> Self {
        Self {
            kind: SurrogateKind::BlockSwap(swap),
            base,
        }
    }

    pub fn external(base: QuadraticObjective, evaluator: Arc<dyn Evaluate + Send + Sync>) -> Self {
        Self {
            kind: SurrogateKind::External(evaluator),
            base,
        }
    }

    pub fn kind(&self) -> &SurrogateKind {
        &self.kind
    }

    pub fn base(&self) -> &QuadraticObjective {
        &self.base
    }

    /// Short identifier used in report names.
    pub fn label(&self) -> String {
        match &self.kind {
            SurrogateKind::Exact => "exact".into(),
            SurrogateKind::Negated => "negated".into(),
            SurrogateKind::AdditiveNoise { sigma, .. } => alloc::format!("noise{sigma}"),
            SurrogateKind::HessianPerturbed(_) => "hessian".into(),
            SurrogateKind::BlockSwap(b) => alloc::format!("blockswap{}", b.mu),
            SurrogateKind::External(_) => "external".into(),
        }
    }
}

fn noise_draw(seed: u64, x: &[f64]) -> f64 {
    let mut h = mix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for &v in x {
        // -0.0 and 0.0 are the same point
        let bits = if v == 0.0 { 0 } else { v.to_bits() };
        h = mix64(h ^ bits);
    }
    Stream::seed_from_u64(h).sample::<f64, _>(StandardNormal)
}

impl Evaluate for SurrogateSpec {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.base.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.dim(),
                got: x.len(),
            });
        }
        match &self.kind {
            SurrogateKind::Exact => Ok(self.base.value(x)),
            SurrogateKind::Negated => Ok(-self.base.value(x)),
            SurrogateKind::AdditiveNoise { sigma, seed } => {
                Ok(self.base.value(x) + sigma * noise_draw(*seed, x))
            }
            SurrogateKind::HessianPerturbed(g) => Ok(g.value(x)),
            SurrogateKind::BlockSwap(b) => Ok(b.transform(self.base.value(x))),
            SurrogateKind::External(e) => e.evaluate(x).and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SurrogateEvaluation(
                        "external surrogate returned a non-finite value".into(),
                    ))
                }
            }),
        }
    }
}

/// `g(x)` for the given surrogate.
pub fn evaluate(spec: &SurrogateSpec, x: &[f64]) -> Result<f64> {
    spec.evaluate(x)
}

/// Runs an evaluator that is not thread-safe behind a lock.
#[cfg(feature = "std")]
pub struct Serialized<E>(std::sync::Mutex<E>);

#[cfg(feature = "std")]
impl<E> Serialized<E> {
    pub fn new(inner: E) -> Self {
        Self(std::sync::Mutex::new(inner))
    }
}

#[cfg(feature = "std")]
impl<E: Evaluate> Evaluate for Serialized<E> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let guard = self
            .0
            .lock()
            .map_err(|_| Error::SurrogateEvaluation("evaluator lock poisoned".into()))?;
        guard.evaluate(x)
    }
}

/// Outcome of a gate test, with its inputs kept for audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateDecision {
    pub use_surrogate: bool,
    pub measured: CorrelationEstimate,
    pub threshold: f64,
    pub kind: CorrelationKind,
}

/// `use_surrogate = measured.value ≥ threshold`.
pub fn gate(
    measured: CorrelationEstimate,
    threshold: f64,
    kind: CorrelationKind,
) -> Result<GateDecision> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(invalid("threshold must lie in [-1, 1]"));
    }
    Ok(GateDecision {
        use_surrogate: measured.value >= threshold,
        measured,
        threshold,
        kind,
    })
}

/// Open lower endpoint of the thresholds for which the convex-quadratic
/// descent guarantee holds: `1 - M_w²/(9 L_u²)` for Kendall,
/// `1 - M_w²/(36 U_u)` for Pearson.
pub fn admissible_threshold(scheme: &WeightScheme, kind: CorrelationKind) -> Result<f64> {
    scheme.require_monotone()?;
    let k = SchemeConstants::of(scheme);
    Ok(match kind {
        CorrelationKind::Kendall => 1.0 - k.m_w * k.m_w / (9.0 * k.l_u * k.l_u),
        CorrelationKind::Pearson => 1.0 - k.m_w * k.m_w / (36.0 * k.u_u),
    })
}

/// The sample statistic a gate compares: τ̂ on raw values for Kendall, ρ̂ on
/// the utilities for Pearson.
pub fn sample_correlation(
    kind: CorrelationKind,
    f_vals: &[f64],
    g_vals: &[f64],
    scheme: &WeightScheme,
) -> Result<f64> {
    match kind {
        CorrelationKind::Kendall => kendall_tau_b(f_vals, g_vals),
        CorrelationKind::Pearson => {
            pearson_weights(&utilities(f_vals, scheme)?, &utilities(g_vals, scheme)?)
        }
    }
}

/// Where the gate's correlation measurement comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateSource {
    /// The sample statistic on the population about to be used for the step.
    Sample,
    /// Exponential moving average of the sample statistic.
    Ema { decay: f64 },
    /// A Monte-Carlo population estimate at the current `θ`. `n_pairs` is the
    /// pair count for Kendall and the sample count for Pearson;
    /// `reference_size` only affects Pearson.
    Population {
        n_pairs: usize,
        reference_size: usize,
    },
}

/// Gate settings: statistic, threshold and measurement source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateConfig {
    pub kind: CorrelationKind,
    pub threshold: f64,
    pub source: GateSource,
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(invalid("threshold must lie in [-1, 1]"));
        }
        match self.source {
            GateSource::Sample => Ok(()),
            GateSource::Ema { decay } => EmaTracker::new(decay).map(|_| ()),
            GateSource::Population {
                n_pairs,
                reference_size,
            } => {
                if n_pairs < crate::correlation::MIN_MC_SAMPLES {
                    return Err(invalid("population gate needs at least 1000 pairs"));
                }
                if self.kind == CorrelationKind::Pearson
                    && reference_size < crate::correlation::MIN_REFERENCE_SIZE
                {
                    return Err(invalid(
                        "population gate needs a reference size of at least 10000",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Exponential moving average `v ← decay·v + (1 - decay)·x`, seeded by the
/// first observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmaTracker {
    decay: f64,
    value: Option<f64>,
}

impl EmaTracker {
    pub const DEFAULT_DECAY: f64 = 0.5;

    pub fn new(decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(invalid("EMA decay must lie in [0, 1)"));
        }
        Ok(Self { decay, value: None })
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            Some(v) => self.decay * v + (1.0 - self.decay) * x,
            None => x,
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}
