//! Gaussian IGO: parameters `θ = (m, C)`, natural gradients of the
//! log-likelihood, update assembly, and closed forms on convex quadratics.
//!
//! The Fisher matrix is never formed. On a quadratic `f(x) = ½(x-x*)ᵀA(x-x*)`
//! everything the descent analysis needs reduces to `J(θ)`, its gradient,
//! `M_f = ∇Jᵀ F⁻¹ ∇J` and `Tr(F⁻¹H) = Tr(CA)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::correlation::CorrelationKind;
use crate::error::{check_finite, invalid, Error, Result};
use crate::math;
use crate::objective::Evaluate;
use crate::ranking::WeightScheme;
use crate::surrogate::admissible_threshold;
use crate::utility::SchemeConstants;

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}

fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn check_matrix(m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(invalid("matrix must be square"));
    }
    if m.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.nrows(),
        });
    }
    check_finite(m.as_slice())
}

/// Distribution parameter `θ = (m, C)` with `C` symmetric positive definite.
///
/// The covariance is stored exactly symmetric and its lower Cholesky factor is
/// cached for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("dimension must be at least 1"));
        }
        check_finite(mean.as_slice())?;
        check_matrix(&cov, mean.len())?;
        let cov = symmetrized(&cov);
        let chol = cholesky_lower(&cov).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { mean, cov, chol })
    }

    /// `N(mean, scale · I)`.
    pub fn isotropic(mean: DVector<f64>, scale: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * scale)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L Lᵀ = C`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Mean and covariance blocks of a natural-gradient direction.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalGradientStep {
    pub d_mean: DVector<f64>,
    pub d_cov: DMatrix<f64>,
}

impl NaturalGradientStep {
    pub fn zeros(d: usize) -> Self {
        Self {
            d_mean: DVector::zeros(d),
            d_cov: DMatrix::zeros(d, d),
        }
    }
}

/// Natural gradient of `ln p(x; θ)`: `(x - m, (x - m)(x - m)ᵀ - C)`.
pub fn natural_grad_loglik(theta: &GaussianParams, x: &[f64]) -> Result<NaturalGradientStep> {
    theta.check_point(x)?;
    let mut step = NaturalGradientStep::zeros(theta.dim());
    accumulate(&mut step, theta, x, 1.0);
    Ok(step)
}

fn accumulate(step: &mut NaturalGradientStep, theta: &GaussianParams, x: &[f64], w: f64) {
    let d = theta.dim();
    let c = &theta.cov;
    let y: Vec<f64> = x
        .iter()
        .zip(theta.mean.iter())
        .map(|(a, b)| a - b)
        .collect();
    for i in 0..d {
        step.d_mean[i] += w * y[i];
        for j in 0..d {
            step.d_cov[(i, j)] += w * (y[i] * y[j] - c[(i, j)]);
        }
    }
}

/// `Δ = Σ_i W_i · ∇̃ ln p(x_i; θ)`, blockwise. With `W` from the objective's
/// ranking this is `Δ_f`; from a surrogate's ranking, `Δ_g`.
pub fn assemble_delta(
    theta: &GaussianParams,
    xs: &[DVector<f64>],
    utilities: &[f64],
) -> Result<NaturalGradientStep> {
    if xs.len() != utilities.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: utilities.len(),
        });
    }
    check_finite(utilities)?;
    let mut step = NaturalGradientStep::zeros(theta.dim());
    for (x, &w) in xs.iter().zip(utilities) {
        theta.check_point(x.as_slice())?;
        if w != 0.0 {
            accumulate(&mut step, theta, x.as_slice(), w);
        }
    }
    Ok(step)
}

/// `θ + α Δ`. A covariance that is no longer positive definite is reported,
/// never repaired.
pub fn apply_step(
    theta: &GaussianParams,
    delta: &NaturalGradientStep,
    alpha: f64,
) -> Result<GaussianParams> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("learning rate must be positive and finite"));
    }
    let d = theta.dim();
    if delta.d_mean.len() != d || delta.d_cov.nrows() != d || delta.d_cov.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: delta.d_mean.len(),
        });
    }
    let mean = &theta.mean + &delta.d_mean * alpha;
    let cov = symmetrized(&(&theta.cov + &delta.d_cov * alpha));
    check_finite(mean.as_slice())?;
    check_finite(cov.as_slice())?;
    match cholesky_lower(&cov) {
        Some(chol) => Ok(GaussianParams { mean, cov, chol }),
        None => Err(Error::StepRejected {
            min_eigenvalue: smallest_eigenvalue(&cov),
        }),
    }
}

/// λ independent draws from `N(m, C)`, `x = m + L z`.
pub fn sample_population<R: Rng + ?Sized>(
    theta: &GaussianParams,
    lambda: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    (0..lambda).map(|_| sample_one(theta, rng)).collect()
}

pub(crate) fn sample_one<R: Rng + ?Sized>(theta: &GaussianParams, rng: &mut R) -> DVector<f64> {
    let d = theta.dim();
    let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    &theta.mean + &theta.chol * z
}

/// Convex quadratic `f(x) = ½ (x - x*)ᵀ A (x - x*)` with `A` symmetric
/// positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    hessian: DMatrix<f64>,
    optimum: DVector<f64>,
}

impl QuadraticObjective {
    pub fn new(hessian: DMatrix<f64>, optimum: DVector<f64>) -> Result<Self> {
        if optimum.is_empty() {
            return Err(invalid("dimension must be at least 1"));
        }
        check_finite(optimum.as_slice())?;
        check_matrix(&hessian, optimum.len())?;
        let hessian = symmetrized(&hessian);
        cholesky_lower(&hessian).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { hessian, optimum })
    }

    /// `A = Q diag(eigenvalues) Qᵀ`; `rotation = None` means `Q = I`.
    pub fn from_spectrum(
        eigenvalues: &[f64],
        rotation: Option<&DMatrix<f64>>,
        optimum: DVector<f64>,
    ) -> Result<Self> {
        let d = eigenvalues.len();
        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let a = match rotation {
            Some(q) => {
                check_matrix(q, d)?;
                q * diag * q.transpose()
            }
            None => diag,
        };
        Self::new(a, optimum)
    }

    /// `½ |x|²` shifted to `optimum`.
    pub fn sphere(optimum: DVector<f64>) -> Result<Self> {
        let d = optimum.len();
        Self::new(DMatrix::identity(d, d), optimum)
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x
            .iter()
            .zip(self.optimum.iter())
            .map(|(a, b)| a - b)
            .collect();
        let total: f64 = y
            .iter()
            .enumerate()
            .map(|(i, yi)| {
                let row: f64 = y
                    .iter()
                    .enumerate()
                    .map(|(j, yj)| self.hessian[(i, j)] * yj)
                    .sum();
                yi * row
            })
            .sum();
        0.5 * total
    }

    fn check_theta(&self, theta: &GaussianParams) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.dim(),
            });
        }
        Ok(())
    }
}

impl Evaluate for QuadraticObjective {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.value(x))
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Qᵀ D Q` with `Q` random orthogonal and eigenvalues log-uniform on
/// `[10^lo, 10^hi]`.
pub fn random_spd<R: Rng + ?Sized>(
    d: usize,
    log10_lo: f64,
    log10_hi: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let q = random_orthogonal(d, rng);
    let eig = DVector::from_iterator(
        d,
        (0..d).map(|_| math::powf(10.0, rng.random_range(log10_lo..=log10_hi))),
    );
    symmetrized(&(q.transpose() * DMatrix::from_diagonal(&eig) * q))
}

fn j_raw(mean: &DVector<f64>, cov: &DMatrix<f64>, obj: &QuadraticObjective) -> f64 {
    let y = mean - &obj.optimum;
    let a = &obj.hessian;
    0.5 * (y.dot(&(a * &y))) + 0.5 * (a * cov).trace()
}

/// `J(θ) = ½ (m - x*)ᵀ A (m - x*) + ½ Tr(AC)`.
pub fn expected_objective_j(theta: &GaussianParams, obj: &QuadraticObjective) -> Result<f64> {
    obj.check_theta(theta)?;
    Ok(j_raw(&theta.mean, &theta.cov, obj))
}

/// `J(θ + αΔ)` by the same closed form, without requiring `C + αΔ_C` to stay
/// positive definite. Used for one-step drift estimates.
pub fn expected_objective_after(
    theta: &GaussianParams,
    delta: &NaturalGradientStep,
    alpha: f64,
    obj: &QuadraticObjective,
) -> Result<f64> {
    obj.check_theta(theta)?;
    let mean = &theta.mean + &delta.d_mean * alpha;
    let cov = &theta.cov + &delta.d_cov * alpha;
    Ok(j_raw(&mean, &cov, obj))
}

/// `J(θ + αΔ) - J(θ) = α (A(m - x*))ᵀ Δ_m + ½ α² Δ_mᵀ A Δ_m + ½ α Tr(A Δ_C)`,
/// exact for quadratics and free of cancellation in `J`. Zero when `α = 0`.
pub fn objective_change(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
    delta: &NaturalGradientStep,
    alpha: f64,
) -> Result<f64> {
    obj.check_theta(theta)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let a = &obj.hessian;
    let gm = a * (&theta.mean - &obj.optimum);
    let ad = a * &delta.d_mean;
    let tr = (a * &delta.d_cov).trace();
    Ok(alpha * gm.dot(&delta.d_mean)
        + 0.5 * alpha * alpha * delta.d_mean.dot(&ad)
        + 0.5 * alpha * tr)
}

/// `(∇_m J, ∇_C J) = (A (m - x*), ½ A)`.
pub fn grad_j(
    theta: &GaussianParams,
    obj: &QuadraticObjective,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    obj.check_theta(theta)?;
    let gm = &obj.hessian * (&theta.mean - &obj.optimum);
    Ok((gm, &obj.hessian * 0.5))
}

/// `M_f = (m - x*)ᵀ A C A (m - x*) + ½ Tr((AC)²)`, the squared Fisher norm of
/// `∇J`. It also equals `Var[f(X)]` for `X ~ N(m, C)`.
pub fn metric_norm_m_f(theta: &GaussianParams, obj: &QuadraticObjective) -> Result<f64> {
    obj.check_theta(theta)?;
    let a = &obj.hessian;
    let g = a * (&theta.mean - &obj.optimum);
    let ac = a * &theta.cov;
    Ok(g.dot(&(&theta.cov * &g)) + 0.5 * (&ac * &ac).trace())
}

/// `Tr(F⁻¹ H) = Tr(CA)` for `H = diag(A, 0)`.
pub fn trace_finv_h(theta: &GaussianParams, obj: &QuadraticObjective) -> Result<f64> {
    obj.check_theta(theta)?;
    Ok((&theta.cov * &obj.hessian).trace())
}

/// Learning-rate constants of the convex-quadratic descent guarantee.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryRates {
    /// `M_w / (6 √d N_w)`.
    pub beta: f64,
    /// Kendall: `3 L_u √(1-τ̄) / M_w`; Pearson: `6 √U_u √(1-ρ̄) / M_w`.
    pub gamma: f64,
    /// `2β(1-γ)`: the expected-objective bound is negative for `α` below this.
    pub alpha_max: f64,
    /// `β(1-γ)`: minimizes the bound.
    pub alpha_opt: f64,
    /// Open lower endpoint of the admissible threshold interval.
    pub admissible: f64,
}

/// Rates for a gate at `threshold`; the threshold must lie in the admissible
/// interval `(admissible, 1]`, which guarantees `γ < 1`.
pub fn theory_rates(
    scheme: &WeightScheme,
    d: usize,
    threshold: f64,
    kind: CorrelationKind,
) -> Result<TheoryRates> {
    let rates = theory_rates_unchecked(scheme, d, threshold, kind)?;
    if threshold <= rates.admissible {
        return Err(Error::ThresholdBelowAdmissible {
            threshold,
            bound: rates.admissible,
        });
    }
    Ok(rates)
}

/// Same formulas without the admissibility requirement; `γ` may exceed one.
/// The scheme must still be monotone.
pub fn theory_rates_unchecked(
    scheme: &WeightScheme,
    d: usize,
    threshold: f64,
    kind: CorrelationKind,
) -> Result<TheoryRates> {
    scheme.require_monotone()?;
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(invalid("threshold must lie in [-1, 1]"));
    }
    let k = SchemeConstants::of(scheme);
    let beta = k.m_w / (6.0 * math::sqrt(d as f64) * k.n_w);
    let slack = math::sqrt(1.0 - threshold);
    let gamma = match kind {
        CorrelationKind::Kendall => 3.0 * k.l_u * slack / k.m_w,
        CorrelationKind::Pearson => 6.0 * math::sqrt(k.u_u) * slack / k.m_w,
    };
    Ok(TheoryRates {
        beta,
        gamma,
        alpha_max: 2.0 * beta * (1.0 - gamma),
        alpha_opt: beta * (1.0 - gamma),
        admissible: admissible_threshold(scheme, kind)?,
    })
}
