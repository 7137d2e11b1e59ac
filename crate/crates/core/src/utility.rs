//! The utility polynomial
//!
//! ```text
//! u(p) = λ Σ_i w_i C(λ-1, i-1) p^(i-1) (1-p)^(λ-i)
//! ```
//!
//! which is λ times the expected utility of a point whose objective value sits
//! at quantile `p` of the sampling distribution. It is a Bernstein polynomial
//! of degree λ-1 with coefficients `λ w_i`, so it is evaluated by de
//! Casteljau's algorithm, and its derivative is the degree λ-2 Bernstein
//! polynomial with coefficients `λ(λ-1)(w_{k+1} - w_k)`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::{self, CompensatedSum};
use crate::ranking::WeightScheme;

const GRID_POINTS: usize = 10_001;
const GOLDEN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct UtilityPolynomial {
    scheme: WeightScheme,
    coeffs: Vec<f64>,
    deriv_coeffs: Vec<f64>,
}

impl UtilityPolynomial {
    pub fn new(scheme: &WeightScheme) -> Self {
        let lambda = scheme.lambda() as f64;
        let w = scheme.weights();
        let coeffs = w.iter().map(|&wi| lambda * wi).collect();
        let deriv_coeffs = w
            .windows(2)
            .map(|p| lambda * (lambda - 1.0) * (p[1] - p[0]))
            .collect();
        Self {
            scheme: scheme.clone(),
            coeffs,
            deriv_coeffs,
        }
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    /// Degree of `u`, λ - 1.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `u(p)` for `p ∈ [0, 1]`.
    pub fn eval(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(de_casteljau(&self.coeffs, p))
    }

    /// `du/dp` for `p ∈ [0, 1]`; identically zero when λ = 1.
    pub fn derivative(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(de_casteljau(&self.deriv_coeffs, p))
    }

    /// The Lipschitz constant `max_{p∈[0,1]} |u'(p)|`.
    ///
    /// Scans `|u'|` on a uniform grid of 10 001 points, then refines the
    /// bracket around the best grid point by golden-section search.
    pub fn lipschitz(&self) -> f64 {
        if self.deriv_coeffs.is_empty() {
            return 0.0;
        }
        let slope = |p: f64| math::abs(de_casteljau(&self.deriv_coeffs, p));
        let step = 1.0 / (GRID_POINTS - 1) as f64;
        let (mut best_i, mut best) = (0, slope(0.0));
        for i in 1..GRID_POINTS {
            let v = slope(i as f64 * step);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let lo = best_i.saturating_sub(1) as f64 * step;
        let hi = ((best_i + 1).min(GRID_POINTS - 1) as f64 * step).min(1.0);
        golden_max(slope, lo, hi).max(best)
    }

    /// Trivial upper bound `λ(λ-1) max_k |w_{k+1} - w_k|` on the Lipschitz
    /// constant.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.deriv_coeffs
            .iter()
            .map(|&c| math::abs(c))
            .fold(0.0, f64::max)
    }
}

fn check_unit(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid("p must lie in [0, 1]"))
    }
}

/// Bernstein polynomial with the given coefficients at `t`. An empty
/// coefficient list is the zero polynomial.
pub(crate) fn de_casteljau(coeffs: &[f64], t: f64) -> f64 {
    match coeffs.len() {
        0 => 0.0,
        1 => coeffs[0],
        n => {
            let mut b: Vec<f64> = coeffs.to_vec();
            let s = 1.0 - t;
            for level in 1..n {
                for i in 0..n - level {
                    b[i] = s * b[i] + t * b[i + 1];
                }
            }
            b[0]
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).max(fc).max(fd)
}

/// `u(p)` for the given scheme.
pub fn u_eval(poly: &UtilityPolynomial, p: f64) -> Result<f64> {
    poly.eval(p)
}

/// `du/dp` for the given scheme.
pub fn u_derivative(poly: &UtilityPolynomial, p: f64) -> Result<f64> {
    poly.derivative(p)
}

/// Lipschitz constant `L_u` of `u` on `[0, 1]`.
pub fn lipschitz_l_u(poly: &UtilityPolynomial) -> f64 {
    poly.lipschitz()
}

/// Selection gap `M_w = Σ_k w_k (1 - 2k/(λ+1))`.
pub fn selection_gap_m_w(scheme: &WeightScheme) -> f64 {
    let denom = scheme.lambda() as f64 + 1.0;
    let mut s = CompensatedSum::default();
    for (k, &w) in scheme.weights().iter().enumerate() {
        s.add(w * (1.0 - 2.0 * (k + 1) as f64 / denom));
    }
    s.total()
}

/// Exact binomials fit in `u64` (and convert exactly to `f64`) up to here.
const EXACT_LAMBDA: usize = 20;

/// `U_u = ∫u² - (∫u)²`, the variance of `u(P)` for `P` uniform on `[0, 1]`:
///
/// ```text
/// U_u = Σ_i Σ_j w_i w_j ( λ²/(2λ-1) · C(λ-1,i-1) C(λ-1,j-1) / C(2λ-2,i+j-2) - 1 )
/// ```
///
/// Up to λ = 20 the ratio of binomials is formed from exact integers with a
/// single rounding; beyond that it is computed from log-factorials.
pub fn weight_variance_u_u(scheme: &WeightScheme) -> f64 {
    let lambda = scheme.lambda();
    let w = scheme.weights();
    let ratio = BinomialRatio::new(lambda);
    let mut s = CompensatedSum::default();
    for i in 0..lambda {
        if w[i] == 0.0 {
            continue;
        }
        for j in 0..lambda {
            if w[j] == 0.0 {
                continue;
            }
            s.add(w[i] * w[j] * (ratio.get(i, j) - 1.0));
        }
    }
    s.total()
}

/// `λ²/(2λ-1) · C(λ-1,i) C(λ-1,j) / C(2λ-2,i+j)` for zero-based `i, j`.
struct BinomialRatio {
    lambda: usize,
    exact: Option<Vec<Vec<u64>>>,
    ln_fact: Vec<f64>,
}

impl BinomialRatio {
    fn new(lambda: usize) -> Self {
        if lambda <= EXACT_LAMBDA {
            let n = 2 * lambda;
            let mut pascal = alloc::vec![alloc::vec![0u64; n + 1]; n + 1];
            for r in 0..=n {
                pascal[r][0] = 1;
                for c in 1..=r {
                    pascal[r][c] = pascal[r - 1][c - 1] + if c < r { pascal[r - 1][c] } else { 0 };
                }
            }
            Self {
                lambda,
                exact: Some(pascal),
                ln_fact: Vec::new(),
            }
        } else {
            let mut ln_fact = Vec::with_capacity(2 * lambda);
            let mut acc = CompensatedSum::default();
            ln_fact.push(0.0);
            for k in 1..2 * lambda {
                acc.add(math::ln(k as f64));
                ln_fact.push(acc.total());
            }
            Self {
                lambda,
                exact: None,
                ln_fact,
            }
        }
    }

    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let l = self.lambda;
        match &self.exact {
            Some(c) => {
                let num = (l * l) as u64 * c[l - 1][i] * c[l - 1][j];
                let den = (2 * l - 1) as u64 * c[2 * l - 2][i + j];
                num as f64 / den as f64
            }
            None => {
                let lf = l as f64;
                math::exp(
                    2.0 * math::ln(lf) - math::ln(2.0 * lf - 1.0)
                        + self.ln_choose(l - 1, i)
                        + self.ln_choose(l - 1, j)
                        - self.ln_choose(2 * l - 2, i + j),
                )
            }
        }
    }
}

/// Closed forms `(∫₀¹ u, ∫₀¹ u²) = (Σ w_i, U_u + (Σ w_i)²)`.
pub fn integral_checks(scheme: &WeightScheme) -> (f64, f64) {
    let s = scheme.sum();
    (s, weight_variance_u_u(scheme) + s * s)
}

/// Scheme-derived constants, computed once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConstants {
    pub lambda: usize,
    /// `Σ w_i = ∫₀¹ u`.
    pub sum_w: f64,
    /// `λ² max w_k²`.
    pub n_w: f64,
    pub m_w: f64,
    pub l_u: f64,
    pub u_u: f64,
}

impl SchemeConstants {
    pub fn of(scheme: &WeightScheme) -> Self {
        Self {
            lambda: scheme.lambda(),
            sum_w: scheme.sum(),
            n_w: crate::ranking::n_w_constant(scheme),
            m_w: selection_gap_m_w(scheme),
            l_u: UtilityPolynomial::new(scheme).lipschitz(),
            u_u: weight_variance_u_u(scheme),
        }
    }
}
