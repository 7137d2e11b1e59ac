//! Sample and population correlation between an objective and a surrogate.
//!
//! Sample statistics are exact functions of their inputs (`std_error = 0`).
//! Population statistics are Monte-Carlo estimates under `X ~ N(m, C)`, with
//! the unknown quantile functions `P_f`, `P_g` replaced by right-continuous
//! empirical CDFs over one shared reference sample.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::Rng;

use crate::error::{check_finite, invalid, Error, Result};
use crate::gaussian::{sample_one, GaussianParams};
use crate::math;
use crate::objective::Evaluate;
use crate::ranking::WeightScheme;
use crate::utility::{weight_variance_u_u, UtilityPolynomial};

/// Smallest Monte-Carlo sample accepted by the population estimators.
pub const MIN_MC_SAMPLES: usize = 1_000;
/// Smallest reference sample accepted for empirical quantiles.
pub const MIN_REFERENCE_SIZE: usize = 10_000;

/// Which correlation a gate measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorrelationKind {
    /// Kendall's τ between `f` and `g` values.
    Kendall,
    /// Pearson's ρ between `f`-based and `g`-based utilities.
    Pearson,
}

impl CorrelationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kendall => "kendall",
            Self::Pearson => "pearson",
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for CorrelationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kendall" => Ok(Self::Kendall),
            "pearson" => Ok(Self::Pearson),
            _ => Err(invalid("correlation kind must be `kendall` or `pearson`")),
        }
    }
}

/// A correlation value with its Monte-Carlo standard error.
///
/// Exact sample statistics have `std_error = 0` and `|value| ≤ 1`; estimates
/// may leave `[-1, 1]` by at most a few standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl CorrelationEstimate {
    pub fn exact(value: f64, n_samples: usize) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples,
        }
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Pair counts over the `C(n, 2)` index pairs.
///
/// `tied_f` and `tied_g` include pairs tied in both; `concordant` and
/// `discordant` exclude every pair tied in either sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KendallCounts {
    pub n: usize,
    pub tied_f: u64,
    pub tied_g: u64,
    pub concordant: u64,
    pub discordant: u64,
}

impl KendallCounts {
    pub fn pairs(&self) -> u64 {
        let n = self.n as u64;
        n * n.saturating_sub(1) / 2
    }

    /// `(n_c - n_d) / (√(C(n,2) - n_a) √(C(n,2) - n_b))`.
    pub fn tau_b(&self) -> Result<f64> {
        let total = self.pairs();
        let (da, db) = (total - self.tied_f, total - self.tied_g);
        if da == 0 {
            return Err(Error::UndefinedCorrelation("every f value is tied"));
        }
        if db == 0 {
            return Err(Error::UndefinedCorrelation("every g value is tied"));
        }
        let num = self.concordant as f64 - self.discordant as f64;
        let tau = num / math::sqrt(da as f64 * db as f64);
        Ok(tau.clamp(-1.0, 1.0))
    }
}

fn tie_pairs<T: Copy, E: Fn(T, T) -> bool>(sorted: &[T], eq: E) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(w[0], w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

// Stable merge sort of `idx` by `key`, returning the number of strict
// inversions (pairs i < j with key[i] > key[j]).
fn sort_count_inversions(idx: &mut [usize], buf: &mut [usize], key: &[f64]) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left_buf, right_buf) = buf.split_at_mut(mid);
    let mut swaps = sort_count_inversions(&mut idx[..mid], left_buf, key)
        + sort_count_inversions(&mut idx[mid..], right_buf, key);
    buf[..n].copy_from_slice(idx);
    let (left, right) = buf[..n].split_at(mid);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if key[right[j]] < key[left[i]] {
            idx[k] = right[j];
            swaps += (left.len() - i) as u64;
            j += 1;
        } else {
            idx[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    idx[k..k + left.len() - i].copy_from_slice(&left[i..]);
    k += left.len() - i;
    idx[k..].copy_from_slice(&right[j..]);
    swaps
}

/// Pair counts in `O(n log n)`: sort by `(f, g)`, count discordances as the
/// strict inversions of a merge sort by `g`, recover `n_c` by inclusion and
/// exclusion over the tie classes.
pub fn kendall_counts(f_vals: &[f64], g_vals: &[f64]) -> Result<KendallCounts> {
    let n = f_vals.len();
    if g_vals.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: g_vals.len(),
        });
    }
    if n < 2 {
        return Err(invalid("Kendall's tau needs at least two pairs of values"));
    }
    check_finite(f_vals)?;
    check_finite(g_vals)?;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cmp_f64(f_vals[a], f_vals[b]).then(cmp_f64(g_vals[a], g_vals[b])));
    let tied_f = tie_pairs(&idx, |a, b| f_vals[a] == f_vals[b]);
    let tied_both = tie_pairs(&idx, |a, b| {
        f_vals[a] == f_vals[b] && g_vals[a] == g_vals[b]
    });

    let mut buf = alloc::vec![0usize; n];
    let discordant = sort_count_inversions(&mut idx, &mut buf, g_vals);
    let tied_g = tie_pairs(&idx, |a, b| g_vals[a] == g_vals[b]);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let concordant = total - tied_f - tied_g + tied_both - discordant;
    Ok(KendallCounts {
        n,
        tied_f,
        tied_g,
        concordant,
        discordant,
    })
}

/// Sample Kendall τ-b of two equally long sequences.
pub fn kendall_tau_b(f_vals: &[f64], g_vals: &[f64]) -> Result<f64> {
    kendall_counts(f_vals, g_vals)?.tau_b()
}

/// Sample Pearson correlation of two utility vectors.
pub fn pearson_weights(w: &[f64], w_tilde: &[f64]) -> Result<f64> {
    let n = w.len();
    if w_tilde.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: w_tilde.len(),
        });
    }
    if n < 2 {
        return Err(invalid(
            "Pearson correlation needs at least two pairs of values",
        ));
    }
    check_finite(w)?;
    check_finite(w_tilde)?;
    let mx = w.iter().sum::<f64>() / n as f64;
    let my = w_tilde.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in w.iter().zip(w_tilde) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "first sequence has zero variance",
        ));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "second sequence has zero variance",
        ));
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Fraction of `sorted_reference` that is `≤ s`.
pub fn empirical_quantile(sorted_reference: &[f64], s: f64) -> f64 {
    if sorted_reference.is_empty() {
        return 0.0;
    }
    sorted_reference.partition_point(|&v| v <= s) as f64 / sorted_reference.len() as f64
}

/// Right-continuous empirical CDF over a sorted reference sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceCdf {
    sorted: Vec<f64>,
}

impl ReferenceCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("reference sample is empty"));
        }
        check_finite(&values)?;
        values.sort_by(|a, b| cmp_f64(*a, *b));
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn quantile(&self, s: f64) -> f64 {
        empirical_quantile(&self.sorted, s)
    }
}

fn require_at_least(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(invalid(alloc::format!(
            "{what} must be at least {min}, got {n}"
        )));
    }
    Ok(())
}

/// Monte-Carlo `Pr[concordant] - Pr[discordant]` over i.i.d. pairs
/// `X, X̃ ~ N(m, C)`. Tied pairs count as neither.
pub fn population_tau<F, G, R>(
    f: &F,
    g: &G,
    theta: &GaussianParams,
    n_pairs: usize,
    rng: &mut R,
) -> Result<CorrelationEstimate>
where
    F: Evaluate + ?Sized,
    G: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    require_at_least(n_pairs, MIN_MC_SAMPLES, "n_pairs")?;
    let (mut conc, mut disc) = (0u64, 0u64);
    for _ in 0..n_pairs {
        let x = sample_one(theta, rng);
        let y = sample_one(theta, rng);
        let df = f.evaluate(x.as_slice())? - f.evaluate(y.as_slice())?;
        let dg = g.evaluate(x.as_slice())? - g.evaluate(y.as_slice())?;
        let prod = df * dg;
        if prod > 0.0 {
            conc += 1;
        } else if prod < 0.0 {
            disc += 1;
        }
    }
    let n = n_pairs as f64;
    let (pc, pd) = (conc as f64 / n, disc as f64 / n);
    let value = pc - pd;
    let var = (pc + pd - value * value).max(0.0);
    Ok(CorrelationEstimate {
        value,
        std_error: math::sqrt(var / n),
        n_samples: n_pairs,
    })
}

/// Paired utilities `A_k = u(P̂_f(f(X_k)))`, `B_k = u(P̂_g(g(X_k)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityPairs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Points behind each empirical CDF.
    pub reference_size: usize,
}

/// Draw a reference sample of `reference_size` points to build `P̂_f` and
/// `P̂_g`, then `n` fresh points to evaluate the utilities on.
#[allow(clippy::too_many_arguments)]
pub fn utility_pairs<F, G, R>(
    f: &F,
    g: &G,
    theta: &GaussianParams,
    scheme: &WeightScheme,
    n: usize,
    reference_size: usize,
    rng: &mut R,
) -> Result<UtilityPairs>
where
    F: Evaluate + ?Sized,
    G: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    require_at_least(n, MIN_MC_SAMPLES, "sample size")?;
    require_at_least(reference_size, MIN_REFERENCE_SIZE, "reference size")?;
    let mut rf = Vec::with_capacity(reference_size);
    let mut rg = Vec::with_capacity(reference_size);
    for _ in 0..reference_size {
        let x = sample_one(theta, rng);
        rf.push(f.evaluate(x.as_slice())?);
        rg.push(g.evaluate(x.as_slice())?);
    }
    let (pf, pg) = (ReferenceCdf::new(rf)?, ReferenceCdf::new(rg)?);
    let poly = UtilityPolynomial::new(scheme);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sample_one(theta, rng);
        a.push(poly.eval(pf.quantile(f.evaluate(x.as_slice())?))?);
        b.push(poly.eval(pg.quantile(g.evaluate(x.as_slice())?))?);
    }
    Ok(UtilityPairs {
        a,
        b,
        reference_size,
    })
}

/// `K_w`, `ρ` and the identity residual, all from one set of utility pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStatistics {
    /// Mean of `(A - B)²`.
    pub kw: f64,
    pub kw_se: f64,
    /// Plain sample Pearson correlation of the pairs; uses no known moments.
    pub rho_sample: f64,
    /// `ρ` from the known moments `E[A] = E[B] = Σw`, `Var A = Var B = U_u`,
    /// with the second moments as control variates: `1 - K̂_w / (2 U_u)`.
    pub rho_moment: CorrelationEstimate,
    /// `K̂_w - 2 U_u (1 - ρ̂_sample)`.
    pub residual: f64,
    /// Delta-method standard error of `residual`; both terms share samples.
    pub residual_se: f64,
    /// Order of the bias in `kw` from replacing `P_f`, `P_g` by empirical
    /// CDFs: `L_u² / R` for `R` reference points. Not part of any standard
    /// error.
    pub quantile_bias: f64,
}

impl UtilityPairs {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn statistics(&self, scheme: &WeightScheme) -> Result<PairStatistics> {
        let u_u = weight_variance_u_u(scheme);
        if scheme.is_constant() || u_u <= 0.0 {
            return Err(Error::UndefinedCorrelation(
                "utilities have zero variance (U_u = 0)",
            ));
        }
        let n = self.a.len();
        let sq: Vec<f64> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let (kw, kw_se) = math::mean_and_se(&sq);
        let rho_sample = pearson_weights(&self.a, &self.b)?;

        let nf = n as f64;
        let ma = self.a.iter().sum::<f64>() / nf;
        let mb = self.b.iter().sum::<f64>() / nf;
        let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
        for (&a, &b) in self.a.iter().zip(&self.b) {
            vaa += (a - ma) * (a - ma);
            vbb += (b - mb) * (b - mb);
            vab += (a - ma) * (b - mb);
        }
        let (vaa, vbb, vab) = (vaa / nf, vbb / nf, vab / nf);
        let sab = math::sqrt(vaa * vbb);
        let influence: Vec<f64> = self
            .a
            .iter()
            .zip(&self.b)
            .zip(&sq)
            .map(|((&a, &b), &s)| {
                let (da, db) = (a - ma, b - mb);
                let if_rho = (da * db - vab) / sab
                    - 0.5 * rho_sample * ((da * da - vaa) / vaa + (db * db - vbb) / vbb);
                (s - kw) + 2.0 * u_u * if_rho
            })
            .collect();
        let (_, residual_se) = math::mean_and_se(&influence);

        Ok(PairStatistics {
            kw,
            kw_se,
            rho_sample,
            rho_moment: CorrelationEstimate {
                value: 1.0 - kw / (2.0 * u_u),
                std_error: kw_se / (2.0 * u_u),
                n_samples: n,
            },
            residual: kw - 2.0 * u_u * (1.0 - rho_sample),
            residual_se,
            quantile_bias: {
                let l_u = UtilityPolynomial::new(scheme).lipschitz();
                l_u * l_u / self.reference_size.max(1) as f64
            },
        })
    }
}

/// Monte-Carlo Pearson correlation between `u(P_f(f(X)))` and `u(P_g(g(X)))`,
/// in the moment form of [`PairStatistics::rho_moment`]. Exactly 1 when `g`
/// is `f` or a strictly increasing transform of it.
#[allow(clippy::too_many_arguments)]
pub fn population_rho<F, G, R>(
    f: &F,
    g: &G,
    theta: &GaussianParams,
    scheme: &WeightScheme,
    n: usize,
    reference_size: usize,
    rng: &mut R,
) -> Result<CorrelationEstimate>
where
    F: Evaluate + ?Sized,
    G: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    if scheme.is_constant() {
        return Err(Error::UndefinedCorrelation(
            "utilities have zero variance (U_u = 0)",
        ));
    }
    Ok(utility_pairs(f, g, theta, scheme, n, reference_size, rng)?
        .statistics(scheme)?
        .rho_moment)
}

/// Monte-Carlo `K_w = E[(u(P_g(g(X))) - u(P_f(f(X))))²]` and its standard
/// error.
#[allow(clippy::too_many_arguments)]
pub fn estimate_kw<F, G, R>(
    f: &F,
    g: &G,
    theta: &GaussianParams,
    scheme: &WeightScheme,
    n: usize,
    reference_size: usize,
    rng: &mut R,
) -> Result<(f64, f64)>
where
    F: Evaluate + ?Sized,
    G: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    let pairs = utility_pairs(f, g, theta, scheme, n, reference_size, rng)?;
    let sq: Vec<f64> = pairs
        .a
        .iter()
        .zip(&pairs.b)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(math::mean_and_se(&sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau_b(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        let c = kendall_counts(&[1., 1., 2.], &[1., 2., 2.]).unwrap();
        assert_eq!(
            c,
            KendallCounts {
                n: 3,
                tied_f: 1,
                tied_g: 1,
                concordant: 1,
                discordant: 0
            }
        );
        assert_eq!(c.tau_b().unwrap(), 0.5);
        assert!(matches!(
            kendall_tau_b(&[1., 1.], &[1., 2.]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(kendall_tau_b(&[1.], &[1.]).is_err());
        assert!(kendall_tau_b(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let w = [0.5, 0.5, 0.0, 0.0];
        assert_eq!(pearson_weights(&w, &w).unwrap(), 1.0);
        let neg: Vec<f64> = w.iter().map(|x| -x).collect();
        assert_eq!(pearson_weights(&w, &neg).unwrap(), -1.0);
        assert!(matches!(
            pearson_weights(&[0.25; 4], &w),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn quantile_examples() {
        let r = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&r, 0.0), 0.0);
        assert_eq!(empirical_quantile(&r, 9.0), 1.0);
        assert_eq!(empirical_quantile(&r, 2.5), 0.5);
        assert_eq!(empirical_quantile(&r, 2.0), 0.5);
        let cdf = ReferenceCdf::new(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(cdf.sorted(), &r);
    }

    #[test]
    fn kind_round_trip() {
        for k in [CorrelationKind::Kendall, CorrelationKind::Pearson] {
            assert_eq!(k.name().parse::<CorrelationKind>().unwrap(), k);
        }
        assert!("spearman".parse::<CorrelationKind>().is_err());
    }
}
