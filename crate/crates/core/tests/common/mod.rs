#![allow(dead_code)]

use rand::Rng;

/// Gauss–Legendre nodes and weights on `[0, 1]`, exact for polynomials of
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

pub fn integrate(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    gauss_legendre(n).into_iter().map(|(x, w)| w * f(x)).sum()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `λ Σ_i w_i C(λ-1, i-1) p^(i-1) (1-p)^(λ-i)` summed term by term.
pub fn bernstein_direct(w: &[f64], p: f64) -> f64 {
    let lambda = w.len();
    w.iter()
        .enumerate()
        .map(|(i, &wi)| {
            lambda as f64
                * wi
                * binomial(lambda - 1, i)
                * p.powi(i as i32)
                * (1.0 - p).powi((lambda - 1 - i) as i32)
        })
        .sum()
}

/// `(strict, weak)` counts by double loop.
pub fn brute_ranks(v: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let strict = v
        .iter()
        .map(|a| v.iter().filter(|b| *b < a).count())
        .collect();
    let weak = v
        .iter()
        .map(|a| v.iter().filter(|b| *b <= a).count())
        .collect();
    (strict, weak)
}

/// `(tied_f, tied_g, concordant, discordant)` over all index pairs.
pub fn brute_kendall(f: &[f64], g: &[f64]) -> (u64, u64, u64, u64) {
    let (mut tf, mut tg, mut c, mut d) = (0, 0, 0, 0);
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let (df, dg) = (f[i] - f[j], g[i] - g[j]);
            if df == 0.0 {
                tf += 1;
            }
            if dg == 0.0 {
                tg += 1;
            }
            if df * dg > 0.0 {
                c += 1;
            } else if df * dg < 0.0 {
                d += 1;
            }
        }
    }
    (tf, tg, c, d)
}

pub fn brute_tau_b(f: &[f64], g: &[f64]) -> Option<f64> {
    let n = f.len() as u64;
    let total = n * (n - 1) / 2;
    let (tf, tg, c, d) = brute_kendall(f, g);
    let denom = ((total - tf) as f64 * (total - tg) as f64).sqrt();
    (denom > 0.0).then(|| (c as f64 - d as f64) / denom)
}

/// Values drawn from a small pool with probability `tie_rate`, otherwise
/// continuous.
pub fn tied_values<R: Rng>(n: usize, tie_rate: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < tie_rate {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect()
}

/// Random non-increasing weights of length λ, not all equal.
pub fn random_monotone<R: Rng>(lambda: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..lambda).map(|_| rng.random::<f64>()).collect();
        w.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if w[0] > w[lambda - 1] {
            return w;
        }
    }
}
