// Float helpers routed through libm so that results match bit-for-bit between
// `std` and `no_std` builds.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut s = CompensatedSum::default();
    for &x in xs {
        s.add(x);
    }
    let mean = s.total() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut ss = CompensatedSum::default();
    for &x in xs {
        let d = x - mean;
        ss.add(d * d);
    }
    let var = ss.total() / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}
