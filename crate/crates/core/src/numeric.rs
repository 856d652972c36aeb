//! Small numerical helpers shared across the crate.

use statrs::function::erf;
use statrs::function::factorial::ln_factorial;
use statrs::function::beta::ln_beta;
use rand::Rng;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Correctly rounded floating-point summation (Shewchuk's algorithm).
///
/// The result is the exact sum rounded once, so it does not depend on the
/// order in which terms are added.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    non_finite: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        if !x.is_finite() {
            self.non_finite += x;
            return;
        }
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        if self.non_finite != 0.0 || self.non_finite.is_nan() {
            return self.non_finite;
        }
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction across the remaining partials.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

pub fn ln_poisson_pmf(k: u32, rate: f64) -> f64 {
    if rate <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * rate.ln() - rate - ln_factorial(k as u64)
}

/// Poisson probabilities `P(X = j)` for `j = 0..` until the terms past the
/// mode drop below `cutoff`.
pub fn poisson_pmf_vec(rate: f64, cutoff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(16);
    let mut term = (-rate).exp();
    let mut j = 0u32;
    loop {
        out.push(term);
        j += 1;
        term *= rate / j as f64;
        if (j as f64) > rate && term < cutoff {
            break;
        }
        if j > 10_000 {
            break;
        }
    }
    out
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        std_normal_cdf(x).ln()
    } else {
        // Asymptotic expansion of the Mills ratio.
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

pub fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

pub fn ln_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Log density of a Normal(mean, sd²) truncated to `[0, ∞)`.
pub fn ln_trunc_normal_pos_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_normal_pdf(x, mean, sd) - ln_std_normal_cdf(mean / sd)
}

/// Log density of a half-Cauchy with location 0.
pub fn ln_half_cauchy_pdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    (2.0 / (std::f64::consts::PI * scale)).ln() - (1.0 + r * r).ln()
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let ln_norm = -ln_beta(a, b);
    let term = |exp: f64, v: f64| if exp == 0.0 { 0.0 } else { exp * v.ln() };
    ln_norm + term(a - 1.0, x) + term(b - 1.0, 1.0 - x)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard normal draw restricted to `[a, b]`, by inversion.
///
/// Works in whichever tail keeps the CDF values away from 1, so intervals
/// deep in either tail stay accurate.
pub fn sample_std_normal_between<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a > 0.0 {
        return -sample_std_normal_between(rng, -b, -a);
    }
    let lo = std_normal_cdf(a);
    let hi = std_normal_cdf(b);
    if hi <= lo {
        return if b.is_finite() { 0.5 * (a + b) } else { a };
    }
    let u = lo + (hi - lo) * rng.random::<f64>();
    std_normal_quantile(u).clamp(a, b)
}

/// Draw from Normal(mean, sd²) truncated to `[0, ∞)`.
pub fn sample_trunc_normal_pos<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    (mean + sd * sample_std_normal_between(rng, -mean / sd, f64::INFINITY)).max(0.0)
}

/// Linear-interpolation quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
