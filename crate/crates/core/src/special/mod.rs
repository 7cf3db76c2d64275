//! Scalar special functions: integer log-Beta values, the regularized
//! incomplete Beta function, the standard normal CDF and the multivariate
//! normal orthant probability used by the Gaussian approximation.

mod mvn;

use std::sync::{Arc, OnceLock};

use statrs::function::{beta::beta_reg, gamma::ln_gamma};

use crate::error::{Error, Result};

pub use mvn::{bivariate_normal_upper, mvn_cdf_at_origin, mvn_cdf_at_origin_with_error, MvnEstimate};

/// Default accuracy for the multivariate normal CDF used by the Gaussian
/// approximation.
pub const DEFAULT_MVN_ACCURACY: f64 = 1e-7;

/// Size of the process-wide shared cache. Large enough for ESET-scale trials.
const SHARED_CACHE_MAX_ARG: u32 = 4096;

/// Pre-computed `ln B(a, b)` for positive integer arguments.
///
/// Values are stored as log-factorials, so a lookup is three loads and two
/// additions. Any `(a, b)` with `a, b <= max_arg` is a cache hit; larger
/// arguments fall back to `ln Γ`.
#[derive(Debug, Clone)]
pub struct LogBetaCache {
    max_arg: u32,
    // ln((m)!) for m in 0..2 * max_arg
    ln_fact: Vec<f64>,
}

impl LogBetaCache {
    pub fn new(max_arg: u32) -> Self {
        let max_arg = max_arg.max(1);
        let len = 2 * max_arg as usize;
        // u64 factorials are exact through 20!
        let mut exact = 1u64;
        let ln_fact = (0..len)
            .map(|m| {
                if m <= 20 {
                    exact *= m.max(1) as u64;
                    (exact as f64).ln()
                } else {
                    ln_gamma(m as f64 + 1.0)
                }
            })
            .collect();
        Self { max_arg, ln_fact }
    }

    /// Cache sized for a trial of `n` patients whose priors have parameters
    /// at most `max_prior`.
    pub fn for_trial(n: u32, max_prior: u32) -> Self {
        Self::new(2 * (n + max_prior))
    }

    /// The process-wide default cache.
    pub fn shared() -> Arc<LogBetaCache> {
        static SHARED: OnceLock<Arc<LogBetaCache>> = OnceLock::new();
        SHARED
            .get_or_init(|| Arc::new(LogBetaCache::new(SHARED_CACHE_MAX_ARG)))
            .clone()
    }

    pub(crate) fn shared_ref() -> &'static LogBetaCache {
        static SHARED: OnceLock<Arc<LogBetaCache>> = OnceLock::new();
        SHARED.get_or_init(LogBetaCache::shared)
    }

    pub fn max_arg(&self) -> u32 {
        self.max_arg
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        a >= 1 && b >= 1 && a <= self.max_arg && b <= self.max_arg
    }

    /// `ln B(a, b)`; arguments must be at least 1.
    #[inline]
    pub fn get(&self, a: u32, b: u32) -> f64 {
        debug_assert!(a >= 1 && b >= 1);
        let s = (a + b - 1) as usize;
        if s < self.ln_fact.len() {
            self.ln_fact[a as usize - 1] + self.ln_fact[b as usize - 1] - self.ln_fact[s]
        } else {
            ln_beta_gamma(a as f64, b as f64)
        }
    }
}

#[inline]
fn ln_beta_gamma(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln B(a, b)` for positive integers, served from the shared cache.
pub fn log_beta(a: u32, b: u32) -> Result<f64> {
    if a == 0 || b == 0 {
        return Err(Error::Domain(format!("log_beta({a}, {b}): arguments must be >= 1")));
    }
    Ok(LogBetaCache::shared_ref().get(a, b))
}

/// Regularized incomplete Beta function `I_x(a, b)`, the CDF of Beta(a, b) at `x`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("reg_inc_beta: x = {x} outside [0, 1]")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("reg_inc_beta: a = {a}, b = {b} must be positive")));
    }
    Ok(beta_reg(a, b, x))
}

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`] for `p` in (0, 1).
pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    // one Newton step against the accurate CDF
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        z - (std_normal_cdf(z) - p) / density
    } else {
        z
    }
}

/// Variance of Beta(a, b).
#[inline]
pub fn beta_variance(a: f64, b: f64) -> f64 {
    let s = a + b;
    a * b / (s * s * (s + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive};

    fn factorial(m: u32) -> BigUint {
        (1..=m).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
    }

    // ln((a-1)!(b-1)!/(a+b-1)!) from exact integers.
    fn exact_log_beta(a: u32, b: u32) -> f64 {
        let num = factorial(a - 1) * factorial(b - 1);
        let den = factorial(a + b - 1);
        num.to_f64().unwrap().ln() - den.to_f64().unwrap().ln()
    }

    #[test]
    fn log_beta_spot_values() {
        assert_eq!(log_beta(1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(log_beta(2, 2).unwrap(), (1.0f64 / 6.0).ln(), epsilon = 1e-14);
        let exact = exact_log_beta(86, 9);
        let got = log_beta(86, 9).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn log_beta_matches_exact_rationals() {
        let cache = LogBetaCache::new(40);
        for a in 1..40u32 {
            for b in 1..=(40 - a) {
                let exact = exact_log_beta(a, b);
                let got = cache.get(a, b);
                let err = if exact == 0.0 { got.abs() } else { ((got - exact) / exact).abs() };
                assert!(err < 1e-12, "({a},{b}): {got} vs {exact}");
                assert_eq!(got, cache.get(b, a));
            }
        }
    }

    #[test]
    fn cache_miss_falls_back_to_gamma() {
        let cache = LogBetaCache::new(4);
        assert!(!cache.contains(10, 3));
        assert_abs_diff_eq!(cache.get(10, 3), exact_log_beta(10, 3), epsilon = 1e-12);
    }

    #[test]
    fn log_beta_rejects_zero() {
        assert!(matches!(log_beta(0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn reg_inc_beta_values() {
        assert_abs_diff_eq!(reg_inc_beta(0.5, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        // Beta(3,2) CDF is 4x^3 - 3x^4.
        let x: f64 = 0.25;
        let poly = 4.0 * x.powi(3) - 3.0 * x.powi(4);
        assert_abs_diff_eq!(reg_inc_beta(x, 3.0, 2.0).unwrap(), poly, epsilon = 1e-12);
        for &(x, a, b) in &[(0.1, 2.0, 7.0), (0.73, 11.0, 4.0), (0.5, 30.0, 31.0), (0.02, 1.0, 90.0)] {
            let s = reg_inc_beta(x, a, b).unwrap() + reg_inc_beta(1.0 - x, b, a).unwrap();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        assert!(reg_inc_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn reg_inc_beta_monotone() {
        for &(a, b) in &[(1.0, 1.0), (3.0, 2.0), (40.0, 12.0), (2.0, 200.0)] {
            let mut prev = 0.0;
            for i in 0..=1000 {
                let v = reg_inc_beta(i as f64 / 1000.0, a, b).unwrap();
                assert!(v + 1e-15 >= prev, "I_x({a},{b}) decreased at {i}");
                prev = v;
            }
        }
    }

    #[test]
    fn normal_cdf() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        for &z in &[0.3, 1.0, 2.5, 6.0] {
            assert_abs_diff_eq!(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, epsilon = 1e-15);
        }
        // quantile oracle by bisection
        let (mut lo, mut hi) = (0.0f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if std_normal_cdf(mid) < 0.975 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_abs_diff_eq!(lo, 1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(std_normal_cdf(1.959964), 0.975, epsilon = 1e-6);
        assert_abs_diff_eq!(std_normal_quantile(0.975), 1.959963984540054, epsilon = 1e-12);
    }
}
