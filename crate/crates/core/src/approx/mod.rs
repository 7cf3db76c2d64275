//! Approximate posterior probabilities of superiority and the analytical
//! error bounds for the Monte-Carlo estimator.
//!
//! * Gaussian approximation: each Beta posterior replaced by a normal with
//!   matching moments, then a `k - 1` dimensional normal orthant probability.
//! * Repeated sampling: the fraction of joint posterior draws in which the
//!   focal arm is the strict maximum.
//! * Numerical integration: one-dimensional adaptive quadrature of the focal
//!   density times the other arms' CDFs.

pub mod quadrature;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::exact::{superiority_probs, TrialState};
use crate::seed::stream_rng;
use crate::special::{mvn_cdf_at_origin, std_normal_cdf, LogBetaCache, DEFAULT_MVN_ACCURACY};

pub use quadrature::QuadEstimate;

/// Default quadrature accuracy for numerical integration.
pub const DEFAULT_NI_ACCURACY: f64 = 1e-7;
/// Draws per independent substream in repeated sampling.
const RS_CHUNK: u64 = 1 << 16;
const NI_MAX_PIECES: usize = 4000;

/// How posterior probabilities of superiority are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum PpsMethod {
    Exact,
    GaussianApprox {
        #[serde(default = "default_mvn_accuracy")]
        accuracy: f64,
        #[serde(default)]
        seed: u64,
    },
    RepeatedSampling {
        samples: u64,
        #[serde(default)]
        seed: u64,
    },
    NumericIntegration {
        #[serde(default = "default_ni_accuracy")]
        accuracy: f64,
    },
}

fn default_mvn_accuracy() -> f64 {
    DEFAULT_MVN_ACCURACY
}

fn default_ni_accuracy() -> f64 {
    DEFAULT_NI_ACCURACY
}

impl PpsMethod {
    pub fn gaussian() -> Self {
        PpsMethod::GaussianApprox { accuracy: DEFAULT_MVN_ACCURACY, seed: 0 }
    }

    pub fn repeated_sampling(samples: u64, seed: u64) -> Self {
        PpsMethod::RepeatedSampling { samples, seed }
    }

    pub fn numeric_integration() -> Self {
        PpsMethod::NumericIntegration { accuracy: DEFAULT_NI_ACCURACY }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PpsMethod::RepeatedSampling { samples: 0, .. } => {
                Err(Error::Config("repeated sampling needs at least one sample".into()))
            }
            PpsMethod::NumericIntegration { accuracy } | PpsMethod::GaussianApprox { accuracy, .. }
                if !(accuracy > 0.0) =>
            {
                Err(Error::Config("accuracy must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether repeated evaluation at the same state always gives the same value
    /// independent of any stream; exact forward equations need this.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, PpsMethod::RepeatedSampling { .. })
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            PpsMethod::Exact => "exact",
            PpsMethod::GaussianApprox { .. } => "ga",
            PpsMethod::RepeatedSampling { .. } => "rs",
            PpsMethod::NumericIntegration { .. } => "ni",
        }
    }

    /// Superiority probability of every arm.
    pub fn probs(&self, state: &TrialState) -> Result<Vec<f64>> {
        self.probs_in_stream(state, 0)
    }

    /// As [`PpsMethod::probs`], with repeated sampling drawing from the
    /// substream `stream` of its seed.
    pub fn probs_in_stream(&self, state: &TrialState, stream: u64) -> Result<Vec<f64>> {
        match *self {
            PpsMethod::Exact => superiority_probs(state),
            PpsMethod::GaussianApprox { accuracy, seed } => {
                (0..state.arms()).map(|j| pps_gaussian_with(state, j, accuracy, seed)).collect()
            }
            PpsMethod::RepeatedSampling { samples, seed } => {
                Ok(repeated_sampling_all(state, samples, crate::seed::derive_seed(seed, &[stream]), false))
            }
            PpsMethod::NumericIntegration { accuracy } => (0..state.arms())
                .map(|j| pps_numeric_integration(state, j, accuracy))
                .collect(),
        }
    }
}

/// Gaussian approximation with the default normal-CDF accuracy and seed.
pub fn pps_gaussian(state: &TrialState, j: usize) -> Result<f64> {
    pps_gaussian_with(state, j, DEFAULT_MVN_ACCURACY, 0)
}

pub fn pps_gaussian_with(state: &TrialState, j: usize, accuracy: f64, seed: u64) -> Result<f64> {
    let k = state.arms();
    if j >= k {
        return Err(Error::Domain(format!("arm {j} out of range")));
    }
    let m: Vec<f64> = (0..k).map(|i| state.mean(i)).collect();
    let s2: Vec<f64> = (0..k).map(|i| state.variance(i)).collect();
    if k == 2 {
        // the smaller tail is evaluated directly and the other is its
        // complement, so the two arms sum to exactly 1
        let z = (m[j] - m[1 - j]) / (s2[0] + s2[1]).sqrt();
        let tail = std_normal_cdf(-z.abs());
        return Ok(if z < 0.0 { tail } else { 1.0 - tail });
    }
    let others: Vec<usize> = (0..k).filter(|&i| i != j).collect();
    let d = others.len();
    let mean: Vec<f64> = others.iter().map(|&i| m[i] - m[j]).collect();
    let mut cov = vec![s2[j]; d * d];
    for (r, &i) in others.iter().enumerate() {
        cov[r * d + r] += s2[i];
    }
    mvn_cdf_at_origin(&mean, &cov, accuracy, seed)
}

/// Monte-Carlo estimate from `samples` joint posterior draws keyed by `seed`.
pub fn pps_repeated_sampling(state: &TrialState, j: usize, samples: u64, seed: u64) -> Result<f64> {
    if j >= state.arms() {
        return Err(Error::Domain(format!("arm {j} out of range")));
    }
    if samples == 0 {
        return Err(Error::Domain("repeated sampling needs at least one sample".into()));
    }
    Ok(repeated_sampling_all(state, samples, seed, false)[j])
}

/// As [`pps_repeated_sampling`] with chunks drawn in parallel; identical output.
pub fn pps_repeated_sampling_par(state: &TrialState, j: usize, samples: u64, seed: u64) -> Result<f64> {
    if j >= state.arms() || samples == 0 {
        return Err(Error::Domain("invalid arm or sample count".into()));
    }
    Ok(repeated_sampling_all(state, samples, seed, true)[j])
}

/// Fractions of draws in which each arm is the strict maximum; ties count for
/// no arm.
fn repeated_sampling_all(state: &TrialState, samples: u64, seed: u64, parallel: bool) -> Vec<f64> {
    let k = state.arms();
    let dists: Vec<Beta<f64>> = (0..k)
        .map(|i| {
            let (a, b) = state.arm(i);
            Beta::new(a as f64, b as f64).expect("parameters are >= 1")
        })
        .collect();
    let chunks = samples.div_ceil(RS_CHUNK);
    let run_chunk = |c: u64| -> Vec<u64> {
        let mut rng = stream_rng(seed, &[c]);
        let n = RS_CHUNK.min(samples - c * RS_CHUNK);
        let mut wins = vec![0u64; k];
        let mut draw = vec![0.0; k];
        for _ in 0..n {
            for (x, d) in draw.iter_mut().zip(&dists) {
                *x = d.sample(&mut rng);
            }
            if let Some(best) = strict_argmax(&draw) {
                wins[best] += 1;
            }
        }
        wins
    };
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };
    let wins = if parallel {
        (0..chunks).into_par_iter().map(run_chunk).reduce(|| vec![0; k], add)
    } else {
        (0..chunks).map(run_chunk).fold(vec![0; k], add)
    };
    wins.into_iter().map(|w| w as f64 / samples as f64).collect()
}

fn strict_argmax(x: &[f64]) -> Option<usize> {
    let mut best = 0;
    let mut tie = false;
    for i in 1..x.len() {
        if x[i] > x[best] {
            best = i;
            tie = false;
        } else if x[i] == x[best] {
            tie = true;
        }
    }
    (!tie).then_some(best)
}

/// Draw one joint posterior sample and return the arm holding the strict
/// maximum (the first maximal arm on an exact tie).
pub fn posterior_argmax<R: Rng + ?Sized>(state: &TrialState, allowed: &[bool], rng: &mut R) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for j in 0..state.arms() {
        let (a, b) = state.arm(j);
        let v: f64 = Beta::new(a as f64, b as f64).expect("parameters are >= 1").sample(rng);
        if allowed[j] && v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Numerical integration of `f_j(p) prod_{i != j} I_p(a_i, b_i)` over `[0, 1]`.
pub fn pps_numeric_integration(state: &TrialState, j: usize, accuracy: f64) -> Result<f64> {
    pps_numeric_integration_with_error(state, j, accuracy).map(|e| e.value)
}

pub fn pps_numeric_integration_with_error(state: &TrialState, j: usize, accuracy: f64) -> Result<QuadEstimate> {
    let k = state.arms();
    if j >= k {
        return Err(Error::Domain(format!("arm {j} out of range")));
    }
    if !(accuracy > 0.0) {
        return Err(Error::Domain("accuracy must be positive".into()));
    }
    let (a, b) = state.arm(j);
    let (af, bf) = (a as f64, b as f64);
    let ln_norm = LogBetaCache::shared_ref().get(a, b);
    let others: Vec<(f64, f64)> = (0..k)
        .filter(|&i| i != j)
        .map(|i| {
            let (x, y) = state.arm(i);
            (x as f64, y as f64)
        })
        .collect();
    let integrand = |p: f64| {
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        let ln_density = (af - 1.0) * p.ln() + (bf - 1.0) * (-p).ln_1p() - ln_norm;
        let mut v = ln_density.exp();
        for &(x, y) in &others {
            if v == 0.0 {
                break;
            }
            v *= beta_reg(x, y, p);
        }
        v
    };

    // Break points around the focal density and the other arms' CDF ramps so
    // that narrow features are never straddled by a single initial piece.
    let mut breaks = vec![0.0, 1.0];
    let spread = |x: f64, y: f64| ((x / (x + y)), (x * y / ((x + y).powi(2) * (x + y + 1.0))).sqrt());
    let (mj, sj) = spread(af, bf);
    for z in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        breaks.push(mj + z * sj);
    }
    for &(x, y) in &others {
        let (m, s) = spread(x, y);
        for z in [-3.0, 0.0, 3.0] {
            breaks.push(m + z * s);
        }
    }
    breaks.retain(|v| (0.0..=1.0).contains(v));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    quadrature::integrate(integrand, &breaks, accuracy, NI_MAX_PIECES)
}

fn ln_choose(n: u64, r: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((n - r) as f64 + 1.0)
}

/// Uniform bound `C(K-1, floor(K/2)) 2^-K` on the mean absolute error of the
/// repeated-sampling estimator with `K` draws.
pub fn rs_error_bound(samples: u64) -> f64 {
    assert!(samples >= 1, "rs_error_bound needs K >= 1");
    (ln_choose(samples - 1, samples / 2) - samples as f64 * std::f64::consts::LN_2).exp()
}

/// Exact `E|P_hat - P|` for the repeated-sampling estimator with `K` draws
/// when the true probability is `p`:
/// `2 C(K-1, l-1) p^l (1-p)^(K-l+1)` with `l - 1 <= pK < l`.
pub fn rs_mean_abs_error(p: f64, samples: u64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability outside [0, 1]");
    assert!(samples >= 1, "rs_mean_abs_error needs K >= 1");
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    let l = (p * samples as f64).floor() as u64 + 1;
    if l > samples {
        return 0.0;
    }
    let ln = ln_choose(samples - 1, l - 1) + l as f64 * p.ln() + (samples - l + 1) as f64 * (-p).ln_1p();
    2.0 * ln.exp()
}

/// Smallest `eps` with `2 ((1-q)/q)^(-K eps^2 / (1-2q)) <= delta`; at `q = 1/2`
/// the continuous limit `2 exp(-2 K eps^2)` is used.
pub fn ks_confidence_radius(samples: u64, q: f64, delta: f64) -> f64 {
    assert!(samples >= 1, "ks_confidence_radius needs K >= 1");
    assert!(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    assert!(delta > 0.0, "delta must be positive");
    if delta >= 2.0 {
        return 0.0;
    }
    let rate = if (q - 0.5).abs() < 1e-9 {
        2.0
    } else {
        ((1.0 - q) / q).ln() / (1.0 - 2.0 * q)
    };
    ((2.0 / delta).ln() / (samples as f64 * rate)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{pps_single, pps_two_arm};
    use approx::assert_abs_diff_eq;

    fn st(v: &[u32]) -> TrialState {
        TrialState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_two_arm() {
        assert_abs_diff_eq!(pps_gaussian(&st(&[1, 1, 1, 1]), 0).unwrap(), 0.5, epsilon = 1e-15);
        let s = st(&[2, 1, 1, 1]);
        let (m0, m1) = (2.0 / 3.0, 0.5);
        let (v0, v1) = (2.0 / (9.0 * 4.0), 1.0 / 12.0);
        let want = std_normal_cdf((m0 - m1) / f64::sqrt(v0 + v1));
        assert_abs_diff_eq!(pps_gaussian(&s, 0).unwrap(), want, epsilon = 1e-15);
        assert_eq!(pps_gaussian(&s, 0).unwrap() + pps_gaussian(&s, 1).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_fails_on_lopsided_state() {
        // 85 successes and 8 failures against 7 successes and no failures
        let s = st(&[86, 9, 8, 1]);
        let exact = pps_two_arm(s.arm(1), s.arm(0)).unwrap();
        let ga = pps_gaussian(&s, 0).unwrap();
        assert_abs_diff_eq!((ga - exact).abs(), 0.0983, epsilon = 1e-4);
        // the same pattern with 120 patients crosses 0.1
        let s = st(&[104, 10, 9, 1]);
        let exact = pps_two_arm(s.arm(1), s.arm(0)).unwrap();
        assert!((pps_gaussian(&s, 0).unwrap() - exact).abs() > 0.1);
    }

    #[test]
    fn gaussian_exchangeable() {
        for k in 3..=4 {
            let s = TrialState::new([4, 6].repeat(k)).unwrap();
            for j in 0..k {
                assert_abs_diff_eq!(pps_gaussian(&s, j).unwrap(), 1.0 / k as f64, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn repeated_sampling_basic() {
        let s = st(&[3, 2, 2, 5]);
        let v = pps_repeated_sampling(&s, 0, 1, 9).unwrap();
        assert!(v == 0.0 || v == 1.0);
        let u = st(&[1, 1, 1, 1]);
        let v = pps_repeated_sampling(&u, 0, 1_000_000, 3).unwrap();
        assert!((v - 0.5).abs() < 0.002, "{v}");
        assert_eq!(
            pps_repeated_sampling(&s, 1, 100_000, 5).unwrap(),
            pps_repeated_sampling(&s, 1, 100_000, 5).unwrap()
        );
        assert_eq!(
            pps_repeated_sampling(&s, 1, 200_000, 5).unwrap(),
            pps_repeated_sampling_par(&s, 1, 200_000, 5).unwrap()
        );
        assert!(pps_repeated_sampling(&s, 0, 0, 1).is_err());
    }

    #[test]
    fn numeric_integration_values() {
        let v = pps_numeric_integration(&st(&[1, 1, 1, 1]), 0, 1e-7).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-7);
        let v = pps_numeric_integration(&st(&[2, 1, 1, 1]), 0, 1e-7).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-7);
        let s = st(&[3, 1, 2, 4, 1, 2]);
        for j in 0..3 {
            let mut opp = s.params().to_vec();
            let focal = (opp.remove(2 * j), opp.remove(2 * j));
            let exact = pps_single(focal, &opp).unwrap();
            assert_abs_diff_eq!(pps_numeric_integration(&s, j, 1e-8).unwrap(), exact, epsilon = 1e-7);
        }
        let big = st(&[251, 251, 251, 251]);
        let e = pps_numeric_integration_with_error(&big, 0, 1e-7).unwrap();
        assert_abs_diff_eq!(e.value, 0.5, epsilon = 1e-7);
    }

    #[test]
    fn error_bounds() {
        assert_abs_diff_eq!(rs_error_bound(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rs_error_bound(10_000), 3.99e-3, epsilon = 0.01 * 3.99e-3);
        // C(2m-1, m) / 2^(2m) ~ 1 / (2 sqrt(pi m))
        let m = 500_000.0f64;
        assert_abs_diff_eq!(rs_error_bound(1_000_000), 1.0 / (2.0 * (std::f64::consts::PI * m).sqrt()), epsilon = 1e-9);
        assert_abs_diff_eq!(rs_mean_abs_error(0.5, 10_000), 3.99e-3, epsilon = 0.01 * 3.99e-3);
        assert_eq!(rs_mean_abs_error(0.0, 50), 0.0);
        assert_eq!(rs_mean_abs_error(1.0, 50), 0.0);
    }

    #[test]
    fn mean_abs_error_by_enumeration() {
        let (p, k) = (0.1f64, 100u64);
        let brute: f64 = (0..=k)
            .map(|x| {
                let ln = ln_choose(k, x) + x as f64 * p.ln() + (k - x) as f64 * (1.0 - p).ln();
                ln.exp() * (x as f64 / k as f64 - p).abs()
            })
            .sum();
        assert_abs_diff_eq!(rs_mean_abs_error(p, k), brute, epsilon = 1e-12);
    }

    #[test]
    fn confidence_radius() {
        assert_abs_diff_eq!(ks_confidence_radius(100_000, 0.5, 0.05), 0.0043, epsilon = 0.02 * 0.0043);
        assert_eq!(ks_confidence_radius(100, 0.5, 2.0), 0.0);
        let want = ((2.0f64 / 0.05).ln() / (2.0 * 10_000.0)).sqrt();
        assert_abs_diff_eq!(ks_confidence_radius(10_000, 0.5, 0.05), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.0136, epsilon = 1e-4);
        // smaller q gives a tighter radius
        assert!(ks_confidence_radius(10_000, 0.05, 0.05) < want);
        // continuity at q = 1/2
        assert_abs_diff_eq!(ks_confidence_radius(10_000, 0.5 + 1e-6, 0.05), want, epsilon = 1e-8);
    }

    #[test]
    fn method_serde() {
        let m: PpsMethod = serde_json::from_str(r#"{"method":"repeated_sampling","samples":100}"#).unwrap();
        assert_eq!(m, PpsMethod::RepeatedSampling { samples: 100, seed: 0 });
        let m: PpsMethod = serde_json::from_str(r#"{"method":"gaussian_approx"}"#).unwrap();
        assert_eq!(m, PpsMethod::gaussian());
        assert!(serde_json::from_str::<PpsMethod>(r#"{"method":"repeated_sampling","samples":1,"x":1}"#).is_err());
        assert!(PpsMethod::RepeatedSampling { samples: 0, seed: 0 }.validate().is_err());
    }
}
