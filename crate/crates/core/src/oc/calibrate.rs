use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::{forward, Visits};
use crate::error::{Error, Result};
use crate::trial::{Decision, TrialDesign};

/// Critical value controlling the type I error at one null response rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpCalibration {
    pub p: f64,
    pub alpha: f64,
    pub threshold: f64,
    /// Type I error at `threshold`.
    pub type_i_error: f64,
    /// The attainable statistic just below `threshold` and the type I error
    /// it would give, which exceeds `alpha`.
    pub next_lower: Option<(f64, f64)>,
    pub forward_passes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UxOptions {
    pub step: f64,
    pub refine_step: f64,
    pub cap: u64,
}

impl Default for UxOptions {
    fn default() -> Self {
        Self { step: 0.01, refine_step: 0.001, cap: super::DEFAULT_STATE_CAP }
    }
}

/// Critical value controlling the type I error over the whole null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UxCalibration {
    pub alpha: f64,
    pub threshold: f64,
    pub argmax_p: f64,
    /// `(p, c(p))` for every null response rate evaluated.
    pub grid: Vec<(f64, f64)>,
}

fn rejection_mass(design: &TrialDesign, p: f64, c: f64, cap: u64) -> Result<f64> {
    let d = design.clone().with_threshold(c);
    let (dist, _) = forward(&d, &vec![p; design.arms], cap, false)?;
    Ok(dist.mass_where(|t| matches!(t.decision, Decision::Reject(_))))
}

/// Smallest threshold `c` whose type I error at `p_0 = ... = p_{k-1} = p` is
/// at most `alpha`.
///
/// The attainable thresholds are the statistic values met at analyses. The
/// rejection probability is nonincreasing in `c`, so the answer is found by
/// bisection over them; with a single analysis the rejection probability of
/// every candidate follows from one pass.
pub fn calibrate_pp(design: &TrialDesign, p: f64, alpha: f64, cap: u64) -> Result<PpCalibration> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("null response rate {p} outside [0, 1]")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let never = design.clone().with_threshold(1.0);
    let (_, visits) = forward(&never, &vec![p; design.arms], cap, true)?;
    let mut raw: Vec<f64> = visits.iter().map(|v| v.0).chain([0.0]).collect();
    raw.sort_by(f64::total_cmp);
    let candidates = tie_groups(&raw);

    let single = design.analysis_points().len() == 1;
    let mut passes = 1;
    let sorted_visits = {
        let mut v: Visits = visits;
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let mut eval = |c: f64| -> Result<f64> {
        if single {
            let idx = sorted_visits.partition_point(|v| v.0 <= c);
            Ok(sorted_visits[idx..].iter().map(|v| v.1).sum())
        } else {
            passes += 1;
            rejection_mass(design, p, c, cap)
        }
    };

    // first candidate whose rejection mass is <= alpha; the largest rejects nothing
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    let mut at_hi = 0.0;
    let mut below: Option<(f64, f64)> = None;
    let at_lo = eval(candidates[lo])?;
    if alpha >= 1.0 || at_lo <= alpha {
        hi = lo;
        at_hi = at_lo;
    } else {
        below = Some((candidates[lo], at_lo));
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let m = eval(candidates[mid])?;
            if m <= alpha {
                hi = mid;
                at_hi = m;
            } else {
                lo = mid;
                below = Some((candidates[mid], m));
            }
        }
    }
    Ok(PpCalibration {
        p,
        alpha,
        threshold: candidates[hi],
        type_i_error: at_hi,
        next_lower: below.filter(|b| b.0 < candidates[hi]),
        forward_passes: passes,
    })
}

/// Supremum over a grid of null response rates of [`calibrate_pp`], with one
/// finer pass around the maximizing rate.
pub fn calibrate_ux(design: &TrialDesign, alpha: f64, opts: UxOptions) -> Result<UxCalibration> {
    if !(opts.step > 0.0 && opts.refine_step > 0.0) {
        return Err(Error::Domain("grid steps must be positive".into()));
    }
    let coarse: Vec<f64> = grid(0.0, 1.0, opts.step);
    let eval = |ps: &[f64]| -> Result<Vec<(f64, f64)>> {
        ps.par_iter().map(|&p| Ok((p, calibrate_pp(design, p, alpha, opts.cap)?.threshold))).collect()
    };
    let mut all = eval(&coarse)?;
    let arg = argmax(&all);
    let fine: Vec<f64> = grid(arg - opts.step, arg + opts.step, opts.refine_step)
        .into_iter()
        .filter(|p| !all.iter().any(|q| (q.0 - p).abs() < 1e-12))
        .collect();
    all.extend(eval(&fine)?);
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let argmax_p = argmax(&all);
    let threshold = all.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(UxCalibration { alpha, threshold, argmax_p, grid: all })
}

/// Statistics closer than this are the same value up to rounding.
const TIE_TOLERANCE: f64 = 1e-12;

/// Largest member of each run of sorted values whose neighbours lie within
/// [`TIE_TOLERANCE`], so that a threshold rejects all of a tie group or none.
fn tie_groups(sorted: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some(last) if v - *last <= TIE_TOLERANCE => *last = v,
            _ => out.push(v),
        }
    }
    out
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let (from, to) = (from.max(0.0), to.min(1.0));
    let m = ((to - from) / step + 1e-9).floor() as usize;
    (0..=m).map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9).collect()
}

fn argmax(v: &[(f64, f64)]) -> f64 {
    let mut best = v[0];
    for &x in &v[1..] {
        if x.1 > best.1 {
            best = x;
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oc::{exact_ocs, DEFAULT_STATE_CAP};
    use crate::trial::AnalysisSchedule;

    #[test]
    fn near_equal_statistics_form_one_group() {
        assert_eq!(tie_groups(&[0.0, 0.5, 0.5 + 4e-13, 0.5 + 8e-13, 0.7]), vec![0.0, 0.5 + 8e-13, 0.7]);
        assert_eq!(tie_groups(&[]), Vec::<f64>::new());
    }

    #[test]
    fn next_lower_is_a_distinct_value() {
        let d = TrialDesign::sbrar(2, 40, 0.9);
        let cal = calibrate_pp(&d, 0.6, 0.05, DEFAULT_STATE_CAP).unwrap();
        let (lower, _) = cal.next_lower.unwrap();
        assert!(cal.threshold - lower > TIE_TOLERANCE);
    }

    #[test]
    fn alpha_one_gives_zero() {
        let d = TrialDesign::sbrar(2, 4, 0.9);
        assert_eq!(calibrate_pp(&d, 0.5, 1.0, DEFAULT_STATE_CAP).unwrap().threshold, 0.0);
    }

    #[test]
    fn tiny_alpha_reaches_the_largest_statistic() {
        let d = TrialDesign::sbrar(2, 4, 0.9);
        let cal = calibrate_pp(&d, 0.5, 1e-12, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(cal.type_i_error, 0.0);
        // every split of four outcomes is reachable
        let mut top = 0.0f64;
        for s0 in 0..=4u32 {
            for f0 in 0..=4 - s0 {
                for s1 in 0..=4 - s0 - f0 {
                    let f1 = 4 - s0 - f0 - s1;
                    let t = crate::exact::pps_two_arm((1 + s1, 1 + f1), (1 + s0, 1 + f0)).unwrap();
                    top = top.max(t).max(1.0 - t);
                }
            }
        }
        assert!((cal.threshold - top).abs() < 1e-12);
    }

    #[test]
    fn calibration_is_minimal() {
        let mut d = TrialDesign::sbrar(2, 6, 0.9);
        for schedule in [AnalysisSchedule::FinalOnly, AnalysisSchedule::Points { points: vec![3] }] {
            d.analyses = schedule;
            for &alpha in &[0.05, 0.1, 0.2] {
                let cal = calibrate_pp(&d, 0.5, alpha, DEFAULT_STATE_CAP).unwrap();
                let at = exact_ocs(&d, &[0.5, 0.5], cal.threshold).unwrap().rejection_rate;
                assert!(at <= alpha);
                assert!((at - cal.type_i_error).abs() < 1e-12);
                let (lower, mass) = cal.next_lower.unwrap();
                assert!(mass > alpha);
                assert!(exact_ocs(&d, &[0.5, 0.5], lower).unwrap().rejection_rate > alpha);
            }
        }
    }

    #[test]
    fn ux_dominates_and_is_monotone_in_alpha() {
        let d = TrialDesign::sbrar(2, 4, 0.9);
        let opts = UxOptions { step: 0.05, refine_step: 0.01, cap: DEFAULT_STATE_CAP };
        let a = calibrate_ux(&d, 0.05, opts).unwrap();
        for &(p, c) in &a.grid {
            assert!(a.threshold >= c, "{p}");
        }
        let b = calibrate_ux(&d, 0.2, opts).unwrap();
        assert!(a.threshold >= b.threshold);
    }
}
