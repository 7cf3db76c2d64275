use crate::error::{Error, Result};
use crate::special::LogBetaCache;

/// `P(X > Y)` for `X ~ Beta(focal)` and `Y ~ Beta(opponent)` in closed form.
///
/// The finite sum runs over `min(x0, x1, x2, x3)` terms: the four
/// rearrangements `P(X > Y)`, `1 - P(Y > X)`, `P(1 - Y > 1 - X)` and
/// `1 - P(1 - X > 1 - Y)` each sum over a different parameter.
pub fn pps_two_arm(opponent: (u32, u32), focal: (u32, u32)) -> Result<f64> {
    let (x0, x1) = opponent;
    let (x2, x3) = focal;
    if x0 == 0 || x1 == 0 || x2 == 0 || x3 == 0 {
        return Err(Error::Domain(format!(
            "pps_two_arm: parameters must be >= 1, got opponent {opponent:?} focal {focal:?}"
        )));
    }
    Ok(pps_two_arm_with(LogBetaCache::shared_ref(), opponent, focal))
}

pub(crate) fn pps_two_arm_with(cache: &LogBetaCache, opponent: (u32, u32), focal: (u32, u32)) -> f64 {
    let (x0, x1) = opponent;
    let (x2, x3) = focal;
    let m = x0.min(x1).min(x2).min(x3);
    if m == x2 {
        superiority_sum(cache, (x2, x3), (x0, x1))
    } else if m == x0 {
        1.0 - superiority_sum(cache, (x0, x1), (x2, x3))
    } else if m == x1 {
        superiority_sum(cache, (x1, x0), (x3, x2))
    } else {
        1.0 - superiority_sum(cache, (x3, x2), (x1, x0))
    }
}

/// `P(Beta(a, b) > Beta(c, d)) = sum_{i<a} B(c+i, d+b) / ((b+i) B(1+i, b) B(c, d))`,
/// each term evaluated in log space.
fn superiority_sum(cache: &LogBetaCache, (a, b): (u32, u32), (c, d): (u32, u32)) -> f64 {
    let base = cache.get(c, d);
    (0..a)
        .map(|i| {
            let ln_term = cache.get(c + i, d + b) - ((b + i) as f64).ln() - cache.get(1 + i, b) - base;
            ln_term.exp()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spot_values() {
        assert_abs_diff_eq!(pps_two_arm((1, 1), (1, 1)).unwrap(), 0.5, epsilon = 1e-15);
        // P(U < X), X ~ Beta(2,1): integral of 2x * x = 2/3
        assert_abs_diff_eq!(pps_two_arm((1, 1), (2, 1)).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pps_two_arm((1, 1), (1, 2)).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        // P(U < X), X ~ Beta(3,1): integral of 3x^2 * x = 3/4
        assert_abs_diff_eq!(pps_two_arm((1, 1), (3, 1)).unwrap(), 0.75, epsilon = 1e-12);
        assert!(pps_two_arm((0, 1), (1, 1)).is_err());
    }

    // All four rearrangements must agree; they sum over different parameters.
    #[test]
    fn rearrangements_agree() {
        let cache = LogBetaCache::shared_ref();
        for x0 in 1..9 {
            for x1 in 1..9 {
                for x2 in 1..9 {
                    for x3 in 1..9 {
                        let direct = superiority_sum(cache, (x2, x3), (x0, x1));
                        let comp = 1.0 - superiority_sum(cache, (x0, x1), (x2, x3));
                        let flip = superiority_sum(cache, (x1, x0), (x3, x2));
                        let flip_comp = 1.0 - superiority_sum(cache, (x3, x2), (x1, x0));
                        for v in [comp, flip, flip_comp] {
                            assert_abs_diff_eq!(direct, v, epsilon = 1e-12);
                        }
                    }
                }
            }
        }
    }
}
