//! Orthant probabilities `P(Z <= 0)` for `Z ~ N(mean, cov)`.
//!
//! One dimension is closed form, two dimensions use Genz's Gauss-Legendre
//! bivariate algorithm, and higher dimensions use a randomized Richtmyer
//! lattice rule over the Genz separation-of-variables transform. The lattice
//! shifts come from a seeded ChaCha stream so results are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{std_normal_cdf, std_normal_quantile};
use crate::error::{Error, Result};

const PSD_TOL: f64 = 1e-12;
const QMC_SHIFTS: usize = 12;
const QMC_START_POINTS: usize = 1 << 8;
const QMC_MAX_POINTS: usize = 1 << 21;
const QMC_ERROR_SCALE: f64 = 3.0;

/// A probability together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub value: f64,
    pub error: f64,
}

/// `P(Z <= 0 componentwise)` for `Z ~ N(mean, cov)`, `cov` given row-major.
pub fn mvn_cdf_at_origin(mean: &[f64], cov: &[f64], accuracy: f64, seed: u64) -> Result<f64> {
    mvn_cdf_at_origin_with_error(mean, cov, accuracy, seed).map(|e| e.value)
}

pub fn mvn_cdf_at_origin_with_error(
    mean: &[f64],
    cov: &[f64],
    accuracy: f64,
    seed: u64,
) -> Result<MvnEstimate> {
    let d = mean.len();
    if d == 0 {
        return Err(Error::Domain("mvn_cdf_at_origin: empty mean".into()));
    }
    if cov.len() != d * d {
        return Err(Error::Domain(format!(
            "mvn_cdf_at_origin: covariance has {} entries, expected {}",
            cov.len(),
            d * d
        )));
    }
    if !(accuracy > 0.0) {
        return Err(Error::Domain("mvn_cdf_at_origin: accuracy must be positive".into()));
    }
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (cov[i * d + j], cov[j * d + i]);
            if (a - b).abs() > PSD_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Domain("mvn_cdf_at_origin: covariance not symmetric".into()));
            }
        }
    }

    // Zero-variance coordinates are deterministic and, by PSD, uncorrelated.
    let mut keep = Vec::with_capacity(d);
    for i in 0..d {
        let v = cov[i * d + i];
        if v < -PSD_TOL {
            return Err(Error::NotPositiveSemiDefinite { pivot: i, value: v });
        }
        if v <= PSD_TOL {
            if mean[i] > 0.0 {
                return Ok(MvnEstimate { value: 0.0, error: 0.0 });
            }
        } else {
            keep.push(i);
        }
    }
    let d = keep.len();
    if d == 0 {
        return Ok(MvnEstimate { value: 1.0, error: 0.0 });
    }
    let full = mean.len();
    let upper: Vec<f64> = keep.iter().map(|&i| -mean[i]).collect();
    let sub: Vec<f64> = keep
        .iter()
        .flat_map(|&i| keep.iter().map(move |&j| cov[i * full + j]))
        .collect();

    match d {
        1 => Ok(MvnEstimate {
            value: std_normal_cdf(upper[0] / sub[0].sqrt()),
            error: 0.0,
        }),
        2 => {
            let (s1, s2) = (sub[0].sqrt(), sub[3].sqrt());
            let rho = (sub[1] / (s1 * s2)).clamp(-1.0, 1.0);
            // P(X < h, Y < k) = P(-X > -h, -Y > -k)
            let value = bivariate_normal_upper(-upper[0] / s1, -upper[1] / s2, rho);
            Ok(MvnEstimate { value: value.clamp(0.0, 1.0), error: 1e-15 })
        }
        _ => lattice_qmc(&upper, &sub, accuracy, seed),
    }
}

// Gauss-Legendre nodes (negative half) and weights for 6, 12 and 20 points.
const GL_X: [&[f64]; 3] = [
    &[-0.9324695142031522, -0.6612093864662647, -0.2386191860831970],
    &[
        -0.9815606342467191,
        -0.9041172563704750,
        -0.7699026741943050,
        -0.5873179542866171,
        -0.3678314989981802,
        -0.1252334085114692,
    ],
    &[
        -0.9931285991850949,
        -0.9639719272779138,
        -0.9122344282513259,
        -0.8391169718222188,
        -0.7463319064601508,
        -0.6360536807265150,
        -0.5108670019508271,
        -0.3737060887154196,
        -0.2277858511416451,
        -0.07652652113719733,
    ],
];
const GL_W: [&[f64]; 3] = [
    &[0.1713244923791705, 0.3607615730481384, 0.4679139345726904],
    &[
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ],
    &[
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ],
];

/// `P(X > h, Y > k)` for standard normals with correlation `r` (Genz's BVND).
pub fn bivariate_normal_upper(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let ng = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (xs, ws) = (GL_X[ng], GL_W[ng]);
    let phid = std_normal_cdf;

    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (&x, &w) in xs.iter().zip(ws) {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (-x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (2.0 * two_pi) + phid(-h) * phid(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * phid(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (&x, &w) in xs.iter().zip(ws) {
            let xs2 = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs2).sqrt();
            bvn += a
                * w
                * ((-bs / (2.0 * xs2) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs2 + hk) / 2.0).exp() * (1.0 + c * xs2 * (1.0 + d * xs2)));
            let xs2 = as_ * (-x + 1.0).powi(2) / 4.0;
            let rs = (1.0 - xs2).sqrt();
            bvn += a
                * w
                * (-(bs / xs2 + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs2 * (1.0 + d * xs2)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn += phid(-h.max(k));
    } else {
        bvn = -bvn + (phid(-h) - phid(-k)).max(0.0);
    }
    bvn
}

/// Lower Cholesky factor with variables reordered by increasing marginal
/// probability. Returns (order, factor) with factor row-major.
fn ordered_cholesky(upper: &[f64], cov: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let d = upper.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        let pi = upper[i] / cov[i * d + i].sqrt();
        let pj = upper[j] / cov[j * d + j].sqrt();
        pi.total_cmp(&pj)
    });
    let c = |i: usize, j: usize| cov[order[i] * d + order[j]];
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[i * d + m] * l[j * d + m]).sum();
            if i == j {
                let v = c(i, i) - s;
                if v < -PSD_TOL * (1.0 + c(i, i).abs()) {
                    return Err(Error::NotPositiveSemiDefinite { pivot: i, value: v });
                }
                l[i * d + i] = v.max(0.0).sqrt();
            } else if l[j * d + j] > 0.0 {
                l[i * d + j] = (c(i, j) - s) / l[j * d + j];
            }
        }
    }
    Ok((order, l))
}

fn lattice_qmc(upper: &[f64], cov: &[f64], accuracy: f64, seed: u64) -> Result<MvnEstimate> {
    let d = upper.len();
    let (order, l) = ordered_cholesky(upper, cov)?;
    let b: Vec<f64> = order.iter().map(|&i| upper[i]).collect();

    // Richtmyer generators: fractional parts of square roots of primes.
    const PRIMES: [f64; 24] = [
        2., 3., 5., 7., 11., 13., 17., 19., 23., 29., 31., 37., 41., 43., 47., 53., 59., 61., 67., 71.,
        73., 79., 83., 89.,
    ];
    let dim = d - 1;
    if dim > PRIMES.len() {
        return Err(Error::Domain(format!("mvn_cdf_at_origin: dimension {d} too large")));
    }
    let gen: Vec<f64> = PRIMES[..dim].iter().map(|p| p.sqrt().fract()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; d];
    let mut w = vec![0.0; dim];
    let mut integrand = |w: &[f64]| -> f64 {
        let mut f = 1.0;
        for i in 0..d {
            let s: f64 = (0..i).map(|m| l[i * d + m] * y[m]).sum();
            let lii = l[i * d + i];
            let e = if lii > 0.0 {
                std_normal_cdf((b[i] - s) / lii)
            } else if b[i] - s >= 0.0 {
                1.0
            } else {
                0.0
            };
            f *= e;
            if f == 0.0 {
                return 0.0;
            }
            if i < dim {
                let u = (w[i] * e).clamp(1e-300, 1.0 - 1e-16);
                y[i] = std_normal_quantile(u);
            }
        }
        f
    };

    // Double the lattice size with fresh shifts until the standard error of
    // the shift means is small enough.
    let mut n = QMC_START_POINTS;
    loop {
        let mut means = [0.0f64; QMC_SHIFTS];
        for mean in means.iter_mut() {
            let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let mut acc = 0.0;
            for k in 1..=n {
                for i in 0..dim {
                    let t = (k as f64 * gen[i] + shift[i]).fract();
                    w[i] = (2.0 * t - 1.0).abs();
                }
                acc += integrand(&w);
            }
            *mean = acc / n as f64;
        }
        let m = means.iter().sum::<f64>() / QMC_SHIFTS as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / ((QMC_SHIFTS - 1) * QMC_SHIFTS) as f64;
        let err = QMC_ERROR_SCALE * var.sqrt();
        let value = m.clamp(0.0, 1.0);
        if err <= accuracy {
            return Ok(MvnEstimate { value, error: err });
        }
        if n >= QMC_MAX_POINTS {
            return Err(Error::AccuracyNotReached {
                target: accuracy,
                achieved: err,
                estimate: value,
            });
        }
        n *= 2;
    }
}
