use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BenchRow;
use crate::error::{Error, Result};
use crate::recommend::Backend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub machine: String,
    /// Seconds since the Unix epoch when the fit was made.
    pub fitted_at: u64,
    pub repetitions: usize,
}

/// Per-backend cost constants for the maximal computation time of a trial
/// that never stops early:
///
/// * exact: `n * exact[k]` (seconds per patient),
/// * GA: `ceil((n - k B) / b) * ga[k]` (seconds per update),
/// * RS: `ceil((n - k B) / b) * K * rs` (seconds per draw).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeModel {
    pub exact: BTreeMap<usize, f64>,
    pub ga: BTreeMap<usize, f64>,
    pub rs: f64,
    pub meta: FitMetadata,
}

/// Least-squares line `ln y = slope * k + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAffineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogAffineFit {
    pub fn fit(table: &BTreeMap<usize, f64>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::InsufficientData("a log-affine fit needs two arm counts".into()));
        }
        let m = table.len() as f64;
        let xs: Vec<f64> = table.keys().map(|&k| k as f64).collect();
        let ys: Vec<f64> = table.values().map(|v| v.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Ok(Self { slope, intercept: my - slope * mx, r_squared })
    }

    pub fn eval(&self, k: usize) -> f64 {
        (self.slope * k as f64 + self.intercept).exp()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl RuntimeModel {
    /// Constants fitted from benchmark rows: exact per-patient cost from
    /// `exact_path` rows, GA and RS from `update` rows. Several rows for the
    /// same arm count are combined by their median.
    pub fn fit(rows: &[BenchRow]) -> Result<Self> {
        let mut exact: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut ga: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut rs = Vec::new();
        for r in rows {
            match (r.case.as_str(), r.method.as_str()) {
                ("exact_path", "exact") if r.patients > 0 => {
                    exact.entry(r.arms).or_default().push(r.median_seconds / r.patients as f64)
                }
                ("update", "ga") => ga.entry(r.arms).or_default().push(r.median_seconds),
                ("update", "rs") if r.samples > 0 => rs.push(r.median_seconds / r.samples as f64),
                _ => {}
            }
        }
        if exact.is_empty() || ga.is_empty() || rs.is_empty() {
            return Err(Error::InsufficientData(
                "the fit needs exact_path rows and update rows for both ga and rs".into(),
            ));
        }
        let collapse = |m: BTreeMap<usize, Vec<f64>>| -> BTreeMap<usize, f64> {
            m.into_iter().map(|(k, v)| (k, median(v))).collect()
        };
        let model = Self {
            exact: collapse(exact),
            ga: collapse(ga),
            rs: median(rs),
            meta: FitMetadata {
                machine: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
                fitted_at: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                repetitions: rows.iter().map(|r| r.repetitions).max().unwrap_or(0),
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// Published constants for the reference hardware; only the functional
    /// form transfers to other machines.
    pub fn reference_hardware() -> Self {
        let neg_log_exact = [(2, 10.8), (3, 10.0), (4, 9.32), (5, 8.54), (6, 7.73), (7, 6.87), (8, 6.05), (12, 2.83), (13, 2.03)];
        let neg_log_ga = [(2, 8.93), (3, 8.60), (4, 5.92), (5, 4.74), (6, 3.83), (7, 2.71), (8, 1.94)];
        let table = |v: &[(usize, f64)]| v.iter().map(|&(k, y)| (k, (-y).exp())).collect();
        Self {
            exact: table(&neg_log_exact),
            ga: table(&neg_log_ga),
            rs: 7e-4,
            meta: FitMetadata { machine: "reference hardware".into(), fitted_at: 0, repetitions: 100 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(self.exact.values().all(|&v| ok(v)) && self.ga.values().all(|&v| ok(v)) && ok(self.rs)) {
            return Err(Error::Config("runtime constants must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn exact_fit(&self) -> Result<LogAffineFit> {
        LogAffineFit::fit(&self.exact)
    }

    fn lookup(table: &BTreeMap<usize, f64>, k: usize) -> Result<f64> {
        match table.get(&k) {
            Some(&v) => Ok(v),
            None => LogAffineFit::fit(table).map(|f| f.eval(k)),
        }
    }

    /// Predicted maximal computation time, in seconds, for one trial.
    /// Arm counts missing from a table are extrapolated log-affinely.
    pub fn predict(&self, backend: Backend, n: u32, k: usize, burn_in: u32, block: u32, samples: u64) -> Result<f64> {
        if block == 0 {
            return Err(Error::Domain("block size must be positive".into()));
        }
        let updates = (n as u64).saturating_sub(k as u64 * burn_in as u64).div_ceil(block as u64) as f64;
        Ok(match backend {
            Backend::Exact => n as f64 * Self::lookup(&self.exact, k)?,
            Backend::Ga => updates * Self::lookup(&self.ga, k)?,
            Backend::Rs => updates * samples as f64 * self.rs,
        })
    }
}
