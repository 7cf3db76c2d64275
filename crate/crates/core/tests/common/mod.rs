//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use brar::exact::{Increment, TrialState};
use brar::oc::{calibrate_pp, exact_ocs, DEFAULT_STATE_CAP};
use brar::recommend::{AnalysisFrequency, BurnInLength, Priority};
use brar::approx::PpsMethod;
use brar::trial::{
    allocation_probs, evaluate_tests, Allocation, AnalysisSchedule, Decision, DropRule, TrialDesign, Tuning,
};

#[derive(Debug, Default)]
pub struct Tally {
    pub rejection: f64,
    pub power: f64,
    pub futility: f64,
    pub sample_size: f64,
    pub credited: f64,
    pub credited_sq: f64,
}

/// Operating characteristics by enumerating every patient trajectory.
pub struct Oracle<'a> {
    design: TrialDesign,
    true_p: &'a [f64],
    points: Vec<u32>,
    superior: usize,
    tally: Tally,
}

fn unique_best(p: &[f64]) -> usize {
    let m = p.iter().cloned().fold(f64::MIN, f64::max);
    let at: Vec<usize> = (0..p.len()).filter(|&j| p[j] == m).collect();
    if at.len() == 1 {
        at[0]
    } else {
        0
    }
}

fn unique_worst(p: &[f64]) -> Option<usize> {
    let m = p.iter().cloned().fold(f64::MAX, f64::min);
    let at: Vec<usize> = (0..p.len()).filter(|&j| p[j] == m).collect();
    (at.len() == 1).then(|| at[0])
}

fn live_only(mut law: Vec<f64>, dropped: &[bool]) -> Vec<f64> {
    law.iter_mut().zip(dropped).filter(|(_, &d)| d).for_each(|(v, _)| *v = 0.0);
    let s: f64 = law.iter().sum();
    if s > 0.0 {
        law.iter_mut().for_each(|v| *v /= s);
        law
    } else {
        let live = dropped.iter().filter(|&&d| !d).count().max(1) as f64;
        dropped.iter().map(|&d| if d { 0.0 } else { 1.0 / live }).collect()
    }
}

impl<'a> Oracle<'a> {
    pub fn new(design: &TrialDesign, true_p: &'a [f64], c: f64) -> Self {
        let design = design.clone().with_threshold(c);
        let points = design.analysis_points();
        let superior = unique_best(true_p);
        Self { design, true_p, points, superior, tally: Tally::default() }
    }

    fn finish(&mut self, mass: f64, on_superior: u32, stopped_at: u32, decision: Decision) {
        let n = self.design.max_patients;
        let t = &mut self.tally;
        let mut credit = on_superior;
        match decision {
            Decision::Reject(claim) => {
                t.rejection += mass;
                let truly_best = (0..self.true_p.len()).filter(|&j| self.true_p[j] == self.true_p[self.superior]).count() == 1;
                let best_ok = truly_best && claim.best == Some(self.superior);
                let worst_ok = claim.worst.is_some() && claim.worst == unique_worst(self.true_p);
                if best_ok || worst_ok {
                    t.power += mass;
                }
                if claim.best == Some(self.superior) {
                    credit += n - stopped_at;
                }
            }
            Decision::Futility => t.futility += mass,
            Decision::Continue => {}
        }
        t.sample_size += mass * stopped_at as f64;
        t.credited += mass * credit as f64;
        t.credited_sq += mass * (credit as f64).powi(2);
    }

    fn walk(&mut self, i: u32, state: &TrialState, dropped: &[bool], law: &[f64], mass: f64, on_superior: u32) {
        let k = self.design.arms;
        let burn = self.design.burn_in_patients();
        let law: Vec<f64> = if i < burn {
            (0..k).map(|j| if j == i as usize % k { 1.0 } else { 0.0 }).collect()
        } else if (i - burn) % self.design.block_size == 0 {
            allocation_probs(&self.design, state, dropped).unwrap()
        } else {
            law.to_vec()
        };
        for arm in 0..k {
            if law[arm] <= 0.0 {
                continue;
            }
            for (slot, q) in [(0u8, self.true_p[arm]), (1u8, 1.0 - self.true_p[arm])] {
                if q <= 0.0 {
                    continue;
                }
                let m = mass * law[arm] * q;
                let next = state.incremented(Increment::new(arm, slot));
                let on = on_superior + u32::from(arm == self.superior);
                let seen = i + 1;
                let final_analysis = seen == self.design.max_patients;
                let mut dropped = dropped.to_vec();
                let mut law_next = law.clone();
                if self.points.contains(&seen) {
                    let out = evaluate_tests(&self.design, &next, &dropped, final_analysis).unwrap();
                    if matches!(out.decision, Decision::Reject(_) | Decision::Futility) || final_analysis {
                        self.finish(m, on, seen, out.decision);
                        continue;
                    }
                    out.newly_dropped.iter().for_each(|&j| dropped[j] = true);
                    if !out.newly_dropped.is_empty() && seen > burn {
                        law_next = live_only(law_next, &dropped);
                    }
                }
                self.walk(seen, &next, &dropped, &law_next, m, on);
            }
        }
    }

    pub fn run(mut self) -> Tally {
        let priors = self.design.priors();
        let k = self.design.arms;
        if self.design.max_patients > 0 {
            self.walk(0, &priors, &vec![false; k], &vec![0.0; k], 1.0, 0);
        }
        self.tally
    }
}

/// Largest absolute difference between the forward equations and the
/// enumeration over the six characteristics.
pub fn oracle_gap(design: &TrialDesign, true_p: &[f64], c: f64) -> f64 {
    let got = exact_ocs(design, true_p, c).unwrap();
    let want = Oracle::new(design, true_p, c).run();
    let vpasa = want.credited_sq - want.credited.powi(2);
    [
        (got.rejection_rate, want.rejection),
        (got.power, want.power),
        (got.futility_rate, want.futility),
        (got.expected_sample_size, want.sample_size),
        (got.epasa, want.credited),
        (got.vpasa, vpasa.max(0.0)),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs())
    .fold(0.0, f64::max)
}

/// Final analysis only, and when there is room, one interim halfway.
pub fn schedules(n: u32) -> Vec<AnalysisSchedule> {
    let mut v = vec![AnalysisSchedule::FinalOnly];
    if n >= 2 {
        v.push(AnalysisSchedule::Points { points: vec![n / 2] });
    }
    v
}

/// Three arms with burn-in, blocks, interim dropping, tuning and worst-arm
/// claims, small enough to enumerate.
pub fn small_eset() -> TrialDesign {
    TrialDesign {
        arms: 3,
        max_patients: 6,
        priors: None,
        burn_in: 1,
        block_size: 2,
        analyses: AnalysisSchedule::EveryBlock,
        superiority_threshold: 0.8,
        inferiority_threshold: Some(0.8),
        drop_rule: Some(DropRule { response_floor: 0.5, confidence: 0.7 }),
        tuning: Tuning::VarianceScaling { power: 2 },
        allocation: Allocation::Probabilities { method: PpsMethod::Exact },
        test_method: PpsMethod::Exact,
    }
}

/// Designs, response vectors and thresholds covering two arms up to six
/// patients and three arms up to four, with and without an interim analysis.
pub fn oracle_suite() -> Vec<(TrialDesign, Vec<f64>, f64)> {
    let mut cases = Vec::new();
    for n in 1..=6 {
        for analyses in schedules(n) {
            for c in [0.6, 0.8, 0.95] {
                let d = TrialDesign { analyses: analyses.clone(), ..TrialDesign::sbrar(2, n, c) };
                for p in [vec![0.5, 0.5], vec![0.3, 0.7], vec![0.9, 0.2]] {
                    cases.push((d.clone(), p, c));
                }
            }
        }
    }
    for n in 1..=4 {
        for analyses in schedules(n) {
            for c in [0.5, 0.7, 0.9] {
                let d = TrialDesign { analyses: analyses.clone(), ..TrialDesign::sbrar(3, n, c) };
                for p in [vec![0.5, 0.5, 0.5], vec![0.2, 0.5, 0.8], vec![0.7, 0.7, 0.1]] {
                    cases.push((d.clone(), p, c));
                }
            }
        }
    }
    for p in [vec![0.5, 0.5, 0.5], vec![0.2, 0.4, 0.8], vec![0.1, 0.1, 0.1]] {
        cases.push((small_eset(), p, 0.8));
    }
    cases
}

pub fn calibration_suite() -> Vec<(TrialDesign, f64, f64)> {
    vec![
        (TrialDesign { analyses: AnalysisSchedule::Points { points: vec![3] }, ..TrialDesign::sbrar(2, 6, 0.9) }, 0.5, 0.1),
        (TrialDesign::sbrar(2, 6, 0.9), 0.3, 0.2),
        (TrialDesign::sbrar(2, 4, 0.9), 0.5, 0.05),
        (TrialDesign::sbrar(3, 4, 0.9), 0.5, 0.15),
        (small_eset(), 0.4, 0.1),
    ]
}

/// The calibrated threshold keeps the enumerated type I error within `alpha`
/// and the next attainable value below it does not.
pub fn check_calibration(d: &TrialDesign, p: f64, alpha: f64) -> Result<(), String> {
    let cal = calibrate_pp(d, p, alpha, DEFAULT_STATE_CAP).map_err(|e| e.to_string())?;
    let null = vec![p; d.arms];
    let at = Oracle::new(d, &null, cal.threshold).run().rejection;
    if at > alpha + 1e-12 || (at - cal.type_i_error).abs() >= 1e-9 {
        return Err(format!("type I error {at} (reported {}) at {} for alpha {alpha}", cal.type_i_error, cal.threshold));
    }
    if let Some((lower, err)) = cal.next_lower {
        let below = Oracle::new(d, &null, lower).run().rejection;
        if lower >= cal.threshold || below <= alpha || (below - err).abs() >= 1e-9 {
            return Err(format!("next lower {lower} gives {below} (reported {err}) for alpha {alpha}"));
        }
    }
    Ok(())
}

/// The recommendation table cell by cell, with a representative arm count
/// for each band: 2 for up to 7 arms, 8 for 8 to 12, 13 for 13 or more.
pub fn recommendation_table() -> Vec<(usize, AnalysisFrequency, BurnInLength, Priority, &'static str)> {
    use AnalysisFrequency::*;
    use BurnInLength::*;
    use Priority::*;
    let columns = [(Infrequent, Longer), (Infrequent, Shorter), (Frequent, Longer), (Frequent, Shorter)];
    let rows: [(usize, Priority, [&str; 4]); 9] = [
        (2, Acc, ["Exact", "Exact", "Exact", "Exact"]),
        (2, Mix, ["GA", "Exact", "Exact", "Exact"]),
        (2, Comp, ["GA", "Exact/GA", "Exact/GA", "Exact"]),
        (8, Acc, ["Exact", "Exact", "Exact", "Exact"]),
        (8, Mix, ["RS", "Exact", "Exact", "Exact"]),
        (8, Comp, ["RS", "Exact/RS", "Exact/RS", "Exact"]),
        (13, Acc, ["Exact", "Exact", "Exact", "Exact"]),
        (13, Mix, ["RS", "RS", "RS", "Exact/RS"]),
        (13, Comp, ["RS", "RS", "RS", "RS"]),
    ];
    let mut cells = Vec::new();
    for (k, p, methods) in rows {
        for ((f, b), m) in columns.into_iter().zip(methods) {
            cells.push((k, f, b, p, m));
        }
    }
    cells
}

/// Arm counts covered by the band whose representative is `k`.
pub fn arm_band(k: usize) -> Vec<usize> {
    match k {
        2 => (2..=7).collect(),
        8 => (8..=12).collect(),
        _ => vec![13, 14, 20, 64],
    }
}
