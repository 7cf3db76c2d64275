use std::time::Instant;

use brar::approx::{
    pps_gaussian, pps_numeric_integration, pps_repeated_sampling, pps_repeated_sampling_par, rs_error_bound,
    rs_mean_abs_error, PpsMethod,
};
use brar::exact::{pps_two_arm, run_path, Increment, SubsetTable, TrialState};
use brar::oc::{calibrate_pp, exact_ocs, forward_distribution, DEFAULT_STATE_CAP};
use brar::special::{mvn_cdf_at_origin, reg_inc_beta};
use brar::trial::{audit, simulate_trial, Allocation, AnalysisSchedule, DropRule, TrialDesign, Tuning};
use proptest::prelude::*;

fn path_strategy(k: usize, max_len: usize) -> impl Strategy<Value = Vec<Increment>> {
    prop::collection::vec((0..k, 0u8..2).prop_map(|(a, s)| Increment::new(a, s)), 0..=max_len)
}

fn arms_and_path(max_len: usize) -> impl Strategy<Value = (usize, Vec<Increment>)> {
    (2usize..=5).prop_flat_map(move |k| (Just(k), path_strategy(k, max_len)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singletons_sum_to_one_and_move_with_the_data((k, path) in arms_and_path(500)) {
        let mut table = SubsetTable::uniform(k).unwrap();
        let mut before = table.singletons();
        for inc in path {
            table.apply_increment(inc).unwrap();
            let after = table.singletons();
            prop_assert!((after.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for j in 0..k {
                let up = (j == inc.arm) == (inc.slot == 0);
                if up {
                    prop_assert!(after[j] > before[j], "arm {j} after {inc:?}: {} -> {}", before[j], after[j]);
                } else {
                    prop_assert!(after[j] < before[j], "arm {j} after {inc:?}: {} -> {}", before[j], after[j]);
                }
            }
            before = after;
        }
    }

    #[test]
    fn two_arm_paths_match_the_closed_form(path in path_strategy(2, 200)) {
        let priors = TrialState::uniform(2).unwrap();
        let rows = run_path(&priors, &path).unwrap();
        let mut state = priors;
        for (step, row) in rows.iter().enumerate() {
            if step > 0 {
                state.increment(path[step - 1]);
            }
            let want = pps_two_arm(state.arm(1), state.arm(0)).unwrap();
            prop_assert!((row[0] - want).abs() <= 1e-10, "{:?}: {} vs {want}", state, row[0]);
        }
    }

    #[test]
    fn reg_inc_beta_is_monotone(a in 0.5f64..60.0, b in 0.5f64..60.0) {
        let mut last = 0.0;
        for i in 0..=1000 {
            let v = reg_inc_beta(i as f64 * 1e-3, a, b).unwrap();
            prop_assert!(v >= last, "x = {}: {v} < {last}", i as f64 * 1e-3);
            last = v;
        }
    }

    #[test]
    fn mvn_with_a_fixed_seed_is_bitwise_repeatable(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        mean in prop::collection::vec(-1.0f64..1.0, 3),
        seed in any::<u64>(),
    ) {
        let mut cov = vec![0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                cov[r * 3 + c] = (0..3).map(|t| entries[r * 3 + t] * entries[c * 3 + t]).sum::<f64>() + if r == c { 0.1 } else { 0.0 };
            }
        }
        let a = mvn_cdf_at_origin(&mean, &cov, 1e-4, seed).unwrap();
        let b = mvn_cdf_at_origin(&mean, &cov, 1e-4, seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn two_arm_approximations_are_complementary(params in prop::collection::vec(1u32..150, 4)) {
        let state = TrialState::new(params).unwrap();
        let ga = pps_gaussian(&state, 0).unwrap() + pps_gaussian(&state, 1).unwrap();
        prop_assert_eq!(ga, 1.0);
        let acc = 1e-7;
        let ni = pps_numeric_integration(&state, 0, acc).unwrap() + pps_numeric_integration(&state, 1, acc).unwrap();
        prop_assert!((ni - 1.0).abs() <= 2.0 * acc);
        let rs = PpsMethod::repeated_sampling(2000, 9).probs(&state).unwrap();
        prop_assert!((rs[0] + rs[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn repeated_sampling_is_deterministic(
        params in prop::collection::vec(1u32..60, 6),
        j in 0usize..3,
        samples in 1u64..20_000,
        seed in any::<u64>(),
    ) {
        let state = TrialState::new(params).unwrap();
        let a = pps_repeated_sampling(&state, j, samples, seed).unwrap();
        prop_assert_eq!(a.to_bits(), pps_repeated_sampling(&state, j, samples, seed).unwrap().to_bits());
        prop_assert_eq!(a.to_bits(), pps_repeated_sampling_par(&state, j, samples, seed).unwrap().to_bits());
    }
}

#[test]
fn rs_mean_error_never_exceeds_its_bound() {
    for k in [100u64, 1000, 10_000] {
        let bound = rs_error_bound(k);
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let e = rs_mean_abs_error(p, k);
            assert!(e <= bound * (1.0 + 1e-12), "K={k} p={p}: {e} > {bound}");
        }
    }
}

/// Largest |GA - exact| over two-arm states whose allocations sum to `total`.
fn worst_ga_error(total: u32) -> f64 {
    let mut worst = 0.0f64;
    for n0 in 0..=total {
        let n1 = total - n0;
        for s0 in 0..=n0 {
            for s1 in 0..=n1 {
                let state = TrialState::new(vec![1 + s0, 1 + n0 - s0, 1 + s1, 1 + n1 - s1]).unwrap();
                let exact = pps_two_arm(state.arm(1), state.arm(0)).unwrap();
                worst = worst.max((pps_gaussian(&state, 0).unwrap() - exact).abs());
            }
        }
    }
    worst
}

#[test]
fn ga_worst_case_error_grows_with_the_sample_size() {
    let errors: Vec<f64> = (20..=120).step_by(20).map(worst_ga_error).collect();
    assert!(errors.windows(2).all(|w| w[1] >= w[0]), "{errors:?}");
    assert!(errors[errors.len() - 1] > 0.1, "{errors:?}");
}

fn small_designs() -> Vec<TrialDesign> {
    let eset_like = TrialDesign {
        arms: 3,
        max_patients: 30,
        priors: None,
        burn_in: 2,
        block_size: 3,
        analyses: AnalysisSchedule::EveryBlock,
        superiority_threshold: 0.95,
        inferiority_threshold: Some(0.95),
        drop_rule: Some(DropRule { response_floor: 0.4, confidence: 0.8 }),
        tuning: Tuning::VarianceScaling { power: 2 },
        allocation: Allocation::Probabilities { method: PpsMethod::Exact },
        test_method: PpsMethod::Exact,
    };
    vec![
        TrialDesign { analyses: AnalysisSchedule::EveryBlock, ..TrialDesign::sbrar(2, 25, 0.97) },
        TrialDesign { analyses: AnalysisSchedule::EveryBlock, ..TrialDesign::sbrar(4, 20, 0.9) },
        eset_like.clone(),
        eset_like.clone().with_method(PpsMethod::gaussian()),
        eset_like.with_method(PpsMethod::repeated_sampling(500, 3)),
        TrialDesign { allocation: Allocation::PosteriorDraw, burn_in: 1, ..TrialDesign::sbrar(3, 15, 0.9) },
    ]
}

fn scenario(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_trials_respect_the_allocation_rules(
        which in 0usize..6,
        p in scenario(4),
        seed in any::<u64>(),
    ) {
        let design = &small_designs()[which];
        let k = design.arms;
        let rec = simulate_trial(design, &p[..k], seed).unwrap();

        let burn = design.burn_in_patients() as usize;
        for (i, patient) in rec.patients.iter().enumerate() {
            if i < burn {
                prop_assert_eq!(patient.arm, i % k);
            }
            if let Some(probs) = rec.allocation_probs(i as u32) {
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{:?}", probs);
            }
        }
        if rec.patients.len() >= burn {
            let counts = rec.patients[..burn].iter().fold(vec![0u32; k], |mut c, p| { c[p.arm] += 1; c });
            prop_assert!(counts.iter().all(|&c| c == design.burn_in));
        }

        let mut dropped = vec![false; k];
        let mut analyses = rec.analyses.iter().peekable();
        for (i, patient) in rec.patients.iter().enumerate() {
            prop_assert!(!dropped[patient.arm], "patient {} went to dropped arm {}", i, patient.arm);
            while let Some(a) = analyses.next_if(|a| a.patients as usize == i + 1) {
                a.newly_dropped.iter().for_each(|&j| dropped[j] = true);
            }
        }

        prop_assert!(audit(design, &rec).unwrap());
    }

    #[test]
    fn exact_statistics_are_the_next_allocation(p in scenario(3), seed in any::<u64>(), k in 2usize..=3) {
        let design = TrialDesign { analyses: AnalysisSchedule::EveryBlock, ..TrialDesign::sbrar(k, 20, 0.999) };
        let rec = simulate_trial(&design, &p[..k], seed).unwrap();
        for a in &rec.analyses {
            if let Some(next) = rec.allocation_probs(a.patients).filter(|_| a.patients < rec.stopped_at) {
                prop_assert_eq!(next, &a.superiority[..]);
            }
        }
    }

    #[test]
    fn forward_mass_is_conserved(
        k in 2usize..=3,
        n in 1u32..=10,
        burn_in in 0u32..=2,
        block in 1u32..=3,
        c in 0.6f64..1.0,
        p in scenario(3),
    ) {
        let burn_in = burn_in.min(n / k as u32);
        let design = TrialDesign {
            burn_in,
            block_size: block,
            analyses: AnalysisSchedule::EveryBlock,
            drop_rule: Some(DropRule { response_floor: 0.4, confidence: 0.8 }),
            inferiority_threshold: Some(c),
            ..TrialDesign::sbrar(k, n, c)
        };
        let dist = forward_distribution(&design, &p[..k], None, DEFAULT_STATE_CAP).unwrap();
        prop_assert!((dist.total_mass() - 1.0).abs() <= 1e-10);
        prop_assert!(dist.terminal.iter().all(|t| t.mass >= 0.0));
    }
}

#[test]
fn ga_calibration_controls_ga_type_i_error() {
    for (arms, n, interim) in [(2, 12, Some(6)), (2, 16, None), (3, 8, Some(4))] {
        let mut d = TrialDesign::sbrar(arms, n, 0.9).with_method(PpsMethod::gaussian());
        if let Some(i) = interim {
            d.analyses = AnalysisSchedule::Points { points: vec![i] };
        }
        for (p, alpha) in [(0.5, 0.05), (0.3, 0.1)] {
            let cal = calibrate_pp(&d, p, alpha, DEFAULT_STATE_CAP).unwrap();
            let oc = exact_ocs(&d, &vec![p; arms], cal.threshold).unwrap();
            assert!(oc.rejection_rate <= alpha + 1e-12, "{d:?} p={p}: {}", oc.rejection_rate);
        }
    }
}

#[test]
fn exact_calibration_never_rejects_more_than_alpha() {
    let d = TrialDesign { analyses: AnalysisSchedule::EveryBlock, block_size: 4, ..TrialDesign::sbrar(2, 16, 0.9) };
    for alpha in [0.01, 0.05, 0.2] {
        let cal = calibrate_pp(&d, 0.5, alpha, DEFAULT_STATE_CAP).unwrap();
        let oc = exact_ocs(&d, &[0.5, 0.5], cal.threshold).unwrap();
        assert!(oc.rejection_rate <= alpha + 1e-12);
        assert!(oc.futility_rate == 0.0);
        assert!(oc.type_i_error().is_some());
    }
}

/// Fastest of several timings, in seconds per increment, of `run_path` over `len` increments.
fn per_step_cost(len: usize) -> f64 {
    let k = 4;
    let path: Vec<Increment> = (0..len).map(|i| Increment::new(i * 7 % k, (i % 3 == 0) as u8)).collect();
    let priors = TrialState::uniform(k).unwrap();
    let reps = 20_000 / len;
    let mut times: Vec<f64> = (0..15)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(run_path(&priors, &path).unwrap());
            }
            t.elapsed().as_secs_f64() / (reps * len) as f64
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[0]
}

#[test]
fn run_path_cost_is_linear_in_length() {
    per_step_cost(100);
    let costs: Vec<f64> = [100, 200, 400].into_iter().map(per_step_cost).collect();
    let mean = costs.iter().sum::<f64>() / 3.0;
    assert!(costs.iter().all(|c| (c - mean).abs() <= 0.2 * mean), "{costs:?}");
}
