mod common;

use std::sync::Arc;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stl_causation::{
    parse_formula, robustness, three_valued, BcaumState, CausationVerdict, ClamState, DomainBounds,
    Formula, Plan, QcaumState, RobustnessInterval, Trace, Verdict, WindowKernel,
};

fn compile(f: &Formula, trace: &Trace, bounds: &DomainBounds) -> Arc<Plan> {
    Arc::new(Plan::compile(f, trace.step(), trace.variables(), bounds, 0).expect("compiles"))
}

fn clam_run(f: &Formula, trace: &Trace, kernel: WindowKernel) -> Vec<RobustnessInterval> {
    let mut m = ClamState::with_kernel(compile(f, trace, &DomainBounds::new()), kernel);
    (0..trace.len())
        .map(|b| m.step(&trace.view(b).unwrap()).unwrap())
        .collect()
}

fn bounds() -> DomainBounds {
    DomainBounds::new()
        .with("x", -4.0, 4.0)
        .with("y", -4.0, 4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(f in common::formula(4, 6)) {
        let f = f.number_atoms();
        let back = parse_formula(&f.to_string(), &["x", "y"]).unwrap().number_atoms();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn interval_matches_direct_prefix_evaluation(
        f in common::formula(3, 3),
        trace in common::trace(1, 14),
        bounded in any::<bool>(),
    ) {
        let b = if bounded { bounds() } else { DomainBounds::new() };
        let plan = compile(&f, &trace, &b);
        let g = plan.formula().clone();
        let mut m = ClamState::new(Arc::clone(&plan));
        for k in 0..trace.len() {
            let i = m.step(&trace.view(k).unwrap()).unwrap();
            let (lo, up) = common::prefix_interval(&trace, &g, k, 0);
            prop_assert_eq!((i.lower, i.upper), (lo, up), "step {}", k);
        }
    }

    #[test]
    fn distances_match_direct_evaluation(
        f in common::formula(3, 3),
        trace in common::trace(1, 12),
        bounded in any::<bool>(),
    ) {
        let b = if bounded { bounds() } else { DomainBounds::new() };
        let plan = compile(&f, &trace, &b);
        let g = plan.formula().clone();
        let mut m = QcaumState::new(Arc::clone(&plan));
        for k in 0..trace.len() {
            let o = m.step(&trace.view(k).unwrap()).unwrap();
            prop_assert_eq!(o.vio_distance, common::vio_distance(&trace, &g, k, 0), "vio at {}", k);
            prop_assert_eq!(o.sat_distance, common::sat_distance(&trace, &g, k, 0), "sat at {}", k);
        }
    }

    #[test]
    fn always_is_dual_of_eventually(f in common::formula(2, 3), trace in common::trace(1, 16), l in 0usize..3, w in 0usize..3) {
        let i = stl_causation::TimeInterval::new(l as f64, (l + w) as f64).unwrap();
        let alw = Formula::always(i, f.clone());
        let dual = Formula::not(Formula::eventually(i, Formula::not(f)));
        prop_assert_eq!(
            clam_run(&alw, &trace, WindowKernel::Deque),
            clam_run(&dual, &trace, WindowKernel::Deque)
        );
    }

    #[test]
    fn eventually_is_true_until(f in common::formula(2, 3), trace in common::trace(1, 16), l in 0usize..3, w in 0usize..3) {
        let i = stl_causation::TimeInterval::new(l as f64, (l + w) as f64).unwrap();
        let ev = Formula::eventually(i, f.clone());
        let until = Formula::until(i, Formula::truth(), f);
        prop_assert_eq!(
            clam_run(&ev, &trace, WindowKernel::Deque),
            clam_run(&until, &trace, WindowKernel::Deque)
        );
        if let Ok(r) = robustness(&trace, &ev, 0) {
            prop_assert_eq!(r, robustness(&trace, &until, 0).unwrap());
        }
    }

    #[test]
    fn naive_and_deque_kernels_agree(f in common::formula(3, 5), trace in common::trace(1, 30)) {
        prop_assert_eq!(
            clam_run(&f, &trace, WindowKernel::Naive),
            clam_run(&f, &trace, WindowKernel::Deque)
        );
    }

    #[test]
    fn bounded_history_gives_identical_outputs(f in common::formula(3, 4), full in common::trace(1, 30)) {
        let plan = compile(&f, &full, &DomainBounds::new());
        let mut a = QcaumState::new(Arc::clone(&plan));
        let mut b = QcaumState::new(plan);
        let mut live = Trace::new(1.0, ["x", "y"]).unwrap().with_retention(0);
        for k in 0..full.len() {
            live.append(full.sample(k).unwrap().to_vec()).unwrap();
            let x = a.step(&full.view(k).unwrap()).unwrap();
            let y = b.step(&live.full_view().unwrap()).unwrap();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn verdicts_agree_with_kleene_evaluation(f in common::formula(3, 4), trace in common::trace(1, 20)) {
        let intervals = clam_run(&f, &trace, WindowKernel::Deque);
        for (k, i) in intervals.iter().enumerate() {
            let kleene = three_valued(&trace, &f, k + 1, 0);
            let expected = match kleene {
                Some(true) => Verdict::True,
                Some(false) => Verdict::False,
                None => Verdict::Unknown,
            };
            prop_assert_eq!(i.verdict(), expected, "step {}", k);
        }
    }

    #[test]
    fn bcaum_history_matches_classic_verdict(f in common::formula(3, 4), trace in common::trace(1, 24)) {
        let plan = compile(&f, &trace, &DomainBounds::new());
        let mut clam = ClamState::new(Arc::clone(&plan));
        let mut bcaum = BcaumState::new(plan);
        let (mut vio, mut sat) = (false, false);
        for k in 0..trace.len() {
            let view = trace.view(k).unwrap();
            let verdict = clam.step(&view).unwrap().verdict();
            match bcaum.step(&view).unwrap() {
                CausationVerdict::Violation => vio = true,
                CausationVerdict::Satisfaction => sat = true,
                CausationVerdict::Irrelevant => {}
            }
            let expected = match (vio, sat) {
                (true, false) => Verdict::False,
                (false, true) => Verdict::True,
                _ => Verdict::Unknown,
            };
            prop_assert!(!(vio && sat));
            prop_assert_eq!(verdict, expected, "step {}", k);
        }
    }
}

/// Every completion of a prefix has robustness inside the prefix interval.
#[test]
fn completions_stay_inside_interval() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = (common::formula(3, 4), common::trace(1, 12));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..60 {
        let (f, prefix) = strategy.new_tree(&mut runner).unwrap().current();
        let h = f.horizon_samples(1.0).unwrap();
        let b = prefix.len() - 1;
        let intervals = clam_run(&f, &prefix, WindowKernel::Deque);
        let interval = intervals[b];
        for _ in 0..100 {
            let mut full = prefix.clone();
            while full.len() < h + 1 {
                let x = rng.gen_range(-4.0..4.0);
                let y = rng.gen_range(-4.0..4.0);
                full.append(vec![x, y]).unwrap();
            }
            let r = robustness(&full, &f, 0).unwrap();
            assert!(interval.contains(r), "{f}: {r} outside {interval} at b={b}");
        }
    }
}
