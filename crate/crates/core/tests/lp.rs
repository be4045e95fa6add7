mod common;

use banditgap::analysis::projection_gap;
use banditgap::dp::{dp_exact, DEFAULT_STATE_CAP};
use banditgap::generate::{gap2, knapsack_appendix, RandomSpec};
use banditgap::lp::{self, build_knapsack_lp, build_poly_lp, build_poly_lp_nopreempt, expected_reward_table, Column, Constraint, LpStatus, Relation};
use banditgap::lp::simplex;
use banditgap::model::{Instance, KnapsackJob, Mode};
use banditgap::reduce::{jobs_to_arms, reduce};
use banditgap::{Rational, Scalar};
use proptest::prelude::*;

#[test]
fn one_variable_bound() {
    let row = Constraint { coeffs: vec![(0, 1.0)], relation: Relation::Le, rhs: 1.0, label: "cap".into() };
    let res = simplex::solve(1, &[1.0], &[row]);
    assert_eq!(res.status, LpStatus::Optimal);
    assert_eq!(res.objective, 1.0);
}

#[test]
fn gap_instance_knapsack_solution() {
    let inst: Instance<f64> = gap2(10).unwrap();
    let problem = build_knapsack_lp(inst.jobs.as_ref().unwrap(), inst.budget);
    let sol = problem.solve_certified().unwrap();
    assert!((sol.objective - 1.9).abs() < 1e-9);
    for (col, v) in problem.columns.iter().zip(&sol.values) {
        match *col {
            Column::JobX { job: 0, t } => assert!((v - if t == 1 { 1.0 } else { 0.0 }).abs() < 1e-9, "x0,{t} = {v}"),
            Column::JobX { job: 1, t } => assert!((v - if t == 1 { 0.0 } else { 0.1 }).abs() < 1e-9, "x1,{t} = {v}"),
            _ => {}
        }
    }
}

#[test]
fn gap_instance_arm_level_relaxation() {
    let inst: Instance<Rational> = gap2(10).unwrap();
    let sol = build_poly_lp_nopreempt(&reduce(&inst).unwrap()).unwrap().solve_certified().unwrap();
    assert_eq!(sol.objective, Rational::from_ratio(19, 10));
}

#[test]
fn appendix_relaxations() {
    let inst: Instance<f64> = knapsack_appendix();
    let jobs = inst.jobs.clone().unwrap();
    let committed = jobs_to_arms(&jobs, 10, false);
    let knap = build_knapsack_lp(&jobs, 10).solve_certified().unwrap().objective;
    let arm = build_poly_lp_nopreempt(&reduce(&committed).unwrap()).unwrap().solve_certified().unwrap().objective;
    assert!((knap - arm).abs() < 1e-6, "{knap} vs {arm}");
    // The cancel-only optimum is 11, so the no-preemption relaxation of the
    // cancellable arms must reach it.
    let mut cancel = inst.clone();
    cancel.mode = Mode::KnapsackCancel;
    let nopre = build_poly_lp_nopreempt(&reduce(&cancel).unwrap()).unwrap().solve_certified().unwrap().objective;
    assert!(nopre >= 11.0 - 1e-9, "{nopre}");
    let pre = build_poly_lp(&reduce(&inst).unwrap()).unwrap().solve_certified().unwrap().objective;
    assert!(pre >= 11.5 - 1e-9, "{pre}");
}

#[test]
fn degenerate_chain_terminates() {
    let jobs = vec![KnapsackJob::new(vec![(1, 0.5, 1.0), (2, 0.25, 1.0), (3, 0.25, 1.0)])];
    for mode in [Mode::Preemptive, Mode::NonPreemptive] {
        let mut inst: Instance<f64> = jobs_to_arms(&jobs, 6, true);
        inst.mode = mode;
        let problem = lp::build(&reduce(&inst).unwrap(), lp::default_variant(&inst)).unwrap();
        let sol = problem.solve_certified().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }
}

#[test]
fn scalar_types_agree_on_gap_instance() {
    let exact = build_knapsack_lp(gap2::<Rational>(5).unwrap().jobs.as_ref().unwrap(), 6).solve_certified().unwrap();
    let double = build_knapsack_lp(gap2::<f64>(5).unwrap().jobs.as_ref().unwrap(), 6).solve_certified().unwrap();
    let single = build_knapsack_lp(gap2::<f32>(5).unwrap().jobs.as_ref().unwrap(), 6).solve_certified().unwrap();
    assert_eq!(exact.objective, Rational::from_ratio(9, 5));
    assert!((double.objective - 1.8).abs() < 1e-12);
    assert!((single.objective - 1.8).abs() < 1e-5);
}

#[test]
fn expected_rewards_never_grow_with_later_starts() {
    let inst: Instance<Rational> = knapsack_appendix();
    for row in expected_reward_table(inst.jobs.as_ref().unwrap(), 10) {
        assert!(row.windows(2).all(|w| w[0] >= w[1]));
    }
}

fn job_strategy() -> impl Strategy<Value = Vec<KnapsackJob<f64>>> {
    prop::collection::vec(
        prop::collection::vec((1..=5usize, 0.05..1.0f64, 0.0..3.0f64), 1..=3).prop_map(|outs| {
            let total: f64 = outs.iter().map(|o| o.1).sum();
            KnapsackJob::new(outs.into_iter().map(|(s, p, r)| (s, p / total, r)).collect())
        }),
        1..=3,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn relaxation_bounds_the_optimum(spec in common::small_spec(3, 4, 5, 2)) {
        let inst = common::instance(&spec);
        let g = projection_gap(&inst, DEFAULT_STATE_CAP).unwrap();
        prop_assert!(g.lp_value >= g.dp_value - 1e-6, "lp {} dp {}", g.lp_value, g.dp_value);
        prop_assert!(g.ratio >= 1.0 - 1e-9);
    }

    #[test]
    fn primal_and_dual_agree(spec in common::small_spec(3, 5, 6, 3)) {
        let reduced = reduce(&common::instance(&spec)).unwrap();
        let problem = lp::build(&reduced, lp::default_variant(&reduced)).unwrap();
        let sol = problem.solve();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.objective - sol.dual_objective).abs() < 1e-7);
        prop_assert!(problem.max_violation(&sol.values) < 1e-9);
        let tables = lp::PolyTables::from_solution(&reduced, &problem, &sol).unwrap();
        let cert = banditgap::analysis::check_relaxation(&reduced, &tables, reduced.mode.is_preemptive());
        prop_assert!(cert < 1e-9);
    }

    #[test]
    fn scaling_rewards_scales_the_optimum(spec in common::small_spec(2, 4, 5, 2), c in 0.1..10.0f64) {
        let reduced = reduce(&common::instance(&spec)).unwrap();
        let mut scaled = reduced.clone();
        for node in scaled.arms.iter_mut().flat_map(|a| a.nodes.iter_mut()) {
            for r in &mut node.rewards {
                *r *= c;
            }
        }
        let base = lp::solve_tables(&reduced).unwrap().0.objective;
        let big = lp::solve_tables(&scaled).unwrap().0.objective;
        prop_assert!((big - c * base).abs() < 1e-8 * (1.0 + big));
    }

    #[test]
    fn job_and_arm_formulations_agree(jobs in job_strategy(), budget in 1..=6usize) {
        let knap = build_knapsack_lp(&jobs, budget).solve_certified().unwrap().objective;
        let arms = jobs_to_arms(&jobs, budget, false);
        let arm = build_poly_lp_nopreempt(&reduce(&arms).unwrap()).unwrap().solve_certified().unwrap().objective;
        prop_assert!((knap - arm).abs() < 1e-7, "job-level {knap} arm-level {arm}");
    }

    #[test]
    fn exact_and_float_solutions_agree(spec in common::small_spec(2, 3, 4, 1)) {
        let inst = common::instance(&spec);
        let exact: Instance<Rational> = inst.convert();
        let v64 = lp::solve_tables(&reduce(&inst).unwrap()).unwrap().0.objective;
        let vq = lp::solve_tables(&reduce(&exact).unwrap()).unwrap().0.objective;
        prop_assert!((vq.to_f64() - v64).abs() < 1e-9);
        prop_assert!((dp_exact(&exact).unwrap().value.to_f64() - dp_exact(&inst).unwrap().value).abs() < 1e-9);
    }
}

#[test]
fn random_two_arm_instance_dominates_dp() {
    let inst = common::instance(&RandomSpec::new(2, 4, 1, 4, 3, Mode::Preemptive));
    let lp = lp::solve_tables(&reduce(&inst).unwrap()).unwrap().0.objective;
    let dp = dp_exact(&inst).unwrap().value;
    assert!(lp >= dp - 1e-9);
}
