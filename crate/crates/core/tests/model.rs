mod common;

use banditgap::dp::{dp_exact, evaluate_policy, Choice, JointModel, JointPolicy, DEFAULT_STATE_CAP};
use banditgap::generate::{gap2, knapsack_appendix, random, RandomSpec};
use banditgap::io::{parse_instance, to_json};
use banditgap::model::{validate, Arm, Instance, KnapsackJob, Mode, Node, Transition};
use banditgap::reduce::{expand_bridges, jobs_to_arms, layer, reduce};
use banditgap::{Error, Rational, Scalar};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

#[test]
fn appendix_jobs_validate() {
    assert!(validate(&knapsack_appendix::<Rational>()).is_empty());
    let mut cancel = knapsack_appendix::<Rational>();
    cancel.mode = Mode::KnapsackCancel;
    assert!(validate(&cancel).is_empty());
}

#[test]
fn size_four_job_puts_reward_on_third_bridge() {
    let inst = jobs_to_arms(&[KnapsackJob::new(vec![(4, q(1, 1), q(8, 1))])], 10, false);
    let expanded = expand_bridges(&inst).unwrap();
    let arm = &expanded.arms[0];
    let bridges: Vec<&Node<Rational>> = arm.nodes.iter().filter(|n| n.is_bridge).collect();
    assert_eq!(bridges.len(), 3);
    assert!(bridges[..2].iter().all(|b| b.rewards[0] == q(0, 1)));
    assert_eq!(bridges[2].rewards[0], q(8, 1));
    assert!(expanded.is_unit_time());
    assert_eq!(arm.nodes[arm.root].rewards[0], q(0, 1));
}

#[test]
fn expanding_twice_is_rejected_only_with_long_transitions_left() {
    let inst = jobs_to_arms(&[KnapsackJob::new(vec![(3, q(1, 1), q(1, 1))])], 5, false);
    let once = expand_bridges(&inst).unwrap();
    assert_eq!(expand_bridges(&once).unwrap(), once);
    let mut mixed = once.clone();
    mixed.arms[0].nodes[0].transitions[0][0].time = 2;
    assert!(matches!(expand_bridges(&mixed), Err(Error::AlreadyExpanded)));
}

#[test]
fn gap_job_layers_into_caterpillar() {
    let inst: Instance<Rational> = gap2(3).unwrap();
    let mut first = inst.clone();
    first.arms.truncate(1);
    let layered = reduce(&first).unwrap();
    let arm = &layered.arms[0];
    let depths: Vec<usize> = arm.nodes.iter().map(|n| n.depth.unwrap()).collect();
    assert_eq!(*depths.iter().max().unwrap(), 4);
    let children: Vec<usize> = arm.nodes[arm.root].transitions[0].iter().map(|t| t.to).collect();
    assert_eq!(children.len(), 2);
    assert!(children.iter().all(|&c| depths[c] == 1));
    // One branch stops at depth 1, the other runs the full spine.
    assert!(children.iter().any(|&c| arm.nodes[c].is_leaf()));
    for node in &arm.nodes {
        for tr in node.transitions.iter().flatten() {
            assert_eq!(depths[tr.to], node.depth.unwrap() + 1);
        }
    }
}

#[test]
fn layered_arm_is_a_fixed_point() {
    let spec = RandomSpec::new(2, 4, 2, 5, 11, Mode::Preemptive);
    let inst = random(&spec).unwrap();
    let once = reduce(&inst).unwrap();
    let twice = layer(&once).unwrap();
    for (a, b) in once.arms.iter().zip(&twice.arms) {
        assert_eq!(a.nodes.len(), b.nodes.len());
        let da: Vec<_> = a.nodes.iter().map(|n| n.depth).collect();
        let db: Vec<_> = b.nodes.iter().map(|n| n.depth).collect();
        assert_eq!(da, db);
    }
}

#[test]
fn empty_job_list() {
    let inst: Instance<f64> = jobs_to_arms(&[], 4, false);
    assert!(inst.arms.is_empty());
    assert_eq!(dp_exact(&inst).unwrap().value, 0.0);
}

#[test]
fn gap_jobs_become_two_arms() {
    let inst: Instance<Rational> = gap2(10).unwrap();
    assert_eq!(inst.arms.len(), 2);
    assert_eq!(inst.budget, 11);
    assert_eq!(inst.mode, Mode::KnapsackNoCancel);
    let root = &inst.arms[0].nodes[0];
    let mut outcomes: Vec<(usize, Rational, Rational)> =
        root.transitions[0].iter().map(|t| (t.time, t.prob.clone(), t.completion_reward.clone())).collect();
    outcomes.sort();
    assert_eq!(outcomes, vec![(1, q(1, 10), q(0, 1)), (11, q(9, 10), q(1, 1))]);
}

#[test]
fn file_format_round_trips_and_accepts_fractions() {
    let text = r#"{
        "budget": 3, "mode": "preemptive", "actions": ["alpha"],
        "arms": [{"root": "r", "nodes": [
            {"id": "r", "rewards": {"alpha": 1},
             "transitions": {"alpha": [{"to": "e", "time": 2, "prob": {"num": 1, "den": 3}, "reward_on_completion": 2},
                                       {"to": "e", "prob": {"num": 2, "den": 3}}]}},
            {"id": "e"}]}]
    }"#;
    let inst: Instance<Rational> = parse_instance(text).unwrap();
    assert!(validate(&inst).is_empty());
    let tr = &inst.arms[0].nodes[0].transitions[0][0];
    assert_eq!((tr.time, tr.prob.clone(), tr.completion_reward.clone()), (2, q(1, 3), q(2, 1)));
    let back: Instance<Rational> = parse_instance(&to_json(&inst)).unwrap();
    assert_eq!(back, inst);
    let jobs: Instance<Rational> =
        parse_instance(r#"{"budget": 11, "mode": "knapsack-nocancel", "jobs": [{"outcomes": [{"size": 1, "prob": 1, "reward": 1}]}]}"#)
            .unwrap();
    assert_eq!(jobs.arms.len(), 1);
}

/// Plays arm 0 every step with an action chosen by hashing the node id, so
/// the same decisions are made before and after bridge expansion.
struct PullSequence;

impl<S: Scalar> JointPolicy<S> for PullSequence {
    fn decide(&self, model: &JointModel<S>, nodes: &[usize], _t: usize) -> Vec<(Choice, S)> {
        let node = &model.instance.arms[0].nodes[nodes[0]];
        let available: Vec<usize> = node.available_actions().collect();
        if available.is_empty() {
            return vec![(Choice::Idle, S::one())];
        }
        if node.is_bridge {
            return vec![(Choice::Play { arm: 0, action: 0 }, S::one())];
        }
        let h = node.id.bytes().fold(7usize, |h, b| h.wrapping_mul(31).wrapping_add(b as usize));
        vec![(Choice::Play { arm: 0, action: available[h % available.len()] }, S::one())]
    }
}

fn completion_rewards(mut inst: Instance<f64>, seed: u64) -> Instance<f64> {
    let mut k = seed;
    for arm in &mut inst.arms {
        for node in &mut arm.nodes {
            for tr in node.transitions.iter_mut().flatten() {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                tr.completion_reward = (k >> 40) as f64 / (1u64 << 24) as f64;
            }
        }
    }
    inst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_preserves_the_optimum(spec in common::small_spec(3, 4, 6, 3), cr in any::<bool>()) {
        let mut inst = common::instance(&spec);
        if cr {
            inst = completion_rewards(inst, spec.seed);
        }
        let raw = dp_exact(&inst).unwrap().value;
        let reduced = dp_exact(&reduce(&inst).unwrap()).unwrap().value;
        prop_assert!((raw - reduced).abs() < 1e-9, "raw {raw} reduced {reduced}");
    }

    #[test]
    fn layering_stays_within_node_budget(spec in common::small_spec(3, 6, 8, 1)) {
        let inst = common::instance(&spec);
        let layered = layer(&inst).unwrap();
        for (a, b) in inst.arms.iter().zip(&layered.arms) {
            // Copies at depths below the budget plus one sink.
            prop_assert!(b.nodes.len() <= a.nodes.len() * inst.budget + 1);
        }
        prop_assert!(validate(&layered).is_empty());
    }

    #[test]
    fn expansion_preserves_fixed_pull_sequences(spec in common::small_spec(1, 5, 7, 4), cr in any::<bool>()) {
        let mut inst = common::instance(&spec);
        inst.mode = Mode::Preemptive;
        if cr {
            inst = completion_rewards(inst, spec.seed ^ 5);
        }
        let expanded = expand_bridges(&inst).unwrap();
        let raw = evaluate_policy(&JointModel::new(&inst, DEFAULT_STATE_CAP).unwrap(), &PullSequence);
        let exp = evaluate_policy(&JointModel::new(&expanded, DEFAULT_STATE_CAP).unwrap(), &PullSequence);
        prop_assert!((raw - exp).abs() < 1e-9, "raw {raw} expanded {exp}");
    }

    #[test]
    fn random_instances_validate(spec in common::small_spec(3, 6, 8, 3)) {
        prop_assert!(validate(&common::instance(&spec)).is_empty());
    }
}

#[test]
fn chain_arm_with_explicit_nodes() {
    let mut root = Node::<f64>::new("r", 1);
    root.rewards[0] = 1.0;
    root.transitions[0].push(Transition { to: 0, time: 1, prob: 1.0, completion_reward: 0.0 });
    let inst = Instance {
        arms: vec![Arm { nodes: vec![root], root: 0, terminal: None }],
        actions: vec!["alpha".into()],
        budget: 3,
        mode: Mode::Preemptive,
        jobs: None,
    };
    let layered = layer(&inst).unwrap();
    let ids: Vec<&str> = layered.arms[0].nodes.iter().map(|n| n.id.as_str()).collect();
    assert_eq!(ids, vec!["r@0", "r@1", "r@2", "sink0@3"]);
    assert_eq!(dp_exact(&layered).unwrap().value, 3.0);
}
