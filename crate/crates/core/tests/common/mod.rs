//! Independent oracles and instance strategies shared by the integration
//! tests. The oracles re-derive the execution semantics from scratch instead
//! of going through the joint model.

#![allow(dead_code)]

use banditgap::dp::{Choice, JointModel, JointPolicy};
use banditgap::generate::{random, RandomSpec};
use banditgap::lp::{self, Column, PolyTables};
use banditgap::reduce::reduce;
use banditgap::rng;
use banditgap::model::{Instance, Mode};
use banditgap::Scalar;
use proptest::prelude::*;

/// Marker for an abandoned arm.
const GONE: usize = usize::MAX;

fn mid_process<S: Scalar>(inst: &Instance<S>, nodes: &[usize], arm: usize) -> bool {
    nodes[arm] != GONE && nodes[arm] != inst.arms[arm].root
}

/// Applies the abandonment rule of non-preemptive modes after `played`.
fn settle<S: Scalar>(inst: &Instance<S>, nodes: &mut [usize], played: Option<usize>) {
    if inst.mode.is_preemptive() {
        return;
    }
    for i in 0..nodes.len() {
        if Some(i) != played && mid_process(inst, nodes, i) {
            nodes[i] = GONE;
        }
    }
}

fn legal<S: Scalar>(inst: &Instance<S>, nodes: &[usize]) -> Vec<Choice> {
    for (i, &u) in nodes.iter().enumerate() {
        if u != GONE && inst.arms[i].nodes[u].is_bridge {
            return vec![Choice::Play { arm: i, action: 0 }];
        }
    }
    let mut out = vec![Choice::Idle];
    for (i, &u) in nodes.iter().enumerate() {
        if u == GONE {
            continue;
        }
        for a in 0..inst.actions.len() {
            if !inst.arms[i].nodes[u].transitions[a].is_empty() {
                out.push(Choice::Play { arm: i, action: a });
            }
        }
    }
    out
}

/// Expected reward of `choice` followed by `continuation` from each successor.
fn expand<S: Scalar>(
    inst: &Instance<S>,
    nodes: &[usize],
    t: usize,
    choice: Choice,
    continuation: &mut dyn FnMut(&[usize], usize) -> f64,
) -> f64 {
    let budget = inst.budget;
    match choice {
        Choice::Idle => {
            let mut next = nodes.to_vec();
            settle(inst, &mut next, None);
            continuation(&next, t + 1)
        }
        Choice::Play { arm, action } => {
            let node = &inst.arms[arm].nodes[nodes[arm]];
            let mut total = node.rewards[action].to_f64();
            for tr in &node.transitions[action] {
                let mut next = nodes.to_vec();
                next[arm] = tr.to;
                settle(inst, &mut next, Some(arm));
                let end = t + tr.time;
                let mut v = if end <= budget { continuation(&next, end) } else { 0.0 };
                if end - 1 <= budget {
                    v += tr.completion_reward.to_f64();
                }
                total += tr.prob.to_f64() * v;
            }
            total
        }
    }
}

/// Optimal value by exhaustive recursion over every history.
pub fn brute_force_opt<S: Scalar>(inst: &Instance<S>) -> f64 {
    fn go<S: Scalar>(inst: &Instance<S>, nodes: &[usize], t: usize) -> f64 {
        if t > inst.budget {
            return 0.0;
        }
        legal(inst, nodes)
            .into_iter()
            .map(|c| expand(inst, nodes, t, c, &mut |n, tt| go(inst, n, tt)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
    let roots: Vec<usize> = inst.arms.iter().map(|a| a.root).collect();
    if inst.budget == 0 {
        0.0
    } else {
        go(inst, &roots, 1)
    }
}

/// Expected reward of a joint-state policy by enumerating trajectories.
pub fn enumerate_policy<S: Scalar, P: JointPolicy<S>>(model: &JointModel<S>, policy: &P) -> f64 {
    fn go<S: Scalar, P: JointPolicy<S>>(model: &JointModel<S>, policy: &P, nodes: &[usize], t: usize) -> f64 {
        let inst = model.instance;
        if t > inst.budget {
            return 0.0;
        }
        // The joint model marks abandoned arms with one past the last node.
        let encoded: Vec<usize> =
            nodes.iter().enumerate().map(|(i, &u)| if u == GONE { inst.arms[i].nodes.len() } else { u }).collect();
        policy
            .decide(model, &encoded, t)
            .into_iter()
            .map(|(c, w)| {
                let w = w.to_f64();
                if w == 0.0 {
                    0.0
                } else {
                    w * expand(inst, nodes, t, c, &mut |n, tt| go(model, policy, n, tt))
                }
            })
            .sum()
    }
    let roots = model.initial();
    go(model, policy, &roots, 1)
}

/// Small random instances: `(arms, nodes, actions, budget, seed, mode, max_time)`.
pub fn small_spec(
    max_arms: usize,
    max_nodes: usize,
    max_budget: usize,
    max_time: usize,
) -> impl Strategy<Value = RandomSpec> {
    (
        1..=max_arms,
        1..=max_nodes,
        1..=2usize,
        1..=max_budget,
        any::<u64>(),
        prop_oneof![Just(Mode::Preemptive), Just(Mode::NonPreemptive)],
        1..=max_time,
    )
        .prop_map(|(arms, nodes, actions, budget, seed, mode, time)| {
            RandomSpec::new(arms, nodes, actions, budget, seed, mode).with_max_time(time)
        })
}

pub fn instance(spec: &RandomSpec) -> Instance<f64> {
    random(spec).expect("valid spec")
}

/// Reduced instance plus a feasible relaxation solution under a random
/// objective (uniform weights on the play columns), to move away from the
/// reward-optimal vertex.
pub fn randomized_tables(inst: &Instance<f64>, seed: u64) -> (Instance<f64>, PolyTables<f64>) {
    let reduced = reduce(inst).expect("reducible");
    let mut problem = lp::build(&reduced, lp::default_variant(&reduced)).expect("relaxation");
    let mut r = rng::stream(seed, 0, 7);
    for (c, col) in problem.objective.iter_mut().zip(&problem.columns) {
        *c = if matches!(col, Column::X { .. }) { rng::uniform(&mut r) } else { 0.0 };
    }
    let sol = problem.solve_certified().expect("solvable");
    let tables = PolyTables::from_solution(&reduced, &problem, &sol).expect("tables");
    (reduced, tables)
}

/// Whether an empirical frequency over `n` trials is within three standard
/// errors of the probability `p`.
pub fn within_3_sigma(freq: f64, p: f64, n: u64) -> bool {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    (freq - p).abs() <= 3.0 * sigma + 1e-12
}
