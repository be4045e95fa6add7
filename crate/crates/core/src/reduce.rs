//! Graph reductions: multi-period transitions to bridge chains, time-index
//! layering, and knapsack jobs to arms.

use std::collections::HashMap;

use crate::model::{Arm, Instance, KnapsackJob, Mode, Node, Transition, DEFAULT_ACTION};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Replaces every transition of duration `t > 1` by a chain of `t - 1`
/// bridge nodes. A completion reward moves onto the last bridge of its chain;
/// on unit-time transitions it is folded into the source node's reward.
///
/// Unit-time instances are returned unchanged.
pub fn expand_bridges<S: Scalar>(instance: &Instance<S>) -> Result<Instance<S>> {
    if instance.is_unit_time() {
        return Ok(instance.clone());
    }
    if instance.has_bridges() {
        return Err(Error::AlreadyExpanded);
    }
    let num_actions = instance.num_actions();
    let mut out = instance.clone();
    for arm in &mut out.arms {
        let original = arm.nodes.len();
        let mut extra: Vec<Node<S>> = Vec::new();
        for u in 0..original {
            for a in 0..num_actions {
                let transitions = std::mem::take(&mut arm.nodes[u].transitions[a]);
                let mut kept = Vec::with_capacity(transitions.len());
                for (k, tr) in transitions.into_iter().enumerate() {
                    if tr.time == 1 {
                        let folded = tr.prob.clone() * tr.completion_reward.clone();
                        arm.nodes[u].rewards[a] = arm.nodes[u].rewards[a].clone() + folded;
                        kept.push(Transition { completion_reward: S::zero(), ..tr });
                        continue;
                    }
                    let first = original + extra.len();
                    let chain = tr.time - 1;
                    for j in 0..chain {
                        let mut bridge = Node::new(
                            format!("{}/{}/{}.w{}", arm.nodes[u].id, instance.actions[a], k, j + 1),
                            num_actions,
                        );
                        bridge.is_bridge = true;
                        let to = if j + 1 == chain { tr.to } else { first + j + 1 };
                        bridge.transitions[DEFAULT_ACTION].push(Transition {
                            to,
                            time: 1,
                            prob: S::one(),
                            completion_reward: S::zero(),
                        });
                        if j + 1 == chain {
                            bridge.rewards[DEFAULT_ACTION] = tr.completion_reward.clone();
                        }
                        extra.push(bridge);
                    }
                    kept.push(Transition { to: first, time: 1, prob: tr.prob, completion_reward: S::zero() });
                }
                arm.nodes[u].transitions[a] = kept;
            }
        }
        arm.nodes.extend(extra);
        for node in &mut arm.nodes {
            node.depth = None;
        }
    }
    Ok(out)
}

/// Unrolls each arm into time-indexed copies `id@depth` for depths
/// `0..budget`. Transitions out of the last layer land on a zero-reward leaf
/// `sink<i>@<budget>`.
pub fn layer<S: Scalar>(instance: &Instance<S>) -> Result<Instance<S>> {
    if !instance.is_unit_time() {
        return Err(Error::NotUnitTime);
    }
    let budget = instance.budget;
    let num_actions = instance.num_actions();
    let mut out = instance.clone();
    for (i, arm) in instance.arms.iter().enumerate() {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nodes: Vec<Node<S>> = Vec::new();
        let mut origin: Vec<(usize, usize)> = Vec::new();
        let mut sink: Option<usize> = None;

        index.insert((arm.root, 0), 0);
        origin.push((arm.root, 0));
        nodes.push(Node::new(String::new(), num_actions));
        let mut next = 0;
        while next < origin.len() {
            let (u, d) = origin[next];
            let src = &arm.nodes[u];
            let mut copy = Node::new(format!("{}@{}", src.id, d), num_actions);
            copy.rewards = src.rewards.clone();
            copy.is_bridge = src.is_bridge;
            copy.depth = Some(d);
            for a in 0..num_actions {
                for tr in &src.transitions[a] {
                    let target = if d + 1 >= budget {
                        *sink.get_or_insert_with(|| {
                            let mut leaf = Node::new(format!("sink{i}@{budget}"), num_actions);
                            leaf.depth = Some(budget);
                            nodes.push(leaf);
                            origin.push((usize::MAX, budget));
                            nodes.len() - 1
                        })
                    } else {
                        *index.entry((tr.to, d + 1)).or_insert_with(|| {
                            nodes.push(Node::new(String::new(), num_actions));
                            origin.push((tr.to, d + 1));
                            nodes.len() - 1
                        })
                    };
                    copy.transitions[a].push(Transition { to: target, ..tr.clone() });
                }
            }
            nodes[next] = copy;
            next += 1;
            // The sink has no source node; skip over it.
            while next < origin.len() && origin[next].0 == usize::MAX {
                next += 1;
            }
        }
        out.arms[i] = Arm { nodes, root: 0, terminal: arm.terminal.clone() };
    }
    Ok(out)
}

/// Layers after expanding bridges.
pub fn reduce<S: Scalar>(instance: &Instance<S>) -> Result<Instance<S>> {
    layer(&expand_bridges(instance)?)
}

/// Builds one arm per job.
///
/// Without cancellation an arm is a root whose default action commits the
/// job: each outcome becomes a multi-period transition to a `done` leaf with
/// its reward paid on completion. With cancellation the job is a caterpillar
/// of unit steps; abandoning it part way is the cancellation.
pub fn jobs_to_arms<S: Scalar>(jobs: &[KnapsackJob<S>], budget: usize, cancellable: bool) -> Instance<S> {
    let arms = jobs
        .iter()
        .enumerate()
        .map(|(j, job)| if cancellable { caterpillar(j, job, budget) } else { committed(j, job, budget) })
        .collect();
    Instance {
        arms,
        actions: vec!["alpha".to_owned()],
        budget,
        mode: if cancellable { Mode::KnapsackCancel } else { Mode::KnapsackNoCancel },
        jobs: Some(jobs.to_vec()),
    }
}

fn committed<S: Scalar>(j: usize, job: &KnapsackJob<S>, budget: usize) -> Arm<S> {
    let mut root = Node::new(format!("job{j}"), 1);
    let done = Node::new(format!("job{j}.done"), 1);
    for o in &job.outcomes {
        if o.prob.is_zero() {
            continue;
        }
        // A job longer than the budget occupies the rest of it either way.
        let (time, reward) = if o.size > budget { (budget, S::zero()) } else { (o.size, o.reward.clone()) };
        root.transitions[DEFAULT_ACTION].push(Transition { to: 1, time, prob: o.prob.clone(), completion_reward: reward });
    }
    Arm { nodes: vec![root, done], root: 0, terminal: None }
}

fn caterpillar<S: Scalar>(j: usize, job: &KnapsackJob<S>, budget: usize) -> Arm<S> {
    let spine = job.max_size().min(budget).max(1);
    let done = spine;
    let mut nodes: Vec<Node<S>> = (0..spine)
        .map(|k| Node::new(if k == 0 { format!("job{j}") } else { format!("job{j}.c{k}") }, 1))
        .collect();
    for (k, node) in nodes.iter_mut().enumerate() {
        let alive = job.prob_size_exceeds(k);
        let last = k + 1 == spine;
        let mut finished = S::zero();
        for o in job.outcomes.iter().filter(|o| o.size == k + 1 && !o.prob.is_zero()) {
            let p = o.prob.clone() / alive.clone();
            finished = finished + p.clone();
            node.transitions[DEFAULT_ACTION].push(Transition {
                to: done,
                time: 1,
                prob: p,
                completion_reward: o.reward.clone(),
            });
        }
        let rest = S::one() - finished;
        if rest > S::zero() {
            node.transitions[DEFAULT_ACTION].push(Transition {
                to: if last { done } else { k + 1 },
                time: 1,
                prob: rest,
                completion_reward: S::zero(),
            });
        }
    }
    nodes.push(Node::new(format!("job{j}.done"), 1));
    Arm { nodes, root: 0, terminal: None }
}
