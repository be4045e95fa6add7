//! Exact dynamic programming over joint states.
//!
//! A joint state records every arm's node (or the abandoned marker in
//! non-preemptive modes) together with the clock. Playing an arm collects
//! its on-pull reward and moves it along a transition of duration `d`; the
//! clock jumps by `d` and a completion reward counts when the transition ends
//! within the budget. Idling is always allowed, except that an arm sitting on
//! a bridge node must be played with the default action.
//!
//! Without preemption an arm that has been started is abandoned as soon as
//! any other choice is made, so at most one arm is ever mid-process.

use serde::Serialize;

use crate::model::{Instance, DEFAULT_ACTION};
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Choice {
    Idle,
    Play { arm: usize, action: usize },
}

/// Mixed-radix encoding of joint node vectors.
#[derive(Debug, Clone)]
pub struct JointSpace {
    radix: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn arms(&self) -> usize {
        self.radix.len()
    }

    pub fn encode(&self, nodes: &[usize]) -> usize {
        nodes.iter().zip(&self.strides).map(|(n, s)| n * s).sum()
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (i, r) in self.radix.iter().enumerate() {
            out[i] = index % r;
            index /= r;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Successor<S> {
    pub next: usize,
    pub elapsed: usize,
    pub prob: S,
    pub completion: S,
}

/// The joint process of an instance: state space, legal choices and
/// transition law.
#[derive(Debug, Clone)]
pub struct JointModel<'a, S> {
    pub instance: &'a Instance<S>,
    pub space: JointSpace,
    pub preemptive: bool,
}

impl<'a, S: Scalar> JointModel<'a, S> {
    pub fn new(instance: &'a Instance<S>, cap: u128) -> Result<Self> {
        let preemptive = instance.mode.is_preemptive();
        let radix: Vec<usize> =
            instance.arms.iter().map(|a| a.nodes.len() + usize::from(!preemptive)).collect();
        let states = radix.iter().fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
        let total = states.saturating_mul(instance.budget as u128 + 1);
        if total > cap {
            return Err(Error::Capacity { states: total, cap });
        }
        let mut strides = Vec::with_capacity(radix.len());
        let mut acc = 1usize;
        for r in &radix {
            strides.push(acc);
            acc *= r;
        }
        Ok(JointModel { instance, space: JointSpace { radix, strides, len: acc }, preemptive })
    }

    pub fn budget(&self) -> usize {
        self.instance.budget
    }

    pub fn initial(&self) -> Vec<usize> {
        self.instance.arms.iter().map(|a| a.root).collect()
    }

    /// The abandoned marker of `arm`, if the mode has one.
    pub fn phi(&self, arm: usize) -> Option<usize> {
        (!self.preemptive).then(|| self.instance.arms[arm].nodes.len())
    }

    pub fn is_phi(&self, arm: usize, node: usize) -> bool {
        !self.preemptive && node == self.instance.arms[arm].nodes.len()
    }

    /// Started, not yet abandoned arm (non-preemptive modes only).
    pub fn in_progress(&self, nodes: &[usize]) -> Option<usize> {
        if self.preemptive {
            return None;
        }
        (0..nodes.len()).find(|&i| nodes[i] != self.instance.arms[i].root && !self.is_phi(i, nodes[i]))
    }

    fn on_bridge(&self, nodes: &[usize]) -> Vec<usize> {
        (0..nodes.len())
            .filter(|&i| !self.is_phi(i, nodes[i]) && self.instance.arms[i].nodes[nodes[i]].is_bridge)
            .collect()
    }

    /// States that can actually occur: at most one arm on a bridge and, without
    /// preemption, at most one arm mid-process.
    pub fn is_valid(&self, nodes: &[usize]) -> bool {
        if self.on_bridge(nodes).len() > 1 {
            return false;
        }
        if !self.preemptive {
            let started = (0..nodes.len())
                .filter(|&i| nodes[i] != self.instance.arms[i].root && !self.is_phi(i, nodes[i]))
                .count();
            return started <= 1;
        }
        true
    }

    pub fn choices(&self, nodes: &[usize]) -> Vec<Choice> {
        if let Some(&arm) = self.on_bridge(nodes).first() {
            return vec![Choice::Play { arm, action: DEFAULT_ACTION }];
        }
        let mut out = vec![Choice::Idle];
        for (arm, &u) in nodes.iter().enumerate() {
            if self.is_phi(arm, u) {
                continue;
            }
            for action in self.instance.arms[arm].nodes[u].available_actions() {
                out.push(Choice::Play { arm, action });
            }
        }
        out
    }

    /// Immediate reward and successor distribution of `choice`.
    pub fn step(&self, nodes: &[usize], choice: Choice) -> (S, Vec<Successor<S>>) {
        let mut base = nodes.to_vec();
        let played = match choice {
            Choice::Idle => None,
            Choice::Play { arm, .. } => Some(arm),
        };
        if !self.preemptive {
            for (i, node) in base.iter_mut().enumerate() {
                let root = self.instance.arms[i].root;
                if Some(i) != played && *node != root && !self.is_phi(i, *node) {
                    *node = self.instance.arms[i].nodes.len();
                }
            }
        }
        match choice {
            Choice::Idle => (
                S::zero(),
                vec![Successor { next: self.space.encode(&base), elapsed: 1, prob: S::one(), completion: S::zero() }],
            ),
            Choice::Play { arm, action } => {
                let node = &self.instance.arms[arm].nodes[nodes[arm]];
                let succ = node.transitions[action]
                    .iter()
                    .map(|tr| {
                        base[arm] = tr.to;
                        Successor {
                            next: self.space.encode(&base),
                            elapsed: tr.time,
                            prob: tr.prob.clone(),
                            completion: tr.completion_reward.clone(),
                        }
                    })
                    .collect();
                (node.reward(action), succ)
            }
        }
    }

    /// Expected value of `choice` at time `t` given the value layers of later
    /// times (`later[t']` for `t' > t`, `later[budget + 1]` all zero).
    fn choice_value(&self, nodes: &[usize], choice: Choice, t: usize, layers: &[Vec<S>]) -> S {
        let budget = self.budget();
        let (reward, succ) = self.step(nodes, choice);
        succ.into_iter().fold(reward, |acc, s| {
            let end = t + s.elapsed;
            let mut v = if end <= budget { layers[end][s.next].clone() } else { S::zero() };
            if end - 1 <= budget {
                v = v + s.completion;
            }
            acc + s.prob * v
        })
    }
}

/// A (possibly randomized) Markov policy on joint states.
pub trait JointPolicy<S: Scalar> {
    /// Distribution over legal choices at `(nodes, t)`; weights sum to one.
    fn decide(&self, model: &JointModel<S>, nodes: &[usize], t: usize) -> Vec<(Choice, S)>;
}

/// Optimal values and argmax table.
#[derive(Debug, Clone)]
pub struct DpSolution<S> {
    pub value: S,
    /// `values[t][state]` for `t` in `1..=budget + 1`; index 0 unused.
    pub values: Vec<Vec<S>>,
    /// `table[t][state]`; index 0 unused.
    pub table: Vec<Vec<Choice>>,
    pub states: usize,
}

impl<S: Scalar> JointPolicy<S> for DpSolution<S> {
    fn decide(&self, model: &JointModel<S>, nodes: &[usize], t: usize) -> Vec<(Choice, S)> {
        vec![(self.table[t][model.space.encode(nodes)], S::one())]
    }
}

pub fn dp_exact<S: Scalar>(instance: &Instance<S>) -> Result<DpSolution<S>> {
    dp_exact_with_cap(instance, DEFAULT_STATE_CAP)
}

pub fn dp_exact_with_cap<S: Scalar>(instance: &Instance<S>, cap: u128) -> Result<DpSolution<S>> {
    let model = JointModel::new(instance, cap)?;
    solve_model(&model)
}

pub fn solve_model<S: Scalar>(model: &JointModel<S>) -> Result<DpSolution<S>> {
    let budget = model.budget();
    let n = model.space.len();
    let mut values = vec![Vec::new(); budget + 2];
    let mut table = vec![Vec::new(); budget + 1];
    values[budget + 1] = vec![S::zero(); n];
    let mut nodes = vec![0; model.space.arms()];
    for t in (1..=budget).rev() {
        let mut layer = vec![S::zero(); n];
        let mut choice_layer = vec![Choice::Idle; n];
        for state in 0..n {
            model.space.decode(state, &mut nodes);
            if !model.is_valid(&nodes) {
                continue;
            }
            let mut best: Option<(S, Choice)> = None;
            for choice in model.choices(&nodes) {
                let v = model.choice_value(&nodes, choice, t, &values);
                let better = match &best {
                    None => true,
                    Some((b, _)) => v > b.clone() + S::tolerance(),
                };
                if better {
                    best = Some((v, choice));
                }
            }
            let (v, c) = best.expect("idle or a forced play is always available");
            layer[state] = v;
            choice_layer[state] = c;
        }
        values[t] = layer;
        table[t] = choice_layer;
    }
    let start = model.space.encode(&model.initial());
    let value = if budget == 0 { S::zero() } else { values[1][start].clone() };
    Ok(DpSolution { value, values, table, states: n })
}

/// Exact expected reward of a Markov policy by backward induction.
pub fn evaluate_policy<S: Scalar, P: JointPolicy<S> + ?Sized>(model: &JointModel<S>, policy: &P) -> S {
    let budget = model.budget();
    let n = model.space.len();
    let mut values = vec![Vec::new(); budget + 2];
    values[budget + 1] = vec![S::zero(); n];
    let mut nodes = vec![0; model.space.arms()];
    for t in (1..=budget).rev() {
        let mut layer = vec![S::zero(); n];
        for (state, slot) in layer.iter_mut().enumerate() {
            model.space.decode(state, &mut nodes);
            if !model.is_valid(&nodes) {
                continue;
            }
            *slot = policy.decide(model, &nodes, t).into_iter().fold(S::zero(), |acc, (c, w)| {
                if w.is_zero() {
                    acc
                } else {
                    acc + w * model.choice_value(&nodes, c, t, &values)
                }
            });
        }
        values[t] = layer;
    }
    if budget == 0 {
        return S::zero();
    }
    values[1][model.space.encode(&model.initial())].clone()
}

/// Policy that never plays.
pub struct IdlePolicy;

impl<S: Scalar> JointPolicy<S> for IdlePolicy {
    fn decide(&self, model: &JointModel<S>, nodes: &[usize], _t: usize) -> Vec<(Choice, S)> {
        let choices = model.choices(nodes);
        // A bridge still has to be played.
        vec![(choices[0], S::one())]
    }
}
