//! Priority-index policy for preemptive instances.
//!
//! Each arm carries a status `(u, a, t)`: its node, the action it plans to
//! play and a priority. Arms start at `(root, a, t)` with probability
//! `scale * x^a_{root,t}` and otherwise never play. The arm with the smallest
//! priority is played; on arrival at a child the next status is drawn from
//! the flow decomposition. While the new priority is below twice the
//! child's depth the same arm keeps playing, and in bridge mode a bridge
//! node is always played right away.

use super::{sample_transition, NextStatus, PlayRecord, Policy, RunOptions, TrialOutcome};
use crate::flow::{flow_decompose, GroupKey, QDecomposition};
use crate::lp::{self, PolyTables};
use crate::model::Instance;
use crate::reduce::reduce;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Status {
    pub node: usize,
    pub action: usize,
    /// `None` means abandoned.
    pub t: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExecState {
    pub statuses: Vec<Status>,
    pub clock: usize,
    /// Arm that must be played next (continuation or bridge).
    pub continuing: Option<usize>,
    rngs: Vec<StreamRng>,
}

#[derive(Debug, Clone)]
pub struct PriorityPolicy {
    instance: Instance<f64>,
    pub tables: PolyTables<f64>,
    pub q: QDecomposition<f64>,
    pub scale: f64,
    pub bridge_mode: bool,
    depths: Vec<Vec<usize>>,
    start: Vec<Vec<(usize, usize, f64)>>,
}

impl PriorityPolicy {
    /// Scale 1/3 policy; the reduced instance must not contain bridges.
    pub fn priority27(instance: &Instance<f64>) -> Result<Self> {
        let reduced = Self::prepare(instance)?;
        if reduced.has_bridges() {
            return Err(Error::Policy("the 1/3-scaled policy needs an instance without multi-period transitions".into()));
        }
        let (_, tables) = lp::solve_tables(&reduced)?;
        let q = flow_decompose(&reduced, &tables)?;
        Self::from_parts(reduced, tables, q, 1.0 / 3.0, false)
    }

    /// Scale 1/6 policy with forced bridge plays.
    pub fn priority12(instance: &Instance<f64>) -> Result<Self> {
        let reduced = Self::prepare(instance)?;
        let (_, tables) = lp::solve_tables(&reduced)?;
        let q = flow_decompose(&reduced, &tables)?;
        Self::from_parts(reduced, tables, q, 1.0 / 6.0, true)
    }

    fn prepare(instance: &Instance<f64>) -> Result<Instance<f64>> {
        if !instance.mode.is_preemptive() {
            return Err(Error::Policy(format!("priority policies need a preemptive instance, got {}", instance.mode)));
        }
        reduce(instance)
    }

    /// Builds the policy from a reduced instance, a feasible solution of its
    /// relaxation and a matching decomposition.
    pub fn from_parts(
        reduced: Instance<f64>,
        tables: PolyTables<f64>,
        q: QDecomposition<f64>,
        scale: f64,
        bridge_mode: bool,
    ) -> Result<Self> {
        let depths = reduced.depths()?;
        let start = reduced
            .arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let mut entries = Vec::new();
                for a in 0..reduced.num_actions() {
                    for t in 1..=tables.budget {
                        let x = tables.x(i, arm.root, a, t);
                        if x > 0.0 {
                            entries.push((a, t, scale * x));
                        }
                    }
                }
                entries.sort_by_key(|&(a, t, _)| (t, a));
                entries
            })
            .collect();
        Ok(PriorityPolicy { instance: reduced, tables, q, scale, bridge_mode, depths, start })
    }

    /// Initial statuses, one independent draw per arm.
    pub fn priority_init(&self, seed: u64, trial: u64) -> ExecState {
        let mut rngs: Vec<StreamRng> =
            (0..self.instance.arms.len()).map(|i| rng::stream(seed, trial, 1 + i as u64)).collect();
        let statuses = self
            .instance
            .arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let pick = rng::pick(&mut rngs[i], self.start[i].iter().map(|e| e.2));
                match pick {
                    Some(k) => Status { node: arm.root, action: self.start[i][k].0, t: Some(self.start[i][k].1) },
                    None => Status { node: arm.root, action: 0, t: None },
                }
            })
            .collect();
        ExecState { statuses, clock: 1, continuing: None, rngs }
    }

    /// Plays one step. Returns `None` when every arm is abandoned.
    pub fn priority_step(&self, state: &mut ExecState) -> Option<PlayRecord> {
        let arm = match state.continuing {
            Some(arm) => arm,
            None => {
                let (arm, _) = state
                    .statuses
                    .iter()
                    .enumerate()
                    .filter_map(|(i, s)| s.t.map(|t| (i, t)))
                    .min_by_key(|&(i, t)| (t, i))?;
                arm
            }
        };
        let status = state.statuses[arm];
        let status_t = status.t.expect("played arms have a finite priority");
        let node = &self.instance.arms[arm].nodes[status.node];
        let tr = sample_transition(&mut state.rngs[arm], node, status.action);
        let mut reward = node.reward(status.action) + tr.completion_reward;
        if state.clock > self.instance.budget {
            reward = 0.0;
        }
        let key = GroupKey { arm, parent: status.node, parent_action: status.action, parent_t: status_t, child: tr.to };
        let next = self.q.group(&key).and_then(|g| {
            rng::pick(&mut state.rngs[arm], g.entries.iter().map(|e| e.q)).map(|k| (g.entries[k].action, g.entries[k].t))
        });
        let child = tr.to;
        state.statuses[arm] = match next {
            Some((a, t)) => Status { node: child, action: a, t: Some(t) },
            None => Status { node: child, action: 0, t: None },
        };
        state.continuing = match next {
            Some((_, t)) => {
                let sticky = t < 2 * self.depths[arm][child];
                let bridge = self.bridge_mode && self.instance.arms[arm].nodes[child].is_bridge;
                (sticky || bridge).then_some(arm)
            }
            None => None,
        };
        let record = PlayRecord {
            clock: state.clock,
            arm,
            node: status.node,
            action: status.action,
            status_t,
            reward,
            new_status: NextStatus { node: child, action: next.map(|n| n.0), t: next.map(|n| n.1) },
        };
        state.clock += 1;
        Some(record)
    }
}

impl Policy for PriorityPolicy {
    fn id(&self) -> String {
        if self.bridge_mode {
            format!("priority12(scale={})", self.scale)
        } else {
            format!("priority27(scale={})", self.scale)
        }
    }

    fn instance(&self) -> &Instance<f64> {
        &self.instance
    }

    fn run_trial(&self, seed: u64, trial: u64, opts: &RunOptions) -> TrialOutcome {
        let mut state = self.priority_init(seed, trial);
        let mut out = TrialOutcome::default();
        while opts.virtual_continue || state.clock <= self.instance.budget {
            let Some(play) = self.priority_step(&mut state) else { break };
            out.reward += play.reward;
            out.plays.push(play);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arm, Mode, Node, Transition};

    fn chain_arm(name: &str, reward: f64) -> Arm<f64> {
        let mut root = Node::new(format!("{name}0"), 1);
        root.rewards[0] = reward;
        root.transitions[0].push(Transition { to: 1, time: 1, prob: 1.0, completion_reward: 0.0 });
        let mut child = Node::new(format!("{name}1"), 1);
        child.rewards[0] = reward;
        child.transitions[0].push(Transition { to: 2, time: 1, prob: 1.0, completion_reward: 0.0 });
        Arm { nodes: vec![root, child, Node::new(format!("{name}2"), 1)], root: 0, terminal: None }
    }

    fn policy_with(x_root: f64, x_child: f64) -> PriorityPolicy {
        let inst = Instance {
            arms: vec![chain_arm("a", 1.0)],
            actions: vec!["alpha".into()],
            budget: 2,
            mode: Mode::Preemptive,
            jobs: None,
        };
        let reduced = reduce(&inst).unwrap();
        let mut tables = PolyTables::zeros(&reduced);
        tables.x[0][0][0][0] = x_root;
        tables.x[0][1][0][1] = x_child;
        let q = flow_decompose(&reduced, &tables).unwrap();
        PriorityPolicy::from_parts(reduced, tables, q, 1.0, false).unwrap()
    }

    #[test]
    fn lowest_priority_plays_first() {
        let inst = Instance {
            arms: vec![chain_arm("a", 1.0), chain_arm("b", 1.0)],
            actions: vec!["alpha".into()],
            budget: 2,
            mode: Mode::Preemptive,
            jobs: None,
        };
        let reduced = reduce(&inst).unwrap();
        let tables = PolyTables::zeros(&reduced);
        let q = flow_decompose(&reduced, &tables).unwrap();
        let policy = PriorityPolicy::from_parts(reduced, tables, q, 1.0 / 3.0, false).unwrap();
        let mut state = policy.priority_init(0, 0);
        state.statuses = vec![Status { node: 0, action: 0, t: Some(7) }, Status { node: 0, action: 0, t: Some(3) }];
        assert_eq!(policy.priority_step(&mut state).unwrap().arm, 1);
        // The played arm is abandoned (no decomposition), so the other goes next.
        assert_eq!(policy.priority_step(&mut state).unwrap().arm, 0);
    }

    #[test]
    fn full_forwarding_plays_the_chain() {
        let policy = policy_with(1.0, 1.0);
        let mut state = policy.priority_init(5, 0);
        assert_eq!(state.statuses[0].t, Some(1));
        let first = policy.priority_step(&mut state).unwrap();
        assert_eq!((first.clock, first.node), (1, 0));
        let second = policy.priority_step(&mut state).unwrap();
        assert_eq!((second.clock, second.node), (2, 1));
        assert!(policy.priority_step(&mut state).is_none());
    }

    #[test]
    fn zero_root_mass_means_no_play() {
        let policy = policy_with(0.0, 0.0);
        let out = policy.run_trial(1, 0, &RunOptions::default());
        assert_eq!(out.reward, 0.0);
        assert!(out.plays.is_empty());
    }
}
