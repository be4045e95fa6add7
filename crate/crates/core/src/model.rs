//! Instances: arms made of nodes, per-action rewards and (possibly
//! multi-period) transitions, plus the knapsack job view.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::{convert, Scalar};

/// Index into [`Instance::actions`]. Index 0 is the default action played on
/// bridge nodes.
pub type ActionId = usize;

pub const DEFAULT_ACTION: ActionId = 0;

/// Tolerance for "probabilities sum to one" checks.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Preemptive,
    NonPreemptive,
    KnapsackCancel,
    #[serde(rename = "knapsack-nocancel")]
    KnapsackNoCancel,
}

impl Mode {
    pub fn is_preemptive(self) -> bool {
        matches!(self, Mode::Preemptive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Preemptive => "preemptive",
            Mode::NonPreemptive => "non-preemptive",
            Mode::KnapsackCancel => "knapsack-cancel",
            Mode::KnapsackNoCancel => "knapsack-nocancel",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preemptive" => Ok(Mode::Preemptive),
            "non-preemptive" => Ok(Mode::NonPreemptive),
            "knapsack-cancel" => Ok(Mode::KnapsackCancel),
            "knapsack-nocancel" => Ok(Mode::KnapsackNoCancel),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// A transition `u -> to` taking `time` steps with probability `prob`.
///
/// `completion_reward` is collected only when the transition finishes within
/// the budget; it is independent of the node's on-pull reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub to: usize,
    pub time: usize,
    pub prob: S,
    pub completion_reward: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<S> {
    pub id: String,
    /// On-pull reward per action.
    pub rewards: Vec<S>,
    /// Outgoing transitions per action; an empty list means the action is
    /// not available at this node.
    pub transitions: Vec<Vec<Transition<S>>>,
    pub is_bridge: bool,
    pub depth: Option<usize>,
}

impl<S: Scalar> Node<S> {
    pub fn new(id: impl Into<String>, num_actions: usize) -> Self {
        Node {
            id: id.into(),
            rewards: vec![S::zero(); num_actions],
            transitions: vec![Vec::new(); num_actions],
            is_bridge: false,
            depth: None,
        }
    }

    pub fn is_available(&self, action: ActionId) -> bool {
        self.transitions.get(action).is_some_and(|t| !t.is_empty())
    }

    pub fn available_actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.transitions.len()).filter(|&a| self.is_available(a))
    }

    /// A node with no available action can never be played.
    pub fn is_leaf(&self) -> bool {
        self.transitions.iter().all(|t| t.is_empty())
    }

    pub fn reward(&self, action: ActionId) -> S {
        self.rewards.get(action).cloned().unwrap_or_else(S::zero)
    }

    /// Sum over unit-time transitions to `child` under `action`.
    pub fn prob_to(&self, action: ActionId, child: usize) -> S {
        self.transitions[action]
            .iter()
            .filter(|t| t.to == child)
            .fold(S::zero(), |acc, t| acc + t.prob.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm<S> {
    pub nodes: Vec<Node<S>>,
    pub root: usize,
    pub terminal: Option<String>,
}

impl<S: Scalar> Arm<S> {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// `(parent, action, prob)` triples with positive probability into `child`.
    pub fn parents_of(&self, child: usize) -> Vec<(usize, ActionId, S)> {
        let mut out = Vec::new();
        for (v, node) in self.nodes.iter().enumerate() {
            for a in node.available_actions() {
                let p = node.prob_to(a, child);
                if p > S::zero() {
                    out.push((v, a, p));
                }
            }
        }
        out
    }

    /// Depth of every node if the arm is a layered DAG of unit-time
    /// transitions rooted at `root`; nodes unreachable from the root get
    /// `None`.
    pub fn layered_depths(&self) -> std::result::Result<Vec<Option<usize>>, String> {
        let mut depth = vec![None; self.nodes.len()];
        depth[self.root] = Some(0);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            let d = depth[u].expect("queued nodes have depth");
            for trans in self.nodes[u].transitions.iter().flatten() {
                if trans.time != 1 {
                    return Err(format!("node {} has a multi-period transition", self.nodes[u].id));
                }
                match depth[trans.to] {
                    None => {
                        depth[trans.to] = Some(d + 1);
                        queue.push_back(trans.to);
                    }
                    Some(existing) if existing != d + 1 => {
                        return Err(format!(
                            "transition {} -> {} does not raise depth by one",
                            self.nodes[u].id, self.nodes[trans.to].id
                        ));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(depth)
    }
}

/// Joint `(size, reward)` outcome of a knapsack job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome<S> {
    pub size: usize,
    pub prob: S,
    pub reward: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackJob<S> {
    pub outcomes: Vec<JobOutcome<S>>,
}

impl<S: Scalar> KnapsackJob<S> {
    pub fn new(outcomes: Vec<(usize, S, S)>) -> Self {
        KnapsackJob {
            outcomes: outcomes
                .into_iter()
                .map(|(size, prob, reward)| JobOutcome { size, prob, reward })
                .collect(),
        }
    }

    /// `Pr[S > k]`.
    pub fn prob_size_exceeds(&self, k: usize) -> S {
        self.outcomes
            .iter()
            .filter(|o| o.size > k)
            .fold(S::zero(), |acc, o| acc + o.prob.clone())
    }

    pub fn max_size(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.prob.is_zero()).map(|o| o.size).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub arms: Vec<Arm<S>>,
    pub actions: Vec<String>,
    pub budget: usize,
    pub mode: Mode,
    /// Job-level description, kept when the arms were built from jobs so the
    /// job-level relaxation stays available.
    pub jobs: Option<Vec<KnapsackJob<S>>>,
}

/// Global handle on a node: arm index plus node index within the arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub arm: usize,
    pub node: usize,
}

impl<S: Scalar> Instance<S> {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn node(&self, r: NodeRef) -> &Node<S> {
        &self.arms[r.arm].nodes[r.node]
    }

    pub fn node_refs(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.arms
            .iter()
            .enumerate()
            .flat_map(|(arm, a)| (0..a.nodes.len()).map(move |node| NodeRef { arm, node }))
    }

    pub fn total_nodes(&self) -> usize {
        self.arms.iter().map(|a| a.nodes.len()).sum()
    }

    pub fn has_bridges(&self) -> bool {
        self.arms.iter().flat_map(|a| &a.nodes).any(|n| n.is_bridge)
    }

    pub fn is_unit_time(&self) -> bool {
        self.arms
            .iter()
            .flat_map(|a| &a.nodes)
            .flat_map(|n| n.transitions.iter().flatten())
            .all(|t| t.time == 1)
    }

    /// Depths of every node, failing unless every arm is a layered DAG with
    /// all nodes reachable.
    pub fn depths(&self) -> crate::Result<Vec<Vec<usize>>> {
        self.arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let depths = arm.layered_depths().map_err(crate::Error::NotLayered)?;
                depths
                    .into_iter()
                    .enumerate()
                    .map(|(u, d)| {
                        d.ok_or_else(|| {
                            crate::Error::NotLayered(format!(
                                "node {} of arm {i} is unreachable from the root",
                                arm.nodes[u].id
                            ))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Same instance with every scalar converted.
    pub fn convert<T: Scalar>(&self) -> Instance<T> {
        let c = |v: &S| convert::<S, T>(v);
        Instance {
            arms: self
                .arms
                .iter()
                .map(|arm| Arm {
                    root: arm.root,
                    terminal: arm.terminal.clone(),
                    nodes: arm
                        .nodes
                        .iter()
                        .map(|n| Node {
                            id: n.id.clone(),
                            rewards: n.rewards.iter().map(c).collect(),
                            transitions: n
                                .transitions
                                .iter()
                                .map(|ts| {
                                    ts.iter()
                                        .map(|t| Transition {
                                            to: t.to,
                                            time: t.time,
                                            prob: c(&t.prob),
                                            completion_reward: c(&t.completion_reward),
                                        })
                                        .collect()
                                })
                                .collect(),
                            is_bridge: n.is_bridge,
                            depth: n.depth,
                        })
                        .collect(),
                })
                .collect(),
            actions: self.actions.clone(),
            budget: self.budget,
            mode: self.mode,
            jobs: self.jobs.as_ref().map(|jobs| {
                jobs.iter()
                    .map(|j| KnapsackJob {
                        outcomes: j
                            .outcomes
                            .iter()
                            .map(|o| JobOutcome { size: o.size, prob: c(&o.prob), reward: c(&o.reward) })
                            .collect(),
                    })
                    .collect()
            }),
        }
    }

    /// Sum of every reward, used as a crude scale for tolerances.
    pub fn reward_scale(&self) -> f64 {
        let mut total = 0.0;
        for node in self.arms.iter().flat_map(|a| &a.nodes) {
            total += node.rewards.iter().map(|r| r.to_f64().abs()).sum::<f64>();
            total += node
                .transitions
                .iter()
                .flatten()
                .map(|t| t.completion_reward.to_f64().abs())
                .sum::<f64>();
        }
        total.max(1.0)
    }
}

/// One broken invariant, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub arm: Option<usize>,
    pub node: Option<String>,
    pub constraint: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.arm, &self.node) {
            (Some(a), Some(n)) => write!(f, "arm {a}, node {n}: {} ({})", self.constraint, self.detail),
            (Some(a), None) => write!(f, "arm {a}: {} ({})", self.constraint, self.detail),
            _ => write!(f, "{} ({})", self.constraint, self.detail),
        }
    }
}

/// Checks every structural invariant of an instance. An empty result means
/// the instance is valid.
pub fn validate<S: Scalar>(instance: &Instance<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |arm: Option<usize>, node: Option<&str>, constraint: &str, detail: String| {
        out.push(Violation { arm, node: node.map(str::to_owned), constraint: constraint.to_owned(), detail });
    };
    let tol = S::from_f64(PROB_TOLERANCE).unwrap_or_else(S::tolerance);

    if instance.actions.is_empty() {
        push(None, None, "action set empty", "at least the default action is required".into());
    }
    if instance.budget == 0 {
        push(None, None, "budget", "budget must be positive".into());
    }
    let num_actions = instance.actions.len();
    let mut seen = HashSet::new();
    for (i, arm) in instance.arms.iter().enumerate() {
        if arm.root >= arm.nodes.len() {
            push(Some(i), None, "root missing", format!("root index {} out of range", arm.root));
            continue;
        }
        if arm.nodes[arm.root].is_bridge {
            push(Some(i), Some(&arm.nodes[arm.root].id), "root is a bridge", "roots must not be bridge nodes".into());
        }
        for node in &arm.nodes {
            let id = node.id.as_str();
            if !seen.insert(id.to_owned()) {
                push(Some(i), Some(id), "duplicate node id", "ids must be unique across arms".into());
            }
            if node.rewards.len() != num_actions || node.transitions.len() != num_actions {
                push(Some(i), Some(id), "action arity", format!("expected {num_actions} actions"));
                continue;
            }
            for (a, r) in node.rewards.iter().enumerate() {
                if *r < S::zero() {
                    push(Some(i), Some(id), "negative reward", format!("action {} reward {r}", instance.actions[a]));
                }
                if !r.is_zero() && !node.is_available(a) {
                    push(
                        Some(i),
                        Some(id),
                        "reward on unavailable action",
                        format!("action {} has reward but no transitions", instance.actions[a]),
                    );
                }
            }
            for a in node.available_actions() {
                let mut mass = S::zero();
                for t in &node.transitions[a] {
                    if t.to >= arm.nodes.len() {
                        push(Some(i), Some(id), "transition target", format!("target index {} outside arm", t.to));
                    }
                    if t.time == 0 {
                        push(Some(i), Some(id), "transition time", "time must be at least 1".into());
                    }
                    if t.prob < S::zero() || t.prob > S::one() + tol.clone() {
                        push(Some(i), Some(id), "transition probability", format!("prob {} outside [0,1]", t.prob));
                    }
                    if t.completion_reward < S::zero() {
                        push(Some(i), Some(id), "negative reward", "completion reward below zero".into());
                    }
                    mass = mass + t.prob.clone();
                }
                if (mass.clone() - S::one()).abs() > tol {
                    push(
                        Some(i),
                        Some(id),
                        "transition mass != 1",
                        format!("action {} sums to {mass}", instance.actions[a]),
                    );
                }
            }
            if node.is_bridge {
                let only_default = node.available_actions().all(|a| a == DEFAULT_ACTION);
                let ts = &node.transitions[DEFAULT_ACTION];
                let single = ts.len() == 1 && (ts[0].prob.clone() - S::one()).abs() <= tol && ts[0].time == 1;
                if !only_default || !single {
                    push(
                        Some(i),
                        Some(id),
                        "bridge shape",
                        "bridge nodes need exactly one unit-time default-action transition with probability 1".into(),
                    );
                }
            }
        }
        if !instance.mode.is_preemptive() {
            let root_has_parent = arm
                .nodes
                .iter()
                .flat_map(|n| n.transitions.iter().flatten())
                .any(|t| t.to == arm.root);
            if root_has_parent {
                push(
                    Some(i),
                    Some(&arm.nodes[arm.root].id),
                    "root re-entry",
                    "non-preemptive arms must not transition back to their root".into(),
                );
            }
        }
        // Shortest elapsed time from the root.
        let mut best = vec![usize::MAX; arm.nodes.len()];
        best[arm.root] = 0;
        let mut queue = VecDeque::from([arm.root]);
        while let Some(u) = queue.pop_front() {
            for t in arm.nodes[u].transitions.iter().flatten() {
                if t.to < arm.nodes.len() && best[u] + t.time.max(1) < best[t.to] {
                    best[t.to] = best[u] + t.time.max(1);
                    queue.push_back(t.to);
                }
            }
        }
        for (u, node) in arm.nodes.iter().enumerate() {
            if best[u] > instance.budget {
                push(
                    Some(i),
                    Some(&node.id),
                    "unreachable node",
                    format!("not reachable from the root within depth {}", instance.budget),
                );
            }
        }
    }
    if let Some(jobs) = &instance.jobs {
        for (j, job) in jobs.iter().enumerate() {
            let mass = job.outcomes.iter().fold(S::zero(), |acc, o| acc + o.prob.clone());
            if (mass.clone() - S::one()).abs() > tol {
                push(None, Some(&format!("job{j}")), "job outcome mass != 1", format!("sums to {mass}"));
            }
            for o in &job.outcomes {
                if o.size == 0 {
                    push(None, Some(&format!("job{j}")), "job size", "sizes must be at least 1".into());
                }
                if o.prob < S::zero() || o.reward < S::zero() {
                    push(None, Some(&format!("job{j}")), "job outcome sign", "negative probability or reward".into());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_node(prob: f64) -> Instance<f64> {
        let mut node = Node::<f64>::new("u", 1);
        node.rewards[0] = 1.0;
        node.transitions[0].push(Transition { to: 0, time: 1, prob, completion_reward: 0.0 });
        Instance {
            arms: vec![Arm { nodes: vec![node], root: 0, terminal: None }],
            actions: vec!["alpha".into()],
            budget: 1,
            mode: Mode::Preemptive,
            jobs: None,
        }
    }

    #[test]
    fn minimal_instance_is_valid() {
        assert!(validate(&single_node(1.0)).is_empty());
    }

    #[test]
    fn short_transition_mass_is_reported() {
        let v = validate(&single_node(0.9));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "transition mass != 1");
        assert_eq!(v[0].node.as_deref(), Some("u"));
    }

    #[test]
    fn bridge_root_and_negative_reward_are_reported() {
        let mut inst = single_node(1.0);
        inst.arms[0].nodes[0].is_bridge = true;
        inst.arms[0].nodes[0].rewards[0] = -1.0;
        let kinds: Vec<_> = validate(&inst).into_iter().map(|v| v.constraint).collect();
        assert!(kinds.contains(&"root is a bridge".to_string()));
        assert!(kinds.contains(&"negative reward".to_string()));
    }

    #[test]
    fn non_preemptive_root_reentry_is_reported() {
        let mut inst = single_node(1.0);
        inst.mode = Mode::NonPreemptive;
        let kinds: Vec<_> = validate(&inst).into_iter().map(|v| v.constraint).collect();
        assert_eq!(kinds, vec!["root re-entry".to_string()]);
    }

    #[test]
    fn layered_depths_detect_cycles() {
        let inst = single_node(1.0);
        assert!(inst.arms[0].layered_depths().is_err());
    }

    #[test]
    fn mode_round_trips_through_strings() {
        for mode in [Mode::Preemptive, Mode::NonPreemptive, Mode::KnapsackCancel, Mode::KnapsackNoCancel] {
            assert_eq!(mode.as_str().parse::<Mode>().unwrap(), mode);
            let json = serde_json::to_string(&mode).unwrap();
            assert_eq!(json, format!("\"{}\"", mode.as_str()));
        }
    }
}
