//! Built-in instances and a seeded random generator.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Arm, Instance, KnapsackJob, Mode, Node, Transition};
use crate::reduce::jobs_to_arms;
use crate::rng;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Gap2 { n: usize },
    KnapsackAppendix,
    Random(RandomSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub arms: usize,
    pub nodes_per_arm: usize,
    pub actions: usize,
    pub budget: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Longest transition duration; 1 gives a unit-time instance.
    #[serde(default = "one")]
    pub max_time: usize,
}

fn one() -> usize {
    1
}

impl RandomSpec {
    pub fn new(arms: usize, nodes_per_arm: usize, actions: usize, budget: usize, seed: u64, mode: Mode) -> Self {
        RandomSpec { arms, nodes_per_arm, actions, budget, seed, mode, max_time: 1 }
    }

    pub fn with_max_time(mut self, max_time: usize) -> Self {
        self.max_time = max_time;
        self
    }
}

pub fn generate<S: Scalar>(spec: &GeneratorSpec) -> Result<Instance<S>> {
    match spec {
        GeneratorSpec::Gap2 { n } => gap2(*n),
        GeneratorSpec::KnapsackAppendix => Ok(knapsack_appendix()),
        GeneratorSpec::Random(r) => Ok(random(r)?.convert()),
    }
}

/// The two-job family whose no-preemption relaxation approaches twice the
/// optimum: job 0 takes `n + 1` steps with probability `1 - 1/n` (reward 1)
/// and one step otherwise (reward 0); job 1 takes one step and pays 1.
/// Budget `n + 1`, no cancellation.
pub fn gap2<S: Scalar>(n: usize) -> Result<Instance<S>> {
    if n < 2 {
        return Err(Error::Argument(format!("gap2 needs N >= 2, got {n}")));
    }
    let n_i = n as i64;
    let jobs = vec![
        KnapsackJob::new(vec![
            (n + 1, S::from_ratio(n_i - 1, n_i), S::one()),
            (1, S::from_ratio(1, n_i), S::zero()),
        ]),
        KnapsackJob::new(vec![(1, S::one(), S::one())]),
    ];
    Ok(jobs_to_arms(&jobs, n + 1, false))
}

/// Three items with budget 10 where preemption is worth strictly more than
/// cancellation. Arms are caterpillars; the mode is preemptive.
pub fn knapsack_appendix<S: Scalar>() -> Instance<S> {
    let q = |n: i64, d: i64| S::from_ratio(n, d);
    let jobs = vec![
        KnapsackJob::new(vec![(6, q(1, 2), q(4, 1)), (1, q(1, 2), q(4, 1))]),
        KnapsackJob::new(vec![(9, q(1, 1), q(9, 1))]),
        KnapsackJob::new(vec![(8, q(1, 2), q(8, 1)), (4, q(1, 2), q(8, 1))]),
    ];
    let mut inst = jobs_to_arms(&jobs, 10, true);
    inst.mode = Mode::Preemptive;
    inst
}

/// Random layered arms with normalized-uniform transition rows and rewards
/// uniform in `[0, 1]`.
///
/// Each arm has `nodes_per_arm` decision nodes on consecutive depth levels
/// (just the root when the budget is one) plus an `end` leaf below the
/// deepest level. With `max_time > 1`, durations
/// are drawn uniformly but every node keeps a path short enough to stay
/// reachable within the budget.
pub fn random(spec: &RandomSpec) -> Result<Instance<f64>> {
    if spec.arms == 0 || spec.nodes_per_arm == 0 || spec.actions == 0 || spec.budget == 0 || spec.max_time == 0 {
        return Err(Error::Argument("random instances need all counts >= 1".into()));
    }
    let actions: Vec<String> =
        (0..spec.actions).map(|a| if a == 0 { "alpha".to_owned() } else { format!("a{a}") }).collect();
    let mut arms = Vec::with_capacity(spec.arms);
    for i in 0..spec.arms {
        let mut r = rng::stream(spec.seed, i as u64, 0);
        arms.push(random_arm(&mut r, i, spec, actions.len()));
    }
    Ok(Instance { arms, actions, budget: spec.budget, mode: spec.mode, jobs: None })
}

fn random_arm(r: &mut rng::StreamRng, i: usize, spec: &RandomSpec, num_actions: usize) -> Arm<f64> {
    // With a budget of one only the root can ever be played.
    let n = if spec.budget == 1 { 1 } else { spec.nodes_per_arm };
    // Levels: the root alone on level 0, then each node stays or goes one deeper.
    let max_level = spec.budget - 1;
    let mut level = vec![0usize; n];
    for k in 1..n {
        let deeper = k == 1 || r.gen_bool(0.5);
        level[k] = if deeper && level[k - 1] < max_level { level[k - 1] + 1 } else { level[k - 1].max(1) };
    }
    let levels = level[n - 1] + 1;
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); levels + 1];
    for (k, &l) in level.iter().enumerate() {
        by_level[l].push(k);
    }
    let end = n;
    by_level[levels].push(end);

    let mut nodes: Vec<Node<f64>> = (0..n).map(|k| Node::new(format!("a{i}n{k}"), num_actions)).collect();
    nodes.push(Node::new(format!("a{i}end"), num_actions));

    // Designated parent per node keeps every node reachable.
    let mut designated: Vec<Option<(usize, usize)>> = vec![None; n + 1];
    for l in 1..=levels {
        for &c in &by_level[l] {
            let parent = *by_level[l - 1].choose(r).expect("levels are nonempty");
            designated[c] = Some((parent, r.gen_range(0..num_actions)));
        }
    }
    // Levels below each node, used to keep durations inside the budget.
    let below = |k: usize| levels - if k == end { levels } else { level[k] };
    let mut dist = vec![usize::MAX; n + 1];
    dist[0] = 0;
    for l in 0..levels {
        for &u in &by_level[l] {
            for a in 0..num_actions {
                nodes[u].rewards[a] = r.gen::<f64>();
                let candidates = &by_level[l + 1];
                let mut targets: Vec<usize> = candidates.iter().copied().filter(|_| r.gen_bool(0.6)).collect();
                for &c in candidates {
                    if designated[c] == Some((u, a)) && !targets.contains(&c) {
                        targets.push(c);
                    }
                }
                if targets.is_empty() {
                    targets.push(*candidates.choose(r).expect("levels are nonempty"));
                }
                targets.sort_unstable();
                let weights: Vec<f64> = targets.iter().map(|_| r.gen::<f64>() + 1e-3).collect();
                let total: f64 = weights.iter().sum();
                for (&to, w) in targets.iter().zip(weights) {
                    let mut time = if spec.max_time > 1 { r.gen_range(1..=spec.max_time) } else { 1 };
                    if designated[to] == Some((u, a)) {
                        let room = spec.budget.saturating_sub(below(to) + dist[u]).max(1);
                        time = time.min(room);
                    }
                    dist[to] = dist[to].min(dist[u].saturating_add(time));
                    nodes[u].transitions[a].push(Transition { to, time, prob: w / total, completion_reward: 0.0 });
                }
            }
        }
    }
    Arm { nodes, root: 0, terminal: None }
}
