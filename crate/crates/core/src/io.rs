//! JSON instance files.
//!
//! Full form: `{budget, mode, actions, arms: [...]}`, optionally with `jobs`.
//! Shorthand: `{budget, mode, jobs: [{outcomes: [{size, prob, reward}]}]}`.
//! Any number may be written as a plain JSON number or as `{num, den}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Arm, Instance, JobOutcome, KnapsackJob, Mode, Node, Transition};
use crate::reduce::jobs_to_arms;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Plain(serde_json::Number),
    Fraction { num: i64, den: i64 },
}

impl Number {
    fn to_scalar<S: Scalar>(&self) -> Result<S> {
        match self {
            Number::Plain(n) => {
                S::parse_decimal(&n.to_string()).ok_or_else(|| Error::Parse(format!("bad number {n}")))
            }
            Number::Fraction { den: 0, .. } => Err(Error::Parse("zero denominator".into())),
            Number::Fraction { num, den } => Ok(S::from_ratio(*num, *den)),
        }
    }

    fn from_scalar<S: Scalar>(value: &S) -> Number {
        if S::is_exact() {
            let text = value.to_string();
            if let Some((n, d)) = text.split_once('/') {
                if let (Ok(num), Ok(den)) = (n.parse(), d.parse()) {
                    return Number::Fraction { num, den };
                }
            } else if let Ok(n) = text.parse::<i64>() {
                return Number::Plain(n.into());
            }
        }
        let v = value.to_f64();
        if v.fract() == 0.0 && v.abs() < 1e15 {
            return Number::Plain((v as i64).into());
        }
        Number::Plain(serde_json::Number::from_f64(v).unwrap_or_else(|| 0.into()))
    }
}

fn one() -> usize {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionFile {
    pub to: String,
    #[serde(default = "one")]
    pub time: usize,
    pub prob: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_on_completion: Option<Number>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_bridge: bool,
    #[serde(default)]
    pub rewards: BTreeMap<String, Number>,
    #[serde(default)]
    pub transitions: BTreeMap<String, Vec<TransitionFile>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmFile {
    pub root: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<String>,
    pub nodes: Vec<NodeFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeFile {
    pub size: usize,
    pub prob: Number,
    pub reward: Number,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobFile {
    pub outcomes: Vec<OutcomeFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub budget: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<ArmFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<Vec<JobFile>>,
}

impl InstanceFile {
    pub fn into_instance<S: Scalar>(self) -> Result<Instance<S>> {
        let jobs = match &self.jobs {
            Some(jobs) => Some(
                jobs.iter()
                    .map(|j| {
                        Ok(KnapsackJob {
                            outcomes: j
                                .outcomes
                                .iter()
                                .map(|o| {
                                    Ok(JobOutcome { size: o.size, prob: o.prob.to_scalar()?, reward: o.reward.to_scalar()? })
                                })
                                .collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let Some(arm_files) = self.arms else {
            let jobs = jobs.ok_or_else(|| Error::Parse("instance needs `arms` or `jobs`".into()))?;
            let mut inst = jobs_to_arms(&jobs, self.budget, self.mode != Mode::KnapsackNoCancel);
            inst.mode = self.mode;
            return Ok(inst);
        };
        let actions = self.actions.unwrap_or_else(|| vec!["alpha".to_owned()]);
        let action_index: HashMap<&str, usize> = actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let lookup_action = |name: &str| {
            action_index.get(name).copied().ok_or_else(|| Error::Parse(format!("unknown action `{name}`")))
        };
        let mut arms = Vec::with_capacity(arm_files.len());
        for af in &arm_files {
            let ids: HashMap<&str, usize> = af.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
            let lookup_node = |id: &str| {
                ids.get(id).copied().ok_or_else(|| Error::Parse(format!("transition target `{id}` is not in the arm")))
            };
            let mut nodes = Vec::with_capacity(af.nodes.len());
            for nf in &af.nodes {
                let mut node = Node::new(nf.id.clone(), actions.len());
                node.is_bridge = nf.is_bridge;
                for (name, value) in &nf.rewards {
                    node.rewards[lookup_action(name)?] = value.to_scalar()?;
                }
                for (name, list) in &nf.transitions {
                    let a = lookup_action(name)?;
                    for tf in list {
                        node.transitions[a].push(Transition {
                            to: lookup_node(&tf.to)?,
                            time: tf.time,
                            prob: tf.prob.to_scalar()?,
                            completion_reward: match &tf.reward_on_completion {
                                Some(v) => v.to_scalar()?,
                                None => S::zero(),
                            },
                        });
                    }
                }
                nodes.push(node);
            }
            let root = lookup_node(&af.root)?;
            arms.push(Arm { nodes, root, terminal: af.terminal.clone() });
        }
        Ok(Instance { arms, actions, budget: self.budget, mode: self.mode, jobs })
    }

    pub fn from_instance<S: Scalar>(instance: &Instance<S>) -> InstanceFile {
        let actions = &instance.actions;
        let arms = instance
            .arms
            .iter()
            .map(|arm| ArmFile {
                root: arm.nodes[arm.root].id.clone(),
                terminal: arm.terminal.clone(),
                nodes: arm
                    .nodes
                    .iter()
                    .map(|n| NodeFile {
                        id: n.id.clone(),
                        is_bridge: n.is_bridge,
                        rewards: n
                            .rewards
                            .iter()
                            .enumerate()
                            .filter(|(_, r)| !r.is_zero())
                            .map(|(a, r)| (actions[a].clone(), Number::from_scalar(r)))
                            .collect(),
                        transitions: n
                            .transitions
                            .iter()
                            .enumerate()
                            .filter(|(_, ts)| !ts.is_empty())
                            .map(|(a, ts)| {
                                let list = ts
                                    .iter()
                                    .map(|t| TransitionFile {
                                        to: arm.nodes[t.to].id.clone(),
                                        time: t.time,
                                        prob: Number::from_scalar(&t.prob),
                                        reward_on_completion: (!t.completion_reward.is_zero())
                                            .then(|| Number::from_scalar(&t.completion_reward)),
                                    })
                                    .collect();
                                (actions[a].clone(), list)
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        let jobs = instance.jobs.as_ref().map(|jobs| {
            jobs.iter()
                .map(|j| JobFile {
                    outcomes: j
                        .outcomes
                        .iter()
                        .map(|o| OutcomeFile {
                            size: o.size,
                            prob: Number::from_scalar(&o.prob),
                            reward: Number::from_scalar(&o.reward),
                        })
                        .collect(),
                })
                .collect()
        });
        InstanceFile {
            budget: instance.budget,
            mode: instance.mode,
            actions: Some(actions.clone()),
            arms: Some(arms),
            jobs,
        }
    }
}

pub fn parse_instance<S: Scalar>(text: &str) -> Result<Instance<S>> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn load_instance<S: Scalar>(path: impl AsRef<Path>) -> Result<Instance<S>> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn to_json<S: Scalar>(instance: &Instance<S>) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance)).expect("instance files always serialize")
}

pub fn save_instance<S: Scalar>(instance: &Instance<S>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(instance) + "\n")?;
    Ok(())
}
