//! Flow decomposition: splits each parent's outgoing LP flow into
//! conditional probabilities of moving on to each child status.
//!
//! For a parent play `(v, b, t')` and an arrival at child `u`, the group
//! `q(v, b, t', u)` lists `(a, t, q)` entries with `t > t'` plus the leftover
//! abandon mass. Weighted by `x^b_{v,t'} p^b_{v,u}`, the entries into
//! `(u, a, t)` add up to `x^a_{u,t}`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::lp::PolyTables;
use crate::model::Instance;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub arm: usize,
    pub parent: usize,
    pub parent_action: usize,
    pub parent_t: usize,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QEntry<S> {
    pub action: usize,
    pub t: usize,
    pub q: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QGroup<S> {
    pub entries: Vec<QEntry<S>>,
    pub abandon: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QDecomposition<S> {
    pub groups: BTreeMap<GroupKey, QGroup<S>>,
}

impl<S: Scalar> QDecomposition<S> {
    pub fn group(&self, key: &GroupKey) -> Option<&QGroup<S>> {
        self.groups.get(key)
    }
}

/// Errors if a child's LP flow cannot be covered by earlier parent flow.
const UNCOVERED: f64 = 1e-9;

pub fn flow_decompose<S: Scalar>(instance: &Instance<S>, tables: &PolyTables<S>) -> Result<QDecomposition<S>> {
    let mut out = QDecomposition { groups: BTreeMap::new() };
    for arm in 0..instance.arms.len() {
        decompose_arm(instance, tables, arm, &mut out)?;
    }
    Ok(out)
}

/// Decomposes one arm only; arms never interact.
pub fn decompose_arm<S: Scalar>(
    instance: &Instance<S>,
    tables: &PolyTables<S>,
    arm: usize,
    out: &mut QDecomposition<S>,
) -> Result<()> {
    let budget = tables.budget;
    let a_count = instance.num_actions();
    let nodes = &instance.arms[arm].nodes;
    for u in 0..nodes.len() {
        if u == instance.arms[arm].root {
            continue;
        }
        let parents = instance.arms[arm].parents_of(u);
        if parents.is_empty() {
            continue;
        }
        // Parent residuals keyed by (t', v, b) so the first live entry is the
        // tie-break winner.
        let mut residual: BTreeMap<(usize, usize, usize), (S, S)> = BTreeMap::new();
        for (v, b, p) in &parents {
            for t in 1..=budget {
                let x = tables.x(arm, *v, *b, t);
                if x.is_positive_tol() {
                    let flow = x * p.clone();
                    residual.insert((t, *v, *b), (flow.clone(), flow.clone()));
                    out.groups.insert(
                        GroupKey { arm, parent: *v, parent_action: *b, parent_t: t, child: u },
                        QGroup { entries: Vec::new(), abandon: S::one() },
                    );
                }
            }
        }
        for t in 1..=budget {
            for a in 0..a_count {
                let mut need = tables.x(arm, u, a, t);
                if !need.is_positive_tol() {
                    continue;
                }
                while need.is_positive_tol() {
                    let Some((&(tp, v, b), (left, full))) =
                        residual.iter_mut().find(|((tp, _, _), (left, _))| *tp < t && left.is_positive_tol())
                    else {
                        if need.to_f64() > UNCOVERED {
                            return Err(Error::Decomposition(format!(
                                "flow {} into node {} action {a} at t={t} exceeds earlier parent flow",
                                need,
                                nodes[u].id
                            )));
                        }
                        break;
                    };
                    let moved = if *left < need { left.clone() } else { need.clone() };
                    let q = moved.clone() / full.clone();
                    *left = left.clone() - moved.clone();
                    need = need - moved;
                    let key = GroupKey { arm, parent: v, parent_action: b, parent_t: tp, child: u };
                    let group = out.groups.get_mut(&key).expect("group created with residual");
                    group.entries.push(QEntry { action: a, t, q });
                }
            }
        }
    }
    for (_, group) in out.groups.iter_mut().filter(|(k, _)| k.arm == arm) {
        normalize(group);
    }
    Ok(())
}

/// Sets `abandon = 1 - sum(q)`, rescaling the entries if rounding pushed the
/// sum past one.
fn normalize<S: Scalar>(group: &mut QGroup<S>) {
    let total = group.entries.iter().fold(S::zero(), |acc, e| acc + e.q.clone());
    if total > S::one() {
        for e in &mut group.entries {
            e.q = e.q.clone() / total.clone();
        }
        group.abandon = S::zero();
    } else {
        group.abandon = S::one() - total;
    }
}

/// Largest residuals of the two defining identities: each group sums to one,
/// and the q-weighted parent flow into every child status reproduces its LP
/// value.
pub fn identity_residuals<S: Scalar>(instance: &Instance<S>, tables: &PolyTables<S>, q: &QDecomposition<S>) -> (f64, f64) {
    let mut sum_residual: f64 = 0.0;
    let mut inflow: BTreeMap<(usize, usize, usize, usize), S> = BTreeMap::new();
    for (key, group) in &q.groups {
        let total = group.entries.iter().fold(group.abandon.clone(), |acc, e| acc + e.q.clone());
        sum_residual = sum_residual.max((total - S::one()).abs().to_f64());
        let node = &instance.arms[key.arm].nodes[key.parent];
        let flow = tables.x(key.arm, key.parent, key.parent_action, key.parent_t)
            * node.prob_to(key.parent_action, key.child);
        for e in &group.entries {
            let slot = inflow.entry((key.arm, key.child, e.action, e.t)).or_insert_with(S::zero);
            *slot = slot.clone() + flow.clone() * e.q.clone();
        }
    }
    let mut flow_residual: f64 = 0.0;
    for (i, arm) in instance.arms.iter().enumerate() {
        for u in 0..arm.nodes.len() {
            if u == arm.root {
                continue;
            }
            for a in 0..instance.num_actions() {
                for t in 1..=tables.budget {
                    let got = inflow.get(&(i, u, a, t)).cloned().unwrap_or_else(S::zero);
                    flow_residual = flow_residual.max((got - tables.x(i, u, a, t)).abs().to_f64());
                }
            }
        }
    }
    (sum_residual, flow_residual)
}
