//! Projection of a joint-state policy onto per-arm LP variables.
//!
//! The state distribution `y_t` is pushed forward under the policy. The
//! projected `x^a_{u,t}` is the probability that arm `i` is played with `a`
//! at `u` at time `t`, and `s_{u,t}` the probability that arm `i` sits at
//! `u` at the beginning of `t`.

use serde::Serialize;

use crate::dp::{evaluate_policy, Choice, JointModel, JointPolicy};
use crate::lp::PolyTables;
use crate::model::Instance;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProjectionCertificate<S> {
    pub projected_x: Vec<Vec<Vec<Vec<S>>>>,
    pub projected_s: Vec<Vec<Vec<S>>>,
    pub projected_objective: S,
    pub policy_value: S,
    pub max_violation: f64,
    pub objective_match: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub projected_objective: f64,
    pub policy_value: f64,
    pub max_violation: f64,
    pub objective_match: f64,
    pub passed: bool,
}

pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

impl<S: Scalar> ProjectionCertificate<S> {
    pub fn passed(&self) -> bool {
        self.max_violation <= CERTIFICATE_TOLERANCE && self.objective_match <= CERTIFICATE_TOLERANCE
    }

    pub fn tables(&self, budget: usize) -> PolyTables<S> {
        PolyTables { budget, x: self.projected_x.clone(), s: self.projected_s.clone() }
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            projected_objective: self.projected_objective.to_f64(),
            policy_value: self.policy_value.to_f64(),
            max_violation: self.max_violation,
            objective_match: self.objective_match,
            passed: self.passed(),
        }
    }
}

/// Projects `policy` on a unit-time, layered instance and checks the
/// relaxation matching the instance's mode.
pub fn project_policy<S: Scalar, P: JointPolicy<S> + ?Sized>(
    model: &JointModel<S>,
    policy: &P,
) -> Result<ProjectionCertificate<S>> {
    let inst = model.instance;
    if !inst.is_unit_time() {
        return Err(Error::NotUnitTime);
    }
    inst.depths()?;
    let budget = model.budget();
    let mut tables = PolyTables::zeros(inst);
    let mut y = vec![S::zero(); model.space.len()];
    y[model.space.encode(&model.initial())] = S::one();
    let mut nodes = vec![0; model.space.arms()];
    for t in 1..=budget {
        let mut next = vec![S::zero(); y.len()];
        for (state, mass) in y.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            model.space.decode(state, &mut nodes);
            for (i, &u) in nodes.iter().enumerate() {
                if !model.is_phi(i, u) {
                    tables.s[i][u][t - 1] = tables.s[i][u][t - 1].clone() + mass.clone();
                }
            }
            for (choice, w) in policy.decide(model, &nodes, t) {
                if w.is_zero() {
                    continue;
                }
                let m = mass.clone() * w;
                if let Choice::Play { arm, action } = choice {
                    let slot = &mut tables.x[arm][nodes[arm]][action][t - 1];
                    *slot = slot.clone() + m.clone();
                }
                for succ in model.step(&nodes, choice).1 {
                    next[succ.next] = next[succ.next].clone() + m.clone() * succ.prob;
                }
            }
        }
        y = next;
    }
    let max_violation = check_relaxation(inst, &tables, model.preemptive);
    let projected_objective = tables.objective(inst);
    let policy_value = evaluate_policy(model, policy);
    let objective_match = (projected_objective.clone() - policy_value.clone()).abs().to_f64();
    Ok(ProjectionCertificate {
        projected_x: tables.x,
        projected_s: tables.s,
        projected_objective,
        policy_value,
        max_violation,
        objective_match,
    })
}

/// Largest violation of the arm-level relaxation on the full grid
/// `t = 1..=budget`, every node and action.
pub fn check_relaxation<S: Scalar>(inst: &Instance<S>, tables: &PolyTables<S>, preemptive: bool) -> f64 {
    let budget = tables.budget;
    let mut worst: f64 = 0.0;
    let mut bump = |v: S| worst = worst.max(v.to_f64());
    for t in 1..=budget {
        let mut total = S::zero();
        for (i, arm) in inst.arms.iter().enumerate() {
            for (u, node) in arm.nodes.iter().enumerate() {
                let s = tables.s(i, u, t);
                bump(-s.clone());
                let mut played = S::zero();
                for a in 0..inst.num_actions() {
                    let x = tables.x(i, u, a, t);
                    bump(-x.clone());
                    if !node.is_available(a) {
                        bump(x.clone().abs());
                    }
                    played = played + x;
                }
                total = total + played.clone();
                bump(played.clone() - s.clone());
                if node.is_bridge {
                    bump((played.clone() - s.clone()).abs());
                }
                let expected = if t == 1 {
                    if u == arm.root {
                        S::one()
                    } else {
                        S::zero()
                    }
                } else {
                    let inflow = arm
                        .parents_of(u)
                        .into_iter()
                        .fold(S::zero(), |acc, (v, b, p)| acc + p * tables.x(i, v, b, t - 1));
                    if preemptive || u == arm.root {
                        tables.s(i, u, t - 1) - tables.x_node(i, u, t - 1) + inflow
                    } else {
                        inflow
                    }
                };
                bump((s - expected).abs());
            }
        }
        bump(total - S::one());
    }
    worst
}
