use std::collections::HashMap;

use super::{Column, Constraint, LpProblem, Relation, Variant};
use crate::model::{Instance, KnapsackJob, Node};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// On-pull reward plus expected completion reward of unit-time transitions.
pub fn effective_reward<S: Scalar>(node: &Node<S>, action: usize) -> S {
    node.transitions[action]
        .iter()
        .filter(|t| t.time == 1)
        .fold(node.reward(action), |acc, t| acc + t.prob.clone() * t.completion_reward.clone())
}

/// `ER[i][t-1]`: expected reward of job `i` started at the beginning of `t`.
pub fn expected_reward_table<S: Scalar>(jobs: &[KnapsackJob<S>], budget: usize) -> Vec<Vec<S>> {
    jobs.iter()
        .map(|job| {
            (1..=budget)
                .map(|t| {
                    job.outcomes
                        .iter()
                        .filter(|o| t + o.size - 1 <= budget)
                        .fold(S::zero(), |acc, o| acc + o.prob.clone() * o.reward.clone())
                })
                .collect()
        })
        .collect()
}

struct Builder<S> {
    columns: Vec<Column>,
    index: HashMap<Column, usize>,
    objective: Vec<S>,
    constraints: Vec<Constraint<S>>,
}

impl<S: Scalar> Builder<S> {
    fn new() -> Self {
        Builder { columns: Vec::new(), index: HashMap::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    fn add(&mut self, col: Column, cost: S) {
        self.index.insert(col, self.columns.len());
        self.columns.push(col);
        self.objective.push(cost);
    }

    fn col(&self, col: &Column) -> Option<usize> {
        self.index.get(col).copied()
    }

    fn row(&mut self, coeffs: Vec<(usize, S)>, relation: Relation, rhs: S, label: String) {
        self.constraints.push(Constraint { coeffs, relation, rhs, label });
    }

    fn finish(self, variant: Variant, budget: usize) -> LpProblem<S> {
        LpProblem { variant, budget, columns: self.columns, objective: self.objective, constraints: self.constraints }
    }
}

/// Preemptive arm-level relaxation.
pub fn build_poly_lp<S: Scalar>(instance: &Instance<S>) -> Result<LpProblem<S>> {
    build_arm_lp(instance, true)
}

/// Arm-level relaxation without preemption: a non-root node is occupied only
/// on the step right after its parent was played.
pub fn build_poly_lp_nopreempt<S: Scalar>(instance: &Instance<S>) -> Result<LpProblem<S>> {
    build_arm_lp(instance, false)
}

fn build_arm_lp<S: Scalar>(instance: &Instance<S>, preemptive: bool) -> Result<LpProblem<S>> {
    if !instance.is_unit_time() {
        return Err(Error::NotUnitTime);
    }
    let depths = instance.depths()?;
    let budget = instance.budget;
    let mut b = Builder::new();

    // A node at depth d cannot be occupied before time d + 1.
    let first = |i: usize, u: usize| depths[i][u] + 1;
    for (i, arm) in instance.arms.iter().enumerate() {
        for (u, node) in arm.nodes.iter().enumerate() {
            for t in first(i, u)..=budget {
                b.add(Column::S { arm: i, node: u, t }, S::zero());
                for a in node.available_actions() {
                    b.add(Column::X { arm: i, node: u, action: a, t }, effective_reward(node, a));
                }
            }
        }
    }

    for t in 1..=budget {
        let coeffs: Vec<_> = b
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Column::X { t: ct, .. } if *ct == t))
            .map(|(j, _)| (j, S::one()))
            .collect();
        if !coeffs.is_empty() {
            b.row(coeffs, Relation::Le, S::one(), format!("capacity t={t}"));
        }
    }

    for (i, arm) in instance.arms.iter().enumerate() {
        let parents: Vec<Vec<(usize, usize, S)>> = (0..arm.nodes.len()).map(|u| arm.parents_of(u)).collect();
        for (u, node) in arm.nodes.iter().enumerate() {
            let id = &node.id;
            for t in first(i, u)..=budget {
                let s_col = b.col(&Column::S { arm: i, node: u, t }).expect("s column exists");
                let xs: Vec<usize> = node
                    .available_actions()
                    .filter_map(|a| b.col(&Column::X { arm: i, node: u, action: a, t }))
                    .collect();
                if !xs.is_empty() {
                    let mut coeffs: Vec<_> = xs.iter().map(|&j| (j, S::one())).collect();
                    coeffs.push((s_col, -S::one()));
                    let (rel, label) = if node.is_bridge {
                        (Relation::Eq, format!("bridge {id} t={t}"))
                    } else {
                        (Relation::Le, format!("occupancy {id} t={t}"))
                    };
                    b.row(coeffs, rel, S::zero(), label);
                }

                if u == arm.root && t == 1 {
                    b.row(vec![(s_col, S::one())], Relation::Eq, S::one(), format!("start {id}"));
                    continue;
                }
                // Flow balance for s_{u,t}.
                let mut coeffs = vec![(s_col, S::one())];
                let carry = preemptive || u == arm.root;
                if carry {
                    if let Some(prev) = b.col(&Column::S { arm: i, node: u, t: t - 1 }) {
                        coeffs.push((prev, -S::one()));
                    }
                    for a in node.available_actions() {
                        if let Some(j) = b.col(&Column::X { arm: i, node: u, action: a, t: t - 1 }) {
                            coeffs.push((j, S::one()));
                        }
                    }
                }
                for (v, a, p) in &parents[u] {
                    if let Some(j) = b.col(&Column::X { arm: i, node: *v, action: *a, t: t - 1 }) {
                        coeffs.push((j, -p.clone()));
                    }
                }
                b.row(coeffs, Relation::Eq, S::zero(), format!("flow {id} t={t}"));
            }
        }
    }
    let variant = if preemptive { Variant::Poly } else { Variant::PolyNoPreempt };
    Ok(b.finish(variant, budget))
}

/// Job-level relaxation of stochastic knapsack without cancellation.
pub fn build_knapsack_lp<S: Scalar>(jobs: &[KnapsackJob<S>], budget: usize) -> LpProblem<S> {
    let er = expected_reward_table(jobs, budget);
    let mut b = Builder::new();
    for (i, row) in er.iter().enumerate() {
        for t in 1..=budget {
            b.add(Column::JobX { job: i, t }, row[t - 1].clone());
            b.add(Column::JobS { job: i, t }, S::zero());
        }
    }
    let x = |i: usize, t: usize| 2 * (i * budget + t - 1);
    let s = |i: usize, t: usize| 2 * (i * budget + t - 1) + 1;
    for t in 1..=budget {
        let mut coeffs = Vec::new();
        for (i, job) in jobs.iter().enumerate() {
            for start in 1..=t {
                let running = job.prob_size_exceeds(t - start);
                if !running.is_zero() {
                    coeffs.push((x(i, start), running));
                }
            }
        }
        if !coeffs.is_empty() {
            b.row(coeffs, Relation::Le, S::one(), format!("capacity t={t}"));
        }
    }
    for i in 0..jobs.len() {
        for t in 1..=budget {
            b.row(vec![(x(i, t), S::one()), (s(i, t), -S::one())], Relation::Le, S::zero(), format!("start job{i} t={t}"));
            if t == 1 {
                b.row(vec![(s(i, 1), S::one())], Relation::Eq, S::one(), format!("fresh job{i}"));
            } else {
                b.row(
                    vec![(s(i, t), S::one()), (s(i, t - 1), -S::one()), (x(i, t - 1), S::one())],
                    Relation::Eq,
                    S::zero(),
                    format!("flow job{i} t={t}"),
                );
            }
        }
    }
    b.finish(Variant::Knapsack, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;
    use crate::model::{Arm, Mode, Transition};
    use crate::reduce::{jobs_to_arms, reduce};
    use crate::scalar::Rational;

    fn loop_arm(reward: f64) -> Arm<f64> {
        let mut u = Node::new("u", 1);
        u.rewards[0] = reward;
        u.transitions[0].push(Transition { to: 1, time: 1, prob: 1.0, completion_reward: 0.0 });
        Arm { nodes: vec![u, Node::new("end", 1)], root: 0, terminal: None }
    }

    fn rename(mut arm: Arm<f64>, k: usize) -> Arm<f64> {
        for n in &mut arm.nodes {
            n.id = format!("{}{k}", n.id);
        }
        arm
    }

    #[test]
    fn single_play() {
        let inst = Instance { arms: vec![loop_arm(1.0)], actions: vec!["a".into()], budget: 1, mode: Mode::Preemptive, jobs: None };
        let sol = build_poly_lp(&inst).unwrap().solve_certified().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_binds_for_two_arms() {
        let inst = Instance {
            arms: vec![rename(loop_arm(1.0), 0), rename(loop_arm(1.0), 1)],
            actions: vec!["a".into()],
            budget: 1,
            mode: Mode::Preemptive,
            jobs: None,
        };
        let sol = build_poly_lp(&inst).unwrap().solve_certified().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_unit_job_without_preemption() {
        let job = KnapsackJob::new(vec![(1, Rational::from_ratio(1, 1), Rational::from_ratio(1, 1))]);
        let inst = reduce(&jobs_to_arms(&[job.clone()], 2, false)).unwrap();
        let sol = build_poly_lp_nopreempt(&inst).unwrap().solve_certified().unwrap();
        assert_eq!(sol.objective, Rational::from_ratio(1, 1));
        let sol = build_knapsack_lp(&[job], 2).solve_certified().unwrap();
        assert_eq!(sol.objective, Rational::from_ratio(1, 1));
    }

    #[test]
    fn deterministic_job_filling_the_budget() {
        let job = KnapsackJob::new(vec![(5, 1.0f64, 3.0)]);
        let sol = build_knapsack_lp(&[job], 5).solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn expected_reward_is_nonincreasing_in_start_time() {
        let job = KnapsackJob::new(vec![(2, 0.25, 1.0), (4, 0.75, 2.0)]);
        let er = expected_reward_table(&[job], 5);
        assert_eq!(er[0], vec![1.75, 1.75, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn non_layered_input_is_rejected() {
        let mut u = Node::<f64>::new("u", 1);
        u.transitions[0].push(Transition { to: 0, time: 1, prob: 1.0, completion_reward: 0.0 });
        let inst = Instance {
            arms: vec![Arm { nodes: vec![u], root: 0, terminal: None }],
            actions: vec!["a".into()],
            budget: 2,
            mode: Mode::Preemptive,
            jobs: None,
        };
        assert!(matches!(build_poly_lp(&inst), Err(Error::NotLayered(_))));
    }
}
