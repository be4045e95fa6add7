//! LP relaxations and their solutions.

mod build;
pub mod simplex;

use serde::Serialize;

pub use build::{build_knapsack_lp, build_poly_lp, build_poly_lp_nopreempt, effective_reward, expected_reward_table};

use crate::model::Instance;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub coeffs: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    X { arm: usize, node: usize, action: usize, t: usize },
    S { arm: usize, node: usize, t: usize },
    JobX { job: usize, t: usize },
    JobS { job: usize, t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Poly,
    PolyNoPreempt,
    Knapsack,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "poly" => Ok(Variant::Poly),
            "poly-nopre" => Ok(Variant::PolyNoPreempt),
            "knapsack" => Ok(Variant::Knapsack),
            other => Err(format!("unknown LP variant `{other}`")),
        }
    }
}

/// A maximization problem over nonnegative columns.
#[derive(Debug, Clone)]
pub struct LpProblem<S> {
    pub variant: Variant,
    pub budget: usize,
    pub columns: Vec<Column>,
    pub objective: Vec<S>,
    pub constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    pub objective: S,
    pub values: Vec<S>,
    pub duals: Vec<S>,
    pub dual_objective: S,
}

impl<S: Scalar> LpProblem<S> {
    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn solve(&self) -> LpSolution<S> {
        let res = simplex::solve(self.columns.len(), &self.objective, &self.constraints);
        let dual_objective = res
            .duals
            .iter()
            .zip(&self.constraints)
            .fold(S::zero(), |acc, (y, c)| acc + y.clone() * c.rhs.clone());
        LpSolution { status: res.status, objective: res.objective, values: res.values, duals: res.duals, dual_objective }
    }

    /// Solves and fails unless the result is optimal and primal and dual
    /// objectives agree.
    pub fn solve_certified(&self) -> Result<LpSolution<S>> {
        let sol = self.solve();
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::Lp("infeasible".into())),
            LpStatus::Unbounded => return Err(Error::Lp("unbounded".into())),
        }
        let slack = S::tolerance().to_f64();
        let gap = (sol.objective.clone() - sol.dual_objective.clone()).abs().to_f64();
        if gap > (100.0 * slack).max(1e-7) * sol.objective.to_f64().abs().max(1.0) {
            return Err(Error::Lp(format!("duality gap {gap:e}")));
        }
        let violation = self.max_violation(&sol.values);
        if violation > (1000.0 * slack).max(1e-9) {
            return Err(Error::Lp(format!("primal violation {violation:e}")));
        }
        Ok(sol)
    }

    /// Largest violation of any row (and of nonnegativity) by `values`.
    pub fn max_violation(&self, values: &[S]) -> f64 {
        let mut worst: f64 = values.iter().map(|v| (-v.to_f64()).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs = c.coeffs.iter().fold(S::zero(), |acc, (j, a)| acc + a.clone() * values[*j].clone());
            let diff = (lhs - c.rhs.clone()).to_f64();
            let v = match c.relation {
                Relation::Le => diff.max(0.0),
                Relation::Ge => (-diff).max(0.0),
                Relation::Eq => diff.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Arm-level solution values on a dense grid: `x[arm][node][action][t-1]`
/// and `s[arm][node][t-1]`, zero where no column exists.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTables<S> {
    pub budget: usize,
    pub x: Vec<Vec<Vec<Vec<S>>>>,
    pub s: Vec<Vec<Vec<S>>>,
}

/// Job-level solution values `x[job][t-1]`, `s[job][t-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JobTables<S> {
    pub budget: usize,
    pub x: Vec<Vec<S>>,
    pub s: Vec<Vec<S>>,
}

const FLOOR: f64 = 1e-9;

fn clamp<S: Scalar>(v: &S, what: &Column) -> Result<S> {
    let f = v.to_f64();
    if f < -FLOOR || f > 1.0 + FLOOR {
        return Err(Error::Lp(format!("value {f} of {what:?} outside [0,1]")));
    }
    Ok(if *v < S::zero() { S::zero() } else { v.clone() })
}

impl<S: Scalar> PolyTables<S> {
    pub fn zeros(instance: &Instance<S>) -> Self {
        let b = instance.budget;
        let a = instance.num_actions();
        PolyTables {
            budget: b,
            x: instance.arms.iter().map(|arm| vec![vec![vec![S::zero(); b]; a]; arm.nodes.len()]).collect(),
            s: instance.arms.iter().map(|arm| vec![vec![S::zero(); b]; arm.nodes.len()]).collect(),
        }
    }

    pub fn from_solution(instance: &Instance<S>, problem: &LpProblem<S>, solution: &LpSolution<S>) -> Result<Self> {
        let mut tables = Self::zeros(instance);
        for (col, v) in problem.columns.iter().zip(&solution.values) {
            match *col {
                Column::X { arm, node, action, t } => tables.x[arm][node][action][t - 1] = clamp(v, col)?,
                Column::S { arm, node, t } => tables.s[arm][node][t - 1] = clamp(v, col)?,
                _ => return Err(Error::Lp("job-level column in an arm-level problem".into())),
            }
        }
        Ok(tables)
    }

    /// `x^a_{u,t}`, zero outside `1..=budget`.
    pub fn x(&self, arm: usize, node: usize, action: usize, t: usize) -> S {
        if t == 0 || t > self.budget {
            return S::zero();
        }
        self.x[arm][node][action][t - 1].clone()
    }

    /// `sum_a x^a_{u,t}`.
    pub fn x_node(&self, arm: usize, node: usize, t: usize) -> S {
        if t == 0 || t > self.budget {
            return S::zero();
        }
        self.x[arm][node].iter().fold(S::zero(), |acc, row| acc + row[t - 1].clone())
    }

    pub fn s(&self, arm: usize, node: usize, t: usize) -> S {
        if t == 0 || t > self.budget {
            return S::zero();
        }
        self.s[arm][node][t - 1].clone()
    }

    pub fn objective(&self, instance: &Instance<S>) -> S {
        let mut total = S::zero();
        for (i, arm) in instance.arms.iter().enumerate() {
            for (u, node) in arm.nodes.iter().enumerate() {
                for a in node.available_actions() {
                    let r = effective_reward(node, a);
                    for t in 1..=self.budget {
                        total = total + r.clone() * self.x(i, u, a, t);
                    }
                }
            }
        }
        total
    }
}

impl<S: Scalar> JobTables<S> {
    pub fn from_solution(num_jobs: usize, problem: &LpProblem<S>, solution: &LpSolution<S>) -> Result<Self> {
        let b = problem.budget;
        let mut tables = JobTables { budget: b, x: vec![vec![S::zero(); b]; num_jobs], s: vec![vec![S::zero(); b]; num_jobs] };
        for (col, v) in problem.columns.iter().zip(&solution.values) {
            match *col {
                Column::JobX { job, t } => tables.x[job][t - 1] = clamp(v, col)?,
                Column::JobS { job, t } => tables.s[job][t - 1] = clamp(v, col)?,
                _ => return Err(Error::Lp("arm-level column in a job-level problem".into())),
            }
        }
        Ok(tables)
    }
}

/// Builds the relaxation named by `variant`. The arm-level variants need a
/// layered, unit-time instance; the knapsack variant needs jobs.
pub fn build<S: Scalar>(instance: &Instance<S>, variant: Variant) -> Result<LpProblem<S>> {
    match variant {
        Variant::Poly => build_poly_lp(instance),
        Variant::PolyNoPreempt => build_poly_lp_nopreempt(instance),
        Variant::Knapsack => {
            let jobs = instance
                .jobs
                .as_ref()
                .ok_or_else(|| Error::Argument("the knapsack relaxation needs a job-level instance".into()))?;
            Ok(build_knapsack_lp(jobs, instance.budget))
        }
    }
}

/// The arm-level relaxation matching the instance's mode.
pub fn default_variant<S: Scalar>(instance: &Instance<S>) -> Variant {
    if instance.mode.is_preemptive() {
        Variant::Poly
    } else {
        Variant::PolyNoPreempt
    }
}

/// Solves the mode-matching arm-level relaxation of an already reduced
/// instance and returns the dense tables.
pub fn solve_tables<S: Scalar>(reduced: &Instance<S>) -> Result<(LpSolution<S>, PolyTables<S>)> {
    let problem = build(reduced, default_variant(reduced))?;
    let solution = problem.solve_certified()?;
    let tables = PolyTables::from_solution(reduced, &problem, &solution)?;
    Ok((solution, tables))
}
