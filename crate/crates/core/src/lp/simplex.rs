//! Dense two-phase primal simplex with Bland's rule.
//!
//! Maximizes `c.x` subject to sparse rows and `x >= 0`. Pivoting is fully
//! deterministic: the entering column is the lowest-index improving one and
//! ratio ties go to the lowest basic variable index. In floating point,
//! pivots far smaller than the largest entry of their column are skipped and
//! ratios within the feasibility tolerance count as ties.

use super::{Constraint, LpStatus, Relation};
use crate::scalar::Scalar;

pub struct SimplexResult<S> {
    pub status: LpStatus,
    pub objective: S,
    pub values: Vec<S>,
    /// One dual value per input row, in the input row's own sign convention.
    pub duals: Vec<S>,
}

fn pivot_eps<S: Scalar>() -> S {
    S::tolerance() * S::from_count(100)
}

/// Smallest admissible pivot as a fraction of the largest entry in its column.
fn relative_pivot<S: Scalar>() -> S {
    let rel = S::tolerance() * S::from_count(1_000_000);
    let cap = S::from_ratio(1, 1000);
    if rel > cap { cap } else { rel }
}

fn feas_tol<S: Scalar>() -> S {
    S::tolerance() * S::from_count(1000)
}

/// `a - b`, flushed to zero when the difference is round-off relative to the
/// operands.
fn cancel<S: Scalar>(a: S, b: S) -> S {
    let scale = if a.clone().abs() > b.clone().abs() { a.clone().abs() } else { b.clone().abs() };
    let d = a - b;
    if d.clone().abs() <= S::tolerance() * scale {
        S::zero()
    } else {
        d
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    basis: Vec<usize>,
    cols: usize,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, c: usize, cost: &mut [S], cost_rhs: &mut S) {
        let p = self.rows[r][c].clone();
        let inv = S::one() / p;
        let mut nonzero = Vec::new();
        for j in 0..self.cols {
            if !self.rows[r][j].is_zero() {
                self.rows[r][j] = self.rows[r][j].clone() * inv.clone();
                nonzero.push(j);
            }
        }
        self.rows[r][c] = S::one();
        self.rhs[r] = self.rhs[r].clone() * inv;
        let prow: Vec<(usize, S)> = nonzero.iter().map(|&j| (j, self.rows[r][j].clone())).collect();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (j, v) in &prow {
                self.rows[i][*j] = cancel(self.rows[i][*j].clone(), f.clone() * v.clone());
            }
            self.rows[i][c] = S::zero();
            self.rhs[i] = cancel(self.rhs[i].clone(), f * prhs.clone());
        }
        if !cost[c].is_zero() {
            let f = cost[c].clone();
            for (j, v) in &prow {
                cost[*j] = cancel(cost[*j].clone(), f.clone() * v.clone());
            }
            cost[c] = S::zero();
            *cost_rhs = cost_rhs.clone() - f * prhs;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on `cost` (reduced costs, maximization).
    /// Returns false when unbounded.
    fn optimize(&mut self, cost: &mut [S], cost_rhs: &mut S, allowed: &[bool]) -> bool {
        let eps = pivot_eps::<S>();
        loop {
            let Some(enter) = (0..self.cols).find(|&j| allowed[j] && cost[j] > eps) else {
                return true;
            };
            let col_max = self.rows.iter().fold(S::zero(), |m, row| {
                let a = row[enter].clone().abs();
                if a > m { a } else { m }
            });
            let min_pivot = {
                let rel = col_max * relative_pivot::<S>();
                if rel > eps { rel } else { eps.clone() }
            };
            let ratio = |i: usize| {
                let b = &self.rhs[i];
                if *b < S::zero() { S::zero() } else { b.clone() / self.rows[i][enter].clone() }
            };
            let mut candidates: Vec<usize> =
                (0..self.rows.len()).filter(|&i| self.rows[i][enter] > eps && self.rows[i][enter] >= min_pivot).collect();
            if candidates.is_empty() {
                candidates = (0..self.rows.len()).filter(|&i| self.rows[i][enter] > eps).collect();
            }
            let best = candidates.iter().map(|&i| ratio(i)).reduce(|m, r| if r < m { r } else { m });
            let leave = best.and_then(|best| {
                let bound = best + feas_tol::<S>();
                candidates.into_iter().filter(|&i| ratio(i) <= bound).min_by_key(|&i| self.basis[i])
            });
            match leave {
                Some(r) => self.pivot(r, enter, cost, cost_rhs),
                None => return false,
            }
        }
    }
}

pub fn solve<S: Scalar>(num_vars: usize, objective: &[S], constraints: &[Constraint<S>]) -> SimplexResult<S> {
    let m = constraints.len();
    // Column layout: structural | one unit column per row (slack or artificial) | surplus columns.
    let unit = num_vars;
    let surplus_start = unit + m;
    let mut flipped = vec![false; m];
    let mut relation = Vec::with_capacity(m);
    let mut surplus_of = vec![None; m];
    let mut next_surplus = surplus_start;
    for (i, c) in constraints.iter().enumerate() {
        let mut rel = c.relation;
        if c.rhs < S::zero() {
            flipped[i] = true;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        if rel == Relation::Ge {
            surplus_of[i] = Some(next_surplus);
            next_surplus += 1;
        }
        relation.push(rel);
    }
    let cols = next_surplus;
    let mut rows = vec![vec![S::zero(); cols]; m];
    let mut rhs = vec![S::zero(); m];
    for (i, c) in constraints.iter().enumerate() {
        let sign = if flipped[i] { -S::one() } else { S::one() };
        for (j, v) in &c.coeffs {
            rows[i][*j] = rows[i][*j].clone() + sign.clone() * v.clone();
        }
        rows[i][unit + i] = S::one();
        if let Some(s) = surplus_of[i] {
            rows[i][s] = -S::one();
        }
        rhs[i] = sign * c.rhs.clone();
    }
    let artificial: Vec<bool> = (0..cols).map(|j| j >= unit && j < surplus_start && relation[j - unit] != Relation::Le).collect();
    let mut tab = Tableau { rows, rhs, basis: (0..m).map(|i| unit + i).collect(), cols };

    // Phase 1: maximize -(sum of artificials).
    let mut cost = vec![S::zero(); cols];
    let mut cost_rhs = S::zero();
    for j in 0..cols {
        if artificial[j] {
            cost[j] = -S::one();
        }
    }
    for i in 0..m {
        if artificial[unit + i] {
            for j in 0..cols {
                cost[j] = cost[j].clone() + tab.rows[i][j].clone();
            }
            cost_rhs = cost_rhs + tab.rhs[i].clone();
        }
    }
    let all = vec![true; cols];
    let ok1 = tab.optimize(&mut cost, &mut cost_rhs, &all);
    let infeasibility = tab
        .basis
        .iter()
        .zip(&tab.rhs)
        .filter(|(b, _)| artificial[**b])
        .fold(S::zero(), |acc, (_, v)| acc + v.clone());
    if !ok1 || infeasibility > feas_tol::<S>() {
        return SimplexResult {
            status: LpStatus::Infeasible,
            objective: S::zero(),
            values: vec![S::zero(); num_vars],
            duals: vec![S::zero(); m],
        };
    }
    // Drive remaining artificials out of the basis where possible.
    let eps = pivot_eps::<S>();
    for r in 0..m {
        if artificial[tab.basis[r]] {
            if let Some(c) = (0..cols).find(|&j| !artificial[j] && tab.rows[r][j].abs() > eps) {
                let mut dummy = vec![S::zero(); cols];
                let mut dummy_rhs = S::zero();
                tab.pivot(r, c, &mut dummy, &mut dummy_rhs);
            }
        }
    }

    // Phase 2.
    let mut cost = vec![S::zero(); cols];
    for (j, c) in objective.iter().enumerate() {
        cost[j] = c.clone();
    }
    let mut cost_rhs = S::zero();
    for r in 0..m {
        let b = tab.basis[r];
        if !cost[b].is_zero() {
            let f = cost[b].clone();
            for j in 0..cols {
                cost[j] = cost[j].clone() - f.clone() * tab.rows[r][j].clone();
            }
            cost_rhs = cost_rhs - f * tab.rhs[r].clone();
        }
    }
    let allowed: Vec<bool> = artificial.iter().map(|a| !a).collect();
    if !tab.optimize(&mut cost, &mut cost_rhs, &allowed) {
        return SimplexResult {
            status: LpStatus::Unbounded,
            objective: S::zero(),
            values: vec![S::zero(); num_vars],
            duals: vec![S::zero(); m],
        };
    }
    let mut values = vec![S::zero(); num_vars];
    for (r, &b) in tab.basis.iter().enumerate() {
        let v = &tab.rhs[r];
        if b < num_vars && (*v > S::zero() || -v.clone() > feas_tol::<S>()) {
            values[b] = v.clone();
        }
    }
    let objective_value = objective
        .iter()
        .zip(&values)
        .fold(S::zero(), |acc, (c, x)| acc + c.clone() * x.clone());
    let duals = (0..m)
        .map(|i| {
            let y = -cost[unit + i].clone();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    SimplexResult { status: LpStatus::Optimal, objective: objective_value, values, duals }
}
