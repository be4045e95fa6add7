//! Half-scaling policies for non-preemptive instances.
//!
//! With no arm in progress at the start of step `t`, fresh arm `i` is started
//! with probability `factor * x_{root_i,t} / (2 * lambda_{i,t})`, where
//! `lambda_{i,t}` is the probability of that very situation (no arm in
//! progress, `i` still fresh). A started arm at node `u` plays action `a`
//! with probability `x^a_{u,t} / x_{u,t}`; on arrival at `v` it continues
//! with probability `x_{v,t+1} / s_{v,t+1}` and is abandoned otherwise.
//!
//! With exact `lambda` every status is played with probability exactly half
//! its LP value. The sampled variant estimates `lambda` by simulation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{sample_transition, NextStatus, PlayRecord, Policy, RunOptions, TrialOutcome};
use crate::dp::{Choice, JointModel, JointPolicy};
use crate::lp::{self, PolyTables};
use crate::model::{Instance, DEFAULT_ACTION};
use crate::reduce::reduce;
use crate::rng::{self, StreamRng};
use crate::scalar::{half, Scalar};
use crate::{Error, Result};

/// Slack allowed on the sum of start probabilities.
const START_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Lambda<S> {
    /// Use the exact availability probabilities as they are computed.
    Exact,
    /// Use a given table `[arm][t-1]`.
    Given(Vec<Vec<S>>),
}

/// Exact law of the subroutine.
#[derive(Debug, Clone)]
pub struct SubrTables<S> {
    /// `free[arm][t-1]` for `t` in `1..=horizon + 1`.
    pub free: Vec<Vec<S>>,
    /// Lambda actually used, `[arm][t-1]` for `t` in `1..=horizon`.
    pub lambda: Vec<Vec<S>>,
    /// Unconditional start probabilities `[arm][t-1]`.
    pub started: Vec<Vec<S>>,
    /// `played[arm][node][action][t-1]`.
    pub played: Vec<Vec<Vec<Vec<S>>>>,
}

fn continuation<S: Scalar>(tables: &PolyTables<S>, arm: usize, node: usize, t: usize) -> S {
    let s = tables.s(arm, node, t);
    if !s.is_positive_tol() {
        return S::zero();
    }
    let c = tables.x_node(arm, node, t) / s;
    if c > S::one() {
        S::one()
    } else {
        c
    }
}

/// Start probability of each arm at `t`, before restricting to fresh arms.
fn start_probs<S: Scalar>(
    instance: &Instance<S>,
    tables: &PolyTables<S>,
    lambda: &[S],
    factor: &S,
    t: usize,
    strict: bool,
) -> Result<Vec<S>> {
    instance
        .arms
        .iter()
        .enumerate()
        .map(|(i, arm)| {
            let x = tables.x_node(i, arm.root, t);
            if !x.is_positive_tol() {
                return Ok(S::zero());
            }
            if !lambda[i].is_positive_tol() {
                return if strict {
                    Err(Error::Policy(format!("arm {i} has LP mass at t={t} but is never available")))
                } else {
                    Ok(S::zero())
                };
            }
            Ok(factor.clone() * x * half::<S>() / lambda[i].clone())
        })
        .collect()
}

/// Rescales start probabilities of the fresh arms so they sum to at most one;
/// fails instead when `strict`.
fn check_sum<S: Scalar>(probs: &mut [S], mask: u64, t: usize, strict: bool) -> Result<()> {
    let total = (0..probs.len()).filter(|i| mask >> i & 1 == 1).fold(S::zero(), |acc, i| acc + probs[i].clone());
    if total.to_f64() > 1.0 + START_SLACK {
        if strict {
            return Err(Error::Policy(format!("start probabilities sum to {} at t={t}", total.to_f64())));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *p = p.clone() / total.clone();
            }
        }
    }
    Ok(())
}

/// Forward propagation of the subroutine over its execution states
/// `(fresh arms, arm in progress and its node)` for steps `1..=horizon`.
pub fn propagate_subr<S: Scalar>(
    instance: &Instance<S>,
    tables: &PolyTables<S>,
    lambda: &Lambda<S>,
    factor: S,
    strict: bool,
    horizon: usize,
) -> Result<SubrTables<S>> {
    let n = instance.arms.len();
    if n > 63 {
        return Err(Error::Policy("at most 63 arms are supported".into()));
    }
    let horizon = horizon.min(tables.budget);
    let a_count = instance.num_actions();
    let mut free = vec![vec![S::zero(); horizon + 1]; n];
    let mut used = vec![vec![S::zero(); horizon]; n];
    let mut started = vec![vec![S::zero(); horizon]; n];
    let mut played: Vec<Vec<Vec<Vec<S>>>> =
        instance.arms.iter().map(|arm| vec![vec![vec![S::zero(); horizon]; a_count]; arm.nodes.len()]).collect();

    type Key = (u64, Option<(usize, usize)>);
    let mut dist: BTreeMap<Key, S> = BTreeMap::new();
    dist.insert(((1u64 << n) - 1, None), S::one());

    let add = |map: &mut BTreeMap<Key, S>, key: Key, mass: S| {
        if mass.is_zero() {
            return;
        }
        let slot = map.entry(key).or_insert_with(S::zero);
        *slot = slot.clone() + mass;
    };

    for t in 1..=horizon + 1 {
        for (key, mass) in &dist {
            if key.1.is_none() {
                for (i, row) in free.iter_mut().enumerate() {
                    if key.0 >> i & 1 == 1 {
                        row[t - 1] = row[t - 1].clone() + mass.clone();
                    }
                }
            }
        }
        if t > horizon {
            break;
        }
        let lam: Vec<S> = match lambda {
            Lambda::Exact => free.iter().map(|row| row[t - 1].clone()).collect(),
            Lambda::Given(table) => table.iter().map(|row| row.get(t - 1).cloned().unwrap_or_else(S::zero)).collect(),
        };
        for (i, l) in lam.iter().enumerate() {
            used[i][t - 1] = l.clone();
        }
        let base = start_probs(instance, tables, &lam, &factor, t, strict)?;

        let mut next: BTreeMap<Key, S> = BTreeMap::new();
        for (&(mask, current), mass) in &dist {
            let mut plays: Vec<(usize, usize, u64, S)> = Vec::new();
            match current {
                Some((i, u)) => plays.push((i, u, mask, mass.clone())),
                None => {
                    let mut probs = base.clone();
                    check_sum(&mut probs, mask, t, strict)?;
                    let mut rest = mass.clone();
                    for (i, p) in probs.iter().enumerate() {
                        if mask >> i & 1 == 1 && !p.is_zero() {
                            let m = mass.clone() * p.clone();
                            started[i][t - 1] = started[i][t - 1].clone() + m.clone();
                            rest = rest - m.clone();
                            plays.push((i, instance.arms[i].root, mask & !(1 << i), m));
                        }
                    }
                    add(&mut next, (mask, None), rest);
                }
            }
            for (i, u, mask, m) in plays {
                let total = tables.x_node(i, u, t);
                if !total.is_positive_tol() {
                    add(&mut next, (mask, None), m);
                    continue;
                }
                let node = &instance.arms[i].nodes[u];
                for a in node.available_actions() {
                    let xa = tables.x(i, u, a, t);
                    if !xa.is_positive_tol() {
                        continue;
                    }
                    let ma = m.clone() * xa / total.clone();
                    played[i][u][a][t - 1] = played[i][u][a][t - 1].clone() + ma.clone();
                    for tr in &node.transitions[a] {
                        let mt = ma.clone() * tr.prob.clone();
                        let c = continuation(tables, i, tr.to, t + 1);
                        add(&mut next, (mask, Some((i, tr.to))), mt.clone() * c.clone());
                        add(&mut next, (mask, None), mt * (S::one() - c));
                    }
                }
            }
        }
        dist = next;
    }
    Ok(SubrTables { free, lambda: used, started, played })
}

/// The subroutine as a Markov policy on joint states, for exact evaluation
/// and projection.
#[derive(Debug, Clone)]
pub struct SubrPolicy<S> {
    pub tables: PolyTables<S>,
    pub lambda: Vec<Vec<S>>,
    pub factor: S,
}

impl<S: Scalar> JointPolicy<S> for SubrPolicy<S> {
    fn decide(&self, model: &JointModel<S>, nodes: &[usize], t: usize) -> Vec<(Choice, S)> {
        let inst = model.instance;
        if t > self.tables.budget {
            return vec![(Choice::Idle, S::one())];
        }
        let mut out = Vec::new();
        let mut rest = S::one();
        if let Some(i) = model.in_progress(nodes) {
            let u = nodes[i];
            let node = &inst.arms[i].nodes[u];
            if node.is_bridge {
                return vec![(Choice::Play { arm: i, action: DEFAULT_ACTION }, S::one())];
            }
            let s = self.tables.s(i, u, t);
            if s.is_positive_tol() {
                for a in node.available_actions() {
                    let w = self.tables.x(i, u, a, t) / s.clone();
                    if w.is_positive_tol() {
                        rest = rest - w.clone();
                        out.push((Choice::Play { arm: i, action: a }, w));
                    }
                }
            }
        }
        if rest.is_positive_tol() {
            let lam: Vec<S> = self.lambda.iter().map(|row| row[t - 1].clone()).collect();
            let probs = start_probs(inst, &self.tables, &lam, &self.factor, t, false).unwrap_or_default();
            let mask = (0..nodes.len()).filter(|&i| nodes[i] == inst.arms[i].root).fold(0u64, |m, i| m | 1 << i);
            let mut probs = probs;
            let _ = check_sum(&mut probs, mask, t, false);
            let mut idle = rest.clone();
            for (i, p) in probs.iter().enumerate() {
                if mask >> i & 1 == 0 || p.is_zero() {
                    continue;
                }
                let root = inst.arms[i].root;
                let total = self.tables.x_node(i, root, t);
                for a in inst.arms[i].nodes[root].available_actions() {
                    let w = rest.clone() * p.clone() * self.tables.x(i, root, a, t) / total.clone();
                    if w.is_positive_tol() {
                        idle = idle - w.clone();
                        out.push((Choice::Play { arm: i, action: a }, w));
                    }
                }
            }
            out.insert(0, (Choice::Idle, idle));
        }
        out
    }
}

/// Half-scaling policy ready to simulate.
#[derive(Debug, Clone)]
pub struct HalfScalingPolicy {
    instance: Instance<f64>,
    pub tables: PolyTables<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub factor: f64,
    pub strict: bool,
    pub label: String,
    /// Law of the subroutine under `lambda` and `factor`.
    pub law: SubrTables<f64>,
}

impl HalfScalingPolicy {
    /// Exact variant: solves the relaxation of the reduced instance and
    /// computes the availability probabilities exactly.
    pub fn exact(instance: &Instance<f64>) -> Result<Self> {
        let reduced = Self::prepare(instance)?;
        let (_, tables) = lp::solve_tables(&reduced)?;
        Self::exact_from_parts(reduced, tables)
    }

    pub fn exact_from_parts(reduced: Instance<f64>, tables: PolyTables<f64>) -> Result<Self> {
        let law = propagate_subr(&reduced, &tables, &Lambda::Exact, 1.0, true, tables.budget)?;
        Ok(HalfScalingPolicy {
            instance: reduced,
            lambda: law.lambda.clone(),
            tables,
            factor: 1.0,
            strict: true,
            label: "half-exact".into(),
            law,
        })
    }

    /// Sampled variant: estimates availability by simulation and deploys the
    /// subroutine with start probabilities damped by `(1 - epsilon)^2`.
    pub fn sampled(instance: &Instance<f64>, epsilon: f64, delta: f64, seed: u64) -> Result<(Self, SampledEstimates)> {
        let reduced = Self::prepare(instance)?;
        let (_, tables) = lp::solve_tables(&reduced)?;
        Self::sampled_from_parts(reduced, tables, epsilon, delta, seed)
    }

    pub fn sampled_from_parts(
        reduced: Instance<f64>,
        tables: PolyTables<f64>,
        epsilon: f64,
        delta: f64,
        seed: u64,
    ) -> Result<(Self, SampledEstimates)> {
        let est = estimate_free(&reduced, &tables, epsilon, delta, seed)?;
        let factor = (1.0 - epsilon).powi(2);
        let law = propagate_subr(&reduced, &tables, &Lambda::Given(est.estimates.clone()), factor, false, tables.budget)?;
        let policy = HalfScalingPolicy {
            instance: reduced,
            tables,
            lambda: est.estimates.clone(),
            factor,
            strict: false,
            label: format!("half-sampled(eps={epsilon},delta={delta})"),
            law,
        };
        Ok((policy, est))
    }

    fn prepare(instance: &Instance<f64>) -> Result<Instance<f64>> {
        if instance.mode.is_preemptive() {
            return Err(Error::Policy("half-scaling policies need a non-preemptive instance".into()));
        }
        reduce(instance)
    }

    pub fn subr_policy(&self) -> SubrPolicy<f64> {
        SubrPolicy { tables: self.tables.clone(), lambda: self.lambda.clone(), factor: self.factor }
    }

    fn start_table(&self) -> Vec<Vec<f64>> {
        (1..=self.tables.budget)
            .map(|t| {
                let lam: Vec<f64> = self.lambda.iter().map(|row| row[t - 1]).collect();
                start_probs(&self.instance, &self.tables, &lam, &self.factor, t, false).unwrap_or_default()
            })
            .collect()
    }
}

/// Runs the subroutine for steps `1..=steps` and returns the final state
/// (fresh mask, arm in progress), recording plays if asked.
fn run_subr(
    instance: &Instance<f64>,
    tables: &PolyTables<f64>,
    starts: &[Vec<f64>],
    steps: usize,
    rng: &mut StreamRng,
    mut record: Option<&mut TrialOutcome>,
) -> (u64, Option<(usize, usize)>) {
    let n = instance.arms.len();
    let mut mask: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut current: Option<(usize, usize)> = None;
    for t in 1..=steps {
        if current.is_none() {
            let probs = &starts[t - 1];
            let total: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| probs[i]).sum();
            let norm = if total > 1.0 { total } else { 1.0 };
            let weights = (0..n).map(|i| if mask >> i & 1 == 1 { probs[i] / norm } else { 0.0 });
            if let Some(i) = rng::pick(rng, weights) {
                mask &= !(1 << i);
                current = Some((i, instance.arms[i].root));
            }
        }
        let Some((i, u)) = current else { continue };
        let total = tables.x_node(i, u, t);
        let node = &instance.arms[i].nodes[u];
        let actions: Vec<usize> = node.available_actions().filter(|&a| tables.x(i, u, a, t) > 0.0).collect();
        if total <= 0.0 || actions.is_empty() {
            current = None;
            continue;
        }
        let a = if actions.len() == 1 {
            actions[0]
        } else {
            let k = rng::pick(rng, actions.iter().map(|&a| tables.x(i, u, a, t) / total));
            actions[k.unwrap_or(actions.len() - 1)]
        };
        let tr = sample_transition(rng, node, a);
        let c = continuation(tables, i, tr.to, t + 1);
        let keep = c >= 1.0 || (c > 0.0 && rng::uniform(rng) < c);
        if let Some(out) = record.as_deref_mut() {
            let reward = node.reward(a) + tr.completion_reward;
            out.reward += reward;
            out.plays.push(PlayRecord {
                clock: t,
                arm: i,
                node: u,
                action: a,
                status_t: t,
                reward,
                new_status: NextStatus { node: tr.to, action: None, t: keep.then_some(t + 1) },
            });
        }
        current = keep.then_some((i, tr.to));
    }
    (mask, current)
}

impl Policy for HalfScalingPolicy {
    fn id(&self) -> String {
        self.label.clone()
    }

    fn instance(&self) -> &Instance<f64> {
        &self.instance
    }

    fn run_trial(&self, seed: u64, trial: u64, _opts: &RunOptions) -> TrialOutcome {
        let starts = self.start_table();
        let mut rng = rng::stream(seed, trial, 0);
        let mut out = TrialOutcome::default();
        run_subr(&self.instance, &self.tables, &starts, self.tables.budget, &mut rng, Some(&mut out));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingParams {
    pub epsilon: f64,
    pub delta: f64,
    pub med: u64,
    pub samples: u64,
}

/// Ceiling that ignores float noise just above an integer.
fn ceil_tolerant(v: f64) -> u64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r as u64
    } else {
        v.ceil() as u64
    }
}

/// `med = ceil(3 ln(2/delta) / eps^2)` and `M = ceil(8 B n med / eps)`.
pub fn sampling_params(epsilon: f64, delta: f64, budget: usize, arms: usize) -> Result<SamplingParams> {
    if !(epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument("epsilon and delta must lie in (0, 1)".into()));
    }
    let med = ceil_tolerant(3.0 * (2.0 / delta).ln() / (epsilon * epsilon));
    let samples = ceil_tolerant(8.0 * budget as f64 * arms as f64 * med as f64 / epsilon);
    Ok(SamplingParams { epsilon, delta, med, samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledEstimates {
    pub params: SamplingParams,
    /// `estimates[arm][t-1]`.
    pub estimates: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    /// True where the count fell below `med` and the fallback was used.
    pub fallback: Vec<Vec<bool>>,
}

const CHUNK: u64 = 1 << 14;

/// For each `t`, simulates the damped subroutine up to `t - 1` with the
/// estimates recorded so far and counts how often each arm is available.
pub fn estimate_free(
    instance: &Instance<f64>,
    tables: &PolyTables<f64>,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<SampledEstimates> {
    let n = instance.arms.len();
    let budget = tables.budget;
    let params = sampling_params(epsilon, delta, budget, n)?;
    let factor = (1.0 - epsilon).powi(2);
    let mut estimates = vec![vec![0.0; budget]; n];
    let mut counts = vec![vec![0u64; budget]; n];
    let mut fallback = vec![vec![false; budget]; n];
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let chunks = params.samples.div_ceil(CHUNK);
    for t in 1..=budget {
        let tally: Vec<u64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng::stream(seed, ((t as u64) << 32) | c, 0);
                let runs = CHUNK.min(params.samples - c * CHUNK);
                let mut local = vec![0u64; n];
                for _ in 0..runs {
                    let (mask, current) = run_subr(instance, tables, &starts, t - 1, &mut rng, None);
                    if current.is_none() {
                        for (i, slot) in local.iter_mut().enumerate() {
                            if mask >> i & 1 == 1 {
                                *slot += 1;
                            }
                        }
                    }
                }
                local
            })
            .reduce(|| vec![0u64; n], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let root_mass: f64 =
            instance.arms.iter().enumerate().map(|(j, arm)| tables.x_node(j, arm.root, t)).sum::<f64>() / 2.0;
        for i in 0..n {
            counts[i][t - 1] = tally[i];
            if tally[i] > params.med {
                estimates[i][t - 1] = tally[i] as f64 / params.samples as f64;
            } else {
                estimates[i][t - 1] = root_mass;
                fallback[i][t - 1] = true;
            }
        }
        let lam: Vec<f64> = estimates.iter().map(|row| row[t - 1]).collect();
        starts.push(start_probs(instance, tables, &lam, &factor, t, false)?);
    }
    Ok(SampledEstimates { params, estimates, counts, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gap2;
    use crate::scalar::Rational;

    #[test]
    fn sampling_constants() {
        let p = sampling_params(0.1, 0.01, 4, 2).unwrap();
        assert_eq!(p.med, 1590);
        assert_eq!(p.samples, 640 * 1590);
        assert!(sampling_params(0.0, 0.5, 1, 1).is_err());
    }

    #[test]
    fn exact_law_halves_the_relaxation() {
        let inst: Instance<Rational> = gap2(10).unwrap();
        let reduced = reduce(&inst).unwrap();
        let (_, tables) = lp::solve_tables(&reduced).unwrap();
        let law = propagate_subr(&reduced, &tables, &Lambda::Exact, Rational::from_ratio(1, 1), true, 11).unwrap();
        for (i, arm) in reduced.arms.iter().enumerate() {
            for t in 1..=11 {
                assert_eq!(law.started[i][t - 1], tables.x_node(i, arm.root, t) * half::<Rational>());
            }
        }
        // Job 1 is started at t=2 with unconditional probability x/2.
        assert_eq!(law.started[1][1], tables.x_node(1, 0, 2) / Rational::from_ratio(2, 1));
    }

    #[test]
    fn single_job_started_half_the_time() {
        let inst: Instance<f64> = crate::reduce::jobs_to_arms(&[crate::model::KnapsackJob::new(vec![(1, 1.0, 2.0)])], 1, false);
        let policy = HalfScalingPolicy::exact(&inst).unwrap();
        assert!((policy.law.started[0][0] - 0.5).abs() < 1e-15);
        let mean: f64 =
            (0..4000).map(|k| policy.run_trial(3, k, &RunOptions::default()).reward).sum::<f64>() / 4000.0;
        assert!((mean - 1.0).abs() < 0.1);
    }
}
