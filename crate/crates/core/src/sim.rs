//! Monte Carlo harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::policy::{PlayRecord, Policy, RunOptions};
use crate::{Error, Result};

/// Trials per parallel work unit. Fixed so results do not depend on the
/// thread count.
const CHUNK: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatusFrequency {
    pub arm: usize,
    pub node: usize,
    pub node_id: String,
    pub action: usize,
    pub t: usize,
    /// Trials in which the status was played.
    pub count: u64,
    pub frequency: f64,
    /// Plays made at a clock not later than the status index.
    pub on_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub policy_id: String,
    pub seed: u64,
    pub trials: u64,
    pub virtual_continue: bool,
    pub mean_reward: f64,
    pub stddev: f64,
    pub ci95: f64,
    pub status_freq: Vec<StatusFrequency>,
}

type Tally = BTreeMap<(usize, usize, usize, usize), (u64, u64)>;

fn tally_plays(tally: &mut Tally, plays: &[PlayRecord]) {
    for p in plays {
        let slot = tally.entry((p.arm, p.node, p.action, p.status_t)).or_insert((0, 0));
        slot.0 += 1;
        if p.clock <= p.status_t {
            slot.1 += 1;
        }
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn simulate(policy: &dyn Policy, trials: u64, seed: u64, opts: RunOptions) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let chunks: Vec<(Vec<f64>, Tally)> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(trials);
            let mut rewards = Vec::with_capacity((end - c * CHUNK) as usize);
            let mut tally = Tally::new();
            for trial in c * CHUNK..end {
                let out = policy.run_trial(seed, trial, &opts);
                rewards.push(out.reward);
                tally_plays(&mut tally, &out.plays);
            }
            (rewards, tally)
        })
        .collect();
    let mut rewards = Vec::with_capacity(trials as usize);
    let mut tally = Tally::new();
    for (r, t) in chunks {
        rewards.extend(r);
        for (k, (n, on)) in t {
            let slot = tally.entry(k).or_insert((0, 0));
            slot.0 += n;
            slot.1 += on;
        }
    }
    let n = trials as f64;
    let mean = pairwise_sum(&rewards) / n;
    let squares: Vec<f64> = rewards.iter().map(|r| (r - mean) * (r - mean)).collect();
    let stddev = if trials > 1 { (pairwise_sum(&squares) / (n - 1.0)).sqrt() } else { 0.0 };
    let inst = policy.instance();
    let status_freq = tally
        .into_iter()
        .map(|((arm, node, action, t), (count, on_time))| StatusFrequency {
            arm,
            node,
            node_id: inst.arms[arm].nodes[node].id.clone(),
            action,
            t,
            count,
            frequency: count as f64 / n,
            on_time,
        })
        .collect();
    Ok(SimulationReport {
        policy_id: policy.id(),
        seed,
        trials,
        virtual_continue: opts.virtual_continue,
        mean_reward: mean,
        stddev,
        ci95: 1.96 * stddev / n.sqrt(),
        status_freq,
    })
}

impl SimulationReport {
    /// Empirical play frequency of a status, zero if never played.
    pub fn frequency(&self, arm: usize, node: usize, action: usize, t: usize) -> f64 {
        self.find(arm, node, action, t).map_or(0.0, |s| s.frequency)
    }

    pub fn find(&self, arm: usize, node: usize, action: usize, t: usize) -> Option<&StatusFrequency> {
        self.status_freq
            .binary_search_by_key(&(arm, node, action, t), |s| (s.arm, s.node, s.action, s.t))
            .ok()
            .map(|k| &self.status_freq[k])
    }

    /// Aligned text rendering.
    pub fn render(&self, actions: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "policy   {}", self.policy_id);
        let _ = writeln!(out, "seed     {}", self.seed);
        let _ = writeln!(out, "trials   {}", self.trials);
        let _ = writeln!(out, "mean     {:.6}", self.mean_reward);
        let _ = writeln!(out, "stddev   {:.6}", self.stddev);
        let _ = writeln!(out, "ci95     {:.6}", self.ci95);
        if self.status_freq.is_empty() {
            return out;
        }
        let width = self.status_freq.iter().map(|s| s.node_id.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>4}  {:<width$}  {:<8}  {:>4}  {:>10}  {:>10}  {:>10}", "arm", "node", "action", "t", "count", "freq", "on-time");
        for s in &self.status_freq {
            let action = actions.get(s.action).map_or("?", String::as_str);
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:<8}  {:>4}  {:>10}  {:>10.6}  {:>10}",
                s.arm, s.node_id, action, s.t, s.count, s.frequency, s.on_time
            );
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceLine {
    pub trial: u64,
    pub reward: f64,
    pub plays: Vec<PlayRecord>,
}

/// Play-by-play records of the first `count` trials.
pub fn trace(policy: &dyn Policy, count: u64, seed: u64, opts: RunOptions) -> Vec<TraceLine> {
    (0..count)
        .map(|trial| {
            let out = policy.run_trial(seed, trial, &opts);
            TraceLine { trial, reward: out.reward, plays: out.plays }
        })
        .collect()
}
