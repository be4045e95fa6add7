//! Serializable summaries of the main library calls, shared by the
//! command-line front end and its tests.

use serde::Serialize;

use crate::analysis::projection::CertificateSummary;
use crate::analysis::{grid_sweep, project_policy, GridSweep};
use crate::dp::{dp_exact_with_cap, Choice, IdlePolicy, JointModel, JointPolicy};
use crate::flow::{flow_decompose, identity_residuals, GroupKey, QGroup};
use crate::lp::{self, Column, LpStatus, Variant};
use crate::model::Instance;
use crate::policy::{HalfScalingPolicy, Policy, PriorityPolicy, RunOptions, SampledEstimates};
use crate::reduce::reduce;
use crate::scalar::{Rational, Scalar};
use crate::sim::{simulate, SimulationReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LpReport {
    pub variant: Variant,
    pub status: LpStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub columns: usize,
    pub rows: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct XValue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm: Option<usize>,
    /// Node id, or the job index for job-level relaxations.
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SValue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm: Option<usize>,
    pub node: String,
    pub t: usize,
    pub value: f64,
}

/// Nonzero variables of a solved relaxation.
#[derive(Debug, Clone, Serialize)]
pub struct LpDump {
    pub objective: f64,
    pub x: Vec<XValue>,
    pub s: Vec<SValue>,
}

/// Solves the named relaxation (or the mode-matching one). Arm-level
/// variants run on the reduced instance.
pub fn lp_report(instance: &Instance<f64>, variant: Option<Variant>) -> Result<(LpReport, LpDump)> {
    let variant = variant.unwrap_or_else(|| crate::analysis::gap::gap_variant(instance));
    let target = match variant {
        Variant::Knapsack => instance.clone(),
        _ => reduce(instance)?,
    };
    let problem = lp::build(&target, variant)?;
    let sol = problem.solve_certified()?;
    let mut dump = LpDump { objective: sol.objective, x: Vec::new(), s: Vec::new() };
    for (col, &value) in problem.columns.iter().zip(&sol.values) {
        if value == 0.0 {
            continue;
        }
        match *col {
            Column::X { arm, node, action, t } => dump.x.push(XValue {
                arm: Some(arm),
                node: target.arms[arm].nodes[node].id.clone(),
                action: Some(target.actions[action].clone()),
                t,
                value,
            }),
            Column::S { arm, node, t } => {
                dump.s.push(SValue { arm: Some(arm), node: target.arms[arm].nodes[node].id.clone(), t, value })
            }
            Column::JobX { job, t } => {
                dump.x.push(XValue { arm: None, node: job.to_string(), action: None, t, value })
            }
            Column::JobS { job, t } => dump.s.push(SValue { arm: None, node: job.to_string(), t, value }),
        }
    }
    let report = LpReport {
        variant,
        status: sol.status,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        columns: problem.columns.len(),
        rows: problem.constraints.len(),
        max_violation: problem.max_violation(&sol.values),
    };
    Ok((report, dump))
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRecord {
    pub key: GroupKey,
    pub group: QGroup<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub groups: usize,
    pub sum_residual: f64,
    pub flow_residual: f64,
}

/// Summary plus every group with its abandon mass.
pub fn decompose_report(instance: &Instance<f64>) -> Result<(DecompositionReport, Vec<GroupRecord>)> {
    let reduced = reduce(instance)?;
    let (_, tables) = lp::solve_tables(&reduced)?;
    let q = flow_decompose(&reduced, &tables)?;
    let (sum_residual, flow_residual) = identity_residuals(&reduced, &tables, &q);
    let entries = q.groups.iter().map(|(k, g)| GroupRecord { key: *k, group: g.clone() }).collect();
    Ok((DecompositionReport { groups: q.groups.len(), sum_residual, flow_residual }, entries))
}

#[derive(Debug, Clone, Serialize)]
pub struct DpReport {
    pub value: f64,
    /// Exact value when solved in rational arithmetic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub states: usize,
    pub budget: usize,
    pub first_choice: Choice,
}

pub fn dp_report(instance: &Instance<f64>, cap: u128) -> Result<DpReport> {
    let sol = dp_exact_with_cap(instance, cap)?;
    let model = JointModel::new(instance, cap)?;
    let first = first_choice(&model, &sol);
    Ok(DpReport { value: sol.value, exact: None, states: sol.states, budget: instance.budget, first_choice: first })
}

pub fn dp_report_exact(instance: &Instance<Rational>, cap: u128) -> Result<DpReport> {
    let sol = dp_exact_with_cap(instance, cap)?;
    let model = JointModel::new(instance, cap)?;
    let first = first_choice(&model, &sol);
    Ok(DpReport {
        value: sol.value.to_f64(),
        exact: Some(sol.value.to_string()),
        states: sol.states,
        budget: instance.budget,
        first_choice: first,
    })
}

fn first_choice<S: Scalar>(model: &JointModel<S>, policy: &dyn JointPolicy<S>) -> Choice {
    if model.budget() == 0 {
        return Choice::Idle;
    }
    policy.decide(model, &model.initial(), 1).first().map_or(Choice::Idle, |c| c.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Priority27,
    Priority12,
    HalfExact,
    HalfSampled,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "priority27" => Ok(PolicyKind::Priority27),
            "priority12" => Ok(PolicyKind::Priority12),
            "half-exact" => Ok(PolicyKind::HalfExact),
            "half-sampled" => Ok(PolicyKind::HalfSampled),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub trials: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub virtual_continue: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub policy: PolicyKind,
    pub lp_objective: f64,
    pub simulation: SimulationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SampledEstimates>,
}

/// Builds the policy named by `config`; the sampled variant also returns its
/// estimates. `delta` defaults to `epsilon / (B n)`.
pub fn build_policy(
    instance: &Instance<f64>,
    config: &PolicyConfig,
) -> Result<(Box<dyn Policy>, Option<SampledEstimates>)> {
    Ok(match config.kind {
        PolicyKind::Priority27 => (Box::new(PriorityPolicy::priority27(instance)?), None),
        PolicyKind::Priority12 => (Box::new(PriorityPolicy::priority12(instance)?), None),
        PolicyKind::HalfExact => (Box::new(HalfScalingPolicy::exact(instance)?), None),
        PolicyKind::HalfSampled => {
            let delta =
                config.delta.unwrap_or(config.epsilon / (instance.budget * instance.arms.len()).max(1) as f64);
            let (p, est) = HalfScalingPolicy::sampled(instance, config.epsilon, delta, config.seed)?;
            (Box::new(p), Some(est))
        }
    })
}

pub fn policy_report(instance: &Instance<f64>, config: &PolicyConfig) -> Result<(PolicyReport, Box<dyn Policy>)> {
    let (policy, sampling) = build_policy(instance, config)?;
    let reduced = policy.instance();
    let (sol, _) = lp::solve_tables(reduced)?;
    let opts = RunOptions { virtual_continue: config.virtual_continue };
    let simulation = simulate(policy.as_ref(), config.trials, config.seed, opts)?;
    Ok((PolicyReport { policy: config.kind, lp_objective: sol.objective, simulation, sampling }, policy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectedPolicy {
    Optimal,
    Idle,
    HalfExact,
}

impl std::str::FromStr for ProjectedPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(ProjectedPolicy::Optimal),
            "idle" => Ok(ProjectedPolicy::Idle),
            "half-exact" => Ok(ProjectedPolicy::HalfExact),
            other => Err(format!("cannot project `{other}`; use optimal, idle or half-exact")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub policy: ProjectedPolicy,
    #[serde(flatten)]
    pub certificate: CertificateSummary,
}

/// Projects a joint-state policy of the reduced instance.
pub fn projection_report(instance: &Instance<f64>, which: ProjectedPolicy, cap: u128) -> Result<ProjectionReport> {
    let certificate = match which {
        ProjectedPolicy::HalfExact => {
            let half = HalfScalingPolicy::exact(instance)?;
            let model = JointModel::new(half.instance(), cap)?;
            project_policy(&model, &half.subr_policy())?.summary()
        }
        _ => {
            let reduced = reduce(instance)?;
            let model = JointModel::new(&reduced, cap)?;
            if which == ProjectedPolicy::Optimal {
                let dp = crate::dp::solve_model(&model)?;
                project_policy(&model, &dp)?.summary()
            } else {
                project_policy(&model, &IdlePolicy)?.summary()
            }
        }
    };
    Ok(ProjectionReport { policy: which, certificate })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrindReport {
    #[serde(flatten)]
    pub sweep: GridSweep,
    pub bound: f64,
    pub passed: bool,
}

pub const GRIND_BOUND: f64 = 5.0 / 9.0;

pub fn grind_report(resolution: usize) -> Result<GrindReport> {
    if resolution < 6 {
        return Err(Error::Argument("resolution must be at least 6".into()));
    }
    let sweep = grid_sweep(resolution as f64, resolution)?;
    let passed = sweep.max <= GRIND_BOUND + 1e-12;
    Ok(GrindReport { sweep, bound: GRIND_BOUND, passed })
}
