//! Executable policies.
//!
//! Policies run on the reduced (bridge-expanded, layered) form of an
//! instance and are driven trial by trial by the simulator. Each trial owns
//! its random substreams, so trials are independent and reproducible.

pub mod half;
pub mod priority;

use serde::Serialize;

use crate::model::Instance;

pub use half::{
    estimate_free, propagate_subr, sampling_params, HalfScalingPolicy, Lambda, SampledEstimates, SamplingParams,
    SubrPolicy, SubrTables,
};
pub use priority::{ExecState, PriorityPolicy, Status};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep executing past the budget (without reward) until every arm is
    /// done, so that the status laws of the analysis can be observed.
    pub virtual_continue: bool,
}

/// Next status of an arm after a play: node plus, if not abandoned, the
/// planned action and priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NextStatus {
    pub node: usize,
    pub action: Option<usize>,
    pub t: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayRecord {
    pub clock: usize,
    pub arm: usize,
    pub node: usize,
    pub action: usize,
    /// Status index the play was made from: the priority for priority
    /// policies, the clock for half-scaling policies.
    pub status_t: usize,
    pub reward: f64,
    pub new_status: NextStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialOutcome {
    pub reward: f64,
    pub plays: Vec<PlayRecord>,
}

pub trait Policy: Sync {
    fn id(&self) -> String;

    /// The reduced instance the policy executes on.
    fn instance(&self) -> &Instance<f64>;

    fn run_trial(&self, seed: u64, trial: u64, opts: &RunOptions) -> TrialOutcome;
}

/// Draws one transition of `node` under `action`.
pub(crate) fn sample_transition<'a>(
    rng: &mut crate::rng::StreamRng,
    node: &'a crate::model::Node<f64>,
    action: usize,
) -> &'a crate::model::Transition<f64> {
    let ts = &node.transitions[action];
    let idx = crate::rng::pick(rng, ts.iter().map(|t| t.prob)).unwrap_or(ts.len() - 1);
    &ts[idx]
}
