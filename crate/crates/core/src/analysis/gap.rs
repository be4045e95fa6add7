//! Ratio of the polynomial relaxation optimum to the exact optimum.

use serde::Serialize;

use crate::dp::dp_exact_with_cap;
use crate::lp::{self, Variant};
use crate::model::{Instance, Mode};
use crate::reduce::reduce;
use crate::scalar::Scalar;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub variant: Variant,
    pub lp_value: f64,
    pub dp_value: f64,
    /// `lp / dp`; one when both vanish, infinite when only the DP does.
    pub ratio: f64,
    pub infinite: bool,
}

/// Relaxation used for the gap: the job-level one for committed knapsack
/// instances, otherwise the mode-matching arm-level one.
pub fn gap_variant<S: Scalar>(instance: &Instance<S>) -> Variant {
    if instance.mode == Mode::KnapsackNoCancel && instance.jobs.is_some() {
        Variant::Knapsack
    } else {
        lp::default_variant(instance)
    }
}

pub fn projection_gap<S: Scalar>(instance: &Instance<S>, cap: u128) -> Result<GapReport> {
    let variant = gap_variant(instance);
    let problem = match variant {
        Variant::Knapsack => lp::build(instance, variant)?,
        _ => lp::build(&reduce(instance)?, variant)?,
    };
    let lp_value = problem.solve_certified()?.objective;
    let dp_value = dp_exact_with_cap(instance, cap)?.value;
    let ratio = if dp_value.is_positive_tol() {
        (lp_value.clone() / dp_value.clone()).to_f64()
    } else if lp_value.is_positive_tol() {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(GapReport { variant, lp_value: lp_value.to_f64(), dp_value: dp_value.to_f64(), ratio, infinite: ratio.is_infinite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::DEFAULT_STATE_CAP;
    use crate::generate::gap2;

    #[test]
    fn gap_two_family() {
        let g = projection_gap(&gap2::<f64>(10).unwrap(), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(g.variant, Variant::Knapsack);
        assert!((g.ratio - 1.9).abs() < 1e-9);
    }
}
