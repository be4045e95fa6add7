//! Extremal probability that a sum of independent nonnegative variables
//! with small means reaches half the horizon.

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrindBound {
    /// Expectations after merging down to three, in descending order.
    pub merged: [f64; 3],
    /// Values of the cases with 3, 2 and 1 variables kept.
    pub cases: [f64; 3],
    pub value: f64,
    /// Number of variables in the maximizing case.
    pub k: usize,
}

/// Evaluates the three extremal cases for expectations `mus`, each at most
/// `t/6` and summing to at most `t/3`, against threshold `t/2`.
pub fn grind_bound(mus: &[f64], t: f64) -> Result<GrindBound> {
    if !(t > 0.0) {
        return Err(Error::Argument("t must be positive".into()));
    }
    let cap = t / 6.0 * (1.0 + SLACK);
    if mus.iter().any(|&m| !(m >= 0.0) || m > cap) {
        return Err(Error::Argument(format!("expectations must lie in [0, t/6] with t = {t}")));
    }
    if mus.iter().sum::<f64>() > t / 3.0 * (1.0 + SLACK) {
        return Err(Error::Argument("expectations must sum to at most t/3".into()));
    }
    let mut v: Vec<f64> = mus.to_vec();
    // Two smallest of four or more sum to at most t/6, so merging keeps the
    // constraints.
    while v.len() > 3 {
        v.sort_by(|a, b| b.total_cmp(a));
        let a = v.pop().unwrap_or(0.0);
        let b = v.pop().unwrap_or(0.0);
        v.push(a + b);
    }
    v.resize(3, 0.0);
    v.sort_by(|a, b| b.total_cmp(a));
    let [m1, m2, m3] = [v[0], v[1], v[2]];
    let lambda = t / 2.0;
    let k3 = 1.0 - (1.0 - m1 / lambda) * (1.0 - m2 / lambda) * (1.0 - m3 / lambda);
    let k2 = 1.0 - (1.0 - m1 / (lambda - m3)) * (1.0 - m2 / (lambda - m3));
    let k1 = m1 / (lambda - m2 - m3);
    let cases = [k3, k2, k1];
    let (idx, value) = cases.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, c)| {
        if c > best.1 {
            (i, c)
        } else {
            best
        }
    });
    Ok(GrindBound { merged: [m1, m2, m3], cases, value, k: 3 - idx })
}

/// Largest failure probability `1 - prod(1 - p_i)` with `sum p_i <= r` and
/// every `p_i <= p_max`.
pub fn beta(r: f64, p_max: f64) -> f64 {
    let full = (r / p_max).floor();
    1.0 - (1.0 - p_max).powf(full) * (1.0 - (r - full * p_max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSweep {
    pub t: f64,
    pub resolution: usize,
    pub evaluated: u64,
    pub max: f64,
    pub argmax: [f64; 3],
}

/// Evaluates every descending triple on the grid of step `t/resolution`.
pub fn grid_sweep(t: f64, resolution: usize) -> Result<GridSweep> {
    if resolution == 0 {
        return Err(Error::Argument("resolution must be positive".into()));
    }
    let step = t / resolution as f64;
    let top = resolution / 6;
    let rows: Vec<(u64, f64, [f64; 3])> = (0..=top)
        .into_par_iter()
        .map(|k1| {
            let mut count = 0u64;
            let mut best = (f64::NEG_INFINITY, [0.0; 3]);
            for k2 in 0..=k1 {
                for k3 in 0..=k2 {
                    if 3 * (k1 + k2 + k3) > resolution {
                        break;
                    }
                    let mus = [k1 as f64 * step, k2 as f64 * step, k3 as f64 * step];
                    let g = grind_bound(&mus, t).expect("grid points satisfy the constraints");
                    count += 1;
                    if g.value > best.0 {
                        best = (g.value, mus);
                    }
                }
            }
            (count, best.0, best.1)
        })
        .collect();
    let evaluated = rows.iter().map(|r| r.0).sum();
    let (max, argmax) =
        rows.iter().fold((f64::NEG_INFINITY, [0.0; 3]), |acc, r| if r.1 > acc.0 { (r.1, r.2) } else { acc });
    Ok(GridSweep { t, resolution, evaluated, max, argmax })
}
