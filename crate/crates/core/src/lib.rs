//! LP-relaxation policies for multi-armed bandits with general arms,
//! multi-period actions and stochastic knapsack, plus an exact dynamic
//! programming oracle, a Monte Carlo simulator and verification tools.
//!
//! Modelling and LP code is generic over [`Scalar`] (`f32`, `f64` or exact
//! [`Rational`]); the simulated policies work in `f64`.

pub mod analysis;
pub mod dp;
pub mod error;
pub mod flow;
pub mod generate;
pub mod io;
pub mod lp;
pub mod model;
pub mod policy;
pub mod reduce;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type Instance = model::Instance<f64>;
pub type ExactInstance = model::Instance<Rational>;
pub type Instance32 = model::Instance<f32>;
pub type LpSolution = lp::LpSolution<f64>;
pub type PolyTables = lp::PolyTables<f64>;
pub type DpSolution = dp::DpSolution<f64>;
pub type ExactDpSolution = dp::DpSolution<Rational>;
