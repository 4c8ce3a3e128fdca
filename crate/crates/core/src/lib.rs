//! Optimal reflecting barriers for one-dimensional Lévy models with a convex
//! running cost and a proportional control cost, solved by Monte Carlo.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`, which is what the command line tool uses.

pub mod cost;
pub mod error;
pub mod estimators;
pub mod levy;
pub mod oracle;
pub mod path;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LevyTriplet64 = levy::LevyTriplet<f64>;
pub type JumpLaw64 = levy::JumpLaw<f64>;
pub type JumpSpec64 = levy::JumpSpec<f64>;
pub type CostSpec64 = cost::CostSpec<f64>;
pub type ProblemSpec64 = cost::ProblemSpec<f64>;
pub type SimConfig64 = path::SimConfig<f64>;
pub type Estimate64 = stats::EstimateWithError<f64>;
pub type BarrierResult64 = solver::BarrierResult<f64>;
pub type CheckReport64 = verify::CheckReport<f64>;

pub type LevyTriplet32 = levy::LevyTriplet<f32>;
pub type CostSpec32 = cost::CostSpec<f32>;
pub type ProblemSpec32 = cost::ProblemSpec<f32>;
pub type SimConfig32 = path::SimConfig<f32>;
