//! Monotone explicit finite-difference solver for the one-dimensional
//! fractional Stefan problem `∂ₜh + (−Δ)ˢΦ(h) = 0`, with tools to extract
//! self-similar profiles and probe propagation, tail and limit behaviour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod operator;
pub mod phase;
pub mod selfsimilar;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{init_cell_average, init_pointwise, EnthalpyState, FarField, Grid1D};
pub use operator::{ClassicalLaplacian, DiffusionOperator, Stencil, WeightsBackend};
pub use phase::{PhaseKind, PhaseLaw};
pub use stepper::{cfl_max_dt, ode_limit, run, run_classical, run_with, step, RunConfig, Trajectory};
