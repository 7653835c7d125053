//! Scripted numerical experiments: free-boundary sweeps, propagation and
//! tail behaviour, limits in `L` and `s`, emerging water regions and the
//! decay of perturbations of the step datum.
//!
//! Each experiment runs its own simulations at a caller-supplied
//! [`Resolution`] and returns a plain report; pass/fail flags are computed
//! but never turned into errors, so callers can tabulate failures.

mod limits;
mod propagation;
mod regions;
mod sweep;

pub use limits::{
    classical_front_comparison, limit_l_bracketing, ode_limit_check, FrontComparison, LimitReport, OdeLimitReport,
};
pub use propagation::{enthalpy_tail, support_growth, Ball, BoxDatum, SupportTrace, TailReport};
pub use regions::{asymptotic_decay, emerging_regions, DecayTable, EmergingReport, Scenario};
pub use sweep::{sweep_record, sweep_xi0_vs_p2, sweep_xi0_vs_s, write_sweep_csv, P2Sweep, SSweep, SweepRecord};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{EnthalpyState, Grid1D};
use crate::operator::{Stencil, WeightsBackend};
use crate::phase::PhaseLaw;
use crate::selfsimilar::{extract_profile, SelfSimilarProfile, StepDatum};
use crate::stepper::{run, run_with, RunConfig, Trajectory};

/// Spatial resolution and time-step policy shared by an experiment's runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub dx: f64,
    /// Half-width of the centered window.
    pub radius: f64,
    pub theta: f64,
    pub backend: WeightsBackend,
    /// Cell averages place a jump at a node exactly at its midpoint value.
    pub cell_average: bool,
}

impl Resolution {
    pub fn new(dx: f64, radius: f64) -> Self {
        Resolution {
            dx,
            radius,
            theta: crate::stepper::DEFAULT_THETA,
            backend: WeightsBackend::PowerOfDiscreteLaplacian,
            cell_average: true,
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::centered(self.radius, self.dx)
    }

    /// Stencil whose window spans the whole grid.
    pub fn stencil(&self, s: f64, grid: &Grid1D) -> Result<Stencil> {
        Stencil::build(self.backend, s, self.dx, grid.len())
    }

    pub fn config(&self, times: &[f64]) -> Result<RunConfig> {
        let t_final = times.last().copied().unwrap_or(0.0);
        RunConfig::new(t_final, self.theta, times.to_vec())
    }
}

/// Snapshots of a step-datum run and their self-similar profiles.
#[derive(Debug, Clone)]
pub struct StepRun {
    pub trajectory: Trajectory,
    pub profiles: Vec<SelfSimilarProfile>,
}

/// Runs the one-phase step datum and extracts a profile at every positive
/// snapshot time.
pub fn run_step_datum(s: f64, datum: StepDatum, res: &Resolution, times: &[f64]) -> Result<StepRun> {
    let grid = res.grid()?;
    let law = PhaseLaw::one_phase(datum.latent_heat)?;
    let stencil = res.stencil(s, &grid)?;
    let init = datum.initial_state(grid, res.cell_average)?;
    let trajectory = run(&init, &stencil, &law, &res.config(times)?)?;
    let profiles = trajectory
        .snapshots
        .iter()
        .filter(|snap| snap.time > 0.0)
        .map(|snap| extract_profile(snap, &law, s, datum, None))
        .collect::<Result<_>>()?;
    Ok(StepRun { trajectory, profiles })
}

fn run_state(
    init: &EnthalpyState,
    s: f64,
    law: &PhaseLaw,
    res: &Resolution,
    times: &[f64],
    after_step: impl FnMut(&mut EnthalpyState),
) -> Result<Trajectory> {
    let stencil = res.stencil(s, &init.grid)?;
    run_with(init, &stencil, law, &res.config(times)?, after_step)
}

/// Largest `|x − center|` over nodes with positive temperature, or `None`.
fn support_radius(state: &EnthalpyState, law: &PhaseLaw, center: f64) -> Option<f64> {
    state
        .values
        .iter()
        .enumerate()
        .filter(|(_, &h)| law.eval(h) > 0.0)
        .map(|(b, _)| (state.grid.x(b) - center).abs())
        .reduce(f64::max)
}

/// Rightmost node with positive temperature.
fn rightmost_water(state: &EnthalpyState, law: &PhaseLaw) -> Option<f64> {
    state.values.iter().rposition(|&h| law.eval(h) > 0.0).map(|b| state.grid.x(b))
}

/// Maximal runs of nodes with positive temperature, as `(x_first, x_last)`.
fn water_components(state: &EnthalpyState, law: &PhaseLaw) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    for (b, &h) in state.values.iter().enumerate() {
        match (law.eval(h) > 0.0, start) {
            (true, None) => start = Some(b),
            (false, Some(a)) => {
                out.push((state.grid.x(a), state.grid.x(b - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((state.grid.x(a), state.grid.x(state.values.len() - 1)));
    }
    out
}
