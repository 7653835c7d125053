use serde::{Deserialize, Serialize};

use super::{run_state, run_step_datum, support_radius, Resolution};
use crate::error::{Error, Result};
use crate::grid::{init_cell_average, init_pointwise, EnthalpyState, FarField};
use crate::phase::PhaseLaw;
use crate::selfsimilar::{fit_power_law, locate_free_boundary, ExponentFit, StepDatum};

/// `h₀ = inside` on `|x − center| ≤ half_width`, `outside` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDatum {
    pub center: f64,
    pub half_width: f64,
    pub inside: f64,
    pub outside: f64,
}

impl BoxDatum {
    pub fn eval(&self, x: f64) -> f64 {
        if (x - self.center).abs() <= self.half_width {
            self.inside
        } else {
            self.outside
        }
    }

    pub fn initial_state(&self, res: &Resolution) -> Result<EnthalpyState> {
        let grid = res.grid()?;
        let far = FarField::constant(self.outside);
        if res.cell_average {
            Ok(init_cell_average(grid, far, |x| self.eval(x))?.0)
        } else {
            init_pointwise(grid, far, |x| self.eval(x))
        }
    }
}

/// Closed ball `|x − center| ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportTrace {
    pub times: Vec<f64>,
    /// Largest `|x − x₀|` with `u > 0`; zero when there is no water.
    pub support_radius: Vec<f64>,
    /// `R + ξ₀ t^{1/(2s)}`.
    pub bound: Vec<f64>,
    /// `(sup Φ(h₀)/ε + 1)·R`.
    pub max_bound: f64,
    pub xi0: f64,
    /// Slack added to `bound` when checking containment.
    pub slack: f64,
    pub contained: bool,
    pub within_max_bound: bool,
    pub nondecreasing: bool,
}

impl SupportTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,radius,bound")?;
        for k in 0..self.times.len() {
            writeln!(out, "{},{},{}", self.times[k], self.support_radius[k], self.bound[k])?;
        }
        Ok(())
    }
}

/// Tracks the support of `u` for a one-phase run and compares it with the
/// step-datum comparison bound (`P1 = sup Φ(h₀)`, `P2 = ε`).
///
/// Requires `h₀ ≤ L − ε` outside `B_R(x₀)`, including the far field.
pub fn support_growth(
    s: f64,
    law: &PhaseLaw,
    init: &EnthalpyState,
    ball: Ball,
    eps: f64,
    res: &Resolution,
    times: &[f64],
) -> Result<SupportTrace> {
    let lat = law.latent_heat();
    let Ball { center, radius } = ball;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!(
            "finite propagation needs h0 <= L - eps outside the ball with eps > 0, got eps = {eps}"
        )));
    }
    let outside_ok = init
        .values
        .iter()
        .enumerate()
        .filter(|(b, _)| (init.grid.x(*b) - center).abs() > radius)
        .all(|(_, &h)| h <= lat - eps);
    if !outside_ok || init.far.left > lat - eps || init.far.right > lat - eps {
        return Err(Error::Precondition(format!(
            "h0 exceeds L - eps = {} outside the ball of radius {radius}; finite propagation is not guaranteed",
            lat - eps
        )));
    }
    let sup_temp = init.values.iter().map(|&h| law.eval(h)).fold(0.0f64, f64::max);
    if !(sup_temp > 0.0) {
        return Err(Error::NoWater { threshold: 0.0 });
    }
    let companion = run_step_datum(s, StepDatum::new(lat, sup_temp, eps)?, res, &[1.0])?;
    let xi0 = locate_free_boundary(&companion.profiles[0], None)?.xi0;

    let traj = run_state(init, s, law, res, times, |_| {})?;
    let support: Vec<f64> = traj.snapshots.iter().map(|st| support_radius(st, law, center).unwrap_or(0.0)).collect();
    let bound: Vec<f64> = times.iter().map(|&t| radius + xi0 * t.powf(1.0 / (2.0 * s))).collect();
    let max_bound = (sup_temp / eps + 1.0) * radius;
    let slack = res.dx;
    Ok(SupportTrace {
        contained: support.iter().zip(&bound).all(|(r, b)| *r <= b + slack),
        within_max_bound: support.iter().all(|&r| r <= max_bound),
        nondecreasing: support.windows(2).all(|w| w[1] >= w[0]),
        times: times.to_vec(),
        support_radius: support,
        bound,
        max_bound,
        xi0,
        slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub times: Vec<f64>,
    /// Fit of `h` against `|x − center|` on the right of the datum.
    pub fits: Vec<ExponentFit>,
    pub min_enthalpy: Vec<f64>,
    pub positive: bool,
}

/// Far-field decay `h ≍ |x|^{−(1+2s)}` of a compactly supported datum with
/// zero far field, fitted on `|x − center| ∈ window`.
pub fn enthalpy_tail(
    s: f64,
    law: &PhaseLaw,
    datum: &BoxDatum,
    res: &Resolution,
    times: &[f64],
    window: (f64, f64),
) -> Result<TailReport> {
    if datum.outside != 0.0 || datum.inside <= law.latent_heat() {
        return Err(Error::Precondition("enthalpy tail needs water inside the box and zero outside".into()));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("times", "tail fits need t > 0"));
    }
    let init = datum.initial_state(res)?;
    let traj = run_state(&init, s, law, res, times, |_| {})?;
    let mut fits = Vec::new();
    let mut min_enthalpy = Vec::new();
    for snap in &traj.snapshots {
        let floor = 1e3 * f64::EPSILON * datum.inside;
        let pts: Vec<(f64, f64)> = snap
            .values
            .iter()
            .enumerate()
            .map(|(b, &h)| (snap.grid.x(b) - datum.center, h))
            .filter(|&(r, h)| r >= window.0 && r <= window.1 && h > floor)
            .collect();
        fits.push(fit_power_law(&pts, window)?);
        min_enthalpy.push(snap.values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(TailReport { positive: min_enthalpy.iter().all(|&m| m > 0.0), times: times.to_vec(), fits, min_enthalpy })
}
