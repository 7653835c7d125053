use serde::{Deserialize, Serialize};

use super::{run_state, run_step_datum, Resolution};
use crate::error::{Error, Result};
use crate::grid::{init_pointwise, EnthalpyState, FarField};
use crate::phase::PhaseLaw;
use crate::selfsimilar::{extract_profile, locate_free_boundary, StepDatum};
use crate::stepper::{ode_limit, run_classical};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub amount: f64,
    pub time: f64,
    pub x: f64,
    pub latent_heat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub latent_heats: Vec<f64>,
    pub times: Vec<f64>,
    /// Violations of `lower ≤ u_L ≤ upper` beyond the tolerance.
    pub ordering_violations: usize,
    /// Violations of `u_{L₂} ≤ u_{L₁}` for `L₂ > L₁` beyond the tolerance.
    pub monotonicity_violations: usize,
    pub worst: Option<Violation>,
    /// `10·ε·(L + sup u₀)` for the largest `L`.
    pub tolerance: f64,
    /// Per `L`, `sup |u_L − upper|` over the snapshots, inside the support.
    pub distance_to_upper: Vec<f64>,
    /// Per `L`, `sup |u_L − lower|` over the snapshots, on all nodes.
    pub distance_to_lower: Vec<f64>,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.ordering_violations == 0 && self.monotonicity_violations == 0
    }
}

fn temperatures(states: &[EnthalpyState], law: &PhaseLaw) -> Vec<Vec<f64>> {
    states.iter().map(|st| st.temperature(law)).collect()
}

/// Brackets the one-phase temperature `u_L` (datum `L + u₀` on `[a, b]`, zero
/// outside) between the fractional heat flow of `u₀` on the line and the
/// same flow with `u = 0` enforced outside `[a, b]` after every step.
pub fn limit_l_bracketing(
    s: f64,
    support: (f64, f64),
    u0: impl Fn(f64) -> f64,
    latent_heats: &[f64],
    res: &Resolution,
    times: &[f64],
) -> Result<LimitReport> {
    let (a, b) = support;
    if !(a < b) {
        return Err(Error::invalid("support", format!("empty interval [{a}, {b}]")));
    }
    if latent_heats.iter().any(|&l| !(l >= 0.0)) || latent_heats.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("latent_heat", "values must be nonnegative and strictly increasing"));
    }
    let grid = res.grid()?;
    let inside = |x: f64| x >= a && x <= b;
    let base = |x: f64| if inside(x) { u0(x) } else { 0.0 };
    let heat = PhaseLaw::identity();
    let heat_init = init_pointwise(grid, FarField::constant(0.0), base)?;
    if heat_init.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("u0 must be nonnegative".into()));
    }
    let sup_u0 = heat_init.values.iter().copied().fold(0.0f64, f64::max);

    let upper = temperatures(&run_state(&heat_init, s, &heat, res, times, |_| {})?.snapshots, &heat);
    let outside: Vec<usize> = (0..grid.len()).filter(|&k| !inside(grid.x(k))).collect();
    let clamp = |st: &mut EnthalpyState| outside.iter().for_each(|&k| st.values[k] = 0.0);
    let lower = temperatures(&run_state(&heat_init, s, &heat, res, times, clamp)?.snapshots, &heat);

    let l_max = latent_heats.last().copied().unwrap_or(0.0);
    let tolerance = 10.0 * f64::EPSILON * (l_max + sup_u0);
    let mut report = LimitReport {
        latent_heats: latent_heats.to_vec(),
        times: times.to_vec(),
        ordering_violations: 0,
        monotonicity_violations: 0,
        worst: None,
        tolerance,
        distance_to_upper: Vec::new(),
        distance_to_lower: Vec::new(),
    };
    let note = |report: &mut LimitReport, amount: f64, time: f64, x: f64, lat: f64| {
        if report.worst.is_none_or(|w| amount > w.amount) {
            report.worst = Some(Violation { amount, time, x, latent_heat: lat });
        }
    };
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for &lat in latent_heats {
        let law = PhaseLaw::one_phase(lat)?;
        let init = init_pointwise(grid, FarField::constant(0.0), |x| if inside(x) { lat + u0(x) } else { 0.0 })?;
        let u = temperatures(&run_state(&init, s, &law, res, times, |_| {})?.snapshots, &law);
        let (mut d_up, mut d_low) = (0.0f64, 0.0f64);
        for (j, &t) in times.iter().enumerate() {
            for k in 0..grid.len() {
                let v = u[j][k];
                let excess = (v - upper[j][k]).max(lower[j][k] - v);
                if excess > tolerance {
                    report.ordering_violations += 1;
                    note(&mut report, excess, t, grid.x(k), lat);
                }
                if let Some(prev) = &previous {
                    let rise = v - prev[j][k];
                    if rise > tolerance {
                        report.monotonicity_violations += 1;
                        note(&mut report, rise, t, grid.x(k), lat);
                    }
                }
                if inside(grid.x(k)) {
                    d_up = d_up.max((v - upper[j][k]).abs());
                }
                d_low = d_low.max((v - lower[j][k]).abs());
            }
        }
        report.distance_to_upper.push(d_up);
        report.distance_to_lower.push(d_low);
        previous = Some(u);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontComparison {
    pub s: f64,
    pub time: f64,
    pub fractional_front: f64,
    pub classical_front: f64,
    pub gap: f64,
    pub dx: f64,
}

/// Free-boundary position at `time` for the step datum, fractional order
/// `s` against the three-point Laplacian.
pub fn classical_front_comparison(s: f64, datum: StepDatum, res: &Resolution, time: f64) -> Result<FrontComparison> {
    let frac = run_step_datum(s, datum, res, &[time])?;
    let xi_frac = locate_free_boundary(&frac.profiles[0], None)?.xi0;
    let law = PhaseLaw::one_phase(datum.latent_heat)?;
    let init = datum.initial_state(res.grid()?, res.cell_average)?;
    let traj = run_classical(&init, &law, &res.config(&[time])?)?;
    let profile = extract_profile(&traj.snapshots[0], &law, 1.0, datum, None)?;
    let xi_cl = locate_free_boundary(&profile, None)?.xi0;
    let fractional_front = xi_frac * time.powf(1.0 / (2.0 * s));
    let classical_front = xi_cl * time.sqrt();
    Ok(FrontComparison {
        s,
        time,
        fractional_front,
        classical_front,
        gap: (fractional_front - classical_front).abs(),
        dx: res.dx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeLimitReport {
    pub s: f64,
    pub time: f64,
    /// `max |u − u₀e^{−t}| / (u₀e^{−t})` over the checked nodes.
    pub max_relative_error: f64,
    pub nodes_checked: usize,
}

/// Compares a small-`s` run with the exact zero-order limit
/// `u = u₀e^{−t}` at nodes with `|x − c| ≤ inner` inside the water box.
pub fn ode_limit_check(
    s: f64,
    lat: f64,
    box_half_width: f64,
    inner: f64,
    res: &Resolution,
    time: f64,
) -> Result<OdeLimitReport> {
    if !(inner > 0.0 && inner < box_half_width) {
        return Err(Error::invalid("inner", "must lie strictly inside the box"));
    }
    let law = PhaseLaw::one_phase(lat)?;
    let grid = res.grid()?;
    let init =
        init_pointwise(grid, FarField::constant(0.0), |x| if x.abs() <= box_half_width { lat + 1.0 } else { 0.0 })?;
    let traj = run_state(&init, s, &law, res, &[time], |_| {})?;
    let exact = ode_limit(&init, &law, time)?;
    let mut worst = 0.0f64;
    let mut nodes_checked = 0;
    for k in (0..grid.len()).filter(|&k| grid.x(k).abs() <= inner) {
        let reference = law.eval(exact.values[k]);
        let got = law.eval(traj.snapshots[0].values[k]);
        worst = worst.max((got - reference).abs() / reference);
        nodes_checked += 1;
    }
    Ok(OdeLimitReport { s, time, max_relative_error: worst, nodes_checked })
}
