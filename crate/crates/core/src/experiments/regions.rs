use serde::{Deserialize, Serialize};

use super::{rightmost_water, run_state, water_components, Resolution};
use crate::error::{Error, Result};
use crate::grid::{init_cell_average, init_pointwise, EnthalpyState, FarField, Grid1D};
use crate::phase::PhaseLaw;
use crate::selfsimilar::{extract_profile, locate_free_boundary, StepDatum};

const WATER: (f64, f64) = (-2.0, 2.0);
const REGION: (f64, f64) = (3.0, 7.0);
const DELAY_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Enthalpy exactly `L` on the second region.
    Instant,
    /// Enthalpy `L − 0.05` on the second region.
    Delayed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergingReport {
    pub scenario: Scenario,
    pub times: Vec<f64>,
    pub components: Vec<usize>,
    /// Water present somewhere in the second region.
    pub second_region_wet: Vec<bool>,
    /// Last snapshot time at which the bounding step solution has no water
    /// in the second region (delayed scenario only).
    pub waiting_bound: Option<f64>,
    /// `((x_region − x_water)/ξ₀)^{2s}` from the bounding step solution.
    pub continuum_waiting_time: Option<f64>,
    pub onset: Option<f64>,
    pub positivity_kept: bool,
}

impl EmergingReport {
    pub fn passed(&self) -> bool {
        let timing = match self.scenario {
            Scenario::Instant => self.second_region_wet.first() == Some(&true),
            Scenario::Delayed => match (self.waiting_bound, self.onset) {
                (Some(bound), Some(onset)) => {
                    onset > bound && self.times.iter().zip(&self.second_region_wet).all(|(&t, &wet)| t > bound || !wet)
                }
                _ => false,
            },
        };
        timing && self.positivity_kept
    }
}

fn init_with(grid: Grid1D, far: FarField, res: &Resolution, h0: impl Fn(f64) -> f64) -> Result<EnthalpyState> {
    if res.cell_average {
        Ok(init_cell_average(grid, far, h0)?.0)
    } else {
        init_pointwise(grid, far, h0)
    }
}

fn wet_between(state: &EnthalpyState, law: &PhaseLaw, lo: f64, hi: f64) -> bool {
    state.values.iter().enumerate().any(|(b, &h)| {
        let x = state.grid.x(b);
        x >= lo && x <= hi && law.eval(h) > 0.0
    })
}

/// Water on `(−2, 2)` at `L + 1`, a second region on `(3, 7)` at or just
/// below `L`, dry ice at zero elsewhere.
pub fn emerging_regions(
    scenario: Scenario,
    s: f64,
    lat: f64,
    res: &Resolution,
    times: &[f64],
) -> Result<EmergingReport> {
    if times.first().is_none_or(|&t| !(t > 0.0)) {
        return Err(Error::invalid("times", "snapshots must start after t = 0"));
    }
    if lat < DELAY_GAP {
        return Err(Error::invalid("latent_heat", format!("must be at least {DELAY_GAP}")));
    }
    let law = PhaseLaw::one_phase(lat)?;
    let grid = res.grid()?;
    if grid.x_left() > WATER.0 - 1.0 || grid.x_right() < REGION.1 + 1.0 {
        return Err(Error::invalid("radius", "window must contain both regions with a margin"));
    }
    let region_level = match scenario {
        Scenario::Instant => lat,
        Scenario::Delayed => lat - DELAY_GAP,
    };
    let h0 = |x: f64| {
        if x > WATER.0 && x < WATER.1 {
            lat + 1.0
        } else if x > REGION.0 && x < REGION.1 {
            region_level
        } else {
            0.0
        }
    };
    let init = init_with(grid, FarField::constant(0.0), res, h0)?;
    let traj = run_state(&init, s, &law, res, times, |_| {})?;
    let snaps = &traj.snapshots;

    let second_region_wet: Vec<bool> = snaps.iter().map(|st| wet_between(st, &law, REGION.0, REGION.1)).collect();
    let onset = times.iter().zip(&second_region_wet).find(|(_, &w)| w).map(|(&t, _)| t);
    let mut positivity_kept = true;
    for pair in std::iter::once(&init).chain(snaps.iter()).collect::<Vec<_>>().windows(2) {
        let (before, after) = (pair[0], pair[1]);
        positivity_kept &=
            before.values.iter().zip(&after.values).all(|(&a, &b)| law.eval(a) <= 0.0 || law.eval(b) > 0.0);
    }

    let (waiting_bound, continuum_waiting_time) = match scenario {
        Scenario::Instant => (None, None),
        Scenario::Delayed => {
            // step solution with the jump at the water edge bounds the run from above
            let datum = StepDatum::new(lat, 1.0, DELAY_GAP)?;
            let companion_init = init_with(grid, datum.far_field(), res, |x| datum.eval(x - WATER.1))?;
            let companion = run_state(&companion_init, s, &law, res, times, |_| {})?;
            let bound = times
                .iter()
                .zip(&companion.snapshots)
                .take_while(|(_, st)| rightmost_water(st, &law).is_none_or(|x| x < REGION.0))
                .last()
                .map(|(&t, _)| t);
            // ξ₀ from the latest companion snapshot whose front is still inside the window
            let shifted = Grid1D::new(grid.x_left() - WATER.1, grid.dx(), grid.len())?;
            let xi0 = companion.snapshots.iter().rev().find_map(|st| {
                let moved = EnthalpyState { grid: shifted, ..st.clone() };
                let profile = extract_profile(&moved, &law, s, datum, None).ok()?;
                locate_free_boundary(&profile, None).ok().map(|fb| fb.xi0)
            });
            (bound, xi0.map(|x| ((REGION.0 - WATER.1) / x).powf(2.0 * s)))
        }
    };
    Ok(EmergingReport {
        scenario,
        times: times.to_vec(),
        components: snaps.iter().map(|st| water_components(st, &law).len()).collect(),
        second_region_wet,
        waiting_bound,
        continuum_waiting_time,
        onset,
        positivity_kept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub times: Vec<f64>,
    pub sup_difference: Vec<f64>,
    pub l1_difference: Vec<f64>,
}

impl DecayTable {
    pub fn sup_nonincreasing(&self) -> bool {
        self.sup_difference.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn l1_nonincreasing(&self) -> bool {
        self.l1_difference.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

/// Distance between the step-datum run and the same datum plus `height` on
/// `[−radius, radius]`, at each snapshot.
pub fn asymptotic_decay(
    s: f64,
    datum: StepDatum,
    height: f64,
    radius: f64,
    res: &Resolution,
    times: &[f64],
) -> Result<DecayTable> {
    let law = PhaseLaw::one_phase(datum.latent_heat)?;
    let grid = res.grid()?;
    let plain = datum.initial_state(grid, res.cell_average)?;
    let bumped =
        init_with(grid, datum.far_field(), res, |x| datum.eval(x) + if x.abs() <= radius { height } else { 0.0 })?;
    let a = run_state(&plain, s, &law, res, times, |_| {})?;
    let b = run_state(&bumped, s, &law, res, times, |_| {})?;
    let mut table = DecayTable { times: times.to_vec(), sup_difference: Vec::new(), l1_difference: Vec::new() };
    for (p, q) in a.snapshots.iter().zip(&b.snapshots) {
        let diff = p.values.iter().zip(&q.values).map(|(x, y)| (x - y).abs());
        table.sup_difference.push(diff.clone().fold(0.0, f64::max));
        table.l1_difference.push(diff.sum::<f64>() * grid.dx());
    }
    Ok(table)
}
