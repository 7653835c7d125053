//! Explicit monotone time stepping `V ← V − dt·L Φ(V)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::EnthalpyState;
use crate::operator::{ClassicalLaplacian, DiffusionOperator, Stencil};
use crate::phase::{PhaseKind, PhaseLaw};

/// Default CFL safety factor.
pub const DEFAULT_THETA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_final: f64,
    pub theta: f64,
    /// Sorted times in `[0, t_final]` at which the state is recorded.
    pub snapshot_times: Vec<f64>,
}

impl RunConfig {
    /// An empty snapshot list records `t_final` only.
    pub fn new(t_final: f64, theta: f64, snapshot_times: Vec<f64>) -> Result<Self> {
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::invalid("t_final", format!("must be finite and nonnegative, got {t_final}")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1], got {theta}")));
        }
        let snapshot_times = if snapshot_times.is_empty() { vec![t_final] } else { snapshot_times };
        for w in snapshot_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("snapshots", "times must be strictly increasing"));
            }
        }
        if snapshot_times.iter().any(|&t| !(0.0..=t_final).contains(&t)) {
            return Err(Error::invalid("snapshots", format!("times must lie in [0, {t_final}]")));
        }
        Ok(RunConfig { t_final, theta, snapshot_times })
    }
}

/// Largest step for which the update is order preserving, times `theta`.
pub fn cfl_max_dt(op: &impl DiffusionOperator, law: &PhaseLaw, theta: f64) -> f64 {
    theta / (law.lipschitz() * op.total_weight())
}

/// Reusable buffers for repeated steps on one grid.
struct Workspace {
    temp: Vec<f64>,
    flux_out: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        Workspace { temp: vec![0.0; m], flux_out: vec![0.0; m] }
    }
}

fn check_spacing(op: &impl DiffusionOperator, state: &EnthalpyState) -> Result<()> {
    let (a, b) = (op.dx(), state.grid.dx());
    if (a - b).abs() > 1e-12 * b {
        return Err(Error::SpacingMismatch { stencil_dx: a, grid_dx: b });
    }
    Ok(())
}

fn advance(
    state: &mut EnthalpyState,
    op: &impl DiffusionOperator,
    law: &PhaseLaw,
    dt: f64,
    ws: &mut Workspace,
    step_index: usize,
) -> Result<()> {
    law.eval_into(&state.values, &mut ws.temp);
    let far = state.far.map(|h| law.eval(h));
    let flux = op.apply_into(&ws.temp, far, &mut ws.flux_out);
    for (v, l) in state.values.iter_mut().zip(&ws.flux_out) {
        *v -= dt * l;
    }
    state.exterior_gain.0 += dt * flux.left;
    state.exterior_gain.1 += dt * flux.right;
    state.time += dt;
    if let Some(index) = state.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericAbort { step: step_index, index, time: state.time });
    }
    Ok(())
}

/// One explicit step of length `dt`.
pub fn step(state: &EnthalpyState, op: &impl DiffusionOperator, law: &PhaseLaw, dt: f64) -> Result<EnthalpyState> {
    check_spacing(op, state)?;
    let dt_max = cfl_max_dt(op, law, 1.0);
    if !(dt >= 0.0 && dt <= dt_max) {
        return Err(Error::CflViolation { dt, dt_max });
    }
    let mut next = state.clone();
    advance(&mut next, op, law, dt, &mut Workspace::new(state.values.len()), 1)?;
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One state per requested snapshot time, in order.
    pub snapshots: Vec<EnthalpyState>,
    /// Step length used away from snapshot landings.
    pub dt: f64,
    pub steps: usize,
}

/// Runs to each snapshot time. `after_step` is applied to the state after
/// every step, before any snapshot is recorded.
pub fn run_with(
    initial: &EnthalpyState,
    op: &impl DiffusionOperator,
    law: &PhaseLaw,
    config: &RunConfig,
    mut after_step: impl FnMut(&mut EnthalpyState),
) -> Result<Trajectory> {
    check_spacing(op, initial)?;
    let dt = cfl_max_dt(op, law, config.theta);
    let mut state = initial.clone();
    let start = state.time;
    let mut ws = Workspace::new(state.values.len());
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut steps = 0;
    for &offset in &config.snapshot_times {
        let target = start + offset;
        while state.time < target {
            let remaining = target - state.time;
            steps += 1;
            if remaining <= dt {
                advance(&mut state, op, law, remaining, &mut ws, steps)?;
                state.time = target;
            } else {
                advance(&mut state, op, law, dt, &mut ws, steps)?;
            }
            after_step(&mut state);
        }
        snapshots.push(state.clone());
    }
    Ok(Trajectory { snapshots, dt, steps })
}

pub fn run(initial: &EnthalpyState, stencil: &Stencil, law: &PhaseLaw, config: &RunConfig) -> Result<Trajectory> {
    run_with(initial, stencil, law, config, |_| {})
}

/// Same loop with the three-point Laplacian (`s = 1`).
pub fn run_classical(initial: &EnthalpyState, law: &PhaseLaw, config: &RunConfig) -> Result<Trajectory> {
    let op = ClassicalLaplacian::new(initial.grid.dx())?;
    run_with(initial, &op, law, config, |_| {})
}

/// Exact solution of `∂ₜh + (h − L)₊ = 0`, the zero-order limit.
pub fn ode_limit(state: &EnthalpyState, law: &PhaseLaw, t: f64) -> Result<EnthalpyState> {
    if law.kind() != PhaseKind::OnePhase {
        return Err(Error::Precondition("the zero-order limit is defined for the one-phase law".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", format!("must be finite and nonnegative, got {t}")));
    }
    let lat = law.latent_heat();
    let decay = (-t).exp();
    let evolve = |h: f64| if h > lat { (h - lat) * decay + lat } else { h };
    let mut out = state.clone();
    out.values.iter_mut().for_each(|h| *h = evolve(*h));
    out.far = state.far.map(evolve);
    out.time = state.time + t;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FarField, Grid1D};
    use proptest::prelude::*;

    fn stencil_for(grid: &Grid1D, s: f64) -> Stencil {
        Stencil::power(s, grid.dx(), grid.len()).unwrap()
    }

    #[test]
    fn ice_is_stationary() {
        let grid = Grid1D::centered(2.0, 0.1).unwrap();
        let law = PhaseLaw::one_phase(1.0).unwrap();
        let st = stencil_for(&grid, 0.4);
        let state = EnthalpyState::from_values(
            grid,
            FarField::new(0.5, 0.0),
            grid.nodes().map(|x| 0.5 + 0.4 * x.sin()).collect(),
        )
        .unwrap();
        let cfg = RunConfig::new(1.0, 0.9, vec![]).unwrap();
        let out = run(&state, &st, &law, &cfg).unwrap();
        assert_eq!(out.snapshots[0].values, state.values);
        assert_eq!(out.snapshots[0].time, 1.0);
    }

    #[test]
    fn single_water_cell_closed_form() {
        let grid = Grid1D::centered(1.0, 0.1).unwrap();
        let (lat, theta) = (2.0, 0.8);
        let law = PhaseLaw::one_phase(lat).unwrap();
        let st = stencil_for(&grid, 0.6);
        let b0 = grid.nearest(0.0).unwrap();
        let mut values = vec![lat; grid.len()];
        values[b0] = lat + 1.0;
        let state = EnthalpyState::from_values(grid, FarField::constant(lat), values).unwrap();
        let total = st.total_weight();
        let next = step(&state, &st, &law, theta / total).unwrap();
        assert!((next.values[b0] - (lat + 1.0 - theta)).abs() < 1e-14);
        for g in 1..=5 {
            let expected = lat + theta * st.weight(g) / total;
            assert!((next.values[b0 + g] - expected).abs() < 1e-14);
            assert!((next.values[b0 - g] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn cfl_scales_with_lipschitz_and_spacing() {
        let s = 0.35;
        let st1 = Stencil::power(s, 0.1, 50).unwrap();
        let st2 = Stencil::power(s, 0.05, 50).unwrap();
        let id = PhaseLaw::identity();
        let two = PhaseLaw::two_phase(1.0, 2.0, 3.0).unwrap();
        let base = cfl_max_dt(&st1, &id, 1.0);
        assert!((cfl_max_dt(&st1, &two, 1.0) - base / 3.0).abs() < 1e-15 * base);
        let ratio = cfl_max_dt(&st2, &id, 1.0) / base;
        assert!((ratio - 0.5f64.powf(2.0 * s)).abs() < 1e-12);
        let cl = ClassicalLaplacian::new(0.1).unwrap();
        assert!((cfl_max_dt(&cl, &id, 0.5) - 0.5 * 0.01 / 2.0).abs() < 1e-16);
    }

    #[test]
    fn violations_are_rejected() {
        let grid = Grid1D::centered(1.0, 0.1).unwrap();
        let state = init_const(grid, 0.0);
        let st = stencil_for(&grid, 0.5);
        let law = PhaseLaw::identity();
        let dt_max = cfl_max_dt(&st, &law, 1.0);
        assert!(matches!(step(&state, &st, &law, dt_max * 1.001), Err(Error::CflViolation { .. })));
        let other = Stencil::power(0.5, 0.2, 10).unwrap();
        assert!(matches!(step(&state, &other, &law, 1e-4), Err(Error::SpacingMismatch { .. })));
        assert!(RunConfig::new(1.0, 1.5, vec![]).is_err());
        assert!(RunConfig::new(1.0, 0.5, vec![0.5, 0.2]).is_err());
        assert!(RunConfig::new(1.0, 0.5, vec![2.0]).is_err());
    }

    fn init_const(grid: Grid1D, c: f64) -> EnthalpyState {
        EnthalpyState::from_values(grid, FarField::constant(c), vec![c; grid.len()]).unwrap()
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let grid = Grid1D::centered(1.0, 0.1).unwrap();
        let state = init_const(grid, 3.0);
        let cfg = RunConfig::new(0.0, 0.9, vec![]).unwrap();
        let out = run(&state, &stencil_for(&grid, 0.5), &PhaseLaw::identity(), &cfg).unwrap();
        assert_eq!(out.snapshots, vec![state]);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn lands_exactly_on_snapshot_times() {
        let grid = Grid1D::centered(2.0, 0.1).unwrap();
        let state =
            EnthalpyState::from_values(grid, FarField::constant(0.0), grid.nodes().map(|x| (-x * x).exp()).collect())
                .unwrap();
        let times = vec![0.0, 0.0123, 0.05, 0.1];
        let cfg = RunConfig::new(0.1, 0.7, times.clone()).unwrap();
        let out = run(&state, &stencil_for(&grid, 0.5), &PhaseLaw::identity(), &cfg).unwrap();
        let got: Vec<f64> = out.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(got, times);
        assert_eq!(out.snapshots[0].values, state.values);
    }

    #[test]
    fn identity_law_conserves_lattice_mass() {
        let grid = Grid1D::centered(3.0, 0.1).unwrap();
        let state = EnthalpyState::from_values(
            grid,
            FarField::constant(0.0),
            grid.nodes().map(|x| (-4.0 * x * x).exp()).collect(),
        )
        .unwrap();
        let m0 = state.lattice_mass();
        let cfg = RunConfig::new(0.5, 0.9, vec![]).unwrap();
        let out = run(&state, &stencil_for(&grid, 0.3), &PhaseLaw::identity(), &cfg).unwrap();
        let last = &out.snapshots[0];
        assert!((last.lattice_mass() - m0).abs() < 1e-12 * m0);
        assert!(last.exterior_gain.0 > 0.0 && last.exterior_gain.1 > 0.0);
    }

    #[test]
    fn ode_limit_closed_form() {
        let grid = Grid1D::centered(1.0, 0.5).unwrap();
        let law = PhaseLaw::one_phase(1.0).unwrap();
        let state = EnthalpyState::from_values(grid, FarField::new(2.0, 0.5), vec![2.0, 0.5, 0.5, 1.0, 2.0]).unwrap();
        let out = ode_limit(&state, &law, 2f64.ln()).unwrap();
        assert_eq!(out.values[1..4], [0.5, 0.5, 1.0]);
        assert!((out.values[0] - 1.5).abs() < 1e-15);
        assert!((out.far.left - 1.5).abs() < 1e-15);
        assert_eq!(out.far.right, 0.5);
        assert!(ode_limit(&state, &PhaseLaw::identity(), 1.0).is_err());
    }

    #[test]
    fn classical_step_datum_keeps_a_sharp_front() {
        let grid = Grid1D::centered(4.0, 0.05).unwrap();
        let law = PhaseLaw::one_phase(1.0).unwrap();
        let state =
            crate::grid::init_pointwise(grid, FarField::new(2.0, 0.0), |x| if x <= 0.0 { 2.0 } else { 0.0 }).unwrap();
        let cfg = RunConfig::new(0.5, 0.9, vec![]).unwrap();
        let out = run_classical(&state, &law, &cfg).unwrap();
        let h = &out.snapshots[0].values;
        // enthalpy crosses from above L to well below it within one cell
        let front = h.iter().position(|&v| v <= 1.0).unwrap();
        assert!(h[front - 1] > 1.0);
        assert!(h[front + 1] < 0.5, "{:?}", &h[front - 2..front + 3]);
    }

    fn random_pair(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64)> {
        (
            prop::collection::vec(-2.0f64..3.0, m),
            prop::collection::vec(0.0f64..1.5, m),
            -2.0f64..3.0,
            0.0f64..1.5,
            0.05f64..0.95,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn step_preserves_order_bounds_and_contracts(
            (a, gap, far_a, far_gap, s) in random_pair(40),
            lat in 0.0f64..2.0,
        ) {
            let grid = Grid1D::new(-2.0, 0.1, 40).unwrap();
            let law = PhaseLaw::one_phase(lat).unwrap();
            let st = stencil_for(&grid, s);
            let b: Vec<f64> = a.iter().zip(&gap).map(|(x, g)| x + g).collect();
            let mut lo = EnthalpyState::from_values(grid, FarField::constant(far_a), a).unwrap();
            let mut hi = EnthalpyState::from_values(grid, FarField::constant(far_a + far_gap), b).unwrap();
            let dt = cfl_max_dt(&st, &law, 0.95);
            for _ in 0..5 {
                let (min0, max0) = lo.extrema();
                let l1_before: f64 = hi.values.iter().zip(&lo.values).map(|(x, y)| (x - y).max(0.0)).sum();
                let nlo = step(&lo, &st, &law, dt).unwrap();
                let nhi = step(&hi, &st, &law, dt).unwrap();
                for (x, y) in nlo.values.iter().zip(&nhi.values) {
                    prop_assert!(x <= y);
                }
                let (min1, max1) = nlo.extrema();
                prop_assert!(min1 >= min0 && max1 <= max0);
                if far_gap == 0.0 {
                    let l1_after: f64 = nhi.values.iter().zip(&nlo.values).map(|(x, y)| (x - y).max(0.0)).sum();
                    prop_assert!(l1_after <= l1_before * (1.0 + 1e-12) + 1e-14);
                }
                lo = nlo;
                hi = nhi;
            }
        }

        #[test]
        fn step_commutes_with_grid_shifts(
            bump in prop::collection::vec(0.0f64..2.0, 8),
            shift in 1usize..10,
            s in 0.1f64..0.9,
        ) {
            let grid = Grid1D::new(0.0, 0.1, 30).unwrap();
            let law = PhaseLaw::one_phase(0.5).unwrap();
            let st = stencil_for(&grid, s);
            let place = |at: usize| {
                let mut v = vec![0.2; 30];
                v[at..at + 8].copy_from_slice(&bump);
                EnthalpyState::from_values(grid, FarField::constant(0.2), v).unwrap()
            };
            let dt = cfl_max_dt(&st, &law, 0.9);
            let a = step(&place(5), &st, &law, dt).unwrap();
            let b = step(&place(5 + shift), &st, &law, dt).unwrap();
            for k in 0..30 - shift {
                prop_assert!((a.values[k] - b.values[k + shift]).abs() < 1e-13);
            }
        }
    }
}
