//! Self-checks of the discretisation: consistency of the stencil against the
//! quadrature oracle, and the discrete invariants of the explicit scheme on
//! random data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EnthalpyState, FarField, Grid1D};
use crate::operator::{consistency_error, DiffusionOperator, Stencil, WeightsBackend};
use crate::phase::PhaseLaw;
use crate::stepper::{cfl_max_dt, step, DEFAULT_THETA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub dx: f64,
    pub err_inf: f64,
    pub err_l1: f64,
    /// Observed order `ln(e_prev/e) / ln(dx_prev/dx)` against the previous row.
    pub order: Option<f64>,
}

/// Stencil error on the Gaussian `e^{−x²}` over `[−radius, radius]` for each
/// spacing, coarsest first.
pub fn consistency_table(
    backend: WeightsBackend,
    s: f64,
    dx_list: &[f64],
    radius: f64,
    tol: f64,
) -> Result<Vec<ConsistencyRow>> {
    if dx_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("dx_list", "spacings must be strictly decreasing"));
    }
    let mut rows: Vec<ConsistencyRow> = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        let grid = Grid1D::centered(radius, dx)?;
        let stencil = Stencil::build(backend, s, dx, grid.len())?;
        let e = consistency_error(&stencil, &grid, FarField::constant(0.0), |x| (-x * x).exp(), tol)?;
        let order = rows.last().map(|prev| (prev.err_inf / e.err_inf).ln() / (prev.dx / dx).ln());
        rows.push(ConsistencyRow { dx, err_inf: e.err_inf, err_l1: e.err_l1, order });
    }
    Ok(rows)
}

/// Expected asymptotic consistency order of a backend.
pub fn expected_order(backend: WeightsBackend, s: f64) -> f64 {
    match backend {
        WeightsBackend::PowerOfDiscreteLaplacian => 2.0,
        WeightsBackend::CellQuadrature => 2.0 - 2.0 * s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub pairs: usize,
    pub steps: usize,
    /// Node updates where `V ≤ W` was lost.
    pub order_violations: usize,
    /// Node updates leaving the range of the data and far field.
    pub bound_violations: usize,
    /// Largest relative growth of `Σ|V − W|` over one step.
    pub l1_growth: f64,
    /// Largest relative change of the lattice mass over one step, far field zero.
    pub mass_drift: f64,
}

impl InvariantReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.order_violations == 0 && self.bound_violations == 0 && self.l1_growth <= tol && self.mass_drift <= tol
    }
}

/// Steps random ordered pairs `V ≤ W` on `m` nodes with a shared far field
/// and records every violation of the scheme's discrete invariants.
pub fn scheme_invariants(
    stencil: &Stencil,
    law: &PhaseLaw,
    pairs: usize,
    m: usize,
    steps: usize,
    seed: u64,
) -> Result<InvariantReport> {
    let grid = Grid1D::new(0.0, stencil.dx(), m)?;
    let dt = cfl_max_dt(stencil, law, DEFAULT_THETA);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        InvariantReport { pairs, steps, order_violations: 0, bound_violations: 0, l1_growth: 0.0, mass_drift: 0.0 };
    for pair in 0..pairs {
        // every other pair uses a zero far field so the mass balance is checked too
        let far_value = if pair % 2 == 0 { 0.0 } else { rng.gen_range(-1.0..3.0) };
        let far = FarField::constant(far_value);
        let lower: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..4.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        let mut v = EnthalpyState::from_values(grid, far, lower)?;
        let mut w = EnthalpyState::from_values(grid, far, upper)?;
        let lo = v.extrema().0.min(far_value);
        let hi = w.extrema().1.max(far_value);
        for _ in 0..steps {
            let v_next = step(&v, stencil, law, dt)?;
            let w_next = step(&w, stencil, law, dt)?;
            report.order_violations += v_next.values.iter().zip(&w_next.values).filter(|(a, b)| a > b).count();
            report.bound_violations +=
                v_next.values.iter().chain(&w_next.values).filter(|&&h| h < lo || h > hi).count();
            let before = l1_distance(&v.values, &w.values);
            let after = l1_distance(&v_next.values, &w_next.values);
            if before > 0.0 {
                report.l1_growth = report.l1_growth.max((after - before) / before);
            }
            if far_value == 0.0 {
                for (old, new) in [(&v, &v_next), (&w, &w_next)] {
                    let scale = old.values.iter().map(|h| h.abs()).sum::<f64>()
                        + old.exterior_gain.0.abs()
                        + old.exterior_gain.1.abs();
                    let drift = (new.lattice_mass() - old.lattice_mass()).abs() / scale;
                    report.mass_drift = report.mass_drift.max(drift);
                }
            }
            v = v_next;
            w = w_next;
        }
    }
    Ok(report)
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
