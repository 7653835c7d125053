//! Quadrature reference values for `(−Δ)ˢψ(x)`, independent of any stencil.

use super::quadrature::integrate;
use super::{kernel_constant, DiffusionOperator, Stencil};
use crate::error::Result;
use crate::grid::{FarField, Grid1D};

/// Normalization `c_{1,s}` of the kernel `c_{1,s} |z|^{−1−2s}`.
pub fn frac_laplacian_constant(s: f64) -> f64 {
    kernel_constant(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
}

/// Radius of the segment `[0, NEAR]` on which the second difference
/// `2ψ(x) − ψ(x+z) − ψ(x−z)` is replaced by its even Taylor polynomial.
const NEAR: f64 = 0.01;
const MAX_EVALS: usize = 400_000;

/// `(−Δ)ˢψ(x) = c_{1,s} ∫₀^∞ (2ψ(x) − ψ(x+z) − ψ(x−z)) z^{−1−2s} dz`.
///
/// `ψ` must be smooth near `x` (on the scale `0.01`) and bounded, with
/// limits at `±∞`. The integral is split as
/// * `[0, 0.01]`: the second difference is fitted by `a₁z² + a₂z⁴ + a₃z⁶`
///   from samples at `0.01, 0.005, 0.0025` and integrated exactly;
/// * `[0.01, 1]`: adaptive Gauss–Kronrod;
/// * `[1, ∞)`: substituted with `w = z^{−2s}` onto `(0, 1]`.
pub fn oracle_point(s: f64, psi: impl Fn(f64) -> f64, x: f64, tol: f64) -> Result<OracleValue> {
    let c = kernel_constant(s);
    let center = psi(x);
    let g = |z: f64| (center - psi(x + z)) + (center - psi(x - z));

    // Newton divided differences of q(y) = g(√y)/y at y = ε², ε²/4, ε²/16.
    let y = [NEAR * NEAR, NEAR * NEAR / 4.0, NEAR * NEAR / 16.0];
    let q: Vec<f64> = y.iter().map(|&yi| g(yi.sqrt()) / yi).collect();
    let d01 = (q[1] - q[0]) / (y[1] - y[0]);
    let d12 = (q[2] - q[1]) / (y[2] - y[1]);
    let a3 = (d12 - d01) / (y[2] - y[0]);
    let a2 = d01 - a3 * (y[0] + y[1]);
    let a1 = q[0] - y[0] * (a2 + a3 * y[0]);
    let term = |a: f64, k: f64| a * NEAR.powf(2.0 * k - 2.0 * s) / (2.0 * k - 2.0 * s);
    let last = term(a3, 3.0);
    let near = term(a1, 1.0) + term(a2, 2.0) + last;
    let near_err = 1e3 * f64::EPSILON * center.abs().max(1.0) * NEAR.powf(-2.0 * s) + last.abs() * NEAR * NEAR;

    let budget = (tol / c).max(f64::MIN_POSITIVE);
    let mid = integrate(|z| g(z) * z.powf(-1.0 - 2.0 * s), NEAR, 1.0, budget / 3.0, MAX_EVALS)?;
    let far = integrate(|w: f64| g(w.powf(-1.0 / (2.0 * s))), 0.0, 1.0, budget * 2.0 * s / 3.0, MAX_EVALS)?;
    let value = c * (near + mid.value + far.value / (2.0 * s));
    let error = c * (near_err + mid.error + far.error / (2.0 * s));
    Ok(OracleValue { value, error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyError {
    pub dx: f64,
    pub err_inf: f64,
    /// `Σ |e_β| dx` over the nodes.
    pub err_l1: f64,
}

/// Distance between the stencil applied to the samples of `ψ` and the
/// oracle, over every node of `grid`. `far` must be the limits of `ψ`.
pub fn consistency_error(
    stencil: &Stencil,
    grid: &Grid1D,
    far: FarField,
    psi: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<ConsistencyError> {
    stencil.check_dx(grid.dx())?;
    let samples: Vec<f64> = grid.nodes().map(&psi).collect();
    let mut discrete = vec![0.0; grid.len()];
    stencil.apply_into(&samples, far, &mut discrete);
    let mut err_inf: f64 = 0.0;
    let mut err_l1 = 0.0;
    for (b, d) in discrete.iter().enumerate() {
        let exact = oracle_point(stencil.s(), &psi, grid.x(b), tol)?;
        let e = (d - exact.value).abs();
        err_inf = err_inf.max(e);
        err_l1 += e * grid.dx();
    }
    Ok(ConsistencyError { dx: grid.dx(), err_inf, err_l1 })
}
