//! Monotone finite-difference discretizations of `(−Δ)ˢ` in one dimension.
//!
//! A [`Stencil`] holds the weights `ω_γ`, `γ = 1..=G`, of
//! `Lψ_β = Σ_{γ≠0} (ψ_β − ψ_{β+γ}) ω_|γ|` together with the exact one-sided
//! tail sums `T_k = Σ_{γ≥k} ω_γ`. Offsets that leave the window, or exceed
//! `G`, see the constant far-field value and are accounted for through the
//! tail sums, so a field that is exactly constant outside the window is
//! treated without truncation error.

mod oracle;
pub mod quadrature;

pub use oracle::{consistency_error, frac_laplacian_constant, oracle_point, ConsistencyError, OracleValue};

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::FarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WeightsBackend {
    /// `s`-th spectral power of the three-point Laplacian.
    #[serde(rename = "power")]
    PowerOfDiscreteLaplacian,
    /// Cell integrals of the kernel with a second-difference correction
    /// for the singular part.
    #[serde(rename = "quadrature")]
    CellQuadrature,
}

/// Enthalpy sent through each side of the window in one application,
/// `Σ_β (ψ_β − far) · T_out(β)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryFlux {
    pub left: f64,
    pub right: f64,
}

/// Anything the explicit stepper can use as the diffusion operator.
pub trait DiffusionOperator {
    fn dx(&self) -> f64;
    /// `Σ_{γ≠0} ω_γ`, the diagonal of the operator.
    fn total_weight(&self) -> f64;
    /// Writes `Lψ` on the window into `out` and returns the boundary flux.
    fn apply_into(&self, psi: &[f64], far: FarField, out: &mut [f64]) -> BoundaryFlux;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    s: f64,
    dx: f64,
    backend: WeightsBackend,
    /// `weights[k] = ω_k` for `k = 1..=G`; index 0 is unused and zero.
    weights: Vec<f64>,
    /// `tail[k] = Σ_{γ≥k} ω_γ` for `k = 1..=G+1`; index 0 is unused.
    tail: Vec<f64>,
}

fn check_args(s: f64, dx: f64, window: usize) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid("s", format!("must lie in (0, 1), got {s}")));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::invalid("dx", format!("must be positive, got {dx}")));
    }
    if window == 0 {
        return Err(Error::invalid("window_G", "must be at least 1"));
    }
    Ok(())
}

/// `c_{1,s} = 4ˢ Γ(½+s) / (√π |Γ(−s)|)`, written with `|Γ(−s)| = Γ(1−s)/s`.
pub(crate) fn kernel_constant(s: f64) -> f64 {
    s * 4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(1.0 - s))
}

/// `K_s(m) = c_{1,s} Γ(m−s)/Γ(m+1+s)` evaluated through log-Gamma,
/// the weight of offset `m ≥ 1` for unit spacing.
pub fn power_kernel(s: f64, m: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let m = m as f64;
    kernel_constant(s) * (ln_gamma(m - s) - ln_gamma(m + 1.0 + s)).exp()
}

impl Stencil {
    /// Weights of the `s`-th power of the discrete Laplacian,
    /// `ω_γ = dx^{−2s} K_s(γ)`.
    ///
    /// Gamma ratios are generated by their first-order recurrences from
    /// exact values at `γ = 1`, which avoids overflow for large windows.
    /// Tails use `Σ_{m≥k} Γ(m−s)/Γ(m+1+s) = Γ(k−s) / (2s Γ(k+s))`.
    pub fn power(s: f64, dx: f64, window: usize) -> Result<Self> {
        check_args(s, dx, window)?;
        let scale = kernel_constant(s) * dx.powf(-2.0 * s);
        let mut weights = vec![0.0; window + 1];
        let mut tail = vec![0.0; window + 2];
        // ratio = Γ(k−s)/Γ(k+1+s), tratio = Γ(k−s)/Γ(k+s)
        let mut ratio = gamma(1.0 - s) / gamma(2.0 + s);
        let mut tratio = gamma(1.0 - s) / gamma(1.0 + s);
        for k in 1..=window + 1 {
            let kf = k as f64;
            tail[k] = scale * tratio / (2.0 * s);
            if k <= window {
                weights[k] = scale * ratio;
            }
            ratio *= (kf - s) / (kf + 1.0 + s);
            tratio *= (kf - s) / (kf + s);
        }
        Ok(Stencil { s, dx, backend: WeightsBackend::PowerOfDiscreteLaplacian, weights, tail })
    }

    /// Cell-integrated kernel weights.
    ///
    /// For `γ ≥ 2`, `ω_γ = c ∫_{(γ−½)dx}^{(γ+½)dx} z^{−1−2s} dz`. The ball
    /// `|z| < dx/2` is replaced by a second difference with matching second
    /// moment, `c ∫_0^{dx/2} z^{1−2s} dz / dx²`, added to `ω_1`.
    pub fn quadrature(s: f64, dx: f64, window: usize) -> Result<Self> {
        check_args(s, dx, window)?;
        let c = kernel_constant(s);
        // ∫_a^∞ z^{−1−2s} dz
        let beyond = |a: f64| a.powf(-2.0 * s) / (2.0 * s);
        // ∫_a^{a+dx} z^{−1−2s} dz without cancellation
        let cell = |a: f64| -a.powf(-2.0 * s) * (-2.0 * s * (dx / a).ln_1p()).exp_m1() / (2.0 * s);
        let singular = c * (0.5 * dx).powf(2.0 - 2.0 * s) / ((2.0 - 2.0 * s) * dx * dx);
        let mut weights = vec![0.0; window + 1];
        let mut tail = vec![0.0; window + 2];
        for (k, w) in weights.iter_mut().enumerate().skip(1) {
            *w = c * cell((k as f64 - 0.5) * dx);
        }
        weights[1] += singular;
        for (k, t) in tail.iter_mut().enumerate().skip(2) {
            *t = c * beyond((k as f64 - 0.5) * dx);
        }
        tail[1] = tail[2] + weights[1];
        Ok(Stencil { s, dx, backend: WeightsBackend::CellQuadrature, weights, tail })
    }

    pub fn build(backend: WeightsBackend, s: f64, dx: f64, window: usize) -> Result<Self> {
        match backend {
            WeightsBackend::PowerOfDiscreteLaplacian => Stencil::power(s, dx, window),
            WeightsBackend::CellQuadrature => Stencil::quadrature(s, dx, window),
        }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn backend(&self) -> WeightsBackend {
        self.backend
    }

    /// Window size `G`.
    pub fn window(&self) -> usize {
        self.weights.len() - 1
    }

    /// `ω_k` for `k = 1..=G` (zero outside that range).
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k >= self.weights.len() {
            0.0
        } else {
            self.weights[k]
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights[1..]
    }

    /// `T_k = Σ_{γ≥k} ω_γ` for `k = 1..=G+1`, including the analytic
    /// remainder beyond the window.
    pub fn tail(&self, k: usize) -> f64 {
        self.tail[k.clamp(1, self.tail.len() - 1)]
    }

    /// `Lψ` for a field given on the window plus its far field.
    pub fn apply(&self, psi: &[f64], far: FarField) -> Vec<f64> {
        let mut out = vec![0.0; psi.len()];
        self.apply_into(psi, far, &mut out);
        out
    }

    /// Checks the stencil against a grid spacing.
    pub fn check_dx(&self, grid_dx: f64) -> Result<()> {
        if (self.dx - grid_dx).abs() > 1e-12 * grid_dx {
            Err(Error::SpacingMismatch { stencil_dx: self.dx, grid_dx })
        } else {
            Ok(())
        }
    }
}

/// Sum of `w[k] · ((c − left[n−1−k]) + (c − right[k]))` with eight
/// interleaved accumulators combined pairwise. The order is fixed, so
/// results are reproducible bit for bit.
#[inline]
#[allow(clippy::needless_range_loop)]
fn paired_sum(c: f64, w: &[f64], left: &[f64], right: &[f64]) -> f64 {
    let n = w.len();
    debug_assert!(left.len() == n && right.len() == n);
    let mut acc = [0.0f64; 8];
    let full = n / 8 * 8;
    let mut k = 0;
    while k < full {
        for lane in 0..8 {
            let j = k + lane;
            acc[lane] += w[j] * ((c - left[n - 1 - j]) + (c - right[j]));
        }
        k += 8;
    }
    let mut rest = 0.0;
    for j in full..n {
        rest += w[j] * ((c - left[n - 1 - j]) + (c - right[j]));
    }
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7])) + rest
}

/// Sum of `w[k] · (c − v[k])`, or of `w[k] · (c − v[n−1−k])` when
/// `reversed`, accumulated like [`paired_sum`].
#[inline]
#[allow(clippy::needless_range_loop)]
fn one_sided_sum(c: f64, w: &[f64], v: &[f64], reversed: bool) -> f64 {
    let n = w.len();
    debug_assert!(v.len() == n);
    let at = |j: usize| if reversed { v[n - 1 - j] } else { v[j] };
    let mut acc = [0.0f64; 4];
    let full = n / 4 * 4;
    let mut k = 0;
    while k < full {
        for lane in 0..4 {
            acc[lane] += w[k + lane] * (c - at(k + lane));
        }
        k += 4;
    }
    let mut rest = 0.0;
    for j in full..n {
        rest += w[j] * (c - at(j));
    }
    ((acc[0] + acc[2]) + (acc[1] + acc[3])) + rest
}

impl DiffusionOperator for Stencil {
    fn dx(&self) -> f64 {
        self.dx
    }

    fn total_weight(&self) -> f64 {
        2.0 * self.tail[1]
    }

    fn apply_into(&self, psi: &[f64], far: FarField, out: &mut [f64]) -> BoundaryFlux {
        let m = psi.len();
        let g = self.window();
        let mut flux = BoundaryFlux::default();
        for beta in 0..m {
            let c = psi[beta];
            let n_left = beta.min(g);
            let n_right = (m - 1 - beta).min(g);
            let n_pair = n_left.min(n_right);
            let w = &self.weights[1..];
            // symmetric part, offsets 1..=n_pair on both sides
            let mut acc = paired_sum(c, &w[..n_pair], &psi[beta - n_pair..beta], &psi[beta + 1..beta + 1 + n_pair]);
            // one-sided remainder on the longer side
            if n_left > n_pair {
                acc += one_sided_sum(c, &w[n_pair..n_left], &psi[beta - n_left..beta - n_pair], true);
            } else if n_right > n_pair {
                acc += one_sided_sum(c, &w[n_pair..n_right], &psi[beta + 1 + n_pair..beta + 1 + n_right], false);
            }
            let out_left = (c - far.left) * self.tail[n_left + 1];
            let out_right = (c - far.right) * self.tail[n_right + 1];
            flux.left += out_left;
            flux.right += out_right;
            out[beta] = acc + (out_left + out_right);
        }
        flux
    }
}

/// Three-point Laplacian `−ψ''`, the `s = 1` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalLaplacian {
    dx: f64,
}

impl ClassicalLaplacian {
    pub fn new(dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be positive, got {dx}")));
        }
        Ok(ClassicalLaplacian { dx })
    }
}

impl DiffusionOperator for ClassicalLaplacian {
    fn dx(&self) -> f64 {
        self.dx
    }

    fn total_weight(&self) -> f64 {
        2.0 / (self.dx * self.dx)
    }

    fn apply_into(&self, psi: &[f64], far: FarField, out: &mut [f64]) -> BoundaryFlux {
        let w = 1.0 / (self.dx * self.dx);
        let m = psi.len();
        for beta in 0..m {
            let c = psi[beta];
            let l = if beta == 0 { far.left } else { psi[beta - 1] };
            let r = if beta + 1 == m { far.right } else { psi[beta + 1] };
            out[beta] = w * ((c - l) + (c - r));
        }
        BoundaryFlux { left: w * (psi[0] - far.left), right: w * (psi[m - 1] - far.right) }
    }
}
