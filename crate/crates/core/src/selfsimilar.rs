//! Self-similar profiles `h(x,t) = H(x·t^{−1/(2s)})` of the step datum and
//! their diagnostics: free-boundary location, power-law fits, mass transfer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{init_cell_average, init_pointwise, EnthalpyState, FarField, Grid1D};
use crate::phase::PhaseLaw;

/// `h₀ = L + P1` for `x ≤ 0`, `L − P2` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDatum {
    pub latent_heat: f64,
    pub p1: f64,
    pub p2: f64,
}

impl StepDatum {
    pub fn new(latent_heat: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(latent_heat.is_finite() && latent_heat >= 0.0) {
            return Err(Error::invalid("latent_heat", format!("must be finite and nonnegative, got {latent_heat}")));
        }
        if !(p1.is_finite() && p1 > 0.0) {
            return Err(Error::invalid("P1", format!("must be positive, got {p1}")));
        }
        if !(p2.is_finite() && p2 >= 0.0) {
            return Err(Error::invalid("P2", format!("must be nonnegative, got {p2}")));
        }
        Ok(StepDatum { latent_heat, p1, p2 })
    }

    pub fn left(&self) -> f64 {
        self.latent_heat + self.p1
    }

    pub fn right(&self) -> f64 {
        self.latent_heat - self.p2
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.left()
        } else {
            self.right()
        }
    }

    pub fn far_field(&self) -> FarField {
        FarField::new(self.left(), self.right())
    }

    pub fn initial_state(&self, grid: Grid1D, cell_average: bool) -> Result<EnthalpyState> {
        if cell_average {
            Ok(init_cell_average(grid, self.far_field(), |x| self.eval(x))?.0)
        } else {
            init_pointwise(grid, self.far_field(), |x| self.eval(x))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub datum: StepDatum,
    pub s: f64,
    pub t_extract: f64,
}

impl SelfSimilarProfile {
    pub fn xi_step(&self) -> f64 {
        self.xi[1] - self.xi[0]
    }

    /// `H` at `xi` by linear interpolation, `None` outside the sampled range.
    pub fn h_at(&self, xi: f64) -> Option<f64> {
        interpolate(&self.xi, &self.h, xi)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "xi,H,U")?;
        for k in 0..self.xi.len() {
            writeln!(out, "{},{},{}", self.xi[k], self.h[k], self.u[k])?;
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if !(first..=last).contains(&x) {
        return None;
    }
    let k = xs.partition_point(|&v| v <= x).min(xs.len() - 1).max(1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    Some(ys[k - 1] + w * (ys[k] - ys[k - 1]))
}

/// Rescales a snapshot to the similarity variable. With `xi_step = None`
/// the ξ samples are the mapped nodes; otherwise a uniform grid through 0
/// covering the mapped window, filled by linear interpolation.
pub fn extract_profile(
    snapshot: &EnthalpyState,
    law: &PhaseLaw,
    s: f64,
    datum: StepDatum,
    xi_step: Option<f64>,
) -> Result<SelfSimilarProfile> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::invalid("s", format!("must lie in (0, 1], got {s}")));
    }
    let t = snapshot.time;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("profile extraction needs t > 0, got {t}")));
    }
    let scale = t.powf(-1.0 / (2.0 * s));
    let grid = snapshot.grid;
    let mapped: Vec<f64> = grid.nodes().map(|x| x * scale).collect();
    let (xi, h) = match xi_step {
        None => (mapped, snapshot.values.clone()),
        Some(step) => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("xi_step", format!("must be positive, got {step}")));
            }
            let lo = (mapped[0] / step).ceil() as i64;
            let hi = (mapped[mapped.len() - 1] / step).floor() as i64;
            let xi: Vec<f64> = (lo..=hi).map(|k| k as f64 * step).collect();
            let h =
                xi.iter().map(|&z| interpolate(&mapped, &snapshot.values, z).expect("inside mapped window")).collect();
            (xi, h)
        }
    };
    if xi.len() < 3 {
        return Err(Error::invalid("xi_step", "profile needs at least three samples"));
    }
    let u = h.iter().map(|&v| law.eval(v)).collect();
    Ok(SelfSimilarProfile { xi, h, u, datum, s, t_extract: t })
}

/// `sup |H_a − H_b|` over `[lo, hi]` between the piecewise-linear
/// interpolants, i.e. the maximum over the samples of both profiles.
pub fn collapse_distance(a: &SelfSimilarProfile, b: &SelfSimilarProfile, lo: f64, hi: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (p, q) in [(a, b), (b, a)] {
        for (&z, &hp) in p.xi.iter().zip(&p.h) {
            if z < lo || z > hi {
                continue;
            }
            let hq =
                q.h_at(z).ok_or_else(|| Error::invalid("xi_range", format!("{z} lies outside the other profile")))?;
            worst = worst.max((hp - hq).abs());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientSamples { lo, hi, found: 0, needed: 1 });
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub xi0: f64,
    /// Same estimate at a threshold ten times smaller.
    pub xi0_fine_threshold: f64,
    pub threshold: f64,
}

fn crossing(profile: &SelfSimilarProfile, delta: f64) -> Result<f64> {
    let u = &profile.u;
    let last = u.iter().rposition(|&v| v > delta).ok_or(Error::NoWater { threshold: delta })?;
    if last + 1 == u.len() {
        return Err(Error::WindowTooSmall { xi_edge: profile.xi[last] });
    }
    let (u0, u1) = (u[last], u[last + 1]);
    let w = (u0 - delta) / (u0 - u1);
    Ok(profile.xi[last] + w * (profile.xi[last + 1] - profile.xi[last]))
}

/// Largest ξ at which `U` crosses `threshold` (default `1e-8·P1`).
pub fn locate_free_boundary(profile: &SelfSimilarProfile, threshold: Option<f64>) -> Result<FreeBoundary> {
    let delta = threshold.unwrap_or(1e-8 * profile.datum.p1);
    if !(delta > 0.0) {
        return Err(Error::invalid("threshold", format!("must be positive, got {delta}")));
    }
    Ok(FreeBoundary {
        xi0: crossing(profile, delta)?,
        xi0_fine_threshold: crossing(profile, delta / 10.0)?,
        threshold: delta,
    })
}

/// Least-squares fit `y ≈ prefactor · x^exponent` in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits the positive pairs; the window is recorded as given.
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { lo: window.0, hi: window.1, found: n, needed: MIN_FIT_SAMPLES });
    }
    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("window", "fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ExponentFit { exponent: slope, prefactor: (my - slope * mx).exp(), r_squared, window, samples: n })
}

fn roundoff_floor(profile: &SelfSimilarProfile) -> f64 {
    let d = profile.datum;
    1e3 * f64::EPSILON * (d.latent_heat.abs() + d.p1 + d.p2)
}

/// `H − (L − P2) ≍ ξ^exponent` on `[4ξ₀, ξ_max/2]`.
pub fn fit_tail_exponent(profile: &SelfSimilarProfile, xi0: f64) -> Result<ExponentFit> {
    let xi_max = *profile.xi.last().unwrap();
    fit_right_tail(profile, (4.0 * xi0, 0.5 * xi_max))
}

pub fn fit_right_tail(profile: &SelfSimilarProfile, window: (f64, f64)) -> Result<ExponentFit> {
    let base = profile.datum.right();
    let floor = roundoff_floor(profile);
    let pts: Vec<(f64, f64)> = profile
        .xi
        .iter()
        .zip(&profile.h)
        .filter(|(z, h)| **z >= window.0 && **z <= window.1 && **h - base > floor)
        .map(|(z, h)| (*z, h - base))
        .collect();
    fit_power_law(&pts, window)
}

/// `(L + P1) − H ≍ |ξ|^exponent` on `[ξ_min/2, −4ξ₀]`, fitted against `|ξ|`.
pub fn fit_left_tail_exponent(profile: &SelfSimilarProfile, xi0: f64) -> Result<ExponentFit> {
    let xi_min = profile.xi[0];
    let window = (4.0 * xi0, -0.5 * xi_min);
    let top = profile.datum.left();
    let floor = roundoff_floor(profile);
    let pts: Vec<(f64, f64)> = profile
        .xi
        .iter()
        .zip(&profile.h)
        .filter(|(z, h)| -**z >= window.0 && -**z <= window.1 && top - **h > floor)
        .map(|(z, h)| (-z, top - h))
        .collect();
    fit_power_law(&pts, window)
}

/// `U ≍ (ξ₀ − ξ)^exponent` on `(ξ₀ − fraction·ξ₀, ξ₀)`.
pub fn fit_front_exponent(profile: &SelfSimilarProfile, xi0: f64, fraction: f64) -> Result<ExponentFit> {
    let lo = xi0 * (1.0 - fraction);
    let pts: Vec<(f64, f64)> = profile
        .xi
        .iter()
        .zip(&profile.u)
        .filter(|(z, u)| **z > lo && **z < xi0 && **u > 0.0)
        .map(|(z, u)| (xi0 - z, *u))
        .collect();
    fit_power_law(&pts, (lo, xi0))
}

fn clipped_trapezoid(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..xs.len() {
        let (x0, x1) = (xs[k - 1].max(a), xs[k].min(b));
        if x1 <= x0 {
            continue;
        }
        let at = |x: f64| ys[k - 1] + (ys[k] - ys[k - 1]) * (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        acc += 0.5 * (at(x0) + at(x1)) * (x1 - x0);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTransfer {
    /// `∫_{−∞}^0 ((L+P1) − H)` with the tail extrapolated; `None` if divergent.
    pub left: Option<f64>,
    /// `∫_0^∞ (H − (L−P2))` with the tail extrapolated; `None` if divergent.
    pub right: Option<f64>,
    /// The same integrals truncated to the fit windows.
    pub left_window: f64,
    pub right_window: f64,
    pub left_tail: ExponentFit,
    pub right_tail: ExponentFit,
    /// `|left − right| / max(left, right)` when both are finite.
    pub relative_gap: Option<f64>,
}

/// Tail integrals with power-law extrapolation. A fitted exponent no
/// steeper than `−1` marks the integral divergent.
pub fn mass_transfer(profile: &SelfSimilarProfile, xi0: f64) -> Result<MassTransfer> {
    let right_tail = fit_tail_exponent(profile, xi0)?;
    let left_tail = fit_left_tail_exponent(profile, xi0)?;
    let d = profile.datum;
    let right_vals: Vec<f64> = profile.h.iter().map(|h| h - d.right()).collect();
    let left_vals: Vec<f64> = profile.h.iter().map(|h| d.left() - h).collect();
    let right_window = clipped_trapezoid(&profile.xi, &right_vals, 0.0, right_tail.window.1);
    let left_window = clipped_trapezoid(&profile.xi, &left_vals, -left_tail.window.1, 0.0);
    let extrapolate = |fit: &ExponentFit, partial: f64| {
        (fit.exponent < -1.0).then(|| {
            let p = fit.exponent;
            partial + fit.prefactor * fit.window.1.powf(p + 1.0) / (-p - 1.0)
        })
    };
    let left = extrapolate(&left_tail, left_window);
    let right = extrapolate(&right_tail, right_window);
    let relative_gap = match (left, right) {
        (Some(a), Some(b)) => Some((a - b).abs() / a.max(b)),
        _ => None,
    };
    Ok(MassTransfer { left, right, left_window, right_window, left_tail, right_tail, relative_gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub within_bounds: bool,
    pub nonincreasing: bool,
    /// Largest increase between neighbouring samples.
    pub max_increase: f64,
    /// Largest jump between neighbouring samples.
    pub max_jump: f64,
    /// Largest jump between neighbouring samples within two cells of ξ₀.
    pub front_jump: f64,
    pub unique_level_crossing: bool,
    pub strictly_decreasing_past_front: bool,
    pub xi0: Option<f64>,
}

impl ProfileReport {
    pub fn all_pass(&self) -> bool {
        self.within_bounds
            && self.nonincreasing
            && self.unique_level_crossing
            && self.strictly_decreasing_past_front
            && self.xi0.is_some()
    }
}

pub fn profile_report(profile: &SelfSimilarProfile) -> ProfileReport {
    let d = profile.datum;
    let scale = d.latent_heat.abs() + d.p1 + d.p2;
    let bound_tol = 1e-12 * scale;
    let mono_tol = 1e-10 * (d.p1 + d.p2);
    let h = &profile.h;
    let within_bounds = h.iter().all(|&v| v >= d.right() - bound_tol && v <= d.left() + bound_tol);
    let max_increase = h.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    let max_jump = h.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0f64, f64::max);
    let crossings = h.windows(2).filter(|w| (w[0] > d.latent_heat) != (w[1] > d.latent_heat)).count();
    let xi0 = locate_free_boundary(profile, None).ok().map(|fb| fb.xi0);
    let (strict, front_jump) = match xi0 {
        Some(x0) => {
            let start = profile.xi.partition_point(|&z| z < x0);
            let strict = h[start..].windows(2).all(|w| w[1] < w[0]);
            let dxi = profile.xi_step();
            let near = profile
                .xi
                .windows(2)
                .zip(h.windows(2))
                .filter(|(z, _)| (z[0] - x0).abs() <= 2.0 * dxi)
                .map(|(_, w)| (w[1] - w[0]).abs())
                .fold(0.0f64, f64::max);
            (strict, near)
        }
        None => (false, f64::NAN),
    };
    ProfileReport {
        within_bounds,
        nonincreasing: max_increase <= mono_tol,
        max_increase,
        max_jump,
        front_jump,
        unique_level_crossing: crossings == 1,
        strictly_decreasing_past_front: strict,
        xi0,
    }
}
