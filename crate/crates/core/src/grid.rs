//! Uniform 1-D grid, constant far-field extension and enthalpy snapshots.

use std::io::Write;

use crate::error::{Error, Result};
use crate::phase::PhaseLaw;

/// Nodes `x_β = x_left + β·dx`, `β = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_left: f64,
    dx: f64,
    m: usize,
}

impl Grid1D {
    pub fn new(x_left: f64, dx: f64, m: usize) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be positive, got {dx}")));
        }
        if !x_left.is_finite() {
            return Err(Error::invalid("x_left", "must be finite"));
        }
        if m < 3 {
            return Err(Error::invalid("m", format!("need at least 3 nodes, got {m}")));
        }
        Ok(Grid1D { x_left, dx, m })
    }

    /// Symmetric grid on `[-radius, radius]` with a node exactly at `x = 0`.
    pub fn centered(radius: f64, dx: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("domain_radius", format!("must be positive, got {radius}")));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be positive, got {dx}")));
        }
        let half = (radius / dx).round() as usize;
        Grid1D::new(-(half as f64) * dx, dx, 2 * half + 1)
    }

    #[inline]
    pub fn x(&self, beta: usize) -> f64 {
        self.x_left + beta as f64 * self.dx
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.m - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        (self.m - 1) as f64 * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(move |b| self.x(b))
    }

    /// Index of the node closest to `x`, if `x` lies in the window.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let r = ((x - self.x_left) / self.dx).round();
        if r < 0.0 || r > (self.m - 1) as f64 {
            None
        } else {
            Some(r as usize)
        }
    }
}

/// Constant continuation of the field outside the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField {
    pub left: f64,
    pub right: f64,
}

impl FarField {
    pub fn new(left: f64, right: f64) -> Self {
        FarField { left, right }
    }

    pub fn constant(c: f64) -> Self {
        FarField { left: c, right: c }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FarField {
        FarField { left: f(self.left), right: f(self.right) }
    }
}

/// Discrete enthalpy `V_β` at one time level.
///
/// `exterior_gain` accumulates the enthalpy (in units of `Σ V_β`) that the
/// step has sent into the frozen exterior on each side, so that
/// `Σ V_β + exterior_gain.0 + exterior_gain.1` is the conserved lattice mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EnthalpyState {
    pub grid: Grid1D,
    pub far: FarField,
    pub values: Vec<f64>,
    pub time: f64,
    pub exterior_gain: (f64, f64),
}

impl EnthalpyState {
    pub fn from_values(grid: Grid1D, far: FarField, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("values", format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteData { index, x: grid.x(index), value });
        }
        if !(far.left.is_finite() && far.right.is_finite()) {
            return Err(Error::invalid("farfield", "far-field values must be finite"));
        }
        Ok(EnthalpyState { grid, far, values, time: 0.0, exterior_gain: (0.0, 0.0) })
    }

    pub fn temperature(&self, law: &PhaseLaw) -> Vec<f64> {
        self.values.iter().map(|&h| law.eval(h)).collect()
    }

    /// `Σ V_β` plus what has left the window.
    pub fn lattice_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() + self.exterior_gain.0 + self.exterior_gain.1
    }

    /// Largest and smallest value over the nodes and both far fields.
    pub fn extrema(&self) -> (f64, f64) {
        let init = (self.far.left.min(self.far.right), self.far.left.max(self.far.right));
        self.values.iter().fold(init, |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn write_csv<W: Write>(&self, law: &PhaseLaw, mut out: W) -> Result<()> {
        writeln!(out, "x,h,u")?;
        for (b, &h) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", self.grid.x(b), h, law.eval(h))?;
        }
        Ok(())
    }
}

/// Samples `h0` at the nodes.
pub fn init_pointwise(grid: Grid1D, far: FarField, h0: impl Fn(f64) -> f64) -> Result<EnthalpyState> {
    let values = grid.nodes().map(&h0).collect();
    EnthalpyState::from_values(grid, far, values)
}

const GL5_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Mean of `f` over `[a, b]` using `panels` equal Gauss–Legendre panels.
fn panel_mean(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * w;
        for (t, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            acc += wt * f(c + 0.5 * w * t);
        }
    }
    acc / (2.0 * panels as f64)
}

/// Cell averages over `[x_β − dx/2, x_β + dx/2]`.
///
/// Each cell is split at its node, so a jump located exactly at a node
/// yields the midpoint of the two one-sided values. The second element
/// lists cells where doubling the panel count moved the mean by more than
/// `1e-9` relative (an unresolved jump inside the cell).
pub fn init_cell_average(grid: Grid1D, far: FarField, h0: impl Fn(f64) -> f64) -> Result<(EnthalpyState, Vec<usize>)> {
    let half = 0.5 * grid.dx();
    let mut values = Vec::with_capacity(grid.len());
    let mut unresolved = Vec::new();
    for b in 0..grid.len() {
        let x = grid.x(b);
        let coarse = panel_mean(&h0, x - half, x + half, 2);
        let fine = panel_mean(&h0, x - half, x + half, 4);
        if (coarse - fine).abs() > 1e-9 * (1.0 + fine.abs()) {
            unresolved.push(b);
        }
        values.push(coarse);
    }
    Ok((EnthalpyState::from_values(grid, far, values)?, unresolved))
}

/// Parsed `x,h,u` snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
}

/// Reads a snapshot CSV written by [`EnthalpyState::write_csv`].
pub fn read_snapshot_csv(text: &str) -> Result<SnapshotTable> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "x,h,u" => {}
        _ => return Err(Error::Parse { line: 1, reason: "expected header `x,h,u`".into() }),
    }
    let mut table = SnapshotTable { x: Vec::new(), h: Vec::new(), u: Vec::new() };
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let raw =
                fields.next().ok_or_else(|| Error::Parse { line: i + 1, reason: format!("missing field `{name}`") })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                reason: format!("field `{name}` is not a number: {raw:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: i + 1, reason: format!("field `{name}` is not finite") });
            }
            Ok(v)
        };
        let (x, h, u) = (next("x")?, next("h")?, next("u")?);
        if fields.next().is_some() {
            return Err(Error::Parse { line: i + 1, reason: "too many fields".into() });
        }
        if let Some(&prev) = table.x.last() {
            if x <= prev {
                return Err(Error::Parse { line: i + 1, reason: "x must be strictly increasing".into() });
            }
        }
        table.x.push(x);
        table.h.push(h);
        table.u.push(u);
    }
    Ok(table)
}
