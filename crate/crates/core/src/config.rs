//! Run configuration: a sectioned TOML document, command-line overrides of
//! individual keys, and validation into ready-to-run objects.
//!
//! ```toml
//! [model]
//! s = 0.5
//! L = 1.0
//!
//! [datum]
//! P1 = 1.0
//! P2 = 1.0
//!
//! [grid]
//! dx = 0.05
//! domain_radius = 20.0
//!
//! [run]
//! t_final = 1.0
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{init_cell_average, init_pointwise, EnthalpyState, FarField, Grid1D};
use crate::operator::{ClassicalLaplacian, DiffusionOperator, Stencil, WeightsBackend};
use crate::phase::{PhaseKind, PhaseLaw};
use crate::selfsimilar::StepDatum;
use crate::stepper::{cfl_max_dt, RunConfig, DEFAULT_THETA};

/// Refuse runs that would need more explicit steps than this.
pub const MAX_STEPS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Fractional,
    /// Three-point Laplacian, the `s = 1` limit.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    /// `L + P1` on `x ≤ 0`, `L − P2` on `x > 0`.
    #[default]
    Step,
    /// `L + P1` on `|x| ≤ box_radius`, `L − P2` elsewhere.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Pointwise,
    CellAverage,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "ModelSection::default_phase")]
    pub phase: PhaseKind,
    #[serde(alias = "L", skip_serializing_if = "Option::is_none")]
    pub latent_heat: Option<f64>,
    #[serde(default = "one")]
    pub k1: f64,
    #[serde(default = "one")]
    pub k2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
}

impl ModelSection {
    fn default_phase() -> PhaseKind {
        PhaseKind::OnePhase
    }
}

fn one() -> f64 {
    1.0
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            phase: PhaseKind::OnePhase,
            latent_heat: None,
            k1: 1.0,
            k2: 1.0,
            s: None,
            scheme: Scheme::Fractional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSection {
    #[serde(default)]
    pub kind: DatumKind,
    #[serde(rename = "P1", skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(rename = "P2", skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default = "one")]
    pub box_radius: f64,
}

impl Default for DatumSection {
    fn default() -> Self {
        DatumSection { kind: DatumKind::Step, p1: None, p2: None, box_radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_left: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub farfield_left: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub farfield_right: Option<f64>,
    #[serde(default)]
    pub init: InitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    #[serde(default = "OperatorSection::default_backend")]
    pub weights_backend: WeightsBackend,
    #[serde(rename = "window_G", skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl OperatorSection {
    fn default_backend() -> WeightsBackend {
        WeightsBackend::PowerOfDiscreteLaplacian
    }
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { weights_backend: WeightsBackend::PowerOfDiscreteLaplacian, window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default = "RunSection::default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
}

impl RunSection {
    fn default_theta() -> f64 {
        DEFAULT_THETA
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { t_final: None, theta: DEFAULT_THETA, snapshots: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Orders for the ξ₀-versus-`P2` sweep; defaults to `[model.s]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s_list: Vec<f64>,
    #[serde(rename = "P2_list", default = "SweepSection::default_p2")]
    pub p2_list: Vec<f64>,
    /// Orders for the ξ₀-versus-`s` sweep; skipped when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s_grid: Vec<f64>,
    #[serde(default = "one")]
    pub t_extract: f64,
}

impl SweepSection {
    fn default_p2() -> Vec<f64> {
        vec![0.25, 0.5, 1.0, 2.0, 4.0]
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { s_list: Vec::new(), p2_list: Self::default_p2(), s_grid: Vec::new(), t_extract: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "VerifySection::default_dx")]
    pub dx_list: Vec<f64>,
    #[serde(default = "VerifySection::default_radius")]
    pub radius: f64,
    #[serde(default = "VerifySection::default_tol")]
    pub tol: f64,
    #[serde(default = "VerifySection::default_pairs")]
    pub pairs: usize,
    #[serde(default = "VerifySection::default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl VerifySection {
    fn default_dx() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.025]
    }
    fn default_radius() -> f64 {
        5.0
    }
    fn default_tol() -> f64 {
        1e-9
    }
    fn default_pairs() -> usize {
        50
    }
    fn default_steps() -> usize {
        10
    }
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            dx_list: Self::default_dx(),
            radius: Self::default_radius(),
            tol: Self::default_tol(),
            pairs: Self::default_pairs(),
            steps: Self::default_steps(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Fractional order compared with the three-point Laplacian.
    #[serde(default = "CompareSection::default_s_near")]
    pub s_near: f64,
    #[serde(default = "one")]
    pub time: f64,
    #[serde(default = "CompareSection::default_latent_heats")]
    pub latent_heats: Vec<f64>,
    /// Half-width of the interval carrying the initial temperature.
    #[serde(default = "one")]
    pub support_radius: f64,
    #[serde(default = "CompareSection::default_times")]
    pub times: Vec<f64>,
}

impl CompareSection {
    fn default_s_near() -> f64 {
        0.99
    }
    fn default_latent_heats() -> Vec<f64> {
        vec![0.1, 1.0, 10.0, 100.0]
    }
    fn default_times() -> Vec<f64> {
        vec![0.05, 0.1, 0.25, 0.5, 1.0]
    }
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            s_near: Self::default_s_near(),
            time: 1.0,
            latent_heats: Self::default_latent_heats(),
            support_radius: 1.0,
            times: Self::default_times(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "is_default")]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub datum: DatumSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub operator: OperatorSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sweep: SweepSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub verify: VerifySection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub compare: CompareSection,
}

/// One `section.key=value` override; the value uses TOML syntax.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

impl Override {
    pub fn parse(text: &str) -> Result<Self> {
        let (key, raw) = text.split_once('=').ok_or_else(|| Error::Config(format!("override `{text}` lacks `=`")))?;
        let path: Vec<String> = key.trim().split('.').map(|p| p.trim().to_string()).collect();
        if path.iter().any(|p| p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')) {
            return Err(Error::Config(format!("override key `{}` is not a dotted identifier", key.trim())));
        }
        let doc: toml::Table = toml::from_str(&format!("v = {}", raw.trim()))
            .or_else(|_| toml::from_str(&format!("v = {:?}", raw.trim())))
            .map_err(|e| Error::Config(format!("override value `{}`: {e}", raw.trim())))?;
        let value = doc.get("v").cloned().ok_or_else(|| Error::Config("empty override value".into()))?;
        Ok(Override { path, value })
    }

    fn apply(&self, table: &mut toml::Table) -> Result<()> {
        let (last, parents) = self.path.split_last().expect("nonempty path");
        let mut cur = table;
        for p in parents {
            let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` is not a section")))?;
        }
        cur.insert(last.clone(), self.value.clone());
        Ok(())
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string().trim().replace('\n', " "))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_error)
    }

    /// Parses `text` after applying `overrides` in order.
    pub fn parse_with_overrides(text: &str, overrides: &[Override]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            o.apply(&mut table)?;
        }
        toml::Value::Table(table).try_into().map_err(config_error)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// Checks the whole configuration and builds the run objects, before
    /// any time stepping.
    pub fn validate(&self) -> Result<Validated> {
        let m = &self.model;
        let latent_heat = require(m.latent_heat, "model.latent_heat")?;
        let law = match m.phase {
            PhaseKind::OnePhase => PhaseLaw::one_phase(latent_heat)?,
            PhaseKind::TwoPhase => PhaseLaw::two_phase(latent_heat, m.k1, m.k2)?,
            PhaseKind::Identity => PhaseLaw::identity(),
        };
        let s = match m.scheme {
            Scheme::Fractional => {
                let s = require(m.s, "model.s")?;
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::invalid("model.s", format!("must lie in (0, 1), got {s}")));
                }
                s
            }
            Scheme::Classical => 1.0,
        };
        let p1 = require(self.datum.p1, "datum.P1")?;
        let p2 = require(self.datum.p2, "datum.P2")?;
        let datum = StepDatum::new(latent_heat, p1, p2)?;
        if self.datum.kind == DatumKind::Box && !(self.datum.box_radius > 0.0) {
            return Err(Error::invalid("datum.box_radius", "must be positive"));
        }

        let g = &self.grid;
        let dx = require(g.dx, "grid.dx")?;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::invalid("grid.dx", format!("must be positive, got {dx}")));
        }
        let grid = match (g.domain_radius, g.x_left, g.m) {
            (Some(r), None, None) => Grid1D::centered(r, dx)?,
            (None, Some(x_left), Some(m)) => Grid1D::new(x_left, dx, m)?,
            (None, None, None) => return Err(Error::Config("missing required key `grid.domain_radius`".into())),
            _ => {
                return Err(Error::Config("give either `grid.domain_radius` or both `grid.x_left` and `grid.m`".into()))
            }
        };
        let default_far = match self.datum.kind {
            DatumKind::Step => datum.far_field(),
            DatumKind::Box => FarField::constant(datum.right()),
        };
        let far =
            FarField::new(g.farfield_left.unwrap_or(default_far.left), g.farfield_right.unwrap_or(default_far.right));

        let window = self.operator.window.unwrap_or(grid.len());
        if window == 0 {
            return Err(Error::invalid("operator.window_G", "must be positive"));
        }
        let t_final = require(self.run.t_final, "run.t_final")?;
        let run = RunConfig::new(t_final, self.run.theta, self.run.snapshots.clone())?;

        let total_weight = match m.scheme {
            Scheme::Fractional => Stencil::build(self.operator.weights_backend, s, dx, 1)?.total_weight(),
            Scheme::Classical => ClassicalLaplacian::new(dx)?.total_weight(),
        };
        if law.lipschitz() > 0.0 {
            let dt = run.theta / (law.lipschitz() * total_weight);
            if t_final / dt > MAX_STEPS {
                return Err(Error::invalid(
                    "run.t_final",
                    format!("needs about {:.3e} explicit steps of {dt:.3e}, more than {MAX_STEPS:e}", t_final / dt),
                ));
            }
        }
        Ok(Validated { config: self.clone(), law, s, datum, grid, far, window, run })
    }
}

fn require(v: Option<f64>, key: &str) -> Result<f64> {
    let v = v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("`{key}` must be finite, got {v}")));
    }
    Ok(v)
}

/// A configuration that passed validation, with its run objects.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: Config,
    pub law: PhaseLaw,
    /// Fractional order, `1` for the classical scheme.
    pub s: f64,
    pub datum: StepDatum,
    pub grid: Grid1D,
    pub far: FarField,
    pub window: usize,
    pub run: RunConfig,
}

/// The operator selected by a configuration.
pub enum Operator {
    Fractional(Stencil),
    Classical(ClassicalLaplacian),
}

impl Validated {
    pub fn scheme(&self) -> Scheme {
        self.config.model.scheme
    }

    pub fn initial_value(&self, x: f64) -> f64 {
        match self.config.datum.kind {
            DatumKind::Step => self.datum.eval(x),
            DatumKind::Box if x.abs() <= self.config.datum.box_radius => self.datum.left(),
            DatumKind::Box => self.datum.right(),
        }
    }

    pub fn initial_state(&self) -> Result<EnthalpyState> {
        match self.config.grid.init {
            InitMode::Pointwise => init_pointwise(self.grid, self.far, |x| self.initial_value(x)),
            InitMode::CellAverage => Ok(init_cell_average(self.grid, self.far, |x| self.initial_value(x))?.0),
        }
    }

    pub fn operator(&self) -> Result<Operator> {
        Ok(match self.scheme() {
            Scheme::Fractional => Operator::Fractional(Stencil::build(
                self.config.operator.weights_backend,
                self.s,
                self.grid.dx(),
                self.window,
            )?),
            Scheme::Classical => Operator::Classical(ClassicalLaplacian::new(self.grid.dx())?),
        })
    }

    pub fn dt(&self) -> Result<f64> {
        Ok(match self.operator()? {
            Operator::Fractional(st) => cfl_max_dt(&st, &self.law, self.run.theta),
            Operator::Classical(op) => cfl_max_dt(&op, &self.law, self.run.theta),
        })
    }
}
