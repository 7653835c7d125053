//! Subcommand dispatch behind the `fstefan` binary. Every invocation writes
//! into `<output root>/<command>-<hash>`, where the hash covers the command
//! and the rendered configuration, and finishes with `manifest.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, DatumKind, InitMode, Operator, Scheme, Validated};
use crate::error::{Error, Result};
use crate::experiments::{
    classical_front_comparison, limit_l_bracketing, support_growth, sweep_xi0_vs_p2, sweep_xi0_vs_s, write_sweep_csv,
    Ball, BoxDatum, Resolution,
};
use crate::operator::WeightsBackend;
use crate::phase::PhaseKind;
use crate::selfsimilar::{
    extract_profile, fit_front_exponent, fit_left_tail_exponent, fit_tail_exponent, locate_free_boundary,
    mass_transfer, profile_report,
};
use crate::stepper::{run, run_classical, Trajectory};
use crate::verify::{consistency_table, expected_order, scheme_invariants};

/// Environment variable naming the output root; defaults to `./runs`.
pub const OUTPUT_ROOT_VAR: &str = "FSTEFAN_OUTPUT_ROOT";
/// Nodes per random state in the invariant suite.
const INVARIANT_NODES: usize = 64;
/// Largest accepted `|front(s) − front(1)|`, in grid spacings.
const FRONT_GAP_CELLS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Profile,
    Sweep,
    Verify,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Profile => "profile",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Compare => "compare",
        }
    }
}

/// Resolved parameters recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub scheme: Scheme,
    pub phase: PhaseKind,
    pub s: f64,
    pub latent_heat: f64,
    pub p1: f64,
    pub p2: f64,
    pub datum: DatumKind,
    pub dx: f64,
    pub x_left: f64,
    pub m: usize,
    pub window: usize,
    pub theta: f64,
    pub backend: WeightsBackend,
    pub init: InitMode,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: String,
    /// Rendered configuration; feeding it back reproduces the run.
    pub config: String,
    pub parameters: Parameters,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub wall_seconds: f64,
    /// SHA-256 of every file written, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub gates: BTreeMap<String, bool>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Run directory name for a command and configuration.
pub fn run_dir_name(command: Command, config: &Config) -> String {
    let digest = Sha256::digest(format!("{}\n{}", command.name(), config.render()).as_bytes());
    format!("{}-{}", command.name(), &hex(&digest)[..16])
}

/// Reads a configuration from TOML, or from the `config` field of a manifest.
pub fn load_config_text(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        return Ok(manifest.config);
    }
    Ok(text)
}

struct Artifacts {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    gates: BTreeMap<String, bool>,
    dt: Option<f64>,
    steps: Option<usize>,
}

impl Artifacts {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn gate(&mut self, name: &str, ok: bool) {
        self.gates.insert(name.to_string(), ok);
    }

    fn record(&mut self, traj: &Trajectory) {
        self.dt = Some(traj.dt);
        self.steps = Some(traj.steps);
    }
}

/// Validates `config`, runs `command` and writes its artifacts under `root`.
pub fn dispatch(command: Command, config: &Config, root: &Path) -> Result<Outcome> {
    let v = config.validate()?;
    let started = Instant::now();
    let dir = root.join(run_dir_name(command, config));
    std::fs::create_dir_all(&dir)?;
    let mut art =
        Artifacts { dir: dir.clone(), outputs: BTreeMap::new(), gates: BTreeMap::new(), dt: None, steps: None };
    match command {
        Command::Simulate => simulate(&v, &mut art)?,
        Command::Profile => profile(&v, &mut art)?,
        Command::Sweep => sweep(&v, &mut art)?,
        Command::Verify => verify(&v, &mut art)?,
        Command::Compare => compare(&v, &mut art)?,
    }
    let c = &v.config;
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.render(),
        parameters: Parameters {
            scheme: c.model.scheme,
            phase: c.model.phase,
            s: v.s,
            latent_heat: v.datum.latent_heat,
            p1: v.datum.p1,
            p2: v.datum.p2,
            datum: c.datum.kind,
            dx: v.grid.dx(),
            x_left: v.grid.x_left(),
            m: v.grid.len(),
            window: v.window,
            theta: v.run.theta,
            backend: c.operator.weights_backend,
            init: c.grid.init,
            snapshot_times: v.run.snapshot_times.clone(),
        },
        dt: art.dt,
        steps: art.steps,
        wall_seconds: started.elapsed().as_secs_f64(),
        passed: art.gates.values().all(|&g| g),
        outputs: art.outputs.clone(),
        gates: art.gates.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes)?;
    Ok(Outcome { dir, manifest })
}

fn trajectory(v: &Validated, times: Option<&[f64]>) -> Result<Trajectory> {
    let init = v.initial_state()?;
    let mut cfg = v.run.clone();
    if let Some(t) = times {
        cfg.snapshot_times = t.to_vec();
    }
    match v.operator()? {
        Operator::Fractional(stencil) => run(&init, &stencil, &v.law, &cfg),
        Operator::Classical(_) => run_classical(&init, &v.law, &cfg),
    }
}

fn simulate(v: &Validated, art: &mut Artifacts) -> Result<()> {
    let traj = trajectory(v, None)?;
    art.record(&traj);
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let mut bytes = Vec::new();
        snap.write_csv(&v.law, &mut bytes)?;
        art.write(&format!("snapshot_{k:03}.csv"), &bytes)?;
    }
    Ok(())
}

fn require_step_datum(v: &Validated, command: &str) -> Result<()> {
    if v.config.datum.kind != DatumKind::Step {
        return Err(Error::Config(format!("`{command}` needs `datum.kind = \"step\"`")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ProfileJson {
    t_extract: f64,
    xi0: Option<f64>,
    xi0_fine_threshold: Option<f64>,
    tail_fit: Option<crate::selfsimilar::ExponentFit>,
    front_fit: Option<crate::selfsimilar::ExponentFit>,
    left_tail_fit: Option<crate::selfsimilar::ExponentFit>,
    mass_transfer: Option<crate::selfsimilar::MassTransfer>,
    report: crate::selfsimilar::ProfileReport,
    errors: BTreeMap<String, String>,
}

fn keep<T>(name: &str, r: Result<T>, errors: &mut BTreeMap<String, String>) -> Option<T> {
    r.map_err(|e| errors.insert(name.to_string(), e.to_string())).ok()
}

fn profile(v: &Validated, art: &mut Artifacts) -> Result<()> {
    require_step_datum(v, "profile")?;
    let t = v.run.t_final;
    let traj = trajectory(v, Some(&[t]))?;
    art.record(&traj);
    let profile = extract_profile(&traj.snapshots[0], &v.law, v.s, v.datum, None)?;
    let mut bytes = Vec::new();
    profile.write_csv(&mut bytes)?;
    art.write("profile.csv", &bytes)?;

    let mut errors = BTreeMap::new();
    let fb = keep("free_boundary", locate_free_boundary(&profile, None), &mut errors);
    let xi0 = fb.map(|f| f.xi0);
    let fit = |f: &dyn Fn(f64) -> Result<crate::selfsimilar::ExponentFit>, name: &str, errors: &mut _| {
        xi0.and_then(|x| keep(name, f(x), errors))
    };
    let tail_fit = fit(&|x| fit_tail_exponent(&profile, x), "tail_fit", &mut errors);
    let front_fit = fit(&|x| fit_front_exponent(&profile, x, 0.2), "front_fit", &mut errors);
    let left_tail_fit = fit(&|x| fit_left_tail_exponent(&profile, x), "left_tail_fit", &mut errors);
    let transfer = xi0.and_then(|x| keep("mass_transfer", mass_transfer(&profile, x), &mut errors));
    let report = profile_report(&profile);
    art.gate("xi0_positive", xi0.is_some_and(|x| x > 0.0));
    art.gate("profile_shape", report.all_pass());
    art.json(
        "report.json",
        &ProfileJson {
            t_extract: t,
            xi0,
            xi0_fine_threshold: fb.map(|f| f.xi0_fine_threshold),
            tail_fit,
            front_fit,
            left_tail_fit,
            mass_transfer: transfer,
            report,
            errors,
        },
    )
}

fn resolution(v: &Validated) -> Result<Resolution> {
    if v.scheme() != Scheme::Fractional {
        return Err(Error::Config("experiments need `model.scheme = \"fractional\"`".into()));
    }
    if v.law.kind() != PhaseKind::OnePhase {
        return Err(Error::Config("experiments need `model.phase = \"one\"`".into()));
    }
    let radius = v
        .config
        .grid
        .domain_radius
        .ok_or_else(|| Error::Config("experiments use a centered window; set `grid.domain_radius`".into()))?;
    Ok(Resolution {
        dx: v.grid.dx(),
        radius,
        theta: v.run.theta,
        backend: v.config.operator.weights_backend,
        cell_average: v.config.grid.init == InitMode::CellAverage,
    })
}

fn sweep(v: &Validated, art: &mut Artifacts) -> Result<()> {
    require_step_datum(v, "sweep")?;
    let res = resolution(v)?;
    let sc = &v.config.sweep;
    let s_list = if sc.s_list.is_empty() { vec![v.s] } else { sc.s_list.clone() };
    let (lat, p1) = (v.datum.latent_heat, v.datum.p1);

    let by_p2 = sweep_xi0_vs_p2(&s_list, &sc.p2_list, lat, p1, &res, sc.t_extract)?;
    let mut bytes = Vec::new();
    write_sweep_csv(&by_p2.records, &mut bytes)?;
    art.write("sweep_xi0_p2.csv", &bytes)?;
    for &(s, ok) in &by_p2.monotone {
        art.gate(&format!("xi0_nonincreasing_in_P2[s={s}]"), ok);
    }
    let by_s = if sc.s_grid.is_empty() {
        None
    } else {
        let sw = sweep_xi0_vs_s(&sc.s_grid, &sc.p2_list, lat, p1, &res, sc.t_extract)?;
        let mut bytes = Vec::new();
        write_sweep_csv(&sw.records, &mut bytes)?;
        art.write("sweep_xi0_s.csv", &bytes)?;
        for &(p2, ok) in &sw.minimum_at_smallest_s {
            art.gate(&format!("xi0_minimal_at_smallest_s[P2={p2}]"), ok);
        }
        Some(sw)
    };

    let radius = v.config.datum.box_radius;
    let boxed = BoxDatum { center: 0.0, half_width: radius, inside: v.datum.left(), outside: v.datum.right() };
    let times = if v.run.snapshot_times.is_empty() { vec![v.run.t_final] } else { v.run.snapshot_times.clone() };
    let trace = support_growth(
        v.s,
        &v.law,
        &boxed.initial_state(&res)?,
        Ball { center: 0.0, radius },
        v.datum.p2,
        &res,
        &times,
    )?;
    let mut bytes = Vec::new();
    trace.write_csv(&mut bytes)?;
    art.write("support_trace.csv", &bytes)?;
    art.gate("support_within_comparison_bound", trace.contained);
    art.gate("support_within_max_bound", trace.within_max_bound);
    art.gate("support_nondecreasing", trace.nondecreasing);

    #[derive(Serialize)]
    struct SweepJson<'a> {
        xi0_vs_p2: &'a crate::experiments::P2Sweep,
        xi0_vs_s: Option<&'a crate::experiments::SSweep>,
        support: &'a crate::experiments::SupportTrace,
    }
    art.json("sweep_report.json", &SweepJson { xi0_vs_p2: &by_p2, xi0_vs_s: by_s.as_ref(), support: &trace })
}

fn verify(v: &Validated, art: &mut Artifacts) -> Result<()> {
    if v.scheme() != Scheme::Fractional {
        return Err(Error::Config("`verify` needs `model.scheme = \"fractional\"`".into()));
    }
    let vc = &v.config.verify;
    let backend = v.config.operator.weights_backend;
    let rows = consistency_table(backend, v.s, &vc.dx_list, vc.radius, vc.tol)?;
    let mut csv = String::from("dx,err_inf,err_l1,order\n");
    for r in &rows {
        let order = r.order.map(|o| o.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{}", r.dx, r.err_inf, r.err_l1, order);
    }
    art.write("consistency.csv", csv.as_bytes())?;
    let target = expected_order(backend, v.s);
    let last = rows.last().and_then(|r| r.order);
    art.gate("consistency_order", last.is_some_and(|o| (o - target).abs() <= 0.3));

    let stencil = crate::operator::Stencil::build(backend, v.s, v.grid.dx(), INVARIANT_NODES)?;
    let inv = scheme_invariants(&stencil, &v.law, vc.pairs, INVARIANT_NODES, vc.steps, vc.seed)?;
    art.gate("scheme_invariants", inv.passed(1e-12));

    #[derive(Serialize)]
    struct VerifyJson<'a> {
        expected_order: f64,
        consistency: &'a [crate::verify::ConsistencyRow],
        invariants: &'a crate::verify::InvariantReport,
    }
    art.json("verify_report.json", &VerifyJson { expected_order: target, consistency: &rows, invariants: &inv })
}

fn compare(v: &Validated, art: &mut Artifacts) -> Result<()> {
    require_step_datum(v, "compare")?;
    let res = resolution(v)?;
    let cc = &v.config.compare;
    let front = classical_front_comparison(cc.s_near, v.datum, &res, cc.time)?;
    art.gate("front_matches_classical", front.gap <= FRONT_GAP_CELLS * res.dx);

    let r = cc.support_radius;
    let u0 = |x: f64| (std::f64::consts::FRAC_PI_2 * x / r).cos();
    let limits = limit_l_bracketing(v.s, (-r, r), u0, &cc.latent_heats, &res, &cc.times)?;
    art.gate("latent_heat_bracketing", limits.passed());

    #[derive(Serialize)]
    struct CompareJson<'a> {
        front: &'a crate::experiments::FrontComparison,
        front_gap_cells: f64,
        latent_heat_limits: &'a crate::experiments::LimitReport,
    }
    art.json(
        "compare_report.json",
        &CompareJson { front: &front, front_gap_cells: FRONT_GAP_CELLS, latent_heat_limits: &limits },
    )
}

/// Exit status for an error: 2 for usage and configuration problems, 3 for
/// numerical failures, 1 when an analysis step could not produce a result.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericAbort { .. } | Error::CflViolation { .. } | Error::QuadratureFailure { .. } => 3,
        Error::NoWater { .. } | Error::WindowTooSmall { .. } | Error::InsufficientSamples { .. } => 1,
        _ => 2,
    }
}

/// One-line JSON error record.
pub fn error_record(err: &Error) -> String {
    serde_json::json!({ "error": err.kind(), "message": err.to_string(), "exit_code": exit_code(err) }).to_string()
}
