use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fstefan::cli::{dispatch, error_record, exit_code, load_config_text, Command, OUTPUT_ROOT_VAR};
use fstefan::config::{Config, Override};
use fstefan::Result;

/// Explicit finite-difference solver for the fractional Stefan problem.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the configured datum and write one CSV per snapshot.
    Simulate(Opts),
    /// Extract the self-similar profile of the step datum at `t_final`.
    Profile(Opts),
    /// Free-boundary sweeps over `P2` and `s`, plus a support trace.
    Sweep(Opts),
    /// Stencil consistency table and scheme invariants on random data.
    Verify(Opts),
    /// Near-classical front comparison and latent-heat limits.
    Compare(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML configuration, or a `manifest.json` from an earlier run.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set grid.dx=0.025`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    s: Option<f64>,
    /// Latent heat `L`.
    #[arg(long = "latent-heat", short = 'L')]
    latent_heat: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Defaults to `$FSTEFAN_OUTPUT_ROOT`, then `./runs`.
    #[arg(long = "output-root")]
    output_root: Option<PathBuf>,
}

const DEFAULT_CONFIG: &str = "\
[model]
s = 0.5
L = 1.0

[datum]
P1 = 1.0
P2 = 1.0

[grid]
dx = 0.05
domain_radius = 20.0

[run]
t_final = 1.0
";

fn resolve(opts: &Opts) -> Result<Config> {
    let text = match &opts.config {
        Some(path) => load_config_text(path)?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut overrides = opts.overrides.iter().map(|o| Override::parse(o)).collect::<Result<Vec<_>>>()?;
    for (key, value) in [
        ("model.s", opts.s),
        ("model.latent_heat", opts.latent_heat),
        ("grid.dx", opts.dx),
        ("run.t_final", opts.t_final),
    ] {
        if let Some(v) = value {
            overrides.push(Override { path: key.split('.').map(String::from).collect(), value: toml::Value::Float(v) });
        }
    }
    Config::parse_with_overrides(&text, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Profile(o) => (Command::Profile, o),
        Sub::Sweep(o) => (Command::Sweep, o),
        Sub::Verify(o) => (Command::Verify, o),
        Sub::Compare(o) => (Command::Compare, o),
    };
    let root = opts
        .output_root
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    match resolve(opts).and_then(|config| dispatch(command, &config, &root)) {
        Ok(out) => {
            let summary = serde_json::json!({
                "run_dir": out.dir.display().to_string(),
                "passed": out.manifest.passed,
                "gates": out.manifest.gates,
            });
            println!("{summary}");
            if out.manifest.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("{}", error_record(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
