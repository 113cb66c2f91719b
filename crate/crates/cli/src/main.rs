mod output;
mod state;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ringgyro::propagator::{calibrate_barrier, delta_barrier_reflection, BarrierProbe};
use ringgyro::{
    build_scheme, ground_state, run_scheme, GroundStateOptions, PotentialSpec, RingGrid, SchemeConfig, SchemeId,
    TrapPath,
};

use crate::output::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Invalid(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<ringgyro::Error> for CliError {
    fn from(e: ringgyro::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else if e.is_non_convergence() {
            CliError::NotConverged(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

/// Ring-trap matterwave gyroscope simulations.
#[derive(Debug, Parser)]
#[command(name = "ringgyro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Rotation rate at which derivatives are taken [default: evolution.omega0]
    #[arg(long)]
    omega: Option<f64>,
    /// Central-difference step in Ω [default: evolution.delta]
    #[arg(long)]
    delta: Option<f64>,
    /// Concurrent Ω-offset propagations
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scheme and write Fisher series, maps and a manifest.
    Run {
        config: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Calibrate the barrier amplitude for the configured packet.
    CalibrateBarrier { config: PathBuf },
    /// Relax the configured trap to its ground state and write it to a file.
    GroundState { config: PathBuf, out: PathBuf },
    /// Run once per value of one config key; one output directory per value.
    Sweep {
        config: PathBuf,
        out_root: PathBuf,
        /// Dotted config key, e.g. `evolution.interaction`
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print the full default configuration of a scheme.
    Defaults { scheme: String },
}

fn load_config(path: &Path) -> Result<SchemeConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(SchemeConfig::from_toml_str(&text)?)
}

/// Runs one scheme into `out_dir`; returns whether the run was degraded.
fn run_one(config: &SchemeConfig, out_dir: &Path, args: &RunArgs) -> Result<bool, CliError> {
    let omega = args.omega.unwrap_or(config.evolution.omega0);
    let delta = args.delta.unwrap_or(config.evolution.delta);
    let threads = args.threads as usize;
    let plan = build_scheme(config)?;
    let mut manifest = RunManifest::new(config, omega, delta, threads);

    let start = Instant::now();
    let result = run_scheme(&plan, omega, delta, threads);
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    let out = match result {
        Ok(out) => out,
        Err(e) if e.is_non_convergence() => {
            fs::create_dir_all(out_dir).map_err(|err| CliError::io(out_dir, err))?;
            manifest.degraded = true;
            manifest.degraded_reasons = vec![e.to_string()];
            manifest.write(out_dir)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    manifest.record(&out.diagnostics);

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let written = output::write_outputs(out_dir, &out)?;
    let violations = output::validate_outputs(out_dir, out.jz.is_some())?;
    if violations != out.diagnostics.violations {
        return Err(CliError::Invalid(
            "re-read Fisher series disagrees with the computed one".to_string(),
        ));
    }
    manifest.files = written
        .iter()
        .map(|p| output::file_entry(p))
        .collect::<Result<_, _>>()?;
    manifest.write(out_dir)?;

    for reason in &manifest.degraded_reasons {
        eprintln!("warning: {}: {reason}", config.scheme);
    }
    Ok(manifest.degraded)
}

fn cmd_run(config: &Path, out_dir: &Path, args: &RunArgs) -> Result<u8, CliError> {
    let cfg = load_config(config)?;
    eprintln!("running {} into {}", cfg.scheme, out_dir.display());
    let degraded = run_one(&cfg, out_dir, args)?;
    Ok(if degraded { 3 } else { 0 })
}

fn cmd_calibrate(config: &Path) -> Result<u8, CliError> {
    let cfg = load_config(config)?;
    let grid = RingGrid::new(cfg.grid.n_points, cfg.grid.radius)?;
    let mut probe = BarrierProbe::for_grid(&grid, cfg.packet.sigma);
    if let Some(w) = cfg.barrier.width {
        probe.width = w;
    }
    let k = cfg.packet.k_kick;
    let cal = calibrate_barrier(&grid, k, &probe, cfg.barrier.target_reflection)?;
    println!("amplitude = {}", output::fmt_float(cal.amplitude));
    println!("reflection = {:.6}", cal.reflection);
    println!("evaluations = {}", cal.evaluations);
    println!(
        "delta_barrier_reflection = {:.6}",
        delta_barrier_reflection(cal.amplitude, k, grid.radius())
    );
    Ok(0)
}

fn cmd_ground_state(config: &Path, out: &Path) -> Result<u8, CliError> {
    let cfg = load_config(config)?;
    let grid = RingGrid::new(cfg.grid.n_points, cfg.grid.radius)?;
    let omega = cfg.transport.trap_omega;
    let u = cfg.evolution.interaction;
    let trap = PotentialSpec::harmonic(omega, TrapPath::Fixed { center: 0.0 });
    let gs = ground_state(&trap, u, grid, &GroundStateOptions::default())?;
    state::write(out, &gs, omega, u)?;
    let text = fs::read_to_string(out).map_err(|e| CliError::io(out, e))?;
    let (_, back) = state::parse(&text)?;
    if back != gs.state {
        return Err(CliError::Invalid(format!("{} does not read back", out.display())));
    }
    println!("energy = {}", output::fmt_float(gs.energy));
    println!("steps = {}", gs.steps);
    Ok(0)
}

/// Keeps `[A-Za-z0-9._-]`, maps everything else to `_`.
fn sanitize(value: &str) -> String {
    let s: String = value
        .trim()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    match s.as_str() {
        "" | "." | ".." => format!("_{s}"),
        _ => s,
    }
}

fn cmd_sweep(config: &Path, out_root: &Path, param: &str, values: &[String], args: &RunArgs) -> Result<u8, CliError> {
    let base = load_config(config)?;
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let cfg = base.with_override(param, v)?;
        build_scheme(&cfg)?;
        let dir = out_root.join(sanitize(v));
        if runs.iter().any(|(_, d): &(SchemeConfig, PathBuf)| *d == dir) {
            return Err(CliError::Config(format!(
                "values collide on directory {}",
                dir.display()
            )));
        }
        runs.push((cfg, dir));
    }
    let mut code = 0;
    for (cfg, dir) in runs {
        eprintln!("sweep {param}: {}", dir.display());
        match run_one(&cfg, &dir, args) {
            Ok(degraded) => code = code.max(if degraded { 3 } else { 0 }),
            Err(e @ CliError::NotConverged(_)) => {
                eprintln!("error: {e}");
                code = 3;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(code)
}

fn cmd_defaults(scheme: &str) -> Result<u8, CliError> {
    let id: SchemeId = scheme.parse()?;
    print!("{}", SchemeConfig::defaults(id).to_toml_string());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out_dir, args } => cmd_run(config, out_dir, args),
        Command::CalibrateBarrier { config } => cmd_calibrate(config),
        Command::GroundState { config, out } => cmd_ground_state(config, out),
        Command::Sweep {
            config,
            out_root,
            param,
            values,
            args,
        } => cmd_sweep(config, out_root, param, values, args),
        Command::Defaults { scheme } => cmd_defaults(scheme),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("0.2"), "0.2");
        assert_eq!(sanitize("-1e-3"), "-1e-3");
        assert_eq!(sanitize("\"kandes free\""), "_kandes_free_");
        assert_eq!(sanitize("../x"), ".._x");
        assert_eq!(sanitize(".."), "_..");
        assert_eq!(sanitize("a/b"), "a_b");
    }

    #[test]
    fn error_exit_codes() {
        let cfg: CliError = ringgyro::Error::Config("x".into()).in_scheme("s").into();
        assert_eq!(cfg.exit_code(), 2);
        let nc: CliError = ringgyro::Error::GroundStateNotConverged {
            steps: 1,
            residual: 1.0,
        }
        .into();
        assert_eq!(nc.exit_code(), 3);
    }
}
