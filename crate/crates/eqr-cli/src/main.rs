//! Command-line front end for the tracking-control pipeline.
//!
//! Subcommands mirror the pipeline stages: `lift` integrates the desired
//! trajectory onto the symmetry group, `linearize` samples the error-system
//! matrices with a finite-difference self-check, `run` executes one
//! closed-loop experiment and `sweep` maps RMSE over initial bearings.
//!
//! Exit codes: 0 success, 1 numerical gate failed, 2 usage/config error.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use eqr::error_dynamics::{
    finite_difference_linearization, linearize_generic, write_linearization_csv,
};
use eqr::flatness::sample_trajectory;
use eqr::lifting::lift_trajectory;
use eqr::simulator::{sweep, ControllerKind, SimEngine};
use eqr::vehicle::origin;

/// Projection / residual thresholds that flip the exit code to 1.
const LIFT_GATE: f64 = 1e-5;
const LINEARIZE_GATE: f64 = 1e-5;

#[derive(Parser)]
#[command(
    name = "eqr",
    version,
    about = "Equivariant-regulator tracking control on S2 x R3 x R3: lift, linearize, simulate, sweep",
    after_help = ExperimentConfig::KEY_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the lifted trajectory and report the projection error
    /// (writes lifted.csv).
    Lift(CommonArgs),
    /// Sample the error-dynamics linearization along the trajectory with a
    /// finite-difference residual report (writes linearization.csv).
    Linearize(CommonArgs),
    /// Run one closed-loop experiment (writes run.csv).
    Run(CommonArgs),
    /// Sweep initial bearings over the sphere for both controllers
    /// (writes sweep.csv and PGM heatmaps).
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override sim.controller (eqr | plqr).
    #[arg(long)]
    controller: Option<String>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

enum CmdError {
    /// Configuration or usage problem; exit code 2.
    Usage(String),
    /// A numerical gate failed; exit code 1.
    Gate(String),
}

impl CmdError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CmdError::Usage(e.to_string())
    }
}

/// Pipeline errors split by origin: grid/weight problems come from the
/// configuration, everything else is a numerical failure.
fn map_pipeline(e: eqr::Error) -> CmdError {
    match e {
        eqr::Error::InvalidGrid { .. } | eqr::Error::InvalidWeights { .. } => {
            CmdError::Usage(e.to_string())
        }
        _ => CmdError::Gate(e.to_string()),
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CmdError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CmdError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text).map_err(CmdError::usage)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(controller) = &args.controller {
        cfg.controller = match controller.as_str() {
            "eqr" => ControllerKind::Eqr,
            "plqr" => ControllerKind::Plqr,
            other => {
                return Err(CmdError::Usage(format!(
                    "unknown controller '{other}' (expected eqr | plqr)"
                )))
            }
        };
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn create_writer(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, CmdError> {
    fs::create_dir_all(dir)
        .map_err(|e| CmdError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = fs::File::create(&path)
        .map_err(|e| CmdError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn cmd_lift(cfg: &ExperimentConfig) -> Result<(), CmdError> {
    let params = cfg.params();
    let schedule = sample_trajectory(&cfg.curve(), 0.0, cfg.t_final, cfg.trajectory_dt, &params)
        .map_err(map_pipeline)?;
    let lifted = lift_trajectory(&schedule, &origin(), &params).map_err(map_pipeline)?;
    let error = lifted.max_projection_error(&schedule);

    let mut out = create_writer(&cfg.output_dir, "lifted.csv")?;
    lifted.write_csv(&mut out).map_err(CmdError::usage)?;
    out.flush().map_err(CmdError::usage)?;
    if cfg.dump_trajectory {
        let mut out = create_writer(&cfg.output_dir, "trajectory.csv")?;
        schedule.write_csv(&mut out).map_err(CmdError::usage)?;
        out.flush().map_err(CmdError::usage)?;
    }

    println!(
        "lifted {} nodes over [0, {}] s; max projection error {error:.3e}",
        lifted.len(),
        cfg.t_final
    );
    if error > LIFT_GATE {
        return Err(CmdError::Gate(format!(
            "projection error {error:.3e} exceeds gate {LIFT_GATE:.1e}"
        )));
    }
    Ok(())
}

fn cmd_linearize(cfg: &ExperimentConfig) -> Result<(), CmdError> {
    let params = cfg.params();
    let schedule = sample_trajectory(&cfg.curve(), 0.0, cfg.t_final, cfg.gains_dt, &params)
        .map_err(map_pipeline)?;
    let lifted = lift_trajectory(&schedule, &origin(), &params).map_err(map_pipeline)?;

    let mut pairs = Vec::with_capacity(schedule.len());
    for i in 0..schedule.len() {
        let pt = schedule.point(i);
        let mut pair = linearize_generic(&lifted.elements()[i], &pt.state, &pt.input, &params);
        pair.time = schedule.times()[i];
        pairs.push(pair);
    }

    // finite-difference residual over up to 50 evenly spaced nodes
    let stride = (schedule.len() / 50).max(1);
    let mut residual: f64 = 0.0;
    for i in (0..schedule.len()).step_by(stride) {
        let pt = schedule.point(i);
        let fd =
            finite_difference_linearization(&lifted.elements()[i], &pt.state, &pt.input, &params, 1e-5)
                .map_err(map_pipeline)?;
        let pair = &pairs[i];
        let rel_a = (pair.a - fd.a).abs().max() / pair.a.abs().max().max(1.0);
        let rel_b = (pair.b - fd.b).abs().max() / pair.b.abs().max().max(1.0);
        residual = residual.max(rel_a).max(rel_b);
    }

    let mut out = create_writer(&cfg.output_dir, "linearization.csv")?;
    write_linearization_csv(&pairs, &mut out).map_err(CmdError::usage)?;
    out.flush().map_err(CmdError::usage)?;

    println!(
        "linearized {} nodes; max finite-difference residual {residual:.3e}",
        pairs.len()
    );
    if residual >= LINEARIZE_GATE {
        return Err(CmdError::Gate(format!(
            "finite-difference residual {residual:.3e} exceeds gate {LINEARIZE_GATE:.1e}"
        )));
    }
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<(), CmdError> {
    let sim_config = cfg.sim_config().map_err(CmdError::usage)?;
    let engine = SimEngine::new(&sim_config).map_err(map_pipeline)?;
    let result = engine.run(&sim_config.init, sim_config.controller);

    let mut out = create_writer(&cfg.output_dir, "run.csv")?;
    result.write_csv(&mut out).map_err(CmdError::usage)?;
    out.flush().map_err(CmdError::usage)?;
    if cfg.dump_gains {
        let mut out = create_writer(&cfg.output_dir, "gains.csv")?;
        match sim_config.controller {
            ControllerKind::Eqr => engine.eqr_gains().write_csv(&mut out),
            ControllerKind::Plqr => engine.plqr_gains().write_csv(&mut out),
        }
        .map_err(CmdError::usage)?;
        out.flush().map_err(CmdError::usage)?;
    }

    println!(
        "controller {}: rmse {:.6e}, converged {}{}",
        sim_config.controller,
        result.rmse,
        result.converged,
        match &result.failure {
            Some(reason) => format!(", diverged ({reason})"),
            None => String::new(),
        }
    );
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<(), CmdError> {
    if cfg.sweep_n_theta < 2 || cfg.sweep_n_phi < 2 {
        return Err(CmdError::Usage(format!(
            "sweep grid must be at least 2x2, got {}x{}",
            cfg.sweep_n_theta, cfg.sweep_n_phi
        )));
    }
    let sim_config = cfg.sim_config().map_err(CmdError::usage)?;
    let engine = SimEngine::new(&sim_config).map_err(map_pipeline)?;
    let grid = sweep(&engine, cfg.sweep_n_theta, cfg.sweep_n_phi, threads);

    let mut out = create_writer(&cfg.output_dir, "sweep.csv")?;
    grid.write_csv(&mut out).map_err(CmdError::usage)?;
    out.flush().map_err(CmdError::usage)?;
    for kind in [ControllerKind::Eqr, ControllerKind::Plqr] {
        let mut out = create_writer(&cfg.output_dir, &format!("heatmap_{kind}.pgm"))?;
        grid.write_pgm(kind, cfg.sweep_clip, &mut out)
            .map_err(CmdError::usage)?;
        out.flush().map_err(CmdError::usage)?;
    }

    println!(
        "sweep {}x{}: eqr converged {:.1}%, plqr converged {:.1}%",
        cfg.sweep_n_theta,
        cfg.sweep_n_phi,
        grid.converged_fraction(ControllerKind::Eqr) * 100.0,
        grid.converged_fraction(ControllerKind::Plqr) * 100.0
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Lift(args) => load_config(args).and_then(|cfg| cmd_lift(&cfg)),
        Command::Linearize(args) => load_config(args).and_then(|cfg| cmd_linearize(&cfg)),
        Command::Run(args) => load_config(args).and_then(|cfg| cmd_run(&cfg)),
        Command::Sweep(args) => {
            load_config(args).and_then(|cfg| cmd_sweep(&cfg, args.threads))
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Gate(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CmdError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
