//! `scgk`: batch front end for the magnetoconvection simulator.
//!
//! Exit codes: 0 ok, 1 usage/config error, 2 numerical failure, 3 I/O.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scgk::config::{InitialCondition, RunConfig};
use scgk::mhd::{SimOptions, Simulator};
use scgk::{checkpoint, driver, Error};

#[derive(Parser)]
#[command(name = "scgk", version, about = "Spectral Galerkin magnetoconvection in a rotating plane layer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Start from this checkpoint instead of the configured initial condition.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Print a checkpoint's header and energies.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;
const IO: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidConfig(_) => USAGE,
        Error::Io { .. } | Error::Checkpoint(_) | Error::CheckpointDims { .. } => IO,
        _ => NUMERICAL,
    }
}

fn run(config: PathBuf, output_dir: Option<PathBuf>, resume: Option<PathBuf>) -> Result<(), Error> {
    let mut cfg = RunConfig::from_file(&config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(path) = resume {
        cfg.initial_condition = InitialCondition::Checkpoint(path);
    }
    let summary = driver::run(&cfg)?;
    let last = summary.samples.last().expect("initial sample is always recorded");
    println!(
        "completed {} steps: t = {:.6e}, E_v = {:.6e}, E_b = {:.6e}",
        summary.steps, last.t, last.e_v, last.e_b
    );
    println!("energies: {}", summary.energy_csv.display());
    println!("final checkpoint: {}", summary.final_checkpoint.display());
    Ok(())
}

fn inspect(path: PathBuf) -> Result<(), Error> {
    let c = checkpoint::read(&path)?;
    let d = c.state.dims();
    let p = c.params;
    println!("format: SCGK v{}", checkpoint::VERSION);
    println!("dims: N1 = {}, N2 = {}, N3 = {}", d.n1, d.n2, d.n3);
    println!(
        "params: P = {}, R = {}, tau = {}, Pm = {}, eta = {}, e_r = ({}, {}, {}), L1 = {}, L2 = {}",
        p.p, p.r, p.tau, p.pm, p.eta, p.e_r[0], p.e_r[1], p.e_r[2], p.l1, p.l2
    );
    println!("t = {:.16e}", c.state.t);
    let sim = Simulator::new(p, d, SimOptions::default())?;
    let e = sim.energies(&c.state);
    println!("E_v = {:.16e}", e.e_v);
    println!("E_b = {:.16e}", e.e_b);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            output_dir,
            resume,
        } => run(config, output_dir, resume),
        Command::Inspect { checkpoint } => inspect(checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
