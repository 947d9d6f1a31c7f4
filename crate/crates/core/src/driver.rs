//! Batch runs: initial state, time loop, energy CSV, checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::config::{InitialCondition, RunConfig};
use crate::mhd::{EnergySample, Simulator, SpectralState};
use crate::{Error, Result};

pub const ENERGY_FILE: &str = "energies.csv";
pub const FINAL_CHECKPOINT: &str = "final.scgk";

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: u64,
    pub state: SpectralState,
    pub samples: Vec<EnergySample>,
    pub energy_csv: PathBuf,
    pub final_checkpoint: PathBuf,
}

pub fn checkpoint_name(step: u64) -> String {
    format!("checkpoint_{step:08}.scgk")
}

/// One CSV row, 17 significant digits.
pub fn csv_row(e: &EnergySample) -> String {
    format!("{:.16e},{:.16e},{:.16e}", e.t, e.e_v, e.e_b)
}

pub fn initial_state(cfg: &RunConfig, sim: &Simulator) -> Result<SpectralState> {
    match &cfg.initial_condition {
        InitialCondition::Random { seed, amplitudes } => Ok(sim.random_state(*seed, *amplitudes)),
        InitialCondition::Roll { seed, amplitudes } => Ok(sim.roll_state(*seed, *amplitudes)),
        InitialCondition::Checkpoint(path) => {
            let c = checkpoint::read_matching(path, cfg.dims)?;
            if c.params != cfg.params {
                log::warn!("{}: checkpoint parameters differ from the config; using the config", path.display());
            }
            let mut s = SpectralState::zeros(cfg.dims, sim.wavenumbers());
            s.unpack(&c.state.pack())?;
            s.t = c.state.t;
            Ok(s)
        }
    }
}

/// Builds the simulator (all constraint spaces and correction bases) and runs
/// `cfg.steps` steps.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let sim = Simulator::new(cfg.params, cfg.dims, cfg.options)?;
    let state = initial_state(cfg, &sim)?;
    run_from(cfg, &sim, state)
}

pub fn run_from(cfg: &RunConfig, sim: &Simulator, mut state: SpectralState) -> Result<RunSummary> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(ENERGY_FILE);
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p, e)
    };
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(io(&csv_path))?);
    writeln!(csv, "t,E_v,E_b").map_err(io(&csv_path))?;
    let mut samples = Vec::new();
    let mut record = |s: &SpectralState, csv: &mut BufWriter<File>| -> Result<()> {
        let e = sim.energies(s);
        writeln!(csv, "{}", csv_row(&e)).map_err(io(&csv_path))?;
        samples.push(e);
        Ok(())
    };
    record(&state, &mut csv)?;
    log::info!(
        "{} steps of {:?}, dt = {}, dims {:?}",
        cfg.steps,
        cfg.scheme,
        cfg.dt,
        cfg.dims
    );
    for step in 1..=cfg.steps {
        state = sim
            .step(cfg.scheme, &state, cfg.dt)
            .map_err(|e| Error::StepFailed {
                step,
                source: Box::new(e),
            })?;
        if step % cfg.output_interval == 0 {
            record(&state, &mut csv)?;
        }
        if cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 {
            csv.flush().map_err(io(&csv_path))?;
            checkpoint::write(&dir.join(checkpoint_name(step)), &cfg.params, &state)?;
            log::debug!("checkpoint at step {step}, t = {}", state.t);
        }
    }
    csv.flush().map_err(io(&csv_path))?;
    let final_checkpoint = dir.join(FINAL_CHECKPOINT);
    checkpoint::write(&final_checkpoint, &cfg.params, &state)?;
    Ok(RunSummary {
        steps: cfg.steps,
        state,
        samples,
        energy_csv: csv_path,
        final_checkpoint,
    })
}
