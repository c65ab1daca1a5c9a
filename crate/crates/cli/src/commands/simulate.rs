use std::path::Path;

use dada_core::models::{burn_in, observe as observe_states, simulate as simulate_states, Trajectory};
use dada_core::seeds::derive_rng;

use super::{load_model, required_config, to_json};
use crate::error::{CliError, CliResult};
use crate::output::{Manifest, OutputDir};
use crate::tables::{observation_table, read_vectors, trajectory_table};
use crate::Cli;

const MODEL_STREAM: u64 = 0x51;
const OBS_STREAM: u64 = 0x0B5;

/// Writes `trajectory.csv` and `observations.csv`. Model and observation
/// noise use separate streams so `observe` on the written trajectory
/// reproduces the observations.
pub fn simulate(cli: &Cli) -> CliResult<Manifest> {
    let cfg = load_model(required_config(cli)?)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let spec = cfg.spec()?;
    let mut rng = derive_rng(seed, &[MODEL_STREAM]);
    let x0 = burn_in(&spec, &cfg.initial_state()?, cfg.burn_in_steps(), &mut rng)?;
    let traj = simulate_states(&spec, &x0, cfg.steps, &mut rng)?;
    let y = observe_states(&traj, &spec, &mut derive_rng(seed, &[OBS_STREAM]))?;

    let mut out = OutputDir::create(&cli.out, "simulate", seed, to_json(&cfg))?;
    out.table("trajectory.csv", &trajectory_table(&traj, cfg.l63().is_some()))?;
    out.table("observations.csv", &observation_table(&y))?;
    out.finish()
}

pub fn observe(cli: &Cli, trajectory: &Path) -> CliResult<Manifest> {
    let cfg = load_model(required_config(cli)?)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let spec = cfg.spec()?;
    let states = read_vectors(trajectory, 'x')?;
    if states[0].len() != spec.state_dim() {
        return Err(CliError::config(format!(
            "{}: states have {} components, the model has {}",
            trajectory.display(),
            states[0].len(),
            spec.state_dim()
        )));
    }
    let traj = Trajectory {
        states,
        dt_per_step: spec.dt(),
    };
    let y = observe_states(&traj, &spec, &mut derive_rng(seed, &[OBS_STREAM]))?;
    let mut out = OutputDir::create(&cli.out, "observe", seed, to_json(&cfg))?;
    out.table("observations.csv", &observation_table(&y))?;
    out.finish()
}
