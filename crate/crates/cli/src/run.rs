//! Executes a [`RunSpec`]: training with periodic evaluation, or the
//! structural comparison of all variants.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::thread;

use psmaddpg_core::eval::evaluate;
use psmaddpg_core::trainers::Trainer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::metrics::{metrics_csv, record_trajectories, trajectory_csv, PhaseEpisode};
use crate::netio::save_ensemble;
use crate::structural::{structural_report, structural_text};
use crate::{CliError, RunSpec};

/// Mixed into the seed of the evaluation rng.
const EVAL_STREAM: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Compare,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Mode::Train),
            "compare" => Ok(Mode::Compare),
            other => Err(format!("unknown mode `{other}` (expected train or compare)")),
        }
    }
}

fn output_dir(spec: &RunSpec) -> Result<&Path, CliError> {
    let dir = spec
        .out
        .as_deref()
        .ok_or_else(|| CliError::config(0, "no output directory (set `out` or pass --out)"))?;
    if !dir.is_dir() {
        return Err(CliError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    Ok(dir)
}

fn write(path: PathBuf, contents: &str) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs one spec into its output directory, which must already exist.
pub fn run(spec: &RunSpec, mode: Mode) -> Result<(), CliError> {
    let dir = output_dir(spec)?;
    let env = spec.build_env()?;
    match mode {
        Mode::Compare => {
            let rows = structural_report(&env, &spec.train, spec.compare_steps)?;
            write(dir.join("config.echo"), &spec.echo())?;
            write(dir.join("structural.txt"), &structural_text(&env, &rows))?;
        }
        Mode::Train => {
            let mut trainer = Trainer::new(&env, spec.train.clone())?;
            for w in trainer.warnings() {
                eprintln!("warning: {w}");
            }
            let mut eval_rng = ChaCha8Rng::seed_from_u64(spec.train.seed ^ EVAL_STREAM);
            let mut train_rows = Vec::new();
            let mut eval_rows: Vec<PhaseEpisode> = Vec::new();
            let mut sweep = |trainer: &Trainer<'_, _>, eval_rows: &mut Vec<PhaseEpisode>| -> Result<(), CliError> {
                for mut record in evaluate(trainer.ensemble(), &env, spec.eval_episodes, &mut eval_rng)? {
                    record.episode = eval_rows.len();
                    eval_rows.push(PhaseEpisode { record, epsilon: 0.0 });
                }
                Ok(())
            };
            let mut since_eval = 0;
            while let Some(ep) = trainer.run_episode()? {
                train_rows.push(PhaseEpisode {
                    record: ep.record,
                    epsilon: ep.epsilon,
                });
                since_eval += 1;
                if since_eval == spec.eval_every {
                    sweep(&trainer, &mut eval_rows)?;
                    since_eval = 0;
                }
            }
            if since_eval > 0 || train_rows.is_empty() {
                sweep(&trainer, &mut eval_rows)?;
            }
            let nets = dir.join("nets");
            fs::create_dir_all(&nets).map_err(|e| CliError::io(&nets, e))?;
            save_ensemble(trainer.ensemble(), &spec.train, &nets)?;
            if spec.dump_trajectory {
                let rows = record_trajectories(trainer.ensemble(), &env, spec.eval_episodes, &mut eval_rng)?;
                write(dir.join("trajectory.csv"), &trajectory_csv(&rows))?;
            }
            write(dir.join("config.echo"), &spec.echo())?;
            write(dir.join("metrics.csv"), &metrics_csv(&train_rows, &eval_rows))?;
        }
    }
    Ok(())
}

/// Runs one spec per seed, concurrently, each into `<out>/seed_<seed>`.
pub fn run_seeds(spec: &RunSpec, mode: Mode, seeds: &[u64]) -> Result<(), CliError> {
    let root = output_dir(spec)?;
    let specs = seeds
        .iter()
        .map(|&seed| {
            let dir = root.join(format!("seed_{seed}"));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let mut s = spec.clone();
            s.train.seed = seed;
            s.out = Some(dir);
            Ok(s)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    thread::scope(|scope| {
        let handles: Vec<_> = specs.iter().map(|s| scope.spawn(move || run(s, mode))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed run panicked"))
            .collect::<Result<Vec<()>, CliError>>()
    })?;
    Ok(())
}
