//! Line-oriented `key = value` run configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use psmaddpg_core::envs::{EnvKind, MultiAgentEnv, ParticleEnv};
use psmaddpg_core::trainers::{TrainConfig, Variant};

use crate::CliError;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub train: TrainConfig,
    pub env: EnvKind,
    pub n_agents: usize,
    pub out: Option<PathBuf>,
    /// Training episodes between evaluation sweeps.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Half-width of uniform observation noise; 0 disables it.
    pub obs_noise: f64,
    /// Also write `trajectory.csv` from a final evaluation pass.
    pub dump_trajectory: bool,
    /// Train steps timed per variant in compare mode.
    pub compare_steps: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            train: TrainConfig::default(),
            env: EnvKind::CoopSpread,
            n_agents: 2,
            out: None,
            eval_every: 100,
            eval_episodes: 10,
            obs_noise: 0.0,
            dump_trajectory: false,
            compare_steps: 1000,
        }
    }
}

impl RunSpec {
    pub fn build_env(&self) -> Result<ParticleEnv, psmaddpg_core::Error> {
        ParticleEnv::new(self.env, self.n_agents, self.train.max_episode_length)?
            .with_obs_noise(self.obs_noise)
    }

    /// Every key with its resolved value; parsing it back gives `self`.
    pub fn echo(&self) -> String {
        let t = &self.train;
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("variant", t.variant.to_string());
        kv("env", self.env.to_string());
        kv("n_agents", self.n_agents.to_string());
        kv("gamma", t.gamma.to_string());
        kv("tau", t.tau.to_string());
        kv("lr_actor", t.lr_actor.to_string());
        kv("lr_critic", t.lr_critic.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("warmup", t.warmup.to_string());
        kv("eps_start", t.eps_start.to_string());
        kv("eps_end", t.eps_end.to_string());
        kv("eps_decay_steps", t.eps_decay_steps.to_string());
        kv("total_steps", t.total_steps.to_string());
        kv("max_episode_length", t.max_episode_length.to_string());
        kv("seed", t.seed.to_string());
        kv("memory_capacity", t.memory_capacity.to_string());
        kv("actor_hidden", list(&t.actor_hidden));
        kv("critic_hidden", list(&t.critic_hidden));
        kv("v2_shared_sizes", list(&t.v2_shared_sizes));
        kv("v2_head_sizes", list(&t.v2_head_sizes));
        if let Some(out_dir) = &self.out {
            kv("out", out_dir.display().to_string());
        }
        kv("eval_every", self.eval_every.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("obs_noise", self.obs_noise.to_string());
        kv("dump_trajectory", self.dump_trajectory.to_string());
        kv("compare_steps", self.compare_steps.to_string());
        out
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::config(line, format!("cannot parse `{raw}` for `{key}`")))
}

fn list(line: usize, key: &str, raw: &str) -> Result<Vec<usize>, CliError> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| value(line, key, p.trim())).collect()
}

/// Parses a config. Missing keys keep their defaults; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunSpec, CliError> {
    let mut spec = RunSpec::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, raw) = content
            .split_once('=')
            .ok_or_else(|| CliError::config(line, format!("expected `key = value`, found `{content}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(CliError::config(line, format!("`{key}` already set on line {first}")));
        }
        let t = &mut spec.train;
        match key {
            "variant" => t.variant = value::<Variant>(line, key, raw)?,
            "env" => spec.env = value(line, key, raw)?,
            "n_agents" => spec.n_agents = value(line, key, raw)?,
            "gamma" => t.gamma = value(line, key, raw)?,
            "tau" => t.tau = value(line, key, raw)?,
            "lr_actor" => t.lr_actor = value(line, key, raw)?,
            "lr_critic" => t.lr_critic = value(line, key, raw)?,
            "batch_size" => t.batch_size = value(line, key, raw)?,
            "warmup" => t.warmup = value(line, key, raw)?,
            "eps_start" => t.eps_start = value(line, key, raw)?,
            "eps_end" => t.eps_end = value(line, key, raw)?,
            "eps_decay_steps" => t.eps_decay_steps = value(line, key, raw)?,
            "total_steps" => t.total_steps = value(line, key, raw)?,
            "max_episode_length" => t.max_episode_length = value(line, key, raw)?,
            "seed" => t.seed = value(line, key, raw)?,
            "memory_capacity" => t.memory_capacity = value(line, key, raw)?,
            "actor_hidden" => t.actor_hidden = list(line, key, raw)?,
            "critic_hidden" => t.critic_hidden = list(line, key, raw)?,
            "v2_shared_sizes" => t.v2_shared_sizes = list(line, key, raw)?,
            "v2_head_sizes" => t.v2_head_sizes = list(line, key, raw)?,
            "out" => spec.out = Some(PathBuf::from(raw)),
            "eval_every" => spec.eval_every = value(line, key, raw)?,
            "eval_episodes" => spec.eval_episodes = value(line, key, raw)?,
            "obs_noise" => spec.obs_noise = value(line, key, raw)?,
            "dump_trajectory" => spec.dump_trajectory = value(line, key, raw)?,
            "compare_steps" => spec.compare_steps = value(line, key, raw)?,
            _ => return Err(CliError::config(line, format!("unknown key `{key}`"))),
        }
    }
    let line_of = |key: &str| seen.get(key).copied().unwrap_or(0);
    if let Err(e) = spec.train.validate() {
        return Err(CliError::config(0, e.to_string()));
    }
    if spec.eval_every == 0 {
        return Err(CliError::config(line_of("eval_every"), "eval_every must be positive"));
    }
    let env = spec
        .build_env()
        .map_err(|e| CliError::config(line_of("n_agents").max(line_of("obs_noise")), e.to_string()))?;
    if spec.train.variant.shares_actor() && !env.spec().is_uniform() {
        return Err(CliError::config(
            line_of("variant"),
            format!("{} needs agents with identical widths, {} has mixed widths", spec.train.variant, spec.env),
        ));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let spec = parse_config("").unwrap();
        assert_eq!(spec, RunSpec::default());
        assert_eq!(spec.train.variant, Variant::V0);
        assert_eq!(spec.n_agents, 2);
        assert_eq!(spec.env, EnvKind::CoopSpread);
        assert_eq!(spec.train.gamma, 0.99);
        assert_eq!(spec.train.tau, 0.01);
        assert_eq!(spec.train.batch_size, 64);
    }

    #[test]
    fn values_and_comments() {
        let spec = parse_config(
            "# discount\ngamma = 0.99\nvariant = v2   # multi-head\nactor_hidden = 32, 16\nenv = assigned_targets\n",
        )
        .unwrap();
        assert_eq!(spec.train.gamma, 0.99);
        assert_eq!(spec.train.variant, Variant::V2);
        assert_eq!(spec.train.actor_hidden, vec![32, 16]);
        assert_eq!(spec.env, EnvKind::AssignedTargets);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_config("gamma = 0.9\nvariannt = v0\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("variannt"));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(matches!(parse_config("gamma = lots"), Err(CliError::Config { line: 1, .. })));
        assert!(matches!(parse_config("\nvariant = v9"), Err(CliError::Config { line: 2, .. })));
        assert!(matches!(parse_config("env = water_world"), Err(CliError::Config { line: 1, .. })));
        assert!(matches!(parse_config("gamma"), Err(CliError::Config { line: 1, .. })));
        assert!(matches!(parse_config("seed = 1\nseed = 2"), Err(CliError::Config { line: 2, .. })));
        assert!(parse_config("eps_start = 0.1\neps_end = 0.5").is_err());
        assert!(parse_config("n_agents = 0").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let spec = parse_config(
            "variant = maddpg\nn_agents = 3\nlr_actor = 0.0003\nv2_head_sizes = \nout = /tmp/x\nobs_noise = 0.01\n",
        )
        .unwrap();
        assert_eq!(parse_config(&spec.echo()).unwrap(), spec);
        assert_eq!(parse_config(&RunSpec::default().echo()).unwrap(), RunSpec::default());
    }
}
