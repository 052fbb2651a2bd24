//! Flat `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment. Later pairs override earlier ones,
//! so command-line overrides are simply appended. Defaults depend on the
//! environment and algorithm, which are therefore resolved first.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::agents::{AgentConfig, Algorithm, NoiseSchedule};
use crate::env::{AgarConfig, PointMassConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentKind {
    AgarGrid,
    AgarPixel,
    PointMass,
}

impl EnvironmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvironmentKind::AgarGrid => "agar-grid",
            EnvironmentKind::AgarPixel => "agar-pixel",
            EnvironmentKind::PointMass => "pointmass",
        }
    }

    pub fn is_agar(self) -> bool {
        matches!(self, EnvironmentKind::AgarGrid | EnvironmentKind::AgarPixel)
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agar-grid" => Ok(EnvironmentKind::AgarGrid),
            "agar-pixel" => Ok(EnvironmentKind::AgarPixel),
            "pointmass" => Ok(EnvironmentKind::PointMass),
            other => Err(Error::Config(format!("unknown environment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Replay,
    OnPolicy,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Replay => "replay",
            Task::OnPolicy => "onpolicy",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replay" => Ok(Task::Replay),
            "onpolicy" => Ok(Task::OnPolicy),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Optimistic critic offset: calibrated from random-policy rollouts, or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimism {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub environment: EnvironmentKind,
    pub task: Task,
    pub total_steps: u64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub sd_initial: f64,
    pub sd_at_half: f64,
    pub target_update_interval: u64,
    pub spg_samples: usize,
    pub spg_sd_floor: f64,
    pub optimism: Optimism,
    pub n_runs: usize,
    pub tests_per_checkpoint: usize,
    pub seed: u64,
    pub workers: usize,
    pub save_checkpoints: bool,
    pub agar: AgarConfig,
    pub pointmass: PointMassConfig,
}

pub const CHECKPOINTS: usize = 21;

impl ExperimentConfig {
    pub fn defaults(environment: EnvironmentKind, algorithm: Algorithm) -> Self {
        let (actor_lr, critic_lr) = algorithm.default_learning_rates();
        let (total_steps, buffer_capacity, discount) = match environment {
            EnvironmentKind::AgarGrid => (500_000, 40_000, 0.9),
            EnvironmentKind::AgarPixel => (300_000, 20_000, 0.9),
            EnvironmentKind::PointMass => (200_000, 15_000, 0.99),
        };
        ExperimentConfig {
            algorithm,
            environment,
            task: Task::Replay,
            total_steps,
            buffer_capacity,
            batch_size: 32,
            actor_lr,
            critic_lr,
            discount,
            sd_initial: 1.0,
            sd_at_half: 0.05,
            target_update_interval: 1500,
            spg_samples: 5,
            spg_sd_floor: 0.05,
            optimism: Optimism::Auto,
            n_runs: 10,
            tests_per_checkpoint: 5,
            seed: 0,
            workers: 32,
            save_checkpoints: true,
            agar: AgarConfig::default(),
            pointmass: PointMassConfig::default(),
        }
    }

    /// Parses config text; `overrides` are applied after the file contents.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(overrides.iter().map(|(k, v)| (0, k.clone(), v.clone())));
        Self::from_pairs(&pairs)
    }

    /// Builds a config from `(line, key, value)` triples; line 0 marks a
    /// command-line override.
    pub fn from_pairs(pairs: &[(usize, String, String)]) -> Result<Self> {
        let mut merged: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut order = Vec::new();
        for (line, k, v) in pairs {
            if merged.insert(k.as_str(), (*line, v.as_str())).is_none() {
                order.push(k.as_str());
            }
        }
        let wrap = |line: usize, e: Error| match line {
            0 => e,
            line => Error::Parse {
                line,
                message: e.to_string(),
            },
        };
        let environment = match merged.get("environment") {
            Some(&(line, v)) => v.parse().map_err(|e| wrap(line, e))?,
            None => EnvironmentKind::AgarGrid,
        };
        let algorithm = match merged.get("algorithm") {
            Some(&(line, v)) => v.parse().map_err(|e| wrap(line, e))?,
            None => Algorithm::Cacla,
        };
        let mut cfg = Self::defaults(environment, algorithm);
        for key in order {
            let (line, value) = merged[key];
            cfg.set(key, value).map_err(|e| wrap(line, e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "environment" => self.environment = value.parse()?,
            "task" => self.task = value.parse()?,
            "total_steps" => self.total_steps = num(key, value)?,
            "buffer_capacity" => self.buffer_capacity = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "actor_lr" => self.actor_lr = num(key, value)?,
            "critic_lr" => self.critic_lr = num(key, value)?,
            "discount" => self.discount = num(key, value)?,
            "sd_initial" => self.sd_initial = num(key, value)?,
            "sd_at_half" => self.sd_at_half = num(key, value)?,
            "target_update_interval" => self.target_update_interval = num(key, value)?,
            "spg_samples" => self.spg_samples = num(key, value)?,
            "spg_sd_floor" => self.spg_sd_floor = num(key, value)?,
            "optimistic_offset" => {
                self.optimism = match value {
                    "auto" => Optimism::Auto,
                    v => Optimism::Fixed(num(key, v)?),
                }
            }
            "n_runs" => self.n_runs = num(key, value)?,
            "tests_per_checkpoint" => self.tests_per_checkpoint = num(key, value)?,
            "seed" | "base_seed" => self.seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "save_checkpoints" => self.save_checkpoints = num(key, value)?,
            "agar_arena_side" => self.agar.arena_side = num(key, value)?,
            "agar_pellet_count" => self.agar.pellet_count = num(key, value)?,
            "agar_pellet_mass" => self.agar.pellet_mass = num(key, value)?,
            "agar_start_mass" => self.agar.start_mass = num(key, value)?,
            "agar_mass_decay" => self.agar.mass_decay_per_frame = num(key, value)?,
            "agar_base_speed" => self.agar.base_speed = num(key, value)?,
            "agar_speed_exponent" => self.agar.speed_mass_exponent = num(key, value)?,
            "agar_view_scale" => self.agar.view_scale = num(key, value)?,
            "agar_view_base" => self.agar.view_base = num(key, value)?,
            "agar_radius_scale" => self.agar.radius_scale = num(key, value)?,
            "agar_frame_skip" => self.agar.frame_skip = num(key, value)?,
            "agar_episode_frames" => self.agar.episode_frames = num(key, value)?,
            "pointmass_dims" => {
                let dims: usize = num(key, value)?;
                self.pointmass.dims = dims;
                self.pointmass.goal = vec![0.0; dims];
            }
            "pointmass_dt" => self.pointmass.dt = num(key, value)?,
            "pointmass_drag" => self.pointmass.drag = num(key, value)?,
            "pointmass_max_force" => self.pointmass.max_force = num(key, value)?,
            "pointmass_episode_steps" => self.pointmass.episode_steps = num(key, value)?,
            "pointmass_start_spread" => self.pointmass.start_spread = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Desk-scale preset: 50,000 steps and a single run, same checkpoint grid.
    pub fn apply_quick_preset(&mut self) {
        self.total_steps = 50_000;
        self.n_runs = 1;
    }

    pub fn validate(&self) -> Result<()> {
        if self.environment == EnvironmentKind::AgarPixel && self.task == Task::OnPolicy {
            return Err(Error::Config(
                "agar-pixel is only supported with the replay task".into(),
            ));
        }
        if self.total_steps < (CHECKPOINTS - 1) as u64 {
            return Err(Error::Config("total_steps must be >= 20".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config(
                "need 1 <= batch_size <= buffer_capacity".into(),
            ));
        }
        if self.n_runs == 0 || self.tests_per_checkpoint == 0 || self.workers == 0 {
            return Err(Error::Config(
                "n_runs, tests_per_checkpoint and workers must be >= 1".into(),
            ));
        }
        self.agar.validate()?;
        self.pointmass.validate()?;
        self.agent_config()?.validate()
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.sd_initial, self.sd_at_half, self.total_steps)
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        Ok(AgentConfig {
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            discount: self.discount,
            target_update_interval: self.target_update_interval,
            spg_samples: self.spg_samples,
            spg_sd_floor: self.spg_sd_floor,
            schedule: self.schedule()?,
        })
    }

    /// Step counts at which checkpoints are taken: `k * total / 20`, k = 0..=20.
    pub fn checkpoint_steps(&self) -> Vec<u64> {
        (0..CHECKPOINTS as u64)
            .map(|k| k * self.total_steps / (CHECKPOINTS as u64 - 1))
            .collect()
    }

    /// Serialises back to the file format (only keys this crate reads).
    pub fn to_text(&self) -> String {
        let a = &self.agar;
        let p = &self.pointmass;
        let optimism = match self.optimism {
            Optimism::Auto => "auto".to_string(),
            Optimism::Fixed(v) => v.to_string(),
        };
        let rows: Vec<(&str, String)> = vec![
            ("algorithm", self.algorithm.to_string()),
            ("environment", self.environment.to_string()),
            ("task", self.task.as_str().to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("discount", self.discount.to_string()),
            ("sd_initial", self.sd_initial.to_string()),
            ("sd_at_half", self.sd_at_half.to_string()),
            (
                "target_update_interval",
                self.target_update_interval.to_string(),
            ),
            ("spg_samples", self.spg_samples.to_string()),
            ("spg_sd_floor", self.spg_sd_floor.to_string()),
            ("optimistic_offset", optimism),
            ("n_runs", self.n_runs.to_string()),
            (
                "tests_per_checkpoint",
                self.tests_per_checkpoint.to_string(),
            ),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("save_checkpoints", self.save_checkpoints.to_string()),
            ("agar_arena_side", a.arena_side.to_string()),
            ("agar_pellet_count", a.pellet_count.to_string()),
            ("agar_pellet_mass", a.pellet_mass.to_string()),
            ("agar_start_mass", a.start_mass.to_string()),
            ("agar_mass_decay", a.mass_decay_per_frame.to_string()),
            ("agar_base_speed", a.base_speed.to_string()),
            ("agar_speed_exponent", a.speed_mass_exponent.to_string()),
            ("agar_view_scale", a.view_scale.to_string()),
            ("agar_view_base", a.view_base.to_string()),
            ("agar_radius_scale", a.radius_scale.to_string()),
            ("agar_frame_skip", a.frame_skip.to_string()),
            ("agar_episode_frames", a.episode_frames.to_string()),
            ("pointmass_dims", p.dims.to_string()),
            ("pointmass_dt", p.dt.to_string()),
            ("pointmass_drag", p.drag.to_string()),
            ("pointmass_max_force", p.max_force.to_string()),
            ("pointmass_episode_steps", p.episode_steps.to_string()),
            ("pointmass_start_spread", p.start_spread.to_string()),
        ];
        rows.into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
