//! Training and test protocol: 21 evenly spaced checkpoints per run (0% is the
//! untrained agent), each tested with the deterministic policy.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentBundle, Architecture};
use crate::env::{AgarEnv, Environment, ObservationKind, PointMassEnv};
use crate::error::{Error, Result};
use crate::harness::config::{EnvironmentKind, ExperimentConfig, Optimism, Task, CHECKPOINTS};
use crate::harness::metrics::{save_metrics, MetricsRecord};
use crate::parallel::WorkerPool;
use crate::replay::{ReplayBuffer, Transition};
use crate::Shape;

/// Environment variable naming the default output directory of the CLI.
pub const OUTPUT_DIR_ENV: &str = "ACLAB_OUT";

/// Episodes of uniform-random play used to calibrate the optimistic offset.
pub const CALIBRATION_EPISODES: usize = 10;

/// SplitMix64 finaliser, used to derive independent stream seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(base, tags...)`; distinct tag lists give unrelated streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(mix_seed(base), |acc, &t| mix_seed(acc ^ mix_seed(t)))
}

const TAG_INIT: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_ENV: u64 = 3;
const TAG_TEST: u64 = 4;
const TAG_WORKERS: u64 = 5;
const TAG_CALIBRATE: u64 = 6;

/// Environment seeds for the test episodes of one checkpoint.
pub fn test_seeds(config: &ExperimentConfig, run_id: usize, pct: u32) -> Vec<u64> {
    (0..config.tests_per_checkpoint)
        .map(|ep| {
            derive_seed(
                config.seed,
                &[TAG_TEST, run_id as u64, pct as u64, ep as u64],
            )
        })
        .collect()
}

pub fn make_env(config: &ExperimentConfig) -> Result<Box<dyn Environment>> {
    Ok(match config.environment {
        EnvironmentKind::AgarGrid => {
            Box::new(AgarEnv::new(config.agar.clone(), ObservationKind::Grid)?)
        }
        EnvironmentKind::AgarPixel => {
            Box::new(AgarEnv::new(config.agar.clone(), ObservationKind::Pixels)?)
        }
        EnvironmentKind::PointMass => Box::new(PointMassEnv::new(config.pointmass.clone())?),
    })
}

/// Network architecture matching an environment's observation and action.
pub fn architecture_for(env: &dyn Environment) -> Architecture {
    match env.observation_shape() {
        Shape::Flat(obs_len) => Architecture::Mlp {
            obs_len,
            action_len: env.action_len(),
            bounds: env.action_bounds(),
        },
        Shape::Image { side, .. } => Architecture::Pixel {
            side,
            action_len: env.action_len(),
            bounds: env.action_bounds(),
        },
    }
}

/// Largest discounted return-to-go seen over `episodes` uniform-random
/// episodes. Used as the optimistic critic offset.
pub fn calibrate_optimism(
    env: &mut dyn Environment,
    discount: f64,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = env.action_bounds();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..episodes {
        env.reset(rng.random());
        let mut rewards = Vec::with_capacity(env.episode_length());
        loop {
            let action: Vec<f64> = (0..env.action_len())
                .map(|_| rng.random_range(bounds.low()..=bounds.high()))
                .collect();
            let step = env.step(&action)?;
            rewards.push(step.reward);
            if step.done {
                break;
            }
        }
        let mut g = 0.0;
        for r in rewards.iter().rev() {
            g = r + discount * g;
            best = best.max(g);
        }
    }
    if !best.is_finite() {
        return Err(Error::NonFinite("optimism calibration".into()));
    }
    Ok(best)
}

/// Plays one test episode per seed with the noise-free policy.
pub fn run_test(
    agent: &AgentBundle,
    env: &mut dyn Environment,
    seeds: &[u64],
    run_id: usize,
    checkpoint_pct: u32,
) -> Result<Vec<MetricsRecord>> {
    check_compatible(agent, env)?;
    seeds
        .iter()
        .enumerate()
        .map(|(ep, &seed)| {
            let mut obs = env.reset(seed);
            let mut total = 0.0;
            loop {
                let action = agent.online.policy(&obs)?;
                let step = env.step(&action)?;
                total += step.reward;
                obs = step.observation;
                if step.done {
                    break;
                }
            }
            Ok(MetricsRecord {
                run_id,
                checkpoint_pct,
                test_episode: ep,
                episode_return: total,
                final_mass: env.mass(),
            })
        })
        .collect()
}

/// Loads an agent checkpoint and tests it in the configured environment.
pub fn test_checkpoint(
    path: impl AsRef<Path>,
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<MetricsRecord>> {
    let agent = AgentBundle::load_checkpoint(path)?.bundle;
    let mut env = make_env(config)?;
    run_test(&agent, env.as_mut(), seeds, 0, 100)
}

fn check_compatible(agent: &AgentBundle, env: &dyn Environment) -> Result<()> {
    let (want, got) = (env.observation_shape(), agent.online.observation_shape());
    if want != got
        || env.action_len() != agent.online.action_len()
        || env.action_bounds() != agent.online.bounds
    {
        return Err(Error::Checkpoint(format!(
            "agent expects {got} observations and {} actions, environment provides {want} and {}",
            agent.online.action_len(),
            env.action_len()
        )));
    }
    Ok(())
}

/// Everything one training run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: usize,
    pub records: Vec<MetricsRecord>,
    pub final_agent: AgentBundle,
    pub checkpoint_paths: Vec<PathBuf>,
    pub optimistic_offset: f64,
    /// Training steps performed (agent updates).
    pub train_steps: u64,
    /// Wall time spent acting and training, excluding tests.
    pub train_seconds: f64,
    pub max_critic_loss: f64,
    pub losses_finite: bool,
}

impl RunOutcome {
    pub fn seconds_per_step(&self) -> f64 {
        self.train_seconds / self.train_steps.max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutcome>,
    pub metrics_path: Option<PathBuf>,
}

impl TrainingReport {
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.runs
            .iter()
            .flat_map(|r| r.records.iter().cloned())
            .collect()
    }
}

/// Called after each checkpoint's tests with `(run_id, pct, records)`.
pub type CheckpointHook<'a> = dyn FnMut(usize, u32, &[MetricsRecord]) + 'a;

pub fn run_training(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<TrainingReport> {
    run_training_with(config, out_dir, &mut |_, _, _| {})
}

/// Runs `n_runs` independent runs. With an output directory, writes
/// `config.txt`, `metrics.csv` and (if enabled) `run<k>/ckpt_<pct>.acag`.
pub fn run_training_with(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
    hook: &mut CheckpointHook<'_>,
) -> Result<TrainingReport> {
    config.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), config.to_text())?;
    }
    let mut runs = Vec::with_capacity(config.n_runs);
    for run_id in 0..config.n_runs {
        runs.push(run_single(config, run_id, out_dir, hook)?);
    }
    let metrics_path = match out_dir {
        Some(dir) => {
            let path = dir.join("metrics.csv");
            let records: Vec<MetricsRecord> = runs
                .iter()
                .flat_map(|r| r.records.iter().cloned())
                .collect();
            save_metrics(&path, &records)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainingReport {
        config: config.clone(),
        runs,
        metrics_path,
    })
}

struct Checkpointer<'a, 'h> {
    config: &'a ExperimentConfig,
    run_id: usize,
    run_dir: Option<PathBuf>,
    test_env: Box<dyn Environment>,
    records: Vec<MetricsRecord>,
    paths: Vec<PathBuf>,
    hook: &'a mut CheckpointHook<'h>,
}

impl Checkpointer<'_, '_> {
    fn checkpoint(&mut self, agent: &AgentBundle, k: usize) -> Result<()> {
        let pct = (k * 100 / (CHECKPOINTS - 1)) as u32;
        if let Some(dir) = &self.run_dir {
            let path = dir.join(format!("ckpt_{pct:03}.acag"));
            let label = format!(
                "{} {} {} run {} at {pct}%",
                self.config.algorithm,
                self.config.environment,
                self.config.task.as_str(),
                self.run_id
            );
            agent.save_checkpoint(&path, &label)?;
            self.paths.push(path);
        }
        let seeds = test_seeds(self.config, self.run_id, pct);
        let recs = run_test(agent, self.test_env.as_mut(), &seeds, self.run_id, pct)?;
        (self.hook)(self.run_id, pct, &recs);
        self.records.extend(recs);
        Ok(())
    }
}

struct LossTracker {
    max: f64,
    finite: bool,
}

impl LossTracker {
    fn new() -> Self {
        LossTracker {
            max: 0.0,
            finite: true,
        }
    }

    fn record(&mut self, loss: f64) {
        self.finite &= loss.is_finite();
        self.max = self.max.max(loss);
    }
}

fn run_single(
    config: &ExperimentConfig,
    run_id: usize,
    out_dir: Option<&Path>,
    hook: &mut CheckpointHook<'_>,
) -> Result<RunOutcome> {
    let r = run_id as u64;
    let mut env = make_env(config)?;
    let arch = architecture_for(env.as_ref());
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TAG_INIT, r]));
    let mut agent = AgentBundle::new(
        config.algorithm,
        &arch,
        config.agent_config()?,
        &mut init_rng,
    )?;
    let offset = match config.optimism {
        Optimism::Fixed(v) => v,
        Optimism::Auto => calibrate_optimism(
            env.as_mut(),
            config.discount,
            CALIBRATION_EPISODES,
            derive_seed(config.seed, &[TAG_CALIBRATE, r]),
        )?,
    };
    agent.optimistic_init(offset)?;

    let run_dir = match out_dir {
        Some(dir) if config.save_checkpoints => {
            let d = dir.join(format!("run{run_id}"));
            std::fs::create_dir_all(&d)?;
            Some(d)
        }
        _ => None,
    };
    let mut ck = Checkpointer {
        config,
        run_id,
        run_dir,
        test_env: make_env(config)?,
        records: Vec::with_capacity(CHECKPOINTS * config.tests_per_checkpoint),
        paths: Vec::new(),
        hook,
    };
    let boundaries = config.checkpoint_steps();
    let mut train_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TAG_TRAIN, r]));
    let mut losses = LossTracker::new();
    let mut train_seconds = 0.0;
    ck.checkpoint(&agent, 0)?;

    let agent = match config.task {
        Task::Replay => {
            let schedule = config.schedule()?;
            let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TAG_ENV, r]));
            let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
            let mut obs: Arc<[f64]> = env.reset(env_rng.random()).into();
            let mut next_k = 1;
            for step in 1..=config.total_steps {
                let started = Instant::now();
                let action = agent.act(&obs, schedule.sd(step - 1), &mut train_rng)?;
                let out = env.step(&action)?;
                let next: Arc<[f64]> = out.observation.into();
                buffer.push(Transition {
                    state: obs,
                    action,
                    reward: out.reward,
                    next_state: next.clone(),
                    terminal: out.done,
                })?;
                obs = if out.done {
                    env.reset(env_rng.random()).into()
                } else {
                    next
                };
                if buffer.len() >= config.batch_size {
                    let batch = buffer.sample(config.batch_size, &mut train_rng)?;
                    losses.record(agent.train_step(&batch, &mut train_rng)?.critic_loss);
                }
                train_seconds += started.elapsed().as_secs_f64();
                while next_k < CHECKPOINTS && boundaries[next_k] == step {
                    ck.checkpoint(&agent, next_k)?;
                    next_k += 1;
                }
            }
            agent
        }
        Task::OnPolicy => {
            let envs = (0..config.workers)
                .map(|_| make_env(config))
                .collect::<Result<Vec<_>>>()?;
            let mut pool =
                WorkerPool::new(agent, envs, derive_seed(config.seed, &[TAG_WORKERS, r]))?;
            let started = Instant::now();
            pool.warm_up()?;
            train_seconds += started.elapsed().as_secs_f64();
            let mut next_k = 1;
            for step in 1..=config.total_steps {
                let started = Instant::now();
                losses.record(pool.train_step(&mut train_rng)?.critic_loss);
                train_seconds += started.elapsed().as_secs_f64();
                while next_k < CHECKPOINTS && boundaries[next_k] == step {
                    ck.checkpoint(&pool.global, next_k)?;
                    next_k += 1;
                }
            }
            pool.global
        }
    };

    Ok(RunOutcome {
        run_id,
        records: ck.records,
        train_steps: agent.step_counter(),
        final_agent: agent,
        checkpoint_paths: ck.paths,
        optimistic_offset: offset,
        train_seconds,
        max_critic_loss: losses.max,
        losses_finite: losses.finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, &[TAG_TEST, 0, 5, 0]);
        let b = derive_seed(7, &[TAG_TEST, 0, 5, 1]);
        let c = derive_seed(7, &[TAG_TEST, 1, 5, 0]);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, derive_seed(7, &[TAG_TEST, 0, 5, 0]));
    }
}
