//! Force-controlled point mass in `dims` dimensions, rewarded for progress
//! toward a fixed goal. Stands in for an articulated-body benchmark: same
//! tanh-bounded multi-dimensional action path, dense shaped reward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionBounds, Environment, Step, TraceRecord};
use crate::error::{Error, Result, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassConfig {
    pub dims: usize,
    pub dt: f64,
    pub drag: f64,
    pub max_force: f64,
    pub episode_steps: usize,
    pub goal: Vec<f64>,
    /// Start positions are uniform in `[-start_spread, start_spread]^dims`.
    pub start_spread: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            dims: 6,
            dt: 0.05,
            drag: 1.0,
            max_force: 1.0,
            episode_steps: 1000,
            goal: vec![0.0; 6],
            start_spread: 2.0,
        }
    }
}

impl PointMassConfig {
    pub fn with_dims(dims: usize) -> Self {
        PointMassConfig {
            dims,
            goal: vec![0.0; dims],
            ..PointMassConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config("dims must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !(self.drag >= 0.0) || !(self.start_spread >= 0.0) {
            return Err(Error::Config(
                "need dt > 0, drag >= 0, start_spread >= 0".into(),
            ));
        }
        if self.episode_steps == 0 {
            return Err(Error::Config("episode_steps must be >= 1".into()));
        }
        if self.goal.len() != self.dims || !self.goal.iter().all(|g| g.is_finite()) {
            return Err(Error::Config(
                "goal must be a finite vector of length dims".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct PointMassEnv {
    config: PointMassConfig,
    state: PointMassState,
}

impl PointMassEnv {
    pub fn new(config: PointMassConfig) -> Result<Self> {
        config.validate()?;
        let state = PointMassState {
            position: config.goal.clone(),
            velocity: vec![0.0; config.dims],
            step: config.episode_steps,
        };
        Ok(PointMassEnv { config, state })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.config
    }

    pub fn state(&self) -> &PointMassState {
        &self.state
    }

    pub fn set_state(&mut self, state: PointMassState) -> Result<()> {
        if state.position.len() != self.config.dims || state.velocity.len() != self.config.dims {
            return Err(Error::shape(
                format!("[{}]", self.config.dims),
                format!("[{}]", state.position.len()),
            ));
        }
        self.state = state;
        Ok(())
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        s.position
            .iter()
            .chain(&s.velocity)
            .copied()
            .chain(self.config.goal.iter().zip(&s.position).map(|(g, x)| g - x))
            .collect()
    }

    pub fn distance_to_goal(&self) -> f64 {
        distance(&self.config.goal, &self.state.position)
    }

    pub fn pm_reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = self.config.start_spread;
        self.state = PointMassState {
            position: (0..self.config.dims)
                .map(|_| rng.random_range(-spread..=spread))
                .collect(),
            velocity: vec![0.0; self.config.dims],
            step: 0,
        };
        self.observation()
    }

    pub fn pm_step(&mut self, action: &[f64]) -> Result<Step> {
        let cfg = &self.config;
        if self.state.step >= cfg.episode_steps {
            return Err(Error::EpisodeFinished);
        }
        if action.len() != cfg.dims {
            return Err(Error::shape(
                format!("[{}]", cfg.dims),
                format!("[{}]", action.len()),
            ));
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("point-mass action".into()));
        }
        let before = self.distance_to_goal();
        let s = &mut self.state;
        for ((x, v), &a) in s.position.iter_mut().zip(s.velocity.iter_mut()).zip(action) {
            let a = a.clamp(-1.0, 1.0);
            *v += (cfg.max_force * a - cfg.drag * *v) * cfg.dt;
            *x += *v * cfg.dt;
        }
        s.step += 1;
        let done = s.step >= cfg.episode_steps;
        let reward = before - self.distance_to_goal();
        Ok(Step {
            observation: self.observation(),
            reward,
            done,
        })
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl Environment for PointMassEnv {
    fn observation_shape(&self) -> Shape {
        Shape::Flat(3 * self.config.dims)
    }

    fn action_len(&self) -> usize {
        self.config.dims
    }

    fn action_bounds(&self) -> ActionBounds {
        ActionBounds::Symmetric
    }

    fn episode_length(&self) -> usize {
        self.config.episode_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.pm_reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        self.pm_step(action)
    }

    fn trace_record(&self, action: &[f64], reward: f64) -> TraceRecord {
        TraceRecord {
            index: self.state.step as u64,
            state: self.state.position.clone(),
            action: action.to_vec(),
            reward,
        }
    }

    fn trace_header(&self) -> Vec<String> {
        let n = self.config.dims;
        std::iter::once("step".to_string())
            .chain((0..n).map(|i| format!("x{i}")))
            .chain((0..n).map(|i| format!("action_{i}")))
            .chain(std::iter::once("reward".to_string()))
            .collect()
    }
}
