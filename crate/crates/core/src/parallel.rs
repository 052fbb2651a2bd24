//! Synchronized on-policy workers.
//!
//! Every worker owns one environment, one generator and a frozen copy of the
//! global policy. A synced step fans out one transition per worker, gathers
//! them in worker-id order, trains the global agent once on that batch and
//! broadcasts the new actor parameters before the next fan-out.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentBundle, Policy, StepStats};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::replay::Transition;

/// Transitions worker `worker_id` skips before synchronized stepping begins:
/// `floor(worker_id * episode_length / n_workers)`.
pub fn warmup_offset(worker_id: usize, episode_length: usize, n_workers: usize) -> Result<usize> {
    if worker_id >= n_workers {
        return Err(Error::Config(format!(
            "worker id {worker_id} out of range for {n_workers} workers"
        )));
    }
    Ok(worker_id * episode_length / n_workers)
}

pub struct Worker {
    pub id: usize,
    env: Box<dyn Environment>,
    policy: Policy,
    rng: ChaCha8Rng,
    obs: Arc<[f64]>,
}

impl Worker {
    fn new(id: usize, mut env: Box<dyn Environment>, policy: Policy, base_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(id as u64));
        let obs = env.reset(rng.random()).into();
        Worker {
            id,
            env,
            policy,
            rng,
            obs,
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    fn transition(&mut self, sd: f64) -> Result<Transition> {
        let action = self.policy.act(&self.obs, sd, &mut self.rng)?;
        let step = self.env.step(&action)?;
        let next: Arc<[f64]> = step.observation.into();
        let t = Transition {
            state: Arc::clone(&self.obs),
            action,
            reward: step.reward,
            next_state: Arc::clone(&next),
            terminal: step.done,
        };
        self.obs = if step.done {
            self.env.reset(self.rng.random()).into()
        } else {
            next
        };
        Ok(t)
    }

    fn step_named(&mut self, sd: f64) -> Result<Transition> {
        self.transition(sd).map_err(|e| Error::Worker {
            worker: self.id,
            source: Box::new(e),
        })
    }
}

pub struct WorkerPool {
    workers: Vec<Worker>,
    pub global: AgentBundle,
    episode_length: usize,
    warmed_up: bool,
}

impl WorkerPool {
    /// One worker per environment; worker `i` seeds its generator with
    /// `base_seed + i`.
    pub fn new(
        global: AgentBundle,
        envs: Vec<Box<dyn Environment>>,
        base_seed: u64,
    ) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::Config(
                "worker pool needs at least one environment".into(),
            ));
        }
        let episode_length = envs[0].episode_length();
        if envs.iter().any(|e| e.episode_length() != episode_length) {
            return Err(Error::Config("workers must share an episode length".into()));
        }
        let workers = envs
            .into_iter()
            .enumerate()
            .map(|(id, env)| Worker::new(id, env, global.policy_snapshot(), base_seed))
            .collect();
        Ok(WorkerPool {
            workers,
            global,
            episode_length,
            warmed_up: false,
        })
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    /// Staggers the workers across the episode. Transitions generated here
    /// are dropped.
    pub fn warm_up(&mut self) -> Result<Vec<usize>> {
        let n = self.workers.len();
        let sd = self.global.current_sd();
        let offsets = (0..n)
            .map(|id| warmup_offset(id, self.episode_length, n))
            .collect::<Result<Vec<_>>>()?;
        for (w, &k) in self.workers.iter_mut().zip(&offsets) {
            for _ in 0..k {
                w.step_named(sd)?;
            }
        }
        self.warmed_up = true;
        Ok(offsets)
    }

    /// Each worker takes exactly one transition with its policy snapshot and
    /// the current global exploration SD. Results are in worker-id order.
    pub fn synced_step(&mut self) -> Result<Vec<Transition>> {
        if !self.warmed_up {
            return Err(Error::State("synced_step before warm_up".into()));
        }
        let sd = self.global.current_sd();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.workers
                .par_iter_mut()
                .map(|w| w.step_named(sd))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.workers.iter_mut().map(|w| w.step_named(sd)).collect()
        }
    }

    /// Copies the global actor into every worker's snapshot.
    pub fn broadcast(&mut self) -> Result<()> {
        for w in &mut self.workers {
            w.policy.sync_from(&self.global.online)?;
        }
        Ok(())
    }

    pub fn param_hashes(&self) -> Vec<u64> {
        self.workers.iter().map(|w| w.policy.param_hash()).collect()
    }

    pub fn is_synchronized(&self) -> bool {
        let global = self.global.policy_snapshot().param_hash();
        self.param_hashes().iter().all(|&h| h == global)
    }

    /// Step, train once on the fresh batch, broadcast. The batch is dropped.
    pub fn train_step(&mut self, rng: &mut impl Rng) -> Result<StepStats> {
        let batch = self.synced_step()?;
        let stats = self.global.train_step(&batch, rng)?;
        self.broadcast()?;
        Ok(stats)
    }
}
