use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::agents::model::{perturb, ActorCritic, Architecture, CriticKind, Policy};
use crate::agents::noise::NoiseSchedule;
use crate::error::{Error, Result};
use crate::replay::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Cacla,
    Dpg,
    Spg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Cacla, Algorithm::Dpg, Algorithm::Spg];

    pub fn critic_kind(self) -> CriticKind {
        match self {
            Algorithm::Cacla => CriticKind::State,
            Algorithm::Dpg | Algorithm::Spg => CriticKind::StateAction,
        }
    }

    /// `(actor_lr, critic_lr)` tuned defaults.
    pub fn default_learning_rates(self) -> (f64, f64) {
        match self {
            Algorithm::Cacla => (0.0005, 0.00075),
            Algorithm::Dpg | Algorithm::Spg => (0.0001, 0.0005),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cacla => "cacla",
            Algorithm::Dpg => "dpg",
            Algorithm::Spg => "spg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cacla" => Ok(Algorithm::Cacla),
            "dpg" => Ok(Algorithm::Dpg),
            "spg" => Ok(Algorithm::Spg),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub target_update_interval: u64,
    pub spg_samples: usize,
    /// Lower bound on the SD used for SPG action sampling.
    pub spg_sd_floor: f64,
    pub schedule: NoiseSchedule,
}

impl AgentConfig {
    pub fn for_algorithm(algorithm: Algorithm, discount: f64, schedule: NoiseSchedule) -> Self {
        let (actor_lr, critic_lr) = algorithm.default_learning_rates();
        AgentConfig {
            actor_lr,
            critic_lr,
            discount,
            target_update_interval: 1500,
            spg_samples: 5,
            spg_sd_floor: 0.05,
            schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spg_samples == 0 {
            return Err(Error::Config("spg_samples must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config("discount must be in [0, 1]".into()));
        }
        if self.target_update_interval == 0 {
            return Err(Error::Config("target_update_interval must be >= 1".into()));
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0) {
            return Err(Error::Config("learning rates must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-state outcome of SPG's action search.
#[derive(Debug, Clone, PartialEq)]
pub struct SpgChoice {
    pub base_action: Vec<f64>,
    pub base_value: f64,
    pub samples: Vec<Vec<f64>>,
    pub sample_values: Vec<f64>,
    /// Index of the best sample when it strictly beats the base action.
    pub chosen: Option<usize>,
}

/// First index of the maximum of `sample_values`, kept only if it strictly
/// exceeds `base_value`.
pub fn spg_select(base_value: f64, sample_values: &[f64]) -> Option<usize> {
    let (best, &best_value) = sample_values.iter().enumerate().fold(
        None,
        |acc: Option<(usize, &f64)>, (i, v)| match acc {
            Some((_, b)) if *b >= *v => acc,
            _ => Some((i, v)),
        },
    )?;
    (best_value > base_value).then_some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub critic_loss: f64,
    /// Rows used by a gated actor update (CACLA, SPG), or the batch size for DPG.
    pub actor_rows: usize,
    pub mean_q: Option<f64>,
    pub targets_updated: bool,
}

/// Online and target actor-critic networks plus the training bookkeeping.
#[derive(Debug, Clone)]
pub struct AgentBundle {
    pub algorithm: Algorithm,
    pub config: AgentConfig,
    pub online: ActorCritic,
    pub target: ActorCritic,
    step_counter: u64,
}

impl AgentBundle {
    pub fn new(
        algorithm: Algorithm,
        arch: &Architecture,
        config: AgentConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let online = ActorCritic::build(arch, algorithm.critic_kind(), rng)?;
        Self::from_parts(algorithm, config, online, None, 0)
    }

    pub fn from_parts(
        algorithm: Algorithm,
        config: AgentConfig,
        online: ActorCritic,
        target: Option<ActorCritic>,
        step_counter: u64,
    ) -> Result<Self> {
        config.validate()?;
        if online.critic_kind != algorithm.critic_kind() {
            return Err(Error::State(format!(
                "{algorithm} expects a {:?} critic",
                algorithm.critic_kind()
            )));
        }
        let target = target.unwrap_or_else(|| online.clone_into_target());
        Ok(AgentBundle {
            algorithm,
            config,
            online,
            target,
            step_counter,
        })
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn actor(&self) -> &crate::nn::Network {
        &self.online.actor
    }

    pub fn critic(&self) -> &crate::nn::Network {
        &self.online.critic
    }

    pub fn actor_target(&self) -> &crate::nn::Network {
        &self.target.actor
    }

    pub fn critic_target(&self) -> &crate::nn::Network {
        &self.target.critic
    }

    /// Exploration SD at the current training step.
    pub fn current_sd(&self) -> f64 {
        self.config.schedule.sd(self.step_counter)
    }

    fn spg_sd(&self) -> f64 {
        self.current_sd().max(self.config.spg_sd_floor)
    }

    /// `clamp(pi(s) + N(0, sd^2 I))`; `sd = 0` gives the deterministic policy.
    pub fn act(&self, obs: &[f64], sd: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let a = self.online.policy(obs)?;
        Ok(perturb(&a, sd, self.online.bounds, rng))
    }

    pub fn policy_snapshot(&self) -> Policy {
        self.online.policy_snapshot()
    }

    /// Bootstrapped critic targets: `r` if terminal, else
    /// `r + gamma V'(s')` or `r + gamma Q'(s', pi'(s'))` from the target networks.
    pub fn critic_targets<T: Borrow<Transition>>(&self, batch: &[T]) -> Result<Vec<f64>> {
        let gamma = self.config.discount;
        batch
            .iter()
            .map(|t| {
                let t = t.borrow();
                let y = if t.terminal {
                    t.reward
                } else {
                    let next = match self.target.critic_kind {
                        CriticKind::State => self.target.value(&t.next_state, None)?,
                        CriticKind::StateAction => {
                            let a = self.target.policy(&t.next_state)?;
                            self.target.value(&t.next_state, Some(&a))?
                        }
                    };
                    t.reward + gamma * next
                };
                if !y.is_finite() {
                    return Err(Error::NonFinite("critic target".into()));
                }
                Ok(y)
            })
            .collect()
    }

    /// TD errors `target - V(s)` with the live critic (CACLA).
    pub fn td_errors<T: Borrow<Transition>>(&self, batch: &[T]) -> Result<Vec<f64>> {
        let targets = self.critic_targets(batch)?;
        batch
            .iter()
            .zip(targets)
            .map(|(t, y)| {
                let t = t.borrow();
                let action =
                    (self.online.critic_kind == CriticKind::StateAction).then_some(&t.action[..]);
                Ok(y - self.online.value(&t.state, action)?)
            })
            .collect()
    }

    /// One Adam step on the MSE between the critic and its bootstrapped targets.
    pub fn train_critic<T: Borrow<Transition>>(&mut self, batch: &[T]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        let targets = self.critic_targets(batch)?;
        let n = batch.len() as f64;
        let mut grads = self.online.zero_critic_grads();
        let mut loss = 0.0;
        let takes_action = self.online.critic_kind == CriticKind::StateAction;
        for (t, y) in batch.iter().zip(targets) {
            let t = t.borrow();
            let q = self
                .online
                .critic_forward(&t.state, takes_action.then_some(&t.action[..]))?;
            loss += (q - y).powi(2);
            self.online
                .critic_backward(2.0 * (q - y) / n, Some(&mut grads))?;
        }
        self.online.apply_critic(&grads, self.config.critic_lr)?;
        Ok(loss / n)
    }

    /// Regresses the actor toward `targets[i]` at `states[i]`, averaging over
    /// the given rows only.
    fn regress_actor(&mut self, rows: &[(&[f64], Vec<f64>)]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let n = rows.len() as f64;
        let mut grads = self.online.zero_actor_grads();
        for (state, target) in rows {
            let out = self.online.actor_forward(state)?;
            let k = out.len() as f64;
            let g: Vec<f64> = out
                .iter()
                .zip(target)
                .map(|(o, t)| 2.0 * (o - t) / (k * n))
                .collect();
            self.online.actor_backward(&g, Some(&mut grads))?;
        }
        self.online.apply_actor(&grads, self.config.actor_lr)
    }

    /// CACLA: move `pi(s)` toward the taken action wherever the TD error is
    /// positive. Returns how many rows were used.
    pub fn train_actor_cacla<T: Borrow<Transition>>(&mut self, batch: &[T]) -> Result<usize> {
        let deltas = self.td_errors(batch)?;
        let rows: Vec<(&[f64], Vec<f64>)> = batch
            .iter()
            .zip(&deltas)
            .filter(|(_, &d)| d > 0.0)
            .map(|(t, _)| (&t.borrow().state[..], t.borrow().action.clone()))
            .collect();
        let used = rows.len();
        self.regress_actor(&rows)?;
        Ok(used)
    }

    /// DPG: ascend `Q(s, pi(s))` by backpropagating `-dQ/da` through the
    /// actor. The critic is evaluated but never updated. Returns mean Q.
    pub fn train_actor_dpg<T: Borrow<Transition>>(&mut self, batch: &[T]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        if self.online.critic_kind != CriticKind::StateAction {
            return Err(Error::State("DPG needs a Q-critic".into()));
        }
        let n = batch.len() as f64;
        let mut grads = self.online.zero_actor_grads();
        let mut total_q = 0.0;
        for t in batch {
            let s = &t.borrow().state;
            let a = self.online.actor_forward(s)?;
            let q = self.online.critic_forward(s, Some(&a))?;
            total_q += q;
            let dq_da = self.online.critic_backward(1.0, None)?;
            // critic_forward recomputed the trunk on the same state with the
            // same parameters, so the actor's cached activations still hold.
            let g: Vec<f64> = dq_da.iter().map(|d| -d / n).collect();
            self.online.actor_backward(&g, Some(&mut grads))?;
        }
        self.online.apply_actor(&grads, self.config.actor_lr)?;
        Ok(total_q / n)
    }

    /// Samples `spg_samples` perturbations of `pi(s)` per state and scores them
    /// with the live critic.
    pub fn spg_search<T: Borrow<Transition>>(
        &self,
        batch: &[T],
        rng: &mut impl Rng,
    ) -> Result<Vec<SpgChoice>> {
        self.config.validate()?;
        if self.online.critic_kind != CriticKind::StateAction {
            return Err(Error::State("SPG needs a Q-critic".into()));
        }
        let sd = self.spg_sd();
        batch
            .iter()
            .map(|t| {
                let s = &t.borrow().state;
                let base = self.online.policy(s)?;
                let samples: Vec<Vec<f64>> = (0..self.config.spg_samples)
                    .map(|_| perturb(&base, sd, self.online.bounds, rng))
                    .collect();
                let mut actions = Vec::with_capacity(samples.len() + 1);
                actions.push(base.clone());
                actions.extend(samples.iter().cloned());
                let mut values = self.online.values_for_actions(s, &actions)?;
                let base_value = values.remove(0);
                let chosen = spg_select(base_value, &values);
                Ok(SpgChoice {
                    base_action: base,
                    base_value,
                    samples,
                    sample_values: values,
                    chosen,
                })
            })
            .collect()
    }

    /// SPG: regress `pi(s)` toward the best sampled action wherever the critic
    /// rates it strictly above `Q(s, pi(s))`. Returns how many rows were used.
    pub fn train_actor_spg<T: Borrow<Transition>>(
        &mut self,
        batch: &[T],
        rng: &mut impl Rng,
    ) -> Result<usize> {
        let choices = self.spg_search(batch, rng)?;
        let rows: Vec<(&[f64], Vec<f64>)> = batch
            .iter()
            .zip(choices)
            .filter_map(|(t, c)| {
                c.chosen
                    .map(|i| (&t.borrow().state[..], c.samples[i].clone()))
            })
            .collect();
        let used = rows.len();
        self.regress_actor(&rows)?;
        Ok(used)
    }

    /// Hard-copies online networks into the targets when the step counter is
    /// a positive multiple of the update interval.
    pub fn maybe_update_targets(&mut self) -> bool {
        let k = self.config.target_update_interval;
        if self.step_counter > 0 && self.step_counter.is_multiple_of(k) {
            self.target = self.online.clone_into_target();
            true
        } else {
            false
        }
    }

    /// Shifts the critic's output bias by `offset` (online and target) so the
    /// first value estimates are optimistic. Only valid before training.
    pub fn optimistic_init(&mut self, offset: f64) -> Result<()> {
        if self.step_counter != 0 || self.online.critic.adam().step() != 0 {
            return Err(Error::State("optimistic init after training began".into()));
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite("optimistic offset".into()));
        }
        for net in [&mut self.online.critic, &mut self.target.critic] {
            let bias = net
                .output_bias_mut()
                .ok_or_else(|| Error::State("critic has no output bias".into()))?;
            for b in bias {
                *b += offset;
            }
        }
        Ok(())
    }

    /// One training step on `batch`: critic and actor updates in the
    /// algorithm's order, then the step counter advances and targets refresh
    /// on schedule.
    pub fn train_step<T: Borrow<Transition>>(
        &mut self,
        batch: &[T],
        rng: &mut impl Rng,
    ) -> Result<StepStats> {
        let mut stats = StepStats::default();
        match self.algorithm {
            Algorithm::Cacla => {
                // TD errors must come from the critic before its update.
                stats.actor_rows = self.train_actor_cacla(batch)?;
                stats.critic_loss = self.train_critic(batch)?;
            }
            Algorithm::Dpg => {
                stats.critic_loss = self.train_critic(batch)?;
                stats.mean_q = Some(self.train_actor_dpg(batch)?);
                stats.actor_rows = batch.len();
            }
            Algorithm::Spg => {
                stats.critic_loss = self.train_critic(batch)?;
                stats.actor_rows = self.train_actor_spg(batch, rng)?;
            }
        }
        self.step_counter += 1;
        stats.targets_updated = self.maybe_update_targets();
        Ok(stats)
    }

    /// Advances the step counter without training. Used by tests to walk the
    /// target-update schedule.
    pub fn advance_steps(&mut self, n: u64) -> bool {
        let mut copied = false;
        for _ in 0..n {
            self.step_counter += 1;
            copied |= self.maybe_update_targets();
        }
        copied
    }
}
