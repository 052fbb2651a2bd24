//! Actor/critic network pair, optionally sharing a convolutional trunk.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::ActionBounds;
use crate::error::{Error, Result, Shape};
use crate::nn::{Gradients, LayerSpec, Network, SharedTrunk};

pub const HIDDEN_UNITS: usize = 100;

/// Whether the critic scores states (`V(s)`) or state-action pairs (`Q(s,a)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    State,
    StateAction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    /// `obs -> 100 -> 100 -> out` ReLU MLPs for both networks.
    Mlp {
        obs_len: usize,
        action_len: usize,
        bounds: ActionBounds,
    },
    /// Shared `conv(1->32, k8, s4) -> conv(32->64, k4, s2)` trunk with
    /// `100 -> 100` dense heads. The Q-critic head receives the action
    /// appended to the flattened trunk output.
    Pixel {
        side: usize,
        action_len: usize,
        bounds: ActionBounds,
    },
}

impl Architecture {
    pub fn bounds(&self) -> ActionBounds {
        match self {
            Architecture::Mlp { bounds, .. } | Architecture::Pixel { bounds, .. } => *bounds,
        }
    }

    pub fn action_len(&self) -> usize {
        match self {
            Architecture::Mlp { action_len, .. } | Architecture::Pixel { action_len, .. } => {
                *action_len
            }
        }
    }

    pub fn observation_shape(&self) -> Shape {
        match *self {
            Architecture::Mlp { obs_len, .. } => Shape::Flat(obs_len),
            Architecture::Pixel { side, .. } => Shape::Image { channels: 1, side },
        }
    }

    pub fn trunk_specs() -> [LayerSpec; 4] {
        [
            LayerSpec::conv2d(1, 32, 8, 4),
            LayerSpec::Relu,
            LayerSpec::conv2d(32, 64, 4, 2),
            LayerSpec::Relu,
        ]
    }

    pub fn head_specs(inputs: usize, outputs: usize, squash: LayerSpec) -> Vec<LayerSpec> {
        vec![
            LayerSpec::dense(inputs, HIDDEN_UNITS),
            LayerSpec::Relu,
            LayerSpec::dense(HIDDEN_UNITS, HIDDEN_UNITS),
            LayerSpec::Relu,
            LayerSpec::dense(HIDDEN_UNITS, outputs),
            squash,
        ]
    }
}

fn squash_spec(bounds: ActionBounds) -> LayerSpec {
    match bounds {
        ActionBounds::Unit => LayerSpec::Sigmoid,
        ActionBounds::Symmetric => LayerSpec::Tanh,
    }
}

/// Gradients for one path: the head network and, when shared, the trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrads {
    pub trunk: Option<Gradients>,
    pub head: Gradients,
}

impl PathGrads {
    pub fn scale(&mut self, factor: f64) {
        if let Some(t) = &mut self.trunk {
            t.scale(factor);
        }
        self.head.scale(factor);
    }
}

/// Actor and critic networks, optionally on top of a shared trunk.
///
/// `*_forward` calls cache activations in the trunk as well as the head, so a
/// `*_backward` must follow the matching forward on the same observation.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub trunk: Option<SharedTrunk>,
    pub actor: Network,
    pub critic: Network,
    pub critic_kind: CriticKind,
    pub bounds: ActionBounds,
}

impl ActorCritic {
    pub fn build(arch: &Architecture, critic_kind: CriticKind, rng: &mut impl Rng) -> Result<Self> {
        let action_len = arch.action_len();
        let bounds = arch.bounds();
        let action_in = match critic_kind {
            CriticKind::State => 0,
            CriticKind::StateAction => action_len,
        };
        match *arch {
            Architecture::Mlp { obs_len, .. } => Ok(ActorCritic {
                trunk: None,
                actor: Network::new(
                    Shape::Flat(obs_len),
                    &Architecture::head_specs(obs_len, action_len, squash_spec(bounds)),
                    rng,
                )?,
                critic: Network::new(
                    Shape::Flat(obs_len + action_in),
                    &Architecture::head_specs(obs_len + action_in, 1, LayerSpec::Linear),
                    rng,
                )?,
                critic_kind,
                bounds,
            }),
            Architecture::Pixel { side, .. } => {
                let trunk = Network::new(
                    Shape::Image { channels: 1, side },
                    &Architecture::trunk_specs(),
                    rng,
                )?;
                let features = trunk.output_len();
                Ok(ActorCritic {
                    trunk: Some(SharedTrunk::new(trunk)),
                    actor: Network::new(
                        Shape::Flat(features),
                        &Architecture::head_specs(features, action_len, squash_spec(bounds)),
                        rng,
                    )?,
                    critic: Network::new(
                        Shape::Flat(features + action_in),
                        &Architecture::head_specs(features + action_in, 1, LayerSpec::Linear),
                        rng,
                    )?,
                    critic_kind,
                    bounds,
                })
            }
        }
    }

    /// Assembles an agent from existing networks, checking that they fit together.
    pub fn from_parts(
        trunk: Option<Network>,
        actor: Network,
        critic: Network,
        critic_kind: CriticKind,
        bounds: ActionBounds,
    ) -> Result<Self> {
        let features = match &trunk {
            Some(t) => t.output_len(),
            None => actor.input_len(),
        };
        let action_in = match critic_kind {
            CriticKind::State => 0,
            CriticKind::StateAction => actor.output_len(),
        };
        if actor.input_len() != features {
            return Err(Error::shape(Shape::Flat(features), actor.input_shape()));
        }
        if critic.input_len() != features + action_in {
            return Err(Error::shape(
                Shape::Flat(features + action_in),
                critic.input_shape(),
            ));
        }
        if critic.output_len() != 1 {
            return Err(Error::shape(
                Shape::Flat(1),
                Shape::Flat(critic.output_len()),
            ));
        }
        Ok(ActorCritic {
            trunk: trunk.map(SharedTrunk::new),
            actor,
            critic,
            critic_kind,
            bounds,
        })
    }

    pub fn observation_shape(&self) -> Shape {
        match &self.trunk {
            Some(t) => t.net.input_shape(),
            None => self.actor.input_shape(),
        }
    }

    pub fn action_len(&self) -> usize {
        self.actor.output_len()
    }

    pub fn actor_param_count(&self) -> usize {
        self.trunk.as_ref().map_or(0, |t| t.net.param_count()) + self.actor.param_count()
    }

    pub fn critic_param_count(&self) -> usize {
        self.trunk.as_ref().map_or(0, |t| t.net.param_count()) + self.critic.param_count()
    }

    /// Parameters of actor and critic with the shared trunk counted once.
    pub fn distinct_param_count(&self) -> usize {
        match &self.trunk {
            Some(t) => t.param_count_with(&self.actor, &self.critic),
            None => self.actor.param_count() + self.critic.param_count(),
        }
    }

    pub fn clone_into_target(&self) -> ActorCritic {
        ActorCritic {
            trunk: self.trunk.as_ref().map(SharedTrunk::clone_into_target),
            actor: self.actor.clone_into_target(),
            critic: self.critic.clone_into_target(),
            critic_kind: self.critic_kind,
            bounds: self.bounds,
        }
    }

    pub fn copy_params_from(&mut self, other: &ActorCritic) -> Result<()> {
        match (&mut self.trunk, &other.trunk) {
            (Some(dst), Some(src)) => dst.net.copy_params_from(&src.net)?,
            (None, None) => {}
            _ => return Err(Error::State("trunk layout differs".into())),
        }
        self.actor.copy_params_from(&other.actor)?;
        self.critic.copy_params_from(&other.critic)
    }

    fn features(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match &self.trunk {
            Some(t) => t.net.predict(obs),
            None => {
                if obs.len() != self.actor.input_len() {
                    return Err(Error::shape(
                        self.actor.input_shape(),
                        Shape::Flat(obs.len()),
                    ));
                }
                Ok(obs.to_vec())
            }
        }
    }

    fn features_cached(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        match &mut self.trunk {
            Some(t) => t.net.forward(obs),
            None => self.features(obs),
        }
    }

    fn critic_input(&self, mut features: Vec<f64>, action: Option<&[f64]>) -> Result<Vec<f64>> {
        match (self.critic_kind, action) {
            (CriticKind::State, _) => {}
            (CriticKind::StateAction, Some(a)) => {
                if a.len() != self.action_len() {
                    return Err(Error::shape(
                        Shape::Flat(self.action_len()),
                        Shape::Flat(a.len()),
                    ));
                }
                features.extend_from_slice(a);
            }
            (CriticKind::StateAction, None) => {
                return Err(Error::State("Q-critic needs an action".into()));
            }
        }
        Ok(features)
    }

    /// Deterministic policy output `pi(s)`.
    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(&self.features(obs)?)
    }

    /// Critic estimate `V(s)` or `Q(s, a)`.
    pub fn value(&self, obs: &[f64], action: Option<&[f64]>) -> Result<f64> {
        let input = self.critic_input(self.features(obs)?, action)?;
        Ok(self.critic.predict(&input)?[0])
    }

    /// `Q(s, a)` for several actions, evaluating the trunk once.
    pub fn values_for_actions(&self, obs: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        let features = self.features(obs)?;
        actions
            .iter()
            .map(|a| {
                let input = self.critic_input(features.clone(), Some(a))?;
                Ok(self.critic.predict(&input)?[0])
            })
            .collect()
    }

    pub fn actor_forward(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let f = self.features_cached(obs)?;
        self.actor.forward(&f)
    }

    pub fn critic_forward(&mut self, obs: &[f64], action: Option<&[f64]>) -> Result<f64> {
        let f = self.features_cached(obs)?;
        let input = self.critic_input(f, action)?;
        Ok(self.critic.forward(&input)?[0])
    }

    pub fn zero_actor_grads(&self) -> PathGrads {
        PathGrads {
            trunk: self.trunk.as_ref().map(|t| t.net.zero_grads()),
            head: self.actor.zero_grads(),
        }
    }

    pub fn zero_critic_grads(&self) -> PathGrads {
        PathGrads {
            trunk: self.trunk.as_ref().map(|t| t.net.zero_grads()),
            head: self.critic.zero_grads(),
        }
    }

    fn trunk_backward(&self, grad_features: &[f64], acc: Option<&mut PathGrads>) -> Result<()> {
        if let (Some(t), Some(acc)) = (&self.trunk, acc) {
            t.net.backward_into(grad_features, acc.trunk.as_mut())?;
        }
        Ok(())
    }

    /// Backprop of `dL/dpi(s)` after [`ActorCritic::actor_forward`].
    pub fn actor_backward(
        &self,
        grad_action: &[f64],
        mut acc: Option<&mut PathGrads>,
    ) -> Result<()> {
        let g = self
            .actor
            .backward_into(grad_action, acc.as_deref_mut().map(|a| &mut a.head))?;
        self.trunk_backward(&g, acc)
    }

    /// Backprop of `dL/dQ` after [`ActorCritic::critic_forward`]. Returns the
    /// gradient with respect to the action input (empty for a V-critic).
    pub fn critic_backward(
        &self,
        grad_value: f64,
        mut acc: Option<&mut PathGrads>,
    ) -> Result<Vec<f64>> {
        let g = self
            .critic
            .backward_into(&[grad_value], acc.as_deref_mut().map(|a| &mut a.head))?;
        let features = g.len()
            - match self.critic_kind {
                CriticKind::State => 0,
                CriticKind::StateAction => self.action_len(),
            };
        self.trunk_backward(&g[..features], acc)?;
        Ok(g[features..].to_vec())
    }

    pub fn apply_actor(&mut self, grads: &PathGrads, lr: f64) -> Result<()> {
        self.actor.adam_step(&grads.head, lr)?;
        if let (Some(t), Some(g)) = (&mut self.trunk, &grads.trunk) {
            t.actor_step(g, lr)?;
        }
        Ok(())
    }

    pub fn apply_critic(&mut self, grads: &PathGrads, lr: f64) -> Result<()> {
        self.critic.adam_step(&grads.head, lr)?;
        if let (Some(t), Some(g)) = (&mut self.trunk, &grads.trunk) {
            t.critic_step(g, lr)?;
        }
        Ok(())
    }

    pub fn policy_snapshot(&self) -> Policy {
        Policy {
            trunk: self.trunk.as_ref().map(|t| t.net.clone_into_target()),
            head: self.actor.clone_into_target(),
            bounds: self.bounds,
        }
    }
}

/// Adds `N(0, sd^2)` noise to each component and clamps to `bounds`. With
/// `sd == 0` the input is returned unchanged and no randomness is drawn.
pub fn perturb(action: &[f64], sd: f64, bounds: ActionBounds, rng: &mut impl Rng) -> Vec<f64> {
    if sd == 0.0 {
        return action.to_vec();
    }
    action
        .iter()
        .map(|&a| {
            let z: f64 = StandardNormal.sample(rng);
            bounds.clamp(a + sd * z)
        })
        .collect()
}

/// Frozen copy of the actor path used by rollout workers.
#[derive(Debug, Clone)]
pub struct Policy {
    trunk: Option<Network>,
    head: Network,
    bounds: ActionBounds,
}

impl Policy {
    pub fn predict(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match &self.trunk {
            Some(t) => self.head.predict(&t.predict(obs)?),
            None => self.head.predict(obs),
        }
    }

    pub fn act(&self, obs: &[f64], sd: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
        Ok(perturb(&self.predict(obs)?, sd, self.bounds, rng))
    }

    pub fn sync_from(&mut self, source: &ActorCritic) -> Result<()> {
        match (&mut self.trunk, &source.trunk) {
            (Some(dst), Some(src)) => dst.copy_params_from(&src.net)?,
            (None, None) => {}
            _ => return Err(Error::State("trunk layout differs".into())),
        }
        self.head.copy_params_from(&source.actor)
    }

    pub fn param_hash(&self) -> u64 {
        let trunk = self.trunk.as_ref().map_or(0, Network::param_hash);
        trunk.rotate_left(17) ^ self.head.param_hash()
    }
}
