use crate::error::Result;
use crate::nn::adam::AdamState;
use crate::nn::{Gradients, Network};

/// A convolutional trunk shared by an actor head and a critic head.
///
/// The parameters exist once. Updates arriving through the actor path use the
/// trunk network's own Adam state; updates through the critic path use
/// `critic_adam`, so each head keeps its own moment estimates for the shared
/// weights while mutating the same parameter set.
#[derive(Debug, Clone)]
pub struct SharedTrunk {
    pub net: Network,
    critic_adam: AdamState,
}

impl SharedTrunk {
    pub fn new(net: Network) -> Self {
        let critic_adam = net.fresh_adam_state();
        SharedTrunk { net, critic_adam }
    }

    pub fn feature_len(&self) -> usize {
        self.net.output_len()
    }

    pub fn actor_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        self.net.adam_step(grads, lr)
    }

    pub fn critic_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        self.net.adam_step_with(&mut self.critic_adam, grads, lr)
    }

    pub fn clone_into_target(&self) -> SharedTrunk {
        SharedTrunk::new(self.net.clone_into_target())
    }

    /// Distinct parameters of trunk plus both heads, trunk counted once.
    pub fn param_count_with(&self, actor_head: &Network, critic_head: &Network) -> usize {
        self.net.param_count() + actor_head.param_count() + critic_head.param_count()
    }
}
