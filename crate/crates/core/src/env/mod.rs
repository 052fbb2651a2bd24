//! Environments behind a small gym-style interface.

pub mod agar;
pub mod pointmass;
mod trace;

pub use agar::{AgarConfig, AgarEnv, AgarWorld, ObservationKind, Pellet};
pub use pointmass::{PointMassConfig, PointMassEnv, PointMassState};
pub use trace::{Trace, TraceRecord};

use crate::error::{Result, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Action squashing range an environment expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionBounds {
    /// `[0, 1]` per component, produced by a sigmoid head.
    Unit,
    /// `[-1, 1]` per component, produced by a tanh head.
    Symmetric,
}

impl ActionBounds {
    pub fn low(self) -> f64 {
        match self {
            ActionBounds::Unit => 0.0,
            ActionBounds::Symmetric => -1.0,
        }
    }

    pub fn high(self) -> f64 {
        1.0
    }

    pub fn clamp(self, v: f64) -> f64 {
        v.clamp(self.low(), self.high())
    }
}

pub trait Environment: Send {
    fn observation_shape(&self) -> Shape;
    fn action_len(&self) -> usize;
    fn action_bounds(&self) -> ActionBounds;
    /// Transitions per episode.
    fn episode_length(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    /// Player mass, for environments that have one.
    fn mass(&self) -> Option<f64> {
        None
    }
    /// Snapshot of the state columns for trace export, taken after a step.
    fn trace_record(&self, action: &[f64], reward: f64) -> TraceRecord;
    fn trace_header(&self) -> Vec<String>;
}
