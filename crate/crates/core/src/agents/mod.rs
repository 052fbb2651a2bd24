//! CACLA, DPG and SPG on shared actor-critic scaffolding.

mod bundle;
pub mod checkpoint;
pub mod model;
pub mod noise;

pub use bundle::{spg_select, AgentBundle, AgentConfig, Algorithm, SpgChoice, StepStats};
pub use checkpoint::AgentCheckpoint;
pub use model::{perturb, ActorCritic, Architecture, CriticKind, PathGrads, Policy};
pub use noise::NoiseSchedule;
