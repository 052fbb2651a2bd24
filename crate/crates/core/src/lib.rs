//! Continuous-action actor-critic laboratory.
//!
//! Everything is built from scratch on `f64`: a small network engine
//! ([`nn`]), a pellet-collection arena and a point-mass task ([`env`]), the
//! CACLA / DPG / SPG learners ([`agents`]), experience replay ([`replay`]),
//! synchronized on-policy workers ([`parallel`]) and the experiment driver
//! ([`harness`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod parallel;
pub mod replay;

pub use error::{Error, Result, Shape};
pub use replay::{ReplayBuffer, Transition};
