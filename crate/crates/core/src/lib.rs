//! Attention-aware highlighting for multi-drone oversight.
//!
//! The crate simulates four drones ([`world`]), a user's gaze over the
//! dashboard ([`attention`]) and the user's belief about what they saw
//! ([`env`]), and trains a highlighting policy with PPO ([`ppo`], [`nn`]).
//! [`eval`] holds the baseline policies and evaluation harness, and
//! [`session`] the live session logic used by the dashboard server.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod checkpoint;
pub mod env;
pub mod error;
pub mod eval;
pub mod files;
pub mod layout;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod session;
pub mod world;

pub use attention::{AttentionModel, AttentionParams, GazeDistribution, InterfaceFrame};
pub use checkpoint::{PolicyCheckpoint, TrainConfig};
pub use env::{EnvState, HighlightAction, HighlightState, Observation, OversightEnv, RewardConfig, UserBeliefState};
pub use error::{Error, Result};
pub use layout::{Attr, DroneId, Pair, N_ATTRS, N_DRONES, N_PAIRS};
pub use ppo::{PolicyHead, PpoConfig};
pub use world::{AttributeState, ScenarioScript};
