//! Conversational recommendation over a per-user memory graph.
//!
//! The crate builds a typed graph from a scenario (user, candidates,
//! history), updates it from the user's structured turns, and asks a policy
//! which act to play next. Policies range from simple baselines to a
//! relational graph-convolution model trained on simulated dialogs.

pub mod agents;
pub mod catalog;
pub mod dialog;
pub mod error;
pub mod eval;
pub mod ids;
pub mod jsonl;
pub mod memgraph;
pub mod service;
pub mod simulator;
pub mod umgr;

pub use error::{Error, Result};
pub use ids::{ItemId, SlotId, ValueId};

pub type Umgr64 = umgr::UmgrModel<f64>;
pub type Umgr32 = umgr::UmgrModel<f32>;
