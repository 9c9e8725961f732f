//! The trainable graph-reasoning policy.

mod agent;
pub mod config;
pub mod labels;
pub mod model;
pub mod train;

pub use agent::UmgrAgent;
pub use config::{ActHistoryMode, Profile, UmgrConfig};
pub use labels::{build_examples, derive_labels, labelled_turns, Example, LabelledTurn};
pub use model::{context_tokens, Batch, GraphInput, LabelTargets, UmgrModel};
pub use train::{evaluate_loss, train_umgr, train_umgr_with, LossBreakdown, TrainReport};
