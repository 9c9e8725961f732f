use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How much of the dialog's act history reaches the context encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActHistoryMode {
    Full,
    /// Only the most recent user act.
    LastUserOnly,
    /// No act encoder; the context vector is zero.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmgrConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub max_acts: usize,
    /// Weights of the act, item, slot and value terms.
    pub loss_weights: [f64; 4],
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub clip_norm: f64,
    /// Turns whose act has no argument of a type still train that type's
    /// head with all-negative targets; when false the term is skipped.
    pub negatives_on_free_turns: bool,
    pub act_history: ActHistoryMode,
    /// Train and act on the initial graph, ignoring in-dialog updates.
    pub static_graph: bool,
}

impl UmgrConfig {
    pub fn paper() -> Self {
        Self {
            n_layers: 5,
            hidden: 384,
            max_acts: 10,
            loss_weights: [1.0, 10.0, 10.0, 100.0],
            batch_size: 160,
            epochs: 20,
            seed: 0,
            lr: 1e-3,
            clip_norm: 5.0,
            negatives_on_free_turns: true,
            act_history: ActHistoryMode::Full,
            static_graph: false,
        }
    }

    pub fn desk() -> Self {
        Self {
            n_layers: 2,
            hidden: 64,
            batch_size: 32,
            epochs: 8,
            ..Self::paper()
        }
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_layers < 1 {
            return bad("n_layers must be at least 1");
        }
        if self.hidden < 4 {
            return bad("hidden must be at least 4");
        }
        if self.max_acts < 1 {
            return bad("max_acts must be at least 1");
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.loss_weights.iter().all(|w| positive(*w)) {
            return bad("loss weights must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !positive(self.lr) || !positive(self.clip_norm) {
            return bad("lr and clip_norm must be positive");
        }
        Ok(())
    }
}

impl Default for UmgrConfig {
    fn default() -> Self {
        Self::desk()
    }
}
