//! Minibatch training on supervised decision points.

use memrex_neural::{adam_step, clip_global_norm, AdamConfig, Scalar, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labels::Example;
use super::model::{Batch, UmgrModel};
use crate::error::{Error, Result};
use crate::ids::mix_seed;

/// Losses as mean per-batch values: act, item, slot, value, total.
pub type LossBreakdown = [f64; 5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_examples: usize,
    pub steps: usize,
    pub initial: LossBreakdown,
    pub epochs: Vec<LossBreakdown>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map(|e| e[4]).unwrap_or(self.initial[4])
    }
}

fn batch_of<'a>(examples: impl Iterator<Item = &'a Example>, negatives: bool) -> Batch {
    let ex: Vec<&Example> = examples.collect();
    let inputs: Vec<_> = ex.iter().map(|e| &e.input).collect();
    let targets: Vec<_> = ex.iter().map(|e| e.targets).collect();
    Batch::new(&inputs, Some(&targets), negatives)
}

fn breakdown<T: Scalar>(tape: &Tape<T>, l: &super::model::LossVars) -> LossBreakdown {
    let mut out = [0.0; 5];
    for k in 0..4 {
        out[k] = tape.value(l.terms[k]).item().as_f64();
    }
    out[4] = tape.value(l.total).item().as_f64();
    out
}

fn accumulate(sum: &mut LossBreakdown, x: &LossBreakdown, n: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training(format!("non-finite loss {x:?}")));
    }
    for k in 0..5 {
        sum[k] += x[k] / n as f64;
    }
    Ok(())
}

/// Mean loss over fixed-order batches, without updating anything.
pub fn evaluate_loss<T: Scalar>(model: &UmgrModel<T>, examples: &[Example]) -> Result<LossBreakdown> {
    if examples.is_empty() {
        return Err(Error::Training("no examples".into()));
    }
    let chunks: Vec<_> = examples.chunks(model.config.batch_size).collect();
    let mut sum = [0.0; 5];
    for c in &chunks {
        let batch = batch_of(c.iter(), model.config.negatives_on_free_turns);
        let mut tape = Tape::new();
        let b = model.params.bind_frozen(&mut tape);
        let l = model.loss(&mut tape, &b, &batch);
        accumulate(&mut sum, &breakdown(&tape, &l), chunks.len())?;
    }
    Ok(sum)
}

/// Adam with global-norm clipping; the shuffle of each epoch depends only on
/// the config seed, so identical inputs give identical parameters.
pub fn train_umgr<T: Scalar>(model: &mut UmgrModel<T>, examples: &[Example]) -> Result<TrainReport> {
    train_umgr_with(model, examples, |_, _| {})
}

/// As [`train_umgr`], calling `on_epoch(epoch, losses)` after each epoch.
pub fn train_umgr_with<T: Scalar>(
    model: &mut UmgrModel<T>,
    examples: &[Example],
    mut on_epoch: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainReport> {
    if examples.is_empty() {
        return Err(Error::Training("corpus has no agent turns".into()));
    }
    let cfg = model.config.clone();
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let initial = evaluate_loss(model, examples)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport {
        n_examples: examples.len(),
        steps: 0,
        initial,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1000 + epoch as u64));
        order.shuffle(&mut rng);
        let chunks: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut sum = [0.0; 5];
        for c in &chunks {
            let batch = batch_of(c.iter().map(|i| &examples[*i]), cfg.negatives_on_free_turns);
            let mut tape = Tape::new();
            let b = model.params.bind(&mut tape);
            let l = model.loss(&mut tape, &b, &batch);
            accumulate(&mut sum, &breakdown(&tape, &l), chunks.len())?;
            let mut g = tape.backward(l.total);
            let mut grads = b.collect(&mut g, &model.params);
            clip_global_norm(&mut grads, T::lit(cfg.clip_norm));
            adam_step(&mut model.params, &grads, &adam)?;
            report.steps += 1;
        }
        on_epoch(epoch, &sum);
        report.epochs.push(sum);
    }
    Ok(report)
}
