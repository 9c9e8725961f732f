//! Central-difference oracle for tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NeuralError, Result};
use crate::params::{Bound, ParamStore};
use crate::tape::{Tape, Var};
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates sampled per tensor (all of them when the tensor is smaller).
    pub coords_per_tensor: usize,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            coords_per_tensor: 32,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter holding the worst coordinate.
    pub worst_param: String,
    pub coords_checked: usize,
}

/// Compares reverse-mode gradients of `f` with `(f(θ+εe) − f(θ−εe)) / 2ε`.
///
/// `f` must build its loss on the given tape from the bound parameters and be
/// a pure function of them.
pub fn grad_check<T, F>(store: &ParamStore<T>, f: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &Bound) -> Var,
{
    let eval = |s: &ParamStore<T>| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = s.bind_frozen(&mut tape);
        let loss = f(&mut tape, &bound);
        let v = tape.value(loss).item().as_f64();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NeuralError::NonFinite("loss".into()))
        }
    };

    let mut tape = Tape::new();
    let bound = store.bind(&mut tape);
    let loss = f(&mut tape, &bound);
    if !tape.value(loss).is_finite() {
        return Err(NeuralError::NonFinite("loss".into()));
    }
    let mut grads = tape.backward(loss);
    let analytic = bound.collect(&mut grads, store);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        coords_checked: 0,
    };
    for id in store.ids() {
        let n = store.get(id).len();
        let coords: Vec<usize> = if n <= cfg.coords_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut rng, n, cfg.coords_per_tensor).into_vec()
        };
        for c in coords {
            let orig = store.get(id).data()[c];
            probe.get_mut(id).data_mut()[c] = orig + T::lit(cfg.eps);
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[c] = orig - T::lit(cfg.eps);
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[c] = orig;

            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let a = analytic[id.index()].data()[c].as_f64();
            if !a.is_finite() {
                return Err(NeuralError::NonFinite(format!("gradient of `{}`", store.name(id))));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.coords_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_param = store.name(id).to_string();
            }
        }
    }
    Ok(report)
}
