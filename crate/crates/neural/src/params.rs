//! Named parameter storage and the Adam optimiser.

use std::collections::HashMap;

use crate::error::{NeuralError, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    m: Tensor<T>,
    v: Tensor<T>,
}

/// Trainable tensors plus Adam moment buffers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, ParamId>,
    step: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NeuralError::DuplicateParam(name));
        }
        let [r, c] = value.shape();
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            value,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| NeuralError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step_count(&mut self, step: u64) {
        self.step = step;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Places every parameter on the tape as a gradient-receiving leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        let vars = self.params.iter().map(|p| tape.variable(p.value.clone())).collect();
        Bound { vars }
    }

    /// Places every parameter on the tape as a constant (inference).
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> Bound {
        let vars = self.params.iter().map(|p| tape.constant(p.value.clone())).collect();
        Bound { vars }
    }

    /// Zero-filled gradient buffers matching every parameter.
    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params
            .iter()
            .map(|p| {
                let [r, c] = p.value.shape();
                Tensor::zeros(r, c)
            })
            .collect()
    }
}

/// Tape handles for a bound [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Handles in parameter registration order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients for every parameter, zero where the loss did not reach it.
    pub fn collect<T: Scalar>(&self, grads: &mut Gradients<T>, store: &ParamStore<T>) -> Vec<Tensor<T>> {
        self.vars
            .iter()
            .zip(&store.params)
            .map(|(v, p)| {
                grads.take(*v).unwrap_or_else(|| {
                    let [r, c] = p.value.shape();
                    Tensor::zeros(r, c)
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NeuralError::Shape(format!("invalid Adam config {self:?}")))
        }
    }
}

/// Global L2 norm of a gradient set.
pub fn global_norm<T: Scalar>(grads: &[Tensor<T>]) -> T {
    grads.iter().map(|g| g.sum_squares()).sum::<T>().sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let norm = global_norm(grads);
    if norm > max_norm && norm > T::zero() {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_assign(k);
        }
    }
    norm
}

/// One bias-corrected Adam update. Non-finite gradients abort before any parameter changes.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, grads: &[Tensor<T>], cfg: &AdamConfig) -> Result<()> {
    if grads.len() != store.params.len() {
        return Err(NeuralError::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            store.params.len()
        )));
    }
    for (p, g) in store.params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return Err(NeuralError::Shape(format!("gradient for `{}`", p.name)));
        }
        if !g.is_finite() {
            return Err(NeuralError::NonFinite(format!("gradient of `{}`", p.name)));
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    for (p, g) in store.params.iter_mut().zip(grads) {
        let Param { value, m, v, .. } = p;
        for (((w, mi), vi), gi) in value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *mi = b1 * *mi + (T::one() - b1) * *gi;
            *vi = b2 * *vi + (T::one() - b2) * *gi * *gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *w = *w - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap())
            .unwrap();
        s
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = store();
        assert!(matches!(
            s.add("w", Tensor::zeros(1, 1)),
            Err(NeuralError::DuplicateParam(_))
        ));
    }

    #[test]
    fn first_step_moves_each_coordinate_by_about_lr() {
        let mut s = store();
        let before = s.get(ParamId(0)).clone();
        let g = vec![Tensor::from_vec(1, 3, vec![0.3, -4.0, 1e-3]).unwrap()];
        let cfg = AdamConfig::default();
        adam_step(&mut s, &g, &cfg).unwrap();
        for (i, gi) in g[0].data().iter().enumerate() {
            let delta = before.data()[i] - s.get(ParamId(0)).data()[i];
            let expect = cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((delta - expect).abs() < 1e-15, "{delta} vs {expect}");
            assert!((delta.abs() - cfg.lr).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store();
        let before = s.get(ParamId(0)).clone();
        let g = s.zero_grads();
        adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        assert_eq!(s.get(ParamId(0)), &before);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store();
        let g = vec![Tensor::from_vec(1, 3, vec![0.0, f64::NAN, 0.0]).unwrap()];
        let err = adam_step(&mut s, &g, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = vec![Tensor::<f64>::from_vec(1, 2, vec![3.0, 4.0]).unwrap()];
        let n = clip_global_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-12);
    }
}
