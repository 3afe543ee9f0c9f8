//! Trainable parameters, Adam, and global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// First/second moment buffers and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
    pub adam: AdamState<S>,
}

impl<S: Scalar> Parameter<S> {
    fn new(name: String, value: Tensor<S>) -> Self {
        let n = value.numel();
        Parameter {
            name,
            grad: Tensor::zeros(value.shape().to_vec()),
            value,
            adam: AdamState {
                m: vec![S::zero(); n],
                v: vec![S::zero(); n],
                step: 0,
            },
        }
    }
}

/// Ordered, named parameter collection owned by one model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<S>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<S>> {
        self.params.iter_mut()
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = S::zero());
        }
    }

    pub fn global_grad_norm(&self) -> S {
        self.params
            .iter()
            .map(|p| p.grad.squared_norm())
            .sum::<S>()
            .sqrt()
    }

    /// Copies of all parameter values, in store order.
    pub fn snapshot(&self) -> Vec<Tensor<S>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<S>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            assert_eq!(p.value.shape(), v.shape());
            p.value = v.clone();
        }
    }
}

/// Scales all gradients by `max_norm / g` when the global L2 norm `g`
/// exceeds `max_norm`. Returns the scale applied.
pub fn clip_global_norm<S: Scalar>(store: &mut ParamStore<S>, max_norm: S) -> S {
    let norm = store.global_grad_norm();
    if norm <= max_norm || norm == S::zero() {
        return S::one();
    }
    let scale = max_norm / norm;
    for p in store.iter_mut() {
        p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
    }
    scale
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of every parameter, then zeroes gradients.
    pub fn step<S: Scalar>(&self, store: &mut ParamStore<S>) -> Result<()> {
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let (lr, eps) = (S::of(self.lr), S::of(self.eps));
        for p in store.iter_mut() {
            p.adam.step += 1;
            let t = p.adam.step as i32;
            let c1 = S::one() - b1.powi(t);
            let c2 = S::one() - b2.powi(t);
            let values = p.value.data_mut();
            let grads = p.grad.data_mut();
            for i in 0..values.len() {
                let g = grads[i];
                let m = b1 * p.adam.m[i] + (S::one() - b1) * g;
                let v = b2 * p.adam.v[i] + (S::one() - b2) * g * g;
                p.adam.m[i] = m;
                p.adam.v[i] = v;
                let update = lr * (m / c1) / ((v / c2).sqrt() + eps);
                if !update.is_finite() {
                    return Err(Error::NonFinite {
                        op: format!("adam update of {}", p.name),
                    });
                }
                values[i] -= update;
                grads[i] = S::zero();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(value: f64, grad: f64) -> (ParamStore<f64>, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::scalar(value));
        store.get_mut(id).grad = Tensor::scalar(grad);
        (store, id)
    }

    #[test]
    fn zero_gradient_is_a_null_update() {
        let (mut fresh, id) = scalar_store(0.5, 0.0);
        Adam::new(0.1).step(&mut fresh).unwrap();
        assert_eq!(fresh.value(id).item(), 0.5);
        assert_eq!(fresh.get(id).adam.step, 1);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let (mut store, id) = scalar_store(0.5, 1.0);
        let adam = Adam::new(0.1);
        adam.step(&mut store).unwrap();
        let (m1, v1) = (store.get(id).adam.m[0], store.get(id).adam.v[0]);
        adam.step(&mut store).unwrap();
        let p = store.get(id);
        assert!((p.adam.m[0] - 0.9 * m1).abs() < 1e-15);
        assert!((p.adam.v[0] - 0.999 * v1).abs() < 1e-15);
        assert_eq!(p.adam.step, 2);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m = 0.1, v = 0.001; bias-corrected m̂ = 1, v̂ = 1 -> Δ = lr / (1 + ε)
        let (mut store, id) = scalar_store(0.0, 1.0);
        Adam::new(0.1).step(&mut store).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((store.value(id).item() - expected).abs() < 1e-12);
        assert_eq!(store.get(id).grad.item(), 0.0);
    }

    #[test]
    fn non_finite_update_aborts() {
        let (mut store, _) = scalar_store(0.0, f64::NAN);
        assert!(Adam::new(0.1).step(&mut store).is_err());
    }

    #[test]
    fn clipping() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add("a", Tensor::zeros([2]));
        store.get_mut(a).grad = Tensor::new([2], vec![6.0, 8.0]).unwrap();
        let scale = clip_global_norm(&mut store, 1.0);
        assert!((scale - 0.1).abs() < 1e-15);
        assert!((store.global_grad_norm() - 1.0).abs() < 1e-12);

        store.get_mut(a).grad = Tensor::new([2], vec![0.3, 0.4]).unwrap();
        assert_eq!(clip_global_norm(&mut store, 1.0), 1.0);
        assert_eq!(store.get(a).grad.data(), &[0.3, 0.4]);
    }
}
