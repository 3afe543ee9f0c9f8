//! Parameter registration and random initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AttentionParams, ClassifierHead, FeedForward, GatEncoder, ModelKind, ModelSpec};
use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::scalar::Scalar;

/// Standard deviation of CLS, layer codes and biases.
pub const TOKEN_INIT_STD: f64 = 0.02;

pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub(crate) fn new(seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub(crate) fn xavier<S: Scalar>(&mut self, store: &mut ParamStore<S>, name: &str, fan_in: usize, fan_out: usize) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| S::of(self.rng.random_range(-bound..bound)))
            .collect();
        store.add(name, Tensor::new([fan_in, fan_out], data).expect("shape"))
    }

    pub(crate) fn normal<S: Scalar>(&mut self, store: &mut ParamStore<S>, name: &str, shape: &[usize], std: f64) -> ParamId {
        let dist = Normal::new(0.0, std).expect("positive std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| S::of(dist.sample(&mut self.rng))).collect();
        store.add(name, Tensor::new(shape.to_vec(), data).expect("shape"))
    }
}

/// Handles of every parameter of a model, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub attention: AttentionParams,
    pub head: ClassifierHead,
    /// Empty for Trans-SLE.
    pub encoders: Vec<GatEncoder>,
    pub node_features: Option<ParamId>,
}

/// Builds and initializes the parameters for `spec`, deterministically.
pub fn init_parameters<S: Scalar>(spec: &ModelSpec, seed: u64) -> (ParamStore<S>, ModelParams) {
    let mut store = ParamStore::new();
    let mut init = Init::new(seed);
    let d = spec.d_model;
    let opts = &spec.options;

    let attention = AttentionParams {
        w_q: init.xavier(&mut store, "attention.w_q", d, d),
        w_k: init.xavier(&mut store, "attention.w_k", d, d),
        w_v: init.xavier(&mut store, "attention.w_v", d, d),
        cls: init.normal(&mut store, "attention.cls", &[d], TOKEN_INIT_STD),
        layer_codes: opts
            .layer_codes
            .then(|| init.normal(&mut store, "attention.layer_codes", &[spec.code_rows(), d], TOKEN_INIT_STD)),
        feedforward: opts.feedforward.then(|| FeedForward {
            w1: init.xavier(&mut store, "feedforward.w1", d, d),
            b1: init.normal(&mut store, "feedforward.b1", &[d], TOKEN_INIT_STD),
            w2: init.xavier(&mut store, "feedforward.w2", d, d),
            b2: init.normal(&mut store, "feedforward.b2", &[d], TOKEN_INIT_STD),
        }),
    };
    let head = ClassifierHead {
        w: init.xavier(&mut store, "head.w", d, 1),
        b: init.normal(&mut store, "head.b", &[1], TOKEN_INIT_STD),
    };
    let (encoders, node_features) = match spec.kind {
        ModelKind::TransSle => (Vec::new(), None),
        ModelKind::TransGat => {
            let dn = spec.d_node;
            let features = init.normal(&mut store, "gat.node_features", &[spec.node_count, dn], 1.0);
            let encoders = (0..spec.layers)
                .filter(|&m| m != spec.target_layer)
                .map(|m| GatEncoder {
                    layer: m,
                    steps: (0..opts.gat_depth)
                        .map(|k| {
                            (
                                init.xavier(&mut store, &format!("gat.{m}.{k}.w"), dn, dn),
                                init.xavier(&mut store, &format!("gat.{m}.{k}.a"), 2 * dn, 1),
                            )
                        })
                        .collect(),
                })
                .collect();
            (encoders, Some(features))
        }
    };
    (
        store,
        ModelParams {
            attention,
            head,
            encoders,
            node_features,
        },
    )
}
