//! Trans-GAT: per-layer graph attention encoders fused by cross-layer attention.

use rand::Rng;

use super::{cls_tokens, fuse_and_score, init_parameters, ClsPlacement, ForwardMode, GatActivation, LinkModel, ModelKind, ModelParams, ModelSpec, NormRecorder, ScoreOutput};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::embed::FeatureView;
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::scalar::Scalar;

pub const GAT_LEAKY_SLOPE: f64 = 0.2;

/// One non-target layer's encoder: a `(W, a)` pair per stacked step.
#[derive(Clone, Debug, PartialEq)]
pub struct GatEncoder {
    pub layer: usize,
    pub steps: Vec<(ParamId, ParamId)>,
}

/// Neighbourhoods of one layer in CSR form; node `i` aggregates over
/// `neighbors[offsets[i]..offsets[i + 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatAdjacency {
    pub layer: usize,
    pub offsets: Vec<usize>,
    pub centers: Vec<usize>,
    pub neighbors: Vec<usize>,
}

impl GatAdjacency {
    /// Reads layer `m` through the leakage-guarded view.
    pub fn build(view: &FeatureView, m: usize, self_loops: bool) -> Result<Self> {
        let layer = view.layer(m)?;
        view.audit(m, layer.edges().iter().copied());
        let mut offsets = vec![0];
        let mut centers = Vec::new();
        let mut neighbors = Vec::new();
        for i in 0..layer.node_count() {
            let mut nbrs = layer.neighbors(i).to_vec();
            if self_loops {
                let at = nbrs.partition_point(|&j| j < i);
                nbrs.insert(at, i);
            }
            centers.extend(std::iter::repeat(i).take(nbrs.len()));
            neighbors.extend(nbrs);
            offsets.push(neighbors.len());
        }
        Ok(GatAdjacency {
            layer: m,
            offsets,
            centers,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// `h'_i = σ(Σ_{j∈N(i)} α_ij W h_j)` with
/// `α_i· = softmax_j(LeakyReLU(aᵀ[W h_i ‖ W h_j]))`, applied once per step.
#[allow(clippy::too_many_arguments)]
pub fn gat_forward<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    encoder: &GatEncoder,
    adjacency: &GatAdjacency,
    features: Var,
    activation: GatActivation,
    mut recorder: Option<&mut NormRecorder>,
) -> Result<Var> {
    let mut h = features;
    for &(w, a) in &encoder.steps {
        let w = tape.param(store, w)?;
        let a = tape.param(store, a)?;
        let wh = tape.matmul(h, w)?;
        let hi = tape.gather_rows(wh, adjacency.centers.clone())?;
        let hj = tape.gather_rows(wh, adjacency.neighbors.clone())?;
        let pair = tape.concat(&[hi, hj], 1)?;
        let e = tape.matmul(pair, a)?;
        let e = tape.leaky_relu(e, S::of(GAT_LEAKY_SLOPE))?;
        let e = tape.reshape(e, &[adjacency.neighbors.len()])?;
        let alpha = tape.segment_softmax(e, adjacency.offsets.clone())?;
        if let Some(r) = recorder.as_deref_mut() {
            r.record_gat(tape.value(alpha).data(), &adjacency.offsets);
        }
        let msg = tape.mul_rows(hj, alpha)?;
        let agg = tape.segment_sum(msg, adjacency.offsets.clone())?;
        h = match activation {
            GatActivation::Elu => tape.elu(agg, S::one())?,
            GatActivation::Relu => tape.relu(agg)?,
        };
    }
    Ok(h)
}

pub struct TransGat<S: Scalar> {
    spec: ModelSpec,
    store: ParamStore<S>,
    params: ModelParams,
    adjacency: Vec<GatAdjacency>,
}

impl<S: Scalar> TransGat<S> {
    /// `initial_features` (`node_count × d_node`) is required when the
    /// spec asks for Node2Vec-initialized node features.
    pub fn new(spec: ModelSpec, view: &FeatureView, seed: u64, initial_features: Option<&[f32]>) -> Result<Self> {
        if spec.kind != ModelKind::TransGat {
            return Err(Error::InvalidArgument("spec is not a Trans-GAT spec".into()));
        }
        if view.target() != spec.target_layer || view.layer_count() != spec.layers || view.node_count() != spec.node_count {
            return Err(Error::InvalidArgument("feature view does not match the model spec".into()));
        }
        let (mut store, params) = init_parameters(&spec, seed);
        let adjacency = params
            .encoders
            .iter()
            .map(|e| GatAdjacency::build(view, e.layer, spec.options.self_loops))
            .collect::<Result<Vec<_>>>()?;
        let features = params.node_features.expect("GAT spec registers node features");
        match (spec.options.gat_features_from_node2vec, initial_features) {
            (true, Some(init)) => {
                let t = Tensor::new([spec.node_count, spec.d_node], init.iter().map(|&x| S::of(x as f64)).collect())?;
                store.get_mut(features).value = t;
            }
            (true, None) => {
                return Err(Error::InvalidArgument(
                    "gat_features_from_node2vec is set but no embeddings were given".into(),
                ))
            }
            (false, _) => {}
        }
        Ok(TransGat {
            spec,
            store,
            params,
            adjacency,
        })
    }

    pub fn handles(&self) -> &ModelParams {
        &self.params
    }

    pub fn adjacency(&self) -> &[GatAdjacency] {
        &self.adjacency
    }

    /// `(layer, [N, d_node])` node embeddings of every encoder.
    pub fn encode_layers(&self, tape: &mut Tape<S>, mut recorder: Option<&mut NormRecorder>) -> Result<Vec<(usize, Var)>> {
        let features = tape.param(&self.store, self.params.node_features.expect("GAT features"))?;
        self.params
            .encoders
            .iter()
            .zip(&self.adjacency)
            .map(|(enc, adj)| {
                let h = gat_forward(
                    tape,
                    &self.store,
                    enc,
                    adj,
                    features,
                    self.spec.options.gat_activation,
                    recorder.as_deref_mut(),
                )?;
                Ok((enc.layer, h))
            })
            .collect()
    }

    /// Builds the fused `[B, T, d_model]` sequence from encoder outputs.
    pub fn sequence(&self, tape: &mut Tape<S>, encoded: &[(usize, Var)], pairs: &[NodePair]) -> Result<Var> {
        let b = pairs.len();
        let d = self.spec.d_model;
        let us: Vec<usize> = pairs.iter().map(|p| p.u).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.v).collect();
        let mut tokens = Vec::with_capacity(self.spec.tokens());
        for m in 0..self.spec.layers {
            if m == self.spec.target_layer {
                let slot = match self.spec.options.cls_placement {
                    ClsPlacement::Replace => cls_tokens(tape, &self.store, &self.params.attention, b)?,
                    ClsPlacement::Append => tape.constant(Tensor::zeros([b, 1, d]))?,
                };
                tokens.push(slot);
                continue;
            }
            let (_, h) = encoded
                .iter()
                .find(|(l, _)| *l == m)
                .ok_or_else(|| Error::InvalidArgument(format!("no encoder output for layer {m}")))?;
            let hu = tape.gather_rows(*h, us.clone())?;
            let hv = tape.gather_rows(*h, vs.clone())?;
            let view = tape.concat(&[hu, hv], 1)?;
            tokens.push(tape.reshape(view, &[b, 1, d])?);
        }
        if self.spec.options.cls_placement == ClsPlacement::Append {
            tokens.push(cls_tokens(tape, &self.store, &self.params.attention, b)?);
        }
        let mut seq = tape.concat(&tokens, 1)?;
        if let Some(codes) = self.params.attention.layer_codes {
            let codes = tape.param(&self.store, codes)?;
            seq = tape.add_broadcast(seq, codes)?;
        }
        Ok(seq)
    }
}

impl<S: Scalar> LinkModel<S> for TransGat<S> {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn params(&self) -> &ParamStore<S> {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.store
    }

    fn score<R: Rng + ?Sized>(&self, tape: &mut Tape<S>, pairs: &[NodePair], mode: ForwardMode<'_, R>) -> Result<ScoreOutput> {
        let ForwardMode {
            train,
            rng,
            mut recorder,
        } = mode;
        let encoded = self.encode_layers(tape, recorder.as_deref_mut())?;
        let seq = self.sequence(tape, &encoded, pairs)?;
        let mode = ForwardMode { train, rng, recorder };
        fuse_and_score(
            tape,
            &self.store,
            &self.params,
            self.spec.options.dropout,
            seq,
            self.spec.cls_position(),
            mode,
        )
    }
}
