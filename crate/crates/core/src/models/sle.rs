//! Trans-SLE: attention over frozen static edge views.

use std::sync::Arc;

use rand::Rng;

use super::{cls_tokens, fuse_and_score, init_parameters, ForwardMode, LinkModel, ModelKind, ModelParams, ModelSpec, ScoreOutput};
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::embed::{edge_view_tensor, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::scalar::Scalar;

pub struct TransSle<S: Scalar> {
    spec: ModelSpec,
    store: ParamStore<S>,
    params: ModelParams,
    table: Arc<EmbeddingTable>,
}

impl<S: Scalar> TransSle<S> {
    pub fn new(spec: ModelSpec, table: Arc<EmbeddingTable>, seed: u64) -> Result<Self> {
        if spec.kind != ModelKind::TransSle {
            return Err(Error::InvalidArgument("spec is not a Trans-SLE spec".into()));
        }
        if table.layer_count() != spec.layers || table.d_node() != spec.d_node || table.node_count() != spec.node_count {
            return Err(Error::InvalidArgument(format!(
                "embedding table is {} layers × {} nodes × {}, model expects {} × {} × {}",
                table.layer_count(),
                table.node_count(),
                table.d_node(),
                spec.layers,
                spec.node_count,
                spec.d_node
            )));
        }
        let (store, params) = init_parameters(&spec, seed);
        Ok(TransSle {
            spec,
            store,
            params,
            table,
        })
    }

    pub fn handles(&self) -> &ModelParams {
        &self.params
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// `[B, l, d_model]` views of `pairs`.
    pub fn views(&self, pairs: &[NodePair]) -> Result<Tensor<S>> {
        edge_view_tensor(pairs, &self.table)
    }

    /// Scores a batch of precomputed views (`[B, l, d_model]`).
    pub fn score_views<R: Rng + ?Sized>(&self, tape: &mut Tape<S>, views: Var, mode: ForwardMode<'_, R>) -> Result<ScoreOutput> {
        let (b, l, d) = match *tape.shape(views) {
            [b, l, d] => (b, l, d),
            ref s => return Err(Error::shape("trans_sle", format!("views of shape {s:?}"))),
        };
        if l != self.spec.layers || d != self.spec.d_model {
            return Err(Error::InvalidArgument(format!(
                "got {l} views of dimension {d}, model expects {} of {}",
                self.spec.layers, self.spec.d_model
            )));
        }
        let mut tokens = views;
        if let Some(codes) = self.params.attention.layer_codes {
            let codes = tape.param(&self.store, codes)?;
            tokens = tape.add_broadcast(tokens, codes)?;
        }
        let cls = cls_tokens(tape, &self.store, &self.params.attention, b)?;
        let seq = tape.concat(&[cls, tokens], 1)?;
        fuse_and_score(tape, &self.store, &self.params, self.spec.options.dropout, seq, 0, mode)
    }
}

impl<S: Scalar> LinkModel<S> for TransSle<S> {
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
        let views = tape.constant(self.views(pairs)?)?;
        self.score_views(tape, views, mode)
    }
}
