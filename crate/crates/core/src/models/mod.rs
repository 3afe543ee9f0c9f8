//! Trans-SLE and Trans-GAT: cross-layer attention over per-layer edge views.

mod attention;
mod gat;
mod init;
mod sle;

pub use attention::*;
pub use gat::*;
pub use init::*;
pub use sle::*;

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TransSle,
    TransGat,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransSle => "trans_sle",
            ModelKind::TransGat => "trans_gat",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trans_sle" | "sle" => Ok(ModelKind::TransSle),
            "trans_gat" | "gat" => Ok(ModelKind::TransGat),
            _ => Err(Error::InvalidArgument(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatActivation {
    #[default]
    Elu,
    Relu,
}

/// Where Trans-GAT puts its CLS token.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsPlacement {
    /// CLS occupies the target layer's slot: `l` tokens.
    #[default]
    Replace,
    /// Target slot holds a zero view and CLS is appended: `l + 1` tokens.
    Append,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub layer_codes: bool,
    pub feedforward: bool,
    pub dropout: f64,
    pub self_loops: bool,
    pub gat_activation: GatActivation,
    pub gat_depth: usize,
    pub cls_placement: ClsPlacement,
    pub gat_features_from_node2vec: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            layer_codes: true,
            feedforward: true,
            dropout: 0.2,
            self_loops: true,
            gat_activation: GatActivation::Elu,
            gat_depth: 1,
            cls_placement: ClsPlacement::Replace,
            gat_features_from_node2vec: false,
        }
    }
}

impl ModelOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.gat_depth == 0 {
            return Err(Error::InvalidArgument("gat_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dimensions and toggles of one model; also its JSON architecture manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub layers: usize,
    pub node_count: usize,
    pub d_node: usize,
    pub d_model: usize,
    pub target_layer: usize,
    pub options: ModelOptions,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, layers: usize, node_count: usize, d_node: usize, target_layer: usize, options: ModelOptions) -> Result<Self> {
        options.validate()?;
        if layers < 2 || target_layer >= layers || d_node == 0 || node_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "bad model dimensions: {layers} layers, target {target_layer}, d_node {d_node}, {node_count} nodes"
            )));
        }
        Ok(ModelSpec {
            kind,
            layers,
            node_count,
            d_node,
            d_model: 2 * d_node,
            target_layer,
            options,
        })
    }

    /// Tokens in the fused sequence.
    pub fn tokens(&self) -> usize {
        match (self.kind, self.options.cls_placement) {
            (ModelKind::TransSle, _) | (ModelKind::TransGat, ClsPlacement::Append) => self.layers + 1,
            (ModelKind::TransGat, ClsPlacement::Replace) => self.layers,
        }
    }

    /// Sequence position read by the head.
    pub fn cls_position(&self) -> usize {
        match (self.kind, self.options.cls_placement) {
            (ModelKind::TransSle, _) => 0,
            (ModelKind::TransGat, ClsPlacement::Replace) => self.target_layer,
            (ModelKind::TransGat, ClsPlacement::Append) => self.layers,
        }
    }

    /// Rows of the layer-code table.
    pub fn code_rows(&self) -> usize {
        match self.kind {
            ModelKind::TransSle => self.layers,
            ModelKind::TransGat => self.tokens(),
        }
    }
}

/// Largest deviations from exact normalization seen while recording.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRecorder {
    pub attention_rows: usize,
    pub max_attention_deviation: f64,
    pub gat_neighborhoods: usize,
    pub max_gat_deviation: f64,
    pub min_coefficient: f64,
}

impl Default for NormRecorder {
    fn default() -> Self {
        NormRecorder {
            attention_rows: 0,
            max_attention_deviation: 0.0,
            gat_neighborhoods: 0,
            max_gat_deviation: 0.0,
            min_coefficient: f64::INFINITY,
        }
    }
}

impl NormRecorder {
    pub(crate) fn record_attention<S: Scalar>(&mut self, probs: &[S], width: usize) {
        for row in probs.chunks(width) {
            self.attention_rows += 1;
            self.note(row, true);
        }
    }

    pub(crate) fn record_gat<S: Scalar>(&mut self, coeffs: &[S], offsets: &[usize]) {
        for w in offsets.windows(2).filter(|w| w[0] < w[1]) {
            self.gat_neighborhoods += 1;
            self.note(&coeffs[w[0]..w[1]], false);
        }
    }

    fn note<S: Scalar>(&mut self, row: &[S], attention: bool) {
        let sum: f64 = row.iter().map(|x| x.as_f64()).sum();
        let dev = (sum - 1.0).abs();
        let slot = if attention {
            &mut self.max_attention_deviation
        } else {
            &mut self.max_gat_deviation
        };
        *slot = slot.max(dev);
        let min = row.iter().map(|x| x.as_f64()).fold(f64::INFINITY, f64::min);
        self.min_coefficient = self.min_coefficient.min(min);
    }
}

/// Tape nodes of one scored batch.
#[derive(Clone, Copy, Debug)]
pub struct ScoreOutput {
    /// `[B]` pre-sigmoid scores.
    pub logits: Var,
    /// `[B]` edge probabilities.
    pub probs: Var,
}

/// Per-call switches for a forward pass.
pub struct ForwardMode<'a, R: Rng + ?Sized> {
    pub train: bool,
    pub rng: &'a mut R,
    pub recorder: Option<&'a mut NormRecorder>,
}

/// A model that scores candidate pairs for its target layer.
pub trait LinkModel<S: Scalar> {
    fn spec(&self) -> &ModelSpec;
    fn params(&self) -> &ParamStore<S>;
    fn params_mut(&mut self) -> &mut ParamStore<S>;
    fn score<R: Rng + ?Sized>(&self, tape: &mut Tape<S>, pairs: &[NodePair], mode: ForwardMode<'_, R>) -> Result<ScoreOutput>;
}

/// Either architecture behind one type, for drivers that pick at run time.
pub enum AnyModel<S: Scalar> {
    Sle(TransSle<S>),
    Gat(TransGat<S>),
}

impl<S: Scalar> LinkModel<S> for AnyModel<S> {
    fn spec(&self) -> &ModelSpec {
        match self {
            AnyModel::Sle(m) => m.spec(),
            AnyModel::Gat(m) => m.spec(),
        }
    }

    fn params(&self) -> &ParamStore<S> {
        match self {
            AnyModel::Sle(m) => m.params(),
            AnyModel::Gat(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParamStore<S> {
        match self {
            AnyModel::Sle(m) => m.params_mut(),
            AnyModel::Gat(m) => m.params_mut(),
        }
    }

    fn score<R: Rng + ?Sized>(&self, tape: &mut Tape<S>, pairs: &[NodePair], mode: ForwardMode<'_, R>) -> Result<ScoreOutput> {
        match self {
            AnyModel::Sle(m) => m.score(tape, pairs, mode),
            AnyModel::Gat(m) => m.score(tape, pairs, mode),
        }
    }
}
