//! Minibatch training with early stopping and final evaluation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{balanced_weights, macro_f1, predict, roc_auc, select_threshold};
use crate::autodiff::{clip_global_norm, Adam, Tape};
use crate::error::{Error, Result};
use crate::graph::{LabeledExample, NodePair, SplitBundle};
use crate::models::{ForwardMode, LinkModel, NormRecorder};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    Balanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Examples per step; 0 means the whole training split.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub dropout_rate: f64,
    pub class_weighting: ClassWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            clip_norm: 1.0,
            dropout_rate: 0.2,
            class_weighting: ClassWeighting::Balanced,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.clip_norm > 0.0) || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument(
                "lr, clip_norm, max_epochs and patience must be positive".into(),
            ));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidArgument(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!("dropout_rate {} not in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochLog {
    pub epochs: Vec<EpochRecord>,
}

impl EpochLog {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.epochs {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: EpochLog,
    /// Epoch whose parameters were restored (1-based).
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub epochs_run: usize,
    /// Tuned on validation after restoring the best parameters.
    pub threshold: f64,
    pub val_macro_f1_at_threshold: f64,
}

/// The part of a [`TrainOutcome`] later stages need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub threshold: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub val_macro_f1_at_threshold: f64,
}

impl TrainOutcome {
    pub fn summary(&self) -> TrainSummary {
        TrainSummary {
            threshold: self.threshold,
            epochs_run: self.epochs_run,
            best_epoch: self.best_epoch,
            best_val_macro_f1: self.best_val_macro_f1,
            val_macro_f1_at_threshold: self.val_macro_f1_at_threshold,
        }
    }
}

/// Eval-mode probabilities for `pairs`, in chunks of `batch`.
pub fn score_pairs<S: Scalar, M: LinkModel<S>>(
    model: &M,
    pairs: &[NodePair],
    batch: usize,
    mut recorder: Option<&mut NormRecorder>,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let mode = ForwardMode {
            train: false,
            rng: &mut rng,
            recorder: recorder.as_deref_mut(),
        };
        let s = model.score(&mut tape, chunk, mode)?;
        out.extend(tape.value(s.probs).data().iter().map(|x| x.as_f64()));
    }
    Ok(out)
}

const EVAL_BATCH: usize = 1024;

/// Trains on `bundle.train()`, early-stopping on `bundle.val()`. The test
/// split is never touched.
pub fn train_model<S: Scalar, M: LinkModel<S>>(
    model: &mut M,
    bundle: &SplitBundle,
    cfg: &TrainConfig,
    seed: u64,
    mut recorder: Option<&mut NormRecorder>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = bundle.train();
    let val = bundle.val();
    if val.is_empty() {
        return Err(Error::Structure("empty validation split".into()));
    }
    let labels: Vec<bool> = train.iter().map(|e| e.label).collect();
    let (w0, w1) = balanced_weights(&labels)?;
    let val_pairs: Vec<NodePair> = val.iter().map(|e| e.pair).collect();
    let val_labels: Vec<bool> = val.iter().map(|e| e.label).collect();

    let adam = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_7EA1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = if cfg.batch_size == 0 { train.len() } else { cfg.batch_size };
    let mut log = EpochLog::default();
    let mut best: Option<(f64, usize, Vec<_>)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks(batch).enumerate() {
            let pairs: Vec<NodePair> = idx.iter().map(|&i| train[i].pair).collect();
            let y: Vec<S> = idx.iter().map(|&i| if train[i].label { S::one() } else { S::zero() }).collect();
            let w: Vec<S> = idx.iter().map(|&i| S::of(if train[i].label { w1 } else { w0 })).collect();
            let step = |model: &mut M, rng: &mut ChaCha8Rng, rec: Option<&mut NormRecorder>| -> Result<f64> {
                let mut tape = Tape::new();
                let mode = ForwardMode {
                    train: true,
                    rng,
                    recorder: rec,
                };
                let out = model.score(&mut tape, &pairs, mode)?;
                let loss = tape.weighted_bce(out.probs, &y, &w)?;
                let value = tape.value(loss).item().as_f64();
                tape.backward(loss)?.accumulate_into(model.params_mut());
                clip_global_norm(model.params_mut(), S::of(cfg.clip_norm));
                adam.step(model.params_mut())?;
                Ok(value)
            };
            let loss = step(model, &mut rng, recorder.as_deref_mut()).map_err(|e| match e {
                Error::NonFinite { op } => Error::NonFinite {
                    op: format!("{op} (epoch {epoch}, batch {bi})"),
                },
                other => other,
            })?;
            loss_sum += loss * idx.len() as f64;
        }
        let scores = score_pairs(model, &val_pairs, EVAL_BATCH, recorder.as_deref_mut())?;
        let val_f1 = macro_f1(&predict(&scores, 0.5), &val_labels)?;
        let train_loss = loss_sum / train.len() as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.5} val macro-F1 {val_f1:.4}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_macro_f1: val_f1,
        });
        if best.as_ref().map_or(true, |b| val_f1 > b.0) {
            best = Some((val_f1, epoch, model.params().snapshot()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (best_f1, best_epoch, snapshot) = best.expect("at least one epoch");
    model.params_mut().restore(&snapshot);
    let scores = score_pairs(model, &val_pairs, EVAL_BATCH, None)?;
    let (threshold, tuned_f1) = select_threshold(&scores, &val_labels)?;
    Ok(TrainOutcome {
        epochs_run: log.epochs.len(),
        log,
        best_epoch,
        best_val_macro_f1: best_f1,
        threshold,
        val_macro_f1_at_threshold: tuned_f1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub macro_f1: f64,
    /// Absent when the examples hold a single class.
    pub roc_auc: Option<f64>,
    pub scores: Vec<f64>,
}

/// Scores `examples` in eval mode and applies the fixed `threshold`.
pub fn evaluate<S: Scalar, M: LinkModel<S>>(model: &M, examples: &[LabeledExample], threshold: f64) -> Result<Evaluation> {
    let pairs: Vec<NodePair> = examples.iter().map(|e| e.pair).collect();
    let scores = score_pairs(model, &pairs, EVAL_BATCH, None)?;
    evaluate_scores(scores, examples, threshold)
}

pub fn evaluate_scores(scores: Vec<f64>, examples: &[LabeledExample], threshold: f64) -> Result<Evaluation> {
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let macro_f1 = macro_f1(&predict(&scores, threshold), &labels)?;
    let roc_auc = match roc_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::InvalidArgument(msg)) => {
            log::warn!("ROC-AUC omitted: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        macro_f1,
        roc_auc,
        scores,
    })
}
