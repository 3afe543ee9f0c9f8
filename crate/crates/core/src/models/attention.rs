//! Single-head scaled dot-product attention and the classifier head.

use rand::Rng;

use super::{ForwardMode, ModelParams, NormRecorder, ScoreOutput};
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub cls: ParamId,
    pub layer_codes: Option<ParamId>,
    pub feedforward: Option<FeedForward>,
}

/// Position-wise `z + W2·relu(W1·z + b1) + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// `p = σ(z·W + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    pub w: ParamId,
    pub b: ParamId,
}

fn seq_dims<S: Scalar>(tape: &Tape<S>, seq: Var) -> Result<(usize, usize, usize)> {
    match *tape.shape(seq) {
        [b, t, d] if t >= 2 => Ok((b, t, d)),
        ref s => Err(Error::shape("self_attention", format!("expected [B, T >= 2, d], got {s:?}"))),
    }
}

fn record<S: Scalar>(tape: &Tape<S>, probs: Var, width: usize, recorder: &mut Option<&mut NormRecorder>) {
    if let Some(r) = recorder.as_deref_mut() {
        r.record_attention(tape.value(probs).data(), width);
    }
}

/// Full self-attention over `[B, T, d]`, returning `[B, T, d]` with
/// `z_j = Σ_k softmax_k(q_j·k_k / √d) v_k`.
pub fn self_attention_forward<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &AttentionParams,
    seq: Var,
    mut recorder: Option<&mut NormRecorder>,
) -> Result<Var> {
    let (_, t, d) = seq_dims(tape, seq)?;
    let wq = tape.param(store, params.w_q)?;
    let wk = tape.param(store, params.w_k)?;
    let wv = tape.param(store, params.w_v)?;
    let q = tape.matmul(seq, wq)?;
    let k = tape.matmul(seq, wk)?;
    let v = tape.matmul(seq, wv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, S::of(1.0 / (d as f64).sqrt()))?;
    let alpha = tape.softmax(scores)?;
    record(tape, alpha, t, &mut recorder);
    tape.matmul(alpha, v)
}

/// The attention output at one query position only, `[B, d]`. Equal to row
/// `pos` of [`self_attention_forward`] without computing the other rows.
pub fn attend_at<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &AttentionParams,
    seq: Var,
    pos: usize,
    mut recorder: Option<&mut NormRecorder>,
) -> Result<Var> {
    let (b, t, d) = seq_dims(tape, seq)?;
    if pos >= t {
        return Err(Error::InvalidArgument(format!("query position {pos} of {t} tokens")));
    }
    let wq = tape.param(store, params.w_q)?;
    let wk = tape.param(store, params.w_k)?;
    let wv = tape.param(store, params.w_v)?;
    let flat = tape.reshape(seq, &[b * t, d])?;
    let query = tape.gather_rows(flat, (0..b).map(|i| i * t + pos).collect())?;
    let q = tape.matmul(query, wq)?;
    let q = tape.reshape(q, &[b, 1, d])?;
    let k = tape.matmul(seq, wk)?;
    let v = tape.matmul(seq, wv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, S::of(1.0 / (d as f64).sqrt()))?;
    let alpha = tape.softmax(scores)?;
    record(tape, alpha, t, &mut recorder);
    let z = tape.matmul(alpha, v)?;
    tape.reshape(z, &[b, d])
}

pub fn feedforward<S: Scalar>(tape: &mut Tape<S>, store: &ParamStore<S>, ff: &FeedForward, z: Var) -> Result<Var> {
    let w1 = tape.param(store, ff.w1)?;
    let b1 = tape.param(store, ff.b1)?;
    let w2 = tape.param(store, ff.w2)?;
    let b2 = tape.param(store, ff.b2)?;
    let h = tape.matmul(z, w1)?;
    let h = tape.add_broadcast(h, b1)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, w2)?;
    let h = tape.add_broadcast(h, b2)?;
    tape.add(z, h)
}

/// Logits and probabilities for `[B, d]` readouts.
pub fn classify<S: Scalar>(tape: &mut Tape<S>, store: &ParamStore<S>, head: &ClassifierHead, z: Var) -> Result<ScoreOutput> {
    let b = tape.shape(z)[0];
    let w = tape.param(store, head.w)?;
    let bias = tape.param(store, head.b)?;
    let logits = tape.matmul(z, w)?;
    let logits = tape.add_broadcast(logits, bias)?;
    let logits = tape.reshape(logits, &[b])?;
    let probs = tape.sigmoid(logits)?;
    Ok(ScoreOutput { logits, probs })
}

/// Attention at `pos`, optional feedforward, dropout, then the head.
pub fn fuse_and_score<S: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &ModelParams,
    dropout: f64,
    seq: Var,
    pos: usize,
    mode: ForwardMode<'_, R>,
) -> Result<ScoreOutput> {
    let mut z = attend_at(tape, store, &params.attention, seq, pos, mode.recorder)?;
    if let Some(ff) = &params.attention.feedforward {
        z = feedforward(tape, store, ff, z)?;
    }
    let z = tape.dropout(z, dropout, mode.train, mode.rng)?;
    classify(tape, store, &params.head, z)
}

/// Tiles the CLS vector into `[B, 1, d]`.
pub(crate) fn cls_tokens<S: Scalar>(tape: &mut Tape<S>, store: &ParamStore<S>, params: &AttentionParams, batch: usize) -> Result<Var> {
    let cls = tape.param(store, params.cls)?;
    let d = tape.value(cls).numel();
    let tiled = tape.tile(cls, batch)?;
    tape.reshape(tiled, &[batch, 1, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(store: &mut ParamStore<f64>, wq: Tensor<f64>, wk: Tensor<f64>, wv: Tensor<f64>) -> AttentionParams {
        let d = wq.shape()[0];
        AttentionParams {
            w_q: store.add("q", wq),
            w_k: store.add("k", wk),
            w_v: store.add("v", wv),
            cls: store.add("cls", Tensor::zeros([d])),
            layer_codes: None,
            feedforward: None,
        }
    }

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_query_key_gives_uniform_mean() {
        let mut store = ParamStore::new();
        let wv = random(&[3, 3], 1);
        let p = params(&mut store, Tensor::zeros([3, 3]), Tensor::zeros([3, 3]), wv.clone());
        let x = random(&[1, 4, 3], 2);
        let mut tape = Tape::new();
        let seq = tape.constant(x.clone()).unwrap();
        let mut rec = NormRecorder::default();
        let z = self_attention_forward(&mut tape, &store, &p, seq, Some(&mut rec)).unwrap();
        // mean_k (W_v e_k) = (mean_k e_k) W_v
        let mut mean = [0.0; 3];
        for k in 0..4 {
            for c in 0..3 {
                mean[c] += x.data()[k * 3 + c] / 4.0;
            }
        }
        for j in 0..4 {
            for c in 0..3 {
                let want: f64 = (0..3).map(|r| mean[r] * wv.data()[r * 3 + c]).sum();
                assert!((tape.value(z).data()[j * 3 + c] - want).abs() < 1e-12);
            }
        }
        assert_eq!(rec.attention_rows, 4);
        assert!(rec.max_attention_deviation < 1e-12);
    }

    #[test]
    fn identical_tokens_get_identical_outputs() {
        let mut store = ParamStore::new();
        let w = random(&[2, 2], 3);
        let sym = Tensor::new([2, 2], vec![w.data()[0], w.data()[1], w.data()[1], w.data()[3]]).unwrap();
        let p = params(&mut store, sym.clone(), sym.clone(), sym);
        let mut tape = Tape::new();
        let seq = tape.constant(Tensor::new([1, 2, 2], vec![0.3, -0.7, 0.3, -0.7]).unwrap()).unwrap();
        let z = self_attention_forward(&mut tape, &store, &p, seq, None).unwrap();
        let out = tape.value(z).data();
        assert_eq!(out[..2], out[2..]);
    }

    #[test]
    fn three_token_hand_example() {
        // W_q = W_k = I, W_v = 2I, d = 2, tokens (1,0), (0,1), (1,1)
        let mut store = ParamStore::new();
        let eye = Tensor::new([2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let two = Tensor::new([2, 2], vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let p = params(&mut store, eye.clone(), eye, two);
        let tokens = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let mut tape = Tape::new();
        let seq = tape
            .constant(Tensor::new([1, 3, 2], tokens.iter().flatten().copied().collect()).unwrap())
            .unwrap();
        let z = self_attention_forward(&mut tape, &store, &p, seq, None).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for (j, tj) in tokens.iter().enumerate() {
            let logits: Vec<f64> = tokens.iter().map(|tk| (tj[0] * tk[0] + tj[1] * tk[1]) * s).collect();
            let norm: f64 = logits.iter().map(|l| l.exp()).sum();
            for c in 0..2 {
                let want: f64 = tokens
                    .iter()
                    .zip(&logits)
                    .map(|(tk, l)| l.exp() / norm * 2.0 * tk[c])
                    .sum();
                assert!((tape.value(z).data()[j * 2 + c] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_query_matches_full_attention() {
        let mut store = ParamStore::new();
        let p = params(&mut store, random(&[4, 4], 1), random(&[4, 4], 2), random(&[4, 4], 3));
        let x = random(&[3, 5, 4], 4);
        let mut tape = Tape::new();
        let seq = tape.constant(x).unwrap();
        let full = self_attention_forward(&mut tape, &store, &p, seq, None).unwrap();
        for pos in 0..5 {
            let one = attend_at(&mut tape, &store, &p, seq, pos, None).unwrap();
            for b in 0..3 {
                let want = &tape.value(full).data()[(b * 5 + pos) * 4..(b * 5 + pos + 1) * 4];
                let got = &tape.value(one).data()[b * 4..(b + 1) * 4];
                for (w, g) in want.iter().zip(got) {
                    assert!((w - g).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn rejects_single_token() {
        let mut store = ParamStore::new();
        let p = params(&mut store, random(&[2, 2], 1), random(&[2, 2], 2), random(&[2, 2], 3));
        let mut tape = Tape::new();
        let seq = tape.constant(Tensor::zeros([1, 1, 2])).unwrap();
        assert!(self_attention_forward(&mut tape, &store, &p, seq, None).is_err());
    }
}
