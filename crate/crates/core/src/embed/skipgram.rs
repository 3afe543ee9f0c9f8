//! Skip-gram with negative sampling over a walk corpus.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Node2VecConfig, Walk};
use crate::error::{Error, Result};

/// Floor on the decayed learning rate, as a fraction of the initial one.
const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct SkipgramOutput {
    /// Input-side vectors, `node_count × d_node`, row-major.
    pub rows: Vec<f32>,
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Trains input/output vectors so that co-occurring nodes score high.
/// Returns all-zero rows when the corpus is empty.
pub fn train_skipgram(corpus: &[Walk], node_count: usize, cfg: &Node2VecConfig, seed: u64) -> Result<SkipgramOutput> {
    let d = cfg.d_node;
    if corpus.is_empty() {
        return Ok(SkipgramOutput {
            rows: vec![0.0; node_count * d],
            epoch_losses: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; node_count];
    for walk in corpus {
        for &n in walk {
            counts[n as usize] += 1;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("negative sampling table: {e}")))?;

    let half = 0.5 / d as f64;
    let mut emb_in: Vec<f64> = (0..node_count * d).map(|_| rng.random_range(-half..half)).collect();
    let mut emb_out = vec![0.0f64; node_count * d];
    let mut grad_in = vec![0.0f64; d];

    let pairs_per_epoch: usize = corpus
        .iter()
        .map(|w| {
            let n = w.len();
            (0..n).map(|i| i.min(cfg.window) + (n - 1 - i).min(cfg.window)).sum::<usize>()
        })
        .sum();
    let total = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut done = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for walk in corpus {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(walk.len() - 1);
                for (j, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = cfg.learning_rate * (1.0 - done as f64 / total).max(MIN_LR_FRACTION);
                    done += 1;
                    let c = center as usize * d;
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    let mut pair_loss = 0.0;
                    for k in 0..=cfg.negatives_per_positive {
                        let (target, label) = if k == 0 {
                            (ctx as usize, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == ctx as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let o = target * d;
                        let dot: f64 = (0..d).map(|x| emb_in[c + x] * emb_out[o + x]).sum();
                        pair_loss -= if label == 1.0 { log_sigmoid(dot) } else { log_sigmoid(-dot) };
                        let g = (label - sigmoid(dot)) * lr;
                        for x in 0..d {
                            grad_in[x] += g * emb_out[o + x];
                            emb_out[o + x] += g * emb_in[c + x];
                        }
                    }
                    for x in 0..d {
                        emb_in[c + x] += grad_in[x];
                    }
                    loss_sum += pair_loss;
                    pairs += 1;
                }
            }
        }
        let mean = loss_sum / pairs.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite {
                op: format!("skip-gram epoch {epoch}"),
            });
        }
        log::debug!("skip-gram epoch {epoch}: mean loss {mean:.5}");
        epoch_losses.push(mean);
    }
    Ok(SkipgramOutput {
        rows: emb_in.into_iter().map(|x| x as f32).collect(),
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{generate_walks, Embedder, Node2Vec};
    use crate::graph::LayerGraph;

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    fn two_cliques() -> LayerGraph {
        let mut pairs = Vec::new();
        for base in [0, 5] {
            for a in 0..5 {
                for b in a + 1..5 {
                    pairs.push((base + a, base + b));
                }
            }
        }
        LayerGraph::from_pairs(11, pairs).unwrap()
    }

    fn small_cfg() -> Node2VecConfig {
        Node2VecConfig {
            d_node: 16,
            walk_length: 20,
            walks_per_node: 5,
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn empty_corpus_gives_zero_table() {
        let out = train_skipgram(&[], 4, &small_cfg(), 0).unwrap();
        assert_eq!(out.rows, vec![0.0; 4 * 16]);
    }

    #[test]
    fn cliques_separate_and_loss_falls() {
        let g = two_cliques();
        let cfg = small_cfg();
        let emb = Node2Vec { config: cfg.clone() }.embed_layer(&g, 7).unwrap();
        assert_eq!(emb.rows.len(), 11 * 16);
        let row = |i: usize| &emb.rows[i * 16..(i + 1) * 16];
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for a in 0..10 {
            for b in a + 1..10 {
                let c = cosine(row(a), row(b));
                if (a < 5) == (b < 5) {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    nx += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / nx as f64);
        assert!(emb.epoch_losses.last().unwrap() < &emb.epoch_losses[0]);
        assert!(row(10).iter().all(|&x| x == 0.0), "isolated node keeps a zero row");
    }

    #[test]
    fn training_is_deterministic() {
        let g = two_cliques();
        let cfg = small_cfg();
        let corpus = generate_walks(&g, &cfg, 1);
        let a = train_skipgram(&corpus, 11, &cfg, 1).unwrap();
        let b = train_skipgram(&corpus, 11, &cfg, 1).unwrap();
        assert_eq!(a, b);
    }
}
