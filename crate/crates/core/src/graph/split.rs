//! Leakage-free split protocols over labeled candidate pairs.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidatePool, LabeledExample, MultiplexGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    TransductiveStratified,
    InductiveNode,
}

impl SplitProtocol {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitProtocol::TransductiveStratified => "transductive_stratified",
            SplitProtocol::InductiveNode => "inductive_node",
        }
    }
}

impl std::str::FromStr for SplitProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" | "transductive_stratified" => Ok(SplitProtocol::TransductiveStratified),
            "inductive" | "inductive_node" => Ok(SplitProtocol::InductiveNode),
            other => Err(Error::InvalidArgument(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be positive and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

/// Train/validation/test partition of one target layer's labeled pool.
///
/// Reads of the test split go through [`SplitBundle::test`], which counts
/// them; training code only ever receives the train and validation slices.
#[derive(Debug, Serialize, Deserialize)]
pub struct SplitBundle {
    pub protocol: SplitProtocol,
    pub seed: u64,
    pub target_layer: usize,
    train: Vec<LabeledExample>,
    val: Vec<LabeledExample>,
    test: Vec<LabeledExample>,
    held_out_nodes: Vec<usize>,
    #[serde(skip)]
    test_reads: AtomicUsize,
}

impl Clone for SplitBundle {
    fn clone(&self) -> Self {
        SplitBundle {
            protocol: self.protocol,
            seed: self.seed,
            target_layer: self.target_layer,
            train: self.train.clone(),
            val: self.val.clone(),
            test: self.test.clone(),
            held_out_nodes: self.held_out_nodes.clone(),
            test_reads: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for SplitBundle {
    fn eq(&self, other: &Self) -> bool {
        self.protocol == other.protocol
            && self.seed == other.seed
            && self.target_layer == other.target_layer
            && self.train == other.train
            && self.val == other.val
            && self.test == other.test
            && self.held_out_nodes == other.held_out_nodes
    }
}

impl SplitBundle {
    pub fn train(&self) -> &[LabeledExample] {
        &self.train
    }

    pub fn val(&self) -> &[LabeledExample] {
        &self.val
    }

    /// Test examples; every call is recorded by the access guard.
    pub fn test(&self) -> &[LabeledExample] {
        self.test_reads.fetch_add(1, Ordering::Relaxed);
        &self.test
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    pub fn test_label_reads(&self) -> usize {
        self.test_reads.load(Ordering::Relaxed)
    }

    pub fn held_out_nodes(&self) -> &[usize] {
        &self.held_out_nodes
    }

    /// Edges of the target layer that the model may see as features:
    /// the positive training pairs.
    pub fn training_positive_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.train.iter().filter(|e| e.label).map(|e| (e.pair.u, e.pair.v))
    }
}

fn partition_by_class(examples: &[LabeledExample]) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, e) in examples.iter().enumerate() {
        if e.label {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    (pos, neg)
}

/// Sizes of each part for `n` items; every part gets at least one item and
/// the first part absorbs rounding.
fn part_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * n as f64).round() as usize).max(1))
        .collect();
    let rest: usize = sizes[1..].iter().sum();
    sizes[0] = n.saturating_sub(rest);
    sizes
}

fn cut(
    mut indices: Vec<usize>,
    fractions: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    indices.shuffle(rng);
    let sizes = part_sizes(indices.len(), fractions);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        parts.push(indices[start..start + size].to_vec());
        start += size;
    }
    parts
}

fn gather(examples: &[LabeledExample], a: &[usize], b: &[usize]) -> Vec<LabeledExample> {
    let mut out: Vec<LabeledExample> = a.iter().chain(b).map(|&i| examples[i]).collect();
    out.sort_by_key(|e| e.pair);
    out
}

fn target_of(examples: &[LabeledExample]) -> Result<usize> {
    let target = examples
        .first()
        .map(|e| e.target_layer)
        .ok_or_else(|| Error::InvalidArgument("no examples to split".into()))?;
    if examples.iter().any(|e| e.target_layer != target) {
        return Err(Error::InvalidArgument(
            "examples mix several target layers".into(),
        ));
    }
    Ok(target)
}

/// Class-wise shuffled 70/15/15 (by default) partition.
pub fn stratified_split(
    examples: &[LabeledExample],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitBundle> {
    ratios.validate()?;
    let target_layer = target_of(examples)?;
    let (pos, neg) = partition_by_class(examples);
    for (name, class) in [("positive", &pos), ("negative", &neg)] {
        if class.len() < 3 {
            return Err(Error::Structure(format!(
                "the {name} class has {} examples; at least 3 are needed to stratify into \
                 train/validation/test",
                class.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fractions = [ratios.train, ratios.val, ratios.test];
    let p = cut(pos, &fractions, &mut rng);
    let n = cut(neg, &fractions, &mut rng);
    Ok(SplitBundle {
        protocol: SplitProtocol::TransductiveStratified,
        seed,
        target_layer,
        train: gather(examples, &p[0], &n[0]),
        val: gather(examples, &p[1], &n[1]),
        test: gather(examples, &p[2], &n[2]),
        held_out_nodes: Vec::new(),
        test_reads: AtomicUsize::new(0),
    })
}

/// Share of the retained (non-held-out) pool that goes to training.
pub const INDUCTIVE_TRAIN_SHARE: f64 = 0.82;

/// Withholds `ceil(fraction * N)` nodes: every pair touching one of them is a
/// test pair, the rest is split 82/18 into train/validation by class.
pub fn inductive_node_split(
    graph: &MultiplexGraph,
    pool: &CandidatePool,
    target: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<SplitBundle> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in (0, 0.5), got {holdout_fraction}"
        )));
    }
    let node_count = graph.node_count();
    let held = (holdout_fraction * node_count as f64).ceil() as usize;
    if held == 0 {
        return Err(Error::InvalidArgument(
            "holdout fraction withholds no node".into(),
        ));
    }
    let examples = super::label_for_target(pool, graph, target)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..node_count).collect();
    nodes.shuffle(&mut rng);
    let held_out: BTreeSet<usize> = nodes[..held].iter().copied().collect();

    let (test, retained): (Vec<LabeledExample>, Vec<LabeledExample>) = examples
        .into_iter()
        .partition(|e| held_out.contains(&e.pair.u) || held_out.contains(&e.pair.v));

    let advice = "try a different seed or holdout fraction";
    let test_pos = test.iter().filter(|e| e.label).count();
    if test_pos == 0 || test_pos == test.len() {
        return Err(Error::Structure(format!(
            "inductive test split has a single class ({test_pos} of {} positive); {advice}",
            test.len()
        )));
    }
    let (pos, neg) = partition_by_class(&retained);
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::Structure(format!(
            "inductive training pool has {} positives and {} negatives; both classes need at \
             least 2 examples for train/validation; {advice}",
            pos.len(),
            neg.len()
        )));
    }
    let fractions = [INDUCTIVE_TRAIN_SHARE, 1.0 - INDUCTIVE_TRAIN_SHARE];
    let p = cut(pos, &fractions, &mut rng);
    let n = cut(neg, &fractions, &mut rng);
    let mut test = test;
    test.sort_by_key(|e| e.pair);
    Ok(SplitBundle {
        protocol: SplitProtocol::InductiveNode,
        seed,
        target_layer: target,
        train: gather(&retained, &p[0], &n[0]),
        val: gather(&retained, &p[1], &n[1]),
        test,
        held_out_nodes: held_out.into_iter().collect(),
        test_reads: AtomicUsize::new(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodePair;

    fn synthetic(n: usize, positives: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample {
                pair: NodePair::new(i, i + 1000),
                label: i < positives,
                target_layer: 0,
            })
            .collect()
    }

    fn positives(split: &[LabeledExample]) -> usize {
        split.iter().filter(|e| e.label).count()
    }

    #[test]
    fn seventy_fifteen_fifteen() {
        let b = stratified_split(&synthetic(100, 20), SplitRatios::default(), 42).unwrap();
        assert_eq!((b.train().len(), b.val().len(), b.test_len()), (70, 15, 15));
        assert_eq!(
            (positives(b.train()), positives(b.val()), positives(b.test())),
            (14, 3, 3)
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let ex = synthetic(100, 20);
        let a = stratified_split(&ex, SplitRatios::default(), 42).unwrap();
        let b = stratified_split(&ex, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&ex, SplitRatios::default(), 18).unwrap();
        assert_ne!(a.train(), c.train());
        assert_eq!(positives(a.train()), positives(c.train()));
        assert_eq!(a.val().len(), c.val().len());
    }

    #[test]
    fn tiny_class_is_rejected() {
        let err = stratified_split(&synthetic(50, 2), SplitRatios::default(), 1).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let r = SplitRatios {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        assert!(stratified_split(&synthetic(100, 20), r, 1).is_err());
    }

    #[test]
    fn test_reads_are_counted() {
        let b = stratified_split(&synthetic(100, 20), SplitRatios::default(), 42).unwrap();
        assert_eq!(b.test_label_reads(), 0);
        let _ = b.train();
        let _ = b.val();
        assert_eq!(b.test_label_reads(), 0);
        let _ = b.test();
        assert_eq!(b.test_label_reads(), 1);
    }

    fn ring_multiplex(n: usize) -> MultiplexGraph {
        let ring: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let chords: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 2) % n)).collect();
        let mixed: Vec<(usize, usize)> = (0..n).step_by(2).map(|i| (i, (i + 1) % n)).collect();
        MultiplexGraph::from_layer_pairs(n, vec![ring, chords, mixed]).unwrap()
    }

    #[test]
    fn inductive_holds_out_exact_count() {
        let g = ring_multiplex(10);
        let pool = crate::graph::build_union_pool(&g);
        let b = inductive_node_split(&g, &pool, 2, 0.2, 42).unwrap();
        assert_eq!(b.held_out_nodes().len(), 2);
        for e in b.train().iter().chain(b.val()) {
            assert!(!b.held_out_nodes().iter().any(|&h| e.pair.touches(h)));
        }
        for e in b.test() {
            assert!(b.held_out_nodes().iter().any(|&h| e.pair.touches(h)));
        }
    }

    #[test]
    fn inductive_rejects_degenerate_fractions() {
        let g = ring_multiplex(10);
        let pool = crate::graph::build_union_pool(&g);
        assert!(inductive_node_split(&g, &pool, 0, 0.0, 1).is_err());
        assert!(inductive_node_split(&g, &pool, 0, 0.5, 1).is_err());
    }
}
