//! The (target layer × seed) experiment driver and its report.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    baseline_common_neighbors, evaluate, evaluate_scores, select_threshold, train_model, TrainConfig, TrainSummary,
};
use crate::embed::{embed_full_layers, embed_view, EmbeddingTable, FeatureView, LayerEmbedding, Node2Vec, Node2VecConfig};
use crate::error::{Error, Result};
use crate::graph::{
    build_union_pool, inductive_node_split, label_for_target, stratified_split, CandidatePool, MultiplexGraph, NodePair,
    SplitBundle, SplitProtocol, SplitRatios,
};
use crate::models::{AnyModel, LinkModel, ModelKind, ModelOptions, ModelSpec, NormRecorder, TransGat, TransSle};

pub const DEFAULT_SEEDS: [u64; 3] = [42, 18, 45];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub protocol: SplitProtocol,
    pub seeds: Vec<u64>,
    /// Target layers; every layer when empty.
    pub targets: Vec<usize>,
    pub ratios: SplitRatios,
    pub holdout_fraction: f64,
    pub node2vec: Node2VecConfig,
    pub train: TrainConfig,
    pub options: ModelOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::TransSle,
            protocol: SplitProtocol::TransductiveStratified,
            seeds: DEFAULT_SEEDS.to_vec(),
            targets: Vec::new(),
            ratios: SplitRatios::default(),
            holdout_fraction: 0.15,
            node2vec: Node2VecConfig::default(),
            train: TrainConfig::default(),
            options: ModelOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// Hash of everything that shapes a run except which seeds and target
    /// layers are run, so partial runs of one experiment share it.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.targets.clear();
        c.node2vec.seed = 0;
        c.options.dropout = c.train.dropout_rate;
        if c.model == ModelKind::TransGat && !c.options.gat_features_from_node2vec {
            c.node2vec = Node2VecConfig::default();
        }
        crate::fingerprint(&c)
    }

    pub fn validate(&self) -> Result<()> {
        self.node2vec.validate()?;
        self.train.validate()?;
        self.options.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("no seeds given".into()));
        }
        if self.model == ModelKind::TransSle {
            let d = ModelOptions::default();
            let o = &self.options;
            if o.self_loops != d.self_loops
                || o.gat_activation != d.gat_activation
                || o.gat_depth != d.gat_depth
                || o.cls_placement != d.cls_placement
                || o.gat_features_from_node2vec
            {
                return Err(Error::InvalidArgument("GAT options do not apply to trans_sle".into()));
            }
        }
        Ok(())
    }

    pub fn target_layers(&self, graph: &MultiplexGraph) -> Result<Vec<usize>> {
        if self.targets.is_empty() {
            return Ok((0..graph.layer_count()).collect());
        }
        for &t in &self.targets {
            graph.check_layer(t)?;
        }
        Ok(self.targets.clone())
    }

    pub fn model_spec(&self, graph: &MultiplexGraph, target: usize) -> Result<ModelSpec> {
        let mut options = self.options.clone();
        options.dropout = self.train.dropout_rate;
        ModelSpec::new(self.model, graph.layer_count(), graph.node_count(), self.node2vec.d_node, target, options)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub target_layer: usize,
    pub layer_name: String,
    pub seed: u64,
    pub macro_f1: f64,
    pub roc_auc: Option<f64>,
    pub threshold: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub baseline_macro_f1: f64,
    pub baseline_roc_auc: Option<f64>,
    pub test_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub target_layer: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub seed: u64,
    pub macro_f1: f64,
    pub roc_auc: Option<f64>,
    pub baseline_macro_f1: f64,
    pub baseline_roc_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub per_seed: Vec<SeedAggregate>,
    pub macro_f1: f64,
    pub roc_auc: Option<f64>,
    pub baseline_macro_f1: f64,
    pub baseline_roc_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub model: ModelKind,
    pub protocol: SplitProtocol,
    pub fingerprint: String,
    /// How the target layer's own static view was built.
    pub target_view: String,
    pub records: Vec<RunRecord>,
    pub aggregates: Aggregates,
    pub complete: bool,
    pub failures: Vec<RunFailure>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Layer-wise mean within each seed, then the mean over seeds. Seeds keep
/// their first-appearance order.
pub fn aggregate(records: &[RunRecord]) -> Aggregates {
    let mut seeds: Vec<u64> = Vec::new();
    for r in records {
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    let per_seed: Vec<SeedAggregate> = seeds
        .iter()
        .map(|&seed| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.seed == seed).collect();
            SeedAggregate {
                seed,
                macro_f1: mean(rs.iter().map(|r| r.macro_f1)).unwrap_or(0.0),
                roc_auc: mean(rs.iter().filter_map(|r| r.roc_auc)),
                baseline_macro_f1: mean(rs.iter().map(|r| r.baseline_macro_f1)).unwrap_or(0.0),
                baseline_roc_auc: mean(rs.iter().filter_map(|r| r.baseline_roc_auc)),
            }
        })
        .collect();
    Aggregates {
        macro_f1: mean(per_seed.iter().map(|s| s.macro_f1)).unwrap_or(0.0),
        roc_auc: mean(per_seed.iter().filter_map(|s| s.roc_auc)),
        baseline_macro_f1: mean(per_seed.iter().map(|s| s.baseline_macro_f1)).unwrap_or(0.0),
        baseline_roc_auc: mean(per_seed.iter().filter_map(|s| s.baseline_roc_auc)),
        per_seed,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

impl MetricsReport {
    pub fn new(
        dataset: String,
        cfg: &ExperimentConfig,
        records: Vec<RunRecord>,
        failures: Vec<RunFailure>,
    ) -> Self {
        MetricsReport {
            dataset,
            model: cfg.model,
            protocol: cfg.protocol,
            fingerprint: cfg.fingerprint(),
            target_view: target_view_note(cfg.model).into(),
            aggregates: aggregate(&records),
            complete: failures.is_empty(),
            records,
            failures,
        }
    }

    pub fn check_aggregates(&self) -> Result<()> {
        let re = aggregate(&self.records);
        let a = &self.aggregates;
        let ok = re.per_seed.len() == a.per_seed.len()
            && re.per_seed.iter().zip(&a.per_seed).all(|(x, y)| {
                x.seed == y.seed
                    && close(x.macro_f1, y.macro_f1)
                    && close_opt(x.roc_auc, y.roc_auc)
                    && close(x.baseline_macro_f1, y.baseline_macro_f1)
                    && close_opt(x.baseline_roc_auc, y.baseline_roc_auc)
            })
            && close(re.macro_f1, a.macro_f1)
            && close_opt(re.roc_auc, a.roc_auc)
            && close(re.baseline_macro_f1, a.baseline_macro_f1)
            && close_opt(re.baseline_roc_auc, a.baseline_roc_auc);
        if ok {
            Ok(())
        } else {
            Err(Error::Structure("report aggregates do not match its records".into()))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(text)?;
        r.check_aggregates()?;
        Ok(r)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset",
            "model",
            "protocol",
            "target_layer",
            "layer_name",
            "seed",
            "macro_f1",
            "roc_auc",
            "threshold",
            "epochs_run",
            "best_epoch",
            "baseline_macro_f1",
            "baseline_roc_auc",
            "test_size",
        ])?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for r in &self.records {
            w.write_record([
                self.dataset.clone(),
                self.model.as_str().into(),
                self.protocol.as_str().into(),
                r.target_layer.to_string(),
                r.layer_name.clone(),
                r.seed.to_string(),
                r.macro_f1.to_string(),
                opt(r.roc_auc),
                r.threshold.to_string(),
                r.epochs_run.to_string(),
                r.best_epoch.to_string(),
                r.baseline_macro_f1.to_string(),
                opt(r.baseline_roc_auc),
                r.test_size.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        std::fs::write(json_path, self.to_json()?).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv()?).map_err(|e| Error::io(csv_path, e))
    }

    /// Combines partial reports of one experiment. Refuses reports whose
    /// fingerprints, datasets, models or protocols differ.
    pub fn merge(reports: &[MetricsReport]) -> Result<MetricsReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidArgument("no reports to merge".into()))?;
        for r in reports {
            r.check_aggregates()?;
            if r.fingerprint != first.fingerprint {
                return Err(Error::Structure(format!(
                    "conflicting config fingerprints {} and {}",
                    first.fingerprint, r.fingerprint
                )));
            }
            if (r.dataset.as_str(), r.model, r.protocol) != (first.dataset.as_str(), first.model, first.protocol) {
                return Err(Error::Structure("reports describe different experiments".into()));
            }
        }
        let mut records: Vec<RunRecord> = Vec::new();
        for r in reports.iter().flat_map(|r| &r.records) {
            if records.iter().any(|x| x.seed == r.seed && x.target_layer == r.target_layer) {
                return Err(Error::Structure(format!(
                    "duplicate record for layer {} seed {}",
                    r.target_layer, r.seed
                )));
            }
            records.push(r.clone());
        }
        let failures: Vec<RunFailure> = reports.iter().flat_map(|r| r.failures.clone()).collect();
        Ok(MetricsReport {
            dataset: first.dataset.clone(),
            model: first.model,
            protocol: first.protocol,
            fingerprint: first.fingerprint.clone(),
            target_view: first.target_view.clone(),
            aggregates: aggregate(&records),
            complete: failures.is_empty(),
            records,
            failures,
        })
    }
}

/// Plain-text table with one row per model and one column per dataset,
/// macro-F1 block first, then ROC-AUC. The common-neighbours baseline gets
/// its own row.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut models: Vec<&str> = vec!["common_neighbors"];
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !models.contains(&r.model.as_str()) {
            models.push(r.model.as_str());
        }
    }
    let cell = |model: &str, dataset: &str, auc: bool| -> String {
        let found = reports.iter().find(|r| {
            r.dataset == dataset && (model == "common_neighbors" || r.model.as_str() == model)
        });
        let value = found.and_then(|r| {
            let a = &r.aggregates;
            match (model == "common_neighbors", auc) {
                (false, false) => Some(a.macro_f1),
                (false, true) => a.roc_auc,
                (true, false) => Some(a.baseline_macro_f1),
                (true, true) => a.baseline_roc_auc,
            }
        });
        value.map_or("-".into(), |v| format!("{v:.4}"))
    };
    let width = datasets.iter().map(|d| d.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    for (title, auc) in [("Macro-F1", false), ("ROC-AUC", true)] {
        out.push_str(&format!("{title}\n{:<18}", "model"));
        for d in &datasets {
            out.push_str(&format!(" {d:>width$}"));
        }
        out.push('\n');
        for m in &models {
            out.push_str(&format!("{m:<18}"));
            for d in &datasets {
                out.push_str(&format!(" {:>width$}", cell(m, d, auc)));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn target_view_note(model: ModelKind) -> &'static str {
    match model {
        ModelKind::TransSle => "training_edges_only",
        ModelKind::TransGat => "excluded",
    }
}

/// Everything produced by one (target layer, seed) run.
pub struct RunOutput {
    pub record: RunRecord,
    pub model: AnyModel<f64>,
    pub spec: ModelSpec,
    pub log: super::EpochLog,
    pub bundle: SplitBundle,
    pub leaked_reads: usize,
    pub norms: Option<NormRecorder>,
}

/// Splits the labeled pool of `target` according to the configured protocol.
pub fn make_split(graph: &MultiplexGraph, pool: &CandidatePool, cfg: &ExperimentConfig, target: usize, seed: u64) -> Result<SplitBundle> {
    match cfg.protocol {
        SplitProtocol::TransductiveStratified => {
            let ex = label_for_target(pool, graph, target)?;
            stratified_split(&ex, cfg.ratios, seed)
        }
        SplitProtocol::InductiveNode => inductive_node_split(graph, pool, target, cfg.holdout_fraction, seed),
    }
}

/// Static embeddings a run needs, if any: Trans-SLE always, Trans-GAT only
/// with Node2Vec-initialized features. The target layer is embedded from
/// its training edges alone. Returns the table, per-layer losses and the
/// guard's count of forbidden reads.
pub fn embed_for_run(
    graph: &MultiplexGraph,
    bundle: &SplitBundle,
    cfg: &ExperimentConfig,
    seed: u64,
    full_layers: Option<&[LayerEmbedding]>,
) -> Result<Option<(EmbeddingTable, Vec<Vec<f64>>, usize)>> {
    if cfg.model == ModelKind::TransGat && !cfg.options.gat_features_from_node2vec {
        return Ok(None);
    }
    let mut n2v_cfg = cfg.node2vec.clone();
    n2v_cfg.seed = seed;
    let view = FeatureView::training_edges_only(graph, bundle)?;
    let (table, losses) = embed_view(&view, &Node2Vec { config: n2v_cfg }, cfg.node2vec.d_node, seed, full_layers)?;
    Ok(Some((table, losses, view.leaked_reads())))
}

/// Builds the untrained model of a run from its embeddings.
pub fn model_from_parts(
    graph: &MultiplexGraph,
    target: usize,
    cfg: &ExperimentConfig,
    seed: u64,
    table: Option<Arc<EmbeddingTable>>,
) -> Result<(AnyModel<f64>, ModelSpec, usize)> {
    let spec = cfg.model_spec(graph, target)?;
    match cfg.model {
        ModelKind::TransSle => {
            let table = table.ok_or_else(|| Error::InvalidArgument("trans_sle needs static embeddings".into()))?;
            Ok((AnyModel::Sle(TransSle::new(spec.clone(), table, seed)?), spec, 0))
        }
        ModelKind::TransGat => {
            let view = FeatureView::without_target(graph, target)?;
            let init = match (cfg.options.gat_features_from_node2vec, table) {
                (true, Some(t)) => Some(t.mean_excluding(target)),
                (true, None) => {
                    return Err(Error::InvalidArgument(
                        "gat_features_from_node2vec needs static embeddings".into(),
                    ))
                }
                (false, _) => None,
            };
            let model = TransGat::new(spec.clone(), &view, seed, init.as_deref())?;
            Ok((AnyModel::Gat(model), spec, view.leaked_reads()))
        }
    }
}

/// Builds the model for one run. `full_layers` are the seed's embeddings
/// of every unmasked layer.
pub fn build_model(
    graph: &MultiplexGraph,
    bundle: &SplitBundle,
    cfg: &ExperimentConfig,
    seed: u64,
    full_layers: Option<&[LayerEmbedding]>,
) -> Result<(AnyModel<f64>, ModelSpec, usize)> {
    let (table, leaked) = match embed_for_run(graph, bundle, cfg, seed, full_layers)? {
        Some((t, _, leaked)) => (Some(Arc::new(t)), leaked),
        None => (None, 0),
    };
    let (model, spec, more) = model_from_parts(graph, bundle.target_layer, cfg, seed, table)?;
    Ok((model, spec, leaked + more))
}

/// Test-split metrics of a trained model next to the common-neighbours
/// baseline, whose threshold is tuned on the same validation split.
pub fn evaluate_run<M: LinkModel<f64>>(
    graph: &MultiplexGraph,
    pool: &CandidatePool,
    model: &M,
    bundle: &SplitBundle,
    summary: &TrainSummary,
) -> Result<RunRecord> {
    let target = bundle.target_layer;
    let eval = evaluate(model, bundle.test(), summary.threshold)?;
    let pool_cn = baseline_common_neighbors(pool.pairs(), graph, target)?;
    let val_labels: Vec<bool> = bundle.val().iter().map(|e| e.label).collect();
    let val_pairs: Vec<NodePair> = bundle.val().iter().map(|e| e.pair).collect();
    let test_pairs: Vec<NodePair> = bundle.test().iter().map(|e| e.pair).collect();
    let base_val = pool_scores(&pool_cn, pool, &val_pairs)?;
    let base_test = pool_scores(&pool_cn, pool, &test_pairs)?;
    let (base_t, _) = select_threshold(&base_val, &val_labels)?;
    let base = evaluate_scores(base_test, bundle.test(), base_t)?;
    Ok(RunRecord {
        target_layer: target,
        layer_name: graph.layer_names()[target].clone(),
        seed: bundle.seed,
        macro_f1: eval.macro_f1,
        roc_auc: eval.roc_auc,
        threshold: summary.threshold,
        epochs_run: summary.epochs_run,
        best_epoch: summary.best_epoch,
        baseline_macro_f1: base.macro_f1,
        baseline_roc_auc: base.roc_auc,
        test_size: bundle.test_len(),
    })
}

/// Trains and evaluates one (target layer, seed) run end to end.
pub fn run_single(
    graph: &MultiplexGraph,
    pool: &CandidatePool,
    cfg: &ExperimentConfig,
    target: usize,
    seed: u64,
    full_layers: Option<&[LayerEmbedding]>,
    record_norms: bool,
) -> Result<RunOutput> {
    let bundle = make_split(graph, pool, cfg, target, seed)?;
    let (mut model, spec, leaked) = build_model(graph, &bundle, cfg, seed, full_layers)?;
    if leaked > 0 {
        return Err(Error::Leakage(format!("{leaked} reads of held-back target edges")));
    }
    let mut norms = record_norms.then(NormRecorder::default);
    let outcome = train_model(&mut model, &bundle, &cfg.train, seed, norms.as_mut())?;
    let record = evaluate_run(graph, pool, &model, &bundle, &outcome.summary())?;
    Ok(RunOutput {
        record,
        model,
        spec,
        log: outcome.log,
        bundle,
        leaked_reads: leaked,
        norms,
    })
}

fn pool_scores(all: &[f64], pool: &CandidatePool, pairs: &[NodePair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            pool.pairs()
                .binary_search(p)
                .map(|i| all[i])
                .map_err(|_| Error::Structure(format!("pair {p:?} is not in the candidate pool")))
        })
        .collect()
}

/// Runs every (seed, target) job on `workers` threads. Per-run failures are
/// recorded, not fatal; records come back in (seed, target) order.
pub fn run_experiment(graph: &MultiplexGraph, dataset: &str, cfg: &ExperimentConfig, workers: usize) -> Result<MetricsReport> {
    run_experiment_with(graph, dataset, cfg, workers, |_| {})
}

/// As [`run_experiment`], handing every finished run to `sink` (called
/// from worker threads, one run at a time).
pub fn run_experiment_with(
    graph: &MultiplexGraph,
    dataset: &str,
    cfg: &ExperimentConfig,
    workers: usize,
    sink: impl Fn(&RunOutput) + Sync,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let pool = build_union_pool(graph);
    let targets = cfg.target_layers(graph)?;
    let jobs: Vec<(usize, u64, usize)> = cfg
        .seeds
        .iter()
        .enumerate()
        .flat_map(|(si, &s)| targets.iter().map(move |&t| (si, s, t)))
        .collect();

    // full-layer embeddings are shared by every target of a seed
    let embeddings: Vec<Mutex<Option<Arc<Vec<LayerEmbedding>>>>> = cfg.seeds.iter().map(|_| Mutex::new(None)).collect();
    let needs_embeddings = cfg.model == ModelKind::TransSle || cfg.options.gat_features_from_node2vec;
    let full_layers_for = |si: usize, seed: u64| -> Result<Option<Arc<Vec<LayerEmbedding>>>> {
        if !needs_embeddings {
            return Ok(None);
        }
        let mut slot = embeddings[si].lock().expect("embedding cache");
        if slot.is_none() {
            let mut c = cfg.node2vec.clone();
            c.seed = seed;
            *slot = Some(Arc::new(embed_full_layers(graph, &Node2Vec { config: c }, seed)?));
        }
        Ok(slot.clone())
    };

    let results: Vec<Mutex<Option<std::result::Result<RunRecord, String>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let sink_lock = Mutex::new(());
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(si, seed, target)) = jobs.get(i) else { break };
        let out = full_layers_for(si, seed).and_then(|full| {
            run_single(graph, &pool, cfg, target, seed, full.as_deref().map(|v| v.as_slice()), false)
        });
        let res = match out {
            Ok(run) => {
                log::info!(
                    "layer {} seed {}: macro-F1 {:.4} ROC-AUC {:?} after {} epochs",
                    target,
                    seed,
                    run.record.macro_f1,
                    run.record.roc_auc,
                    run.record.epochs_run
                );
                let _g = sink_lock.lock().expect("sink");
                sink(&run);
                Ok(run.record)
            }
            Err(e) => {
                log::error!("layer {target} seed {seed} failed: {e}");
                Err(e.to_string())
            }
        };
        *results[i].lock().expect("result slot") = Some(res);
    };
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (slot, &(_, seed, target)) in results.into_iter().zip(&jobs) {
        match slot.into_inner().expect("result slot").expect("every job ran") {
            Ok(r) => records.push(r),
            Err(error) => failures.push(RunFailure {
                target_layer: target,
                seed,
                error,
            }),
        }
    }
    Ok(MetricsReport::new(dataset.to_string(), cfg, records, failures))
}
