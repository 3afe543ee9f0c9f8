//! The pipeline stages. Each reads its inputs from and writes its outputs
//! to the run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, Context, Result};
use crosslayer::autodiff::{load_into, read_checkpoint, save_checkpoint};
use crosslayer::embed::{load_embeddings, save_embeddings, EmbeddingSidecar, EmbeddingTable};
use crosslayer::graph::{
    build_union_pool, parse_multiplex_edgelist, read_graph_binary, write_graph_binary, GraphSummary, MultiplexGraph,
    ParseReport, SplitBundle,
};
use crosslayer::models::{LinkModel, ModelKind};
use crosslayer::train::{
    embed_for_run, evaluate_run, make_split, model_from_parts, render_table, train_model, MetricsReport, RunFailure,
    RunRecord, TrainSummary,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::Usage;

pub struct Ctx {
    pub out: PathBuf,
    pub cfg: RunConfig,
    pub workers: usize,
}

impl Ctx {
    fn dir(&self, parts: &[&str]) -> Result<PathBuf> {
        let mut p = self.out.clone();
        p.extend(parts);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(p)
    }

    fn jobs(&self, graph: &MultiplexGraph) -> Result<Vec<(usize, u64)>> {
        let targets = self.cfg.experiment.target_layers(graph).map_err(|e| Usage(e.to_string()))?;
        Ok(self
            .cfg
            .experiment
            .seeds
            .iter()
            .flat_map(|&s| targets.iter().map(move |&t| (t, s)))
            .collect())
    }

    fn graph(&self) -> Result<MultiplexGraph> {
        let path = self.out.join("prepare").join(GRAPH_FILE);
        if !path.exists() {
            return Err(missing(&path, "run `prepare` first"));
        }
        Ok(read_graph_binary(&path)?)
    }

    fn split_path(&self, target: usize, seed: u64) -> PathBuf {
        self.out
            .join("prepare")
            .join("splits")
            .join(self.cfg.experiment.protocol.as_str())
            .join(run_file(target, seed, "json"))
    }

    fn split(&self, target: usize, seed: u64) -> Result<SplitBundle> {
        let path = self.split_path(target, seed);
        let text = fs::read_to_string(&path).map_err(|_| missing(&path, "no split for this target and seed"))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?)
    }

    fn embedding_path(&self, target: usize, seed: u64) -> PathBuf {
        self.out
            .join("embed")
            .join(self.cfg.experiment.protocol.as_str())
            .join(run_file(target, seed, "mxem"))
    }

    fn model_dir(&self) -> PathBuf {
        self.out.join("train").join(self.cfg.experiment.model.as_str())
    }

    fn record(&self, stage: &str, files: Vec<PathBuf>) -> Result<()> {
        let mut manifest = Manifest::load(&self.out)?;
        manifest.record_stage(&self.out, stage, &self.cfg.experiment.fingerprint(), &files)?;
        manifest.save(&self.out)
    }
}

const GRAPH_FILE: &str = "graph.mxgr";

fn run_file(target: usize, seed: u64, ext: &str) -> String {
    format!("t{target}_s{seed}.{ext}")
}

fn missing(path: &Path, hint: &str) -> anyhow::Error {
    anyhow!(crosslayer::Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, hint.to_string()),
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

/// Runs `f` over `jobs` on up to `workers` threads, keeping job order.
fn parallel<J: Sync, T: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let Some(job) = jobs.get(i) else { break };
        *slots[i].lock().expect("slot") = Some(f(job));
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
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot").expect("job ran"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub dataset: String,
    pub nodes: usize,
    pub layers: usize,
    pub edges: usize,
    pub graph: GraphSummary,
    pub parse: ParseReport,
    /// Target layers that could not be split, with the reason.
    pub skipped: Vec<RunFailure>,
}

pub fn prepare(ctx: &Ctx) -> Result<PrepareSummary> {
    let path = ctx
        .cfg
        .dataset
        .path
        .clone()
        .ok_or_else(|| Usage("no dataset given (--dataset or dataset.path in the config)".into()))?;
    let file = fs::File::open(&path).map_err(|e| crosslayer::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let parsed = parse_multiplex_edgelist(BufReader::new(file), ctx.cfg.dataset.format)?;
    let graph = parsed.graph;
    let dir = ctx.dir(&["prepare"])?;
    let mut files = Vec::new();
    write_graph_binary(&graph, &dir.join(GRAPH_FILE))?;
    files.push(dir.join(GRAPH_FILE));

    let pool = build_union_pool(&graph);
    let labels = graph.node_labels();
    let mut listing = String::from("u,v,u_label,v_label\n");
    for p in pool.pairs() {
        listing.push_str(&format!("{},{},{},{}\n", p.u, p.v, labels[p.u], labels[p.v]));
    }
    files.push(write(&dir.join("pool.csv"), listing)?);

    let split_dir = ctx.dir(&["prepare", "splits", ctx.cfg.experiment.protocol.as_str()])?;
    let mut skipped = Vec::new();
    for (target, seed) in ctx.jobs(&graph)? {
        match make_split(&graph, &pool, &ctx.cfg.experiment, target, seed) {
            Ok(bundle) => {
                let json = serde_json::to_string_pretty(&bundle)?;
                files.push(write(&split_dir.join(run_file(target, seed, "json")), json)?);
            }
            Err(e) => {
                log::warn!("layer {target} seed {seed}: no split ({e})");
                skipped.push(RunFailure {
                    target_layer: target,
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = GraphSummary::of(&graph);
    let out = PrepareSummary {
        dataset: ctx.cfg.dataset_name(),
        nodes: summary.nodes,
        layers: summary.layers.len(),
        edges: summary.total_edges(),
        graph: summary,
        parse: parsed.report,
        skipped,
    };
    files.push(write(&dir.join("summary.json"), serde_json::to_string_pretty(&out)?)?);
    ctx.record("prepare", files)?;
    Ok(out)
}

pub fn embed(ctx: &Ctx) -> Result<usize> {
    let graph = ctx.graph()?;
    let cfg = &ctx.cfg.experiment;
    let dir = ctx.dir(&["embed", cfg.protocol.as_str()])?;
    let jobs = ctx.jobs(&graph)?;
    let results = parallel(&jobs, ctx.workers, |&(target, seed)| -> Result<Option<PathBuf>> {
        let bundle = match ctx.split(target, seed) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("layer {target} seed {seed}: skipped ({e})");
                return Ok(None);
            }
        };
        // always embed, whatever the model: Trans-GAT may initialize from it
        let mut embed_cfg = cfg.clone();
        embed_cfg.model = ModelKind::TransSle;
        let (table, losses, leaked) = embed_for_run(&graph, &bundle, &embed_cfg, seed, None)?
            .expect("trans_sle always embeds");
        if leaked > 0 {
            return Err(crosslayer::Error::Leakage(format!("{leaked} reads of held-back target edges")).into());
        }
        let mut n2v = cfg.node2vec.clone();
        n2v.seed = seed;
        let names = graph.layer_names().to_vec();
        let sidecar = EmbeddingSidecar {
            fingerprint: EmbeddingSidecar::compute_fingerprint(&n2v, &names, Some(target), Some(seed)),
            node2vec: n2v,
            layer_names: names,
            target_layer: Some(target),
            split_seed: Some(seed),
            epoch_losses: losses,
        };
        let path = dir.join(run_file(target, seed, "mxem"));
        save_embeddings(&path, &table, &sidecar)?;
        log::info!("layer {target} seed {seed}: embedded {} layers", table.layer_count());
        Ok(Some(path))
    });
    let mut files = Vec::new();
    for r in results {
        if let Some(p) = r? {
            files.push(crosslayer::embed::sidecar_path(&p));
            files.push(p);
        }
    }
    let n = files.len() / 2;
    ctx.record("embed", files)?;
    Ok(n)
}

fn load_table(ctx: &Ctx, target: usize, seed: u64) -> Result<Arc<EmbeddingTable>> {
    let path = ctx.embedding_path(target, seed);
    if !path.exists() {
        return Err(missing(&path, "run `embed` first"));
    }
    let (table, sidecar) = load_embeddings(&path)?;
    let mut n2v = ctx.cfg.experiment.node2vec.clone();
    n2v.seed = seed;
    let expected = EmbeddingSidecar::compute_fingerprint(&n2v, &sidecar.layer_names, Some(target), Some(seed));
    if sidecar.fingerprint != expected {
        return Err(Usage(format!(
            "{} was embedded with a different Node2Vec config; rerun `embed`",
            path.display()
        ))
        .into());
    }
    Ok(Arc::new(table))
}

fn needs_table(ctx: &Ctx) -> bool {
    let e = &ctx.cfg.experiment;
    e.model == ModelKind::TransSle || e.options.gat_features_from_node2vec
}

fn build(ctx: &Ctx, graph: &MultiplexGraph, target: usize, seed: u64) -> Result<crosslayer::models::AnyModel<f64>> {
    let table = if needs_table(ctx) {
        Some(load_table(ctx, target, seed)?)
    } else {
        None
    };
    let (model, _, leaked) = model_from_parts(graph, target, &ctx.cfg.experiment, seed, table)?;
    if leaked > 0 {
        return Err(crosslayer::Error::Leakage(format!("{leaked} reads of held-back target edges")).into());
    }
    Ok(model)
}

/// Trains every (target, seed) run. Returns the number trained and the
/// failures, which are also written to `failures.json`.
pub fn train(ctx: &Ctx) -> Result<(usize, Vec<(RunFailure, anyhow::Error)>)> {
    let graph = ctx.graph()?;
    let cfg = &ctx.cfg.experiment;
    let dir = ctx.model_dir();
    fs::create_dir_all(&dir)?;
    let fingerprint = cfg.fingerprint();
    let jobs = ctx.jobs(&graph)?;
    let results = parallel(&jobs, ctx.workers, |&(target, seed)| -> Result<Vec<PathBuf>> {
        let bundle = ctx.split(target, seed)?;
        let mut model = build(ctx, &graph, target, seed)?;
        let outcome = train_model(&mut model, &bundle, &cfg.train, seed, None)
            .with_context(|| format!("training layer {target} seed {seed}"))?;
        let ckpt = dir.join(run_file(target, seed, "mxck"));
        save_checkpoint(&ckpt, model.params(), &fingerprint)?;
        let log_path = dir.join(run_file(target, seed, "epochs.csv"));
        outcome.log.write_csv(&log_path)?;
        let summary = dir.join(run_file(target, seed, "summary.json"));
        write(&summary, serde_json::to_string_pretty(&outcome.summary())?)?;
        log::info!(
            "layer {target} seed {seed}: best val macro-F1 {:.4} at epoch {} of {}",
            outcome.best_val_macro_f1,
            outcome.best_epoch,
            outcome.epochs_run
        );
        Ok(vec![crosslayer::autodiff::manifest_path(&ckpt), ckpt, log_path, summary])
    });
    let mut files = Vec::new();
    let mut failures = Vec::new();
    for (r, &(target, seed)) in results.into_iter().zip(&jobs) {
        match r {
            Ok(f) => files.extend(f),
            Err(e) => {
                log::error!("layer {target} seed {seed}: {e:#}");
                failures.push((
                    RunFailure {
                        target_layer: target,
                        seed,
                        error: format!("{e:#}"),
                    },
                    e,
                ));
            }
        }
    }
    let listed: Vec<&RunFailure> = failures.iter().map(|(f, _)| f).collect();
    files.push(write(&dir.join("failures.json"), serde_json::to_string_pretty(&listed)?)?);
    let trained = jobs.len() - failures.len();
    ctx.record(&format!("train/{}", cfg.model.as_str()), files)?;
    Ok((trained, failures))
}

fn evaluation_dir(ctx: &Ctx) -> PathBuf {
    ctx.out.join("evaluate").join(ctx.cfg.experiment.model.as_str())
}

pub fn evaluate(ctx: &Ctx) -> Result<Vec<RunRecord>> {
    let graph = ctx.graph()?;
    let pool = build_union_pool(&graph);
    let dir = evaluation_dir(ctx);
    fs::create_dir_all(&dir)?;
    let model_dir = ctx.model_dir();
    let jobs: Vec<(usize, u64)> = ctx
        .jobs(&graph)?
        .into_iter()
        .filter(|&(t, s)| model_dir.join(run_file(t, s, "mxck")).exists())
        .collect();
    if jobs.is_empty() {
        return Err(missing(&model_dir, "no trained checkpoints; run `train` first"));
    }
    let results = parallel(&jobs, ctx.workers, |&(target, seed)| -> Result<(RunRecord, PathBuf)> {
        let bundle = ctx.split(target, seed)?;
        let mut model = build(ctx, &graph, target, seed)?;
        let ckpt = model_dir.join(run_file(target, seed, "mxck"));
        let (tensors, manifest) = read_checkpoint(&ckpt)?;
        if manifest.fingerprint != ctx.cfg.experiment.fingerprint() {
            return Err(Usage(format!("{} was trained with a different config", ckpt.display())).into());
        }
        load_into(model.params_mut(), &tensors)?;
        let text = fs::read_to_string(model_dir.join(run_file(target, seed, "summary.json")))?;
        let summary: TrainSummary = serde_json::from_str(&text)?;
        let record = evaluate_run(&graph, &pool, &model, &bundle, &summary)?;
        let path = write(
            &dir.join(run_file(target, seed, "json")),
            serde_json::to_string_pretty(&record)?,
        )?;
        Ok((record, path))
    });
    let mut records = Vec::new();
    let mut files = Vec::new();
    for r in results {
        let (rec, path) = r?;
        records.push(rec);
        files.push(path);
    }
    ctx.record(&format!("evaluate/{}", ctx.cfg.experiment.model.as_str()), files)?;
    Ok(records)
}

/// Assembles the report of this run directory's current model, merged with
/// the reports found under `extra` run directories.
pub fn report(ctx: &Ctx, extra: &[PathBuf]) -> Result<(MetricsReport, String)> {
    let graph = ctx.graph()?;
    let cfg = &ctx.cfg.experiment;
    let dir = evaluation_dir(ctx);
    let mut records = Vec::new();
    for (target, seed) in ctx.jobs(&graph)? {
        let path = dir.join(run_file(target, seed, "json"));
        if let Ok(text) = fs::read_to_string(&path) {
            records.push(serde_json::from_str::<RunRecord>(&text)?);
        }
    }
    if records.is_empty() {
        return Err(missing(&dir, "no evaluated runs; run `evaluate` first"));
    }
    let failures_path = ctx.model_dir().join("failures.json");
    let mut failures: Vec<RunFailure> = match fs::read_to_string(&failures_path) {
        Ok(t) => serde_json::from_str(&t)?,
        Err(_) => Vec::new(),
    };
    let done: Vec<(usize, u64)> = records.iter().map(|r| (r.target_layer, r.seed)).collect();
    for (target, seed) in ctx.jobs(&graph)? {
        if !done.contains(&(target, seed)) && !failures.iter().any(|f| (f.target_layer, f.seed) == (target, seed)) {
            failures.push(RunFailure {
                target_layer: target,
                seed,
                error: "not evaluated".into(),
            });
        }
    }
    let mut reports = vec![MetricsReport::new(ctx.cfg.dataset_name(), cfg, records, failures)];
    for other in extra {
        let path = other.join("report").join(format!("{}.json", cfg.model.as_str()));
        let text = fs::read_to_string(&path).map_err(|_| missing(&path, "no report in that run directory"))?;
        reports.push(MetricsReport::from_json(&text)?);
    }
    let report = if reports.len() == 1 {
        reports.pop().expect("one report")
    } else {
        MetricsReport::merge(&reports).map_err(|e| Usage(format!("cannot aggregate: {e}")))?
    };

    let out_dir = ctx.dir(&["report"])?;
    let json = out_dir.join(format!("{}.json", cfg.model.as_str()));
    let csv = out_dir.join(format!("{}.csv", cfg.model.as_str()));
    report.save(&json, &csv)?;

    // the table covers every model reported in this directory
    let mut all: BTreeMap<String, MetricsReport> = BTreeMap::new();
    for entry in fs::read_dir(&out_dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json") && !p.ends_with(crate::config::CONFIG_FILE) {
            let r = MetricsReport::from_json(&fs::read_to_string(&p)?)?;
            all.insert(p.display().to_string(), r);
        }
    }
    let tables: Vec<MetricsReport> = all.into_values().collect();
    let table = render_table(&tables);
    let table_path = write(&out_dir.join("table.txt"), &table)?;
    ctx.record(&format!("report/{}", cfg.model.as_str()), vec![json, csv, table_path])?;
    Ok((report, table))
}
