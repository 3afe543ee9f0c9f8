//! Declarative run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crosslayer::graph::EdgeListFormat;
use crosslayer::models::ModelKind;
use crosslayer::train::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::Usage;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub format: EdgeListFormat,
    /// Name used in reports; the file stem when absent.
    pub name: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| Usage(format!("config {}: {e}", path.display())))
            .map_err(Into::into)
    }

    /// The explicit `--config` file, else the effective config last written
    /// to `out`, else defaults.
    pub fn resolve(explicit: Option<&Path>, out: &Path) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => {
                let saved = out.join(CONFIG_FILE);
                if saved.exists() {
                    Self::load(&saved)
                } else {
                    Ok(Self::default())
                }
            }
        }
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.name.clone().unwrap_or_else(|| {
            self.dataset
                .path
                .as_deref()
                .and_then(Path::file_stem)
                .map(|s| s.to_string_lossy().trim_end_matches("_multiplex").to_string())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| Usage(e.to_string()))?;
        if let Some(p) = &self.dataset.path {
            if !p.exists() {
                return Err(crosslayer::Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub const CONFIG_FILE: &str = "config.json";

/// Flags that override fields of the experiment section.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ExperimentArgs {
    /// trans_sle or trans_gat
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// transductive or inductive
    #[arg(long)]
    pub protocol: Option<crosslayer::graph::SplitProtocol>,
    /// Target layer index; repeat for several. All layers by default.
    #[arg(long = "target")]
    pub targets: Vec<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub d_node: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub no_layer_codes: bool,
    #[arg(long)]
    pub no_feedforward: bool,
    #[arg(long)]
    pub no_self_loops: bool,
    /// Initialize Trans-GAT node features from Node2Vec embeddings.
    #[arg(long)]
    pub gat_from_node2vec: bool,
    /// Append the Trans-GAT CLS token instead of replacing the target view.
    #[arg(long)]
    pub cls_append: bool,
}

impl ExperimentArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        if !self.targets.is_empty() {
            cfg.targets = self.targets.clone();
        }
        let t = &mut cfg.train;
        t.lr = self.lr.unwrap_or(t.lr);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.max_epochs = self.max_epochs.unwrap_or(t.max_epochs);
        t.patience = self.patience.unwrap_or(t.patience);
        let n = &mut cfg.node2vec;
        n.d_node = self.d_node.unwrap_or(n.d_node);
        n.p = self.p.unwrap_or(n.p);
        n.q = self.q.unwrap_or(n.q);
        let o = &mut cfg.options;
        o.layer_codes &= !self.no_layer_codes;
        o.feedforward &= !self.no_feedforward;
        o.self_loops &= !self.no_self_loops;
        o.gat_features_from_node2vec |= self.gat_from_node2vec;
        if self.cls_append {
            o.cls_placement = crosslayer::models::ClsPlacement::Append;
        }
    }
}
