//! TOML run configuration: dataset location, run hyper-parameters, output
//! directory. Flag overrides win over file values; unknown keys are
//! rejected. The fully-resolved config is echoed into the output directory
//! of every command for reproducibility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgcl_core::encoder::EncoderKind;
use sgcl_core::graph::{
    load_content_cites, load_geomgcn_text, read_neutral, Graph, LoadWarnings,
};
use sgcl_core::loss::ConfidenceRule;
use sgcl_core::train::{Mode, RunConfig};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Short name; resolvable against `data_root` when no paths are given.
    pub name: Option<String>,
    /// Directory scanned when only a name is given.
    pub data_root: PathBuf,
    /// `content_cites`, `geomgcn` or `neutral` (inferred when omitted).
    pub format: Option<String>,
    /// content_cites paths.
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    /// geomgcn paths.
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// neutral-format directory.
    pub dir: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: None,
            data_root: PathBuf::from("data"),
            format: None,
            content: None,
            cites: None,
            edges: None,
            features: None,
            dir: None,
        }
    }
}

/// Hyper-parameters of one run; mirrors the harness `RunConfig`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub encoder: EncoderKind,
    pub mode: Mode,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub tau: f64,
    pub rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
    /// Confidence threshold for the pseudo-label set.
    pub threshold: f64,
    /// When set, use per-class top-k confidence selection instead.
    pub top_k: Option<usize>,
    pub warmup_epochs: usize,
    pub edge_drop: f64,
    pub feat_mask: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub gpr_steps: usize,
    pub gpr_alpha: f64,
    pub normalize_features: bool,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::new(EncoderKind::Gcn, Mode::Full);
        RunSection {
            encoder: d.encoder,
            mode: d.mode,
            epochs: d.epochs,
            lr: d.lr,
            weight_decay: d.weight_decay,
            lambda: d.lambda,
            tau: d.tau,
            rank: d.rank,
            oversample: d.oversample,
            power_iters: d.power_iters,
            threshold: match d.confidence {
                ConfidenceRule::Threshold(t) => t,
                _ => 0.8,
            },
            top_k: None,
            warmup_epochs: d.warmup_epochs,
            edge_drop: d.edge_drop,
            feat_mask: d.feat_mask,
            hidden: d.hidden,
            dropout: d.dropout,
            gpr_steps: d.gpr_steps,
            gpr_alpha: d.gpr_alpha,
            normalize_features: d.normalize_features,
            seed: d.seed,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("bad config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable config")
    }

    /// Harness run configuration from the run section.
    pub fn run_config(&self) -> RunConfig {
        let r = &self.run;
        let mut cfg = RunConfig::new(r.encoder, r.mode);
        cfg.epochs = r.epochs;
        cfg.lr = r.lr;
        cfg.weight_decay = r.weight_decay;
        cfg.lambda = r.lambda;
        cfg.tau = r.tau;
        cfg.rank = r.rank;
        cfg.oversample = r.oversample;
        cfg.power_iters = r.power_iters;
        cfg.confidence = match r.top_k {
            Some(k) => ConfidenceRule::PerClassTopK(k),
            None => ConfidenceRule::Threshold(r.threshold),
        };
        cfg.warmup_epochs = r.warmup_epochs;
        cfg.edge_drop = r.edge_drop;
        cfg.feat_mask = r.feat_mask;
        cfg.hidden = r.hidden;
        cfg.dropout = r.dropout;
        cfg.gpr_steps = r.gpr_steps;
        cfg.gpr_alpha = r.gpr_alpha;
        cfg.normalize_features = r.normalize_features;
        cfg.seed = r.seed;
        cfg
    }

    /// Dataset display name for reports.
    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.dataset.name {
            return name.clone();
        }
        for p in [
            &self.dataset.dir,
            &self.dataset.content,
            &self.dataset.edges,
        ]
        .into_iter()
        .flatten()
        {
            if let Some(stem) = p.file_stem() {
                return stem.to_string_lossy().into_owned();
            }
        }
        "dataset".to_string()
    }
}

/// Load the configured dataset. Explicit paths win; otherwise the name is
/// resolved under `data_root` by probing the known layouts.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<(Graph<f64>, LoadWarnings), CliError> {
    let format = cfg.format.as_deref();
    if let (Some(content), Some(cites)) = (&cfg.content, &cfg.cites) {
        check_format(format, "content_cites")?;
        return load_content_cites(content, cites).map_err(CliError::data);
    }
    if let (Some(edges), Some(features)) = (&cfg.edges, &cfg.features) {
        check_format(format, "geomgcn")?;
        return load_geomgcn_text(edges, features).map_err(CliError::data);
    }
    if let Some(dir) = &cfg.dir {
        check_format(format, "neutral")?;
        let g = read_neutral(dir).map_err(CliError::data)?;
        return Ok((g, LoadWarnings::default()));
    }
    let Some(name) = &cfg.name else {
        return Err(CliError::config(
            "no dataset given: set dataset.name or explicit paths".to_string(),
        ));
    };
    let root = cfg.data_root.join(name);
    let content = root.join(format!("{name}.content"));
    let cites = root.join(format!("{name}.cites"));
    if content.exists() && cites.exists() {
        return load_content_cites(&content, &cites).map_err(CliError::data);
    }
    let edges = root.join("out1_graph_edges.txt");
    let features = root.join("out1_node_feature_label.txt");
    if edges.exists() && features.exists() {
        return load_geomgcn_text(&edges, &features).map_err(CliError::data);
    }
    if root.join("meta.json").exists() {
        let g = read_neutral(&root).map_err(CliError::data)?;
        return Ok((g, LoadWarnings::default()));
    }
    Err(CliError::data_msg(format!(
        "dataset '{name}' not found under {}: expected {name}.content/{name}.cites, \
         out1_graph_edges.txt/out1_node_feature_label.txt, or meta.json",
        root.display()
    )))
}

fn check_format(given: Option<&str>, actual: &str) -> Result<(), CliError> {
    match given {
        None => Ok(()),
        Some(f) if f == actual => Ok(()),
        Some(f) => Err(CliError::config(format!(
            "dataset.format is '{f}' but the given paths imply '{actual}'"
        ))),
    }
}
