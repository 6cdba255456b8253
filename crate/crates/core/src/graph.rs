//! Graph data: loaders, symmetric normalization, and fixed splits.
//!
//! Two plain-text input formats are supported, plus a neutral TSV/JSON
//! format for round-tripping:
//!
//! - content/cites: `<id> <feat...> <label>` rows and `<cited> <citing>`
//!   edge rows (classic citation-network layout, tab-separated);
//! - edge/feature-label text: `out1_graph_edges.txt` (header line, then
//!   tab-separated id pairs) and `out1_node_feature_label.txt` (header line,
//!   then `id <tab> comma-separated features <tab> label`).
//!
//! Edges are stored undirected, deduplicated, without self-loops; self-loops
//! enter through the normalization `D^{-1/2}(A + I)D^{-1/2}`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("class {class} has only {count} nodes; at least {min} are needed for splitting")]
    ClassTooSmall {
        class: usize,
        count: usize,
        min: usize,
    },
}

pub type GraphResult<T> = Result<T, GraphError>;

/// An attributed, labeled, undirected graph.
#[derive(Clone)]
pub struct Graph<T: Scalar> {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    features: Tensor<T>,
    /// Undirected edges with `i < j`, sorted, deduplicated, no self-loops.
    edges: Vec<(u32, u32)>,
    labels: Vec<usize>,
}

/// Counters for benign anomalies encountered while loading.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LoadWarnings {
    /// Edge lines whose endpoint id was not in the node table.
    pub unknown_endpoints: usize,
    /// Self-loop edge lines (dropped; normalization re-adds the diagonal).
    pub self_loops: usize,
    /// Directed duplicates / repeated lines collapsed away.
    pub duplicate_edges: usize,
}

impl<T: Scalar> std::fmt::Debug for Graph<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Graph[{} nodes, {} features, {} classes, {} edges]",
            self.num_nodes,
            self.num_features,
            self.num_classes,
            self.edges.len()
        )
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new(
        features: Tensor<T>,
        edges: Vec<(u32, u32)>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> GraphResult<Self> {
        let num_nodes = features.rows();
        let num_features = features.cols();
        if labels.len() != num_nodes {
            return Err(GraphError::Invalid(format!(
                "{} labels for {} nodes",
                labels.len(),
                num_nodes
            )));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in &edges {
            if a as usize >= num_nodes || b as usize >= num_nodes {
                return Err(GraphError::Invalid(format!(
                    "edge ({a},{b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                return Err(GraphError::Invalid(format!("self-loop on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut class_seen = vec![false; num_classes];
        for (node, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(GraphError::Invalid(format!(
                    "label {l} of node {node} out of range for {num_classes} classes"
                )));
            }
            class_seen[l] = true;
        }
        if let Some(missing) = class_seen.iter().position(|&s| !s) {
            return Err(GraphError::Invalid(format!("class {missing} has no nodes")));
        }
        Ok(Graph {
            num_nodes,
            num_features,
            num_classes,
            features,
            edges: set.into_iter().collect(),
            labels,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor<T> {
        &self.features
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Replace the feature matrix (same shape required).
    pub fn with_features(&self, features: Tensor<T>) -> GraphResult<Self> {
        if features.shape() != self.features.shape() {
            return Err(GraphError::Invalid("feature shape changed".into()));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }
}

/// Symmetric self-loop-augmented normalized adjacency
/// `D^{-1/2}(A + I)D^{-1/2}`, stored sparse.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency<T: Scalar> {
    csr: CsrMatrix<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    /// Wrap an already-normalized symmetric CSR matrix.
    pub(crate) fn from_csr(csr: CsrMatrix<T>) -> Self {
        NormalizedAdjacency { csr }
    }

    pub fn num_nodes(&self) -> usize {
        self.csr.rows()
    }

    pub fn csr(&self) -> &CsrMatrix<T> {
        &self.csr
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.csr.get(i, j)
    }

    pub fn to_dense(&self) -> Vec<T> {
        self.csr.to_dense()
    }
}

impl<T: Scalar> crate::tensor::LinearMap<T> for NormalizedAdjacency<T> {
    fn out_rows(&self) -> usize {
        self.csr.rows()
    }

    fn in_rows(&self) -> usize {
        self.csr.cols()
    }

    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]) {
        self.csr.apply_to(x, cols, out)
    }

    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]) {
        // symmetric, but route through the real transpose product anyway
        self.csr.apply_transpose_to(g, cols, out)
    }
}

/// Build `D^{-1/2}(A + I)D^{-1/2}`. Isolated nodes get a diagonal entry of 1.
pub fn normalize_adjacency<T: Scalar>(g: &Graph<T>) -> NormalizedAdjacency<T> {
    let n = g.num_nodes();
    let mut degree = vec![1.0f64; n]; // self-loop
    for &(a, b) in g.edges() {
        degree[a as usize] += 1.0;
        degree[b as usize] += 1.0;
    }
    let mut entries = Vec::with_capacity(2 * g.num_edges() + n);
    for (i, &d) in degree.iter().enumerate() {
        entries.push((i, i, T::from_f64(1.0 / d)));
    }
    for &(a, b) in g.edges() {
        let (a, b) = (a as usize, b as usize);
        let v = T::from_f64(1.0 / (degree[a] * degree[b]).sqrt());
        entries.push((a, b, v));
        entries.push((b, a, v));
    }
    NormalizedAdjacency {
        csr: CsrMatrix::from_triplets(n, n, entries),
    }
}

/// One train/val/test partition of the node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Ten fixed node splits, 60/20/20 per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub splits: Vec<Split>,
}

pub const NUM_SPLITS: usize = 10;
const MIN_CLASS_SIZE: usize = 5;

/// Per class: shuffle, then floor(0.6 n) train, floor(0.2 n) val, rest test.
/// The ten split seeds are derived from `rng` as substreams, so the result
/// depends only on the seed.
pub fn generate_splits<T: Scalar>(g: &Graph<T>, rng: &RngState) -> GraphResult<SplitSet> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes()];
    for (node, &l) in g.labels().iter().enumerate() {
        by_class[l].push(node);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < MIN_CLASS_SIZE {
            return Err(GraphError::ClassTooSmall {
                class,
                count: members.len(),
                min: MIN_CLASS_SIZE,
            });
        }
    }
    let mut splits = Vec::with_capacity(NUM_SPLITS);
    for split_idx in 0..NUM_SPLITS {
        let mut split_rng = rng.substream(split_idx as u64);
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for members in &by_class {
            let mut order = members.clone();
            split_rng.shuffle(&mut order);
            let n = order.len();
            let n_train = (0.6 * n as f64).floor() as usize;
            let n_val = (0.2 * n as f64).floor() as usize;
            split.train.extend(&order[..n_train]);
            split.val.extend(&order[n_train..n_train + n_val]);
            split.test.extend(&order[n_train + n_val..]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        splits.push(split);
    }
    Ok(SplitSet { splits })
}

// ---- content/cites loader ----

/// Load the classic citation layout: a content file of
/// `<id> <tab> <features...> <tab> <label>` rows and a cites file of
/// `<cited> <tab> <citing>` pairs. Node order follows first appearance in
/// the content file; labels are densified by sorted label-string order.
/// Edge lines naming unknown ids are skipped and counted.
pub fn load_content_cites<T: Scalar>(
    content_path: &Path,
    cites_path: &Path,
) -> GraphResult<(Graph<T>, LoadWarnings)> {
    let content = read_file(content_path)?;
    let mut ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut feature_rows: Vec<Vec<T>> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut num_features = None;
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(
                content_path,
                lineno + 1,
                "expected <id> <features...> <label>",
            ));
        }
        let id = fields[0];
        let label = fields[fields.len() - 1];
        let feats = &fields[1..fields.len() - 1];
        match num_features {
            None => num_features = Some(feats.len()),
            Some(f) if f != feats.len() => {
                return Err(parse_err(
                    content_path,
                    lineno + 1,
                    &format!("expected {f} feature values, found {}", feats.len()),
                ));
            }
            _ => {}
        }
        if ids.insert(id.to_string(), feature_rows.len() as u32).is_some() {
            return Err(parse_err(
                content_path,
                lineno + 1,
                &format!("duplicate node id {id}"),
            ));
        }
        let row: Result<Vec<T>, _> = feats
            .iter()
            .map(|s| s.parse::<f64>().map(T::from_f64))
            .collect();
        feature_rows.push(row.map_err(|_| {
            parse_err(content_path, lineno + 1, "feature value is not a number")
        })?);
        label_names.push(label.to_string());
    }
    if feature_rows.is_empty() {
        return Err(parse_err(content_path, 1, "empty content file"));
    }
    let labels = densify_labels(&label_names);
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;

    let cites = read_file(cites_path)?;
    let mut warnings = LoadWarnings::default();
    let mut edge_set: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (lineno, line) in cites.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(parse_err(cites_path, lineno + 1, "expected <cited> <citing>"));
        };
        let (Some(&ia), Some(&ib)) = (ids.get(a), ids.get(b)) else {
            warnings.unknown_endpoints += 1;
            continue;
        };
        if ia == ib {
            warnings.self_loops += 1;
            continue;
        }
        if !edge_set.insert((ia.min(ib), ia.max(ib))) {
            warnings.duplicate_edges += 1;
        }
    }
    let m = feature_rows.len();
    let f = num_features.unwrap();
    let features = Tensor::new(m, f, feature_rows.into_iter().flatten().collect())
        .map_err(|e| GraphError::Invalid(e.to_string()))?;
    let graph = Graph::new(features, edge_set.into_iter().collect(), labels, num_classes)?;
    Ok((graph, warnings))
}

// ---- edge/feature-label text loader ----

/// Load the tab-separated edge list + feature/label table layout
/// (`out1_graph_edges.txt`, `out1_node_feature_label.txt`). Node ids must be
/// `0..M-1`; both files carry a header line; directed duplicates collapse to
/// undirected edges.
pub fn load_geomgcn_text<T: Scalar>(
    edge_path: &Path,
    feature_label_path: &Path,
) -> GraphResult<(Graph<T>, LoadWarnings)> {
    let table = read_file(feature_label_path)?;
    let mut lines = table.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.starts_with("node_id") => {}
        _ => {
            return Err(parse_err(
                feature_label_path,
                1,
                "missing 'node_id<tab>feature<tab>label' header",
            ));
        }
    }
    let mut rows: Vec<(usize, Vec<T>, String)> = Vec::new();
    let mut num_features = None;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                feature_label_path,
                lineno + 1,
                "expected <id><tab><features><tab><label>",
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(feature_label_path, lineno + 1, "bad node id"))?;
        let feats: Result<Vec<T>, _> = fields[1]
            .split(',')
            .map(|s| s.trim().parse::<f64>().map(T::from_f64))
            .collect();
        let feats = feats.map_err(|_| {
            parse_err(feature_label_path, lineno + 1, "feature value is not a number")
        })?;
        match num_features {
            None => num_features = Some(feats.len()),
            Some(f) if f != feats.len() => {
                return Err(parse_err(
                    feature_label_path,
                    lineno + 1,
                    &format!("expected {f} feature values, found {}", feats.len()),
                ));
            }
            _ => {}
        }
        rows.push((id, feats, fields[2].trim().to_string()));
    }
    let m = rows.len();
    if m == 0 {
        return Err(parse_err(feature_label_path, 1, "no node rows"));
    }
    let mut seen = vec![false; m];
    for &(id, _, _) in &rows {
        if id >= m {
            return Err(GraphError::Parse {
                path: feature_label_path.to_path_buf(),
                line: 0,
                msg: format!("node id {id} out of range 0..{m}"),
            });
        }
        if seen[id] {
            return Err(GraphError::Invalid(format!("duplicate node id {id}")));
        }
        seen[id] = true;
    }
    rows.sort_by_key(|&(id, _, _)| id);
    let label_names: Vec<String> = rows.iter().map(|(_, _, l)| l.clone()).collect();
    let labels = densify_labels(&label_names);
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let f = num_features.unwrap();
    let features = Tensor::new(
        m,
        f,
        rows.into_iter().flat_map(|(_, feats, _)| feats).collect(),
    )
    .map_err(|e| GraphError::Invalid(e.to_string()))?;

    let edges_text = read_file(edge_path)?;
    let mut lines = edges_text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.starts_with("node_id") => {}
        _ => {
            return Err(parse_err(edge_path, 1, "missing 'node_id<tab>node_id' header"));
        }
    }
    let mut warnings = LoadWarnings::default();
    let mut edge_set: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(parse_err(edge_path, lineno + 1, "expected <id> <id>"));
        };
        let ia: usize = a
            .parse()
            .map_err(|_| parse_err(edge_path, lineno + 1, "bad node id"))?;
        let ib: usize = b
            .parse()
            .map_err(|_| parse_err(edge_path, lineno + 1, "bad node id"))?;
        if ia >= m || ib >= m {
            return Err(parse_err(
                edge_path,
                lineno + 1,
                &format!("edge id out of range 0..{m}"),
            ));
        }
        if ia == ib {
            warnings.self_loops += 1;
            continue;
        }
        let (lo, hi) = (ia.min(ib) as u32, ia.max(ib) as u32);
        if !edge_set.insert((lo, hi)) {
            warnings.duplicate_edges += 1;
        }
    }
    let graph = Graph::new(features, edge_set.into_iter().collect(), labels, num_classes)?;
    Ok((graph, warnings))
}

// ---- neutral on-disk format ----

#[derive(Serialize, Deserialize)]
struct NeutralMeta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

/// Write `meta.json`, `edges.tsv` (one `i<tab>j` per undirected edge, i < j),
/// `features.tsv` and `labels.tsv` into `dir`.
pub fn write_neutral<T: Scalar>(g: &Graph<T>, dir: &Path) -> GraphResult<()> {
    if g.num_features() == 0 {
        return Err(GraphError::Invalid("refusing to write graph with no features".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta = NeutralMeta {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
    };
    let meta_path = dir.join("meta.json");
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("serializable"),
    )
    .map_err(|e| io_err(&meta_path, e))?;

    write_lines(
        &dir.join("edges.tsv"),
        g.edges().iter().map(|&(a, b)| format!("{a}\t{b}")),
    )?;
    let f = g.num_features();
    write_lines(
        &dir.join("features.tsv"),
        (0..g.num_nodes()).map(|i| {
            let row = &g.features().data()[i * f..(i + 1) * f];
            row.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join("\t")
        }),
    )?;
    write_lines(
        &dir.join("labels.tsv"),
        g.labels().iter().map(|l| l.to_string()),
    )?;
    Ok(())
}

/// Read a graph written by [`write_neutral`].
pub fn read_neutral<T: Scalar>(dir: &Path) -> GraphResult<Graph<T>> {
    let meta_path = dir.join("meta.json");
    let meta_text = read_file(&meta_path)?;
    let meta: NeutralMeta = serde_json::from_str(&meta_text).map_err(|e| GraphError::Parse {
        path: meta_path.clone(),
        line: 0,
        msg: e.to_string(),
    })?;

    let feat_path = dir.join("features.tsv");
    let feat_text = read_file(&feat_path)?;
    let mut data = Vec::with_capacity(meta.num_nodes * meta.num_features);
    let mut rows = 0usize;
    for (lineno, line) in feat_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for s in line.split('\t') {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(&feat_path, lineno + 1, "bad feature value"))?;
            data.push(T::from_f64(v));
        }
        if data.len() - before != meta.num_features {
            return Err(parse_err(
                &feat_path,
                lineno + 1,
                &format!("expected {} feature values", meta.num_features),
            ));
        }
        rows += 1;
    }
    if rows != meta.num_nodes {
        return Err(GraphError::Invalid(format!(
            "features.tsv has {rows} rows, meta.json says {}",
            meta.num_nodes
        )));
    }
    let features = Tensor::new(meta.num_nodes, meta.num_features, data)
        .map_err(|e| GraphError::Invalid(e.to_string()))?;

    let labels_path = dir.join("labels.tsv");
    let labels_text = read_file(&labels_path)?;
    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (lineno, line) in labels_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labels.push(
            line.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(&labels_path, lineno + 1, "bad label"))?,
        );
    }

    let edges_path = dir.join("edges.tsv");
    let edges_text = read_file(&edges_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split('\t');
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(parse_err(&edges_path, lineno + 1, "expected <i><tab><j>"));
        };
        let a: u32 = a
            .parse()
            .map_err(|_| parse_err(&edges_path, lineno + 1, "bad node id"))?;
        let b: u32 = b
            .parse()
            .map_err(|_| parse_err(&edges_path, lineno + 1, "bad node id"))?;
        edges.push((a, b));
    }
    Graph::new(features, edges, labels, meta.num_classes)
}

/// Class-assortative random graph for tests and gradient fixtures: labels
/// round-robin over classes, edge probability `intra_p` within a class and
/// `inter_p` across, binary features correlated with the label band.
pub fn synthetic_community_graph<T: Scalar>(
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    intra_p: f64,
    inter_p: f64,
    rng: &mut RngState,
) -> Graph<T> {
    let labels: Vec<usize> = (0..num_nodes).map(|i| i % num_classes).collect();
    let mut edges = Vec::new();
    for i in 0..num_nodes as u32 {
        for j in (i + 1)..num_nodes as u32 {
            let p = if labels[i as usize] == labels[j as usize] {
                intra_p
            } else {
                inter_p
            };
            if rng.bernoulli(p) {
                edges.push((i, j));
            }
        }
    }
    let mut data = Vec::with_capacity(num_nodes * num_features);
    for &label in &labels {
        for j in 0..num_features {
            let aligned = j % num_classes == label;
            let p = if aligned { 0.7 } else { 0.1 };
            data.push(if rng.bernoulli(p) { T::one() } else { T::zero() });
        }
    }
    let features = Tensor::new(num_nodes, num_features, data).expect("positive dims");
    Graph::new(features, edges, labels, num_classes).expect("valid synthetic graph")
}

// ---- helpers ----

fn densify_labels(names: &[String]) -> Vec<usize> {
    let mut distinct: Vec<&String> = {
        let set: BTreeSet<&String> = names.iter().collect();
        set.into_iter().collect()
    };
    distinct.sort();
    let index: BTreeMap<&String, usize> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    names.iter().map(|n| index[n]).collect()
}

fn read_file(path: &Path) -> GraphResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: &str) -> GraphError {
    GraphError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

fn write_lines(
    path: &Path,
    lines: impl Iterator<Item = String>,
) -> GraphResult<()> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
