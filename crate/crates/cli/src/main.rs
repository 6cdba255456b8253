//! `sgcl` — train and analyze SVD-augmented graph contrastive models.
//!
//! Commands: `train`, `ablate`, `sweep`, `augment`, `gradcheck`, `convert`,
//! `config show-defaults`. Exit codes: 0 success, 1 configuration error,
//! 2 data error, 3 failed runs.

mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sgcl_core::graph::{
    generate_splits, load_content_cites, load_geomgcn_text, normalize_adjacency, write_neutral,
    Graph, SplitSet,
};
use sgcl_core::rng::RngState;
use sgcl_core::svd::{approx_svd, exact_svd_oracle, MAX_ORACLE_DIM};
use sgcl_core::tensor::Tensor;
use sgcl_core::train::{
    ablation_suite, lambda_sweep, multi_run_jobs, persist_metrics, records_from, Aggregate,
    MultiRunResult, RunConfig, SummaryEntry, LAMBDA_SWEEP_VALUES,
};

use config::{load_dataset, Config};

#[derive(Debug)]
pub struct CliError {
    code: i32,
    msg: String,
}

impl CliError {
    fn config(msg: String) -> Self {
        CliError { code: 1, msg }
    }

    fn data(e: sgcl_core::graph::GraphError) -> Self {
        CliError {
            code: 2,
            msg: e.to_string(),
        }
    }

    fn data_msg(msg: String) -> Self {
        CliError { code: 2, msg }
    }

    fn runs(msg: String) -> Self {
        CliError { code: 3, msg }
    }
}

#[derive(Parser)]
#[command(name = "sgcl", version, about = "SVD-directed graph contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one dataset/encoder/mode over the ten fixed splits.
    Train(RunOpts),
    /// Run all four modes over shared splits and seeds.
    Ablate(RunOpts),
    /// Sweep the contrastive-loss weight over its grid.
    Sweep(SweepOpts),
    /// Compute and dump the truncated SVD of the normalized adjacency.
    Augment(AugmentOpts),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckOpts),
    /// Convert a dataset to the neutral TSV/JSON format.
    Convert(ConvertOpts),
    /// Configuration helpers.
    Config(ConfigCmd),
}

#[derive(Args)]
struct CommonOpts {
    /// TOML configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset name resolved under the data root.
    #[arg(long)]
    dataset: Option<String>,
    /// Directory holding named datasets.
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Encoder backbone: gcn, gin or gprgnn.
    #[arg(long)]
    encoder: Option<String>,
    /// Confidence threshold for pseudo-label selection.
    #[arg(long)]
    threshold: Option<f64>,
    /// InfoNCE temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// SVD truncation rank.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel runs (one split per worker).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for metrics and the resolved config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Contrastive epochs before reweighting activates.
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    normalize_features: Option<bool>,
}

#[derive(Args)]
struct RunOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Training mode: baseline, random_aug, wo_lgdl or full.
    #[arg(long)]
    mode: Option<String>,
    /// Contrastive-loss weight.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct SweepOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Sweep values (defaults to the standard grid).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct AugmentOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Directory for U.tsv, S.tsv, V.tsv and the report.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckOpts {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Tolerance on the max relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional directory for the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertOpts {
    /// Input format: content_cites or geomgcn.
    format: String,
    /// Input files (content+cites, or edges+features).
    paths: Vec<PathBuf>,
    /// Output directory for the neutral files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigCmd {
    #[command(subcommand)]
    action: ConfigAction,
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the default configuration as TOML.
    ShowDefaults,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.msg);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(opts) => cmd_train(opts),
        Command::Ablate(opts) => cmd_ablate(opts),
        Command::Sweep(opts) => cmd_sweep(opts),
        Command::Augment(opts) => cmd_augment(opts),
        Command::Gradcheck(opts) => cmd_gradcheck(opts),
        Command::Convert(opts) => cmd_convert(opts),
        Command::Config(cmd) => match cmd.action {
            ConfigAction::ShowDefaults => {
                print!("{}", Config::default().to_toml());
                Ok(())
            }
        },
    }
}

fn resolve_config(common: &CommonOpts, mode: Option<&str>, lambda: Option<f64>) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(d) = &common.dataset {
        cfg.dataset.name = Some(d.clone());
    }
    if let Some(root) = &common.data_root {
        cfg.dataset.data_root = root.clone();
    }
    if let Some(e) = &common.encoder {
        cfg.run.encoder = e.parse().map_err(CliError::config)?;
    }
    if let Some(m) = mode {
        cfg.run.mode = m.parse().map_err(CliError::config)?;
    }
    if let Some(v) = lambda {
        cfg.run.lambda = v;
    }
    if let Some(v) = common.threshold {
        cfg.run.threshold = v;
    }
    if let Some(v) = common.tau {
        cfg.run.tau = v;
    }
    if let Some(v) = common.rank {
        cfg.run.rank = v;
    }
    if let Some(v) = common.seed {
        cfg.run.seed = v;
    }
    if let Some(v) = common.jobs {
        cfg.run.jobs = v;
    }
    if let Some(v) = &common.out {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = common.epochs {
        cfg.run.epochs = v;
    }
    if let Some(v) = common.lr {
        cfg.run.lr = v;
    }
    if let Some(v) = common.weight_decay {
        cfg.run.weight_decay = v;
    }
    if let Some(v) = common.hidden {
        cfg.run.hidden = v;
    }
    if let Some(v) = common.dropout {
        cfg.run.dropout = v;
    }
    if let Some(v) = common.warmup {
        cfg.run.warmup_epochs = v;
    }
    if let Some(v) = common.normalize_features {
        cfg.run.normalize_features = v;
    }
    if cfg.run.rank == 0 {
        return Err(CliError::config("rank must be positive".into()));
    }
    Ok(cfg)
}

/// Dataset, normalized adjacency and the ten splits for a resolved config.
fn prepare(
    cfg: &Config,
) -> Result<
    (
        Graph<f64>,
        Arc<sgcl_core::graph::NormalizedAdjacency<f64>>,
        SplitSet,
    ),
    CliError,
> {
    let (graph, warnings) = load_dataset(&cfg.dataset)?;
    if warnings.unknown_endpoints > 0 {
        log::warn!(
            "{} edge lines referenced unknown node ids and were skipped",
            warnings.unknown_endpoints
        );
    }
    let adj = Arc::new(normalize_adjacency(&graph));
    let split_rng = RngState::new(cfg.run.seed).substream(500);
    let splits = generate_splits(&graph, &split_rng).map_err(CliError::data)?;
    Ok((graph, adj, splits))
}

fn echo_config(cfg: &Config, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join("config_resolved.toml");
    std::fs::write(&path, cfg.to_toml())
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn print_aggregate_row(label: &str, agg: &Aggregate) {
    println!(
        "  {label:<12} {:>7.2} ± {:<5.2}  (n={}{})",
        100.0 * agg.mean,
        100.0 * agg.std,
        agg.n,
        if agg.incomplete { ", incomplete" } else { "" }
    );
}

fn summarize(dataset: &str, cfg: &RunConfig, result: &MultiRunResult) -> SummaryEntry {
    SummaryEntry {
        dataset: dataset.to_string(),
        encoder: cfg.encoder,
        mode: cfg.mode,
        lambda: cfg.lambda,
        aggregate: result.aggregate,
    }
}

fn cmd_train(opts: RunOpts) -> Result<(), CliError> {
    let cfg = resolve_config(&opts.common, opts.mode.as_deref(), opts.lambda)?;
    let (graph, adj, splits) = prepare(&cfg)?;
    echo_config(&cfg, &cfg.output.dir)?;
    let run_cfg = cfg.run_config();
    let name = cfg.dataset_name();
    println!(
        "training {name} / {} / {} over {} splits ({} epochs)",
        run_cfg.encoder,
        run_cfg.mode,
        splits.splits.len(),
        run_cfg.epochs
    );
    let result = multi_run_jobs(&graph, &adj, &splits, &run_cfg, cfg.run.jobs);
    let records = records_from(&name, &run_cfg, &result);
    let summary = vec![summarize(&name, &run_cfg, &result)];
    persist_metrics(&records, &summary, &cfg.output.dir)
        .map_err(|e| CliError::runs(e.to_string()))?;
    println!("test accuracy (mean ± std over splits):");
    print_aggregate_row(&format!("{}", run_cfg.mode), &result.aggregate);
    println!("metrics written to {}", cfg.output.dir.display());
    if result.aggregate.incomplete {
        return Err(CliError::runs("some runs failed; see runs.csv".into()));
    }
    Ok(())
}

fn cmd_ablate(opts: RunOpts) -> Result<(), CliError> {
    let cfg = resolve_config(&opts.common, opts.mode.as_deref(), opts.lambda)?;
    let (graph, adj, splits) = prepare(&cfg)?;
    echo_config(&cfg, &cfg.output.dir)?;
    let base = cfg.run_config();
    let name = cfg.dataset_name();
    println!(
        "ablation on {name} / {} over {} shared splits",
        base.encoder,
        splits.splits.len()
    );
    let table = ablation_suite(&graph, &adj, &splits, &base, cfg.run.jobs);
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut incomplete = false;
    println!("test accuracy (mean ± std over splits):");
    for (mode, result) in &table {
        let mut mode_cfg = base.clone();
        mode_cfg.mode = *mode;
        records.extend(records_from(&name, &mode_cfg, result));
        summaries.push(summarize(&name, &mode_cfg, result));
        print_aggregate_row(&mode.to_string(), &result.aggregate);
        incomplete |= result.aggregate.incomplete;
    }
    persist_metrics(&records, &summaries, &cfg.output.dir)
        .map_err(|e| CliError::runs(e.to_string()))?;
    println!("metrics written to {}", cfg.output.dir.display());
    if incomplete {
        return Err(CliError::runs("some runs failed; see runs.csv".into()));
    }
    Ok(())
}

fn cmd_sweep(opts: SweepOpts) -> Result<(), CliError> {
    let cfg = resolve_config(&opts.common, None, None)?;
    let (graph, adj, splits) = prepare(&cfg)?;
    echo_config(&cfg, &cfg.output.dir)?;
    let base = cfg.run_config();
    let name = cfg.dataset_name();
    let values = opts.values.unwrap_or_else(|| LAMBDA_SWEEP_VALUES.to_vec());
    println!(
        "lambda sweep on {name} / {} over {:?}",
        base.encoder, values
    );
    let curve = lambda_sweep(&graph, &adj, &splits, &base, &values, cfg.run.jobs);
    let mut csv = String::from("lambda,mean_test_acc,std_test_acc,n_runs\n");
    let mut summaries = Vec::new();
    let mut incomplete = false;
    println!("test accuracy (mean ± std over splits):");
    for (lambda, result) in &curve {
        let marker = if (*lambda - 0.1).abs() < 1e-12 {
            " (default)"
        } else {
            ""
        };
        print_aggregate_row(&format!("λ={lambda}{marker}"), &result.aggregate);
        csv.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            lambda, result.aggregate.mean, result.aggregate.std, result.aggregate.n
        ));
        let mut cfg_l = base.clone();
        cfg_l.lambda = *lambda;
        summaries.push(summarize(&name, &cfg_l, result));
        incomplete |= result.aggregate.incomplete;
    }
    let sweep_path = cfg.output.dir.join("sweep.csv");
    std::fs::write(&sweep_path, csv)
        .map_err(|e| CliError::runs(format!("cannot write {}: {e}", sweep_path.display())))?;
    let json = serde_json::to_string_pretty(&summaries).expect("serializable");
    let json_path = cfg.output.dir.join("summary.json");
    std::fs::write(&json_path, json)
        .map_err(|e| CliError::runs(format!("cannot write {}: {e}", json_path.display())))?;
    println!("curve written to {}", sweep_path.display());
    if incomplete {
        return Err(CliError::runs("some runs failed".into()));
    }
    Ok(())
}

fn cmd_augment(opts: AugmentOpts) -> Result<(), CliError> {
    let cfg = resolve_config(&opts.common, None, None)?;
    let (graph, _) = load_dataset(&cfg.dataset)?;
    let adj = normalize_adjacency(&graph);
    let dump = opts.dump.unwrap_or_else(|| cfg.output.dir.clone());
    echo_config(&cfg, &dump)?;
    let mut rng = RngState::new(cfg.run.seed).substream(3);
    let factors = approx_svd(
        &adj,
        cfg.run.rank,
        cfg.run.oversample,
        cfg.run.power_iters,
        &mut rng,
    )
    .map_err(|e| CliError::config(e.to_string()))?;

    let m = factors.num_rows();
    let q = factors.rank();
    let write_mat = |name: &str, data: &[f64], cols: usize| -> Result<(), CliError> {
        let mut text = String::new();
        for row in data.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            text.push_str(&line.join("\t"));
            text.push('\n');
        }
        let path = dump.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::runs(format!("cannot write {}: {e}", path.display())))
    };
    write_mat("U.tsv", factors.u(), q)?;
    write_mat("S.tsv", factors.singular_values(), 1)?;
    write_mat("V.tsv", factors.v(), q)?;

    let mut report = String::new();
    report.push_str(&format!(
        "nodes: {m}\nrank: {q}\nsingular values: {:?}\n",
        factors.singular_values()
    ));
    if m <= MAX_ORACLE_DIM {
        let dense = adj.to_dense();
        let t = Tensor::new(m, m, dense.clone()).expect("square");
        let oracle = exact_svd_oracle(&t, q).map_err(|e| CliError::runs(e.to_string()))?;
        let approx_err = factors.reconstruction_error(&dense);
        let oracle_err = oracle.reconstruction_error(&dense);
        let ratio = if oracle_err > 0.0 {
            approx_err / oracle_err
        } else if approx_err <= 1e-8 {
            1.0
        } else {
            f64::INFINITY
        };
        report.push_str(&format!(
            "frobenius error: {approx_err:.6e}\noracle error: {oracle_err:.6e}\nratio: {ratio:.4}\n"
        ));
        println!("reconstruction error {approx_err:.4e} ({ratio:.3}x the exact rank-{q} optimum)");
    } else {
        report.push_str("oracle comparison skipped: graph exceeds the dense-oracle guard\n");
    }
    let report_path = dump.join("report.txt");
    std::fs::write(&report_path, report)
        .map_err(|e| CliError::runs(format!("cannot write {}: {e}", report_path.display())))?;
    println!(
        "factors written to {} (U.tsv {m}x{q}, S.tsv {q}, V.tsv {m}x{q})",
        dump.display()
    );
    Ok(())
}

fn cmd_gradcheck(opts: GradcheckOpts) -> Result<(), CliError> {
    let report = sgcl_core::gradcheck::encoder_objective_suite(opts.step, opts.seed);
    let mut text = String::new();
    println!("gradient checks (central differences, h = {:.0e}):", opts.step);
    for entry in &report.entries {
        let line = format!(
            "  {:<18} max rel err {:.3e}  ({} parameter entries)",
            entry.name, entry.max_rel_err, entry.params_checked
        );
        println!("{line}");
        text.push_str(&line);
        text.push('\n');
    }
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("gradcheck.txt");
        std::fs::write(&path, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    if report.all_within(opts.tolerance) {
        println!("all checks within {:.0e}", opts.tolerance);
        Ok(())
    } else {
        Err(CliError::config(format!(
            "worst gradient error {:.3e} exceeds tolerance {:.0e}",
            report.worst(),
            opts.tolerance
        )))
    }
}

fn cmd_convert(opts: ConvertOpts) -> Result<(), CliError> {
    let (graph, warnings): (Graph<f64>, _) = match opts.format.as_str() {
        "content_cites" => {
            let [content, cites] = two_paths(&opts.paths, "content and cites files")?;
            load_content_cites(content, cites).map_err(CliError::data)?
        }
        "geomgcn" => {
            let [edges, features] = two_paths(&opts.paths, "edge and feature/label files")?;
            load_geomgcn_text(edges, features).map_err(CliError::data)?
        }
        other => {
            return Err(CliError::config(format!(
                "unknown input format '{other}' (expected content_cites or geomgcn)"
            )));
        }
    };
    write_neutral(&graph, &opts.out).map_err(CliError::data)?;
    println!(
        "converted: {} nodes, {} features, {} classes, {} undirected edges -> {}",
        graph.num_nodes(),
        graph.num_features(),
        graph.num_classes(),
        graph.num_edges(),
        opts.out.display()
    );
    if warnings.unknown_endpoints + warnings.self_loops + warnings.duplicate_edges > 0 {
        println!(
            "  skipped: {} unknown-endpoint lines, {} self-loops, {} duplicates",
            warnings.unknown_endpoints, warnings.self_loops, warnings.duplicate_edges
        );
    }
    Ok(())
}

fn two_paths<'a>(paths: &'a [PathBuf], what: &str) -> Result<[&'a PathBuf; 2], CliError> {
    match paths {
        [a, b] => Ok([a, b]),
        _ => Err(CliError::config(format!(
            "expected exactly two paths ({what}), got {}",
            paths.len()
        ))),
    }
}
