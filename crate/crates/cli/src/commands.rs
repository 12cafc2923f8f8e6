//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;

use xmctree::analysis::{
    alpha_stats as compute_alpha_stats, estimate_tree_size, max_depth, theorem1_alpha_bound,
    theorem2_check, training_cost_estimate, BalancedTreeParams, CostParams, SizeEstimate,
};
use xmctree::model::Model;
use xmctree::predict::predict_batch;
use xmctree::solver::{train_ovr, train_tree, LossSpec, TrainConfig, TrainWarnings};
use xmctree::tree::{build_label_tree, LabelTree};
use xmctree::{MultiLabelDataset, ParseOptions};

use crate::config::{pick, pick_opt, FileConfig};
use crate::output::{write_file, Emitter};
use crate::{
    AlphaStatsArgs, AnalyzeArgs, CliError, CommonArgs, DataArgs, EmitKind, EstimateArgs,
    EvalArgs, PredictArgs, Preset, PruneArgs, TrainArgs, TreeArgs,
};

const DEFAULT_SEED: u64 = 42;
const DEFAULT_K: u32 = 100;
const DEFAULT_D_MAX: u32 = 6;

/// Settings shared by every command, resolved from flags and the file.
#[derive(Debug, Clone, Serialize)]
pub struct CommonResolved {
    pub out_dir: PathBuf,
    pub threads: usize,
    pub emit: String,
    pub seed: u64,
}

fn resolve_common(args: &CommonArgs, file: &FileConfig) -> Result<CommonResolved, CliError> {
    let emit = match args.emit {
        Some(EmitKind::Json) => "json".to_string(),
        Some(EmitKind::Csv) => "csv".to_string(),
        None => pick(None, file.emit.clone(), "csv".to_string()),
    };
    if emit != "csv" && emit != "json" {
        return Err(CliError::usage(format!("unknown emit format `{emit}`")));
    }
    let resolved = CommonResolved {
        out_dir: pick(args.out_dir.clone(), file.out_dir.clone(), PathBuf::from(".")),
        threads: pick(args.threads, file.threads, 0),
        emit,
        seed: pick(args.seed, file.seed, DEFAULT_SEED),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if resolved.threads > 0 {
        builder = builder.num_threads(resolved.threads);
    }
    // a second build in the same process keeps the first pool; fine for a CLI
    let _ = builder.build_global();
    Ok(resolved)
}

#[derive(Debug, Clone, Serialize)]
pub struct DataResolved {
    pub path: PathBuf,
    pub n_features: Option<u32>,
    pub n_labels: Option<u32>,
    pub zero_based: bool,
}

fn resolve_data(args: &DataArgs, file: &FileConfig, what: &str) -> Result<DataResolved, CliError> {
    resolve_data_from(args, file, what, file.data.path.clone())
}

/// Test-consuming commands prefer `data.test_path` from the file config.
fn resolve_test_data(args: &DataArgs, file: &FileConfig) -> Result<DataResolved, CliError> {
    let from_file = file.data.test_path.clone().or_else(|| file.data.path.clone());
    resolve_data_from(args, file, "test data", from_file)
}

fn resolve_data_from(
    args: &DataArgs,
    file: &FileConfig,
    what: &str,
    from_file: Option<PathBuf>,
) -> Result<DataResolved, CliError> {
    let path = pick_opt(args.data.clone(), from_file)
        .ok_or_else(|| CliError::usage(format!("no {what} given: pass --data or set data.path")))?;
    Ok(DataResolved {
        path,
        n_features: pick_opt(args.n_features, file.data.n_features),
        n_labels: pick_opt(args.n_labels, file.data.n_labels),
        zero_based: args.zero_based || file.data.zero_based.unwrap_or(false),
    })
}

/// Loads a dataset, consulting an optional `<path>.meta` sidecar for
/// declared dimensions (explicit settings win over the sidecar).
fn load_dataset(spec: &DataResolved) -> Result<MultiLabelDataset, CliError> {
    let mut n_features = spec.n_features;
    let mut n_labels = spec.n_labels;
    let sidecar = PathBuf::from(format!("{}.meta", spec.path.display()));
    if sidecar.is_file() {
        let text = std::fs::read_to_string(&sidecar)
            .map_err(|e| CliError::data(format!("reading {}: {e}", sidecar.display())))?;
        let meta = xmctree::parse_sidecar(&text)?;
        n_features = n_features.or(meta.n_features);
        n_labels = n_labels.or(meta.n_labels);
    }
    let file = std::fs::File::open(&spec.path)
        .map_err(|e| CliError::data(format!("opening {}: {e}", spec.path.display())))?;
    let opts = ParseOptions {
        n_features,
        n_labels,
        expected_instances: None,
        zero_based: spec.zero_based,
    };
    let ds = xmctree::parse_libsvm_multilabel(std::io::BufReader::new(file), &opts)?;
    if ds.n_instances() == 0 {
        return Err(CliError::data(format!(
            "{} holds no instances",
            spec.path.display()
        )));
    }
    Ok(ds)
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeResolved {
    pub k: u32,
    pub d_max: u32,
    pub preset: Option<String>,
}

/// Applies the preset: `varied-k` derives K as the smallest integer whose
/// `d_max`-th power reaches L (the exact ceiling of L^(1/d_max)).
fn resolve_tree(args: &TreeArgs, file: &FileConfig, n_labels: u32) -> Result<TreeResolved, CliError> {
    let d_max = pick(args.d_max, file.tree.d_max, DEFAULT_D_MAX);
    let preset = match args.preset {
        Some(Preset::FixedK) => Some("fixed-k".to_string()),
        Some(Preset::VariedK) => Some("varied-k".to_string()),
        None => pick_opt(None, file.tree.preset.clone()),
    };
    let k = match preset.as_deref() {
        Some("varied-k") => ceil_root(n_labels as u64, d_max)
            .max(2)
            .try_into()
            .map_err(|_| CliError::numeric("derived K does not fit in 32 bits"))?,
        Some("fixed-k") | None => pick(args.k, file.tree.k, DEFAULT_K),
        Some(other) => return Err(CliError::usage(format!("unknown preset `{other}`"))),
    };
    Ok(TreeResolved {
        k,
        d_max,
        preset,
    })
}

/// Smallest integer `r` with `r^d >= value`.
fn ceil_root(value: u64, d: u32) -> u64 {
    if value <= 1 || d == 0 {
        return value.max(1);
    }
    let mut r = (value as f64).powf(1.0 / d as f64).floor() as u64;
    r = r.saturating_sub(1).max(1);
    while (r as u128).pow(d) < value as u128 {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::ceil_root;

    #[test]
    fn ceil_root_is_exact_at_boundaries() {
        assert_eq!(ceil_root(30_938, 3), 32);
        assert_eq!(ceil_root(27, 3), 3);
        assert_eq!(ceil_root(28, 3), 4);
        assert_eq!(ceil_root(1_000_000, 2), 1000);
        assert_eq!(ceil_root(1_000_001, 2), 1001);
        assert_eq!(ceil_root(1, 5), 1);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverResolved {
    pub loss: String,
    pub lambda: f64,
    pub eps: f64,
    pub max_iter: u32,
}

fn resolve_solver(
    loss: &Option<String>,
    lambda: Option<f64>,
    eps: Option<f64>,
    max_iter: Option<u32>,
    file: &FileConfig,
) -> Result<(SolverResolved, TrainConfig), CliError> {
    let loss_name = pick(loss.clone(), file.solver.loss.clone(), "squared_hinge".to_string());
    let kind: xmctree::LossKind = loss_name.parse()?;
    let resolved = SolverResolved {
        loss: kind.name().to_string(),
        lambda: pick(lambda, file.solver.lambda, 1.0),
        eps: pick(eps, file.solver.eps, 0.1),
        max_iter: pick(max_iter, file.solver.max_iter, 1000),
    };
    let config = TrainConfig {
        loss: LossSpec::new(kind, resolved.lambda)?,
        eps: resolved.eps,
        max_iter: resolved.max_iter,
        seed: 0, // filled by the caller
    };
    Ok((resolved, config))
}

fn report_warnings(warnings: &TrainWarnings) {
    if !warnings.no_positives.is_empty() {
        eprintln!(
            "warning: {} binary problem(s) had no positive instances",
            warnings.no_positives.len()
        );
    }
    if !warnings.unconverged.is_empty() {
        eprintln!(
            "warning: {} binary problem(s) hit the epoch cap before converging",
            warnings.unconverged.len()
        );
    }
}

fn size_report_rows(estimate: &SizeEstimate) -> Vec<Vec<String>> {
    estimate
        .per_node
        .iter()
        .map(|row| {
            vec![
                row.node_id.to_string(),
                row.depth.to_string(),
                row.children.to_string(),
                row.used_features.to_string(),
            ]
        })
        .collect()
}

fn print_estimate(estimate: &SizeEstimate, raw: bool) {
    println!("estimated tree nnz bound: {}", estimate.tree_nnz_bound);
    println!("estimated tree bytes:     {}", estimate.tree_bytes);
    println!("flat model bytes:         {}", estimate.ovr_bytes);
    println!("estimated size ratio:     {:.6}", estimate.ratio);
    if raw {
        println!("raw nnz ratio:            {:.6}", estimate.raw_nnz_ratio());
    }
}

#[derive(Debug, Serialize)]
struct TrainResolvedConfig {
    command: String,
    common: CommonResolved,
    data: DataResolved,
    tree: Option<TreeResolved>,
    ovr: bool,
    solver: SolverResolved,
    model_out: PathBuf,
    raw_nnz_ratio: bool,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let data = resolve_data(&args.data, &file, "training data")?;
    let ovr = args.ovr || file.tree.ovr.unwrap_or(false);
    let (solver, mut train_config) =
        resolve_solver(&args.loss, args.lambda, args.eps, args.max_iter, &file)?;
    train_config.seed = common.seed;

    let dataset = load_dataset(&data)?;
    let tree_resolved = if ovr {
        None
    } else {
        Some(resolve_tree(&args.tree, &file, dataset.n_labels())?)
    };
    let model_out = args
        .model_out
        .unwrap_or_else(|| common.out_dir.join("model.bin"));

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "train",
        &TrainResolvedConfig {
            command: "train".into(),
            common: common.clone(),
            data: data.clone(),
            tree: tree_resolved.clone(),
            ovr,
            solver,
            model_out: model_out.clone(),
            raw_nnz_ratio: args.raw_nnz_ratio,
        },
    )?;

    println!(
        "data: {} instances, {} features, {} labels",
        dataset.n_instances(),
        dataset.n_features(),
        dataset.n_labels()
    );

    let model = if let Some(tree_resolved) = &tree_resolved {
        let tree = build_label_tree(&dataset, tree_resolved.k, tree_resolved.d_max, common.seed)?;
        println!(
            "tree: {} nodes, depth {}, {} classifiers (K={}, dmax={})",
            tree.n_nodes(),
            tree.depth,
            tree.classifier_count(),
            tree_resolved.k,
            tree_resolved.d_max
        );
        write_file(&emitter.path("tree.json"), tree.to_json().as_bytes())?;

        let estimate = estimate_tree_size(&dataset, &tree)?;
        print_estimate(&estimate, args.raw_nnz_ratio);
        emitter.table(
            "size_report.csv",
            &["node", "depth", "children", "used_features"],
            &size_report_rows(&estimate),
        )?;

        let (model, warnings) = train_tree(&dataset, &tree, &train_config)?;
        report_warnings(&warnings);
        let trained_nnz = model.nnz() as u64;
        let dense = dataset.n_features() as u64 * dataset.n_labels() as u64;
        println!("trained nnz:  {trained_nnz} (bound {})", estimate.tree_nnz_bound);
        println!("trained bytes: {}", model.size_bytes());
        println!(
            "trained size ratio: {:.6}",
            1.5 * trained_nnz as f64 / dense as f64
        );
        Model::Tree(model)
    } else {
        let (model, warnings) = train_ovr(&dataset, &train_config)?;
        report_warnings(&warnings);
        println!("trained nnz:  {}", model.nnz());
        println!("dense flat bytes: {}", model.size_bytes());
        Model::Ovr(model)
    };

    let written = model.save_to_path(&model_out)?;
    println!("model: {} ({written} bytes)", model_out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateResolvedConfig {
    command: String,
    common: CommonResolved,
    data: DataResolved,
    tree: TreeResolved,
    raw_nnz_ratio: bool,
}

pub fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let data = resolve_data(&args.data, &file, "data")?;
    let dataset = load_dataset(&data)?;
    let tree_resolved = resolve_tree(&args.tree, &file, dataset.n_labels())?;

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "estimate",
        &EstimateResolvedConfig {
            command: "estimate".into(),
            common: common.clone(),
            data: data.clone(),
            tree: tree_resolved.clone(),
            raw_nnz_ratio: args.raw_nnz_ratio,
        },
    )?;

    let tree = build_label_tree(&dataset, tree_resolved.k, tree_resolved.d_max, common.seed)?;
    write_file(&emitter.path("tree.json"), tree.to_json().as_bytes())?;
    let estimate = estimate_tree_size(&dataset, &tree)?;
    println!(
        "tree: {} nodes, depth {}, {} classifiers",
        tree.n_nodes(),
        tree.depth,
        tree.classifier_count()
    );
    print_estimate(&estimate, args.raw_nnz_ratio);
    emitter.table(
        "size_report.csv",
        &["node", "depth", "children", "used_features"],
        &size_report_rows(&estimate),
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct AnalyzeResolved {
    l: u64,
    k: u64,
    alphas: Vec<f64>,
    d_from: u32,
    d_to: u32,
    cost: CostResolved,
}

#[derive(Debug, Clone, Serialize)]
struct CostResolved {
    ell: f64,
    nbar: f64,
    c: f64,
    kmeans_iters: f64,
}

#[derive(Debug, Serialize)]
struct AnalyzeResolvedConfig {
    command: String,
    common: CommonResolved,
    analyze: AnalyzeResolved,
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let l = pick(args.l, file.analyze.l, 200_000_000);
    let k = pick(args.k, file.analyze.k, 100);
    let cap = max_depth(l, k)?;
    let alphas = pick(
        args.alphas.clone(),
        file.analyze.alphas.clone(),
        vec![0.3, 0.4, 0.5, 0.6],
    );
    let d_from = pick(args.d_from, file.analyze.d_from, 2);
    let d_to = pick(args.d_to, file.analyze.d_to, cap);
    if d_from < 2 || d_to > cap || d_from > d_to {
        return Err(CliError::usage(format!(
            "depth range [{d_from}, {d_to}] outside [2, {cap}]"
        )));
    }
    let cost = CostResolved {
        ell: pick(args.ell, file.cost.ell, 1e5),
        nbar: pick(args.nbar, file.cost.nbar, 100.0),
        c: pick(args.c, file.cost.c, 1.0),
        kmeans_iters: pick(args.kmeans_iters, file.cost.kmeans_iters, 50.0),
    };
    let resolved = AnalyzeResolved {
        l,
        k,
        alphas: alphas.clone(),
        d_from,
        d_to,
        cost: cost.clone(),
    };

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "analyze",
        &AnalyzeResolvedConfig {
            command: "analyze".into(),
            common: common.clone(),
            analyze: resolved,
        },
    )?;

    // ratio curves over the (d, alpha) grid
    let mut curve_rows = Vec::new();
    for d in d_from..=d_to {
        for &alpha in &alphas {
            let params = BalancedTreeParams::new(l, k, d, alpha, 1.0)?;
            let ratio = xmctree::analysis::balanced_ratio(&params);
            curve_rows.push(vec![d.to_string(), format!("{alpha}"), format!("{ratio}")]);
        }
    }
    emitter.table("ratio_curve.csv", &["d", "alpha", "ratio"], &curve_rows)?;

    // alpha thresholds per feasible depth
    let mut threshold_rows = Vec::new();
    for d in 2..=cap {
        match theorem1_alpha_bound(k, d, cap) {
            Ok(bound) => threshold_rows.push(vec![d.to_string(), format!("{bound}")]),
            Err(xmctree::Error::Numeric(_)) => continue, // depth needs K >= 4
            Err(other) => return Err(other.into()),
        }
    }
    emitter.table("thresholds.csv", &["d", "alpha_bound"], &threshold_rows)?;
    let theorem2 = theorem2_check(k, l)?;
    match theorem2.d_range {
        Some((lo, hi)) => println!(
            "ratio is decreasing for alpha < {:.6} over depths [{lo}, {hi}]",
            theorem2.alpha_threshold
        ),
        None => println!(
            "max depth {cap} leaves no guaranteed monotone range (needs at least 4)"
        ),
    }

    // training-cost model per depth
    let cost_params = CostParams::new(cost.ell, cost.nbar, cost.c, cost.kmeans_iters)?;
    let mut cost_rows = Vec::new();
    for d in d_from..=d_to {
        let est = training_cost_estimate(l, k, d, &cost_params)?;
        cost_rows.push(vec![
            d.to_string(),
            format!("{}", est.ovr_cost),
            format!("{}", est.tree_root),
            format!("{}", est.tree_middle),
            est.middle_layers.to_string(),
            format!("{}", est.tree_last),
            format!("{}", est.kmeans_cost),
            format!("{}", est.inner_term),
            format!("{}", est.tree_total),
        ]);
    }
    emitter.table(
        "cost_estimate.csv",
        &[
            "d",
            "ovr_cost",
            "tree_root",
            "tree_middle",
            "middle_layers",
            "tree_last",
            "kmeans_cost",
            "inner_term",
            "tree_total",
        ],
        &cost_rows,
    )?;
    println!(
        "wrote ratio_curve.csv ({} rows), thresholds.csv ({} rows), cost_estimate.csv ({} rows)",
        curve_rows.len(),
        threshold_rows.len(),
        cost_rows.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictResolvedConfig {
    command: String,
    common: CommonResolved,
    data: DataResolved,
    model: PathBuf,
    beam: usize,
    top_k: usize,
    out: PathBuf,
}

fn load_model(path: &Path) -> Result<Model<f64>, CliError> {
    Ok(Model::load_from_path(path)?)
}

fn check_dimensions(model: &Model<f64>, dataset: &MultiLabelDataset) {
    if dataset.n_features() > model.n_features() {
        eprintln!(
            "warning: data has {} features, model was trained on {}; extra features are ignored",
            dataset.n_features(),
            model.n_features()
        );
    }
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let data = resolve_test_data(&args.data, &file)?;
    let beam = pick(args.beam, file.predict.beam, 10);
    let top_k = pick(args.top_k, file.predict.top_k, 5);
    let out = args
        .out
        .unwrap_or_else(|| common.out_dir.join("predictions.txt"));

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "predict",
        &PredictResolvedConfig {
            command: "predict".into(),
            common: common.clone(),
            data: data.clone(),
            model: args.model.clone(),
            beam,
            top_k,
            out: out.clone(),
        },
    )?;

    let model = load_model(&args.model)?;
    let dataset = load_dataset(&data)?;
    check_dimensions(&model, &dataset);

    let rows: Vec<xmctree::SparseVector> = dataset.features().rows().to_vec();
    let predictions = predict_batch(&model, &rows, beam, top_k);
    let offset: u32 = if data.zero_based { 0 } else { 1 };
    let mut text = String::new();
    for prediction in &predictions {
        let mut first = true;
        for (label, score) in prediction.iter() {
            if !first {
                text.push(' ');
            }
            first = false;
            text.push_str(&format!("{}:{:.6}", label + offset, score));
        }
        text.push('\n');
    }
    write_file(&out, text.as_bytes())?;
    println!("wrote {} predictions to {}", predictions.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalResolvedConfig {
    command: String,
    common: CommonResolved,
    data: DataResolved,
    model: PathBuf,
    beam: usize,
    ks: Vec<usize>,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let data = resolve_test_data(&args.data, &file)?;
    let beam = pick(args.beam, file.predict.beam, 10);
    let ks = pick(args.ks.clone(), file.predict.ks.clone(), vec![1, 3, 5]);

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "eval",
        &EvalResolvedConfig {
            command: "eval".into(),
            common: common.clone(),
            data: data.clone(),
            model: args.model.clone(),
            beam,
            ks: ks.clone(),
        },
    )?;

    let model = load_model(&args.model)?;
    let dataset = load_dataset(&data)?;
    check_dimensions(&model, &dataset);

    let max_k = ks.iter().copied().max().unwrap_or(5);
    let rows: Vec<xmctree::SparseVector> = dataset.features().rows().to_vec();
    let truth: Vec<Vec<u32>> = (0..dataset.n_instances())
        .map(|i| dataset.labels(i).to_vec())
        .collect();
    let predictions = predict_batch(&model, &rows, beam, max_k);
    let scores = xmctree::precision_at_k(&predictions, &truth, &ks)?;

    let mut rows_out = Vec::new();
    for &(k, value) in &scores {
        println!("P@{k} {value:.2}");
        rows_out.push(vec![k.to_string(), format!("{value:.2}")]);
    }
    emitter.table("metrics.csv", &["k", "precision"], &rows_out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PruneResolvedConfig {
    command: String,
    common: CommonResolved,
    model: PathBuf,
    tau: f64,
    out: PathBuf,
}

pub fn prune(args: PruneArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let tau = pick(args.tau, file.prune.tau, 0.1);
    let out = args
        .out
        .unwrap_or_else(|| common.out_dir.join("model_pruned.bin"));

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "prune",
        &PruneResolvedConfig {
            command: "prune".into(),
            common: common.clone(),
            model: args.model.clone(),
            tau,
            out: out.clone(),
        },
    )?;

    let model = load_model(&args.model)?;
    let before = model.nnz();
    let pruned = xmctree::prune_weights(&model, tau)?;
    let after = pruned.nnz();
    pruned.save_to_path(&out)?;
    println!(
        "pruned at tau={tau}: nnz {before} -> {after} (removed {}), {} -> {} bytes",
        before - after,
        model.size_bytes(),
        pruned.size_bytes()
    );
    println!("pruned model: {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct AlphaStatsResolvedConfig {
    command: String,
    common: CommonResolved,
    data: DataResolved,
    tree: TreeResolved,
}

pub fn alpha_stats(args: AlphaStatsArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file)?;
    let data = resolve_data(&args.data, &file, "data")?;
    let dataset = load_dataset(&data)?;
    let tree_resolved = resolve_tree(&args.tree, &file, dataset.n_labels())?;

    let emitter = Emitter::new(&common.out_dir, common.emit == "json")?;
    emitter.resolved_config(
        "alpha_stats",
        &AlphaStatsResolvedConfig {
            command: "alpha-stats".into(),
            common: common.clone(),
            data: data.clone(),
            tree: tree_resolved.clone(),
        },
    )?;

    let tree: LabelTree =
        build_label_tree(&dataset, tree_resolved.k, tree_resolved.d_max, common.seed)?;
    let stats = compute_alpha_stats(&dataset, &tree)?;
    if !stats.skipped.is_empty() {
        eprintln!(
            "warning: {} node(s) skipped (parent uses no features)",
            stats.skipped.len()
        );
    }

    let node_rows: Vec<Vec<String>> = stats
        .per_node
        .iter()
        .map(|a| vec![a.node_id.to_string(), a.depth.to_string(), format!("{}", a.alpha)])
        .collect();
    emitter.table("alpha_nodes.csv", &["node", "depth", "alpha"], &node_rows)?;

    let mut hist_rows = Vec::new();
    for depth in &stats.per_depth {
        for (bin, &count) in depth.bins.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let bin_lo = bin as f64 * xmctree::analysis::ALPHA_BIN_WIDTH;
            hist_rows.push(vec![
                depth.depth.to_string(),
                format!("{bin_lo:.2}"),
                count.to_string(),
                format!("{}", depth.weighted_avg),
            ]);
        }
        println!(
            "depth {}: weighted average alpha {:.4} over {} classifiers",
            depth.depth, depth.weighted_avg, depth.total_children
        );
    }
    emitter.table(
        "alpha_hist.csv",
        &["depth", "bin_lo", "count", "weighted_avg"],
        &hist_rows,
    )?;
    Ok(())
}
