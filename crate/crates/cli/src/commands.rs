use std::fs;
use std::path::Path;

use groupkam::dataio::{
    self, csv_headers, load_csv_with, synth_generate, write_table_csv, CsvOptions, LoadedCsv,
};
use groupkam::evaluation::{
    cross_validate, default_lambda_grid, grid_search, pearson_csv, pearson_long_csv,
    pearson_matrix, stratified_holdout, MetricSet, DEFAULT_SIGMAS,
};
use groupkam::interpret::{export_interpretation, group_contribution, ExportOptions};
use groupkam::model::{self, classify, decision_function};
use groupkam::selection::{select_top_k, EnConfig};
use groupkam::{
    Dataset, Error, FeatureTable, GammaMode, GroupConfig, GroupPartition, SolverConfig,
};
use serde_json::{json, Value};

use crate::{
    Command, CorrelateArgs, CvArgs, DataArgs, FitArgs, GridArgs, GroupArgs, InterpretArgs,
    PredictArgs, Scope, SelectArgs, SolverArgs, SynthArgs, Weights,
};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("I/O error on {}: {e}", path.display()),
    }
}

type CmdResult = Result<Value, Failure>;

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Synth(a) => synth(a),
        Command::Select(a) => with_jobs(a.jobs, || select(&a)),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => with_jobs(a.jobs, || cv(&a)),
        Command::Grid(a) => with_jobs(a.jobs, || grid(&a)),
        Command::Correlate(a) => correlate(a),
        Command::Interpret(a) => interpret(a),
    }
}

fn with_jobs(jobs: usize, f: impl FnOnce() -> CmdResult + Send) -> CmdResult {
    if jobs == 0 {
        return Err(invalid("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(f)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_text(path, &(text + "\n"))
}

fn paths(list: &[&Path]) -> Value {
    json!(list
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>())
}

fn load(data: &DataArgs, require_labels: bool) -> Result<(LoadedCsv, Option<String>), Failure> {
    let headers = csv_headers(&data.data)?;
    let id = headers
        .contains(&data.id_column)
        .then(|| data.id_column.clone());
    let has_label = headers.contains(&data.label);
    if require_labels && !has_label {
        return Err(invalid(format!(
            "{}: label column {:?} not found",
            data.data, data.label
        )));
    }
    let loaded = load_csv_with(
        &data.data,
        &CsvOptions {
            label_column: has_label.then(|| data.label.clone()),
            id_column: id.clone(),
            ..CsvOptions::default()
        },
    )?;
    Ok((loaded, id))
}

fn load_dataset(data: &DataArgs) -> Result<(Dataset, Option<String>), Failure> {
    let (loaded, id) = load(data, true)?;
    Ok((loaded.into_dataset()?, id))
}

fn partition_for(args: &GroupArgs, names: &[String]) -> Result<GroupPartition, Failure> {
    let partition = match &args.groups {
        Some(path) => GroupPartition::from_config(&GroupConfig::load(path)?, names)?,
        None => GroupPartition::singletons(names),
    };
    Ok(match args.weights {
        None => partition,
        Some(Weights::Unit) => {
            let d = partition.n_groups();
            partition.with_weights(vec![1.0; d])?
        }
        Some(Weights::SqrtSize) => partition.with_sqrt_size_weights(),
    })
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig {
        lambda: args.lambda,
        sigma: args.sigma,
        max_iters: args.max_iters,
        tol: args.tol,
        class_weights: None,
        fit_intercept: args.intercept,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn gamma_mode(gamma: Option<f64>) -> Result<GammaMode, Failure> {
    match gamma {
        None => Ok(GammaMode::Median),
        Some(g) if g.is_finite() && g > 0.0 => Ok(GammaMode::Shared(g)),
        Some(g) => Err(invalid(format!("--gamma must be positive, got {g}"))),
    }
}

fn parse_gamma_mode(text: &str) -> Result<GammaMode, Failure> {
    if text.trim() == "median" {
        return Ok(GammaMode::Median);
    }
    let g: f64 = text.trim().parse().map_err(|_| {
        invalid(format!(
            "bandwidth mode must be `median` or a number, got {text:?}"
        ))
    })?;
    gamma_mode(Some(g))
}

fn metrics_json(m: &MetricSet) -> Value {
    json!({"auroc": m.auroc, "accuracy": m.accuracy, "f1": m.f1})
}

fn synth(a: SynthArgs) -> CmdResult {
    let s = synth_generate(a.n, a.seed, a.noise)?;
    let out = Path::new(&a.out);
    create_dir(out)?;
    let features = out.join("features.csv");
    let groups = out.join("groups.json");
    let truth = out.join("truth.json");
    dataio::write_csv(&features, &s.dataset, "label", Some("sample_id"))?;
    s.partition
        .to_config(s.dataset.feature_names())
        .save(&groups)?;
    let truth_names: Vec<&String> = s.truth.iter().map(|&j| &s.partition.names()[j]).collect();
    write_json(
        &truth,
        &json!({
            "truth_groups": truth_names,
            "truth_group_ids": s.truth,
            "n": a.n,
            "noise": a.noise,
            "seed": a.seed,
        }),
    )?;
    Ok(json!({
        "command": "synth",
        "n": a.n,
        "positives": s.dataset.n_positive(),
        "seed": a.seed,
        "files": paths(&[&features, &groups, &truth]),
    }))
}

fn select(a: &SelectArgs) -> CmdResult {
    let (data, id) = load_dataset(&a.data)?;
    let (train_rows, holdout_rows) = stratified_holdout(data.labels(), a.holdout, a.seed)?;
    let cfg = EnConfig {
        alpha_mix: a.alpha_mix,
        n_lambda: a.n_lambda,
        lambda_ratio: a.lambda_ratio,
        k: a.k,
        folds: a.folds,
        ..EnConfig::default()
    };
    let train = data.select_rows(&train_rows);
    let basis = match a.scope {
        Scope::Train => &train,
        Scope::Full => &data,
    };
    let result = select_top_k(basis, &cfg, a.seed)?;

    let out = Path::new(&a.out);
    create_dir(out)?;
    let keep: Vec<usize> = (0..data.n_features())
        .filter(|&j| result.selected.contains(&data.feature_names()[j]))
        .collect();
    let id_name = id.as_deref().unwrap_or("sample_id");
    let mut written = Vec::new();
    let train_path = out.join("train.csv");
    let reduced = train.select_columns(&keep);
    write_table_csv(
        &train_path,
        reduced.features(),
        Some((&a.data.label, reduced.labels())),
        Some(id_name),
    )?;
    written.push(train_path);
    if !holdout_rows.is_empty() {
        let hold_path = out.join("holdout.csv");
        let hold = data.select_rows(&holdout_rows).select_columns(&keep);
        write_table_csv(
            &hold_path,
            hold.features(),
            Some((&a.data.label, hold.labels())),
            Some(id_name),
        )?;
        written.push(hold_path);
    }
    let groups_path = out.join("selected_groups.json");
    let config = match &a.groups {
        Some(path) => GroupConfig::load(path)?.restrict_to(&result.selected),
        None => {
            GroupPartition::singletons(reduced.feature_names()).to_config(reduced.feature_names())
        }
    };
    config.save(&groups_path)?;
    written.push(groups_path);
    let report_path = out.join("selection.json");
    write_json(
        &report_path,
        &json!({
            "selected": result.selected,
            "chosen_lambda": result.chosen_lambda,
            "fold_scores": result.fold_scores,
            "lambdas": result.lambdas,
            "mean_abs_coef": result.mean_abs_coef,
            "padded": result.padded,
            "scope": match a.scope { Scope::Train => "train", Scope::Full => "full" },
            "holdout": a.holdout,
            "n_train": train_rows.len(),
            "n_holdout": holdout_rows.len(),
            "seed": a.seed,
        }),
    )?;
    written.push(report_path);
    let refs: Vec<&Path> = written.iter().map(|p| p.as_path()).collect();
    Ok(json!({
        "command": "select",
        "selected": result.selected,
        "chosen_lambda": result.chosen_lambda,
        "padded": result.padded,
        "seed": a.seed,
        "files": paths(&refs),
    }))
}

fn fit(a: FitArgs) -> CmdResult {
    let (data, _) = load_dataset(&a.data)?;
    let partition = partition_for(&a.groups, data.feature_names())?;
    let cfg = solver_config(&a.solver)?;
    let gamma = gamma_mode(a.solver.gamma)?;
    let model =
        groupkam::PreparedFit::with_gamma_mode(&data, &partition, gamma)?.fit(&cfg, None)?;
    let out = Path::new(&a.out);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model::save(&model, out)?;
    Ok(json!({
        "command": "fit",
        "active_groups": model.active_group_names(),
        "n_train": model.n_train(),
        "lambda": cfg.lambda,
        "sigma": cfg.sigma,
        "iterations": model.report().iterations,
        "converged": model.report().converged,
        "objective": model.report().final_objective(),
        "files": paths(&[out]),
    }))
}

fn predict(a: PredictArgs) -> CmdResult {
    let model = model::load(&a.model)?;
    let (loaded, id) = load(&a.data, false)?;
    let decisions = decision_function(&model, &loaded.features)?;
    let predictions = classify(&decisions);
    let mut text = String::from(if loaded.labels.is_some() {
        "sample_id,decision,prediction,label\n"
    } else {
        "sample_id,decision,prediction\n"
    });
    for (i, sid) in loaded.features.sample_ids().iter().enumerate() {
        text.push_str(&format!("{sid},{},{}", decisions[i], predictions[i]));
        if let Some(labels) = &loaded.labels {
            text.push_str(&format!(",{}", labels[i]));
        }
        text.push('\n');
    }
    let out = Path::new(&a.out);
    write_text(out, &text)?;
    let mut summary = json!({
        "command": "predict",
        "n": decisions.len(),
        "predicted_positive": predictions.iter().filter(|&&p| p == 1).count(),
        "ids_from": id,
        "files": paths(&[out]),
    });
    if let Some(labels) = &loaded.labels {
        if labels.contains(&1) && labels.contains(&-1) {
            summary["metrics"] = metrics_json(&MetricSet::from_decisions(&decisions, labels)?);
        }
    }
    Ok(summary)
}

fn cv(a: &CvArgs) -> CmdResult {
    let (data, _) = load_dataset(&a.data)?;
    let partition = partition_for(&a.groups, data.feature_names())?;
    let cfg = solver_config(&a.solver)?;
    let gamma = gamma_mode(a.solver.gamma)?;
    let report = cross_validate(&data, &partition, &cfg, gamma, a.folds, a.seed)?;
    let mut summary = json!({
        "command": "cv",
        "folds": a.folds,
        "seed": a.seed,
        "mean": metrics_json(&report.mean),
        "sd": metrics_json(&report.sd),
        "table": format!(
            "AUROC {:.2} ({:.2}) | ACC {:.2} ({:.2}) | F1 {:.2} ({:.2})",
            report.mean.auroc, report.sd.auroc,
            report.mean.accuracy, report.sd.accuracy,
            report.mean.f1, report.sd.f1
        ),
        "mean_group_contribution": partition.names().iter().cloned()
            .zip(report.mean_group_contribution().into_iter().map(Value::from))
            .collect::<serde_json::Map<String, Value>>(),
    });
    if let Some(out) = &a.out {
        let out = Path::new(out);
        write_json(out, &report)?;
        summary["files"] = paths(&[out]);
    }
    Ok(summary)
}

fn grid(a: &GridArgs) -> CmdResult {
    let (data, _) = load_dataset(&a.data)?;
    let partition = partition_for(&a.groups, data.feature_names())?;
    let base = SolverConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        fit_intercept: a.intercept,
        ..SolverConfig::default()
    };
    base.validate()?;
    let gammas = a
        .gammas
        .iter()
        .map(|g| parse_gamma_mode(g))
        .collect::<Result<Vec<_>, _>>()?;
    let sigmas = if a.sigmas.is_empty() {
        DEFAULT_SIGMAS.to_vec()
    } else {
        a.sigmas.clone()
    };
    let lambdas = if a.lambdas.is_empty() {
        default_lambda_grid(&data, &partition, &sigmas, &gammas, &base)?
    } else {
        a.lambdas.clone()
    };
    let result = grid_search(
        &data, &partition, &lambdas, &sigmas, &gammas, &base, a.folds, a.seed,
    )?;
    let mut summary = json!({
        "command": "grid",
        "points": result.points.len(),
        "best": result.best,
        "folds": a.folds,
        "seed": a.seed,
    });
    if let Some(out) = &a.out {
        let out = Path::new(out);
        write_json(out, &result)?;
        summary["files"] = paths(&[out]);
    }
    Ok(summary)
}

fn load_table(
    path: &str,
    id_column: &str,
    drop: &[String],
) -> Result<(FeatureTable, bool), Failure> {
    let has_id = csv_headers(path)?.iter().any(|h| h == id_column);
    let loaded = load_csv_with(
        path,
        &CsvOptions {
            label_column: None,
            id_column: has_id.then(|| id_column.to_string()),
            skip_columns: drop.to_vec(),
        },
    )?;
    Ok((loaded.features, has_id))
}

fn correlate(a: CorrelateArgs) -> CmdResult {
    let (left, left_id) = load_table(&a.features, &a.id_column, &a.drop)?;
    let (right, right_id) = load_table(&a.characteristics, &a.id_column, &a.drop)?;
    let right = if left_id && right_id {
        let rows = left
            .sample_ids()
            .iter()
            .map(|sid| {
                right
                    .sample_ids()
                    .iter()
                    .position(|r| r == sid)
                    .ok_or_else(|| {
                        invalid(format!("sample {sid:?} missing from {}", a.characteristics))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        right.select_rows(&rows)
    } else if left.n_samples() != right.n_samples() {
        return Err(invalid(format!(
            "{} rows against {} rows and no shared {:?} column",
            left.n_samples(),
            right.n_samples(),
            a.id_column
        )));
    } else {
        right
    };
    let r = pearson_matrix(left.samples().view(), right.samples().view())?;
    let out = Path::new(&a.out);
    create_dir(out)?;
    let matrix = out.join("pearson_matrix.csv");
    let long = out.join("pearson_long.csv");
    write_text(
        &matrix,
        &pearson_csv(&r, left.feature_names(), right.feature_names()),
    )?;
    write_text(
        &long,
        &pearson_long_csv(&r, left.feature_names(), right.feature_names()),
    )?;
    let undefined = r.iter().filter(|v| v.is_none()).count();
    let strongest = r
        .indexed_iter()
        .filter_map(|((j, k), v)| v.map(|v| (j, k, v)))
        .max_by(|x, y| {
            x.2.abs()
                .total_cmp(&y.2.abs())
                .then(y.0.cmp(&x.0))
                .then(y.1.cmp(&x.1))
        });
    Ok(json!({
        "command": "correlate",
        "rows": left.n_features(),
        "columns": right.n_features(),
        "n": left.n_samples(),
        "undefined": undefined,
        "strongest": strongest.map(|(j, k, v)| json!({
            "feature": left.feature_names()[j],
            "characteristic": right.feature_names()[k],
            "r": v,
        })),
        "files": paths(&[&matrix, &long]),
    }))
}

fn interpret(a: InterpretArgs) -> CmdResult {
    let model = model::load(&a.model)?;
    let (loaded, _) = load(&a.data, false)?;
    if a.grid_size < 2 {
        return Err(invalid("--grid-size must be at least 2"));
    }
    let opts = ExportOptions {
        grid_size: a.grid_size,
        scatter: a.scatter,
        rkhs: a.rkhs,
    };
    let written = export_interpretation(&model, &loaded.features, &a.out, &opts)?;
    let importance = group_contribution(&model)?;
    let refs: Vec<&Path> = written.iter().map(|p| p.as_path()).collect();
    Ok(json!({
        "command": "interpret",
        "active_groups": model.active_group_names(),
        "importance": importance
            .iter()
            .map(|g| (g.group.clone(), json!(g.normalized_share)))
            .collect::<serde_json::Map<String, Value>>(),
        "files": paths(&refs),
    }))
}
