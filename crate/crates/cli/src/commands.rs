use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mortrisk::cohort::{
    default_schema, generate_synthetic_cohort, load_cohort, record_from_map, record_to_map, save_cohort, CohortTable,
    GeneratorConfig, PatientRecord,
};
use mortrisk::eval::{default_spaces, run_trials, ProtocolConfig, SearchSpace};
use mortrisk::explain::{
    compare_top_features, explain_record, gini_importance, lr_coefficients, shap_importance, tree_shap_importance,
    BackgroundSet, ExplainMode, ExplainRequest, ImportanceRanking, ModelExplanation, Players, ShapMode, TreeEnsemble,
    DEFAULT_PERMUTATIONS,
};
use mortrisk::models::{load_model, save_model, Family, Hyperparams, ModelParams, TrainedModel};
use mortrisk::pipeline::{train_artifact, TrainOptions};
use mortrisk::preprocess::{clean_cohort, BmiRegression, CleaningReport};
use mortrisk::resample::SmoteConfig;
use mortrisk_service::{load_registry, ServiceConfig};
use serde_json::{json, Map, Value};

use crate::manifest::RunManifest;
use crate::{CliError, DemoArgs, EvaluateArgs, ExplainArgs, GenerateArgs, ModeArg, PreprocessArgs, ServeArgs, TrainArgs};

type CliResult<T = ()> = Result<T, CliError>;

fn ensure_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn generate(a: &GenerateArgs) -> CliResult {
    let table = generate_synthetic_cohort(&GeneratorConfig {
        n: a.n,
        prevalence: a.prevalence,
        outlier_injections: a.outliers,
        seed: a.seed,
        ..GeneratorConfig::default()
    })?;
    ensure_parent(&a.out)?;
    save_cohort(&table, &a.out)?;
    RunManifest::new(
        "generate",
        json!({"n": a.n, "prevalence": a.prevalence, "outliers": a.outliers}),
        vec![a.seed],
    )
    .output(&a.out)
    .write_beside(&a.out)?;
    println!(
        "wrote {} records ({} positive) to {}",
        table.len(),
        table.positives(),
        a.out.display()
    );
    Ok(())
}

pub fn render_cleaning(r: &CleaningReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "input records            {}", r.input);
    let _ = writeln!(out, "dropped (missing values) {}", r.missing.dropped_missing);
    for (f, n) in &r.missing.missing_by_feature {
        let _ = writeln!(out, "  {f:<22} {n}");
    }
    let _ = writeln!(
        out,
        "height imputation        bmi = {:.4} + {:.4} * weight (r2 {:.3}, {} pairs)",
        r.regression.intercept, r.regression.slope, r.regression.r_squared, r.regression.n_pairs
    );
    let _ = writeln!(out, "  imputed heights        {}", r.imputation.imputed);
    let _ = writeln!(out, "  dropped, no weight     {}", r.imputation.dropped_missing_weight);
    let _ = writeln!(out, "  dropped, bmi <= 0      {}", r.imputation.dropped_nonpositive_bmi);
    let _ = writeln!(out, "dropped (3-sigma)        {}", r.outliers.dropped_outlier);
    for (f, n) in &r.outliers.outliers_by_feature {
        let _ = writeln!(out, "  {f:<22} {n}");
    }
    let _ = writeln!(out, "retained records         {}", r.retained);
    out
}

pub fn preprocess(a: &PreprocessArgs) -> CliResult {
    let table = load_cohort(&a.input, &default_schema())?;
    let regression = a.paper_coefficients.then_some(BmiRegression::PUBLISHED);
    let (clean, report) = clean_cohort(&table, regression)?;
    ensure_parent(&a.out)?;
    save_cohort(&clean, &a.out)?;
    let mut manifest = RunManifest::new(
        "preprocess",
        json!({"paper_coefficients": a.paper_coefficients, "report": to_value(&report)}),
        vec![],
    )
    .input(&a.input)?
    .output(&a.out);
    if let Some(path) = &a.report_out {
        let text = serde_json::to_string_pretty(&report).map_err(mortrisk::Error::from)?;
        write_text(path, &(text + "\n"))?;
        manifest = manifest.output(path);
    }
    manifest.write_beside(&a.out)?;
    print!("{}", render_cleaning(&report));
    Ok(())
}

fn parse_assignment(s: &str) -> CliResult<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got `{s}`")))?;
    if k.trim().is_empty() {
        return Err(CliError::Usage(format!("empty name in `{s}`")));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_hyper(items: &[String], family: Family) -> CliResult<Option<Hyperparams>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut h = family.default_hyperparameters();
    for item in items {
        let (k, v) = parse_assignment(item)?;
        if !family.hyperparameter_names().contains(&k.as_str()) {
            return Err(CliError::Usage(format!(
                "`{k}` is not a {} hyperparameter; expected one of {}",
                family.tag(),
                family.hyperparameter_names().join(", ")
            )));
        }
        let x: f64 = v
            .parse()
            .map_err(|_| CliError::Usage(format!("hyperparameter `{k}`: `{v}` is not a number")))?;
        h.insert(k, x);
    }
    Ok(Some(h))
}

fn format_hyper(h: &Hyperparams) -> String {
    h.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

pub fn train(a: &TrainArgs) -> CliResult {
    let table = load_cohort(&a.input, &default_schema())?;
    let mut opts = TrainOptions::new(a.family);
    opts.hyperparameters = parse_hyper(&a.hyper, a.family)?;
    if let Some(path) = &a.search {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let space: SearchSpace = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("search space {}: {e}", path.display())))?;
        opts.space = Some(space);
    }
    opts.seed = a.seed;
    opts.cv_folds = a.cv_folds;
    opts.test_fraction = a.test_fraction;
    opts.smote = (!a.no_smote).then(SmoteConfig::default);
    opts.clean = a.clean;
    opts.background_size = a.background_size;
    let out = train_artifact(&table, &opts)?;
    ensure_parent(&a.out)?;
    save_model(&out.model, &a.out)?;
    let mut inputs = RunManifest::new("train", to_value(&opts), vec![a.seed]).input(&a.input)?;
    if let Some(path) = &a.search {
        inputs = inputs.input(path)?;
    }
    inputs.output(&a.out).write_beside(&a.out)?;
    if let Some(r) = &out.cleaning {
        print!("{}", render_cleaning(r));
    }
    println!("{} trained on {} records", a.family.display_name(), table.len());
    println!("best hyperparameters: {}", format_hyper(&out.model.hyperparameters));
    println!(
        "held-out AUC {:.3}  ACC {:.3}  REC {:.3}",
        out.test_metrics.auc, out.test_metrics.acc, out.test_metrics.rec
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    let table = load_cohort(&a.input, &default_schema())?;
    let mut families = a.families.clone();
    families.dedup();
    let config = ProtocolConfig {
        families,
        n_trials: a.trials,
        base_seed: a.seed,
        cv_folds: a.cv_folds,
        smote: (!a.no_smote).then(SmoteConfig::default),
        spaces: default_spaces(),
        ..ProtocolConfig::default()
    };
    let report = run_trials(&table, &config)?;
    print!("{}", report.render_text());
    let seeds = (0..a.trials as u64).map(|t| a.seed.wrapping_add(t)).collect();
    let mut manifest = RunManifest::new("evaluate", to_value(&config), seeds).input(&a.input)?;
    let mut primary: Option<PathBuf> = None;
    if let Some(path) = &a.report_out {
        write_text(path, &report.render_csv())?;
        manifest = manifest.output(path);
        primary = Some(path.clone());
    }
    if let Some(path) = &a.trials_out {
        let text = serde_json::to_string_pretty(&report.trials).map_err(mortrisk::Error::from)?;
        write_text(path, &(text + "\n"))?;
        manifest = manifest.output(path);
        primary.get_or_insert(path.clone());
    }
    if let Some(p) = primary {
        manifest.write_beside(&p)?;
    }
    Ok(())
}

fn parse_scalar(v: &str) -> Value {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => json!(x),
        _ => Value::String(v.to_string()),
    }
}

/// The record to explain: a cohort row, hand-set values, or a row with overrides.
fn build_record(model: &TrainedModel, a: &ExplainArgs) -> CliResult<PatientRecord> {
    let mut map = match a.row {
        Some(i) => {
            let path = a
                .cohort
                .as_ref()
                .ok_or_else(|| CliError::Usage("--row needs --cohort".into()))?;
            let table = load_cohort(path, &model.schema)?;
            let rec = table.records.get(i).ok_or_else(|| {
                CliError::Usage(format!("--row {i} is out of range; cohort has {} records", table.len()))
            })?;
            record_to_map(&model.schema, rec)
        }
        None => Map::new(),
    };
    if a.row.is_none() && a.set.is_empty() {
        return Err(CliError::Usage("give --row, --set or --importance".into()));
    }
    for item in &a.set {
        let (k, v) = parse_assignment(item)?;
        if a.row.is_some() && matches!(k.as_str(), "weight" | "height") {
            map.remove("bmi");
        }
        if a.row.is_some() && matches!(k.as_str(), "creatinine" | "age" | "gender") {
            map.remove("egfr");
        }
        map.insert(k, parse_scalar(&v));
    }
    Ok(record_from_map(&model.schema, &map)?)
}

fn bar(phi: f64, scale: f64) -> String {
    let n = if scale > 0.0 { (phi.abs() / scale * 30.0).round() as usize } else { 0 };
    "#".repeat(n.max(usize::from(phi != 0.0)))
}

fn display_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), |x| format!("{x:.4}").trim_end_matches('0').trim_end_matches('.').to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render_explanation(e: &ModelExplanation) -> String {
    let mut out = String::new();
    let f = &e.force;
    let _ = writeln!(
        out,
        "{}: risk {:.4} (base {:.4}, {} Shapley values)",
        e.family.display_name(),
        e.prediction,
        f.base,
        serde_json::to_value(f.mode).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    );
    let scale = f.arrows.iter().map(|a| a.phi.abs()).fold(0.0, f64::max);
    for arrow in &f.arrows {
        let feature = format!("{} = {}", arrow.feature, display_value(&arrow.raw_value));
        let _ = writeln!(out, "  {feature:<32} {:+.4}  {}", arrow.phi, bar(arrow.phi, scale));
    }
    if let Some(path) = &e.decision_path {
        let _ = writeln!(out, "decision path:");
        for r in &path.rules {
            let _ = writeln!(out, "  {}", r.text);
        }
        let _ = writeln!(
            out,
            "  leaf {}: {} negative, {} positive, p = {:.4}",
            path.leaf, path.leaf_counts[0], path.leaf_counts[1], path.leaf_probability
        );
    }
    if let Some(n) = &e.neighbors {
        let _ = writeln!(out, "neighbors: {} (p = {:.4})", n.summary, n.probability);
    }
    out
}

fn model_sample(model: &TrainedModel, cohort: &CohortTable, n: usize) -> Vec<Vec<f64>> {
    cohort
        .records
        .iter()
        .filter_map(|r| model.prepare(r).ok())
        .take(n)
        .collect()
}

/// Global ranking per family: LR coefficients, Gini for a single tree,
/// tree SHAP for forests and sampled SHAP otherwise.
fn importance_for(model: &TrainedModel, cohort: &CohortTable, a: &ExplainArgs) -> CliResult<ImportanceRanking> {
    let ranking = match &model.params {
        ModelParams::Logistic(m) => lr_coefficients(m, &model.columns)?.aggregated(),
        ModelParams::Tree(t) => gini_importance(TreeEnsemble::Tree(t), &model.columns, true)?,
        ModelParams::Forest(f) => {
            tree_shap_importance(TreeEnsemble::Forest(f), &model_sample(model, cohort, a.sample), &model.columns)?
                .aggregated()
        }
        params @ (ModelParams::Knn(_) | ModelParams::Mlp(_)) => {
            let background = BackgroundSet::from_rows(model.background.clone());
            let players = Players::features(&model.columns);
            let mode = ShapMode::Sampled {
                n_permutations: a.permutations.unwrap_or(DEFAULT_PERMUTATIONS),
                repeats: 1,
                seed: a.seed,
            };
            shap_importance(params, &model_sample(model, cohort, a.sample), &background, &players, mode)?
        }
    };
    Ok(ranking)
}

fn importance(models: &[TrainedModel], a: &ExplainArgs) -> CliResult {
    let path = a
        .cohort
        .as_ref()
        .ok_or_else(|| CliError::Usage("--importance needs --cohort".into()))?;
    let cohort = load_cohort(path, &models[0].schema)?;
    let mut rankings = Vec::new();
    for m in models {
        rankings.push((m.family.tag().to_string(), importance_for(m, &cohort, a)?));
    }
    let comparison = (rankings.len() > 1)
        .then(|| compare_top_features(&rankings, a.top, true))
        .transpose()?;
    if a.json {
        let body = json!({
            "rankings": rankings.iter().map(|(k, r)| json!({"model": k, "ranking": to_value(r)})).collect::<Vec<_>>(),
            "comparison": comparison.as_ref().map(to_value),
        });
        println!("{}", serde_json::to_string_pretty(&body).map_err(mortrisk::Error::from)?);
        return Ok(());
    }
    for (tag, r) in &rankings {
        let method = to_value(&r.method).as_str().unwrap_or_default().to_string();
        println!("{tag} ({method})");
        let scale = r.entries.first().map_or(0.0, |e| e.importance.abs());
        for e in r.entries.iter().take(a.top) {
            println!("  {:<18} {:>9.4}  {}", e.feature, e.importance, bar(e.importance, scale));
        }
    }
    if let Some(c) = comparison {
        println!("top-{} features shared by all models: {}", c.n, c.intersection.join(", "));
    }
    Ok(())
}

pub fn explain(a: &ExplainArgs) -> CliResult {
    let models = a.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    if a.importance {
        return importance(&models, a);
    }
    if models.len() > 1 {
        return Err(CliError::Usage("explaining a record takes a single --model".into()));
    }
    let model = &models[0];
    let record = build_record(model, a)?;
    let req = ExplainRequest {
        mode: a.mode.map(|m| match m {
            ModeArg::Exact => ExplainMode::Exact,
            ModeArg::Sampled => ExplainMode::Sampled,
            ModeArg::Tree => ExplainMode::Tree,
        }),
        n_permutations: a.permutations,
        seed: a.seed,
    };
    let e = explain_record(model, &record, &req)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&e).map_err(mortrisk::Error::from)?);
    } else {
        print!("{}", render_explanation(&e));
    }
    Ok(())
}

pub fn serve(a: &ServeArgs) -> CliResult {
    let config = ServiceConfig {
        bind: a.bind.clone(),
        model_dir: Some(a.model_dir.clone()),
        background_size: a.background_size,
        cors_origin: a.cors_origin.clone(),
    };
    let registry = load_registry(&config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("serving {} model(s) on http://{}", registry.len(), a.bind);
    runtime.block_on(mortrisk_service::serve(registry, &config, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

pub fn demo(a: &DemoArgs) -> CliResult {
    let dir = &a.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let raw_path = dir.join("cohort.csv");
    generate(&GenerateArgs {
        n: a.n,
        prevalence: 0.076,
        seed: a.seed,
        outliers: a.n / 200,
        out: raw_path.clone(),
    })?;
    let clean_path = dir.join("clean.csv");
    preprocess(&PreprocessArgs {
        input: raw_path,
        out: clean_path.clone(),
        paper_coefficients: false,
        report_out: None,
    })?;
    let models_dir = dir.join("models");
    let mut model_paths = Vec::new();
    for family in Family::ALL {
        let out = models_dir.join(format!("{}.json", family.tag()));
        println!();
        train(&TrainArgs {
            input: clean_path.clone(),
            family,
            hyper: vec![],
            search: None,
            seed: a.seed,
            cv_folds: 5,
            test_fraction: 0.25,
            no_smote: false,
            clean: false,
            background_size: None,
            out: out.clone(),
        })?;
        model_paths.push(out);
    }
    println!();
    evaluate(&EvaluateArgs {
        input: clean_path.clone(),
        families: Family::ALL.to_vec(),
        trials: a.trials,
        seed: a.seed,
        cv_folds: 5,
        no_smote: false,
        report_out: Some(dir.join("evaluation.csv")),
        trials_out: None,
    })?;
    let explain_args = |models: Vec<PathBuf>, importance: bool| ExplainArgs {
        models,
        cohort: Some(clean_path.clone()),
        row: Some(0),
        set: vec![],
        mode: None,
        permutations: None,
        seed: a.seed,
        importance,
        top: 5,
        sample: 30,
        json: false,
    };
    println!();
    for p in &model_paths {
        explain(&explain_args(vec![p.clone()], false))?;
        println!();
    }
    explain(&explain_args(model_paths.clone(), true))?;
    println!("\nartifacts in {}; serve them with `mortrisk serve --model-dir {}`", dir.display(), models_dir.display());
    Ok(())
}
