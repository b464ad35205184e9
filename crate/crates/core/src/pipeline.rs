//! End-to-end run: data, labels, preprocessing, training, evaluation and
//! report emission.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifiers::{
    fit_decision_tree, fit_gaussian_nb, fit_knn, fit_random_forest, ModelKind, ModelPayload,
    TrainedModel,
};
use crate::config::{PipelineConfig, ReportFormat, SourceSpec};
use crate::data_model::{
    load_dataset, merge_datasets, validate, write_csv, ColumnAliases, Dataset, DatasetSchema,
    ValidationReport,
};
use crate::error::StageExt;
use crate::evaluation::{
    confusion_matrix, metrics, observed_classes, Averaging, EvaluationReport, ModelEvaluation,
    RunEcho,
};
use crate::preprocessing::{
    apply_encoders, apply_scaler, categorical_columns, fit_label_encoders, fit_scaler,
    train_test_split, EncoderMap, FeatureMatrix, ScalerParams, TrainTestSplit,
};
use crate::rules::label_dataset;
use crate::synthetic::generate;
use crate::{Error, Label, Result};

/// Loads one CSV source, honoring its alias table and age unit.
pub fn load_source(
    path: &Path,
    aliases: Option<&Path>,
    name: &str,
) -> Result<(Dataset, ValidationReport)> {
    let aliases = match aliases {
        Some(p) => ColumnAliases::from_path(p)?,
        None => ColumnAliases::new(),
    };
    let schema = DatasetSchema::canonical().with_age_unit(aliases.age_unit.unwrap_or_default());
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_dataset(std::io::BufReader::new(file), &schema, &aliases, name)
}

/// Input data as described by the config: merged sources or a synthetic
/// draw seeded with the run seed.
pub fn acquire_data(cfg: &PipelineConfig, seed: u64) -> Result<(Dataset, ValidationReport)> {
    if let Some(spec) = &cfg.synth {
        let spec = crate::synthetic::SynthSpec {
            seed,
            ..spec.clone()
        };
        let ds = generate(&spec).stage("generate")?;
        let report = validate(&ds);
        return Ok((ds, report));
    }
    load_sources(&cfg.sources)
}

/// Loads and merges sources; the report covers both parse rejects and
/// post-merge validation.
pub fn load_sources(sources: &[SourceSpec]) -> Result<(Dataset, ValidationReport)> {
    let mut parts = Vec::new();
    let mut load_report = ValidationReport::default();
    for s in sources {
        let (ds, r) =
            load_source(&s.path, s.aliases.as_deref(), &s.display_name()).stage("load")?;
        load_report.rows_accepted += r.rows_accepted;
        load_report.rows_rejected += r.rows_rejected;
        load_report.row_errors.extend(r.row_errors);
        load_report.warnings.extend(r.warnings);
        parts.push(ds);
    }
    let merged = merge_datasets(&parts).stage("merge")?;
    let mut report = validate(&merged);
    report.warnings.splice(0..0, load_report.warnings);
    report.rows_rejected += load_report.rows_rejected;
    report.row_errors.splice(0..0, load_report.row_errors);
    Ok((merged, report))
}

/// Everything between raw data and model fitting.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub validation: ValidationReport,
    pub encoders: EncoderMap,
    pub scaler: ScalerParams,
    /// Encoded, unscaled features and labels, split.
    pub split: TrainTestSplit,
    pub train_scaled: FeatureMatrix,
    pub test_scaled: FeatureMatrix,
}

impl Prepared {
    pub fn feature_names(&self) -> &[String] {
        self.split.train_x.feature_names()
    }
}

/// Labels, encodes, splits and scales an already-acquired dataset.
pub fn prepare_dataset(
    cfg: &PipelineConfig,
    seed: u64,
    dataset: Dataset,
    validation: ValidationReport,
) -> Result<Prepared> {
    // Rows rejected while parsing are already excluded; out-of-range values
    // in accepted rows abort the run.
    let check = validate(&dataset);
    if let Some(first) = check.row_errors.first() {
        return Err(Error::InvalidData(format!(
            "{} invalid rows (first: row {} `{}`: {})",
            check.rows_rejected, first.row, first.column, first.message
        )))
        .stage("validate");
    }
    let rules = cfg.rule_set().stage("label")?;
    let labeled = label_dataset(&dataset, &rules);
    let y = labeled.labels().expect("labeled dataset has targets");

    let categorical = categorical_columns(&labeled, &cfg.features).stage("encode")?;
    // Encoders are fitted on the full dataset: label codes carry no
    // distributional statistics, and it keeps every test value encodable.
    let encoders = fit_label_encoders(&labeled, &categorical).stage("encode")?;
    let x = apply_encoders(&labeled, &encoders, &cfg.features).stage("encode")?;

    let split = train_test_split(&x, &y, &cfg.split_spec(seed)).stage("split")?;
    let scaler = fit_scaler(&split.train_x, &cfg.scale_columns()).stage("scale")?;
    let train_scaled = apply_scaler(&split.train_x, &scaler).stage("scale")?;
    let test_scaled = apply_scaler(&split.test_x, &scaler).stage("scale")?;

    Ok(Prepared {
        dataset: labeled,
        validation,
        encoders,
        scaler,
        split,
        train_scaled,
        test_scaled,
    })
}

pub fn prepare(cfg: &PipelineConfig, seed: u64) -> Result<Prepared> {
    let (ds, report) = acquire_data(cfg, seed)?;
    prepare_dataset(cfg, seed, ds, report)
}

pub fn fit_model(
    kind: ModelKind,
    cfg: &PipelineConfig,
    x: &FeatureMatrix,
    y: &[Label],
    seed: u64,
) -> Result<ModelPayload> {
    let m = &cfg.models;
    Ok(match kind {
        ModelKind::NaiveBayes => ModelPayload::NaiveBayes(fit_gaussian_nb(x, y, m.naive_bayes)?),
        ModelKind::DecisionTree => {
            ModelPayload::DecisionTree(fit_decision_tree(x, y, m.decision_tree)?)
        }
        ModelKind::RandomForest => {
            ModelPayload::RandomForest(fit_random_forest(x, y, m.random_forest, seed)?)
        }
        ModelKind::Knn => ModelPayload::Knn(fit_knn(x, y, m.knn)?),
    })
}

/// Fits every enabled model on the scaled training split.
pub fn train_models(
    cfg: &PipelineConfig,
    seed: u64,
    prepared: &Prepared,
) -> Result<Vec<TrainedModel>> {
    let mut kinds = cfg.models.enabled.clone();
    kinds.sort();
    kinds.dedup();
    kinds
        .into_par_iter()
        .map(|kind| {
            let payload = fit_model(
                kind,
                cfg,
                &prepared.train_scaled,
                &prepared.split.train_y,
                seed,
            )?;
            TrainedModel::new(
                payload,
                prepared.feature_names().to_vec(),
                prepared.encoders.clone(),
                prepared.scaler.clone(),
                Some(seed),
            )
        })
        .collect::<Result<Vec<_>>>()
        .stage("train")
}

fn score(
    m: &TrainedModel,
    y_true: &[Label],
    pred: &[Label],
    averaging: Averaging,
) -> Result<ModelEvaluation> {
    let classes = observed_classes(y_true, pred);
    let cm = confusion_matrix(y_true, pred, &classes)?;
    Ok(ModelEvaluation {
        name: m.kind().display_name().to_string(),
        model_type: m.kind().id().to_string(),
        metrics: metrics(&cm, averaging)?,
        alternate: metrics(&cm, averaging.other())?,
        confusion: cm,
    })
}

/// Scores models on encoded (unscaled) test features.
pub fn evaluate_models(
    models: &[TrainedModel],
    test_x: &FeatureMatrix,
    test_y: &[Label],
    averaging: Averaging,
    echo: RunEcho,
) -> Result<EvaluationReport> {
    let evaluations = models
        .iter()
        .map(|m| score(m, test_y, &m.predict_encoded(test_x)?, averaging))
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::build(echo, evaluations)
}

/// Scores models on a labeled dataset of raw records, using each model's
/// own encoders and scaler.
pub fn evaluate_on_dataset(
    models: &[TrainedModel],
    ds: &Dataset,
    averaging: Averaging,
) -> Result<EvaluationReport> {
    let y = ds
        .labels()
        .ok_or_else(|| Error::MissingColumn(crate::data_model::PREFERRED_EDUCATION.into()))?;
    let evaluations = models
        .iter()
        .map(|m| {
            let pred = ds
                .rows()
                .iter()
                .map(|r| m.predict_record(r))
                .collect::<Result<Vec<_>>>()?;
            score(m, &y, &pred, averaging)
        })
        .collect::<Result<Vec<_>>>()?;
    let echo = RunEcho {
        seed: None,
        config_hash: None,
        data: ds.provenance().join(" + "),
        n_rows: ds.len(),
        n_train: None,
        n_test: ds.len(),
        test_fraction: None,
        stratified: None,
        averaging,
        features: models
            .first()
            .map(|m| m.feature_names.clone())
            .unwrap_or_default(),
    };
    EvaluationReport::build(echo, evaluations)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub prepared: Prepared,
    pub models: Vec<TrainedModel>,
    pub report: EvaluationReport,
}

pub fn run_echo(cfg: &PipelineConfig, seed: u64, prepared: &Prepared) -> RunEcho {
    RunEcho {
        seed: Some(seed),
        config_hash: Some(cfg.hash()),
        data: prepared.dataset.provenance().join(" + "),
        n_rows: prepared.dataset.len(),
        n_train: Some(prepared.split.train_y.len()),
        n_test: prepared.split.test_y.len(),
        test_fraction: Some(cfg.split.test_fraction),
        stratified: Some(cfg.split.stratified),
        averaging: cfg.averaging,
        features: cfg.features.clone(),
    }
}

/// Runs every stage in memory; nothing is written.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let seed = cfg.check()?;
    let prepared = prepare(cfg, seed)?;
    let models = train_models(cfg, seed, &prepared)?;
    let report = evaluate_models(
        &models,
        &prepared.split.test_x,
        &prepared.split.test_y,
        cfg.averaging,
        run_echo(cfg, seed, &prepared),
    )
    .stage("evaluate")?;
    Ok(RunOutcome {
        seed,
        prepared,
        models,
        report,
    })
}

/// Report files for the requested formats, keyed by relative path.
pub fn report_files(report: &EvaluationReport, formats: &[ReportFormat]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Text => files.push(("report.txt".to_string(), report.to_text())),
            ReportFormat::Json => files.push(("report.json".to_string(), report.to_json())),
            ReportFormat::Csv => files.extend(
                report
                    .to_csv()
                    .into_iter()
                    .map(|(name, body)| (format!("tables/{name}"), body)),
            ),
        }
    }
    files
}

/// Writes a directory atomically: content goes to a sibling staging
/// directory which is renamed into place only if `fill` succeeds.
pub fn write_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let staging = parent.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    let result = fill(&staging).and_then(|()| {
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

pub(crate) fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes models, the labeled held-out rows and the split indices.
pub fn write_models(dir: &Path, models: &[TrainedModel], prepared: &Prepared) -> Result<()> {
    let models_dir = dir.join("models");
    fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    for m in models {
        m.save_to_path(&models_dir.join(format!("{}.json", m.kind().id())))?;
    }
    let test = prepared.dataset.subset(&prepared.split.test_indices)?;
    let mut buf = Vec::new();
    write_csv(&test, &mut buf)?;
    write_file(&dir.join("data").join("test.csv"), &buf)?;
    let split = serde_json::json!({
        "train_indices": prepared.split.train_indices,
        "test_indices": prepared.split.test_indices,
    });
    write_file(
        &dir.join("data").join("split.json"),
        format!("{split}\n").as_bytes(),
    )
}

/// Full run that also persists reports, models and the resolved config
/// under the run directory. Returns the directory.
pub fn run_and_write(cfg: &PipelineConfig) -> Result<(RunOutcome, PathBuf)> {
    let outcome = run_pipeline(cfg)?;
    let dir = cfg.run_dir(outcome.seed);
    write_atomically(&dir, |staging| {
        for (name, body) in report_files(&outcome.report, &cfg.formats) {
            write_file(&staging.join(name), body.as_bytes())?;
        }
        write_file(&staging.join("config.toml"), cfg.to_toml().as_bytes())?;
        write_models(staging, &outcome.models, &outcome.prepared)
    })
    .stage("write")?;
    Ok((outcome, dir))
}
