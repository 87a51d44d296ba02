//! End-to-end orchestration: configuration files, feature fitting, task
//! runs, and submission-file prediction.

use crate::corpus::{ParagraphRecord, TASK2_CATEGORIES};
use crate::error::{Error, Result};
use crate::linear::{predict, train};
use crate::metrics::confusion;
use crate::ngrams::{build_vocabulary, serialize_vocabulary, vectorize, FeatureConfig, Vocabulary};
use crate::weighting::{fit_stats, l2_normalize, transform, DEFAULT_B, DEFAULT_K1};
use crate::{DocVector, Model, ModelBundle, Report, Stats, TrainData, TrainSettings};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Task1,
    Task2,
}

/// Which feature families to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilySelection {
    Char,
    Word,
    Combined,
}

impl std::str::FromStr for FamilySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(FamilySelection::Char),
            "word" => Ok(FamilySelection::Word),
            "combined" => Ok(FamilySelection::Combined),
            other => Err(Error::Config(format!(
                "unknown feature family {other:?}, expected char, word, or combined"
            ))),
        }
    }
}

/// (C, positive_weight) pair for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub c: f64,
    pub w: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { c: 1.0, w: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: u32,
    pub bias: bool,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-4,
            max_iter: 1000,
            bias: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub c_values: Vec<f64>,
    pub w_values: Vec<f64>,
    pub folds: u32,
    pub seed: u64,
    pub delta: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            c_values: vec![0.1, 1.0, 10.0],
            w_values: vec![1.0, 5.0, 10.0],
            folds: 5,
            seed: 0,
            delta: crate::tuning::DEFAULT_SELECTION_DELTA,
        }
    }
}

/// Everything a run needs: feature extraction, weighting, solver, per-target
/// parameters, and the tuning grid. Parsed from a TOML file where every
/// section and key is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub k1: f64,
    pub b: f64,
    pub solver: SolverSettings,
    pub task1: ModelParams,
    pub task2: [ModelParams; 7],
    pub grid: GridSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            k1: DEFAULT_K1,
            b: DEFAULT_B,
            solver: SolverSettings::default(),
            task1: ModelParams::default(),
            task2: [ModelParams::default(); 7],
            grid: GridSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Solver settings with one target's (C, positive_weight) filled in.
    pub fn train_settings(&self, params: ModelParams) -> TrainSettings {
        TrainSettings {
            c: params.c,
            positive_weight: params.w,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: self.solver.seed,
            bias: self.solver.bias,
        }
    }

    /// Restrict feature extraction to one family (or both).
    pub fn select_family(&mut self, family: FamilySelection) {
        let defaults = FeatureConfig::default();
        let char_orders = self.features.char_orders.or(defaults.char_orders);
        let word_orders = self.features.word_orders.or(defaults.word_orders);
        self.features.char_orders = match family {
            FamilySelection::Word => None,
            _ => char_orders,
        };
        self.features.word_orders = match family {
            FamilySelection::Char => None,
            _ => word_orders,
        };
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if !(self.k1 > 0.0) {
            return Err(Error::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must lie in [0, 1], got {}", self.b)));
        }
        self.train_settings(self.task1).validate()?;
        for (cat, &params) in TASK2_CATEGORIES.iter().zip(&self.task2) {
            self.train_settings(params)
                .validate()
                .map_err(|e| Error::Config(format!("category {cat}: {e}")))?;
        }
        crate::Grid {
            c_values: self.grid.c_values.clone(),
            w_values: self.grid.w_values.clone(),
        }
        .validate()?;
        if self.grid.folds < 2 {
            return Err(Error::Config("grid folds must be at least 2".into()));
        }
        if !(self.grid.delta >= 0.0) {
            return Err(Error::Config(format!(
                "grid delta must be nonnegative, got {}",
                self.grid.delta
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    features: Option<RawFeatures>,
    weighting: Option<RawWeighting>,
    solver: Option<RawSolver>,
    task1: Option<RawParams>,
    task2: Option<RawTask2>,
    grid: Option<RawGrid>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatures {
    family: Option<String>,
    char_min: Option<u32>,
    char_max: Option<u32>,
    word_min: Option<u32>,
    word_max: Option<u32>,
    min_count: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeighting {
    k1: Option<f64>,
    b: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<u32>,
    bias: Option<bool>,
    seed: Option<u64>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawParams {
    c: f64,
    w: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask2 {
    a: Option<RawParams>,
    b: Option<RawParams>,
    c: Option<RawParams>,
    d: Option<RawParams>,
    e: Option<RawParams>,
    f: Option<RawParams>,
    g: Option<RawParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    c_values: Option<Vec<f64>>,
    w_values: Option<Vec<f64>>,
    folds: Option<u32>,
    seed: Option<u64>,
    delta: Option<f64>,
}

pub fn parse_config(text: &str, path: &str) -> Result<PipelineConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let mut config = PipelineConfig::default();
    if let Some(features) = raw.features {
        if let Some((lo, hi)) = config.features.char_orders {
            config.features.char_orders =
                Some((features.char_min.unwrap_or(lo), features.char_max.unwrap_or(hi)));
        }
        if let Some((lo, hi)) = config.features.word_orders {
            config.features.word_orders =
                Some((features.word_min.unwrap_or(lo), features.word_max.unwrap_or(hi)));
        }
        if let Some(min_count) = features.min_count {
            config.features.min_total_count = min_count;
        }
        if let Some(family) = features.family {
            config.select_family(family.parse()?);
        }
    }
    if let Some(weighting) = raw.weighting {
        config.k1 = weighting.k1.unwrap_or(config.k1);
        config.b = weighting.b.unwrap_or(config.b);
    }
    if let Some(solver) = raw.solver {
        config.solver.tol = solver.tol.unwrap_or(config.solver.tol);
        config.solver.max_iter = solver.max_iter.unwrap_or(config.solver.max_iter);
        config.solver.bias = solver.bias.unwrap_or(config.solver.bias);
        config.solver.seed = solver.seed.unwrap_or(config.solver.seed);
    }
    if let Some(params) = raw.task1 {
        config.task1 = ModelParams { c: params.c, w: params.w };
    }
    if let Some(task2) = raw.task2 {
        let slots = [task2.a, task2.b, task2.c, task2.d, task2.e, task2.f, task2.g];
        for (slot, raw_params) in config.task2.iter_mut().zip(slots) {
            if let Some(params) = raw_params {
                *slot = ModelParams { c: params.c, w: params.w };
            }
        }
    }
    if let Some(grid) = raw.grid {
        config.grid.c_values = grid.c_values.unwrap_or(config.grid.c_values);
        config.grid.w_values = grid.w_values.unwrap_or(config.grid.w_values);
        config.grid.folds = grid.folds.unwrap_or(config.grid.folds);
        config.grid.seed = grid.seed.unwrap_or(config.grid.seed);
        config.grid.delta = grid.delta.unwrap_or(config.grid.delta);
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Vocabulary and corpus statistics fitted on one training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureArtifacts {
    pub vocab: Vocabulary,
    pub stats: Stats,
}

/// Fit vocabulary and BM25 statistics on the training corpus.
pub fn build_features(
    records: &[ParagraphRecord],
    config: &PipelineConfig,
) -> Result<FeatureArtifacts> {
    let vocab = build_vocabulary(records.iter().map(|r| r.text.as_str()), config.features)?;
    let counts: Vec<_> = records
        .par_iter()
        .map(|r| vectorize(&r.text, &vocab))
        .collect();
    let stats = fit_stats(
        &counts,
        vocab.len() as u32,
        vocab.n_char_features(),
        config.k1,
        config.b,
    )?;
    Ok(FeatureArtifacts { vocab, stats })
}

/// Vectorize, BM25-weight, and L2-normalize every record against fitted
/// artifacts.
pub fn weighted_vectors(
    records: &[ParagraphRecord],
    artifacts: &FeatureArtifacts,
) -> Result<Vec<DocVector>> {
    records
        .par_iter()
        .map(|r| {
            let counts = vectorize(&r.text, &artifacts.vocab);
            Ok(l2_normalize(transform(&counts, &artifacts.stats)?))
        })
        .collect()
}

/// Binary labels of a task1/task2 corpus.
pub fn binary_labels(records: &[ParagraphRecord]) -> Result<Vec<bool>> {
    records
        .iter()
        .map(|r| {
            r.task1_label
                .ok_or_else(|| Error::Input(format!("record {:?} has no binary label", r.par_id)))
        })
        .collect()
}

/// Labels of one task2 category (0..7).
pub fn category_labels(records: &[ParagraphRecord], category: usize) -> Result<Vec<bool>> {
    records
        .iter()
        .map(|r| {
            r.task2_labels
                .map(|l| l[category])
                .ok_or_else(|| Error::Input(format!("record {:?} has no category labels", r.par_id)))
        })
        .collect()
}

fn rename_single_class(err: Error, target: &str) -> Error {
    match err {
        Error::SingleClass { .. } => Error::SingleClass {
            target: target.to_string(),
        },
        other => other,
    }
}

/// Assemble a training collection and fit one model.
pub fn train_model(
    vectors: Vec<DocVector>,
    labels: Vec<bool>,
    n_features: u32,
    settings: &TrainSettings,
    target: &str,
) -> Result<Model> {
    let data = TrainData::new(vectors, labels, n_features)?;
    train(&data, settings).map_err(|e| rename_single_class(e, target))
}

/// Fit features and one binary model on the training corpus, then evaluate
/// positive-class precision/recall/F1 on the eval corpus.
pub fn run_task1(
    train_records: &[ParagraphRecord],
    eval_records: &[ParagraphRecord],
    config: &PipelineConfig,
) -> Result<(Model, Report)> {
    let artifacts = build_features(train_records, config)?;
    let model = train_model(
        weighted_vectors(train_records, &artifacts)?,
        binary_labels(train_records)?,
        artifacts.vocab.len() as u32,
        &config.train_settings(config.task1),
        "task1",
    )?;
    let eval_vectors = weighted_vectors(eval_records, &artifacts)?;
    let preds: Vec<bool> = eval_vectors.iter().map(|v| predict(&model, v)).collect();
    let gold = binary_labels(eval_records)?;
    let report = Report::from_confusions(vec![("task1".to_string(), confusion(&preds, &gold)?)]);
    Ok((model, report))
}

/// Fit features once, then train seven independent category models and
/// evaluate each, reporting per-category F1 and their unweighted mean.
pub fn run_task2(
    train_records: &[ParagraphRecord],
    eval_records: &[ParagraphRecord],
    config: &PipelineConfig,
) -> Result<(Vec<Model>, Report)> {
    let artifacts = build_features(train_records, config)?;
    let train_vectors = weighted_vectors(train_records, &artifacts)?;
    let n_features = artifacts.vocab.len() as u32;
    let models: Vec<Model> = (0..TASK2_CATEGORIES.len())
        .into_par_iter()
        .map(|cat| {
            train_model(
                train_vectors.clone(),
                category_labels(train_records, cat)?,
                n_features,
                &config.train_settings(config.task2[cat]),
                &format!("category {}", TASK2_CATEGORIES[cat]),
            )
        })
        .collect::<Result<_>>()?;
    let eval_vectors = weighted_vectors(eval_records, &artifacts)?;
    let mut named = Vec::new();
    for (cat, model) in models.iter().enumerate() {
        let preds: Vec<bool> = eval_vectors.iter().map(|v| predict(model, v)).collect();
        let gold = category_labels(eval_records, cat)?;
        named.push((TASK2_CATEGORIES[cat].to_string(), confusion(&preds, &gold)?));
    }
    Ok((models, Report::from_confusions(named)))
}

/// SHA-256 of the serialized vocabulary, as lowercase hex. Stored in model
/// files so prediction can refuse a mismatched vocabulary.
pub fn vocabulary_fingerprint(vocab: &Vocabulary) -> Result<String> {
    let text = serialize_vocabulary(vocab)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Bind trained models to the vocabulary they were trained against.
pub fn bundle_models(
    targets: Vec<(String, Model)>,
    vocab: &Vocabulary,
) -> Result<ModelBundle> {
    Ok(ModelBundle {
        vocab_sha256: vocabulary_fingerprint(vocab)?,
        targets,
    })
}

fn check_bundle(bundle: &ModelBundle, artifacts: &FeatureArtifacts) -> Result<()> {
    let fingerprint = vocabulary_fingerprint(&artifacts.vocab)?;
    if bundle.vocab_sha256 != fingerprint {
        return Err(Error::VocabularyMismatch {
            expected: bundle.vocab_sha256.clone(),
            found: fingerprint,
        });
    }
    for (name, model) in &bundle.targets {
        if model.w.len() != artifacts.vocab.len() {
            return Err(Error::Input(format!(
                "model {name} has {} weights, vocabulary has {} entries",
                model.w.len(),
                artifacts.vocab.len()
            )));
        }
    }
    Ok(())
}

fn bundle_target<'a>(bundle: &'a ModelBundle, name: &str) -> Result<&'a Model> {
    bundle
        .targets
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, m)| m)
        .ok_or_else(|| Error::Input(format!("model file has no target {name:?}")))
}

/// Binary predictions for every record, in input order.
pub fn predict_task1(
    bundle: &ModelBundle,
    artifacts: &FeatureArtifacts,
    records: &[ParagraphRecord],
) -> Result<Vec<bool>> {
    check_bundle(bundle, artifacts)?;
    let model = bundle_target(bundle, "task1")?;
    let vectors = weighted_vectors(records, artifacts)?;
    Ok(vectors.iter().map(|v| predict(model, v)).collect())
}

/// Seven-category predictions for every record, in input order.
pub fn predict_task2(
    bundle: &ModelBundle,
    artifacts: &FeatureArtifacts,
    records: &[ParagraphRecord],
) -> Result<Vec<[bool; 7]>> {
    check_bundle(bundle, artifacts)?;
    let models: Vec<&Model> = TASK2_CATEGORIES
        .iter()
        .map(|cat| bundle_target(bundle, cat))
        .collect::<Result<_>>()?;
    let vectors = weighted_vectors(records, artifacts)?;
    Ok(vectors
        .iter()
        .map(|v| {
            let mut row = [false; 7];
            for (slot, model) in row.iter_mut().zip(&models) {
                *slot = predict(*model, v);
            }
            row
        })
        .collect())
}

pub fn render_task1_predictions(preds: &[bool]) -> String {
    let mut out = String::with_capacity(preds.len() * 2);
    for &p in preds {
        out.push(if p { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn render_task2_predictions(preds: &[[bool; 7]]) -> String {
    let mut out = String::with_capacity(preds.len() * 15);
    for row in preds {
        for (i, &p) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push(if p { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Predict every record and write the submission file: task1 one 0/1 per
/// line, task2 seven comma-separated 0/1 per line, input order preserved.
pub fn predict_file(
    bundle: &ModelBundle,
    artifacts: &FeatureArtifacts,
    records: &[ParagraphRecord],
    task: TaskKind,
    out: &Path,
) -> Result<()> {
    let text = match task {
        TaskKind::Task1 => render_task1_predictions(&predict_task1(bundle, artifacts, records)?),
        TaskKind::Task2 => render_task2_predictions(&predict_task2(bundle, artifacts, records)?),
    };
    std::fs::write(out, text).map_err(|e| Error::io(out, e))
}

fn parse_binary_token(token: &str, path: &str, line: usize) -> Result<bool> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(path, line, format!("expected 0 or 1, got {other:?}"))),
    }
}

pub fn parse_task1_predictions(text: &str, path: &str) -> Result<Vec<bool>> {
    text.lines()
        .enumerate()
        .map(|(idx, raw)| {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            parse_binary_token(line, path, idx + 1)
        })
        .collect()
}

pub fn parse_task2_predictions(text: &str, path: &str) -> Result<Vec<[bool; 7]>> {
    text.lines()
        .enumerate()
        .map(|(idx, raw)| {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected 7 comma-separated values, found {}", fields.len()),
                ));
            }
            let mut row = [false; 7];
            for (slot, field) in row.iter_mut().zip(fields) {
                *slot = parse_binary_token(field, path, idx + 1)?;
            }
            Ok(row)
        })
        .collect()
}

/// Score a task1 prediction sequence against a gold corpus.
pub fn evaluate_task1(preds: &[bool], gold_records: &[ParagraphRecord]) -> Result<Report> {
    let gold = binary_labels(gold_records)?;
    if preds.len() != gold.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold records",
            preds.len(),
            gold.len()
        )));
    }
    Ok(Report::from_confusions(vec![(
        "task1".to_string(),
        confusion(preds, &gold)?,
    )]))
}

/// Score task2 predictions per category against a gold corpus.
pub fn evaluate_task2(preds: &[[bool; 7]], gold_records: &[ParagraphRecord]) -> Result<Report> {
    if preds.len() != gold_records.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold records",
            preds.len(),
            gold_records.len()
        )));
    }
    let mut named = Vec::new();
    for (cat, name) in TASK2_CATEGORIES.iter().enumerate() {
        let gold = category_labels(gold_records, cat)?;
        let cat_preds: Vec<bool> = preds.iter().map(|row| row[cat]).collect();
        named.push((name.to_string(), confusion(&cat_preds, &gold)?));
    }
    Ok(Report::from_confusions(named))
}
