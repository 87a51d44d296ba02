//! Command-line front end: featurize, train, tune, predict, evaluate,
//! baseline. Exit codes: 0 success, 1 usage or configuration, 2 data,
//! 3 solver failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gramclass::corpus::{load_corpus, CorpusFormat, TASK2_CATEGORIES};
use gramclass::linear::{load_model_file, save_model_file};
use gramclass::metrics::{f1_best_guess, monte_carlo_best_guess};
use gramclass::ngrams::{load_vocabulary, write_vocabulary};
use gramclass::pipeline::{
    binary_labels, build_features, category_labels, load_config, parse_task1_predictions,
    parse_task2_predictions, predict_file, train_model, weighted_vectors, evaluate_task1,
    evaluate_task2, bundle_models, FamilySelection, FeatureArtifacts, PipelineConfig, TaskKind,
};
use gramclass::tuning::{grid_search, secondary_selection, write_cv_report};
use gramclass::weighting::{load_stats, write_stats};
use gramclass::{Error, Grid, Result, TrainData};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gramclass",
    version,
    about = "Character and word n-gram text classification with BM25 weighting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit vocabulary and corpus statistics on a training corpus
    Featurize(FeaturizeArgs),
    /// Train models on a labeled corpus against fitted features
    Train(TrainArgs),
    /// Grid-search (C, w) by stratified cross-validation
    Tune(TuneArgs),
    /// Label an unlabeled corpus and write a submission file
    Predict(PredictArgs),
    /// Score a prediction file against a gold corpus
    Evaluate(EvaluateArgs),
    /// Expected F1 of a label-frequency-only guesser
    Baseline(BaselineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Char,
    Word,
    Combined,
}

impl From<FamilyArg> for FamilySelection {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Char => FamilySelection::Char,
            FamilyArg::Word => FamilySelection::Word,
            FamilyArg::Combined => FamilySelection::Combined,
        }
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Training corpus (TSV)
    #[arg(long)]
    input: PathBuf,
    /// Corpus layout: 1 binary, 2 seven categories
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Configuration file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict extraction to one feature family
    #[arg(long, value_enum)]
    features: Option<FamilyArg>,
    /// Output prefix; writes <out>.vocab.tsv and <out>.stats.tsv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training corpus (TSV)
    #[arg(long)]
    input: PathBuf,
    /// 1 trains one binary model, 2 trains seven category models
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Vocabulary file from featurize
    #[arg(long)]
    vocab: PathBuf,
    /// Statistics file from featurize
    #[arg(long)]
    stats: PathBuf,
    /// Configuration file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the trained model file
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    /// Labeled training corpus (TSV)
    #[arg(long)]
    input: PathBuf,
    /// Corpus layout: 1 binary, 2 seven categories
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Category to tune (a-g), required for task 2
    #[arg(long)]
    target: Option<String>,
    /// Configuration file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict extraction to one feature family
    #[arg(long, value_enum)]
    features: Option<FamilyArg>,
    /// Number of cross-validation folds
    #[arg(long)]
    folds: Option<u32>,
    /// Fold-assignment shuffle seed
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the cross-validation report
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Unlabeled corpus (TSV, five columns)
    #[arg(long)]
    input: PathBuf,
    /// 1 writes one 0/1 per line, 2 writes seven comma-separated 0/1
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Vocabulary file the model was trained against
    #[arg(long)]
    vocab: PathBuf,
    /// Statistics file the model was trained against
    #[arg(long)]
    stats: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Where to write the predictions
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold labeled corpus (TSV)
    #[arg(long)]
    input: PathBuf,
    /// Corpus layout: 1 binary, 2 seven categories
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Prediction file to score
    #[arg(long)]
    predictions: PathBuf,
    /// Also write the report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Positive-label rate q
    #[arg(long)]
    rate: Option<f64>,
    /// Labeled corpus to measure q from (needs --task)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Corpus layout: 1 binary, 2 seven categories
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: Option<u8>,
    /// Also confirm the analytic value by simulation
    #[arg(long)]
    confirm: bool,
    /// Simulation trials per guessing probability
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Labels drawn per simulated trial
    #[arg(long, default_value_t = 1000)]
    labels: usize,
    /// Simulation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Guessing-probability grid spacing over [0, 1]
    #[arg(long, default_value_t = 0.1)]
    step: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Featurize(args) => run_featurize(args),
        Command::Train(args) => run_train(args),
        Command::Tune(args) => run_tune(args),
        Command::Predict(args) => run_predict(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Baseline(args) => run_baseline(args),
    }
}

fn corpus_format(task: u8) -> CorpusFormat {
    if task == 1 {
        CorpusFormat::Task1
    } else {
        CorpusFormat::Task2
    }
}

fn load_pipeline_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_artifacts(vocab_path: &Path, stats_path: &Path) -> Result<FeatureArtifacts> {
    let vocab = load_vocabulary(vocab_path)?;
    let stats = load_stats(stats_path)?;
    if stats.n_features() != vocab.len() as u32
        || stats.n_char_features() != vocab.n_char_features()
    {
        return Err(Error::Input(format!(
            "statistics cover {} features ({} char), vocabulary has {} ({} char)",
            stats.n_features(),
            stats.n_char_features(),
            vocab.len(),
            vocab.n_char_features()
        )));
    }
    Ok(FeatureArtifacts { vocab, stats })
}

fn run_featurize(args: FeaturizeArgs) -> Result<()> {
    let mut config = load_pipeline_config(&args.config)?;
    if let Some(family) = args.features {
        config.select_family(family.into());
        config.validate()?;
    }
    let records = load_corpus(&args.input, corpus_format(args.task))?;
    let artifacts = build_features(&records, &config)?;
    let vocab_path = PathBuf::from(format!("{}.vocab.tsv", args.out.display()));
    let stats_path = PathBuf::from(format!("{}.stats.tsv", args.out.display()));
    write_vocabulary(&artifacts.vocab, &vocab_path)?;
    write_stats(&artifacts.stats, &stats_path)?;
    println!(
        "fitted {} features ({} char) on {} documents",
        artifacts.vocab.len(),
        artifacts.vocab.n_char_features(),
        records.len()
    );
    println!("wrote {}", vocab_path.display());
    println!("wrote {}", stats_path.display());
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let config = load_pipeline_config(&args.config)?;
    let records = load_corpus(&args.input, corpus_format(args.task))?;
    let artifacts = load_artifacts(&args.vocab, &args.stats)?;
    let vectors = weighted_vectors(&records, &artifacts)?;
    let n_features = artifacts.vocab.len() as u32;
    let mut targets = Vec::new();
    if args.task == 1 {
        let model = train_model(
            vectors,
            binary_labels(&records)?,
            n_features,
            &config.train_settings(config.task1),
            "task1",
        )?;
        targets.push(("task1".to_string(), model));
    } else {
        for (cat, name) in TASK2_CATEGORIES.iter().enumerate() {
            let model = train_model(
                vectors.clone(),
                category_labels(&records, cat)?,
                n_features,
                &config.train_settings(config.task2[cat]),
                &format!("category {name}"),
            )?;
            targets.push((name.to_string(), model));
        }
    }
    for (name, model) in &targets {
        println!(
            "{name}\tc\t{}\tw\t{}\titerations\t{}\tobjective\t{}",
            model.config.c, model.config.positive_weight, model.n_iterations, model.objective_value
        );
    }
    let bundle = bundle_models(targets, &artifacts.vocab)?;
    save_model_file(&bundle, &args.model)?;
    println!("wrote {}", args.model.display());
    Ok(())
}

fn run_tune(args: TuneArgs) -> Result<()> {
    let mut config = load_pipeline_config(&args.config)?;
    if let Some(family) = args.features {
        config.select_family(family.into());
    }
    if let Some(folds) = args.folds {
        config.grid.folds = folds;
    }
    if let Some(seed) = args.seed {
        config.grid.seed = seed;
    }
    config.validate()?;
    let records = load_corpus(&args.input, corpus_format(args.task))?;
    let (labels, target_name, base_params) = match (args.task, &args.target) {
        (1, None) => (binary_labels(&records)?, "task1".to_string(), config.task1),
        (1, Some(t)) => {
            return Err(Error::Config(format!(
                "--target {t} only applies to task 2"
            )))
        }
        (_, Some(t)) => {
            let cat = TASK2_CATEGORIES
                .iter()
                .position(|c| c == t)
                .ok_or_else(|| {
                    Error::Config(format!("unknown category {t:?}, expected one of a-g"))
                })?;
            (
                category_labels(&records, cat)?,
                format!("category {t}"),
                config.task2[cat],
            )
        }
        (_, None) => {
            return Err(Error::Config(
                "task 2 tuning needs --target with a category a-g".into(),
            ))
        }
    };
    let artifacts = build_features(&records, &config)?;
    let data = TrainData::new(
        weighted_vectors(&records, &artifacts)?,
        labels,
        artifacts.vocab.len() as u32,
    )?;
    let grid = Grid {
        c_values: config.grid.c_values.clone(),
        w_values: config.grid.w_values.clone(),
    };
    let base = config.train_settings(base_params);
    let cv = grid_search(&data, &grid, &base, config.grid.folds, config.grid.seed).map_err(
        |e| match e {
            Error::SingleClass { .. } => Error::SingleClass {
                target: target_name.clone(),
            },
            other => other,
        },
    )?;
    write_cv_report(&cv, &args.out)?;
    let best_cell = cv
        .cells
        .iter()
        .find(|cell| (cell.c, cell.w) == cv.best)
        .expect("best cell is always one of the evaluated cells");
    println!("target\t{target_name}");
    println!("folds\t{}", cv.k);
    println!("best_c\t{}", cv.best.0);
    println!("best_w\t{}", cv.best.1);
    println!("best_f1\t{}", best_cell.f1);
    let (balanced_c, balanced_w) = secondary_selection(&cv, config.grid.delta)?;
    println!("balanced_c\t{balanced_c}");
    println!("balanced_w\t{balanced_w}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let records = load_corpus(&args.input, CorpusFormat::Unlabeled)?;
    let artifacts = load_artifacts(&args.vocab, &args.stats)?;
    let bundle = load_model_file(&args.model)?;
    let task = if args.task == 1 {
        TaskKind::Task1
    } else {
        TaskKind::Task2
    };
    predict_file(&bundle, &artifacts, &records, task, &args.out)?;
    println!("wrote {} predictions to {}", records.len(), args.out.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let gold = load_corpus(&args.input, corpus_format(args.task))?;
    let text = std::fs::read_to_string(&args.predictions)
        .map_err(|e| Error::io(&args.predictions, e))?;
    let path = args.predictions.display().to_string();
    let report = if args.task == 1 {
        evaluate_task1(&parse_task1_predictions(&text, &path)?, &gold)?
    } else {
        evaluate_task2(&parse_task2_predictions(&text, &path)?, &gold)?
    };
    let rendered = report.render();
    print!("{rendered}");
    if let Some(out) = args.out {
        std::fs::write(&out, rendered).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}

fn run_baseline(args: BaselineArgs) -> Result<()> {
    let q = match (args.rate, &args.input) {
        (Some(rate), None) => rate,
        (None, Some(path)) => {
            let task = args
                .task
                .ok_or_else(|| Error::Config("--input needs --task to parse labels".into()))?;
            let records = load_corpus(path, corpus_format(task))?;
            gramclass::corpus::positive_rate(&binary_labels(&records)?)?
        }
        _ => {
            return Err(Error::Config(
                "give exactly one of --rate or --input".into(),
            ))
        }
    };
    println!("q\t{q}");
    println!("best_guess_f1\t{}", f1_best_guess(q)?);
    if args.confirm {
        if !(args.step > 0.0 && args.step <= 1.0) {
            return Err(Error::Config(format!(
                "step must lie in (0, 1], got {}",
                args.step
            )));
        }
        let n_steps = (1.0 / args.step).floor() as usize;
        let mut p_grid: Vec<f64> = (0..=n_steps).map(|i| i as f64 * args.step).collect();
        if p_grid.last().copied().unwrap_or(0.0) < 1.0 {
            p_grid.push(1.0);
        }
        let (best_p, mc_f1) =
            monte_carlo_best_guess(q, &p_grid, args.labels, args.trials, args.seed)?;
        println!("monte_carlo_best_p\t{best_p}");
        println!("monte_carlo_f1\t{mc_f1}");
    }
    Ok(())
}
