use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use asdedu::classifiers::{ModelKind, TrainedModel};
use asdedu::config::{PipelineConfig, ReportFormat, SourceSpec};
use asdedu::data_model::{summarize, write_csv, Dataset, ValidationReport};
use asdedu::evaluation::{Averaging, EvaluationReport};
use asdedu::pipeline;
use asdedu::rules::{label_dataset, rule_coverage, MethodLabel, RuleSet};
use asdedu::synthetic::{generate, SynthSpec};
use asdedu::Error;

/// Screening-data pipeline: rule labeling of teaching methods and
/// classifier benchmarking.
#[derive(Parser)]
#[command(name = "asdedu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge screening CSVs into one canonical CSV.
    Merge {
        #[command(flatten)]
        inputs: Inputs,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check inputs and print a validation report with summary statistics.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Assign Preferred_Education labels with a rule set.
    Label {
        #[command(flatten)]
        inputs: Inputs,
        /// `builtin` or a rule file.
        #[arg(long, default_value = "builtin")]
        rules: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Count how the rule set labels all 1024 answer vectors.
    Coverage {
        #[arg(long, default_value = "builtin")]
        rules: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate a synthetic screening dataset.
    Synth {
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long)]
        seed: u64,
        /// TOML file with generator settings.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the models and write them with the held-out rows.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score saved models on a labeled (or rule-labeled) CSV.
    Evaluate {
        /// Model file; repeat for several models.
        #[arg(short, long = "model", required = true)]
        models: Vec<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
        /// Rule set used when the data carries no labels.
        #[arg(long, default_value = "builtin")]
        rules: String,
        #[arg(long, value_enum, default_value_t = Avg::Macro)]
        averaging: Avg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Predict a teaching method for each record.
    Predict {
        /// Saved model file.
        #[arg(short, long)]
        model: PathBuf,
        /// Records as `PATH[@ALIASES]`.
        #[arg(short, long, value_name = "PATH[@ALIASES]")]
        input: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the full pipeline and write a run directory.
    Run {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct Inputs {
    /// Input CSV, optionally with an alias file: `PATH[@ALIASES]`.
    #[arg(short, long = "input", value_name = "PATH[@ALIASES]", required = true)]
    inputs: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run seed; required unless the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Input CSVs (replace the configured input).
    #[arg(short, long = "input", value_name = "PATH[@ALIASES]")]
    inputs: Vec<String>,
    /// Use a synthetic dataset of this many rows.
    #[arg(long, value_name = "N", conflicts_with = "inputs")]
    synth: Option<usize>,
    /// Feature columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Columns to z-score on the training split.
    #[arg(long, value_delimiter = ',', conflicts_with = "no_scale")]
    scale: Option<Vec<String>>,
    /// Disable feature scaling.
    #[arg(long)]
    no_scale: bool,
    /// Rule file; the built-in rules otherwise.
    #[arg(long)]
    rules: Option<String>,
    /// Held-out fraction in (0, 1).
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Stratify the split by label.
    #[arg(long)]
    stratified: bool,
    /// Models to fit: naive_bayes, decision_tree, random_forest, knn.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    models: Option<Vec<ModelKind>>,
    /// Random forest size.
    #[arg(long)]
    trees: Option<usize>,
    /// Depth limit for the tree and forest.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Neighbours for KNN.
    #[arg(long)]
    k: Option<usize>,
    /// Naive Bayes variance floor, relative to the largest variance.
    #[arg(long)]
    var_smoothing: Option<f64>,
    #[arg(long, value_enum)]
    averaging: Option<Avg>,
    /// Parent directory for run directories.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Report formats to write; the first is also printed.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Avg {
    Macro,
    Weighted,
}

impl From<Avg> for Averaging {
    fn from(a: Avg) -> Self {
        match a {
            Avg::Macro => Averaging::Macro,
            Avg::Weighted => Averaging::Weighted,
        }
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn source_spec(arg: &str) -> SourceSpec {
    match arg.rsplit_once('@') {
        Some((path, aliases)) if !aliases.is_empty() => SourceSpec {
            path: path.into(),
            aliases: Some(aliases.into()),
            name: None,
        },
        _ => SourceSpec {
            path: arg.into(),
            aliases: None,
            name: None,
        },
    }
}

fn load_inputs(inputs: &Inputs) -> asdedu::Result<(Dataset, ValidationReport)> {
    let specs: Vec<SourceSpec> = inputs.inputs.iter().map(|s| source_spec(s)).collect();
    pipeline::load_sources(&specs)
}

fn rule_set(arg: &str) -> asdedu::Result<RuleSet> {
    if arg == "builtin" {
        Ok(RuleSet::canonical())
    } else {
        RuleSet::from_path(Path::new(arg))
    }
}

fn emit(output: Option<&Path>, body: &[u8]) -> asdedu::Result<()> {
    match output {
        Some(p) => fs::write(p, body).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => io::stdout().write_all(body).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn report_warnings(report: &ValidationReport) {
    for e in &report.row_errors {
        eprintln!("warning: row {} `{}`: {}", e.row, e.column, e.message);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn print_report(report: &EvaluationReport, format: Format) {
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => print!("{}", report.to_json()),
        Format::Csv => {
            if let Some((_, body)) = report
                .to_csv()
                .into_iter()
                .find(|(n, _)| n == "metrics.csv")
            {
                print!("{body}");
            }
        }
    }
}

impl RunArgs {
    fn config(&self) -> asdedu::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_path(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if !self.inputs.is_empty() {
            cfg.sources = self.inputs.iter().map(|s| source_spec(s)).collect();
            cfg.synth = None;
        }
        if let Some(n) = self.synth {
            cfg.sources.clear();
            let mut spec = cfg.synth.take().unwrap_or_else(|| SynthSpec::new(n, 0));
            spec.n = n;
            cfg.synth = Some(spec);
        }
        if let (Some(seed), Some(spec)) = (cfg.seed, cfg.synth.as_mut()) {
            spec.seed = seed;
        }
        if let Some(f) = &self.features {
            cfg.features = f.clone();
        }
        if let Some(s) = &self.scale {
            cfg.scale_columns = Some(s.clone());
        }
        if self.no_scale {
            cfg.scale_columns = Some(Vec::new());
        }
        if let Some(r) = &self.rules {
            cfg.rules = r.clone();
        }
        if let Some(f) = self.test_fraction {
            cfg.split.test_fraction = f;
        }
        if self.stratified {
            cfg.split.stratified = true;
        }
        if let Some(m) = &self.models {
            cfg.models.enabled = m.clone();
        }
        if let Some(t) = self.trees {
            cfg.models.random_forest.n_trees = t;
        }
        if let Some(d) = self.max_depth {
            cfg.models.decision_tree.max_depth = Some(d);
            cfg.models.random_forest.tree.max_depth = Some(d);
        }
        if let Some(k) = self.k {
            cfg.models.knn.k = k;
        }
        if let Some(v) = self.var_smoothing {
            cfg.models.naive_bayes.var_smoothing = v;
        }
        if let Some(a) = self.averaging {
            cfg.averaging = a.into();
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(f) = &self.format {
            cfg.formats = f.iter().map(|&f| f.into()).collect();
        }
        Ok(cfg)
    }

    fn stdout_format(&self, cfg: &PipelineConfig) -> Format {
        match cfg.formats.first() {
            Some(ReportFormat::Json) => Format::Json,
            Some(ReportFormat::Csv) => Format::Csv,
            _ => Format::Text,
        }
    }
}

fn run(cli: Cli) -> asdedu::Result<ExitCode> {
    match cli.command {
        Command::Merge { inputs, output } => {
            let (ds, report) = load_inputs(&inputs)?;
            report_warnings(&report);
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf)?;
            emit(output.as_deref(), &buf)?;
        }
        Command::Validate { inputs, format } => {
            let (ds, report) = load_inputs(&inputs)?;
            let summary = summarize(&ds);
            match format {
                Format::Json => {
                    let v = serde_json::json!({ "validation": report, "summary": summary });
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                _ => {
                    println!("rows accepted: {}", report.rows_accepted);
                    println!("rows rejected: {}", report.rows_rejected);
                    for e in &report.row_errors {
                        println!("error: row {} `{}`: {}", e.row, e.column, e.message);
                    }
                    for w in &report.warnings {
                        println!("warning: {w}");
                    }
                    println!("rows: {}", summary.rows);
                    println!("class balance (Yes): {:.4}", summary.class_balance);
                    println!(
                        "age (months): min {} max {} mean {:.2}",
                        summary.age_months_min, summary.age_months_max, summary.age_months_mean
                    );
                    for (i, p) in summary.a_prevalence.iter().enumerate() {
                        println!("A{} prevalence: {p:.4}", i + 1);
                    }
                }
            }
            if report.has_errors() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Label {
            inputs,
            rules,
            output,
        } => {
            let rs = rule_set(&rules)?;
            let (ds, report) = load_inputs(&inputs)?;
            report_warnings(&report);
            let mut buf = Vec::new();
            write_csv(&label_dataset(&ds, &rs), &mut buf)?;
            emit(output.as_deref(), &buf)?;
        }
        Command::Coverage { rules, format } => {
            let table = rule_coverage(&rule_set(&rules)?);
            match format {
                Format::Json => {
                    let v: Vec<_> = MethodLabel::ALL
                        .iter()
                        .map(|&m| serde_json::json!({"code": m.code(), "name": m.name(), "count": table.get(m)}))
                        .collect();
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                Format::Csv => {
                    println!("code,name,count");
                    for &m in MethodLabel::ALL.iter() {
                        println!("{},{},{}", m.code(), m.name(), table.get(m));
                    }
                }
                Format::Text => {
                    for &m in MethodLabel::ALL.iter() {
                        println!("{} {:<45} {:>4}", m.code(), m.name(), table.get(m));
                    }
                    println!("total {:>49}", table.total());
                }
            }
        }
        Command::Synth {
            n,
            seed,
            spec,
            output,
        } => {
            let mut s = match spec {
                Some(p) => {
                    let text =
                        fs::read_to_string(&p).map_err(|e| Error::Io { path: p, source: e })?;
                    toml::from_str::<SynthSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => SynthSpec::default(),
            };
            if let Some(n) = n {
                s.n = n;
            }
            s.seed = seed;
            let mut buf = Vec::new();
            write_csv(&generate(&s)?, &mut buf)?;
            emit(output.as_deref(), &buf)?;
        }
        Command::Train { run, out } => {
            let cfg = run.config()?;
            let seed = cfg.check()?;
            let prepared = pipeline::prepare(&cfg, seed)?;
            report_warnings(&prepared.validation);
            let models = pipeline::train_models(&cfg, seed, &prepared)?;
            let dir = out.unwrap_or_else(|| cfg.run_dir(seed));
            pipeline::write_atomically(&dir, |staging| {
                fs::write(staging.join("config.toml"), cfg.to_toml()).map_err(|e| Error::Io {
                    path: staging.join("config.toml"),
                    source: e,
                })?;
                pipeline::write_models(staging, &models, &prepared)
            })?;
            println!("{}", dir.display());
        }
        Command::Evaluate {
            models,
            inputs,
            rules,
            averaging,
            format,
        } => {
            let models = models
                .iter()
                .map(|p| TrainedModel::load_from_path(p))
                .collect::<asdedu::Result<Vec<_>>>()?;
            let (mut ds, report) = load_inputs(&inputs)?;
            report_warnings(&report);
            if ds.labels().is_none() {
                ds = label_dataset(&ds, &rule_set(&rules)?);
            }
            let report = pipeline::evaluate_on_dataset(&models, &ds, averaging.into())?;
            print_report(&report, format);
        }
        Command::Predict {
            model,
            input,
            format,
        } => return predict(&model, &input, format),
        Command::Run { run } => {
            let cfg = run.config()?;
            let (outcome, dir) = pipeline::run_and_write(&cfg)?;
            report_warnings(&outcome.prepared.validation);
            print_report(&outcome.report, run.stdout_format(&cfg));
            eprintln!("wrote {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn predict(model: &Path, input: &str, format: Format) -> asdedu::Result<ExitCode> {
    let model = TrainedModel::load_from_path(model)?;
    let spec = source_spec(input);
    let (ds, report) =
        pipeline::load_source(&spec.path, spec.aliases.as_deref(), &spec.display_name())?;

    let total = report.rows_accepted + report.rows_rejected;
    let mut accepted = ds.rows().iter();
    let mut results = Vec::with_capacity(total);
    for row in 0..total {
        let parse_errors: Vec<String> = report
            .row_errors
            .iter()
            .filter(|e| e.row == row)
            .map(|e| format!("`{}`: {}", e.column, e.message))
            .collect();
        let result = if parse_errors.is_empty() {
            let record = accepted.next().expect("accepted rows stay in order");
            model.predict_record(record).map_err(|e| e.to_string())
        } else {
            Err(parse_errors.join("; "))
        };
        results.push((row, result));
    }

    let failures = results.iter().filter(|(_, r)| r.is_err()).count();
    match format {
        Format::Json => {
            let v: Vec<_> = results
                .iter()
                .map(|(row, r)| match r {
                    Ok(code) => serde_json::json!({
                        "row": row,
                        "code": code,
                        "method": model.label_name(*code),
                    }),
                    Err(e) => serde_json::json!({ "row": row, "error": e }),
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Format::Csv => {
            println!("row,code,method,error");
            for (row, r) in &results {
                match r {
                    Ok(code) => println!("{row},{code},{},", model.label_name(*code).unwrap_or("")),
                    Err(e) => println!("{row},,,\"{}\"", e.replace('"', "\"\"")),
                }
            }
        }
        Format::Text => {
            for (row, r) in &results {
                match r {
                    Ok(code) => {
                        println!("{row}\t{code}\t{}", model.label_name(*code).unwrap_or(""))
                    }
                    Err(e) => println!("{row}\terror\t{e}"),
                }
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} of {total} records failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::InvalidParam(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}
