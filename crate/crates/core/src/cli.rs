//! Command-line front end: dumps in, reports out.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::alignment::{alignment_report, AlignConfig, CorrelationKind};
use crate::calibration::{calibration_report, CalibConfig, DEFAULT_ITERS};
use crate::dist::NucleusMode;
use crate::ingest::report::{emit_report, Emit, MeasureTable};
use crate::ingest::{
    clean_survey, parse_dump, read_survey_csv, write_survey_csv, HistogramMode, IngestError,
    OutputHeader, ReportFormat,
};
use crate::measures::{compute_measures_partial, MeasureConfig, MeasureId, MeasureVector};
use crate::record::QuestionRecord;
use crate::selfcheck;
use crate::stats::{SeedStream, Sided};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) | CliError::Ingest(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Ingest(e.into())
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "uqkit",
    version,
    about = "Inference-time uncertainty measures: alignment and calibration analysis"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every random step (tie-breaking, permutations).
    #[arg(long, global = true, default_value_t = SeedStream::DEFAULT_SEED)]
    pub seed: u64,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output formats.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [FormatArg::Csv, FormatArg::Json])]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl std::fmt::Display for FormatArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Compute per-question uncertainty measures from a dump.
    Measures(MeasuresArgs),
    /// Human-alignment report for a survey dump.
    Align(AlignArgs),
    /// Calibration report for a benchmark dump with correct answers.
    Calibrate(CalibrateArgs),
    /// Remove refusal options and invalid questions from a survey table.
    CleanSurvey(CleanArgs),
    /// Run the built-in invariant suite on bundled fixtures.
    Selfcheck,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Top-k sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 25, 50, 100])]
    pub k_values: Vec<usize>,

    /// Nucleus thresholds, strictly decreasing.
    #[arg(long, value_delimiter = ',', default_values_t = [0.95f64, 0.9, 0.75, 0.5])]
    pub p_values: Vec<f64>,

    /// Largest prefix with mass below p instead of the smallest reaching p.
    #[arg(long)]
    pub strict_nucleus: bool,

    /// Skip invalid dump lines instead of aborting.
    #[arg(long)]
    pub lenient: bool,
}

impl MeasureArgs {
    fn config(&self) -> MeasureConfig {
        MeasureConfig {
            k_values: self.k_values.clone(),
            p_values: self.p_values.clone(),
            nucleus_mode: if self.strict_nucleus {
                NucleusMode::Strict
            } else {
                NucleusMode::Standard
            },
        }
    }

    fn echo(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        vec![
            (
                "k_values".into(),
                join(self.k_values.iter().map(|k| k.to_string()).collect()),
            ),
            (
                "p_values".into(),
                join(self.p_values.iter().map(|p| p.to_string()).collect()),
            ),
            (
                "nucleus_mode".into(),
                if self.strict_nucleus {
                    "strict"
                } else {
                    "standard"
                }
                .into(),
            ),
            ("lenient".into(), self.lenient.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Args)]
pub struct MeasuresArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub measures: MeasureArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub measures: MeasureArgs,
    /// |r| at or above which a measure is flagged.
    #[arg(long, default_value_t = 0.3)]
    pub threshold_r: f64,
    /// Use Spearman instead of Pearson correlation.
    #[arg(long)]
    pub spearman: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub measures: MeasureArgs,
    /// Permutation iterations.
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = SidedArg::TwoSided)]
    pub sided: SidedArg,
    /// Treat measure values as certainties when partitioning.
    #[arg(long)]
    pub invert: bool,
    /// Pool all subjects into one correlation row.
    #[arg(long)]
    pub no_subjects: bool,
    /// Restrict analysis to these measures (names as in report columns).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Write every null draw instead of a binned histogram.
    #[arg(long)]
    pub raw_null: bool,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open input {}: {e}", path.display())))
}

fn formats(cfg: &RunConfig) -> Vec<ReportFormat> {
    let mut out = Vec::new();
    for f in &cfg.format {
        let f = match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        };
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

fn emit_all<R: Emit + ?Sized>(
    report: &R,
    header: &OutputHeader,
    out: &Path,
    cfg: &RunConfig,
    histogram: HistogramMode,
) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for format in formats(cfg) {
        files.extend(emit_report(report, header, out, format, histogram)?);
    }
    Ok(files)
}

fn load_records(input: &Path, lenient: bool) -> Result<Vec<QuestionRecord>, CliError> {
    let file = parse_dump(open_input(input)?, lenient)?;
    if let Some(conv) = file
        .header
        .as_ref()
        .and_then(|h| h.label_token_convention.as_ref())
    {
        log::info!("label token convention: {conv}");
    }
    Ok(file.question_records()?)
}

fn compute_all(
    records: &[QuestionRecord],
    mcfg: &MeasureConfig,
) -> Result<Vec<MeasureVector>, CliError> {
    mcfg.validate()?;
    let results: Vec<_> = records
        .par_iter()
        .map(|r| compute_measures_partial(r, mcfg))
        .collect();
    let mut vectors = Vec::with_capacity(results.len());
    for (record, result) in records.iter().zip(results) {
        let (vector, errors) = result?;
        for e in errors {
            log::warn!("question {}: {e}", record.question_id);
        }
        vectors.push(vector);
    }
    Ok(vectors)
}

fn base_echo(input: &Path, cfg: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("input".into(), input.display().to_string()),
        (
            "format".into(),
            cfg.format
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
    ]
}

/// Executes one command. The caller maps errors to exit codes with [`CliError::exit_code`].
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match cfg.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match &cfg.command {
        Command::Measures(args) => {
            let records = load_records(&args.input, args.measures.lenient)?;
            let mcfg = args.measures.config();
            let vectors = compute_all(&records, &mcfg)?;
            let mut echo = base_echo(&args.input, cfg);
            echo.extend(args.measures.echo());
            let header = OutputHeader::new("measures", cfg.seed, echo);
            let ids = mcfg.measure_ids();
            let table = MeasureTable {
                measures: &ids,
                vectors: &vectors,
            };
            emit_all(&table, &header, &args.out, cfg, HistogramMode::Raw)
        }
        Command::Align(args) => {
            let records = load_records(&args.input, args.measures.lenient)?;
            let mcfg = args.measures.config();
            let vectors = compute_all(&records, &mcfg)?;
            let acfg = AlignConfig {
                measures: mcfg.measure_ids(),
                significance_threshold: args.threshold_r,
                correlation: if args.spearman {
                    CorrelationKind::Spearman
                } else {
                    CorrelationKind::Pearson
                },
            };
            let report = alignment_report(&records, &vectors, &acfg)?;
            let mut echo = base_echo(&args.input, cfg);
            echo.extend(args.measures.echo());
            echo.push(("threshold_r".into(), args.threshold_r.to_string()));
            echo.push((
                "correlation".into(),
                if args.spearman { "spearman" } else { "pearson" }.into(),
            ));
            let header = OutputHeader::new("align", cfg.seed, echo);
            emit_all(&report, &header, &args.out, cfg, HistogramMode::Raw)
        }
        Command::Calibrate(args) => {
            if args.iters == 0 {
                return Err(CliError::Usage("--iters must be positive".into()));
            }
            let records = load_records(&args.input, args.measures.lenient)?;
            let mcfg = args.measures.config();
            let vectors = compute_all(&records, &mcfg)?;
            let measures: Vec<MeasureId> = if args.only.is_empty() {
                mcfg.measure_ids()
            } else {
                args.only
                    .iter()
                    .map(|s| s.parse().map_err(CliError::Usage))
                    .collect::<Result<_, _>>()?
            };
            let sided = match args.sided {
                SidedArg::TwoSided => Sided::TwoSided,
                SidedArg::Greater => Sided::OneSidedGreater,
                SidedArg::Less => Sided::OneSidedLess,
            };
            let ccfg = CalibConfig {
                iters: args.iters,
                sided,
                invert: args.invert,
            };
            let report = calibration_report(
                &records,
                &vectors,
                &measures,
                !args.no_subjects,
                &ccfg,
                &SeedStream::new(cfg.seed),
            )?;
            let mut echo = base_echo(&args.input, cfg);
            echo.extend(args.measures.echo());
            echo.extend([
                ("iters".to_string(), args.iters.to_string()),
                ("sided".to_string(), sided.as_str().to_string()),
                ("invert".to_string(), args.invert.to_string()),
                (
                    "group_by_subject".to_string(),
                    (!args.no_subjects).to_string(),
                ),
                (
                    "measures".to_string(),
                    measures
                        .iter()
                        .map(|m| m.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                ),
            ]);
            let histogram = if args.raw_null {
                HistogramMode::Raw
            } else {
                HistogramMode::Binned(args.bins.max(1))
            };
            echo.push((
                "null_output".into(),
                match histogram {
                    HistogramMode::Raw => "raw".to_string(),
                    HistogramMode::Binned(b) => format!("binned:{b}"),
                },
            ));
            let header = OutputHeader::new("calibrate", cfg.seed, echo);
            emit_all(&report, &header, &args.out, cfg, histogram)
        }
        Command::CleanSurvey(args) => {
            let raw = read_survey_csv(open_input(&args.input)?)?;
            let (questions, stats) = clean_survey(&raw);
            if !stats.is_consistent() {
                return Err(CliError::Validation(format!(
                    "inconsistent cleaning tallies: {stats:?}"
                )));
            }
            let header = OutputHeader::new("clean-survey", cfg.seed, base_echo(&args.input, cfg));
            fs::create_dir_all(&args.out)?;
            let survey_path = args.out.join("survey_clean.csv");
            write_survey_csv(File::create(&survey_path)?, &header.lines(), &questions)?;
            let stats_path = args.out.join("cleaning_stats.json");
            let doc = serde_json::json!({ "header": header.to_json(), "cleaning": stats });
            fs::write(
                &stats_path,
                serde_json::to_string_pretty(&doc).map_err(IngestError::from)? + "\n",
            )?;
            Ok(vec![survey_path, stats_path])
        }
        Command::Selfcheck => {
            let checks = selfcheck::run_all();
            let mut failed = 0;
            for c in &checks {
                if c.passed {
                    println!("PASS {}", c.name);
                } else {
                    failed += 1;
                    println!("FAIL {}: {}", c.name, c.detail);
                }
            }
            if failed > 0 {
                return Err(CliError::Validation(format!(
                    "{failed} self-check(s) failed"
                )));
            }
            Ok(Vec::new())
        }
    }
}
