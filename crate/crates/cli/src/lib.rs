//! Command-line front end. [`run`] takes argv and output sinks so the whole
//! tool can be driven in-process from tests.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use emocarrier_core::agreement::{Aggregation, MatchKind, Position, PrecisionConvention, Unit};
use emocarrier_core::analysis::{content_tokens, Distance};
use emocarrier_core::annotation::{validate_annotation_set, AnnotationSet, AnnotationStore, StoreError, Violation};
use emocarrier_core::corpus::{attach_token_layers, load_corpus, Corpus, CorpusError, LexiconPaths, Polarity};
use emocarrier_core::query::{
    render_sentiment_query, render_stats_query, AgreementQuery, FillerQuery, QueryError, StrategyParams,
};
use emocarrier_core::report::{record, OutputFormat};

pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "emocarrier", version, about = "Emotion-carrier annotation corpus tools")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Narratives file (JSON lines).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Lemma/POS sidecar (JSON lines).
    #[arg(long, global = true)]
    pub sidecar: Option<PathBuf>,
    /// Lexicon by role (fillers, sentiment, lemmas, content-pos). Repeatable.
    #[arg(long = "lexicons", value_name = "KIND=PATH", global = true)]
    pub lexicons: Vec<String>,
    /// Annotation file or store log.
    #[arg(long, visible_alias = "store", global = true)]
    pub annotations: Option<PathBuf>,
    /// `table`, `tsv` or `records` (JSON lines).
    #[arg(long, default_value = "table", global = true)]
    pub format: OutputFormat,
    /// Seed for randomized commands.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Debug, Args, Default)]
pub struct StrategyArgs {
    /// `exact` or `partial` [default: partial].
    #[arg(long = "match")]
    pub match_kind: Option<MatchKind>,
    /// `aware` or `agnostic` [default: aware, agnostic for overlaps].
    #[arg(long)]
    pub position: Option<Position>,
    /// `token` or `lemma` [default: token].
    #[arg(long)]
    pub unit: Option<Unit>,
    /// Leave punctuation tokens out of every comparison.
    #[arg(long)]
    pub ignore_punct: bool,
    /// `hypothesis_covered` or `paper_literal` [default: hypothesis_covered].
    #[arg(long)]
    pub convention: Option<PrecisionConvention>,
    /// Let one span's coverage exceed 1 when several spans overlap it.
    #[arg(long)]
    pub uncapped: bool,
}

impl StrategyArgs {
    fn params(&self) -> StrategyParams {
        StrategyParams {
            match_kind: self.match_kind,
            position: self.position,
            unit: self.unit,
            ignore_punct: self.ignore_punct.then_some(true),
            convention: self.convention,
            cap: self.uncapped.then_some(false),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and tokenize the corpus, then summarize each narrative.
    Ingest,
    /// Check annotations against the guideline rules.
    Validate,
    /// Pairwise inter-annotator agreement.
    Agreement {
        #[command(flatten)]
        strategy: StrategyArgs,
        /// `micro` or `macro` [default: micro].
        #[arg(long)]
        aggregation: Option<Aggregation>,
        /// Report the four lattice configurations (a)-(d).
        #[arg(long)]
        all_strategies: bool,
    },
    /// Span counts, lengths and POS distribution per annotator.
    Stats,
    /// Fraction of each annotator's spans that carry sentiment.
    Sentiment,
    /// What overlapping spans of different annotators share.
    Overlaps {
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Nearest-filler positions for carriers and a random baseline.
    Fillers {
        /// Tokens searched on each side of a span [default: 5].
        #[arg(long)]
        window: Option<usize>,
        /// `all_tokens` or `skip_punct` [default: all_tokens].
        #[arg(long)]
        distance: Option<Distance>,
    },
    /// Write the current annotation sets as a clean annotations file.
    Export {
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        Failure::Data(format!("{}: {e}", e.name()))
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

/// Parse argv and execute. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = if code == 0 { e.to_string() } else { e.render().to_string() };
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { 0 } else { EXIT_USAGE };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn load(shared: &Shared) -> Result<Corpus, Failure> {
    let path = shared.corpus.as_ref().ok_or_else(|| Failure::Usage("--corpus is required".into()))?;
    let mut lexicons = LexiconPaths::default();
    for spec in &shared.lexicons {
        lexicons.set(spec).map_err(|e| Failure::Usage(format!("--lexicons: {e}")))?;
    }
    let mut corpus = load_corpus(path, &lexicons)?;
    if let Some(sidecar) = &shared.sidecar {
        corpus = attach_token_layers(corpus, sidecar)?;
    }
    Ok(corpus)
}

fn annotations(shared: &Shared, err: &mut dyn Write) -> Result<Vec<AnnotationSet>, Failure> {
    let path = shared.annotations.as_ref().ok_or_else(|| Failure::Usage("--annotations is required".into()))?;
    let (store, report) = AnnotationStore::open_read_only(path)?;
    for s in &report.skipped {
        writeln!(
            err,
            "warning: {}:{}{}: {}",
            path.display(),
            s.line,
            if s.torn { " (torn final record)" } else { "" },
            s.reason
        )?;
    }
    Ok(store.snapshot())
}

#[derive(Serialize)]
struct IngestRow<'a> {
    id: &'a str,
    speaker_id: &'a str,
    prompt_polarity: Polarity,
    token_count: usize,
    punct_tokens: usize,
    fillers: usize,
    content_tokens: usize,
}

#[derive(Serialize)]
struct ValidationRow<'a> {
    annotator_id: &'a str,
    narrative_id: &'a str,
    severity: &'static str,
    #[serde(flatten)]
    violation: &'a Violation,
}

fn table(rows: &[Vec<String>], format: OutputFormat) -> String {
    let sep = if format == OutputFormat::Tsv { "\t" } else { "  " };
    if format == OutputFormat::Tsv {
        return rows.iter().map(|r| r.join(sep) + "\n").collect();
    }
    let widths: Vec<usize> = (0..rows.first().map_or(0, Vec::len))
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    rows.iter()
        .map(|r| {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            line.join(sep).trim_end().to_string() + "\n"
        })
        .collect()
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let shared = &cli.shared;
    let format = shared.format;
    let text = match &cli.command {
        Command::Ingest => {
            let corpus = load(shared)?;
            let rows: Vec<IngestRow<'_>> = corpus
                .narratives
                .values()
                .map(|n| IngestRow {
                    id: &n.id,
                    speaker_id: &n.speaker_id,
                    prompt_polarity: n.prompt_polarity,
                    token_count: n.token_count(),
                    punct_tokens: n.tokens.iter().filter(|t| t.is_punct).count(),
                    fillers: n.tokens.iter().filter(|t| t.is_filler).count(),
                    content_tokens: content_tokens(&corpus, n).len(),
                })
                .collect();
            if format == OutputFormat::Records {
                rows.iter().map(|r| record(r) + "\n").collect()
            } else {
                let mut t = vec![["narrative", "speaker", "polarity", "tokens", "punct", "fillers", "content"]
                    .map(String::from)
                    .to_vec()];
                t.extend(rows.iter().map(|r| {
                    vec![
                        r.id.to_string(),
                        r.speaker_id.to_string(),
                        r.prompt_polarity.as_str().to_string(),
                        r.token_count.to_string(),
                        r.punct_tokens.to_string(),
                        r.fillers.to_string(),
                        r.content_tokens.to_string(),
                    ]
                }));
                table(&t, format)
            }
        }
        Command::Validate => {
            let corpus = load(shared)?;
            let sets = annotations(shared, err)?;
            let mut rows = Vec::new();
            let mut checked = Vec::new();
            for set in &sets {
                let Some(n) = corpus.narrative(&set.narrative_id) else {
                    return Err(Failure::Data(format!(
                        "{}: unknown narrative {:?}",
                        set.annotator_id, set.narrative_id
                    )));
                };
                let v = validate_annotation_set(set, n).map_err(|e| Failure::Data(e.to_string()))?;
                checked.push((set, v));
            }
            let mut errors = 0;
            for (set, v) in &checked {
                errors += v.errors.len();
                for (severity, list) in [("error", &v.errors), ("warning", &v.warnings)] {
                    for violation in list.iter() {
                        rows.push(ValidationRow {
                            annotator_id: &set.annotator_id,
                            narrative_id: &set.narrative_id,
                            severity,
                            violation,
                        });
                    }
                }
            }
            let text: String = if format == OutputFormat::Records {
                rows.iter().map(|r| record(r) + "\n").collect()
            } else {
                let mut t = vec![["annotator", "narrative", "severity", "violation"].map(String::from).to_vec()];
                t.extend(rows.iter().map(|r| {
                    vec![
                        r.annotator_id.to_string(),
                        r.narrative_id.to_string(),
                        r.severity.to_string(),
                        r.violation.to_string(),
                    ]
                }));
                table(&t, format)
            };
            out.write_all(text.as_bytes())?;
            writeln!(err, "{} sets checked, {errors} errors, {} warnings", checked.len(), rows.len() - errors)?;
            if errors > 0 {
                return Err(Failure::Data(format!("{errors} invariant violations")));
            }
            return Ok(());
        }
        Command::Agreement { strategy, aggregation, all_strategies } => {
            let p = strategy.params();
            if *all_strategies && (p.match_kind.is_some() || p.position.is_some() || p.unit.is_some()) {
                return Err(Failure::Usage("--all-strategies fixes --match, --position and --unit".into()));
            }
            let corpus = load(shared)?;
            let sets = annotations(shared, err)?;
            let q = AgreementQuery {
                match_kind: p.match_kind,
                position: p.position,
                unit: p.unit,
                ignore_punct: p.ignore_punct,
                convention: p.convention,
                cap: p.cap,
                aggregation: *aggregation,
                all_strategies: *all_strategies,
            };
            q.render(&corpus, &sets, format)?
        }
        Command::Stats => {
            let corpus = load(shared)?;
            render_stats_query(&corpus, &annotations(shared, err)?, format)?
        }
        Command::Sentiment => {
            let corpus = load(shared)?;
            render_sentiment_query(&corpus, &annotations(shared, err)?, format)?
        }
        Command::Overlaps { strategy } => {
            let corpus = load(shared)?;
            strategy.params().render_overlaps(&corpus, &annotations(shared, err)?, format)?
        }
        Command::Fillers { window, distance } => {
            let corpus = load(shared)?;
            let q = FillerQuery { window: *window, distance: *distance, seed: Some(shared.seed) };
            q.render(&corpus, &annotations(shared, err)?, shared.seed, format)?
        }
        Command::Export { out: path } => {
            let sets = annotations(shared, err)?;
            let store = AnnotationStore::from_sets(sets);
            match path {
                Some(p) => {
                    let mut f = io::BufWriter::new(File::create(p)?);
                    store.export(&mut f)?;
                    f.flush()?;
                }
                None => store.export(&mut *out)?,
            }
            return Ok(());
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}
