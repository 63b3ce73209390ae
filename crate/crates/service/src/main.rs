use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use emocarrier_core::corpus::LexiconPaths;
use emocarrier_service::{serve, ServiceConfig};

/// Serve the annotation workbench API.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Narratives file (JSON lines).
    #[arg(long)]
    corpus: PathBuf,
    /// Lemma/POS sidecar (JSON lines).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Lexicon by role, e.g. `sentiment=lex.tsv`. Repeatable.
    #[arg(long = "lexicons", value_name = "KIND=PATH")]
    lexicons: Vec<String>,
    /// Annotation log; created if missing.
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    /// Default seed for the random filler baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Token table (`token<TAB>annotator_id`); enables write auth.
    #[arg(long)]
    auth: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let mut lexicons = LexiconPaths::default();
    for spec in &args.lexicons {
        if let Err(e) = lexicons.set(spec) {
            eprintln!("error: --lexicons: {e}");
            return ExitCode::from(2);
        }
    }
    let config = ServiceConfig {
        bind: args.bind,
        corpus: args.corpus,
        sidecar: args.sidecar,
        lexicons,
        store: args.store,
        seed: args.seed,
        auth: args.auth,
    };
    match serve(config).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
