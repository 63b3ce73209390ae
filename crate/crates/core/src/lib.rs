//! Emotion-carrier annotation workbench engine.
//!
//! Narratives are tokenized by a fixed rule tokenizer and carry optional
//! lemma/POS layers from a sidecar file. Annotators mark ranked, disjoint
//! token spans; the agreement module scores every annotator pair under exact
//! positive agreement or coverage-based soft F1, and the analysis module
//! produces span statistics, sentiment fractions, overlap counts and filler
//! proximity histograms.

pub mod agreement;
pub mod analysis;
pub mod annotation;
pub mod corpus;
pub mod exec;
pub mod query;
pub mod report;
pub mod tokenize;

pub use agreement::{
    pairwise_report, Aggregation, AgreementError, AgreementReport, MatchKind, MatchStrategy, PairScore, Position,
    PrecisionConvention, Unit,
};
pub use annotation::{AnnotationSet, AnnotationStore, Span};
pub use corpus::{attach_token_layers, load_corpus, Corpus, LexiconPaths, Narrative};
pub use exec::Execution;
pub use tokenize::{tokenize, Token};
