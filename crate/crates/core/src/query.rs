//! Report requests shared by the command line and the HTTP service.
//!
//! Both front ends deserialize or build these, run them against the same
//! corpus and snapshot, and render with [`crate::report`], so identical
//! requests give identical bytes.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{
    pairwise_report, Aggregation, AgreementError, AgreementReport, MatchKind, MatchStrategy, Position,
    PrecisionConvention, Unit,
};
use crate::analysis::{
    annotation_stats, filler_comparison, overlap_histogram, sentiment_fraction, AnalysisError, Distance,
    DEFAULT_FILLER_WINDOW,
};
use crate::annotation::AnnotationSet;
use crate::corpus::Corpus;
use crate::report::{render_agreement, render_fillers, render_overlaps, render_sentiment, render_stats, OutputFormat};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("overlap histograms need a partial match strategy")]
    ExactOverlap,
    #[error("filler window must be positive")]
    ZeroWindow,
}

impl QueryError {
    /// Stable name of the underlying error variant.
    pub fn name(&self) -> &'static str {
        match self {
            QueryError::Agreement(AgreementError::InsufficientAnnotators) => "InsufficientAnnotators",
            QueryError::Agreement(AgreementError::UnknownNarrative(_)) => "UnknownNarrative",
            QueryError::Agreement(AgreementError::SpanOutOfBounds(_)) => "SpanOutOfBounds",
            QueryError::Analysis(AnalysisError::EmptyStore) => "EmptyStore",
            QueryError::Analysis(AnalysisError::MissingLexicon) => "MissingLexicon",
            QueryError::Analysis(AnalysisError::InsufficientContentTokens { .. }) => "InsufficientContentTokens",
            QueryError::Analysis(AnalysisError::UnknownNarrative(_)) => "UnknownNarrative",
            QueryError::Analysis(AnalysisError::SpanOutOfBounds(_)) => "SpanOutOfBounds",
            QueryError::ExactOverlap => "ExactOverlap",
            QueryError::ZeroWindow => "ZeroWindow",
        }
    }
}

/// Strategy switches; unset fields take the engine defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    #[serde(rename = "match")]
    pub match_kind: Option<MatchKind>,
    pub position: Option<Position>,
    pub unit: Option<Unit>,
    pub ignore_punct: Option<bool>,
    pub convention: Option<PrecisionConvention>,
    pub cap: Option<bool>,
}

impl StrategyParams {
    pub fn resolve(&self, base: MatchStrategy) -> MatchStrategy {
        MatchStrategy {
            match_kind: self.match_kind.unwrap_or(base.match_kind),
            position: self.position.unwrap_or(base.position),
            unit: self.unit.unwrap_or(base.unit),
            ignore_punct: self.ignore_punct.unwrap_or(base.ignore_punct),
            precision_convention: self.convention.unwrap_or(base.precision_convention),
            cap_coverage: self.cap.unwrap_or(base.cap_coverage),
        }
    }

    /// Keep only the modifiers that apply on top of a lattice entry.
    fn modifiers(&self, base: MatchStrategy) -> MatchStrategy {
        StrategyParams { match_kind: None, position: None, unit: None, ..*self }.resolve(base)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgreementQuery {
    #[serde(rename = "match")]
    pub match_kind: Option<MatchKind>,
    pub position: Option<Position>,
    pub unit: Option<Unit>,
    pub ignore_punct: Option<bool>,
    pub convention: Option<PrecisionConvention>,
    pub cap: Option<bool>,
    pub aggregation: Option<Aggregation>,
    /// Run the four lattice configurations instead of one strategy.
    pub all_strategies: bool,
}

impl AgreementQuery {
    pub fn strategy(&self) -> StrategyParams {
        StrategyParams {
            match_kind: self.match_kind,
            position: self.position,
            unit: self.unit,
            ignore_punct: self.ignore_punct,
            convention: self.convention,
            cap: self.cap,
        }
    }

    pub fn run(
        &self,
        corpus: &Corpus,
        sets: &[AnnotationSet],
    ) -> Result<Vec<(Option<char>, AgreementReport)>, QueryError> {
        let aggregation = self.aggregation.unwrap_or(Aggregation::Micro);
        let params = self.strategy();
        let runs: Vec<(Option<char>, MatchStrategy)> = if self.all_strategies {
            MatchStrategy::lattice().into_iter().map(|(label, st)| (Some(label), params.modifiers(st))).collect()
        } else {
            vec![(None, params.resolve(MatchStrategy::default()))]
        };
        runs.into_iter().map(|(label, st)| Ok((label, pairwise_report(corpus, sets, &st, aggregation)?))).collect()
    }

    pub fn render(&self, corpus: &Corpus, sets: &[AnnotationSet], format: OutputFormat) -> Result<String, QueryError> {
        Ok(render_agreement(&self.run(corpus, sets)?, format))
    }
}

/// Overlap keys default to position-agnostic token matching, so repeated
/// mentions of a word in different places still share it.
pub fn default_overlap_strategy() -> MatchStrategy {
    MatchStrategy::new(MatchKind::Partial, Position::Agnostic, Unit::Token)
}

impl StrategyParams {
    /// Overlap histogram over the resolved strategy.
    pub fn render_overlaps(
        &self,
        corpus: &Corpus,
        sets: &[AnnotationSet],
        format: OutputFormat,
    ) -> Result<String, QueryError> {
        let st = self.resolve(default_overlap_strategy());
        if st.match_kind != MatchKind::Partial {
            return Err(QueryError::ExactOverlap);
        }
        Ok(render_overlaps(&overlap_histogram(corpus, sets, &st)?, format))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillerQuery {
    pub window: Option<usize>,
    pub distance: Option<Distance>,
    pub seed: Option<u64>,
}

impl FillerQuery {
    /// `default_seed` applies when the query names none.
    pub fn render(
        &self,
        corpus: &Corpus,
        sets: &[AnnotationSet],
        default_seed: u64,
        format: OutputFormat,
    ) -> Result<String, QueryError> {
        let window = self.window.unwrap_or(DEFAULT_FILLER_WINDOW);
        if window == 0 {
            return Err(QueryError::ZeroWindow);
        }
        let cmp = filler_comparison(
            corpus,
            sets,
            window,
            self.distance.unwrap_or_default(),
            self.seed.unwrap_or(default_seed),
        )?;
        Ok(render_fillers(&cmp, format))
    }
}

pub fn render_stats_query(corpus: &Corpus, sets: &[AnnotationSet], format: OutputFormat) -> Result<String, QueryError> {
    Ok(render_stats(&annotation_stats(corpus, sets)?, format))
}

pub fn render_sentiment_query(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    format: OutputFormat,
) -> Result<String, QueryError> {
    Ok(render_sentiment(&sentiment_fraction(corpus, sets)?, format))
}

impl FromStr for Distance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "all_tokens" => Ok(Distance::AllTokens),
            "skip_punct" => Ok(Distance::SkipPunct),
            _ => Err(format!("invalid distance {s:?} (expected all_tokens, skip_punct)")),
        }
    }
}
