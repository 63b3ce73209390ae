//! Ranked carrier spans, guideline validation and the revisioned store.

mod store;

pub use store::{AnnotationStore, RecoveryReport, SkippedRecord, StoreError, UpsertOutcome};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Narrative;

/// Fewer spans than this per narrative triggers a guideline warning.
pub const MIN_SPANS: usize = 3;

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn is_valid_for(&self, token_count: usize) -> bool {
        self.start < self.end && self.end <= token_count
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("span {span} out of bounds for narrative with {token_count} tokens")]
pub struct SpanOutOfBounds {
    pub span: Span,
    pub token_count: usize,
}

pub fn check_span(narrative: &Narrative, span: Span) -> Result<(), SpanOutOfBounds> {
    if span.is_valid_for(narrative.token_count()) {
        Ok(())
    } else {
        Err(SpanOutOfBounds { span, token_count: narrative.token_count() })
    }
}

/// Space-joined surfaces of the tokens under `span`.
pub fn span_surface(narrative: &Narrative, span: Span) -> Result<String, SpanOutOfBounds> {
    check_span(narrative, span)?;
    Ok(join_surfaces(narrative, span, |t| t.surface.as_str()))
}

fn join_surfaces<'a>(
    narrative: &'a Narrative,
    span: Span,
    f: impl Fn(&'a crate::tokenize::Token) -> &'a str,
) -> String {
    narrative.tokens[span.indices()].iter().map(f).collect::<Vec<_>>().join(" ")
}

/// One annotator's ranked spans for one narrative. Rank 1 is `spans[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub annotator_id: String,
    pub narrative_id: String,
    pub revision: u64,
    pub spans: Vec<Span>,
}

impl AnnotationSet {
    pub fn new(annotator_id: impl Into<String>, narrative_id: impl Into<String>, spans: Vec<Span>) -> Self {
        AnnotationSet { annotator_id: annotator_id.into(), narrative_id: narrative_id.into(), revision: 0, spans }
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// A guideline or invariant breach. Ranks are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    SpanOutOfBounds { rank: usize, span: Span, token_count: usize },
    OverlappingSpans { rank: usize, other_rank: usize },
    MinimumSpanCount { found: usize, required: usize },
    RepeatedSurface { rank: usize, other_rank: usize, surface: String },
    FirstOccurrence { rank: usize, surface: String, earlier_start: usize },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::SpanOutOfBounds { .. } => "SpanOutOfBounds",
            Violation::OverlappingSpans { .. } => "OverlappingSpans",
            Violation::MinimumSpanCount { .. } => "MinimumSpanCount",
            Violation::RepeatedSurface { .. } => "RepeatedSurface",
            Violation::FirstOccurrence { .. } => "FirstOccurrence",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SpanOutOfBounds { rank, span, token_count } => {
                write!(f, "SpanOutOfBounds: rank {rank} span {span} exceeds {token_count} tokens")
            }
            Violation::OverlappingSpans { rank, other_rank } => {
                write!(f, "OverlappingSpans: rank {other_rank} overlaps rank {rank}")
            }
            Violation::MinimumSpanCount { found, required } => {
                write!(f, "MinimumSpanCount: {found} spans, at least {required} expected")
            }
            Violation::RepeatedSurface { rank, other_rank, surface } => {
                write!(f, "RepeatedSurface: rank {other_rank} repeats rank {rank} ({surface:?})")
            }
            Violation::FirstOccurrence { rank, surface, earlier_start } => {
                write!(f, "FirstOccurrence: rank {rank} ({surface:?}) also occurs unannotated at token {earlier_start}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl Violations {
    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("annotation set is for narrative {set:?}, got narrative {narrative:?}")]
pub struct NarrativeMismatch {
    pub set: String,
    pub narrative: String,
}

/// Check a set against the narrative: invariant breaches are errors,
/// guideline breaches are warnings.
pub fn validate_annotation_set(set: &AnnotationSet, narrative: &Narrative) -> Result<Violations, NarrativeMismatch> {
    if set.narrative_id != narrative.id {
        return Err(NarrativeMismatch { set: set.narrative_id.clone(), narrative: narrative.id.clone() });
    }
    let n = narrative.token_count();
    let mut v = Violations::default();

    for (i, span) in set.spans.iter().enumerate() {
        if !span.is_valid_for(n) {
            v.errors.push(Violation::SpanOutOfBounds { rank: i + 1, span: *span, token_count: n });
        }
    }
    for (i, a) in set.spans.iter().enumerate() {
        for (j, b) in set.spans.iter().enumerate().skip(i + 1) {
            if a.overlaps(b) {
                v.errors.push(Violation::OverlappingSpans { rank: i + 1, other_rank: j + 1 });
            }
        }
    }

    if set.spans.len() < MIN_SPANS {
        v.warnings.push(Violation::MinimumSpanCount { found: set.spans.len(), required: MIN_SPANS });
    }

    // Surface checks only make sense for in-bounds spans.
    let valid: Vec<(usize, Span)> =
        set.spans.iter().enumerate().filter(|(_, s)| s.is_valid_for(n)).map(|(i, s)| (i + 1, *s)).collect();
    let lowered: Vec<String> = valid.iter().map(|(_, s)| join_surfaces(narrative, *s, |t| t.lower.as_str())).collect();

    for (a, (rank_a, _)) in valid.iter().enumerate() {
        for (b, (rank_b, _)) in valid.iter().enumerate().skip(a + 1) {
            if lowered[a] == lowered[b] {
                v.warnings.push(Violation::RepeatedSurface {
                    rank: *rank_a,
                    other_rank: *rank_b,
                    surface: lowered[a].clone(),
                });
            }
        }
    }

    for (k, (rank, span)) in valid.iter().enumerate() {
        let target = &narrative.tokens[span.indices()];
        let len = span.len();
        let earlier = (0..span.start).find(|&p| {
            p + len <= n
                && narrative.tokens[p..p + len].iter().zip(target).all(|(x, y)| x.lower == y.lower)
                && !set.spans.iter().any(|s| s.overlaps(&Span::new(p, p + len)))
        });
        if let Some(p) = earlier {
            v.warnings.push(Violation::FirstOccurrence { rank: *rank, surface: lowered[k].clone(), earlier_start: p });
        }
    }
    Ok(v)
}
