//! Pairwise inter-annotator agreement.
//!
//! Exact matching scores positive agreement `2·TP / (2·TP + FP + FN)`.
//! Partial matching scores soft precision/recall from span coverage:
//!
//! ```text
//! c(s, s')  = |s ∩ s'| / |s|
//! C(S, S')  = Σ_{s ∈ S} min(1, Σ_{s' ∈ S'} c(s, s'))      (cap optional)
//! P         = C(S_H, S_R) / |S_H|        R = C(S_R, S_H) / |S_R|
//! ```
//!
//! `PrecisionConvention::PaperLiteral` swaps the coverage arguments so that
//! `P = C(S_R, S_H) / |S_H|` and `R = C(S_H, S_R) / |S_R|`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{check_span, AnnotationSet, Span, SpanOutOfBounds};
use crate::corpus::{Corpus, Narrative};
use crate::exec::Execution;

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("agreement needs at least two annotators sharing a narrative")]
    InsufficientAnnotators,
    #[error("annotations reference unknown narrative {0:?}")]
    UnknownNarrative(String),
    #[error(transparent)]
    SpanOutOfBounds(#[from] SpanOutOfBounds),
}

macro_rules! str_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.replace('-', "_").as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        concat!("invalid ", stringify!($name), " {:?} (expected one of: {})"),
                        s,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

str_enum!(MatchKind { Exact => "exact", Partial => "partial" });
str_enum!(Position { Aware => "aware", Agnostic => "agnostic" });
str_enum!(Unit { Token => "token", Lemma => "lemma" });
str_enum!(PrecisionConvention {
    HypothesisCovered => "hypothesis_covered",
    PaperLiteral => "paper_literal",
});
str_enum!(Aggregation { Micro => "micro", Macro => "macro" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchStrategy {
    pub match_kind: MatchKind,
    pub position: Position,
    pub unit: Unit,
    pub ignore_punct: bool,
    pub precision_convention: PrecisionConvention,
    /// Cap each source span's summed coverage at 1.
    pub cap_coverage: bool,
}

impl Default for MatchStrategy {
    fn default() -> Self {
        MatchStrategy {
            match_kind: MatchKind::Partial,
            position: Position::Aware,
            unit: Unit::Token,
            ignore_punct: false,
            precision_convention: PrecisionConvention::HypothesisCovered,
            cap_coverage: true,
        }
    }
}

impl MatchStrategy {
    pub fn new(match_kind: MatchKind, position: Position, unit: Unit) -> Self {
        MatchStrategy { match_kind, position, unit, ..Self::default() }
    }

    /// The four configurations of the classic strategy lattice, loosest last.
    pub fn lattice() -> [(char, MatchStrategy); 4] {
        use MatchKind::*;
        use Position::*;
        use Unit::*;
        [
            ('a', Self::new(Exact, Agnostic, Token)),
            ('b', Self::new(Partial, Aware, Token)),
            ('c', Self::new(Partial, Agnostic, Token)),
            ('d', Self::new(Partial, Agnostic, Lemma)),
        ]
    }

    pub fn describe(&self) -> String {
        let kind = match self.match_kind {
            MatchKind::Exact => "Exact match",
            MatchKind::Partial => "Partial match",
        };
        let pos = match self.position {
            Position::Aware => "with position",
            Position::Agnostic => "position agnostic",
        };
        let mut s = format!("{kind}, {pos}, {} level", self.unit);
        if self.ignore_punct {
            s.push_str(", ignoring punctuation");
        }
        if self.precision_convention == PrecisionConvention::PaperLiteral {
            s.push_str(", literal precision/recall");
        }
        if !self.cap_coverage {
            s.push_str(", uncapped coverage");
        }
        s
    }

    fn unit_of<'a>(&self, token: &'a crate::tokenize::Token) -> &'a str {
        match self.unit {
            Unit::Token => &token.lower,
            Unit::Lemma => token.lemma_key(),
        }
    }

    /// `(index, unit string)` for each counted token of `span`.
    fn units<'a>(&self, narrative: &'a Narrative, span: Span) -> Vec<(usize, &'a str)> {
        narrative.tokens[span.indices()]
            .iter()
            .filter(|t| !(self.ignore_punct && t.is_punct))
            .map(|t| (t.index, self.unit_of(t)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp: Option<usize>,
    #[serde(rename = "fn", skip_serializing_if = "Option::is_none")]
    pub fn_: Option<usize>,
}

pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Raw soft-match quantities for one (reference, hypothesis) comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SoftCounts {
    /// Coverage quantity normalized by the hypothesis size.
    pub precision_mass: f64,
    /// Coverage quantity normalized by the reference size.
    pub recall_mass: f64,
    pub hypothesis_spans: usize,
    pub reference_spans: usize,
}

impl SoftCounts {
    fn add(&mut self, o: &SoftCounts) {
        self.precision_mass += o.precision_mass;
        self.recall_mass += o.recall_mass;
        self.hypothesis_spans += o.hypothesis_spans;
        self.reference_spans += o.reference_spans;
    }

    pub fn score(&self) -> PairScore {
        let (precision, recall) = match (self.hypothesis_spans, self.reference_spans) {
            (0, 0) => (1.0, 1.0),
            (h, r) => (ratio(self.precision_mass, h), ratio(self.recall_mass, r)),
        };
        PairScore { precision, recall, f1: harmonic_f1(precision, recall), tp: None, fp: None, fn_: None }
    }
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

/// Matched-span counts for one exact comparison of set A (reference) and B.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactCounts {
    pub tp: usize,
    pub a_spans: usize,
    pub b_spans: usize,
}

impl ExactCounts {
    fn add(&mut self, o: &ExactCounts) {
        self.tp += o.tp;
        self.a_spans += o.a_spans;
        self.b_spans += o.b_spans;
    }

    pub fn score(&self) -> PairScore {
        let fp = self.b_spans - self.tp;
        let fn_ = self.a_spans - self.tp;
        let (precision, recall, f1) = if self.a_spans + self.b_spans == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let tp = self.tp as f64;
            (ratio(tp, self.b_spans), ratio(tp, self.a_spans), 2.0 * tp / (2.0 * tp + fp as f64 + fn_ as f64))
        };
        PairScore { precision, recall, f1, tp: Some(self.tp), fp: Some(fp), fn_: Some(fn_) }
    }
}

/// Coverage of `s` by `s_prime` under the strategy's position/unit/punctuation
/// settings (the match kind is not consulted).
pub fn span_coverage(
    s: Span,
    s_prime: Span,
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<f64, SpanOutOfBounds> {
    check_span(narrative, s)?;
    check_span(narrative, s_prime)?;
    Ok(coverage_unchecked(s, s_prime, narrative, strategy))
}

fn coverage_unchecked(s: Span, s_prime: Span, narrative: &Narrative, strategy: &MatchStrategy) -> f64 {
    let p = prepare(&[s, s_prime], narrative, strategy);
    prepared_coverage(&p[0], &p[1], strategy.position)
}

/// Units in common between `a` and `b`, counted with multiplicity, in `a`'s order.
fn multiset_intersection<'a>(a: &[(usize, &'a str)], b: &[(usize, &str)]) -> Vec<&'a str> {
    let mut avail: HashMap<&str, usize> = HashMap::new();
    for (_, u) in b {
        *avail.entry(u).or_default() += 1;
    }
    let mut out = Vec::new();
    for (_, u) in a {
        if let Some(n) = avail.get_mut(u) {
            if *n > 0 {
                *n -= 1;
                out.push(*u);
            }
        }
    }
    out
}

/// Unit strings shared by two spans (multiset intersection, or the tokens at
/// shared indices when position-aware), case-folded and sorted.
pub fn common_units(s: Span, s_prime: Span, narrative: &Narrative, strategy: &MatchStrategy) -> Vec<String> {
    let a = strategy.units(narrative, s);
    let b = strategy.units(narrative, s_prime);
    let mut out: Vec<String> = match strategy.position {
        Position::Aware => a.iter().filter(|(i, _)| s_prime.contains(*i)).map(|(_, u)| u.to_string()).collect(),
        Position::Agnostic => multiset_intersection(&a, &b).into_iter().map(str::to_string).collect(),
    };
    out.sort();
    out
}

fn check_all(narrative: &Narrative, spans: &[Span]) -> Result<(), SpanOutOfBounds> {
    spans.iter().try_for_each(|s| check_span(narrative, *s))
}

/// Counted units of one span, prepared once per comparison.
struct Prepared<'a> {
    span: Span,
    units: Vec<(usize, &'a str)>,
    /// Unit strings sorted, for position-agnostic comparison.
    sorted: Vec<&'a str>,
}

fn prepare<'a>(spans: &[Span], narrative: &'a Narrative, strategy: &MatchStrategy) -> Vec<Prepared<'a>> {
    spans
        .iter()
        .map(|&span| {
            let units = strategy.units(narrative, span);
            let mut sorted = Vec::new();
            if strategy.position == Position::Agnostic {
                sorted = units.iter().map(|(_, u)| *u).collect();
                sorted.sort_unstable();
            }
            Prepared { span, units, sorted }
        })
        .collect()
}

fn sorted_intersection_len(a: &[&str], b: &[&str]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn prepared_coverage(s: &Prepared<'_>, t: &Prepared<'_>, position: Position) -> f64 {
    if s.units.is_empty() {
        return 0.0;
    }
    let common = match position {
        Position::Aware => s.units.iter().filter(|(i, _)| t.span.contains(*i)).count(),
        Position::Agnostic => sorted_intersection_len(&s.sorted, &t.sorted),
    };
    common as f64 / s.units.len() as f64
}

fn prepared_set_coverage(source: &[Prepared<'_>], target: &[Prepared<'_>], strategy: &MatchStrategy) -> f64 {
    source
        .iter()
        .map(|s| {
            let inner: f64 = target.iter().map(|t| prepared_coverage(s, t, strategy.position)).sum();
            if strategy.cap_coverage {
                inner.min(1.0)
            } else {
                inner
            }
        })
        .sum()
}

fn set_coverage_spans(source: &[Span], target: &[Span], narrative: &Narrative, strategy: &MatchStrategy) -> f64 {
    prepared_set_coverage(&prepare(source, narrative, strategy), &prepare(target, narrative, strategy), strategy)
}

/// Span-set coverage `C(S, S')`.
pub fn set_coverage(
    s: &AnnotationSet,
    s_prime: &AnnotationSet,
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<f64, SpanOutOfBounds> {
    check_all(narrative, &s.spans)?;
    check_all(narrative, &s_prime.spans)?;
    Ok(set_coverage_spans(&s.spans, &s_prime.spans, narrative, strategy))
}

pub fn soft_counts(
    reference: &[Span],
    hypothesis: &[Span],
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<SoftCounts, SpanOutOfBounds> {
    check_all(narrative, reference)?;
    check_all(narrative, hypothesis)?;
    let r = prepare(reference, narrative, strategy);
    let h = prepare(hypothesis, narrative, strategy);
    let c_hr = prepared_set_coverage(&h, &r, strategy);
    let c_rh = prepared_set_coverage(&r, &h, strategy);
    let (precision_mass, recall_mass) = match strategy.precision_convention {
        PrecisionConvention::HypothesisCovered => (c_hr, c_rh),
        PrecisionConvention::PaperLiteral => (c_rh, c_hr),
    };
    Ok(SoftCounts { precision_mass, recall_mass, hypothesis_spans: hypothesis.len(), reference_spans: reference.len() })
}

/// Soft precision/recall/F1 of hypothesis `s_h` against reference `s_r`.
pub fn soft_pair_score(
    s_r: &AnnotationSet,
    s_h: &AnnotationSet,
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<PairScore, SpanOutOfBounds> {
    Ok(soft_counts(&s_r.spans, &s_h.spans, narrative, strategy)?.score())
}

/// Equality key for exact matching; `None` spans match nothing.
fn exact_key<'a>(span: Span, narrative: &'a Narrative, strategy: &MatchStrategy) -> Option<Vec<ExactUnit<'a>>> {
    if !strategy.ignore_punct && strategy.position == Position::Aware {
        return Some(vec![ExactUnit::Bounds(span.start, span.end)]);
    }
    let units = strategy.units(narrative, span);
    if units.is_empty() {
        return None;
    }
    Some(match strategy.position {
        Position::Aware => units.into_iter().map(|(i, _)| ExactUnit::Index(i)).collect(),
        Position::Agnostic => units.into_iter().map(|(_, u)| ExactUnit::Text(u)).collect(),
    })
}

#[derive(Debug, PartialEq, Eq, Hash)]
enum ExactUnit<'a> {
    Bounds(usize, usize),
    Index(usize),
    Text(&'a str),
}

pub fn exact_counts(
    a: &[Span],
    b: &[Span],
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<ExactCounts, SpanOutOfBounds> {
    check_all(narrative, a)?;
    check_all(narrative, b)?;
    // Matching is an equivalence relation, so a maximum one-to-one matching
    // pairs min(|A ∩ class|, |B ∩ class|) spans in each class.
    let mut classes: HashMap<Vec<ExactUnit<'_>>, (usize, usize)> = HashMap::new();
    for key in a.iter().filter_map(|&s| exact_key(s, narrative, strategy)) {
        classes.entry(key).or_default().0 += 1;
    }
    for key in b.iter().filter_map(|&s| exact_key(s, narrative, strategy)) {
        classes.entry(key).or_default().1 += 1;
    }
    let tp = classes.values().map(|&(x, y)| x.min(y)).sum();
    Ok(ExactCounts { tp, a_spans: a.len(), b_spans: b.len() })
}

/// Positive agreement between `s_a` (counted as reference) and `s_b`.
pub fn exact_pair_score(
    s_a: &AnnotationSet,
    s_b: &AnnotationSet,
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<PairScore, SpanOutOfBounds> {
    Ok(exact_counts(&s_a.spans, &s_b.spans, narrative, strategy)?.score())
}

/// Score a reference/hypothesis pair with whichever match kind the strategy names.
pub fn pair_score(
    reference: &AnnotationSet,
    hypothesis: &AnnotationSet,
    narrative: &Narrative,
    strategy: &MatchStrategy,
) -> Result<PairScore, SpanOutOfBounds> {
    match strategy.match_kind {
        MatchKind::Exact => exact_pair_score(reference, hypothesis, narrative, strategy),
        MatchKind::Partial => soft_pair_score(reference, hypothesis, narrative, strategy),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    /// Row annotator, scored as reference.
    pub a: String,
    /// Column annotator, scored as hypothesis.
    pub b: String,
    pub narratives: usize,
    #[serde(flatten)]
    pub score: PairScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub strategy: MatchStrategy,
    pub aggregation: Aggregation,
    pub annotator_ids: Vec<String>,
    /// Upper triangle in row-major order: (0,1), (0,2), …, (1,2), …
    pub pairs: Vec<PairEntry>,
    /// Mean F1 over pairs that share at least one narrative.
    pub mean_f1: f64,
}

impl AgreementReport {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairEntry> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

#[derive(Clone, Copy)]
enum Cell {
    Soft(SoftCounts),
    Exact(ExactCounts),
}

impl Cell {
    fn score(&self) -> PairScore {
        match self {
            Cell::Soft(c) => c.score(),
            Cell::Exact(c) => c.score(),
        }
    }
}

pub fn pairwise_report(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    strategy: &MatchStrategy,
    aggregation: Aggregation,
) -> Result<AgreementReport, AgreementError> {
    pairwise_report_with(corpus, sets, strategy, aggregation, Execution::default())
}

pub fn pairwise_report_with(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    strategy: &MatchStrategy,
    aggregation: Aggregation,
    exec: Execution,
) -> Result<AgreementReport, AgreementError> {
    let mut by_annotator: HashMap<&str, HashMap<&str, &AnnotationSet>> = HashMap::new();
    for set in sets {
        if corpus.narrative(&set.narrative_id).is_none() {
            return Err(AgreementError::UnknownNarrative(set.narrative_id.clone()));
        }
        by_annotator.entry(&set.annotator_id).or_default().insert(&set.narrative_id, set);
    }
    let mut annotator_ids: Vec<String> = by_annotator.keys().map(|s| s.to_string()).collect();
    annotator_ids.sort();

    struct Job<'a> {
        pair: usize,
        narrative: &'a Narrative,
        a: &'a AnnotationSet,
        b: &'a AnnotationSet,
    }
    let mut pair_ids = Vec::new();
    let mut jobs = Vec::new();
    for (i, a) in annotator_ids.iter().enumerate() {
        for b in &annotator_ids[i + 1..] {
            let pair = pair_ids.len();
            pair_ids.push((a.clone(), b.clone()));
            let sa = &by_annotator[a.as_str()];
            let sb = &by_annotator[b.as_str()];
            for (narrative_id, narrative) in &corpus.narratives {
                if let (Some(&x), Some(&y)) = (sa.get(narrative_id.as_str()), sb.get(narrative_id.as_str())) {
                    jobs.push(Job { pair, narrative, a: x, b: y });
                }
            }
        }
    }
    if jobs.is_empty() {
        return Err(AgreementError::InsufficientAnnotators);
    }

    let cells = exec.map(&jobs, |job| -> Result<Cell, SpanOutOfBounds> {
        Ok(match strategy.match_kind {
            MatchKind::Exact => Cell::Exact(exact_counts(&job.a.spans, &job.b.spans, job.narrative, strategy)?),
            MatchKind::Partial => Cell::Soft(soft_counts(&job.a.spans, &job.b.spans, job.narrative, strategy)?),
        })
    });

    let mut per_pair: Vec<Vec<Cell>> = vec![Vec::new(); pair_ids.len()];
    for (job, cell) in jobs.iter().zip(cells) {
        per_pair[job.pair].push(cell?);
    }

    let pairs: Vec<PairEntry> = pair_ids
        .into_iter()
        .zip(&per_pair)
        .map(|((a, b), cells)| PairEntry { a, b, narratives: cells.len(), score: aggregate(cells, aggregation) })
        .collect();
    let scored: Vec<f64> = pairs.iter().filter(|p| p.narratives > 0).map(|p| p.score.f1).collect();
    let mean_f1 = scored.iter().sum::<f64>() / scored.len() as f64;

    Ok(AgreementReport { strategy: *strategy, aggregation, annotator_ids, pairs, mean_f1 })
}

fn aggregate(cells: &[Cell], aggregation: Aggregation) -> PairScore {
    if cells.is_empty() {
        return PairScore { precision: 0.0, recall: 0.0, f1: 0.0, tp: None, fp: None, fn_: None };
    }
    match aggregation {
        Aggregation::Micro => match cells[0] {
            Cell::Soft(_) => {
                let mut total = SoftCounts::default();
                for c in cells {
                    if let Cell::Soft(s) = c {
                        total.add(s);
                    }
                }
                total.score()
            }
            Cell::Exact(_) => {
                let mut total = ExactCounts::default();
                for c in cells {
                    if let Cell::Exact(e) = c {
                        total.add(e);
                    }
                }
                total.score()
            }
        },
        Aggregation::Macro => {
            let scores: Vec<PairScore> = cells.iter().map(Cell::score).collect();
            let n = scores.len() as f64;
            let mean = |f: fn(&PairScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
            let sum = |f: fn(&PairScore) -> Option<usize>| scores.iter().map(f).sum::<Option<usize>>();
            PairScore {
                precision: mean(|s| s.precision),
                recall: mean(|s| s.recall),
                f1: mean(|s| s.f1),
                tp: sum(|s| s.tp),
                fp: sum(|s| s.fp),
                fn_: sum(|s| s.fn_),
            }
        }
    }
}
