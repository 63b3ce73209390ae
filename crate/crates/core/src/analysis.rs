//! Descriptive analyses over a corpus and a snapshot of annotation sets.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{common_units, span_coverage, MatchStrategy};
use crate::annotation::{check_span, AnnotationSet, Span, SpanOutOfBounds};
use crate::corpus::{Corpus, Narrative};
use crate::exec::Execution;

pub const DEFAULT_FILLER_WINDOW: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no annotation sets to analyze")]
    EmptyStore,
    #[error("sentiment lexicon is empty or was not loaded")]
    MissingLexicon,
    #[error("narrative {narrative_id:?} has {available} content tokens, {requested} requested")]
    InsufficientContentTokens { narrative_id: String, requested: usize, available: usize },
    #[error("unknown narrative {0:?}")]
    UnknownNarrative(String),
    #[error(transparent)]
    SpanOutOfBounds(#[from] SpanOutOfBounds),
}

fn narrative<'a>(corpus: &'a Corpus, id: &str) -> Result<&'a Narrative, AnalysisError> {
    corpus.narrative(id).ok_or_else(|| AnalysisError::UnknownNarrative(id.to_string()))
}

fn by_annotator(sets: &[AnnotationSet]) -> BTreeMap<&str, Vec<&AnnotationSet>> {
    let mut map: BTreeMap<&str, Vec<&AnnotationSet>> = BTreeMap::new();
    for s in sets {
        map.entry(&s.annotator_id).or_default().push(s);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorStats {
    pub annotator_id: String,
    pub narratives: usize,
    pub total_spans: usize,
    pub spans_per_narrative: Summary,
    pub tokens_per_span: f64,
    pub tokens_per_span_no_punct: f64,
    /// Empty when no annotated token carries a POS tag.
    pub pos_distribution: BTreeMap<String, f64>,
}

pub fn annotation_stats(corpus: &Corpus, sets: &[AnnotationSet]) -> Result<Vec<AnnotatorStats>, AnalysisError> {
    if sets.is_empty() {
        return Err(AnalysisError::EmptyStore);
    }
    let mut out = Vec::new();
    for (annotator, own) in by_annotator(sets) {
        let counts: Vec<usize> = own.iter().map(|s| s.spans.len()).collect();
        let total_spans: usize = counts.iter().sum();
        let mut tokens = 0usize;
        let mut tokens_no_punct = 0usize;
        let mut pos: BTreeMap<String, usize> = BTreeMap::new();
        for set in &own {
            let n = narrative(corpus, &set.narrative_id)?;
            for &span in &set.spans {
                check_span(n, span)?;
                for t in &n.tokens[span.indices()] {
                    tokens += 1;
                    if !t.is_punct {
                        tokens_no_punct += 1;
                    }
                    if let Some(tag) = &t.pos {
                        *pos.entry(tag.clone()).or_default() += 1;
                    }
                }
            }
        }
        let tagged: usize = pos.values().sum();
        let per_span = |n: usize| if total_spans == 0 { 0.0 } else { n as f64 / total_spans as f64 };
        out.push(AnnotatorStats {
            annotator_id: annotator.to_string(),
            narratives: own.len(),
            total_spans,
            spans_per_narrative: Summary {
                min: *counts.iter().min().unwrap(),
                max: *counts.iter().max().unwrap(),
                mean: total_spans as f64 / counts.len() as f64,
            },
            tokens_per_span: per_span(tokens),
            tokens_per_span_no_punct: per_span(tokens_no_punct),
            pos_distribution: pos.into_iter().map(|(tag, c)| (tag, c as f64 / tagged as f64)).collect(),
        });
    }
    Ok(out)
}

/// Whether any non-punctuation token of the span has nonzero polarity.
pub fn carries_sentiment(corpus: &Corpus, narrative: &Narrative, span: Span) -> bool {
    narrative.tokens[span.indices()]
        .iter()
        .filter(|t| !t.is_punct)
        .any(|t| corpus.sentiment_lexicon.get(t.lemma_key()).is_some_and(|&p| p != 0.0))
}

/// Fraction of each annotator's spans that carry sentiment.
pub fn sentiment_fraction(corpus: &Corpus, sets: &[AnnotationSet]) -> Result<BTreeMap<String, f64>, AnalysisError> {
    if corpus.sentiment_lexicon.is_empty() {
        return Err(AnalysisError::MissingLexicon);
    }
    let mut out = BTreeMap::new();
    for (annotator, own) in by_annotator(sets) {
        let (mut polar, mut total) = (0usize, 0usize);
        for set in own {
            let n = narrative(corpus, &set.narrative_id)?;
            for &span in &set.spans {
                check_span(n, span)?;
                total += 1;
                if carries_sentiment(corpus, n, span) {
                    polar += 1;
                }
            }
        }
        let fraction = if total == 0 { 0.0 } else { polar as f64 / total as f64 };
        out.insert(annotator.to_string(), fraction);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCount {
    pub key: String,
    pub count: usize,
}

/// Corpus-wide counts of what overlapping spans of different annotators share.
pub fn overlap_histogram(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    strategy: &MatchStrategy,
) -> Result<Vec<OverlapCount>, AnalysisError> {
    overlap_histogram_with(corpus, sets, strategy, Execution::default())
}

pub fn overlap_histogram_with(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    strategy: &MatchStrategy,
    exec: Execution,
) -> Result<Vec<OverlapCount>, AnalysisError> {
    let grouped = by_annotator(sets);
    let annotators: Vec<&str> = grouped.keys().copied().collect();
    let lookup: HashMap<(&str, &str), &AnnotationSet> =
        sets.iter().map(|s| ((s.annotator_id.as_str(), s.narrative_id.as_str()), s)).collect();

    let mut jobs = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            for set_a in &grouped[a] {
                if let Some(set_b) = lookup.get(&(*b, set_a.narrative_id.as_str())) {
                    jobs.push((*set_a, *set_b));
                }
            }
        }
    }

    let keys = exec.map(&jobs, |(a, b)| -> Result<Vec<String>, AnalysisError> {
        let n = narrative(corpus, &a.narrative_id)?;
        let mut keys = Vec::new();
        for &s in &a.spans {
            for &t in &b.spans {
                if span_coverage(s, t, n, strategy)? > 0.0 {
                    keys.push(common_units(s, t, n, strategy).join(" "));
                }
            }
        }
        Ok(keys)
    });

    let mut counts: HashMap<String, usize> = HashMap::new();
    for k in keys {
        for key in k? {
            *counts.entry(key).or_default() += 1;
        }
    }
    let mut out: Vec<OverlapCount> = counts.into_iter().map(|(key, count)| OverlapCount { key, count }).collect();
    out.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.key.cmp(&y.key)));
    Ok(out)
}

/// How token distance between a filler and a span is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    AllTokens,
    SkipPunct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillerHistogram {
    pub window: usize,
    pub spans: usize,
    /// Keys cover every position in `-window..=window` except 0.
    pub bucket_counts: BTreeMap<i64, usize>,
    pub bucket_percent: BTreeMap<i64, f64>,
    pub inside_count: usize,
    pub inside_percent: f64,
    pub none_in_window: usize,
    pub none_percent: f64,
}

impl FillerHistogram {
    pub fn total_percent(&self) -> f64 {
        self.bucket_percent.values().sum::<f64>() + self.inside_percent + self.none_percent
    }
}

/// Signed position of token `f` relative to `span`: 0 inside, +1 for the
/// first token after it, -1 for the last token before it.
pub fn relative_position(narrative: &Narrative, span: Span, f: usize, distance: Distance) -> i64 {
    if span.contains(f) {
        return 0;
    }
    let counted = |range: std::ops::Range<usize>| -> i64 {
        match distance {
            Distance::AllTokens => range.len() as i64,
            Distance::SkipPunct => narrative.tokens[range].iter().filter(|t| !t.is_punct).count() as i64,
        }
    };
    if f >= span.end {
        counted(span.end..f + 1)
    } else {
        -counted(f..span.start)
    }
}

/// Position of the nearest filler, preferring the following one on ties.
pub fn nearest_filler(narrative: &Narrative, span: Span, distance: Distance) -> Option<i64> {
    narrative
        .tokens
        .iter()
        .filter(|t| t.is_filler)
        .map(|t| relative_position(narrative, span, t.index, distance))
        .min_by_key(|&p| (p.unsigned_abs(), p < 0))
}

pub fn filler_position_histogram(
    corpus: &Corpus,
    spans: &[(String, Span)],
    window: usize,
    distance: Distance,
) -> Result<FillerHistogram, AnalysisError> {
    filler_position_histogram_with(corpus, spans, window, distance, Execution::default())
}

pub fn filler_position_histogram_with(
    corpus: &Corpus,
    spans: &[(String, Span)],
    window: usize,
    distance: Distance,
    exec: Execution,
) -> Result<FillerHistogram, AnalysisError> {
    let positions = exec.map(spans, |(id, span)| -> Result<Option<i64>, AnalysisError> {
        let n = narrative(corpus, id)?;
        check_span(n, *span)?;
        Ok(nearest_filler(n, *span, distance))
    });

    let w = window as i64;
    let mut bucket_counts: BTreeMap<i64, usize> = (-w..=w).filter(|&p| p != 0).map(|p| (p, 0)).collect();
    let (mut inside_count, mut none_in_window) = (0, 0);
    for p in positions {
        match p? {
            Some(0) => inside_count += 1,
            Some(p) if p.abs() <= w => *bucket_counts.get_mut(&p).unwrap() += 1,
            _ => none_in_window += 1,
        }
    }
    let total = spans.len();
    let pct = |c: usize| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
    Ok(FillerHistogram {
        window,
        spans: total,
        bucket_percent: bucket_counts.iter().map(|(&p, &c)| (p, pct(c))).collect(),
        bucket_counts,
        inside_count,
        inside_percent: pct(inside_count),
        none_in_window,
        none_percent: if total == 0 { 100.0 } else { pct(none_in_window) },
    })
}

/// Every annotated span in the snapshot, in snapshot order.
pub fn carrier_spans(sets: &[AnnotationSet]) -> Vec<(String, Span)> {
    sets.iter().flat_map(|s| s.spans.iter().map(move |&sp| (s.narrative_id.clone(), sp))).collect()
}

/// Number of annotated spans per narrative, over all annotators.
pub fn carrier_counts(sets: &[AnnotationSet]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in sets {
        *out.entry(s.narrative_id.clone()).or_default() += s.spans.len();
    }
    out
}

/// Content-word token indices that are eligible for the random baseline.
pub fn content_tokens(corpus: &Corpus, narrative: &Narrative) -> Vec<usize> {
    narrative
        .tokens
        .iter()
        .filter(|t| !t.is_punct && !t.is_filler && t.pos.as_deref().is_some_and(|p| corpus.is_content_pos(p)))
        .map(|t| t.index)
        .collect()
}

/// Sample single-token content-word spans without replacement, per narrative.
pub fn random_content_baseline(
    corpus: &Corpus,
    counts: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<Vec<(String, Span)>, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (id, &requested) in counts {
        let n = narrative(corpus, id)?;
        let candidates = content_tokens(corpus, n);
        if requested > candidates.len() {
            return Err(AnalysisError::InsufficientContentTokens {
                narrative_id: id.clone(),
                requested,
                available: candidates.len(),
            });
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), requested)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| (id.clone(), Span::new(i, i + 1))));
    }
    Ok(out)
}

/// Carrier and seeded-baseline filler histograms, side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillerComparison {
    pub window: usize,
    pub distance: Distance,
    pub seed: u64,
    pub carriers: FillerHistogram,
    pub baseline: FillerHistogram,
}

/// Histogram every annotated span, and an equally sized random content-word
/// baseline per narrative.
pub fn filler_comparison(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    window: usize,
    distance: Distance,
    seed: u64,
) -> Result<FillerComparison, AnalysisError> {
    let carriers = carrier_spans(sets);
    let baseline = random_content_baseline(corpus, &carrier_counts(sets), seed)?;
    Ok(FillerComparison {
        window,
        distance,
        seed,
        carriers: filler_position_histogram(corpus, &carriers, window, distance)?,
        baseline: filler_position_histogram(corpus, &baseline, window, distance)?,
    })
}
