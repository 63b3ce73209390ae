#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use emocarrier_core::agreement::{MatchKind, MatchStrategy, Position, PrecisionConvention, Unit};
use emocarrier_core::annotation::{AnnotationSet, AnnotationStore, Span};
use emocarrier_core::corpus::{
    attach_layers, attach_token_layers, load_corpus, mark_fillers, Corpus, LexiconPaths, Narrative, NarrativeRecord,
    Polarity, SidecarRecord, TokenLayer,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures"))
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

pub fn fixture_lexicons() -> LexiconPaths {
    LexiconPaths {
        fillers: Some(fixture("fillers.tsv")),
        sentiment: Some(fixture("sentiment.tsv")),
        lemmas: Some(fixture("lemmas.tsv")),
        content_pos: Some(fixture("content_pos.tsv")),
    }
}

pub fn fixture_corpus() -> Corpus {
    let corpus = load_corpus(&fixture("narratives.jsonl"), &fixture_lexicons()).unwrap();
    attach_token_layers(corpus, &fixture("sidecar.jsonl")).unwrap()
}

pub fn fixture_sets() -> Vec<AnnotationSet> {
    let (store, report) = AnnotationStore::open_read_only(fixture("annotations.jsonl")).unwrap();
    assert!(report.skipped.is_empty());
    store.snapshot()
}

/// Every combination of the strategy switches.
pub fn all_strategies() -> Vec<MatchStrategy> {
    let mut out = Vec::new();
    for match_kind in [MatchKind::Exact, MatchKind::Partial] {
        for position in [Position::Aware, Position::Agnostic] {
            for unit in [Unit::Token, Unit::Lemma] {
                for ignore_punct in [false, true] {
                    for precision_convention in
                        [PrecisionConvention::HypothesisCovered, PrecisionConvention::PaperLiteral]
                    {
                        for cap_coverage in [true, false] {
                            out.push(MatchStrategy {
                                match_kind,
                                position,
                                unit,
                                ignore_punct,
                                precision_convention,
                                cap_coverage,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Small vocabulary with repeats, inflections and punctuation.
const VOCAB: &[&str] =
    &["Reise", "reise", "Reisen", "Hund", "Hunde", "war", "waren", "trip", "die", "der", ".", ",", "ähm", "toll"];

/// Lemma as a function of the case-folded surface.
pub fn lemma_of(lower: &str) -> String {
    match lower {
        "reisen" => "reise".into(),
        "hunde" => "hund".into(),
        "war" | "waren" => "sein".into(),
        "die" | "der" => "der".into(),
        other => other.into(),
    }
}

pub fn random_narrative(rng: &mut impl Rng, id: &str, max_tokens: usize) -> Narrative {
    let len = rng.random_range(1..=max_tokens);
    let words: Vec<&str> = (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    let mut corpus = Corpus::default();
    corpus
        .add_narratives([NarrativeRecord {
            id: id.into(),
            speaker_id: "sp".into(),
            prompt_polarity: Polarity::Positive,
            raw_text: words.join(" "),
            valence_pre: None,
            valence_post: None,
            arousal_pre: None,
            arousal_post: None,
        }])
        .unwrap();
    let corpus = mark_fillers(corpus);
    let layers = corpus.narratives[id]
        .tokens
        .iter()
        .map(|t| TokenLayer { lemma: Some(lemma_of(&t.lower)), pos: None })
        .collect();
    let mut corpus = attach_layers(corpus, [SidecarRecord { narrative_id: id.into(), layers }]).unwrap();
    let n = corpus.narratives.remove(id).unwrap();
    assert_eq!(n.tokens.len(), len);
    n
}

/// Up to `max_spans` pairwise disjoint spans, in random rank order.
pub fn random_spans(rng: &mut impl Rng, token_count: usize, max_spans: usize) -> Vec<Span> {
    let want = rng.random_range(0..=max_spans);
    let mut spans: Vec<Span> = Vec::new();
    for _ in 0..want * 4 {
        if spans.len() == want {
            break;
        }
        let start = rng.random_range(0..token_count);
        let len = rng.random_range(1..=4.min(token_count - start));
        let s = Span::new(start, start + len);
        if !spans.iter().any(|o| o.overlaps(&s)) {
            spans.push(s);
        }
    }
    spans.shuffle(rng);
    spans
}

#[derive(Debug, Clone)]
pub struct RandomCase {
    pub narrative: Narrative,
    pub a: AnnotationSet,
    pub b: AnnotationSet,
}

pub fn random_cases(seed: u64, count: usize) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let id = format!("r{i}");
            let narrative = random_narrative(&mut rng, &id, 12);
            let n = narrative.tokens.len();
            let a = AnnotationSet::new("a", id.clone(), random_spans(&mut rng, n, 4));
            let b = AnnotationSet::new("b", id, random_spans(&mut rng, n, 4));
            RandomCase { narrative, a, b }
        })
        .collect()
}

pub fn corpus_of(narrative: &Narrative) -> Corpus {
    let mut c = Corpus::default();
    c.narratives.insert(narrative.id.clone(), narrative.clone());
    c
}

/// "HausK und ähm Baum Tisch" repeated: every carrier on HausK has a filler
/// exactly two tokens after it and the previous one three tokens before.
pub fn planted_fillers() -> (Corpus, Vec<AnnotationSet>) {
    let reps = 12;
    let words: Vec<String> = (0..reps)
        .flat_map(|k| [format!("Haus{k}"), "und".into(), "ähm".into(), "Baum".into(), "Tisch".into()])
        .collect();
    let pos = ["NOUN", "CCONJ", "INTJ", "NOUN", "NOUN"];
    let mut corpus = Corpus::default();
    corpus
        .add_narratives([NarrativeRecord {
            id: "p".into(),
            speaker_id: "s".into(),
            prompt_polarity: Polarity::Positive,
            raw_text: words.join(" "),
            valence_pre: None,
            valence_post: None,
            arousal_pre: None,
            arousal_post: None,
        }])
        .unwrap();
    let layers = (0..words.len()).map(|i| TokenLayer { lemma: None, pos: Some(pos[i % 5].into()) }).collect();
    let corpus = attach_layers(mark_fillers(corpus), [SidecarRecord { narrative_id: "p".into(), layers }]).unwrap();
    let a: Vec<Span> = (0..reps).step_by(2).map(|k| Span::new(5 * k, 5 * k + 1)).collect();
    let b: Vec<Span> = (1..reps).step_by(2).map(|k| Span::new(5 * k, 5 * k + 1)).collect();
    (corpus, vec![AnnotationSet::new("a", "p", a), AnnotationSet::new("b", "p", b)])
}

/// Recursive JSON comparison with numbers equal to 1e-9.
pub fn json_close(got: &Value, want: &Value, path: &str) -> Result<(), String> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            if (a - b).abs() < 1e-9 {
                Ok(())
            } else {
                Err(format!("{path}: {a} != {b}"))
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            if !a.keys().eq(b.keys()) {
                return Err(format!("{path}: keys differ"));
            }
            a.iter().try_for_each(|(k, v)| json_close(v, &b[k], &format!("{path}.{k}")))
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Err(format!("{path}: length {} != {}", a.len(), b.len()));
            }
            a.iter().zip(b).enumerate().try_for_each(|(i, (x, y))| json_close(x, y, &format!("{path}[{i}]")))
        }
        _ if got == want => Ok(()),
        _ => Err(format!("{path}: {got} != {want}")),
    }
}
