mod support;

use emocarrier_core::annotation::{validate_annotation_set, AnnotationSet, Span, Violation};
use support::*;

fn set(narrative: &str, v: &[(usize, usize)]) -> AnnotationSet {
    AnnotationSet::new("t", narrative, v.iter().map(|&(a, b)| Span::new(a, b)).collect())
}

fn names(v: &[Violation]) -> Vec<&'static str> {
    v.iter().map(Violation::name).collect()
}

#[test]
fn two_spans_warn_minimum_count() {
    let corpus = fixture_corpus();
    let v = validate_annotation_set(&set("n1", &[(5, 6), (18, 19)]), &corpus.narratives["n1"]).unwrap();
    assert!(v.errors.is_empty());
    assert_eq!(names(&v.warnings), ["MinimumSpanCount"]);
}

#[test]
fn overlapping_spans_are_errors() {
    let corpus = fixture_corpus();
    let v = validate_annotation_set(&set("n1", &[(16, 19), (18, 20), (40, 41)]), &corpus.narratives["n1"]).unwrap();
    assert_eq!(names(&v.errors), ["OverlappingSpans"]);
    assert!(matches!(v.errors[0], Violation::OverlappingSpans { rank: 1, other_rank: 2 }));
}

#[test]
fn second_occurrence_warns() {
    let corpus = fixture_corpus();
    let v = validate_annotation_set(&set("n1", &[(23, 24), (18, 19), (40, 41)]), &corpus.narratives["n1"]).unwrap();
    assert!(v.errors.is_empty());
    assert_eq!(v.warnings, [Violation::FirstOccurrence { rank: 1, surface: "praktikum".into(), earlier_start: 5 }]);
    // annotating the first occurrence too silences the warning
    let v = validate_annotation_set(&set("n1", &[(23, 24), (5, 6), (40, 41)]), &corpus.narratives["n1"]).unwrap();
    assert!(!names(&v.warnings).contains(&"FirstOccurrence"));
}

#[test]
fn fixture_warnings() {
    let corpus = fixture_corpus();
    let mut found = Vec::new();
    for s in fixture_sets() {
        let v = validate_annotation_set(&s, &corpus.narratives[&s.narrative_id]).unwrap();
        assert!(v.errors.is_empty(), "{} {}", s.annotator_id, s.narrative_id);
        for w in &v.warnings {
            found.push(format!("{}/{} {}", s.annotator_id, s.narrative_id, w.name()));
        }
    }
    found.sort();
    assert!(found.contains(&"ann2/n2 MinimumSpanCount".to_string()));
    assert!(found.contains(&"ann3/n1 FirstOccurrence".to_string()));
}
