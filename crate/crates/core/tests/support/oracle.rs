//! Brute-force reference scorer, written directly from the coverage and
//! positive-agreement formulas. Shares only data types with the engine.

#![allow(dead_code)]

use std::collections::BTreeMap;

use emocarrier_core::agreement::{Aggregation, MatchKind, MatchStrategy, Position, PrecisionConvention, Unit};
use emocarrier_core::annotation::{AnnotationSet, Span};
use emocarrier_core::corpus::{Corpus, Narrative};

fn unit_string(n: &Narrative, i: usize, st: &MatchStrategy) -> String {
    let t = &n.tokens[i];
    match st.unit {
        Unit::Token => t.surface.to_lowercase(),
        Unit::Lemma => t.lemma.clone().unwrap_or_else(|| t.surface.to_lowercase()),
    }
}

fn counted(n: &Narrative, span: Span, st: &MatchStrategy) -> Vec<usize> {
    (span.start..span.end).filter(|&i| !(st.ignore_punct && n.tokens[i].is_punct)).collect()
}

/// c(s, s') = |s ∩ s'| / |s|
pub fn coverage(n: &Narrative, s: Span, t: Span, st: &MatchStrategy) -> f64 {
    let src = counted(n, s, st);
    if src.is_empty() {
        return 0.0;
    }
    let common = match st.position {
        Position::Aware => src.iter().filter(|&&i| i >= t.start && i < t.end).count(),
        Position::Agnostic => {
            let mut pool: Vec<String> = counted(n, t, st).into_iter().map(|i| unit_string(n, i, st)).collect();
            let mut hits = 0;
            for i in &src {
                let u = unit_string(n, *i, st);
                if let Some(k) = pool.iter().position(|p| *p == u) {
                    pool.remove(k);
                    hits += 1;
                }
            }
            hits
        }
    };
    common as f64 / src.len() as f64
}

/// C(S, S') as a double sum, optionally capping each inner sum at 1.
pub fn set_coverage(n: &Narrative, s: &[Span], t: &[Span], st: &MatchStrategy) -> f64 {
    let mut total = 0.0;
    for &a in s {
        let mut inner = 0.0;
        for &b in t {
            inner += coverage(n, a, b, st);
        }
        if st.cap_coverage && inner > 1.0 {
            inner = 1.0;
        }
        total += inner;
    }
    total
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (precision numerator, recall numerator) for reference r and hypothesis h.
fn soft_masses(n: &Narrative, r: &[Span], h: &[Span], st: &MatchStrategy) -> (f64, f64) {
    let c_hr = set_coverage(n, h, r, st);
    let c_rh = set_coverage(n, r, h, st);
    match st.precision_convention {
        PrecisionConvention::HypothesisCovered => (c_hr, c_rh),
        PrecisionConvention::PaperLiteral => (c_rh, c_hr),
    }
}

fn soft_from(pm: f64, rm: f64, nh: usize, nr: usize) -> (f64, f64, f64) {
    if nh == 0 && nr == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if nh == 0 { 0.0 } else { pm / nh as f64 };
    let r = if nr == 0 { 0.0 } else { rm / nr as f64 };
    (p, r, f1(p, r))
}

pub fn soft(n: &Narrative, r: &[Span], h: &[Span], st: &MatchStrategy) -> (f64, f64, f64) {
    let (pm, rm) = soft_masses(n, r, h, st);
    soft_from(pm, rm, h.len(), r.len())
}

fn exact_equal(n: &Narrative, a: Span, b: Span, st: &MatchStrategy) -> bool {
    if st.position == Position::Aware && !st.ignore_punct {
        return a == b;
    }
    let (xa, xb) = (counted(n, a, st), counted(n, b, st));
    if xa.is_empty() || xb.is_empty() {
        return false;
    }
    match st.position {
        Position::Aware => xa == xb,
        Position::Agnostic => {
            let sa: Vec<String> = xa.iter().map(|&i| unit_string(n, i, st)).collect();
            let sb: Vec<String> = xb.iter().map(|&i| unit_string(n, i, st)).collect();
            sa == sb
        }
    }
}

/// Maximum one-to-one matching by exhaustive search.
fn max_matching(n: &Narrative, a: &[Span], b: &[Span], used: &mut Vec<bool>, st: &MatchStrategy) -> usize {
    let Some((&first, rest)) = a.split_first() else {
        return 0;
    };
    let mut best = max_matching(n, rest, b, used, st);
    for j in 0..b.len() {
        if !used[j] && exact_equal(n, first, b[j], st) {
            used[j] = true;
            best = best.max(1 + max_matching(n, rest, b, used, st));
            used[j] = false;
        }
    }
    best
}

pub fn exact_tp(n: &Narrative, a: &[Span], b: &[Span], st: &MatchStrategy) -> usize {
    max_matching(n, a, b, &mut vec![false; b.len()], st)
}

fn exact_from(tp: usize, na: usize, nb: usize) -> (f64, f64, f64) {
    if na + nb == 0 {
        return (1.0, 1.0, 1.0);
    }
    let fp = nb - tp;
    let fn_ = na - tp;
    let p = if nb == 0 { 0.0 } else { tp as f64 / nb as f64 };
    let r = if na == 0 { 0.0 } else { tp as f64 / na as f64 };
    (p, r, 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64))
}

pub fn exact(n: &Narrative, a: &[Span], b: &[Span], st: &MatchStrategy) -> (f64, f64, f64) {
    exact_from(exact_tp(n, a, b, st), a.len(), b.len())
}

pub fn score(n: &Narrative, r: &[Span], h: &[Span], st: &MatchStrategy) -> (f64, f64, f64) {
    match st.match_kind {
        MatchKind::Exact => exact(n, r, h, st),
        MatchKind::Partial => soft(n, r, h, st),
    }
}

pub struct OracleReport {
    pub pairs: BTreeMap<(String, String), (f64, f64, f64)>,
    pub mean_f1: f64,
}

/// Pairwise scores over narratives both annotators annotated.
pub fn report(corpus: &Corpus, sets: &[AnnotationSet], st: &MatchStrategy, agg: Aggregation) -> OracleReport {
    let mut annotators: Vec<String> = sets.iter().map(|s| s.annotator_id.clone()).collect();
    annotators.sort();
    annotators.dedup();
    let find = |a: &str, nid: &str| sets.iter().find(|s| s.annotator_id == a && s.narrative_id == nid);
    let mut pairs = BTreeMap::new();
    for i in 0..annotators.len() {
        for j in i + 1..annotators.len() {
            let (a, b) = (&annotators[i], &annotators[j]);
            let mut per = Vec::new();
            let (mut pm, mut rm, mut nh, mut nr, mut tp) = (0.0, 0.0, 0, 0, 0);
            for (nid, n) in &corpus.narratives {
                let (Some(x), Some(y)) = (find(a, nid), find(b, nid)) else { continue };
                per.push(score(n, &x.spans, &y.spans, st));
                match st.match_kind {
                    MatchKind::Partial => {
                        let (p_, r_) = soft_masses(n, &x.spans, &y.spans, st);
                        pm += p_;
                        rm += r_;
                    }
                    MatchKind::Exact => tp += exact_tp(n, &x.spans, &y.spans, st),
                }
                nh += y.spans.len();
                nr += x.spans.len();
            }
            if per.is_empty() {
                continue;
            }
            let s = match agg {
                Aggregation::Macro => {
                    let k = per.len() as f64;
                    (
                        per.iter().map(|s| s.0).sum::<f64>() / k,
                        per.iter().map(|s| s.1).sum::<f64>() / k,
                        per.iter().map(|s| s.2).sum::<f64>() / k,
                    )
                }
                Aggregation::Micro => match st.match_kind {
                    MatchKind::Partial => soft_from(pm, rm, nh, nr),
                    MatchKind::Exact => exact_from(tp, nr, nh),
                },
            };
            pairs.insert((a.clone(), b.clone()), s);
        }
    }
    let mean_f1 = pairs.values().map(|s| s.2).sum::<f64>() / pairs.len() as f64;
    OracleReport { pairs, mean_f1 }
}
