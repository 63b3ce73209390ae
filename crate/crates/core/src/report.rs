//! Rendering of agreement and analysis results.
//!
//! Every result has three renderings: an aligned human table, tab-separated
//! values, and one JSON record per line. The JSON form is what the HTTP
//! service returns, so the CLI and service agree byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::agreement::AgreementReport;
use crate::analysis::{AnnotatorStats, FillerComparison, OverlapCount};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Table,
    Tsv,
    Records,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "tsv" => Ok(OutputFormat::Tsv),
            "records" => Ok(OutputFormat::Records),
            _ => Err(format!("invalid format {s:?} (expected table, tsv, records)")),
        }
    }
}

/// Single-line JSON for any serializable result.
pub fn record<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report types always serialize")
}

fn records<T: Serialize>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| record(&v) + "\n").collect()
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - cell.chars().count();
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', pad));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn tsv(rows: &[Vec<String>]) -> String {
    rows.iter().map(|r| r.join("\t") + "\n").collect()
}

fn matrix_rows(report: &AgreementReport, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
    let ids = &report.annotator_ids;
    let mut rows = vec![std::iter::once(String::new()).chain(ids.iter().cloned()).collect::<Vec<_>>()];
    for (i, a) in ids.iter().enumerate() {
        let mut row = vec![a.clone()];
        for (j, b) in ids.iter().enumerate() {
            row.push(match j.cmp(&i) {
                std::cmp::Ordering::Less => String::new(),
                std::cmp::Ordering::Equal => "1".to_string(),
                std::cmp::Ordering::Greater => match report.pair(a, b) {
                    Some(p) if p.narratives > 0 => fmt(p.score.f1),
                    _ => "-".to_string(),
                },
            });
        }
        rows.push(row);
    }
    rows
}

/// Render one or more agreement reports, each optionally labelled.
pub fn render_agreement(reports: &[(Option<char>, AgreementReport)], format: OutputFormat) -> String {
    match format {
        OutputFormat::Records => records(reports.iter().map(|(_, r)| r)),
        OutputFormat::Table => {
            let mut out = String::new();
            for (k, (label, r)) in reports.iter().enumerate() {
                if k > 0 {
                    out.push('\n');
                }
                let prefix = label.map(|l| format!("({l}) ")).unwrap_or_default();
                let _ =
                    writeln!(out, "{prefix}{} [{}] (mean F1: {:.3})", r.strategy.describe(), r.aggregation, r.mean_f1);
                out.push_str(&aligned(&matrix_rows(r, |v| format!("{v:.3}"))));
            }
            out
        }
        OutputFormat::Tsv => {
            let mut out = String::new();
            for (k, (label, r)) in reports.iter().enumerate() {
                if k > 0 {
                    out.push('\n');
                }
                let label = label.map(String::from).unwrap_or_default();
                let _ = writeln!(out, "# {label}\t{}\t{}", r.strategy.describe(), r.aggregation);
                out.push_str(&tsv(&matrix_rows(r, |v| format!("{v:.6}"))));
                let _ = writeln!(out, "mean_f1\t{:.6}", r.mean_f1);
            }
            out
        }
    }
}

pub fn render_stats(stats: &[AnnotatorStats], format: OutputFormat) -> String {
    if format == OutputFormat::Records {
        return records(stats);
    }
    let mut rows = vec![[
        "annotator",
        "narratives",
        "spans",
        "spans_min",
        "spans_max",
        "spans_mean",
        "tokens_per_span",
        "tokens_per_span_no_punct",
        "pos_distribution",
    ]
    .map(String::from)
    .to_vec()];
    for s in stats {
        let pos = s.pos_distribution.iter().map(|(t, f)| format!("{t}:{:.3}", f)).collect::<Vec<_>>().join(",");
        rows.push(vec![
            s.annotator_id.clone(),
            s.narratives.to_string(),
            s.total_spans.to_string(),
            s.spans_per_narrative.min.to_string(),
            s.spans_per_narrative.max.to_string(),
            format!("{:.3}", s.spans_per_narrative.mean),
            format!("{:.3}", s.tokens_per_span),
            format!("{:.3}", s.tokens_per_span_no_punct),
            pos,
        ]);
    }
    finish(&rows, format)
}

fn finish(rows: &[Vec<String>], format: OutputFormat) -> String {
    match format {
        OutputFormat::Tsv => tsv(rows),
        _ => aligned(rows),
    }
}

#[derive(Serialize)]
struct SentimentRow<'a> {
    annotator_id: &'a str,
    fraction: f64,
}

pub fn render_sentiment(fractions: &BTreeMap<String, f64>, format: OutputFormat) -> String {
    if format == OutputFormat::Records {
        return records(fractions.iter().map(|(a, &f)| SentimentRow { annotator_id: a, fraction: f }));
    }
    let mut rows = vec![vec!["annotator".to_string(), "sentiment_fraction".to_string()]];
    rows.extend(fractions.iter().map(|(a, f)| vec![a.clone(), format!("{f:.3}")]));
    finish(&rows, format)
}

pub fn render_overlaps(counts: &[OverlapCount], format: OutputFormat) -> String {
    if format == OutputFormat::Records {
        return records(counts);
    }
    let mut rows = vec![vec!["count".to_string(), "shared".to_string()]];
    rows.extend(counts.iter().map(|c| vec![c.count.to_string(), c.key.clone()]));
    finish(&rows, format)
}

pub fn render_fillers(cmp: &FillerComparison, format: OutputFormat) -> String {
    if format == OutputFormat::Records {
        return record(cmp) + "\n";
    }
    let mut rows = vec![vec!["position".to_string(), "carriers_pct".to_string(), "baseline_pct".to_string()]];
    let fmt = |v: f64| format!("{v:.3}");
    let w = cmp.window as i64;
    for p in -w..=w {
        let (c, b) = if p == 0 {
            (cmp.carriers.inside_percent, cmp.baseline.inside_percent)
        } else {
            (cmp.carriers.bucket_percent[&p], cmp.baseline.bucket_percent[&p])
        };
        let label = if p == 0 { "0".to_string() } else { format!("{p:+}") };
        rows.push(vec![label, fmt(c), fmt(b)]);
    }
    rows.push(vec!["none".to_string(), fmt(cmp.carriers.none_percent), fmt(cmp.baseline.none_percent)]);
    rows.push(vec!["spans".to_string(), cmp.carriers.spans.to_string(), cmp.baseline.spans.to_string()]);
    finish(&rows, format)
}
