use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures")).join(name).display().to_string()
}

fn base_args(annotations: &str) -> Vec<String> {
    let mut v = vec!["--corpus".into(), fixture("narratives.jsonl"), "--sidecar".into(), fixture("sidecar.jsonl")];
    for (k, f) in [
        ("fillers", "fillers.tsv"),
        ("sentiment", "sentiment.tsv"),
        ("lemmas", "lemmas.tsv"),
        ("content-pos", "content_pos.tsv"),
    ] {
        v.push("--lexicons".into());
        v.push(format!("{k}={}", fixture(f)));
    }
    v.push("--annotations".into());
    v.push(annotations.into());
    v
}

fn emocarrier(args: &[&str], annotations: &str) -> (i32, String, String) {
    let mut argv: Vec<String> = vec!["emocarrier".into()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(base_args(annotations));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = emocarrier_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn run(args: &[&str]) -> (i32, String, String) {
    emocarrier(args, &fixture("annotations.jsonl"))
}

#[test]
fn all_strategies_matches_golden() {
    let (code, out, _) = run(&["agreement", "--all-strategies"]);
    assert_eq!(code, 0);
    assert_eq!(out, std::fs::read_to_string(fixture("golden/agreement_all_strategies.txt")).unwrap());
}

#[test]
fn lemma_agnostic_matrix_matches_oracle() {
    let oracle: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden/agreement.oracle.json")).unwrap()).unwrap();
    for (agg, key) in [("micro", "d"), ("macro", "d_macro")] {
        let args = [
            "agreement",
            "--match",
            "partial",
            "--position",
            "agnostic",
            "--unit",
            "lemma",
            "--aggregation",
            agg,
            "--format",
            "records",
        ];
        let (code, out, _) = run(&args);
        assert_eq!(code, 0);
        let r: Value = serde_json::from_str(out.trim_end()).unwrap();
        for p in r["pairs"].as_array().unwrap() {
            let k = format!("{}|{}", p["a"].as_str().unwrap(), p["b"].as_str().unwrap());
            for field in ["precision", "recall", "f1"] {
                let want = oracle[key]["pairs"][&k][field].as_f64().unwrap();
                assert!((p[field].as_f64().unwrap() - want).abs() < 1e-9, "{agg} {k} {field}");
            }
        }
        assert!((r["mean_f1"].as_f64().unwrap() - oracle[key]["mean_f1"].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn tsv_has_all_matrices() {
    let (code, out, _) = run(&["agreement", "--all-strategies", "--format", "tsv"]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("mean_f1\t").count(), 4);
    assert!(out.lines().any(|l| l.starts_with("ann1\t1\t")));
}

#[test]
fn validate_two_spans_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.jsonl");
    std::fs::write(
        &path,
        r#"{"annotator_id":"x","narrative_id":"n1","revision":1,"spans":[{"start":18,"end":19},{"start":40,"end":41}]}
"#,
    )
    .unwrap();
    let (code, out, err) = emocarrier(&["validate"], path.to_str().unwrap());
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("MinimumSpanCount"));
    assert!(err.contains("0 errors, 1 warnings"));

    std::fs::write(
        &path,
        r#"{"annotator_id":"x","narrative_id":"n1","revision":1,"spans":[{"start":16,"end":19},{"start":18,"end":20},{"start":40,"end":41}]}
"#,
    )
    .unwrap();
    let (code, out, _) = emocarrier(&["validate", "--format", "records"], path.to_str().unwrap());
    assert_eq!(code, 1);
    let row: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!((row["severity"].as_str(), row["kind"].as_str()), (Some("error"), Some("OverlappingSpans")));
}

#[test]
fn torn_log_is_reported_not_fatal() {
    let (code, _, err) = emocarrier(&["stats"], &fixture("torn_annotations.jsonl"));
    assert_eq!(code, 0);
    assert!(err.contains("torn final record"), "{err}");
}

#[test]
fn exit_codes() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(emocarrier_cli::run(["emocarrier", "agreement", "--frobnicate"], &mut out, &mut err), 2);
    assert!(String::from_utf8_lossy(&err).contains("Usage:"));

    let mut err = Vec::new();
    assert_eq!(emocarrier_cli::run(["emocarrier", "stats"], &mut out, &mut err), 2);
    let mut err = Vec::new();
    assert_eq!(emocarrier_cli::run(["emocarrier"], &mut out, &mut err), 2);
    let (code, _, _) = run(&["agreement", "--match", "fuzzy"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["agreement", "--all-strategies", "--unit", "lemma"]);
    assert_eq!(code, 2);

    let (code, _, err) = emocarrier(&["stats"], "/nonexistent/annotations.jsonl");
    assert_eq!(code, 1, "{err}");
    let (code, _, err) = run(&["overlaps", "--match", "exact"]);
    assert_eq!(code, 1);
    assert!(err.contains("ExactOverlap"));

    let mut out = Vec::new();
    assert_eq!(emocarrier_cli::run(["emocarrier", "--help"], &mut out, &mut Vec::new()), 0);
    assert!(String::from_utf8_lossy(&out).contains("agreement"));
}

#[test]
fn fillers_reproducible_by_seed() {
    let a = run(&["fillers", "--seed", "5", "--format", "records"]).1;
    assert_eq!(a, run(&["fillers", "--seed", "5", "--format", "records"]).1);
    assert_ne!(a, run(&["fillers", "--seed", "6", "--format", "records"]).1);
    let v: Value = serde_json::from_str(a.trim_end()).unwrap();
    assert_eq!(v["carriers"]["spans"], v["baseline"]["spans"]);
}

#[test]
fn ingest_summarizes_corpus() {
    let (code, out, _) = run(&["ingest", "--format", "records"]);
    assert_eq!(code, 0);
    let rows: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[0]["token_count"].as_u64(), rows[0]["fillers"].as_u64()), (Some(42), Some(3)));
}

#[test]
fn export_writes_clean_log() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("clean.jsonl");
    let (code, _, _) = emocarrier(&["export", "--out", out_path.to_str().unwrap()], &fixture("torn_annotations.jsonl"));
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&out_path).unwrap(), std::fs::read(fixture("annotations.jsonl")).unwrap());
    let (_, stdout, _) = run(&["export"]);
    assert_eq!(stdout.as_bytes(), std::fs::read(fixture("annotations.jsonl")).unwrap());
}

async fn service_body(app: &axum::Router, uri: &str) -> String {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    assert!(resp.status().is_success(), "{uri}: {}", resp.status());
    String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap()
}

#[tokio::test]
async fn records_are_byte_identical_to_service() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.jsonl");
    std::fs::copy(fixture("annotations.jsonl"), &store).unwrap();
    let mut lexicons = emocarrier_core::corpus::LexiconPaths::default();
    for (k, f) in [
        ("fillers", "fillers.tsv"),
        ("sentiment", "sentiment.tsv"),
        ("lemmas", "lemmas.tsv"),
        ("content-pos", "content_pos.tsv"),
    ] {
        lexicons.set(&format!("{k}={}", fixture(f))).unwrap();
    }
    let config = emocarrier_service::ServiceConfig {
        bind: "127.0.0.1:0".into(),
        corpus: fixture("narratives.jsonl").into(),
        sidecar: Some(fixture("sidecar.jsonl").into()),
        lexicons,
        store,
        seed: 3,
        auth: None,
    };
    let app = emocarrier_service::router(Arc::new(config.load_state().unwrap()));
    let cases: &[(&[&str], &str)] = &[
        (&["agreement"], "/reports/agreement"),
        (&["agreement", "--all-strategies"], "/reports/agreement?all_strategies=true"),
        (
            &["agreement", "--match", "exact", "--position", "aware", "--ignore-punct", "--aggregation", "macro"],
            "/reports/agreement?match=exact&position=aware&ignore_punct=true&aggregation=macro",
        ),
        (
            &["agreement", "--unit", "lemma", "--convention", "paper_literal", "--uncapped"],
            "/reports/agreement?unit=lemma&convention=paper_literal&cap=false",
        ),
        (&["stats"], "/reports/stats"),
        (&["sentiment"], "/reports/sentiment"),
        (&["overlaps"], "/reports/overlaps"),
        (&["overlaps", "--unit", "lemma", "--position", "aware"], "/reports/overlaps?unit=lemma&position=aware"),
        (&["fillers", "--seed", "3"], "/reports/fillers"),
        (
            &["fillers", "--seed", "8", "--window", "3", "--distance", "skip-punct"],
            "/reports/fillers?seed=8&window=3&distance=skip_punct",
        ),
    ];
    for (args, uri) in cases {
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--format", "records"]);
        let (code, cli, err) = run(&a);
        assert_eq!(code, 0, "{args:?}: {err}");
        assert_eq!(cli, service_body(&app, uri).await, "{args:?} vs {uri}");
    }
}
