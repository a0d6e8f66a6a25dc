mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use pdd_core::backends::{Backend, BackendConfig, HttpBackend, HttpProtocol, LogProbFile, LogProbRecord};
use pdd_core::Error;
use serde_json::json;

fn backend(url: &str, protocol: HttpProtocol, retries: u32, parallel: usize) -> HttpBackend {
    HttpBackend::new(
        url,
        "toy",
        protocol,
        Duration::from_secs(5),
        retries,
        Duration::from_millis(5),
        parallel,
    )
}

#[test]
fn native_round_trip() {
    let url = common::serve(|req| {
        let body = req.json();
        assert_eq!(body["model"], "toy");
        (200, common::native_reply(body["text"].as_str().unwrap(), -0.5))
    });
    let got = backend(&url, HttpProtocol::Native, 0, 1).score("a b c").unwrap();
    assert_eq!(got.tokens, ["a", "b", "c"]);
    assert_eq!(got.logprobs, [-0.5; 3]);
    assert_eq!(got.text, "a b c");
}

#[test]
fn batch_respects_parallelism_cap_and_order() {
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (f, p) = (Arc::clone(&in_flight), Arc::clone(&peak));
    let url = common::serve(move |req| {
        let now = f.fetch_add(1, Ordering::SeqCst) + 1;
        p.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(2));
        let text = req.json()["text"].as_str().unwrap().to_string();
        f.fetch_sub(1, Ordering::SeqCst);
        (200, common::native_reply(&text, -1.0))
    });
    let texts: Vec<String> = (0..500).map(|i| format!("text number {i}")).collect();
    let out = backend(&url, HttpProtocol::Native, 2, 8).score_batch(&texts);
    assert_eq!(out.len(), 500);
    for (t, r) in texts.iter().zip(&out) {
        assert_eq!(&r.as_ref().unwrap().text, t);
    }
    let peak = peak.load(Ordering::SeqCst);
    assert!(peak <= 8, "peak in-flight {peak}");
    assert!(peak >= 2, "batch never overlapped requests");
}

#[test]
fn transient_failures_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let url = common::serve(move |req| {
        if c.fetch_add(1, Ordering::SeqCst) < 2 {
            return (503, "{}".into());
        }
        (200, common::native_reply(req.json()["text"].as_str().unwrap(), -2.0))
    });
    let got = backend(&url, HttpProtocol::Native, 3, 1).score("x y").unwrap();
    assert_eq!(got.len(), 2);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn exhausted_retries_report_unavailable() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let url = common::serve(move |_| {
        c.fetch_add(1, Ordering::SeqCst);
        (500, "{}".into())
    });
    let err = backend(&url, HttpProtocol::Native, 2, 1).score("x").unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable { attempts: 3, .. }), "{err:?}");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let err = backend(&format!("http://127.0.0.1:{port}"), HttpProtocol::Native, 1, 1)
        .score("x")
        .unwrap_err();
    assert_eq!(err.kind(), "BackendUnavailable");
}

#[test]
fn client_errors_are_not_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let url = common::serve(move |_| {
        c.fetch_add(1, Ordering::SeqCst);
        (404, "{}".into())
    });
    assert!(backend(&url, HttpProtocol::Native, 3, 1).score("x").is_err());
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_bodies_are_rejected() {
    let cases = [
        "not json".to_string(),
        json!({"tokens": ["a", "b"], "logprobs": [-1.0]}).to_string(),
        json!({"tokens": ["a"], "logprobs": [0.5]}).to_string(),
        json!({"tokens": ["a", "b"], "logprobs": [-1.0, null]}).to_string(),
        json!({"tokens": [], "logprobs": []}).to_string(),
        json!({"nothing": true}).to_string(),
    ];
    for body in cases {
        let reply = body.clone();
        let url = common::serve(move |_| (200, reply.clone()));
        let err = backend(&url, HttpProtocol::Native, 0, 1).score("a b").unwrap_err();
        assert_eq!(err.kind(), "MalformedResponse", "body {body}: {err:?}");
    }
}

#[test]
fn echo_protocol_drops_leading_null() {
    let url = common::serve(|req| {
        let body = req.json();
        assert_eq!(body["echo"], true);
        assert_eq!(body["max_tokens"], 0);
        assert_eq!(body["prompt"], "the cat sat");
        let reply = json!({"choices": [{"logprobs": {
            "tokens": ["the", " cat", " sat"],
            "token_logprobs": [null, -1.5, -0.25]
        }}]});
        (200, reply.to_string())
    });
    let got = backend(&url, HttpProtocol::EchoCompletion, 0, 1)
        .score("the cat sat")
        .unwrap();
    assert_eq!(got.tokens, [" cat", " sat"]);
    assert_eq!(got.logprobs, [-1.5, -0.25]);
    assert!(got.backend_id.ends_with("+drop0"), "{}", got.backend_id);
}

#[test]
fn configured_http_backend_scores_through_dispatch() {
    let url = common::serve(|req| (200, common::native_reply(req.json()["text"].as_str().unwrap(), -0.1)));
    let backend = Backend::from_config(&BackendConfig::http(url, "toy")).unwrap();
    let texts = vec!["one two".to_string(), "three".to_string()];
    let out = backend.score_batch(&texts);
    assert_eq!(out[0].as_ref().unwrap().len(), 2);
    assert_eq!(out[1].as_ref().unwrap().len(), 1);
}

#[test]
fn file_backend_batch_isolates_missing_records() {
    let records = vec![LogProbRecord {
        id: "r1".into(),
        text: "known text".into(),
        tokens: vec!["known".into(), "text".into()],
        logprobs: vec![-1.0, -2.0],
    }];
    let file = LogProbFile::from_records(records, "fixture".into()).unwrap();
    let backend = Backend::File(file);
    let out = backend.score_batch(&["known text".into(), "unknown".into(), "known text".into()]);
    assert!(out[0].is_ok() && out[2].is_ok());
    assert_eq!(out[1].as_ref().unwrap_err().kind(), "MissingRecord");
}
