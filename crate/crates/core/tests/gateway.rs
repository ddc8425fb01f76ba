use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use xwalk_core::gateway::{
    GatewayConfig, GatewayError, GatewayMode, Gateway, Outgoing, RetryPolicy, TranscriptStore, Transport,
    TransportError, DenyAll,
};
use xwalk_core::patch::{DatasetConfig, SampleId};
use xwalk_core::prompt::{bundle_digest, ImagePart, PromptBundle};

const SECRET: &str = "sk-test-0123456789abcdef";

fn bundle(i: usize) -> PromptBundle {
    let sha = format!("{i:064x}");
    let system_text = "system".to_string();
    let user_preamble = "user".to_string();
    PromptBundle {
        sample_id: SampleId(format!("{i:016x}")),
        config: DatasetConfig::Overlaid,
        digest: bundle_digest(&system_text, &user_preamble, &[&sha]),
        system_text,
        user_preamble,
        images: vec![ImagePart {
            base64: "iVBORw0KGgo=".into(),
            sha256: sha,
        }],
    }
}

fn reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn config(mode: GatewayMode, dir: Option<&std::path::Path>, parallel: usize) -> GatewayConfig {
    GatewayConfig {
        mode,
        transcript_dir: dir.map(|d| d.to_path_buf()),
        max_parallel: parallel,
        retry: RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 1,
        },
        ..GatewayConfig::default()
    }
}

/// Answers with the sample's position, tracking concurrency and failing as told.
#[derive(Default)]
struct Stub {
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    calls: AtomicUsize,
    fail_once: Mutex<BTreeSet<String>>,
    hard_fail: BTreeSet<String>,
    bodies: Mutex<Vec<String>>,
}

impl Transport for Stub {
    fn send(&self, req: &Outgoing<'_>) -> Result<String, TransportError> {
        assert_eq!(req.credential, SECRET);
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(15));
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let body = req.body.to_string();
        self.bodies.lock().unwrap().push(body.clone());
        let user = req.body["messages"][1]["content"][1]["image_url"]["url"].as_str().unwrap().to_string();
        let key = req.body["messages"][1]["content"].to_string();
        if self.hard_fail.iter().any(|k| key.contains(k)) {
            return Err(TransportError::Status {
                code: 400,
                body: format!("bad request for {SECRET}"),
            });
        }
        if self.fail_once.lock().unwrap().iter().any(|k| key.contains(k)) {
            self.fail_once.lock().unwrap().retain(|k| !key.contains(k));
            return Err(TransportError::Status {
                code: 503,
                body: "overloaded".into(),
            });
        }
        Ok(reply(&format!("CROSSWALK: Yes\nREASON: {}", user.len())))
    }
}

fn live(stub: Arc<Stub>, mode: GatewayMode, dir: Option<&std::path::Path>, parallel: usize) -> Gateway {
    Gateway::with_credential(config(mode, dir, parallel), stub, Some(SECRET.into())).unwrap()
}

#[test]
fn batch_keeps_order_and_bounds_concurrency() {
    let stub = Arc::new(Stub::default());
    let gw = live(stub.clone(), GatewayMode::Live, None, 3);
    let bundles: Vec<_> = (0..10).map(bundle).collect();
    let out = gw.classify_batch(&bundles);
    assert_eq!(out.len(), 10);
    for (b, r) in bundles.iter().zip(&out) {
        assert_eq!(b.sample_id, r.sample_id);
        assert_eq!(b.digest, r.digest);
        assert_eq!(r.attempts, 1);
        assert!(r.result.is_ok());
    }
    let peak = stub.peak.load(Ordering::SeqCst);
    assert!((1..=3).contains(&peak), "peak in flight {peak}");
    assert_eq!(gw.requests_sent(), 10);
}

#[test]
fn transient_failure_is_retried() {
    let stub = Arc::new(Stub::default());
    stub.fail_once.lock().unwrap().insert("data:image/png".into());
    let gw = live(stub.clone(), GatewayMode::Live, None, 1);
    let r = gw.classify(&bundle(4)).unwrap();
    assert_eq!(r.attempts, 2);
    assert_eq!(stub.calls.load(Ordering::SeqCst), 2);
}

#[test]
fn one_hard_failure_does_not_abort_the_batch() {
    let mut bundles: Vec<_> = (0..10).map(bundle).collect();
    bundles[6].user_preamble = "poison".into();
    let stub = Arc::new(Stub {
        hard_fail: ["poison".to_string()].into(),
        ..Stub::default()
    });
    let gw = live(stub, GatewayMode::Live, None, 4);
    let out = gw.classify_batch(&bundles);
    let failed: Vec<_> = out.iter().enumerate().filter(|(_, r)| r.result.is_err()).map(|(i, _)| i).collect();
    assert_eq!(failed, vec![6]);
    match &out[6].result {
        Err(GatewayError::Rejected(msg)) => assert!(!msg.contains(SECRET), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(out[6].attempts, 1);
}

#[test]
fn transient_exhaustion_reports_attempts() {
    struct Down;
    impl Transport for Down {
        fn send(&self, _: &Outgoing<'_>) -> Result<String, TransportError> {
            Err(TransportError::Network("connection reset".into()))
        }
    }
    let gw = Gateway::with_credential(config(GatewayMode::Live, None, 1), Arc::new(Down), Some(SECRET.into())).unwrap();
    assert_eq!(
        gw.classify(&bundle(0)).unwrap_err(),
        GatewayError::TransientExhausted {
            attempts: 3,
            last: "network: connection reset".into()
        }
    );
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let stub = Arc::new(Stub::default());
    let rec = live(stub.clone(), GatewayMode::Record, Some(dir.path()), 3);
    let mut bundles: Vec<_> = (0..6).map(bundle).collect();
    bundles.push(bundle(2));
    let first = rec.classify_batch(&bundles);
    assert!(first.iter().all(|r| r.result.is_ok()));
    assert_eq!(TranscriptStore::new(dir.path()).len().unwrap(), 6);

    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains(SECRET));
        assert!(!text.contains("iVBORw0KGgo"), "image payload stored in transcript");
        assert!(text.contains("sha256:"));
    }

    let deny = Arc::new(DenyAll::new());
    let replay = Gateway::with_credential(config(GatewayMode::Replay, Some(dir.path()), 2), deny.clone(), None).unwrap();
    let second = replay.classify_batch(&bundles);
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.result, b.result);
        assert_eq!(b.attempts, 0);
    }
    assert_eq!(deny.attempts(), 0);

    let miss = replay.classify(&bundle(99)).unwrap_err();
    assert!(matches!(miss, GatewayError::ReplayMiss(_)));
}

#[test]
fn live_without_credential_fails_before_sending() {
    let deny = Arc::new(DenyAll::new());
    let gw = Gateway::with_credential(config(GatewayMode::Live, None, 1), deny.clone(), None).unwrap();
    assert!(matches!(gw.classify(&bundle(0)), Err(GatewayError::MissingCredential(_))));
    assert_eq!(deny.attempts(), 0);
}
