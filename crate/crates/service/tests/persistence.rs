use std::fs::OpenOptions;
use std::io::Write;

use clipaudit_service::record::{CreateSession, Submission};
use clipaudit_service::Store;
use serde_json::json;

fn request() -> CreateSession {
    let mut manifest = String::from("ballot_id,contest_id,choice\n");
    for i in 0..40 {
        manifest.push_str(&format!("b{i:02},mayor,{}\n", if i % 3 == 0 { "B" } else { "A" }));
        if i % 2 == 0 {
            manifest.push_str(&format!("b{i:02},levy,{}\n", if i % 4 == 0 { "No" } else { "Yes" }));
        }
    }
    serde_json::from_value(json!({
        "contests": [
            {"contest_id": "mayor", "candidates": ["A", "B"], "winner_count": 1, "reported_winners": ["A"], "n": 40},
            {"contest_id": "levy", "candidates": ["Yes", "No"], "winner_count": 1, "reported_winners": ["Yes"], "n": 20}
        ],
        "alpha": 0.1,
        "beta_source": {"source": "formula"},
        "seed": 77,
        "manifest": manifest
    }))
    .unwrap()
}

/// Submits the manifest's own choices `k` times.
fn advance(store: &Store, id: &str, k: usize) {
    for _ in 0..k {
        let status = store.status(id).unwrap();
        let Some(ballot) = status.announced.clone() else { return };
        let transcript = store.export(id).unwrap();
        let csv = transcript.request.manifest.unwrap();
        let interpretations = csv
            .lines()
            .skip(1)
            .filter_map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0] == ballot).then(|| (f[1].to_string(), clipaudit::types::Choice::parse(f[2]).unwrap()))
            })
            .collect();
        store
            .submit(id, Submission { sequence_no: status.next_sequence_no, ballot_id: ballot, interpretations })
            .unwrap();
    }
}

fn canonical(store: &Store, id: &str) -> String {
    serde_json::to_string(&store.export(id).unwrap()).unwrap()
}

#[test]
fn restart_replays_logs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(Some(dir.path().to_path_buf())).unwrap();
    let a = store.create(request()).unwrap().session_id;
    let b = store.create(request()).unwrap().session_id;
    advance(&store, &a, 7);
    advance(&store, &b, 2);
    let before = (canonical(&store, &a), canonical(&store, &b));
    drop(store);

    let reopened = Store::open(Some(dir.path().to_path_buf())).unwrap();
    assert_eq!((canonical(&reopened, &a), canonical(&reopened, &b)), before);

    // Both copies continue identically.
    advance(&reopened, &a, 3);
    let again = Store::open(Some(dir.path().to_path_buf())).unwrap();
    assert_eq!(canonical(&again, &a), canonical(&reopened, &a));
    assert_eq!(again.export(&a).unwrap().events.len(), 10);
}

#[test]
fn torn_final_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(Some(dir.path().to_path_buf())).unwrap();
    let id = store.create(request()).unwrap().session_id;
    advance(&store, &id, 3);
    let expected = canonical(&store, &id);
    drop(store);
    let path = dir.path().join(format!("{id}.jsonl"));
    OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"event\":\"ballot\",\"seq").unwrap();
    let reopened = Store::open(Some(dir.path().to_path_buf())).unwrap();
    assert_eq!(canonical(&reopened, &id), expected);
}

#[test]
fn corrupt_log_refuses_to_load() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"event\":\"ballot\"}\n").unwrap();
    assert!(Store::open(Some(dir.path().to_path_buf())).is_err());
}

#[test]
fn rejected_submission_is_not_logged() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(Some(dir.path().to_path_buf())).unwrap();
    let id = store.create(request()).unwrap().session_id;
    let status = store.status(&id).unwrap();
    let bad = Submission { sequence_no: 9, ballot_id: status.announced.clone().unwrap(), interpretations: Default::default() };
    assert_eq!(store.submit(&id, bad).unwrap_err().status, 409);
    let path = dir.path().join(format!("{id}.jsonl"));
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 1);
}
