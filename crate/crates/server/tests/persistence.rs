mod common;

use axum::http::StatusCode;
use serde_json::json;

use common::{config, Client, EXP};
use mplab_server::ServerConfig;

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.data_dir = Some(dir.path().to_path_buf());

    let (id, tok, first_reply, log, state) = {
        let c = Client::new(&cfg);
        c.full_session("DONE", [4, 5, 6, 3, 5, 4]).await;
        let (id, tok) = c.create("LIVE").await;
        c.post(&format!("/sessions/{id}/start"), Some(&tok), json!({})).await;
        let task = c.get(&format!("/sessions/{id}/task"), Some(&tok)).await.json();
        let body = if task["kind"] == "BINS" {
            json!({ "task": task["task"], "decision": 2 })
        } else {
            json!({ "task": task["task"], "row": 1, "choice": "A" })
        };
        let reply = c.send("POST", &format!("/sessions/{id}/choices"), Some(&tok), Some(body), Some("retry-1")).await;
        assert_eq!(reply.status, StatusCode::OK);
        c.post("/runs/LAB1/close", Some(EXP), json!({})).await;
        let log = c.get(&format!("/sessions/{id}/events"), Some(EXP)).await.text;
        let state = c.get(&format!("/sessions/{id}"), Some(&tok)).await.text;
        (id, tok, (reply.text, task), log, state)
    };

    let c = Client::new(&cfg);
    assert_eq!(c.get(&format!("/sessions/{id}/events"), Some(EXP)).await.text, log);
    assert_eq!(c.get(&format!("/sessions/{id}"), Some(&tok)).await.text, state);

    let (reply_text, task) = first_reply;
    let body = if task["kind"] == "BINS" {
        json!({ "task": task["task"], "decision": 2 })
    } else {
        json!({ "task": task["task"], "row": 1, "choice": "A" })
    };
    let retry = c.send("POST", &format!("/sessions/{id}/choices"), Some(&tok), Some(body), Some("retry-1")).await;
    assert_eq!((retry.status, retry.text), (StatusCode::OK, reply_text));
    assert_eq!(c.get(&format!("/sessions/{id}/events"), Some(EXP)).await.text, log);

    let closed = c.post("/sessions", None, json!({ "subject_id": "LATE" })).await;
    assert_eq!(closed.json()["code"], "run_closed");
    let dup = c.post("/sessions", None, json!({ "subject_id": "DONE" })).await;
    assert_eq!(dup.status, StatusCode::CONFLICT);
    let table = c.get("/runs/LAB1/export/sessions", Some(EXP)).await.text;
    assert_eq!(mplab_core::dataset::load_session_table(&table).unwrap().records.len(), 1);
    let log_file = dir.path().join("sessions").join(format!("{id}.events.jsonl"));
    assert_eq!(std::fs::read_to_string(log_file).unwrap(), log);
}

#[test]
fn config_file_paths_and_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("server.toml");
    std::fs::write(&path, "port = 7000\ndata_dir = \"data\"\n[run]\nlabel = \"LAB9\"\nfee = 4.0\n").unwrap();
    let mut cfg = ServerConfig::load(Some(&path)).unwrap();
    assert_eq!(cfg.data_dir.as_deref(), Some(dir.path().join("data").as_path()));
    assert_eq!(cfg.run.label, "LAB9");
    cfg.apply_env(|k| match k {
        "MPLAB_PORT" => Some("7100".into()),
        "MPLAB_DATA_DIR" => Some("/var/lib/mplab".into()),
        _ => None,
    })
    .unwrap();
    assert_eq!(cfg.port, 7100);
    assert_eq!(cfg.data_dir.unwrap(), std::path::PathBuf::from("/var/lib/mplab"));
}

#[tokio::test]
async fn content_file_replaces_subject_text() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../content/subject_text.toml")
        .replace("Please reconsider row {row}.", "Row {row} needs another look.");
    let path = dir.path().join("text.toml");
    std::fs::write(&path, text).unwrap();
    let mut cfg = config();
    cfg.content_file = Some(path);
    let c = Client::new(&cfg);
    let (id, tok) = c.create("S01").await;
    c.post(&format!("/sessions/{id}/start"), Some(&tok), json!({})).await;
    loop {
        let v = c.get(&format!("/sessions/{id}/task"), Some(&tok)).await.json();
        let path = format!("/sessions/{id}/choices");
        if v["kind"] == "BINS" {
            c.post(&path, Some(&tok), json!({ "task": v["task"], "decision": 1 })).await;
            continue;
        }
        c.post(&path, Some(&tok), json!({ "task": v["task"], "row": 1, "choice": "B" })).await;
        let r = c.post(&path, Some(&tok), json!({ "task": v["task"], "row": 2, "choice": "A" })).await;
        assert!(r.json()["message"].as_str().unwrap().ends_with("Row 2 needs another look."), "{}", r.text);
        break;
    }
}
