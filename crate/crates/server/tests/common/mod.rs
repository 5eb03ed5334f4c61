#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use mplab_core::dataset::{bundled_files, load_demographics};
use mplab_server::{App, ServerConfig};

pub const EXP: &str = "experimenter-secret";

pub fn config() -> ServerConfig {
    let mut cfg = ServerConfig::from_toml("[run]\nlabel = \"LAB1\"\nseed = 11\nlogical_clock = true\n").unwrap();
    cfg.experimenter_token = Some(EXP.into());
    cfg
}

pub struct Reply {
    pub status: StatusCode,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

pub struct Client {
    pub app: App,
}

impl Client {
    pub fn new(cfg: &ServerConfig) -> Self {
        Client { app: App::new(cfg).unwrap() }
    }

    pub async fn send(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
        key: Option<&str>,
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        if let Some(k) = key {
            req = req.header("idempotency-key", k);
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.router().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, text: String::from_utf8(bytes.to_vec()).unwrap() }
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> Reply {
        self.send("GET", path, token, None, None).await
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> Reply {
        self.send("POST", path, token, Some(body), None).await
    }

    /// Returns (session id, subject token).
    pub async fn create(&self, subject: &str) -> (String, String) {
        let r = self.post("/sessions", None, json!({ "subject_id": subject })).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        let v = r.json();
        (v["session_id"].as_str().unwrap().into(), v["token"].as_str().unwrap().into())
    }

    /// Answers every task: safe count (or decision) per task number.
    pub async fn answer_all(&self, id: &str, token: &str, responses: [u8; 6]) {
        let r = self.post(&format!("/sessions/{id}/start"), Some(token), json!({})).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        loop {
            let t = self.get(&format!("/sessions/{id}/task"), Some(token)).await;
            if t.status != StatusCode::OK {
                break;
            }
            let v = t.json();
            let task = v["task"].as_u64().unwrap() as u8;
            let n = responses[task as usize - 1];
            if v["kind"] == "BINS" {
                let r = self
                    .post(&format!("/sessions/{id}/choices"), Some(token), json!({ "task": task, "decision": n }))
                    .await;
                assert_eq!(r.status, StatusCode::OK, "{}", r.text);
            } else {
                for row in 1..=10u8 {
                    let c = if row <= n { "A" } else { "B" };
                    let body = json!({ "task": task, "row": row, "choice": c });
                    let r = self.post(&format!("/sessions/{id}/choices"), Some(token), body).await;
                    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
                }
            }
        }
    }

    pub async fn questionnaire(&self, id: &str, token: &str) -> Reply {
        self.post(&format!("/sessions/{id}/questionnaire"), Some(token), answers()).await
    }

    /// Runs a session all the way to PAID with seeded rolls.
    pub async fn full_session(&self, subject: &str, responses: [u8; 6]) -> (String, String) {
        let (id, tok) = self.create(subject).await;
        self.answer_all(&id, &tok, responses).await;
        assert_eq!(self.questionnaire(&id, &tok).await.status, StatusCode::OK);
        let r = self.post(&format!("/sessions/{id}/payment"), Some(EXP), json!({})).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        let r = self.post(&format!("/sessions/{id}/paid"), Some(EXP), json!({})).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        (id, tok)
    }
}

/// A valid questionnaire as a letter-keyed map.
pub fn answers() -> Value {
    let (_, _, demo) = bundled_files().next().unwrap();
    serde_json::to_value(load_demographics(demo).unwrap().remove(0).1).unwrap()
}
