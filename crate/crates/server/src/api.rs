//! HTTP routes. Every handler is a thin adapter over the session engine and
//! the analysis functions; endpoint schemas are documented in `API.md`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use mplab_core::analysis::{cohort_summary, run_paired_tests};
use mplab_core::dataset::{export_jsonl, DemographicRecord};
use mplab_core::menu::{Choice, DesignKind, MenuDomain};
use mplab_core::session::{events_to_jsonl, EventPayload, PaymentRolls, SessionError, SessionState, Stage};

use crate::content::fill;
use crate::error::ApiError;
use crate::state::{AppState, Role, Slot};
use crate::store::IdempotentReply;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/task", get(get_task))
        .route("/sessions/{id}/choices", post(submit_choice))
        .route("/sessions/{id}/questionnaire", post(submit_questionnaire))
        .route("/sessions/{id}/reveal", get(get_reveal))
        .route("/sessions/{id}/payment", post(finalize_payment))
        .route("/sessions/{id}/paid", post(mark_paid))
        .route("/sessions/{id}/events", get(get_events))
        .route("/runs/{run}/dashboard", get(dashboard))
        .route("/runs/{run}/close", post(close_run))
        .route("/runs/{run}/export/{file}", get(export))
        .route("/runs/{run}/analysis", get(analysis))
        .with_state(state)
}

pub fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Instructions => "INSTRUCTIONS",
        Stage::Choosing => "CHOOSING",
        Stage::Questionnaire => "QUESTIONNAIRE",
        Stage::Reveal => "REVEAL",
        Stage::Paid => "PAID",
    }
}

/// Subject endpoint that accepts input in a stage.
pub fn next_step(stage: Stage) -> Option<&'static str> {
    match stage {
        Stage::Instructions => Some("start"),
        Stage::Choosing => Some("task"),
        Stage::Questionnaire => Some("questionnaire"),
        Stage::Reveal | Stage::Paid => Some("reveal"),
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

/// Subjects may only touch their own session; the experimenter any.
fn session_access(st: &AppState, headers: &HeaderMap, id: &str) -> ApiResult<Role> {
    let role = st.authenticate(bearer(headers))?;
    match &role {
        Role::Subject(own) if own != id => Err(ApiError::Forbidden("token belongs to another session")),
        _ => Ok(role),
    }
}

fn experimenter(st: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    match st.authenticate(bearer(headers))? {
        Role::Experimenter => Ok(()),
        Role::Subject(_) => Err(ApiError::Forbidden("experimenter role required")),
    }
}

fn check_run(st: &AppState, run: &str) -> ApiResult<()> {
    if run == st.label {
        Ok(())
    } else {
        Err(ApiError::NotFound(format!("run {run}")))
    }
}

/// Runs `f` under the session lock and persists whatever events it added,
/// including logged rejections.
fn with_slot<T>(st: &AppState, id: &str, f: impl FnOnce(&mut Slot) -> ApiResult<T>) -> ApiResult<T> {
    let slot = st.slot(id)?;
    let mut guard = slot.lock().expect("slot lock");
    let out = f(&mut guard);
    guard.flush(&st.store)?;
    out
}

fn read_slot<T>(st: &AppState, id: &str, f: impl FnOnce(&Slot) -> ApiResult<T>) -> ApiResult<T> {
    let slot = st.slot(id)?;
    let guard = slot.lock().expect("slot lock");
    f(&guard)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Invalid {
        code: "invalid_body",
        message: e.to_string(),
        field: None,
    })
}

fn money(x: f64) -> String {
    format!("{x:.2}")
}

fn screen(st: &AppState, s: &SessionState) -> Value {
    let c = &st.content;
    match s.stage {
        Stage::Instructions => json!({
            "kind": "instructions",
            "text": fill(&c.instructions, &[("fee", money(st.experiment.fee))]),
        }),
        Stage::Choosing => json!({ "kind": "task", "position": s.position + 1 }),
        Stage::Questionnaire if s.questionnaire.is_none() => {
            json!({ "kind": "questionnaire", "text": fill(&c.questionnaire, &[]) })
        }
        Stage::Questionnaire => json!({ "kind": "awaiting_payment", "text": fill(&c.awaiting_payment, &[]) }),
        Stage::Reveal | Stage::Paid => json!({ "kind": "reveal", "text": reveal_text(st, s) }),
    }
}

fn reveal_text(st: &AppState, s: &SessionState) -> String {
    s.payout.as_ref().map_or_else(String::new, |p| {
        fill(
            &st.content.reveal,
            &[
                ("task", p.selected_task.to_string()),
                ("payout", money(p.payout)),
                ("fee", money(p.fee)),
                ("total", money(p.total)),
            ],
        )
    })
}

/// Session overview. Payment fields appear only from REVEAL on.
fn session_body(st: &AppState, slot: &Slot) -> Value {
    let s = slot.session.state();
    let mut body = json!({
        "session_id": slot.meta.session_id,
        "subject_id": s.subject_id,
        "stage": stage_name(s.stage),
        "tasks_completed": s.responses.iter().filter(|r| r.is_some()).count(),
        "tasks_total": 6,
        "screen": screen(st, s),
    });
    if s.stage >= Stage::Reveal {
        body["payout"] = json!(s.payout);
    }
    body
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    subject_id: String,
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: CreateBody = parse_body(&body)?;
    let subject = req.subject_id.trim();
    if subject.is_empty() || subject.len() > 64 || subject.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(ApiError::Invalid {
            code: "invalid_subject_id",
            message: "subject id must be 1-64 characters without spaces".into(),
            field: Some("subject_id".into()),
        });
    }
    let created = st.create_session(subject)?;
    let mut out = {
        let guard = created.slot.lock().expect("slot lock");
        session_body(&st, &guard)
    };
    out["token"] = json!(created.token);
    tracing::info!(session = %created.session_id, subject, "session created");
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_session(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    session_access(&st, &headers, &id)?;
    read_slot(&st, &id, |slot| Ok(Json(session_body(&st, slot))))
}

async fn start(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    session_access(&st, &headers, &id)?;
    with_slot(&st, &id, |slot| {
        slot.session.start().map_err(|e| ApiError::session(e, &st.content))?;
        Ok(Json(session_body(&st, slot)))
    })
}

fn task_text(st: &AppState, kind: DesignKind, domain: MenuDomain, endowment: Option<f64>, sell: Option<f64>) -> String {
    let c = &st.content;
    let base = if kind == DesignKind::Bins { &c.bins_task } else { &c.payoff_task };
    let mut text = fill(base, &[]);
    if domain == MenuDomain::Price {
        let vars = [
            ("endowment", money(endowment.unwrap_or(st.experiment.endowment))),
            ("sell_price", money(sell.unwrap_or(1.0))),
        ];
        text = format!("{}\n{}", fill(&c.price_task, &vars), text);
    }
    text
}

async fn get_task(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    session_access(&st, &headers, &id)?;
    read_slot(&st, &id, |slot| {
        let view = slot.session.current_view().map_err(|e| ApiError::session(e, &st.content))?;
        let text = task_text(&st, view.kind, view.domain, view.endowment, view.sell_price);
        let mut body = json!(view);
        body["tasks_total"] = json!(6);
        body["text"] = json!(text);
        Ok(Json(body))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceBody {
    task: u8,
    #[serde(default)]
    row: Option<usize>,
    #[serde(default)]
    choice: Option<Choice>,
    #[serde(default)]
    decision: Option<u8>,
}

fn apply_choice(st: &AppState, slot: &mut Slot, req: &ChoiceBody) -> ApiResult<Value> {
    let s = &mut slot.session;
    let err = |e: SessionError| ApiError::session(e, &st.content);
    let (row, next_row) = match (req.row, req.choice, req.decision) {
        (Some(row), Some(choice), None) => (Some(row), s.submit_choice(req.task, row, choice).map_err(err)?),
        (None, None, Some(d)) => {
            s.submit_decision(req.task, d).map_err(err)?;
            (None, None)
        }
        _ => {
            return Err(ApiError::Invalid {
                code: "invalid_body",
                message: "send either row and choice, or decision".into(),
                field: None,
            })
        }
    };
    let state = s.state();
    Ok(json!({
        "accepted": true,
        "task": req.task,
        "row": row,
        "next_row": next_row,
        "task_complete": next_row.is_none(),
        "stage": stage_name(state.stage),
        "tasks_completed": state.responses.iter().filter(|r| r.is_some()).count(),
    }))
}

async fn submit_choice(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    session_access(&st, &headers, &id)?;
    let key = headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string);
    let request_sha256 = crate::state::sha256_hex(&body);
    with_slot(&st, &id, |slot| {
        if let Some(k) = &key {
            if let Some(prev) = slot.replies.get(k) {
                if prev.request_sha256 != request_sha256 {
                    return Err(ApiError::Invalid {
                        code: "idempotency_key_reused",
                        message: "idempotency key already used for a different request".into(),
                        field: None,
                    });
                }
                let status = StatusCode::from_u16(prev.status).unwrap_or(StatusCode::OK);
                return Ok((status, Json(prev.body.clone())).into_response());
            }
        }
        let outcome = parse_body::<ChoiceBody>(&body).and_then(|req| apply_choice(&st, slot, &req));
        let (status, value) = match outcome {
            Ok(v) => (StatusCode::OK, v),
            Err(e) if e.status().is_server_error() => return Err(e),
            Err(e) => (e.status(), json!(e.body())),
        };
        if let Some(k) = key {
            let reply =
                IdempotentReply { key: k.clone(), request_sha256, status: status.as_u16(), body: value.clone() };
            st.store.append_reply(&slot.meta.session_id, &reply)?;
            slot.replies.insert(k, reply);
        }
        Ok((status, Json(value)).into_response())
    })
}

fn field_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

async fn submit_questionnaire(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    session_access(&st, &headers, &id)?;
    let answers: BTreeMap<String, Value> = parse_body(&body)?;
    let record =
        DemographicRecord::from_fields(|c| answers.get(&c.to_string()).and_then(field_text)).map_err(|source| {
            ApiError::session(SessionError::Questionnaire { field: source.field(), source }, &st.content)
        })?;
    with_slot(&st, &id, |slot| {
        slot.session.capture_questionnaire(record).map_err(|e| ApiError::session(e, &st.content))?;
        Ok(Json(session_body(&st, slot)))
    })
}

async fn get_reveal(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    session_access(&st, &headers, &id)?;
    read_slot(&st, &id, |slot| {
        let s = slot.session.state();
        let payout = match (&s.payout, s.stage >= Stage::Reveal) {
            (Some(p), true) => p,
            _ => return Err(ApiError::session(SessionError::WrongStage(s.stage), &st.content)),
        };
        let mut body = json!(payout);
        body["stage"] = json!(stage_name(s.stage));
        body["text"] = json!(reveal_text(&st, s));
        Ok(Json(body))
    })
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PaymentBody {
    #[serde(default)]
    rolls: Option<PaymentRolls>,
}

async fn finalize_payment(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    experimenter(&st, &headers)?;
    let req: PaymentBody =
        if body.iter().all(u8::is_ascii_whitespace) { PaymentBody::default() } else { parse_body(&body)? };
    with_slot(&st, &id, |slot| {
        let result = slot.session.finalize_payment(req.rolls).map_err(|e| ApiError::session(e, &st.content))?;
        tracing::info!(session = %id, total = result.total, "payment finalized");
        Ok(Json(json!(result)))
    })
}

async fn mark_paid(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    experimenter(&st, &headers)?;
    with_slot(&st, &id, |slot| {
        slot.session.mark_paid().map_err(|e| ApiError::session(e, &st.content))?;
        Ok(Json(session_body(&st, slot)))
    })
}

const NDJSON: &str = "application/x-ndjson";
const TEXT: &str = "text/plain; charset=utf-8";

async fn get_events(State(st): State<Shared>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    experimenter(&st, &headers)?;
    read_slot(&st, &id, |slot| {
        Ok(([(header::CONTENT_TYPE, NDJSON)], events_to_jsonl(slot.session.events())).into_response())
    })
}

fn dashboard_row(slot: &Slot) -> Value {
    let s = slot.session.state();
    let mut errors: BTreeMap<&str, usize> = BTreeMap::new();
    let mut manual_payment = false;
    for e in slot.session.events() {
        match &e.payload {
            EventPayload::ErrorShown { code, .. } => *errors.entry(code.as_str()).or_default() += 1,
            EventPayload::PaymentFinalized { manual, .. } => manual_payment = *manual,
            _ => {}
        }
    }
    let total_errors: usize = errors.values().sum();
    let mut flags = Vec::new();
    if errors.contains_key("irrational_switching") {
        flags.push("switch_attempts");
    }
    if total_errors >= 5 {
        flags.push("many_errors");
    }
    if s.stage == Stage::Questionnaire && s.questionnaire.is_some() {
        flags.push("awaiting_payment");
    }
    if s.stage == Stage::Reveal {
        flags.push("awaiting_cash");
    }
    if manual_payment {
        flags.push("manual_rolls");
    }
    let current = s.current_task();
    json!({
        "session_id": slot.meta.session_id,
        "subject_id": s.subject_id,
        "stage": stage_name(s.stage),
        "tasks_completed": s.responses.iter().filter(|r| r.is_some()).count(),
        "current_task": current,
        "rows_answered": current.map(|t| s.choices[t as usize - 1].len()),
        "questionnaire_submitted": s.questionnaire.is_some(),
        "total": s.payout.as_ref().map(|p| p.total),
        "errors": errors,
        "flags": flags,
        "events": slot.session.events().len(),
    })
}

async fn dashboard(State(st): State<Shared>, Path(run): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    experimenter(&st, &headers)?;
    check_run(&st, &run)?;
    let reg = st.registry.read().expect("registry lock");
    let rows: Vec<Value> = reg.sessions.values().map(|slot| dashboard_row(&slot.lock().expect("slot lock"))).collect();
    let paid = rows.iter().filter(|r| r["stage"] == "PAID").count();
    Ok(Json(json!({
        "run": st.label,
        "closed": reg.closed,
        "capacity": st.capacity,
        "die_mode": st.experiment.die_mode,
        "session_count": rows.len(),
        "paid_count": paid,
        "sessions": rows,
    })))
}

async fn close_run(State(st): State<Shared>, Path(run): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    experimenter(&st, &headers)?;
    check_run(&st, &run)?;
    st.close_run()?;
    Ok(Json(json!({ "run": st.label, "closed": true })))
}

async fn export(
    State(st): State<Shared>,
    Path((run, file)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    experimenter(&st, &headers)?;
    check_run(&st, &run)?;
    let snapshot = st.snapshot_run()?;
    let run_err = |e| ApiError::run(e, &st.content);
    let (ctype, doc) = match file.as_str() {
        "sessions" => (TEXT, snapshot.export_cohort().map_err(run_err)?.0),
        "demographics" => (TEXT, snapshot.export_cohort().map_err(run_err)?.1),
        "jsonl" => (NDJSON, export_jsonl(&snapshot.paid_cohort().map_err(run_err)?)),
        other => return Err(ApiError::NotFound(format!("export {other}"))),
    };
    Ok(([(header::CONTENT_TYPE, ctype)], doc).into_response())
}

async fn analysis(State(st): State<Shared>, Path(run): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    experimenter(&st, &headers)?;
    check_run(&st, &run)?;
    let cohort = st.snapshot_run()?.paid_cohort().map_err(|e| ApiError::run(e, &st.content))?;
    let unavailable =
        |e: mplab_core::AnalysisError| ApiError::Conflict { code: "analysis_unavailable", message: e.to_string() };
    let summary = cohort_summary(&cohort).map_err(unavailable)?;
    let tests = run_paired_tests(&cohort).map_err(unavailable)?;
    Ok(Json(json!({ "n": cohort.len(), "summary": summary, "tests": tests })))
}
