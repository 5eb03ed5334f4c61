//! Session tables, questionnaire tables and the canonical JSONL export.
//!
//! Session table (tab separated, `#` lines are comments):
//!
//! ```text
//! # session: A
//! Subject    Task1_Choices    Task2_Choices    Task3_Choices    Task4_Choices    Task5_Choices    Task6_Choices
//! A1    SSSSS / RRRRR    CCCCC / UUUU    0000/1/00000    000/1/000000    CCCCC / UUUUU    SSSSS / RRRRR
//! ```
//!
//! Demographics table: `Subject` followed by the 21 questionnaire columns
//! `A` to `U`.

mod choice;
mod demographics;

pub use choice::{is_single_switch, parse_choice_string, render_choice_string, ChoiceError, ParsedChoice};
pub use demographics::{DemographicRecord, FieldError, FIELD_LETTERS};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

use crate::menu::DesignKind;

/// Design family of tasks 1..=6.
pub const TASK_KINDS: [DesignKind; 6] =
    [DesignKind::Hl, DesignKind::Cvu, DesignKind::Bins, DesignKind::Bins, DesignKind::Cvu, DesignKind::Hl];

pub const SESSION_HEADER: &str =
    "Subject\tTask1_Choices\tTask2_Choices\tTask3_Choices\tTask4_Choices\tTask5_Choices\tTask6_Choices";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate subject id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}, task {task}: {source}")]
    Choice { line: usize, task: usize, source: ChoiceError },
    #[error("line {line}: {source}")]
    Field { line: usize, source: FieldError },
    #[error("line {line}: {msg}")]
    Json { line: usize, msg: String },
    #[error("demographics for unknown subject {0}")]
    UnknownSubject(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One subject's six task responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub session: String,
    /// Choice strings as they appear in the source table.
    pub raw: [String; 6],
    /// Safe count (HL, CvU) or decision number (Bins) for tasks 1..=6.
    pub responses: [u8; 6],
    /// Advisory notes, e.g. strings with other than ten symbols.
    pub anomalies: Vec<String>,
}

impl SubjectRecord {
    /// Parses the six raw strings of one subject.
    pub fn from_raw(subject_id: &str, session: &str, raw: [String; 6]) -> Result<Self, (usize, ChoiceError)> {
        let mut responses = [0u8; 6];
        let mut anomalies = Vec::new();
        for t in 0..6 {
            let p = parse_choice_string(&raw[t], TASK_KINDS[t]).map_err(|e| (t + 1, e))?;
            responses[t] = p.response;
            if let Some(a) = p.anomaly() {
                anomalies.push(format!("Task{}: {a}", t + 1));
            }
        }
        Ok(SubjectRecord {
            subject_id: subject_id.to_string(),
            session: session.to_string(),
            raw,
            responses,
            anomalies,
        })
    }

    /// Record whose raw strings are the canonical rendering of `responses`.
    pub fn from_responses(subject_id: &str, session: &str, responses: [u8; 6]) -> Result<Self, ChoiceError> {
        let mut raw: [String; 6] = Default::default();
        for t in 0..6 {
            raw[t] = render_choice_string(TASK_KINDS[t], responses[t])?;
        }
        Ok(SubjectRecord {
            subject_id: subject_id.to_string(),
            session: session.to_string(),
            raw,
            responses,
            anomalies: Vec::new(),
        })
    }

    pub fn response(&self, task: usize) -> u8 {
        self.responses[task - 1]
    }
}

/// A warning attached to an input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionTable {
    pub session: Option<String>,
    pub records: Vec<SubjectRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

fn split_columns(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split(',').map(str::trim).collect()
    }
}

fn session_comment(line: &str) -> Option<String> {
    let rest = line.strip_prefix('#')?;
    let (k, v) = rest.split_once(':')?;
    (k.trim() == "session").then(|| v.trim().to_string())
}

/// Parses a session table. Lines carrying a header (`Subject ...`) or a
/// comment are skipped; `# session: X` sets the session label, otherwise the
/// first letter of each subject id is used.
pub fn load_session_table(doc: &str) -> Result<SessionTable, IngestError> {
    let mut table = SessionTable::default();
    let mut seen = HashSet::new();
    for (i, raw_line) in doc.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(s) = session_comment(trimmed) {
                table.session = Some(s);
            }
            continue;
        }
        let cols = split_columns(raw_line.trim_end_matches(['\r', '\n']));
        if cols[0].eq_ignore_ascii_case("subject") {
            continue;
        }
        if cols.len() != 7 {
            return Err(IngestError::ColumnCount { line, expected: 7, found: cols.len() });
        }
        let id = cols[0];
        if !seen.insert(id.to_string()) {
            return Err(IngestError::DuplicateId { line, id: id.to_string() });
        }
        let session = table.session.clone().unwrap_or_else(|| id.chars().next().map(String::from).unwrap_or_default());
        let raw: [String; 6] = std::array::from_fn(|t| cols[t + 1].to_string());
        let rec = SubjectRecord::from_raw(id, &session, raw).map_err(|(task, source)| IngestError::Choice {
            line,
            task,
            source,
        })?;
        for a in &rec.anomalies {
            table.diagnostics.push(Diagnostic { line, message: format!("{id} {a}") });
        }
        table.records.push(rec);
    }
    Ok(table)
}

pub fn render_session_table(session: Option<&str>, records: &[SubjectRecord]) -> String {
    let mut out = String::new();
    if let Some(s) = session {
        out.push_str(&format!("# session: {s}\n"));
    }
    out.push_str(SESSION_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.subject_id);
        for s in &r.raw {
            out.push('\t');
            out.push_str(s);
        }
        out.push('\n');
    }
    out
}

/// Parses a demographics table into `(subject id, record)` pairs.
pub fn load_demographics(doc: &str) -> Result<Vec<(String, DemographicRecord)>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw_line) in doc.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols = split_columns(raw_line.trim_end_matches(['\r', '\n']));
        if cols[0].eq_ignore_ascii_case("subject") {
            continue;
        }
        if cols.len() != 22 {
            return Err(IngestError::ColumnCount { line, expected: 22, found: cols.len() });
        }
        let id = cols[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line, id });
        }
        let rec = DemographicRecord::from_columns(&cols[1..]).map_err(|source| IngestError::Field { line, source })?;
        out.push((id, rec));
    }
    Ok(out)
}

pub fn render_demographics(rows: &[(String, DemographicRecord)]) -> String {
    let mut out = String::from("Subject");
    for l in FIELD_LETTERS {
        out.push('\t');
        out.push(l);
    }
    out.push('\n');
    for (id, r) in rows {
        out.push_str(id);
        for c in r.columns() {
            out.push('\t');
            out.push_str(&c);
        }
        out.push('\n');
    }
    out
}

/// Outcome of re-checking one subject's strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub subject_id: String,
    pub passed: bool,
    pub problems: Vec<String>,
}

/// Confirms each string is a safe prefix followed by risky choices (HL,
/// CvU) or carries exactly one decision marker (Bins).
pub fn validate_monotonicity(rec: &SubjectRecord) -> MonotonicityReport {
    let problems: Vec<String> = (0..6)
        .filter_map(|t| parse_choice_string(&rec.raw[t], TASK_KINDS[t]).err().map(|e| format!("Task{}: {e}", t + 1)))
        .collect();
    MonotonicityReport { subject_id: rec.subject_id.clone(), passed: problems.is_empty(), problems }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortMember {
    pub subject: SubjectRecord,
    pub demographics: Option<DemographicRecord>,
}

/// Subjects joined with their questionnaire answers; ids are unique.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cohort {
    members: Vec<CohortMember>,
}

impl Cohort {
    pub fn new(
        subjects: Vec<SubjectRecord>,
        demographics: Vec<(String, DemographicRecord)>,
    ) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for s in &subjects {
            if !seen.insert(s.subject_id.clone()) {
                return Err(IngestError::DuplicateId { line: 0, id: s.subject_id.clone() });
            }
        }
        let mut demo: BTreeMap<String, DemographicRecord> = BTreeMap::new();
        for (id, d) in demographics {
            if !seen.contains(&id) {
                return Err(IngestError::UnknownSubject(id));
            }
            if demo.insert(id.clone(), d).is_some() {
                return Err(IngestError::DuplicateId { line: 0, id });
            }
        }
        let members = subjects
            .into_iter()
            .map(|s| {
                let d = demo.remove(&s.subject_id);
                CohortMember { subject: s, demographics: d }
            })
            .collect();
        Ok(Cohort { members })
    }

    pub fn from_members(members: Vec<CohortMember>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for m in &members {
            if !seen.insert(m.subject.subject_id.clone()) {
                return Err(IngestError::DuplicateId { line: 0, id: m.subject.subject_id.clone() });
            }
        }
        Ok(Cohort { members })
    }

    pub fn members(&self) -> &[CohortMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn subjects(&self) -> impl Iterator<Item = &SubjectRecord> {
        self.members.iter().map(|m| &m.subject)
    }

    /// Responses to task `task` (1..=6) in cohort order.
    pub fn responses(&self, task: usize) -> Vec<u8> {
        self.subjects().map(|s| s.response(task)).collect()
    }

    /// Member counts per session label, in order of first appearance.
    pub fn session_counts(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for s in self.subjects() {
            match out.iter_mut().find(|(k, _)| *k == s.session) {
                Some((_, n)) => *n += 1,
                None => out.push((s.session.clone(), 1)),
            }
        }
        out
    }

    /// Every anomaly note, prefixed with the subject id.
    pub fn anomalies(&self) -> Vec<String> {
        self.subjects().flat_map(|s| s.anomalies.iter().map(move |a| format!("{} {a}", s.subject_id))).collect()
    }
}

const BUNDLED: [(&str, &str, &str); 4] = [
    ("A", include_str!("../../data/session_a.tsv"), include_str!("../../data/demographics_a.tsv")),
    ("B", include_str!("../../data/session_b.tsv"), include_str!("../../data/demographics_b.tsv")),
    ("C", include_str!("../../data/session_c.tsv"), include_str!("../../data/demographics_c.tsv")),
    ("D", include_str!("../../data/session_d.tsv"), include_str!("../../data/demographics_d.tsv")),
];

/// Raw text of the bundled session and demographics tables, by session.
pub fn bundled_files() -> impl Iterator<Item = (&'static str, &'static str, &'static str)> {
    BUNDLED.into_iter()
}

/// The bundled four-session cohort, parsed from the embedded tables.
pub fn bundled_cohort() -> Cohort {
    load_cohort_docs(BUNDLED.iter().map(|(_, s, d)| (*s, Some(*d)))).expect("bundled dataset parses")
}

/// Builds a cohort from pairs of (session table, optional demographics).
pub fn load_cohort_docs<'a>(docs: impl IntoIterator<Item = (&'a str, Option<&'a str>)>) -> Result<Cohort, IngestError> {
    let mut subjects = Vec::new();
    let mut demo = Vec::new();
    for (table, demographics) in docs {
        subjects.extend(load_session_table(table)?.records);
        if let Some(d) = demographics {
            demo.extend(load_demographics(d)?);
        }
    }
    Cohort::new(subjects, demo)
}

/// Loads every `session_*.tsv` in a directory with its matching
/// `demographics_*.tsv` when present.
pub fn load_cohort_dir(dir: &std::path::Path) -> Result<Cohort, IngestError> {
    let io = |path: &std::path::Path, source| IngestError::Io { path: path.display().to_string(), source };
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("session_") && n.ends_with(".tsv"))
        })
        .collect();
    names.sort();
    let mut docs = Vec::new();
    for p in names {
        let table = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let demo_path = p.with_file_name(name.replacen("session_", "demographics_", 1));
        let demo = if demo_path.exists() {
            Some(std::fs::read_to_string(&demo_path).map_err(|e| io(&demo_path, e))?)
        } else {
            None
        };
        docs.push((table, demo));
    }
    load_cohort_docs(docs.iter().map(|(t, d)| (t.as_str(), d.as_deref())))
}

/// One line of the canonical export. Field order is fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub subject_id: String,
    pub session: String,
    pub task1: u8,
    pub task2: u8,
    pub task3: u8,
    pub task4: u8,
    pub task5: u8,
    pub task6: u8,
    pub raw: [String; 6],
    pub anomalies: Vec<String>,
    pub demographics: Option<DemographicRecord>,
}

impl From<&CohortMember> for CanonicalRecord {
    fn from(m: &CohortMember) -> Self {
        let r = &m.subject.responses;
        CanonicalRecord {
            subject_id: m.subject.subject_id.clone(),
            session: m.subject.session.clone(),
            task1: r[0],
            task2: r[1],
            task3: r[2],
            task4: r[3],
            task5: r[4],
            task6: r[5],
            raw: m.subject.raw.clone(),
            anomalies: m.subject.anomalies.clone(),
            demographics: m.demographics.clone(),
        }
    }
}

/// One JSON object per subject per line.
pub fn export_jsonl(cohort: &Cohort) -> String {
    let mut out = String::new();
    for m in cohort.members() {
        out.push_str(&serde_json::to_string(&CanonicalRecord::from(m)).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Reads the canonical export back, re-validating every field.
pub fn import_jsonl(doc: &str) -> Result<Cohort, IngestError> {
    let mut members = Vec::new();
    for (i, l) in doc.lines().enumerate() {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let c: CanonicalRecord = serde_json::from_str(l).map_err(|e| IngestError::Json { line, msg: e.to_string() })?;
        let subject = SubjectRecord::from_raw(&c.subject_id, &c.session, c.raw.clone())
            .map_err(|(task, source)| IngestError::Choice { line, task, source })?;
        let declared = [c.task1, c.task2, c.task3, c.task4, c.task5, c.task6];
        if subject.responses != declared {
            return Err(IngestError::Json { line, msg: "responses disagree with raw strings".into() });
        }
        if let Some(d) = &c.demographics {
            d.validate().map_err(|source| IngestError::Field { line, source })?;
        }
        members.push(CohortMember { subject, demographics: c.demographics });
    }
    Cohort::from_members(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_counts() {
        let c = bundled_cohort();
        assert_eq!(c.len(), 88);
        let counts = c.session_counts();
        assert_eq!(counts, vec![("A".into(), 25), ("B".into(), 24), ("C".into(), 22), ("D".into(), 17)]);
        assert!(c.members().iter().all(|m| m.demographics.is_some()));
    }

    #[test]
    fn bundled_examples() {
        let c = bundled_cohort();
        let get = |id: &str| c.members().iter().find(|m| m.subject.subject_id == id).unwrap();
        assert_eq!(get("A2").subject.response(1), 7);
        assert_eq!(get("A21").subject.response(4), 1);
        assert_eq!(get("A3").subject.response(3), 8);
        let a1 = get("A1");
        assert!(a1.subject.anomalies.iter().any(|a| a.starts_with("Task2")));
        let d = a1.demographics.as_ref().unwrap();
        assert_eq!((d.gender, d.college, d.stated_attitude_general, d.stated_attitude_lottery), (0, 3, 5, 4));
    }

    #[test]
    fn every_bundled_subject_is_monotone() {
        for s in bundled_cohort().subjects() {
            assert!(validate_monotonicity(s).passed, "{}", s.subject_id);
        }
        let mut bad = SubjectRecord::from_responses("X1", "X", [5; 6]).unwrap();
        bad.raw[0] = "SRSSSSSSSS".into();
        assert!(!validate_monotonicity(&bad).passed);
        bad.raw[0] = "SSSSS / RRRRR".into();
        bad.raw[2] = "00/1/0/1/0000".into();
        assert!(!validate_monotonicity(&bad).passed);
    }

    #[test]
    fn table_errors() {
        assert!(load_session_table("").unwrap().records.is_empty());
        let short = format!("{SESSION_HEADER}\nA1\tSS / RR\tCC / UU\t0/1/0\t0/1/0\tCC / UU\n");
        match load_session_table(&short) {
            Err(IngestError::ColumnCount { line: 2, found: 6, .. }) => {}
            other => panic!("{other:?}"),
        }
        let row = "A1\tSS / RR\tCC / UU\t0/1/0\t0/1/0\tCC / UU\tSS / RR";
        let dup = format!("{row}\n{row}\n");
        assert!(matches!(load_session_table(&dup), Err(IngestError::DuplicateId { line: 2, .. })));
        let bad = "A1\tSRS\tCC / UU\t0/1/0\t0/1/0\tCC / UU\tSS / RR";
        assert!(matches!(load_session_table(bad), Err(IngestError::Choice { line: 1, task: 1, .. })));
        let commas = "A1,SS / RR,CC / UU,0/1/0,0/1/0,CC / UU,SS / RR";
        assert_eq!(load_session_table(commas).unwrap().records[0].responses, [2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn demographics_errors() {
        let (_, a_table, a_demo) = bundled_files().next().unwrap();
        assert_eq!(load_session_table(a_table).unwrap().records.len(), 25);
        let rows = load_demographics(a_demo).unwrap();
        assert_eq!(rows.len(), 25);
        let broken = a_demo.replacen("A1\t1996\t0\t", "A1\t1996\t2\t", 1);
        match load_demographics(&broken) {
            Err(IngestError::Field { line: 2, source }) => assert_eq!(source.field(), 'B'),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tables_round_trip() {
        for (label, table, demo) in bundled_files() {
            let t = load_session_table(table).unwrap();
            assert_eq!(render_session_table(Some(label), &t.records), table);
            let d = load_demographics(demo).unwrap();
            assert_eq!(render_demographics(&d), demo);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let c = bundled_cohort();
        let text = export_jsonl(&c);
        assert_eq!(text.lines().count(), 88);
        assert!(text.starts_with("{\"subject_id\":\"A1\",\"session\":\"A\",\"task1\":5,"));
        assert_eq!(import_jsonl(&text).unwrap(), c);
        let tampered = text.replacen("\"task1\":5", "\"task1\":6", 1);
        assert!(import_jsonl(&tampered).is_err());
    }

    #[test]
    fn cohort_rejects_duplicates_and_orphans() {
        let a = SubjectRecord::from_responses("Z1", "Z", [4, 4, 4, 4, 4, 4]).unwrap();
        assert!(Cohort::new(vec![a.clone(), a.clone()], vec![]).is_err());
        let d = bundled_cohort().members()[0].demographics.clone().unwrap();
        assert!(matches!(Cohort::new(vec![a], vec![("Q9".into(), d)]), Err(IngestError::UnknownSubject(_))));
    }
}
