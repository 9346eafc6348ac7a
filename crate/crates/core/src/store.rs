//! Transactional storage, the audit log, and the line-oriented snapshot
//! format.
//!
//! Writers are serialized. A transaction works on a private copy of the
//! current state and only replaces it when the closure succeeds (and, for a
//! file-backed store, once the new snapshot is durably written), so a failed
//! transaction leaves nothing behind. Readers take a cheap `Arc` snapshot.
//!
//! The snapshot stream is UTF-8 text, one JSON object per `\n`-terminated
//! line. The first line is `{"t":"_header","schema_version":1}`; every other
//! line starts with the record type `"t"` and `"id"`, and lines are sorted by
//! `(t, id)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::auth::StaffAccount;
use crate::billing::Bill;
use crate::documents::{Document, DocumentOwner, PathologyReport};
use crate::domain::{Centre, Patient};
use crate::error::{Error, Result};
use crate::ids::*;
use crate::workflow::{waiting, ClinicalRecord, Problem, Procedure, Visit};

pub const SCHEMA_VERSION: u64 = 1;
const HEADER_LINE: &str = r#"{"t":"_header","schema_version":1}"#;

/// Who performed an action: a staff member or the system itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActorRef {
    Staff(StaffId),
    System,
}

impl fmt::Display for ActorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorRef::Staff(id) => write!(f, "{}", id.0),
            ActorRef::System => f.write_str("system"),
        }
    }
}

impl Serialize for ActorRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ActorRef::Staff(id) => s.serialize_u64(id.0),
            ActorRef::System => s.serialize_str("system"),
        }
    }
}

impl<'de> Deserialize<'de> for ActorRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(id) => Ok(ActorRef::Staff(StaffId(id))),
            Raw::Tag(t) if t == "system" => Ok(ActorRef::System),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown actor {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditOutcome {
    Ok,
    Denied,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    #[serde(rename = "type")]
    pub kind: String,
    pub id: u64,
}

impl EntityRef {
    pub fn new(kind: &str, id: u64) -> Self {
        Self {
            kind: kind.to_owned(),
            id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: ActorRef,
    pub action: String,
    pub entity: Option<EntityRef>,
    pub outcome: AuditOutcome,
    pub detail: String,
}

/// An audit entry before it receives its sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEvent {
    pub actor: ActorRef,
    pub action: String,
    pub entity: Option<EntityRef>,
    pub outcome: AuditOutcome,
    pub detail: String,
}

impl AuditEvent {
    pub fn ok(actor: ActorRef, action: &str, entity: Option<EntityRef>) -> Self {
        Self {
            actor,
            action: action.to_owned(),
            entity,
            outcome: AuditOutcome::Ok,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_outcome(mut self, outcome: AuditOutcome) -> Self {
        self.outcome = outcome;
        self
    }
}

/// Every stored domain entity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    next_id: u64,
    pub patients: BTreeMap<PatientId, Patient>,
    pub records: BTreeMap<RecordId, ClinicalRecord>,
    pub visits: BTreeMap<VisitId, Visit>,
    pub problems: BTreeMap<ProblemId, Problem>,
    pub procedures: BTreeMap<ProcedureId, Procedure>,
    pub bills: BTreeMap<BillId, Bill>,
    pub documents: BTreeMap<DocumentId, Arc<Document>>,
    pub reports: BTreeMap<ReportId, PathologyReport>,
    pub staff: BTreeMap<StaffId, StaffAccount>,
    pub centres: BTreeMap<CentreId, Centre>,
    pub waiting: waiting::Queue,
}

impl State {
    pub fn is_empty(&self) -> bool {
        self.entity_count() == 0
    }

    pub fn entity_count(&self) -> usize {
        self.patients.len()
            + self.records.len()
            + self.visits.len()
            + self.problems.len()
            + self.procedures.len()
            + self.bills.len()
            + self.documents.len()
            + self.reports.len()
            + self.staff.len()
            + self.centres.len()
            + self.waiting.len()
    }

    /// Hands out the next store-wide identifier.
    pub fn allocate_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    pub fn record_of_patient(&self, patient: PatientId) -> Option<&ClinicalRecord> {
        self.records.values().find(|r| r.patient_id == patient)
    }

    /// The record a problem belongs to, via its visit.
    pub fn record_of_problem(&self, problem: ProblemId) -> Option<RecordId> {
        let p = self.problems.get(&problem)?;
        self.visits.get(&p.visit_id).map(|v| v.record_id)
    }

    pub fn bill_of_procedure(&self, procedure: ProcedureId) -> Option<&Bill> {
        self.bills.values().find(|b| b.procedure_id == procedure)
    }

    pub fn active_centre(&self) -> Option<&Centre> {
        self.centres.values().find(|c| c.active)
    }

    fn max_id(&self) -> u64 {
        fn top<K: Copy, V>(m: &BTreeMap<K, V>, f: impl Fn(K) -> u64) -> u64 {
            m.keys().next_back().map(|k| f(*k)).unwrap_or(0)
        }
        [
            top(&self.patients, |k| k.0),
            top(&self.records, |k| k.0),
            top(&self.visits, |k| k.0),
            top(&self.problems, |k| k.0),
            top(&self.procedures, |k| k.0),
            top(&self.bills, |k| k.0),
            top(&self.documents, |k| k.0),
            top(&self.reports, |k| k.0),
            top(&self.staff, |k| k.0),
            top(&self.centres, |k| k.0),
            top(&self.waiting, |k| k.0),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }

    /// Verifies that every foreign reference resolves and the one-to-one
    /// relationships hold.
    pub fn check_integrity(&self) -> Result<()> {
        let dangling = |what: String| Err(Error::IntegrityViolation(what));
        let staff_ok = |s: &StaffId| self.staff.contains_key(s);

        let mut record_owners = BTreeSet::new();
        for r in self.records.values() {
            if !self.patients.contains_key(&r.patient_id) {
                return dangling(format!("{} -> {}", r.id, r.patient_id));
            }
            if !record_owners.insert(r.patient_id) {
                return dangling(format!("{} has more than one record", r.patient_id));
            }
            if !staff_ok(&r.created_by) {
                return dangling(format!("{} -> {}", r.id, r.created_by));
            }
        }
        for v in self.visits.values() {
            if !self.records.contains_key(&v.record_id) {
                return dangling(format!("{} -> {}", v.id, v.record_id));
            }
            if !staff_ok(&v.attending) {
                return dangling(format!("{} -> {}", v.id, v.attending));
            }
        }
        for p in self.problems.values() {
            if !self.visits.contains_key(&p.visit_id) {
                return dangling(format!("{} -> {}", p.id, p.visit_id));
            }
        }
        for p in self.procedures.values() {
            if !self.records.contains_key(&p.record_id) {
                return dangling(format!("{} -> {}", p.id, p.record_id));
            }
            if p.problem_ids.is_empty() {
                return dangling(format!("{} covers no problems", p.id));
            }
            for pid in &p.problem_ids {
                match self.record_of_problem(*pid) {
                    None => return dangling(format!("{} -> {}", p.id, pid)),
                    Some(r) if r != p.record_id => {
                        return dangling(format!("{} -> {} of another record", p.id, pid))
                    }
                    Some(_) => {}
                }
            }
            if !staff_ok(&p.requested_by) {
                return dangling(format!("{} -> {}", p.id, p.requested_by));
            }
            if let Some(c) = &p.consent {
                if !staff_ok(&c.witness) {
                    return dangling(format!("{} -> {}", p.id, c.witness));
                }
            }
        }
        let mut billed = BTreeSet::new();
        for b in self.bills.values() {
            if !self.procedures.contains_key(&b.procedure_id) {
                return dangling(format!("{} -> {}", b.id, b.procedure_id));
            }
            if !billed.insert(b.procedure_id) {
                return dangling(format!("{} has more than one bill", b.procedure_id));
            }
        }
        for d in self.documents.values() {
            let ok = match d.owner {
                DocumentOwner::Patient(p) => self.patients.contains_key(&p),
                DocumentOwner::Procedure(p) => self.procedures.contains_key(&p),
                DocumentOwner::Inbox => true,
            };
            if !ok {
                return dangling(format!("{} -> owner {:?}", d.id, d.owner));
            }
        }
        for r in self.reports.values() {
            if !self.documents.contains_key(&r.document_id) {
                return dangling(format!("{} -> {}", r.id, r.document_id));
            }
            if let Some(p) = r.allocated_procedure_id {
                if !self.procedures.contains_key(&p) {
                    return dangling(format!("{} -> {}", r.id, p));
                }
            }
        }
        for e in self.waiting.values() {
            if !self.patients.contains_key(&e.patient_id) {
                return dangling(format!("{} -> {}", e.id, e.patient_id));
            }
        }
        Ok(())
    }
}

/// A write in progress. Dereferences to the private working copy of the
/// state.
pub struct Tx<'a> {
    state: &'a mut State,
    events: Vec<AuditEvent>,
    now: DateTime<Utc>,
}

impl Tx<'_> {
    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub fn audit(&mut self, event: AuditEvent) {
        self.events.push(event);
    }
}

impl std::ops::Deref for Tx<'_> {
    type Target = State;

    fn deref(&self) -> &State {
        self.state
    }
}

impl std::ops::DerefMut for Tx<'_> {
    fn deref_mut(&mut self) -> &mut State {
        self.state
    }
}

struct Committed {
    state: Arc<State>,
    audit: Arc<Vec<AuditEntry>>,
}

/// The clinic datastore.
pub struct Store {
    committed: RwLock<Committed>,
    writer: Mutex<()>,
    path: Option<PathBuf>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish_non_exhaustive()
    }
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            committed: RwLock::new(Committed {
                state: Arc::new(State::default()),
                audit: Arc::new(Vec::new()),
            }),
            writer: Mutex::new(()),
            path: None,
        }
    }

    /// Opens a file-backed store, loading the snapshot at `path` if present.
    /// Every commit rewrites the file atomically.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut store = Self::in_memory();
        if path.exists() {
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
            let (state, audit) = parse_snapshot(&text)?;
            store.committed = RwLock::new(Committed {
                state: Arc::new(state),
                audit: Arc::new(audit),
            });
        }
        store.path = Some(path);
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> Arc<State> {
        Arc::clone(&self.committed.read().expect("store lock poisoned").state)
    }

    pub fn audit_log(&self) -> Arc<Vec<AuditEntry>> {
        Arc::clone(&self.committed.read().expect("store lock poisoned").audit)
    }

    pub fn audit_len(&self) -> usize {
        self.committed.read().expect("store lock poisoned").audit.len()
    }

    /// Runs `f` against a working copy and publishes the result only if it
    /// succeeds. Audit events raised through [`Tx::audit`] are appended in
    /// the same commit.
    pub fn transact<T>(&self, now: DateTime<Utc>, f: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<T> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let mut working = (*self.snapshot()).clone();
        let mut tx = Tx {
            state: &mut working,
            events: Vec::new(),
            now,
        };
        let value = f(&mut tx)?;
        let events = std::mem::take(&mut tx.events);
        self.publish(Some(Arc::new(working)), events, now)?;
        Ok(value)
    }

    /// Appends audit entries without touching domain state.
    pub fn append_audit(&self, now: DateTime<Utc>, events: Vec<AuditEvent>) -> Result<()> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        self.publish(None, events, now)
    }

    // Caller holds the writer lock.
    fn publish(&self, state: Option<Arc<State>>, events: Vec<AuditEvent>, now: DateTime<Utc>) -> Result<()> {
        let (current, audit) = {
            let c = self.committed.read().expect("store lock poisoned");
            (Arc::clone(&c.state), Arc::clone(&c.audit))
        };
        let base = audit.len() as u64;
        let entries: Vec<AuditEntry> = events
            .into_iter()
            .enumerate()
            .map(|(i, e)| AuditEntry {
                seq: base + i as u64 + 1,
                at: now,
                actor: e.actor,
                action: e.action,
                entity: e.entity,
                outcome: e.outcome,
                detail: e.detail,
            })
            .collect();
        let state = state.unwrap_or(current);
        if let Some(path) = &self.path {
            write_atomically(path, &render_snapshot(&state, audit.iter().chain(&entries)))?;
        }
        drop(audit);
        let mut c = self.committed.write().expect("store lock poisoned");
        c.state = state;
        Arc::make_mut(&mut c.audit).extend(entries);
        Ok(())
    }

    /// Serializes the whole store.
    pub fn export(&self) -> String {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let c = self.committed.read().expect("store lock poisoned");
        render_snapshot(&c.state, c.audit.iter())
    }

    /// Loads a snapshot stream into this (empty) store. Nothing is committed
    /// unless the whole stream parses and passes the integrity check.
    pub fn import(&self, stream: &str) -> Result<usize> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        {
            let c = self.committed.read().expect("store lock poisoned");
            if !c.state.is_empty() || !c.audit.is_empty() {
                return Err(Error::NotEmpty);
            }
        }
        let (state, audit) = parse_snapshot(stream)?;
        let count = state.entity_count() + audit.len();
        if let Some(path) = &self.path {
            write_atomically(path, &render_snapshot(&state, audit.iter()))?;
        }
        let mut c = self.committed.write().expect("store lock poisoned");
        c.state = Arc::new(state);
        c.audit = Arc::new(audit);
        Ok(count)
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Storage(format!("{}: {e}", path.display()));
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

fn line_for<T: Serialize>(t: &str, id: u64, entity: &T) -> String {
    let body = serde_json::to_value(entity).expect("entities serialize to JSON");
    let mut obj = Map::new();
    obj.insert("t".into(), Value::from(t));
    obj.insert("id".into(), Value::from(id));
    if let Value::Object(fields) = body {
        for (k, v) in fields {
            if k != "id" {
                obj.insert(k, v);
            }
        }
    }
    serde_json::to_string(&Value::Object(obj)).expect("JSON value serializes")
}

/// Renders the canonical snapshot stream for a state and audit log.
pub fn render_snapshot<'a>(state: &State, audit: impl IntoIterator<Item = &'a AuditEntry>) -> String {
    let mut lines: Vec<(&'static str, u64, String)> = Vec::with_capacity(state.entity_count());
    macro_rules! emit {
        ($t:literal, $map:expr) => {
            for (k, v) in $map.iter() {
                lines.push(($t, k.0, line_for($t, k.0, v)));
            }
        };
    }
    emit!("bill", state.bills);
    emit!("centre", state.centres);
    emit!("document", state.documents);
    emit!("pathology_report", state.reports);
    emit!("patient", state.patients);
    emit!("problem", state.problems);
    emit!("procedure", state.procedures);
    emit!("record", state.records);
    emit!("staff", state.staff);
    emit!("visit", state.visits);
    emit!("waiting_entry", state.waiting);
    for a in audit {
        lines.push(("audit", a.seq, line_for("audit", a.seq, a)));
    }
    lines.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut out = String::with_capacity(lines.iter().map(|l| l.2.len() + 1).sum::<usize>() + 40);
    out.push_str(HEADER_LINE);
    out.push('\n');
    for (_, _, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn decode<T: DeserializeOwned>(line_no: usize, obj: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(obj))
        .map_err(|e| Error::SchemaMismatch(format!("line {line_no}: {e}")))
}

fn insert_unique<K: Ord + Copy + fmt::Display, V>(map: &mut BTreeMap<K, V>, key: K, value: V) -> Result<()> {
    if map.insert(key, value).is_some() {
        return Err(Error::IntegrityViolation(format!("{key} appears twice")));
    }
    Ok(())
}

/// Parses and validates a snapshot stream.
pub fn parse_snapshot(stream: &str) -> Result<(State, Vec<AuditEntry>)> {
    let mut lines = stream.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::SchemaMismatch("missing header".into()))?
        .1;
    let header: Value = serde_json::from_str(header)
        .map_err(|e| Error::SchemaMismatch(format!("header: {e}")))?;
    if header.get("t").and_then(Value::as_str) != Some("_header") {
        return Err(Error::SchemaMismatch("first line is not a header".into()));
    }
    match header.get("schema_version").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        other => {
            return Err(Error::SchemaMismatch(format!(
                "unsupported schema_version {}",
                other.map(|v| v.to_string()).unwrap_or_else(|| "(missing)".into())
            )))
        }
    }

    let mut state = State::default();
    let mut audit = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| Error::SchemaMismatch(format!("line {line_no}: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(Error::SchemaMismatch(format!("line {line_no}: not an object")));
        };
        let t = match obj.remove("t") {
            Some(Value::String(t)) => t,
            _ => return Err(Error::SchemaMismatch(format!("line {line_no}: missing \"t\""))),
        };
        match t.as_str() {
            "bill" => {
                let v: Bill = decode(line_no, obj)?;
                insert_unique(&mut state.bills, v.id, v)?;
            }
            "centre" => {
                let v: Centre = decode(line_no, obj)?;
                insert_unique(&mut state.centres, v.id, v)?;
            }
            "document" => {
                let v: Document = decode(line_no, obj)?;
                insert_unique(&mut state.documents, v.id, Arc::new(v))?;
            }
            "pathology_report" => {
                let v: PathologyReport = decode(line_no, obj)?;
                insert_unique(&mut state.reports, v.id, v)?;
            }
            "patient" => {
                let v: Patient = decode(line_no, obj)?;
                insert_unique(&mut state.patients, v.id, v)?;
            }
            "problem" => {
                let v: Problem = decode(line_no, obj)?;
                insert_unique(&mut state.problems, v.id, v)?;
            }
            "procedure" => {
                let v: Procedure = decode(line_no, obj)?;
                insert_unique(&mut state.procedures, v.id, v)?;
            }
            "record" => {
                let v: ClinicalRecord = decode(line_no, obj)?;
                insert_unique(&mut state.records, v.id, v)?;
            }
            "staff" => {
                let v: StaffAccount = decode(line_no, obj)?;
                insert_unique(&mut state.staff, v.id, v)?;
            }
            "visit" => {
                let v: Visit = decode(line_no, obj)?;
                insert_unique(&mut state.visits, v.id, v)?;
            }
            "waiting_entry" => {
                let v = decode::<crate::workflow::WaitingListEntry>(line_no, obj)?;
                insert_unique(&mut state.waiting, v.id, v)?;
            }
            "audit" => {
                obj.remove("id");
                let v: AuditEntry = decode(line_no, obj)?;
                audit.push(v);
            }
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "line {line_no}: unknown record type {other:?}"
                )))
            }
        }
    }

    audit.sort_by_key(|a| a.seq);
    for (i, a) in audit.iter().enumerate() {
        if a.seq != i as u64 + 1 {
            return Err(Error::IntegrityViolation(format!(
                "audit sequence has a gap at {}",
                i + 1
            )));
        }
    }
    // ids are store-wide, so no two entities may share one
    let mut seen = BTreeSet::new();
    let all_ids = state
        .patients
        .keys()
        .map(|k| k.0)
        .chain(state.records.keys().map(|k| k.0))
        .chain(state.visits.keys().map(|k| k.0))
        .chain(state.problems.keys().map(|k| k.0))
        .chain(state.procedures.keys().map(|k| k.0))
        .chain(state.bills.keys().map(|k| k.0))
        .chain(state.documents.keys().map(|k| k.0))
        .chain(state.reports.keys().map(|k| k.0))
        .chain(state.staff.keys().map(|k| k.0))
        .chain(state.centres.keys().map(|k| k.0))
        .chain(state.waiting.keys().map(|k| k.0));
    for id in all_ids {
        if !seen.insert(id) {
            return Err(Error::IntegrityViolation(format!("id {id} used twice")));
        }
    }
    state.check_integrity()?;
    state.next_id = state.max_id();
    Ok((state, audit))
}
