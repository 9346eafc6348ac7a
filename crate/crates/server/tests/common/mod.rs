#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, TimeZone, Utc};
use http_body_util::BodyExt;
use scis_core::clinic::{NewProblem, NewProcedure, NewStaff};
use scis_core::documents::{DocumentKey, PathologyEnvelope};
use scis_core::domain::{BodyView, PatientInput, Region, Sex};
use scis_core::ids::{PatientId, ProblemId, ProcedureId, RecordId, StaffId, VisitId};
use scis_core::workflow::MedicalHistory;
use scis_core::{Clinic, ClinicConfig, ManualClock, Role, Store};
use scis_server::SESSION_HEADER;
use serde_json::Value;
use tower::ServiceExt;

pub const KEY_HEX: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";
pub const PASSWORD: &str = "correct horse";

pub fn start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

pub fn config() -> ClinicConfig {
    ClinicConfig {
        encryption_key: Some(DocumentKey::from_hex(KEY_HEX).unwrap()),
        ..ClinicConfig::default()
    }
}

pub const ACCOUNTS: [(Role, &str); 5] = [
    (Role::Administrator, "admin"),
    (Role::Manager, "manager"),
    (Role::Physician, "physician"),
    (Role::Nurse, "nurse"),
    (Role::Receptionist, "reception"),
];

/// A clinic with one logged-in account per role.
pub struct Fixture {
    pub clinic: Arc<Clinic>,
    pub clock: Arc<ManualClock>,
    pub tokens: HashMap<Role, String>,
    pub ids: HashMap<Role, StaffId>,
}

impl Fixture {
    pub fn new() -> Self {
        Self::on_store(Store::in_memory())
    }

    pub fn on_store(store: Store) -> Self {
        let clock = Arc::new(ManualClock::new(start()));
        let clinic = Clinic::new(store, config(), clock.clone()).unwrap();
        let admin = clinic.bootstrap_admin("admin", PASSWORD, "ada", "admin").unwrap();
        let admin_token = clinic.login("admin", PASSWORD).unwrap().token;
        let mut tokens = HashMap::from([(Role::Administrator, admin_token.clone())]);
        let mut ids = HashMap::from([(Role::Administrator, admin)]);
        for (role, user) in &ACCOUNTS[1..] {
            let details = NewStaff {
                username: (*user).into(),
                role: *role,
                given: (*user).into(),
                family: "staff".into(),
                contact: String::new(),
            };
            let id = clinic.create_staff_account(&admin_token, &details, PASSWORD).unwrap();
            ids.insert(*role, id);
            tokens.insert(*role, clinic.login(user, PASSWORD).unwrap().token);
        }
        Self {
            clinic: Arc::new(clinic),
            clock,
            tokens,
            ids,
        }
    }

    pub fn app(&self) -> Router {
        scis_server::router(Arc::clone(&self.clinic))
    }

    pub fn token(&self, role: Role) -> &str {
        &self.tokens[&role]
    }

    pub fn doc(&self) -> &str {
        self.token(Role::Physician)
    }

    pub fn patient(&self, given: &str, family: &str, dob: &str) -> PatientId {
        self.clinic
            .create_patient(self.token(Role::Receptionist), &patient_input(given, family, dob), true)
            .unwrap()
    }

    pub fn record(&self, patient: PatientId) -> RecordId {
        self.clinic
            .create_record(self.doc(), patient, &MedicalHistory::default())
            .unwrap()
    }

    pub fn visit(&self, record: RecordId, at: &str) -> VisitId {
        self.clinic.create_visit(self.doc(), record, at).unwrap()
    }

    pub fn problem(&self, visit: VisitId, region: Region, size_mm: i64) -> ProblemId {
        let p = NewProblem {
            view: BodyView::Front,
            region,
            x: 0.5,
            y: 0.25,
            description: "lesion".into(),
            size_mm,
        };
        self.clinic.create_problem(self.doc(), visit, &p).unwrap()
    }

    /// A patient with a record, one visit and one CHEST lesion.
    pub fn lesion(&self, family: &str) -> (PatientId, ProblemId) {
        let patient = self.patient("pat", family, "1970-05-05");
        let record = self.record(patient);
        let visit = self.visit(record, "2024-02-01T10:00:00Z");
        (patient, self.problem(visit, Region::Chest, 5))
    }

    pub fn procedure(&self, problems: &[ProblemId], kind: &str, pathology: bool) -> ProcedureId {
        let req = NewProcedure {
            problem_ids: problems.to_vec(),
            kind: kind.into(),
            clinical_details: "clinical notes".into(),
            pathology_required: pathology,
        };
        self.clinic.insert_procedure(self.doc(), &req).unwrap()
    }

    /// Drives a procedure to DETAILED.
    pub fn detailed(&self, problems: &[ProblemId], kind: &str, pathology: bool) -> ProcedureId {
        let id = self.procedure(problems, kind, pathology);
        self.clinic.record_consent(self.doc(), id).unwrap();
        self.clinic.record_procedure_details(self.doc(), id, "done under local").unwrap();
        id
    }
}

pub fn patient_input(given: &str, family: &str, dob: &str) -> PatientInput {
    PatientInput {
        given: given.into(),
        family: family.into(),
        dob: dob.into(),
        sex: Sex::X,
        address: "1 Main St".into(),
        phone: "0400 000 000".into(),
        email: None,
        external_ref: None,
    }
}

pub fn envelope(lab_ref: &str, received_at: &str, body: &[u8]) -> PathologyEnvelope {
    PathologyEnvelope {
        lab_ref: Some(lab_ref.into()),
        received_at: Some(received_at.into()),
        patient_hint: None,
        body_site_hint: None,
        body: Some(B64.encode(body)),
    }
}

/// Sends one request and returns the status with the parsed JSON body. A
/// body that is not JSON comes back as a string value.
pub async fn call(app: &Router, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let raw = body.map(|b| b.to_string());
    call_raw(app, method, path, token, raw.as_deref()).await
}

pub async fn call_raw(app: &Router, method: Method, path: &str, token: Option<&str>, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(path);
    if let Some(t) = token {
        req = req.header(SESSION_HEADER, t);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_owned())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, value)
}

/// True when `body` is exactly `{"error": <code>, "message": <non-empty>}`.
pub fn is_error_body(body: &Value) -> bool {
    let Some(obj) = body.as_object() else {
        return false;
    };
    obj.len() == 2
        && obj.get("error").and_then(Value::as_str).is_some_and(|c| !c.is_empty())
        && obj.get("message").and_then(Value::as_str).is_some_and(|m| !m.is_empty())
}
