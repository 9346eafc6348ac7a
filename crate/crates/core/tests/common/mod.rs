#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use scis_core::clinic::{NewProblem, NewProcedure, NewStaff};
use scis_core::documents::DocumentKey;
use scis_core::domain::{BodyView, PatientInput, Region, Sex};
use scis_core::ids::{PatientId, ProblemId, ProcedureId, RecordId, StaffId, VisitId};
use scis_core::workflow::MedicalHistory;
use scis_core::{Clinic, ClinicConfig, ManualClock, Role, Store};

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

/// A clinic with one logged-in account per role.
pub struct Fixture {
    pub clinic: Clinic,
    pub clock: Arc<ManualClock>,
    pub tokens: HashMap<Role, String>,
    pub ids: HashMap<Role, StaffId>,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_config(config())
    }

    pub fn with_config(config: ClinicConfig) -> Self {
        Self::on_store(Store::in_memory(), config)
    }

    pub fn on_store(store: Store, config: ClinicConfig) -> Self {
        let clock = Arc::new(ManualClock::new(start()));
        let clinic = Clinic::new(store, config, clock.clone()).unwrap();
        let admin = clinic.bootstrap_admin("admin", PASSWORD, "ada", "admin").unwrap();
        let admin_token = clinic.login("admin", PASSWORD).unwrap().token;
        let mut tokens = HashMap::from([(Role::Administrator, admin_token.clone())]);
        let mut ids = HashMap::from([(Role::Administrator, admin)]);
        for (role, user) in [
            (Role::Manager, "manager"),
            (Role::Physician, "physician"),
            (Role::Nurse, "nurse"),
            (Role::Receptionist, "reception"),
        ] {
            let details = NewStaff {
                username: user.into(),
                role,
                given: user.into(),
                family: "staff".into(),
                contact: String::new(),
            };
            let id = clinic.create_staff_account(&admin_token, &details, PASSWORD).unwrap();
            ids.insert(role, id);
            tokens.insert(role, clinic.login(user, PASSWORD).unwrap().token);
        }
        Self { clinic, clock, tokens, ids }
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

pub fn envelope(lab_ref: &str, received_at: &str, body: &[u8]) -> scis_core::documents::PathologyEnvelope {
    use base64::Engine;
    scis_core::documents::PathologyEnvelope {
        lab_ref: Some(lab_ref.into()),
        received_at: Some(received_at.into()),
        patient_hint: None,
        body_site_hint: None,
        body: Some(base64::engine::general_purpose::STANDARD.encode(body)),
    }
}
