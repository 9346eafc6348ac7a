use serde::{Deserialize, Serialize};

use super::{Clinic, LIST_LIMIT};
use crate::auth::Permission;
use crate::documents::sha256;
use crate::domain::{
    detect_duplicate_patient, validate_patient, BodyLocation, BodyView, DuplicateVerdict,
    LesionStatus, Patient, PatientInput, Region, Sex,
};
use crate::error::{Error, Result};
use crate::ids::{PatientId, ProblemId, RecordId, VisitId};
use crate::store::{AuditEvent, EntityRef};
use crate::workflow::{
    parse_timestamp, ClinicalRecord, HistoryChanges, MedicalHistory, Problem, Visit,
};

/// Fields to overwrite on a patient. Absent fields keep their value; an
/// empty `email` clears it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatientChanges {
    pub given: Option<String>,
    pub family: Option<String>,
    pub dob: Option<String>,
    pub sex: Option<Sex>,
    pub address: Option<String>,
    pub phone: Option<String>,
    pub email: Option<String>,
    pub external_ref: Option<String>,
}

impl PatientChanges {
    fn apply(&self, input: &mut PatientInput) {
        let set = |field: &mut String, value: &Option<String>| {
            if let Some(v) = value {
                field.clone_from(v);
            }
        };
        set(&mut input.given, &self.given);
        set(&mut input.family, &self.family);
        set(&mut input.dob, &self.dob);
        set(&mut input.address, &self.address);
        set(&mut input.phone, &self.phone);
        if let Some(s) = self.sex {
            input.sex = s;
        }
        if let Some(e) = &self.email {
            input.email = Some(e.clone());
        }
        if let Some(r) = &self.external_ref {
            input.external_ref = (!r.trim().is_empty()).then(|| r.trim().to_owned());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewProblem {
    pub view: BodyView,
    pub region: Region,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub description: String,
    pub size_mm: i64,
}

fn entity(kind: &str, id: u64) -> Option<EntityRef> {
    Some(EntityRef::new(kind, id))
}

fn history_digest(h: &MedicalHistory) -> String {
    let json = serde_json::to_vec(h).expect("history serializes");
    hex::encode(&sha256(&json)[..8])
}

impl Clinic {
    /// Registers a patient. A possible duplicate (same family name and date
    /// of birth) needs `acknowledge_duplicate`; an exact duplicate is refused.
    pub fn create_patient(&self, token: &str, input: &PatientInput, acknowledge_duplicate: bool) -> Result<PatientId> {
        let actor = self.authorize(token, Permission::CreatePatient)?;
        let details = validate_patient(input, self.today()).map_err(Error::Validation)?;
        self.transact(|tx| {
            let check = detect_duplicate_patient(&details, tx.patients.values());
            let ids = || {
                check
                    .matches
                    .iter()
                    .map(|id| id.0.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            match check.verdict {
                DuplicateVerdict::Duplicate => return Err(Error::DuplicatePatient(ids())),
                DuplicateVerdict::Warning if !acknowledge_duplicate => {
                    return Err(Error::DuplicateWarningUnacknowledged(ids()))
                }
                _ => {}
            }
            let id = PatientId(tx.allocate_id());
            let now = tx.now();
            tx.patients.insert(id, Patient::from_details(id, details, now));
            let mut event = AuditEvent::ok(actor.as_ref(), "patient.create", entity("patient", id.0));
            if check.verdict == DuplicateVerdict::Warning {
                event = event.with_detail(format!("duplicate warning acknowledged: {}", ids()));
            }
            tx.audit(event);
            Ok(id)
        })
    }

    pub fn edit_patient(&self, token: &str, patient_id: PatientId, changes: &PatientChanges) -> Result<Patient> {
        let actor = self.authorize(token, Permission::EditPatient)?;
        let today = self.today();
        self.transact(|tx| {
            let current = tx.patients.get(&patient_id).ok_or_else(|| Error::not_found(patient_id))?;
            let mut input = current.to_input();
            changes.apply(&mut input);
            let details = validate_patient(&input, today).map_err(Error::Validation)?;
            let updated = Patient::from_details(patient_id, details, current.created_at);
            tx.patients.insert(patient_id, updated.clone());
            tx.audit(AuditEvent::ok(actor.as_ref(), "patient.edit", entity("patient", patient_id.0)));
            Ok(updated)
        })
    }

    pub fn get_patient(&self, token: &str, patient_id: PatientId) -> Result<Patient> {
        self.authorize(token, Permission::EditPatient)?;
        self.snapshot()
            .patients
            .get(&patient_id)
            .cloned()
            .ok_or_else(|| Error::not_found(patient_id))
    }

    /// Patients by family name, given name and id, capped at the list limit.
    pub fn list_patients(&self, token: &str) -> Result<Vec<Patient>> {
        self.authorize(token, Permission::EditPatient)?;
        let state = self.snapshot();
        let mut all: Vec<&Patient> = state.patients.values().collect();
        all.sort_by(|a, b| {
            (a.name.family(), a.name.given(), a.id).cmp(&(b.name.family(), b.name.given(), b.id))
        });
        Ok(all.into_iter().take(LIST_LIMIT).cloned().collect())
    }

    pub fn create_record(&self, token: &str, patient_id: PatientId, history: &MedicalHistory) -> Result<RecordId> {
        let actor = self.authorize(token, Permission::CreateRecord)?;
        self.transact(|tx| {
            if !tx.patients.contains_key(&patient_id) {
                return Err(Error::not_found(patient_id));
            }
            if tx.record_of_patient(patient_id).is_some() {
                return Err(Error::RecordAlreadyExists);
            }
            let id = RecordId(tx.allocate_id());
            let mut initial = MedicalHistory::default();
            initial.apply(&HistoryChanges {
                previous_conditions: Some(history.previous_conditions.clone()),
                add_allergies: history.allergies.clone(),
                add_medications: history.medications.clone(),
                ..HistoryChanges::default()
            });
            let record = ClinicalRecord {
                id,
                patient_id,
                history: initial,
                created_by: actor.staff_id,
                created_at: tx.now(),
            };
            tx.records.insert(id, record);
            tx.audit(AuditEvent::ok(actor.as_ref(), "record.create", entity("record", id.0)));
            Ok(id)
        })
    }

    /// Applies history changes. The audit detail names digests of the
    /// history before and after.
    pub fn edit_record(&self, token: &str, record_id: RecordId, changes: &HistoryChanges) -> Result<ClinicalRecord> {
        let actor = self.authorize(token, Permission::EditRecord)?;
        self.transact(|tx| {
            let record = tx.records.get_mut(&record_id).ok_or_else(|| Error::not_found(record_id))?;
            let before = history_digest(&record.history);
            record.history.apply(changes);
            let after = history_digest(&record.history);
            let updated = record.clone();
            tx.audit(
                AuditEvent::ok(actor.as_ref(), "record.edit", entity("record", record_id.0))
                    .with_detail(format!("before={before} after={after}")),
            );
            Ok(updated)
        })
    }

    pub fn create_visit(&self, token: &str, record_id: RecordId, occurred_at: &str) -> Result<VisitId> {
        let actor = self.authorize(token, Permission::CreateVisit)?;
        let occurred_at = parse_timestamp(occurred_at)?;
        self.transact(|tx| {
            if !tx.records.contains_key(&record_id) {
                return Err(Error::not_found(record_id));
            }
            let id = VisitId(tx.allocate_id());
            tx.visits.insert(
                id,
                Visit {
                    id,
                    record_id,
                    occurred_at,
                    attending: actor.staff_id,
                },
            );
            tx.audit(AuditEvent::ok(actor.as_ref(), "visit.create", entity("visit", id.0)));
            Ok(id)
        })
    }

    pub fn create_problem(&self, token: &str, visit_id: VisitId, problem: &NewProblem) -> Result<ProblemId> {
        let actor = self.authorize(token, Permission::CreateProblem)?;
        let location = BodyLocation::new(problem.view, problem.region, problem.x, problem.y)?;
        let size_mm = u32::try_from(problem.size_mm)
            .ok()
            .filter(|s| *s >= 1)
            .ok_or(Error::BadSize)?;
        self.transact(|tx| {
            if !tx.visits.contains_key(&visit_id) {
                return Err(Error::not_found(visit_id));
            }
            let id = ProblemId(tx.allocate_id());
            tx.problems.insert(
                id,
                Problem {
                    id,
                    visit_id,
                    location,
                    description: problem.description.trim().to_owned(),
                    size_mm,
                    status: LesionStatus::default(),
                },
            );
            tx.audit(AuditEvent::ok(actor.as_ref(), "problem.create", entity("problem", id.0)));
            Ok(id)
        })
    }

    pub fn set_problem_status(&self, token: &str, problem_id: ProblemId, status: LesionStatus) -> Result<Problem> {
        let actor = self.authorize(token, Permission::EditRecord)?;
        self.transact(|tx| {
            let problem = tx.problems.get_mut(&problem_id).ok_or_else(|| Error::not_found(problem_id))?;
            let was = problem.status;
            problem.status = status;
            let updated = problem.clone();
            tx.audit(
                AuditEvent::ok(actor.as_ref(), "problem.status", entity("problem", problem_id.0))
                    .with_detail(format!("{was:?} -> {status:?}")),
            );
            Ok(updated)
        })
    }
}
