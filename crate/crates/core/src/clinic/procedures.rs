use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::Clinic;
use crate::auth::Permission;
use crate::billing::{compute_bill, Bill, BillStatus};
use crate::documents::{Document, DocumentKind, DocumentOwner, PathologyReport};
use crate::domain::Patient;
use crate::error::{Error, Result};
use crate::ids::{BillId, DocumentId, PatientId, ProblemId, ProcedureId, ReportId};
use crate::store::{ActorRef, AuditEvent, EntityRef, State};
use crate::workflow::{
    ClinicalRecord, PathologyStatus, Problem, Procedure, ProcedureKind, Visit, WaitingListEntry,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewProcedure {
    pub problem_ids: Vec<ProblemId>,
    pub kind: String,
    #[serde(default)]
    pub clinical_details: String,
    pub pathology_required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalized {
    pub procedure: Procedure,
    pub bill: Bill,
}

/// Document metadata without the encrypted payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentInfo {
    pub id: DocumentId,
    pub owner: DocumentOwner,
    pub kind: DocumentKind,
    pub media_type: String,
    pub size_plain: u64,
    pub plaintext_sha256: String,
    pub uploaded_by: ActorRef,
    pub uploaded_at: DateTime<Utc>,
}

impl From<&Document> for DocumentInfo {
    fn from(d: &Document) -> Self {
        Self {
            id: d.id,
            owner: d.owner,
            kind: d.kind,
            media_type: d.media_type.clone(),
            size_plain: d.size_plain,
            plaintext_sha256: hex::encode(d.plaintext_sha256),
            uploaded_by: d.uploaded_by,
            uploaded_at: d.uploaded_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemHistory {
    pub problem: Problem,
    pub procedure_ids: Vec<ProcedureId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitHistory {
    pub visit: Visit,
    pub problems: Vec<ProblemHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureHistory {
    pub procedure: Procedure,
    pub bill: Option<Bill>,
    pub pathology_reports: Vec<PathologyReport>,
    pub documents: Vec<DocumentInfo>,
}

/// Everything held for one patient. Visits run in `occurred_at` order, ties
/// broken by id; procedures appear once each, linked from their problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientHistory {
    pub patient: Patient,
    pub record: Option<ClinicalRecord>,
    pub documents: Vec<DocumentInfo>,
    pub visits: Vec<VisitHistory>,
    pub procedures: Vec<ProcedureHistory>,
    pub waiting_entries: Vec<WaitingListEntry>,
}

impl PatientHistory {
    /// Every entity id in the view, one per occurrence of an entity.
    pub fn entity_ids(&self) -> Vec<u64> {
        let mut ids = vec![self.patient.id.0];
        ids.extend(self.record.iter().map(|r| r.id.0));
        ids.extend(self.documents.iter().map(|d| d.id.0));
        for v in &self.visits {
            ids.push(v.visit.id.0);
            ids.extend(v.problems.iter().map(|p| p.problem.id.0));
        }
        for p in &self.procedures {
            ids.push(p.procedure.id.0);
            ids.extend(p.bill.iter().map(|b| b.id.0));
            for r in &p.pathology_reports {
                ids.push(r.id.0);
                ids.push(r.document_id.0);
            }
            ids.extend(p.documents.iter().map(|d| d.id.0));
        }
        ids.extend(self.waiting_entries.iter().map(|e| e.id.0));
        ids
    }
}

fn procedure_ref(id: ProcedureId) -> Option<EntityRef> {
    Some(EntityRef::new("procedure", id.0))
}

fn sorted_problems<'a>(state: &'a State, procedure: &Procedure) -> Result<Vec<&'a Problem>> {
    procedure
        .problem_ids
        .iter()
        .map(|id| state.problems.get(id).ok_or_else(|| Error::not_found(id)))
        .collect()
}

impl Clinic {
    pub fn insert_procedure(&self, token: &str, request: &NewProcedure) -> Result<ProcedureId> {
        let actor = self.authorize(token, Permission::InsertProcedure)?;
        if request.problem_ids.is_empty() {
            return Err(Error::EmptyProblemList);
        }
        let kind = ProcedureKind::new(request.kind.trim());
        if !self.config.fee_schedule.offers(&kind) {
            return Err(Error::UnknownProcedureKind(request.kind.clone()));
        }
        self.transact(|tx| {
            let mut record = None;
            for pid in &request.problem_ids {
                let r = tx.record_of_problem(*pid).ok_or_else(|| Error::not_found(pid))?;
                match record {
                    None => record = Some(r),
                    Some(first) if first != r => return Err(Error::CrossPatientProblems),
                    Some(_) => {}
                }
            }
            let record_id = record.expect("problem list is non-empty");
            let id = ProcedureId(tx.allocate_id());
            let procedure = Procedure::draft(
                id,
                record_id,
                request.problem_ids.clone(),
                kind.clone(),
                request.clinical_details.trim().to_owned(),
                request.pathology_required,
                actor.staff_id,
                tx.now(),
            )?;
            tx.procedures.insert(id, procedure);
            tx.audit(AuditEvent::ok(actor.as_ref(), "procedure.insert", procedure_ref(id)).with_detail(kind.to_string()));
            Ok(id)
        })
    }

    fn step(
        &self,
        token: &str,
        permission: Permission,
        procedure_id: ProcedureId,
        action: &str,
        f: impl FnOnce(&mut Procedure, DateTime<Utc>, crate::ids::StaffId) -> Result<()>,
    ) -> Result<Procedure> {
        let actor = self.authorize(token, permission)?;
        self.transact(|tx| {
            let now = tx.now();
            let procedure = tx
                .procedures
                .get_mut(&procedure_id)
                .ok_or_else(|| Error::not_found(procedure_id))?;
            f(procedure, now, actor.staff_id)?;
            let updated = procedure.clone();
            tx.audit(AuditEvent::ok(actor.as_ref(), action, procedure_ref(procedure_id)));
            Ok(updated)
        })
    }

    pub fn record_consent(&self, token: &str, procedure_id: ProcedureId) -> Result<Procedure> {
        self.step(token, Permission::InsertProcedure, procedure_id, "procedure.consent", |p, now, by| {
            p.record_consent(by, now)
        })
    }

    pub fn record_procedure_details(&self, token: &str, procedure_id: ProcedureId, details: &str) -> Result<Procedure> {
        self.step(token, Permission::InsertProcedure, procedure_id, "procedure.details", |p, _, _| {
            p.record_details(details)
        })
    }

    /// Finalizes the procedure and generates its bill in the same
    /// transaction. The bill starts HELD while pathology is pending.
    pub fn finalize_procedure(&self, token: &str, procedure_id: ProcedureId) -> Result<Finalized> {
        let actor = self.authorize(token, Permission::FinalizeProcedure)?;
        self.transact(|tx| {
            let now = tx.now();
            let mut procedure = tx
                .procedures
                .get(&procedure_id)
                .cloned()
                .ok_or_else(|| Error::not_found(procedure_id))?;
            procedure.finalize(now)?;
            let charges = compute_bill(&procedure, &sorted_problems(tx, &procedure)?, &self.config.fee_schedule)?;
            let status = if procedure.pathology_status == PathologyStatus::Pending {
                BillStatus::Held
            } else {
                BillStatus::Generated
            };
            let bill_id = BillId(tx.allocate_id());
            let bill = Bill::new(bill_id, procedure_id, charges, status, now, actor.as_ref());
            tx.procedures.insert(procedure_id, procedure.clone());
            tx.bills.insert(bill_id, bill.clone());
            tx.audit(
                AuditEvent::ok(actor.as_ref(), "procedure.finalize", procedure_ref(procedure_id))
                    .with_detail(format!("bill {} {}", bill_id.0, status)),
            );
            Ok(Finalized { procedure, bill })
        })
    }

    pub fn allocate_pathology_report(
        &self,
        token: &str,
        report_id: ReportId,
        procedure_id: ProcedureId,
    ) -> Result<(Procedure, PathologyReport)> {
        let actor = self.authorize(token, Permission::AllocatePathology)?;
        self.transact(|tx| {
            let report = tx.reports.get(&report_id).ok_or_else(|| Error::not_found(report_id))?;
            if report.allocated_procedure_id.is_some() {
                return Err(Error::AlreadyAllocated);
            }
            let procedure = tx
                .procedures
                .get_mut(&procedure_id)
                .ok_or_else(|| Error::not_found(procedure_id))?;
            procedure.mark_pathology_allocated()?;
            let procedure = procedure.clone();
            let report = tx.reports.get_mut(&report_id).expect("checked above");
            report.allocated_procedure_id = Some(procedure_id);
            let report = report.clone();
            tx.audit(
                AuditEvent::ok(actor.as_ref(), "pathology.allocate", Some(EntityRef::new("pathology_report", report_id.0)))
                    .with_detail(format!("procedure {}", procedure_id.0)),
            );
            Ok((procedure, report))
        })
    }

    pub fn get_patient_history(&self, token: &str, patient_id: PatientId) -> Result<PatientHistory> {
        self.authorize(token, Permission::AccessPatientRecord)?;
        let state = self.snapshot();
        let patient = state
            .patients
            .get(&patient_id)
            .cloned()
            .ok_or_else(|| Error::not_found(patient_id))?;
        let record = state.record_of_patient(patient_id).cloned();
        let docs_of = |owner: DocumentOwner| -> Vec<DocumentInfo> {
            state
                .documents
                .values()
                .filter(|d| d.owner == owner)
                .map(|d| DocumentInfo::from(&**d))
                .collect()
        };

        let mut visits = Vec::new();
        let mut procedures = Vec::new();
        if let Some(record) = &record {
            let record_procedures: Vec<&Procedure> =
                state.procedures.values().filter(|p| p.record_id == record.id).collect();
            let mut record_visits: Vec<&Visit> =
                state.visits.values().filter(|v| v.record_id == record.id).collect();
            record_visits.sort_by_key(|v| (v.occurred_at, v.id));
            for visit in record_visits {
                let problems = state
                    .problems
                    .values()
                    .filter(|p| p.visit_id == visit.id)
                    .map(|p| ProblemHistory {
                        problem: p.clone(),
                        procedure_ids: record_procedures
                            .iter()
                            .filter(|proc| proc.problem_ids.contains(&p.id))
                            .map(|proc| proc.id)
                            .collect(),
                    })
                    .collect();
                visits.push(VisitHistory {
                    visit: visit.clone(),
                    problems,
                });
            }
            for p in record_procedures {
                procedures.push(ProcedureHistory {
                    procedure: p.clone(),
                    bill: state.bill_of_procedure(p.id).cloned(),
                    pathology_reports: state
                        .reports
                        .values()
                        .filter(|r| r.allocated_procedure_id == Some(p.id))
                        .cloned()
                        .collect(),
                    documents: docs_of(DocumentOwner::Procedure(p.id)),
                });
            }
        }
        Ok(PatientHistory {
            documents: docs_of(DocumentOwner::Patient(patient_id)),
            waiting_entries: state
                .waiting
                .values()
                .filter(|e| e.patient_id == patient_id)
                .cloned()
                .collect(),
            patient,
            record,
            visits,
            procedures,
        })
    }
}
