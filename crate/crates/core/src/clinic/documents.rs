use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Clinic;
use crate::auth::Permission;
use crate::billing::BillStatus;
use crate::documents::{Document, DocumentKey, DocumentKind, DocumentOwner, PathologyEnvelope, PathologyReport};
use crate::error::{Error, Result};
use crate::ids::{DocumentId, ProcedureId, ReportId};
use crate::printing::{self, ManagementStats};
use crate::store::{ActorRef, AuditEvent, EntityRef, State};
use crate::workflow::{ProcedureState, ProcedureKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadRequest {
    pub owner: DocumentOwner,
    pub kind: DocumentKind,
    pub media_type: String,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedDocument {
    pub id: DocumentId,
    pub kind: DocumentKind,
    pub media_type: String,
    pub body: Vec<u8>,
}

fn owner_exists(state: &State, owner: DocumentOwner) -> Result<()> {
    match owner {
        DocumentOwner::Patient(p) if !state.patients.contains_key(&p) => Err(Error::not_found(p)),
        DocumentOwner::Procedure(p) if !state.procedures.contains_key(&p) => Err(Error::not_found(p)),
        DocumentOwner::Inbox => Err(Error::BadRequest("the pathology inbox is fed by ingestion only".into())),
        _ => Ok(()),
    }
}

impl Clinic {
    fn key(&self) -> Result<&DocumentKey> {
        self.config.encryption_key.as_ref().ok_or(Error::NoEncryptionKey)
    }

    fn check_payload(&self, body: &[u8]) -> Result<()> {
        if body.is_empty() {
            return Err(Error::EmptyPayload);
        }
        if body.len() > self.config.max_upload_bytes {
            return Err(Error::TooLarge {
                limit: self.config.max_upload_bytes,
            });
        }
        Ok(())
    }

    /// Encrypts and stores an attachment for a patient or procedure.
    pub fn upload_document(&self, token: &str, request: &UploadRequest) -> Result<DocumentId> {
        let actor = self.authorize(token, Permission::UploadDocument)?;
        self.check_payload(&request.body)?;
        let key = self.key()?;
        self.transact(|tx| {
            owner_exists(tx, request.owner)?;
            let id = DocumentId(tx.allocate_id());
            let doc = Document::seal(
                key,
                id,
                request.owner,
                request.kind,
                request.media_type.trim().to_owned(),
                &request.body,
                actor.as_ref(),
                tx.now(),
            );
            tx.documents.insert(id, Arc::new(doc));
            tx.audit(AuditEvent::ok(actor.as_ref(), "document.upload", Some(EntityRef::new("document", id.0))));
            Ok(id)
        })
    }

    pub fn fetch_document(&self, token: &str, document_id: DocumentId) -> Result<FetchedDocument> {
        self.authorize(token, Permission::AccessPatientRecord)?;
        let key = self.key()?;
        let doc = self
            .snapshot()
            .documents
            .get(&document_id)
            .cloned()
            .ok_or_else(|| Error::not_found(document_id))?;
        let body = doc.open(key)?;
        Ok(FetchedDocument {
            id: doc.id,
            kind: doc.kind,
            media_type: doc.media_type.clone(),
            body,
        })
    }

    /// Accepts a laboratory envelope into the pathology inbox. Runs as the
    /// system actor.
    pub fn ingest_pathology(&self, envelope: &PathologyEnvelope) -> Result<ReportId> {
        let checked = envelope.check()?;
        self.check_payload(&checked.body)?;
        let key = self.key()?;
        self.transact(|tx| {
            if tx.reports.values().any(|r| r.lab_ref == checked.lab_ref) {
                return Err(Error::DuplicateLabRef);
            }
            let now = tx.now();
            let doc_id = DocumentId(tx.allocate_id());
            let doc = Document::seal(
                key,
                doc_id,
                DocumentOwner::Inbox,
                DocumentKind::PathologyReport,
                "application/octet-stream".to_owned(),
                &checked.body,
                ActorRef::System,
                now,
            );
            tx.documents.insert(doc_id, Arc::new(doc));
            let id = ReportId(tx.allocate_id());
            tx.reports.insert(
                id,
                PathologyReport {
                    id,
                    lab_ref: checked.lab_ref.clone(),
                    received_at: checked.received_at,
                    patient_hint: checked.patient_hint.clone(),
                    body_site_hint: checked.body_site_hint.clone(),
                    document_id: doc_id,
                    allocated_procedure_id: None,
                },
            );
            tx.audit(
                AuditEvent::ok(ActorRef::System, "pathology.ingest", Some(EntityRef::new("pathology_report", id.0)))
                    .with_detail(format!("document {}", doc_id.0)),
            );
            Ok(id)
        })
    }

    /// Unallocated reports, oldest first.
    pub fn pathology_inbox(&self, token: &str) -> Result<Vec<PathologyReport>> {
        self.authorize(token, Permission::AllocatePathology)?;
        let state = self.snapshot();
        let mut inbox: Vec<PathologyReport> = state
            .reports
            .values()
            .filter(|r| r.allocated_procedure_id.is_none())
            .cloned()
            .collect();
        inbox.sort_by_key(|r| (r.received_at, r.id));
        Ok(inbox)
    }

    pub fn generate_pathology_form(&self, token: &str, procedure_id: ProcedureId) -> Result<String> {
        self.authorize(token, Permission::GenerateForm)?;
        let state = self.snapshot();
        let procedure = state
            .procedures
            .get(&procedure_id)
            .ok_or_else(|| Error::not_found(procedure_id))?;
        if !procedure.pathology_required {
            return Err(Error::NoPathologyExpected);
        }
        if procedure.state == ProcedureState::Draft {
            return Err(Error::ProcedureNotReady);
        }
        let patient = state
            .records
            .get(&procedure.record_id)
            .and_then(|r| state.patients.get(&r.patient_id))
            .ok_or_else(|| Error::not_found(procedure.record_id))?;
        let clinician = state
            .staff
            .get(&procedure.requested_by)
            .ok_or_else(|| Error::not_found(procedure.requested_by))?;
        let problems = procedure
            .problem_ids
            .iter()
            .map(|id| state.problems.get(id).ok_or_else(|| Error::not_found(id)))
            .collect::<Result<Vec<_>>>()?;
        Ok(printing::render_pathology_form(
            state.active_centre(),
            patient,
            clinician,
            procedure,
            &problems,
        ))
    }

    /// Aggregate counts over an inclusive range of UTC dates. The report
    /// carries no names and no clinical text.
    pub fn generate_management_report(&self, token: &str, from: NaiveDate, to: NaiveDate) -> Result<String> {
        self.authorize(token, Permission::PrintReport)?;
        if from > to {
            return Err(Error::BadRange);
        }
        let state = self.snapshot();
        let in_range = |t: chrono::DateTime<chrono::Utc>| (from..=to).contains(&t.date_naive());
        let mut stats = ManagementStats {
            new_patients: state.patients.values().filter(|p| in_range(p.created_at)).count(),
            ..ManagementStats::default()
        };
        for p in state.procedures.values() {
            if in_range(p.created_at) {
                *stats.procedures_by_kind.entry(p.kind.clone()).or_insert(0) += 1;
            }
            if p.finalized_at.is_some_and(in_range) {
                stats.finalized_procedures += 1;
            }
        }
        for kind in self.config.fee_schedule.catalogue() {
            stats.procedures_by_kind.entry(ProcedureKind::clone(kind)).or_insert(0);
        }
        for b in state.bills.values().filter(|b| in_range(b.created_at)) {
            let slot = stats.bills_by_status.entry(b.status).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += b.total_cents;
        }
        for status in [BillStatus::Generated, BillStatus::Held, BillStatus::Issued] {
            stats.bills_by_status.entry(status).or_insert((0, 0));
        }
        stats.unallocated_reports = state
            .reports
            .values()
            .filter(|r| r.allocated_procedure_id.is_none())
            .count();
        Ok(printing::render_management_report(state.active_centre(), from, to, &stats))
    }
}
