use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Clinic, LIST_LIMIT};
use crate::auth::{Permission, Role, StaffSummary};
use crate::domain::{parse_iso_date, Patient, PersonName, Sex};
use crate::error::{Error, Result};
use crate::ids::{EntryId, PatientId};
use crate::store::{AuditEvent, EntityRef};
use crate::workflow::{waiting, WaitingListEntry, WaitingStatus};

/// A waiting-list change: a new position, a new status, or both (status
/// first).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaitingUpdate {
    pub position: Option<u32>,
    pub status: Option<WaitingStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchKind {
    Patient,
    Staff,
}

/// Demographics only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientSummary {
    pub id: PatientId,
    pub name: PersonName,
    pub dob: NaiveDate,
    pub sex: Sex,
}

impl From<&Patient> for PatientSummary {
    fn from(p: &Patient) -> Self {
        Self {
            id: p.id,
            name: p.name.clone(),
            dob: p.dob,
            sex: p.sex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "results", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchResults {
    Patient(Vec<PatientSummary>),
    Staff(Vec<StaffSummary>),
}

impl SearchResults {
    pub fn len(&self) -> usize {
        match self {
            SearchResults::Patient(v) => v.len(),
            SearchResults::Staff(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn name_matches(name: &PersonName, needle: &str) -> bool {
    name.given().to_lowercase().contains(needle) || name.family().to_lowercase().contains(needle)
}

fn entry_ref(id: EntryId) -> Option<EntityRef> {
    Some(EntityRef::new("waiting_entry", id.0))
}

impl Clinic {
    pub fn waiting_list(&self, token: &str) -> Result<Vec<WaitingListEntry>> {
        self.authorize(token, Permission::ManageWaitingList)?;
        let mut list = waiting::listing(&self.snapshot().waiting);
        list.truncate(LIST_LIMIT);
        Ok(list)
    }

    /// Appends the patient at the end of the queue.
    pub fn waiting_list_add(&self, token: &str, patient_id: PatientId) -> Result<WaitingListEntry> {
        let actor = self.authorize(token, Permission::ManageWaitingList)?;
        self.transact(|tx| {
            if !tx.patients.contains_key(&patient_id) {
                return Err(Error::not_found(patient_id));
            }
            let id = EntryId(tx.allocate_id());
            let now = tx.now();
            waiting::add(&mut tx.waiting, id, patient_id, now);
            let entry = tx.waiting[&id].clone();
            tx.audit(AuditEvent::ok(actor.as_ref(), "waiting.add", entry_ref(id)));
            Ok(entry)
        })
    }

    pub fn waiting_list_update(&self, token: &str, entry_id: EntryId, update: WaitingUpdate) -> Result<Vec<WaitingListEntry>> {
        let actor = self.authorize(token, Permission::ManageWaitingList)?;
        if update.position.is_none() && update.status.is_none() {
            return Err(Error::BadRequest("nothing to update".into()));
        }
        self.transact(|tx| {
            if !tx.waiting.contains_key(&entry_id) {
                return Err(Error::not_found(entry_id));
            }
            if let Some(status) = update.status {
                waiting::set_status(&mut tx.waiting, entry_id, status)?;
            }
            if let Some(position) = update.position {
                waiting::move_to(&mut tx.waiting, entry_id, position)?;
            }
            tx.audit(AuditEvent::ok(actor.as_ref(), "waiting.update", entry_ref(entry_id)));
            Ok(waiting::listing(&tx.waiting))
        })
    }

    /// Calls in the patient at position 1.
    pub fn waiting_list_next(&self, token: &str) -> Result<WaitingListEntry> {
        let actor = self.authorize(token, Permission::ManageWaitingList)?;
        self.transact(|tx| {
            let id = waiting::next(&mut tx.waiting)?;
            let entry = tx.waiting[&id].clone();
            tx.audit(AuditEvent::ok(actor.as_ref(), "waiting.next", entry_ref(id)));
            Ok(entry)
        })
    }

    /// Case-insensitive search. Patient results go to clinical and reception
    /// staff only; staff results to managers and administrators only.
    pub fn search(&self, token: &str, query: &str, kind: SearchKind) -> Result<SearchResults> {
        let actor = self.authorize(token, Permission::Search)?;
        let admin_side = matches!(actor.role, Role::Manager | Role::Administrator);
        if kind == SearchKind::Staff && !admin_side {
            return Err(Error::Forbidden);
        }
        let query = query.trim();
        if query.chars().count() < 2 {
            return Err(Error::QueryTooShort);
        }
        let needle = query.to_lowercase();
        let state = self.snapshot();
        match kind {
            SearchKind::Patient if admin_side => Ok(SearchResults::Patient(Vec::new())),
            SearchKind::Patient => {
                let dob = parse_iso_date(query);
                let mut hits: Vec<&Patient> = state
                    .patients
                    .values()
                    .filter(|p| name_matches(&p.name, &needle) || Some(p.dob) == dob)
                    .collect();
                hits.sort_by(|a, b| {
                    (a.name.family(), a.name.given(), a.id).cmp(&(b.name.family(), b.name.given(), b.id))
                });
                Ok(SearchResults::Patient(
                    hits.into_iter().take(LIST_LIMIT).map(PatientSummary::from).collect(),
                ))
            }
            SearchKind::Staff => {
                let mut hits: Vec<StaffSummary> = state
                    .staff
                    .values()
                    .filter(|a| name_matches(&a.name, &needle) || a.username.to_lowercase().contains(&needle))
                    .map(StaffSummary::from)
                    .collect();
                hits.sort_by(|a, b| {
                    (a.name.family(), a.name.given(), a.id).cmp(&(b.name.family(), b.name.given(), b.id))
                });
                hits.truncate(LIST_LIMIT);
                Ok(SearchResults::Staff(hits))
            }
        }
    }
}
