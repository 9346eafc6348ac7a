//! The clinical record hierarchy and the procedure lifecycle.
//!
//! A patient has at most one [`ClinicalRecord`]; a record has visits; a visit
//! has problems (lesions). A [`Procedure`] covers one or more problems of the
//! same record and moves strictly through
//! `DRAFT -> CONSENTED -> DETAILED -> FINALIZED`.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{BodyLocation, LesionStatus};
use crate::error::{Error, Result};
use crate::ids::{EntryId, PatientId, ProblemId, ProcedureId, RecordId, StaffId, VisitId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalHistory {
    #[serde(default)]
    pub previous_conditions: String,
    #[serde(default)]
    pub allergies: Vec<String>,
    #[serde(default)]
    pub medications: Vec<String>,
}

/// Edits to a record's history. `Some` replaces a field; `add_*` entries are
/// appended unless already present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistoryChanges {
    pub previous_conditions: Option<String>,
    pub allergies: Option<Vec<String>>,
    pub medications: Option<Vec<String>>,
    pub add_allergies: Vec<String>,
    pub add_medications: Vec<String>,
}

impl MedicalHistory {
    pub fn apply(&mut self, changes: &HistoryChanges) {
        if let Some(pc) = &changes.previous_conditions {
            self.previous_conditions = pc.clone();
        }
        if let Some(a) = &changes.allergies {
            self.allergies = a.clone();
        }
        if let Some(m) = &changes.medications {
            self.medications = m.clone();
        }
        for a in &changes.add_allergies {
            if !self.allergies.contains(a) {
                self.allergies.push(a.clone());
            }
        }
        for m in &changes.add_medications {
            if !self.medications.contains(m) {
                self.medications.push(m.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub id: RecordId,
    pub patient_id: PatientId,
    pub history: MedicalHistory,
    pub created_by: StaffId,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub id: VisitId,
    pub record_id: RecordId,
    pub occurred_at: DateTime<Utc>,
    pub attending: StaffId,
}

/// Parses an RFC 3339 timestamp and converts it to UTC.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| Error::BadTimestamp(s.to_owned()))
}

/// A lesion recorded during a visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: ProblemId,
    pub visit_id: VisitId,
    pub location: BodyLocation,
    pub description: String,
    pub size_mm: u32,
    pub status: LesionStatus,
}

/// A procedure catalogue entry, e.g. `SHAVE_BIOPSY`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcedureKind(String);

impl ProcedureKind {
    pub const SHAVE_BIOPSY: &'static str = "SHAVE_BIOPSY";
    pub const PUNCH_BIOPSY: &'static str = "PUNCH_BIOPSY";
    pub const EXCISION: &'static str = "EXCISION";
    pub const CRYOTHERAPY: &'static str = "CRYOTHERAPY";

    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProcedureState {
    Draft,
    Consented,
    Detailed,
    Finalized,
}

impl fmt::Display for ProcedureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProcedureState::Draft => "DRAFT",
            ProcedureState::Consented => "CONSENTED",
            ProcedureState::Detailed => "DETAILED",
            ProcedureState::Finalized => "FINALIZED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathologyStatus {
    NotRequired,
    Pending,
    Allocated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consent {
    pub obtained_at: DateTime<Utc>,
    pub witness: StaffId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Procedure {
    pub id: ProcedureId,
    pub record_id: RecordId,
    /// Ascending, no repeats.
    pub problem_ids: Vec<ProblemId>,
    pub kind: ProcedureKind,
    pub state: ProcedureState,
    pub clinical_details: String,
    pub consent: Option<Consent>,
    pub procedural_details: Option<String>,
    pub pathology_required: bool,
    pub pathology_status: PathologyStatus,
    pub requested_by: StaffId,
    pub created_at: DateTime<Utc>,
    pub finalized_at: Option<DateTime<Utc>>,
}

impl Procedure {
    #[allow(clippy::too_many_arguments)]
    pub fn draft(
        id: ProcedureId,
        record_id: RecordId,
        mut problem_ids: Vec<ProblemId>,
        kind: ProcedureKind,
        clinical_details: String,
        pathology_required: bool,
        requested_by: StaffId,
        created_at: DateTime<Utc>,
    ) -> Result<Self> {
        problem_ids.sort_unstable();
        problem_ids.dedup();
        if problem_ids.is_empty() {
            return Err(Error::EmptyProblemList);
        }
        Ok(Self {
            id,
            record_id,
            problem_ids,
            kind,
            state: ProcedureState::Draft,
            clinical_details,
            consent: None,
            procedural_details: None,
            pathology_required,
            pathology_status: if pathology_required {
                PathologyStatus::Pending
            } else {
                PathologyStatus::NotRequired
            },
            requested_by,
            created_at,
            finalized_at: None,
        })
    }

    fn expect_state(&self, expected: ProcedureState, action: &str) -> Result<()> {
        if self.state == expected {
            Ok(())
        } else {
            Err(Error::InvalidTransition {
                from: self.state.to_string(),
                action: action.to_owned(),
            })
        }
    }

    pub fn record_consent(&mut self, witness: StaffId, at: DateTime<Utc>) -> Result<()> {
        self.expect_state(ProcedureState::Draft, "consent")?;
        self.consent = Some(Consent {
            obtained_at: at,
            witness,
        });
        self.state = ProcedureState::Consented;
        Ok(())
    }

    pub fn record_details(&mut self, details: &str) -> Result<()> {
        self.expect_state(ProcedureState::Consented, "details")?;
        if details.trim().is_empty() {
            return Err(Error::EmptyDetails);
        }
        self.procedural_details = Some(details.to_owned());
        self.state = ProcedureState::Detailed;
        Ok(())
    }

    pub fn finalize(&mut self, at: DateTime<Utc>) -> Result<()> {
        self.expect_state(ProcedureState::Detailed, "finalize")?;
        self.state = ProcedureState::Finalized;
        self.finalized_at = Some(at);
        Ok(())
    }

    /// The only change a finalized procedure still accepts.
    pub fn mark_pathology_allocated(&mut self) -> Result<()> {
        match self.pathology_status {
            PathologyStatus::NotRequired => Err(Error::NoPathologyExpected),
            PathologyStatus::Allocated => Err(Error::AlreadyAllocated),
            PathologyStatus::Pending => {
                self.pathology_status = PathologyStatus::Allocated;
                Ok(())
            }
        }
    }

    /// Checks the state/field consistency rules.
    pub fn is_consistent(&self) -> bool {
        let consent_ok = match self.state {
            ProcedureState::Draft => self.consent.is_none() && self.procedural_details.is_none(),
            ProcedureState::Consented => self.consent.is_some() && self.procedural_details.is_none(),
            ProcedureState::Detailed | ProcedureState::Finalized => {
                self.consent.is_some() && self.procedural_details.is_some()
            }
        };
        let pathology_ok =
            (self.pathology_status == PathologyStatus::NotRequired) == !self.pathology_required;
        let finalized_ok = (self.state == ProcedureState::Finalized) == self.finalized_at.is_some();
        consent_ok && pathology_ok && finalized_ok && !self.problem_ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WaitingStatus {
    Waiting,
    InConsult,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaitingListEntry {
    pub id: EntryId,
    pub patient_id: PatientId,
    pub arrived_at: DateTime<Utc>,
    /// Set only while `status` is `Waiting`.
    pub position: Option<u32>,
    pub status: WaitingStatus,
}

/// Reception queue operations. Positions of waiting entries are kept as a
/// contiguous `1..=n` after every call.
pub mod waiting {
    use super::*;

    pub type Queue = BTreeMap<EntryId, WaitingListEntry>;

    fn order(queue: &Queue) -> Vec<EntryId> {
        let mut waiting: Vec<&WaitingListEntry> = queue
            .values()
            .filter(|e| e.status == WaitingStatus::Waiting)
            .collect();
        waiting.sort_by_key(|e| (e.position.unwrap_or(u32::MAX), e.arrived_at, e.id));
        waiting.into_iter().map(|e| e.id).collect()
    }

    fn assign(queue: &mut Queue, order: &[EntryId]) {
        for (i, id) in order.iter().enumerate() {
            if let Some(e) = queue.get_mut(id) {
                e.position = Some(i as u32 + 1);
            }
        }
    }

    pub fn waiting_count(queue: &Queue) -> usize {
        queue.values().filter(|e| e.status == WaitingStatus::Waiting).count()
    }

    pub fn add(queue: &mut Queue, id: EntryId, patient_id: PatientId, at: DateTime<Utc>) {
        let position = waiting_count(queue) as u32 + 1;
        queue.insert(
            id,
            WaitingListEntry {
                id,
                patient_id,
                arrived_at: at,
                position: Some(position),
                status: WaitingStatus::Waiting,
            },
        );
    }

    /// Moves a waiting entry; positions past the end clamp to the end.
    pub fn move_to(queue: &mut Queue, id: EntryId, position: u32) -> Result<()> {
        if position == 0 {
            return Err(Error::BadPosition);
        }
        let entry = queue.get(&id).ok_or_else(|| Error::not_found(id))?;
        if entry.status != WaitingStatus::Waiting {
            return Err(Error::BadPosition);
        }
        let mut ids = order(queue);
        ids.retain(|e| *e != id);
        let at = (position as usize - 1).min(ids.len());
        ids.insert(at, id);
        assign(queue, &ids);
        Ok(())
    }

    pub fn set_status(queue: &mut Queue, id: EntryId, status: WaitingStatus) -> Result<()> {
        let entry = queue.get_mut(&id).ok_or_else(|| Error::not_found(id))?;
        let was = entry.status;
        entry.status = status;
        match (was == WaitingStatus::Waiting, status == WaitingStatus::Waiting) {
            (true, false) => entry.position = None,
            (false, true) => entry.position = Some(u32::MAX),
            _ => {}
        }
        let ids = order(queue);
        assign(queue, &ids);
        Ok(())
    }

    /// Calls in the patient at position 1.
    pub fn next(queue: &mut Queue) -> Result<EntryId> {
        let first = *order(queue).first().ok_or(Error::EmptyList)?;
        set_status(queue, first, WaitingStatus::InConsult)?;
        Ok(first)
    }

    /// Waiting entries by position, then everything else by arrival.
    pub fn listing(queue: &Queue) -> Vec<WaitingListEntry> {
        let mut all: Vec<WaitingListEntry> = queue.values().cloned().collect();
        all.sort_by_key(|e| {
            (
                e.status != WaitingStatus::Waiting,
                e.position.unwrap_or(0),
                e.arrived_at,
                e.id,
            )
        });
        all
    }

    pub fn positions_contiguous(queue: &Queue) -> bool {
        let mut positions: Vec<u32> = queue
            .values()
            .filter(|e| e.status == WaitingStatus::Waiting)
            .map(|e| e.position.unwrap_or(0))
            .collect();
        positions.sort_unstable();
        positions.iter().enumerate().all(|(i, p)| *p == i as u32 + 1)
            && queue
                .values()
                .filter(|e| e.status != WaitingStatus::Waiting)
                .all(|e| e.position.is_none())
    }
}
