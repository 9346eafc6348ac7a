//! Opaque entity identifiers.
//!
//! All identifiers are drawn from one store-wide counter, so an id is unique
//! across entity types as well as within one.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! entity_id {
    ($(#[$meta:meta])* $name:ident, $label:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub const LABEL: &'static str = $label;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", $label, self.0)
            }
        }
    };
}

entity_id!(PatientId, "patient");
entity_id!(RecordId, "record");
entity_id!(VisitId, "visit");
entity_id!(ProblemId, "problem");
entity_id!(ProcedureId, "procedure");
entity_id!(BillId, "bill");
entity_id!(DocumentId, "document");
entity_id!(ReportId, "pathology report");
entity_id!(StaffId, "staff");
entity_id!(CentreId, "centre");
entity_id!(EntryId, "waiting list entry");
