use std::fmt;

use serde::Serialize;

/// A single failed field from patient validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationIssue {
    FutureDob,
    BadDateFormat,
    BadEmail,
    EmptyName,
}

impl ValidationIssue {
    pub fn code(self) -> &'static str {
        match self {
            ValidationIssue::FutureDob => "FUTURE_DOB",
            ValidationIssue::BadDateFormat => "BAD_DATE_FORMAT",
            ValidationIssue::BadEmail => "BAD_EMAIL",
            ValidationIssue::EmptyName => "EMPTY_NAME",
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Every failure the clinic system can report.
///
/// Each variant maps to a stable code token via [`Error::code`]; the HTTP
/// layer maps the same variants onto status codes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    // authentication and access
    #[error("authentication required")]
    AuthRequired,
    #[error("authentication failed")]
    AuthFailed,
    #[error("session expired")]
    SessionExpired,
    #[error("forbidden")]
    Forbidden,

    #[error("{0} not found")]
    NotFound(String),

    // conflicts
    #[error("username already taken")]
    DuplicateUsername,
    #[error("patient already exists: {0}")]
    DuplicatePatient(String),
    #[error("possible duplicate patient must be acknowledged: {0}")]
    DuplicateWarningUnacknowledged(String),
    #[error("laboratory reference already received")]
    DuplicateLabRef,
    #[error("pathology report already allocated")]
    AlreadyAllocated,
    #[error("procedure cannot move from {from} via {action}")]
    InvalidTransition { from: String, action: String },
    #[error("bill cannot move from {from} to {to}")]
    InvalidBillTransition { from: String, to: String },
    #[error("patient already has a clinical record")]
    RecordAlreadyExists,
    #[error("store is not empty")]
    NotEmpty,
    #[error("operation would leave no active administrator")]
    LastAdministrator,
    #[error("administrator exists")]
    AdministratorExists,
    #[error("pathology result still pending")]
    PathologyPending,
    #[error("bill is held")]
    BillHeld,
    #[error("procedure has no consent yet")]
    ProcedureNotReady,
    #[error("procedure does not expect pathology")]
    NoPathologyExpected,

    // validation
    #[error("invalid patient: {}", join_issues(.0))]
    Validation(Vec<ValidationIssue>),
    #[error("name is empty")]
    EmptyName,
    #[error("password is empty")]
    EmptyPassword,
    #[error("legacy MD5 digests are disabled")]
    LegacySchemeDisabled,
    #[error("role and username cannot be changed here")]
    RoleChangeNotAllowedHere,
    #[error("invalid timestamp: {0}")]
    BadTimestamp(String),
    #[error("body location out of range")]
    BadLocation,
    #[error("lesion size must be at least 1 mm")]
    BadSize,
    #[error("problems belong to different patients")]
    CrossPatientProblems,
    #[error("procedure needs at least one problem")]
    EmptyProblemList,
    #[error("unknown procedure kind: {0}")]
    UnknownProcedureKind(String),
    #[error("procedural details are empty")]
    EmptyDetails,
    #[error("payload exceeds {limit} bytes")]
    TooLarge { limit: usize },
    #[error("payload is empty")]
    EmptyPayload,
    #[error("malformed pathology envelope: {0}")]
    BadEnvelope(String),
    #[error("invalid date range")]
    BadRange,
    #[error("search query must have at least 2 characters")]
    QueryTooShort,
    #[error("waiting list position must be at least 1")]
    BadPosition,
    #[error("no patients waiting")]
    EmptyList,
    #[error("malformed request: {0}")]
    BadRequest(String),

    // billing schedule
    #[error("fee schedule has no base fee for {0}")]
    UnknownKind(String),
    #[error("fee schedule has no multiplier for {0}")]
    UnknownRegion(String),

    // documents
    #[error("no encryption key configured")]
    NoEncryptionKey,
    #[error("document failed authentication")]
    CorruptCiphertext,

    // persistence and configuration
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("dangling reference: {0}")]
    IntegrityViolation(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| i.code())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Stable machine-readable token for this error.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            AuthRequired => "AUTH_REQUIRED",
            AuthFailed => "AUTH_FAILED",
            SessionExpired => "SESSION_EXPIRED",
            Forbidden => "FORBIDDEN",
            NotFound(_) => "NOT_FOUND",
            DuplicateUsername => "DUPLICATE_USERNAME",
            DuplicatePatient(_) => "DUPLICATE_PATIENT",
            DuplicateWarningUnacknowledged(_) => "DUPLICATE_WARNING_UNACKNOWLEDGED",
            DuplicateLabRef => "DUPLICATE_LAB_REF",
            AlreadyAllocated => "ALREADY_ALLOCATED",
            InvalidTransition { .. } => "INVALID_TRANSITION",
            InvalidBillTransition { .. } => "INVALID_BILL_TRANSITION",
            RecordAlreadyExists => "RECORD_ALREADY_EXISTS",
            NotEmpty => "NOT_EMPTY",
            LastAdministrator => "LAST_ADMINISTRATOR",
            AdministratorExists => "ADMINISTRATOR_EXISTS",
            PathologyPending => "PATHOLOGY_PENDING",
            BillHeld => "BILL_HELD",
            ProcedureNotReady => "PROCEDURE_NOT_READY",
            NoPathologyExpected => "NO_PATHOLOGY_EXPECTED",
            Validation(issues) if issues.len() == 1 => issues[0].code(),
            Validation(_) => "VALIDATION_FAILED",
            EmptyName => "EMPTY_NAME",
            EmptyPassword => "EMPTY_PASSWORD",
            LegacySchemeDisabled => "LEGACY_SCHEME_DISABLED",
            RoleChangeNotAllowedHere => "ROLE_CHANGE_NOT_ALLOWED_HERE",
            BadTimestamp(_) => "BAD_TIMESTAMP",
            BadLocation => "BAD_LOCATION",
            BadSize => "BAD_SIZE",
            CrossPatientProblems => "CROSS_PATIENT_PROBLEMS",
            EmptyProblemList => "EMPTY_PROBLEM_LIST",
            UnknownProcedureKind(_) => "UNKNOWN_PROCEDURE_KIND",
            EmptyDetails => "EMPTY_DETAILS",
            TooLarge { .. } => "TOO_LARGE",
            EmptyPayload => "EMPTY_PAYLOAD",
            BadEnvelope(_) => "BAD_ENVELOPE",
            BadRange => "BAD_RANGE",
            QueryTooShort => "QUERY_TOO_SHORT",
            BadPosition => "BAD_POSITION",
            EmptyList => "EMPTY_LIST",
            BadRequest(_) => "BAD_REQUEST",
            UnknownKind(_) => "UNKNOWN_KIND",
            UnknownRegion(_) => "UNKNOWN_REGION",
            NoEncryptionKey => "NO_ENCRYPTION_KEY",
            CorruptCiphertext => "CORRUPT_CIPHERTEXT",
            SchemaMismatch(_) => "SCHEMA_MISMATCH",
            IntegrityViolation(_) => "INTEGRITY_VIOLATION",
            ConfigInvalid(_) => "CONFIG_INVALID",
            Storage(_) => "STORAGE_FAILURE",
        }
    }

    pub(crate) fn not_found(what: impl fmt::Display) -> Self {
        Error::NotFound(what.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_validation_issue_uses_its_own_code() {
        assert_eq!(
            Error::Validation(vec![ValidationIssue::FutureDob]).code(),
            "FUTURE_DOB"
        );
        assert_eq!(
            Error::Validation(vec![ValidationIssue::BadEmail, ValidationIssue::EmptyName]).code(),
            "VALIDATION_FAILED"
        );
    }

    #[test]
    fn message_lists_all_issues() {
        let err = Error::Validation(vec![ValidationIssue::BadEmail, ValidationIssue::FutureDob]);
        assert_eq!(err.to_string(), "invalid patient: BAD_EMAIL, FUTURE_DOB");
    }
}
