//! Password digests, sessions, and the static role/permission matrix.

use std::collections::HashMap;
use std::fmt;

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::{DateTime, Duration, Utc};
use md5::{Digest, Md5};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::domain::PersonName;
use crate::error::{Error, Result};
use crate::ids::StaffId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Administrator,
    Manager,
    Physician,
    Nurse,
    Receptionist,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Administrator,
        Role::Manager,
        Role::Physician,
        Role::Nurse,
        Role::Receptionist,
    ];

    pub fn is_clinical(self) -> bool {
        matches!(self, Role::Physician | Role::Nurse)
    }

    /// The access matrix. Clinical staff also inherit everything the
    /// receptionist holds; managers and administrators hold nothing clinical.
    pub fn permits(self, permission: Permission) -> bool {
        let req = permission.requirement();
        if permission == Permission::Login {
            return true;
        }
        match self {
            Role::Physician | Role::Nurse => {
                (2..=16).contains(&req) || req == 18 || Role::Receptionist.permits(permission)
            }
            Role::Receptionist => (14..=18).contains(&req),
            Role::Manager => (18..=21).contains(&req),
            Role::Administrator => (18..=23).contains(&req),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Administrator => "ADMINISTRATOR",
            Role::Manager => "MANAGER",
            Role::Physician => "PHYSICIAN",
            Role::Nurse => "NURSE",
            Role::Receptionist => "RECEPTIONIST",
        };
        f.write_str(s)
    }
}

/// One permission per functional requirement, in requirement order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Permission {
    Login,
    CreateRecord,
    CreateProblem,
    CreateVisit,
    EditRecord,
    InsertProcedure,
    FinalizeProcedure,
    AccessPatientRecord,
    AllocatePathology,
    UploadDocument,
    GenerateForm,
    GenerateBill,
    HoldBill,
    PrintBill,
    CreatePatient,
    EditPatient,
    ManageWaitingList,
    Search,
    PrintReport,
    CreateStaffAccount,
    EditStaffAccount,
    ManageRole,
    CreateCentre,
}

impl Permission {
    pub const ALL: [Permission; 23] = [
        Permission::Login,
        Permission::CreateRecord,
        Permission::CreateProblem,
        Permission::CreateVisit,
        Permission::EditRecord,
        Permission::InsertProcedure,
        Permission::FinalizeProcedure,
        Permission::AccessPatientRecord,
        Permission::AllocatePathology,
        Permission::UploadDocument,
        Permission::GenerateForm,
        Permission::GenerateBill,
        Permission::HoldBill,
        Permission::PrintBill,
        Permission::CreatePatient,
        Permission::EditPatient,
        Permission::ManageWaitingList,
        Permission::Search,
        Permission::PrintReport,
        Permission::CreateStaffAccount,
        Permission::EditStaffAccount,
        Permission::ManageRole,
        Permission::CreateCentre,
    ];

    /// Requirement number, 1 through 23.
    pub fn requirement(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_requirement(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DigestScheme {
    Md5Hex,
    Strong,
}

/// Digests a password. `Md5Hex` is only available when `allow_legacy_md5`
/// is set; `Strong` yields a self-describing salted Argon2id PHC string.
pub fn hash_password(password: &str, scheme: DigestScheme, allow_legacy_md5: bool) -> Result<String> {
    if password.is_empty() {
        return Err(Error::EmptyPassword);
    }
    match scheme {
        DigestScheme::Md5Hex => {
            if !allow_legacy_md5 {
                return Err(Error::LegacySchemeDisabled);
            }
            Ok(hex::encode(Md5::digest(password.as_bytes())))
        }
        DigestScheme::Strong => {
            let salt = SaltString::generate(&mut OsRng);
            Argon2::default()
                .hash_password(password.as_bytes(), &salt)
                .map(|h| h.to_string())
                .map_err(|e| Error::Storage(format!("password hashing failed: {e}")))
        }
    }
}

pub fn verify_password(password: &str, scheme: DigestScheme, digest: &str) -> bool {
    match scheme {
        DigestScheme::Md5Hex => {
            let computed = hex::encode(Md5::digest(password.as_bytes()));
            constant_time_eq(computed.as_bytes(), digest.as_bytes())
        }
        DigestScheme::Strong => PasswordHash::new(digest)
            .map(|parsed| {
                Argon2::default()
                    .verify_password(password.as_bytes(), &parsed)
                    .is_ok()
            })
            .unwrap_or(false),
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffAccount {
    pub id: StaffId,
    pub username: String,
    pub digest_scheme: DigestScheme,
    pub digest: String,
    pub role: Role,
    pub name: PersonName,
    pub contact: String,
    pub active: bool,
}

// Keeps digests out of logs.
impl fmt::Debug for StaffAccount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StaffAccount")
            .field("id", &self.id)
            .field("username", &self.username)
            .field("role", &self.role)
            .field("name", &self.name)
            .field("active", &self.active)
            .finish_non_exhaustive()
    }
}

/// Account fields safe to hand to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffSummary {
    pub id: StaffId,
    pub username: String,
    pub role: Role,
    pub name: PersonName,
    pub contact: String,
    pub active: bool,
}

impl From<&StaffAccount> for StaffSummary {
    fn from(a: &StaffAccount) -> Self {
        Self {
            id: a.id,
            username: a.username.clone(),
            role: a.role,
            name: a.name.clone(),
            contact: a.contact.clone(),
            active: a.active,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub staff_id: StaffId,
    pub created_at: DateTime<Utc>,
    pub last_used_at: DateTime<Utc>,
}

/// 128 random bits as 32 lowercase hex chars.
pub fn new_session_token() -> String {
    let mut bytes = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

/// Live sessions keyed by token. Expired sessions stay in the table so that
/// further use keeps reporting `SessionExpired`.
#[derive(Debug)]
pub struct SessionTable {
    idle: Duration,
    sessions: HashMap<String, Session>,
}

impl SessionTable {
    pub fn new(idle: Duration) -> Self {
        Self {
            idle,
            sessions: HashMap::new(),
        }
    }

    pub fn open(&mut self, staff_id: StaffId, now: DateTime<Utc>) -> Session {
        let token = loop {
            let t = new_session_token();
            if !self.sessions.contains_key(&t) {
                break t;
            }
        };
        let session = Session {
            token: token.clone(),
            staff_id,
            created_at: now,
            last_used_at: now,
        };
        self.sessions.insert(token, session.clone());
        session
    }

    /// Validates the token and refreshes its idle timer.
    pub fn touch(&mut self, token: &str, now: DateTime<Utc>) -> Result<Session> {
        let session = self.sessions.get_mut(token).ok_or(Error::AuthRequired)?;
        if now - session.last_used_at > self.idle {
            return Err(Error::SessionExpired);
        }
        session.last_used_at = session.last_used_at.max(now);
        Ok(session.clone())
    }

    pub fn close(&mut self, token: &str) -> bool {
        self.sessions.remove(token).is_some()
    }

    pub fn close_all_for(&mut self, staff_id: StaffId) -> usize {
        let before = self.sessions.len();
        self.sessions.retain(|_, s| s.staff_id != staff_id);
        before - self.sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}
