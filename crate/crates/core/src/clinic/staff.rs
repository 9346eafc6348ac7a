use serde::{Deserialize, Serialize};

use super::{Actor, Clinic};
use crate::auth::{
    hash_password, verify_password, DigestScheme, Permission, Role, Session, StaffAccount,
    StaffSummary,
};
use crate::domain::{normalize_person_name, Centre, CentreDetails, PersonName};
use crate::error::{Error, Result};
use crate::ids::{CentreId, StaffId};
use crate::store::{ActorRef, AuditEvent, AuditOutcome, EntityRef, State};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewStaff {
    pub username: String,
    pub role: Role,
    pub given: String,
    pub family: String,
    #[serde(default)]
    pub contact: String,
}

/// Editable account fields. `username` and `role` exist only so that an
/// attempt to change them can be refused.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaffChanges {
    pub given: Option<String>,
    pub family: Option<String>,
    pub contact: Option<String>,
    pub username: Option<String>,
    pub role: Option<Role>,
}

fn staff_ref(id: StaffId) -> Option<EntityRef> {
    Some(EntityRef::new("staff", id.0))
}

fn check_username(username: &str) -> Result<()> {
    if username.is_empty() || username.chars().any(char::is_whitespace) {
        return Err(Error::BadRequest("username must be non-empty without spaces".into()));
    }
    Ok(())
}

fn active_admins(state: &State) -> usize {
    state
        .staff
        .values()
        .filter(|a| a.active && a.role == Role::Administrator)
        .count()
}

impl Clinic {
    fn insert_account(&self, actor: ActorRef, details: &NewStaff, password: &str, action: &str) -> Result<StaffId> {
        check_username(&details.username)?;
        let name = PersonName::new(&details.given, &details.family)?;
        let digest = hash_password(password, DigestScheme::Strong, self.config.allow_legacy_md5)?;
        self.transact(|tx| {
            if tx.staff.values().any(|a| a.username == details.username) {
                return Err(Error::DuplicateUsername);
            }
            if action == "staff.bootstrap" && tx.staff.values().any(|a| a.role == Role::Administrator) {
                return Err(Error::AdministratorExists);
            }
            let id = StaffId(tx.allocate_id());
            tx.staff.insert(
                id,
                StaffAccount {
                    id,
                    username: details.username.clone(),
                    digest_scheme: DigestScheme::Strong,
                    digest: digest.clone(),
                    role: details.role,
                    name: name.clone(),
                    contact: details.contact.trim().to_owned(),
                    active: true,
                },
            );
            tx.audit(AuditEvent::ok(actor, action, staff_ref(id)).with_detail(details.role.to_string()));
            Ok(id)
        })
    }

    /// Creates the first administrator. Refused once any administrator
    /// account exists.
    pub fn bootstrap_admin(&self, username: &str, password: &str, given: &str, family: &str) -> Result<StaffId> {
        if active_admins(&self.store.snapshot()) > 0
            || self.store.snapshot().staff.values().any(|a| a.role == Role::Administrator)
        {
            return Err(Error::AdministratorExists);
        }
        let details = NewStaff {
            username: username.to_owned(),
            role: Role::Administrator,
            given: given.to_owned(),
            family: family.to_owned(),
            contact: String::new(),
        };
        self.insert_account(ActorRef::System, &details, password, "staff.bootstrap")
    }

    fn check_credentials(&self, username: &str, password: &str) -> Result<Actor> {
        let state = self.store.snapshot();
        let account = state.staff.values().find(|a| a.username == username);
        let failure = match account {
            None => Some("unknown-user"),
            Some(a) => {
                let scheme_allowed =
                    a.digest_scheme == DigestScheme::Strong || self.config.allow_legacy_md5;
                if !scheme_allowed || !verify_password(password, a.digest_scheme, &a.digest) {
                    Some("bad-password")
                } else if !a.active {
                    Some("inactive")
                } else {
                    None
                }
            }
        };
        if let Some(reason) = failure {
            let entity = account.map(|a| EntityRef::new("staff", a.id.0));
            let actor = account.map(|a| ActorRef::Staff(a.id)).unwrap_or(ActorRef::System);
            self.audit_only(
                AuditEvent::ok(actor, "auth.login", entity)
                    .with_outcome(AuditOutcome::Denied)
                    .with_detail(reason),
            )?;
            return Err(Error::AuthFailed);
        }
        let account = account.expect("checked above");
        Ok(Actor {
            staff_id: account.id,
            role: account.role,
        })
    }

    /// Opens a session. Unknown users, wrong passwords and inactive accounts
    /// all fail the same way; the audit log records which it was.
    pub fn login(&self, username: &str, password: &str) -> Result<Session> {
        let actor = self.check_credentials(username, password)?;
        let session = self.sessions().open(actor.staff_id, self.now());
        self.audit_only(AuditEvent::ok(actor.as_ref(), "auth.login", staff_ref(actor.staff_id)))?;
        Ok(session)
    }

    /// Checks credentials and one permission without opening a session, for
    /// offline tools. Success leaves no trace; failures are audited like
    /// failed logins.
    pub fn authenticate(&self, username: &str, password: &str, permission: Permission) -> Result<Actor> {
        let actor = self.check_credentials(username, password)?;
        if !actor.role.permits(permission) {
            return Err(Error::Forbidden);
        }
        Ok(actor)
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        let actor = self.authorize(token, Permission::Login)?;
        self.sessions().close(token);
        self.audit_only(AuditEvent::ok(actor.as_ref(), "auth.logout", staff_ref(actor.staff_id)))
    }

    pub fn create_staff_account(&self, token: &str, details: &NewStaff, initial_password: &str) -> Result<StaffId> {
        let actor = self.authorize(token, Permission::CreateStaffAccount)?;
        self.insert_account(actor.as_ref(), details, initial_password, "staff.create")
    }

    pub fn edit_staff_account(&self, token: &str, staff_id: StaffId, changes: &StaffChanges) -> Result<StaffSummary> {
        let actor = self.authorize(token, Permission::EditStaffAccount)?;
        if changes.role.is_some() || changes.username.is_some() {
            return Err(Error::RoleChangeNotAllowedHere);
        }
        let given = changes.given.as_deref().map(normalize_person_name).transpose()?;
        let family = changes.family.as_deref().map(normalize_person_name).transpose()?;
        self.transact(|tx| {
            let account = tx.staff.get_mut(&staff_id).ok_or_else(|| Error::not_found(staff_id))?;
            if given.is_some() || family.is_some() {
                account.name = PersonName::new(
                    given.as_deref().unwrap_or(account.name.given()),
                    family.as_deref().unwrap_or(account.name.family()),
                )?;
            }
            if let Some(c) = &changes.contact {
                account.contact = c.trim().to_owned();
            }
            let summary = StaffSummary::from(&*account);
            tx.audit(AuditEvent::ok(actor.as_ref(), "staff.edit", staff_ref(staff_id)));
            Ok(summary)
        })
    }

    /// Sets role and active flag, then drops every session of that account.
    pub fn manage_role(&self, token: &str, staff_id: StaffId, role: Role, active: bool) -> Result<StaffSummary> {
        let actor: Actor = self.authorize(token, Permission::ManageRole)?;
        let summary = self.transact(|tx| {
            let account = tx.staff.get_mut(&staff_id).ok_or_else(|| Error::not_found(staff_id))?;
            let before = (account.role, account.active);
            account.role = role;
            account.active = active;
            let summary = StaffSummary::from(&*account);
            if active_admins(tx) == 0 {
                return Err(Error::LastAdministrator);
            }
            tx.audit(
                AuditEvent::ok(actor.as_ref(), "staff.manage_role", staff_ref(staff_id)).with_detail(
                    format!("{}/{} -> {}/{}", before.0, before.1, role, active),
                ),
            );
            Ok(summary)
        })?;
        self.sessions().close_all_for(staff_id);
        Ok(summary)
    }

    /// Records the centre and makes it the only active one.
    pub fn create_centre(&self, token: &str, details: &CentreDetails) -> Result<CentreId> {
        let actor = self.authorize(token, Permission::CreateCentre)?;
        if details.name.trim().is_empty() {
            return Err(Error::BadRequest("centre name is empty".into()));
        }
        self.transact(|tx| {
            for c in tx.centres.values_mut() {
                c.active = false;
            }
            let id = CentreId(tx.allocate_id());
            tx.centres.insert(
                id,
                Centre {
                    id,
                    name: details.name.trim().to_owned(),
                    address: details.address.trim().to_owned(),
                    contact: details.contact.trim().to_owned(),
                    connection_details: details.connection_details.clone(),
                    active: true,
                },
            );
            tx.audit(AuditEvent::ok(actor.as_ref(), "centre.create", Some(EntityRef::new("centre", id.0))));
            Ok(id)
        })
    }

    pub fn get_staff(&self, token: &str, staff_id: StaffId) -> Result<StaffSummary> {
        self.authorize(token, Permission::EditStaffAccount)?;
        self.store
            .snapshot()
            .staff
            .get(&staff_id)
            .map(StaffSummary::from)
            .ok_or_else(|| Error::not_found(staff_id))
    }
}
