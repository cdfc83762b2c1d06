//! Level-based visibility and permission decisions.
//!
//! Everything here is a pure function of its inputs: grants, due dates,
//! scope and the date supplied by the caller.

use alloc::collections::BTreeSet;
use alloc::string::String;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{EntityId, Level, OrgRef, Person, PermissionGrant, Role, Scope};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("person {0} has level {1:?} but no faculty")]
    MissingFaculty(EntityId, Level),
    #[error("person {0} has level {1:?} but no department")]
    MissingDepartment(EntityId, Level),
}

/// Region of the organisation a person can see and manage.
pub fn visible_scope(person: &Person) -> Result<Scope, ScopeError> {
    match person.level {
        Level::University => Ok(Scope::UNIVERSITY),
        Level::Faculty => {
            let faculty = person.faculty_id.ok_or(ScopeError::MissingFaculty(person.id, person.level))?;
            Ok(Scope { level: Level::Faculty, faculty_id: Some(faculty), department_id: None })
        }
        level @ (Level::Department | Level::User) => {
            let faculty = person.faculty_id.ok_or(ScopeError::MissingFaculty(person.id, level))?;
            let department =
                person.department_id.ok_or(ScopeError::MissingDepartment(person.id, level))?;
            Ok(Scope { level, faculty_id: Some(faculty), department_id: Some(department) })
        }
    }
}

/// Permissions in force on `today` for a session acting under `active_role`
/// together with the person's own grants. Expired grants are dropped.
pub fn effective_permissions<'a>(
    active_role: Option<&'a Role>,
    extra_grants: impl IntoIterator<Item = &'a PermissionGrant>,
    today: NaiveDate,
) -> BTreeSet<String> {
    active_role
        .into_iter()
        .flat_map(|r| r.grants.iter())
        .chain(extra_grants)
        .filter(|g| g.is_active_on(today))
        .map(|g| g.permission.clone())
        .collect()
}

/// The authenticated actor as seen by permission checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub person_id: EntityId,
    pub level: Level,
    pub scope: Scope,
    pub permissions: BTreeSet<String>,
}

impl Principal {
    pub fn has(&self, permission: &str) -> bool {
        self.permissions.contains(permission)
    }

    pub fn sees(&self, org: OrgRef) -> bool {
        self.scope.contains(org)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum DenyReason {
    MissingPermission(String),
    OutOfScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allowed(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// Allow iff the permission is held and the target (when given) is in scope.
pub fn check(principal: &Principal, permission: &str, target: Option<OrgRef>) -> Decision {
    if !principal.has(permission) {
        return Decision::Deny(DenyReason::MissingPermission(permission.into()));
    }
    match target {
        Some(org) if !principal.sees(org) => Decision::Deny(DenyReason::OutOfScope),
        _ => Decision::Allow,
    }
}
