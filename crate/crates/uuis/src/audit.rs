//! Audit trail queries and export. Appends happen inside each operation's
//! own transaction through [`crate::storage::Txn::audit`].

use chrono::Duration;
use uuis_core::catalog::perm;
use uuis_core::{AuditRecord, EntityKind, EntityRef, Person};

use crate::error::{Error, Result};
use crate::service::{Actor, Service};
use crate::sessions::verify_password;
use crate::storage::{format_ts, AuditFilter, Record};

/// Action verbs written to the log.
pub mod action {
    pub const LOGIN: &str = "session.login";
    pub const LOGIN_FAILED: &str = "session.login_failed";
    pub const CHOOSE_ROLE: &str = "session.choose_role";
    pub const LOGOUT: &str = "session.logout";
    pub const SESSION_EXPIRE: &str = "session.expire";
    pub const ENROLL_BIOMETRIC: &str = "session.enroll_biometric";
    pub const AUDIT_LOGIN: &str = "audit.login";
    pub const AUDIT_QUERY: &str = "audit.query";

    pub const PERMISSION_SEED: &str = "permission.seed";
    pub const ROLE_SEED: &str = "role.seed";
    pub const ROLE_ADD: &str = "role.add";
    pub const ROLE_EDIT_FOR_PERSON: &str = "role.edit_for_person";
    pub const ROLE_ASSIGN: &str = "role.assign";
    pub const PERMISSION_ADD: &str = "permission.add";
    pub const PERMISSION_EDIT: &str = "permission.edit";
    pub const PERMISSION_ASSIGN: &str = "permission.assign";

    pub const ASSET_ADD: &str = "asset.add";
    pub const LICENSE_ADD: &str = "license.add";
    pub const LOCATION_ADD: &str = "location.add";
    pub const PERSON_ADD: &str = "person.add";
    pub const FACULTY_ADD: &str = "faculty.add";
    pub const DEPARTMENT_ADD: &str = "department.add";
    pub const GROUP_CREATE: &str = "group.create";
    pub const TYPE_CREATE: &str = "type.create";
    pub const SUBGROUP_CREATE: &str = "subgroup.create";
    pub const ASSET_ASSIGN_PERSON: &str = "asset.assign_person";
    pub const ASSET_ASSIGN_LOCATION: &str = "asset.assign_location";
    pub const LICENSE_ASSIGN_ASSET: &str = "license.assign_asset";
    pub const LOCATION_ASSIGN_LOCATION: &str = "location.assign_location";
    pub const LOCATION_ASSIGN_DEPARTMENT: &str = "location.assign_department";
    pub const LOCATION_ASSIGN_PERSON: &str = "location.assign_person";
    pub const ASSET_BORROW: &str = "asset.borrow";
    pub const LICENSE_BORROW: &str = "license.borrow";
    pub const FLOORPLAN_SET: &str = "floorplan.set";

    pub const REQUEST_SUBMIT: &str = "request.submit";
    pub const REQUEST_DECIDE: &str = "request.decide";
    pub const OUTBOX_NOTICE: &str = "outbox.notice";
    pub const OUTBOX_DRAIN: &str = "outbox.drain";

    pub const SEARCH_BASIC: &str = "search.basic";
    pub const SEARCH_ADVANCED: &str = "search.advanced";
    pub const REPORT_CAPACITY: &str = "report.capacity";
    pub const FLOORPLAN_VIEW: &str = "floorplan.view";
    pub const PROFILE_VIEW: &str = "profile.view";
    pub const REQUEST_LIST: &str = "request.list";

    /// `<kind>.edit`, `<kind>.delete`, `<kind>.view`, `import.<kind>`.
    pub fn edit(kind: uuis_core::EntityKind) -> String {
        format!("{}.edit", kind.as_str())
    }

    pub fn delete(kind: uuis_core::EntityKind) -> String {
        format!("{}.delete", kind.as_str())
    }

    pub fn view(kind: uuis_core::EntityKind) -> String {
        format!("{}.view", kind.as_str())
    }

    pub fn import(kind: uuis_core::TypeKind) -> String {
        format!("import.{}", kind.as_str())
    }
}

pub fn render_refs(refs: &[EntityRef]) -> String {
    refs.iter().map(|r| format!("{}:{}", r.kind, r.id)).collect::<Vec<_>>().join(";")
}

/// CSV with columns `sequence,timestamp,actor,action,refs,details`.
pub fn export_csv(records: &[AuditRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Storage(e.to_string());
    w.write_record(["sequence", "timestamp", "actor", "action", "refs", "details"]).map_err(io)?;
    for r in records {
        w.write_record([
            r.sequence_number.to_string(),
            format_ts(r.timestamp),
            r.actor_id.to_string(),
            r.action.clone(),
            render_refs(&r.entity_refs),
            r.details.clone(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Storage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Storage(e.to_string()))
}

impl Service {
    /// Step-up login for the audit pages. Returns a short-lived audit token
    /// bound to the current session.
    pub fn audit_login(&self, actor: &Actor, password: &str) -> Result<String> {
        actor.require(perm::SEE_AUDIT)?;
        let token = actor.token.as_deref().ok_or(Error::AuditLoginRequired)?;
        let person: Person = self.read(|r| r.get(actor.id()))?;
        if !verify_password(&person.password_digest, password) {
            let details = serde_json::json!({ "reason": "credentials" });
            self.write(|t| t.audit(actor.id(), action::LOGIN_FAILED, &[person.entity_ref()], details.to_string()))?;
            return Err(Error::InvalidCredentials);
        }
        let audit_token = self.sessions.issue_audit_token(token, actor.id(), self.clock.now())?;
        self.write(|t| t.audit(actor.id(), action::AUDIT_LOGIN, &[person.entity_ref()], ""))?;
        Ok(audit_token)
    }

    fn require_audit_session(&self, actor: &Actor, audit_token: Option<&str>) -> Result<()> {
        actor.require(perm::SEE_AUDIT)?;
        // the command line acts without a session and needs no step-up
        let Some(session) = actor.token.as_deref() else {
            return Ok(());
        };
        let audit_token = audit_token.ok_or(Error::AuditLoginRequired)?;
        let lifetime = Duration::minutes(self.config.audit_token_minutes as i64);
        self.sessions.check_audit_token(audit_token, session, actor.id(), self.clock.now(), lifetime)
    }

    /// Filtered audit report in chronological order.
    pub fn audit_query(&self, actor: &Actor, audit_token: Option<&str>, filter: &AuditFilter) -> Result<Vec<AuditRecord>> {
        self.require_audit_session(actor, audit_token)?;
        let records = self.read(|r| r.audit_records(filter))?;
        let details = serde_json::json!({ "returned": records.len() });
        let me = EntityRef::new(EntityKind::Person, actor.id());
        let refs: &[EntityRef] = if actor.token.is_some() { std::slice::from_ref(&me) } else { &[] };
        self.write(|t| t.audit(actor.id(), action::AUDIT_QUERY, refs, details.to_string()))?;
        Ok(records)
    }

    pub fn audit_export(&self, actor: &Actor, audit_token: Option<&str>, filter: &AuditFilter) -> Result<String> {
        export_csv(&self.audit_query(actor, audit_token, filter)?)
    }
}
