//! Login, role choice, idle expiry, logout and the biometric stub.
//!
//! Sessions live in memory only. A session idle for the configured window
//! (30 minutes by default, boundary inclusive) becomes a tombstone that
//! refuses every further use until the token is forgotten.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use chrono::Duration;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuis_core::authz::{effective_permissions, visible_scope, Principal};
use uuis_core::catalog::perm;
use uuis_core::validate::validate_username;
use uuis_core::{EntityId, EntityKind, EntityRef, Person, Role, Session, Status, Timestamp, SYSTEM_ACTOR};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, Service};
use crate::storage::Record;

/// Hook consulted before credentials are checked. The default admits everyone.
pub trait LoginGuard: Send + Sync {
    fn admit(&self, username: &str) -> Result<()>;
}

pub struct NoGuard;

impl LoginGuard for NoGuard {
    fn admit(&self, _username: &str) -> Result<()> {
        Ok(())
    }
}

/// 256 random bits, hex encoded.
pub fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::thread_rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// `sha256$<salt>$<digest>` with a random 128-bit salt.
pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut salt);
    let salt = hex::encode(salt);
    let digest = sha256_hex(&[salt.as_bytes(), b":", password.as_bytes()]);
    format!("sha256${salt}${digest}")
}

pub fn verify_password(stored: &str, password: &str) -> bool {
    let mut parts = stored.splitn(3, '$');
    match (parts.next(), parts.next(), parts.next()) {
        (Some("sha256"), Some(salt), Some(digest)) => {
            sha256_hex(&[salt.as_bytes(), b":", password.as_bytes()]) == digest
        }
        _ => false,
    }
}

/// Digest kept in place of a voice sample; equality stands in for matching.
pub fn biometric_digest(sample: &[u8]) -> String {
    sha256_hex(&[sample])
}

#[derive(Debug, Clone)]
struct Entry {
    session: Session,
    pending: bool,
    expired: bool,
}

#[derive(Debug, Clone)]
struct AuditGrant {
    session_token: String,
    person_id: EntityId,
    issued_at: Timestamp,
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, Entry>,
    audit_tokens: HashMap<String, AuditGrant>,
}

/// Outcome of touching a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Touch {
    Live { session: Session, pending: bool },
    /// `newly` is true exactly once, for the call that crossed the window.
    Expired { person_id: EntityId, newly: bool },
}

#[derive(Default)]
pub struct SessionRegistry {
    inner: Mutex<Registry>,
}

impl SessionRegistry {
    fn lock(&self) -> Result<std::sync::MutexGuard<'_, Registry>> {
        self.inner.lock().map_err(|_| Error::Storage("session registry poisoned".into()))
    }

    fn create(&self, person_id: EntityId, active_role_id: Option<EntityId>, pending: bool, now: Timestamp) -> Result<String> {
        let token = new_token();
        let session = Session { token: token.clone(), person_id, active_role_id, last_activity: now, created_at: now };
        let mut reg = self.lock()?;
        // forget tombstones after a day
        reg.sessions.retain(|_, e| !e.expired || now - e.session.last_activity < Duration::days(1));
        reg.sessions.insert(token.clone(), Entry { session, pending, expired: false });
        Ok(token)
    }

    /// Expires the session when idle for at least `idle`, otherwise records activity.
    pub fn touch_or_expire(&self, token: &str, now: Timestamp, idle: Duration) -> Result<Touch> {
        let mut reg = self.lock()?;
        let entry = reg.sessions.get_mut(token).ok_or(Error::UnknownToken)?;
        if entry.expired {
            return Ok(Touch::Expired { person_id: entry.session.person_id, newly: false });
        }
        if now - entry.session.last_activity >= idle {
            entry.expired = true;
            let person_id = entry.session.person_id;
            reg.audit_tokens.retain(|_, g| g.session_token != token);
            return Ok(Touch::Expired { person_id, newly: true });
        }
        if now > entry.session.last_activity {
            entry.session.last_activity = now;
        }
        Ok(Touch::Live { session: entry.session.clone(), pending: entry.pending })
    }

    fn activate(&self, token: &str, role_id: EntityId) -> Result<()> {
        let mut reg = self.lock()?;
        let entry = reg.sessions.get_mut(token).ok_or(Error::UnknownToken)?;
        entry.session.active_role_id = Some(role_id);
        entry.pending = false;
        Ok(())
    }

    fn remove(&self, token: &str) -> Result<()> {
        let mut reg = self.lock()?;
        reg.sessions.remove(token).ok_or(Error::UnknownToken)?;
        reg.audit_tokens.retain(|_, g| g.session_token != token);
        Ok(())
    }

    pub fn live_count(&self) -> usize {
        self.lock().map(|r| r.sessions.values().filter(|e| !e.expired).count()).unwrap_or(0)
    }

    pub(crate) fn issue_audit_token(&self, session_token: &str, person_id: EntityId, now: Timestamp) -> Result<String> {
        let token = new_token();
        let grant = AuditGrant { session_token: session_token.to_string(), person_id, issued_at: now };
        self.lock()?.audit_tokens.insert(token.clone(), grant);
        Ok(token)
    }

    pub(crate) fn check_audit_token(
        &self,
        audit_token: &str,
        session_token: &str,
        person_id: EntityId,
        now: Timestamp,
        lifetime: Duration,
    ) -> Result<()> {
        let mut reg = self.lock()?;
        let grant = reg.audit_tokens.get(audit_token).cloned().ok_or(Error::AuditLoginRequired)?;
        if grant.session_token != session_token || grant.person_id != person_id {
            return Err(Error::AuditLoginRequired);
        }
        if now - grant.issued_at >= lifetime {
            reg.audit_tokens.remove(audit_token);
            return Err(Error::AuditLoginRequired);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSummary {
    pub id: EntityId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoginOutcome {
    pub token: String,
    pub person_id: EntityId,
    pub roles: Vec<RoleSummary>,
    pub active_role_id: Option<EntityId>,
    pub role_choice_required: bool,
}

impl Service {
    fn idle(&self) -> Duration {
        Duration::minutes(self.config.idle_minutes as i64)
    }

    pub fn login(&self, username: &str, password: &str, voice_sample: Option<&[u8]>) -> Result<LoginOutcome> {
        if !validate_username(username) {
            return Err(Error::MalformedUsername);
        }
        self.guard.admit(username)?;
        let person: Option<Person> = self.read(|r| r.find_by("username", &username))?;
        let person = match person {
            Some(p) if p.status != Status::Unavailable && verify_password(&p.password_digest, password) => p,
            other => {
                let refs: Vec<EntityRef> = other.iter().map(|p| p.entity_ref()).collect();
                let details = serde_json::json!({ "username": username, "reason": "credentials" });
                self.write(|t| t.audit(SYSTEM_ACTOR, action::LOGIN_FAILED, &refs, details.to_string()))?;
                return Err(Error::InvalidCredentials);
            }
        };
        if person.high_privileged {
            if let Some(enrolled) = &person.biometric_digest {
                let matches = voice_sample.is_some_and(|s| biometric_digest(s) == *enrolled);
                if !matches {
                    let details = serde_json::json!({ "username": username, "reason": "biometric" });
                    self.write(|t| {
                        t.audit(SYSTEM_ACTOR, action::LOGIN_FAILED, &[person.entity_ref()], details.to_string())
                    })?;
                    return Err(Error::BiometricMismatch);
                }
            }
        }
        let roles: Vec<RoleSummary> = self.read(|r| {
            person
                .role_ids
                .iter()
                .filter_map(|id| r.find::<Role>(*id).transpose())
                .map(|role| role.map(|role| RoleSummary { id: role.id, name: role.name }))
                .collect()
        })?;
        let pending = roles.len() > 1;
        let active = if roles.len() == 1 { Some(roles[0].id) } else { None };
        let now = self.clock.now();
        let token = self.sessions.create(person.id, active, pending, now)?;
        let details = serde_json::json!({ "roles": roles.len(), "role_choice_required": pending });
        self.write(|t| t.audit(person.id, action::LOGIN, &[person.entity_ref()], details.to_string()))?;
        Ok(LoginOutcome { token, person_id: person.id, roles, active_role_id: active, role_choice_required: pending })
    }

    /// Touches the session and returns it. Expiry is audited once.
    pub fn touch_or_expire(&self, token: &str) -> Result<(Session, bool)> {
        match self.sessions.touch_or_expire(token, self.clock.now(), self.idle())? {
            Touch::Live { session, pending } => Ok((session, pending)),
            Touch::Expired { person_id, newly } => {
                if newly {
                    let r = EntityRef::new(EntityKind::Person, person_id);
                    self.write(|t| t.audit(person_id, action::SESSION_EXPIRE, &[r], "idle window reached"))?;
                }
                Err(Error::SessionExpired)
            }
        }
    }

    /// Resolves a live, role-activated session into an actor.
    pub fn authenticate(&self, token: &str) -> Result<Actor> {
        let (session, pending) = self.touch_or_expire(token)?;
        if pending {
            return Err(Error::RoleChoiceRequired);
        }
        self.actor_for(&session)
    }

    fn actor_for(&self, session: &Session) -> Result<Actor> {
        let (person, role) = self.read(|r| {
            let person: Person = r.get(session.person_id)?;
            let role = match session.active_role_id {
                Some(id) if person.role_ids.contains(&id) => r.find::<Role>(id)?,
                _ => None,
            };
            Ok((person, role))
        })?;
        if person.status == Status::Unavailable {
            self.sessions.remove(&session.token).ok();
            return Err(Error::UnknownToken);
        }
        let today = self.clock.now().date_naive();
        let permissions = effective_permissions(role.as_ref(), person.extra_grants.iter(), today);
        let scope = visible_scope(&person).map_err(|e| Error::Integrity(e.to_string()))?;
        Ok(Actor {
            principal: Principal { person_id: person.id, level: person.level, scope, permissions },
            org: person.org(),
            active_role_id: role.map(|r| r.id),
            token: Some(session.token.clone()),
        })
    }

    pub fn choose_role(&self, token: &str, role_id: EntityId) -> Result<Actor> {
        let (session, _) = self.touch_or_expire(token)?;
        let person: Person = self.read(|r| r.get(session.person_id))?;
        if !person.role_ids.contains(&role_id) {
            return Err(Error::ForeignRole(role_id));
        }
        self.sessions.activate(token, role_id)?;
        let refs = [person.entity_ref(), EntityRef::new(EntityKind::Role, role_id)];
        self.write(|t| t.audit(person.id, action::CHOOSE_ROLE, &refs, ""))?;
        self.authenticate(token)
    }

    pub fn logout(&self, token: &str) -> Result<&'static str> {
        let (session, _) = self.touch_or_expire(token)?;
        self.sessions.remove(token)?;
        let r = EntityRef::new(EntityKind::Person, session.person_id);
        self.write(|t| t.audit(session.person_id, action::LOGOUT, &[r], ""))?;
        Ok("Logged out successfully")
    }

    pub fn enroll_biometric(&self, actor: &Actor, sample: &[u8]) -> Result<String> {
        actor.require(perm::ADD_BIOMETRIC)?;
        self.write(|t| {
            let mut person: Person = t.get(actor.id())?;
            if !person.high_privileged {
                return Err(Error::NotHighPrivileged);
            }
            if person.biometric_digest.is_some() {
                return Err(Error::AlreadyEnrolled);
            }
            if sample.is_empty() {
                return Err(Error::EmptySample);
            }
            let digest = biometric_digest(sample);
            person.biometric_digest = Some(digest.clone());
            t.update(&person)?;
            t.audit(actor.id(), action::ENROLL_BIOMETRIC, &[person.entity_ref()], "")?;
            Ok(digest)
        })
    }

    /// Roles the session's person holds, for the role picker.
    pub fn session_roles(&self, token: &str) -> Result<Vec<RoleSummary>> {
        let (session, _) = self.touch_or_expire(token)?;
        self.read(|r| {
            let person: Person = r.get(session.person_id)?;
            let ids: BTreeSet<EntityId> = person.role_ids.clone();
            ids.into_iter()
                .filter_map(|id| r.find::<Role>(id).transpose())
                .map(|role| role.map(|role| RoleSummary { id: role.id, name: role.name }))
                .collect()
        })
    }
}
