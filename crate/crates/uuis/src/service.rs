//! The service object every operation hangs off, and the acting principal.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use uuis_core::authz::{self, Decision, DenyReason, Principal};
use uuis_core::catalog::Catalog;
use uuis_core::{
    EntityId, EntityType, FieldDescriptor, Level, OrgRef, PermissionGrant, Role, Scope, TypeKind,
    SYSTEM_ACTOR,
};

use crate::clock::Clock;
use crate::config::Config;
use crate::error::{Error, ErrorPayload, Result};
use crate::sessions::{LoginGuard, NoGuard, SessionRegistry};
use crate::storage::{Record, Repo, Store, Txn};

/// Who is performing an operation, resolved from a live session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Actor {
    pub principal: Principal,
    /// The person's own placement; defaults for records they create.
    pub org: OrgRef,
    pub active_role_id: Option<EntityId>,
    #[serde(skip)]
    pub(crate) token: Option<String>,
}

impl Actor {
    pub fn id(&self) -> EntityId {
        self.principal.person_id
    }

    pub fn level(&self) -> Level {
        self.principal.level
    }

    pub fn has(&self, permission: &str) -> bool {
        self.principal.has(permission)
    }

    pub fn sees(&self, org: OrgRef) -> bool {
        self.principal.sees(org)
    }

    pub fn require(&self, permission: &str) -> Result<()> {
        self.check(permission, None)
    }

    pub fn check(&self, permission: &str, target: Option<OrgRef>) -> Result<()> {
        match authz::check(&self.principal, permission, target) {
            Decision::Allow => Ok(()),
            Decision::Deny(DenyReason::MissingPermission(p)) => Err(Error::PermissionDenied(p)),
            Decision::Deny(DenyReason::OutOfScope) => Err(Error::OutOfScope),
        }
    }

    pub fn require_scope(&self, org: OrgRef) -> Result<()> {
        if self.sees(org) {
            Ok(())
        } else {
            Err(Error::OutOfScope)
        }
    }

    /// University-level actor holding the given permissions, used by the
    /// command line tools.
    pub fn system(permissions: impl IntoIterator<Item = String>) -> Actor {
        Actor {
            principal: Principal {
                person_id: SYSTEM_ACTOR,
                level: Level::University,
                scope: Scope::UNIVERSITY,
                permissions: permissions.into_iter().collect(),
            },
            org: OrgRef::UNIVERSITY,
            active_role_id: None,
            token: None,
        }
    }
}

/// Result of one item inside a bulk operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemOutcome {
    pub item: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorPayload>,
}

impl ItemOutcome {
    pub fn ok(item: impl ToString) -> ItemOutcome {
        ItemOutcome { item: item.to_string(), ok: true, error: None }
    }

    pub fn failed(item: impl ToString, error: &Error) -> ItemOutcome {
        ItemOutcome { item: item.to_string(), ok: false, error: Some(error.payload()) }
    }

    pub fn from_result<T>(item: impl ToString, result: &Result<T>) -> ItemOutcome {
        match result {
            Ok(_) => ItemOutcome::ok(item),
            Err(e) => ItemOutcome::failed(item, e),
        }
    }
}

pub struct Service {
    pub(crate) store: Store,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) config: Config,
    pub(crate) sessions: SessionRegistry,
    pub(crate) guard: Box<dyn LoginGuard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InitReport {
    pub permissions: usize,
    pub roles: usize,
    pub types: usize,
}

/// Types registered at initialisation so every kind can be added at once.
pub fn default_types() -> Vec<(TypeKind, &'static str, Vec<FieldDescriptor>)> {
    let asset = |extra: &[&str]| {
        let mut f = vec![FieldDescriptor::required("name"), FieldDescriptor::required("barcode")];
        f.extend(["serial_number", "brand", "description"].iter().map(|n| FieldDescriptor::optional(*n)));
        f.extend(extra.iter().map(|n| FieldDescriptor::optional(*n)));
        f
    };
    let location = || {
        vec![
            FieldDescriptor::required("location_number"),
            FieldDescriptor::optional("capacity"),
            FieldDescriptor::optional("description"),
        ]
    };
    vec![
        (TypeKind::Asset, "generic", asset(&[])),
        (TypeKind::Asset, "chair", asset(&["color", "material"])),
        (TypeKind::Asset, "table", asset(&["color", "material"])),
        (TypeKind::Asset, "pc", asset(&["host_name", "version"])),
        (TypeKind::License, "generic", vec![FieldDescriptor::required("name"), FieldDescriptor::optional("seats")]),
        (TypeKind::Location, "generic", location()),
        (TypeKind::Location, "building", location()),
        (TypeKind::Location, "teaching_lab", location()),
        (TypeKind::Location, "research_lab", location()),
        (TypeKind::Location, "office", location()),
        (TypeKind::Person, "generic", vec![FieldDescriptor::required("username")]),
    ]
}

impl Service {
    pub fn new(store: Store, clock: Arc<dyn Clock>, config: Config) -> Service {
        Service { store, clock, config, sessions: SessionRegistry::default(), guard: Box::new(NoGuard) }
    }

    /// Replaces the no-op login guard (for example with a CAPTCHA check).
    pub fn with_login_guard(mut self, guard: Box<dyn LoginGuard>) -> Service {
        self.guard = guard;
        self
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub(crate) fn write<T>(&self, f: impl FnOnce(&mut Txn<'_>) -> Result<T>) -> Result<T> {
        self.store.write(self.clock.now(), f)
    }

    pub(crate) fn read<T>(&self, f: impl FnOnce(&Repo<'_>) -> Result<T>) -> Result<T> {
        self.store.read(f)
    }

    /// Registers the permission catalog, the default roles and the default
    /// entity types. Fails with `AlreadySeeded` when roles exist.
    pub fn init(&self, catalog: &Catalog) -> Result<InitReport> {
        let perms = self.seed_catalog(catalog)?;
        let roles = self.seed_default_roles(catalog)?;
        let types = self.write(|t| {
            let existing = t.scan::<EntityType>()?;
            let mut refs = Vec::new();
            for (kind, name, field_set) in default_types() {
                if existing.iter().any(|e| e.kind == kind && e.name == name) {
                    continue;
                }
                let ty = t.insert(EntityType { id: EntityId(0), kind, name: name.into(), field_set })?;
                refs.push(ty.entity_ref());
            }
            if !refs.is_empty() {
                t.audit(SYSTEM_ACTOR, crate::audit::action::TYPE_CREATE, &refs, "default types")?;
            }
            Ok(refs.len())
        })?;
        Ok(InitReport { permissions: perms, roles, types })
    }

    /// Adds catalog names missing from the store. Returns how many were added.
    pub fn seed_catalog(&self, catalog: &Catalog) -> Result<usize> {
        self.write(|t| {
            let known: BTreeSet<String> = t.permissions()?.into_iter().collect();
            let mut added = Vec::new();
            for p in &catalog.permissions {
                if !known.contains(p) {
                    t.add_permission(p)?;
                    added.push(p.clone());
                }
            }
            if !added.is_empty() {
                let details = serde_json::json!({ "version": catalog.version, "added": added.len() });
                t.audit(SYSTEM_ACTOR, crate::audit::action::PERMISSION_SEED, &[], details.to_string())?;
            }
            Ok(added.len())
        })
    }

    /// Creates the default roles with the base set merged into each.
    pub fn seed_default_roles(&self, catalog: &Catalog) -> Result<usize> {
        self.write(|t| {
            if t.count::<Role>()? > 0 {
                return Err(Error::AlreadySeeded);
            }
            let mut refs = Vec::new();
            for (name, perms) in catalog.default_roles() {
                let role = Role {
                    id: EntityId(0),
                    name,
                    grants: perms.into_iter().map(PermissionGrant::new).collect(),
                };
                refs.push(t.insert(role)?.entity_ref());
            }
            t.audit(SYSTEM_ACTOR, crate::audit::action::ROLE_SEED, &refs, "default roles")?;
            Ok(refs.len())
        })
    }

    /// Actor with every registered permission, for administrative tooling.
    pub fn system_actor(&self) -> Result<Actor> {
        Ok(Actor::system(self.read(|r| r.permissions())?))
    }
}
