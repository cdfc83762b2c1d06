//! Role and permission administration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use uuis_core::catalog::perm;
use uuis_core::{EntityId, EntityRef, PermissionGrant, Person, Role};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, ItemOutcome, Service};
use crate::storage::{Record, Repo};

/// Changes to one person's own grants and roles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantChange {
    #[serde(default)]
    pub add: Vec<PermissionGrant>,
    #[serde(default)]
    pub remove: Vec<String>,
    #[serde(default)]
    pub add_roles: Vec<EntityId>,
    #[serde(default)]
    pub remove_roles: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonGrants {
    pub person_id: EntityId,
    pub role_ids: BTreeSet<EntityId>,
    pub extra_grants: BTreeSet<PermissionGrant>,
}

/// What a bulk assignment hands out: a role or a single grant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(default)]
    pub role_id: Option<EntityId>,
    #[serde(default)]
    pub grant: Option<PermissionGrant>,
}

fn check_known(repo: &Repo<'_>, grants: &[PermissionGrant]) -> Result<()> {
    for g in grants {
        if !repo.permission_exists(&g.permission)? {
            return Err(Error::UnknownPermission(g.permission.clone()));
        }
    }
    Ok(())
}

impl Service {
    pub fn list_roles(&self) -> Result<Vec<Role>> {
        self.read(|r| r.scan::<Role>())
    }

    pub fn list_permissions(&self) -> Result<Vec<String>> {
        self.read(|r| r.permissions())
    }

    pub fn add_role(&self, actor: &Actor, name: &str, grants: Vec<PermissionGrant>) -> Result<Role> {
        actor.require(perm::ADD_ROLE)?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if grants.is_empty() {
            return Err(Error::EmptyGrants);
        }
        self.write(|t| {
            check_known(t, &grants)?;
            if t.find_by::<Role>("name", &name)?.is_some() {
                return Err(Error::DuplicateName(name.to_string()));
            }
            let role = t.insert(Role { id: EntityId(0), name: name.to_string(), grants: grants.into_iter().collect() })?;
            t.audit(actor.id(), action::ROLE_ADD, &[role.entity_ref()], "")?;
            Ok(role)
        })
    }

    /// Moves permissions and roles in and out of one person's lists.
    pub fn edit_role_for_person(&self, actor: &Actor, persons: &[EntityId], change: &GrantChange) -> Result<PersonGrants> {
        actor.require(perm::EDIT_ROLE)?;
        let [person_id] = persons else {
            return Err(Error::SelectOnePerson);
        };
        self.write(|t| {
            let mut person: Person = t.get(*person_id)?;
            actor.require_scope(person.org())?;
            check_known(t, &change.add)?;
            for role_id in &change.add_roles {
                t.get::<Role>(*role_id)?;
            }
            for name in &change.remove {
                person.extra_grants.retain(|g| &g.permission != name);
            }
            for grant in &change.add {
                person.extra_grants.retain(|g| g.permission != grant.permission);
                person.extra_grants.insert(grant.clone());
            }
            for id in &change.remove_roles {
                person.role_ids.remove(id);
            }
            person.role_ids.extend(change.add_roles.iter().copied());
            if person.role_ids.is_empty() && person.extra_grants.is_empty() {
                return Err(Error::EmptyGrantList);
            }
            t.update(&person)?;
            let details = serde_json::to_string(change)?;
            t.audit(actor.id(), action::ROLE_EDIT_FOR_PERSON, &[person.entity_ref()], details)?;
            Ok(PersonGrants { person_id: person.id, role_ids: person.role_ids, extra_grants: person.extra_grants })
        })
    }

    pub fn add_permission(&self, actor: &Actor, name: &str) -> Result<()> {
        actor.require(perm::ADD_PERMISSION)?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        self.write(|t| {
            if t.permission_exists(name)? {
                return Err(Error::DuplicateName(name.to_string()));
            }
            t.add_permission(name)?;
            t.audit(actor.id(), action::PERMISSION_ADD, &[], serde_json::json!({ "name": name }).to_string())?;
            Ok(())
        })
    }

    /// Renames a permission nobody holds yet.
    pub fn edit_permission(&self, actor: &Actor, old: &str, new: &str) -> Result<()> {
        actor.require(perm::EDIT_PERMISSION)?;
        let new = new.trim();
        if new.is_empty() {
            return Err(Error::EmptyName);
        }
        self.write(|t| {
            if !t.permission_exists(old)? {
                return Err(Error::UnknownPermission(old.to_string()));
            }
            let in_roles = t.scan::<Role>()?.iter().any(|r| r.grants.iter().any(|g| g.permission == old));
            let in_persons =
                t.scan::<Person>()?.iter().any(|p| p.extra_grants.iter().any(|g| g.permission == old));
            if in_roles || in_persons {
                return Err(Error::PermissionInUse(old.to_string()));
            }
            if t.permission_exists(new)? {
                return Err(Error::DuplicateName(new.to_string()));
            }
            t.rename_permission(old, new)?;
            let details = serde_json::json!({ "from": old, "to": new });
            t.audit(actor.id(), action::PERMISSION_EDIT, &[], details.to_string())?;
            Ok(())
        })
    }

    /// Gives a role or grant to several persons. Each person succeeds or
    /// fails on its own; out-of-scope persons are reported, not skipped.
    pub fn assign_bulk(&self, actor: &Actor, persons: &[EntityId], assignment: &Assignment) -> Result<Vec<ItemOutcome>> {
        if persons.is_empty() {
            return Err(Error::EmptySelection);
        }
        let (permission, verb) = match (assignment.role_id, &assignment.grant) {
            (Some(_), None) => (perm::ASSIGN_ROLE_TO_PERSONS, action::ROLE_ASSIGN),
            (None, Some(_)) => (perm::ASSIGN_PERMISSION_TO_PERSONS, action::PERMISSION_ASSIGN),
            (None, None) => return Err(Error::NoChoice),
            (Some(_), Some(_)) => return Err(Error::BadRequest("choose a role or a permission, not both".into())),
        };
        actor.require(permission)?;
        self.write(|t| {
            if let Some(role_id) = assignment.role_id {
                t.get::<Role>(role_id)?;
            }
            if let Some(grant) = &assignment.grant {
                check_known(t, std::slice::from_ref(grant))?;
            }
            let mut out = Vec::with_capacity(persons.len());
            for id in persons {
                let result = t.savepoint(|t| {
                    let mut person: Person = t.get(*id)?;
                    actor.require_scope(person.org())?;
                    let mut refs: Vec<EntityRef> = vec![person.entity_ref()];
                    if let Some(role_id) = assignment.role_id {
                        person.role_ids.insert(role_id);
                        refs.push(EntityRef::new(uuis_core::EntityKind::Role, role_id));
                    }
                    if let Some(grant) = &assignment.grant {
                        person.extra_grants.retain(|g| g.permission != grant.permission);
                        person.extra_grants.insert(grant.clone());
                    }
                    t.update(&person)?;
                    t.audit(actor.id(), verb, &refs, serde_json::to_string(assignment)?)
                });
                out.push(ItemOutcome::from_result(id, &result));
            }
            Ok(out)
        })
    }
}
