//! Inventory records: add, view, edit, soft delete, types, subgroups and groups.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uuis_core::authz::visible_scope;
use uuis_core::catalog::perm;
use uuis_core::status::{can_edit_transition, check_license_consistency, check_location_consistency};
use uuis_core::validate::{
    validate_asset, validate_entity_type, validate_license, validate_location, validate_person, validate_username,
};
use uuis_core::{
    Asset, BelongsTo, Department, EntityId, EntityKind, EntityRef, EntityType, Faculty, FieldDescriptor, Length,
    License, Level, Location, Money, OrgRef, Person, Role, Scope, Status, Subgroup, TypeKind,
};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, ItemOutcome, Service};
use crate::sessions::hash_password;
use crate::storage::{Record, Repo, Txn};

pub fn see_permission(kind: EntityKind) -> Option<&'static str> {
    Some(match kind {
        EntityKind::Asset => perm::SEE_ASSETS,
        EntityKind::License => perm::SEE_LICENSES,
        EntityKind::Location => perm::SEE_LOCATIONS,
        EntityKind::Person => perm::SEE_PERSONS,
        EntityKind::Faculty | EntityKind::Department => perm::SEE_FAC_DEP,
        _ => return None,
    })
}

pub fn insert_permission(kind: EntityKind) -> Option<&'static str> {
    Some(match kind {
        EntityKind::Asset => perm::INSERT_ASSET,
        EntityKind::License => perm::INSERT_LICENSE,
        EntityKind::Location => perm::INSERT_LOCATION,
        // there is no insertPerson; persons are provisioned like imports
        EntityKind::Person => perm::IMPORT_PERSON,
        EntityKind::Faculty | EntityKind::Department => perm::INSERT_FAC_DEP,
        _ => return None,
    })
}

pub fn edit_permission(kind: EntityKind) -> Option<&'static str> {
    Some(match kind {
        EntityKind::Asset => perm::EDIT_ASSET,
        EntityKind::License => perm::EDIT_LICENSE,
        EntityKind::Location => perm::EDIT_LOCATION,
        EntityKind::Person => perm::EDIT_PERSON,
        EntityKind::Faculty | EntityKind::Department => perm::EDIT_FAC_DEP,
        _ => return None,
    })
}

pub fn delete_permission(kind: EntityKind) -> Option<&'static str> {
    Some(match kind {
        EntityKind::Asset => perm::DELETE_ASSETS,
        EntityKind::License => perm::DELETE_LICENSES,
        EntityKind::Location => perm::DELETE_LOCATIONS,
        EntityKind::Person => perm::DELETE_PERSONS,
        _ => return None,
    })
}

pub fn type_permission(kind: TypeKind) -> &'static str {
    match kind {
        TypeKind::Asset => perm::ADD_TYPE_ASSET,
        TypeKind::License => perm::ADD_TYPE_LICENSE,
        TypeKind::Location => perm::ADD_TYPE_LOCATION,
        TypeKind::Person => perm::EDIT_PERSON,
    }
}

fn require_kind_permission(actor: &Actor, kind: EntityKind, lookup: fn(EntityKind) -> Option<&'static str>) -> Result<()> {
    let p = lookup(kind).ok_or_else(|| Error::BadRequest(format!("operation not offered for {kind}")))?;
    actor.require(p)
}

/// Columns a table view may select, per kind.
pub fn columns(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Asset => &[
            "id", "type_id", "name", "subgroup_id", "serial_number", "barcode", "purchase_number", "request_number",
            "color", "material", "host_name", "brand", "version", "description", "status", "created_date",
            "location_id", "assigned_person_id", "borrowed_by", "last_assignment", "faculty_id", "department_id",
            "group_master_id", "attributes",
        ],
        EntityKind::License => &[
            "id", "name", "purchase_number", "request_number", "type_id", "seats", "price", "term", "company",
            "status", "created_date", "assigned_asset_ids", "borrowed_by", "faculty_id", "department_id",
            "attributes",
        ],
        EntityKind::Location => &[
            "id", "type_id", "capacity", "description", "location_number", "key_number", "code_number", "width",
            "length", "belongs_to", "created_date", "parent_location_id", "assigned_person_id", "last_assignment",
            "status", "has_plan", "group_master_id", "attributes",
        ],
        EntityKind::Person => &[
            "id", "username", "name", "title", "contact", "type_id", "level", "faculty_id", "department_id",
            "role_ids", "extra_grants", "biometric_enrolled", "high_privileged", "status", "created_date",
            "attributes",
        ],
        EntityKind::Faculty => &["id", "name", "type", "building", "created_date"],
        EntityKind::Department => &["id", "faculty_id", "name", "type", "building", "created_date"],
        _ => &[],
    }
}

/// Person as shown over the API: credential digests never leave the service.
pub fn person_view(person: &Person) -> Value {
    let mut v = serde_json::to_value(person).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.remove("password_digest");
        m.remove("biometric_digest");
        m.insert("biometric_enrolled".into(), Value::Bool(person.biometric_digest.is_some()));
    }
    v
}

fn to_value<R: Serialize>(r: &R) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}

pub fn faculty_visible(scope: &Scope, faculty_id: EntityId) -> bool {
    scope.level == Level::University || scope.faculty_id == Some(faculty_id)
}

fn present(v: Option<&Value>) -> bool {
    match v {
        None | Some(Value::Null) => false,
        Some(Value::String(s)) => !s.trim().is_empty(),
        Some(Value::Array(a)) => !a.is_empty(),
        Some(_) => true,
    }
}

/// Every field the type marks as required must carry a value, either as a
/// record field or as a type-specific attribute.
fn check_required<R: Serialize>(ty: &EntityType, record: &R) -> Result<()> {
    let v = to_value(record);
    for field in ty.required_fields() {
        let direct = v.get(field);
        let attr = v.get("attributes").and_then(|a| a.get(field));
        if !present(direct) && !present(attr) {
            return Err(Error::MissingField(field.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn resolve_type(repo: &Repo<'_>, kind: TypeKind, type_id: Option<EntityId>) -> Result<EntityType> {
    match type_id {
        Some(id) => match repo.find::<EntityType>(id)? {
            Some(t) if t.kind == kind => Ok(t),
            _ => Err(Error::UnknownType),
        },
        None => repo
            .scan::<EntityType>()?
            .into_iter()
            .find(|t| t.kind == kind && t.name == "generic")
            .ok_or(Error::UnknownType),
    }
}

/// Organisation of a new asset or license: explicit placement, else the
/// chosen location's, else the actor's own.
pub(crate) fn resolve_org(
    repo: &Repo<'_>,
    actor: &Actor,
    faculty_id: Option<EntityId>,
    department_id: Option<EntityId>,
    location_id: Option<EntityId>,
) -> Result<(EntityId, Option<EntityId>)> {
    let org = if faculty_id.is_some() || department_id.is_some() {
        OrgRef { faculty_id, department_id }
    } else if let Some(l) = location_id {
        let loc: Location = repo.get(l)?;
        if loc.org().faculty_id.is_some() {
            loc.org()
        } else {
            actor.org
        }
    } else {
        actor.org
    };
    let org = match (org.faculty_id, org.department_id) {
        (None, Some(d)) => OrgRef::department(repo.get::<Department>(d)?.faculty_id, d),
        _ => org,
    };
    let faculty = org.faculty_id.ok_or_else(|| Error::MissingField("faculty_id".into()))?;
    check_org(repo, org)?;
    Ok((faculty, org.department_id))
}

/// Referenced faculty and department exist and agree.
pub(crate) fn check_org(repo: &Repo<'_>, org: OrgRef) -> Result<()> {
    if let Some(f) = org.faculty_id {
        repo.get::<Faculty>(f)?;
    }
    if let Some(d) = org.department_id {
        let dep: Department = repo.get(d)?;
        if Some(dep.faculty_id) != org.faculty_id {
            return Err(Error::BadRequest(format!("department {d} is not part of faculty {:?}", org.faculty_id)));
        }
    }
    Ok(())
}

pub fn belongs_to_for(org: OrgRef) -> BelongsTo {
    match (org.faculty_id, org.department_id) {
        (Some(f), Some(d)) => BelongsTo::Department { faculty_id: f, department_id: d },
        (Some(f), None) => BelongsTo::Faculty(f),
        _ => BelongsTo::University,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewAsset {
    pub type_id: Option<EntityId>,
    pub name: String,
    pub subgroup_id: Option<EntityId>,
    pub serial_number: String,
    pub barcode: String,
    pub purchase_number: String,
    pub request_number: String,
    pub color: Option<String>,
    pub material: Option<String>,
    pub host_name: Option<String>,
    pub brand: String,
    pub version: Option<String>,
    pub description: String,
    pub location_id: Option<EntityId>,
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewLicense {
    pub type_id: Option<EntityId>,
    pub name: String,
    pub purchase_number: String,
    pub request_number: String,
    pub seats: u32,
    pub price: Money,
    pub term: String,
    pub company: String,
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewLocation {
    pub type_id: Option<EntityId>,
    pub capacity: Option<u32>,
    pub description: String,
    pub location_number: String,
    pub key_number: String,
    pub code_number: String,
    pub width: Option<Length>,
    pub length: Option<Length>,
    pub belongs_to: Option<BelongsTo>,
    pub parent_location_id: Option<EntityId>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewPerson {
    pub username: String,
    pub password: String,
    pub name: String,
    pub title: String,
    pub contact: String,
    pub type_id: Option<EntityId>,
    pub level: u8,
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
    pub role_ids: BTreeSet<EntityId>,
    pub high_privileged: bool,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewFaculty {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub building: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewDepartment {
    pub faculty_id: Option<EntityId>,
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub building: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewQuery {
    pub columns: Option<Vec<String>>,
    pub offset: usize,
    pub limit: Option<usize>,
    /// Also list soft-deleted rows; honoured for holders of the kind's delete permission.
    pub include_unavailable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablePage {
    pub kind: EntityKind,
    pub columns: Vec<String>,
    pub rows: Vec<Map<String, Value>>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupView {
    pub kind: EntityKind,
    pub master_id: EntityId,
    pub child_ids: Vec<EntityId>,
}

pub const DEFAULT_PAGE: usize = 50;

/// Builders shared by the add operations and the importer. Each validates
/// and inserts inside the caller's transaction without auditing.
pub(crate) mod build {
    use super::*;

    pub fn asset(t: &mut Txn<'_>, actor: &Actor, input: NewAsset) -> Result<Asset> {
        let ty = resolve_type(t, TypeKind::Asset, input.type_id)?;
        let (faculty_id, department_id) =
            resolve_org(t, actor, input.faculty_id, input.department_id, input.location_id)?;
        actor.require_scope(OrgRef { faculty_id: Some(faculty_id), department_id })?;
        if let Some(l) = input.location_id {
            t.get::<Location>(l)?;
        }
        if let Some(s) = input.subgroup_id {
            t.get::<Subgroup>(s)?;
        }
        let asset = Asset {
            id: EntityId(0),
            type_id: ty.id,
            name: input.name.trim().to_string(),
            subgroup_id: input.subgroup_id,
            serial_number: input.serial_number,
            barcode: input.barcode.trim().to_string(),
            purchase_number: input.purchase_number,
            request_number: input.request_number,
            color: input.color,
            material: input.material,
            host_name: input.host_name,
            brand: input.brand,
            version: input.version,
            description: input.description,
            status: Status::Available,
            created_date: t.now(),
            location_id: input.location_id,
            assigned_person_id: None,
            borrowed_by: None,
            last_assignment: None,
            faculty_id,
            department_id,
            group_master_id: None,
            attributes: input.attributes,
        };
        check_required(&ty, &asset)?;
        validate_asset(&asset)?;
        let asset = t.insert(asset)?;
        if let Some(s) = asset.subgroup_id {
            let mut group: Subgroup = t.get(s)?;
            group.member_asset_ids.insert(asset.id);
            t.update(&group)?;
        }
        Ok(asset)
    }

    pub fn license(t: &mut Txn<'_>, actor: &Actor, input: NewLicense, location: Option<EntityId>) -> Result<License> {
        let ty = resolve_type(t, TypeKind::License, input.type_id)?;
        let (faculty_id, department_id) = resolve_org(t, actor, input.faculty_id, input.department_id, location)?;
        actor.require_scope(OrgRef { faculty_id: Some(faculty_id), department_id })?;
        let license = License {
            id: EntityId(0),
            name: input.name.trim().to_string(),
            purchase_number: input.purchase_number,
            request_number: input.request_number,
            type_id: ty.id,
            seats: input.seats,
            price: input.price,
            term: input.term,
            company: input.company,
            status: Status::Available,
            created_date: t.now(),
            assigned_asset_ids: BTreeSet::new(),
            borrowed_by: None,
            faculty_id,
            department_id,
            attributes: input.attributes,
        };
        check_required(&ty, &license)?;
        validate_license(&license)?;
        t.insert(license)
    }

    pub fn location(t: &mut Txn<'_>, actor: &Actor, input: NewLocation) -> Result<Location> {
        let ty = resolve_type(t, TypeKind::Location, input.type_id)?;
        let parent: Option<Location> = input.parent_location_id.map(|p| t.get(p)).transpose()?;
        let belongs_to = match (input.belongs_to, &parent) {
            (Some(b), _) => b,
            (None, Some(p)) => p.belongs_to,
            (None, None) => belongs_to_for(actor.org),
        };
        check_org(t, belongs_to.org())?;
        actor.require_scope(belongs_to.org())?;
        let location = Location {
            id: EntityId(0),
            type_id: ty.id,
            capacity: input.capacity,
            description: input.description,
            location_number: input.location_number.trim().to_string(),
            key_number: input.key_number,
            code_number: input.code_number,
            width: input.width,
            length: input.length,
            belongs_to,
            created_date: t.now(),
            parent_location_id: input.parent_location_id,
            assigned_person_id: None,
            last_assignment: None,
            status: Status::Available,
            has_plan: false,
            group_master_id: None,
            attributes: input.attributes,
        };
        check_required(&ty, &location)?;
        validate_location(&location)?;
        t.insert(location)
    }

    pub fn person(t: &mut Txn<'_>, actor: &Actor, input: NewPerson) -> Result<Person> {
        if !validate_username(input.username.trim()) {
            return Err(Error::MalformedUsername);
        }
        let level = Level::from_value(input.level).ok_or_else(|| Error::BadRequest(format!("level {} is outside 0..=3", input.level)))?;
        if level > actor.level() {
            return Err(Error::InsufficientLevel);
        }
        let type_id = match input.type_id {
            Some(id) => Some(resolve_type(t, TypeKind::Person, Some(id))?.id),
            None => resolve_type(t, TypeKind::Person, None).ok().map(|ty| ty.id),
        };
        let org = if input.faculty_id.is_some() || input.department_id.is_some() {
            OrgRef { faculty_id: input.faculty_id, department_id: input.department_id }
        } else {
            actor.org
        };
        let org = match (org.faculty_id, org.department_id) {
            (None, Some(d)) => OrgRef::department(t.get::<Department>(d)?.faculty_id, d),
            _ => org,
        };
        check_org(t, org)?;
        actor.require_scope(org)?;
        for r in &input.role_ids {
            t.get::<Role>(*r)?;
        }
        let person = Person {
            id: EntityId(0),
            username: input.username.trim().to_string(),
            password_digest: if input.password.is_empty() { String::new() } else { hash_password(&input.password) },
            name: input.name,
            title: input.title,
            contact: input.contact,
            type_id,
            level,
            faculty_id: org.faculty_id,
            department_id: org.department_id,
            role_ids: input.role_ids,
            extra_grants: BTreeSet::new(),
            biometric_digest: None,
            high_privileged: input.high_privileged,
            status: Status::Available,
            created_date: Some(t.now()),
            attributes: input.attributes,
        };
        validate_person(&person)?;
        visible_scope(&person).map_err(|e| match e {
            uuis_core::authz::ScopeError::MissingFaculty(..) => Error::MissingField("faculty_id".into()),
            uuis_core::authz::ScopeError::MissingDepartment(..) => Error::MissingField("department_id".into()),
        })?;
        if let Some(ty) = type_id {
            check_required(&t.get::<EntityType>(ty)?, &person)?;
        }
        t.insert(person)
    }
}

/// Fields no edit may touch directly.
fn locked_fields(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Asset => &[
            "id", "created_date", "last_assignment", "assigned_person_id", "borrowed_by", "group_master_id",
        ],
        EntityKind::License => &["id", "created_date", "assigned_asset_ids", "borrowed_by"],
        EntityKind::Location => &[
            "id", "created_date", "last_assignment", "assigned_person_id", "parent_location_id", "group_master_id",
            "has_plan",
        ],
        EntityKind::Person => &[
            "id", "created_date", "password_digest", "biometric_digest", "biometric_enrolled", "role_ids",
            "extra_grants",
        ],
        EntityKind::Faculty => &["id", "created_date"],
        EntityKind::Department => &["id", "created_date", "faculty_id"],
        _ => &["id"],
    }
}

fn merge<R: Serialize + DeserializeOwned>(record: &R, kind: EntityKind, changes: &Map<String, Value>) -> Result<R> {
    let known = columns(kind);
    let locked = locked_fields(kind);
    let mut v = to_value(record);
    let obj = v.as_object_mut().ok_or_else(|| Error::Storage("record is not an object".into()))?;
    for (key, value) in changes {
        if locked.contains(&key.as_str()) {
            return Err(Error::NotEditable(key.clone()));
        }
        if !known.contains(&key.as_str()) {
            return Err(Error::BadRequest(format!("unknown field `{key}`")));
        }
        obj.insert(key.clone(), value.clone());
    }
    serde_json::from_value(v).map_err(|e| Error::BadRequest(format!("invalid field value: {e}")))
}

/// Status change requested by an edit. Returning to `available` clears the
/// assignment or borrow it ends.
fn edit_status(from: Status, to: Status) -> Result<bool> {
    if !can_edit_transition(from, to) {
        return Err(Error::InvalidTransition { from, to });
    }
    Ok(from != to && to == Status::Available)
}

impl Service {
    pub fn add_asset(&self, actor: &Actor, input: NewAsset) -> Result<Asset> {
        actor.require(perm::INSERT_ASSET)?;
        self.write(|t| {
            let a = build::asset(t, actor, input)?;
            t.audit(actor.id(), action::ASSET_ADD, &[a.entity_ref()], "")?;
            Ok(a)
        })
    }

    pub fn add_license(&self, actor: &Actor, input: NewLicense) -> Result<License> {
        actor.require(perm::INSERT_LICENSE)?;
        self.write(|t| {
            let l = build::license(t, actor, input, None)?;
            t.audit(actor.id(), action::LICENSE_ADD, &[l.entity_ref()], "")?;
            Ok(l)
        })
    }

    pub fn add_location(&self, actor: &Actor, input: NewLocation) -> Result<Location> {
        actor.require(perm::INSERT_LOCATION)?;
        self.write(|t| {
            let l = build::location(t, actor, input)?;
            t.audit(actor.id(), action::LOCATION_ADD, &[l.entity_ref()], "")?;
            Ok(l)
        })
    }

    pub fn add_person(&self, actor: &Actor, input: NewPerson) -> Result<Value> {
        actor.require(perm::IMPORT_PERSON)?;
        self.write(|t| {
            let p = build::person(t, actor, input)?;
            t.audit(actor.id(), action::PERSON_ADD, &[p.entity_ref()], "")?;
            Ok(person_view(&p))
        })
    }

    pub fn add_faculty(&self, actor: &Actor, input: NewFaculty) -> Result<Faculty> {
        actor.check(perm::INSERT_FAC_DEP, Some(OrgRef::UNIVERSITY))?;
        if input.name.trim().is_empty() {
            return Err(Error::MissingField("name".into()));
        }
        self.write(|t| {
            let f = t.insert(Faculty {
                id: EntityId(0),
                name: input.name.trim().to_string(),
                kind: input.kind,
                building: input.building,
                created_date: t.now(),
            })?;
            t.audit(actor.id(), action::FACULTY_ADD, &[f.entity_ref()], "")?;
            Ok(f)
        })
    }

    pub fn add_department(&self, actor: &Actor, input: NewDepartment) -> Result<Department> {
        actor.require(perm::INSERT_FAC_DEP)?;
        let faculty_id = input.faculty_id.or(actor.org.faculty_id).ok_or_else(|| Error::MissingField("faculty_id".into()))?;
        if !faculty_visible(&actor.principal.scope, faculty_id) || actor.level() < Level::Faculty {
            return Err(Error::OutOfScope);
        }
        if input.name.trim().is_empty() {
            return Err(Error::MissingField("name".into()));
        }
        self.write(|t| {
            t.get::<Faculty>(faculty_id)?;
            let d = t.insert(Department {
                id: EntityId(0),
                faculty_id,
                name: input.name.trim().to_string(),
                kind: input.kind,
                building: input.building,
                created_date: t.now(),
            })?;
            t.audit(actor.id(), action::DEPARTMENT_ADD, &[d.entity_ref()], "")?;
            Ok(d)
        })
    }

    /// All records of `kind` the actor may see, as API values, key ascending.
    pub(crate) fn visible_values(
        &self,
        repo: &Repo<'_>,
        actor: &Actor,
        kind: EntityKind,
        include_unavailable: bool,
    ) -> Result<Vec<(EntityId, Value)>> {
        let show_deleted = include_unavailable && delete_permission(kind).is_some_and(|p| actor.has(p));
        let keep = |status: Status| show_deleted || status != Status::Unavailable;
        let scope = &actor.principal.scope;
        Ok(match kind {
            EntityKind::Asset => repo
                .scan::<Asset>()?
                .into_iter()
                .filter(|a| keep(a.status) && actor.sees(a.org()))
                .map(|a| (a.id, to_value(&a)))
                .collect(),
            EntityKind::License => repo
                .scan::<License>()?
                .into_iter()
                .filter(|l| keep(l.status) && actor.sees(l.org()))
                .map(|l| (l.id, to_value(&l)))
                .collect(),
            EntityKind::Location => repo
                .scan::<Location>()?
                .into_iter()
                .filter(|l| keep(l.status) && actor.sees(l.org()))
                .map(|l| (l.id, to_value(&l)))
                .collect(),
            EntityKind::Person => repo
                .scan::<Person>()?
                .into_iter()
                .filter(|p| keep(p.status) && actor.sees(p.org()))
                .map(|p| (p.id, person_view(&p)))
                .collect(),
            EntityKind::Faculty => repo
                .scan::<Faculty>()?
                .into_iter()
                .filter(|f| faculty_visible(scope, f.id))
                .map(|f| (f.id, to_value(&f)))
                .collect(),
            EntityKind::Department => repo
                .scan::<Department>()?
                .into_iter()
                .filter(|d| scope.contains(OrgRef::department(d.faculty_id, d.id)) || (scope.level == Level::Faculty && faculty_visible(scope, d.faculty_id)))
                .map(|d| (d.id, to_value(&d)))
                .collect(),
            other => return Err(Error::BadRequest(format!("{other} cannot be listed here"))),
        })
    }

    pub fn view_entities(&self, actor: &Actor, kind: EntityKind, query: &ViewQuery) -> Result<TablePage> {
        require_kind_permission(actor, kind, see_permission)?;
        let known = columns(kind);
        let selected: Vec<String> = match &query.columns {
            Some(cols) if !cols.is_empty() => {
                if let Some(bad) = cols.iter().find(|c| !known.contains(&c.as_str())) {
                    return Err(Error::BadRequest(format!("unknown column `{bad}`")));
                }
                cols.clone()
            }
            _ => known.iter().map(|c| c.to_string()).collect(),
        };
        let limit = query.limit.unwrap_or(DEFAULT_PAGE).max(1);
        let all = self.read(|r| self.visible_values(r, actor, kind, query.include_unavailable))?;
        let total = all.len();
        let rows: Vec<Map<String, Value>> = all
            .into_iter()
            .skip(query.offset)
            .take(limit)
            .map(|(_, v)| {
                let mut row: Map<String, Value> =
                    selected.iter().map(|c| (c.clone(), v.get(c).cloned().unwrap_or(Value::Null))).collect();
                // rows always carry their id so they can be selected
                row.insert("id".into(), v.get("id").cloned().unwrap_or(Value::Null));
                row
            })
            .collect();
        let details = serde_json::json!({ "rows": rows.len(), "total": total });
        self.write(|t| t.audit(actor.id(), &action::view(kind), &[], details.to_string()))?;
        Ok(TablePage { kind, columns: selected, rows, total, offset: query.offset, limit })
    }

    pub fn get_entity(&self, actor: &Actor, kind: EntityKind, id: EntityId) -> Result<Value> {
        require_kind_permission(actor, kind, see_permission)?;
        let show_deleted = delete_permission(kind).is_some_and(|p| actor.has(p));
        let (org, status, value) = self.read(|r| {
            Ok(match kind {
                EntityKind::Asset => {
                    let a: Asset = r.get(id)?;
                    (Some(a.org()), a.status, to_value(&a))
                }
                EntityKind::License => {
                    let l: License = r.get(id)?;
                    (Some(l.org()), l.status, to_value(&l))
                }
                EntityKind::Location => {
                    let l: Location = r.get(id)?;
                    (Some(l.org()), l.status, to_value(&l))
                }
                EntityKind::Person => {
                    let p: Person = r.get(id)?;
                    (Some(p.org()), p.status, person_view(&p))
                }
                EntityKind::Faculty => {
                    let f: Faculty = r.get(id)?;
                    if !faculty_visible(&actor.principal.scope, f.id) {
                        return Err(Error::OutOfScope);
                    }
                    (None, Status::Available, to_value(&f))
                }
                EntityKind::Department => {
                    let d: Department = r.get(id)?;
                    if !faculty_visible(&actor.principal.scope, d.faculty_id) {
                        return Err(Error::OutOfScope);
                    }
                    (None, Status::Available, to_value(&d))
                }
                other => return Err(Error::BadRequest(format!("{other} cannot be viewed here"))),
            })
        })?;
        if status == Status::Unavailable && !show_deleted {
            return Err(Error::NotFound { kind, id });
        }
        if let Some(org) = org {
            actor.require_scope(org)?;
        }
        let r = EntityRef::new(kind, id);
        self.write(|t| t.audit(actor.id(), &action::view(kind), &[r], ""))?;
        Ok(value)
    }

    pub fn edit_entity(&self, actor: &Actor, kind: EntityKind, id: EntityId, changes: &Map<String, Value>) -> Result<Value> {
        require_kind_permission(actor, kind, edit_permission)?;
        if changes.is_empty() {
            return Err(Error::EmptySelection);
        }
        let keys: Vec<&String> = changes.keys().collect();
        let details = serde_json::json!({ "fields": keys }).to_string();
        self.write(|t| {
            let mut refs = vec![EntityRef::new(kind, id)];
            let value = match kind {
                EntityKind::Asset => {
                    let old: Asset = t.get(id)?;
                    actor.require_scope(old.org())?;
                    let mut new: Asset = merge(&old, kind, changes)?;
                    if edit_status(old.status, new.status)? {
                        new.assigned_person_id = None;
                        new.borrowed_by = None;
                        new.last_assignment = None;
                    }
                    let ty = resolve_type(t, TypeKind::Asset, Some(new.type_id))?;
                    check_org(t, new.org())?;
                    actor.require_scope(new.org())?;
                    if let Some(l) = new.location_id {
                        t.get::<Location>(l)?;
                    }
                    if new.subgroup_id != old.subgroup_id {
                        refs.extend(self.move_subgroup(t, new.id, old.subgroup_id, new.subgroup_id)?);
                    }
                    check_required(&ty, &new)?;
                    validate_asset(&new)?;
                    t.update(&new)?;
                    to_value(&new)
                }
                EntityKind::License => {
                    let old: License = t.get(id)?;
                    actor.require_scope(old.org())?;
                    let mut new: License = merge(&old, kind, changes)?;
                    if edit_status(old.status, new.status)? {
                        new.borrowed_by = None;
                    }
                    let ty = resolve_type(t, TypeKind::License, Some(new.type_id))?;
                    check_org(t, new.org())?;
                    actor.require_scope(new.org())?;
                    check_required(&ty, &new)?;
                    validate_license(&new)?;
                    check_license_consistency(&new)?;
                    t.update(&new)?;
                    to_value(&new)
                }
                EntityKind::Location => {
                    let old: Location = t.get(id)?;
                    actor.require_scope(old.org())?;
                    let mut new: Location = merge(&old, kind, changes)?;
                    if edit_status(old.status, new.status)? {
                        new.assigned_person_id = None;
                        new.last_assignment = None;
                    }
                    let ty = resolve_type(t, TypeKind::Location, Some(new.type_id))?;
                    check_org(t, new.org())?;
                    actor.require_scope(new.org())?;
                    check_required(&ty, &new)?;
                    validate_location(&new)?;
                    check_location_consistency(&new)?;
                    t.update(&new)?;
                    to_value(&new)
                }
                EntityKind::Person => {
                    let old: Person = t.get(id)?;
                    actor.require_scope(old.org())?;
                    let new: Person = merge(&old, kind, changes)?;
                    edit_status(old.status, new.status)?;
                    if new.level > actor.level() {
                        return Err(Error::InsufficientLevel);
                    }
                    if let Some(ty) = new.type_id {
                        check_required(&resolve_type(t, TypeKind::Person, Some(ty))?, &new)?;
                    }
                    check_org(t, new.org())?;
                    actor.require_scope(new.org())?;
                    validate_person(&new)?;
                    visible_scope(&new).map_err(|e| Error::BadRequest(e.to_string()))?;
                    t.update(&new)?;
                    person_view(&new)
                }
                EntityKind::Faculty => {
                    let old: Faculty = t.get(id)?;
                    if !faculty_visible(&actor.principal.scope, old.id) || actor.level() < Level::Faculty {
                        return Err(Error::OutOfScope);
                    }
                    let new: Faculty = merge(&old, kind, changes)?;
                    if new.name.trim().is_empty() {
                        return Err(Error::MissingField("name".into()));
                    }
                    t.update(&new)?;
                    to_value(&new)
                }
                EntityKind::Department => {
                    let old: Department = t.get(id)?;
                    actor.require_scope(OrgRef::department(old.faculty_id, old.id))?;
                    let new: Department = merge(&old, kind, changes)?;
                    if new.name.trim().is_empty() {
                        return Err(Error::MissingField("name".into()));
                    }
                    t.update(&new)?;
                    to_value(&new)
                }
                other => return Err(Error::BadRequest(format!("{other} cannot be edited here"))),
            };
            t.audit(actor.id(), &action::edit(kind), &refs, details.clone())?;
            Ok(value)
        })
    }

    fn move_subgroup(&self, t: &mut Txn<'_>, asset: EntityId, from: Option<EntityId>, to: Option<EntityId>) -> Result<Vec<EntityRef>> {
        let mut refs = Vec::new();
        if let Some(to) = to {
            let mut g: Subgroup = t.get(to)?;
            g.member_asset_ids.insert(asset);
            t.update(&g)?;
            refs.push(g.entity_ref());
        }
        if let Some(from) = from {
            let mut g: Subgroup = t.get(from)?;
            g.member_asset_ids.remove(&asset);
            t.update(&g)?;
            refs.push(g.entity_ref());
        }
        Ok(refs)
    }

    /// Soft delete: status becomes `unavailable`, the record stays.
    pub fn delete_entities(&self, actor: &Actor, kind: EntityKind, ids: &[EntityId]) -> Result<Vec<ItemOutcome>> {
        require_kind_permission(actor, kind, delete_permission)?;
        if ids.is_empty() {
            return Err(Error::EmptySelection);
        }
        let verb = action::delete(kind);
        self.write(|t| {
            let mut out = Vec::with_capacity(ids.len());
            for id in ids {
                let result = t.savepoint(|t| {
                    match kind {
                        EntityKind::Asset => soft_delete::<Asset>(t, actor, *id, |a| a.org(), |a| &mut a.status),
                        EntityKind::License => soft_delete::<License>(t, actor, *id, |l| l.org(), |l| &mut l.status),
                        EntityKind::Location => soft_delete::<Location>(t, actor, *id, |l| l.org(), |l| &mut l.status),
                        EntityKind::Person => soft_delete::<Person>(t, actor, *id, |p| p.org(), |p| &mut p.status),
                        _ => unreachable!("delete permission exists only for inventory kinds"),
                    }?;
                    t.audit(actor.id(), &verb, &[EntityRef::new(kind, *id)], "")
                });
                out.push(ItemOutcome::from_result(id, &result));
            }
            Ok(out)
        })
    }

    /// Makes one master the group head of at least two children.
    pub fn create_group(&self, actor: &Actor, kind: EntityKind, masters: &[EntityId], children: &[EntityId]) -> Result<GroupView> {
        let permission = match kind {
            EntityKind::Asset => perm::ADD_GROUP_ASSET,
            EntityKind::Location => perm::ADD_GROUP_LOCATION,
            other => return Err(Error::BadRequest(format!("{other} cannot be grouped"))),
        };
        actor.require(permission)?;
        let master = match masters {
            [] => return Err(Error::NoTarget),
            [m] => *m,
            _ => return Err(Error::MultipleMasters),
        };
        let child_ids: Vec<EntityId> = children.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if child_ids.len() < 2 {
            return Err(Error::TooFewChildren);
        }
        if child_ids.contains(&master) {
            return Err(Error::SelfContainment);
        }
        self.write(|t| {
            let mut refs = vec![EntityRef::new(kind, master)];
            match kind {
                EntityKind::Asset => {
                    let m: Asset = t.get(master)?;
                    actor.require_scope(m.org())?;
                    let chain = group_chain(m.group_master_id, |id| Ok(t.get::<Asset>(id)?.group_master_id))?;
                    for c in &child_ids {
                        if chain.contains(c) {
                            return Err(Error::SelfContainment);
                        }
                        let mut child: Asset = t.get(*c)?;
                        actor.require_scope(child.org())?;
                        child.group_master_id = Some(master);
                        t.update(&child)?;
                        refs.push(child.entity_ref());
                    }
                }
                _ => {
                    let m: Location = t.get(master)?;
                    actor.require_scope(m.org())?;
                    let chain = group_chain(m.group_master_id, |id| Ok(t.get::<Location>(id)?.group_master_id))?;
                    for c in &child_ids {
                        if chain.contains(c) {
                            return Err(Error::SelfContainment);
                        }
                        let mut child: Location = t.get(*c)?;
                        actor.require_scope(child.org())?;
                        child.group_master_id = Some(master);
                        t.update(&child)?;
                        refs.push(child.entity_ref());
                    }
                }
            }
            t.audit(actor.id(), action::GROUP_CREATE, &refs, "")?;
            Ok(GroupView { kind, master_id: master, child_ids: child_ids.clone() })
        })
    }

    pub fn list_types(&self, kind: Option<TypeKind>) -> Result<Vec<EntityType>> {
        Ok(self.read(|r| r.scan::<EntityType>())?.into_iter().filter(|t| kind.is_none_or(|k| t.kind == k)).collect())
    }

    pub fn create_type(&self, actor: &Actor, kind: TypeKind, name: &str, field_set: Vec<FieldDescriptor>) -> Result<EntityType> {
        actor.require(type_permission(kind))?;
        let name = name.trim();
        self.write(|t| {
            if !name.is_empty() && t.scan::<EntityType>()?.iter().any(|e| e.kind == kind && e.name == name) {
                return Err(Error::DuplicateName(name.to_string()));
            }
            if name.is_empty() {
                return Err(Error::EmptyName);
            }
            let ty = EntityType { id: EntityId(0), kind, name: name.to_string(), field_set };
            validate_entity_type(&ty)?;
            let ty = t.insert(ty)?;
            t.audit(actor.id(), action::TYPE_CREATE, &[ty.entity_ref()], "")?;
            Ok(ty)
        })
    }

    pub fn list_subgroups(&self) -> Result<Vec<Subgroup>> {
        self.read(|r| r.scan::<Subgroup>())
    }

    pub fn create_subgroup(&self, actor: &Actor, name: &str, asset_ids: &[EntityId]) -> Result<Subgroup> {
        actor.require(perm::ADD_SUBGROUP_ASSET)?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        self.write(|t| {
            if t.find_by::<Subgroup>("name", &name)?.is_some() {
                return Err(Error::DuplicateName(name.to_string()));
            }
            if asset_ids.is_empty() {
                return Err(Error::EmptySelection);
            }
            let members: BTreeSet<EntityId> = asset_ids.iter().copied().collect();
            let group = t.insert(Subgroup { id: EntityId(0), name: name.to_string(), member_asset_ids: members.clone() })?;
            let mut refs = vec![group.entity_ref()];
            for id in &members {
                let mut a: Asset = t.get(*id)?;
                actor.require_scope(a.org())?;
                if let Some(previous) = a.subgroup_id {
                    let mut old: Subgroup = t.get(previous)?;
                    old.member_asset_ids.remove(id);
                    t.update(&old)?;
                    refs.push(old.entity_ref());
                }
                a.subgroup_id = Some(group.id);
                t.update(&a)?;
                refs.push(a.entity_ref());
            }
            t.audit(actor.id(), action::SUBGROUP_CREATE, &refs, "")?;
            Ok(group)
        })
    }
}

fn soft_delete<R: Record>(
    t: &mut Txn<'_>,
    actor: &Actor,
    id: EntityId,
    org: impl Fn(&R) -> OrgRef,
    status: impl Fn(&mut R) -> &mut Status,
) -> Result<()> {
    let mut record: R = t.get(id)?;
    actor.require_scope(org(&record))?;
    *status(&mut record) = Status::Unavailable;
    t.update(&record)
}

/// Ids reachable by following group masters upward from `start`.
fn group_chain(start: Option<EntityId>, mut next: impl FnMut(EntityId) -> Result<Option<EntityId>>) -> Result<BTreeSet<EntityId>> {
    let mut seen = BTreeSet::new();
    let mut cur = start;
    while let Some(id) = cur {
        if !seen.insert(id) {
            break;
        }
        cur = next(id)?;
    }
    Ok(seen)
}
