//! Domain records shared by every part of the inventory service.
//!
//! These are plain values. Construction-time validation lives in
//! [`crate::validate`]; nothing here touches storage or the clock.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub type Timestamp = DateTime<Utc>;

/// Identifier of a record within its entity family.
///
/// Ids are allocated monotonically per family and never reused; soft
/// deleted records keep theirs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Actor id recorded for actions the system performs on its own behalf
/// (schema initialisation, seeding).
pub const SYSTEM_ACTOR: EntityId = EntityId(0);

/// Visibility and authority tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    User = 0,
    Department = 1,
    Faculty = 2,
    University = 3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::User, Level::Department, Level::Faculty, Level::University];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(value: u8) -> Option<Level> {
        match value {
            0 => Some(Level::User),
            1 => Some(Level::Department),
            2 => Some(Level::Faculty),
            3 => Some(Level::University),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Level {
    type Error = InvalidLevel;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Level::from_value(value).ok_or(InvalidLevel(value))
    }
}

impl From<Level> for u8 {
    fn from(level: Level) -> u8 {
        level.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("level {0} is outside 0..=3")]
pub struct InvalidLevel(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Available,
    Assigned,
    Borrowed,
    Unavailable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Available => "available",
            Status::Assigned => "assigned",
            Status::Borrowed => "borrowed",
            Status::Unavailable => "unavailable",
        }
    }
}

/// Entity families held by the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Asset,
    License,
    Location,
    Person,
    Faculty,
    Department,
    EntityType,
    Subgroup,
    Role,
    Request,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Asset => "asset",
            EntityKind::License => "license",
            EntityKind::Location => "location",
            EntityKind::Person => "person",
            EntityKind::Faculty => "faculty",
            EntityKind::Department => "department",
            EntityKind::EntityType => "entity_type",
            EntityKind::Subgroup => "subgroup",
            EntityKind::Role => "role",
            EntityKind::Request => "request",
        }
    }

    pub fn parse(s: &str) -> Option<EntityKind> {
        Some(match s {
            "asset" | "assets" => EntityKind::Asset,
            "license" | "licenses" => EntityKind::License,
            "location" | "locations" => EntityKind::Location,
            "person" | "persons" => EntityKind::Person,
            "faculty" | "faculties" => EntityKind::Faculty,
            "department" | "departments" => EntityKind::Department,
            "entity_type" | "types" => EntityKind::EntityType,
            "subgroup" | "subgroups" => EntityKind::Subgroup,
            "role" | "roles" => EntityKind::Role,
            "request" | "requests" => EntityKind::Request,
            _ => return None,
        })
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kinds that user-defined types can be registered for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeKind {
    Asset,
    License,
    Location,
    Person,
}

impl TypeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TypeKind::Asset => "asset",
            TypeKind::License => "license",
            TypeKind::Location => "location",
            TypeKind::Person => "person",
        }
    }

    pub fn entity_kind(self) -> EntityKind {
        match self {
            TypeKind::Asset => EntityKind::Asset,
            TypeKind::License => EntityKind::License,
            TypeKind::Location => EntityKind::Location,
            TypeKind::Person => EntityKind::Person,
        }
    }

    pub fn from_entity_kind(kind: EntityKind) -> Option<TypeKind> {
        match kind {
            EntityKind::Asset => Some(TypeKind::Asset),
            EntityKind::License => Some(TypeKind::License),
            EntityKind::Location => Some(TypeKind::Location),
            EntityKind::Person => Some(TypeKind::Person),
            _ => None,
        }
    }

    /// Fields every type of this kind must declare as required.
    pub fn compulsory_fields(self) -> &'static [&'static str] {
        match self {
            TypeKind::Asset => &["name", "barcode"],
            TypeKind::License => &["name"],
            TypeKind::Location => &["location_number"],
            TypeKind::Person => &["username"],
        }
    }
}

/// Organisational placement of a record: which faculty and department own it.
/// `None` for both means university-wide ownership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct OrgRef {
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
}

impl OrgRef {
    pub const UNIVERSITY: OrgRef = OrgRef { faculty_id: None, department_id: None };

    pub fn faculty(faculty_id: EntityId) -> OrgRef {
        OrgRef { faculty_id: Some(faculty_id), department_id: None }
    }

    pub fn department(faculty_id: EntityId, department_id: EntityId) -> OrgRef {
        OrgRef { faculty_id: Some(faculty_id), department_id: Some(department_id) }
    }
}

/// Money in integer minor units (cents).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Length {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub id: EntityId,
    pub type_id: EntityId,
    pub name: String,
    #[serde(default)]
    pub subgroup_id: Option<EntityId>,
    #[serde(default)]
    pub serial_number: String,
    pub barcode: String,
    #[serde(default)]
    pub purchase_number: String,
    #[serde(default)]
    pub request_number: String,
    #[serde(default)]
    pub color: Option<String>,
    #[serde(default)]
    pub material: Option<String>,
    #[serde(default)]
    pub host_name: Option<String>,
    #[serde(default)]
    pub brand: String,
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default)]
    pub description: String,
    pub status: Status,
    pub created_date: Timestamp,
    #[serde(default)]
    pub location_id: Option<EntityId>,
    #[serde(default)]
    pub assigned_person_id: Option<EntityId>,
    #[serde(default)]
    pub borrowed_by: Option<EntityId>,
    /// Set whenever the asset is assigned to a person or location.
    #[serde(default)]
    pub last_assignment: Option<Timestamp>,
    pub faculty_id: EntityId,
    #[serde(default)]
    pub department_id: Option<EntityId>,
    #[serde(default)]
    pub group_master_id: Option<EntityId>,
    /// Type-specific fields outside the fixed schema.
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Asset {
    pub fn org(&self) -> OrgRef {
        OrgRef { faculty_id: Some(self.faculty_id), department_id: self.department_id }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct License {
    pub id: EntityId,
    pub name: String,
    #[serde(default)]
    pub purchase_number: String,
    #[serde(default)]
    pub request_number: String,
    pub type_id: EntityId,
    pub seats: u32,
    #[serde(default)]
    pub price: Money,
    #[serde(default)]
    pub term: String,
    #[serde(default)]
    pub company: String,
    pub status: Status,
    pub created_date: Timestamp,
    #[serde(default)]
    pub assigned_asset_ids: BTreeSet<EntityId>,
    #[serde(default)]
    pub borrowed_by: Option<EntityId>,
    pub faculty_id: EntityId,
    #[serde(default)]
    pub department_id: Option<EntityId>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl License {
    pub fn org(&self) -> OrgRef {
        OrgRef { faculty_id: Some(self.faculty_id), department_id: self.department_id }
    }

    pub fn free_seats(&self) -> u32 {
        self.seats.saturating_sub(self.assigned_asset_ids.len() as u32)
    }
}

/// Owner of a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum BelongsTo {
    University,
    Faculty(EntityId),
    Department { faculty_id: EntityId, department_id: EntityId },
}

impl BelongsTo {
    pub fn org(self) -> OrgRef {
        match self {
            BelongsTo::University => OrgRef::UNIVERSITY,
            BelongsTo::Faculty(f) => OrgRef::faculty(f),
            BelongsTo::Department { faculty_id, department_id } => {
                OrgRef::department(faculty_id, department_id)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: EntityId,
    pub type_id: EntityId,
    #[serde(default)]
    pub capacity: Option<u32>,
    #[serde(default)]
    pub description: String,
    pub location_number: String,
    #[serde(default)]
    pub key_number: String,
    #[serde(default)]
    pub code_number: String,
    #[serde(default)]
    pub width: Option<Length>,
    #[serde(default)]
    pub length: Option<Length>,
    pub belongs_to: BelongsTo,
    pub created_date: Timestamp,
    #[serde(default)]
    pub parent_location_id: Option<EntityId>,
    #[serde(default)]
    pub assigned_person_id: Option<EntityId>,
    #[serde(default)]
    pub last_assignment: Option<Timestamp>,
    pub status: Status,
    #[serde(default)]
    pub has_plan: bool,
    #[serde(default)]
    pub group_master_id: Option<EntityId>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Location {
    pub fn org(&self) -> OrgRef {
        self.belongs_to.org()
    }
}

/// A permission held by a role or directly by a person.
///
/// `due_date` of `None` means the grant lasts as long as the account.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PermissionGrant {
    pub permission: String,
    #[serde(default)]
    pub due_date: Option<NaiveDate>,
}

impl PermissionGrant {
    pub fn new(permission: impl Into<String>) -> PermissionGrant {
        PermissionGrant { permission: permission.into(), due_date: None }
    }

    pub fn until(permission: impl Into<String>, due_date: NaiveDate) -> PermissionGrant {
        PermissionGrant { permission: permission.into(), due_date: Some(due_date) }
    }

    /// Valid through the end of the due date.
    pub fn is_active_on(&self, today: NaiveDate) -> bool {
        self.due_date.is_none_or(|due| today <= due)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: EntityId,
    pub username: String,
    #[serde(default)]
    pub password_digest: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub contact: String,
    #[serde(default)]
    pub type_id: Option<EntityId>,
    pub level: Level,
    #[serde(default)]
    pub faculty_id: Option<EntityId>,
    #[serde(default)]
    pub department_id: Option<EntityId>,
    #[serde(default)]
    pub role_ids: BTreeSet<EntityId>,
    #[serde(default)]
    pub extra_grants: BTreeSet<PermissionGrant>,
    #[serde(default)]
    pub biometric_digest: Option<String>,
    #[serde(default)]
    pub high_privileged: bool,
    pub status: Status,
    #[serde(default)]
    pub created_date: Option<Timestamp>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Person {
    pub fn org(&self) -> OrgRef {
        OrgRef { faculty_id: self.faculty_id, department_id: self.department_id }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faculty {
    pub id: EntityId,
    pub name: String,
    #[serde(default, rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub building: String,
    pub created_date: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Department {
    pub id: EntityId,
    pub faculty_id: EntityId,
    pub name: String,
    #[serde(default, rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub building: String,
    pub created_date: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub name: String,
    #[serde(default)]
    pub required: bool,
}

impl FieldDescriptor {
    pub fn required(name: impl Into<String>) -> FieldDescriptor {
        FieldDescriptor { name: name.into(), required: true }
    }

    pub fn optional(name: impl Into<String>) -> FieldDescriptor {
        FieldDescriptor { name: name.into(), required: false }
    }
}

/// A user-defined type of asset, license, location or person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityType {
    pub id: EntityId,
    pub kind: TypeKind,
    pub name: String,
    pub field_set: Vec<FieldDescriptor>,
}

impl EntityType {
    pub fn required_fields(&self) -> impl Iterator<Item = &str> {
        self.field_set.iter().filter(|f| f.required).map(|f| f.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    pub id: EntityId,
    pub name: String,
    pub member_asset_ids: BTreeSet<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub id: EntityId,
    pub name: String,
    pub grants: BTreeSet<PermissionGrant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Acquisition,
    Reparation,
    Elimination,
    Move,
}

impl RequestKind {
    pub const ALL: [RequestKind; 4] = [
        RequestKind::Acquisition,
        RequestKind::Reparation,
        RequestKind::Elimination,
        RequestKind::Move,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Acquisition => "acquisition",
            RequestKind::Reparation => "reparation",
            RequestKind::Elimination => "elimination",
            RequestKind::Move => "move",
        }
    }

    pub fn parse(s: &str) -> Option<RequestKind> {
        match s {
            "acquisition" => Some(RequestKind::Acquisition),
            // bug reports travel as reparation requests
            "reparation" | "bug" => Some(RequestKind::Reparation),
            "elimination" => Some(RequestKind::Elimination),
            "move" => Some(RequestKind::Move),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: EntityId,
    pub kind: RequestKind,
    pub text: String,
    #[serde(default)]
    pub item_barcodes: Vec<String>,
    #[serde(default)]
    pub target_location_id: Option<EntityId>,
    pub requester_id: EntityId,
    pub requester_level: Level,
    /// Requester's organisational placement at submission time.
    pub requester_org: OrgRef,
    pub state: RequestState,
    #[serde(default)]
    pub decided_by: Option<EntityId>,
    #[serde(default)]
    pub rejection_reason: Option<String>,
    pub created_at: Timestamp,
    #[serde(default)]
    pub decided_at: Option<Timestamp>,
}

/// Reference to a touched record inside an audit entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub id: EntityId,
}

impl EntityRef {
    pub fn new(kind: EntityKind, id: EntityId) -> EntityRef {
        EntityRef { kind, id }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub sequence_number: u64,
    pub timestamp: Timestamp,
    pub actor_id: EntityId,
    pub action: String,
    pub entity_refs: Vec<EntityRef>,
    pub details: String,
}

/// An authenticated login. A session with no active role while the person
/// holds several roles is pending until one is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub person_id: EntityId,
    pub active_role_id: Option<EntityId>,
    pub last_activity: Timestamp,
    pub created_at: Timestamp,
}

/// Visibility region derived from a person's level and placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub level: Level,
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
}

impl Scope {
    pub const UNIVERSITY: Scope =
        Scope { level: Level::University, faculty_id: None, department_id: None };

    /// Whether a record placed at `org` lies inside this scope.
    pub fn contains(&self, org: OrgRef) -> bool {
        match self.level {
            Level::University => true,
            Level::Faculty => self.faculty_id.is_some() && org.faculty_id == self.faculty_id,
            Level::Department | Level::User => {
                self.faculty_id.is_some()
                    && self.department_id.is_some()
                    && org.faculty_id == self.faculty_id
                    && org.department_id == self.department_id
            }
        }
    }
}
