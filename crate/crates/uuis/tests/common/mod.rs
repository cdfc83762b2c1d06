//! Shared fixtures: an in-memory service on a manual clock with helpers to
//! build an organisation and sign people in.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::TimeZone;
use serde_json::{json, Value};
use uuis::api::{self, ApiRequest, ApiResponse};
use uuis::clock::ManualClock;
use uuis::config::Config;
use uuis::inventory::{NewAsset, NewDepartment, NewFaculty, NewLocation, NewPerson};
use uuis::storage::Store;
use uuis::{Actor, Service};
use uuis_core::catalog::Catalog;
use uuis_core::{Asset, EntityId, Location, Timestamp};

pub const PASSWORD: &str = "correct horse";

pub fn start() -> Timestamp {
    chrono::Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap()
}

pub struct World {
    pub svc: Arc<Service>,
    pub clock: Arc<ManualClock>,
    pub admin: Actor,
    pub admin_token: String,
    roles: BTreeMap<String, EntityId>,
    next_user: std::cell::Cell<u32>,
}

pub fn world() -> World {
    world_with(Config::default())
}

pub fn world_with(config: Config) -> World {
    let clock = Arc::new(ManualClock::new(start()));
    let svc = Service::new(Store::in_memory().unwrap(), clock.clone(), config);
    svc.init(&Catalog::bundled()).unwrap();
    svc.bootstrap_admin("admin001", PASSWORD).unwrap();
    let roles = svc.list_roles().unwrap().into_iter().map(|r| (r.name, r.id)).collect();
    let svc = Arc::new(svc);
    let login = svc.login("admin001", PASSWORD, None).unwrap();
    let admin = svc.authenticate(&login.token).unwrap();
    World { svc, clock, admin, admin_token: login.token, roles, next_user: std::cell::Cell::new(0) }
}

impl World {
    pub fn role(&self, name: &str) -> EntityId {
        self.roles[name]
    }

    pub fn faculty(&self, name: &str) -> EntityId {
        let f = NewFaculty { name: name.into(), kind: "faculty".into(), building: String::new() };
        self.svc.add_faculty(&self.admin, f).unwrap().id
    }

    pub fn department(&self, faculty: EntityId, name: &str) -> EntityId {
        let d = NewDepartment { faculty_id: Some(faculty), name: name.into(), kind: "department".into(), building: String::new() };
        self.svc.add_department(&self.admin, d).unwrap().id
    }

    /// Fresh eight-character username.
    pub fn username(&self) -> String {
        let n = self.next_user.get() + 1;
        self.next_user.set(n);
        format!("u{n:07}")
    }

    /// Adds a person and returns `(id, username)`.
    pub fn person(&self, level: u8, faculty: Option<EntityId>, department: Option<EntityId>, roles: &[&str]) -> (EntityId, String) {
        let username = self.username();
        let p = NewPerson {
            username: username.clone(),
            password: PASSWORD.into(),
            name: format!("Person {username}"),
            level,
            faculty_id: faculty,
            department_id: department,
            role_ids: roles.iter().map(|r| self.role(r)).collect(),
            ..NewPerson::default()
        };
        let v = self.svc.add_person(&self.admin, p).unwrap();
        (EntityId(v["id"].as_u64().unwrap()), username)
    }

    /// Signs in, picking the first role when a choice is needed.
    pub fn login(&self, username: &str) -> (String, Actor) {
        let out = self.svc.login(username, PASSWORD, None).unwrap();
        let actor = match out.active_role_id {
            Some(_) => self.svc.authenticate(&out.token).unwrap(),
            None => self.svc.choose_role(&out.token, out.roles[0].id).unwrap(),
        };
        (out.token, actor)
    }

    pub fn type_id(&self, kind: uuis_core::TypeKind, name: &str) -> EntityId {
        self.svc.list_types(Some(kind)).unwrap().into_iter().find(|t| t.name == name).unwrap().id
    }

    pub fn location(&self, actor: &Actor, number: &str, faculty: Option<EntityId>, department: Option<EntityId>) -> Location {
        let belongs_to = match (faculty, department) {
            (Some(f), Some(d)) => Some(uuis_core::BelongsTo::Department { faculty_id: f, department_id: d }),
            (Some(f), None) => Some(uuis_core::BelongsTo::Faculty(f)),
            _ => Some(uuis_core::BelongsTo::University),
        };
        let l = NewLocation { location_number: number.into(), capacity: Some(20), belongs_to, ..NewLocation::default() };
        self.svc.add_location(actor, l).unwrap()
    }

    pub fn asset(&self, actor: &Actor, name: &str, barcode: &str, location: EntityId) -> Asset {
        let a = NewAsset { name: name.into(), barcode: barcode.into(), location_id: Some(location), ..NewAsset::default() };
        self.svc.add_asset(actor, a).unwrap()
    }

    /// Every audit record so far, oldest first.
    pub fn audit(&self) -> Vec<uuis_core::AuditRecord> {
        self.svc.store().read(|r| r.audit_records(&uuis::storage::AuditFilter::default())).unwrap()
    }

    pub fn audit_actions(&self) -> Vec<String> {
        self.audit().into_iter().map(|r| r.action).collect()
    }

    pub fn call(&self, request: ApiRequest) -> ApiResponse {
        api::handle(&self.svc, &request)
    }

    pub fn get(&self, token: &str, target: &str) -> ApiResponse {
        self.call(ApiRequest::get(target).token(token))
    }

    pub fn post(&self, token: &str, target: &str, body: Value) -> ApiResponse {
        self.call(ApiRequest::post(target, body).token(token))
    }
}

pub fn ids(values: &Value) -> Vec<u64> {
    values.as_array().map(|a| a.iter().filter_map(|v| v["id"].as_u64()).collect()).unwrap_or_default()
}

pub fn empty() -> Value {
    json!({})
}
