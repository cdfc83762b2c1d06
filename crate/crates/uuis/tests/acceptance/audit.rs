//! One instance of every mutating operation, then the audit log's action set
//! against the executed set, then attempted rewrites of stored rows.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::Duration;
use serde_json::json;
use uuis::assignments::{AssetSelection, AssetTarget, LocationTarget};
use uuis::clock::ManualClock;
use uuis::config::Config;
use uuis::importer::{ColumnMapping, Format, ImportRequest};
use uuis::inventory::{NewAsset, NewDepartment, NewFaculty, NewLicense, NewLocation, NewPerson};
use uuis::outbox::Collect;
use uuis::requests::{Decision, NewRequest};
use uuis::roles::{Assignment, GrantChange};
use uuis::storage::{AuditFilter, Store};
use uuis::{Actor, Service};
use uuis_core::catalog::Catalog;
use uuis_core::{BelongsTo, EntityId, EntityKind, FieldDescriptor, PermissionGrant, TypeKind};

use crate::common::{start, PASSWORD};
use crate::{ensure, Outcome};

/// Runs `op`, which must succeed, and records the action it stands for.
struct Log<'a> {
    svc: &'a Service,
    executed: BTreeSet<String>,
}

impl Log<'_> {
    fn ok<T>(&mut self, action: &str, result: uuis::Result<T>) -> Result<T, String> {
        self.executed.insert(action.to_string());
        result.map_err(|e| format!("{action}: {e}"))
    }

    fn login(&mut self, username: &str) -> Result<(String, Actor), String> {
        let out = self.ok("session.login", self.svc.login(username, PASSWORD, None))?;
        let actor = self.svc.authenticate(&out.token).map_err(|e| e.to_string())?;
        Ok((out.token, actor))
    }
}

fn person(username: &str, level: u8, f: Option<EntityId>, d: Option<EntityId>, roles: &[EntityId]) -> NewPerson {
    NewPerson {
        username: username.into(),
        password: PASSWORD.into(),
        name: username.into(),
        level,
        faculty_id: f,
        department_id: d,
        role_ids: roles.iter().copied().collect(),
        ..NewPerson::default()
    }
}

fn exercise(svc: &Service, clock: &ManualClock) -> Result<BTreeSet<String>, String> {
    let mut log = Log { svc, executed: BTreeSet::new() };
    let catalog = Catalog::bundled();
    // init seeds permissions, roles and the default entity types
    log.ok("permission.seed", svc.init(&catalog))?;
    log.executed.extend(["role.seed".to_string(), "type.create".to_string()]);
    log.ok("person.add", svc.bootstrap_admin("admin001", PASSWORD))?;
    let roles: std::collections::BTreeMap<String, EntityId> =
        svc.list_roles().map_err(|e| e.to_string())?.into_iter().map(|r| (r.name, r.id)).collect();

    log.executed.insert("session.login_failed".into());
    ensure!(svc.login("admin001", "wrong", None).is_err(), "wrong password accepted");
    let (admin_token, admin) = log.login("admin001")?;

    let f = log.ok("faculty.add", svc.add_faculty(&admin, NewFaculty { name: "Science".into(), kind: "faculty".into(), building: String::new() }))?.id;
    let dep = NewDepartment { faculty_id: Some(f), name: "Physics".into(), kind: "department".into(), building: String::new() };
    let d = log.ok("department.add", svc.add_department(&admin, dep))?.id;
    let loc = |n: &str, parent: Option<EntityId>| NewLocation {
        location_number: n.into(),
        capacity: Some(10),
        belongs_to: Some(BelongsTo::Faculty(f)),
        parent_location_id: parent,
        ..NewLocation::default()
    };
    let building = log.ok("location.add", svc.add_location(&admin, loc("B-1", None)))?.id;
    let room = svc.add_location(&admin, loc("B-1.01", None)).map_err(|e| e.to_string())?.id;
    let spare = svc.add_location(&admin, loc("B-1.02", None)).map_err(|e| e.to_string())?.id;
    let office = svc.add_location(&admin, loc("B-1.03", None)).map_err(|e| e.to_string())?.id;
    let asset = |name: &str, barcode: &str| NewAsset { name: name.into(), barcode: barcode.into(), location_id: Some(room), ..NewAsset::default() };
    let pc = log.ok("asset.add", svc.add_asset(&admin, asset("pc", "A-1")))?.id;
    let kb = svc.add_asset(&admin, asset("keyboard", "A-2")).map_err(|e| e.to_string())?.id;
    let mouse = svc.add_asset(&admin, asset("mouse", "A-3")).map_err(|e| e.to_string())?.id;
    let lamp = svc.add_asset(&admin, asset("lamp", "A-4")).map_err(|e| e.to_string())?.id;
    let lic = NewLicense { name: "Office".into(), seats: 5, faculty_id: Some(f), ..NewLicense::default() };
    let license = log.ok("license.add", svc.add_license(&admin, lic))?.id;
    let lic2 = NewLicense { name: "Editor".into(), seats: 1, faculty_id: Some(f), ..NewLicense::default() };
    let license2 = svc.add_license(&admin, lic2).map_err(|e| e.to_string())?.id;

    let student_id = log.ok("person.add", svc.add_person(&admin, person("stud0001", 0, Some(f), Some(d), &[roles["grad_student"]])))?;
    let student_id = EntityId(student_id["id"].as_u64().unwrap());
    let multi = NewPerson { high_privileged: true, ..person("mult0001", 3, None, None, &[roles["administrator"], roles["grad_student"]]) };
    let multi_id = EntityId(svc.add_person(&admin, multi).map_err(|e| e.to_string())?["id"].as_u64().unwrap());

    log.ok("group.create", svc.create_group(&admin, EntityKind::Asset, &[pc], &[kb, mouse]))?;
    log.ok("type.create", svc.create_type(&admin, TypeKind::Asset, "projector", vec![FieldDescriptor::required("name"), FieldDescriptor::required("barcode")]))?;
    log.ok("subgroup.create", svc.create_subgroup(&admin, "peripherals", &[kb]))?;
    let to_person = AssetSelection { ids: vec![lamp], ..AssetSelection::default() };
    log.ok("asset.assign_person", svc.assign_assets(&admin, Some(AssetTarget::Person(student_id)), &to_person))?;
    let to_room = AssetSelection { ids: vec![pc], ..AssetSelection::default() };
    log.ok("asset.assign_location", svc.assign_assets(&admin, Some(AssetTarget::Location(spare)), &to_room))?;
    log.ok("license.assign_asset", svc.assign_license_to_asset(&admin, Some(license), Some(pc)))?;
    log.ok("location.assign_location", svc.assign_locations(&admin, Some(LocationTarget::Location(building)), &[room]))?;
    log.ok("location.assign_department", svc.assign_locations(&admin, Some(LocationTarget::Department(d)), &[spare]))?;
    log.ok("location.assign_person", svc.assign_locations(&admin, Some(LocationTarget::Person(student_id)), &[office]))?;
    log.ok("asset.borrow", svc.borrow(&admin, EntityKind::Asset, &[mouse], Some(student_id)))?;
    log.ok("license.borrow", svc.borrow(&admin, EntityKind::License, &[license2], Some(student_id)))?;
    log.ok("floorplan.set", svc.set_floor_plan(&admin, building, "<svg/>"))?;

    let edit = |v: serde_json::Value| v.as_object().unwrap().clone();
    log.ok("asset.edit", svc.edit_entity(&admin, EntityKind::Asset, kb, &edit(json!({"color": "black"}))))?;
    log.ok("license.edit", svc.edit_entity(&admin, EntityKind::License, license, &edit(json!({"company": "Acme"}))))?;
    log.ok("location.edit", svc.edit_entity(&admin, EntityKind::Location, building, &edit(json!({"description": "main"}))))?;
    log.ok("person.edit", svc.edit_entity(&admin, EntityKind::Person, student_id, &edit(json!({"title": "Ms"}))))?;
    log.ok("faculty.edit", svc.edit_entity(&admin, EntityKind::Faculty, f, &edit(json!({"building": "B-1"}))))?;
    log.ok("department.edit", svc.edit_entity(&admin, EntityKind::Department, d, &edit(json!({"building": "B-1"}))))?;

    let mapping = ColumnMapping::new(TypeKind::Asset, &[(0, "name"), (1, "barcode")]).with_location(room);
    let import = ImportRequest { mapping, format: Format::Csv, delimiter: None, text: "chair,I-1\ndesk,I-2\n".into() };
    log.ok("import.asset", svc.import(&admin, &import))?;

    log.ok("role.add", svc.add_role(&admin, "lab_tech", vec![PermissionGrant::new("seeAssets")]))?;
    let change = GrantChange { add: vec![PermissionGrant::new("seeAudit")], ..GrantChange::default() };
    log.ok("role.edit_for_person", svc.edit_role_for_person(&admin, &[student_id], &change))?;
    let by_role = Assignment { role_id: Some(roles["undergrad_student"]), grant: None };
    log.ok("role.assign", svc.assign_bulk(&admin, &[multi_id], &by_role))?;
    let by_grant = Assignment { role_id: None, grant: Some(PermissionGrant::new("seeFacDep")) };
    log.ok("permission.assign", svc.assign_bulk(&admin, &[student_id], &by_grant))?;
    log.ok("permission.add", svc.add_permission(&admin, "exportAsset"))?;
    log.ok("permission.edit", svc.edit_permission(&admin, "exportAsset", "exportAssets"))?;

    let (_, student) = log.login("stud0001")?;
    let req = NewRequest { kind: Some("acquisition".into()), text: "projector".into(), ..NewRequest::default() };
    let r1 = log.ok("request.submit", svc.submit_request(&student, &req))?;
    let r2 = svc.submit_request(&student, &req).map_err(|e| e.to_string())?;
    log.ok("request.decide", svc.decide(&admin, r1.id, &Decision::Approve))?;
    svc.decide(&admin, r2.id, &Decision::Reject { reason: "budget".into() }).map_err(|e| e.to_string())?;
    log.ok("outbox.notice", svc.outbox_notice(&admin, student_id, "Room change", "Moved to B-1.02"))?;
    log.ok("outbox.drain", svc.outbox_drain(&mut Collect::default()))?;

    log.ok("audit.login", svc.audit_login(&admin, PASSWORD))?;

    let out = log.ok("session.login", svc.login("mult0001", PASSWORD, None))?;
    ensure!(out.active_role_id.is_none(), "two roles but no choice asked");
    let chosen = log.ok("session.choose_role", svc.choose_role(&out.token, roles["administrator"]))?;
    log.ok("session.enroll_biometric", svc.enroll_biometric(&chosen, b"voice sample"))?;
    log.ok("session.logout", svc.logout(&out.token))?;

    for (kind, id) in [(EntityKind::Asset, lamp), (EntityKind::License, license2), (EntityKind::Location, office), (EntityKind::Person, multi_id)] {
        let outcome = log.ok(&format!("{}.delete", kind.as_str()), svc.delete_entities(&admin, kind, &[id]))?;
        ensure!(outcome[0].ok, "delete {kind:?} {id} failed: {:?}", outcome[0].error);
    }

    log.executed.insert("session.expire".into());
    clock.advance(Duration::minutes(30));
    ensure!(svc.authenticate(&admin_token).is_err(), "idle session still live");
    Ok(log.executed)
}

pub fn criterion() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("uuis.db");
    let clock = Arc::new(ManualClock::new(start()));
    let svc = Service::new(Store::open(&path).map_err(|e| e.to_string())?, clock.clone(), Config::default());
    let executed = exercise(&svc, &clock)?;

    let records = svc.store().read(|r| r.audit_records(&AuditFilter::default())).map_err(|e| e.to_string())?;
    let logged: BTreeSet<String> = records.iter().map(|r| r.action.clone()).collect();
    ensure!(
        logged == executed,
        "not logged: {:?}; logged but not executed: {:?}",
        executed.difference(&logged).collect::<Vec<_>>(),
        logged.difference(&executed).collect::<Vec<_>>()
    );
    for pair in records.windows(2) {
        ensure!(pair[0].sequence_number < pair[1].sequence_number, "sequence not increasing at {}", pair[1].sequence_number);
    }

    let conn = rusqlite::Connection::open(&path).map_err(|e| e.to_string())?;
    let attempts = [
        "UPDATE audit SET action = 'forged' WHERE seq = 1",
        "UPDATE audit SET actor_id = 0",
        "DELETE FROM audit WHERE seq = 1",
        "DELETE FROM audit",
    ];
    for sql in attempts {
        ensure!(conn.execute(sql, []).is_err(), "`{sql}` was accepted");
    }
    drop(conn);
    let after = svc.store().read(|r| r.audit_records(&AuditFilter::default())).map_err(|e| e.to_string())?;
    ensure!(after == records, "audit rows changed under rewrite attempts");
    Ok(format!("{} operations, {} records, {} rewrites refused", executed.len(), records.len(), attempts.len()))
}
