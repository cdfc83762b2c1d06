//! Whole-store consistency sweep. Used after bulk operations, in tests and
//! by the `check` command.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use uuis_core::status::{check_asset_consistency, check_license_consistency, check_location_consistency};
use uuis_core::validate::{validate_asset, validate_entity_type, validate_license, validate_location, validate_person, validate_request, validate_role};
use uuis_core::{
    Asset, BelongsTo, Department, EntityId, EntityKind, EntityRef, EntityType, Faculty, License, Location, Person, Request,
    RequestState, Role, Subgroup, TypeKind, SYSTEM_ACTOR,
};

use crate::error::Result;
use crate::storage::{AuditFilter, Record, Repo};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub record: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct IntegrityReport {
    pub records_checked: usize,
    pub violations: Vec<Violation>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Sweep {
    report: IntegrityReport,
}

impl Sweep {
    fn flag(&mut self, record: impl std::fmt::Display, problem: impl Into<String>) {
        self.report.violations.push(Violation { record: record.to_string(), problem: problem.into() });
    }

    fn check<E: std::fmt::Display>(&mut self, record: impl std::fmt::Display, result: std::result::Result<(), E>) {
        if let Err(e) = result {
            self.flag(record, e.to_string());
        }
    }

    fn exists(&mut self, record: impl std::fmt::Display, what: &str, id: Option<EntityId>, set: &BTreeSet<EntityId>) {
        if let Some(id) = id {
            if !set.contains(&id) {
                self.flag(record, format!("{what} {id} does not exist"));
            }
        }
    }
}

fn ids<T>(items: &[T], id: impl Fn(&T) -> EntityId) -> BTreeSet<EntityId> {
    items.iter().map(id).collect()
}

/// Checks every stored record against the model rules and the links
/// between families.
pub fn sweep(repo: &Repo<'_>) -> Result<IntegrityReport> {
    let assets = repo.scan::<Asset>()?;
    let licenses = repo.scan::<License>()?;
    let locations = repo.scan::<Location>()?;
    let persons = repo.scan::<Person>()?;
    let faculties = repo.scan::<Faculty>()?;
    let departments = repo.scan::<Department>()?;
    let types = repo.scan::<EntityType>()?;
    let subgroups = repo.scan::<Subgroup>()?;
    let roles = repo.scan::<Role>()?;
    let requests = repo.scan::<Request>()?;
    let outbox = repo.outbox(None)?;
    let audit = repo.audit_records(&AuditFilter::default())?;
    let catalog: BTreeSet<String> = repo.permissions()?.into_iter().collect();

    let asset_ids = ids(&assets, |a| a.id);
    let location_ids = ids(&locations, |l| l.id);
    let person_ids = ids(&persons, |p| p.id);
    let faculty_ids = ids(&faculties, |f| f.id);
    let department_ids = ids(&departments, |d| d.id);
    let subgroup_ids = ids(&subgroups, |s| s.id);
    let role_ids = ids(&roles, |r| r.id);
    let type_kinds: BTreeMap<EntityId, TypeKind> = types.iter().map(|t| (t.id, t.kind)).collect();
    let department_faculty: BTreeMap<EntityId, EntityId> = departments.iter().map(|d| (d.id, d.faculty_id)).collect();

    let mut s = Sweep { report: IntegrityReport::default() };
    s.report.records_checked = assets.len()
        + licenses.len()
        + locations.len()
        + persons.len()
        + faculties.len()
        + departments.len()
        + types.len()
        + subgroups.len()
        + roles.len()
        + requests.len()
        + outbox.len()
        + audit.len();

    let type_ref = |s: &mut Sweep, record: &EntityRef, id: EntityId, kind: TypeKind| match type_kinds.get(&id) {
        Some(k) if *k == kind => {}
        Some(_) => s.flag(record, format!("type {id} has the wrong kind")),
        None => s.flag(record, format!("type {id} does not exist")),
    };
    let org = |s: &mut Sweep, record: &EntityRef, faculty: Option<EntityId>, department: Option<EntityId>| {
        s.exists(record, "faculty", faculty, &faculty_ids);
        s.exists(record, "department", department, &department_ids);
        if let (Some(f), Some(d)) = (faculty, department) {
            if department_faculty.get(&d).is_some_and(|owner| *owner != f) {
                s.flag(record, format!("department {d} is not part of faculty {f}"));
            }
        }
    };

    let mut barcodes = BTreeSet::new();
    for a in &assets {
        let r = a.entity_ref();
        s.check(r, validate_asset(a));
        s.check(r, check_asset_consistency(a));
        type_ref(&mut s, &r, a.type_id, TypeKind::Asset);
        org(&mut s, &r, Some(a.faculty_id), a.department_id);
        s.exists(r, "location", a.location_id, &location_ids);
        s.exists(r, "person", a.assigned_person_id, &person_ids);
        s.exists(r, "borrower", a.borrowed_by, &person_ids);
        s.exists(r, "subgroup", a.subgroup_id, &subgroup_ids);
        s.exists(r, "group master", a.group_master_id, &asset_ids);
        if !barcodes.insert(a.barcode.clone()) {
            s.flag(r, format!("barcode {} is not unique", a.barcode));
        }
    }

    for l in &licenses {
        let r = l.entity_ref();
        s.check(r, validate_license(l));
        s.check(r, check_license_consistency(l));
        type_ref(&mut s, &r, l.type_id, TypeKind::License);
        org(&mut s, &r, Some(l.faculty_id), l.department_id);
        s.exists(r, "borrower", l.borrowed_by, &person_ids);
        for a in &l.assigned_asset_ids {
            s.exists(r, "asset", Some(*a), &asset_ids);
        }
    }

    let parents: BTreeMap<EntityId, EntityId> =
        locations.iter().filter_map(|l| l.parent_location_id.map(|p| (l.id, p))).collect();
    let mut numbers = BTreeSet::new();
    for l in &locations {
        let r = l.entity_ref();
        s.check(r, validate_location(l));
        s.check(r, check_location_consistency(l));
        type_ref(&mut s, &r, l.type_id, TypeKind::Location);
        match l.belongs_to {
            BelongsTo::University => {}
            BelongsTo::Faculty(f) => org(&mut s, &r, Some(f), None),
            BelongsTo::Department { faculty_id, department_id } => org(&mut s, &r, Some(faculty_id), Some(department_id)),
        }
        s.exists(r, "parent location", l.parent_location_id, &location_ids);
        s.exists(r, "person", l.assigned_person_id, &person_ids);
        s.exists(r, "group master", l.group_master_id, &location_ids);
        let mut seen = BTreeSet::from([l.id]);
        let mut cursor = l.id;
        while let Some(p) = parents.get(&cursor) {
            if !seen.insert(*p) {
                s.flag(r, "parent chain has a cycle");
                break;
            }
            cursor = *p;
        }
        if l.status != uuis_core::Status::Unavailable && !numbers.insert((l.parent_location_id, l.location_number.clone())) {
            s.flag(r, format!("location number {} repeats under the same parent", l.location_number));
        }
    }

    let mut usernames = BTreeSet::new();
    for p in &persons {
        let r = p.entity_ref();
        s.check(r, validate_person(p));
        if let Some(t) = p.type_id {
            type_ref(&mut s, &r, t, TypeKind::Person);
        }
        org(&mut s, &r, p.faculty_id, p.department_id);
        for id in &p.role_ids {
            s.exists(r, "role", Some(*id), &role_ids);
        }
        for g in &p.extra_grants {
            if !catalog.contains(&g.permission) {
                s.flag(r, format!("grant of unknown permission {}", g.permission));
            }
        }
        if !usernames.insert(p.username.clone()) {
            s.flag(r, format!("username {} is not unique", p.username));
        }
    }

    for d in &departments {
        let r = EntityRef::new(EntityKind::Department, d.id);
        s.exists(r, "faculty", Some(d.faculty_id), &faculty_ids);
    }

    let mut type_names = BTreeSet::new();
    for t in &types {
        let r = EntityRef::new(EntityKind::EntityType, t.id);
        s.check(r, validate_entity_type(t));
        if !type_names.insert((t.kind, t.name.clone())) {
            s.flag(r, format!("type name {} repeats", t.name));
        }
    }

    let mut subgroup_names = BTreeSet::new();
    for g in &subgroups {
        let r = EntityRef::new(EntityKind::Subgroup, g.id);
        for a in &g.member_asset_ids {
            s.exists(r, "asset", Some(*a), &asset_ids);
        }
        if !subgroup_names.insert(g.name.clone()) {
            s.flag(r, format!("subgroup name {} repeats", g.name));
        }
    }

    let mut role_names = BTreeSet::new();
    for role in &roles {
        let r = EntityRef::new(EntityKind::Role, role.id);
        s.check(r, validate_role(role));
        for g in &role.grants {
            if !catalog.contains(&g.permission) {
                s.flag(r, format!("grant of unknown permission {}", g.permission));
            }
        }
        if !role_names.insert(role.name.clone()) {
            s.flag(r, format!("role name {} repeats", role.name));
        }
    }

    let mut notices: BTreeMap<EntityId, usize> = BTreeMap::new();
    for m in &outbox {
        if !person_ids.contains(&m.recipient_id) {
            s.flag(format!("outbox:{}", m.id), format!("recipient {} does not exist", m.recipient_id));
        }
        if let Some(EntityRef { kind: EntityKind::Request, id }) = m.reference {
            *notices.entry(id).or_default() += 1;
        }
    }
    for q in &requests {
        let r = EntityRef::new(EntityKind::Request, q.id);
        s.check(r, validate_request(q));
        s.exists(r, "requester", Some(q.requester_id), &person_ids);
        s.exists(r, "target location", q.target_location_id, &location_ids);
        s.exists(r, "decider", q.decided_by, &person_ids);
        if q.state == RequestState::Rejected && notices.get(&q.id).copied().unwrap_or(0) != 1 {
            s.flag(r, "rejected request without exactly one notification");
        }
        if q.requester_level.value() == 3 && q.state == RequestState::Pending {
            s.flag(r, "top-level request left pending");
        }
    }

    let mut last = 0;
    for a in &audit {
        let r = format!("audit:{}", a.sequence_number);
        if a.sequence_number <= last {
            s.flag(&r, "sequence numbers are not strictly increasing");
        }
        last = a.sequence_number;
        if a.actor_id != SYSTEM_ACTOR && !person_ids.contains(&a.actor_id) {
            s.flag(&r, format!("actor {} does not exist", a.actor_id));
        }
    }

    Ok(s.report)
}

impl crate::service::Service {
    pub fn integrity_sweep(&self) -> Result<IntegrityReport> {
        self.read(sweep)
    }
}
