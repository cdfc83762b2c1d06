//! Capacity comparison reports and floor plans.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use uuis_core::catalog::perm;
use uuis_core::{Asset, EntityId, EntityType, Location, OrgRef, Person, Role, Status, TypeKind};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, Service};
use crate::storage::{Record, Repo};

pub const LOCATION_TYPES: [&str; 3] = ["teaching_lab", "research_lab", "office"];
pub const COMPARISONS: [&str; 4] = ["chairs", "tables", "pc", "students"];

/// Whether a comparison is offered for a location type.
pub fn combination_allowed(location_type: &str, comparison: &str) -> bool {
    match comparison {
        "chairs" | "tables" => LOCATION_TYPES.contains(&location_type),
        "pc" => matches!(location_type, "teaching_lab" | "office"),
        "students" => location_type == "research_lab",
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityReportRow {
    pub location_id: EntityId,
    pub location_number: String,
    pub capacity: u32,
    pub counted: u32,
    pub difference: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CapacityReport {
    pub location_type: String,
    pub comparison: String,
    pub rows: Vec<CapacityReportRow>,
}

impl CapacityReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Storage(e.to_string());
        w.write_record(["location_number", "capacity", self.comparison.as_str(), "difference"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([r.location_number.clone(), r.capacity.to_string(), r.counted.to_string(), r.difference.to_string()])
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Storage(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Storage(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoomAnnotation {
    pub location_id: EntityId,
    pub room_number: String,
    pub room_type: String,
    pub assignee: Option<String>,
    pub capacity: Option<u32>,
    pub faculty_id: Option<EntityId>,
    pub department_id: Option<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FloorPlanView {
    pub location_id: EntityId,
    pub location_number: String,
    /// Vector document with room shapes keyed by child location id.
    pub document: String,
    pub rooms: Vec<RoomAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanEntry {
    pub location_id: EntityId,
    pub location_number: String,
}

/// Locations at or below `root` in the parent forest.
fn subtree(locations: &[Location], root: EntityId) -> BTreeSet<EntityId> {
    let mut out = BTreeSet::from([root]);
    loop {
        let before = out.len();
        for l in locations {
            if l.parent_location_id.is_some_and(|p| out.contains(&p)) {
                out.insert(l.id);
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

fn plan_visible(actor: &Actor, loc: &Location) -> bool {
    loc.org() == OrgRef::UNIVERSITY || actor.sees(loc.org())
}

fn type_names(repo: &Repo<'_>, kind: TypeKind) -> Result<std::collections::BTreeMap<EntityId, String>> {
    Ok(repo.scan::<EntityType>()?.into_iter().filter(|t| t.kind == kind).map(|t| (t.id, t.name)).collect())
}

impl Service {
    pub fn capacity_report(&self, actor: &Actor, location_type: Option<&str>, comparison: Option<&str>) -> Result<CapacityReport> {
        actor.require(perm::CREATE_PRINT_REPORT)?;
        let location_type = location_type.map(str::trim).filter(|s| !s.is_empty()).ok_or(Error::MissingReportType)?;
        let comparison = comparison.map(str::trim).filter(|s| !s.is_empty()).ok_or(Error::MissingReportKind)?;
        if !LOCATION_TYPES.contains(&location_type) || !COMPARISONS.contains(&comparison) || !combination_allowed(location_type, comparison) {
            return Err(Error::InvalidCombination { location_type: location_type.into(), comparison: comparison.into() });
        }
        let aliases: BTreeSet<String> = self
            .config
            .report_aliases
            .get(comparison)
            .map(|v| v.iter().map(|a| a.to_lowercase()).collect())
            .unwrap_or_default();
        let rows = self.read(|r| {
            let location_types = type_names(r, TypeKind::Location)?;
            let asset_types = type_names(r, TypeKind::Asset)?;
            let locations = r.scan::<Location>()?;
            let assets = r.scan::<Asset>()?;
            let student_roles: BTreeSet<EntityId> = r
                .scan::<Role>()?
                .into_iter()
                .filter(|role| role.name.to_lowercase().ends_with("student"))
                .map(|role| role.id)
                .collect();
            let students: BTreeSet<EntityId> = r
                .scan::<Person>()?
                .into_iter()
                .filter(|p| p.status != Status::Unavailable && p.role_ids.iter().any(|id| student_roles.contains(id)))
                .map(|p| p.id)
                .collect();
            let mut rows: Vec<CapacityReportRow> = locations
                .iter()
                .filter(|l| l.status != Status::Unavailable && actor.sees(l.org()))
                .filter(|l| location_types.get(&l.type_id).is_some_and(|n| n == location_type))
                .map(|l| {
                    let counted = if comparison == "students" {
                        let area = subtree(&locations, l.id);
                        let people: BTreeSet<EntityId> = locations
                            .iter()
                            .filter(|x| area.contains(&x.id) && x.status == Status::Assigned)
                            .filter_map(|x| x.assigned_person_id)
                            .filter(|p| students.contains(p))
                            .collect();
                        people.len()
                    } else {
                        assets
                            .iter()
                            .filter(|a| a.status != Status::Unavailable && a.location_id == Some(l.id))
                            .filter(|a| asset_types.get(&a.type_id).is_some_and(|n| aliases.contains(&n.to_lowercase())))
                            .count()
                    } as u32;
                    let capacity = l.capacity.unwrap_or(0);
                    CapacityReportRow {
                        location_id: l.id,
                        location_number: l.location_number.clone(),
                        capacity,
                        counted,
                        difference: capacity as i64 - counted as i64,
                    }
                })
                .collect();
            rows.sort_by(|a, b| a.location_number.cmp(&b.location_number).then(a.location_id.cmp(&b.location_id)));
            Ok(rows)
        })?;
        let details = serde_json::json!({ "location_type": location_type, "comparison": comparison, "rows": rows.len() });
        self.write(|t| t.audit(actor.id(), action::REPORT_CAPACITY, &[], details.to_string()))?;
        Ok(CapacityReport { location_type: location_type.into(), comparison: comparison.into(), rows })
    }

    /// Locations with a stored plan that the actor may open.
    pub fn list_plans(&self, actor: &Actor) -> Result<Vec<PlanEntry>> {
        actor.require(perm::SEE_PRINT_FLOOR_PLAN)?;
        Ok(self
            .read(|r| r.scan::<Location>())?
            .into_iter()
            .filter(|l| l.has_plan && l.status != Status::Unavailable && plan_visible(actor, l))
            .map(|l| PlanEntry { location_id: l.id, location_number: l.location_number })
            .collect())
    }

    pub fn set_floor_plan(&self, actor: &Actor, location_id: EntityId, document: &str) -> Result<()> {
        actor.require(perm::EDIT_LOCATION)?;
        if document.trim().is_empty() {
            return Err(Error::MissingField("document".into()));
        }
        self.write(|t| {
            let mut loc: Location = t.get(location_id)?;
            actor.require_scope(loc.org())?;
            t.set_floor_plan(location_id, document)?;
            loc.has_plan = true;
            t.update(&loc)?;
            t.audit(actor.id(), action::FLOORPLAN_SET, &[loc.entity_ref()], "")?;
            Ok(())
        })
    }

    /// Plan document with room annotations computed from the current store.
    pub fn floor_plan(&self, actor: &Actor, location_id: Option<EntityId>) -> Result<FloorPlanView> {
        actor.require(perm::SEE_PRINT_FLOOR_PLAN)?;
        let location_id = location_id.ok_or(Error::NoLocationChosen)?;
        let view = self.read(|r| {
            let loc: Location = r.get(location_id)?;
            if !plan_visible(actor, &loc) {
                return Err(Error::OutOfScope);
            }
            if !loc.has_plan {
                return Err(Error::NoPlan);
            }
            let document = r.floor_plan(location_id)?.ok_or(Error::NoPlan)?;
            let types = type_names(r, TypeKind::Location)?;
            let mut rooms = Vec::new();
            for room in r.scan::<Location>()? {
                if room.parent_location_id != Some(location_id) || room.status == Status::Unavailable {
                    continue;
                }
                let assignee = match room.assigned_person_id {
                    Some(p) if room.status == Status::Assigned => {
                        let person: Person = r.get(p)?;
                        actor.sees(person.org()).then_some(if person.name.is_empty() { person.username } else { person.name })
                    }
                    _ => None,
                };
                let org = room.org();
                rooms.push(RoomAnnotation {
                    location_id: room.id,
                    room_number: room.location_number.clone(),
                    room_type: types.get(&room.type_id).cloned().unwrap_or_default(),
                    assignee,
                    capacity: room.capacity,
                    faculty_id: org.faculty_id,
                    department_id: org.department_id,
                });
            }
            Ok(FloorPlanView { location_id, location_number: loc.location_number, document, rooms })
        })?;
        let r = uuis_core::EntityRef::new(uuis_core::EntityKind::Location, location_id);
        self.write(|t| t.audit(actor.id(), action::FLOORPLAN_VIEW, &[r], ""))?;
        Ok(view)
    }
}
