//! Assigning assets, licenses and locations, borrowing, and the personal profile.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuis_core::catalog::perm;
use uuis_core::{
    Asset, BelongsTo, Department, EntityId, EntityKind, EntityRef, License, Location, OrgRef, Person, Role, Status,
};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::inventory::person_view;
use crate::service::{Actor, ItemOutcome, Service};
use crate::storage::{Record, Repo, Txn};

/// Where selected assets go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum AssetTarget {
    Person(EntityId),
    Location(EntityId),
}

/// Where selected locations go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum LocationTarget {
    Location(EntityId),
    Department(EntityId),
    Person(EntityId),
}

/// Items picked by id, by scanner, or by pasting a barcode list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssetSelection {
    pub ids: Vec<EntityId>,
    pub barcodes: Vec<String>,
    /// One barcode per line or comma separated.
    pub pasted: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pick {
    Id(EntityId),
    Barcode(String),
}

impl Pick {
    fn label(&self) -> String {
        match self {
            Pick::Id(id) => id.to_string(),
            Pick::Barcode(b) => b.clone(),
        }
    }
}

pub fn split_barcodes(text: &str) -> Vec<String> {
    text.split(['\n', '\r', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl AssetSelection {
    fn picks(&self) -> Vec<Pick> {
        let mut out: Vec<Pick> = self.ids.iter().map(|i| Pick::Id(*i)).collect();
        let scanned = self.barcodes.iter().map(|b| b.trim().to_string()).filter(|b| !b.is_empty());
        out.extend(scanned.chain(split_barcodes(&self.pasted)).map(Pick::Barcode));
        out
    }
}

fn load_asset(repo: &Repo<'_>, pick: &Pick) -> Result<Asset> {
    match pick {
        Pick::Id(id) => repo.get(*id),
        Pick::Barcode(b) => repo
            .find_by::<Asset>("barcode", b)?
            .ok_or_else(|| Error::UnknownName("barcode", b.clone())),
    }
}

/// Assignment targets may be university-wide records or in the actor's scope.
fn target_visible(actor: &Actor, org: OrgRef) -> Result<()> {
    if org == OrgRef::UNIVERSITY {
        Ok(())
    } else {
        actor.require_scope(org)
    }
}

fn available_person(repo: &Repo<'_>, actor: &Actor, id: EntityId) -> Result<Person> {
    let p: Person = repo.get(id)?;
    if p.status == Status::Unavailable {
        return Err(Error::ItemNotAvailable);
    }
    target_visible(actor, p.org())?;
    Ok(p)
}

fn available_location(repo: &Repo<'_>, actor: &Actor, id: EntityId) -> Result<Location> {
    let l: Location = repo.get(id)?;
    if l.status == Status::Unavailable {
        return Err(Error::ItemNotAvailable);
    }
    target_visible(actor, l.org())?;
    Ok(l)
}

fn ensure_free(status: Status) -> Result<()> {
    match status {
        Status::Available => Ok(()),
        Status::Assigned => Err(Error::AlreadyAssigned),
        Status::Borrowed | Status::Unavailable => Err(Error::ItemNotAvailable),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BorrowOutcome {
    pub items: Vec<ItemOutcome>,
    /// Outbox message sent to the borrower when anything was lent.
    pub notification_id: Option<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub person: Value,
    pub assigned_assets: Vec<Asset>,
    pub assigned_licenses: Vec<License>,
    pub assigned_locations: Vec<Location>,
    pub borrowed_assets: Vec<Asset>,
    pub borrowed_licenses: Vec<License>,
    pub roles: Vec<Role>,
    pub active_role_id: Option<EntityId>,
    pub permissions: BTreeSet<String>,
}

impl Service {
    pub fn assign_assets(&self, actor: &Actor, target: Option<AssetTarget>, selection: &AssetSelection) -> Result<Vec<ItemOutcome>> {
        let target = target.ok_or(Error::NoTarget)?;
        let (permission, verb) = match target {
            AssetTarget::Person(_) => (perm::ASSIGN_ASSETS_TO_PERSON, action::ASSET_ASSIGN_PERSON),
            AssetTarget::Location(_) => (perm::ASSIGN_ASSETS_TO_LOCATION, action::ASSET_ASSIGN_LOCATION),
        };
        actor.require(permission)?;
        let picks = selection.picks();
        if picks.is_empty() {
            return Err(Error::EmptySelection);
        }
        self.write(|t| {
            let target_ref = match target {
                AssetTarget::Person(id) => available_person(t, actor, id)?.entity_ref(),
                AssetTarget::Location(id) => available_location(t, actor, id)?.entity_ref(),
            };
            let mut out = Vec::with_capacity(picks.len());
            for pick in &picks {
                let result = t.savepoint(|t| {
                    let mut asset = load_asset(t, pick)?;
                    if !actor.sees(asset.org()) {
                        return Err(Error::ForeignItem(asset.barcode));
                    }
                    ensure_free(asset.status)?;
                    match target {
                        AssetTarget::Person(id) => asset.assigned_person_id = Some(id),
                        AssetTarget::Location(id) => asset.location_id = Some(id),
                    }
                    asset.last_assignment = Some(t.now());
                    asset.status = Status::Assigned;
                    t.update(&asset)?;
                    t.audit(actor.id(), verb, &[asset.entity_ref(), target_ref], "")
                });
                out.push(ItemOutcome::from_result(pick.label(), &result));
            }
            Ok(out)
        })
    }

    pub fn assign_license_to_asset(&self, actor: &Actor, license_id: Option<EntityId>, asset_id: Option<EntityId>) -> Result<License> {
        actor.require(perm::ASSIGN_LICENSE_TO_ASSET)?;
        let license_id = license_id.ok_or(Error::NoLicenseChosen)?;
        let asset_id = asset_id.ok_or(Error::NoAssetChosen)?;
        self.write(|t| {
            let mut license: License = t.get(license_id)?;
            let asset: Asset = t.get(asset_id)?;
            actor.require_scope(license.org())?;
            actor.require_scope(asset.org())?;
            if license.status == Status::Unavailable || asset.status == Status::Unavailable {
                return Err(Error::ItemNotAvailable);
            }
            if license.assigned_asset_ids.contains(&asset_id) {
                return Err(Error::AlreadyAssigned);
            }
            if license.free_seats() == 0 {
                return Err(Error::SeatsExhausted);
            }
            license.assigned_asset_ids.insert(asset_id);
            t.update(&license)?;
            t.audit(actor.id(), action::LICENSE_ASSIGN_ASSET, &[license.entity_ref(), asset.entity_ref()], "")?;
            Ok(license)
        })
    }

    pub fn assign_locations(&self, actor: &Actor, target: Option<LocationTarget>, ids: &[EntityId]) -> Result<Vec<ItemOutcome>> {
        if ids.is_empty() {
            return Err(Error::EmptySelection);
        }
        let target = target.ok_or(Error::NoTarget)?;
        let (permission, verb) = match target {
            LocationTarget::Location(_) => (perm::ASSIGN_LOCATION_TO_LOCATION, action::LOCATION_ASSIGN_LOCATION),
            LocationTarget::Department(_) => (perm::ASSIGN_LOCATION_TO_DEPARTMENT, action::LOCATION_ASSIGN_DEPARTMENT),
            LocationTarget::Person(_) => (perm::ASSIGN_LOCATION_TO_PERSON, action::LOCATION_ASSIGN_PERSON),
        };
        actor.require(permission)?;
        self.write(|t| {
            let target_ref = match target {
                LocationTarget::Location(id) => available_location(t, actor, id)?.entity_ref(),
                LocationTarget::Department(id) => {
                    let d: Department = t.get(id)?;
                    actor.require_scope(OrgRef::department(d.faculty_id, d.id))?;
                    d.entity_ref()
                }
                LocationTarget::Person(id) => available_person(t, actor, id)?.entity_ref(),
            };
            let mut out = Vec::with_capacity(ids.len());
            for id in ids {
                let result = t.savepoint(|t| {
                    let mut loc: Location = t.get(*id)?;
                    actor.require_scope(loc.org())?;
                    if loc.status == Status::Unavailable {
                        return Err(Error::ItemNotAvailable);
                    }
                    match target {
                        LocationTarget::Location(parent) => {
                            if would_cycle(t, loc.id, parent)? {
                                return Err(Error::CycleCreated);
                            }
                            loc.parent_location_id = Some(parent);
                        }
                        LocationTarget::Department(dep) => {
                            let d: Department = t.get(dep)?;
                            loc.belongs_to = BelongsTo::Department { faculty_id: d.faculty_id, department_id: d.id };
                        }
                        LocationTarget::Person(person) => {
                            ensure_free(loc.status)?;
                            loc.assigned_person_id = Some(person);
                            loc.status = Status::Assigned;
                        }
                    }
                    loc.last_assignment = Some(t.now());
                    t.update(&loc)?;
                    t.audit(actor.id(), verb, &[loc.entity_ref(), target_ref], "")
                });
                out.push(ItemOutcome::from_result(id, &result));
            }
            Ok(out)
        })
    }

    /// Lends available items to one person and queues a pick-up notice.
    pub fn borrow(&self, actor: &Actor, kind: EntityKind, ids: &[EntityId], borrower: Option<EntityId>) -> Result<BorrowOutcome> {
        let (permission, verb) = match kind {
            EntityKind::Asset => (perm::BORROW_ASSETS, action::ASSET_BORROW),
            EntityKind::License => (perm::BORROW_LICENSES, action::LICENSE_BORROW),
            other => return Err(Error::BadRequest(format!("{other} cannot be borrowed"))),
        };
        actor.require(permission)?;
        let borrower = borrower.ok_or(Error::NoBorrower)?;
        if ids.is_empty() {
            return Err(Error::EmptySelection);
        }
        self.write(|t| {
            let person = available_person(t, actor, borrower)?;
            let mut out = Vec::with_capacity(ids.len());
            let mut lent = Vec::new();
            for id in ids {
                let result = t.savepoint(|t| {
                    let (r, name) = match kind {
                        EntityKind::Asset => lend::<Asset>(t, actor, *id, borrower, |a| (a.org(), &mut a.status, &mut a.borrowed_by), |a| a.name.clone())?,
                        _ => lend::<License>(t, actor, *id, borrower, |l| (l.org(), &mut l.status, &mut l.borrowed_by), |l| l.name.clone())?,
                    };
                    t.audit(actor.id(), verb, &[r, person.entity_ref()], "")?;
                    Ok((r, name))
                });
                out.push(ItemOutcome::from_result(id, &result));
                if let Ok(item) = result {
                    lent.push(item);
                }
            }
            let notification_id = match lent.first() {
                None => None,
                Some((first, _)) => {
                    let names: Vec<String> = lent.iter().map(|(r, n)| format!("{} {} ({n})", r.kind, r.id)).collect();
                    let body = format!("Please pick up the following item(s):\n{}", names.join("\n"));
                    Some(t.push_outbox(borrower, "Items ready for pick-up", &body, Some(*first))?)
                }
            };
            Ok(BorrowOutcome { items: out, notification_id })
        })
    }

    pub fn my_profile(&self, actor: &Actor) -> Result<Profile> {
        actor.require(perm::SEE_MY_PROFILE)?;
        let me = actor.id();
        let profile = self.read(|r| {
            let person: Person = r.get(me)?;
            let assets = r.scan::<Asset>()?;
            let licenses = r.scan::<License>()?;
            let assigned_assets: Vec<Asset> = assets
                .iter()
                .filter(|a| a.status == Status::Assigned && a.assigned_person_id == Some(me))
                .cloned()
                .collect();
            let mine: BTreeSet<EntityId> = assigned_assets.iter().map(|a| a.id).collect();
            let assigned_licenses = licenses
                .iter()
                .filter(|l| l.status != Status::Unavailable && l.assigned_asset_ids.iter().any(|a| mine.contains(a)))
                .cloned()
                .collect();
            let assigned_locations = r
                .scan::<Location>()?
                .into_iter()
                .filter(|l| l.status == Status::Assigned && l.assigned_person_id == Some(me))
                .collect();
            let borrowed_assets =
                assets.into_iter().filter(|a| a.status == Status::Borrowed && a.borrowed_by == Some(me)).collect();
            let borrowed_licenses =
                licenses.into_iter().filter(|l| l.status == Status::Borrowed && l.borrowed_by == Some(me)).collect();
            let roles = person.role_ids.iter().filter_map(|id| r.find::<Role>(*id).transpose()).collect::<Result<_>>()?;
            Ok(Profile {
                person: person_view(&person),
                assigned_assets,
                assigned_licenses,
                assigned_locations,
                borrowed_assets,
                borrowed_licenses,
                roles,
                active_role_id: actor.active_role_id,
                permissions: actor.principal.permissions.clone(),
            })
        })?;
        self.write(|t| t.audit(me, action::PROFILE_VIEW, &[EntityRef::new(EntityKind::Person, me)], ""))?;
        Ok(profile)
    }
}

type LendParts<'a> = (OrgRef, &'a mut Status, &'a mut Option<EntityId>);

fn lend<R: Record>(
    t: &mut Txn<'_>,
    actor: &Actor,
    id: EntityId,
    borrower: EntityId,
    parts: impl for<'a> Fn(&'a mut R) -> LendParts<'a>,
    name: impl Fn(&R) -> String,
) -> Result<(EntityRef, String)> {
    let mut record: R = t.get(id)?;
    let (org, status, borrowed_by) = parts(&mut record);
    if !actor.sees(org) {
        return Err(Error::ForeignItem(id.to_string()));
    }
    if *status != Status::Available {
        return Err(Error::ItemNotAvailable);
    }
    *status = Status::Borrowed;
    *borrowed_by = Some(borrower);
    t.update(&record)?;
    Ok((record.entity_ref(), name(&record)))
}

/// Whether making `parent` the parent of `child` closes a loop.
fn would_cycle(repo: &Repo<'_>, child: EntityId, parent: EntityId) -> Result<bool> {
    let mut seen = BTreeSet::new();
    let mut cur = Some(parent);
    while let Some(id) = cur {
        if id == child {
            return Ok(true);
        }
        if !seen.insert(id) {
            return Ok(true);
        }
        cur = repo.get::<Location>(id)?.parent_location_id;
    }
    Ok(false)
}
