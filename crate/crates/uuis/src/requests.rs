//! Acquisition, reparation, elimination and move requests with leveled approval.

use serde::{Deserialize, Serialize};
use uuis_core::authz::{effective_permissions, visible_scope};
use uuis_core::catalog::perm;
use uuis_core::validate::validate_request;
use uuis_core::workflow::{can_see, check_decide, create_permission, initial_state, DecideError, Verdict};
use uuis_core::{
    Asset, EntityId, EntityKind, EntityRef, Location, Person, Request, RequestKind, RequestState, Role, Status,
};

use crate::assignments::split_barcodes;
use crate::audit::action;
use crate::error::{Error, Result};
use crate::service::{Actor, Service};
use crate::storage::{Record, Repo};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewRequest {
    /// `acquisition`, `reparation` (or `bug`), `elimination` or `move`.
    pub kind: Option<String>,
    pub text: String,
    pub item_barcodes: Vec<String>,
    /// Barcodes pasted as one block, one per line or comma separated.
    pub pasted: String,
    pub target_location_id: Option<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject {
        #[serde(default)]
        reason: String,
    },
}

impl From<&Decision> for Verdict {
    fn from(d: &Decision) -> Verdict {
        match d {
            Decision::Approve => Verdict::Approve,
            Decision::Reject { reason } => Verdict::Reject { reason: reason.clone() },
        }
    }
}

fn decide_error(e: DecideError) -> Error {
    match e {
        DecideError::MissingPermission => Error::PermissionDenied(perm::APPROVE_REJECT_REQUEST.into()),
        DecideError::InsufficientLevel => Error::InsufficientLevel,
        DecideError::OutOfScope => Error::OutOfScope,
        DecideError::AlreadyDecided => Error::AlreadyDecided,
        DecideError::MissingReason => Error::ReasonRequired,
    }
}

/// Available persons one level above `level` who may decide for `request`.
fn next_level_approvers(repo: &Repo<'_>, request: &Request, level: uuis_core::Level, today: chrono::NaiveDate) -> Result<Vec<EntityId>> {
    let Some(next) = uuis_core::Level::from_value(level.value() + 1) else {
        return Ok(Vec::new());
    };
    let roles = repo.scan::<Role>()?;
    let mut out = Vec::new();
    for p in repo.scan::<Person>()? {
        if p.level != next || p.status == Status::Unavailable || p.id == request.requester_id {
            continue;
        }
        let Ok(scope) = visible_scope(&p) else { continue };
        if !scope.contains(request.requester_org) {
            continue;
        }
        let holds = roles.iter().filter(|r| p.role_ids.contains(&r.id)).any(|r| {
            effective_permissions(Some(r), p.extra_grants.iter(), today).contains(perm::APPROVE_REJECT_REQUEST)
        }) || effective_permissions(None, p.extra_grants.iter(), today).contains(perm::APPROVE_REJECT_REQUEST);
        if holds {
            out.push(p.id);
        }
    }
    Ok(out)
}

impl Service {
    pub fn submit_request(&self, actor: &Actor, input: &NewRequest) -> Result<Request> {
        let kind_name = input.kind.as_deref().map(str::trim).filter(|k| !k.is_empty()).ok_or(Error::NoKind)?;
        let kind = RequestKind::parse(kind_name).ok_or(Error::NoKind)?;
        actor.require(create_permission(kind))?;
        let text = input.text.trim();
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut barcodes: Vec<String> =
            input.item_barcodes.iter().map(|b| b.trim().to_string()).filter(|b| !b.is_empty()).collect();
        barcodes.extend(split_barcodes(&input.pasted));
        if kind == RequestKind::Move {
            if barcodes.is_empty() {
                return Err(Error::MissingBarcodes);
            }
            if input.target_location_id.is_none() {
                return Err(Error::MissingLocation);
            }
        }
        self.write(|t| {
            let mut refs = Vec::new();
            for b in &barcodes {
                let asset = t.find_by::<Asset>("barcode", b)?.ok_or_else(|| Error::UnknownName("barcode", b.clone()))?;
                if !actor.sees(asset.org()) {
                    return Err(Error::ForeignItem(b.clone()));
                }
                refs.push(asset.entity_ref());
            }
            if let Some(l) = input.target_location_id {
                refs.push(t.get::<Location>(l)?.entity_ref());
            }
            let now = t.now();
            let state = initial_state(actor.level());
            let request = Request {
                id: EntityId(0),
                kind,
                text: text.to_string(),
                item_barcodes: barcodes.clone(),
                target_location_id: input.target_location_id,
                requester_id: actor.id(),
                requester_level: actor.level(),
                requester_org: actor.org,
                state,
                decided_by: None,
                rejection_reason: None,
                created_at: now,
                decided_at: (state == RequestState::Approved).then_some(now),
            };
            validate_request(&request)?;
            let request = t.insert(request)?;
            refs.insert(0, request.entity_ref());
            let details = serde_json::json!({ "kind": kind.as_str(), "state": state });
            t.audit(actor.id(), action::REQUEST_SUBMIT, &refs, details.to_string())?;
            Ok(request)
        })
    }

    /// Requests the viewer could decide, plus their own.
    pub fn list_requests(&self, actor: &Actor) -> Result<Vec<Request>> {
        actor.require(perm::SEE_REQUESTS_ALL)?;
        let list: Vec<Request> =
            self.read(|r| r.scan::<Request>())?.into_iter().filter(|q| can_see(&actor.principal, q)).collect();
        let details = serde_json::json!({ "returned": list.len() });
        self.write(|t| t.audit(actor.id(), action::REQUEST_LIST, &[], details.to_string()))?;
        Ok(list)
    }

    pub fn my_requests(&self, actor: &Actor) -> Result<Vec<Request>> {
        let me = actor.id();
        Ok(self.read(|r| r.scan::<Request>())?.into_iter().filter(|q| q.requester_id == me).collect())
    }

    pub fn get_request(&self, actor: &Actor, id: EntityId) -> Result<Request> {
        let request: Request = self.read(|r| r.get(id))?;
        if !can_see(&actor.principal, &request) {
            return Err(if actor.has(perm::SEE_REQUESTS_ALL) {
                Error::OutOfScope
            } else {
                Error::PermissionDenied(perm::SEE_REQUESTS_ALL.into())
            });
        }
        Ok(request)
    }

    /// Approves or rejects a pending request. A rejection notifies the
    /// requester; an approval is passed on to the next level's approvers.
    pub fn decide(&self, actor: &Actor, id: EntityId, decision: &Decision) -> Result<Request> {
        let verdict = Verdict::from(decision);
        self.write(|t| {
            let mut request: Request = t.get(id)?;
            check_decide(&actor.principal, &request, &verdict).map_err(decide_error)?;
            let now = t.now();
            request.decided_by = Some(actor.id());
            request.decided_at = Some(now);
            let req_ref = EntityRef::new(EntityKind::Request, request.id);
            match &verdict {
                Verdict::Approve => {
                    request.state = RequestState::Approved;
                    let subject = format!("Approved {} request #{}", request.kind.as_str(), request.id);
                    let body = format!("Approved by person {}: {}", actor.id(), request.text);
                    for p in next_level_approvers(t, &request, actor.level(), now.date_naive())? {
                        t.push_outbox(p, &subject, &body, Some(req_ref))?;
                    }
                }
                Verdict::Reject { reason } => {
                    request.state = RequestState::Rejected;
                    request.rejection_reason = Some(reason.trim().to_string());
                    let subject = format!("Your {} request #{} was rejected", request.kind.as_str(), request.id);
                    t.push_outbox(request.requester_id, &subject, reason.trim(), Some(req_ref))?;
                }
            }
            validate_request(&request)?;
            t.update(&request)?;
            let details = serde_json::json!({ "state": request.state });
            t.audit(actor.id(), action::REQUEST_DECIDE, &[req_ref], details.to_string())?;
            Ok(request)
        })
    }
}
