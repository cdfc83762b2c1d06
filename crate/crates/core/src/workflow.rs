//! Leveled request routing.
//!
//! A request submitted at level `n` is decided by anyone at level `n + 1` or
//! above whose scope covers the requester. University-level requests are
//! approved as soon as they are created. One decision is final.

use alloc::string::String;

use crate::authz::Principal;
use crate::catalog::perm;
use crate::model::{Level, Request, RequestKind, RequestState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecideError {
    #[error("missing permission aprove_rejectRequest")]
    MissingPermission,
    #[error("approver level must exceed the requester's")]
    InsufficientLevel,
    #[error("request lies outside the approver's scope")]
    OutOfScope,
    #[error("request has already been decided")]
    AlreadyDecided,
    #[error("a rejection needs a reason")]
    MissingReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Approve,
    Reject { reason: String },
}

/// Permission needed to file a request of `kind`.
pub fn create_permission(kind: RequestKind) -> &'static str {
    match kind {
        RequestKind::Acquisition => perm::CREATE_ACQUISITION_REQUEST,
        RequestKind::Reparation => perm::CREATE_REPARATION_REQUEST,
        RequestKind::Elimination => perm::CREATE_ELIMINATION_REQUEST,
        RequestKind::Move => perm::CREATE_MOVE_REQUEST,
    }
}

/// State a freshly submitted request starts in.
pub fn initial_state(requester_level: Level) -> RequestState {
    if requester_level == Level::University {
        RequestState::Approved
    } else {
        RequestState::Pending
    }
}

/// Level and scope part of the decision rule, without permission or state.
pub fn level_may_decide(viewer: &Principal, request: &Request) -> bool {
    viewer.level > request.requester_level && viewer.sees(request.requester_org)
}

/// Requests a viewer may list: their own plus everything they could decide.
pub fn can_see(viewer: &Principal, request: &Request) -> bool {
    request.requester_id == viewer.person_id || level_may_decide(viewer, request)
}

/// Full decision precondition.
pub fn check_decide(actor: &Principal, request: &Request, verdict: &Verdict) -> Result<(), DecideError> {
    if !actor.has(perm::APPROVE_REJECT_REQUEST) {
        return Err(DecideError::MissingPermission);
    }
    if request.state != RequestState::Pending {
        return Err(DecideError::AlreadyDecided);
    }
    if actor.level <= request.requester_level {
        return Err(DecideError::InsufficientLevel);
    }
    if !actor.sees(request.requester_org) {
        return Err(DecideError::OutOfScope);
    }
    if let Verdict::Reject { reason } = verdict {
        if reason.trim().is_empty() {
            return Err(DecideError::MissingReason);
        }
    }
    Ok(())
}
