//! Item status machine.
//!
//! ```text
//! available -> assigned | borrowed | unavailable
//! assigned  -> available | unavailable
//! borrowed  -> available | unavailable
//! unavailable -> available   (administrative restore only)
//! ```

use crate::model::{Asset, License, Location, Status};
use crate::validate::ValidationError;

/// Whether `from -> to` is an edge of the status graph. Staying put is always allowed.
pub fn can_transition(from: Status, to: Status) -> bool {
    use Status::*;
    if from == to {
        return true;
    }
    matches!(
        (from, to),
        (Available, Assigned)
            | (Available, Borrowed)
            | (Available, Unavailable)
            | (Assigned, Available)
            | (Assigned, Unavailable)
            | (Borrowed, Available)
            | (Borrowed, Unavailable)
            | (Unavailable, Available)
    )
}

/// Status transitions an `edit` may request directly. Assigning and borrowing
/// have their own operations because they need a target.
pub fn can_edit_transition(from: Status, to: Status) -> bool {
    can_transition(from, to) && !matches!(to, Status::Assigned | Status::Borrowed) || from == to
}

fn consistent(status: Status, assigned: bool, borrowed: bool) -> Result<(), ValidationError> {
    // soft-deleted rows keep whatever history they carried
    if status == Status::Unavailable {
        return Ok(());
    }
    if (status == Status::Assigned) != assigned {
        return Err(ValidationError::Inconsistent(
            "status `assigned` must match a recorded assignment".into(),
        ));
    }
    if (status == Status::Borrowed) != borrowed {
        return Err(ValidationError::Inconsistent(
            "status `borrowed` must match a recorded borrower".into(),
        ));
    }
    Ok(())
}

pub fn check_asset_consistency(asset: &Asset) -> Result<(), ValidationError> {
    let assigned = asset.last_assignment.is_some()
        && (asset.assigned_person_id.is_some() || asset.location_id.is_some());
    consistent(asset.status, assigned, asset.borrowed_by.is_some())
}

pub fn check_license_consistency(license: &License) -> Result<(), ValidationError> {
    // licenses are never "assigned" as a whole; seats carry assignments
    if license.status == Status::Assigned {
        return Err(ValidationError::Inconsistent("licenses cannot be in status `assigned`".into()));
    }
    consistent(license.status, false, license.borrowed_by.is_some())
}

pub fn check_location_consistency(location: &Location) -> Result<(), ValidationError> {
    if location.status == Status::Borrowed {
        return Err(ValidationError::Inconsistent("locations cannot be borrowed".into()));
    }
    consistent(location.status, location.assigned_person_id.is_some(), false)
}
