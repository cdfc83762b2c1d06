//! Construction-time checks for domain records.

use alloc::string::{String, ToString};

use crate::model::{Asset, EntityType, License, Location, Person, Request, RequestKind, RequestState, Role};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("required field `{0}` is empty")]
    MissingField(String),
    #[error("username `{0}` must be 8 characters starting with a letter")]
    BadUsername(String),
    #[error("license has {assigned} assigned assets but only {seats} seats")]
    SeatsExceeded { seats: u32, assigned: usize },
    #[error("type must declare at least one field")]
    EmptyFieldSet,
    #[error("compulsory field `{0}` is missing from the type")]
    MissingCompulsoryField(String),
    #[error("role must grant at least one permission")]
    EmptyGrants,
    #[error("{0}")]
    Inconsistent(String),
}

/// Username rule: exactly eight characters, the first alphabetic.
pub fn validate_username(candidate: &str) -> bool {
    let mut chars = candidate.chars();
    match chars.next() {
        Some(first) if first.is_alphabetic() => candidate.chars().count() == 8,
        _ => false,
    }
}

fn require(field: &str, value: &str) -> Result<(), ValidationError> {
    if value.trim().is_empty() {
        Err(ValidationError::MissingField(field.to_string()))
    } else {
        Ok(())
    }
}

pub fn validate_asset(asset: &Asset) -> Result<(), ValidationError> {
    require("name", &asset.name)?;
    require("barcode", &asset.barcode)?;
    crate::status::check_asset_consistency(asset)
}

pub fn validate_license(license: &License) -> Result<(), ValidationError> {
    require("name", &license.name)?;
    if license.assigned_asset_ids.len() > license.seats as usize {
        return Err(ValidationError::SeatsExceeded {
            seats: license.seats,
            assigned: license.assigned_asset_ids.len(),
        });
    }
    Ok(())
}

pub fn validate_location(location: &Location) -> Result<(), ValidationError> {
    require("location_number", &location.location_number)?;
    if location.parent_location_id == Some(location.id) {
        return Err(ValidationError::Inconsistent("location cannot be its own parent".into()));
    }
    Ok(())
}

pub fn validate_person(person: &Person) -> Result<(), ValidationError> {
    if !validate_username(&person.username) {
        return Err(ValidationError::BadUsername(person.username.clone()));
    }
    if person.department_id.is_some() && person.faculty_id.is_none() {
        return Err(ValidationError::Inconsistent("department set without faculty".into()));
    }
    Ok(())
}

pub fn validate_entity_type(ty: &EntityType) -> Result<(), ValidationError> {
    require("name", &ty.name)?;
    if ty.field_set.is_empty() {
        return Err(ValidationError::EmptyFieldSet);
    }
    for compulsory in ty.kind.compulsory_fields() {
        let declared = ty.field_set.iter().any(|f| f.name == *compulsory && f.required);
        if !declared {
            return Err(ValidationError::MissingCompulsoryField(compulsory.to_string()));
        }
    }
    Ok(())
}

pub fn validate_role(role: &Role) -> Result<(), ValidationError> {
    require("name", &role.name)?;
    if role.grants.is_empty() {
        return Err(ValidationError::EmptyGrants);
    }
    Ok(())
}

pub fn validate_request(request: &Request) -> Result<(), ValidationError> {
    require("text", &request.text)?;
    if request.state == RequestState::Rejected
        && request.rejection_reason.as_deref().is_none_or(|r| r.trim().is_empty())
    {
        return Err(ValidationError::MissingField("rejection_reason".into()));
    }
    if request.kind == RequestKind::Move {
        if request.item_barcodes.is_empty() {
            return Err(ValidationError::MissingField("item_barcodes".into()));
        }
        if request.target_location_id.is_none() {
            return Err(ValidationError::MissingField("target_location_id".into()));
        }
    }
    Ok(())
}
