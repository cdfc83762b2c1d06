//! Service error type and its stable wire codes.

use serde::Serialize;
use uuis_core::validate::ValidationError;
use uuis_core::{EntityId, EntityKind, Status};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    // sessions
    #[error("Login Failure")]
    InvalidCredentials,
    #[error("username must be eight characters beginning with a letter")]
    MalformedUsername,
    #[error("voice sample did not match, please record it again")]
    BiometricMismatch,
    #[error("unknown session token")]
    UnknownToken,
    #[error("session expired")]
    SessionExpired,
    #[error("choose a role for this session first")]
    RoleChoiceRequired,
    #[error("role {0} is not held by this person")]
    ForeignRole(EntityId),
    #[error("only high privileged users provide a biometric sample")]
    NotHighPrivileged,
    #[error("a biometric sample is already on file")]
    AlreadyEnrolled,
    #[error("Problems with saving file: the sample is empty")]
    EmptySample,
    #[error("log in on the auditing page first")]
    AuditLoginRequired,

    // authorization
    #[error("missing permission {0}")]
    PermissionDenied(String),
    #[error("record lies outside your area of visibility")]
    OutOfScope,

    // generic validation
    #[error("{0} already exists")]
    DuplicateName(String),
    #[error("name is empty")]
    EmptyName,
    #[error("Required field(s) is (are) empty: {0}")]
    MissingField(String),
    #[error("nothing was selected")]
    EmptySelection,
    #[error("no target was chosen")]
    NoTarget,
    #[error("{0}")]
    BadRequest(String),
    #[error("{kind} {id} not found")]
    NotFound { kind: EntityKind, id: EntityId },
    #[error("no {0} named `{1}`")]
    UnknownName(&'static str, String),

    // roles and permissions
    #[error("didn't select any permission")]
    EmptyGrants,
    #[error("List of requester's permission is empty")]
    EmptyGrantList,
    #[error("select exactly one person")]
    SelectOnePerson,
    #[error("permission {0} is granted and cannot be edited")]
    PermissionInUse(String),
    #[error("unknown permission {0}")]
    UnknownPermission(String),
    #[error("no role or permission was chosen")]
    NoChoice,
    #[error("roles are already seeded")]
    AlreadySeeded,

    // inventory
    #[error("Barcode is not unique")]
    DuplicateBarcode,
    #[error("unknown type")]
    UnknownType,
    #[error("type is missing compulsory field {0}")]
    MissingCompulsoryField(String),
    #[error("status cannot change from {from:?} to {to:?}")]
    InvalidTransition { from: Status, to: Status },
    #[error("field {0} cannot be edited")]
    NotEditable(String),
    #[error("item is already assigned")]
    AlreadyAssigned,
    #[error("item is not available")]
    ItemNotAvailable,
    #[error("all license seats are taken")]
    SeatsExhausted,
    #[error("no license chosen")]
    NoLicenseChosen,
    #[error("no asset chosen")]
    NoAssetChosen,
    #[error("no borrower chosen")]
    NoBorrower,
    #[error("a location cannot be placed inside itself")]
    CycleCreated,
    #[error("select more than one item for the group")]
    TooFewChildren,
    #[error("select exactly one master")]
    MultipleMasters,
    #[error("the master cannot be one of its own children")]
    SelfContainment,
    #[error("no plan available for this location")]
    NoPlan,
    #[error("no location chosen")]
    NoLocationChosen,

    // import
    #[error("Data in textbox is in incorrect format: {0}")]
    MalformedFormat(String),
    #[error("didn't select location")]
    MissingLocation,

    // requests
    #[error("choose a kind of request")]
    NoKind,
    #[error("request text is empty")]
    EmptyText,
    #[error("no barcodes given for the move")]
    MissingBarcodes,
    #[error("doesn't have right to move this asset: {0}")]
    ForeignItem(String),
    #[error("your level cannot decide this request")]
    InsufficientLevel,
    #[error("request has already been decided")]
    AlreadyDecided,
    #[error("didn't write reason for rejection")]
    ReasonRequired,

    // search and reports
    #[error("query is empty")]
    EmptyQuery,
    #[error("query is malformed: {0}")]
    MalformedQuery(String),
    #[error("Search item not found")]
    NoMatches,
    #[error("choose a type of location")]
    MissingReportType,
    #[error("choose what to compare against")]
    MissingReportKind,
    #[error("report {comparison} is not offered for {location_type}")]
    InvalidCombination { location_type: String, comparison: String },

    // storage
    #[error("{0} must be unique")]
    Constraint(String),
    #[error("integrity violation: {0}")]
    Integrity(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Machine-stable code carried in API error payloads.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            InvalidCredentials => "LOGIN_FAILURE",
            MalformedUsername => "USERNAME_MALFORMED",
            BiometricMismatch => "BIOMETRIC_MISMATCH",
            UnknownToken => "UNKNOWN_TOKEN",
            SessionExpired => "SESSION_EXPIRED",
            RoleChoiceRequired => "ROLE_CHOICE_REQUIRED",
            ForeignRole(_) => "FOREIGN_ROLE",
            NotHighPrivileged => "NOT_HIGH_PRIVILEGED",
            AlreadyEnrolled => "BIOMETRIC_ALREADY_ENROLLED",
            EmptySample => "BIOMETRIC_SAVE_FAILED",
            AuditLoginRequired => "AUDIT_LOGIN_REQUIRED",
            PermissionDenied(_) => "PERMISSION_DENIED",
            OutOfScope => "OUT_OF_SCOPE",
            DuplicateName(_) => "NAME_NOT_UNIQUE",
            EmptyName => "NAME_EMPTY",
            MissingField(_) => "REQUIRED_FIELD_EMPTY",
            EmptySelection => "EMPTY_SELECTION",
            NoTarget => "NO_TARGET",
            BadRequest(_) => "BAD_REQUEST",
            NotFound { .. } => "NOT_FOUND",
            UnknownName(..) => "NOT_FOUND",
            EmptyGrants => "NO_PERMISSION_SELECTED",
            EmptyGrantList => "PERMISSION_LIST_EMPTY",
            SelectOnePerson => "SELECT_ONE_PERSON",
            PermissionInUse(_) => "PERMISSION_IN_USE",
            UnknownPermission(_) => "UNKNOWN_PERMISSION",
            NoChoice => "NO_ROLE_OR_PERMISSION",
            AlreadySeeded => "ALREADY_SEEDED",
            DuplicateBarcode => "BARCODE_NOT_UNIQUE",
            UnknownType => "UNKNOWN_TYPE",
            MissingCompulsoryField(_) => "COMPULSORY_FIELD_MISSING",
            InvalidTransition { .. } => "INVALID_STATUS_TRANSITION",
            NotEditable(_) => "FIELD_NOT_EDITABLE",
            AlreadyAssigned => "ALREADY_ASSIGNED",
            ItemNotAvailable => "ITEM_NOT_AVAILABLE",
            SeatsExhausted => "SEATS_EXHAUSTED",
            NoLicenseChosen => "NO_LICENSE_CHOSEN",
            NoAssetChosen => "NO_ASSET_CHOSEN",
            NoBorrower => "NO_BORROWER",
            CycleCreated => "LOCATION_CYCLE",
            TooFewChildren => "TOO_FEW_CHILDREN",
            MultipleMasters => "SELECT_ONE_MASTER",
            SelfContainment => "MASTER_IN_CHILDREN",
            NoPlan => "NO_PLAN_AVAILABLE",
            NoLocationChosen => "NO_LOCATION_CHOSEN",
            MalformedFormat(_) => "INCORRECT_FORMAT",
            MissingLocation => "LOCATION_NOT_SELECTED",
            NoKind => "REQUEST_KIND_MISSING",
            EmptyText => "REQUEST_TEXT_EMPTY",
            MissingBarcodes => "BARCODES_MISSING",
            ForeignItem(_) => "NO_RIGHT_TO_MOVE",
            InsufficientLevel => "INSUFFICIENT_LEVEL",
            AlreadyDecided => "ALREADY_DECIDED",
            ReasonRequired => "REASON_REQUIRED",
            EmptyQuery => "QUERY_EMPTY",
            MalformedQuery(_) => "QUERY_MALFORMED",
            NoMatches => "SEARCH_NOT_FOUND",
            MissingReportType => "REPORT_TYPE_MISSING",
            MissingReportKind => "REPORT_KIND_MISSING",
            InvalidCombination { .. } => "REPORT_COMBINATION_INVALID",
            Constraint(_) => "CONSTRAINT_VIOLATION",
            Integrity(_) => "INTEGRITY_VIOLATION",
            Storage(_) => "STORAGE_ERROR",
            Config(_) => "CONFIG_ERROR",
        }
    }

    /// One instance of every variant, for the published code table.
    pub fn samples() -> Vec<Error> {
        use Error::*;
        let s = String::new;
        vec![
            InvalidCredentials, MalformedUsername, BiometricMismatch, UnknownToken, SessionExpired,
            RoleChoiceRequired, ForeignRole(EntityId(0)), NotHighPrivileged, AlreadyEnrolled, EmptySample,
            AuditLoginRequired, PermissionDenied(s()), OutOfScope, DuplicateName(s()), EmptyName,
            MissingField(s()), EmptySelection, NoTarget, BadRequest(s()),
            NotFound { kind: EntityKind::Asset, id: EntityId(0) }, EmptyGrants, EmptyGrantList,
            SelectOnePerson, PermissionInUse(s()), UnknownPermission(s()), NoChoice, AlreadySeeded,
            DuplicateBarcode, UnknownType, MissingCompulsoryField(s()),
            InvalidTransition { from: Status::Available, to: Status::Available }, NotEditable(s()),
            AlreadyAssigned, ItemNotAvailable, SeatsExhausted, NoLicenseChosen, NoAssetChosen, NoBorrower,
            CycleCreated, TooFewChildren, MultipleMasters, SelfContainment, NoPlan, NoLocationChosen,
            MalformedFormat(s()), MissingLocation, NoKind, EmptyText, MissingBarcodes, ForeignItem(s()),
            InsufficientLevel, AlreadyDecided, ReasonRequired, EmptyQuery, MalformedQuery(s()), NoMatches,
            MissingReportType, MissingReportKind,
            InvalidCombination { location_type: s(), comparison: s() }, Constraint(s()), Integrity(s()),
            Storage(s()), Config(s()),
        ]
    }

    /// HTTP status the gateway answers with.
    pub fn http_status(&self) -> u16 {
        use Error::*;
        match self {
            InvalidCredentials | UnknownToken | SessionExpired | BiometricMismatch | AuditLoginRequired => 401,
            PermissionDenied(_) | OutOfScope | ForeignItem(_) | InsufficientLevel | ForeignRole(_) => 403,
            NotFound { .. } | UnknownName(..) | NoMatches => 404,
            DuplicateName(_) | DuplicateBarcode | AlreadyDecided | AlreadyEnrolled | AlreadySeeded
            | PermissionInUse(_) | Constraint(_) | AlreadyAssigned | ItemNotAvailable | SeatsExhausted => 409,
            Integrity(_) | Storage(_) | Config(_) => 500,
            _ => 400,
        }
    }

    pub fn payload(&self) -> ErrorPayload {
        ErrorPayload { code: self.code(), message: self.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorPayload {
    pub code: &'static str,
    pub message: String,
}

impl From<rusqlite::Error> for Error {
    fn from(err: rusqlite::Error) -> Self {
        if let rusqlite::Error::SqliteFailure(e, Some(msg)) = &err {
            if e.code == rusqlite::ErrorCode::ConstraintViolation {
                if let Some(cols) = msg.strip_prefix("UNIQUE constraint failed: ") {
                    return unique_violation(cols);
                }
                return Error::Integrity(msg.clone());
            }
        }
        Error::Storage(err.to_string())
    }
}

/// Maps `table.column[, table.column]` from a SQLite unique failure to an error
/// naming the offending field.
fn unique_violation(columns: &str) -> Error {
    let fields: Vec<&str> = columns
        .split(',')
        .map(|c| c.trim().rsplit('.').next().unwrap_or(c))
        .filter(|c| *c != "parent_key" && *c != "kind")
        .collect();
    match fields.as_slice() {
        ["barcode"] => Error::DuplicateBarcode,
        [field] => Error::DuplicateName((*field).to_string()),
        _ => Error::Constraint(columns.to_string()),
    }
}

impl From<ValidationError> for Error {
    fn from(err: ValidationError) -> Self {
        match err {
            ValidationError::MissingField(f) => Error::MissingField(f),
            ValidationError::BadUsername(_) => Error::MalformedUsername,
            ValidationError::SeatsExceeded { .. } => Error::SeatsExhausted,
            ValidationError::EmptyFieldSet => Error::MissingField("field_set".into()),
            ValidationError::MissingCompulsoryField(f) => Error::MissingCompulsoryField(f),
            ValidationError::EmptyGrants => Error::EmptyGrants,
            ValidationError::Inconsistent(m) => Error::BadRequest(m),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::BadRequest(err.to_string())
    }
}
