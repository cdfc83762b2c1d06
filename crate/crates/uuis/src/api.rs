//! Transport-independent API: the route table and a dispatcher from
//! [`ApiRequest`] to [`ApiResponse`]. The HTTP server is a thin shell around
//! [`handle`].

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use uuis_core::catalog::perm;
use uuis_core::search::SearchRestriction;
use uuis_core::{EntityId, EntityKind, EntityRef, FieldDescriptor, PermissionGrant, TypeKind};

use crate::assignments::{AssetSelection, AssetTarget, LocationTarget};
use crate::error::{Error, Result};
use crate::estimate::EstimateRequest;
use crate::help::help_content;
use crate::importer::{ColumnMapping, Format, ImportRequest, MappingEntry};
use crate::inventory::{NewAsset, NewDepartment, NewFaculty, NewLicense, NewLocation, NewPerson, ViewQuery};
use crate::outbox::DeliveryState;
use crate::requests::{Decision, NewRequest};
use crate::roles::{Assignment, GrantChange};
use crate::search::AdvancedQuery;
use crate::service::{Actor, Service};
use crate::storage::AuditFilter;

pub const TOKEN_HEADER: &str = "x-uuis-token";
pub const AUDIT_TOKEN_HEADER: &str = "x-uuis-audit-token";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Auth {
    /// No session needed.
    Public,
    /// Any live session, including one still waiting for a role choice.
    Pending,
    /// A live session with an active role.
    Session,
}

type Handler = fn(&Service, &Ctx) -> Result<Reply>;

#[derive(Clone, Copy)]
pub struct Route {
    pub method: &'static str,
    /// Path segments; `{name}` matches any single segment.
    pub pattern: &'static str,
    pub name: &'static str,
    pub auth: Auth,
    /// Permission the caller must hold. Checked before the handler runs.
    pub permission: Option<&'static str>,
    /// UI page the endpoint belongs to; keys into the help pages.
    pub page: &'static str,
    /// Whether the call changes inventory, roles, requests or sessions.
    pub mutating: bool,
    handler: Handler,
}

impl std::fmt::Debug for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} ({})", self.method, self.pattern, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouteInfo {
    pub method: &'static str,
    pub pattern: &'static str,
    pub name: &'static str,
    pub auth: Auth,
    pub permission: Option<&'static str>,
    pub page: &'static str,
    pub mutating: bool,
}

impl Route {
    pub fn info(&self) -> RouteInfo {
        RouteInfo {
            method: self.method,
            pattern: self.pattern,
            name: self.name,
            auth: self.auth,
            permission: self.permission,
            page: self.page,
            mutating: self.mutating,
        }
    }

    fn matches(&self, segments: &[&str]) -> Option<Vec<String>> {
        let pattern: Vec<&str> = self.pattern.trim_matches('/').split('/').collect();
        if pattern.len() != segments.len() {
            return None;
        }
        let mut params = Vec::new();
        for (p, s) in pattern.iter().zip(segments) {
            if p.starts_with('{') {
                params.push(s.to_string());
            } else if p != s {
                return None;
            }
        }
        Some(params)
    }
}

macro_rules! route {
    ($m:literal $p:expr, $name:expr, $auth:ident, $perm:expr, $page:expr, $mut:literal, $h:expr) => {
        Route {
            method: $m,
            pattern: $p,
            name: $name,
            auth: Auth::$auth,
            permission: $perm,
            page: $page,
            mutating: $mut,
            handler: $h,
        }
    };
}

macro_rules! kind_routes {
    ($plural:literal, $page:literal, $see:expr, $insert:expr, $edit:expr) => {
        [
            route!("GET" $plural, concat!($page, ".list"), Session, Some($see), $page, false, h_list),
            route!("GET" concat!($plural, "/{id}"), concat!($page, ".get"), Session, Some($see), $page, false, h_get),
            route!("POST" $plural, concat!($page, ".add"), Session, Some($insert), $page, true, h_add),
            route!("PATCH" concat!($plural, "/{id}"), concat!($page, ".edit"), Session, Some($edit), $page, true, h_edit),
        ]
    };
}

const fn concat_routes<const A: usize, const B: usize, const N: usize>(a: [Route; A], b: [Route; B]) -> [Route; N] {
    assert!(A + B == N);
    let mut out = [a[0]; N];
    let mut i = 0;
    while i < A {
        out[i] = a[i];
        i += 1;
    }
    while i < N {
        out[i] = b[i - A];
        i += 1;
    }
    out
}

const SESSION_ROUTES: [Route; 9] = [
    route!("GET" "/health", "health", Public, None, "index", false, h_health),
    route!("GET" "/api/errors", "errors", Public, None, "index", false, h_errors),
    route!("GET" "/api/help/{page}", "help", Public, None, "index", false, h_help),
    route!("POST" "/api/session/login", "session.login", Public, None, "session", true, h_login),
    route!("GET" "/api/session/roles", "session.roles", Pending, None, "session", false, h_session_roles),
    route!("POST" "/api/session/role", "session.choose_role", Pending, None, "session", true, h_choose_role),
    route!("POST" "/api/session/logout", "session.logout", Session, Some(perm::LOGIN_LOGOUT), "session", true, h_logout),
    route!("POST" "/api/session/biometric", "session.enroll_biometric", Session, Some(perm::ADD_BIOMETRIC), "persons", true, h_enroll),
    route!("GET" "/api/capabilities", "capabilities", Session, None, "index", false, h_capabilities),
];

const INVENTORY_ROUTES: [Route; 24] = concat_routes(
    concat_routes::<12, 4, 16>(
        concat_routes::<8, 4, 12>(
            concat_routes::<4, 4, 8>(
                kind_routes!("/api/assets", "assets", perm::SEE_ASSETS, perm::INSERT_ASSET, perm::EDIT_ASSET),
                kind_routes!("/api/licenses", "licenses", perm::SEE_LICENSES, perm::INSERT_LICENSE, perm::EDIT_LICENSE),
            ),
            kind_routes!("/api/locations", "locations", perm::SEE_LOCATIONS, perm::INSERT_LOCATION, perm::EDIT_LOCATION),
        ),
        kind_routes!("/api/persons", "persons", perm::SEE_PERSONS, perm::IMPORT_PERSON, perm::EDIT_PERSON),
    ),
    concat_routes::<4, 4, 8>(
        kind_routes!("/api/faculties", "faculties", perm::SEE_FAC_DEP, perm::INSERT_FAC_DEP, perm::EDIT_FAC_DEP),
        kind_routes!("/api/departments", "departments", perm::SEE_FAC_DEP, perm::INSERT_FAC_DEP, perm::EDIT_FAC_DEP),
    ),
);

const OPERATION_ROUTES: [Route; 51] = [
    route!("POST" "/api/assets/delete", "assets.delete", Session, Some(perm::DELETE_ASSETS), "assets", true, h_delete),
    route!("POST" "/api/licenses/delete", "licenses.delete", Session, Some(perm::DELETE_LICENSES), "licenses", true, h_delete),
    route!("POST" "/api/locations/delete", "locations.delete", Session, Some(perm::DELETE_LOCATIONS), "locations", true, h_delete),
    route!("POST" "/api/persons/delete", "persons.delete", Session, Some(perm::DELETE_PERSONS), "persons", true, h_delete),
    route!("POST" "/api/assets/assign/person", "assets.assign_person", Session, Some(perm::ASSIGN_ASSETS_TO_PERSON), "assets", true, h_assign_assets),
    route!("POST" "/api/assets/assign/location", "assets.assign_location", Session, Some(perm::ASSIGN_ASSETS_TO_LOCATION), "assets", true, h_assign_assets),
    route!("POST" "/api/assets/borrow", "assets.borrow", Session, Some(perm::BORROW_ASSETS), "assets", true, h_borrow),
    route!("POST" "/api/licenses/borrow", "licenses.borrow", Session, Some(perm::BORROW_LICENSES), "licenses", true, h_borrow),
    route!("POST" "/api/licenses/assign", "licenses.assign_asset", Session, Some(perm::ASSIGN_LICENSE_TO_ASSET), "licenses", true, h_assign_license),
    route!("POST" "/api/locations/assign/location", "locations.assign_location", Session, Some(perm::ASSIGN_LOCATION_TO_LOCATION), "locations", true, h_assign_locations),
    route!("POST" "/api/locations/assign/department", "locations.assign_department", Session, Some(perm::ASSIGN_LOCATION_TO_DEPARTMENT), "locations", true, h_assign_locations),
    route!("POST" "/api/locations/assign/person", "locations.assign_person", Session, Some(perm::ASSIGN_LOCATION_TO_PERSON), "locations", true, h_assign_locations),
    route!("POST" "/api/groups/asset", "groups.asset", Session, Some(perm::ADD_GROUP_ASSET), "groups", true, h_group),
    route!("POST" "/api/groups/location", "groups.location", Session, Some(perm::ADD_GROUP_LOCATION), "groups", true, h_group),
    route!("GET" "/api/types", "types.list", Session, None, "types", false, h_types),
    route!("POST" "/api/types/asset", "types.asset", Session, Some(perm::ADD_TYPE_ASSET), "types", true, h_create_type),
    route!("POST" "/api/types/license", "types.license", Session, Some(perm::ADD_TYPE_LICENSE), "types", true, h_create_type),
    route!("POST" "/api/types/location", "types.location", Session, Some(perm::ADD_TYPE_LOCATION), "types", true, h_create_type),
    route!("POST" "/api/types/person", "types.person", Session, Some(perm::EDIT_PERSON), "types", true, h_create_type),
    route!("GET" "/api/subgroups", "subgroups.list", Session, None, "subgroups", false, h_subgroups),
    route!("POST" "/api/subgroups", "subgroups.create", Session, Some(perm::ADD_SUBGROUP_ASSET), "subgroups", true, h_create_subgroup),
    route!("POST" "/api/import/asset", "import.asset", Session, Some(perm::IMPORT_ASSET), "import", true, h_import),
    route!("POST" "/api/import/license", "import.license", Session, Some(perm::IMPORT_LICENSE), "import", true, h_import),
    route!("POST" "/api/import/location", "import.location", Session, Some(perm::IMPORT_LOCATION), "import", true, h_import),
    route!("POST" "/api/import/person", "import.person", Session, Some(perm::IMPORT_PERSON), "import", true, h_import),
    route!("GET" "/api/import/{seq}/problems", "import.problems", Session, None, "import", false, h_import_problems),
    route!("GET" "/api/requests", "requests.list", Session, Some(perm::SEE_REQUESTS_ALL), "requests", false, h_requests),
    route!("GET" "/api/requests/mine", "requests.mine", Session, None, "requests", false, h_my_requests),
    route!("GET" "/api/requests/{id}", "requests.get", Session, None, "requests", false, h_request),
    route!("POST" "/api/requests/acquisition", "requests.acquisition", Session, Some(perm::CREATE_ACQUISITION_REQUEST), "requests", true, h_submit),
    route!("POST" "/api/requests/reparation", "requests.reparation", Session, Some(perm::CREATE_REPARATION_REQUEST), "requests", true, h_submit),
    route!("POST" "/api/requests/bug", "requests.bug", Session, Some(perm::CREATE_REPARATION_REQUEST), "requests", true, h_submit),
    route!("POST" "/api/requests/elimination", "requests.elimination", Session, Some(perm::CREATE_ELIMINATION_REQUEST), "requests", true, h_submit),
    route!("POST" "/api/requests/move", "requests.move", Session, Some(perm::CREATE_MOVE_REQUEST), "requests", true, h_submit),
    route!("POST" "/api/requests/{id}/decide", "requests.decide", Session, Some(perm::APPROVE_REJECT_REQUEST), "requests", true, h_decide),
    route!("GET" "/api/search", "search.basic", Session, Some(perm::BASIC_SEARCH), "search", false, h_basic_search),
    route!("POST" "/api/search/advanced", "search.advanced", Session, Some(perm::ADVANCED_SEARCH), "search", false, h_advanced_search),
    route!("GET" "/api/reports/capacity", "reports.capacity", Session, Some(perm::CREATE_PRINT_REPORT), "reports", false, h_capacity),
    route!("GET" "/api/floorplans", "floorplans.list", Session, Some(perm::SEE_PRINT_FLOOR_PLAN), "floorplan", false, h_plans),
    route!("GET" "/api/floorplans/{id}", "floorplans.get", Session, Some(perm::SEE_PRINT_FLOOR_PLAN), "floorplan", false, h_plan),
    route!("PUT" "/api/floorplans/{id}", "floorplans.set", Session, Some(perm::EDIT_LOCATION), "locations", true, h_set_plan),
    route!("POST" "/api/audit/login", "audit.login", Session, Some(perm::SEE_AUDIT), "audit", true, h_audit_login),
    route!("GET" "/api/audit", "audit.query", Session, Some(perm::SEE_AUDIT), "audit", false, h_audit),
    route!("GET" "/api/profile", "profile", Session, Some(perm::SEE_MY_PROFILE), "profile", false, h_profile),
    route!("GET" "/api/roles", "roles.list", Session, None, "roles", false, h_roles),
    route!("POST" "/api/roles", "roles.add", Session, Some(perm::ADD_ROLE), "roles", true, h_add_role),
    route!("POST" "/api/roles/edit-for-person", "roles.edit_for_person", Session, Some(perm::EDIT_ROLE), "persons", true, h_edit_role_for_person),
    route!("POST" "/api/roles/assign", "roles.assign", Session, Some(perm::ASSIGN_ROLE_TO_PERSONS), "persons", true, h_assign_bulk),
    route!("GET" "/api/permissions", "permissions.list", Session, None, "roles", false, h_permissions),
    route!("POST" "/api/permissions", "permissions.add", Session, Some(perm::ADD_PERMISSION), "roles", true, h_add_permission),
    route!("POST" "/api/permissions/assign", "permissions.assign", Session, Some(perm::ASSIGN_PERMISSION_TO_PERSONS), "persons", true, h_assign_bulk),
];

const TAIL_ROUTES: [Route; 4] = [
    route!("PATCH" "/api/permissions/{name}", "permissions.edit", Session, Some(perm::EDIT_PERMISSION), "roles", true, h_edit_permission),
    route!("GET" "/api/outbox", "outbox.list", Session, Some(perm::SEE_AUDIT), "outbox", false, h_outbox),
    route!("POST" "/api/outbox", "outbox.notice", Session, Some(perm::EDIT_PERSON), "outbox", true, h_notice),
    route!("POST" "/api/estimate", "estimate", Session, None, "cocomo", false, h_estimate),
];

/// Every endpoint. Literal paths come before patterns that could shadow them.
pub static ROUTES: [Route; 88] = concat_routes(
    concat_routes::<33, 51, 84>(concat_routes::<9, 24, 33>(SESSION_ROUTES, INVENTORY_ROUTES), OPERATION_ROUTES),
    TAIL_ROUTES,
);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiRequest {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub token: Option<String>,
    pub audit_token: Option<String>,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    /// Builds a request from a method and a `path?query` string.
    pub fn new(method: &str, target: &str) -> ApiRequest {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        ApiRequest {
            method: method.to_ascii_uppercase(),
            path: path.to_string(),
            query: serde_urlencoded::from_str(query).unwrap_or_default(),
            ..ApiRequest::default()
        }
    }

    pub fn get(target: &str) -> ApiRequest {
        ApiRequest::new("GET", target)
    }

    pub fn post(target: &str, body: Value) -> ApiRequest {
        ApiRequest::new("POST", target).json(body)
    }

    pub fn json(mut self, body: Value) -> ApiRequest {
        self.body = body.to_string().into_bytes();
        self.content_type = Some("application/json".into());
        self
    }

    pub fn text(mut self, content_type: &str, body: &str) -> ApiRequest {
        self.body = body.as_bytes().to_vec();
        self.content_type = Some(content_type.into());
        self
    }

    pub fn token(mut self, token: &str) -> ApiRequest {
        self.token = Some(token.to_string());
        self
    }

    pub fn audit_token(mut self, token: &str) -> ApiRequest {
        self.audit_token = Some(token.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl ApiResponse {
    fn json(status: u16, value: &Value) -> ApiResponse {
        ApiResponse { status, content_type: "application/json", body: value.to_string().into_bytes() }
    }

    pub fn error(e: &Error) -> ApiResponse {
        ApiResponse::json(e.http_status(), &json!(e.payload()))
    }

    pub fn value(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }

    /// Error code of a failed call.
    pub fn code(&self) -> Option<String> {
        self.value().get("code").and_then(Value::as_str).map(str::to_string)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

pub enum Reply {
    Json(Value),
    Created(Value),
    Csv(String),
}

fn ok<T: Serialize>(value: T) -> Result<Reply> {
    Ok(Reply::Json(serde_json::to_value(value)?))
}

fn created<T: Serialize>(value: T) -> Result<Reply> {
    Ok(Reply::Created(serde_json::to_value(value)?))
}

pub struct Ctx<'r> {
    pub request: &'r ApiRequest,
    pub route: &'static Route,
    pub params: Vec<String>,
    actor: Option<Actor>,
}

impl Ctx<'_> {
    fn actor(&self) -> Result<&Actor> {
        self.actor.as_ref().ok_or(Error::UnknownToken)
    }

    fn token(&self) -> Result<&str> {
        self.request.token.as_deref().ok_or(Error::UnknownToken)
    }

    fn body<T: DeserializeOwned>(&self) -> Result<T> {
        if self.request.body.iter().all(u8::is_ascii_whitespace) {
            return Ok(serde_json::from_str("{}")?);
        }
        Ok(serde_json::from_slice(&self.request.body)?)
    }

    fn query(&self, name: &str) -> Option<&str> {
        self.request.query.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    fn query_parsed<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>> {
        self.query(name)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse().map_err(|_| Error::BadRequest(format!("bad value for `{name}`: {v}"))))
            .transpose()
    }

    fn param(&self, i: usize) -> &str {
        &self.params[i]
    }

    fn id(&self, i: usize) -> Result<EntityId> {
        parse_id(self.param(i))
    }

    /// Entity kind named by the second path segment (`/api/<kind>/...`).
    fn kind(&self) -> Result<EntityKind> {
        let seg = self.request.path.trim_matches('/').split('/').nth(1).unwrap_or("");
        EntityKind::parse(seg).ok_or_else(|| Error::BadRequest(format!("unknown kind `{seg}`")))
    }

    /// Last path segment.
    fn last(&self) -> &str {
        self.request.path.trim_matches('/').rsplit('/').next().unwrap_or("")
    }
}

pub fn parse_id(s: &str) -> Result<EntityId> {
    s.trim().parse::<u64>().map(EntityId).map_err(|_| Error::BadRequest(format!("`{s}` is not an id")))
}

fn parse_ids(s: &str) -> Result<Vec<EntityId>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(parse_id).collect()
}

fn lookup(method: &str, path: &str) -> std::result::Result<(&'static Route, Vec<String>), bool> {
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    let mut path_known = false;
    for r in ROUTES.iter() {
        if let Some(params) = r.matches(&segments) {
            if r.method == method {
                return Ok((r, params));
            }
            path_known = true;
        }
    }
    Err(path_known)
}

/// Runs one API call.
pub fn handle(service: &Service, request: &ApiRequest) -> ApiResponse {
    let (route, params) = match lookup(&request.method, &request.path) {
        Ok(found) => found,
        Err(path_known) => {
            let (status, code) = if path_known { (405, "METHOD_NOT_ALLOWED") } else { (404, "NO_ROUTE") };
            let body = json!({ "code": code, "message": format!("{} {}", request.method, request.path) });
            return ApiResponse::json(status, &body);
        }
    };
    match dispatch(service, request, route, params) {
        Ok(Reply::Json(v)) => ApiResponse::json(200, &v),
        Ok(Reply::Created(v)) => ApiResponse::json(201, &v),
        Ok(Reply::Csv(text)) => ApiResponse { status: 200, content_type: "text/csv; charset=utf-8", body: text.into_bytes() },
        Err(e) => {
            if e.http_status() >= 500 {
                tracing::error!(route = route.name, error = %e, "request failed");
            }
            ApiResponse::error(&e)
        }
    }
}

fn dispatch(service: &Service, request: &ApiRequest, route: &'static Route, params: Vec<String>) -> Result<Reply> {
    let actor = match route.auth {
        Auth::Public => None,
        Auth::Pending => {
            let token = request.token.as_deref().ok_or(Error::UnknownToken)?;
            service.touch_or_expire(token)?;
            None
        }
        Auth::Session => {
            let token = request.token.as_deref().ok_or(Error::UnknownToken)?;
            let actor = service.authenticate(token)?;
            if let Some(p) = route.permission {
                actor.require(p)?;
            }
            Some(actor)
        }
    };
    let ctx = Ctx { request, route, params, actor };
    (route.handler)(service, &ctx)
}

/// Routes a session may call with its current permissions.
pub fn capabilities(actor: &Actor) -> Vec<RouteInfo> {
    ROUTES
        .iter()
        .filter(|r| r.auth != Auth::Public && r.permission.is_none_or(|p| actor.has(p)))
        .map(Route::info)
        .collect()
}

// ---- handlers ----

fn h_health(_: &Service, _: &Ctx) -> Result<Reply> {
    ok(json!({ "status": "ok" }))
}

/// Every error code with its HTTP status and message text.
fn h_errors(_: &Service, _: &Ctx) -> Result<Reply> {
    let mut table: Vec<Value> = Error::samples()
        .iter()
        .map(|e| json!({ "code": e.code(), "status": e.http_status(), "message": e.to_string() }))
        .collect();
    table.sort_by(|a, b| a["code"].as_str().cmp(&b["code"].as_str()));
    table.dedup_by(|a, b| a["code"] == b["code"]);
    ok(table)
}

fn h_help(_: &Service, c: &Ctx) -> Result<Reply> {
    ok(help_content(c.param(0)))
}

#[derive(Deserialize)]
struct LoginBody {
    #[serde(default)]
    username: String,
    #[serde(default)]
    password: String,
    /// Base64 voice sample for high-privileged accounts.
    #[serde(default)]
    voice_sample: Option<String>,
}

fn decode_sample(sample: &str) -> Result<Vec<u8>> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD
        .decode(sample.trim())
        .map_err(|e| Error::BadRequest(format!("voice sample is not base64: {e}")))
}

fn h_login(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: LoginBody = c.body()?;
    let sample = body.voice_sample.as_deref().map(decode_sample).transpose()?;
    ok(s.login(&body.username, &body.password, sample.as_deref())?)
}

fn h_session_roles(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.session_roles(c.token()?)?)
}

#[derive(Deserialize)]
struct RoleChoice {
    role_id: Option<EntityId>,
}

fn h_choose_role(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: RoleChoice = c.body()?;
    let role = body.role_id.ok_or(Error::NoChoice)?;
    let actor = s.choose_role(c.token()?, role)?;
    ok(json!({ "person_id": actor.id(), "active_role_id": actor.active_role_id, "permissions": actor.principal.permissions }))
}

fn h_logout(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(json!({ "message": s.logout(c.token()?)? }))
}

#[derive(Deserialize)]
struct SampleBody {
    #[serde(default)]
    sample: String,
}

fn h_enroll(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: SampleBody = c.body()?;
    let sample = decode_sample(&body.sample)?;
    s.enroll_biometric(c.actor()?, &sample)?;
    ok(json!({ "enrolled": true }))
}

fn h_capabilities(_: &Service, c: &Ctx) -> Result<Reply> {
    let actor = c.actor()?;
    ok(json!({
        "person_id": actor.id(),
        "level": actor.level(),
        "active_role_id": actor.active_role_id,
        "permissions": actor.principal.permissions,
        "routes": capabilities(actor),
    }))
}

fn view_query(c: &Ctx) -> Result<ViewQuery> {
    Ok(ViewQuery {
        columns: c.query("columns").filter(|v| !v.is_empty()).map(|v| v.split(',').map(|x| x.trim().to_string()).collect()),
        offset: c.query_parsed("offset")?.unwrap_or(0),
        limit: c.query_parsed("limit")?,
        include_unavailable: c.query_parsed("include_unavailable")?.unwrap_or(false),
    })
}

fn h_list(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.view_entities(c.actor()?, c.kind()?, &view_query(c)?)?)
}

fn h_get(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.get_entity(c.actor()?, c.kind()?, c.id(0)?)?)
}

fn h_add(s: &Service, c: &Ctx) -> Result<Reply> {
    let a = c.actor()?;
    match c.kind()? {
        EntityKind::Asset => created(s.add_asset(a, c.body::<NewAsset>()?)?),
        EntityKind::License => created(s.add_license(a, c.body::<NewLicense>()?)?),
        EntityKind::Location => created(s.add_location(a, c.body::<NewLocation>()?)?),
        EntityKind::Person => created(s.add_person(a, c.body::<NewPerson>()?)?),
        EntityKind::Faculty => created(s.add_faculty(a, c.body::<NewFaculty>()?)?),
        EntityKind::Department => created(s.add_department(a, c.body::<NewDepartment>()?)?),
        other => Err(Error::BadRequest(format!("{other} cannot be added here"))),
    }
}

fn h_edit(s: &Service, c: &Ctx) -> Result<Reply> {
    let changes: Map<String, Value> = c.body()?;
    ok(s.edit_entity(c.actor()?, c.kind()?, c.id(0)?, &changes)?)
}

#[derive(Deserialize)]
struct IdsBody {
    #[serde(default)]
    ids: Vec<EntityId>,
}

fn h_delete(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: IdsBody = c.body()?;
    ok(s.delete_entities(c.actor()?, c.kind()?, &body.ids)?)
}

#[derive(Deserialize)]
struct AssignAssetsBody {
    #[serde(default)]
    target_id: Option<EntityId>,
    #[serde(flatten)]
    selection: AssetSelection,
}

fn h_assign_assets(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: AssignAssetsBody = c.body()?;
    let target = body.target_id.map(|id| match c.last() {
        "person" => AssetTarget::Person(id),
        _ => AssetTarget::Location(id),
    });
    ok(s.assign_assets(c.actor()?, target, &body.selection)?)
}

#[derive(Deserialize)]
struct AssignLicenseBody {
    #[serde(default)]
    license_id: Option<EntityId>,
    #[serde(default)]
    asset_id: Option<EntityId>,
}

fn h_assign_license(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: AssignLicenseBody = c.body()?;
    ok(s.assign_license_to_asset(c.actor()?, body.license_id, body.asset_id)?)
}

#[derive(Deserialize)]
struct AssignLocationsBody {
    #[serde(default)]
    target_id: Option<EntityId>,
    #[serde(default)]
    ids: Vec<EntityId>,
}

fn h_assign_locations(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: AssignLocationsBody = c.body()?;
    let target = body.target_id.map(|id| match c.last() {
        "location" => LocationTarget::Location(id),
        "department" => LocationTarget::Department(id),
        _ => LocationTarget::Person(id),
    });
    ok(s.assign_locations(c.actor()?, target, &body.ids)?)
}

#[derive(Deserialize)]
struct BorrowBody {
    #[serde(default)]
    ids: Vec<EntityId>,
    #[serde(default)]
    borrower_id: Option<EntityId>,
}

fn h_borrow(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: BorrowBody = c.body()?;
    ok(s.borrow(c.actor()?, c.kind()?, &body.ids, body.borrower_id)?)
}

#[derive(Deserialize)]
struct GroupBody {
    #[serde(default)]
    master_ids: Vec<EntityId>,
    #[serde(default)]
    child_ids: Vec<EntityId>,
}

fn h_group(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: GroupBody = c.body()?;
    let kind = EntityKind::parse(c.last()).ok_or_else(|| Error::BadRequest("unknown group kind".into()))?;
    created(s.create_group(c.actor()?, kind, &body.master_ids, &body.child_ids)?)
}

fn type_kind(name: &str) -> Result<TypeKind> {
    EntityKind::parse(name)
        .and_then(TypeKind::from_entity_kind)
        .ok_or_else(|| Error::BadRequest(format!("unknown type kind `{name}`")))
}

fn h_types(s: &Service, c: &Ctx) -> Result<Reply> {
    let kind = c.query("kind").filter(|k| !k.is_empty()).map(type_kind).transpose()?;
    ok(s.list_types(kind)?)
}

#[derive(Deserialize)]
struct TypeBody {
    #[serde(default)]
    name: String,
    #[serde(default)]
    field_set: Vec<FieldDescriptor>,
}

fn h_create_type(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: TypeBody = c.body()?;
    created(s.create_type(c.actor()?, type_kind(c.last())?, &body.name, body.field_set)?)
}

fn h_subgroups(s: &Service, _: &Ctx) -> Result<Reply> {
    ok(s.list_subgroups()?)
}

#[derive(Deserialize)]
struct SubgroupBody {
    #[serde(default)]
    name: String,
    #[serde(default)]
    asset_ids: Vec<EntityId>,
}

fn h_create_subgroup(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: SubgroupBody = c.body()?;
    created(s.create_subgroup(c.actor()?, &body.name, &body.asset_ids)?)
}

/// Mapping written as `0=name,1=barcode`.
pub fn parse_mapping_entries(text: &str) -> Result<Vec<MappingEntry>> {
    text.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|pair| {
            let (col, field) =
                pair.split_once('=').ok_or_else(|| Error::BadRequest(format!("mapping entry `{pair}` is not column=field")))?;
            let column = col.trim().parse().map_err(|_| Error::BadRequest(format!("bad column `{col}`")))?;
            Ok(MappingEntry { column, field: field.trim().to_string() })
        })
        .collect()
}

fn h_import(s: &Service, c: &Ctx) -> Result<Reply> {
    let kind = type_kind(c.last())?;
    let json = c.request.content_type.as_deref().is_none_or(|t| t.starts_with("application/json"));
    let request = if json {
        let mut r: ImportRequest = c.body()?;
        r.mapping.target_kind = kind;
        r
    } else {
        // raw CSV or text upload; mapping and options come from the query
        let text = String::from_utf8(c.request.body.clone()).map_err(|_| Error::MalformedFormat("input is not UTF-8".into()))?;
        let format = match c.query("format") {
            Some(f) => Format::parse(f).ok_or_else(|| Error::BadRequest(format!("unknown format `{f}`")))?,
            None if c.request.content_type.as_deref().is_some_and(|t| t.starts_with("text/csv")) => Format::Csv,
            None => Format::Txt,
        };
        ImportRequest {
            mapping: ColumnMapping {
                target_kind: kind,
                entries: parse_mapping_entries(c.query("map").unwrap_or(""))?,
                default_location_id: c.query("location").filter(|v| !v.is_empty()).map(parse_id).transpose()?,
                type_id: c.query("type_id").filter(|v| !v.is_empty()).map(parse_id).transpose()?,
                faculty_id: c.query("faculty_id").filter(|v| !v.is_empty()).map(parse_id).transpose()?,
                department_id: c.query("department_id").filter(|v| !v.is_empty()).map(parse_id).transpose()?,
            },
            format,
            delimiter: c.query_parsed("delimiter")?,
            text,
        }
    };
    ok(s.import(c.actor()?, &request)?)
}

fn h_import_problems(s: &Service, c: &Ctx) -> Result<Reply> {
    let seq: u64 = c.param(0).parse().map_err(|_| Error::BadRequest("bad import number".into()))?;
    Ok(Reply::Csv(s.import_problem_file(c.actor()?, seq)?))
}

fn h_requests(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.list_requests(c.actor()?)?)
}

fn h_my_requests(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.my_requests(c.actor()?)?)
}

fn h_request(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.get_request(c.actor()?, c.id(0)?)?)
}

fn h_submit(s: &Service, c: &Ctx) -> Result<Reply> {
    let mut body: NewRequest = c.body()?;
    body.kind = Some(c.last().to_string());
    created(s.submit_request(c.actor()?, &body)?)
}

fn h_decide(s: &Service, c: &Ctx) -> Result<Reply> {
    let decision: Decision = c.body()?;
    ok(s.decide(c.actor()?, c.id(0)?, &decision)?)
}

fn h_basic_search(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.basic_search(c.actor()?, c.query("q").unwrap_or(""))?)
}

#[derive(Deserialize)]
struct AdvancedBody {
    #[serde(default)]
    query: String,
    #[serde(default)]
    restriction: Option<SearchRestriction>,
}

fn h_advanced_search(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: AdvancedBody = c.body()?;
    let q = AdvancedQuery { query: body.query, restriction: body.restriction.unwrap_or_else(SearchRestriction::everything) };
    ok(s.advanced_search(c.actor()?, &q)?)
}

fn h_capacity(s: &Service, c: &Ctx) -> Result<Reply> {
    let report = s.capacity_report(c.actor()?, c.query("location_type"), c.query("comparison"))?;
    if c.query("format") == Some("csv") {
        return Ok(Reply::Csv(report.to_csv()?));
    }
    ok(report)
}

fn h_plans(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.list_plans(c.actor()?)?)
}

fn h_plan(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.floor_plan(c.actor()?, Some(c.id(0)?))?)
}

#[derive(Deserialize)]
struct PlanBody {
    #[serde(default)]
    document: String,
}

fn h_set_plan(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: PlanBody = c.body()?;
    s.set_floor_plan(c.actor()?, c.id(0)?, &body.document)?;
    ok(json!({ "location_id": c.id(0)?, "has_plan": true }))
}

#[derive(Deserialize)]
struct PasswordBody {
    #[serde(default)]
    password: String,
}

fn h_audit_login(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: PasswordBody = c.body()?;
    ok(json!({ "audit_token": s.audit_login(c.actor()?, &body.password)? }))
}

fn parse_items(text: &str) -> Result<BTreeSet<EntityRef>> {
    text.split([',', ';'])
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| {
            let (kind, id) = item.split_once(':').ok_or_else(|| Error::BadRequest(format!("item `{item}` is not kind:id")))?;
            let kind = EntityKind::parse(kind).ok_or_else(|| Error::BadRequest(format!("unknown kind `{kind}`")))?;
            Ok(EntityRef::new(kind, parse_id(id)?))
        })
        .collect()
}

fn parse_time(name: &str, v: &str) -> Result<uuis_core::Timestamp> {
    chrono::DateTime::parse_from_rfc3339(v)
        .map(|t| t.with_timezone(&chrono::Utc))
        .map_err(|e| Error::BadRequest(format!("`{name}` is not an RFC 3339 time: {e}")))
}

fn h_audit(s: &Service, c: &Ctx) -> Result<Reply> {
    let filter = AuditFilter {
        from: c.query("from").filter(|v| !v.is_empty()).map(|v| parse_time("from", v)).transpose()?,
        to: c.query("to").filter(|v| !v.is_empty()).map(|v| parse_time("to", v)).transpose()?,
        persons: parse_ids(c.query("persons").unwrap_or(""))?.into_iter().collect(),
        items: parse_items(c.query("items").unwrap_or(""))?,
    };
    let token = c.request.audit_token.as_deref();
    if c.query("format") == Some("csv") {
        return Ok(Reply::Csv(s.audit_export(c.actor()?, token, &filter)?));
    }
    ok(s.audit_query(c.actor()?, token, &filter)?)
}

fn h_profile(s: &Service, c: &Ctx) -> Result<Reply> {
    ok(s.my_profile(c.actor()?)?)
}

fn h_roles(s: &Service, _: &Ctx) -> Result<Reply> {
    ok(s.list_roles()?)
}

#[derive(Deserialize)]
struct RoleBody {
    #[serde(default)]
    name: String,
    #[serde(default)]
    grants: Vec<PermissionGrant>,
}

fn h_add_role(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: RoleBody = c.body()?;
    created(s.add_role(c.actor()?, &body.name, body.grants)?)
}

#[derive(Deserialize)]
struct EditForPersonBody {
    #[serde(default)]
    person_ids: Vec<EntityId>,
    #[serde(flatten)]
    change: GrantChange,
}

fn h_edit_role_for_person(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: EditForPersonBody = c.body()?;
    ok(s.edit_role_for_person(c.actor()?, &body.person_ids, &body.change)?)
}

#[derive(Deserialize)]
struct BulkBody {
    #[serde(default)]
    person_ids: Vec<EntityId>,
    #[serde(default)]
    role_id: Option<EntityId>,
    #[serde(default)]
    grant: Option<PermissionGrant>,
}

fn h_assign_bulk(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: BulkBody = c.body()?;
    // the path decides which of the two the caller is handing out
    let assignment = match c.route.name {
        "roles.assign" => Assignment { role_id: body.role_id, grant: None },
        _ => Assignment { role_id: None, grant: body.grant },
    };
    ok(s.assign_bulk(c.actor()?, &body.person_ids, &assignment)?)
}

fn h_permissions(s: &Service, _: &Ctx) -> Result<Reply> {
    ok(s.list_permissions()?)
}

#[derive(Deserialize)]
struct NameBody {
    #[serde(default)]
    name: String,
}

fn h_add_permission(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: NameBody = c.body()?;
    s.add_permission(c.actor()?, &body.name)?;
    created(json!({ "name": body.name.trim() }))
}

fn h_edit_permission(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: NameBody = c.body()?;
    s.edit_permission(c.actor()?, c.param(0), &body.name)?;
    ok(json!({ "from": c.param(0), "to": body.name.trim() }))
}

fn h_outbox(s: &Service, c: &Ctx) -> Result<Reply> {
    let state = match c.query("state").filter(|v| !v.is_empty()) {
        Some(v) => Some(DeliveryState::parse(v).ok_or_else(|| Error::BadRequest(format!("unknown state `{v}`")))?),
        None => None,
    };
    ok(s.outbox_list(c.actor()?, state)?)
}

#[derive(Deserialize)]
struct NoticeBody {
    recipient_id: Option<EntityId>,
    #[serde(default)]
    subject: String,
    #[serde(default)]
    body: String,
}

fn h_notice(s: &Service, c: &Ctx) -> Result<Reply> {
    let body: NoticeBody = c.body()?;
    let recipient = body.recipient_id.ok_or(Error::NoTarget)?;
    created(json!({ "id": s.outbox_notice(c.actor()?, recipient, &body.subject, &body.body)? }))
}

fn h_estimate(_: &Service, c: &Ctx) -> Result<Reply> {
    let body: EstimateRequest = c.body()?;
    ok(crate::estimate::run(&body)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::help::{INDEX_KEY, PAGES};

    #[test]
    fn every_mutating_session_route_names_one_permission() {
        for r in ROUTES.iter().filter(|r| r.mutating && r.auth == Auth::Session) {
            assert!(r.permission.is_some(), "{r:?}");
        }
    }

    #[test]
    fn every_route_page_has_help() {
        for r in ROUTES.iter() {
            assert!(r.page == INDEX_KEY || PAGES.iter().any(|p| p.key == r.page), "{r:?}");
        }
    }

    #[test]
    fn routes_are_unambiguous() {
        let mut seen = BTreeSet::new();
        for r in ROUTES.iter() {
            assert!(seen.insert((r.method, r.pattern)), "{r:?}");
            assert!(seen.len() <= ROUTES.len());
        }
        let names: BTreeSet<&str> = ROUTES.iter().map(|r| r.name).collect();
        assert_eq!(names.len(), ROUTES.len());
    }

    #[test]
    fn literal_paths_win_over_patterns() {
        assert_eq!(lookup("POST", "/api/assets/delete").unwrap().0.name, "assets.delete");
        assert_eq!(lookup("GET", "/api/requests/mine").unwrap().0.name, "requests.mine");
        assert_eq!(lookup("GET", "/api/requests/7").unwrap().0.name, "requests.get");
        assert_eq!(lookup("GET", "/api/assets/7").unwrap().1, vec!["7".to_string()]);
        assert!(lookup("DELETE", "/api/assets/7").unwrap_err());
        assert!(!lookup("GET", "/api/nothing").unwrap_err());
    }

    #[test]
    fn mapping_text() {
        let m = parse_mapping_entries("0=name, 1=barcode").unwrap();
        assert_eq!(m[1], MappingEntry { column: 1, field: "barcode".into() });
        assert!(parse_mapping_entries("0name").is_err());
    }
}
