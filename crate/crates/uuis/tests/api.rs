//! The JSON dispatcher: authentication, status codes, the code table,
//! capabilities and the upload paths.

mod common;

use std::collections::BTreeSet;

use chrono::Duration;
use common::*;
use serde_json::{json, Value};
use uuis::api::{ApiRequest, ROUTES};
use uuis::Error;

fn login(w: &World, username: &str) -> String {
    let r = w.call(ApiRequest::post("/api/session/login", json!({"username": username, "password": PASSWORD})));
    assert_eq!(r.status, 200, "{}", r.text());
    r.value()["token"].as_str().unwrap().to_string()
}

#[test]
fn health_and_help_are_public() {
    let w = world();
    let r = w.call(ApiRequest::get("/health"));
    assert_eq!(r.status, 200);
    let r = w.call(ApiRequest::get("/api/help/search"));
    assert_eq!(r.status, 200);
    assert!(!r.text().is_empty());
}

#[test]
fn error_table_lists_every_code_once() {
    let w = world();
    let r = w.call(ApiRequest::get("/api/errors"));
    let table = r.value();
    let rows = table.as_array().unwrap();
    let codes: BTreeSet<&str> = rows.iter().map(|e| e["code"].as_str().unwrap()).collect();
    assert_eq!(codes.len(), rows.len());
    for e in Error::samples() {
        let row = rows.iter().find(|r| r["code"] == e.code()).unwrap();
        assert_eq!(row["status"], e.http_status());
    }
    let login = rows.iter().find(|r| r["code"] == "LOGIN_FAILURE").unwrap();
    assert_eq!(login["message"], "Login Failure");
}

#[test]
fn missing_or_bad_token_is_unauthorised() {
    let w = world();
    let r = w.call(ApiRequest::get("/api/assets"));
    assert_eq!(r.status, 401);
    assert_eq!(r.code(), Some("UNKNOWN_TOKEN".into()));
    let r = w.get("bogus", "/api/assets");
    assert_eq!(r.status, 401);
}

#[test]
fn routing_failures() {
    let w = world();
    let r = w.get(&w.admin_token, "/api/nothing-here");
    assert_eq!((r.status, r.code()), (404, Some("NO_ROUTE".into())));
    let r = w.call(ApiRequest::new("DELETE", "/api/assets").token(&w.admin_token));
    assert_eq!((r.status, r.code()), (405, Some("METHOD_NOT_ALLOWED".into())));
    let r = w.call(ApiRequest::new("POST", "/api/assets").text("application/json", "{not json").token(&w.admin_token));
    assert_eq!(r.status, 400);
}

#[test]
fn wrong_password_reports_login_failure() {
    let w = world();
    let r = w.call(ApiRequest::post("/api/session/login", json!({"username": "admin001", "password": "x"})));
    assert_eq!((r.status, r.code()), (401, Some("LOGIN_FAILURE".into())));
}

#[test]
fn role_choice_through_the_api() {
    let w = world();
    let (_, user) = w.person(3, None, None, &["administrator", "grad_student"]);
    let r = w.call(ApiRequest::post("/api/session/login", json!({"username": user, "password": PASSWORD})));
    let body = r.value();
    assert_eq!(body["role_choice_required"], true);
    let token = body["token"].as_str().unwrap().to_string();
    assert_eq!(w.get(&token, "/api/assets").code(), Some("ROLE_CHOICE_REQUIRED".into()));
    assert_eq!(w.get(&token, "/api/session/roles").value().as_array().unwrap().len(), 2);
    let r = w.post(&token, "/api/session/role", json!({"role_id": w.role("grad_student").0}));
    assert_eq!(r.status, 200, "{}", r.text());
    assert_eq!(w.get(&token, "/api/assets").status, 200);
}

#[test]
fn capabilities_follow_the_active_role() {
    let w = world();
    let f = w.faculty("Science");
    let d = w.department(f, "Physics");
    let (_, user) = w.person(0, Some(f), Some(d), &["undergrad_student"]);
    let token = login(&w, &user);
    let caps = w.get(&token, "/api/capabilities").value();
    let perms: BTreeSet<String> = caps["permissions"].as_array().unwrap().iter().map(|p| p.as_str().unwrap().into()).collect();
    assert_eq!(perms.len(), 13);
    let names: BTreeSet<String> = caps["routes"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap().into()).collect();
    assert!(names.contains("search.basic"));
    assert!(names.contains("floorplans.list"));
    assert!(!names.contains("assets.add"));
    assert!(!names.contains("requests.decide"));

    let admin = w.get(&w.admin_token, "/api/capabilities").value();
    let all = admin["routes"].as_array().unwrap().len();
    assert!(all > names.len());
    assert!(all <= ROUTES.len());
}

#[test]
fn forbidden_is_403_with_the_permission_named() {
    let w = world();
    let f = w.faculty("Science");
    let d = w.department(f, "Physics");
    let (_, user) = w.person(0, Some(f), Some(d), &["undergrad_student"]);
    let token = login(&w, &user);
    let r = w.post(&token, "/api/assets", json!({"name": "x", "barcode": "y"}));
    assert_eq!((r.status, r.code()), (403, Some("PERMISSION_DENIED".into())));
    assert!(r.text().contains("insertAsset"));
}

#[test]
fn crud_round_trip() {
    let w = world();
    let t = &w.admin_token;
    let f = w.post(t, "/api/faculties", json!({"name": "Engineering", "type": "faculty"}));
    assert_eq!(f.status, 201, "{}", f.text());
    let fid = f.value()["id"].as_u64().unwrap();
    let loc = w.post(t, "/api/locations", json!({"location_number": "R-1", "belongs_to": {"kind": "faculty", "id": fid}}));
    assert_eq!(loc.status, 201, "{}", loc.text());
    let lid = loc.value()["id"].as_u64().unwrap();
    let a = w.post(t, "/api/assets", json!({"name": "Chair", "barcode": "C-1", "location_id": lid}));
    assert_eq!(a.status, 201, "{}", a.text());
    let aid = a.value()["id"].as_u64().unwrap();
    let dup = w.post(t, "/api/assets", json!({"name": "Chair", "barcode": "C-1", "location_id": lid}));
    assert_eq!((dup.status, dup.code()), (409, Some("BARCODE_NOT_UNIQUE".into())));

    let edit = w.call(ApiRequest::new("PATCH", &format!("/api/assets/{aid}")).json(json!({"name": "Blue chair"})).token(t));
    assert_eq!(edit.status, 200, "{}", edit.text());
    assert_eq!(w.get(t, &format!("/api/assets/{aid}")).value()["name"], "Blue chair");

    let page = w.get(t, "/api/assets?limit=10&columns=name,barcode").value();
    assert_eq!(page["total"], 1);
    assert_eq!(page["rows"][0], json!({"id": aid, "name": "Blue chair", "barcode": "C-1"}));

    let del = w.post(t, "/api/assets/delete", json!({"ids": [aid]}));
    assert_eq!(del.status, 200, "{}", del.text());
    assert_eq!(w.get(t, &format!("/api/assets/{aid}")).value()["status"], "unavailable");
    assert_eq!(w.get(t, "/api/assets").value()["total"], 0);
    assert_eq!(w.get(t, "/api/assets?include_unavailable=true").value()["total"], 1);
}

#[test]
fn csv_upload_with_mapping_in_the_query() {
    let w = world();
    let f = w.faculty("Engineering");
    let room = w.location(&w.admin, "R-1", Some(f), None);
    let body = "Chair,C-1,red\nDesk,C-2,oak\n";
    let target = format!("/api/import/asset?map=0%3Dname%2C1%3Dbarcode&location={}", room.id);
    let r = w.call(ApiRequest::new("POST", &target).text("text/csv", body).token(&w.admin_token));
    assert_eq!(r.status, 200, "{}", r.text());
    let v = r.value();
    assert_eq!(v["inserted_ids"].as_array().unwrap().len(), 2);
    assert_eq!(v["unmapped_columns"], json!([2]));
    let seq = v["audit_sequence"].as_u64().unwrap();
    let problems = w.get(&w.admin_token, &format!("/api/import/{seq}/problems"));
    assert_eq!(problems.status, 200);
    assert!(problems.text().starts_with("row_number,reason,original_row"));

    let again = w.call(ApiRequest::new("POST", &target).text("text/csv", body).token(&w.admin_token)).value();
    assert_eq!(again["inserted_ids"], json!([]));
    assert_eq!(again["problem_rows"].as_array().unwrap().len(), 2);
}

#[test]
fn request_flow_over_the_api() {
    let w = world();
    let f = w.faculty("Science");
    let d = w.department(f, "Physics");
    let (_, student) = w.person(0, Some(f), Some(d), &["grad_student"]);
    let (_, lead) = w.person(1, Some(f), Some(d), &["administrator"]);
    let st = login(&w, &student);
    let lt = login(&w, &lead);
    let r = w.post(&st, "/api/requests/acquisition", json!({"text": "new projector"}));
    assert_eq!(r.status, 201, "{}", r.text());
    let id = r.value()["id"].as_u64().unwrap();
    assert_eq!(r.value()["state"], "pending");

    let no_reason = w.post(&lt, &format!("/api/requests/{id}/decide"), json!({"verdict": "reject"}));
    assert_eq!((no_reason.status, no_reason.code()), (400, Some("REASON_REQUIRED".into())));
    let ok = w.post(&lt, &format!("/api/requests/{id}/decide"), json!({"verdict": "approve"}));
    assert_eq!(ok.status, 200, "{}", ok.text());
    assert_eq!(w.get(&st, "/api/requests/mine").value()[0]["state"], "approved");
}

#[test]
fn audit_pages_over_the_api() {
    let w = world();
    let r = w.get(&w.admin_token, "/api/audit");
    assert_eq!(r.code(), Some("AUDIT_LOGIN_REQUIRED".into()));
    let step = w.post(&w.admin_token, "/api/audit/login", json!({"password": PASSWORD}));
    assert_eq!(step.status, 200, "{}", step.text());
    let audit_token = step.value()["audit_token"].as_str().unwrap().to_string();
    let q = ApiRequest::get("/api/audit?format=csv").token(&w.admin_token).audit_token(&audit_token);
    let r = w.call(q);
    assert_eq!(r.status, 200, "{}", r.text());
    assert!(r.content_type.starts_with("text/csv"));
    assert!(r.text().contains("session.login"));
}

#[test]
fn estimate_route() {
    let w = world();
    let r = w.post(&w.admin_token, "/api/estimate", json!({"kloc": 3.5, "eaf": 1.3241, "cost_per_pm": 4800.0}));
    assert_eq!(r.status, 200, "{}", r.text());
    let effort = r.value()["result"]["effort_pm"].as_f64().unwrap();
    assert!((effort - 15.79).abs() < 0.01, "{effort}");
}

#[test]
fn expired_session_is_refused_everywhere() {
    let w = world();
    w.clock.advance(Duration::minutes(30));
    let r = w.get(&w.admin_token, "/api/capabilities");
    assert_eq!((r.status, r.code()), (401, Some("SESSION_EXPIRED".into())));
}

#[test]
fn biometric_upload_is_base64() {
    let w = world();
    let r = w.post(&w.admin_token, "/api/session/biometric", json!({"sample": "!!!"}));
    assert_eq!(r.status, 400, "{}", r.text());
    let _: Value = r.value();
}
