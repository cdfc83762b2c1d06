//! Two hundred concurrent sessions over HTTP against a file-backed store,
//! mixed reads with about 10% writes, then a consistency sweep.
//!
//! `UUIS_LOAD_SECS` sets the duration; the default is 60 seconds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use uuis::api::TOKEN_HEADER;
use uuis::clock::SystemClock;
use uuis::config::Config;
use uuis::inventory::{NewAsset, NewDepartment, NewFaculty, NewLocation, NewPerson};
use uuis::storage::{AuditFilter, Store};
use uuis::Service;
use uuis_core::catalog::Catalog;
use uuis_core::{Asset, BelongsTo, EntityId, Request};

use crate::common::PASSWORD;
use crate::{ensure, Outcome};

const USERS: usize = 200;

#[derive(Default)]
struct Tally {
    reads: AtomicUsize,
    asset_writes: AtomicUsize,
    request_writes: AtomicUsize,
    errors: AtomicUsize,
    first_errors: Mutex<Vec<String>>,
}

impl Tally {
    fn error(&self, what: String) {
        self.errors.fetch_add(1, Ordering::Relaxed);
        let mut first = self.first_errors.lock().unwrap();
        if first.len() < 3 {
            first.push(what);
        }
    }
}

struct Setup {
    svc: Arc<Service>,
    room: EntityId,
    users: Vec<String>,
    seeded_assets: usize,
}

fn setup(path: &std::path::Path) -> uuis::Result<Setup> {
    let svc = Service::new(Store::open(path)?, Arc::new(SystemClock), Config::default());
    svc.init(&Catalog::bundled())?;
    svc.bootstrap_admin("admin001", PASSWORD)?;
    let token = svc.login("admin001", PASSWORD, None)?.token;
    let admin = svc.authenticate(&token)?;
    let f = svc.add_faculty(&admin, NewFaculty { name: "Engineering".into(), kind: "faculty".into(), building: String::new() })?.id;
    let d = svc
        .add_department(&admin, NewDepartment { faculty_id: Some(f), name: "Computing".into(), kind: "department".into(), building: String::new() })?
        .id;
    let belongs_to = Some(BelongsTo::Department { faculty_id: f, department_id: d });
    let room = svc.add_location(&admin, NewLocation { location_number: "R-1".into(), belongs_to, ..NewLocation::default() })?.id;
    for i in 0..20 {
        let a = NewAsset { name: format!("chair {i}"), barcode: format!("SEED-{i}"), location_id: Some(room), ..NewAsset::default() };
        svc.add_asset(&admin, a)?;
    }
    let role = svc.list_roles()?.into_iter().find(|r| r.name == "full_time_faculty").unwrap().id;
    let mut users = Vec::new();
    for i in 0..USERS {
        let username = format!("l{i:07}");
        let p = NewPerson {
            username: username.clone(),
            password: PASSWORD.into(),
            name: format!("Load {i}"),
            level: 1,
            faculty_id: Some(f),
            department_id: Some(d),
            role_ids: [role].into(),
            ..NewPerson::default()
        };
        svc.add_person(&admin, p)?;
        users.push(username);
    }
    Ok(Setup { svc: Arc::new(svc), room, users, seeded_assets: 20 })
}

async fn session(client: reqwest::Client, base: String, username: String, index: usize, room: EntityId, deadline: Instant, tally: Arc<Tally>) {
    let login = client.post(format!("{base}/api/session/login")).json(&json!({"username": username, "password": PASSWORD})).send().await;
    let token = match login {
        Ok(r) if r.status().is_success() => match r.json::<Value>().await {
            Ok(v) => v["token"].as_str().unwrap_or_default().to_string(),
            Err(e) => return tally.error(format!("login body: {e}")),
        },
        Ok(r) => return tally.error(format!("login: {}", r.status())),
        Err(e) => return tally.error(format!("login: {e}")),
    };
    let mut rng = StdRng::seed_from_u64(index as u64);
    let mut n = 0;
    while Instant::now() < deadline {
        n += 1;
        let write = rng.gen_bool(0.1);
        let (label, request) = if write && n % 2 == 0 {
            let body = json!({"name": "load item", "barcode": format!("L-{index}-{n}"), "location_id": room});
            ("POST /api/assets", client.post(format!("{base}/api/assets")).json(&body))
        } else if write {
            let body = json!({"text": format!("item {index}/{n}")});
            ("POST /api/requests/acquisition", client.post(format!("{base}/api/requests/acquisition")).json(&body))
        } else {
            let path = ["/api/assets?limit=20", "/api/search?q=chair", "/api/capabilities", "/api/requests/mine", "/api/locations"]
                [rng.gen_range(0..5)];
            (path, client.get(format!("{base}{path}")))
        };
        match request.header(TOKEN_HEADER, &token).send().await {
            Ok(r) if r.status().is_success() => {
                let counter = match label {
                    "POST /api/assets" => &tally.asset_writes,
                    "POST /api/requests/acquisition" => &tally.request_writes,
                    _ => &tally.reads,
                };
                counter.fetch_add(1, Ordering::Relaxed);
            }
            Ok(r) => {
                let status = r.status();
                let text = r.text().await.unwrap_or_default();
                tally.error(format!("{label}: {status} {text}"));
            }
            Err(e) => tally.error(format!("{label}: {e}")),
        }
    }
}

pub fn criterion() -> Outcome {
    let secs: u64 = std::env::var("UUIS_LOAD_SECS").ok().and_then(|s| s.parse().ok()).unwrap_or(60);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = setup(&dir.path().join("uuis.db")).map_err(|e| format!("setup: {e}"))?;
    let tally = Arc::new(Tally::default());

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let (tx, rx) = tokio::sync::oneshot::channel();
        let svc = s.svc.clone();
        tokio::spawn(async move {
            let _ = uuis::http::serve(svc, "127.0.0.1:0".parse().unwrap(), |addr| {
                let _ = tx.send(addr);
            })
            .await;
        });
        let addr = rx.await.map_err(|e| e.to_string())?;
        let base = format!("http://{addr}");
        let client = reqwest::Client::builder().pool_max_idle_per_host(USERS).build().map_err(|e| e.to_string())?;
        let deadline = Instant::now() + Duration::from_secs(secs);
        let tasks: Vec<_> = s
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| tokio::spawn(session(client.clone(), base.clone(), u.clone(), i, s.room, deadline, tally.clone())))
            .collect();
        for t in tasks {
            t.await.map_err(|e| e.to_string())?;
        }
        Ok::<(), String>(())
    })?;
    runtime.shutdown_timeout(Duration::from_secs(5));

    let reads = tally.reads.load(Ordering::Relaxed);
    let asset_writes = tally.asset_writes.load(Ordering::Relaxed);
    let request_writes = tally.request_writes.load(Ordering::Relaxed);
    let errors = tally.errors.load(Ordering::Relaxed);
    ensure!(errors == 0, "{errors} errors, first: {:?}", tally.first_errors.lock().unwrap());

    let writes = asset_writes + request_writes;
    let share = writes as f64 / (reads + writes) as f64;
    ensure!((0.07..0.13).contains(&share), "write share {share:.3}");

    let report = s.svc.integrity_sweep().map_err(|e| e.to_string())?;
    ensure!(report.is_clean(), "integrity sweep: {:?}", report.violations.iter().take(3).collect::<Vec<_>>());
    let (assets, requests, audit) = s
        .svc
        .store()
        .read(|r| Ok((r.scan::<Asset>()?.len(), r.scan::<Request>()?.len(), r.audit_records(&AuditFilter::default())?)))
        .map_err(|e| e.to_string())?;
    ensure!(assets == s.seeded_assets + asset_writes, "{assets} assets stored, {} expected", s.seeded_assets + asset_writes);
    ensure!(requests == request_writes, "{requests} requests stored, {request_writes} acknowledged");
    let logged = |action: &str| audit.iter().filter(|r| r.action == action).count();
    ensure!(logged("asset.add") == assets, "{} asset.add records for {assets} assets", logged("asset.add"));
    ensure!(logged("request.submit") == requests, "{} request.submit records for {requests} requests", logged("request.submit"));
    ensure!(logged("session.login") >= USERS, "{} logins audited", logged("session.login"));

    Ok(format!(
        "{USERS} sessions for {secs}s: {reads} reads, {writes} writes ({:.1}%), 0 errors, sweep clean over {} records",
        share * 100.0,
        report.records_checked
    ))
}
