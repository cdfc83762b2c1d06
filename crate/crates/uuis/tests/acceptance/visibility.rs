//! Randomised organisation trees: what each level sees through the API
//! grows with the level and never leaves the scope a direct rule allows.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;
use uuis::inventory::{NewAsset, NewLicense, NewLocation, NewPerson};
use uuis_core::{Asset, BelongsTo, EntityId, License, Location, OrgRef, Person};

use crate::common::{world, World, PASSWORD};
use crate::{ensure, Outcome};

const KINDS: [&str; 4] = ["assets", "licenses", "locations", "persons"];

type Seen = BTreeSet<(&'static str, u64)>;

struct Viewer {
    level: u8,
    faculty: Option<EntityId>,
    department: Option<EntityId>,
    token: String,
}

/// Scope rule stated directly: university sees all, faculty its faculty,
/// department and user level their department.
fn allowed(v: &Viewer, org: OrgRef) -> bool {
    match v.level {
        3 => true,
        2 => org.faculty_id.is_some() && org.faculty_id == v.faculty,
        _ => org.faculty_id.is_some() && org.faculty_id == v.faculty && org.department_id == v.department,
    }
}

fn everything(w: &World) -> Vec<(&'static str, u64, OrgRef)> {
    w.svc
        .store()
        .read(|r| {
            let mut out = Vec::new();
            out.extend(r.scan::<Asset>()?.iter().map(|a| ("assets", a.id.0, a.org())));
            out.extend(r.scan::<License>()?.iter().map(|l| ("licenses", l.id.0, l.org())));
            out.extend(r.scan::<Location>()?.iter().map(|l| ("locations", l.id.0, l.org())));
            out.extend(r.scan::<Person>()?.iter().map(|p| ("persons", p.id.0, p.org())));
            Ok(out)
        })
        .unwrap()
}

type Tree = Vec<(EntityId, Vec<EntityId>)>;

fn build(w: &World, rng: &mut StdRng) -> Tree {
    let mut tree = Vec::new();
    for fi in 0..rng.gen_range(1..=3) {
        let f = w.faculty(&format!("Faculty {fi}"));
        let deps: Vec<EntityId> = (0..rng.gen_range(1..=3)).map(|di| w.department(f, &format!("Department {fi}.{di}"))).collect();
        tree.push((f, deps));
    }
    let n = rng.gen_range(20..=50);
    for i in 0..n {
        let (f, deps) = tree.choose(rng).unwrap();
        let d = if rng.gen_bool(0.6) { deps.choose(rng).copied() } else { None };
        match rng.gen_range(0..4) {
            0 => {
                let a = NewAsset { name: format!("vis asset {i}"), barcode: format!("V-{i}"), faculty_id: Some(*f), department_id: d, ..NewAsset::default() };
                w.svc.add_asset(&w.admin, a).unwrap();
            }
            1 => {
                let l = NewLicense { name: format!("vis license {i}"), seats: 1, faculty_id: Some(*f), department_id: d, ..NewLicense::default() };
                w.svc.add_license(&w.admin, l).unwrap();
            }
            2 => {
                let belongs_to = match (rng.gen_range(0..3), d) {
                    (0, _) => BelongsTo::University,
                    (1, _) | (_, None) => BelongsTo::Faculty(*f),
                    (_, Some(d)) => BelongsTo::Department { faculty_id: *f, department_id: d },
                };
                let l = NewLocation { location_number: format!("vis room {i}"), belongs_to: Some(belongs_to), ..NewLocation::default() };
                w.svc.add_location(&w.admin, l).unwrap();
            }
            _ => {
                let (level, faculty, department) = match d {
                    Some(d) => (rng.gen_range(0..=1), Some(*f), Some(d)),
                    None if rng.gen_bool(0.8) => (2, Some(*f), None),
                    None => (3, None, None),
                };
                let p = NewPerson {
                    username: format!("v{i:07}"),
                    password: PASSWORD.into(),
                    name: format!("vis person {i}"),
                    level,
                    faculty_id: faculty,
                    department_id: department,
                    role_ids: [w.role("undergrad_student")].into(),
                    ..NewPerson::default()
                };
                w.svc.add_person(&w.admin, p).unwrap();
            }
        }
    }
    tree
}

fn listed(w: &World, v: &Viewer) -> Result<Seen, String> {
    let mut out = Seen::new();
    for kind in KINDS {
        let r = w.get(&v.token, &format!("/api/{kind}?limit=1000"));
        ensure!(r.status == 200, "GET /api/{kind} as level {}: {}", v.level, r.text());
        let page = r.value();
        ensure!(page["total"].as_u64() == Some(page["rows"].as_array().unwrap().len() as u64), "page of {kind} truncated");
        out.extend(page["rows"].as_array().unwrap().iter().map(|row| (kind, row["id"].as_u64().unwrap())));
    }
    Ok(out)
}

fn searched(w: &World, v: &Viewer) -> Result<Seen, String> {
    let mut out = Seen::new();
    let basic = w.get(&v.token, "/api/search?q=vis");
    let advanced = w.post(&v.token, "/api/search/advanced", json!({"query": "vis AND NOT zzz"}));
    for r in [basic, advanced] {
        if r.code().as_deref() == Some("SEARCH_NOT_FOUND") {
            continue;
        }
        ensure!(r.status == 200, "search as level {}: {}", v.level, r.text());
        for (category, rows) in r.value()["groups"].as_object().unwrap() {
            let kind = KINDS.into_iter().find(|k| k == category).unwrap();
            out.extend(rows.as_array().unwrap().iter().map(|row| (kind, row["id"].as_u64().unwrap())));
        }
    }
    Ok(out)
}

fn trial(seed: u64) -> Result<(usize, [usize; 4]), String> {
    let w = world();
    let mut rng = StdRng::seed_from_u64(seed);
    let tree = build(&w, &mut rng);
    let (f, deps) = tree.choose(&mut rng).unwrap().clone();
    let d = *deps.choose(&mut rng).unwrap();

    let mut viewers = Vec::new();
    for level in 0..=3u8 {
        let (faculty, department) = match level {
            0 | 1 => (Some(f), Some(d)),
            2 => (Some(f), None),
            _ => (None, None),
        };
        let (_, username) = w.person(level, faculty, department, &["administrator"]);
        let (token, _) = w.login(&username);
        viewers.push(Viewer { level, faculty, department, token });
    }

    let all = everything(&w);
    let mut sizes = [0; 4];
    let mut previous: Option<Seen> = None;
    for v in &viewers {
        let oracle: Seen = all.iter().filter(|(_, _, org)| allowed(v, *org)).map(|(k, id, _)| (*k, *id)).collect();
        let seen = listed(&w, v)?;
        if let Some(leak) = seen.difference(&oracle).next() {
            return Err(format!("level {} list shows out-of-scope {leak:?}", v.level));
        }
        ensure!(seen == oracle, "level {} list misses {:?}", v.level, oracle.difference(&seen).next());
        let found = searched(&w, v)?;
        if let Some(leak) = found.difference(&oracle).next() {
            return Err(format!("level {} search shows out-of-scope {leak:?}", v.level));
        }
        for (kind, id, _) in &all {
            let r = w.get(&v.token, &format!("/api/{kind}/{id}"));
            let visible = oracle.contains(&(*kind, *id));
            ensure!((r.status == 200) == visible, "level {} GET /api/{kind}/{id} gave {} (in scope: {visible})", v.level, r.status);
        }
        if let Some(p) = &previous {
            ensure!(p.is_subset(&seen), "level {} sees less than level {}", v.level, v.level - 1);
        }
        sizes[v.level as usize] = seen.len();
        previous = Some(seen);
    }
    Ok((all.len(), sizes))
}

pub fn criterion() -> Outcome {
    let mut summary = Vec::new();
    for seed in 0..6 {
        let (n, sizes) = trial(0x5eed_0300 + seed)?;
        summary.push(format!("{n}:{sizes:?}"));
    }
    Ok(format!("6 trees, records:[S0,S1,S2,S3] = {}", summary.join(" ")))
}
