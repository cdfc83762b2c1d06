//! Random CRUD sequences on assets: soft delete keeps records, barcodes stay
//! unique, and every observed status change is an edge of the status graph.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::json;
use uuis::assignments::{AssetSelection, AssetTarget};
use uuis::inventory::NewAsset;
use uuis::Error;
use uuis_core::{EntityId, EntityKind};

use crate::common::{world, World};
use crate::Outcome;

#[derive(Debug, Clone)]
enum Op {
    Add(u8),
    EditBarcode(usize, u8),
    EditStatus(usize, &'static str),
    Delete(usize),
    Borrow(usize),
    Assign(usize),
}

fn op() -> impl Strategy<Value = Op> {
    let status = prop::sample::select(vec!["available", "assigned", "borrowed", "unavailable"]);
    prop_oneof![
        3 => (0u8..8).prop_map(Op::Add),
        2 => (any::<usize>(), 0u8..8).prop_map(|(i, b)| Op::EditBarcode(i, b)),
        2 => (any::<usize>(), status).prop_map(|(i, s)| Op::EditStatus(i, s)),
        2 => any::<usize>().prop_map(Op::Delete),
        1 => any::<usize>().prop_map(Op::Borrow),
        1 => any::<usize>().prop_map(Op::Assign),
    ]
}

/// Status graph written out independently of the service.
fn edge(from: &str, to: &str) -> bool {
    from == to
        || matches!(
            (from, to),
            ("available", "assigned" | "borrowed" | "unavailable")
                | ("assigned", "available" | "unavailable")
                | ("borrowed", "available" | "unavailable")
                | ("unavailable", "available")
        )
}

fn status(w: &World, id: EntityId) -> Result<String, TestCaseError> {
    let v = w.svc.get_entity(&w.admin, EntityKind::Asset, id).map_err(|e| TestCaseError::fail(format!("asset {id} lost: {e}")))?;
    Ok(v["status"].as_str().unwrap_or_default().to_string())
}

fn barcode(b: u8) -> String {
    format!("P-{b}")
}

fn run_sequence(ops: Vec<Op>) -> Result<(), TestCaseError> {
    let w = world();
    let f = w.faculty("Engineering");
    let room = w.location(&w.admin, "R-1", Some(f), None);
    // id -> (barcode, deleted and not restored)
    let mut model: BTreeMap<EntityId, (String, bool)> = BTreeMap::new();
    let mut ids: Vec<EntityId> = Vec::new();
    let taken = |model: &BTreeMap<EntityId, (String, bool)>, code: &str, except: Option<EntityId>| {
        model.iter().any(|(id, (b, _))| b == code && Some(*id) != except)
    };

    for op in ops {
        let target = |i: usize| (!ids.is_empty()).then(|| ids[i % ids.len()]);
        let before: BTreeMap<EntityId, String> = ids.iter().map(|id| Ok((*id, status(&w, *id)?))).collect::<Result<_, TestCaseError>>()?;
        match op.clone() {
            Op::Add(b) => {
                let a = NewAsset { name: "stool".into(), barcode: barcode(b), location_id: Some(room.id), ..NewAsset::default() };
                let result = w.svc.add_asset(&w.admin, a);
                if taken(&model, &barcode(b), None) {
                    prop_assert_eq!(result.err(), Some(Error::DuplicateBarcode));
                } else {
                    let a = result.map_err(|e| TestCaseError::fail(format!("add {}: {e}", barcode(b))))?;
                    model.insert(a.id, (barcode(b), false));
                    ids.push(a.id);
                }
            }
            Op::EditBarcode(i, b) => {
                let Some(id) = target(i) else { continue };
                let changes = json!({ "barcode": barcode(b) });
                let result = w.svc.edit_entity(&w.admin, EntityKind::Asset, id, changes.as_object().unwrap());
                if taken(&model, &barcode(b), Some(id)) {
                    prop_assert!(result.is_err(), "edit to duplicate {} accepted", barcode(b));
                    prop_assert_eq!(result.err().map(|e| e.code()), Some("BARCODE_NOT_UNIQUE"));
                } else if result.is_ok() {
                    model.get_mut(&id).unwrap().0 = barcode(b);
                }
            }
            Op::EditStatus(i, s) => {
                let Some(id) = target(i) else { continue };
                let changes = json!({ "status": s });
                if w.svc.edit_entity(&w.admin, EntityKind::Asset, id, changes.as_object().unwrap()).is_ok() && s != "unavailable" {
                    model.get_mut(&id).unwrap().1 = false;
                }
            }
            Op::Delete(i) => {
                let Some(id) = target(i) else { continue };
                let out = w.svc.delete_entities(&w.admin, EntityKind::Asset, &[id]).map_err(|e| TestCaseError::fail(e.to_string()))?;
                if out[0].ok {
                    model.get_mut(&id).unwrap().1 = true;
                }
            }
            Op::Borrow(i) => {
                let Some(id) = target(i) else { continue };
                let _ = w.svc.borrow(&w.admin, EntityKind::Asset, &[id], Some(w.admin.id()));
            }
            Op::Assign(i) => {
                let Some(id) = target(i) else { continue };
                let sel = AssetSelection { ids: vec![id], ..AssetSelection::default() };
                let _ = w.svc.assign_assets(&w.admin, Some(AssetTarget::Person(w.admin.id())), &sel);
            }
        }
        for id in &ids {
            let now = status(&w, *id)?;
            if let Some(was) = before.get(id) {
                prop_assert!(edge(was, &now), "{:?} moved asset {} from {} to {}", op, id, was, now);
            }
            if model[id].1 {
                prop_assert_eq!(now.as_str(), "unavailable", "deleted asset {} after {:?}", id, op);
            }
        }
    }
    let stored: Vec<String> = w.svc.store().read(|r| r.scan::<uuis_core::Asset>()).unwrap().into_iter().map(|a| a.barcode).collect();
    let unique: std::collections::BTreeSet<&String> = stored.iter().collect();
    prop_assert_eq!(unique.len(), stored.len(), "duplicate barcodes stored: {:?}", stored);
    prop_assert_eq!(stored.len(), ids.len());
    Ok(())
}

pub fn criterion() -> Outcome {
    let cases = 48;
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&prop::collection::vec(op(), 1..40), run_sequence).map_err(|e| e.to_string())?;
    Ok(format!("{cases} random sequences of up to 39 operations"))
}
