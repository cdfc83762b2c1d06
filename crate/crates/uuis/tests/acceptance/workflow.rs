//! Randomised requests across levels 0 to 3 with random deciders.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use uuis::requests::{Decision, NewRequest};
use uuis::{Actor, Error};
use uuis_core::{EntityKind, EntityRef, RequestState};

use crate::common::{world, World};
use crate::{ensure, Outcome};

struct Member {
    actor: Actor,
    level: u8,
}

fn staff(w: &World) -> Vec<Member> {
    let mut out = Vec::new();
    let mut add = |level: u8, f, d| {
        let (_, username) = w.person(level, f, d, &["administrator"]);
        out.push(Member { actor: w.login(&username).1, level });
    };
    for fname in ["Science", "Arts"] {
        let f = w.faculty(fname);
        for dname in ["North", "South"] {
            let d = w.department(f, &format!("{fname} {dname}"));
            add(0, Some(f), Some(d));
            add(1, Some(f), Some(d));
        }
        add(2, Some(f), None);
    }
    add(3, None, None);
    add(3, None, None);
    out
}

fn notices_to(w: &World, requester: &Actor, request: EntityRef) -> usize {
    w.svc
        .outbox_list(&w.admin, None)
        .unwrap()
        .into_iter()
        .filter(|m| m.reference == Some(request) && m.recipient_id == requester.id())
        .count()
}

pub fn criterion() -> Outcome {
    let started = Instant::now();
    let w = world();
    let people = staff(&w);
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let kinds = ["acquisition", "reparation", "elimination"];
    let (mut created_approved, mut refused, mut rejections, mut approvals) = (0, 0, 0, 0);

    for n in 0..100 {
        let requester = people.choose(&mut rng).unwrap();
        let input = NewRequest { kind: Some(kinds[n % 3].into()), text: format!("item {n}"), ..NewRequest::default() };
        let r = w.svc.submit_request(&requester.actor, &input).map_err(|e| format!("submit {n}: {e}"))?;
        let reference = EntityRef::new(EntityKind::Request, r.id);
        if requester.level == 3 {
            ensure!(r.state == RequestState::Approved, "level-3 request {n} created as {:?}", r.state);
            created_approved += 1;
            continue;
        }
        ensure!(r.state == RequestState::Pending, "request {n} from level {} created as {:?}", requester.level, r.state);

        // a few random attempts, then one by someone entitled to decide
        let mut decided = false;
        for attempt in 0..4 {
            let decider = if attempt < 3 {
                people.choose(&mut rng).unwrap()
            } else {
                people.iter().find(|m| m.level == 3).unwrap()
            };
            let decision = match rng.gen_range(0..3) {
                0 => Decision::Approve,
                1 => Decision::Reject { reason: "not needed this year".into() },
                _ => Decision::Reject { reason: ["", "  "][rng.gen_range(0..2)].into() },
            };
            let result = w.svc.decide(&decider.actor, r.id, &decision);
            if decider.level <= requester.level {
                ensure!(result.is_err(), "level {} decided a level {} request", decider.level, requester.level);
                refused += 1;
                continue;
            }
            match (&decision, result) {
                (Decision::Reject { reason }, Err(Error::ReasonRequired)) if reason.trim().is_empty() => {}
                (Decision::Reject { reason }, Ok(done)) => {
                    ensure!(!reason.trim().is_empty(), "rejection without a reason accepted");
                    ensure!(done.state == RequestState::Rejected, "request {n} is {:?} after rejection", done.state);
                    let text = done.rejection_reason.unwrap_or_default();
                    ensure!(!text.trim().is_empty(), "stored rejection of {n} has no reason");
                    let sent = notices_to(&w, &requester.actor, reference);
                    ensure!(sent == 1, "rejection of {n} sent {sent} messages");
                    rejections += 1;
                    decided = true;
                }
                (Decision::Approve, Ok(done)) => {
                    ensure!(done.state == RequestState::Approved, "request {n} is {:?} after approval", done.state);
                    approvals += 1;
                    decided = true;
                }
                (_, Err(Error::OutOfScope)) => {}
                (d, other) => return Err(format!("request {n}: {d:?} by level {} gave {other:?}", decider.level)),
            }
            if decided {
                let again = w.svc.decide(&decider.actor, r.id, &Decision::Approve);
                ensure!(again == Err(Error::AlreadyDecided), "second decision on {n} gave {again:?}");
                break;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{created_approved} auto-approved, {approvals} approved, {rejections} rejected, {refused} refused by level, {:.2}s",
        elapsed.as_secs_f64()
    ))
}
