//! Service search against a linear scan over the stored records.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use uuis::inventory::NewAsset;
use uuis::search::{AdvancedQuery, SearchResults};
use uuis::Error;
use uuis_core::search::{parse_query, Category, SearchRestriction, Searchable};
use uuis_core::{Asset, License, Location, Person, Status};

use crate::common::{world, World};
use crate::{ensure, Outcome};

const WORDS: [&str; 10] = ["oak", "pine", "chair", "desk", "lamp", "red", "blue", "steel", "glass", "dell"];

type Hits = BTreeSet<(Category, u64)>;

#[derive(Debug, Clone)]
enum Expr {
    Term(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

fn term(rng: &mut StdRng) -> String {
    let w = *WORDS.choose(rng).unwrap();
    match rng.gen_range(0..4) {
        0 => w.to_uppercase(),
        1 => w[..rng.gen_range(2..=w.len())].to_string(),
        _ => w.to_string(),
    }
}

fn expr(rng: &mut StdRng, depth: usize) -> Expr {
    if depth == 1 || rng.gen_bool(0.25) {
        return Expr::Term(term(rng));
    }
    match rng.gen_range(0..3) {
        0 => Expr::Not(Box::new(expr(rng, depth - 1))),
        1 => Expr::And(Box::new(expr(rng, depth - 1)), Box::new(expr(rng, depth - 1))),
        _ => Expr::Or(Box::new(expr(rng, depth - 1)), Box::new(expr(rng, depth - 1))),
    }
}

fn render(e: &Expr) -> String {
    match e {
        Expr::Term(t) => t.clone(),
        Expr::Not(x) => format!("NOT ({})", render(x)),
        Expr::And(l, r) => format!("({} AND {})", render(l), render(r)),
        Expr::Or(l, r) => format!("({} OR {})", render(l), render(r)),
    }
}

/// One stored record reduced to its category, id and lower-cased field values.
struct Row {
    category: Category,
    id: u64,
    values: Vec<String>,
}

fn row<R: Searchable>(r: &R, id: u64) -> Row {
    Row { category: r.category(), id, values: r.search_fields().into_iter().map(|(_, v)| v.to_lowercase()).collect() }
}

fn scan(w: &World) -> Vec<Row> {
    w.svc
        .store()
        .read(|r| {
            let mut out = Vec::new();
            out.extend(r.scan::<Asset>()?.iter().filter(|a| a.status != Status::Unavailable).map(|a| row(a, a.id.0)));
            out.extend(r.scan::<License>()?.iter().filter(|l| l.status != Status::Unavailable).map(|l| row(l, l.id.0)));
            out.extend(r.scan::<Location>()?.iter().filter(|l| l.status != Status::Unavailable).map(|l| row(l, l.id.0)));
            out.extend(r.scan::<Person>()?.iter().filter(|p| p.status != Status::Unavailable).map(|p| row(p, p.id.0)));
            Ok(out)
        })
        .unwrap()
}

fn matches(row: &Row, e: &Expr) -> bool {
    match e {
        Expr::Term(t) => {
            let needle = t.trim().to_lowercase();
            row.values.iter().any(|v| v.contains(&needle))
        }
        Expr::Not(x) => !matches(row, x),
        Expr::And(l, r) => matches(row, l) && matches(row, r),
        Expr::Or(l, r) => matches(row, l) || matches(row, r),
    }
}

fn brute(rows: &[Row], e: &Expr) -> Hits {
    rows.iter().filter(|r| matches(r, e)).map(|r| (r.category, r.id)).collect()
}

fn hits(result: Result<SearchResults, Error>) -> Result<Hits, String> {
    match result {
        Ok(r) => Ok(r
            .groups
            .iter()
            .flat_map(|(c, rows)| rows.iter().map(move |v| (*c, v["id"].as_u64().unwrap())))
            .collect()),
        Err(Error::NoMatches) => Ok(Hits::new()),
        Err(e) => Err(e.to_string()),
    }
}

fn seed(w: &World, rng: &mut StdRng) {
    let f = w.faculty("Engineering");
    let room = w.location(&w.admin, "R-1", Some(f), None);
    for i in 0..200 {
        let words: Vec<&str> = (0..rng.gen_range(1..=3)).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let a = NewAsset {
            name: words.join(" "),
            barcode: format!("BC-{i:04}"),
            color: rng.gen_bool(0.5).then(|| WORDS.choose(rng).unwrap().to_uppercase()),
            description: if rng.gen_bool(0.3) { WORDS.choose(rng).unwrap().to_string() } else { String::new() },
            location_id: Some(room.id),
            ..NewAsset::default()
        };
        w.svc.add_asset(&w.admin, a).unwrap();
    }
}

fn advanced(w: &World, e: &Expr) -> Result<Hits, String> {
    let text = render(e);
    let depth = parse_query(&text).map_err(|err| format!("`{text}` does not parse: {err}"))?.depth();
    ensure!(depth <= 4, "`{text}` has depth {depth}");
    let q = AdvancedQuery { query: text, restriction: SearchRestriction::everything() };
    hits(w.svc.advanced_search(&w.admin, &q))
}

pub fn criterion() -> Outcome {
    let started = Instant::now();
    let w = world();
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    seed(&w, &mut rng);
    let rows = scan(&w);

    for _ in 0..100 {
        let e = expr(&mut rng, 4);
        let got = advanced(&w, &e)?;
        let want = brute(&rows, &e);
        ensure!(got == want, "`{}`: engine {} hits, scan {}", render(&e), got.len(), want.len());
    }
    for _ in 0..100 {
        let q = match rng.gen_range(0..3) {
            0 => format!("{} {}", WORDS.choose(&mut rng).unwrap(), WORDS.choose(&mut rng).unwrap()),
            _ => term(&mut rng),
        };
        let got = hits(w.svc.basic_search(&w.admin, &q))?;
        let want = brute(&rows, &Expr::Term(q.clone()));
        ensure!(got == want, "basic `{q}`: engine {} hits, scan {}", got.len(), want.len());
    }
    for _ in 0..50 {
        let (a, b) = (expr(&mut rng, 2), expr(&mut rng, 2));
        let lhs = Expr::Not(Box::new(Expr::And(Box::new(a.clone()), Box::new(b.clone()))));
        let rhs = Expr::Or(Box::new(Expr::Not(Box::new(a))), Box::new(Expr::Not(Box::new(b))));
        let (l, r) = (advanced(&w, &lhs)?, advanced(&w, &rhs)?);
        ensure!(l == r, "`{}` and `{}` differ", render(&lhs), render(&rhs));
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{} records, 100 boolean + 100 basic queries, 50 De Morgan pairs, {:.2}s", rows.len(), elapsed.as_secs_f64()))
}
