//! Fifty-row CSV with five seeded duplicates and one unmapped column,
//! imported twice.

use uuis::importer::{ColumnMapping, Format, ImportRequest};

use crate::common::world;
use crate::{ensure, Outcome};

fn parse(file: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file.as_bytes());
    let header = r.headers().map_err(|e| format!("problem file header: {e}"))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| format!("problem file row: {e}"))?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

pub fn criterion() -> Outcome {
    let w = world();
    let f = w.faculty("Engineering");
    let room = w.location(&w.admin, "R-1", Some(f), None);
    let duplicates = [3, 11, 24, 37, 49];
    for i in duplicates {
        w.asset(&w.admin, "existing", &format!("IMP-{i:03}"), room.id);
    }
    let text: String = (0..50).map(|i| format!("\"Chair, model {i}\",IMP-{i:03},note {i}\n")).collect();
    let request = || ImportRequest {
        mapping: ColumnMapping::new(uuis_core::TypeKind::Asset, &[(0, "name"), (1, "barcode")]).with_location(room.id),
        format: Format::Csv,
        delimiter: None,
        text: text.clone(),
    };

    let first = w.svc.import(&w.admin, &request()).map_err(|e| e.to_string())?;
    ensure!(first.inserted_ids.len() == 45, "first import inserted {}", first.inserted_ids.len());
    ensure!(first.problem_rows.len() == 5, "first import has {} problem rows", first.problem_rows.len());
    ensure!(first.unmapped_columns == vec![2], "unmapped columns {:?}", first.unmapped_columns);
    let flagged: Vec<usize> = first.problem_rows.iter().map(|p| p.row_number).collect();
    ensure!(flagged == duplicates.iter().map(|i| i + 1).collect::<Vec<_>>(), "problem rows {flagged:?}");
    let (header, rows) = parse(&first.problem_file)?;
    ensure!(header == ["row_number", "reason", "original_row"], "header {header:?}");
    ensure!(rows.len() == 6, "problem file has {} rows", rows.len());
    ensure!(rows[0][1].contains("unmapped") && rows[0][1].contains('2'), "no unmapped-column notice: {:?}", rows[0]);
    ensure!(rows[1][2] == "\"Chair, model 3\",IMP-003,note 3", "original row not preserved: {:?}", rows[1][2]);

    let second = w.svc.import(&w.admin, &request()).map_err(|e| e.to_string())?;
    ensure!(second.inserted_ids.is_empty(), "re-import inserted {}", second.inserted_ids.len());
    ensure!(second.problem_rows.len() == 50, "re-import has {} problem rows", second.problem_rows.len());
    let (_, rows) = parse(&second.problem_file)?;
    ensure!(rows.len() == 51, "re-import problem file has {} rows", rows.len());
    ensure!(rows.iter().all(|r| r.len() == 3), "ragged problem file");
    Ok("45 inserted + 5 problems + notice; re-import 0 + 50; problem files parse".into())
}
