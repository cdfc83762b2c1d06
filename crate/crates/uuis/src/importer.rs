//! Bulk import from CSV or delimited text with a manual column mapping.
//! Rows that cannot be stored go to a problem file that can be fixed and
//! imported again.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uuis_core::catalog::perm;
use uuis_core::{EntityId, EntityRef, EntityType, Money, TypeKind};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::inventory::{build, resolve_type, NewAsset, NewLicense, NewLocation, NewPerson};
use crate::service::{Actor, Service};
use crate::storage::{Record, Txn};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Txt,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "txt" | "text" => Some(Format::Txt),
            _ => None,
        }
    }
}

pub const PROBLEM_HEADER: [&str; 3] = ["row_number", "reason", "original_row"];

/// Splits raw text into rows of fields. CSV follows the usual quoting rules;
/// TXT splits each line on `delimiter` (tab when `None`).
pub fn parse_rows(raw: &str, format: Format, delimiter: Option<char>) -> Result<Vec<Vec<String>>> {
    let text = raw.strip_prefix('\u{feff}').unwrap_or(raw);
    match format {
        Format::Csv => {
            // the csv reader silently closes an unterminated quote at end of input
            if text.matches('"').count() % 2 == 1 {
                return Err(Error::MalformedFormat("unbalanced quote".into()));
            }
            let delim = delimiter.unwrap_or(',');
            if !delim.is_ascii() {
                return Err(Error::MalformedFormat(format!("delimiter {delim:?} is not ASCII")));
            }
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .delimiter(delim as u8)
                .from_reader(text.as_bytes());
            let mut rows = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| Error::MalformedFormat(e.to_string()))?;
                rows.push(record.iter().map(str::to_string).collect());
            }
            Ok(rows)
        }
        Format::Txt => {
            let delim = delimiter.unwrap_or('\t');
            Ok(text
                .lines()
                .map(|l| l.trim_end_matches('\r'))
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split(delim).map(|f| f.trim().to_string()).collect())
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub column: usize,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub target_kind: TypeKind,
    pub entries: Vec<MappingEntry>,
    #[serde(default)]
    pub default_location_id: Option<EntityId>,
    #[serde(default)]
    pub type_id: Option<EntityId>,
    #[serde(default)]
    pub faculty_id: Option<EntityId>,
    #[serde(default)]
    pub department_id: Option<EntityId>,
}

impl ColumnMapping {
    pub fn new(target_kind: TypeKind, entries: &[(usize, &str)]) -> ColumnMapping {
        ColumnMapping {
            target_kind,
            entries: entries.iter().map(|(c, f)| MappingEntry { column: *c, field: f.to_string() }).collect(),
            default_location_id: None,
            type_id: None,
            faculty_id: None,
            department_id: None,
        }
    }

    pub fn with_location(mut self, location: EntityId) -> ColumnMapping {
        self.default_location_id = Some(location);
        self
    }
}

/// Fields an import may fill directly, per kind.
pub fn field_universe(kind: TypeKind) -> &'static [&'static str] {
    match kind {
        TypeKind::Asset => &[
            "name", "serial_number", "barcode", "purchase_number", "request_number", "color", "material",
            "host_name", "brand", "version", "description",
        ],
        TypeKind::License => &["name", "purchase_number", "request_number", "seats", "price", "term", "company"],
        TypeKind::Location => &["location_number", "capacity", "description", "key_number", "code_number"],
        TypeKind::Person => &["username", "password", "name", "title", "contact", "level", "high_privileged"],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProblemRow {
    pub row_number: usize,
    pub original_row: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportResult {
    pub inserted_ids: Vec<EntityId>,
    pub problem_rows: Vec<ProblemRow>,
    pub unmapped_columns: Vec<usize>,
    /// CSV with columns `row_number,reason,original_row`.
    pub problem_file: String,
    pub audit_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRequest {
    pub mapping: ColumnMapping,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub delimiter: Option<char>,
    pub text: String,
}

fn import_permission(kind: TypeKind) -> &'static str {
    match kind {
        TypeKind::Asset => perm::IMPORT_ASSET,
        TypeKind::License => perm::IMPORT_LICENSE,
        TypeKind::Location => perm::IMPORT_LOCATION,
        TypeKind::Person => perm::IMPORT_PERSON,
    }
}

fn render_row(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let line = w
        .write_record(fields)
        .ok()
        .and_then(|_| w.into_inner().ok())
        .and_then(|b| String::from_utf8(b).ok())
        .unwrap_or_else(|| fields.join(","));
    line.trim_end_matches(['\r', '\n']).to_string()
}

pub fn render_problem_file(unmapped: &[usize], problems: &[ProblemRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Storage(e.to_string());
    w.write_record(PROBLEM_HEADER).map_err(io)?;
    if !unmapped.is_empty() {
        let cols: Vec<String> = unmapped.iter().map(|c| c.to_string()).collect();
        w.write_record(["-", &format!("unmapped source columns: {}", cols.join(" ")), ""]).map_err(io)?;
    }
    for p in problems {
        w.write_record([p.row_number.to_string(), p.reason.clone(), p.original_row.clone()]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Storage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Storage(e.to_string()))
}

fn reason(error: &Error) -> String {
    match error {
        Error::DuplicateBarcode => "duplicate barcode".into(),
        Error::MalformedUsername => "bad username".into(),
        Error::DuplicateName(field) => format!("duplicate {field}"),
        Error::MissingField(field) => format!("missing {field}"),
        other => other.to_string(),
    }
}

/// Converts mapped strings into the typed JSON the input structs expect.
fn typed(kind: TypeKind, field: &str, raw: &str) -> std::result::Result<Value, String> {
    let bad = || format!("invalid {field}");
    Ok(match (kind, field) {
        (TypeKind::License, "seats") | (TypeKind::Location, "capacity") | (TypeKind::Person, "level") => {
            if raw.is_empty() && field == "capacity" {
                Value::Null
            } else {
                Value::from(raw.parse::<u32>().map_err(|_| bad())?)
            }
        }
        (TypeKind::License, "price") => Value::from(parse_money(raw).ok_or_else(bad)?.0),
        (TypeKind::Person, "high_privileged") => match raw.to_ascii_lowercase().as_str() {
            "" | "0" | "false" | "no" => Value::Bool(false),
            "1" | "true" | "yes" => Value::Bool(true),
            _ => return Err(bad()),
        },
        (TypeKind::Asset, "color" | "material" | "host_name" | "version") if raw.is_empty() => Value::Null,
        _ => Value::String(raw.to_string()),
    })
}

/// Decimal amount such as `12`, `12.5` or `12.50` into cents.
pub fn parse_money(raw: &str) -> Option<Money> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Some(Money(0));
    }
    let (neg, digits) = match raw.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() || frac.len() > 2 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let frac: i64 = format!("{frac:0<2}").parse().ok()?;
    let cents = whole.checked_mul(100)?.checked_add(frac)?;
    Some(Money(if neg { -cents } else { cents }))
}

impl Service {
    pub fn import(&self, actor: &Actor, request: &ImportRequest) -> Result<ImportResult> {
        actor.require(import_permission(request.mapping.target_kind))?;
        let rows = parse_rows(&request.text, request.format, request.delimiter)?;
        self.commit_import(actor, &request.mapping, &rows)
    }

    /// Inserts every storable row; the rest land in the problem file.
    pub fn commit_import(&self, actor: &Actor, mapping: &ColumnMapping, rows: &[Vec<String>]) -> Result<ImportResult> {
        let kind = mapping.target_kind;
        actor.require(import_permission(kind))?;
        if matches!(kind, TypeKind::Asset | TypeKind::License) && mapping.default_location_id.is_none() {
            return Err(Error::MissingLocation);
        }
        if mapping.entries.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = mapping.entries.iter().find(|e| !seen.insert(e.column)) {
            return Err(Error::BadRequest(format!("column {} is mapped twice", dup.column)));
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let unmapped: Vec<usize> = (0..width).filter(|c| !seen.contains(c)).collect();
        self.write(|t| {
            let ty = resolve_type(t, kind, mapping.type_id)?;
            let type_fields: BTreeSet<&str> = ty.field_set.iter().map(|f| f.name.as_str()).collect();
            let universe = field_universe(kind);
            if let Some(bad) =
                mapping.entries.iter().find(|e| !universe.contains(&e.field.as_str()) && !type_fields.contains(e.field.as_str()))
            {
                return Err(Error::BadRequest(format!("`{}` is not a field of {}", bad.field, kind.as_str())));
            }
            if let Some(l) = mapping.default_location_id {
                t.get::<uuis_core::Location>(l)?;
            }
            let mut inserted = Vec::new();
            let mut refs = Vec::new();
            let mut problems = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let result = row_input(kind, mapping, universe, row)
                    .map_err(Error::BadRequest)
                    .and_then(|input| t.savepoint(|t| insert_row(t, actor, mapping, &ty, input)));
                match result {
                    Ok(r) => {
                        inserted.push(r.id);
                        refs.push(r);
                    }
                    Err(e) => problems.push(ProblemRow {
                        row_number: i + 1,
                        original_row: render_row(row),
                        reason: match e {
                            Error::BadRequest(m) => m,
                            other => reason(&other),
                        },
                    }),
                }
            }
            let problem_file = render_problem_file(&unmapped, &problems)?;
            let details = serde_json::json!({
                "rows": rows.len(),
                "inserted": inserted.len(),
                "problems": problems.len(),
                "unmapped_columns": unmapped,
            });
            let seq = t.audit(actor.id(), &action::import(kind), &refs, details.to_string())?;
            t.save_import_problems(seq, &problem_file)?;
            Ok(ImportResult {
                inserted_ids: inserted,
                problem_rows: problems,
                unmapped_columns: unmapped.clone(),
                problem_file,
                audit_sequence: seq,
            })
        })
    }

    pub fn import_problem_file(&self, actor: &Actor, audit_sequence: u64) -> Result<String> {
        let allowed = [TypeKind::Asset, TypeKind::License, TypeKind::Location, TypeKind::Person]
            .iter()
            .any(|k| actor.has(import_permission(*k)));
        if !allowed {
            return Err(Error::PermissionDenied(perm::IMPORT_ASSET.into()));
        }
        self.read(|r| r.import_problem_file(audit_sequence))?
            .ok_or_else(|| Error::UnknownName("import", audit_sequence.to_string()))
    }
}

/// JSON object for one row: universe fields at top level, type-specific
/// fields under `attributes`.
fn row_input(
    kind: TypeKind,
    mapping: &ColumnMapping,
    universe: &[&str],
    row: &[String],
) -> std::result::Result<Map<String, Value>, String> {
    let mut obj = Map::new();
    let mut attributes = BTreeMap::new();
    for e in &mapping.entries {
        let raw = row.get(e.column).map(|s| s.trim()).unwrap_or("");
        if universe.contains(&e.field.as_str()) {
            obj.insert(e.field.clone(), typed(kind, &e.field, raw)?);
        } else if !raw.is_empty() {
            attributes.insert(e.field.clone(), raw.to_string());
        }
    }
    obj.insert("attributes".into(), serde_json::to_value(attributes).map_err(|e| e.to_string())?);
    Ok(obj)
}

fn insert_row(t: &mut Txn<'_>, actor: &Actor, mapping: &ColumnMapping, ty: &EntityType, mut obj: Map<String, Value>) -> Result<EntityRef> {
    obj.insert("type_id".into(), serde_json::to_value(ty.id)?);
    if let Some(f) = mapping.faculty_id {
        obj.insert("faculty_id".into(), serde_json::to_value(f)?);
    }
    if let Some(d) = mapping.department_id {
        obj.insert("department_id".into(), serde_json::to_value(d)?);
    }
    let obj = Value::Object(obj);
    Ok(match mapping.target_kind {
        TypeKind::Asset => {
            let mut input: NewAsset = serde_json::from_value(obj)?;
            input.location_id = mapping.default_location_id;
            build::asset(t, actor, input)?.entity_ref()
        }
        TypeKind::License => {
            let input: NewLicense = serde_json::from_value(obj)?;
            build::license(t, actor, input, mapping.default_location_id)?.entity_ref()
        }
        TypeKind::Location => {
            let Value::Object(mut m) = obj else { unreachable!() };
            m.remove("faculty_id");
            m.remove("department_id");
            let mut input: NewLocation = serde_json::from_value(Value::Object(m))?;
            input.parent_location_id = mapping.default_location_id;
            if let Some(f) = mapping.faculty_id {
                input.belongs_to = Some(crate::inventory::belongs_to_for(uuis_core::OrgRef {
                    faculty_id: Some(f),
                    department_id: mapping.department_id,
                }));
            }
            build::location(t, actor, input)?.entity_ref()
        }
        TypeKind::Person => {
            let input: NewPerson = serde_json::from_value(obj)?;
            build::person(t, actor, input)?.entity_ref()
        }
    })
}
