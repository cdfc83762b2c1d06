//! SQLite-backed repository.
//!
//! Records live as JSON bodies next to the columns that carry their unique
//! and lookup indexes. Writes go through [`Store::write`], which runs one
//! immediate transaction on the single writer connection and refuses to
//! commit a mutation that has no audit record covering the touched rows.
//! Reads use pooled connections and never wait for the writer when the store
//! lives on disk.

use std::collections::BTreeSet;
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::SecondsFormat;
use rusqlite::types::Value;
use rusqlite::{params, params_from_iter, Connection, OptionalExtension, ToSql};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uuis_core::{
    Asset, AuditRecord, Department, EntityId, EntityKind, EntityRef, EntityType, Faculty, License,
    Location, Person, Request, Role, Subgroup, Timestamp,
};

use crate::error::{Error, Result};
use crate::outbox::{DeliveryState, OutboxMessage};

pub const SCHEMA: &str = include_str!("../schema/schema.sql");
pub const SCHEMA_VERSION: &str = "1";

/// A record family stored in its own table.
pub trait Record: Serialize + DeserializeOwned {
    const KIND: EntityKind;
    const TABLE: &'static str;

    fn id(&self) -> EntityId;
    fn set_id(&mut self, id: EntityId);

    /// Indexed projections written alongside the body.
    fn columns(&self) -> Vec<(&'static str, Value)> {
        Vec::new()
    }

    fn entity_ref(&self) -> EntityRef {
        EntityRef::new(Self::KIND, self.id())
    }
}

macro_rules! record {
    ($ty:ty, $kind:ident, $table:literal) => {
        record!($ty, $kind, $table, |_r| Vec::new());
    };
    ($ty:ty, $kind:ident, $table:literal, |$r:ident| $cols:expr) => {
        impl Record for $ty {
            const KIND: EntityKind = EntityKind::$kind;
            const TABLE: &'static str = $table;

            fn id(&self) -> EntityId {
                self.id
            }

            fn set_id(&mut self, id: EntityId) {
                self.id = id;
            }

            fn columns(&self) -> Vec<(&'static str, Value)> {
                let $r = self;
                $cols
            }
        }
    };
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

record!(Asset, Asset, "assets", |r| vec![
    ("barcode", text(&r.barcode)),
    ("status", text(r.status.as_str())),
]);
record!(License, License, "licenses", |r| vec![("status", text(r.status.as_str()))]);
record!(Location, Location, "locations", |r| vec![
    ("parent_key", Value::Integer(r.parent_location_id.map_or(0, |p| p.0 as i64))),
    ("location_number", text(&r.location_number)),
    ("status", text(r.status.as_str())),
]);
record!(Person, Person, "persons", |r| vec![
    ("username", text(&r.username)),
    ("status", text(r.status.as_str())),
]);
record!(Faculty, Faculty, "faculties");
record!(Department, Department, "departments", |r| vec![(
    "faculty_id",
    Value::Integer(r.faculty_id.0 as i64)
)]);
record!(EntityType, EntityType, "entity_types", |r| vec![
    ("kind", text(r.kind.as_str())),
    ("name", text(&r.name)),
]);
record!(Subgroup, Subgroup, "subgroups", |r| vec![("name", text(&r.name))]);
record!(Role, Role, "roles", |r| vec![("name", text(&r.name))]);
record!(Request, Request, "requests", |r| vec![(
    "state",
    text(match r.state {
        uuis_core::RequestState::Pending => "pending",
        uuis_core::RequestState::Approved => "approved",
        uuis_core::RequestState::Rejected => "rejected",
    })
)]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSpec {
    pub offset: usize,
    pub limit: usize,
}

impl Default for PageSpec {
    fn default() -> PageSpec {
        PageSpec { offset: 0, limit: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

/// Conjunctive filter over the audit log. Empty sets mean "any".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    #[serde(default)]
    pub from: Option<Timestamp>,
    #[serde(default)]
    pub to: Option<Timestamp>,
    #[serde(default)]
    pub persons: BTreeSet<EntityId>,
    #[serde(default)]
    pub items: BTreeSet<EntityRef>,
}

impl AuditFilter {
    pub fn matches(&self, record: &AuditRecord) -> bool {
        self.from.is_none_or(|f| record.timestamp >= f)
            && self.to.is_none_or(|t| record.timestamp <= t)
            && (self.persons.is_empty() || self.persons.contains(&record.actor_id))
            && (self.items.is_empty() || record.entity_refs.iter().any(|r| self.items.contains(r)))
    }
}

pub fn format_ts(ts: Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn parse_ts(s: &str) -> Result<Timestamp> {
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&chrono::Utc))
        .map_err(|e| Error::Storage(format!("bad timestamp `{s}`: {e}")))
}

fn decode<R: DeserializeOwned>(body: &str) -> Result<R> {
    serde_json::from_str(body).map_err(|e| Error::Storage(format!("corrupt record body: {e}")))
}

fn encode<R: Serialize>(record: &R) -> Result<String> {
    serde_json::to_string(record).map_err(|e| Error::Storage(e.to_string()))
}

/// Read access over one connection or transaction.
pub struct Repo<'c> {
    conn: &'c Connection,
}

impl<'c> Repo<'c> {
    pub fn find<R: Record>(&self, id: EntityId) -> Result<Option<R>> {
        let sql = format!("SELECT body FROM {} WHERE id = ?1", R::TABLE);
        let body: Option<String> =
            self.conn.query_row(&sql, [id.0 as i64], |row| row.get(0)).optional()?;
        body.map(|b| decode(&b)).transpose()
    }

    /// Returns the record regardless of its status.
    pub fn get<R: Record>(&self, id: EntityId) -> Result<R> {
        self.find(id)?.ok_or(Error::NotFound { kind: R::KIND, id })
    }

    pub fn find_by<R: Record>(&self, column: &str, value: &dyn ToSql) -> Result<Option<R>> {
        let sql = format!("SELECT body FROM {} WHERE {column} = ?1 ORDER BY id LIMIT 1", R::TABLE);
        let body: Option<String> = self.conn.query_row(&sql, [value], |row| row.get(0)).optional()?;
        body.map(|b| decode(&b)).transpose()
    }

    /// Every record of the family, primary key ascending.
    pub fn scan<R: Record>(&self) -> Result<Vec<R>> {
        let sql = format!("SELECT body FROM {} ORDER BY id", R::TABLE);
        let mut stmt = self.conn.prepare_cached(&sql)?;
        let rows = stmt.query_map([], |row| row.get::<_, String>(0))?;
        let mut out = Vec::new();
        for body in rows {
            out.push(decode(&body?)?);
        }
        Ok(out)
    }

    /// Records accepted by `keep`, primary key ascending, cut to `page`.
    pub fn scan_page<R: Record>(&self, keep: impl Fn(&R) -> bool, page: PageSpec) -> Result<Page<R>> {
        let all: Vec<R> = self.scan::<R>()?.into_iter().filter(|r| keep(r)).collect();
        let total = all.len();
        let items = all.into_iter().skip(page.offset).take(page.limit).collect();
        Ok(Page { items, total, offset: page.offset, limit: page.limit })
    }

    pub fn count<R: Record>(&self) -> Result<usize> {
        let sql = format!("SELECT COUNT(*) FROM {}", R::TABLE);
        let n: i64 = self.conn.query_row(&sql, [], |row| row.get(0))?;
        Ok(n as usize)
    }

    pub fn permissions(&self) -> Result<Vec<String>> {
        let mut stmt = self.conn.prepare_cached("SELECT name FROM permissions ORDER BY position")?;
        let rows = stmt.query_map([], |row| row.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn permission_exists(&self, name: &str) -> Result<bool> {
        let n: i64 =
            self.conn.query_row("SELECT COUNT(*) FROM permissions WHERE name = ?1", [name], |r| r.get(0))?;
        Ok(n > 0)
    }

    pub fn audit_records(&self, filter: &AuditFilter) -> Result<Vec<AuditRecord>> {
        let from = filter.from.map(format_ts).unwrap_or_default();
        let to = filter.to.map(format_ts).unwrap_or_else(|| "\u{10FFFF}".to_string());
        let mut stmt = self.conn.prepare_cached(
            "SELECT seq, ts, actor_id, action, refs, details FROM audit
             WHERE ts >= ?1 AND ts <= ?2 ORDER BY seq",
        )?;
        let rows = stmt.query_map(params![from, to], |row| {
            Ok((
                row.get::<_, i64>(0)?,
                row.get::<_, String>(1)?,
                row.get::<_, i64>(2)?,
                row.get::<_, String>(3)?,
                row.get::<_, String>(4)?,
                row.get::<_, String>(5)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (seq, ts, actor, action, refs, details) = row?;
            let record = AuditRecord {
                sequence_number: seq as u64,
                timestamp: parse_ts(&ts)?,
                actor_id: EntityId(actor as u64),
                action,
                entity_refs: decode(&refs)?,
                details,
            };
            if filter.matches(&record) {
                out.push(record);
            }
        }
        Ok(out)
    }

    pub fn audit_count(&self) -> Result<u64> {
        let n: i64 = self.conn.query_row("SELECT COUNT(*) FROM audit", [], |r| r.get(0))?;
        Ok(n as u64)
    }

    pub fn outbox(&self, state: Option<DeliveryState>) -> Result<Vec<OutboxMessage>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT id, recipient_id, subject, body, created_at, state, ref_kind, ref_id
             FROM outbox ORDER BY id",
        )?;
        let rows = stmt.query_map([], |row| {
            Ok((
                row.get::<_, i64>(0)?,
                row.get::<_, i64>(1)?,
                row.get::<_, String>(2)?,
                row.get::<_, String>(3)?,
                row.get::<_, String>(4)?,
                row.get::<_, String>(5)?,
                row.get::<_, Option<String>>(6)?,
                row.get::<_, Option<i64>>(7)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, recipient, subject, body, created, st, ref_kind, ref_id) = row?;
            let delivery_state = DeliveryState::parse(&st)
                .ok_or_else(|| Error::Storage(format!("bad outbox state `{st}`")))?;
            if state.is_some_and(|s| s != delivery_state) {
                continue;
            }
            let reference = match (ref_kind, ref_id) {
                (Some(k), Some(i)) => EntityKind::parse(&k).map(|k| EntityRef::new(k, EntityId(i as u64))),
                _ => None,
            };
            out.push(OutboxMessage {
                id: EntityId(id as u64),
                recipient_id: EntityId(recipient as u64),
                subject,
                body,
                created_at: parse_ts(&created)?,
                delivery_state,
                reference,
            });
        }
        Ok(out)
    }

    pub fn floor_plan(&self, location_id: EntityId) -> Result<Option<String>> {
        Ok(self
            .conn
            .query_row("SELECT document FROM floor_plans WHERE location_id = ?1", [location_id.0 as i64], |r| {
                r.get(0)
            })
            .optional()?)
    }

    pub fn import_problem_file(&self, audit_seq: u64) -> Result<Option<String>> {
        Ok(self
            .conn
            .query_row("SELECT problem_file FROM import_problems WHERE audit_seq = ?1", [audit_seq as i64], |r| {
                r.get(0)
            })
            .optional()?)
    }

    pub fn schema_version(&self) -> Result<Option<String>> {
        Ok(self
            .conn
            .query_row("SELECT value FROM schema_meta WHERE key = 'schema_version'", [], |r| r.get(0))
            .optional()?)
    }
}

/// A write transaction. Every record touched must be named by an audit
/// record appended in the same transaction, or the commit fails.
pub struct Txn<'c> {
    repo: Repo<'c>,
    now: Timestamp,
    touched: Vec<EntityRef>,
    audited: Vec<EntityRef>,
    audits: usize,
    mutated: bool,
    savepoints: usize,
}

impl<'c> Deref for Txn<'c> {
    type Target = Repo<'c>;

    fn deref(&self) -> &Repo<'c> {
        &self.repo
    }
}

impl<'c> Txn<'c> {
    pub fn now(&self) -> Timestamp {
        self.now
    }

    fn conn(&self) -> &'c Connection {
        self.repo.conn
    }

    fn next_id(&self, table: &str) -> Result<EntityId> {
        let sql = format!("SELECT COALESCE(MAX(id), 0) + 1 FROM {table}");
        let id: i64 = self.conn().query_row(&sql, [], |r| r.get(0))?;
        Ok(EntityId(id as u64))
    }

    /// Persists a new record under a freshly allocated id and returns it.
    pub fn insert<R: Record>(&mut self, mut record: R) -> Result<R> {
        let id = self.next_id(R::TABLE)?;
        record.set_id(id);
        let columns = record.columns();
        let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
        let placeholders: Vec<String> = (0..columns.len() + 2).map(|i| format!("?{}", i + 1)).collect();
        let sql = format!(
            "INSERT INTO {} (id, {}body) VALUES ({})",
            R::TABLE,
            names.iter().map(|n| format!("{n}, ")).collect::<String>(),
            placeholders.join(", ")
        );
        let mut values = vec![Value::Integer(id.0 as i64)];
        values.extend(columns.into_iter().map(|(_, v)| v));
        values.push(Value::Text(encode(&record)?));
        self.conn().execute(&sql, params_from_iter(values))?;
        self.touch(record.entity_ref());
        Ok(record)
    }

    pub fn update<R: Record>(&mut self, record: &R) -> Result<()> {
        let columns = record.columns();
        let sets: String = columns.iter().map(|(n, _)| format!("{n} = ?, ")).collect();
        let sql = format!("UPDATE {} SET {sets}body = ? WHERE id = ?", R::TABLE);
        let mut values: Vec<Value> = columns.into_iter().map(|(_, v)| v).collect();
        values.push(Value::Text(encode(record)?));
        values.push(Value::Integer(record.id().0 as i64));
        let n = self.conn().execute(&sql, params_from_iter(values))?;
        if n == 0 {
            return Err(Error::NotFound { kind: R::KIND, id: record.id() });
        }
        self.touch(record.entity_ref());
        Ok(())
    }

    fn touch(&mut self, r: EntityRef) {
        self.mutated = true;
        self.touched.push(r);
    }

    /// Appends an audit record and returns its sequence number.
    pub fn audit(
        &mut self,
        actor: EntityId,
        action: &str,
        refs: &[EntityRef],
        details: impl Into<String>,
    ) -> Result<u64> {
        self.conn().execute(
            "INSERT INTO audit (ts, actor_id, action, refs, details) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![format_ts(self.now), actor.0 as i64, action, encode(&refs)?, details.into()],
        )?;
        self.audits += 1;
        self.audited.extend_from_slice(refs);
        Ok(self.conn().last_insert_rowid() as u64)
    }

    pub fn push_outbox(
        &mut self,
        recipient: EntityId,
        subject: &str,
        body: &str,
        reference: Option<EntityRef>,
    ) -> Result<EntityId> {
        let id = self.next_id("outbox")?;
        self.conn().execute(
            "INSERT INTO outbox (id, recipient_id, subject, body, created_at, state, ref_kind, ref_id)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
            params![
                id.0 as i64,
                recipient.0 as i64,
                subject,
                body,
                format_ts(self.now),
                DeliveryState::Queued.as_str(),
                reference.map(|r| r.kind.as_str()),
                reference.map(|r| r.id.0 as i64),
            ],
        )?;
        self.mutated = true;
        Ok(id)
    }

    pub fn set_outbox_state(&mut self, id: EntityId, state: DeliveryState) -> Result<()> {
        self.conn().execute("UPDATE outbox SET state = ?1 WHERE id = ?2", params![state.as_str(), id.0 as i64])?;
        self.mutated = true;
        Ok(())
    }

    pub fn set_floor_plan(&mut self, location_id: EntityId, document: &str) -> Result<()> {
        self.conn().execute(
            "INSERT INTO floor_plans (location_id, document) VALUES (?1, ?2)
             ON CONFLICT(location_id) DO UPDATE SET document = excluded.document",
            params![location_id.0 as i64, document],
        )?;
        self.mutated = true;
        Ok(())
    }

    pub fn save_import_problems(&mut self, audit_seq: u64, problem_file: &str) -> Result<()> {
        self.conn().execute(
            "INSERT INTO import_problems (audit_seq, problem_file) VALUES (?1, ?2)",
            params![audit_seq as i64, problem_file],
        )?;
        self.mutated = true;
        Ok(())
    }

    pub fn add_permission(&mut self, name: &str) -> Result<()> {
        self.conn().execute(
            "INSERT INTO permissions (name, position)
             VALUES (?1, (SELECT COALESCE(MAX(position), 0) + 1 FROM permissions))",
            [name],
        )?;
        self.mutated = true;
        Ok(())
    }

    pub fn rename_permission(&mut self, old: &str, new: &str) -> Result<()> {
        let n = self.conn().execute("UPDATE permissions SET name = ?1 WHERE name = ?2", [new, old])?;
        if n == 0 {
            return Err(Error::UnknownPermission(old.to_string()));
        }
        self.mutated = true;
        Ok(())
    }

    pub fn set_schema_version(&mut self, version: &str) -> Result<()> {
        self.conn().execute(
            "INSERT INTO schema_meta (key, value) VALUES ('schema_version', ?1)
             ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            [version],
        )?;
        Ok(())
    }

    /// Runs `f` inside a savepoint. On error only the savepoint's work is
    /// undone and the transaction stays usable.
    pub fn savepoint<T>(&mut self, f: impl FnOnce(&mut Txn<'c>) -> Result<T>) -> Result<T> {
        let name = format!("sp{}", self.savepoints);
        self.savepoints += 1;
        let marks = (self.touched.len(), self.audited.len(), self.audits, self.mutated);
        self.conn().execute_batch(&format!("SAVEPOINT {name}"))?;
        let out = f(self);
        self.savepoints -= 1;
        match out {
            Ok(v) => {
                self.conn().execute_batch(&format!("RELEASE {name}"))?;
                Ok(v)
            }
            Err(e) => {
                self.conn().execute_batch(&format!("ROLLBACK TO {name}; RELEASE {name}"))?;
                self.touched.truncate(marks.0);
                self.audited.truncate(marks.1);
                self.audits = marks.2;
                self.mutated = marks.3;
                Err(e)
            }
        }
    }

    fn check_audited(&self) -> Result<()> {
        if self.mutated && self.audits == 0 {
            return Err(Error::Integrity("mutation committed without an audit record".into()));
        }
        let audited: BTreeSet<&EntityRef> = self.audited.iter().collect();
        if let Some(r) = self.touched.iter().find(|r| !audited.contains(r)) {
            return Err(Error::Integrity(format!("{} {} changed without an audit record", r.kind, r.id)));
        }
        Ok(())
    }
}

pub struct Store {
    writer: Mutex<Connection>,
    readers: Mutex<Vec<Connection>>,
    path: Option<PathBuf>,
}

fn configure(conn: &Connection) -> Result<()> {
    conn.busy_timeout(std::time::Duration::from_secs(10))?;
    conn.execute_batch("PRAGMA foreign_keys = ON;")?;
    Ok(())
}

impl Store {
    /// Opens or creates the store file at `path` and applies the schema.
    pub fn open(path: &Path) -> Result<Store> {
        let conn = Connection::open(path)?;
        configure(&conn)?;
        conn.execute_batch("PRAGMA journal_mode = WAL; PRAGMA synchronous = NORMAL;")?;
        Store::init(conn, Some(path.to_path_buf()))
    }

    pub fn in_memory() -> Result<Store> {
        let conn = Connection::open_in_memory()?;
        configure(&conn)?;
        Store::init(conn, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Store> {
        conn.execute_batch(SCHEMA)?;
        let version: Option<String> = Repo { conn: &conn }.schema_version()?;
        match version.as_deref() {
            None => {
                conn.execute(
                    "INSERT INTO schema_meta (key, value) VALUES ('schema_version', ?1)",
                    [SCHEMA_VERSION],
                )?;
            }
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::Config(format!(
                    "schema version mismatch: store has {other}, service expects {SCHEMA_VERSION}"
                )))
            }
        }
        Ok(Store { writer: Mutex::new(conn), readers: Mutex::new(Vec::new()), path })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Runs `f` in one immediate transaction stamped with `now`.
    pub fn write<T>(&self, now: Timestamp, f: impl FnOnce(&mut Txn<'_>) -> Result<T>) -> Result<T> {
        let conn = self.writer.lock().map_err(|_| Error::Storage("writer lock poisoned".into()))?;
        conn.execute_batch("BEGIN IMMEDIATE")?;
        let mut txn = Txn {
            repo: Repo { conn: &conn },
            now,
            touched: Vec::new(),
            audited: Vec::new(),
            audits: 0,
            mutated: false,
            savepoints: 0,
        };
        let out = f(&mut txn).and_then(|v| txn.check_audited().map(|_| v));
        match out {
            Ok(v) => match conn.execute_batch("COMMIT") {
                Ok(()) => Ok(v),
                Err(e) => {
                    let _ = conn.execute_batch("ROLLBACK");
                    Err(e.into())
                }
            },
            Err(e) => {
                conn.execute_batch("ROLLBACK")?;
                Err(e)
            }
        }
    }

    /// Runs `f` against a consistent snapshot.
    pub fn read<T>(&self, f: impl FnOnce(&Repo<'_>) -> Result<T>) -> Result<T> {
        let Some(path) = &self.path else {
            let conn = self.writer.lock().map_err(|_| Error::Storage("writer lock poisoned".into()))?;
            return f(&Repo { conn: &conn });
        };
        let pooled = self.readers.lock().map_err(|_| Error::Storage("reader pool poisoned".into()))?.pop();
        let conn = match pooled {
            Some(c) => c,
            None => {
                let c = Connection::open(path)?;
                configure(&c)?;
                c
            }
        };
        conn.execute_batch("BEGIN")?;
        let out = f(&Repo { conn: &conn });
        let end = conn.execute_batch("COMMIT");
        if end.is_ok() {
            if let Ok(mut pool) = self.readers.lock() {
                pool.push(conn);
            }
        }
        let v = out?;
        end?;
        Ok(v)
    }
}
