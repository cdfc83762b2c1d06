//! Basic and advanced search over the records a person may see.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuis_core::catalog::perm;
use uuis_core::search::{parse_query, Category, Corpus, ParseError, QueryExpr, RestrictionError, SearchRestriction, Searchable};
use uuis_core::{Asset, EntityId, EntityKind, License, Location, Person, Status};

use crate::audit::action;
use crate::error::{Error, Result};
use crate::inventory::{delete_permission, person_view, see_permission};
use crate::service::{Actor, Service};
use crate::storage::Repo;

/// Any record search can return.
#[derive(Debug, Clone, PartialEq)]
pub enum Hit {
    Asset(Asset),
    License(License),
    Location(Location),
    Person(Person),
}

impl Hit {
    pub fn id(&self) -> EntityId {
        match self {
            Hit::Asset(a) => a.id,
            Hit::License(l) => l.id,
            Hit::Location(l) => l.id,
            Hit::Person(p) => p.id,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Hit::Asset(a) => serde_json::to_value(a),
            Hit::License(l) => serde_json::to_value(l),
            Hit::Location(l) => serde_json::to_value(l),
            Hit::Person(p) => return person_view(p),
        }
        .unwrap_or(Value::Null)
    }
}

impl Searchable for Hit {
    fn category(&self) -> Category {
        match self {
            Hit::Asset(a) => a.category(),
            Hit::License(l) => l.category(),
            Hit::Location(l) => l.category(),
            Hit::Person(p) => p.category(),
        }
    }

    fn search_fields(&self) -> Vec<(&'static str, String)> {
        match self {
            Hit::Asset(a) => a.search_fields(),
            Hit::License(l) => l.search_fields(),
            Hit::Location(l) => l.search_fields(),
            Hit::Person(p) => p.search_fields(),
        }
    }
}

pub fn category_kind(category: Category) -> EntityKind {
    match category {
        Category::Persons => EntityKind::Person,
        Category::Locations => EntityKind::Location,
        Category::Assets => EntityKind::Asset,
        Category::Licenses => EntityKind::License,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResults {
    pub total: usize,
    /// Matching records grouped by category, id ascending.
    pub groups: BTreeMap<Category, Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvancedQuery {
    pub query: String,
    #[serde(default = "SearchRestriction::everything")]
    pub restriction: SearchRestriction,
}

/// Records in the given categories that `actor` may see. Soft-deleted rows
/// appear only for holders of the matching delete permission.
pub fn visible_records(repo: &Repo<'_>, actor: &Actor, categories: &[Category]) -> Result<Vec<Hit>> {
    let mut out = Vec::new();
    for c in categories {
        let kind = category_kind(*c);
        if !see_permission(kind).is_some_and(|p| actor.has(p)) {
            continue;
        }
        let show_deleted = delete_permission(kind).is_some_and(|p| actor.has(p));
        let keep = |status: Status| show_deleted || status != Status::Unavailable;
        match c {
            Category::Assets => {
                out.extend(repo.scan::<Asset>()?.into_iter().filter(|a| keep(a.status) && actor.sees(a.org())).map(Hit::Asset))
            }
            Category::Licenses => out.extend(
                repo.scan::<License>()?.into_iter().filter(|l| keep(l.status) && actor.sees(l.org())).map(Hit::License),
            ),
            Category::Locations => out.extend(
                repo.scan::<Location>()?.into_iter().filter(|l| keep(l.status) && actor.sees(l.org())).map(Hit::Location),
            ),
            Category::Persons => out.extend(
                repo.scan::<Person>()?.into_iter().filter(|p| keep(p.status) && actor.sees(p.org())).map(Hit::Person),
            ),
        }
    }
    Ok(out)
}

fn group(records: &[Hit], matches: impl IntoIterator<Item = usize>) -> SearchResults {
    let mut groups: BTreeMap<Category, Vec<(EntityId, Value)>> = BTreeMap::new();
    let mut total = 0;
    for i in matches {
        let r = &records[i];
        groups.entry(r.category()).or_default().push((r.id(), r.to_value()));
        total += 1;
    }
    let groups = groups
        .into_iter()
        .map(|(c, mut rows)| {
            rows.sort_by_key(|(id, _)| *id);
            (c, rows.into_iter().map(|(_, v)| v).collect())
        })
        .collect();
    SearchResults { total, groups }
}

pub fn query_error(e: ParseError) -> Error {
    match e {
        ParseError::Empty => Error::EmptyQuery,
        other => Error::MalformedQuery(other.to_string()),
    }
}

impl Service {
    /// Case-insensitive substring match over every searchable field.
    pub fn basic_search(&self, actor: &Actor, query: &str) -> Result<SearchResults> {
        actor.require(perm::BASIC_SEARCH)?;
        let query = query.trim();
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let records = self.read(|r| visible_records(r, actor, &Category::ALL))?;
        let corpus = Corpus::build(&records, &SearchRestriction::everything());
        let results = group(&records, corpus.evaluate(&QueryExpr::term(query)));
        if results.total == 0 {
            return Err(Error::NoMatches);
        }
        let details = serde_json::json!({ "query": query, "returned": results.total });
        self.write(|t| t.audit(actor.id(), action::SEARCH_BASIC, &[], details.to_string()))?;
        Ok(results)
    }

    /// Boolean query limited to the chosen categories and fields.
    pub fn advanced_search(&self, actor: &Actor, query: &AdvancedQuery) -> Result<SearchResults> {
        actor.require(perm::ADVANCED_SEARCH)?;
        let expr = parse_query(&query.query).map_err(query_error)?;
        self.advanced_search_expr(actor, &expr, &query.restriction)
    }

    pub fn advanced_search_expr(&self, actor: &Actor, expr: &QueryExpr, restriction: &SearchRestriction) -> Result<SearchResults> {
        actor.require(perm::ADVANCED_SEARCH)?;
        restriction.validate().map_err(|e| match e {
            RestrictionError::NoCategory => Error::EmptySelection,
            other => Error::BadRequest(other.to_string()),
        })?;
        for c in &restriction.categories {
            if let Some(p) = see_permission(category_kind(*c)) {
                actor.require(p)?;
            }
        }
        let categories: Vec<Category> = restriction.categories.iter().copied().collect();
        let records = self.read(|r| visible_records(r, actor, &categories))?;
        let corpus = Corpus::build(&records, restriction);
        let results = group(&records, corpus.evaluate(expr));
        if results.total == 0 {
            return Err(Error::NoMatches);
        }
        let details = serde_json::json!({ "query": format!("{expr:?}"), "returned": results.total });
        self.write(|t| t.audit(actor.id(), action::SEARCH_ADVANCED, &[], details.to_string()))?;
        Ok(results)
    }
}
