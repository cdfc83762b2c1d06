//! Boolean query language and the set-based matcher behind basic and
//! advanced search.
//!
//! Grammar (operators are case-sensitive uppercase words):
//!
//! ```text
//! or      := and ("OR" and)*
//! and     := unary ("AND" unary)*
//! unary   := "NOT" unary | primary
//! primary := term | "(" or ")"
//! term    := one or more consecutive non-operator words
//! ```
//!
//! A term matches a record when any searchable field contains it,
//! ignoring case.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{Asset, License, Location, Person};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum QueryExpr {
    Term(String),
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
}

impl QueryExpr {
    pub fn term(text: impl Into<String>) -> QueryExpr {
        QueryExpr::Term(text.into())
    }

    pub fn and(l: QueryExpr, r: QueryExpr) -> QueryExpr {
        QueryExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: QueryExpr, r: QueryExpr) -> QueryExpr {
        QueryExpr::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: QueryExpr) -> QueryExpr {
        QueryExpr::Not(Box::new(e))
    }

    pub fn depth(&self) -> usize {
        match self {
            QueryExpr::Term(_) => 1,
            QueryExpr::Not(e) => 1 + e.depth(),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Every leaf is a non-empty term.
    pub fn is_well_formed(&self) -> bool {
        match self {
            QueryExpr::Term(t) => !t.trim().is_empty(),
            QueryExpr::Not(e) => e.is_well_formed(),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => l.is_well_formed() && r.is_well_formed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("query is empty")]
    Empty,
    #[error("query can't start with {0}")]
    LeadingOperator(String),
    #[error("query can't end with {0}")]
    TrailingOperator(String),
    #[error("NOT must be followed by a term or group")]
    DanglingNot,
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("expected a term at token {0}")]
    MissingOperand(usize),
    #[error("unexpected `{token}` at token {position}")]
    Unexpected { token: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    And,
    Or,
    Not,
    Open,
    Close,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Word(w) => w.clone(),
            Token::And => "AND".to_string(),
            Token::Or => "OR".to_string(),
            Token::Not => "NOT".to_string(),
            Token::Open => "(".to_string(),
            Token::Close => ")".to_string(),
        }
    }
}

fn word_token(word: String) -> Token {
    match word.as_str() {
        "AND" => Token::And,
        "OR" => Token::Or,
        "NOT" => Token::Not,
        _ => Token::Word(word),
    }
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c == '(' || c == ')' {
                if !word.is_empty() {
                    tokens.push(word_token(core::mem::take(&mut word)));
                }
                tokens.push(if c == '(' { Token::Open } else { Token::Close });
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            tokens.push(word_token(word));
        }
    }
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn parse_or(&mut self) -> Result<QueryExpr, ParseError> {
        let mut left = self.parse_and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let right = self.parse_and()?;
            left = QueryExpr::or(left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<QueryExpr, ParseError> {
        let mut left = self.parse_unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let right = self.parse_unary()?;
            left = QueryExpr::and(left, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<QueryExpr, ParseError> {
        if self.peek() == Some(&Token::Not) {
            self.pos += 1;
            match self.peek() {
                Some(Token::Word(_)) | Some(Token::Open) | Some(Token::Not) => {}
                _ => return Err(ParseError::DanglingNot),
            }
            return Ok(QueryExpr::not(self.parse_unary()?));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<QueryExpr, ParseError> {
        match self.peek() {
            Some(Token::Word(_)) => {
                let mut words = Vec::new();
                while let Some(Token::Word(w)) = self.peek() {
                    words.push(w.clone());
                    self.pos += 1;
                }
                Ok(QueryExpr::Term(words.join(" ")))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(ParseError::UnbalancedParens);
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Close) => Err(ParseError::MissingOperand(self.pos)),
            _ => Err(ParseError::MissingOperand(self.pos)),
        }
    }
}

/// Parse query text into an expression tree.
pub fn parse_query(text: &str) -> Result<QueryExpr, ParseError> {
    let tokens = tokenize(text);
    let (first, last) = match (tokens.first(), tokens.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(ParseError::Empty),
    };
    if matches!(first, Token::And | Token::Or) {
        return Err(ParseError::LeadingOperator(first.describe()));
    }
    if matches!(last, Token::And | Token::Or) {
        return Err(ParseError::TrailingOperator(last.describe()));
    }
    if matches!(last, Token::Not) {
        return Err(ParseError::DanglingNot);
    }
    let depth_ok = tokens
        .iter()
        .try_fold(0i32, |depth, t| {
            let next = match t {
                Token::Open => depth + 1,
                Token::Close => depth - 1,
                _ => depth,
            };
            (next >= 0).then_some(next)
        })
        .is_some_and(|d| d == 0);
    if !depth_ok {
        return Err(ParseError::UnbalancedParens);
    }

    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.parse_or()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Unexpected { token: tok.describe(), position: parser.pos });
    }
    Ok(expr)
}

/// Case folding used for every comparison: uppercase then lowercase, so
/// uppercasing either side never changes a match.
pub fn fold(text: &str) -> String {
    text.to_uppercase().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Persons,
    Locations,
    Assets,
    Licenses,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Persons, Category::Locations, Category::Assets, Category::Licenses];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Persons => "persons",
            Category::Locations => "locations",
            Category::Assets => "assets",
            Category::Licenses => "licenses",
        }
    }

    /// Names of the fields search looks at in this category.
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            Category::Assets => &[
                "name",
                "serial_number",
                "barcode",
                "purchase_number",
                "request_number",
                "color",
                "material",
                "host_name",
                "brand",
                "version",
                "description",
                "status",
            ],
            Category::Licenses => {
                &["name", "purchase_number", "request_number", "seats", "price", "term", "company", "status"]
            }
            Category::Locations => {
                &["location_number", "description", "key_number", "code_number", "capacity", "status"]
            }
            Category::Persons => &["username", "name", "title", "contact", "level", "status"],
        }
    }
}

/// A record search can look into.
pub trait Searchable {
    fn category(&self) -> Category;

    /// `(field name, rendered value)` pairs. Names come from
    /// [`Category::field_names`]; absent optional fields are omitted.
    fn search_fields(&self) -> Vec<(&'static str, String)>;
}

fn opt(out: &mut Vec<(&'static str, String)>, name: &'static str, value: &Option<String>) {
    if let Some(v) = value {
        out.push((name, v.clone()));
    }
}

impl Searchable for Asset {
    fn category(&self) -> Category {
        Category::Assets
    }

    fn search_fields(&self) -> Vec<(&'static str, String)> {
        let mut out = alloc::vec![
            ("name", self.name.clone()),
            ("serial_number", self.serial_number.clone()),
            ("barcode", self.barcode.clone()),
            ("purchase_number", self.purchase_number.clone()),
            ("request_number", self.request_number.clone()),
        ];
        opt(&mut out, "color", &self.color);
        opt(&mut out, "material", &self.material);
        opt(&mut out, "host_name", &self.host_name);
        out.push(("brand", self.brand.clone()));
        opt(&mut out, "version", &self.version);
        out.push(("description", self.description.clone()));
        out.push(("status", self.status.as_str().to_string()));
        out
    }
}

impl Searchable for License {
    fn category(&self) -> Category {
        Category::Licenses
    }

    fn search_fields(&self) -> Vec<(&'static str, String)> {
        alloc::vec![
            ("name", self.name.clone()),
            ("purchase_number", self.purchase_number.clone()),
            ("request_number", self.request_number.clone()),
            ("seats", format!("{}", self.seats)),
            ("price", format!("{}", self.price)),
            ("term", self.term.clone()),
            ("company", self.company.clone()),
            ("status", self.status.as_str().to_string()),
        ]
    }
}

impl Searchable for Location {
    fn category(&self) -> Category {
        Category::Locations
    }

    fn search_fields(&self) -> Vec<(&'static str, String)> {
        let mut out = alloc::vec![
            ("location_number", self.location_number.clone()),
            ("description", self.description.clone()),
            ("key_number", self.key_number.clone()),
            ("code_number", self.code_number.clone()),
        ];
        if let Some(c) = self.capacity {
            out.push(("capacity", format!("{c}")));
        }
        out.push(("status", self.status.as_str().to_string()));
        out
    }
}

impl Searchable for Person {
    fn category(&self) -> Category {
        Category::Persons
    }

    fn search_fields(&self) -> Vec<(&'static str, String)> {
        alloc::vec![
            ("username", self.username.clone()),
            ("name", self.name.clone()),
            ("title", self.title.clone()),
            ("contact", self.contact.clone()),
            ("level", format!("{}", self.level.value())),
            ("status", self.status.as_str().to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RestrictionError {
    #[error("no category selected")]
    NoCategory,
    #[error("field `{field}` does not belong to {category}")]
    UnknownField { category: &'static str, field: String },
}

/// Categories and, optionally, fields an advanced search is limited to.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchRestriction {
    pub categories: BTreeSet<Category>,
    /// Per-category field subsets; a category missing here searches all its fields.
    #[serde(default)]
    pub fields: BTreeMap<Category, BTreeSet<String>>,
}

impl SearchRestriction {
    pub fn everything() -> SearchRestriction {
        SearchRestriction { categories: Category::ALL.into_iter().collect(), fields: BTreeMap::new() }
    }

    pub fn only(category: Category) -> SearchRestriction {
        SearchRestriction { categories: BTreeSet::from([category]), fields: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), RestrictionError> {
        if self.categories.is_empty() {
            return Err(RestrictionError::NoCategory);
        }
        for (category, fields) in &self.fields {
            if let Some(f) = fields.iter().find(|f| !category.field_names().contains(&f.as_str())) {
                return Err(RestrictionError::UnknownField { category: category.as_str(), field: f.clone() });
            }
        }
        Ok(())
    }

    pub fn admits_category(&self, category: Category) -> bool {
        self.categories.contains(&category)
    }

    pub fn admits_field(&self, category: Category, field: &str) -> bool {
        self.fields.get(&category).is_none_or(|set| set.contains(field))
    }
}

/// Pre-folded view of a record set, restricted to what a search may look at.
pub struct Corpus {
    /// Index into the caller's record slice for every record in the universe.
    members: Vec<usize>,
    /// Folded searchable values, parallel to `members`.
    values: Vec<Vec<String>>,
}

impl Corpus {
    pub fn build<R: Searchable>(records: &[R], restriction: &SearchRestriction) -> Corpus {
        let mut members = Vec::new();
        let mut values = Vec::new();
        for (idx, record) in records.iter().enumerate() {
            let category = record.category();
            if !restriction.admits_category(category) {
                continue;
            }
            members.push(idx);
            values.push(
                record
                    .search_fields()
                    .into_iter()
                    .filter(|(name, _)| restriction.admits_field(category, name))
                    .map(|(_, v)| fold(&v))
                    .collect(),
            );
        }
        Corpus { members, values }
    }

    pub fn universe(&self) -> BTreeSet<usize> {
        self.members.iter().copied().collect()
    }

    fn term_matches(&self, term: &str) -> BTreeSet<usize> {
        let needle = fold(term.trim());
        self.members
            .iter()
            .zip(&self.values)
            .filter(|(_, vals)| vals.iter().any(|v| v.contains(needle.as_str())))
            .map(|(idx, _)| *idx)
            .collect()
    }

    /// Record indices matching `expr`. `Not` complements against the corpus universe.
    pub fn evaluate(&self, expr: &QueryExpr) -> BTreeSet<usize> {
        match expr {
            QueryExpr::Term(t) => self.term_matches(t),
            QueryExpr::And(l, r) => {
                let left = self.evaluate(l);
                let right = self.evaluate(r);
                left.intersection(&right).copied().collect()
            }
            QueryExpr::Or(l, r) => {
                let mut left = self.evaluate(l);
                left.extend(self.evaluate(r));
                left
            }
            QueryExpr::Not(e) => {
                let inner = self.evaluate(e);
                self.universe().difference(&inner).copied().collect()
            }
        }
    }
}
