//! SQL front end: lexer, parser, renderer and the structural views built on
//! the AST (labelled trees and complexity profiles).

pub mod ast;
mod labels;
pub mod lexer;
pub mod visit;
mod metrics;
mod parser;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::Query;
pub use labels::{expr_tree, literal_class, query_tree};
pub use metrics::{complexity_profile, ComplexityProfile};
pub use parser::{parse_expr, parse_query};
pub use render::{render_expr, render_query};

use crate::tree::LabeledTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    #[default]
    Postgres,
    Mysql,
}

impl Dialect {
    pub fn quote_char(self) -> char {
        match self {
            Dialect::Postgres => '"',
            Dialect::Mysql => '`',
        }
    }
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "postgres" | "postgresql" | "pg" => Ok(Dialect::Postgres),
            "mysql" => Ok(Dialect::Mysql),
            other => Err(format!("unknown dialect '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub message: String,
    pub expected: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>, expected: impl Into<String>) -> Self {
        ParseError { offset, message: message.into(), expected: expected.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {} (expected {})", self.offset, self.message, self.expected)
    }
}

impl std::error::Error for ParseError {}

/// A parsed query together with its labelled-tree view.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlTree {
    query: Query,
    dialect: Dialect,
    labels: LabeledTree,
}

impl SqlTree {
    pub fn parse(sql: &str, dialect: Dialect) -> Result<Self, ParseError> {
        Ok(Self::from_query(parse_query(sql, dialect)?, dialect))
    }

    pub fn from_query(query: Query, dialect: Dialect) -> Self {
        let labels = query_tree(&query);
        SqlTree { query, dialect, labels }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn into_query(self) -> Query {
        self.query
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn labels(&self) -> &LabeledTree {
        &self.labels
    }

    pub fn node_count(&self) -> usize {
        self.labels.size()
    }

    pub fn render(&self) -> String {
        render_query(&self.query, self.dialect)
    }

    pub fn profile(&self) -> ComplexityProfile {
        complexity_profile(&self.query, self.dialect)
    }
}

pub fn parse(sql: &str, dialect: Dialect) -> Result<SqlTree, ParseError> {
    SqlTree::parse(sql, dialect)
}

/// Parse and re-render; the canonical text used for fingerprints and
/// deduplication. Falls back to whitespace-collapsed text for input the
/// parser rejects.
pub fn normalize_sql(sql: &str, dialect: Dialect) -> String {
    match parse_query(sql, dialect) {
        Ok(q) => render_query(&q, dialect),
        Err(_) => sql.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}
