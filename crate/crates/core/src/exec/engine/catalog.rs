//! In-memory tables.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exec::value::{Row, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqlType {
    Int,
    Float,
    Text,
    Bool,
    /// Type of a bare NULL literal; unifies with anything.
    Unknown,
}

impl SqlType {
    pub fn from_name(name: &str) -> Option<SqlType> {
        let base = name.split('(').next().unwrap_or(name).trim().to_ascii_uppercase();
        Some(match base.as_str() {
            "INT" | "INTEGER" | "BIGINT" | "SMALLINT" | "INT4" | "INT8" | "INT2" => SqlType::Int,
            "DOUBLE PRECISION" | "FLOAT" | "FLOAT8" | "REAL" | "NUMERIC" | "DECIMAL" => SqlType::Float,
            "TEXT" | "VARCHAR" | "CHAR" | "CHARACTER VARYING" | "CHARACTER" | "DATE" => SqlType::Text,
            "BOOLEAN" | "BOOL" => SqlType::Bool,
            _ => return None,
        })
    }

    /// DDL spelling used when rendering fixture schemas.
    pub fn ddl_name(self) -> &'static str {
        match self {
            SqlType::Int => "INTEGER",
            SqlType::Float => "DOUBLE PRECISION",
            SqlType::Text => "TEXT",
            SqlType::Bool => "BOOLEAN",
            SqlType::Unknown => "TEXT",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, SqlType::Int | SqlType::Float)
    }

    /// Common supertype for UNION columns, CASE branches and COALESCE.
    pub fn unify(self, other: SqlType) -> Option<SqlType> {
        use SqlType::*;
        match (self, other) {
            (a, b) if a == b => Some(a),
            (Unknown, x) | (x, Unknown) => Some(x),
            (Int, Float) | (Float, Int) => Some(Float),
            _ => None,
        }
    }

    /// Whether values of the two types may be compared.
    pub fn comparable(self, other: SqlType) -> bool {
        self.unify(other).is_some()
    }

    pub fn pg_name(self) -> &'static str {
        match self {
            SqlType::Int => "integer",
            SqlType::Float => "double precision",
            SqlType::Text => "text",
            SqlType::Bool => "boolean",
            SqlType::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub ty: SqlType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnDef>, primary_key: Vec<String>) -> Self {
        Table { name: name.into(), columns, primary_key, rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn create_statement(&self) -> String {
        let mut cols: Vec<String> = self.columns.iter().map(|c| format!("    {} {}", c.name, c.ty.ddl_name())).collect();
        if !self.primary_key.is_empty() {
            cols.push(format!("    PRIMARY KEY ({})", self.primary_key.join(", ")));
        }
        format!("CREATE TABLE {} (\n{}\n);", self.name, cols.join(",\n"))
    }
}

/// A set of named tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    tables: BTreeMap<String, Arc<Table>>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, table: Table) {
        self.tables.insert(table.name.clone(), Arc::new(table));
    }

    pub fn remove_table(&mut self, name: &str) -> Option<Arc<Table>> {
        self.tables.remove(name)
    }

    pub fn table(&self, name: &str) -> Option<&Arc<Table>> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Arc<Table>> {
        self.tables.values()
    }

    /// `CREATE TABLE` statements for every table, in name order.
    pub fn schema_ddl(&self) -> String {
        self.tables.values().map(|t| t.create_statement()).collect::<Vec<_>>().join("\n\n") + "\n"
    }

    /// `INSERT` statements for all rows, batched per table.
    pub fn data_sql(&self) -> String {
        let mut out = String::new();
        for t in self.tables.values() {
            for chunk in t.rows.chunks(200) {
                let cols: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
                out.push_str(&format!("INSERT INTO {} ({}) VALUES\n", t.name, cols.join(", ")));
                let rows: Vec<String> = chunk
                    .iter()
                    .map(|r| format!("    ({})", r.iter().map(sql_literal).collect::<Vec<_>>().join(", ")))
                    .collect();
                out.push_str(&rows.join(",\n"));
                out.push_str(";\n");
            }
        }
        out
    }
}

pub fn sql_literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => crate::exec::value::canonical_float(*f),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
    }
}
