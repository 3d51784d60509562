//! Loader for plain SQL fixture scripts (`CREATE TABLE` and `INSERT`).

use crate::sql::lexer::{split_statements, tokenize, Sym, Token, TokenKind};
use crate::sql::Dialect;

use super::catalog::{ColumnDef, Database, SqlType, Table};
use crate::exec::value::Value;

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, String> {
        let t = self.toks.get(self.pos).cloned().ok_or("unexpected end of statement")?;
        self.pos += 1;
        Ok(t)
    }

    fn word(&mut self) -> Result<String, String> {
        match self.next()?.kind {
            TokenKind::Word(w) => Ok(w.to_ascii_lowercase()),
            TokenKind::QuotedIdent(w) => Ok(w),
            other => Err(format!("expected a name, found {other:?}")),
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokenKind::Word(w), .. }) if w.eq_ignore_ascii_case(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), String> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(format!("expected {kw}"))
        }
    }

    fn eat(&mut self, s: Sym) -> bool {
        if self.peek().is_some_and(|t| t.is_sym(s)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: Sym) -> Result<(), String> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(format!("expected '{}'", s.text()))
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>, String> {
        self.expect(Sym::LParen)?;
        let mut out = vec![self.word()?];
        while self.eat(Sym::Comma) {
            out.push(self.word()?);
        }
        self.expect(Sym::RParen)?;
        Ok(out)
    }
}

/// Executes a fixture script against `db`.
pub fn load_script(db: &mut Database, script: &str) -> Result<(), String> {
    for stmt in split_statements(script) {
        let toks = tokenize(&stmt, Dialect::Postgres).map_err(|e| e.to_string())?;
        let mut c = Cursor { toks, pos: 0 };
        if c.eat_kw("CREATE") {
            c.expect_kw("TABLE")?;
            create_table(db, &mut c)?;
        } else if c.eat_kw("INSERT") {
            c.expect_kw("INTO")?;
            insert(db, &mut c)?;
        } else if c.eat_kw("DROP") {
            c.expect_kw("TABLE")?;
            if c.eat_kw("IF") {
                c.expect_kw("EXISTS")?;
            }
            let name = c.word()?;
            db.remove_table(&name);
        } else {
            return Err(format!("unsupported statement: {}", stmt.lines().next().unwrap_or("")));
        }
    }
    Ok(())
}

fn create_table(db: &mut Database, c: &mut Cursor) -> Result<(), String> {
    let name = c.word()?;
    c.expect(Sym::LParen)?;
    let mut columns = Vec::new();
    let mut pk = Vec::new();
    loop {
        if c.eat_kw("PRIMARY") {
            c.expect_kw("KEY")?;
            pk = c.name_list()?;
        } else {
            let col = c.word()?;
            let mut words = Vec::new();
            let mut depth = 0;
            while let Some(t) = c.peek() {
                if depth == 0 && (t.is_sym(Sym::Comma) || t.is_sym(Sym::RParen)) {
                    break;
                }
                let t = c.next()?;
                match t.kind {
                    TokenKind::Sym(Sym::LParen) => depth += 1,
                    TokenKind::Sym(Sym::RParen) => depth -= 1,
                    TokenKind::Word(w) if depth == 0 => words.push(w.to_ascii_uppercase()),
                    _ => {}
                }
            }
            let (is_pk, words) = strip_constraints(words);
            let ty_name = words.join(" ");
            let ty = SqlType::from_name(&ty_name).ok_or_else(|| format!("type \"{ty_name}\" does not exist"))?;
            if is_pk {
                pk = vec![col.clone()];
            }
            columns.push(ColumnDef { name: col, ty });
        }
        if !c.eat(Sym::Comma) {
            break;
        }
    }
    c.expect(Sym::RParen)?;
    if db.table(&name).is_some() {
        return Err(format!("relation \"{name}\" already exists"));
    }
    db.add_table(Table::new(name, columns, pk));
    Ok(())
}

fn strip_constraints(words: Vec<String>) -> (bool, Vec<String>) {
    let mut out = Vec::new();
    let mut pk = false;
    let mut i = 0;
    while i < words.len() {
        match words[i].as_str() {
            "PRIMARY" => {
                pk = true;
                i += 2;
            }
            "NOT" => i += 2,
            "NULL" | "UNIQUE" => i += 1,
            _ => {
                out.push(words[i].clone());
                i += 1;
            }
        }
    }
    (pk, out)
}

fn insert(db: &mut Database, c: &mut Cursor) -> Result<(), String> {
    let name = c.word()?;
    let mut table = db.table(&name).ok_or_else(|| format!("relation \"{name}\" does not exist"))?.as_ref().clone();
    let cols = if c.peek().is_some_and(|t| t.is_sym(Sym::LParen)) {
        c.name_list()?
    } else {
        table.columns.iter().map(|col| col.name.clone()).collect()
    };
    let idx: Vec<usize> = cols
        .iter()
        .map(|n| table.column_index(n).ok_or_else(|| format!("column \"{n}\" of relation \"{name}\" does not exist")))
        .collect::<Result<_, _>>()?;
    c.expect_kw("VALUES")?;
    loop {
        c.expect(Sym::LParen)?;
        let mut row = vec![Value::Null; table.columns.len()];
        for (k, &i) in idx.iter().enumerate() {
            if k > 0 {
                c.expect(Sym::Comma)?;
            }
            row[i] = coerce(literal(c)?, table.columns[i].ty)?;
        }
        c.expect(Sym::RParen)?;
        table.push(row);
        if !c.eat(Sym::Comma) {
            break;
        }
    }
    db.add_table(table);
    Ok(())
}

fn literal(c: &mut Cursor) -> Result<Value, String> {
    let neg = c.eat(Sym::Minus);
    let t = c.next()?;
    let v = match t.kind {
        TokenKind::Number(n) => {
            if let Ok(i) = n.parse::<i64>() {
                Value::Int(if neg { -i } else { i })
            } else {
                let f: f64 = n.parse().map_err(|_| format!("bad number {n}"))?;
                Value::Float(if neg { -f } else { f })
            }
        }
        TokenKind::Str(s) if !neg => Value::Text(s),
        TokenKind::Word(w) if !neg => match w.to_ascii_uppercase().as_str() {
            "NULL" => Value::Null,
            "TRUE" => Value::Bool(true),
            "FALSE" => Value::Bool(false),
            _ => return Err(format!("unexpected word {w} in VALUES")),
        },
        other => return Err(format!("unexpected token {other:?} in VALUES")),
    };
    Ok(v)
}

fn coerce(v: Value, ty: SqlType) -> Result<Value, String> {
    Ok(match (v, ty) {
        (Value::Int(i), SqlType::Float) => Value::Float(i as f64),
        (v @ Value::Null, _) => v,
        (v @ Value::Int(_), SqlType::Int)
        | (v @ Value::Float(_), SqlType::Float)
        | (v @ Value::Text(_), SqlType::Text)
        | (v @ Value::Bool(_), SqlType::Bool) => v,
        (v, ty) => return Err(format!("value {v} does not fit column type {}", ty.pg_name())),
    })
}
