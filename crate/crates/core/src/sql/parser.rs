//! Recursive-descent parser for the SELECT dialect.
//!
//! Expressions use precedence climbing with the levels below (loosest
//! first). The renderer uses the same table so that rendering never changes
//! the parse.
//!
//! | level | operators |
//! |-------|-----------|
//! | 1 | `OR` |
//! | 2 | `AND` |
//! | 3 | `NOT` (prefix) |
//! | 4 | `IS [NOT] NULL/TRUE/FALSE` |
//! | 5 | comparisons |
//! | 6 | `[NOT] IN`, `[NOT] LIKE`, `[NOT] BETWEEN` |
//! | 7 | `\|\|` |
//! | 8 | `+ -` |
//! | 9 | `* / %` |
//! | 10 | unary minus |

use super::ast::*;
use super::lexer::{tokenize, Sym, Token, TokenKind};
use super::{Dialect, ParseError};

pub(crate) const PREC_OR: u8 = 1;
pub(crate) const PREC_AND: u8 = 2;
pub(crate) const PREC_NOT: u8 = 3;
pub(crate) const PREC_IS: u8 = 4;
pub(crate) const PREC_CMP: u8 = 5;
pub(crate) const PREC_PRED: u8 = 6;
pub(crate) const PREC_CONCAT: u8 = 7;
pub(crate) const PREC_ADD: u8 = 8;
pub(crate) const PREC_MUL: u8 = 9;
pub(crate) const PREC_UNARY: u8 = 10;
pub(crate) const PREC_ATOM: u8 = 11;

pub(crate) const RESERVED: &[&str] = &[
    "ALL", "AND", "AS", "ASC", "BETWEEN", "BY", "CASE", "CAST", "CROSS", "DESC", "DISTINCT", "ELSE", "END", "EXCEPT",
    "EXISTS", "FALSE", "FETCH", "FROM", "FULL", "GROUP", "HAVING", "IN", "INNER", "INTERSECT", "IS", "JOIN", "LEFT",
    "LIKE", "LIMIT", "NATURAL", "NOT", "NULL", "OFFSET", "ON", "OR", "ORDER", "OUTER", "OVER", "PARTITION", "RIGHT",
    "SELECT", "THEN", "TRUE", "UNION", "USING", "WHEN", "WHERE", "WINDOW", "WITH",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    let upper = word.to_ascii_uppercase();
    RESERVED.binary_search(&upper.as_str()).is_ok()
}

pub fn parse_query(sql: &str, dialect: Dialect) -> Result<Query, ParseError> {
    if sql.trim().is_empty() {
        return Err(ParseError::new(0, "empty query text", "SELECT, WITH or '('"));
    }
    let tokens = tokenize(sql, dialect)?;
    let mut p = Parser::new(tokens, sql.len());
    let q = p.query()?;
    p.eat_sym(Sym::Semicolon);
    if let Some(t) = p.peek() {
        return Err(ParseError::new(t.offset, format!("unexpected {} after end of query", t.describe()), "end of input"));
    }
    Ok(q)
}

/// Parses a standalone scalar expression (used by fixture loaders and tests).
pub fn parse_expr(sql: &str, dialect: Dialect) -> Result<Expr, ParseError> {
    let tokens = tokenize(sql, dialect)?;
    let mut p = Parser::new(tokens, sql.len());
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::new(t.offset, format!("unexpected {}", t.describe()), "end of expression"));
    }
    Ok(e)
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>, end: usize) -> Self {
        Parser { tokens, pos: 0, end }
    }

    pub(crate) fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    pub(crate) fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => Err(ParseError::new(t.offset, format!("unexpected {}", t.describe()), expected)),
            None => Err(ParseError::new(self.end, "unexpected end of input", expected)),
        }
    }

    fn word_at(&self, n: usize) -> Option<&str> {
        match self.peek_at(n) {
            Some(Token { kind: TokenKind::Word(w), .. }) => Some(w.as_str()),
            _ => None,
        }
    }

    pub(crate) fn peek_kw(&self, kw: &str) -> bool {
        self.word_at(0).is_some_and(|w| w.eq_ignore_ascii_case(kw))
    }

    fn peek_kw_at(&self, n: usize, kw: &str) -> bool {
        self.word_at(n).is_some_and(|w| w.eq_ignore_ascii_case(kw))
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(kw)
        }
    }

    pub(crate) fn peek_sym(&self, s: Sym) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Sym(x), .. }) if *x == s)
    }

    pub(crate) fn eat_sym(&mut self, s: Sym) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_sym(&mut self, s: Sym) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("'{}'", s.text()))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<Ident, ParseError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Word(w)) if !is_reserved(&w) => {
                self.pos += 1;
                Ok(Ident::new(w.to_ascii_lowercase()))
            }
            Some(TokenKind::QuotedIdent(w)) => {
                self.pos += 1;
                let plain = is_plain_ident(&w);
                Ok(Ident { value: w, quoted: !plain })
            }
            _ => self.error("identifier"),
        }
    }

    fn peek_ident(&self) -> bool {
        match self.peek() {
            Some(Token { kind: TokenKind::Word(w), .. }) => !is_reserved(w),
            Some(Token { kind: TokenKind::QuotedIdent(_), .. }) => true,
            _ => false,
        }
    }

    fn alias(&mut self) -> Result<Option<Ident>, ParseError> {
        if self.eat_kw("AS") {
            return self.ident().map(Some);
        }
        if self.peek_ident() {
            return self.ident().map(Some);
        }
        Ok(None)
    }

    pub(crate) fn query(&mut self) -> Result<Query, ParseError> {
        let mut with = Vec::new();
        if self.eat_kw("WITH") {
            loop {
                let name = self.ident()?;
                self.expect_kw("AS")?;
                self.expect_sym(Sym::LParen)?;
                let query = self.query()?;
                self.expect_sym(Sym::RParen)?;
                with.push(Cte { name, query: Box::new(query) });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            order_by = self.order_items()?;
        }
        let mut limit = None;
        let mut offset = None;
        if self.eat_kw("LIMIT") {
            let first = self.expr()?;
            if self.eat_sym(Sym::Comma) {
                offset = Some(first);
                limit = Some(self.expr()?);
            } else {
                limit = Some(first);
            }
        }
        if self.eat_kw("OFFSET") {
            offset = Some(self.expr()?);
        }
        Ok(Query { with, body, order_by, limit, offset })
    }

    fn set_expr(&mut self) -> Result<SetExpr, ParseError> {
        let mut left = self.set_term()?;
        loop {
            let op = if self.peek_kw("UNION") {
                SetOperator::Union
            } else if self.peek_kw("EXCEPT") {
                SetOperator::Except
            } else {
                break;
            };
            self.pos += 1;
            let all = self.eat_kw("ALL");
            if !all {
                self.eat_kw("DISTINCT");
            }
            let right = self.set_term()?;
            left = SetExpr::SetOp { op, all, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn set_term(&mut self) -> Result<SetExpr, ParseError> {
        let mut left = self.set_primary()?;
        while self.eat_kw("INTERSECT") {
            let all = self.eat_kw("ALL");
            if !all {
                self.eat_kw("DISTINCT");
            }
            let right = self.set_primary()?;
            left = SetExpr::SetOp { op: SetOperator::Intersect, all, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn set_primary(&mut self) -> Result<SetExpr, ParseError> {
        if self.peek_kw("SELECT") {
            return Ok(SetExpr::Select(Box::new(self.select()?)));
        }
        if self.eat_sym(Sym::LParen) {
            let q = self.query()?;
            self.expect_sym(Sym::RParen)?;
            // A parenthesised body without its own WITH/ORDER/LIMIT is just grouping.
            if q.is_bare() {
                return Ok(q.body);
            }
            return Ok(SetExpr::Query(Box::new(q)));
        }
        self.error("SELECT, WITH or '('")
    }

    fn select(&mut self) -> Result<Select, ParseError> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        if !distinct {
            self.eat_kw("ALL");
        }
        let mut projection = vec![self.select_item()?];
        while self.eat_sym(Sym::Comma) {
            projection.push(self.select_item()?);
        }
        let mut from = Vec::new();
        if self.eat_kw("FROM") {
            from.push(self.table_ref()?);
            while self.eat_sym(Sym::Comma) {
                from.push(self.table_ref()?);
            }
        }
        let selection = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.expr()?);
            while self.eat_sym(Sym::Comma) {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw("HAVING") { Some(self.expr()?) } else { None };
        Ok(Select { distinct, projection, from, selection, group_by, having })
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if self.eat_sym(Sym::Star) {
            return Ok(SelectItem::Wildcard);
        }
        if self.peek_ident()
            && matches!(self.peek_at(1), Some(Token { kind: TokenKind::Sym(Sym::Dot), .. }))
            && matches!(self.peek_at(2), Some(Token { kind: TokenKind::Sym(Sym::Star), .. }))
        {
            let q = self.ident()?;
            self.pos += 2;
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef, ParseError> {
        let mut left = self.table_factor()?;
        loop {
            let kind = if self.peek_kw("JOIN") {
                self.pos += 1;
                JoinKind::Inner
            } else if self.peek_kw("INNER") && self.peek_kw_at(1, "JOIN") {
                self.pos += 2;
                JoinKind::Inner
            } else if self.peek_kw("CROSS") && self.peek_kw_at(1, "JOIN") {
                self.pos += 2;
                JoinKind::Cross
            } else if self.peek_kw("LEFT") || self.peek_kw("RIGHT") || self.peek_kw("FULL") {
                let kind = if self.peek_kw("LEFT") {
                    JoinKind::Left
                } else if self.peek_kw("RIGHT") {
                    JoinKind::Right
                } else {
                    JoinKind::Full
                };
                self.pos += 1;
                self.eat_kw("OUTER");
                self.expect_kw("JOIN")?;
                kind
            } else {
                break;
            };
            let right = self.table_factor()?;
            let on = if kind == JoinKind::Cross {
                None
            } else {
                self.expect_kw("ON")?;
                Some(self.expr()?)
            };
            left = TableRef::Join { left: Box::new(left), right: Box::new(right), kind, on };
        }
        Ok(left)
    }

    fn table_factor(&mut self) -> Result<TableRef, ParseError> {
        if self.eat_sym(Sym::LParen) {
            let start = self.pos;
            if self.peek_kw("SELECT") || self.peek_kw("WITH") || self.peek_sym(Sym::LParen) {
                let derived = self.query().and_then(|q| {
                    self.expect_sym(Sym::RParen)?;
                    Ok(q)
                });
                match derived {
                    Ok(q) => {
                        let alias = self.alias()?;
                        return Ok(TableRef::Derived { subquery: Box::new(q), alias });
                    }
                    // "((SELECT ...) AS x JOIN ...)" is a parenthesised join.
                    Err(e) if !self.tokens[start].is_sym(Sym::LParen) => return Err(e),
                    Err(_) => self.pos = start,
                }
            }
            let inner = self.table_ref()?;
            self.expect_sym(Sym::RParen)?;
            return Ok(inner);
        }
        let name = self.ident().or_else(|_| self.error("table name or subquery"))?;
        let alias = self.alias()?;
        Ok(TableRef::Table { name, alias })
    }

    fn order_items(&mut self) -> Result<Vec<OrderItem>, ParseError> {
        let mut items = Vec::new();
        loop {
            let expr = self.expr()?;
            let desc = if self.eat_kw("DESC") {
                true
            } else {
                self.eat_kw("ASC");
                false
            };
            let nulls_first = if self.peek_kw("NULLS") {
                self.pos += 1;
                if self.eat_kw("FIRST") {
                    Some(true)
                } else if self.eat_kw("LAST") {
                    Some(false)
                } else {
                    return self.error("FIRST or LAST");
                }
            } else {
                None
            };
            items.push(OrderItem { expr, desc, nulls_first });
            if !self.eat_sym(Sym::Comma) {
                break;
            }
        }
        Ok(items)
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.expr_bp(0)
    }

    fn expr_bp(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut left = self.prefix()?;
        loop {
            // postfix / infix operators
            let negated = self.peek_kw("NOT")
                && (self.peek_kw_at(1, "IN") || self.peek_kw_at(1, "LIKE") || self.peek_kw_at(1, "BETWEEN"));
            let look = if negated { 1 } else { 0 };

            if self.peek_kw("OR") && PREC_OR >= min_prec {
                self.pos += 1;
                let right = self.expr_bp(PREC_OR + 1)?;
                left = Expr::binary(BinaryOp::Or, left, right);
                continue;
            }
            if self.peek_kw("AND") && PREC_AND >= min_prec {
                self.pos += 1;
                let right = self.expr_bp(PREC_AND + 1)?;
                left = Expr::binary(BinaryOp::And, left, right);
                continue;
            }
            if self.peek_kw("IS") && PREC_IS >= min_prec {
                self.pos += 1;
                let negated = self.eat_kw("NOT");
                if self.eat_kw("NULL") {
                    left = Expr::IsNull { expr: Box::new(left), negated };
                } else if self.eat_kw("TRUE") {
                    left = Expr::IsBool { expr: Box::new(left), value: true, negated };
                } else if self.eat_kw("FALSE") {
                    left = Expr::IsBool { expr: Box::new(left), value: false, negated };
                } else {
                    return self.error("NULL, TRUE or FALSE");
                }
                continue;
            }
            if let Some(op) = self.peek_cmp() {
                if PREC_CMP >= min_prec {
                    self.pos += 1;
                    let right = self.expr_bp(PREC_CMP + 1)?;
                    left = Expr::binary(op, left, right);
                    continue;
                }
                break;
            }
            if self.peek_kw_at(look, "IN") && PREC_PRED >= min_prec {
                self.pos += look + 1;
                self.expect_sym(Sym::LParen)?;
                if self.peek_kw("SELECT") || self.peek_kw("WITH") {
                    let q = self.query()?;
                    self.expect_sym(Sym::RParen)?;
                    left = Expr::InSubquery { expr: Box::new(left), subquery: Box::new(q), negated };
                } else {
                    let mut list = vec![self.expr()?];
                    while self.eat_sym(Sym::Comma) {
                        list.push(self.expr()?);
                    }
                    self.expect_sym(Sym::RParen)?;
                    left = Expr::InList { expr: Box::new(left), list, negated };
                }
                continue;
            }
            if self.peek_kw_at(look, "LIKE") && PREC_PRED >= min_prec {
                self.pos += look + 1;
                let pattern = self.expr_bp(PREC_PRED + 1)?;
                left = Expr::Like { expr: Box::new(left), pattern: Box::new(pattern), negated };
                continue;
            }
            if self.peek_kw_at(look, "BETWEEN") && PREC_PRED >= min_prec {
                self.pos += look + 1;
                let low = self.expr_bp(PREC_PRED + 1)?;
                self.expect_kw("AND")?;
                let high = self.expr_bp(PREC_PRED + 1)?;
                left = Expr::Between { expr: Box::new(left), low: Box::new(low), high: Box::new(high), negated };
                continue;
            }
            let arith = match self.peek() {
                Some(Token { kind: TokenKind::Sym(Sym::Concat), .. }) => Some((BinaryOp::Concat, PREC_CONCAT)),
                Some(Token { kind: TokenKind::Sym(Sym::Plus), .. }) => Some((BinaryOp::Plus, PREC_ADD)),
                Some(Token { kind: TokenKind::Sym(Sym::Minus), .. }) => Some((BinaryOp::Minus, PREC_ADD)),
                Some(Token { kind: TokenKind::Sym(Sym::Star), .. }) => Some((BinaryOp::Multiply, PREC_MUL)),
                Some(Token { kind: TokenKind::Sym(Sym::Slash), .. }) => Some((BinaryOp::Divide, PREC_MUL)),
                Some(Token { kind: TokenKind::Sym(Sym::Percent), .. }) => Some((BinaryOp::Modulo, PREC_MUL)),
                _ => None,
            };
            if let Some((op, prec)) = arith {
                if prec >= min_prec {
                    self.pos += 1;
                    let right = self.expr_bp(prec + 1)?;
                    left = Expr::binary(op, left, right);
                    continue;
                }
            }
            break;
        }
        Ok(left)
    }

    fn peek_cmp(&self) -> Option<BinaryOp> {
        match self.peek()?.kind {
            TokenKind::Sym(Sym::Eq) => Some(BinaryOp::Eq),
            TokenKind::Sym(Sym::NotEq) => Some(BinaryOp::NotEq),
            TokenKind::Sym(Sym::Lt) => Some(BinaryOp::Lt),
            TokenKind::Sym(Sym::LtEq) => Some(BinaryOp::LtEq),
            TokenKind::Sym(Sym::Gt) => Some(BinaryOp::Gt),
            TokenKind::Sym(Sym::GtEq) => Some(BinaryOp::GtEq),
            _ => None,
        }
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("NOT") {
            let before_exists = self.peek_kw("EXISTS");
            let e = self.expr_bp(PREC_NOT)?;
            if let (true, Expr::Exists { subquery, negated: false }) = (before_exists, &e) {
                return Ok(Expr::Exists { subquery: subquery.clone(), negated: true });
            }
            return Ok(Expr::Unary { op: UnaryOp::Not, expr: Box::new(e) });
        }
        if self.eat_sym(Sym::Minus) {
            let e = self.expr_bp(PREC_UNARY)?;
            return Ok(Expr::Unary { op: UnaryOp::Neg, expr: Box::new(e) });
        }
        if self.eat_sym(Sym::Plus) {
            return self.expr_bp(PREC_UNARY);
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expression");
        };
        match tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                let is_int = n.bytes().all(|b| b.is_ascii_digit());
                if is_int {
                    if let Ok(v) = n.parse::<i64>() {
                        return Ok(Expr::Literal(Literal::Int(v)));
                    }
                }
                n.parse::<f64>()
                    .map(|v| Expr::Literal(Literal::Float(v)))
                    .map_err(|_| ParseError::new(tok.offset, format!("invalid number {n}"), "numeric literal"))
            }
            TokenKind::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Str(s)))
            }
            TokenKind::Sym(Sym::LParen) => {
                self.pos += 1;
                if self.peek_kw("SELECT") || self.peek_kw("WITH") {
                    let q = self.query()?;
                    self.expect_sym(Sym::RParen)?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_sym(Sym::RParen)?;
                Ok(e)
            }
            TokenKind::QuotedIdent(_) => self.column_or_function(),
            TokenKind::Word(w) => {
                let upper = w.to_ascii_uppercase();
                match upper.as_str() {
                    "NULL" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Null))
                    }
                    "TRUE" | "FALSE" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Bool(upper == "TRUE")))
                    }
                    "EXISTS" => {
                        self.pos += 1;
                        self.expect_sym(Sym::LParen)?;
                        let q = self.query()?;
                        self.expect_sym(Sym::RParen)?;
                        Ok(Expr::Exists { subquery: Box::new(q), negated: false })
                    }
                    "CASE" => self.case_expr(),
                    "CAST" => {
                        self.pos += 1;
                        self.expect_sym(Sym::LParen)?;
                        let e = self.expr()?;
                        self.expect_kw("AS")?;
                        let data_type = self.data_type()?;
                        self.expect_sym(Sym::RParen)?;
                        Ok(Expr::Cast { expr: Box::new(e), data_type })
                    }
                    // LEFT/RIGHT are reserved for joins but are also string functions.
                    "LEFT" | "RIGHT" if matches!(self.peek_at(1), Some(Token { kind: TokenKind::Sym(Sym::LParen), .. })) => {
                        self.pos += 1;
                        self.function(Ident::new(w.to_ascii_lowercase()))
                    }
                    _ if is_reserved(&w) => self.error("expression"),
                    _ => self.column_or_function(),
                }
            }
            _ => self.error("expression"),
        }
    }

    fn column_or_function(&mut self) -> Result<Expr, ParseError> {
        let first = self.ident()?;
        if self.peek_sym(Sym::LParen) {
            return self.function(first);
        }
        if self.eat_sym(Sym::Dot) {
            let name = self.ident()?;
            return Ok(Expr::Column { table: Some(first), name });
        }
        Ok(Expr::Column { table: None, name: first })
    }

    fn function(&mut self, name: Ident) -> Result<Expr, ParseError> {
        self.expect_sym(Sym::LParen)?;
        let mut args = Vec::new();
        let mut distinct = false;
        let mut star = false;
        if self.eat_sym(Sym::Star) {
            star = true;
        } else if !self.peek_sym(Sym::RParen) {
            distinct = self.eat_kw("DISTINCT");
            args.push(self.expr()?);
            while self.eat_sym(Sym::Comma) {
                args.push(self.expr()?);
            }
        }
        self.expect_sym(Sym::RParen)?;
        let over = if self.eat_kw("OVER") {
            self.expect_sym(Sym::LParen)?;
            let mut partition_by = Vec::new();
            if self.eat_kw("PARTITION") {
                self.expect_kw("BY")?;
                partition_by.push(self.expr()?);
                while self.eat_sym(Sym::Comma) {
                    partition_by.push(self.expr()?);
                }
            }
            let mut order_by = Vec::new();
            if self.eat_kw("ORDER") {
                self.expect_kw("BY")?;
                order_by = self.order_items()?;
            }
            self.expect_sym(Sym::RParen)?;
            Some(WindowSpec { partition_by, order_by })
        } else {
            None
        };
        Ok(Expr::Function { name, args, distinct, star, over })
    }

    fn case_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect_kw("CASE")?;
        let operand = if self.peek_kw("WHEN") { None } else { Some(Box::new(self.expr()?)) };
        let mut branches = Vec::new();
        while self.eat_kw("WHEN") {
            let cond = self.expr()?;
            self.expect_kw("THEN")?;
            let result = self.expr()?;
            branches.push((cond, result));
        }
        if branches.is_empty() {
            return self.error("WHEN");
        }
        let else_result = if self.eat_kw("ELSE") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_kw("END")?;
        Ok(Expr::Case { operand, branches, else_result })
    }

    pub(crate) fn data_type(&mut self) -> Result<String, ParseError> {
        let mut words = Vec::new();
        while let Some(Token { kind: TokenKind::Word(w), .. }) = self.peek() {
            words.push(w.to_ascii_uppercase());
            self.pos += 1;
        }
        if words.is_empty() {
            return self.error("type name");
        }
        let mut ty = words.join(" ");
        if self.eat_sym(Sym::LParen) {
            let mut params = Vec::new();
            loop {
                match self.peek().map(|t| t.kind.clone()) {
                    Some(TokenKind::Number(n)) => {
                        params.push(n);
                        self.pos += 1;
                    }
                    _ => return self.error("type parameter"),
                }
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
            self.expect_sym(Sym::RParen)?;
            ty = format!("{ty}({})", params.join(","));
        }
        Ok(ty)
    }
}

/// True for identifiers that never need quoting.
pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') && !is_reserved(s)
}
