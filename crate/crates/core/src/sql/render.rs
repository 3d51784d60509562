//! Canonical single-line SQL rendering. `parse(render(q)) == q` for every
//! query the parser accepts.

use std::fmt::Write;

use super::ast::*;
use super::parser::*;
use super::Dialect;

pub fn render_query(q: &Query, dialect: Dialect) -> String {
    let mut r = Renderer { out: String::new(), dialect };
    r.query(q);
    r.out
}

pub fn render_expr(e: &Expr, dialect: Dialect) -> String {
    let mut r = Renderer { out: String::new(), dialect };
    r.expr(e, 0);
    r.out
}

struct Renderer {
    out: String,
    dialect: Dialect,
}

pub(crate) fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinaryOp::Or => PREC_OR,
            BinaryOp::And => PREC_AND,
            BinaryOp::Concat => PREC_CONCAT,
            BinaryOp::Plus | BinaryOp::Minus => PREC_ADD,
            BinaryOp::Multiply | BinaryOp::Divide | BinaryOp::Modulo => PREC_MUL,
            _ => PREC_CMP,
        },
        Expr::Unary { op: UnaryOp::Not, .. } | Expr::Exists { negated: true, .. } => PREC_NOT,
        Expr::Unary { op: UnaryOp::Neg, .. } => PREC_UNARY,
        Expr::IsNull { .. } | Expr::IsBool { .. } => PREC_IS,
        Expr::InList { .. } | Expr::InSubquery { .. } | Expr::Between { .. } | Expr::Like { .. } => PREC_PRED,
        Expr::Literal(Literal::Int(v)) if *v < 0 => PREC_UNARY,
        Expr::Literal(Literal::Float(v)) if v.is_sign_negative() => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

pub(crate) fn format_float(v: f64) -> String {
    if !v.is_finite() {
        // Not representable as a literal; render as a string cast.
        return format!("CAST('{v}' AS DOUBLE PRECISION)");
    }
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

impl Renderer {
    fn kw(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn ident(&mut self, id: &Ident) {
        if !id.quoted && is_plain_ident(&id.value) {
            self.out.push_str(&id.value);
            return;
        }
        let q = match self.dialect {
            Dialect::Postgres => '"',
            Dialect::Mysql => '`',
        };
        self.out.push(q);
        for c in id.value.chars() {
            if c == q {
                self.out.push(q);
            }
            self.out.push(c);
        }
        self.out.push(q);
    }

    fn query(&mut self, q: &Query) {
        if !q.with.is_empty() {
            self.kw("WITH ");
            for (i, cte) in q.with.iter().enumerate() {
                if i > 0 {
                    self.kw(", ");
                }
                self.ident(&cte.name);
                self.kw(" AS (");
                self.query(&cte.query);
                self.kw(")");
            }
            self.kw(" ");
        }
        self.set_expr(&q.body, false);
        if !q.order_by.is_empty() {
            self.kw(" ORDER BY ");
            self.order_items(&q.order_by);
        }
        if let Some(l) = &q.limit {
            self.kw(" LIMIT ");
            self.expr(l, 0);
        }
        if let Some(o) = &q.offset {
            self.kw(" OFFSET ");
            self.expr(o, 0);
        }
    }

    fn set_expr(&mut self, s: &SetExpr, right_operand: bool) {
        match s {
            SetExpr::Select(sel) => self.select(sel),
            SetExpr::Query(q) => {
                self.kw("(");
                self.query(q);
                self.kw(")");
            }
            SetExpr::SetOp { op, all, left, right } => {
                // INTERSECT binds tighter than UNION/EXCEPT and all are
                // left-associative, so a set operation on the right, or a
                // UNION/EXCEPT under INTERSECT, needs parentheses.
                let needs_parens = right_operand;
                if needs_parens {
                    self.kw("(");
                }
                let left_parens = *op == SetOperator::Intersect
                    && matches!(**left, SetExpr::SetOp { op: SetOperator::Union | SetOperator::Except, .. });
                if left_parens {
                    self.kw("(");
                }
                self.set_expr(left, false);
                if left_parens {
                    self.kw(")");
                }
                self.kw(" ");
                self.kw(op.keyword());
                if *all {
                    self.kw(" ALL");
                }
                self.kw(" ");
                self.set_expr(right, true);
                if needs_parens {
                    self.kw(")");
                }
            }
        }
    }

    fn select(&mut self, s: &Select) {
        self.kw("SELECT ");
        if s.distinct {
            self.kw("DISTINCT ");
        }
        for (i, item) in s.projection.iter().enumerate() {
            if i > 0 {
                self.kw(", ");
            }
            match item {
                SelectItem::Wildcard => self.kw("*"),
                SelectItem::QualifiedWildcard(t) => {
                    self.ident(t);
                    self.kw(".*");
                }
                SelectItem::Expr { expr, alias } => {
                    self.expr(expr, 0);
                    if let Some(a) = alias {
                        self.kw(" AS ");
                        self.ident(a);
                    }
                }
            }
        }
        if !s.from.is_empty() {
            self.kw(" FROM ");
            for (i, t) in s.from.iter().enumerate() {
                if i > 0 {
                    self.kw(", ");
                }
                self.table_ref(t);
            }
        }
        if let Some(w) = &s.selection {
            self.kw(" WHERE ");
            self.expr(w, 0);
        }
        if !s.group_by.is_empty() {
            self.kw(" GROUP BY ");
            for (i, g) in s.group_by.iter().enumerate() {
                if i > 0 {
                    self.kw(", ");
                }
                self.expr(g, 0);
            }
        }
        if let Some(h) = &s.having {
            self.kw(" HAVING ");
            self.expr(h, 0);
        }
    }

    fn table_ref(&mut self, t: &TableRef) {
        match t {
            TableRef::Table { name, alias } => {
                self.ident(name);
                if let Some(a) = alias {
                    self.kw(" AS ");
                    self.ident(a);
                }
            }
            TableRef::Derived { subquery, alias } => {
                self.kw("(");
                self.query(subquery);
                self.kw(")");
                if let Some(a) = alias {
                    self.kw(" AS ");
                    self.ident(a);
                }
            }
            TableRef::Join { left, right, kind, on } => {
                self.table_ref(left);
                self.kw(" ");
                self.kw(kind.keyword());
                self.kw(" ");
                if matches!(**right, TableRef::Join { .. }) {
                    self.kw("(");
                    self.table_ref(right);
                    self.kw(")");
                } else {
                    self.table_ref(right);
                }
                if let Some(on) = on {
                    self.kw(" ON ");
                    self.expr(on, 0);
                }
            }
        }
    }

    fn order_items(&mut self, items: &[OrderItem]) {
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                self.kw(", ");
            }
            self.expr(&item.expr, 0);
            if item.desc {
                self.kw(" DESC");
            }
            match item.nulls_first {
                Some(true) => self.kw(" NULLS FIRST"),
                Some(false) => self.kw(" NULLS LAST"),
                None => {}
            }
        }
    }

    /// Renders `e`, parenthesising it when its precedence is below `min`.
    fn expr(&mut self, e: &Expr, min: u8) {
        let prec = expr_prec(e);
        if prec < min {
            self.kw("(");
            self.expr(e, 0);
            self.kw(")");
            return;
        }
        match e {
            Expr::Column { table, name } => {
                if let Some(t) = table {
                    self.ident(t);
                    self.kw(".");
                }
                self.ident(name);
            }
            Expr::Literal(l) => self.literal(l),
            Expr::Unary { op: UnaryOp::Not, expr } => {
                self.kw("NOT ");
                if matches!(**expr, Expr::Exists { .. }) {
                    self.kw("(");
                    self.expr(expr, 0);
                    self.kw(")");
                } else {
                    self.expr(expr, PREC_NOT);
                }
            }
            Expr::Unary { op: UnaryOp::Neg, expr } => {
                self.kw("-");
                // avoid "--", which would start a comment
                let inner_neg = matches!(**expr, Expr::Unary { op: UnaryOp::Neg, .. })
                    || expr_prec(expr) == PREC_UNARY;
                if inner_neg {
                    self.kw("(");
                    self.expr(expr, 0);
                    self.kw(")");
                } else {
                    self.expr(expr, PREC_UNARY);
                }
            }
            Expr::Binary { op, left, right } => {
                let p = expr_prec(e);
                self.expr(left, p);
                self.kw(" ");
                self.kw(op.symbol());
                self.kw(" ");
                self.expr(right, p + 1);
            }
            Expr::IsNull { expr, negated } => {
                self.expr(expr, PREC_IS);
                self.kw(if *negated { " IS NOT NULL" } else { " IS NULL" });
            }
            Expr::IsBool { expr, value, negated } => {
                self.expr(expr, PREC_IS);
                self.kw(" IS ");
                if *negated {
                    self.kw("NOT ");
                }
                self.kw(if *value { "TRUE" } else { "FALSE" });
            }
            Expr::InList { expr, list, negated } => {
                self.expr(expr, PREC_PRED);
                self.kw(if *negated { " NOT IN (" } else { " IN (" });
                for (i, item) in list.iter().enumerate() {
                    if i > 0 {
                        self.kw(", ");
                    }
                    self.expr(item, 0);
                }
                self.kw(")");
            }
            Expr::InSubquery { expr, subquery, negated } => {
                self.expr(expr, PREC_PRED);
                self.kw(if *negated { " NOT IN (" } else { " IN (" });
                self.query(subquery);
                self.kw(")");
            }
            Expr::Between { expr, low, high, negated } => {
                self.expr(expr, PREC_PRED);
                self.kw(if *negated { " NOT BETWEEN " } else { " BETWEEN " });
                self.expr(low, PREC_PRED + 1);
                self.kw(" AND ");
                self.expr(high, PREC_PRED + 1);
            }
            Expr::Like { expr, pattern, negated } => {
                self.expr(expr, PREC_PRED);
                self.kw(if *negated { " NOT LIKE " } else { " LIKE " });
                self.expr(pattern, PREC_PRED + 1);
            }
            Expr::Exists { subquery, negated } => {
                if *negated {
                    self.kw("NOT ");
                }
                self.kw("EXISTS (");
                self.query(subquery);
                self.kw(")");
            }
            Expr::Subquery(q) => {
                self.kw("(");
                self.query(q);
                self.kw(")");
            }
            Expr::Function { name, args, distinct, star, over } => {
                let upper = name.value.to_ascii_uppercase();
                if !name.quoted && (upper == "LEFT" || upper == "RIGHT" || is_plain_ident(&name.value)) {
                    self.kw(&upper);
                } else {
                    self.ident(name);
                }
                self.kw("(");
                if *star {
                    self.kw("*");
                } else {
                    if *distinct {
                        self.kw("DISTINCT ");
                    }
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            self.kw(", ");
                        }
                        self.expr(a, 0);
                    }
                }
                self.kw(")");
                if let Some(w) = over {
                    self.kw(" OVER (");
                    let mut sep = false;
                    if !w.partition_by.is_empty() {
                        self.kw("PARTITION BY ");
                        for (i, p) in w.partition_by.iter().enumerate() {
                            if i > 0 {
                                self.kw(", ");
                            }
                            self.expr(p, 0);
                        }
                        sep = true;
                    }
                    if !w.order_by.is_empty() {
                        if sep {
                            self.kw(" ");
                        }
                        self.kw("ORDER BY ");
                        self.order_items(&w.order_by);
                    }
                    self.kw(")");
                }
            }
            Expr::Case { operand, branches, else_result } => {
                self.kw("CASE");
                if let Some(op) = operand {
                    self.kw(" ");
                    self.expr(op, 0);
                }
                for (cond, res) in branches {
                    self.kw(" WHEN ");
                    self.expr(cond, 0);
                    self.kw(" THEN ");
                    self.expr(res, 0);
                }
                if let Some(e) = else_result {
                    self.kw(" ELSE ");
                    self.expr(e, 0);
                }
                self.kw(" END");
            }
            Expr::Cast { expr, data_type } => {
                self.kw("CAST(");
                self.expr(expr, 0);
                let _ = write!(self.out, " AS {data_type})");
            }
        }
    }

    fn literal(&mut self, l: &Literal) {
        match l {
            Literal::Int(v) => {
                let _ = write!(self.out, "{v}");
            }
            Literal::Float(v) => {
                let s = format_float(*v);
                self.out.push_str(&s);
            }
            Literal::Str(s) => {
                self.out.push('\'');
                self.out.push_str(&s.replace('\'', "''"));
                self.out.push('\'');
            }
            Literal::Bool(b) => self.kw(if *b { "TRUE" } else { "FALSE" }),
            Literal::Null => self.kw("NULL"),
        }
    }
}
