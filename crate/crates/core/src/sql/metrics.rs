//! Complexity profile of a query.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::lexer::tokenize;
use super::render::render_query;
use super::Dialect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub token_count: usize,
    /// Atomic predicates in WHERE, HAVING and ON clauses at any depth.
    pub predicate_count: usize,
    /// Scalar/IN/EXISTS subqueries, derived tables and CTE bodies.
    pub subquery_count: usize,
    /// Explicit JOINs plus implicit comma joins.
    pub join_count: usize,
    /// 0 for a flat query, +1 for each level of subquery nesting.
    pub nesting_depth: usize,
}

impl ComplexityProfile {
    /// Scalar used to rank queries by complexity.
    pub fn rank_key(&self) -> usize {
        self.predicate_count + 2 * self.subquery_count + self.join_count
    }
}

pub fn complexity_profile(q: &Query, dialect: Dialect) -> ComplexityProfile {
    let text = render_query(q, dialect);
    let mut p = ComplexityProfile {
        token_count: tokenize(&text, dialect).map(|t| t.len()).unwrap_or(0),
        ..Default::default()
    };
    let mut c = Counter { p: &mut p };
    c.query(q, 0);
    p
}

struct Counter<'a> {
    p: &'a mut ComplexityProfile,
}

impl Counter<'_> {
    fn subquery(&mut self, q: &Query, depth: usize) {
        self.p.subquery_count += 1;
        self.query(q, depth + 1);
    }

    fn query(&mut self, q: &Query, depth: usize) {
        self.p.nesting_depth = self.p.nesting_depth.max(depth);
        for cte in &q.with {
            self.subquery(&cte.query, depth);
        }
        self.set(&q.body, depth);
        for o in &q.order_by {
            self.expr(&o.expr, depth, false);
        }
    }

    fn set(&mut self, s: &SetExpr, depth: usize) {
        match s {
            SetExpr::Select(sel) => self.select(sel, depth),
            SetExpr::Query(q) => self.query(q, depth),
            SetExpr::SetOp { left, right, .. } => {
                self.set(left, depth);
                self.set(right, depth);
            }
        }
    }

    fn select(&mut self, s: &Select, depth: usize) {
        for item in &s.projection {
            if let SelectItem::Expr { expr, .. } = item {
                self.expr(expr, depth, false);
            }
        }
        self.p.join_count += s.from.len().saturating_sub(1);
        for t in &s.from {
            self.table(t, depth);
        }
        if let Some(w) = &s.selection {
            self.expr(w, depth, true);
        }
        for g in &s.group_by {
            self.expr(g, depth, false);
        }
        if let Some(h) = &s.having {
            self.expr(h, depth, true);
        }
    }

    fn table(&mut self, t: &TableRef, depth: usize) {
        match t {
            TableRef::Table { .. } => {}
            TableRef::Derived { subquery, .. } => self.subquery(subquery, depth),
            TableRef::Join { left, right, on, .. } => {
                self.p.join_count += 1;
                self.table(left, depth);
                self.table(right, depth);
                if let Some(on) = on {
                    self.expr(on, depth, true);
                }
            }
        }
    }

    fn expr(&mut self, e: &Expr, depth: usize, in_pred: bool) {
        let atom = match e {
            Expr::Binary { op, .. } => op.is_comparison(),
            Expr::IsNull { .. } | Expr::InList { .. } | Expr::InSubquery { .. } => true,
            Expr::Between { .. } | Expr::Like { .. } => true,
            _ => false,
        };
        if atom && in_pred {
            self.p.predicate_count += 1;
        }
        match e {
            Expr::Column { .. } | Expr::Literal(_) => {}
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::IsBool { expr, .. } => {
                self.expr(expr, depth, in_pred)
            }
            Expr::Cast { expr, .. } => self.expr(expr, depth, in_pred),
            Expr::Binary { left, right, .. } => {
                self.expr(left, depth, in_pred);
                self.expr(right, depth, in_pred);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr, depth, in_pred);
                for x in list {
                    self.expr(x, depth, in_pred);
                }
            }
            Expr::InSubquery { expr, subquery, .. } => {
                self.expr(expr, depth, in_pred);
                self.subquery(subquery, depth);
            }
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr, depth, in_pred);
                self.expr(low, depth, in_pred);
                self.expr(high, depth, in_pred);
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr, depth, in_pred);
                self.expr(pattern, depth, in_pred);
            }
            Expr::Exists { subquery, .. } | Expr::Subquery(subquery) => self.subquery(subquery, depth),
            Expr::Function { args, over, .. } => {
                for a in args {
                    self.expr(a, depth, in_pred);
                }
                if let Some(w) = over {
                    for x in &w.partition_by {
                        self.expr(x, depth, in_pred);
                    }
                    for o in &w.order_by {
                        self.expr(&o.expr, depth, in_pred);
                    }
                }
            }
            Expr::Case { operand, branches, else_result } => {
                if let Some(o) = operand {
                    self.expr(o, depth, in_pred);
                }
                for (c, r) in branches {
                    self.expr(c, depth, in_pred);
                    self.expr(r, depth, in_pred);
                }
                if let Some(x) = else_result {
                    self.expr(x, depth, in_pred);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parse_query;

    fn profile(sql: &str) -> ComplexityProfile {
        complexity_profile(&parse_query(sql, Dialect::Postgres).unwrap(), Dialect::Postgres)
    }

    #[test]
    fn flat_query() {
        let p = profile("SELECT a FROM t WHERE a = 1 AND b > 2");
        assert_eq!(p.predicate_count, 2);
        assert_eq!(p.subquery_count, 0);
        assert_eq!(p.join_count, 0);
        assert_eq!(p.nesting_depth, 0);
        assert_eq!(p.token_count, 12);
    }

    #[test]
    fn joins_and_subqueries() {
        let p = profile(
            "SELECT a FROM t, u JOIN v ON u.id = v.id \
             WHERE t.x IN (SELECT y FROM w WHERE w.z BETWEEN 1 AND 2) \
             AND EXISTS (SELECT 1 FROM (SELECT * FROM q) AS d WHERE d.k LIKE 'a%')",
        );
        assert_eq!(p.join_count, 2);
        assert_eq!(p.subquery_count, 3);
        assert_eq!(p.nesting_depth, 2);
        assert_eq!(p.predicate_count, 4);
    }

    #[test]
    fn set_op_branches_are_not_subqueries() {
        let p = profile("SELECT a FROM t UNION ALL SELECT a FROM u");
        assert_eq!(p.subquery_count, 0);
        assert_eq!(p.nesting_depth, 0);
    }
}
