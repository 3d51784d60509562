//! Synthetic latency model.
//!
//! ```text
//! latency = (BASE + PER_ROW * rows_scanned) * product of feature multipliers
//!         + SLEEP seconds
//! ```
//!
//! | feature                                              | multiplier |
//! |------------------------------------------------------|------------|
//! | correlated subquery                                  | 3.0 each   |
//! | derived-table nesting depth `d`                      | 1.5^d      |
//! | ORDER BY inside a subquery without LIMIT             | 1.3 each   |
//! | OR operator                                          | 1.1 each   |
//! | DISTINCT or duplicate-eliminating set operation      | 1.25 each  |
//! | WHERE conjunct over a FROM list holding a derived table | 1.2 each |
//!
//! `rows_scanned` sums the row counts of every base-table scan in the bound
//! plan, so a table read inside a subquery counts once per reference. Every
//! multiplier is strictly greater than one, so latency grows strictly with
//! each feature count.

use crate::sql::ast::{BinaryOp, Expr, Query, Select, SetExpr, TableRef};

use super::plan::{FromNode, Program, QueryPlan, SetPlan};

pub const BASE_SECONDS: f64 = 0.002;
pub const PER_ROW_SECONDS: f64 = 2e-6;
pub const CORRELATED_MULTIPLIER: f64 = 3.0;
pub const NESTING_MULTIPLIER: f64 = 1.5;
pub const SUBQUERY_SORT_MULTIPLIER: f64 = 1.3;
pub const OR_MULTIPLIER: f64 = 1.1;
pub const DISTINCT_MULTIPLIER: f64 = 1.25;
pub const DERIVED_FILTER_MULTIPLIER: f64 = 1.2;

/// Feature counts feeding the latency formula.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostFeatures {
    pub rows_scanned: usize,
    pub correlated_subqueries: usize,
    pub derived_depth: usize,
    pub subquery_sorts: usize,
    pub or_operators: usize,
    pub distincts: usize,
    pub derived_filters: usize,
    /// Total requested sleep, in seconds.
    pub sleep_seconds: f64,
}

impl CostFeatures {
    pub fn latency(&self) -> f64 {
        let base = BASE_SECONDS + PER_ROW_SECONDS * self.rows_scanned as f64;
        let m = CORRELATED_MULTIPLIER.powi(self.correlated_subqueries as i32)
            * NESTING_MULTIPLIER.powi(self.derived_depth as i32)
            * SUBQUERY_SORT_MULTIPLIER.powi(self.subquery_sorts as i32)
            * OR_MULTIPLIER.powi(self.or_operators as i32)
            * DISTINCT_MULTIPLIER.powi(self.distincts as i32)
            * DERIVED_FILTER_MULTIPLIER.powi(self.derived_filters as i32);
        base * m + self.sleep_seconds
    }
}

pub fn features(q: &Query, prog: &Program) -> CostFeatures {
    let mut f = CostFeatures {
        correlated_subqueries: prog.subs.iter().filter(|s| s.is_correlated()).count(),
        ..CostFeatures::default()
    };
    let mut depth = 0;
    plan_walk(&prog.root, 0, &mut f.rows_scanned, &mut depth);
    for s in &prog.subs {
        plan_walk(&s.plan, 0, &mut f.rows_scanned, &mut depth);
    }
    f.derived_depth = depth;
    let mut w = AstWalk { f: &mut f };
    w.query(q, true);
    f
}

fn plan_walk(q: &QueryPlan, depth: usize, rows: &mut usize, max_depth: &mut usize) {
    fn set(s: &SetPlan, depth: usize, rows: &mut usize, max_depth: &mut usize) {
        match s {
            SetPlan::Select(sel) => {
                for item in &sel.items {
                    node(item, depth, rows, max_depth);
                }
            }
            SetPlan::SetOp { left, right, .. } => {
                set(left, depth, rows, max_depth);
                set(right, depth, rows, max_depth);
            }
            SetPlan::Query(q) => plan_walk(q, depth, rows, max_depth),
        }
    }
    fn node(n: &FromNode, depth: usize, rows: &mut usize, max_depth: &mut usize) {
        match n {
            FromNode::Scan { table, .. } => *rows += table.rows.len(),
            FromNode::Derived { plan, .. } => {
                *max_depth = (*max_depth).max(depth + 1);
                plan_walk(plan, depth + 1, rows, max_depth);
            }
            FromNode::Join(j) => {
                node(&j.left, depth, rows, max_depth);
                node(&j.right, depth, rows, max_depth);
            }
        }
    }
    set(&q.body, depth, rows, max_depth);
}

struct AstWalk<'a> {
    f: &'a mut CostFeatures,
}

impl AstWalk<'_> {
    fn query(&mut self, q: &Query, top: bool) {
        for c in &q.with {
            self.query(&c.query, false);
        }
        if !top && !q.order_by.is_empty() && q.limit.is_none() {
            self.f.subquery_sorts += 1;
        }
        self.set(&q.body);
        for o in &q.order_by {
            self.expr(&o.expr);
        }
    }

    fn set(&mut self, s: &SetExpr) {
        match s {
            SetExpr::Select(sel) => self.select(sel),
            SetExpr::SetOp { all, left, right, .. } => {
                if !all {
                    self.f.distincts += 1;
                }
                self.set(left);
                self.set(right);
            }
            SetExpr::Query(q) => self.query(q, false),
        }
    }

    fn select(&mut self, s: &Select) {
        if s.distinct {
            self.f.distincts += 1;
        }
        for item in &s.projection {
            if let crate::sql::ast::SelectItem::Expr { expr, .. } = item {
                self.expr(expr);
            }
        }
        let mut has_derived = false;
        for t in &s.from {
            has_derived |= self.table(t);
        }
        if let Some(w) = &s.selection {
            if has_derived {
                self.f.derived_filters += w.conjuncts().len();
            }
            self.expr(w);
        }
        for g in &s.group_by {
            self.expr(g);
        }
        if let Some(h) = &s.having {
            self.expr(h);
        }
    }

    /// Returns true when the reference contains a derived table.
    fn table(&mut self, t: &TableRef) -> bool {
        match t {
            TableRef::Table { .. } => false,
            TableRef::Derived { subquery, .. } => {
                self.query(subquery, false);
                true
            }
            TableRef::Join { left, right, on, .. } => {
                let l = self.table(left);
                let r = self.table(right);
                if let Some(on) = on {
                    self.expr(on);
                }
                l || r
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Column { .. } | Expr::Literal(_) => {}
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::IsBool { expr, .. } | Expr::Cast { expr, .. } => {
                self.expr(expr)
            }
            Expr::Binary { op, left, right } => {
                if *op == BinaryOp::Or {
                    self.f.or_operators += 1;
                }
                self.expr(left);
                self.expr(right);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr);
                list.iter().for_each(|x| self.expr(x));
            }
            Expr::InSubquery { expr, subquery, .. } => {
                self.expr(expr);
                self.query(subquery, false);
            }
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr);
                self.expr(low);
                self.expr(high);
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr);
                self.expr(pattern);
            }
            Expr::Exists { subquery, .. } | Expr::Subquery(subquery) => self.query(subquery, false),
            Expr::Function { name, args, over, .. } => {
                if name.value == "pg_sleep" {
                    if let Some(Expr::Literal(lit)) = args.first() {
                        self.f.sleep_seconds += match lit {
                            crate::sql::ast::Literal::Int(i) => *i as f64,
                            crate::sql::ast::Literal::Float(x) => *x,
                            _ => 0.0,
                        };
                    }
                }
                args.iter().for_each(|x| self.expr(x));
                if let Some(w) = over {
                    w.partition_by.iter().for_each(|x| self.expr(x));
                    w.order_by.iter().for_each(|o| self.expr(&o.expr));
                }
            }
            Expr::Case { operand, branches, else_result } => {
                if let Some(o) = operand {
                    self.expr(o);
                }
                for (c, r) in branches {
                    self.expr(c);
                    self.expr(r);
                }
                if let Some(x) = else_result {
                    self.expr(x);
                }
            }
        }
    }
}
