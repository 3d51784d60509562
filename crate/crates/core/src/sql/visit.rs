//! Mutable traversal over every expression and nested query of a statement.

use super::ast::*;

struct Walker<'a> {
    on_expr: Option<&'a mut dyn FnMut(&mut Expr)>,
    on_query: Option<&'a mut dyn FnMut(&mut Query)>,
}

/// Calls `f` on every expression node in `q`, parents before children,
/// descending into subqueries.
pub fn visit_exprs_mut(q: &mut Query, f: &mut dyn FnMut(&mut Expr)) {
    Walker { on_expr: Some(f), on_query: None }.query(q);
}

/// Calls `f` on every nested query (not `q` itself), outer before inner.
pub fn visit_subqueries_mut(q: &mut Query, f: &mut dyn FnMut(&mut Query)) {
    Walker { on_expr: None, on_query: Some(f) }.query(q);
}

/// Read-only variant of [`visit_exprs_mut`].
pub fn visit_exprs(q: &Query, f: &mut dyn FnMut(&Expr)) {
    let mut copy = q.clone();
    visit_exprs_mut(&mut copy, &mut |e| f(e));
}

/// Pre-order walk of `e` that also enters its subqueries.
pub fn walk_deep(e: &Expr, f: &mut dyn FnMut(&Expr)) {
    let mut copy = e.clone();
    let mut g = |x: &mut Expr| f(x);
    Walker { on_expr: Some(&mut g), on_query: None }.expr(&mut copy);
}

/// Every nested query inside `e`, outer before inner.
pub fn subqueries_of(e: &Expr) -> Vec<Query> {
    let mut out = Vec::new();
    let mut copy = e.clone();
    let mut g = |q: &mut Query| out.push(q.clone());
    Walker { on_expr: None, on_query: Some(&mut g) }.expr(&mut copy);
    out
}

impl Walker<'_> {
    fn query(&mut self, q: &mut Query) {
        for c in &mut q.with {
            self.sub(&mut c.query);
        }
        self.set(&mut q.body);
        for o in &mut q.order_by {
            self.expr(&mut o.expr);
        }
        if let Some(l) = &mut q.limit {
            self.expr(l);
        }
        if let Some(o) = &mut q.offset {
            self.expr(o);
        }
    }

    fn sub(&mut self, q: &mut Query) {
        if let Some(f) = self.on_query.as_mut() {
            f(q);
        }
        self.query(q);
    }

    fn set(&mut self, s: &mut SetExpr) {
        match s {
            SetExpr::Select(sel) => self.select(sel),
            SetExpr::SetOp { left, right, .. } => {
                self.set(left);
                self.set(right);
            }
            SetExpr::Query(q) => self.sub(q),
        }
    }

    fn select(&mut self, s: &mut Select) {
        for item in &mut s.projection {
            if let SelectItem::Expr { expr, .. } = item {
                self.expr(expr);
            }
        }
        for t in &mut s.from {
            self.table(t);
        }
        if let Some(w) = &mut s.selection {
            self.expr(w);
        }
        for g in &mut s.group_by {
            self.expr(g);
        }
        if let Some(h) = &mut s.having {
            self.expr(h);
        }
    }

    fn table(&mut self, t: &mut TableRef) {
        match t {
            TableRef::Table { .. } => {}
            TableRef::Derived { subquery, .. } => self.sub(subquery),
            TableRef::Join { left, right, on, .. } => {
                self.table(left);
                self.table(right);
                if let Some(on) = on {
                    self.expr(on);
                }
            }
        }
    }

    fn expr(&mut self, e: &mut Expr) {
        if let Some(f) = self.on_expr.as_mut() {
            f(e);
        }
        match e {
            Expr::Column { .. } | Expr::Literal(_) => {}
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::IsBool { expr, .. } | Expr::Cast { expr, .. } => {
                self.expr(expr)
            }
            Expr::Binary { left, right, .. } => {
                self.expr(left);
                self.expr(right);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr);
                list.iter_mut().for_each(|x| self.expr(x));
            }
            Expr::InSubquery { expr, subquery, .. } => {
                self.expr(expr);
                self.sub(subquery);
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
            Expr::Exists { subquery, .. } | Expr::Subquery(subquery) => self.sub(subquery),
            Expr::Function { args, over, .. } => {
                args.iter_mut().for_each(|x| self.expr(x));
                if let Some(w) = over {
                    w.partition_by.iter_mut().for_each(|x| self.expr(x));
                    w.order_by.iter_mut().for_each(|o| self.expr(&mut o.expr));
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

/// Expressions of one select, without descending into subqueries.
pub fn shallow_exprs(s: &Select) -> Vec<&Expr> {
    let mut out = Vec::new();
    for item in &s.projection {
        if let SelectItem::Expr { expr, .. } = item {
            out.push(expr);
        }
    }
    fn on_conditions<'a>(t: &'a TableRef, out: &mut Vec<&'a Expr>) {
        if let TableRef::Join { left, right, on, .. } = t {
            on_conditions(left, out);
            on_conditions(right, out);
            if let Some(on) = on {
                out.push(on);
            }
        }
    }
    for t in &s.from {
        on_conditions(t, &mut out);
    }
    out.extend(s.selection.iter());
    out.extend(s.group_by.iter());
    out.extend(s.having.iter());
    out
}

/// True when `e` calls an aggregate at its own level (ignoring subqueries
/// and windowed calls).
pub fn contains_aggregate(e: &Expr) -> bool {
    let mut found = false;
    walk_shallow(e, &mut |x| {
        if let Expr::Function { name, over: None, .. } = x {
            if is_aggregate_name(&name.value) {
                found = true;
            }
        }
    });
    found
}

/// True when `e` has a window call at its own level.
pub fn contains_window(e: &Expr) -> bool {
    let mut found = false;
    walk_shallow(e, &mut |x| {
        if let Expr::Function { over: Some(_), .. } = x {
            found = true;
        }
    });
    found
}

/// True when `e` contains a subquery.
pub fn contains_subquery(e: &Expr) -> bool {
    let mut found = false;
    walk_shallow(e, &mut |x| {
        if matches!(x, Expr::Exists { .. } | Expr::Subquery(_) | Expr::InSubquery { .. }) {
            found = true;
        }
    });
    found
}

/// Pre-order walk of `e` that does not enter subqueries.
pub fn walk_shallow(e: &Expr, f: &mut dyn FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Column { .. } | Expr::Literal(_) | Expr::Exists { .. } | Expr::Subquery(_) => {}
        Expr::Unary { expr, .. }
        | Expr::IsNull { expr, .. }
        | Expr::IsBool { expr, .. }
        | Expr::Cast { expr, .. }
        | Expr::InSubquery { expr, .. } => walk_shallow(expr, f),
        Expr::Binary { left, right, .. } => {
            walk_shallow(left, f);
            walk_shallow(right, f);
        }
        Expr::InList { expr, list, .. } => {
            walk_shallow(expr, f);
            list.iter().for_each(|x| walk_shallow(x, f));
        }
        Expr::Between { expr, low, high, .. } => {
            walk_shallow(expr, f);
            walk_shallow(low, f);
            walk_shallow(high, f);
        }
        Expr::Like { expr, pattern, .. } => {
            walk_shallow(expr, f);
            walk_shallow(pattern, f);
        }
        Expr::Function { args, over, .. } => {
            args.iter().for_each(|x| walk_shallow(x, f));
            if let Some(w) = over {
                w.partition_by.iter().for_each(|x| walk_shallow(x, f));
                w.order_by.iter().for_each(|o| walk_shallow(&o.expr, f));
            }
        }
        Expr::Case { operand, branches, else_result } => {
            if let Some(o) = operand {
                walk_shallow(o, f);
            }
            for (c, r) in branches {
                walk_shallow(c, f);
                walk_shallow(r, f);
            }
            if let Some(x) = else_result {
                walk_shallow(x, f);
            }
        }
    }
}
