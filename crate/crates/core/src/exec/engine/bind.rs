//! Name resolution and type checking: AST to [`Program`].

use std::sync::Arc;

use crate::sql::ast::*;

use super::catalog::{Database, SqlType};
use super::plan::*;
use crate::exec::value::Value;

pub type BindResult<T> = Result<T, String>;

#[derive(Debug, Clone)]
struct ScopeCol {
    qual: Option<String>,
    name: String,
    ty: SqlType,
}

struct Frame {
    cols: Vec<ScopeCol>,
    /// Grouping keys (over input columns) once the select is grouped.
    keys: Option<Vec<(BExpr, SqlType)>>,
    /// Binding expressions evaluated after grouping.
    post: bool,
    clause: &'static str,
    allow_agg: bool,
    allow_win: bool,
    in_agg: bool,
    aggs: Vec<AggSpec>,
    windows: Vec<WindowPlan>,
}

impl Frame {
    fn new(cols: Vec<ScopeCol>, clause: &'static str) -> Self {
        Frame {
            cols,
            keys: None,
            post: false,
            clause,
            allow_agg: false,
            allow_win: false,
            in_agg: false,
            aggs: Vec::new(),
            windows: Vec::new(),
        }
    }
}

struct OpenSub {
    /// Index of the subquery's outermost frame.
    root: usize,
    refs: Vec<(usize, usize)>,
}

pub struct Binder<'a> {
    db: &'a Database,
    frames: Vec<Frame>,
    open: Vec<OpenSub>,
    subs: Vec<SubPlan>,
    ctes: Vec<(String, Arc<Query>)>,
}

pub fn bind(db: &Database, q: &Query) -> BindResult<Program> {
    let mut b = Binder { db, frames: Vec::new(), open: Vec::new(), subs: Vec::new(), ctes: Vec::new() };
    let root = b.query(q)?;
    Ok(Program { root, subs: b.subs })
}

fn output_name(e: &Expr) -> String {
    match e {
        Expr::Column { name, .. } => name.value.clone(),
        Expr::Function { name, .. } => name.value.clone(),
        Expr::Cast { expr, .. } => output_name(expr),
        Expr::Case { .. } => "case".to_string(),
        Expr::Exists { .. } => "exists".to_string(),
        Expr::Subquery(q) => match q.as_select().and_then(|s| s.projection.first()) {
            Some(SelectItem::Expr { alias: Some(a), .. }) => a.value.clone(),
            Some(SelectItem::Expr { expr, .. }) => output_name(expr),
            _ => "?column?".to_string(),
        },
        _ => "?column?".to_string(),
    }
}

/// Aggregate calls at this query level (not inside subqueries, not windowed).
fn has_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Function { name, over: None, .. } if is_aggregate_name(&name.value) => true,
        Expr::Function { args, .. } => args.iter().any(has_aggregate),
        Expr::Column { .. } | Expr::Literal(_) => false,
        Expr::Exists { .. } | Expr::Subquery(_) => false,
        Expr::InSubquery { expr, .. } => has_aggregate(expr),
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::IsBool { expr, .. } | Expr::Cast { expr, .. } => {
            has_aggregate(expr)
        }
        Expr::Binary { left, right, .. } => has_aggregate(left) || has_aggregate(right),
        Expr::InList { expr, list, .. } => has_aggregate(expr) || list.iter().any(has_aggregate),
        Expr::Between { expr, low, high, .. } => has_aggregate(expr) || has_aggregate(low) || has_aggregate(high),
        Expr::Like { expr, pattern, .. } => has_aggregate(expr) || has_aggregate(pattern),
        Expr::Case { operand, branches, else_result } => {
            operand.as_deref().is_some_and(has_aggregate)
                || branches.iter().any(|(c, r)| has_aggregate(c) || has_aggregate(r))
                || else_result.as_deref().is_some_and(has_aggregate)
        }
    }
}

fn has_subquery(e: &Expr) -> bool {
    match e {
        Expr::Exists { .. } | Expr::Subquery(_) | Expr::InSubquery { .. } => true,
        Expr::Column { .. } | Expr::Literal(_) => false,
        Expr::Function { args, over, .. } => {
            args.iter().any(has_subquery)
                || over.as_ref().is_some_and(|w| {
                    w.partition_by.iter().any(has_subquery) || w.order_by.iter().any(|o| has_subquery(&o.expr))
                })
        }
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::IsBool { expr, .. } | Expr::Cast { expr, .. } => {
            has_subquery(expr)
        }
        Expr::Binary { left, right, .. } => has_subquery(left) || has_subquery(right),
        Expr::InList { expr, list, .. } => has_subquery(expr) || list.iter().any(has_subquery),
        Expr::Between { expr, low, high, .. } => has_subquery(expr) || has_subquery(low) || has_subquery(high),
        Expr::Like { expr, pattern, .. } => has_subquery(expr) || has_subquery(pattern),
        Expr::Case { operand, branches, else_result } => {
            operand.as_deref().is_some_and(has_subquery)
                || branches.iter().any(|(c, r)| has_subquery(c) || has_subquery(r))
                || else_result.as_deref().is_some_and(has_subquery)
        }
    }
}

fn split_and(e: BExpr, out: &mut Vec<BExpr>) {
    match e {
        BExpr::Bin { op: BinaryOp::And, l, r } => {
            split_and(*l, out);
            split_and(*r, out);
        }
        other => out.push(other),
    }
}

fn widen(e: BExpr, from: SqlType, to: SqlType) -> BExpr {
    if from == SqlType::Int && to == SqlType::Float {
        BExpr::Cast { e: Box::new(e), ty: SqlType::Float }
    } else {
        e
    }
}

fn literal(l: &Literal) -> (BExpr, SqlType) {
    match l {
        Literal::Int(v) => (BExpr::Lit(Value::Int(*v)), SqlType::Int),
        Literal::Float(v) => (BExpr::Lit(Value::Float(*v)), SqlType::Float),
        Literal::Str(s) => (BExpr::Lit(Value::Text(s.clone())), SqlType::Text),
        Literal::Bool(b) => (BExpr::Lit(Value::Bool(*b)), SqlType::Bool),
        Literal::Null => (BExpr::Lit(Value::Null), SqlType::Unknown),
    }
}

fn scalar_func(name: &str) -> Option<(Func, usize, usize)> {
    Some(match name {
        "coalesce" => (Func::Coalesce, 1, usize::MAX),
        "nullif" => (Func::NullIf, 2, 2),
        "upper" => (Func::Upper, 1, 1),
        "lower" => (Func::Lower, 1, 1),
        "length" | "char_length" => (Func::Length, 1, 1),
        "abs" => (Func::Abs, 1, 1),
        "round" => (Func::Round, 1, 2),
        "floor" => (Func::Floor, 1, 1),
        "ceil" | "ceiling" => (Func::Ceil, 1, 1),
        "substr" | "substring" => (Func::Substr, 2, 3),
        "greatest" => (Func::Greatest, 1, usize::MAX),
        "least" => (Func::Least, 1, usize::MAX),
        "mod" => (Func::Mod, 2, 2),
        "pg_sleep" => (Func::Sleep, 1, 1),
        _ => return None,
    })
}

fn agg_func(name: &str, star: bool) -> Option<AggFunc> {
    Some(match name {
        "count" if star => AggFunc::CountStar,
        "count" => AggFunc::Count,
        "sum" => AggFunc::Sum,
        "avg" => AggFunc::Avg,
        "min" => AggFunc::Min,
        "max" => AggFunc::Max,
        _ => return None,
    })
}

fn agg_type(f: AggFunc, arg: SqlType) -> SqlType {
    match f {
        AggFunc::CountStar | AggFunc::Count => SqlType::Int,
        AggFunc::Avg => SqlType::Float,
        AggFunc::Sum if arg == SqlType::Int => SqlType::Int,
        AggFunc::Sum => SqlType::Float,
        AggFunc::Min | AggFunc::Max => arg,
    }
}

impl<'a> Binder<'a> {
    fn top(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("binder frame")
    }

    fn query(&mut self, q: &Query) -> BindResult<QueryPlan> {
        let saved = self.ctes.len();
        for (i, cte) in q.with.iter().enumerate() {
            if q.with[..i].iter().any(|c| c.name.value == cte.name.value) {
                return Err(format!("WITH query name \"{}\" specified more than once", cte.name.value));
            }
            self.ctes.push((cte.name.value.clone(), Arc::new((*cte.query).clone())));
        }
        let result = self.query_body(q);
        self.ctes.truncate(saved);
        result
    }

    fn query_body(&mut self, q: &Query) -> BindResult<QueryPlan> {
        let (body, columns, order) = match &q.body {
            SetExpr::Select(s) => {
                let (plan, cols, order) = self.select(s, &q.order_by)?;
                (SetPlan::Select(Box::new(plan)), cols, order)
            }
            other => {
                let (plan, cols) = self.set_expr(other)?;
                let mut order = Vec::new();
                for item in &q.order_by {
                    let pos = match &item.expr {
                        Expr::Literal(Literal::Int(k)) if *k >= 1 && (*k as usize) <= cols.len() => *k as usize - 1,
                        Expr::Literal(Literal::Int(k)) => {
                            return Err(format!("ORDER BY position {k} is not in select list"));
                        }
                        Expr::Column { table: None, name } => cols
                            .iter()
                            .position(|c| c.name == name.value)
                            .ok_or_else(|| format!("column \"{}\" does not exist", name.value))?,
                        _ => {
                            return Err(
                                "invalid UNION/INTERSECT/EXCEPT ORDER BY clause: only result column names can be used"
                                    .to_string(),
                            )
                        }
                    };
                    order.push(SortKey { key: pos, desc: item.desc, nulls_first: item.nulls_first.unwrap_or(item.desc) });
                }
                (plan, cols, order)
            }
        };
        let limit = q.limit.as_ref().map(|e| self.constant_count(e, "LIMIT")).transpose()?;
        let offset = q.offset.as_ref().map(|e| self.constant_count(e, "OFFSET")).transpose()?.unwrap_or(0);
        Ok(QueryPlan { body, order, limit, offset, columns })
    }

    fn constant_count(&self, e: &Expr, what: &str) -> BindResult<usize> {
        match e {
            Expr::Literal(Literal::Int(v)) if *v >= 0 => Ok(*v as usize),
            Expr::Literal(Literal::Int(_)) => Err(format!("{what} must not be negative")),
            _ => Err(format!("argument of {what} must be an integer constant")),
        }
    }

    fn set_expr(&mut self, s: &SetExpr) -> BindResult<(SetPlan, Vec<OutColumn>)> {
        match s {
            SetExpr::Select(sel) => {
                let (plan, cols, _) = self.select(sel, &[])?;
                Ok((SetPlan::Select(Box::new(plan)), cols))
            }
            SetExpr::Query(q) => {
                let plan = self.query(q)?;
                let cols = plan.columns.clone();
                Ok((SetPlan::Query(Box::new(plan)), cols))
            }
            SetExpr::SetOp { op, all, left, right } => {
                let (lp, lc) = self.set_expr(left)?;
                let (rp, rc) = self.set_expr(right)?;
                if lc.len() != rc.len() {
                    return Err(format!("each {} query must have the same number of columns", op.keyword()));
                }
                let mut cols = Vec::new();
                let (mut widen_left, mut widen_right) = (Vec::new(), Vec::new());
                for (i, (l, r)) in lc.iter().zip(&rc).enumerate() {
                    let ty = l.ty.unify(r.ty).ok_or_else(|| {
                        format!("{} types {} and {} cannot be matched", op.keyword(), l.ty.pg_name(), r.ty.pg_name())
                    })?;
                    if ty == SqlType::Float && l.ty == SqlType::Int {
                        widen_left.push(i);
                    }
                    if ty == SqlType::Float && r.ty == SqlType::Int {
                        widen_right.push(i);
                    }
                    cols.push(OutColumn { name: l.name.clone(), ty });
                }
                let plan = SetPlan::SetOp {
                    op: *op,
                    all: *all,
                    left: Box::new(lp),
                    right: Box::new(rp),
                    widen_left,
                    widen_right,
                };
                Ok((plan, cols))
            }
        }
    }

    fn from_item(&mut self, t: &TableRef) -> BindResult<(FromNode, Vec<ScopeCol>)> {
        match t {
            TableRef::Table { name, alias } => {
                if let Some(pos) = self.ctes.iter().rposition(|(n, _)| *n == name.value) {
                    let body = self.ctes[pos].1.clone();
                    let rest = self.ctes.split_off(pos);
                    let plan = self.query(&body);
                    self.ctes.extend(rest);
                    let plan = plan?;
                    let qual = alias.as_ref().unwrap_or(name).value.clone();
                    let cols = plan
                        .columns
                        .iter()
                        .map(|c| ScopeCol { qual: Some(qual.clone()), name: c.name.clone(), ty: c.ty })
                        .collect();
                    return Ok((FromNode::Derived { plan: Box::new(plan), alias: qual, filter: Vec::new() }, cols));
                }
                let table = self
                    .db
                    .table(&name.value)
                    .ok_or_else(|| format!("relation \"{}\" does not exist", name.value))?
                    .clone();
                let qual = alias.as_ref().unwrap_or(name).value.clone();
                let cols = table
                    .columns
                    .iter()
                    .map(|c| ScopeCol { qual: Some(qual.clone()), name: c.name.clone(), ty: c.ty })
                    .collect();
                Ok((FromNode::Scan { table, alias: qual, filter: Vec::new() }, cols))
            }
            TableRef::Derived { subquery, alias } => {
                let alias = alias.as_ref().ok_or("subquery in FROM must have an alias")?.value.clone();
                // Derived tables cannot see sibling FROM items, only enclosing queries.
                let plan = self.query(subquery)?;
                let cols = plan
                    .columns
                    .iter()
                    .map(|c| ScopeCol { qual: Some(alias.clone()), name: c.name.clone(), ty: c.ty })
                    .collect();
                Ok((FromNode::Derived { plan: Box::new(plan), alias, filter: Vec::new() }, cols))
            }
            TableRef::Join { left, right, kind, on } => {
                let (ln, lc) = self.from_item(left)?;
                let (rn, rc) = self.from_item(right)?;
                check_duplicate_aliases(&lc, &rc)?;
                let (lw, rw) = (lc.len(), rc.len());
                let mut cols = lc;
                cols.extend(rc);
                let mut keys = Vec::new();
                let mut residual = Vec::new();
                if let Some(on) = on {
                    self.frames.push(Frame::new(cols.clone(), "JOIN conditions"));
                    let bound = self.bool_expr(on, "JOIN/ON");
                    self.frames.pop();
                    let mut parts = Vec::new();
                    split_and(bound?, &mut parts);
                    for p in parts {
                        match equi_key(&p, 0, lw, lw + rw) {
                            Some((l, r)) => keys.push((l, r.shifted(lw))),
                            None => residual.push(p),
                        }
                    }
                }
                let node = JoinNode {
                    kind: *kind,
                    left: ln,
                    right: rn,
                    left_width: lw,
                    right_width: rw,
                    keys,
                    residual: residual.into_iter().reduce(|a, b| BExpr::Bin {
                        op: BinaryOp::And,
                        l: Box::new(a),
                        r: Box::new(b),
                    }),
                    filter: Vec::new(),
                };
                Ok((FromNode::Join(Box::new(node)), cols))
            }
        }
    }

    fn select(
        &mut self,
        s: &Select,
        order_by: &[OrderItem],
    ) -> BindResult<(SelectPlan, Vec<OutColumn>, Vec<SortKey<usize>>)> {
        let mut items = Vec::new();
        let mut widths = Vec::new();
        let mut cols: Vec<ScopeCol> = Vec::new();
        for t in &s.from {
            let (node, c) = self.from_item(t)?;
            check_duplicate_aliases(&cols, &c)?;
            widths.push(c.len());
            cols.extend(c);
            items.push(node);
        }
        self.frames.push(Frame::new(cols, "WHERE"));
        let result = self.select_in_frame(s, order_by, items, widths);
        self.frames.pop();
        result
    }

    fn select_in_frame(
        &mut self,
        s: &Select,
        order_by: &[OrderItem],
        mut items: Vec<FromNode>,
        widths: Vec<usize>,
    ) -> BindResult<(SelectPlan, Vec<OutColumn>, Vec<SortKey<usize>>)> {
        // WHERE, distributed over the FROM items.
        let mut steps: Vec<FromStep> = (1..items.len()).map(|_| FromStep { keys: vec![], residual: vec![] }).collect();
        let mut prefilter = Vec::new();
        let mut late = Vec::new();
        if let Some(w) = &s.selection {
            let bound = self.bool_expr(w, "WHERE")?;
            let mut parts = Vec::new();
            split_and(bound, &mut parts);
            let offsets: Vec<usize> = widths.iter().scan(0, |acc, w| {
                let o = *acc;
                *acc += w;
                Some(o)
            }).collect();
            let item_of = |c: usize| offsets.iter().rposition(|&o| o <= c).unwrap_or(0);
            for p in parts {
                if !p.is_simple() || items.is_empty() {
                    late.push(p);
                    continue;
                }
                let used = p.local_columns();
                if used.is_empty() {
                    prefilter.push(p);
                    continue;
                }
                let lo = used.iter().map(|&c| item_of(c)).min().unwrap_or(0);
                let hi = used.iter().map(|&c| item_of(c)).max().unwrap_or(0);
                if lo == hi {
                    push_filter(&mut items[hi], p.shifted(offsets[hi]));
                } else {
                    let step = &mut steps[hi - 1];
                    match equi_key(&p, 0, offsets[hi], offsets[hi] + widths[hi]) {
                        Some((l, r)) => step.keys.push((l, r.shifted(offsets[hi]))),
                        None => step.residual.push(p),
                    }
                }
            }
        }
        let filter = late.into_iter().reduce(|a, b| BExpr::Bin { op: BinaryOp::And, l: Box::new(a), r: Box::new(b) });

        // Grouping.
        let grouped = !s.group_by.is_empty()
            || s.projection.iter().any(|i| matches!(i, SelectItem::Expr { expr, .. } if has_aggregate(expr)))
            || s.having.as_ref().is_some_and(has_aggregate)
            || order_by.iter().any(|o| has_aggregate(&o.expr));
        if grouped {
            let mut keys = Vec::new();
            self.top().clause = "GROUP BY";
            for g in &s.group_by {
                let expr = match g {
                    Expr::Literal(Literal::Int(k)) => match s.projection.get((*k as usize).wrapping_sub(1)) {
                        Some(SelectItem::Expr { expr, .. }) => expr,
                        _ => return Err(format!("GROUP BY position {k} is not in select list")),
                    },
                    other => other,
                };
                let bound = match self.expr(expr) {
                    Ok(b) => b,
                    Err(err) => {
                        // Fall back to an output-column alias.
                        let aliased = match expr {
                            Expr::Column { table: None, name } => s.projection.iter().find_map(|i| match i {
                                SelectItem::Expr { expr, alias: Some(a) } if a.value == name.value => Some(expr),
                                _ => None,
                            }),
                            _ => None,
                        };
                        match aliased {
                            Some(e) => self.expr(e)?,
                            None => return Err(err),
                        }
                    }
                };
                keys.push(bound);
            }
            self.top().keys = Some(keys);
        }
        {
            let f = self.top();
            f.post = true;
            f.allow_agg = grouped;
            f.allow_win = true;
            f.clause = "SELECT";
        }

        // Projection.
        let mut projection = Vec::new();
        let mut out = Vec::new();
        for item in &s.projection {
            match item {
                SelectItem::Wildcard | SelectItem::QualifiedWildcard(_) => {
                    let qual = match item {
                        SelectItem::QualifiedWildcard(q) => Some(q.value.clone()),
                        _ => None,
                    };
                    let frame = self.frames.last().expect("frame");
                    let picked: Vec<(usize, ScopeCol)> = frame
                        .cols
                        .iter()
                        .cloned()
                        .enumerate()
                        .filter(|(_, c)| qual.is_none() || c.qual == qual)
                        .collect();
                    if picked.is_empty() {
                        return Err(match qual {
                            Some(q) => format!("missing FROM-clause entry for table \"{q}\""),
                            None => "SELECT * with no tables specified is not valid".to_string(),
                        });
                    }
                    for (idx, c) in picked {
                        let (e, ty) = self.post_column(idx, &c)?;
                        projection.push(e);
                        out.push(OutColumn { name: c.name.clone(), ty });
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let (e, ty) = self.expr(expr)?;
                    projection.push(e);
                    let name = alias.as_ref().map(|a| a.value.clone()).unwrap_or_else(|| output_name(expr));
                    out.push(OutColumn { name, ty });
                }
            }
        }

        let having = match &s.having {
            Some(h) => {
                self.top().allow_win = false;
                self.top().clause = "HAVING";
                let b = self.bool_expr(h, "HAVING")?;
                self.top().allow_win = true;
                Some(b)
            }
            None => None,
        };

        // ORDER BY over output columns, adding hidden columns when needed.
        let visible = out.len();
        let mut order = Vec::new();
        self.top().clause = "ORDER BY";
        for item in order_by {
            let pos = match &item.expr {
                Expr::Literal(Literal::Int(k)) => {
                    if *k < 1 || *k as usize > out.len() {
                        return Err(format!("ORDER BY position {k} is not in select list"));
                    }
                    *k as usize - 1
                }
                Expr::Column { table: None, name } if out.iter().any(|c| c.name == name.value) => {
                    out.iter().position(|c| c.name == name.value).unwrap_or(0)
                }
                other => {
                    let (e, ty) = self.expr(other)?;
                    match projection.iter().position(|p| *p == e) {
                        Some(p) => p,
                        None if s.distinct => {
                            return Err(
                                "for SELECT DISTINCT, ORDER BY expressions must appear in select list".to_string()
                            )
                        }
                        None => {
                            projection.push(e);
                            out.push(OutColumn { name: "?order?".to_string(), ty });
                            projection.len() - 1
                        }
                    }
                }
            };
            order.push(SortKey { key: pos, desc: item.desc, nulls_first: item.nulls_first.unwrap_or(item.desc) });
        }

        let frame = self.top();
        let grouping = frame.keys.take().map(|keys| Grouping {
            keys: keys.into_iter().map(|(k, _)| k).collect(),
            aggs: std::mem::take(&mut frame.aggs),
        });
        let windows = std::mem::take(&mut frame.windows);
        out.truncate(visible);
        let plan = SelectPlan {
            items,
            widths,
            steps,
            prefilter,
            filter,
            grouping,
            having,
            windows,
            projection,
            distinct: s.distinct,
        };
        Ok((plan, out, order))
    }

    /// A column of the current frame as seen after grouping.
    fn post_column(&mut self, idx: usize, c: &ScopeCol) -> BindResult<(BExpr, SqlType)> {
        let frame = self.frames.last().expect("frame");
        match &frame.keys {
            Some(keys) => keys
                .iter()
                .position(|(k, _)| *k == BExpr::Col { up: 0, idx })
                .map(|k| (BExpr::Col { up: 0, idx: k }, c.ty))
                .ok_or_else(|| group_error(c)),
            None => Ok((BExpr::Col { up: 0, idx }, c.ty)),
        }
    }

    fn bool_expr(&mut self, e: &Expr, clause: &str) -> BindResult<BExpr> {
        let (b, ty) = self.expr(e)?;
        if !matches!(ty, SqlType::Bool | SqlType::Unknown) {
            return Err(format!("argument of {clause} must be type boolean, not type {}", ty.pg_name()));
        }
        Ok(b)
    }

    fn resolve(&mut self, qual: Option<&str>, name: &str) -> BindResult<(BExpr, SqlType)> {
        let depth = self.frames.len();
        for fi in (0..depth).rev() {
            let frame = &self.frames[fi];
            let mut hits = frame
                .cols
                .iter()
                .enumerate()
                .filter(|(_, c)| c.name == name && (qual.is_none() || c.qual.as_deref() == qual));
            let first = hits.next();
            if hits.next().is_some() {
                let shown = match qual {
                    Some(q) => format!("{q}.{name}"),
                    None => name.to_string(),
                };
                return Err(format!("column reference \"{shown}\" is ambiguous"));
            }
            if let Some((c, col)) = first {
                let (idx, ty) = if frame.post {
                    match &frame.keys {
                        Some(keys) => {
                            let k = keys
                                .iter()
                                .position(|(k, _)| *k == BExpr::Col { up: 0, idx: c })
                                .ok_or_else(|| group_error(col))?;
                            (k, col.ty)
                        }
                        None => (c, col.ty),
                    }
                } else {
                    (c, col.ty)
                };
                for s in &mut self.open {
                    if fi < s.root {
                        s.refs.push((fi, idx));
                    }
                }
                return Ok((BExpr::Col { up: depth - 1 - fi, idx }, ty));
            }
            if let Some(q) = qual {
                if frame.cols.iter().any(|c| c.qual.as_deref() == Some(q)) {
                    return Err(format!("column {q}.{name} does not exist"));
                }
            }
        }
        match qual {
            Some(q) => Err(format!("missing FROM-clause entry for table \"{q}\"")),
            None => Err(format!("column \"{name}\" does not exist")),
        }
    }

    fn subquery(&mut self, q: &Query) -> BindResult<(usize, Vec<OutColumn>)> {
        let root = self.frames.len();
        // Bind the subquery with the current frame in its present phase.
        self.open.push(OpenSub { root, refs: Vec::new() });
        let plan = self.query(q);
        let open = self.open.pop().expect("open subquery");
        let plan = plan?;
        let site = root - 1;
        let mut outer_refs: Vec<(usize, usize)> =
            open.refs.into_iter().map(|(fi, idx)| (site - fi, idx)).collect();
        outer_refs.sort_unstable();
        outer_refs.dedup();
        let cols = plan.columns.clone();
        self.subs.push(SubPlan { plan, outer_refs });
        Ok((self.subs.len() - 1, cols))
    }

    fn expr(&mut self, e: &Expr) -> BindResult<(BExpr, SqlType)> {
        // Compound grouping keys: match the whole expression first.
        if let Some(frame) = self.frames.last() {
            if frame.post
                && frame.keys.as_ref().is_some_and(|k| k.iter().any(|(b, _)| !matches!(b, BExpr::Col { .. })))
                && !matches!(e, Expr::Column { .. } | Expr::Literal(_))
                && !has_subquery(e)
                && !has_aggregate(e)
            {
                self.top().post = false;
                let trial = self.expr(e);
                self.top().post = true;
                if let Ok((b, ty)) = trial {
                    let keys = self.frames.last().and_then(|f| f.keys.as_ref()).expect("keys");
                    if let Some(k) = keys.iter().position(|(kb, _)| *kb == b) {
                        return Ok((BExpr::Col { up: 0, idx: k }, ty));
                    }
                }
            }
        }
        match e {
            Expr::Column { table, name } => self.resolve(table.as_ref().map(|t| t.value.as_str()), &name.value),
            Expr::Literal(l) => Ok(literal(l)),
            Expr::Unary { op: UnaryOp::Not, expr } => {
                let (b, ty) = self.expr(expr)?;
                expect_bool(ty, "NOT")?;
                Ok((BExpr::Not(Box::new(b)), SqlType::Bool))
            }
            Expr::Unary { op: UnaryOp::Neg, expr } => {
                let (b, ty) = self.expr(expr)?;
                if !ty.is_numeric() && ty != SqlType::Unknown {
                    return Err(format!("operator does not exist: - {}", ty.pg_name()));
                }
                Ok((BExpr::Neg(Box::new(b)), ty))
            }
            Expr::Binary { op, left, right } => {
                let (l, lt) = self.expr(left)?;
                let (r, rt) = self.expr(right)?;
                let ty = binary_type(*op, lt, rt)?;
                Ok((BExpr::Bin { op: *op, l: Box::new(l), r: Box::new(r) }, ty))
            }
            Expr::IsNull { expr, negated } => {
                let (b, _) = self.expr(expr)?;
                Ok((BExpr::IsNull { e: Box::new(b), negated: *negated }, SqlType::Bool))
            }
            Expr::IsBool { expr, value, negated } => {
                let (b, ty) = self.expr(expr)?;
                expect_bool(ty, "IS")?;
                Ok((BExpr::IsBool { e: Box::new(b), value: *value, negated: *negated }, SqlType::Bool))
            }
            Expr::InList { expr, list, negated } => {
                let (b, ty) = self.expr(expr)?;
                let mut items = Vec::new();
                for x in list {
                    let (xb, xt) = self.expr(x)?;
                    if !ty.comparable(xt) {
                        return Err(format!("operator does not exist: {} = {}", ty.pg_name(), xt.pg_name()));
                    }
                    items.push(xb);
                }
                Ok((BExpr::InList { e: Box::new(b), list: items, negated: *negated }, SqlType::Bool))
            }
            Expr::InSubquery { expr, subquery, negated } => {
                let (b, ty) = self.expr(expr)?;
                let (sub, cols) = self.subquery(subquery)?;
                if cols.len() != 1 {
                    return Err("subquery has too many columns".to_string());
                }
                if !ty.comparable(cols[0].ty) {
                    return Err(format!("operator does not exist: {} = {}", ty.pg_name(), cols[0].ty.pg_name()));
                }
                Ok((BExpr::InSub { e: Box::new(b), sub, negated: *negated }, SqlType::Bool))
            }
            Expr::Between { expr, low, high, negated } => {
                let (b, ty) = self.expr(expr)?;
                let (lo, lt) = self.expr(low)?;
                let (hi, ht) = self.expr(high)?;
                if !ty.comparable(lt) || !ty.comparable(ht) {
                    return Err(format!("operator does not exist: {} >= {}", ty.pg_name(), lt.pg_name()));
                }
                let node = BExpr::Between { e: Box::new(b), lo: Box::new(lo), hi: Box::new(hi), negated: *negated };
                Ok((node, SqlType::Bool))
            }
            Expr::Like { expr, pattern, negated } => {
                let (b, ty) = self.expr(expr)?;
                let (p, pt) = self.expr(pattern)?;
                for t in [ty, pt] {
                    if !matches!(t, SqlType::Text | SqlType::Unknown) {
                        return Err(format!("operator does not exist: {} ~~ {}", ty.pg_name(), pt.pg_name()));
                    }
                }
                Ok((BExpr::Like { e: Box::new(b), pat: Box::new(p), negated: *negated }, SqlType::Bool))
            }
            Expr::Exists { subquery, negated } => {
                let (sub, _) = self.subquery(subquery)?;
                Ok((BExpr::Exists { sub, negated: *negated }, SqlType::Bool))
            }
            Expr::Subquery(q) => {
                let (sub, cols) = self.subquery(q)?;
                if cols.len() != 1 {
                    return Err("subquery must return only one column".to_string());
                }
                Ok((BExpr::Scalar(sub), cols[0].ty))
            }
            Expr::Function { name, args, distinct, star, over } => {
                self.function(&name.value, args, *distinct, *star, over.as_ref())
            }
            Expr::Case { operand, branches, else_result } => {
                let op = match operand {
                    Some(o) => Some(self.expr(o)?),
                    None => None,
                };
                let mut bound = Vec::new();
                let mut ty = SqlType::Unknown;
                for (c, r) in branches {
                    let (cb, ct) = self.expr(c)?;
                    match &op {
                        Some((_, ot)) if !ot.comparable(ct) => {
                            return Err(format!("operator does not exist: {} = {}", ot.pg_name(), ct.pg_name()))
                        }
                        None => expect_bool(ct, "CASE/WHEN")?,
                        _ => {}
                    }
                    let (rb, rt) = self.expr(r)?;
                    ty = ty.unify(rt).ok_or_else(|| {
                        format!("CASE types {} and {} cannot be matched", ty.pg_name(), rt.pg_name())
                    })?;
                    bound.push((cb, rb, rt));
                }
                let els = match else_result {
                    Some(x) => {
                        let (xb, xt) = self.expr(x)?;
                        ty = ty.unify(xt).ok_or_else(|| {
                            format!("CASE types {} and {} cannot be matched", ty.pg_name(), xt.pg_name())
                        })?;
                        Some((xb, xt))
                    }
                    None => None,
                };
                let node = BExpr::Case {
                    operand: op.map(|(b, _)| Box::new(b)),
                    branches: bound.into_iter().map(|(c, r, rt)| (c, widen(r, rt, ty))).collect(),
                    else_result: els.map(|(b, t)| Box::new(widen(b, t, ty))),
                };
                Ok((node, ty))
            }
            Expr::Cast { expr, data_type } => {
                let (b, _) = self.expr(expr)?;
                let ty = SqlType::from_name(data_type)
                    .ok_or_else(|| format!("type \"{}\" does not exist", data_type.to_ascii_lowercase()))?;
                Ok((BExpr::Cast { e: Box::new(b), ty }, ty))
            }
        }
    }

    fn function(
        &mut self,
        name: &str,
        args: &[Expr],
        distinct: bool,
        star: bool,
        over: Option<&WindowSpec>,
    ) -> BindResult<(BExpr, SqlType)> {
        if let Some(w) = over {
            return self.window(name, args, star, w);
        }
        if let Some(f) = agg_func(name, star) {
            let frame = self.frames.last().expect("frame");
            if frame.in_agg {
                return Err("aggregate function calls cannot be nested".to_string());
            }
            if !frame.allow_agg || !frame.post {
                return Err(format!("aggregate functions are not allowed in {}", frame.clause));
            }
            if f != AggFunc::CountStar && args.len() != 1 {
                return Err(format!("function {name} requires exactly one argument"));
            }
            let saved_win = self.top().allow_win;
            {
                let fr = self.top();
                fr.post = false;
                fr.in_agg = true;
                fr.allow_win = false;
            }
            let arg = args.first().map(|a| self.expr(a)).transpose();
            {
                let fr = self.top();
                fr.post = true;
                fr.in_agg = false;
                fr.allow_win = saved_win;
            }
            let arg = arg?;
            let arg_ty = arg.as_ref().map_or(SqlType::Int, |(_, t)| *t);
            if matches!(f, AggFunc::Sum | AggFunc::Avg) && !arg_ty.is_numeric() && arg_ty != SqlType::Unknown {
                return Err(format!("function {name}({}) does not exist", arg_ty.pg_name()));
            }
            let ty = agg_type(f, arg_ty);
            let spec = AggSpec { func: f, arg: arg.map(|(b, _)| b), distinct, ty };
            let fr = self.top();
            let idx = match fr.aggs.iter().position(|a| *a == spec) {
                Some(i) => i,
                None => {
                    fr.aggs.push(spec);
                    fr.aggs.len() - 1
                }
            };
            return Ok((BExpr::Agg(idx), ty));
        }
        let (f, min, max) = scalar_func(name).ok_or_else(|| format!("function {name} does not exist"))?;
        if star || distinct || args.len() < min || args.len() > max {
            return Err(format!("function {name} with {} arguments does not exist", args.len()));
        }
        let mut bound = Vec::new();
        let mut types = Vec::new();
        for a in args {
            let (b, t) = self.expr(a)?;
            bound.push(b);
            types.push(t);
        }
        let sig = || format!("function {name}({}) does not exist", types.iter().map(|t| t.pg_name()).collect::<Vec<_>>().join(", "));
        let text_ok = |t: SqlType| matches!(t, SqlType::Text | SqlType::Unknown);
        let num_ok = |t: SqlType| t.is_numeric() || t == SqlType::Unknown;
        let ty = match f {
            Func::Coalesce | Func::Greatest | Func::Least => {
                let mut ty = SqlType::Unknown;
                for t in &types {
                    ty = ty.unify(*t).ok_or_else(sig)?;
                }
                bound = bound.into_iter().zip(&types).map(|(b, t)| widen(b, *t, ty)).collect();
                ty
            }
            Func::NullIf => {
                if !types[0].comparable(types[1]) {
                    return Err(sig());
                }
                types[0]
            }
            Func::Upper | Func::Lower => {
                if !text_ok(types[0]) {
                    return Err(sig());
                }
                SqlType::Text
            }
            Func::Length => {
                if !text_ok(types[0]) {
                    return Err(sig());
                }
                SqlType::Int
            }
            Func::Substr => {
                if !text_ok(types[0]) || !types[1..].iter().all(|t| matches!(t, SqlType::Int | SqlType::Unknown)) {
                    return Err(sig());
                }
                SqlType::Text
            }
            Func::Abs => {
                if !num_ok(types[0]) {
                    return Err(sig());
                }
                types[0]
            }
            Func::Round | Func::Floor | Func::Ceil => {
                if !num_ok(types[0]) || types.get(1).is_some_and(|t| !matches!(t, SqlType::Int | SqlType::Unknown)) {
                    return Err(sig());
                }
                SqlType::Float
            }
            Func::Mod => {
                if !num_ok(types[0]) || !num_ok(types[1]) {
                    return Err(sig());
                }
                if types[0] == SqlType::Float || types[1] == SqlType::Float {
                    SqlType::Float
                } else {
                    SqlType::Int
                }
            }
            Func::Sleep => {
                if !num_ok(types[0]) {
                    return Err(sig());
                }
                SqlType::Unknown
            }
        };
        Ok((BExpr::Func { f, args: bound }, ty))
    }

    fn window(&mut self, name: &str, args: &[Expr], star: bool, w: &WindowSpec) -> BindResult<(BExpr, SqlType)> {
        let frame = self.frames.last().expect("frame");
        if !frame.allow_win || !frame.post {
            return Err(format!("window functions are not allowed in {}", frame.clause));
        }
        let func = match name {
            "row_number" => WinFunc::RowNumber,
            "rank" => WinFunc::Rank,
            "dense_rank" => WinFunc::DenseRank,
            other => WinFunc::Agg(agg_func(other, star).ok_or_else(|| format!("function {other} is not a window function"))?),
        };
        self.top().allow_win = false;
        let result = (|| {
            let arg = match (func, args.first()) {
                (WinFunc::Agg(AggFunc::CountStar), _) | (WinFunc::RowNumber | WinFunc::Rank | WinFunc::DenseRank, _) => None,
                (WinFunc::Agg(_), Some(a)) => Some(self.expr(a)?),
                (WinFunc::Agg(_), None) => return Err(format!("function {name} requires an argument")),
            };
            let mut partition = Vec::new();
            for p in &w.partition_by {
                partition.push(self.expr(p)?.0);
            }
            let mut order = Vec::new();
            for o in &w.order_by {
                let key = self.expr(&o.expr)?.0;
                order.push(SortKey { key, desc: o.desc, nulls_first: o.nulls_first.unwrap_or(o.desc) });
            }
            let ty = match func {
                WinFunc::Agg(f) => agg_type(f, arg.as_ref().map_or(SqlType::Int, |(_, t)| *t)),
                _ => SqlType::Int,
            };
            Ok(WindowPlan { func, arg: arg.map(|(b, _)| b), partition, order, ty })
        })();
        self.top().allow_win = true;
        let plan = result?;
        let ty = plan.ty;
        let fr = self.top();
        fr.windows.push(plan);
        Ok((BExpr::Win(fr.windows.len() - 1), ty))
    }
}

fn group_error(c: &ScopeCol) -> String {
    let shown = match &c.qual {
        Some(q) => format!("{q}.{}", c.name),
        None => c.name.clone(),
    };
    format!("column \"{shown}\" must appear in the GROUP BY clause or be used in an aggregate function")
}

fn expect_bool(ty: SqlType, what: &str) -> BindResult<()> {
    if matches!(ty, SqlType::Bool | SqlType::Unknown) {
        Ok(())
    } else {
        Err(format!("argument of {what} must be type boolean, not type {}", ty.pg_name()))
    }
}

fn binary_type(op: BinaryOp, l: SqlType, r: SqlType) -> BindResult<SqlType> {
    use BinaryOp::*;
    let no_op = || format!("operator does not exist: {} {} {}", l.pg_name(), op.symbol(), r.pg_name());
    match op {
        And | Or => {
            expect_bool(l, op.symbol())?;
            expect_bool(r, op.symbol())?;
            Ok(SqlType::Bool)
        }
        Eq | NotEq | Lt | LtEq | Gt | GtEq => {
            if l.comparable(r) {
                Ok(SqlType::Bool)
            } else {
                Err(no_op())
            }
        }
        Plus | Minus | Multiply | Divide | Modulo => {
            let ok = |t: SqlType| t.is_numeric() || t == SqlType::Unknown;
            if !ok(l) || !ok(r) {
                return Err(no_op());
            }
            Ok(if l == SqlType::Float || r == SqlType::Float { SqlType::Float } else { SqlType::Int })
        }
        Concat => Ok(SqlType::Text),
    }
}

fn check_duplicate_aliases(a: &[ScopeCol], b: &[ScopeCol]) -> BindResult<()> {
    for q in b.iter().filter_map(|c| c.qual.as_deref()) {
        if a.iter().any(|c| c.qual.as_deref() == Some(q)) {
            return Err(format!("table name \"{q}\" specified more than once"));
        }
    }
    Ok(())
}

/// Splits `l = r` into (left-side key, right-side key) when one operand uses
/// only columns below `split` and the other only columns in `split..end`.
fn equi_key(p: &BExpr, start: usize, split: usize, end: usize) -> Option<(BExpr, BExpr)> {
    let BExpr::Bin { op: BinaryOp::Eq, l, r } = p else { return None };
    if !l.is_simple() || !r.is_simple() {
        return None;
    }
    let side = |e: &BExpr| -> Option<bool> {
        let cols = e.local_columns();
        if cols.is_empty() {
            return None;
        }
        if cols.iter().all(|&c| c >= start && c < split) {
            Some(false)
        } else if cols.iter().all(|&c| c >= split && c < end) {
            Some(true)
        } else {
            None
        }
    };
    match (side(l), side(r)) {
        (Some(false), Some(true)) => Some(((**l).clone(), (**r).clone())),
        (Some(true), Some(false)) => Some(((**r).clone(), (**l).clone())),
        _ => None,
    }
}

fn push_filter(node: &mut FromNode, p: BExpr) {
    match node {
        FromNode::Scan { filter, .. } | FromNode::Derived { filter, .. } => filter.push(p),
        FromNode::Join(j) => j.filter.push(p),
    }
}
