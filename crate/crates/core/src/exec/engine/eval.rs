//! Row-at-a-time evaluation of bound plans.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::sql::ast::{BinaryOp, JoinKind, SetOperator};

use super::catalog::SqlType;
use super::plan::*;
use crate::exec::value::{Row, Value};

pub type EvalResult<T> = Result<T, String>;

struct SubResult {
    rows: Vec<Row>,
    set: HashSet<Value>,
    has_null: bool,
}

#[derive(Clone, Copy)]
struct Env<'a> {
    outer: &'a [&'a [Value]],
    row: &'a [Value],
    aggs: &'a [Value],
    wins: &'a [Value],
}

impl<'a> Env<'a> {
    fn new(outer: &'a [&'a [Value]], row: &'a [Value]) -> Self {
        Env { outer, row, aggs: &[], wins: &[] }
    }
}

pub struct Executor<'p> {
    prog: &'p Program,
    memo: RefCell<HashMap<(usize, Vec<Value>), Rc<SubResult>>>,
}

impl<'p> Executor<'p> {
    pub fn new(prog: &'p Program) -> Self {
        Executor { prog, memo: RefCell::new(HashMap::new()) }
    }

    pub fn run(&self) -> EvalResult<Vec<Row>> {
        self.query(&self.prog.root, &[])
    }

    fn query(&self, q: &QueryPlan, outer: &[&[Value]]) -> EvalResult<Vec<Row>> {
        let mut rows = self.set(&q.body, outer)?;
        if !q.order.is_empty() {
            rows.sort_by(|a, b| compare_rows(a, b, &q.order));
        }
        let width = q.columns.len();
        Ok(rows
            .into_iter()
            .skip(q.offset)
            .take(q.limit.unwrap_or(usize::MAX))
            .map(|mut r| {
                r.truncate(width);
                r
            })
            .collect())
    }

    fn set(&self, s: &SetPlan, outer: &[&[Value]]) -> EvalResult<Vec<Row>> {
        match s {
            SetPlan::Select(sel) => self.select(sel, outer),
            SetPlan::Query(q) => self.query(q, outer),
            SetPlan::SetOp { op, all, left, right, widen_left, widen_right } => {
                let mut l = self.set(left, outer)?;
                let mut r = self.set(right, outer)?;
                widen_rows(&mut l, widen_left);
                widen_rows(&mut r, widen_right);
                Ok(set_op(*op, *all, l, r))
            }
        }
    }

    fn from_node(&self, node: &FromNode, outer: &[&[Value]]) -> EvalResult<Vec<Row>> {
        match node {
            FromNode::Scan { table, filter, .. } => {
                let mut out = Vec::new();
                for r in &table.rows {
                    if self.all_true(filter, Env::new(outer, r))? {
                        out.push(r.clone());
                    }
                }
                Ok(out)
            }
            FromNode::Derived { plan, filter, .. } => {
                let rows = self.query(plan, outer)?;
                self.keep(rows, filter, outer)
            }
            FromNode::Join(j) => {
                let l = self.from_node(&j.left, outer)?;
                let r = self.from_node(&j.right, outer)?;
                let residual: Vec<BExpr> = j.residual.iter().cloned().collect();
                let rows = self.join(j.kind, l, r, j.left_width, j.right_width, &j.keys, &residual, outer)?;
                self.keep(rows, &j.filter, outer)
            }
        }
    }

    fn keep(&self, rows: Vec<Row>, filter: &[BExpr], outer: &[&[Value]]) -> EvalResult<Vec<Row>> {
        if filter.is_empty() {
            return Ok(rows);
        }
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if self.all_true(filter, Env::new(outer, &r))? {
                out.push(r);
            }
        }
        Ok(out)
    }

    fn all_true(&self, preds: &[BExpr], env: Env<'_>) -> EvalResult<bool> {
        for p in preds {
            if !matches!(self.eval(p, env)?, Value::Bool(true)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        kind: JoinKind,
        left: Vec<Row>,
        right: Vec<Row>,
        lw: usize,
        rw: usize,
        keys: &[(BExpr, BExpr)],
        residual: &[BExpr],
        outer: &[&[Value]],
    ) -> EvalResult<Vec<Row>> {
        let mut out = Vec::new();
        let mut right_matched = vec![false; right.len()];
        let index: Option<HashMap<Vec<Value>, Vec<usize>>> = if keys.is_empty() {
            None
        } else {
            let mut map: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
            for (i, r) in right.iter().enumerate() {
                let k = self.key_of(keys.iter().map(|(_, rk)| rk), Env::new(outer, r))?;
                if let Some(k) = k {
                    map.entry(k).or_default().push(i);
                }
            }
            Some(map)
        };
        let all: Vec<usize> = (0..right.len()).collect();
        for l in &left {
            let candidates: &[usize] = match &index {
                Some(map) => match self.key_of(keys.iter().map(|(lk, _)| lk), Env::new(outer, l))? {
                    Some(k) => map.get(&k).map(Vec::as_slice).unwrap_or(&[]),
                    None => &[],
                },
                None => &all,
            };
            let mut matched = false;
            for &ri in candidates {
                let mut combined = Vec::with_capacity(lw + rw);
                combined.extend_from_slice(l);
                combined.extend_from_slice(&right[ri]);
                if self.all_true(residual, Env::new(outer, &combined))? {
                    matched = true;
                    right_matched[ri] = true;
                    out.push(combined);
                }
            }
            if !matched && matches!(kind, JoinKind::Left | JoinKind::Full) {
                let mut row = l.clone();
                row.extend(std::iter::repeat_n(Value::Null, rw));
                out.push(row);
            }
        }
        if matches!(kind, JoinKind::Right | JoinKind::Full) {
            for (ri, r) in right.iter().enumerate() {
                if !right_matched[ri] {
                    let mut row: Row = std::iter::repeat_n(Value::Null, lw).collect();
                    row.extend_from_slice(r);
                    out.push(row);
                }
            }
        }
        Ok(out)
    }

    /// Join key values, or `None` if any is NULL (NULL keys never match).
    fn key_of<'e>(&self, exprs: impl Iterator<Item = &'e BExpr>, env: Env<'_>) -> EvalResult<Option<Vec<Value>>> {
        let mut k = Vec::new();
        for e in exprs {
            let v = self.eval(e, env)?;
            if v.is_null() {
                return Ok(None);
            }
            k.push(v);
        }
        Ok(Some(k))
    }

    fn select(&self, s: &SelectPlan, outer: &[&[Value]]) -> EvalResult<Vec<Row>> {
        // FROM and WHERE.
        let mut acc: Vec<Row> = match s.items.first() {
            Some(first) => self.from_node(first, outer)?,
            None => vec![Vec::new()],
        };
        acc = self.keep(acc, &s.prefilter, outer)?;
        let mut width = s.widths.first().copied().unwrap_or(0);
        for (k, step) in s.steps.iter().enumerate() {
            let right = self.from_node(&s.items[k + 1], outer)?;
            let rw = s.widths[k + 1];
            acc = self.join(JoinKind::Inner, acc, right, width, rw, &step.keys, &step.residual, outer)?;
            width += rw;
        }
        if let Some(f) = &s.filter {
            acc = self.keep(acc, std::slice::from_ref(f), outer)?;
        }

        // Grouping: post rows with their aggregate values.
        let post: Vec<(Row, Vec<Value>)> = match &s.grouping {
            Some(g) => {
                let mut groups: Vec<(Row, Vec<usize>)> = Vec::new();
                let mut index: HashMap<Row, usize> = HashMap::new();
                for (i, r) in acc.iter().enumerate() {
                    let env = Env::new(outer, r);
                    let key = g.keys.iter().map(|k| self.eval(k, env)).collect::<EvalResult<Row>>()?;
                    match index.get(&key) {
                        Some(&gi) => groups[gi].1.push(i),
                        None => {
                            index.insert(key.clone(), groups.len());
                            groups.push((key, vec![i]));
                        }
                    }
                }
                if groups.is_empty() && g.keys.is_empty() {
                    groups.push((Vec::new(), Vec::new()));
                }
                let mut post = Vec::with_capacity(groups.len());
                for (key, members) in groups {
                    let mut aggs = Vec::with_capacity(g.aggs.len());
                    for spec in &g.aggs {
                        aggs.push(self.aggregate(spec, &members, &acc, outer)?);
                    }
                    let env = Env { outer, row: &key, aggs: &aggs, wins: &[] };
                    let keep = match &s.having {
                        Some(h) => matches!(self.eval(h, env)?, Value::Bool(true)),
                        None => true,
                    };
                    if keep {
                        post.push((key, aggs));
                    }
                }
                post
            }
            None => acc.into_iter().map(|r| (r, Vec::new())).collect(),
        };

        let wins = self.windows(&s.windows, &post, outer)?;

        let mut out = Vec::with_capacity(post.len());
        for (i, (row, aggs)) in post.iter().enumerate() {
            let env = Env { outer, row, aggs, wins: wins.get(i).map(Vec::as_slice).unwrap_or(&[]) };
            let r = s.projection.iter().map(|p| self.eval(p, env)).collect::<EvalResult<Row>>()?;
            out.push(r);
        }
        if s.distinct {
            out = dedupe(out);
        }
        Ok(out)
    }

    fn aggregate(&self, spec: &AggSpec, members: &[usize], rows: &[Row], outer: &[&[Value]]) -> EvalResult<Value> {
        if spec.func == AggFunc::CountStar {
            return Ok(Value::Int(members.len() as i64));
        }
        let arg = spec.arg.as_ref().expect("aggregate argument");
        let mut vals = Vec::with_capacity(members.len());
        for &m in members {
            let v = self.eval(arg, Env::new(outer, &rows[m]))?;
            if !v.is_null() {
                vals.push(v);
            }
        }
        if spec.distinct {
            vals = dedupe_values(vals);
        }
        fold_aggregate(spec.func, &vals)
    }

    fn windows(&self, plans: &[WindowPlan], post: &[(Row, Vec<Value>)], outer: &[&[Value]]) -> EvalResult<Vec<Vec<Value>>> {
        if plans.is_empty() {
            return Ok(Vec::new());
        }
        let mut result: Vec<Vec<Value>> = vec![Vec::with_capacity(plans.len()); post.len()];
        for w in plans {
            let mut parts: Vec<Vec<usize>> = Vec::new();
            let mut index: HashMap<Row, usize> = HashMap::new();
            let mut order_keys = Vec::with_capacity(post.len());
            let mut args = Vec::with_capacity(post.len());
            for (i, (row, aggs)) in post.iter().enumerate() {
                let env = Env { outer, row, aggs, wins: &[] };
                let pk = w.partition.iter().map(|e| self.eval(e, env)).collect::<EvalResult<Row>>()?;
                let ok = w.order.iter().map(|o| self.eval(&o.key, env)).collect::<EvalResult<Row>>()?;
                order_keys.push(ok);
                args.push(match &w.arg {
                    Some(a) => self.eval(a, env)?,
                    None => Value::Null,
                });
                match index.get(&pk) {
                    Some(&p) => parts[p].push(i),
                    None => {
                        index.insert(pk, parts.len());
                        parts.push(vec![i]);
                    }
                }
            }
            let sort_spec: Vec<SortKey<usize>> =
                w.order.iter().enumerate().map(|(i, o)| SortKey { key: i, desc: o.desc, nulls_first: o.nulls_first }).collect();
            let mut values = vec![Value::Null; post.len()];
            for mut members in parts {
                members.sort_by(|&a, &b| compare_rows(&order_keys[a], &order_keys[b], &sort_spec));
                // Peer groups: runs of equal order keys.
                let mut start = 0;
                let mut dense = 0;
                let mut running: Vec<Value> = Vec::new();
                while start < members.len() {
                    let mut end = start + 1;
                    while end < members.len() && order_keys[members[end]] == order_keys[members[start]] {
                        end += 1;
                    }
                    dense += 1;
                    for (pos, &m) in members.iter().enumerate().take(end).skip(start) {
                        values[m] = match w.func {
                            WinFunc::RowNumber => Value::Int(pos as i64 + 1),
                            WinFunc::Rank => Value::Int(start as i64 + 1),
                            WinFunc::DenseRank => Value::Int(dense),
                            WinFunc::Agg(_) => Value::Null,
                        };
                    }
                    if let WinFunc::Agg(f) = w.func {
                        let frame_end = if w.order.is_empty() { members.len() } else { end };
                        running.clear();
                        let mut count = 0;
                        for &m in &members[..frame_end] {
                            count += 1;
                            if !args[m].is_null() {
                                running.push(args[m].clone());
                            }
                        }
                        let v = if f == AggFunc::CountStar { Value::Int(count) } else { fold_aggregate(f, &running)? };
                        for &m in &members[start..end] {
                            values[m] = v.clone();
                        }
                        if w.order.is_empty() {
                            for &m in &members {
                                values[m] = v.clone();
                            }
                            break;
                        }
                    }
                    start = end;
                }
            }
            for (i, v) in values.into_iter().enumerate() {
                result[i].push(v);
            }
        }
        Ok(result)
    }

    fn subquery(&self, id: usize, env: Env<'_>) -> EvalResult<Rc<SubResult>> {
        let sub = &self.prog.subs[id];
        let key_vals: Vec<Value> = sub
            .outer_refs
            .iter()
            .map(|&(up, idx)| lookup(env, up, idx).clone())
            .collect();
        let key = (id, key_vals);
        if let Some(hit) = self.memo.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let mut stack: Vec<&[Value]> = env.outer.to_vec();
        stack.push(env.row);
        let rows = self.query(&sub.plan, &stack)?;
        let mut set = HashSet::new();
        let mut has_null = false;
        if sub.plan.columns.len() == 1 {
            for r in &rows {
                if r[0].is_null() {
                    has_null = true;
                } else {
                    set.insert(r[0].clone());
                }
            }
        }
        let res = Rc::new(SubResult { rows, set, has_null });
        self.memo.borrow_mut().insert(key, res.clone());
        Ok(res)
    }

    fn eval(&self, e: &BExpr, env: Env<'_>) -> EvalResult<Value> {
        Ok(match e {
            BExpr::Col { up, idx } => lookup(env, *up, *idx).clone(),
            BExpr::Lit(v) => v.clone(),
            BExpr::Agg(i) => env.aggs[*i].clone(),
            BExpr::Win(i) => env.wins[*i].clone(),
            BExpr::Not(x) => match self.eval(x, env)? {
                Value::Bool(b) => Value::Bool(!b),
                _ => Value::Null,
            },
            BExpr::Neg(x) => match self.eval(x, env)? {
                Value::Int(v) => Value::Int(v.checked_neg().ok_or("integer out of range")?),
                Value::Float(v) => Value::Float(-v),
                _ => Value::Null,
            },
            BExpr::Bin { op: BinaryOp::And, l, r } => {
                let a = self.eval(l, env)?;
                if matches!(a, Value::Bool(false)) {
                    return Ok(Value::Bool(false));
                }
                match (a, self.eval(r, env)?) {
                    (_, Value::Bool(false)) => Value::Bool(false),
                    (Value::Bool(true), Value::Bool(true)) => Value::Bool(true),
                    _ => Value::Null,
                }
            }
            BExpr::Bin { op: BinaryOp::Or, l, r } => {
                let a = self.eval(l, env)?;
                if matches!(a, Value::Bool(true)) {
                    return Ok(Value::Bool(true));
                }
                match (a, self.eval(r, env)?) {
                    (_, Value::Bool(true)) => Value::Bool(true),
                    (Value::Bool(false), Value::Bool(false)) => Value::Bool(false),
                    _ => Value::Null,
                }
            }
            BExpr::Bin { op, l, r } => {
                let a = self.eval(l, env)?;
                let b = self.eval(r, env)?;
                binary(*op, &a, &b)?
            }
            BExpr::IsNull { e, negated } => Value::Bool(self.eval(e, env)?.is_null() != *negated),
            BExpr::IsBool { e, value, negated } => {
                let hit = matches!(self.eval(e, env)?, Value::Bool(b) if b == *value);
                Value::Bool(hit != *negated)
            }
            BExpr::InList { e, list, negated } => {
                let v = self.eval(e, env)?;
                let mut saw_null = v.is_null();
                let mut found = false;
                if !v.is_null() {
                    for x in list {
                        let xv = self.eval(x, env)?;
                        match v.sql_cmp(&xv) {
                            Some(Ordering::Equal) => {
                                found = true;
                                break;
                            }
                            None => saw_null = true,
                            _ => {}
                        }
                    }
                }
                in_result(found, saw_null && !found, *negated, list.is_empty())
            }
            BExpr::InSub { e, sub, negated } => {
                let v = self.eval(e, env)?;
                let res = self.subquery(*sub, env)?;
                if res.rows.is_empty() {
                    return Ok(Value::Bool(*negated));
                }
                if v.is_null() {
                    return Ok(Value::Null);
                }
                let found = res.set.contains(&v);
                in_result(found, res.has_null && !found, *negated, false)
            }
            BExpr::Between { e, lo, hi, negated } => {
                let v = self.eval(e, env)?;
                let a = binary(BinaryOp::GtEq, &v, &self.eval(lo, env)?)?;
                let b = binary(BinaryOp::LtEq, &v, &self.eval(hi, env)?)?;
                let both = match (a, b) {
                    (Value::Bool(false), _) | (_, Value::Bool(false)) => Value::Bool(false),
                    (Value::Bool(true), Value::Bool(true)) => Value::Bool(true),
                    _ => Value::Null,
                };
                match (both, negated) {
                    (Value::Bool(x), true) => Value::Bool(!x),
                    (other, _) => other,
                }
            }
            BExpr::Like { e, pat, negated } => match (self.eval(e, env)?, self.eval(pat, env)?) {
                (Value::Text(s), Value::Text(p)) => Value::Bool(like(&s, &p) != *negated),
                _ => Value::Null,
            },
            BExpr::Exists { sub, negated } => Value::Bool(self.subquery(*sub, env)?.rows.is_empty() == *negated),
            BExpr::Scalar(sub) => {
                let res = self.subquery(*sub, env)?;
                match res.rows.len() {
                    0 => Value::Null,
                    1 => res.rows[0][0].clone(),
                    _ => return Err("more than one row returned by a subquery used as an expression".to_string()),
                }
            }
            BExpr::Func { f, args } => {
                let vals = args.iter().map(|a| self.eval(a, env)).collect::<EvalResult<Vec<_>>>()?;
                func(*f, vals)?
            }
            BExpr::Case { operand, branches, else_result } => {
                let op = operand.as_ref().map(|o| self.eval(o, env)).transpose()?;
                for (c, r) in branches {
                    let cv = self.eval(c, env)?;
                    let hit = match &op {
                        Some(ov) => ov.sql_cmp(&cv) == Some(Ordering::Equal),
                        None => matches!(cv, Value::Bool(true)),
                    };
                    if hit {
                        return self.eval(r, env);
                    }
                }
                match else_result {
                    Some(x) => self.eval(x, env)?,
                    None => Value::Null,
                }
            }
            BExpr::Cast { e, ty } => cast(self.eval(e, env)?, *ty)?,
        })
    }
}

fn lookup<'a>(env: Env<'a>, up: usize, idx: usize) -> &'a Value {
    if up == 0 {
        &env.row[idx]
    } else {
        &env.outer[env.outer.len() - up][idx]
    }
}

fn in_result(found: bool, unknown: bool, negated: bool, empty: bool) -> Value {
    if empty {
        return Value::Bool(negated);
    }
    if unknown {
        return Value::Null;
    }
    Value::Bool(found != negated)
}

fn widen_rows(rows: &mut [Row], cols: &[usize]) {
    for r in rows {
        for &c in cols {
            if let Value::Int(v) = r[c] {
                r[c] = Value::Float(v as f64);
            }
        }
    }
}

pub(crate) fn compare_rows(a: &[Value], b: &[Value], keys: &[SortKey<usize>]) -> Ordering {
    for k in keys {
        let (x, y) = (&a[k.key], &b[k.key]);
        let ord = match (x.is_null(), y.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => if k.nulls_first { Ordering::Less } else { Ordering::Greater },
            (false, true) => if k.nulls_first { Ordering::Greater } else { Ordering::Less },
            _ => {
                let o = x.sort_cmp(y);
                if k.desc { o.reverse() } else { o }
            }
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

fn dedupe(rows: Vec<Row>) -> Vec<Row> {
    let mut seen = HashSet::new();
    rows.into_iter().filter(|r| seen.insert(r.clone())).collect()
}

fn dedupe_values(vals: Vec<Value>) -> Vec<Value> {
    let mut seen = HashSet::new();
    vals.into_iter().filter(|v| seen.insert(v.clone())).collect()
}

fn set_op(op: SetOperator, all: bool, left: Vec<Row>, right: Vec<Row>) -> Vec<Row> {
    match op {
        SetOperator::Union => {
            let mut out = left;
            out.extend(right);
            if all { out } else { dedupe(out) }
        }
        SetOperator::Intersect | SetOperator::Except => {
            let mut counts: HashMap<Row, usize> = HashMap::new();
            for r in right {
                *counts.entry(r).or_default() += 1;
            }
            let left = if all { left } else { dedupe(left) };
            let mut out = Vec::new();
            for r in left {
                let c = counts.get_mut(&r);
                let present = c.as_ref().is_some_and(|c| **c > 0);
                if let (true, Some(c)) = (all, c) {
                    if *c > 0 {
                        *c -= 1;
                    }
                }
                let keep = if op == SetOperator::Intersect { present } else { !present };
                if keep {
                    out.push(r);
                }
            }
            out
        }
    }
}

pub(crate) fn fold_aggregate(f: AggFunc, vals: &[Value]) -> EvalResult<Value> {
    Ok(match f {
        AggFunc::CountStar | AggFunc::Count => Value::Int(vals.len() as i64),
        AggFunc::Sum | AggFunc::Avg => {
            if vals.is_empty() {
                return Ok(Value::Null);
            }
            let all_int = vals.iter().all(|v| matches!(v, Value::Int(_)));
            if all_int {
                let mut s: i64 = 0;
                for v in vals {
                    if let Value::Int(i) = v {
                        s = s.checked_add(*i).ok_or("bigint out of range")?;
                    }
                }
                if f == AggFunc::Sum {
                    Value::Int(s)
                } else {
                    Value::Float(s as f64 / vals.len() as f64)
                }
            } else {
                let s: f64 = vals.iter().filter_map(Value::as_f64).sum();
                if f == AggFunc::Sum { Value::Float(s) } else { Value::Float(s / vals.len() as f64) }
            }
        }
        AggFunc::Min => vals.iter().min_by(|a, b| a.sort_cmp(b)).cloned().unwrap_or(Value::Null),
        AggFunc::Max => vals.iter().max_by(|a, b| a.sort_cmp(b)).cloned().unwrap_or(Value::Null),
    })
}

fn binary(op: BinaryOp, a: &Value, b: &Value) -> EvalResult<Value> {
    use BinaryOp::*;
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    Ok(match op {
        Eq | NotEq | Lt | LtEq | Gt | GtEq => {
            let Some(o) = a.sql_cmp(b) else {
                return Err(format!("operator does not exist: {} {} {}", a.type_name(), op.symbol(), b.type_name()));
            };
            Value::Bool(match op {
                Eq => o == Ordering::Equal,
                NotEq => o != Ordering::Equal,
                Lt => o == Ordering::Less,
                LtEq => o != Ordering::Greater,
                Gt => o == Ordering::Greater,
                _ => o != Ordering::Less,
            })
        }
        Concat => Value::Text(format!("{}{}", to_text(a), to_text(b))),
        Plus | Minus | Multiply | Divide | Modulo => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Plus => x.checked_add(*y),
                    Minus => x.checked_sub(*y),
                    Multiply => x.checked_mul(*y),
                    Divide | Modulo if *y == 0 => return Err("division by zero".to_string()),
                    Divide => x.checked_div(*y),
                    _ => x.checked_rem(*y),
                };
                Value::Int(r.ok_or("integer out of range")?)
            }
            _ => {
                let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                    return Err(format!("operator does not exist: {} {} {}", a.type_name(), op.symbol(), b.type_name()));
                };
                Value::Float(match op {
                    Plus => x + y,
                    Minus => x - y,
                    Multiply => x * y,
                    Divide | Modulo if y == 0.0 => return Err("division by zero".to_string()),
                    Divide => x / y,
                    _ => x % y,
                })
            }
        },
        And | Or => unreachable!("handled by the evaluator"),
    })
}

/// Text form used by casts and concatenation.
pub(crate) fn to_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => pg_float_text(*f),
        Value::Text(s) => s.clone(),
        Value::Bool(b) => if *b { "true" } else { "false" }.to_string(),
    }
}

/// Shortest round-trip text in the style of PostgreSQL's float8 output.
pub fn pg_float_text(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Infinity" } else { "-Infinity" }.to_string();
    }
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        return format!("{v}");
    }
    let s = format!("{v:e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mant}e{sign}{digits:0>2}")
}

fn cast(v: Value, ty: SqlType) -> EvalResult<Value> {
    if v.is_null() {
        return Ok(Value::Null);
    }
    Ok(match ty {
        SqlType::Unknown => v,
        SqlType::Int => match v {
            Value::Int(i) => Value::Int(i),
            Value::Float(f) => {
                let r = f.round_ties_even();
                if !r.is_finite() || r.abs() > i64::MAX as f64 {
                    return Err("integer out of range".to_string());
                }
                Value::Int(r as i64)
            }
            Value::Bool(b) => Value::Int(i64::from(b)),
            Value::Text(s) => Value::Int(
                s.trim().parse().map_err(|_| format!("invalid input syntax for type integer: \"{s}\""))?,
            ),
            Value::Null => Value::Null,
        },
        SqlType::Float => match v {
            Value::Int(i) => Value::Float(i as f64),
            Value::Float(f) => Value::Float(f),
            Value::Text(s) => Value::Float(
                s.trim()
                    .parse()
                    .map_err(|_| format!("invalid input syntax for type double precision: \"{s}\""))?,
            ),
            Value::Bool(_) => return Err("cannot cast type boolean to double precision".to_string()),
            Value::Null => Value::Null,
        },
        SqlType::Text => Value::Text(to_text(&v)),
        SqlType::Bool => match v {
            Value::Bool(b) => Value::Bool(b),
            Value::Int(i) => Value::Bool(i != 0),
            Value::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "t" | "true" | "yes" | "on" | "1" => Value::Bool(true),
                "f" | "false" | "no" | "off" | "0" => Value::Bool(false),
                _ => return Err(format!("invalid input syntax for type boolean: \"{s}\"")),
            },
            Value::Float(_) => return Err("cannot cast type double precision to boolean".to_string()),
            Value::Null => Value::Null,
        },
    })
}

fn round_half_away(x: f64, digits: i64) -> f64 {
    let m = 10f64.powi(digits as i32);
    (x * m).round() / m
}

fn func(f: Func, args: Vec<Value>) -> EvalResult<Value> {
    let null_in = args.iter().any(Value::is_null);
    Ok(match f {
        Func::Coalesce => args.into_iter().find(|v| !v.is_null()).unwrap_or(Value::Null),
        Func::Greatest | Func::Least => {
            let it = args.into_iter().filter(|v| !v.is_null());
            let pick = if f == Func::Greatest { it.max_by(|a, b| a.sort_cmp(b)) } else { it.min_by(|a, b| a.sort_cmp(b)) };
            pick.unwrap_or(Value::Null)
        }
        Func::NullIf => {
            if args[0].sql_cmp(&args[1]) == Some(Ordering::Equal) {
                Value::Null
            } else {
                args[0].clone()
            }
        }
        Func::Sleep => Value::Null,
        _ if null_in => Value::Null,
        Func::Upper => Value::Text(to_text(&args[0]).to_uppercase()),
        Func::Lower => Value::Text(to_text(&args[0]).to_lowercase()),
        Func::Length => Value::Int(to_text(&args[0]).chars().count() as i64),
        Func::Abs => match &args[0] {
            Value::Int(i) => Value::Int(i.checked_abs().ok_or("integer out of range")?),
            other => Value::Float(other.as_f64().unwrap_or(0.0).abs()),
        },
        Func::Round => {
            let x = args[0].as_f64().unwrap_or(0.0);
            match args.get(1) {
                Some(Value::Int(d)) => Value::Float(round_half_away(x, *d)),
                _ => Value::Float(x.round_ties_even()),
            }
        }
        Func::Floor => Value::Float(args[0].as_f64().unwrap_or(0.0).floor()),
        Func::Ceil => Value::Float(args[0].as_f64().unwrap_or(0.0).ceil()),
        Func::Mod => binary(BinaryOp::Modulo, &args[0], &args[1])?,
        Func::Substr => {
            let s: Vec<char> = to_text(&args[0]).chars().collect();
            let start = match args[1] {
                Value::Int(i) => i,
                _ => 1,
            };
            let end = match args.get(2) {
                Some(Value::Int(n)) if *n < 0 => return Err("negative substring length not allowed".to_string()),
                Some(Value::Int(n)) => start.saturating_add(*n),
                _ => i64::MAX,
            };
            let lo = (start.max(1) - 1) as usize;
            let hi = (end.max(1) - 1).min(s.len() as i64) as usize;
            Value::Text(if lo < hi { s[lo..hi].iter().collect() } else { String::new() })
        }
    })
}

/// SQL LIKE with `%`, `_` and backslash escapes.
pub fn like(s: &str, p: &str) -> bool {
    let s: Vec<char> = s.chars().collect();
    let p: Vec<char> = p.chars().collect();
    // Iterative wildcard matching with single-star backtracking.
    let (mut si, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() {
            match p[pi] {
                '%' => {
                    star = Some((pi, si));
                    pi += 1;
                    continue;
                }
                '_' => {
                    si += 1;
                    pi += 1;
                    continue;
                }
                '\\' if pi + 1 < p.len() => {
                    if p[pi + 1] == s[si] {
                        si += 1;
                        pi += 2;
                        continue;
                    }
                }
                c if c == s[si] => {
                    si += 1;
                    pi += 1;
                    continue;
                }
                _ => {}
            }
        }
        match star {
            Some((sp, ss)) => {
                pi = sp + 1;
                si = ss + 1;
                star = Some((sp, ss + 1));
            }
            None => return false,
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}
