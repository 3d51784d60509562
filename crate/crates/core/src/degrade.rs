//! Library of result-preserving rewrites that make a query more expensive.
//!
//! Every strategy has a syntactic applicability test (the number of places
//! in the query where it can fire) and a deterministic rewrite. The seed
//! passed to [`apply`] only picks the site when there is more than one.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::engine::{Database, Table};
use crate::sql::ast::*;
use crate::sql::visit::{
    contains_aggregate, contains_subquery, contains_window, subqueries_of, visit_exprs_mut, visit_subqueries_mut,
    walk_deep, walk_shallow,
};
use crate::sql::{parse_query, SqlTree};

pub const RULE_GUIDED_TEMPLATE: &str = include_str!("../prompts/rule_guided.txt");
pub const FREE_FORM_TEMPLATE: &str = include_str!("../prompts/free_form.txt");
pub const REPAIR_TEMPLATE: &str = include_str!("../prompts/repair.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("strategy {0} has no site in this query")]
    NotApplicable(String),
    #[error("strategy {strategy} produced unparsable SQL: {message}")]
    Unparsable { strategy: String, message: String },
}

type SiteFn = fn(&mut Query, &Database, Option<usize>) -> usize;

/// One entry of the library.
#[derive(Clone, Copy)]
pub struct Strategy {
    pub id: &'static str,
    pub description: &'static str,
    /// Rewrites whose slowdown is small enough that a lineage made only of
    /// them is treated as suspect by the corpus audit.
    pub noise: bool,
    pub prompt_template: &'static str,
    sites: SiteFn,
}

impl std::fmt::Debug for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Strategy").field("id", &self.id).finish()
    }
}

impl PartialEq for Strategy {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Strategy {
    /// Number of places in `q` where the rewrite can be applied.
    pub fn site_count(&self, q: &SqlTree, schema: &Database) -> usize {
        let mut copy = q.query().clone();
        (self.sites)(&mut copy, schema, None)
    }

    pub fn is_applicable(&self, q: &SqlTree, schema: &Database) -> bool {
        self.site_count(q, schema) > 0
    }

    pub fn apply(&self, q: &SqlTree, schema: &Database, seed: u64) -> Result<SqlTree, TransformError> {
        let n = self.site_count(q, schema);
        if n == 0 {
            return Err(TransformError::NotApplicable(self.id.to_string()));
        }
        let site = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n);
        let mut out = q.query().clone();
        (self.sites)(&mut out, schema, Some(site));
        let text = crate::sql::render_query(&out, q.dialect());
        let reparsed = parse_query(&text, q.dialect())
            .map_err(|e| TransformError::Unparsable { strategy: self.id.to_string(), message: e.to_string() })?;
        Ok(SqlTree::from_query(reparsed, q.dialect()))
    }

    /// Prompt asking a model to perform this rewrite.
    pub fn prompt(&self, schema_ddl: &str, parent_sql: &str) -> String {
        fill_template(self.prompt_template, &[
            ("schema", schema_ddl),
            ("parent_sql", parent_sql),
            ("strategy_description", self.description),
        ])
    }
}

/// Substitutes `{name}` placeholders.
pub fn fill_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

pub fn builtin_library() -> Vec<Strategy> {
    vec![
        Strategy {
            id: "join_to_exists",
            description: "Replace an inner join against a table looked up by its primary key with a correlated EXISTS subquery in the WHERE clause, moving that table's filters into the subquery.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: join_to_exists,
        },
        Strategy {
            id: "predicate_pullup",
            description: "Wrap the FROM clause in a derived table that selects every column, and apply the WHERE filters only on top of that derived table.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: predicate_pullup,
        },
        Strategy {
            id: "redundant_distinct",
            description: "Add DISTINCT to a select whose rows are already unique or whose duplicates cannot matter, such as an IN or EXISTS subquery.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: redundant_distinct,
        },
        Strategy {
            id: "subquery_order_by",
            description: "Add an ORDER BY to a subquery that has no LIMIT, forcing a sort whose order is never used.",
            noise: true,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: subquery_order_by,
        },
        Strategy {
            id: "self_wrap",
            description: "Wrap the whole query as SELECT * FROM (query) AS alias.",
            noise: true,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: self_wrap,
        },
        Strategy {
            id: "in_list_to_or",
            description: "Expand an IN list of constants into a chain of equality comparisons joined by OR.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: in_list_to_or,
        },
        Strategy {
            id: "scalar_subquery_lookup",
            description: "Replace a projected column with a correlated scalar subquery that fetches the same column again by primary key.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: scalar_subquery_lookup,
        },
        Strategy {
            id: "union_split",
            description: "Split a disjunctive WHERE condition A OR B into two selects combined with UNION ALL, the second excluding rows where A is true.",
            noise: false,
            prompt_template: RULE_GUIDED_TEMPLATE,
            sites: union_split,
        },
    ]
}

pub fn strategy_by_id(id: &str) -> Option<Strategy> {
    builtin_library().into_iter().find(|s| s.id == id)
}

/// Strategy ids applied along a root-to-node path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyHistory {
    pub applied_ids: Vec<String>,
}

impl StrategyHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.applied_ids.iter().any(|x| x == id)
    }

    pub fn with(&self, id: &str) -> Self {
        let mut next = self.clone();
        next.applied_ids.push(id.to_string());
        next
    }
}

/// Library members that apply to `q` and have not been used on this path.
pub fn applicable_strategies(q: &SqlTree, history: &StrategyHistory, schema: &Database) -> Vec<Strategy> {
    builtin_library().into_iter().filter(|s| !history.contains(s.id) && s.is_applicable(q, schema)).collect()
}

pub fn apply(strategy: &Strategy, q: &SqlTree, schema: &Database, seed: u64) -> Result<SqlTree, TransformError> {
    strategy.apply(q, schema, seed)
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    id: &'a str,
    description: &'a str,
    noise: bool,
    prompt_template: &'a str,
}

pub fn manifest_json() -> String {
    let lib = builtin_library();
    let entries: Vec<ManifestEntry> = lib
        .iter()
        .map(|s| ManifestEntry { id: s.id, description: s.description, noise: s.noise, prompt_template: s.prompt_template })
        .collect();
    serde_json::to_string_pretty(&entries).expect("manifest serializes")
}

// ---------------------------------------------------------------------------
// Shared helpers

/// Counts sites and rewrites the `target`-th one.
struct Sites {
    seen: usize,
    target: Option<usize>,
}

impl Sites {
    fn new(target: Option<usize>) -> Self {
        Sites { seen: 0, target }
    }

    /// Registers one site; true when it is the one to rewrite.
    fn hit(&mut self) -> bool {
        let k = self.seen;
        self.seen += 1;
        self.target == Some(k)
    }
}

/// Calls `f` on `q` and every nested query, with a root flag.
fn each_query(q: &mut Query, f: &mut dyn FnMut(&mut Query, bool)) {
    f(q, true);
    visit_subqueries_mut(q, &mut |s| f(s, false));
}

/// Every name a FROM item or CTE declares anywhere in `q`.
fn declared_names(q: &Query) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let mut copy = q.clone();
    each_query(&mut copy, &mut |sub, _| {
        for c in &sub.with {
            names.insert(c.name.value.clone());
        }
        for_each_select(&sub.body, &mut |s| {
            for t in &s.from {
                collect_visible(t, &mut names);
            }
        });
    });
    names
}

fn collect_visible(t: &TableRef, out: &mut BTreeSet<String>) {
    match t {
        TableRef::Join { left, right, .. } => {
            collect_visible(left, out);
            collect_visible(right, out);
        }
        other => {
            if let Some(n) = other.visible_name() {
                out.insert(n.value.clone());
            }
        }
    }
}

fn cte_names(q: &Query) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let mut copy = q.clone();
    each_query(&mut copy, &mut |sub, _| {
        for c in &sub.with {
            names.insert(c.name.value.clone());
        }
    });
    names
}

fn for_each_select(body: &SetExpr, f: &mut dyn FnMut(&Select)) {
    match body {
        SetExpr::Select(s) => f(s),
        SetExpr::SetOp { left, right, .. } => {
            for_each_select(left, f);
            for_each_select(right, f);
        }
        SetExpr::Query(_) => {}
    }
}

fn fresh_alias(taken: &BTreeSet<String>, stem: &str) -> String {
    (1..).map(|i| format!("{stem}{i}")).find(|n| !taken.contains(n)).expect("unbounded")
}

/// A base table visible in a select's FROM clause.
struct BaseTable<'a> {
    name: Ident,
    alias: Option<Ident>,
    def: &'a Table,
}

impl BaseTable<'_> {
    fn visible(&self) -> &str {
        &self.alias.as_ref().unwrap_or(&self.name).value
    }

    fn has_column(&self, name: &str) -> bool {
        self.def.column_index(name).is_some()
    }

    fn single_pk(&self) -> Option<&str> {
        match self.def.primary_key.as_slice() {
            [k] => Some(k.as_str()),
            _ => None,
        }
    }

    /// True when `e` (deep) may refer to this table.
    fn mentioned_by(&self, e: &Expr) -> bool {
        let mut hit = false;
        walk_deep(e, &mut |x| {
            if let Expr::Column { table, name } = x {
                match table {
                    Some(t) if t.value == self.visible() => hit = true,
                    None if self.has_column(&name.value) => hit = true,
                    _ => {}
                }
            }
        });
        hit
    }

    /// True when every column of `e` belongs to this table and `e` has no
    /// subquery.
    fn owns_only(&self, e: &Expr) -> bool {
        if contains_subquery(e) {
            return false;
        }
        let mut ok = true;
        let mut any = false;
        walk_shallow(e, &mut |x| {
            if let Expr::Column { table, name } = x {
                any = true;
                let mine = match table {
                    Some(t) => t.value == self.visible(),
                    None => self.has_column(&name.value),
                };
                ok &= mine;
            }
        });
        ok && any
    }

    fn is_pk_column(&self, e: &Expr) -> bool {
        match (e, self.single_pk()) {
            (Expr::Column { table: Some(t), name }, Some(pk)) => t.value == self.visible() && name.value == pk,
            _ => false,
        }
    }
}

fn base_table<'a>(t: &TableRef, schema: &'a Database, ctes: &BTreeSet<String>) -> Option<BaseTable<'a>> {
    match t {
        TableRef::Table { name, alias } if !ctes.contains(&name.value) => {
            let def = schema.table(&name.value)?;
            Some(BaseTable { name: name.clone(), alias: alias.clone(), def })
        }
        _ => None,
    }
}

/// All FROM leaves in left-to-right order; `None` entries are derived
/// tables or unknown relations.
fn leaves<'a>(t: &TableRef, schema: &'a Database, ctes: &BTreeSet<String>, out: &mut Vec<Option<BaseTable<'a>>>) {
    match t {
        TableRef::Join { left, right, .. } => {
            leaves(left, schema, ctes, out);
            leaves(right, schema, ctes, out);
        }
        other => out.push(base_table(other, schema, ctes)),
    }
}

fn on_conditions(t: &TableRef, out: &mut Vec<Expr>) {
    if let TableRef::Join { left, right, on, .. } = t {
        on_conditions(left, out);
        on_conditions(right, out);
        if let Some(on) = on {
            out.push(on.clone());
        }
    }
}

fn inner_only(t: &TableRef) -> bool {
    match t {
        TableRef::Join { left, right, kind, .. } => {
            matches!(kind, JoinKind::Inner | JoinKind::Cross) && inner_only(left) && inner_only(right)
        }
        _ => true,
    }
}

fn conjuncts_of(e: &Option<Expr>) -> Vec<Expr> {
    e.as_ref().map(|w| w.conjuncts().into_iter().cloned().collect()).unwrap_or_default()
}

fn qcol(table: &str, name: &str) -> Expr {
    Expr::col(Some(table), name)
}

// ---------------------------------------------------------------------------
// join_to_exists

enum JoinPlace {
    /// Right child of the join at this depth on the left spine of FROM item `item`.
    Spine { item: usize, depth: usize },
    /// A comma-separated FROM item.
    Comma(usize),
}

struct JoinSite {
    place: JoinPlace,
    name: Ident,
    alias: Option<Ident>,
    inner_filter: Vec<Expr>,
    remaining_where: Option<Expr>,
}

fn join_to_exists(q: &mut Query, schema: &Database, target: Option<usize>) -> usize {
    let ctes = cte_names(q);
    let mut sites = Sites::new(target);
    each_query(q, &mut |sub, _| {
        let order_by: Vec<Expr> = sub.order_by.iter().map(|o| o.expr.clone()).collect();
        let Some(sel) = sub.as_select_mut() else { return };
        for site in join_sites(sel, &order_by, schema, &ctes) {
            if sites.hit() {
                rewrite_join(sel, site);
                return;
            }
        }
    });
    sites.seen
}

fn join_sites(s: &Select, order_by: &[Expr], schema: &Database, ctes: &BTreeSet<String>) -> Vec<JoinSite> {
    if !s.from.iter().all(inner_only) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let where_parts = conjuncts_of(&s.selection);
    for (item, t) in s.from.iter().enumerate() {
        let mut depth = 0;
        let mut cur = t;
        while let TableRef::Join { left, right, on, .. } = cur {
            if let (Some(b), Some(on)) = (base_table(right, schema, ctes), on) {
                let parts: Vec<Expr> = on.conjuncts().into_iter().cloned().collect();
                if let Some(site) = join_site(s, &b, JoinPlace::Spine { item, depth }, &parts, &where_parts, order_by) {
                    out.push(site);
                }
            }
            cur = left;
            depth += 1;
        }
        if s.from.len() >= 2 {
            if let Some(b) = base_table(t, schema, ctes) {
                if let Some(site) = join_site(s, &b, JoinPlace::Comma(item), &[], &where_parts, order_by) {
                    out.push(site);
                }
            }
        }
    }
    out
}

fn key_of(b: &BaseTable, e: &Expr) -> bool {
    match e {
        Expr::Binary { op: BinaryOp::Eq, left, right } => {
            (b.is_pk_column(left) && !b.mentioned_by(right)) || (b.is_pk_column(right) && !b.mentioned_by(left))
        }
        _ => false,
    }
}

/// `b.pk = e` with the table side first.
fn oriented_key(b: &BaseTable, e: &Expr) -> Expr {
    match e {
        Expr::Binary { op: BinaryOp::Eq, left, right } if !b.is_pk_column(left) => {
            Expr::binary(BinaryOp::Eq, (**right).clone(), (**left).clone())
        }
        other => other.clone(),
    }
}

fn join_site(
    s: &Select,
    b: &BaseTable,
    place: JoinPlace,
    on_parts: &[Expr],
    where_parts: &[Expr],
    order_by: &[Expr],
) -> Option<JoinSite> {
    b.single_pk()?;
    let mut inner_filter = Vec::new();
    let mut key_found = false;
    for p in on_parts {
        if !key_found && key_of(b, p) {
            inner_filter.insert(0, oriented_key(b, p));
            key_found = true;
        } else if b.owns_only(p) {
            inner_filter.push(p.clone());
        } else {
            return None;
        }
    }
    let mut remaining = Vec::new();
    for p in where_parts {
        if !key_found && matches!(place, JoinPlace::Comma(_)) && key_of(b, p) {
            inner_filter.insert(0, oriented_key(b, p));
            key_found = true;
        } else if b.owns_only(p) {
            inner_filter.push(p.clone());
        } else {
            remaining.push(p.clone());
        }
    }
    if !key_found {
        return None;
    }
    for item in &s.projection {
        match item {
            SelectItem::Wildcard => return None,
            SelectItem::QualifiedWildcard(t) if t.value == b.visible() => return None,
            _ => {}
        }
    }
    let mut others: Vec<Expr> = remaining.clone();
    others.extend(s.projection.iter().filter_map(|i| match i {
        SelectItem::Expr { expr, .. } => Some(expr.clone()),
        _ => None,
    }));
    let mut without = s.clone();
    remove_relation(&mut without, &place);
    for t in &without.from {
        on_conditions(t, &mut others);
    }
    others.extend(s.group_by.iter().cloned());
    others.extend(s.having.iter().cloned());
    others.extend(order_by.iter().cloned());
    if others.iter().any(|e| b.mentioned_by(e)) {
        return None;
    }
    Some(JoinSite {
        place,
        name: b.name.clone(),
        alias: b.alias.clone(),
        inner_filter,
        remaining_where: Expr::conjunction(remaining),
    })
}

fn remove_relation(s: &mut Select, place: &JoinPlace) {
    match *place {
        JoinPlace::Comma(i) => {
            s.from.remove(i);
        }
        JoinPlace::Spine { item, depth } => {
            let mut slot = &mut s.from[item];
            for _ in 0..depth {
                let TableRef::Join { left, .. } = slot else { unreachable!("spine depth checked") };
                slot = left;
            }
            let TableRef::Join { left, .. } = std::mem::replace(slot, TableRef::Table { name: Ident::new(""), alias: None })
            else {
                unreachable!("site is a join")
            };
            *slot = *left;
        }
    }
}

fn rewrite_join(s: &mut Select, site: JoinSite) {
    remove_relation(s, &site.place);
    let lookup = Select {
        projection: vec![SelectItem::Expr { expr: Expr::int(1), alias: None }],
        from: vec![TableRef::Table { name: site.name, alias: site.alias }],
        selection: Expr::conjunction(site.inner_filter),
        ..Select::default()
    };
    let exists = Expr::Exists { subquery: Box::new(Query::from_select(lookup)), negated: false };
    s.selection = Some(match site.remaining_where {
        Some(w) => Expr::binary(BinaryOp::And, w, exists),
        None => exists,
    });
}

// ---------------------------------------------------------------------------
// predicate_pullup

fn predicate_pullup(q: &mut Query, schema: &Database, target: Option<usize>) -> usize {
    let ctes = cte_names(q);
    let taken = declared_names(q);
    let alias = fresh_alias(&taken, "pu");
    let mut sites = Sites::new(target);
    each_query(q, &mut |sub, _| {
        if !pullup_applies(sub, schema, &ctes) || !sites.hit() {
            return;
        }
        let sel = sub.as_select_mut().expect("checked");
        let mut tables = Vec::new();
        for t in &sel.from {
            leaves(t, schema, &ctes, &mut tables);
        }
        let names: BTreeSet<String> = tables.iter().flatten().map(|t| t.visible().to_string()).collect();
        let (kept, hoisted): (Vec<Expr>, Vec<Expr>) =
            conjuncts_of(&sel.selection).into_iter().partition(|e| is_join_predicate(e, &tables));
        sel.selection = Expr::conjunction(hoisted);
        let inner = Select {
            projection: tables
                .iter()
                .flatten()
                .map(|t| SelectItem::QualifiedWildcard(Ident::new(t.visible())))
                .collect(),
            from: std::mem::take(&mut sel.from),
            selection: Expr::conjunction(kept),
            ..Select::default()
        };
        let mut shell = Query {
            with: Vec::new(),
            body: SetExpr::Select(Box::new(std::mem::take(sel))),
            order_by: std::mem::take(&mut sub.order_by),
            limit: None,
            offset: None,
        };
        visit_exprs_mut(&mut shell, &mut |e| {
            if let Expr::Column { table: Some(t), .. } = e {
                if names.contains(&t.value) {
                    *t = Ident::new(&alias);
                }
            }
        });
        let SetExpr::Select(mut done) = shell.body else { unreachable!("shell body is a select") };
        done.from = vec![TableRef::Derived { subquery: Box::new(Query::from_select(inner)), alias: Some(Ident::new(&alias)) }];
        sub.body = SetExpr::Select(done);
        sub.order_by = shell.order_by;
    });
    sites.seen
}

/// A conjunct relating two or more of the local tables and nothing else.
fn is_join_predicate(e: &Expr, tables: &[Option<BaseTable>]) -> bool {
    if contains_subquery(e) {
        return false;
    }
    let mut owners = BTreeSet::new();
    let mut local = true;
    walk_shallow(e, &mut |x| {
        if let Expr::Column { table, name } = x {
            let owner = tables.iter().flatten().position(|t| match table {
                Some(q) => q.value == t.visible(),
                None => t.has_column(&name.value),
            });
            match owner {
                Some(i) => {
                    owners.insert(i);
                }
                None => local = false,
            }
        }
    });
    local && owners.len() >= 2
}

fn pullup_applies(q: &Query, schema: &Database, ctes: &BTreeSet<String>) -> bool {
    let Some(s) = q.as_select() else { return false };
    if s.selection.is_none() || s.from.is_empty() {
        return false;
    }
    let mut tables = Vec::new();
    for t in &s.from {
        leaves(t, schema, ctes, &mut tables);
    }
    let Some(tables): Option<Vec<BaseTable>> = tables.into_iter().collect() else { return false };
    let mut table_names = BTreeSet::new();
    let mut columns = BTreeSet::new();
    for t in &tables {
        if !table_names.insert(t.name.value.clone()) {
            return false;
        }
        for c in &t.def.columns {
            if !columns.insert(c.name.clone()) {
                return false;
            }
        }
    }
    let as_leaves: Vec<Option<BaseTable>> =
        tables.iter().map(|t| Some(BaseTable { name: t.name.clone(), alias: t.alias.clone(), def: t.def })).collect();
    if conjuncts_of(&s.selection).iter().all(|e| is_join_predicate(e, &as_leaves)) {
        return false;
    }
    let visible: BTreeSet<String> = tables.iter().map(|t| t.visible().to_string()).collect();
    if s.projection.iter().any(|i| matches!(i, SelectItem::QualifiedWildcard(_))) {
        return false;
    }
    let mut ons = Vec::new();
    for t in &s.from {
        on_conditions(t, &mut ons);
    }
    for on in &ons {
        if contains_subquery(on) {
            return false;
        }
        let mut local = true;
        walk_shallow(on, &mut |x| {
            if let Expr::Column { table, name } = x {
                local &= match table {
                    Some(t) => visible.contains(&t.value),
                    None => columns.contains(&name.value),
                };
            }
        });
        if !local {
            return false;
        }
    }
    let mut exprs: Vec<Expr> = s
        .projection
        .iter()
        .filter_map(|i| match i {
            SelectItem::Expr { expr, .. } => Some(expr.clone()),
            _ => None,
        })
        .collect();
    exprs.extend(s.selection.iter().cloned());
    exprs.extend(s.group_by.iter().cloned());
    exprs.extend(s.having.iter().cloned());
    exprs.extend(q.order_by.iter().map(|o| o.expr.clone()));
    for e in &exprs {
        for sub in subqueries_of(e) {
            if declared_names(&sub).iter().any(|n| visible.contains(n)) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// redundant_distinct

fn redundant_distinct(q: &mut Query, _schema: &Database, target: Option<usize>) -> usize {
    let mut sites = Sites::new(target);
    if grouped_keys_projected(q) && sites.hit() {
        q.as_select_mut().expect("checked").distinct = true;
    }
    visit_exprs_mut(q, &mut |e| {
        let sub = match e {
            Expr::InSubquery { subquery, .. } | Expr::Exists { subquery, .. } => subquery,
            _ => return,
        };
        if !sub.order_by.is_empty() || sub.limit.is_some() || sub.offset.is_some() {
            return;
        }
        if let Some(sel) = sub.as_select_mut() {
            if !sel.distinct && sites.hit() {
                sel.distinct = true;
            }
        }
    });
    sites.seen
}

/// A grouped top-level select that projects every grouping key already
/// returns distinct rows.
fn grouped_keys_projected(q: &Query) -> bool {
    let Some(s) = q.as_select() else { return false };
    if s.distinct || s.group_by.is_empty() || !q.order_by.is_empty() {
        return false;
    }
    let projected: Vec<&Expr> = s
        .projection
        .iter()
        .filter_map(|i| match i {
            SelectItem::Expr { expr, .. } => Some(expr),
            _ => None,
        })
        .collect();
    if projected.len() != s.projection.len() || projected.iter().any(|e| contains_window(e)) {
        return false;
    }
    s.group_by.iter().all(|g| projected.contains(&g))
}

// ---------------------------------------------------------------------------
// subquery_order_by

fn subquery_order_by(q: &mut Query, _schema: &Database, target: Option<usize>) -> usize {
    let mut sites = Sites::new(target);
    each_query(q, &mut |sub, root| {
        if !root && sub.order_by.is_empty() && sub.limit.is_none() && sub.offset.is_none() && sites.hit() {
            sub.order_by.push(OrderItem { expr: Expr::int(1), desc: false, nulls_first: None });
        }
    });
    sites.seen
}

// ---------------------------------------------------------------------------
// self_wrap

fn self_wrap(q: &mut Query, _schema: &Database, target: Option<usize>) -> usize {
    if target == Some(0) {
        let alias = fresh_alias(&declared_names(q), "w");
        let inner = std::mem::replace(q, Query::from_select(Select::default()));
        *q = Query::from_select(Select {
            projection: vec![SelectItem::Wildcard],
            from: vec![TableRef::Derived { subquery: Box::new(inner), alias: Some(Ident::new(alias)) }],
            ..Select::default()
        });
    }
    1
}

// ---------------------------------------------------------------------------
// in_list_to_or

fn in_list_to_or(q: &mut Query, _schema: &Database, target: Option<usize>) -> usize {
    let mut sites = Sites::new(target);
    visit_exprs_mut(q, &mut |e| {
        if let Expr::InList { expr, list, negated: false } = e {
            if list.len() >= 2 && sites.hit() {
                let chain = list.iter().map(|item| Expr::binary(BinaryOp::Eq, (**expr).clone(), item.clone()));
                *e = Expr::disjunction(chain).expect("non-empty list");
            }
        }
    });
    sites.seen
}

// ---------------------------------------------------------------------------
// scalar_subquery_lookup

fn scalar_subquery_lookup(q: &mut Query, schema: &Database, target: Option<usize>) -> usize {
    let ctes = cte_names(q);
    let mut sites = Sites::new(target);
    each_query(q, &mut |sub, _| {
        let Some(sel) = sub.as_select_mut() else { return };
        if sel.distinct || !sel.group_by.is_empty() || sel.having.is_some() {
            return;
        }
        let exprs = sel.projection.iter().filter_map(|i| match i {
            SelectItem::Expr { expr, .. } => Some(expr),
            _ => None,
        });
        if exprs.into_iter().any(contains_aggregate) {
            return;
        }
        let mut tables = Vec::new();
        for t in &sel.from {
            leaves(t, schema, &ctes, &mut tables);
        }
        for item in sel.projection.iter_mut() {
            let SelectItem::Expr { expr: Expr::Column { table: Some(t), name }, alias } = item else { continue };
            let Some(b) = tables.iter().flatten().find(|b| b.visible() == t.value && b.has_column(&name.value)) else {
                continue;
            };
            let Some(pk) = b.single_pk() else { continue };
            if !sites.hit() {
                continue;
            }
            let lk = format!("{}_lk", b.visible());
            let lookup = Select {
                projection: vec![SelectItem::Expr { expr: qcol(&lk, &name.value), alias: None }],
                from: vec![TableRef::Table { name: b.name.clone(), alias: Some(Ident::new(&lk)) }],
                selection: Some(Expr::binary(BinaryOp::Eq, qcol(&lk, pk), qcol(b.visible(), pk))),
                ..Select::default()
            };
            let out_name = alias.clone().unwrap_or_else(|| name.clone());
            *item = SelectItem::Expr { expr: Expr::Subquery(Box::new(Query::from_select(lookup))), alias: Some(out_name) };
        }
    });
    sites.seen
}

// ---------------------------------------------------------------------------
// union_split

fn union_split(q: &mut Query, _schema: &Database, target: Option<usize>) -> usize {
    if !q.order_by.is_empty() || q.limit.is_some() || q.offset.is_some() {
        return 0;
    }
    let Some(sel) = q.as_select() else { return 0 };
    if !sel.group_by.is_empty() || sel.having.is_some() {
        return 0;
    }
    for item in &sel.projection {
        if let SelectItem::Expr { expr, .. } = item {
            if contains_aggregate(expr) || contains_window(expr) {
                return 0;
            }
        }
    }
    let parts = conjuncts_of(&sel.selection);
    let ors: Vec<usize> = (0..parts.len()).filter(|&i| parts[i].disjuncts().len() >= 2).collect();
    if let Some(t) = target {
        let at = ors[t];
        let ds: Vec<Expr> = parts[at].disjuncts().into_iter().cloned().collect();
        let first = ds[0].clone();
        let rest = Expr::disjunction(ds[1..].iter().cloned()).expect("two or more disjuncts");
        let mut left = sel.clone();
        let mut right = sel.clone();
        let mut lp = parts.clone();
        lp[at] = first.clone();
        let mut rp = parts.clone();
        rp[at] = rest;
        rp.push(Expr::IsBool { expr: Box::new(first), value: true, negated: true });
        left.selection = Expr::conjunction(lp);
        right.selection = Expr::conjunction(rp);
        q.body = SetExpr::SetOp {
            op: SetOperator::Union,
            all: !sel.distinct,
            left: Box::new(SetExpr::Select(Box::new(left))),
            right: Box::new(SetExpr::Select(Box::new(right))),
        };
    }
    ors.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::Dialect;

    fn tree(sql: &str) -> SqlTree {
        SqlTree::parse(sql, Dialect::Postgres).unwrap()
    }

    #[test]
    fn ids_are_unique() {
        let lib = builtin_library();
        let ids: BTreeSet<&str> = lib.iter().map(|s| s.id).collect();
        assert_eq!(ids.len(), lib.len());
        assert!(lib.len() >= 8);
    }

    #[test]
    fn template_fill() {
        let s = strategy_by_id("self_wrap").unwrap();
        let p = s.prompt("CREATE TABLE t (a INTEGER);", "SELECT a FROM t");
        assert!(p.contains("SELECT a FROM t"));
        assert!(p.contains(s.description));
        assert!(!p.contains("{schema}"));
    }

    #[test]
    fn fresh_alias_skips_taken() {
        let t = tree("SELECT * FROM (SELECT 1) AS w1");
        assert_eq!(fresh_alias(&declared_names(t.query()), "w"), "w2");
    }
}
