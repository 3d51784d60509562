//! Projection of the AST onto a labelled ordered tree.
//!
//! Keywords become operator labels, identifiers keep their (normalised)
//! names and literals collapse to their token class (`<int>`, `<str>`, ...)
//! so that changing a constant counts as a relabel rather than a structural
//! edit.

use super::ast::*;
use crate::tree::LabeledTree;

pub fn query_tree(q: &Query) -> LabeledTree {
    let body = set_tree(&q.body);
    if q.is_bare() {
        return body;
    }
    let mut children = Vec::new();
    if !q.with.is_empty() {
        let ctes = q
            .with
            .iter()
            .map(|c| LabeledTree::node(format!("CTE {}", c.name.value), vec![query_tree(&c.query)]))
            .collect();
        children.push(LabeledTree::node("WITH", ctes));
    }
    children.push(body);
    if !q.order_by.is_empty() {
        children.push(LabeledTree::node("ORDER BY", q.order_by.iter().map(order_tree).collect()));
    }
    if let Some(l) = &q.limit {
        children.push(LabeledTree::node("LIMIT", vec![expr_tree(l)]));
    }
    if let Some(o) = &q.offset {
        children.push(LabeledTree::node("OFFSET", vec![expr_tree(o)]));
    }
    LabeledTree::node("QUERY", children)
}

fn set_tree(s: &SetExpr) -> LabeledTree {
    match s {
        SetExpr::Select(sel) => select_tree(sel),
        SetExpr::Query(q) => query_tree(q),
        SetExpr::SetOp { op, all, left, right } => {
            let label = if *all { format!("{} ALL", op.keyword()) } else { op.keyword().to_string() };
            LabeledTree::node(label, vec![set_tree(left), set_tree(right)])
        }
    }
}

fn select_tree(s: &Select) -> LabeledTree {
    let mut children = Vec::new();
    let items = s
        .projection
        .iter()
        .map(|item| match item {
            SelectItem::Wildcard => LabeledTree::leaf("*"),
            SelectItem::QualifiedWildcard(t) => LabeledTree::leaf(format!("{}.*", t.value)),
            SelectItem::Expr { expr, alias: None } => expr_tree(expr),
            SelectItem::Expr { expr, alias: Some(a) } => LabeledTree::node(format!("AS {}", a.value), vec![expr_tree(expr)]),
        })
        .collect();
    children.push(LabeledTree::node("PROJECTION", items));
    if !s.from.is_empty() {
        children.push(LabeledTree::node("FROM", s.from.iter().map(table_tree).collect()));
    }
    if let Some(w) = &s.selection {
        children.push(LabeledTree::node("WHERE", vec![expr_tree(w)]));
    }
    if !s.group_by.is_empty() {
        children.push(LabeledTree::node("GROUP BY", s.group_by.iter().map(expr_tree).collect()));
    }
    if let Some(h) = &s.having {
        children.push(LabeledTree::node("HAVING", vec![expr_tree(h)]));
    }
    LabeledTree::node(if s.distinct { "SELECT DISTINCT" } else { "SELECT" }, children)
}

fn table_tree(t: &TableRef) -> LabeledTree {
    match t {
        TableRef::Table { name, alias } => match alias {
            Some(a) => LabeledTree::leaf(format!("TABLE {} AS {}", name.value, a.value)),
            None => LabeledTree::leaf(format!("TABLE {}", name.value)),
        },
        TableRef::Derived { subquery, alias } => {
            let label = match alias {
                Some(a) => format!("DERIVED AS {}", a.value),
                None => "DERIVED".to_string(),
            };
            LabeledTree::node(label, vec![query_tree(subquery)])
        }
        TableRef::Join { left, right, kind, on } => {
            let mut children = vec![table_tree(left), table_tree(right)];
            if let Some(on) = on {
                children.push(LabeledTree::node("ON", vec![expr_tree(on)]));
            }
            LabeledTree::node(kind.keyword(), children)
        }
    }
}

fn order_tree(o: &OrderItem) -> LabeledTree {
    let mut label = String::from(if o.desc { "SORT DESC" } else { "SORT ASC" });
    match o.nulls_first {
        Some(true) => label.push_str(" NULLS FIRST"),
        Some(false) => label.push_str(" NULLS LAST"),
        None => {}
    }
    LabeledTree::node(label, vec![expr_tree(&o.expr)])
}

pub fn literal_class(l: &Literal) -> &'static str {
    match l {
        Literal::Int(_) => "<int>",
        Literal::Float(_) => "<float>",
        Literal::Str(_) => "<str>",
        Literal::Bool(_) => "<bool>",
        Literal::Null => "<null>",
    }
}

pub fn expr_tree(e: &Expr) -> LabeledTree {
    let neg = |negated: bool, base: &str| if negated { format!("NOT {base}") } else { base.to_string() };
    match e {
        Expr::Column { table, name } => match table {
            Some(t) => LabeledTree::leaf(format!("COL {}.{}", t.value, name.value)),
            None => LabeledTree::leaf(format!("COL {}", name.value)),
        },
        Expr::Literal(l) => LabeledTree::leaf(literal_class(l)),
        Expr::Unary { op: UnaryOp::Not, expr } => LabeledTree::node("NOT", vec![expr_tree(expr)]),
        Expr::Unary { op: UnaryOp::Neg, expr } => LabeledTree::node("NEG", vec![expr_tree(expr)]),
        Expr::Binary { op, left, right } => LabeledTree::node(op.symbol(), vec![expr_tree(left), expr_tree(right)]),
        Expr::IsNull { expr, negated } => {
            LabeledTree::node(if *negated { "IS NOT NULL" } else { "IS NULL" }, vec![expr_tree(expr)])
        }
        Expr::IsBool { expr, value, negated } => {
            let v = if *value { "TRUE" } else { "FALSE" };
            let label = if *negated { format!("IS NOT {v}") } else { format!("IS {v}") };
            LabeledTree::node(label, vec![expr_tree(expr)])
        }
        Expr::InList { expr, list, negated } => {
            let mut children = vec![expr_tree(expr)];
            children.extend(list.iter().map(expr_tree));
            LabeledTree::node(neg(*negated, "IN"), children)
        }
        Expr::InSubquery { expr, subquery, negated } => {
            LabeledTree::node(neg(*negated, "IN SUBQUERY"), vec![expr_tree(expr), query_tree(subquery)])
        }
        Expr::Between { expr, low, high, negated } => {
            LabeledTree::node(neg(*negated, "BETWEEN"), vec![expr_tree(expr), expr_tree(low), expr_tree(high)])
        }
        Expr::Like { expr, pattern, negated } => {
            LabeledTree::node(neg(*negated, "LIKE"), vec![expr_tree(expr), expr_tree(pattern)])
        }
        Expr::Exists { subquery, negated } => LabeledTree::node(neg(*negated, "EXISTS"), vec![query_tree(subquery)]),
        Expr::Subquery(q) => LabeledTree::node("SUBQUERY", vec![query_tree(q)]),
        Expr::Function { name, args, distinct, star, over } => {
            let mut label = format!("FN {}", name.value);
            if *distinct {
                label.push_str(" DISTINCT");
            }
            let mut children: Vec<LabeledTree> =
                if *star { vec![LabeledTree::leaf("*")] } else { args.iter().map(expr_tree).collect() };
            if let Some(w) = over {
                let mut wc = Vec::new();
                if !w.partition_by.is_empty() {
                    wc.push(LabeledTree::node("PARTITION BY", w.partition_by.iter().map(expr_tree).collect()));
                }
                if !w.order_by.is_empty() {
                    wc.push(LabeledTree::node("ORDER BY", w.order_by.iter().map(order_tree).collect()));
                }
                children.push(LabeledTree::node("OVER", wc));
            }
            LabeledTree::node(label, children)
        }
        Expr::Case { operand, branches, else_result } => {
            let mut children = Vec::new();
            if let Some(op) = operand {
                children.push(expr_tree(op));
            }
            for (c, r) in branches {
                children.push(LabeledTree::node("WHEN", vec![expr_tree(c), expr_tree(r)]));
            }
            if let Some(e) = else_result {
                children.push(LabeledTree::node("ELSE", vec![expr_tree(e)]));
            }
            LabeledTree::node("CASE", children)
        }
        Expr::Cast { expr, data_type } => LabeledTree::node(format!("CAST {data_type}"), vec![expr_tree(expr)]),
    }
}
