//! Bound query plans: names resolved to row positions, types checked.

use std::sync::Arc;

use crate::sql::ast::{BinaryOp, JoinKind, SetOperator};

use super::catalog::{SqlType, Table};
use crate::exec::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    /// Column `idx` of the row `up` scopes out (0 = current row).
    Col { up: usize, idx: usize },
    Lit(Value),
    Agg(usize),
    Win(usize),
    Not(Box<BExpr>),
    Neg(Box<BExpr>),
    Bin { op: BinaryOp, l: Box<BExpr>, r: Box<BExpr> },
    IsNull { e: Box<BExpr>, negated: bool },
    IsBool { e: Box<BExpr>, value: bool, negated: bool },
    InList { e: Box<BExpr>, list: Vec<BExpr>, negated: bool },
    InSub { e: Box<BExpr>, sub: usize, negated: bool },
    Between { e: Box<BExpr>, lo: Box<BExpr>, hi: Box<BExpr>, negated: bool },
    Like { e: Box<BExpr>, pat: Box<BExpr>, negated: bool },
    Exists { sub: usize, negated: bool },
    Scalar(usize),
    Func { f: Func, args: Vec<BExpr> },
    Case { operand: Option<Box<BExpr>>, branches: Vec<(BExpr, BExpr)>, else_result: Option<Box<BExpr>> },
    Cast { e: Box<BExpr>, ty: SqlType },
}

impl BExpr {
    /// True when the expression contains no subquery.
    pub fn is_simple(&self) -> bool {
        let mut simple = true;
        self.visit(&mut |e| {
            if matches!(e, BExpr::InSub { .. } | BExpr::Exists { .. } | BExpr::Scalar(_)) {
                simple = false;
            }
        });
        simple
    }

    /// Local (up = 0) column indices referenced.
    pub fn local_columns(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let BExpr::Col { up: 0, idx } = e {
                out.push(*idx);
            }
        });
        out
    }

    /// Shifts local column indices by `-offset`. Only valid on simple
    /// expressions.
    pub fn shifted(&self, offset: usize) -> BExpr {
        let mut e = self.clone();
        e.visit_mut(&mut |x| {
            if let BExpr::Col { up: 0, idx } = x {
                *idx -= offset;
            }
        });
        e
    }

    pub fn visit(&self, f: &mut dyn FnMut(&BExpr)) {
        f(self);
        self.children().into_iter().for_each(|c| c.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut BExpr)) {
        f(self);
        for c in self.children_mut() {
            c.visit_mut(f);
        }
    }

    fn children(&self) -> Vec<&BExpr> {
        use BExpr::*;
        match self {
            Col { .. } | Lit(_) | Agg(_) | Win(_) | Exists { .. } | Scalar(_) => vec![],
            Not(e) | Neg(e) | IsNull { e, .. } | IsBool { e, .. } | InSub { e, .. } | Cast { e, .. } => vec![e],
            Bin { l, r, .. } => vec![l, r],
            InList { e, list, .. } => std::iter::once(&**e).chain(list.iter()).collect(),
            Between { e, lo, hi, .. } => vec![e, lo, hi],
            Like { e, pat, .. } => vec![e, pat],
            Func { args, .. } => args.iter().collect(),
            Case { operand, branches, else_result } => {
                let mut v: Vec<&BExpr> = operand.iter().map(|b| &**b).collect();
                for (c, r) in branches {
                    v.push(c);
                    v.push(r);
                }
                v.extend(else_result.iter().map(|b| &**b));
                v
            }
        }
    }

    fn children_mut(&mut self) -> Vec<&mut BExpr> {
        use BExpr::*;
        match self {
            Col { .. } | Lit(_) | Agg(_) | Win(_) | Exists { .. } | Scalar(_) => vec![],
            Not(e) | Neg(e) | IsNull { e, .. } | IsBool { e, .. } | InSub { e, .. } | Cast { e, .. } => vec![e],
            Bin { l, r, .. } => vec![l, r],
            InList { e, list, .. } => std::iter::once(&mut **e).chain(list.iter_mut()).collect(),
            Between { e, lo, hi, .. } => vec![e, lo, hi],
            Like { e, pat, .. } => vec![e, pat],
            Func { args, .. } => args.iter_mut().collect(),
            Case { operand, branches, else_result } => {
                let mut v: Vec<&mut BExpr> = operand.iter_mut().map(|b| &mut **b).collect();
                for (c, r) in branches {
                    v.push(c);
                    v.push(r);
                }
                v.extend(else_result.iter_mut().map(|b| &mut **b));
                v
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Coalesce,
    NullIf,
    Upper,
    Lower,
    Length,
    Abs,
    Round,
    Floor,
    Ceil,
    Substr,
    Greatest,
    Least,
    Mod,
    Sleep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    CountStar,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggSpec {
    pub func: AggFunc,
    pub arg: Option<BExpr>,
    pub distinct: bool,
    pub ty: SqlType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WinFunc {
    RowNumber,
    Rank,
    DenseRank,
    Agg(AggFunc),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortKey<E> {
    pub key: E,
    pub desc: bool,
    pub nulls_first: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    pub func: WinFunc,
    pub arg: Option<BExpr>,
    pub partition: Vec<BExpr>,
    pub order: Vec<SortKey<BExpr>>,
    pub ty: SqlType,
}

#[derive(Debug, Clone)]
pub enum FromNode {
    Scan { table: Arc<Table>, alias: String, filter: Vec<BExpr> },
    Derived { plan: Box<QueryPlan>, alias: String, filter: Vec<BExpr> },
    Join(Box<JoinNode>),
}

#[derive(Debug, Clone)]
pub struct JoinNode {
    pub kind: JoinKind,
    pub left: FromNode,
    pub right: FromNode,
    pub left_width: usize,
    pub right_width: usize,
    /// Equality keys: left side over left-local columns, right side over
    /// right-local columns.
    pub keys: Vec<(BExpr, BExpr)>,
    /// Remaining condition over the combined local row.
    pub residual: Option<BExpr>,
    /// Filters pushed down from an enclosing WHERE, over the combined row.
    pub filter: Vec<BExpr>,
}

/// One step of folding the FROM list: join the accumulated prefix with the
/// next item.
#[derive(Debug, Clone)]
pub struct FromStep {
    pub keys: Vec<(BExpr, BExpr)>,
    pub residual: Vec<BExpr>,
}

#[derive(Debug, Clone)]
pub struct Grouping {
    pub keys: Vec<BExpr>,
    pub aggs: Vec<AggSpec>,
}

#[derive(Debug, Clone)]
pub struct SelectPlan {
    pub items: Vec<FromNode>,
    pub widths: Vec<usize>,
    /// `steps[k]` joins items `0..=k` with item `k + 1`.
    pub steps: Vec<FromStep>,
    /// Conjuncts checked against the first item (constant predicates).
    pub prefilter: Vec<BExpr>,
    pub filter: Option<BExpr>,
    pub grouping: Option<Grouping>,
    pub having: Option<BExpr>,
    pub windows: Vec<WindowPlan>,
    pub projection: Vec<BExpr>,
    pub distinct: bool,
}

#[derive(Debug, Clone)]
pub enum SetPlan {
    Select(Box<SelectPlan>),
    SetOp {
        op: SetOperator,
        all: bool,
        left: Box<SetPlan>,
        right: Box<SetPlan>,
        /// Columns whose integer values are widened to float on each side.
        widen_left: Vec<usize>,
        widen_right: Vec<usize>,
    },
    Query(Box<QueryPlan>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutColumn {
    pub name: String,
    pub ty: SqlType,
}

#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub body: SetPlan,
    pub order: Vec<SortKey<usize>>,
    pub limit: Option<usize>,
    pub offset: usize,
    /// Visible output columns; extra trailing columns are sort helpers.
    pub columns: Vec<OutColumn>,
}

#[derive(Debug, Clone)]
pub struct SubPlan {
    pub plan: QueryPlan,
    /// Outer columns the subquery reads, as `(up, idx)` relative to the row
    /// at the point where the subquery is evaluated.
    pub outer_refs: Vec<(usize, usize)>,
}

impl SubPlan {
    pub fn is_correlated(&self) -> bool {
        !self.outer_refs.is_empty()
    }
}

/// A fully bound statement.
#[derive(Debug, Clone)]
pub struct Program {
    pub root: QueryPlan,
    pub subs: Vec<SubPlan>,
}
