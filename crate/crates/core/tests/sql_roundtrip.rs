use proptest::prelude::*;
use slowsql::sql::ast::*;
use slowsql::sql::{parse_query, render_query, Dialect};

fn ident() -> impl Strategy<Value = Ident> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "item_sk", "qty", "t1", "price"]).prop_map(Ident::new),
        prop::sample::select(vec!["Mixed Case", "select", "x\"y"])
            .prop_map(|s| Ident { value: s.to_string(), quoted: true }),
    ]
}

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        (0i64..1000).prop_map(Literal::Int),
        (0u32..4000).prop_map(|v| Literal::Float(f64::from(v) * 0.25)),
        "[a-z' %]{0,6}".prop_map(Literal::Str),
        any::<bool>().prop_map(Literal::Bool),
        Just(Literal::Null),
    ]
}

fn table_name() -> impl Strategy<Value = Ident> {
    prop::sample::select(vec!["t", "u", "store_sales", "item"]).prop_map(Ident::new)
}

fn leaf_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (proptest::option::of(table_name()), ident()).prop_map(|(table, name)| Expr::Column { table, name }),
        literal().prop_map(Expr::Literal),
    ]
}

fn simple_select() -> impl Strategy<Value = Query> {
    (ident(), table_name(), proptest::option::of(leaf_expr())).prop_map(|(col, t, w)| {
        Query::from_select(Select {
            distinct: false,
            projection: vec![SelectItem::Expr { expr: Expr::Column { table: None, name: col }, alias: None }],
            from: vec![TableRef::Table { name: t, alias: None }],
            selection: w.map(|w| Expr::binary(BinaryOp::Gt, w, Expr::int(1))),
            group_by: vec![],
            having: None,
        })
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    let binops = prop::sample::select(vec![
        BinaryOp::Or,
        BinaryOp::And,
        BinaryOp::Eq,
        BinaryOp::NotEq,
        BinaryOp::Lt,
        BinaryOp::GtEq,
        BinaryOp::Plus,
        BinaryOp::Minus,
        BinaryOp::Multiply,
        BinaryOp::Divide,
        BinaryOp::Modulo,
        BinaryOp::Concat,
    ]);
    leaf_expr().prop_recursive(4, 32, 4, move |inner| {
        let b = inner.clone().prop_map(Box::new);
        prop_oneof![
            (binops.clone(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            b.clone().prop_map(|e| Expr::Unary { op: UnaryOp::Not, expr: e }),
            (b.clone(), any::<bool>()).prop_map(|(e, negated)| Expr::IsNull { expr: e, negated }),
            (b.clone(), any::<bool>(), any::<bool>())
                .prop_map(|(e, value, negated)| Expr::IsBool { expr: e, value, negated }),
            (b.clone(), prop::collection::vec(inner.clone(), 1..3), any::<bool>())
                .prop_map(|(e, list, negated)| Expr::InList { expr: e, list, negated }),
            (b.clone(), b.clone(), b.clone(), any::<bool>())
                .prop_map(|(e, low, high, negated)| Expr::Between { expr: e, low, high, negated }),
            (b.clone(), b.clone(), any::<bool>())
                .prop_map(|(e, pattern, negated)| Expr::Like { expr: e, pattern, negated }),
            (b.clone(), simple_select(), any::<bool>())
                .prop_map(|(e, q, negated)| Expr::InSubquery { expr: e, subquery: Box::new(q), negated }),
            (simple_select(), any::<bool>())
                .prop_map(|(q, negated)| Expr::Exists { subquery: Box::new(q), negated }),
            simple_select().prop_map(|q| Expr::Subquery(Box::new(q))),
            (prop::sample::select(vec!["sum", "coalesce", "upper"]), prop::collection::vec(inner.clone(), 1..3))
                .prop_map(|(n, args)| Expr::Function {
                    name: Ident::new(n),
                    args,
                    distinct: false,
                    star: false,
                    over: None
                }),
            (prop::collection::vec((inner.clone(), inner.clone()), 1..3), proptest::option::of(b.clone()))
                .prop_map(|(branches, else_result)| Expr::Case { operand: None, branches, else_result }),
            (b.clone(), prop::sample::select(vec!["INTEGER", "TEXT"]))
                .prop_map(|(e, t)| Expr::Cast { expr: e, data_type: t.to_string() }),
        ]
    })
}

fn table_ref() -> impl Strategy<Value = TableRef> {
    let base = prop_oneof![
        (table_name(), proptest::option::of(ident())).prop_map(|(name, alias)| TableRef::Table { name, alias }),
        (simple_select(), ident())
            .prop_map(|(q, a)| TableRef::Derived { subquery: Box::new(q), alias: Some(a) }),
    ];
    base.prop_recursive(2, 6, 2, |inner| {
        (
            inner.clone(),
            inner,
            prop::sample::select(vec![JoinKind::Inner, JoinKind::Left, JoinKind::Right, JoinKind::Full]),
            expr(),
        )
            .prop_map(|(l, r, kind, on)| TableRef::Join { left: Box::new(l), right: Box::new(r), kind, on: Some(on) })
    })
}

fn select() -> impl Strategy<Value = Select> {
    (
        any::<bool>(),
        prop::collection::vec(
            prop_oneof![
                Just(SelectItem::Wildcard),
                (expr(), proptest::option::of(ident())).prop_map(|(expr, alias)| SelectItem::Expr { expr, alias }),
            ],
            1..3,
        ),
        prop::collection::vec(table_ref(), 0..3),
        proptest::option::of(expr()),
        prop::collection::vec(leaf_expr(), 0..2),
        proptest::option::of(expr()),
    )
        .prop_map(|(distinct, projection, from, selection, group_by, having)| Select {
            distinct,
            projection,
            from,
            selection,
            group_by,
            having,
        })
}

fn query() -> impl Strategy<Value = Query> {
    let body = select().prop_map(|s| SetExpr::Select(Box::new(s)));
    let body = body.prop_recursive(2, 4, 2, |inner| {
        (
            prop::sample::select(vec![SetOperator::Union, SetOperator::Intersect, SetOperator::Except]),
            any::<bool>(),
            inner.clone(),
            inner,
        )
            .prop_map(|(op, all, l, r)| SetExpr::SetOp { op, all, left: Box::new(l), right: Box::new(r) })
    });
    (
        prop::collection::vec((ident(), simple_select()), 0..2),
        body,
        prop::collection::vec((leaf_expr(), any::<bool>(), proptest::option::of(any::<bool>())), 0..2),
        proptest::option::of(0i64..100),
        proptest::option::of(0i64..100),
    )
        .prop_map(|(with, body, order, limit, offset)| Query {
            with: with.into_iter().map(|(name, q)| Cte { name, query: Box::new(q) }).collect(),
            body,
            order_by: order
                .into_iter()
                .map(|(expr, desc, nulls_first)| OrderItem { expr, desc, nulls_first })
                .collect(),
            limit: limit.map(Expr::int),
            offset: offset.map(Expr::int),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn render_then_parse_is_identity(q in query()) {
        for dialect in [Dialect::Postgres, Dialect::Mysql] {
            let text = render_query(&q, dialect);
            let back = parse_query(&text, dialect).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&back, &q, "{}", text);
        }
    }
}

#[test]
fn handwritten_queries_round_trip() {
    let corpus = [
        "SELECT ss.ss_item_sk, SUM(ss.ss_net_paid) AS total FROM store_sales AS ss JOIN item AS i ON ss.ss_item_sk = i.i_item_sk WHERE i.i_category IN ('Books', 'Music') GROUP BY ss.ss_item_sk HAVING SUM(ss.ss_net_paid) > 100 ORDER BY total DESC LIMIT 10",
        "WITH t AS (SELECT 1 AS x) SELECT * FROM t",
        "SELECT a FROM t WHERE EXISTS (SELECT 1 FROM u WHERE u.a = t.a) AND b NOT BETWEEN 1 AND 5",
        "SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END, CAST(b AS INTEGER), RANK() OVER (PARTITION BY c ORDER BY d DESC) FROM t",
        "SELECT a FROM t UNION ALL SELECT a FROM u EXCEPT SELECT a FROM v",
        "SELECT * FROM (SELECT a FROM t ORDER BY 1) AS w WHERE w.a IS NOT NULL",
        "SELECT COUNT(DISTINCT a), COUNT(*) FROM t, u LEFT JOIN v ON u.k = v.k",
    ];
    for sql in corpus {
        let q = parse_query(sql, Dialect::Postgres).unwrap();
        let text = render_query(&q, Dialect::Postgres);
        assert_eq!(text, sql);
        assert_eq!(parse_query(&text, Dialect::Postgres).unwrap(), q);
    }
}
