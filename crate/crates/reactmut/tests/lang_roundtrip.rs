//! Property tests for the model-language printer/parser pair.

use proptest::prelude::*;
use reactmut::lang::{parse, render, Expr, ModelAst, Span, UnaryOp};
use reactmut::pred::BinOp;

fn span() -> Span {
    Span::default()
}

fn bool_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Ident("p".into(), span())),
        Just(Expr::Ident("q".into(), span())),
        any::<bool>().prop_map(|b| Expr::Bool(b, span())),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(e),
                span: span(),
            }),
            (inner.clone(), inner.clone(), bool_op()).prop_map(|(a, b, op)| Expr::Binary {
                op,
                lhs: Box::new(a),
                rhs: Box::new(b),
                span: span(),
            }),
            (int_expr(), int_expr(), cmp_op()).prop_map(|(a, b, op)| Expr::Binary {
                op,
                lhs: Box::new(a),
                rhs: Box::new(b),
                span: span(),
            }),
        ]
    })
}

fn int_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Ident("k".into(), span())),
        (0i64..3).prop_map(|i| Expr::Int(i, span())),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(e),
                span: span(),
            }),
            (inner.clone(), inner, prop_oneof![Just(BinOp::Add), Just(BinOp::Sub)]).prop_map(
                |(a, b, op)| Expr::Binary {
                    op,
                    lhs: Box::new(a),
                    rhs: Box::new(b),
                    span: span(),
                }
            ),
        ]
    })
}

fn bool_op() -> impl Strategy<Value = BinOp> {
    prop_oneof![Just(BinOp::And), Just(BinOp::Or), Just(BinOp::Xor), Just(BinOp::Xnor)]
}

fn cmp_op() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Eq),
        Just(BinOp::Neq),
        Just(BinOp::Lt),
        Just(BinOp::Le),
        Just(BinOp::Gt),
        Just(BinOp::Ge),
    ]
}

fn host_model(guard: Expr, value: Expr) -> ModelAst {
    use reactmut::lang::{Assign, Rhs, VarDecl};
    use reactmut::VarDomain;
    ModelAst {
        inputs: vec![
            VarDecl { name: "p".into(), domain: VarDomain::Bool, span: span() },
            VarDecl { name: "q".into(), domain: VarDomain::Bool, span: span() },
        ],
        outputs: vec![VarDecl {
            name: "o".into(),
            domain: VarDomain::Enum(vec!["eps".into()]),
            span: span(),
        }],
        states: vec![VarDecl {
            name: "k".into(),
            domain: VarDomain::Int { lo: 0, hi: 2 },
            span: span(),
        }],
        init: vec![
            Assign { target: "o".into(), rhs: Rhs::Expr(Expr::Ident("eps".into(), span())), span: span() },
            Assign { target: "k".into(), rhs: Rhs::Expr(Expr::Int(0, span())), span: span() },
        ],
        next: vec![
            Assign { target: "o".into(), rhs: Rhs::Expr(Expr::Ident("eps".into(), span())), span: span() },
            Assign {
                target: "k".into(),
                rhs: Rhs::Ite {
                    arms: vec![(guard, Rhs::Expr(value))],
                    otherwise: Box::new(Rhs::Expr(Expr::Ident("k".into(), span()))),
                    span: span(),
                },
                span: span(),
            },
        ],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_models_reparse_identically(guard in bool_expr(), value in int_expr()) {
        let ast = host_model(guard, value);
        let text = render(&ast);
        let reparsed = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        prop_assert!(ast.structurally_eq(&reparsed), "{text}");
        // Printing is a normal form: render . parse . render is stable.
        prop_assert_eq!(render(&reparsed), text);
    }
}
