use heurevo_core::expr::{interpret, parse, random_tree, Binding, BinaryOp, Expr, UnaryOp};
use heurevo_core::rng::seeded;
use proptest::prelude::*;

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1e6f64..1e6).prop_map(Expr::Const),
        prop_oneof![Just("item"), Just("bins"), Just("x_1")].prop_map(Expr::var),
    ];
    leaf.prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            (0..UnaryOp::ALL.len(), inner.clone()).prop_map(|(i, e)| Expr::unary(UnaryOp::ALL[i], e)),
            (0..BinaryOp::ALL.len(), inner.clone(), inner.clone())
                .prop_map(|(i, a, b)| Expr::binary(BinaryOp::ALL[i], a, b)),
            (inner.clone(), inner.clone(), inner.clone(), inner).prop_map(|(a, b, c, d)| Expr::if_le(a, b, c, d)),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(e in arb_expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e);
    }

    #[test]
    fn evaluation_never_panics_and_keeps_length(e in arb_expr(), bins in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let out = interpret(&e, &[
            ("item", Binding::Scalar(3.0)),
            ("bins", Binding::Vector(&bins)),
            ("x_1", Binding::Scalar(-1.0)),
        ]).unwrap();
        prop_assert_eq!(out.len(), bins.len());
    }
}

#[test]
fn generated_trees_round_trip() {
    let mut rng = seeded(3, 0);
    for _ in 0..2000 {
        let e = random_tree(&mut rng, &["a", "b"], 6);
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }
}
