use super::*;
use proptest::prelude::*;
use std::collections::HashMap;

fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex::new(v.to_vec())
}

fn jet_map(entries: &[(&[u32], f64)]) -> HashMap<MultiIndex, f64> {
    entries.iter().map(|(p, v)| (mi(p), *v)).collect()
}

fn eval_at(op: &OperatorSpec, x: &[f64], jet: &HashMap<MultiIndex, f64>) -> Result<f64, EvalFault> {
    op.eval_operator(x, &|p| jet.get(p).copied())
}

#[test]
fn burgers_parses_to_first_order_in_t_x() {
    let op = parse("dt(u) + u*dx(u) = 0").unwrap();
    assert_eq!(op.dimension(), 2);
    assert_eq!(op.coords(), ["t", "x"]);
    assert_eq!(op.order(), 1);
    let expected = Expr::Add(
        Box::new(Expr::Jet(mi(&[1, 0]))),
        Box::new(Expr::Mul(Box::new(Expr::Jet(mi(&[0, 0]))), Box::new(Expr::Jet(mi(&[0, 1]))))),
    );
    assert_eq!(op.lhs(), &expected);
    assert_eq!(op.rhs(), &Rhs::Expr(Expr::Const(0.0)));
}

#[test]
fn riccati_is_one_dimensional() {
    let op = parse("dt(u) - u^2 = 0").unwrap();
    assert_eq!(op.dimension(), 1);
    assert_eq!(op.order(), 1);
    assert_eq!(
        op.lhs(),
        &Expr::Sub(Box::new(Expr::Jet(mi(&[1]))), Box::new(Expr::Pow(Box::new(Expr::Jet(mi(&[0]))), Exponent::integer(2))))
    );
}

#[test]
fn laplacian_keeps_label_rhs() {
    let op = parse("dxx(u) + dyy(u) = f").unwrap();
    assert_eq!(op.coords(), ["x", "y"]);
    assert_eq!(op.order(), 2);
    assert_eq!(op.rhs_label(), Some("f"));
    assert_eq!(
        op.lhs(),
        &Expr::Add(Box::new(Expr::Jet(mi(&[2, 0]))), Box::new(Expr::Jet(mi(&[0, 2]))))
    );
}

#[test]
fn explicit_multi_index_form() {
    let op = parse("D[1,1](u) + D[0,2](u) = 0").unwrap();
    assert_eq!(op.coords(), ["t", "x"]);
    assert_eq!(op.order(), 2);
    let declared = parse_with_coords("D[2,0,1](u) = 1", &["a".into(), "b".into(), "c".into()]).unwrap();
    assert_eq!(declared.order(), 3);
}

#[test]
fn syntax_errors_carry_offsets() {
    let err = parse("dt(u +").unwrap_err();
    assert!(matches!(err, ParseError::Syntax { .. }));
    assert_eq!(err.offset(), 5);
    assert!(matches!(parse("u + = 1"), Err(ParseError::Syntax { offset: 4, .. })));
    assert!(matches!(parse("u = "), Err(ParseError::Syntax { .. })));
}

#[test]
fn undeclared_coordinate_is_dimension_mismatch() {
    let coords = vec!["t".to_string(), "x".to_string()];
    assert!(matches!(
        parse_with_coords("dy(u) = 0", &coords),
        Err(ParseError::DimensionMismatch { offset: 0, .. })
    ));
    assert!(matches!(
        parse_with_coords("D[1](u) = 0", &coords),
        Err(ParseError::DimensionMismatch { .. })
    ));
    assert!(matches!(parse("dq(u) = 0"), Err(ParseError::DimensionMismatch { .. })));
}

#[test]
fn unknown_function_is_reported() {
    match parse("tanh(u) = 0") {
        Err(ParseError::UnknownFunction { name, offset }) => {
            assert_eq!(name, "tanh");
            assert_eq!(offset, 0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn algebraic_identity_is_flagged() {
    let op = parse("x^2 = 1").unwrap();
    assert!(op.is_algebraic());
    assert!(!parse("u = 5").unwrap().is_algebraic());
}

#[test]
fn rhs_with_unknown_moves_left() {
    let op = parse("dt(u) = u^2").unwrap();
    let jet = jet_map(&[(&[0], 4.0), (&[1], 16.0)]);
    assert_eq!(eval_at(&op, &[0.0], &jet).unwrap(), 0.0);
}

#[test]
fn eval_examples() {
    let burgers = parse("dt(u) + u*dx(u) = 0").unwrap();
    let jet = jet_map(&[(&[0, 0], 2.0), (&[1, 0], 1.0), (&[0, 1], 3.0)]);
    assert_eq!(eval_at(&burgers, &[0.3, -0.1], &jet).unwrap(), 7.0);

    let riccati = parse("dt(u) - u^2 = 0").unwrap();
    let jet = jet_map(&[(&[0], 4.0), (&[1], 16.0)]);
    assert_eq!(eval_at(&riccati, &[0.5], &jet).unwrap(), 0.0);

    let lap = parse("dxx(u) + dyy(u) = f").unwrap();
    let jet = jet_map(&[(&[2, 0], 1.5), (&[0, 2], -0.5)]);
    for x in [[0.0, 0.0], [0.7, -3.0]] {
        assert_eq!(eval_at(&lap, &x, &jet).unwrap(), 1.0);
    }
}

#[test]
fn faults_are_values() {
    let op = parse("log(u) + 1/dx(u) + u^(1/3) = 0").unwrap();
    let at = |u: f64, ux: f64| eval_at(&op, &[0.0], &jet_map(&[(&[0], u), (&[1], ux)]));
    assert_eq!(at(-1.0, 1.0), Err(EvalFault::LogOfNonPositive));
    assert_eq!(at(1.0, 0.0), Err(EvalFault::DivisionByZero));
    let frac = parse("u^(1/3) = 0").unwrap();
    assert_eq!(
        eval_at(&frac, &[0.0], &jet_map(&[(&[0], -8.0)])),
        Err(EvalFault::NegativeBaseFractionalPower)
    );
    assert_eq!(eval_at(&frac, &[0.0], &HashMap::new()), Err(EvalFault::MissingJet));
}

#[test]
fn min_max_and_coordinates() {
    let op = parse("max(u, x) - min(dx(u), 2*x) = 0").unwrap();
    let jet = jet_map(&[(&[0], 1.0), (&[1], 5.0)]);
    assert_eq!(eval_at(&op, &[3.0], &jet).unwrap(), 3.0 - 5.0);
}

#[test]
fn free_jet_variable_ordering() {
    let burgers = parse("dt(u) + u*dx(u) = 0").unwrap();
    assert_eq!(burgers.free_jet_variables(), vec![mi(&[1, 0]), mi(&[0, 1]), mi(&[0, 0])]);
    let riccati = parse("dt(u) - u^2 = 0").unwrap();
    assert_eq!(riccati.free_jet_variables(), vec![mi(&[1]), mi(&[0])]);
    let lap = parse("dxx(u) + dyy(u) + u = f").unwrap();
    assert_eq!(lap.free_jet_variables(), vec![mi(&[2, 0]), mi(&[0, 2]), mi(&[0, 0])]);
}

#[test]
fn field_parse_and_eval() {
    let coords = vec!["x".to_string(), "y".to_string()];
    let f = Field::parse("-2*pi^2*sin(pi*x)*sin(pi*y)", &coords).unwrap();
    let v = f.eval(&[0.5, 0.5]).unwrap();
    assert!((v + 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    assert!(Field::parse("u + x", &coords).is_err());
}

fn arb_expr(n: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..10.0).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
        (0..n).prop_map(Expr::Coord),
        prop::collection::vec(0u32..3, n).prop_map(|v| Expr::Jet(MultiIndex::new(v))),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), -3i64..4, 1i64..4)
                .prop_map(|(a, p, q)| Expr::Pow(Box::new(a), Exponent::new(p, q).unwrap())),
            inner.clone().prop_map(|a| Expr::Call(Func::Sin, vec![a])),
            inner.clone().prop_map(|a| Expr::Call(Func::Exp, vec![a])),
            inner.clone().prop_map(|a| Expr::Call(Func::Abs, vec![a])),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
        ]
    })
}

proptest! {
    #[test]
    fn pretty_print_round_trips(e in arb_expr(2)) {
        let coords = vec!["t".to_string(), "x".to_string()];
        let src = format!("{} = 0", e.pretty(&coords));
        let op = parse_with_coords(&src, &coords).unwrap();
        prop_assert_eq!(op.lhs(), &e);
        prop_assert_eq!(op.order(), op.free_jet_variables().first().map_or(0, |p| p.degree()));
        let again = parse_with_coords(&op.pretty(), &coords).unwrap();
        prop_assert_eq!(again, op);
    }

    #[test]
    fn eval_is_locally_lipschitz(
        e in arb_expr(1),
        vals in prop::collection::vec(-2.0f64..2.0, 3),
        x in -1.0f64..1.0,
    ) {
        let op = OperatorSpec::new(vec!["x".into()], e, Rhs::Expr(Expr::Const(0.0)));
        let jet = |shift: f64| {
            let v = vals.clone();
            move |p: &MultiIndex| Some(v[p.degree() as usize] + shift)
        };
        let h = 1e-9;
        if let (Ok(a), Ok(b)) = (op.eval_operator(&[x], &jet(0.0)), op.eval_operator(&[x], &jet(h))) {
            // smoke check: a Lipschitz constant estimated from a coarser step
            if let Ok(c) = op.eval_operator(&[x], &jet(1e-6)) {
                let lip = ((c - a) / 1e-6).abs();
                if lip.is_finite() && lip < 1e6 && a.abs() < 1e6 {
                    prop_assert!((b - a).abs() <= 10.0 * lip * h + 1e-9 * (1.0 + a.abs()));
                }
            }
        }
    }
}
