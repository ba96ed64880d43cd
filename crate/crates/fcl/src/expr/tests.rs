use super::*;
use proptest::prelude::*;

fn parse2(src: &str) -> Expression {
    Expression::parse(src, 2).unwrap()
}

#[test]
fn parse_sum_of_two_terms() {
    let e = parse2("x1^2 + sin(x2)");
    match &e.root {
        Node::Add(a, b) => {
            assert!(matches!(**a, Node::Pow(..)));
            assert!(matches!(**b, Node::Func(Func::Sin, _)));
        }
        other => panic!("expected a sum, got {other:?}"),
    }
}

#[test]
fn parse_reports_error_at_end_of_input() {
    let err = Expression::parse("x1 +", 1).unwrap_err();
    match err {
        ParseError::Syntax { pos, .. } => assert_eq!(pos, 4),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn parse_rejects_variable_beyond_dimension() {
    let err = Expression::parse("x3", 2).unwrap_err();
    assert_eq!(
        err,
        ParseError::VariableOutOfRange {
            pos: 0,
            index: 3,
            dim: 2
        }
    );
}

#[test]
fn parse_rejects_unknown_identifier() {
    let err = Expression::parse("foo(x1)", 2).unwrap_err();
    assert!(matches!(err, ParseError::UnknownIdentifier { .. }));
}

#[test]
fn precedence_and_unary_minus() {
    let e = Expression::parse("-x1^2 + 2*x2", 2).unwrap();
    // -x1^2 parses as -(x1^2).
    let v = e.eval_jet2(&[3.0, 1.0]).unwrap();
    assert_eq!(v.value(), -7.0);
}

#[test]
fn exponent_chain_folds_right() {
    let e = Expression::parse("x1^2^3", 1).unwrap();
    let v = e.eval_jet2(&[2.0]).unwrap();
    assert_eq!(v.value(), 256.0); // 2^(2^3)
}

#[test]
fn negative_exponent_literal() {
    let e = Expression::parse("x1^(-2)", 1).unwrap();
    let v = e.eval_jet2(&[2.0]).unwrap();
    assert_eq!(v.value(), 0.25);
}

#[test]
fn eval_square() {
    let e = Expression::parse("x1^2", 1).unwrap();
    let jet = e.eval_jet2(&[3.0]).unwrap();
    assert_eq!(jet.value(), 9.0);
    assert_eq!(jet.grad(), &[6.0]);
    assert_eq!(jet.hess(0, 0), 2.0);
}

#[test]
fn eval_sine_at_origin() {
    let e = Expression::parse("sin(x1)", 1).unwrap();
    let jet = e.eval_jet2(&[0.0]).unwrap();
    assert_eq!(jet.value(), 0.0);
    assert_eq!(jet.grad(), &[1.0]);
    assert_eq!(jet.hess(0, 0), 0.0);
}

#[test]
fn eval_product_rule() {
    let e = parse2("x1*x2");
    let jet = e.eval_jet2(&[2.0, 3.0]).unwrap();
    assert_eq!(jet.value(), 6.0);
    assert_eq!(jet.grad(), &[3.0, 2.0]);
    assert_eq!(jet.hess(0, 1), 1.0);
    assert_eq!(jet.hess(0, 0), 0.0);
    assert_eq!(jet.hess(1, 1), 0.0);
}

#[test]
fn domain_error_names_subexpression() {
    let e = parse2("x1 / (x2 - 1)");
    let err = e.eval_jet2(&[1.0, 1.0]).unwrap_err();
    assert!(err.reason.contains("division by zero"));
    assert!(err.subexpression.contains("x2 - 1"));

    let e = Expression::parse("ln(x1)", 1).unwrap();
    assert!(e.eval_jet2(&[-1.0]).is_err());
    let e = Expression::parse("sqrt(x1)", 1).unwrap();
    assert!(e.eval_jet2(&[-0.5]).is_err());
    let e = Expression::parse("x1^0.5", 1).unwrap();
    assert!(e.eval_jet2(&[-1.0]).is_err());
}

#[test]
fn fd_validate_exponential() {
    let e = Expression::parse("exp(x1)", 1).unwrap();
    let res = e.fd_validate(&[0.5], 1e-5).unwrap();
    assert!(res < 1e-7, "residual {res}");
}

#[test]
fn fd_validate_cubic() {
    let e = Expression::parse("x1^3", 1).unwrap();
    let res = e.fd_validate(&[1.0], 1e-4).unwrap();
    assert!(res < 1e-6, "residual {res}");
}

#[test]
fn fd_validate_constant_is_exact() {
    let e = parse2("7");
    let res = e.fd_validate(&[0.3, -0.8], 1e-5).unwrap();
    assert_eq!(res, 0.0);
}

#[test]
fn fd_validate_every_function() {
    // Each supported function at points inside its domain; step 1e-5 keeps
    // power-of-two alignment problems away from the 1e-4 Hessian budget.
    let cases = [
        ("sin(x1)", 0.4),
        ("cos(x1)", 0.4),
        ("tan(x1)", 0.3),
        ("exp(x1)", 0.2),
        ("ln(x1)", 1.7),
        ("sqrt(x1)", 2.3),
        ("sinh(x1)", 0.6),
        ("cosh(x1)", 0.6),
        ("x1^2.5", 1.9),
        ("x1^(-1)", 1.3),
    ];
    for (src, at) in cases {
        let e = Expression::parse(src, 1).unwrap();
        let jet = e.eval_jet2(&[at]).unwrap();
        let step = 1e-5_f64.max(1e-5 * at.abs());
        let probe = |x: f64| e.eval_value(&[x]).unwrap();
        let grad_fd = (probe(at + step) - probe(at - step)) / (2.0 * step);
        let hess_fd = (probe(at + step) - 2.0 * probe(at) + probe(at - step)) / (step * step);
        assert!(
            (jet.grad()[0] - grad_fd).abs() < 1e-6,
            "{src}: grad mismatch"
        );
        assert!(
            (jet.hess(0, 0) - hess_fd).abs() < 1e-4,
            "{src}: hess mismatch"
        );
    }
}

#[test]
fn evaluation_is_pure() {
    let e = parse2("sin(x1)*exp(x2) + x1^3/x2");
    let a = e.eval_jet2(&[0.7, 1.3]).unwrap();
    let b = e.eval_jet2(&[0.7, 1.3]).unwrap();
    assert_eq!(a, b);
}

// --- property tests -------------------------------------------------------

/// Expressions that are everywhere-defined (no division, log, sqrt), so
/// random points never hit a domain error.
fn safe_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        (-3..=3i32).prop_map(|k| format!("{k}")),
        (1..=3i32).prop_map(|k| format!("x1^{k}")),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialize_reparse_identity(src in safe_expr()) {
        let e = Expression::parse(&src, 2).unwrap();
        let printed = e.to_string();
        let reparsed = Expression::parse(&printed, 2).unwrap();
        prop_assert_eq!(e, reparsed);
    }

    #[test]
    fn sum_of_jets_is_jet_of_sum(
        a in safe_expr(),
        b in safe_expr(),
        x in -1.5f64..1.5,
        y in -1.5f64..1.5
    ) {
        let ea = Expression::parse(&a, 2).unwrap();
        let eb = Expression::parse(&b, 2).unwrap();
        let sum = Expression::parse(&format!("({a}) + ({b})"), 2).unwrap();
        let pt = [x, y];
        let ja = ea.eval_jet2(&pt).unwrap();
        let jb = eb.eval_jet2(&pt).unwrap();
        let js = sum.eval_jet2(&pt).unwrap();
        let direct = ja.add(&jb);
        prop_assert!((js.value() - direct.value()).abs() <= 1e-12 * (1.0 + js.value().abs()));
        for i in 0..2 {
            prop_assert!((js.grad()[i] - direct.grad()[i]).abs()
                <= 1e-12 * (1.0 + js.grad()[i].abs()));
            for j in 0..2 {
                prop_assert!((js.hess(i, j) - direct.hess(i, j)).abs()
                    <= 1e-12 * (1.0 + js.hess(i, j).abs()));
            }
        }
    }

    #[test]
    fn product_of_jets_satisfies_leibniz(
        a in safe_expr(),
        b in safe_expr(),
        x in -1.5f64..1.5,
        y in -1.5f64..1.5
    ) {
        let ea = Expression::parse(&a, 2).unwrap();
        let eb = Expression::parse(&b, 2).unwrap();
        let prod = Expression::parse(&format!("({a})*({b})"), 2).unwrap();
        let pt = [x, y];
        let ja = ea.eval_jet2(&pt).unwrap();
        let jb = eb.eval_jet2(&pt).unwrap();
        let jp = prod.eval_jet2(&pt).unwrap();
        let direct = ja.mul(&jb);
        // Relative tolerance: products of safe expressions stay O(10^2).
        let scale = 1.0 + jp.value().abs().max(direct.value().abs());
        prop_assert!((jp.value() - direct.value()).abs() <= 1e-12 * scale);
        for i in 0..2 {
            let s = 1.0 + jp.grad()[i].abs().max(direct.grad()[i].abs());
            prop_assert!((jp.grad()[i] - direct.grad()[i]).abs() <= 1e-12 * s);
            for j in 0..2 {
                let s = 1.0 + jp.hess(i, j).abs().max(direct.hess(i, j).abs());
                prop_assert!((jp.hess(i, j) - direct.hess(i, j)).abs() <= 1e-12 * s);
            }
        }
    }

    #[test]
    fn jets_match_finite_differences(src in safe_expr(), x in -1.2f64..1.2, y in -1.2f64..1.2) {
        let e = Expression::parse(&src, 2).unwrap();
        let res = e.fd_validate(&[x, y], 1e-5).unwrap();
        // Hessian finite differences are the loose side of the bound.
        prop_assert!(res < 1e-3, "residual {res} for `{src}` at ({x}, {y})");
    }
}
