use std::sync::Arc;

use nlell_core::builtin::builtin_example;
use nlell_core::certify::{estimate_tau_theta, CertifyOptions};
use nlell_core::elliptic::{assemble, BoundarySpec, DiscreteOperator, OperatorSpec};
use nlell_core::expr::{parse_expression, parse_with, BinOp, Expr, Func, ParseContext, Var};
use nlell_core::grid::{build_grid, Domain, Resolution, ScalarField, SystemState};
use nlell_core::problem::{eval_functional, functional_range, random_states, Problem};
use nlell_core::solver::apply_map;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..1000).prop_map(f64::from),
        (0.0f64..1e3),
        (1e-9f64..1e-3),
        (1e15f64..1e22),
    ]
}

fn pointwise_leaf() -> BoxedStrategy<Expr> {
    prop_oneof![
        number().prop_map(Expr::Num),
        Just(Expr::Var(Var::X1)),
        Just(Expr::Var(Var::X2)),
        Just(Expr::Var(Var::W)),
        (0usize..3).prop_map(|k| Expr::Var(Var::U(k))),
    ]
    .boxed()
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
        Just(BinOp::Pow),
    ]
}

fn unary_func() -> impl Strategy<Value = Func> {
    prop_oneof![
        Just(Func::Exp),
        Just(Func::Sin),
        Just(Func::Cos),
        Just(Func::Sqrt),
        Just(Func::Abs),
        Just(Func::Inv),
    ]
}

fn grow(leaf: BoxedStrategy<Expr>) -> BoxedStrategy<Expr> {
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (unary_func(), inner.clone()).prop_map(|(f, e)| Expr::Call(f, vec![e])),
            (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner)
                .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
        ]
    })
    .boxed()
}

fn pointwise_expr() -> BoxedStrategy<Expr> {
    grow(pointwise_leaf())
}

fn integrand_expr() -> BoxedStrategy<Expr> {
    grow(
        prop_oneof![
            number().prop_map(Expr::Num),
            Just(Expr::Var(Var::X1)),
            (0usize..3).prop_map(|k| Expr::Var(Var::U(k))),
        ]
        .boxed(),
    )
}

fn functional_expr() -> BoxedStrategy<Expr> {
    let coord = prop_oneof![(-1.0f64..1.0), Just(0.0), Just(-0.5)];
    grow(
        prop_oneof![
            number().prop_map(Expr::Num),
            integrand_expr().prop_map(|e| Expr::Integral(Box::new(e))),
            (0usize..3, coord.clone(), coord).prop_map(|(component, a, b)| Expr::PointEval {
                component,
                point: [a, b]
            }),
        ]
        .boxed(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pointwise_round_trip(e in pointwise_expr()) {
        let text = e.to_string();
        let back = parse_expression(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn functional_round_trip(e in functional_expr()) {
        let text = e.to_string();
        let back = parse_with(&text, ParseContext::functional(3))
            .map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn arbitrary_text_never_panics(s in "[ -~]{0,40}") {
        if let Err(err) = parse_expression(&s) {
            prop_assert!(err.position <= s.len());
        }
    }

    #[test]
    fn token_soup_never_panics(parts in prop::collection::vec(
        prop::sample::select(vec!["u1", "x2", "w", "(", ")", "+", "-", "*", "/", "^", "exp", "min", ",", "1", "2.5e", "INT", "EVAL", "[", "]", "pi", "."]),
        0..16,
    )) {
        let s = parts.concat();
        for ctx in [ParseContext::permissive(), ParseContext::functional(2)] {
            if let Err(err) = parse_with(&s, ctx) {
                prop_assert!(err.position <= s.len());
            }
        }
    }
}

#[test]
fn malformed_inputs_are_positioned() {
    let cases: &[(&str, usize)] = &[
        ("", 0),
        ("exp(", 4),
        ("1 +", 3),
        ("u1 $ 2", 3),
        ("(u1", 3),
        ("u1)", 2),
        ("foo(1)", 0),
        ("min(1)", 0),
        ("1.2.3", 0),
        ("2 3", 2),
    ];
    for &(src, pos) in cases {
        let err = parse_expression(src).expect_err(src);
        assert_eq!(err.position, pos, "{src}: {err}");
    }
    let err = parse_with("u3", ParseContext::pointwise(2)).unwrap_err();
    assert_eq!(err.position, 0);
    let err = parse_with("EVAL(1,[0,0]) + u1", ParseContext::functional(2)).unwrap_err();
    assert_eq!(err.position, 16);
}

// ---------------------------------------------------------------------------
// Solution operator
// ---------------------------------------------------------------------------

fn operators() -> Vec<DiscreteOperator> {
    let disk = Arc::new(build_grid(&Domain::unit_disk(), Resolution::new(12, 24)).unwrap());
    let rect = Arc::new(
        build_grid(
            &Domain::Rectangle {
                x: [0.0, 2.0],
                y: [-1.0, 0.5],
            },
            Resolution::new(16, 12),
        )
        .unwrap(),
    );
    let adv = OperatorSpec::parse("1+x1/4", "0.1", "1", "3*x2", "-2", "x1^2").unwrap();
    vec![
        assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &disk).unwrap(),
        assemble(&adv, &BoundarySpec::dirichlet(), &rect).unwrap(),
        assemble(&OperatorSpec::shifted_laplacian(1.0), &BoundarySpec::neumann(), &rect).unwrap(),
    ]
}

fn random_field(len: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    ScalarField::new((0..len).map(|_| rng.gen_range(lo..=hi)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn k_is_positive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in operators() {
            let g = random_field(op.grid().len(), &mut rng, 0.0, 10.0);
            let u = op.apply_k(&g).unwrap();
            prop_assert!(u.min() >= -1e-12, "min {}", u.min());
        }
    }

    #[test]
    fn k_is_linear(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in operators() {
            let n = op.grid().len();
            let f = random_field(n, &mut rng, -1.0, 1.0);
            let g = random_field(n, &mut rng, -1.0, 1.0);
            let combo = ScalarField::new(f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect());
            let lhs = op.apply_k(&combo).unwrap();
            let (kf, kg) = (op.apply_k(&f).unwrap(), op.apply_k(&g).unwrap());
            let rhs = ScalarField::new(kf.values().iter().zip(kg.values()).map(|(x, y)| a * x + b * y).collect());
            let scale = 1.0 + kf.sup_norm() * a.abs() + kg.sup_norm() * b.abs();
            prop_assert!(lhs.distance(&rhs) <= 1e-10 * scale);
        }
    }

    #[test]
    fn k_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in operators() {
            let n = op.grid().len();
            let f = random_field(n, &mut rng, -3.0, 3.0);
            let bump = random_field(n, &mut rng, 0.0, 2.0);
            let g = ScalarField::new(f.values().iter().zip(bump.values()).map(|(x, y)| x + y).collect());
            let (kf, kg) = (op.apply_k(&f).unwrap(), op.apply_k(&g).unwrap());
            for (x, y) in kf.values().iter().zip(kg.values()) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Functionals, sampling and the fixed-point map
// ---------------------------------------------------------------------------

#[test]
fn monotone_functionals_stay_within_corner_endpoints() {
    let p = Problem::new(builtin_example("ex-3.1").unwrap(), Some(Resolution::new(16, 32))).unwrap();
    let grid = p.grid();
    let rho = p.rho();
    let states = random_states(grid, &rho, 1000, 7);
    for i in 0..p.n() {
        let c = p.component(i);
        for f in [c.w.as_ref().unwrap(), &c.h] {
            let r = functional_range(f, &rho, grid, 9, 0).unwrap();
            assert!(r.exact);
            for s in &states {
                let v = eval_functional(f, s, grid).unwrap();
                assert!(v <= r.hi + 1e-9 && v >= r.lo - 1e-9, "{v} outside [{}, {}]", r.lo, r.hi);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampled_constants_do_not_shrink_with_more_samples(s in 2usize..8, extra in 1usize..8, seed in 0u64..4) {
        let p = Problem::new(builtin_example("ex-3.2").unwrap(), Some(Resolution::new(8, 16))).unwrap();
        let rho = p.rho();
        let at = |samples| CertifyOptions { samples, seed, ..Default::default() };
        for i in 0..p.n() {
            let a = estimate_tau_theta(&p, i, &rho, &at(s)).unwrap();
            let b = estimate_tau_theta(&p, i, &rho, &at(s + extra)).unwrap();
            prop_assert!(b.tau >= a.tau && b.theta >= a.theta);
            prop_assert!(b.tau_joint >= a.tau_joint && b.theta_joint >= a.theta_joint);
            prop_assert!(a.tau >= a.tau_joint - 1e-15 && a.theta >= a.theta_joint - 1e-15);
        }
    }
}

#[test]
fn certified_example_maps_box_into_itself() {
    let p = Problem::new(builtin_example("ex-3.1").unwrap(), Some(Resolution::new(16, 32))).unwrap();
    let rho = p.rho();
    for s in random_states(p.grid(), &rho, 100, 11) {
        let image: SystemState = apply_map(&p, &s).unwrap();
        for (i, c) in image.components().iter().enumerate() {
            assert!(c.min() >= 0.0);
            assert!(c.sup_norm() <= rho[i] + 1e-9);
        }
    }
}
