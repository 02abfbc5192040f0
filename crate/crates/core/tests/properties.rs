use forcedmech_core::bundle::{
    apply_s, complete_lift, form_to_morphism, hessian, liouville, morphism_to_form, vertical_lift,
};
use forcedmech_core::dynamics::poisson_bracket;
use forcedmech_core::expr::is_zero;
use forcedmech_core::rayleigh::{
    energy_dissipation_residual, euler_homogeneity_residual, force_from_dissipation,
    verify_rayleigh_lemma,
};
use forcedmech_core::{
    Bindings, Chart, Expr, Fiber, ForcedLagrangianSystem, PhaseField, SemibasicForm, Symbol,
    VectorFieldQ, Verdict,
};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn z(e: &Expr) -> bool {
    is_zero(e, 7).unwrap()
}

/// Random polynomial in the given symbols with small integer coefficients.
fn poly(vars: Vec<Symbol>, max_terms: usize, max_deg: u32) -> impl Strategy<Value = Expr> {
    let nv = vars.len();
    prop::collection::vec(
        (-4i64..=4, prop::collection::vec(0..=max_deg, nv)),
        1..=max_terms,
    )
    .prop_map(move |terms| {
        Expr::sum(terms.into_iter().map(|(c, exps)| {
            let mut fs = vec![Expr::int(c)];
            for (v, e) in vars.iter().zip(exps) {
                fs.push(v.expr().powi(e as i64));
            }
            Expr::product(fs)
        }))
        .simplify()
    })
}

fn xyz() -> Vec<Symbol> {
    ["x", "y", "z"]
        .iter()
        .map(|n| Symbol::coordinate(n))
        .collect()
}

/// Random expression trees over `x, y, z` including elementary functions.
fn tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(|i| xyz()[i].expr()),
        (-3i64..=3).prop_map(Expr::int),
        (1i64..=5, 1i64..=4).prop_map(|(n, d)| Expr::frac(n, d)),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::product),
            (inner.clone(), 2i64..=3).prop_map(|(e, n)| e.powi(n)),
            inner.clone().prop_map(|e| e.sin()),
            inner.clone().prop_map(|e| e.cos()),
            inner.clone().prop_map(|e| (e / 4).exp()),
            inner.prop_map(|e| -e),
        ]
    })
}

fn bindings(vals: &[f64]) -> Bindings {
    ["x", "y", "z"]
        .iter()
        .copied()
        .zip(vals.iter().copied())
        .collect()
}

proptest! {
    #![proptest_config(Config { cases: 200, ..Config::default() })]

    #[test]
    fn derivative_matches_finite_differences(
        e in poly(xyz(), 5, 3),
        which in 0usize..3,
        pts in prop::collection::vec(prop::collection::vec(-1.5f64..1.5, 3), 50),
    ) {
        let s = &xyz()[which];
        let d = e.diff(s).unwrap();
        for p in &pts {
            let h = 1e-6;
            let mut up = p.clone();
            let mut dn = p.clone();
            up[which] += h;
            dn[which] -= h;
            let fd = (e.eval(&bindings(&up)).unwrap() - e.eval(&bindings(&dn)).unwrap()) / (2.0 * h);
            let exact = d.eval(&bindings(p)).unwrap();
            prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "{e}: {exact} vs {fd}");
        }
    }

    #[test]
    fn tree_derivative_matches_finite_differences(
        e in tree(),
        which in 0usize..3,
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 50),
    ) {
        let s = &xyz()[which];
        let d = e.diff(s).unwrap();
        for p in &pts {
            let h = 1e-6;
            let mut up = p.clone();
            let mut dn = p.clone();
            up[which] += h;
            dn[which] -= h;
            let (Ok(a), Ok(b), Ok(exact)) = (
                e.eval(&bindings(&up)),
                e.eval(&bindings(&dn)),
                d.eval(&bindings(p)),
            ) else { continue };
            let fd = (a - b) / (2.0 * h);
            let scale = exact.abs().max(1.0).max(a.abs() * 1e-3);
            prop_assert!((exact - fd).abs() <= 1e-6 * scale, "{e}: {exact} vs {fd}");
        }
    }

    #[test]
    fn simplify_idempotent_and_value_preserving(
        e in tree(),
        p in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let s = e.simplify();
        prop_assert_eq!(s.simplify(), s.clone());
        let b = bindings(&p);
        if let (Ok(a), Ok(c)) = (e.eval(&b), s.eval(&b)) {
            prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(c.abs()).max(1.0));
        }
    }

    #[test]
    fn display_round_trips(e in tree(), p in prop::collection::vec(-1.0f64..1.0, 3)) {
        let table: std::collections::HashMap<String, Symbol> =
            xyz().into_iter().map(|s| (s.name().to_string(), s)).collect();
        let back = forcedmech_core::parse_expr(&e.to_string(), &table).unwrap();
        let b = bindings(&p);
        if let (Ok(a), Ok(c)) = (e.eval(&b), back.eval(&b)) {
            prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

fn chart2() -> Chart {
    Chart::new(&["q1", "q2"]).unwrap()
}

fn q_vars(c: &Chart) -> Vec<Symbol> {
    c.coords().to_vec()
}

fn phase(c: &Chart) -> Vec<Symbol> {
    c.phase_vars(Fiber::Velocity)
}

/// Regular Lagrangian: positive definite kinetic part, a velocity-coupling
/// term and a polynomial potential plus gyroscopic terms.
fn lagrangian() -> impl Strategy<Value = Expr> {
    let c = chart2();
    (
        2i64..=4,
        2i64..=4,
        -1i64..=1,
        poly(q_vars(&c), 3, 2),
        poly(q_vars(&c), 2, 1),
    )
        .prop_map(move |(w1, w2, k, v, g)| {
            let (q1, q2, v1, v2) = (c.q(0), c.q(1), c.qd(0), c.qd(1));
            (Expr::frac(w1, 2) * (q2.powi(2) + 1) * v1.powi(2)
                + Expr::frac(w2, 2) * v2.powi(2)
                + Expr::int(k) * &v1 * &v2
                + g * &v1 * &q2
                + q1 * v2
                - v)
                .simplify()
        })
}

fn force() -> impl Strategy<Value = (Expr, Expr)> {
    let c = chart2();
    (poly(phase(&c), 3, 2), poly(phase(&c), 3, 2))
}

proptest! {
    #![proptest_config(Config { cases: 20, ..Config::default() })]

    #[test]
    fn s_squared_vanishes(a in poly(phase(&chart2()), 3, 2), b in poly(phase(&chart2()), 3, 2),
                          c1 in poly(phase(&chart2()), 3, 2), d in poly(phase(&chart2()), 3, 2)) {
        let c = chart2();
        let x = PhaseField::tangent(&c, vec![a, b], vec![c1, d]).unwrap();
        prop_assert_eq!(apply_s(&apply_s(&x)).is_zero(0), Verdict::True);
    }

    #[test]
    fn vertical_endomorphism_of_complete_lift(a in poly(q_vars(&chart2()), 3, 3), b in poly(q_vars(&chart2()), 3, 3)) {
        let c = chart2();
        let x = VectorFieldQ::new(&c, vec![a, b]).unwrap();
        let diff = apply_s(&complete_lift(&c, &x).unwrap()).sub(&vertical_lift(&c, &x));
        prop_assert_eq!(diff.is_zero(0), Verdict::True);
    }

    #[test]
    fn form_morphism_round_trip((a, b) in force()) {
        let c = chart2();
        let f = SemibasicForm::new(&c, Fiber::Velocity, vec![a, b]).unwrap();
        prop_assert_eq!(morphism_to_form(&form_to_morphism(&f), Fiber::Velocity), f);
    }

    #[test]
    fn forced_dynamics_identities(l in lagrangian(), (a, b) in force()) {
        let c = chart2();
        let w = hessian(&c, &l, 0).unwrap();
        prop_assert!(z(&(&w.w[0][1] - &w.w[1][0])));
        let beta = SemibasicForm::new(&c, Fiber::Velocity, vec![a, b]).unwrap();
        let sys = ForcedLagrangianSystem::new(c.clone(), l, beta, 0).unwrap();
        prop_assert_eq!(sys.omega().is_antisymmetric(0), Verdict::True);
        prop_assert!(!z(&sys.omega().determinant()));
        prop_assert_eq!(sys.sode_residual().unwrap().is_zero(0), Verdict::True);
        prop_assert_eq!(sys.contraction_residual().unwrap().is_zero(0), Verdict::True);
        let free = sys.with_force(SemibasicForm::zero(&c, Fiber::Velocity)).unwrap();
        let split = sys.field().unwrap().sub(free.field().unwrap()).sub(&sys.xi_beta().unwrap());
        prop_assert_eq!(split.is_zero(0), Verdict::True);
    }

    #[test]
    fn poisson_bracket_algebra(
        f in poly(Chart::new(&["q1", "q2"]).unwrap().phase_vars(Fiber::Momentum), 3, 2),
        g in poly(Chart::new(&["q1", "q2"]).unwrap().phase_vars(Fiber::Momentum), 3, 2),
        h in poly(Chart::new(&["q1", "q2"]).unwrap().phase_vars(Fiber::Momentum), 3, 2),
        k in -3i64..=3,
    ) {
        let c = chart2();
        let pb = |a: &Expr, b: &Expr| poisson_bracket(&c, a, b).unwrap();
        prop_assert!(z(&(pb(&f, &g) + pb(&g, &f))));
        let lhs = pb(&(&f * k + &g), &h);
        prop_assert!(z(&(lhs - pb(&f, &h) * k - pb(&g, &h))));
        let jacobi = pb(&f, &pb(&g, &h)) + pb(&g, &pb(&h, &f)) + pb(&h, &pb(&f, &g));
        prop_assert!(z(&jacobi));
    }
}

fn rayleigh() -> impl Strategy<Value = Expr> {
    poly(phase(&chart2()), 4, 2)
}

proptest! {
    #![proptest_config(Config { cases: 30, ..Config::default() })]

    #[test]
    fn rayleigh_lemma_triples(
        r in rayleigh(),
        x1 in poly(q_vars(&chart2()), 2, 2),
        x2 in poly(q_vars(&chart2()), 2, 2),
        t in prop::collection::vec(poly(phase(&chart2()), 2, 2), 4),
    ) {
        let c = chart2();
        let x = VectorFieldQ::new(&c, vec![x1, x2]).unwrap();
        let xt = PhaseField::tangent(&c, t[..2].to_vec(), t[2..].to_vec()).unwrap();
        let lemma = verify_rayleigh_lemma(&c, &r, &x, &xt).unwrap();
        prop_assert_eq!(lemma.verdict(0), Verdict::True);
    }

    #[test]
    fn energy_identity(r in rayleigh()) {
        let c = chart2();
        let l = c.parse("q1d^2/2 + q2d^2 + q1*q2d - q1^2*q2").unwrap();
        let beta = force_from_dissipation(&c, &r).unwrap();
        let sys = ForcedLagrangianSystem::new(c, l, beta, 0).unwrap();
        prop_assert!(z(&energy_dissipation_residual(&sys, &r).unwrap()));
    }

    #[test]
    fn euler_homogeneity(coeffs in prop::collection::vec(-3i64..=3, 4), deg in 1i64..=4,
                         base in poly(q_vars(&chart2()), 2, 2)) {
        let c = chart2();
        let (v1, v2) = (c.qd(0), c.qd(1));
        let r = Expr::sum((0..=deg).map(|i| {
            Expr::int(coeffs[(i % 4) as usize]) * v1.powi(i) * v2.powi(deg - i)
        })) * base;
        prop_assert!(z(&euler_homogeneity_residual(&c, &r, deg).unwrap()));
        let delta = liouville(&c).apply(&c, &r).unwrap();
        prop_assert!(z(&(delta - &r * deg)));
    }
}
