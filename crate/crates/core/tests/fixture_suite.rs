use forcedmech_core::bundle::{complete_lift, Fiber};
use forcedmech_core::dynamics::check_leg_related;
use forcedmech_core::expr::is_zero;
use forcedmech_core::fixtures::{self, Fixture};
use forcedmech_core::reduction::{
    cyclic_reduce, g_beta_basis, in_g_beta, momentum_map_residual, AlgebraAction, ReducedSystem,
};
use forcedmech_core::simulate::{
    drift_report, integrate, lagrangian_dynamics, CompiledField, Reversed,
};
use forcedmech_core::symmetry::{
    alpha_invariant, analyze_q, analyze_tq, check_forced_symmetry, check_noether_symmetry,
    point_like_correspondence, symmetry_biconditional,
};
use forcedmech_core::{
    Bindings, Expr, ForcedHamiltonianSystem, ForcedLagrangianSystem, VectorFieldQ, Verdict,
};

fn z(e: &Expr) -> bool {
    is_zero(e, 0).unwrap()
}

fn with_extra_candidates(f: &Fixture) -> Vec<(String, VectorFieldQ)> {
    let c = f.chart();
    let mut out = f.q_candidates.clone();
    let radial: Vec<Expr> = (0..c.dim()).map(|i| c.q(i)).collect();
    out.push(("dilation".into(), VectorFieldQ::new(c, radial).unwrap()));
    for i in 0..c.dim() {
        out.push((format!("D{i}"), VectorFieldQ::coordinate(c, i)));
    }
    out
}

#[test]
fn symmetry_biconditional_biconditional_on_fixtures() {
    let mut seen = (0, 0);
    for f in fixtures::all(0).unwrap() {
        for (name, x) in with_extra_candidates(&f) {
            let (lhs, rhs) = symmetry_biconditional(&f.system, &x).unwrap();
            assert_eq!(lhs, rhs, "{} {name}", f.name);
            if lhs.is_true() {
                seen.0 += 1;
            } else {
                seen.1 += 1;
            }
        }
    }
    assert!(seen.0 > 3 && seen.1 > 3, "{seen:?}");
}

#[test]
fn point_like_correspondence_on_fixtures() {
    for f in fixtures::all(0).unwrap() {
        for (name, x) in with_extra_candidates(&f) {
            assert!(
                point_like_correspondence(&f.system, &x).unwrap(),
                "{} {name}",
                f.name
            );
        }
    }
}

#[test]
fn alpha_invariant_noether_fields_are_forced_symmetries() {
    for f in fixtures::all(0).unwrap() {
        for (name, x) in with_extra_candidates(&f) {
            if alpha_invariant(&f.system, &x).unwrap().is_true()
                && check_noether_symmetry(&f.system, &x)
                    .unwrap()
                    .verdict
                    .is_true()
            {
                assert!(
                    z(&check_forced_symmetry(&f.system, &x).unwrap()),
                    "{} {name}",
                    f.name
                );
            }
        }
    }
}

#[test]
fn emitted_quantities_are_conserved_and_do_not_drift() {
    for f in fixtures::all(0).unwrap() {
        let mut emitted = Vec::new();
        for (name, x) in with_extra_candidates(&f) {
            let r = analyze_q(&f.system, &name, &x).unwrap();
            if let Some(q) = r.conserved_quantity {
                assert_eq!(r.conservation, Some(Verdict::True), "{} {name}", f.name);
                emitted.push(q);
            }
        }
        for (name, xt) in &f.tq_candidates {
            let r = analyze_tq(&f.system, name, xt).unwrap();
            if let Some(q) = r.conserved_quantity {
                assert_eq!(r.conservation, Some(Verdict::True), "{} {name}", f.name);
                emitted.push(q);
            }
        }
        if emitted.is_empty() {
            continue;
        }
        let d = lagrangian_dynamics(&f.system, &Bindings::new()).unwrap();
        let tr = integrate(d.as_ref(), &f.initial, 1e-3, 5.0).unwrap();
        let c = f.chart();
        let drifts = drift_report(
            &tr,
            &c.phase_vars(Fiber::Velocity),
            &emitted,
            &c.parameter_bindings(),
        )
        .unwrap();
        for (q, dr) in emitted.iter().zip(drifts) {
            assert!(dr.max_rel <= 1e-6, "{} {q}: {dr:?}", f.name);
        }
    }
}

#[test]
fn reversed_friction_tq_candidates_fail_and_corrected_ones_pass() {
    let disk = fixtures::disk(0).unwrap();
    let reversed = analyze_tq(
        &disk.system,
        "X_reversed",
        disk.tq_candidate("X_reversed").unwrap(),
    )
    .unwrap();
    assert_eq!(
        (reversed.dynamical, reversed.cartan),
        (Verdict::False, Verdict::False)
    );
    assert!(z(
        &(reversed.cartan_quantity.unwrap() - disk.conserved_quantity("C_reversed").unwrap())
    ));
    let fixed = analyze_tq(&disk.system, "X", disk.tq_candidate("X").unwrap()).unwrap();
    assert_eq!(
        (fixed.dynamical, fixed.cartan),
        (Verdict::True, Verdict::True)
    );
    assert!(z(
        &(fixed.conserved_quantity.unwrap() + disk.conserved_quantity("C").unwrap())
    ));

    let pol = fixtures::polisher(0).unwrap();
    for (cand, q, sign) in [("X1", "C1", -2), ("X2", "C2", -2)] {
        let r = analyze_tq(&pol.system, cand, pol.tq_candidate(cand).unwrap()).unwrap();
        assert_eq!(r.cartan, Verdict::True);
        let want = pol.conserved_quantity(q).unwrap() * sign;
        assert!(z(&(r.conserved_quantity.unwrap() - want)));
    }
}

#[test]
fn legendre_relatedness_on_quadratic_fixtures() {
    for f in fixtures::all(0).unwrap() {
        let h = ForcedHamiltonianSystem::from_lagrangian(&f.system).unwrap();
        let rel = check_leg_related(&f.system, &h, 100).unwrap();
        assert!(rel.holds(1e-9), "{} {rel:?}", f.name);
    }
}

#[test]
fn momentum_map_and_energy_invariance() {
    let f = fixtures::central_force_3d(0).unwrap();
    let g = AlgebraAction::so3(f.chart()).unwrap();
    for a in 0..3 {
        assert!(momentum_map_residual(&f.system, &g, a)
            .unwrap()
            .is_zero(0)
            .is_true());
        let xc = complete_lift(f.chart(), &g.generators()[a]).unwrap();
        assert!(z(&xc.apply(f.chart(), f.system.lagrangian()).unwrap()));
        assert!(z(&xc.apply(f.chart(), f.system.energy()).unwrap()));
    }
}

#[test]
fn g_beta_closure_and_corollary() {
    let f = fixtures::central_force_3d(0).unwrap();
    let g = AlgebraAction::so3(f.chart()).unwrap();
    let basis = g_beta_basis(&f.system, &g).unwrap();
    assert_eq!(basis.dim(), 3);
    assert!(basis.closed);
    for v in &basis.basis {
        let m = in_g_beta(&f.system, &g, v).unwrap();
        assert_eq!(m.member, Verdict::True);
        let x = g.field(v).unwrap();
        assert!(z(&check_forced_symmetry(&f.system, &x).unwrap()));
    }

    // translations of the polisher plane with the rotation about the centre
    let pol = fixtures::polisher(0).unwrap();
    let c = pol.chart();
    let gens = vec![
        VectorFieldQ::coordinate(c, 0),
        VectorFieldQ::coordinate(c, 1),
        VectorFieldQ::coordinate(c, 2),
    ];
    let act = AlgebraAction::abelian(c, gens, 0).unwrap();
    let basis = g_beta_basis(&pol.system, &act).unwrap();
    assert_eq!(
        basis.basis,
        vec![vec![Expr::zero(), Expr::zero(), Expr::one()]]
    );
    assert!(basis.closed);
}

#[test]
fn reduction_commutes_with_dynamics() {
    let f = fixtures::planar_central_force(0).unwrap();
    let mu = ReducedSystem::conjugate_momentum(&f.system, 1, &f.initial).unwrap();
    let red = cyclic_reduce(&f.system, 1, mu).unwrap();
    let full = integrate(
        lagrangian_dynamics(&f.system, &Bindings::new())
            .unwrap()
            .as_ref(),
        &f.initial,
        1e-3,
        10.0,
    )
    .unwrap();
    let rt = integrate(
        lagrangian_dynamics(&red.system, &Bindings::new())
            .unwrap()
            .as_ref(),
        &red.project(&f.initial),
        1e-3,
        10.0,
    )
    .unwrap();
    let err = full
        .states
        .iter()
        .zip(&rt.states)
        .map(|(a, b)| {
            red.project(a)
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn polisher_reduction_and_linear_angle() {
    let f = fixtures::polisher(0).unwrap();
    let mu = ReducedSystem::conjugate_momentum(&f.system, 2, &f.initial).unwrap();
    let red = cyclic_reduce(&f.system, 2, mu).unwrap();
    assert_eq!(red.energy_consistent, Verdict::True);
    let full = integrate(
        lagrangian_dynamics(&f.system, &Bindings::new())
            .unwrap()
            .as_ref(),
        &f.initial,
        1e-3,
        3.0,
    )
    .unwrap();
    let rt = integrate(
        lagrangian_dynamics(&red.system, &Bindings::new())
            .unwrap()
            .as_ref(),
        &red.project(&f.initial),
        1e-3,
        3.0,
    )
    .unwrap();
    let theta = red.reconstruct(&rt, f.initial[2]).unwrap();
    for ((a, b), (t, th)) in full
        .states
        .iter()
        .zip(&rt.states)
        .zip(rt.times.iter().zip(&theta))
    {
        for (x, y) in red.project(a).iter().zip(b) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((th - (f.initial[2] + f.initial[5] * t)).abs() < 1e-10);
    }
}

fn oscillator_error(h: f64) -> f64 {
    let f = fixtures::oscillator(0).unwrap();
    let d = lagrangian_dynamics(&f.system, &Bindings::new()).unwrap();
    let tr = integrate(d.as_ref(), &[1.0, 0.0], h, 5.0).unwrap();
    let x = tr.last();
    ((x[0] - 5f64.cos()).powi(2) + (x[1] + 5f64.sin()).powi(2)).sqrt()
}

#[test]
fn rk4_order_and_reversibility() {
    let ratio = oscillator_error(0.1) / oscillator_error(0.05);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");

    let f = fixtures::oscillator(0).unwrap();
    let c = f.chart();
    let d = CompiledField::new(c, f.system.field().unwrap(), &c.parameter_bindings()).unwrap();
    let fwd = integrate(&d, &f.initial, 1e-3, 10.0).unwrap();
    let back = integrate(&Reversed(d), fwd.last(), 1e-3, 10.0).unwrap();
    for (a, b) in back.last().iter().zip(&f.initial) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn conservative_energy_drift() {
    for f in [
        fixtures::oscillator(0).unwrap(),
        fixtures::free_particle(0).unwrap(),
    ] {
        let d = lagrangian_dynamics(&f.system, &Bindings::new()).unwrap();
        let tr = integrate(d.as_ref(), &f.initial, 1e-3, 10.0).unwrap();
        let c = f.chart();
        let dr = drift_report(
            &tr,
            &c.phase_vars(Fiber::Velocity),
            &[f.system.energy().clone()],
            &c.parameter_bindings(),
        )
        .unwrap();
        assert!(dr[0].max_rel < 1e-8, "{} {:?}", f.name, dr[0]);
    }
}

#[test]
fn numeric_fallback_above_symbolic_limit() {
    let names = ["a", "b", "c", "d", "e"];
    let c = forcedmech_core::Chart::new(&names).unwrap();
    let l = c
        .parse("(ad^2 + bd^2 + cd^2 + dd^2 + ed^2)/2 - (a^2 + b^2 + c^2 + d^2 + e^2)/2 + a*bd")
        .unwrap();
    let sys = ForcedLagrangianSystem::conservative(c.clone(), l, 0).unwrap();
    assert!(sys.field().is_err());
    let d = lagrangian_dynamics(&sys, &Bindings::new()).unwrap();
    let x0 = [1.0, 0.5, 0.0, 0.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0];
    let tr = integrate(d.as_ref(), &x0, 1e-3, 5.0).unwrap();
    let dr = drift_report(
        &tr,
        &c.phase_vars(Fiber::Velocity),
        &[sys.energy().clone()],
        &Bindings::new(),
    )
    .unwrap();
    assert!(dr[0].max_rel < 1e-8, "{:?}", dr[0]);
}
