//! Rayleigh dissipation functions and the forces they generate.

use crate::bundle::{
    apply_s, complete_lift, differential, lie_derivative, liouville, s_star, vertical_lift, Chart,
    Fiber, FibredMorphism, OneForm, PhaseField, SemibasicForm, VectorFieldQ,
};
use crate::dynamics::ForcedLagrangianSystem;
use crate::expr::{Expr, SymbolKind};
use crate::linalg::ExprMatrix;
use crate::{all_zero, zero_verdict, Error, Result, Verdict};

/// `R̄ = S*(d𝓡) = ∂𝓡/∂q̇^i dq^i`.
pub fn force_from_dissipation(chart: &Chart, r: &Expr) -> Result<SemibasicForm> {
    if r.depends_on_kind(SymbolKind::Momentum) {
        return Err(Error::Component(
            "dissipation function may not depend on momenta".into(),
        ));
    }
    let comps = r.gradient(chart.velocities())?;
    SemibasicForm::new(chart, Fiber::Velocity, comps)
}

/// Adding a velocity-free function to `𝓡` leaves the force unchanged.
pub fn gauge_equivalence(chart: &Chart, r: &Expr, f: &Expr) -> Result<bool> {
    if f.depends_on_kind(SymbolKind::Velocity) || f.depends_on_kind(SymbolKind::Momentum) {
        return Err(Error::Precondition(format!(
            "gauge term `{f}` depends on fiber coordinates"
        )));
    }
    Ok(force_from_dissipation(chart, r)? == force_from_dissipation(chart, &(r + f))?)
}

/// Residuals of the three identities relating `R̄` to `𝓡`.
#[derive(Debug, Clone)]
pub struct RayleighLemma {
    /// `R̄(X^c) − X^v(𝓡)`.
    pub complete_lift: Expr,
    /// `L_{X^c}R̄ − S*(d(X^c(𝓡)))`.
    pub lie_derivative: OneForm,
    /// `R̄(X̃) − (S X̃)(𝓡)`.
    pub general_field: Expr,
}

impl RayleighLemma {
    pub fn verdict(&self, seed: u64) -> Verdict {
        zero_verdict(&self.complete_lift, seed)
            .and(self.lie_derivative.is_zero(seed))
            .and(zero_verdict(&self.general_field, seed))
    }
}

pub fn verify_rayleigh_lemma(
    chart: &Chart,
    r: &Expr,
    x: &VectorFieldQ,
    xt: &PhaseField,
) -> Result<RayleighLemma> {
    let rbar = force_from_dissipation(chart, r)?;
    let xc = complete_lift(chart, x)?;
    let first = (rbar.eval(&xc) - vertical_lift(chart, x).apply(chart, r)?).simplify();
    let lhs = lie_derivative(chart, &xc, &rbar.to_one_form())?;
    let rhs = s_star(&differential(chart, Fiber::Velocity, &xc.apply(chart, r)?)?);
    let third = (rbar.eval(xt) - apply_s(xt).apply(chart, r)?).simplify();
    Ok(RayleighLemma {
        complete_lift: first,
        lie_derivative: lhs.sub(&rhs),
        general_field: third,
    })
}

fn require_rayleigh_force(sys: &ForcedLagrangianSystem, r: &Expr) -> Result<()> {
    let want = force_from_dissipation(sys.chart(), r)?;
    let diffs: Vec<Expr> = sys
        .force()
        .comps()
        .iter()
        .zip(want.comps())
        .map(|(a, b)| a - b)
        .collect();
    match all_zero(&diffs, sys.seed()) {
        Verdict::True => Ok(()),
        _ => Err(Error::Precondition(
            "system force is not generated by the dissipation function".into(),
        )),
    }
}

/// `ξ_{L,β}(E_L) + Δ(𝓡)` for `β = S*(d𝓡)`.
pub fn energy_dissipation_residual(sys: &ForcedLagrangianSystem, r: &Expr) -> Result<Expr> {
    require_rayleigh_force(sys, r)?;
    let c = sys.chart();
    Ok((sys.time_derivative(sys.energy())? + liouville(c).apply(c, r)?).simplify())
}

/// `Δ(𝓡) − d·𝓡`, zero for `𝓡` homogeneous of degree `d` in the velocities.
pub fn euler_homogeneity_residual(chart: &Chart, r: &Expr, degree: i64) -> Result<Expr> {
    Ok((liouville(chart).apply(chart, r)? - r * degree).simplify())
}

/// `X^c(L) − X^v(𝓡)`; zero iff `X^v(L)` is conserved.
pub fn rayleigh_symmetry_residual(
    sys: &ForcedLagrangianSystem,
    r: &Expr,
    x: &VectorFieldQ,
) -> Result<Expr> {
    require_rayleigh_force(sys, r)?;
    let c = sys.chart();
    let xc = complete_lift(c, x)?;
    Ok((xc.apply(c, sys.lagrangian())? - vertical_lift(c, x).apply(c, r)?).simplify())
}

/// Dissipation quadratic in the velocities.
#[derive(Debug, Clone)]
pub struct LinearRayleigh {
    pub dissipation: Expr,
    pub force: SemibasicForm,
    pub morphism: FibredMorphism,
}

/// `𝓡 = ½R_ij q̇^i q̇^j`, `R̄ = R_ij q̇^i dq^j`, `D(q,q̇) = (q, R_ij q̇^j)`.
pub fn linear_rayleigh(chart: &Chart, tensor: &ExprMatrix, seed: u64) -> Result<LinearRayleigh> {
    let n = chart.dim();
    if tensor.len() != n || tensor.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("tensor must be {n}x{n}")));
    }
    for row in tensor {
        for e in row {
            if e.depends_on_kind(SymbolKind::Velocity) || e.depends_on_kind(SymbolKind::Momentum) {
                return Err(Error::Component(format!(
                    "tensor entry `{e}` depends on fiber coordinates"
                )));
            }
        }
    }
    let mut asym = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            asym.push(&tensor[i][j] - &tensor[j][i]);
        }
    }
    match all_zero(&asym, seed) {
        Verdict::True => {}
        Verdict::False => return Err(Error::Precondition("tensor is not symmetric".into())),
        Verdict::Indeterminate => {
            return Err(Error::Indeterminate("symmetry of the tensor".into()))
        }
    }
    let qd: Vec<Expr> = chart.velocities().iter().map(|s| s.expr()).collect();
    let mut quad = Vec::new();
    for i in 0..n {
        for j in 0..n {
            quad.push(&tensor[i][j] * &qd[i] * &qd[j]);
        }
    }
    let dissipation = (Expr::sum(quad) / 2).simplify();
    let comps: Vec<Expr> = (0..n)
        .map(|j| Expr::sum((0..n).map(|i| &tensor[i][j] * &qd[i])).simplify())
        .collect();
    let morphism = FibredMorphism {
        comps: (0..n)
            .map(|i| Expr::sum((0..n).map(|j| &tensor[i][j] * &qd[j])).simplify())
            .collect(),
    };
    Ok(LinearRayleigh {
        dissipation,
        force: SemibasicForm::new(chart, Fiber::Velocity, comps)?,
        morphism,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::is_zero;

    fn z(e: &Expr) -> bool {
        is_zero(e, 0).unwrap()
    }

    #[test]
    fn forces_of_known_dissipations() {
        let c = Chart::with_parameters(&["q"], &[("k", 0.1)]).unwrap();
        let b = force_from_dissipation(&c, &c.parse("k/3*qd^3").unwrap()).unwrap();
        assert_eq!(b.comps()[0], c.parse("k*qd^2").unwrap());

        let c = Chart::with_parameters(&["φ"], &[("μ", 0.1), ("m", 1.0), ("g", 9.8), ("r", 1.0)])
            .unwrap();
        let b = force_from_dissipation(&c, &c.parse("μ*m*g*r*φd/2").unwrap()).unwrap();
        assert_eq!(b.comps()[0], c.parse("μ*m*g*r/2").unwrap());
    }

    #[test]
    fn gauge() {
        let c = Chart::new(&["q"]).unwrap();
        let r = c.parse("qd^2").unwrap();
        assert!(gauge_equivalence(&c, &r, &c.parse("q^2").unwrap()).unwrap());
        assert!(gauge_equivalence(&c, &r, &c.qd(0)).is_err());
        let zero = Expr::zero();
        assert!(
            force_from_dissipation(&c, &(&zero + c.parse("sin(q)").unwrap()))
                .unwrap()
                .is_zero_form()
        );
    }

    #[test]
    fn lemma_on_fluid() {
        let c = Chart::with_parameters(&["q"], &[("k", 0.1), ("m", 1.0)]).unwrap();
        let r = c.parse("k/3*qd^3").unwrap();
        let x = VectorFieldQ::new(&c, vec![c.parse("exp(k/m*q)").unwrap()]).unwrap();
        let xt = liouville(&c);
        let lemma = verify_rayleigh_lemma(&c, &r, &x, &xt).unwrap();
        assert_eq!(lemma.verdict(0), Verdict::True);
        let xc = complete_lift(&c, &x).unwrap();
        let rbar = force_from_dissipation(&c, &r).unwrap();
        assert!(z(&(rbar.eval(&xc) - c.parse("k*qd^2*exp(k/m*q)").unwrap())));
        // contraction with the Liouville field is zero in the dq basis
        assert!(rbar.eval(&xt).is_literal_zero());
    }

    #[test]
    fn energy_identity_and_homogeneity() {
        let c = Chart::with_parameters(&["q"], &[("k", 0.1), ("m", 1.0)]).unwrap();
        let r = c.parse("k/3*qd^3").unwrap();
        let b = force_from_dissipation(&c, &r).unwrap();
        let s = ForcedLagrangianSystem::new(c.clone(), c.parse("m*qd^2/2").unwrap(), b, 0).unwrap();
        assert!(z(&energy_dissipation_residual(&s, &r).unwrap()));
        assert!(z(&euler_homogeneity_residual(&c, &r, 3).unwrap()));
        let quad = c.parse("k*qd^2/2").unwrap();
        assert!(z(&euler_homogeneity_residual(&c, &quad, 2).unwrap()));
        assert!(matches!(
            energy_dissipation_residual(&s, &quad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linear_tensor() {
        let c = Chart::new(&["q1", "q2"]).unwrap();
        let t = vec![
            vec![Expr::zero(), Expr::one()],
            vec![Expr::one(), Expr::zero()],
        ];
        let lr = linear_rayleigh(&c, &t, 0).unwrap();
        assert_eq!(lr.dissipation, c.parse("q1d*q2d").unwrap());
        assert_eq!(lr.force.comps()[0], c.qd(1));
        assert_eq!(lr.force.comps()[1], c.qd(0));
        let bad = vec![
            vec![Expr::zero(), Expr::one()],
            vec![Expr::zero(), Expr::zero()],
        ];
        assert!(matches!(
            linear_rayleigh(&c, &bad, 0),
            Err(Error::Precondition(_))
        ));

        let c1 = Chart::with_parameters(&["q"], &[("c", 1.0)]).unwrap();
        let lr = linear_rayleigh(&c1, &vec![vec![c1.parse("c").unwrap()]], 0).unwrap();
        assert_eq!(lr.dissipation, c1.parse("c*qd^2/2").unwrap());
        assert_eq!(lr.force.comps()[0], c1.parse("c*qd").unwrap());
    }
}
