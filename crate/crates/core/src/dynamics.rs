//! Forced dynamics on `TQ` and `T*Q`.
//!
//! The forced Euler-Lagrange field `ξ` solves `i_ξ ω_L = dE_L + β`; in
//! coordinates `d/dt ∂L/∂q̇ − ∂L/∂q = −β`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{
    self, apply_s, differential, liouville, Chart, Fiber, Hessian, LegendreTransform, OneForm,
    PhaseField, SemibasicForm, TwoForm,
};
use crate::expr::{sample_value, Bindings, Expr, SymbolKind};
use crate::linalg::{self, ExprMatrix};
use crate::{all_zero, Error, Result, Verdict};

/// A regular Lagrangian together with an external force.
#[derive(Debug, Clone)]
pub struct ForcedLagrangianSystem {
    chart: Chart,
    l: Expr,
    beta: SemibasicForm,
    seed: u64,
    alpha: OneForm,
    omega: TwoForm,
    hessian: Hessian,
    w_inv: Option<ExprMatrix>,
    energy: Expr,
    field: Option<PhaseField>,
}

impl ForcedLagrangianSystem {
    pub fn new(chart: Chart, l: Expr, beta: SemibasicForm, seed: u64) -> Result<Self> {
        let l = l.simplify();
        if l.depends_on_kind(SymbolKind::Momentum) {
            return Err(Error::Component(
                "Lagrangian may not depend on momenta".into(),
            ));
        }
        if beta.fiber() != Fiber::Velocity {
            return Err(Error::Component("force must be a form on TQ".into()));
        }
        if beta.comps().len() != chart.dim() {
            return Err(Error::Dimension(
                "force has wrong number of components".into(),
            ));
        }
        let hessian = bundle::hessian(&chart, &l, seed)?;
        match hessian.regular {
            Verdict::True => {}
            Verdict::False => {
                return Err(Error::SingularHessian(format!(
                    "det W = {} is identically zero",
                    hessian.det
                )))
            }
            Verdict::Indeterminate => {
                return Err(Error::Indeterminate("regularity of the Hessian".into()))
            }
        }
        let alpha = bundle::poincare_cartan_1form(&chart, &l)?;
        let omega = bundle::exterior_derivative(&chart, &alpha)?.neg();
        let energy = bundle::energy(&chart, &l)?;
        let w_inv = if chart.dim() <= linalg::SYMBOLIC_LIMIT {
            Some(linalg::inverse(&hessian.w)?.0)
        } else {
            None
        };
        let mut sys = ForcedLagrangianSystem {
            chart,
            l,
            beta,
            seed,
            alpha,
            omega,
            hessian,
            w_inv,
            energy,
            field: None,
        };
        sys.field = match &sys.w_inv {
            Some(_) => Some(sys.field_for(&sys.beta)?),
            None => None,
        };
        Ok(sys)
    }

    pub fn conservative(chart: Chart, l: Expr, seed: u64) -> Result<Self> {
        let beta = SemibasicForm::zero(&chart, Fiber::Velocity);
        Self::new(chart, l, beta, seed)
    }

    pub fn with_force(&self, beta: SemibasicForm) -> Result<Self> {
        Self::new(self.chart.clone(), self.l.clone(), beta, self.seed)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.l
    }

    pub fn force(&self) -> &SemibasicForm {
        &self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> &OneForm {
        &self.alpha
    }

    pub fn omega(&self) -> &TwoForm {
        &self.omega
    }

    pub fn hessian(&self) -> &Hessian {
        &self.hessian
    }

    pub fn energy(&self) -> &Expr {
        &self.energy
    }

    /// Right-hand side `∂L/∂q^j − q̇^k ∂²L/∂q^k∂q̇^j − β_j` of `W B = rhs`.
    pub fn el_rhs(&self, beta: &SemibasicForm) -> Result<Vec<Expr>> {
        let c = &self.chart;
        let qd: Vec<Expr> = c.velocities().iter().map(|s| s.expr()).collect();
        let mut out = Vec::with_capacity(c.dim());
        for j in 0..c.dim() {
            let dl_dqd = self.alpha.coeffs()[j].clone();
            let mixed = dl_dqd.directional(c.coords(), &qd)?;
            out.push((self.l.diff(&c.coords()[j])? - mixed - &beta.comps()[j]).simplify());
        }
        Ok(out)
    }

    fn field_for(&self, beta: &SemibasicForm) -> Result<PhaseField> {
        let w_inv = self.w_inv.as_ref().ok_or_else(|| {
            Error::Dimension(format!(
                "symbolic field limited to n <= {}",
                linalg::SYMBOLIC_LIMIT
            ))
        })?;
        let b = linalg::mat_vec(w_inv, &self.el_rhs(beta)?);
        let base = self.chart.velocities().iter().map(|s| s.expr()).collect();
        Ok(PhaseField::raw(Fiber::Velocity, base, b))
    }

    /// `ξ_{L,β}`. Unavailable symbolically above the inversion limit.
    pub fn field(&self) -> Result<&PhaseField> {
        self.field.as_ref().ok_or_else(|| {
            Error::Dimension(format!(
                "symbolic field limited to n <= {}",
                linalg::SYMBOLIC_LIMIT
            ))
        })
    }

    pub fn field_with_force(&self, beta: &SemibasicForm) -> Result<PhaseField> {
        self.field_for(beta)
    }

    /// `ξ_β = −β_i W^{ij} ∂/∂q̇^j`.
    pub fn xi_beta(&self) -> Result<PhaseField> {
        let w_inv = self
            .w_inv
            .as_ref()
            .ok_or_else(|| Error::Dimension("symbolic inverse unavailable".into()))?;
        let neg: Vec<Expr> = self.beta.comps().iter().map(|b| -b).collect();
        let n = self.chart.dim();
        Ok(PhaseField::raw(
            Fiber::Velocity,
            vec![Expr::zero(); n],
            linalg::mat_vec(w_inv, &neg),
        ))
    }

    /// Time derivative of `f` along the forced dynamics.
    pub fn time_derivative(&self, f: &Expr) -> Result<Expr> {
        self.field()?.apply(&self.chart, f)
    }

    /// `d/dt(∂L/∂q̇^i) − ∂L/∂q^i + β_i` along the computed field.
    pub fn forced_el_residual(&self, i: usize) -> Result<Expr> {
        self.forced_el_residual_along(self.field()?, i)
    }

    pub fn forced_el_residual_along(&self, field: &PhaseField, i: usize) -> Result<Expr> {
        let p = &self.alpha.coeffs()[i];
        let dt = field.apply(&self.chart, p)?;
        Ok((dt - self.l.diff(&self.chart.coords()[i])? + &self.beta.comps()[i]).simplify())
    }

    /// `S(ξ) − Δ`.
    pub fn sode_residual(&self) -> Result<PhaseField> {
        Ok(apply_s(self.field()?).sub(&liouville(&self.chart)))
    }

    /// `i_ξ ω_L − dE_L − β`.
    pub fn contraction_residual(&self) -> Result<OneForm> {
        let lhs = self.omega.contract(self.field()?);
        let de = differential(&self.chart, Fiber::Velocity, &self.energy)?;
        Ok(lhs.sub(&de).sub(&self.beta.to_one_form()))
    }

    pub fn legendre(&self) -> Result<LegendreTransform> {
        LegendreTransform::new(&self.chart, &self.l, self.seed)
    }
}

/// Hamiltonian with a semibasic force on `T*Q`.
#[derive(Debug, Clone)]
pub struct ForcedHamiltonianSystem {
    chart: Chart,
    h: Expr,
    gamma: SemibasicForm,
}

impl ForcedHamiltonianSystem {
    pub fn new(chart: Chart, h: Expr, gamma: SemibasicForm) -> Result<Self> {
        let h = h.simplify();
        if h.depends_on_kind(SymbolKind::Velocity) {
            return Err(Error::Component(
                "Hamiltonian may not depend on velocities".into(),
            ));
        }
        if gamma.fiber() != Fiber::Momentum {
            return Err(Error::Component("force must be a form on T*Q".into()));
        }
        Ok(ForcedHamiltonianSystem { chart, h, gamma })
    }

    /// `H∘Leg = E_L` and `Leg*γ = β`, using the symbolic Legendre inverse.
    pub fn from_lagrangian(sys: &ForcedLagrangianSystem) -> Result<Self> {
        let leg = sys.legendre()?;
        let push = |e: &Expr| {
            leg.push_forward(&sys.chart, e).ok_or_else(|| {
                Error::NotInvertible("no symbolic inverse of the Legendre transform".into())
            })
        };
        let h = push(&sys.energy)?;
        let gamma = sys
            .beta
            .comps()
            .iter()
            .map(push)
            .collect::<Result<Vec<_>>>()?;
        let gamma = SemibasicForm::new(&sys.chart, Fiber::Momentum, gamma)?;
        Self::new(sys.chart.clone(), h, gamma)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.h
    }

    pub fn force(&self) -> &SemibasicForm {
        &self.gamma
    }

    /// `X_{H,γ} = (∂H/∂p_i, −∂H/∂q^i − γ_i)`.
    pub fn field(&self) -> Result<PhaseField> {
        let c = &self.chart;
        let mut base = Vec::with_capacity(c.dim());
        let mut vert = Vec::with_capacity(c.dim());
        for i in 0..c.dim() {
            base.push(self.h.diff(&c.momenta()[i])?);
            vert.push(-self.h.diff(&c.coords()[i])? - &self.gamma.comps()[i]);
        }
        Ok(PhaseField::raw(Fiber::Momentum, base, vert))
    }

    /// `{F,H} − γ(X_F)`; `F` is conserved iff this vanishes.
    pub fn conservation_criterion(&self, f: &Expr) -> Result<Expr> {
        let c = &self.chart;
        let bracket = poisson_bracket(c, f, &self.h)?;
        let mut terms = Vec::with_capacity(c.dim());
        for (g, p) in self.gamma.comps().iter().zip(c.momenta()) {
            terms.push(g * f.diff(p)?);
        }
        Ok((bracket - Expr::sum(terms)).simplify())
    }
}

/// Hamiltonian vector field `X_F = (∂F/∂p, −∂F/∂q)` of a function on `T*Q`.
pub fn hamiltonian_vector_field(chart: &Chart, f: &Expr) -> Result<PhaseField> {
    let mut base = Vec::with_capacity(chart.dim());
    let mut vert = Vec::with_capacity(chart.dim());
    for i in 0..chart.dim() {
        base.push(f.diff(&chart.momenta()[i])?);
        vert.push(-f.diff(&chart.coords()[i])?);
    }
    Ok(PhaseField::raw(Fiber::Momentum, base, vert))
}

/// `{F,G} = Σ ∂F/∂q^i ∂G/∂p_i − ∂F/∂p_i ∂G/∂q^i`.
pub fn poisson_bracket(chart: &Chart, f: &Expr, g: &Expr) -> Result<Expr> {
    let mut terms = Vec::with_capacity(2 * chart.dim());
    for (q, p) in chart.coords().iter().zip(chart.momenta()) {
        terms.push(f.diff(q)? * g.diff(p)?);
        terms.push(-(f.diff(p)? * g.diff(q)?));
    }
    Ok(Expr::sum(terms).simplify())
}

/// Outcome of comparing `T(Leg)(ξ_{L,β})` with `X_{H,γ}∘Leg`.
#[derive(Debug, Clone)]
pub struct LegRelation {
    pub symbolic: Verdict,
    pub max_abs_error: f64,
    pub points: usize,
}

impl LegRelation {
    pub fn holds(&self, tol: f64) -> bool {
        self.symbolic.is_true() && self.max_abs_error <= tol
    }
}

/// Check that the Legendre transform carries `ξ_{L,β}` onto `X_{H,γ}`.
///
/// The pushforward has components `(q̇^i, ξ(∂L/∂q̇^i))`; the target field is
/// pulled back through `p = ∂L/∂q̇`. Both a symbolic zero test and a numeric
/// comparison at `points` seeded samples are performed.
pub fn check_leg_related(
    lsys: &ForcedLagrangianSystem,
    hsys: &ForcedHamiltonianSystem,
    points: usize,
) -> Result<LegRelation> {
    let c = lsys.chart();
    let xi = lsys.field()?;
    let leg = lsys.legendre()?;
    let mut pushed: Vec<Expr> = c.velocities().iter().map(|s| s.expr()).collect();
    for p in leg.forward() {
        pushed.push(xi.apply(c, p)?);
    }
    let target: Vec<Expr> = hsys
        .field()?
        .components()
        .iter()
        .map(|e| leg.pull_back(c, e))
        .collect();
    let diffs: Vec<Expr> = pushed.iter().zip(&target).map(|(a, b)| a - b).collect();
    let symbolic = all_zero(&diffs, lsys.seed());

    let mut rng = ChaCha8Rng::seed_from_u64(lsys.seed());
    let params = c.parameter_bindings();
    let mut max_abs_error: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < points && attempts < 10 * points.max(1) {
        attempts += 1;
        let mut b = Bindings::new();
        b.extend(&params);
        for s in c.coords().iter().chain(c.velocities()) {
            b.set(s.name(), sample_value(&mut rng));
        }
        let vals: std::result::Result<Vec<(f64, f64)>, _> = pushed
            .iter()
            .zip(&target)
            .map(|(a, t)| Ok::<_, crate::ExprError>((a.eval(&b)?, t.eval(&b)?)))
            .collect();
        let Ok(vals) = vals else { continue };
        for (a, t) in vals {
            max_abs_error = max_abs_error.max((a - t).abs());
        }
        done += 1;
    }
    Ok(LegRelation {
        symbolic,
        max_abs_error,
        points: done,
    })
}
