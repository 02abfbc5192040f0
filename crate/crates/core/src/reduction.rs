//! Lie algebra actions, momentum maps, the subalgebra 𝔤_β, and cyclic
//! reduction in adapted charts.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bundle::{
    complete_lift, differential, exterior_derivative, vertical_lift, Chart, Fiber, OneForm,
    SemibasicForm, VectorFieldQ,
};
use crate::dynamics::ForcedLagrangianSystem;
use crate::expr::{Bindings, Expr, Program, Symbol};
use crate::linalg;
pub use crate::linalg::ExtractionMethod;
use crate::simulate::Trajectory;
use crate::{all_zero, zero_verdict, Error, Result, Verdict};

/// Infinitesimal action `ξ ↦ ξ_Q` of a Lie algebra on `Q`.
#[derive(Debug, Clone)]
pub struct AlgebraAction {
    chart: Chart,
    generators: Vec<VectorFieldQ>,
    /// `structure[a][b][c] = c^c_ab`.
    structure: Vec<Vec<Vec<Expr>>>,
}

impl AlgebraAction {
    /// Checks `c^c_ab = −c^c_ba` and `[ξ_a, ξ_b] + c^c_ab ξ_c = 0`.
    pub fn new(
        chart: &Chart,
        generators: Vec<VectorFieldQ>,
        structure: Vec<Vec<Vec<Expr>>>,
        seed: u64,
    ) -> Result<Self> {
        let k = generators.len();
        if structure.len() != k
            || structure
                .iter()
                .any(|r| r.len() != k || r.iter().any(|c| c.len() != k))
        {
            return Err(Error::Dimension(format!(
                "structure constants must be {k}x{k}x{k}"
            )));
        }
        for g in &generators {
            if g.comps().len() != chart.dim() {
                return Err(Error::Dimension(
                    "generator has wrong number of components".into(),
                ));
            }
        }
        for a in 0..k {
            for b in 0..k {
                let anti: Vec<Expr> = (0..k)
                    .map(|c| &structure[a][b][c] + &structure[b][a][c])
                    .collect();
                require(
                    all_zero(&anti, seed),
                    "antisymmetry of the structure constants",
                )?;
                let mut closure = generators[a].bracket(chart, &generators[b])?;
                for (c, g) in generators.iter().enumerate() {
                    closure = closure.scale_add(&structure[a][b][c], g);
                }
                require(
                    closure.is_zero(seed),
                    &format!("bracket closure for ({a}, {b})"),
                )?;
            }
        }
        Ok(AlgebraAction {
            chart: chart.clone(),
            generators,
            structure,
        })
    }

    pub fn abelian(chart: &Chart, generators: Vec<VectorFieldQ>, seed: u64) -> Result<Self> {
        let k = generators.len();
        Self::new(
            chart,
            generators,
            vec![vec![vec![Expr::zero(); k]; k]; k],
            seed,
        )
    }

    /// Rotations `ξ_Q(q) = ξ × q` of a three-dimensional chart, `c^c_ab = ε_abc`.
    pub fn so3(chart: &Chart) -> Result<Self> {
        if chart.dim() != 3 {
            return Err(Error::Dimension("so(3) acts on three coordinates".into()));
        }
        let q: Vec<Expr> = (0..3).map(|i| chart.q(i)).collect();
        let gens = vec![
            vec![Expr::zero(), -&q[2], q[1].clone()],
            vec![q[2].clone(), Expr::zero(), -&q[0]],
            vec![-&q[1], q[0].clone(), Expr::zero()],
        ]
        .into_iter()
        .map(|c| VectorFieldQ::new(chart, c))
        .collect::<Result<Vec<_>>>()?;
        let mut s = vec![vec![vec![Expr::zero(); 3]; 3]; 3];
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            s[a][b][c] = Expr::one();
            s[b][a][c] = Expr::int(-1);
        }
        Self::new(chart, gens, s, 0)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[VectorFieldQ] {
        &self.generators
    }

    pub fn structure(&self) -> &[Vec<Vec<Expr>>] {
        &self.structure
    }

    /// `ξ_Q = Σ ξ^a ξ^{(a)}_Q`.
    pub fn field(&self, coeffs: &[Expr]) -> Result<VectorFieldQ> {
        if coeffs.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients",
                self.dim()
            )));
        }
        let zero = VectorFieldQ::new(&self.chart, vec![Expr::zero(); self.chart.dim()])?;
        Ok(coeffs
            .iter()
            .zip(&self.generators)
            .fold(zero, |acc, (c, g)| acc.scale_add(c, g)))
    }

    /// Algebra bracket `[ξ, η]^c = c^c_ab ξ^a η^b` of numeric coefficient vectors.
    pub fn bracket_coeffs(&self, x: &[f64], y: &[f64], params: &Bindings) -> Result<Vec<f64>> {
        let k = self.dim();
        let mut out = vec![0.0; k];
        for a in 0..k {
            for b in 0..k {
                for (c, o) in out.iter_mut().enumerate() {
                    let s = &self.structure[a][b][c];
                    if !s.is_literal_zero() {
                        *o += s.eval(params)? * x[a] * y[b];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn require(v: Verdict, what: &str) -> Result<()> {
    match v {
        Verdict::True => Ok(()),
        Verdict::False => Err(Error::Precondition(format!("{what} fails"))),
        Verdict::Indeterminate => Err(Error::Indeterminate(what.to_string())),
    }
}

/// `J_a = α_L(ξ^{(a)c}_Q)`.
pub fn momentum_component(
    sys: &ForcedLagrangianSystem,
    action: &AlgebraAction,
    a: usize,
) -> Result<Expr> {
    let g = action
        .generators
        .get(a)
        .ok_or_else(|| Error::Dimension(format!("no generator {a}")))?;
    let xc = complete_lift(sys.chart(), g)?;
    Ok(sys.alpha().eval(&xc).simplify())
}

/// `dJ_a − i_{ξ^{(a)c}} ω_L`.
pub fn momentum_map_residual(
    sys: &ForcedLagrangianSystem,
    action: &AlgebraAction,
    a: usize,
) -> Result<OneForm> {
    let c = sys.chart();
    let j = momentum_component(sys, action, a)?;
    let xc = complete_lift(c, &action.generators[a])?;
    Ok(differential(c, Fiber::Velocity, &j)?.sub(&sys.omega().contract(&xc)))
}

/// `ξ^{(a)c}_Q(L)` for every generator.
pub fn invariance_residuals(
    sys: &ForcedLagrangianSystem,
    action: &AlgebraAction,
) -> Result<Vec<Expr>> {
    let c = sys.chart();
    action
        .generators
        .iter()
        .map(|g| Ok(complete_lift(c, g)?.apply(c, sys.lagrangian())?.simplify()))
        .collect()
}

fn require_invariant(sys: &ForcedLagrangianSystem, action: &AlgebraAction) -> Result<()> {
    let res = invariance_residuals(sys, action)?;
    require(
        all_zero(&res, sys.seed()),
        "invariance of the Lagrangian under the action",
    )
}

#[derive(Debug, Clone)]
pub struct GBetaMembership {
    pub member: Verdict,
    /// `β(ξ_Q^c)`.
    pub force: Expr,
    /// `i_{ξ_Q^c} dβ`.
    pub invariance: OneForm,
}

fn g_beta_residuals(sys: &ForcedLagrangianSystem, field: &VectorFieldQ) -> Result<(Expr, OneForm)> {
    let c = sys.chart();
    let xc = complete_lift(c, field)?;
    let force = sys.force().eval(&xc).simplify();
    let dbeta = exterior_derivative(c, &sys.force().to_one_form())?;
    Ok((force, dbeta.contract(&xc)))
}

/// Whether `ξ = Σ ξ^a e_a` lies in `𝔤_β`.
pub fn in_g_beta(
    sys: &ForcedLagrangianSystem,
    action: &AlgebraAction,
    coeffs: &[Expr],
) -> Result<GBetaMembership> {
    require_invariant(sys, action)?;
    let (force, invariance) = g_beta_residuals(sys, &action.field(coeffs)?)?;
    let member = zero_verdict(&force, sys.seed()).and(invariance.is_zero(sys.seed()));
    Ok(GBetaMembership {
        member,
        force,
        invariance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GBetaBasis {
    /// Coefficient vectors in reduced row echelon form.
    pub basis: Vec<Vec<Expr>>,
    pub method: ExtractionMethod,
    pub closed: bool,
}

impl GBetaBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn numeric(&self) -> Vec<Vec<f64>> {
        self.basis
            .iter()
            .map(|v| v.iter().map(|e| e.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

/// Basis of `𝔤_β`: the coefficient vectors annihilating `β(ξ_Q^c)` and
/// `i_{ξ_Q^c}dβ` identically. Parameters take the chart's values.
pub fn g_beta_basis(sys: &ForcedLagrangianSystem, action: &AlgebraAction) -> Result<GBetaBasis> {
    require_invariant(sys, action)?;
    let c = sys.chart();
    let k = action.dim();
    // conditions[j][a]: condition j evaluated on generator a
    let mut conditions: Vec<Vec<Expr>> = Vec::new();
    for g in &action.generators {
        let (force, inv) = g_beta_residuals(sys, g)?;
        let mut per = vec![force];
        per.extend(inv.coeffs().iter().map(Expr::simplify));
        if conditions.is_empty() {
            conditions = vec![Vec::with_capacity(k); per.len()];
        }
        for (j, e) in per.into_iter().enumerate() {
            conditions[j].push(e);
        }
    }
    let params = c.parameter_bindings();
    let (basis_f, method) = linalg::identity_null_space(c, &conditions, k, &params, sys.seed())?;
    let closed = span_closed(action, &basis_f, &params)?;
    Ok(GBetaBasis {
        basis: basis_f
            .iter()
            .map(|v| v.iter().map(|&x| Expr::rational(linalg::snap(x))).collect())
            .collect(),
        method,
        closed,
    })
}

fn span_closed(action: &AlgebraAction, basis: &[Vec<f64>], params: &Bindings) -> Result<bool> {
    let d = basis.len();
    if d == 0 {
        return Ok(true);
    }
    let k = action.dim();
    let b = DMatrix::from_fn(k, d, |i, j| basis[j][i]);
    let pinv = b
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Integration(e.to_string()))?;
    for x in basis {
        for y in basis {
            let w = nalgebra::DVector::from_vec(action.bracket_coeffs(x, y, params)?);
            let resid = &b * (&pinv * &w) - &w;
            if resid.norm() > linalg::RANK_TOL * (1.0 + w.norm()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Residuals of the two conditions on `𝓡` for `ξ^{(a)} ∈ 𝔤_𝓡`.
#[derive(Debug, Clone)]
pub struct GRConditions {
    /// `ξ_Q^v(𝓡)`.
    pub vertical: Expr,
    /// `S*d(ξ_Q^c(𝓡))`, i.e. `∂(ξ_Q^c(𝓡))/∂q̇^i`.
    pub basic: Vec<Expr>,
}

impl GRConditions {
    pub fn verdict(&self, seed: u64) -> Verdict {
        zero_verdict(&self.vertical, seed).and(all_zero(&self.basic, seed))
    }
}

pub fn g_r_conditions(action: &AlgebraAction, r: &Expr) -> Result<Vec<GRConditions>> {
    let c = &action.chart;
    action
        .generators
        .iter()
        .map(|g| {
            let vertical = vertical_lift(c, g).apply(c, r)?.simplify();
            let xcr = complete_lift(c, g)?.apply(c, r)?;
            let basic = xcr
                .gradient(c.velocities())?
                .iter()
                .map(Expr::simplify)
                .collect();
            Ok(GRConditions { vertical, basic })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MomentumConservation {
    /// `ξ_{L,β}(J_a)`.
    pub rate: Expr,
    /// `β(ξ^{(a)c}_Q)`.
    pub force: Expr,
    pub rate_verdict: Verdict,
    pub force_verdict: Verdict,
}

impl MomentumConservation {
    pub fn conserved(&self) -> Verdict {
        self.rate_verdict
    }

    pub fn consistent(&self) -> bool {
        self.rate_verdict == self.force_verdict
    }
}

pub fn momentum_conservation_check(
    sys: &ForcedLagrangianSystem,
    action: &AlgebraAction,
    a: usize,
) -> Result<MomentumConservation> {
    let j = momentum_component(sys, action, a)?;
    let rate = sys.time_derivative(&j)?.simplify();
    let xc = complete_lift(sys.chart(), &action.generators[a])?;
    let force = sys.force().eval(&xc).simplify();
    Ok(MomentumConservation {
        rate_verdict: zero_verdict(&rate, sys.seed()),
        force_verdict: zero_verdict(&force, sys.seed()),
        rate,
        force,
    })
}

/// A system reduced at a fixed value of the momentum conjugate to a cyclic
/// coordinate.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub system: ForcedLagrangianSystem,
    pub full_chart: Chart,
    pub cyclic: usize,
    /// Parameter holding the momentum value.
    pub mu: Symbol,
    pub mu_value: f64,
    /// `q̇^c` solved from `p_c = μ`, on the reduced chart.
    pub cyclic_velocity: Expr,
    /// `E_L∘ι − E_{L_μ}` vanishes.
    pub energy_consistent: Verdict,
}

fn independent_of(e: &Expr, s: &Symbol, seed: u64) -> Result<bool> {
    if !e.depends_on(s) {
        return Ok(true);
    }
    Ok(zero_verdict(&e.diff(s)?, seed) == Verdict::True)
}

/// Routh reduction: eliminate `q̇^c` through `∂L/∂q̇^c = μ` and take
/// `L_μ = L − μ q̇^c` on the remaining coordinates. The momentum value enters
/// as a chart parameter named `mu` (or `mu_<coordinate>` if taken).
pub fn cyclic_reduce(
    sys: &ForcedLagrangianSystem,
    cyclic: usize,
    mu: f64,
) -> Result<ReducedSystem> {
    let c = sys.chart();
    let n = c.dim();
    if cyclic >= n {
        return Err(Error::Dimension(format!("no coordinate {cyclic}")));
    }
    if n < 2 {
        return Err(Error::Dimension(
            "reduction needs at least two coordinates".into(),
        ));
    }
    let seed = sys.seed();
    let qc = &c.coords()[cyclic];
    let vc = &c.velocities()[cyclic];
    if !independent_of(sys.lagrangian(), qc, seed)? {
        return Err(Error::Precondition(format!(
            "`{}` is not cyclic in L",
            qc.name()
        )));
    }
    for b in sys.force().comps() {
        if !independent_of(b, qc, seed)? {
            return Err(Error::Precondition(format!(
                "force depends on `{}`",
                qc.name()
            )));
        }
    }
    if zero_verdict(&sys.force().comps()[cyclic], seed) != Verdict::True {
        return Err(Error::Precondition(format!(
            "force has a `d{}` component; the conjugate momentum is not conserved",
            qc.name()
        )));
    }
    let pc = sys.alpha().coeffs()[cyclic].clone();
    let slope = pc.diff(vc)?.simplify();
    if !independent_of(&slope, vc, seed)? {
        return Err(Error::Precondition(format!(
            "momentum relation is not linear in `{}`",
            vc.name()
        )));
    }
    if zero_verdict(&slope, seed) == Verdict::True {
        return Err(Error::Precondition(
            "momentum relation cannot be solved".into(),
        ));
    }
    let offset = pc.subs1(vc, &Expr::zero()).simplify();

    let taken = |name: &str| c.lookup(name).is_some();
    let mu_name = if taken("mu") {
        format!("mu_{}", qc.name())
    } else {
        "mu".to_string()
    };
    let mu_sym = Symbol::parameter(&mu_name);
    let solved = ((mu_sym.expr() - offset) / slope).simplify();

    let names: Vec<&str> = c
        .coords()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != cyclic)
        .map(|(_, s)| s.name())
        .collect();
    let mut params: Vec<(String, f64)> = c
        .parameters()
        .iter()
        .map(|(s, v)| (s.name().to_string(), *v))
        .collect();
    params.push((mu_name, mu));
    let param_refs: Vec<(&str, f64)> = params.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    let rc = Chart::with_parameters(&names, &param_refs)?;

    let routhian = (sys.lagrangian() - mu_sym.expr() * vc.expr())
        .subs1(vc, &solved)
        .simplify();
    let beta: Vec<Expr> = sys
        .force()
        .comps()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != cyclic)
        .map(|(_, b)| b.subs1(vc, &solved).simplify())
        .collect();
    let beta = SemibasicForm::new(&rc, Fiber::Velocity, beta)?;
    let reduced = ForcedLagrangianSystem::new(rc, routhian, beta, seed)?;
    let energy_gap = sys.energy().subs1(vc, &solved) - reduced.energy();
    Ok(ReducedSystem {
        energy_consistent: zero_verdict(&energy_gap, seed),
        system: reduced,
        full_chart: c.clone(),
        cyclic,
        mu: mu_sym,
        mu_value: mu,
        cyclic_velocity: solved,
    })
}

impl ReducedSystem {
    /// Drop `q^c` and `q̇^c` from a full `(q, q̇)` state.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        let n = self.full_chart.dim();
        full.iter()
            .enumerate()
            .filter(|&(i, _)| i != self.cyclic && i != n + self.cyclic)
            .map(|(_, v)| *v)
            .collect()
    }

    /// `p_c` of a full state, for choosing `μ`.
    pub fn conjugate_momentum(
        sys: &ForcedLagrangianSystem,
        cyclic: usize,
        full: &[f64],
    ) -> Result<f64> {
        let c = sys.chart();
        let p = Program::compile(
            &sys.alpha().coeffs()[cyclic],
            &c.phase_vars(Fiber::Velocity),
            &c.parameter_bindings(),
        )?;
        Ok(p.eval(full)?)
    }

    /// `q^c(t) = q^c(0) + ∫ q̇^c dt` along a reduced trajectory, by
    /// piecewise-cubic quadrature.
    pub fn reconstruct(&self, traj: &Trajectory, qc0: f64) -> Result<Vec<f64>> {
        let rc = self.system.chart();
        let prog = Program::compile(
            &self.cyclic_velocity,
            &rc.phase_vars(Fiber::Velocity),
            &rc.parameter_bindings(),
        )?;
        let v: Vec<f64> = traj
            .states
            .iter()
            .map(|x| prog.eval(x))
            .collect::<std::result::Result<_, _>>()?;
        cumulative_quadrature(&traj.times, &v, qc0)
    }

    /// Full `(q, q̇)` states from a reduced trajectory.
    pub fn lift_trajectory(&self, traj: &Trajectory, qc0: f64) -> Result<Trajectory> {
        let qc = self.reconstruct(traj, qc0)?;
        let rc = self.system.chart();
        let prog = Program::compile(
            &self.cyclic_velocity,
            &rc.phase_vars(Fiber::Velocity),
            &rc.parameter_bindings(),
        )?;
        let m = rc.dim();
        let states = traj
            .states
            .iter()
            .zip(&qc)
            .map(|(x, &q)| {
                let v = prog.eval(x)?;
                let mut full = Vec::with_capacity(2 * m + 2);
                full.extend_from_slice(&x[..self.cyclic]);
                full.push(q);
                full.extend_from_slice(&x[self.cyclic..m]);
                full.extend_from_slice(&x[m..m + self.cyclic]);
                full.push(v);
                full.extend_from_slice(&x[m + self.cyclic..]);
                Ok(full)
            })
            .collect::<Result<_>>()?;
        Ok(Trajectory {
            times: traj.times.clone(),
            states,
            truncated: traj.truncated.clone(),
        })
    }
}

/// Integral of sampled values using the cubic through four neighbouring
/// nodes on every interval, integrated by three-point Gauss-Legendre.
fn cumulative_quadrature(t: &[f64], v: &[f64], start: f64) -> Result<Vec<f64>> {
    if t.len() != v.len() || t.is_empty() {
        return Err(Error::Integration("empty or mismatched samples".into()));
    }
    let mut out = Vec::with_capacity(t.len());
    out.push(start);
    let n = t.len();
    let nodes = [
        (-(0.6f64).sqrt(), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        ((0.6f64).sqrt(), 5.0 / 9.0),
    ];
    for i in 0..n - 1 {
        let (a, b) = (t[i], t[i + 1]);
        let idx: Vec<usize> = if n < 4 {
            (0..n).collect()
        } else {
            let lo = i.saturating_sub(1).min(n - 4);
            (lo..lo + 4).collect()
        };
        let interp = |x: f64| -> f64 {
            idx.iter()
                .map(|&j| {
                    let w: f64 = idx
                        .iter()
                        .filter(|&&k| k != j)
                        .map(|&k| (x - t[k]) / (t[j] - t[k]))
                        .product();
                    w * v[j]
                })
                .sum()
        };
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let inc: f64 = nodes
            .iter()
            .map(|&(x, w)| w * interp(mid + half * x))
            .sum::<f64>()
            * half;
        if !inc.is_finite() {
            return Err(Error::Integration(format!("non-finite increment at t={a}")));
        }
        out.push(out[i] + inc);
    }
    Ok(out)
}
