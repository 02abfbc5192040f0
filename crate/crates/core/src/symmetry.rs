//! Symmetries of forced Lagrangian and Hamiltonian systems and the conserved
//! quantities they generate.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bundle::{
    self, apply_s, canonical_1form, complete_lift, differential, exterior_derivative,
    lie_derivative, vertical_lift, Chart, Fiber, OneForm, PhaseField, VectorFieldQ,
};
use crate::dynamics::{ForcedHamiltonianSystem, ForcedLagrangianSystem};
use crate::expr::{Expr, Symbol, SymbolKind};
use crate::{all_zero, zero_verdict, Error, Result, Verdict};

/// `X^c(L) − β(X^c)`; zero iff `X` is a symmetry of the forced system.
pub fn check_forced_symmetry(sys: &ForcedLagrangianSystem, x: &VectorFieldQ) -> Result<Expr> {
    let c = sys.chart();
    let xc = complete_lift(c, x)?;
    Ok((xc.apply(c, sys.lagrangian())? - sys.force().eval(&xc)).simplify())
}

/// `X^v(L)`, conserved when `X` is a forced symmetry.
pub fn noether_quantity(sys: &ForcedLagrangianSystem, x: &VectorFieldQ) -> Result<Expr> {
    let residual = check_forced_symmetry(sys, x)?;
    match zero_verdict(&residual, sys.seed()) {
        Verdict::True => vertical_lift(sys.chart(), x).apply(sys.chart(), sys.lagrangian()),
        Verdict::False => Err(Error::NotASymmetry(residual)),
        Verdict::Indeterminate => Err(Error::Indeterminate("forced symmetry residual".into())),
    }
}

pub fn lie_bracket(chart: &Chart, x: &PhaseField, y: &PhaseField) -> Result<PhaseField> {
    x.bracket(chart, y)
}

/// Potential of a closed one-form by the radial homotopy
/// `f(z) = ∫₀¹ Σ θ_a(tz) z^a dt`, so that `f(0) = 0`.
pub fn radial_potential(chart: &Chart, theta: &OneForm) -> Expr {
    let vars = chart.phase_vars(theta.fiber());
    let t = Symbol::new("_t", SymbolKind::Time);
    let scaled: HashMap<Symbol, Expr> = vars
        .iter()
        .map(|v| (v.clone(), t.expr() * v.expr()))
        .collect();
    let integrand = Expr::sum(
        theta
            .coeffs()
            .iter()
            .zip(&vars)
            .filter(|(c, _)| !c.is_literal_zero())
            .map(|(c, v)| c.subs(&scaled) * v.expr()),
    );
    integrand.integrate_unit(&t)
}

/// Closedness of a one-form and, when closed, its normalized potential.
#[derive(Debug, Clone, Serialize)]
pub struct Exactness {
    pub closed: Verdict,
    pub potential: Option<Expr>,
    /// `df − θ` vanishes for the constructed potential.
    pub certified: Verdict,
}

impl Exactness {
    pub fn verdict(&self) -> Verdict {
        self.closed.and(self.certified)
    }
}

pub fn exactness(chart: &Chart, theta: &OneForm, seed: u64) -> Result<Exactness> {
    let closed = exterior_derivative(chart, theta)?.is_zero(seed);
    if closed == Verdict::False {
        return Ok(Exactness {
            closed,
            potential: None,
            certified: Verdict::False,
        });
    }
    let f = radial_potential(chart, theta);
    let certified = differential(chart, theta.fiber(), &f)?
        .sub(theta)
        .is_zero(seed);
    Ok(Exactness {
        closed,
        potential: (certified != Verdict::False).then_some(f),
        certified,
    })
}

#[derive(Debug, Clone)]
pub struct LieCheck {
    /// `[X^c, ξ_{L,β}]`.
    pub bracket: PhaseField,
    pub verdict: Verdict,
    /// `L_{X^c}β + d(X^c(E_L))` when `d(L_{X^c}α_L) = 0`.
    pub alternative: Option<OneForm>,
    pub alternative_verdict: Option<Verdict>,
}

impl LieCheck {
    /// The bracket test and the closed-case alternative agree.
    pub fn consistent(&self) -> bool {
        match self.alternative_verdict {
            Some(v) => v == self.verdict || v == Verdict::Indeterminate,
            None => true,
        }
    }
}

fn bracket_check(sys: &ForcedLagrangianSystem, xt: &PhaseField) -> Result<LieCheck> {
    let c = sys.chart();
    let seed = sys.seed();
    let bracket = xt.bracket(c, sys.field()?)?;
    let verdict = bracket.is_zero(seed);
    let theta = lie_derivative(c, xt, sys.alpha())?;
    let closed = exterior_derivative(c, &theta)?.is_zero(seed);
    let (alternative, alternative_verdict) = if closed.is_true() {
        let beta = sys.force().to_one_form();
        let lb = lie_derivative(c, xt, &beta)?;
        let de = differential(c, Fiber::Velocity, &xt.apply(c, sys.energy())?)?;
        let alt = lb.add(&de);
        let v = alt.is_zero(seed);
        (Some(alt), Some(v))
    } else {
        (None, None)
    };
    Ok(LieCheck {
        bracket,
        verdict,
        alternative,
        alternative_verdict,
    })
}

/// `[X^c, ξ_{L,β}] = 0`.
pub fn check_lie_symmetry(sys: &ForcedLagrangianSystem, x: &VectorFieldQ) -> Result<LieCheck> {
    bracket_check(sys, &complete_lift(sys.chart(), x)?)
}

/// `[X̃, ξ_{L,β}] = 0`.
pub fn check_dynamical_symmetry(sys: &ForcedLagrangianSystem, xt: &PhaseField) -> Result<LieCheck> {
    bracket_check(sys, xt)
}

#[derive(Debug, Clone)]
pub struct CartanCheck {
    /// `X̃(E_L) + β(X̃)`.
    pub residual: Expr,
    pub residual_verdict: Verdict,
    /// `L_{X̃} α_L`.
    pub theta: OneForm,
    pub exactness: Exactness,
    pub verdict: Verdict,
    /// `f − (S X̃)(L)` whenever a potential `f` exists.
    pub quantity: Option<Expr>,
}

fn cartan_check(sys: &ForcedLagrangianSystem, xt: &PhaseField) -> Result<CartanCheck> {
    let c = sys.chart();
    let seed = sys.seed();
    let residual = (xt.apply(c, sys.energy())? + sys.force().eval(xt)).simplify();
    let residual_verdict = zero_verdict(&residual, seed);
    let theta = lie_derivative(c, xt, sys.alpha())?;
    let exactness = exactness(c, &theta, seed)?;
    let verdict = residual_verdict.and(exactness.verdict());
    let quantity = match &exactness.potential {
        Some(f) => Some((f - apply_s(xt).apply(c, sys.lagrangian())?).simplify()),
        None => None,
    };
    Ok(CartanCheck {
        residual,
        residual_verdict,
        theta,
        exactness,
        verdict,
        quantity,
    })
}

/// `X^c(E_L) + β(X^c) = 0` and `L_{X^c}α_L` exact. The quantity is
/// `f − X^v(L)`.
pub fn check_noether_symmetry(
    sys: &ForcedLagrangianSystem,
    x: &VectorFieldQ,
) -> Result<CartanCheck> {
    cartan_check(sys, &complete_lift(sys.chart(), x)?)
}

/// `X̃(E_L) + β(X̃) = 0` and `L_{X̃}α_L = df`. The quantity is
/// `f − (S X̃)(L)`.
pub fn check_cartan_symmetry(sys: &ForcedLagrangianSystem, xt: &PhaseField) -> Result<CartanCheck> {
    cartan_check(sys, xt)
}

#[derive(Debug, Clone)]
pub struct RelationCheck {
    /// `i_{X^c} dβ`.
    pub contraction: OneForm,
    pub contraction_vanishes: Verdict,
    pub lie: Verdict,
    /// A Noether symmetry is Lie exactly when the contraction vanishes.
    pub consistent: bool,
}

/// Relation between Noether and Lie symmetries through `i_{X^c} dβ`.
pub fn check_relation_noether_lie(
    sys: &ForcedLagrangianSystem,
    x: &VectorFieldQ,
) -> Result<RelationCheck> {
    let noether = check_noether_symmetry(sys, x)?;
    if !noether.verdict.is_true() {
        return Err(Error::Precondition(format!(
            "not a Noether symmetry (verdict {:?})",
            noether.verdict
        )));
    }
    let c = sys.chart();
    let xc = complete_lift(c, x)?;
    let contraction = exterior_derivative(c, &sys.force().to_one_form())?.contract(&xc);
    let contraction_vanishes = contraction.is_zero(sys.seed());
    let lie = check_lie_symmetry(sys, x)?.verdict;
    let consistent = contraction_vanishes == lie
        || contraction_vanishes == Verdict::Indeterminate
        || lie == Verdict::Indeterminate;
    Ok(RelationCheck {
        contraction,
        contraction_vanishes,
        lie,
        consistent,
    })
}

/// Structured result of all checks on one candidate.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub candidate: String,
    /// `"Q"` for vector fields on the configuration space, `"TQ"` otherwise.
    pub space: &'static str,
    pub components: Vec<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_lagrangian_symmetry: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lie: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noether: Option<Verdict>,
    pub dynamical: Verdict,
    pub cartan: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Expr>,
    /// `f − (S X̃)(L)` whenever `L_{X̃}α_L` is exact, regardless of the
    /// energy condition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cartan_quantity: Option<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conserved_quantity: Option<Expr>,
    /// `ξ_{L,β}` applied to the conserved quantity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation: Option<Verdict>,
    pub residuals: BTreeMap<String, Vec<Expr>>,
}

fn record(
    residuals: &mut BTreeMap<String, Vec<Expr>>,
    name: &str,
    verdict: Verdict,
    exprs: Vec<Expr>,
) {
    if verdict != Verdict::True {
        residuals.insert(name.to_string(), exprs);
    }
}

/// Run the point-like checks on a vector field on `Q`.
pub fn analyze_q(
    sys: &ForcedLagrangianSystem,
    name: &str,
    x: &VectorFieldQ,
) -> Result<SymmetryReport> {
    let c = sys.chart();
    let seed = sys.seed();
    let mut residuals = BTreeMap::new();

    let forced = check_forced_symmetry(sys, x)?;
    let forced_v = zero_verdict(&forced, seed);
    record(
        &mut residuals,
        "forced_lagrangian_symmetry",
        forced_v,
        vec![forced],
    );

    let lie = check_lie_symmetry(sys, x)?;
    record(&mut residuals, "lie", lie.verdict, lie.bracket.components());

    let noether = check_noether_symmetry(sys, x)?;
    if noether.verdict != Verdict::True {
        let mut r = vec![noether.residual.clone()];
        if noether.exactness.closed != Verdict::True {
            r.extend(
                exterior_derivative(c, &noether.theta)?
                    .coeffs()
                    .iter()
                    .flatten()
                    .cloned(),
            );
        }
        residuals.insert("noether".into(), r);
    }

    let conserved_quantity = if forced_v.is_true() {
        Some(vertical_lift(c, x).apply(c, sys.lagrangian())?)
    } else if noether.verdict.is_true() {
        noether.quantity.clone()
    } else {
        None
    };
    let conservation = match &conserved_quantity {
        Some(q) => Some(zero_verdict(&sys.time_derivative(q)?, seed)),
        None => None,
    };
    Ok(SymmetryReport {
        candidate: name.to_string(),
        space: "Q",
        components: x.comps().to_vec(),
        forced_lagrangian_symmetry: Some(forced_v),
        lie: Some(lie.verdict),
        noether: Some(noether.verdict),
        dynamical: lie.verdict,
        cartan: noether.verdict,
        potential: noether.exactness.potential.clone(),
        cartan_quantity: noether.quantity.clone(),
        conserved_quantity,
        conservation,
        residuals,
    })
}

/// Run the checks for a vector field on `TQ`.
pub fn analyze_tq(
    sys: &ForcedLagrangianSystem,
    name: &str,
    xt: &PhaseField,
) -> Result<SymmetryReport> {
    let c = sys.chart();
    let seed = sys.seed();
    let mut residuals = BTreeMap::new();
    let dynamical = check_dynamical_symmetry(sys, xt)?;
    record(
        &mut residuals,
        "dynamical",
        dynamical.verdict,
        dynamical.bracket.components(),
    );
    let cartan = check_cartan_symmetry(sys, xt)?;
    if cartan.verdict != Verdict::True {
        let mut r = vec![cartan.residual.clone()];
        if cartan.exactness.closed != Verdict::True {
            r.extend(
                exterior_derivative(c, &cartan.theta)?
                    .coeffs()
                    .iter()
                    .flatten()
                    .cloned(),
            );
        }
        residuals.insert("cartan".into(), r);
    }
    let conserved_quantity = cartan
        .verdict
        .is_true()
        .then(|| cartan.quantity.clone())
        .flatten();
    let conservation = match &conserved_quantity {
        Some(q) => Some(zero_verdict(&sys.time_derivative(q)?, seed)),
        None => None,
    };
    Ok(SymmetryReport {
        candidate: name.to_string(),
        space: "TQ",
        components: xt.components(),
        forced_lagrangian_symmetry: None,
        lie: None,
        noether: None,
        dynamical: dynamical.verdict,
        cartan: cartan.verdict,
        potential: cartan.exactness.potential.clone(),
        cartan_quantity: cartan.quantity.clone(),
        conserved_quantity,
        conservation,
        residuals,
    })
}

/// Push a field on `TQ` to `T*Q` through the Legendre transform.
pub fn legendre_push_field(sys: &ForcedLagrangianSystem, xt: &PhaseField) -> Result<PhaseField> {
    let c = sys.chart();
    let leg = sys.legendre()?;
    let push = |e: &Expr| {
        leg.push_forward(c, e)
            .ok_or_else(|| Error::NotInvertible("no symbolic inverse".into()))
    };
    let base = xt.base().iter().map(push).collect::<Result<Vec<_>>>()?;
    let mut vert = Vec::with_capacity(c.dim());
    for p in leg.forward() {
        vert.push(push(&xt.apply(c, p)?)?);
    }
    PhaseField::new(c, Fiber::Momentum, base, vert)
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianEquivalence {
    /// Commuting with `X_{H,γ}` matches being a dynamical symmetry.
    pub commuting_matches_dynamical: bool,
    /// Exactness on both sides agrees and `g − f∘Leg` is constant.
    pub potentials_match: bool,
    /// The four energy/conservation assertions agree.
    pub energy_conditions_agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianSymmetryReport {
    pub commutes: Verdict,
    pub bracket: Vec<Expr>,
    /// `X̂(H) + γ(X̂)`.
    pub energy_residual: Expr,
    pub energy_condition: Verdict,
    pub exactness: Exactness,
    /// `f − α_Q(X̂)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Expr>,
    /// `X_{H,γ}` applied to the quantity vanishes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity_conserved: Option<Verdict>,
    /// `i_{X̂} dγ = 0`, which decides commuting when `L_{X̂}α_Q` is exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_vanishes: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<HamiltonianEquivalence>,
}

/// Checks for a field `X̂` on `T*Q`. When a Lagrangian system and the
/// `Leg`-related field `X̃` are supplied, the correspondence with the
/// Lagrangian side is verified as well.
pub fn hamiltonian_symmetry_checks(
    hsys: &ForcedHamiltonianSystem,
    xh: &PhaseField,
    lagrangian: Option<(&ForcedLagrangianSystem, &PhaseField)>,
    seed: u64,
) -> Result<HamiltonianSymmetryReport> {
    let c = hsys.chart();
    let xham = hsys.field()?;
    let bracket = xh.bracket(c, &xham)?;
    let commutes = bracket.is_zero(seed);
    let energy_residual = (xh.apply(c, hsys.hamiltonian())? + hsys.force().eval(xh)).simplify();
    let energy_condition = zero_verdict(&energy_residual, seed);
    let alpha_q = canonical_1form(c);
    let theta = lie_derivative(c, xh, &alpha_q)?;
    let exactness = exactness(c, &theta, seed)?;
    let quantity = exactness
        .potential
        .as_ref()
        .map(|f| (f - alpha_q.eval(xh)).simplify());
    let quantity_conserved = match &quantity {
        Some(q) => Some(zero_verdict(&xham.apply(c, q)?, seed)),
        None => None,
    };
    let contraction_vanishes = if exactness.verdict().is_true() {
        let dg = exterior_derivative(c, &hsys.force().to_one_form())?;
        Some(dg.contract(xh).is_zero(seed))
    } else {
        None
    };
    let equivalence = match lagrangian {
        Some((lsys, xt)) => {
            let leg = lsys.legendre()?;
            let dynamical = check_dynamical_symmetry(lsys, xt)?.verdict;
            let cartan = check_cartan_symmetry(lsys, xt)?;
            let exact_l = cartan.exactness.verdict();
            let potentials_match = exact_l == exactness.verdict()
                && match (&exactness.potential, &cartan.exactness.potential) {
                    (Some(f), Some(g)) => {
                        let d = g - leg.pull_back(c, f);
                        differential(c, Fiber::Velocity, &d)?
                            .is_zero(seed)
                            .is_true()
                    }
                    (None, None) => true,
                    _ => false,
                };
            let lag_quantity = match &cartan.exactness.potential {
                Some(g) => Some(zero_verdict(
                    &lsys.time_derivative(&(g - lsys.alpha().eval(xt)))?,
                    seed,
                )),
                None => None,
            };
            let mut conds = vec![energy_condition, cartan.residual_verdict];
            conds.extend(quantity_conserved);
            conds.extend(lag_quantity);
            Some(HamiltonianEquivalence {
                commuting_matches_dynamical: commutes == dynamical,
                potentials_match,
                energy_conditions_agree: conds.windows(2).all(|w| w[0] == w[1]),
            })
        }
        None => None,
    };
    Ok(HamiltonianSymmetryReport {
        commutes,
        bracket: bracket.components(),
        energy_residual,
        energy_condition,
        exactness,
        quantity,
        quantity_conserved,
        contraction_vanishes,
        equivalence,
    })
}

/// Point-like correspondence: `X` Lie iff `X^c` dynamical, and `X` Noether
/// iff `X^c` Cartan.
pub fn point_like_correspondence(sys: &ForcedLagrangianSystem, x: &VectorFieldQ) -> Result<bool> {
    let xc = complete_lift(sys.chart(), x)?;
    let lie = check_lie_symmetry(sys, x)?.verdict;
    let dynamical = check_dynamical_symmetry(sys, &xc)?.verdict;
    let noether = check_noether_symmetry(sys, x)?.verdict;
    let cartan = check_cartan_symmetry(sys, &xc)?.verdict;
    Ok(lie == dynamical && noether == cartan)
}

/// Whether `L_{X^c}α_L` vanishes identically.
pub fn alpha_invariant(sys: &ForcedLagrangianSystem, x: &VectorFieldQ) -> Result<Verdict> {
    let xc = complete_lift(sys.chart(), x)?;
    Ok(lie_derivative(sys.chart(), &xc, sys.alpha())?.is_zero(sys.seed()))
}

/// Biconditional for one candidate: the symmetry residual
/// vanishes exactly when `X^v(L)` is conserved.
pub fn symmetry_biconditional(
    sys: &ForcedLagrangianSystem,
    x: &VectorFieldQ,
) -> Result<(Verdict, Verdict)> {
    let c = sys.chart();
    let lhs = zero_verdict(&check_forced_symmetry(sys, x)?, sys.seed());
    let xv_l = vertical_lift(c, x).apply(c, sys.lagrangian())?;
    let rhs = zero_verdict(&sys.time_derivative(&xv_l)?, sys.seed());
    Ok((lhs, rhs))
}

/// Whether every component of a list is zero, exposed for report consumers.
pub fn all_vanish(exprs: &[Expr], seed: u64) -> Verdict {
    all_zero(exprs, seed)
}

/// Monomials `q^α` with `|α| ≤ degree`, in graded lexicographic order.
fn monomials(chart: &Chart, degree: u32) -> Vec<Expr> {
    let n = chart.dim();
    let mut exps: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..n {
        exps = exps
            .into_iter()
            .flat_map(|e| {
                let used: u32 = e.iter().sum();
                (0..=degree - used).map(move |k| {
                    let mut f = e.clone();
                    f.push(k);
                    f
                })
            })
            .collect();
    }
    exps.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    exps.iter()
        .map(|e| {
            Expr::product(
                chart
                    .coords()
                    .iter()
                    .zip(e)
                    .map(|(s, &k)| s.expr().powi(k as i64)),
            )
            .simplify()
        })
        .collect()
}

/// Basis of the polynomial vector fields `X` on `Q` of degree at most
/// `degree` with `X^c(L) = β(X^c)`, by coefficient matching. Parameters take
/// the chart's values.
pub fn find_polynomial_symmetries(
    sys: &ForcedLagrangianSystem,
    degree: u32,
) -> Result<Vec<VectorFieldQ>> {
    let c = sys.chart();
    let n = c.dim();
    let mons = monomials(c, degree);
    let mut ansatz = Vec::with_capacity(n * mons.len());
    for i in 0..n {
        for m in &mons {
            let mut comps = vec![Expr::zero(); n];
            comps[i] = m.clone();
            ansatz.push(VectorFieldQ::new(c, comps)?);
        }
    }
    let residuals = ansatz
        .iter()
        .map(|x| check_forced_symmetry(sys, x))
        .collect::<Result<Vec<_>>>()?;
    let (basis, _) = crate::linalg::identity_null_space(
        c,
        &[residuals],
        ansatz.len(),
        &c.parameter_bindings(),
        sys.seed(),
    )?;
    let zero = VectorFieldQ::new(c, vec![Expr::zero(); n])?;
    Ok(basis
        .iter()
        .map(|coeffs| {
            coeffs
                .iter()
                .zip(&ansatz)
                .filter(|(k, _)| **k != 0.0)
                .fold(zero.clone(), |acc, (k, x)| {
                    acc.scale_add(&Expr::rational(crate::linalg::snap(*k)), x)
                })
        })
        .collect())
}

#[allow(unused)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<SymmetryReport>();
    is::<ForcedLagrangianSystem>();
    is::<bundle::Chart>();
}
