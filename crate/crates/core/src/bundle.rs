//! Tangent and cotangent bundle geometry in one global chart.
//!
//! Phase-space objects carry a [`Fiber`] tag: on `TQ` the fiber coordinates
//! are velocities, on `T*Q` momenta. One-forms and two-forms are stored as
//! coefficients over the basis `(dq^1..dq^n, dv^1..dv^n)` where `v` is the
//! fiber coordinate. Two-form coefficients follow `ω(X,Y) = Σ Ω_ab X^a Y^b`.

use std::collections::HashSet;

use serde::Serialize;

use crate::expr::{Bindings, Expr, Program, Symbol, SymbolKind, SymbolTable};
use crate::linalg::{self, ExprMatrix};
use crate::{all_zero, zero_verdict, Error, Result, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fiber {
    Velocity,
    Momentum,
}

/// Single global chart on `Q` with the induced bundle coordinates.
///
/// The velocity of coordinate `x` is named `xd` (alias `qd_x`), its momentum
/// `p_x`.
#[derive(Debug, Clone)]
pub struct Chart {
    coords: Vec<Symbol>,
    velocities: Vec<Symbol>,
    momenta: Vec<Symbol>,
    params: Vec<(Symbol, f64)>,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(char::is_alphabetic) && chars.all(|c| c.is_alphanumeric() || c == '_')
}

impl Chart {
    pub fn new<S: AsRef<str>>(coords: &[S]) -> Result<Chart> {
        Chart::with_parameters(coords, &[] as &[(&str, f64)])
    }

    pub fn with_parameters<S: AsRef<str>, P: AsRef<str>>(
        coords: &[S],
        params: &[(P, f64)],
    ) -> Result<Chart> {
        if coords.is_empty() {
            return Err(Error::Chart("at least one coordinate required".into()));
        }
        let mut seen = HashSet::new();
        let mut claim = |name: String| -> Result<String> {
            if !valid_identifier(&name) {
                return Err(Error::Chart(format!("invalid name `{name}`")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Chart(format!("duplicate name `{name}`")));
            }
            Ok(name)
        };
        let mut chart = Chart {
            coords: vec![],
            velocities: vec![],
            momenta: vec![],
            params: vec![],
        };
        for c in coords {
            let c = c.as_ref();
            chart
                .coords
                .push(Symbol::coordinate(&claim(c.to_string())?));
            chart
                .velocities
                .push(Symbol::velocity(&claim(format!("{c}d"))?));
            claim(format!("qd_{c}"))?;
            chart
                .momenta
                .push(Symbol::momentum(&claim(format!("p_{c}"))?));
        }
        for (p, v) in params {
            let p = p.as_ref();
            chart
                .params
                .push((Symbol::parameter(&claim(p.to_string())?), *v));
        }
        Ok(chart)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn velocities(&self) -> &[Symbol] {
        &self.velocities
    }

    pub fn momenta(&self) -> &[Symbol] {
        &self.momenta
    }

    pub fn parameters(&self) -> &[(Symbol, f64)] {
        &self.params
    }

    pub fn q(&self, i: usize) -> Expr {
        self.coords[i].expr()
    }

    pub fn qd(&self, i: usize) -> Expr {
        self.velocities[i].expr()
    }

    pub fn p(&self, i: usize) -> Expr {
        self.momenta[i].expr()
    }

    pub fn fiber_vars(&self, fiber: Fiber) -> &[Symbol] {
        match fiber {
            Fiber::Velocity => &self.velocities,
            Fiber::Momentum => &self.momenta,
        }
    }

    /// Base coordinates followed by fiber coordinates.
    pub fn phase_vars(&self, fiber: Fiber) -> Vec<Symbol> {
        self.coords
            .iter()
            .chain(self.fiber_vars(fiber))
            .cloned()
            .collect()
    }

    pub fn parameter_bindings(&self) -> Bindings {
        self.params.iter().map(|(s, v)| (s.name(), *v)).collect()
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|s| s.name() == name)
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        let find = |v: &[Symbol]| v.iter().find(|s| s.name() == name).cloned();
        if let Some(s) = find(&self.coords)
            .or_else(|| find(&self.velocities))
            .or_else(|| find(&self.momenta))
        {
            return Some(s);
        }
        if let Some(c) = name.strip_prefix("qd_") {
            return self.coord_index(c).map(|i| self.velocities[i].clone());
        }
        self.params
            .iter()
            .find(|(s, _)| s.name() == name)
            .map(|(s, _)| s.clone())
    }

    /// Parse an expression in this chart's symbols.
    pub fn parse(&self, src: &str) -> std::result::Result<Expr, crate::expr::ParseError> {
        crate::expr::parse_expr(src, self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension(format!(
                "{what}: expected {} components, got {len}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl SymbolTable for Chart {
    fn lookup(&self, name: &str) -> Option<Symbol> {
        Chart::lookup(self, name)
    }
}

fn forbid_kinds(what: &str, comps: &[Expr], kinds: &[SymbolKind]) -> Result<()> {
    for c in comps {
        for s in c.free_symbols() {
            if kinds.contains(&s.kind()) {
                return Err(Error::Component(format!("{what} may not depend on `{s}`")));
            }
        }
    }
    Ok(())
}

fn other_fiber_kind(fiber: Fiber) -> SymbolKind {
    match fiber {
        Fiber::Velocity => SymbolKind::Momentum,
        Fiber::Momentum => SymbolKind::Velocity,
    }
}

fn simplify_all(v: Vec<Expr>) -> Vec<Expr> {
    v.into_iter().map(|e| e.simplify()).collect()
}

/// Vector field on `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldQ {
    comps: Vec<Expr>,
}

impl VectorFieldQ {
    pub fn new(chart: &Chart, comps: Vec<Expr>) -> Result<Self> {
        chart.check_len("vector field on Q", comps.len())?;
        forbid_kinds(
            "vector field on Q",
            &comps,
            &[SymbolKind::Velocity, SymbolKind::Momentum],
        )?;
        Ok(VectorFieldQ {
            comps: simplify_all(comps),
        })
    }

    /// Coordinate field `∂/∂q^i`.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let comps = (0..chart.dim())
            .map(|j| if i == j { Expr::one() } else { Expr::zero() })
            .collect();
        VectorFieldQ { comps }
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn apply(&self, chart: &Chart, f: &Expr) -> Result<Expr> {
        Ok(f.directional(chart.coords(), &self.comps)?)
    }

    pub fn bracket(&self, chart: &Chart, other: &VectorFieldQ) -> Result<VectorFieldQ> {
        let mut comps = Vec::with_capacity(chart.dim());
        for (x, y) in self.comps.iter().zip(&other.comps) {
            comps.push((self.apply(chart, y)? - other.apply(chart, x)?).simplify());
        }
        Ok(VectorFieldQ { comps })
    }

    pub fn scale_add(&self, c: &Expr, other: &VectorFieldQ) -> VectorFieldQ {
        VectorFieldQ {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| (a + c * b).simplify())
                .collect(),
        }
    }

    pub fn is_zero(&self, seed: u64) -> Verdict {
        all_zero(&self.comps, seed)
    }
}

/// Vector field on `TQ` or `T*Q`: `A^i ∂/∂q^i + B^i ∂/∂v^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    fiber: Fiber,
    base: Vec<Expr>,
    vert: Vec<Expr>,
}

pub type VectorFieldTQ = PhaseField;

impl PhaseField {
    pub fn new(chart: &Chart, fiber: Fiber, base: Vec<Expr>, vert: Vec<Expr>) -> Result<Self> {
        chart.check_len("horizontal part", base.len())?;
        chart.check_len("vertical part", vert.len())?;
        forbid_kinds("phase-space field", &base, &[other_fiber_kind(fiber)])?;
        forbid_kinds("phase-space field", &vert, &[other_fiber_kind(fiber)])?;
        Ok(PhaseField {
            fiber,
            base: simplify_all(base),
            vert: simplify_all(vert),
        })
    }

    pub(crate) fn raw(fiber: Fiber, base: Vec<Expr>, vert: Vec<Expr>) -> Self {
        PhaseField {
            fiber,
            base: simplify_all(base),
            vert: simplify_all(vert),
        }
    }

    pub fn tangent(chart: &Chart, base: Vec<Expr>, vert: Vec<Expr>) -> Result<Self> {
        Self::new(chart, Fiber::Velocity, base, vert)
    }

    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    pub fn base(&self) -> &[Expr] {
        &self.base
    }

    pub fn vert(&self) -> &[Expr] {
        &self.vert
    }

    /// All `2n` components, horizontal first.
    pub fn components(&self) -> Vec<Expr> {
        self.base.iter().chain(&self.vert).cloned().collect()
    }

    /// Derivative of `f` along the field.
    pub fn apply(&self, chart: &Chart, f: &Expr) -> Result<Expr> {
        Ok(f.directional(&chart.phase_vars(self.fiber), &self.components())?)
    }

    pub fn bracket(&self, chart: &Chart, other: &PhaseField) -> Result<PhaseField> {
        same_fiber(self.fiber, other.fiber)?;
        let x = self.components();
        let y = other.components();
        let mut out = Vec::with_capacity(x.len());
        for (xa, ya) in x.iter().zip(&y) {
            out.push((self.apply(chart, ya)? - other.apply(chart, xa)?).simplify());
        }
        let vert = out.split_off(chart.dim());
        Ok(PhaseField::raw(self.fiber, out, vert))
    }

    pub fn sub(&self, other: &PhaseField) -> PhaseField {
        let d = |a: &[Expr], b: &[Expr]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        PhaseField::raw(
            self.fiber,
            d(&self.base, &other.base),
            d(&self.vert, &other.vert),
        )
    }

    pub fn is_zero(&self, seed: u64) -> Verdict {
        all_zero(self.base.iter().chain(&self.vert), seed)
    }
}

fn same_fiber(a: Fiber, b: Fiber) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!(
            "{a:?} object combined with {b:?} object"
        )));
    }
    Ok(())
}

/// Semibasic one-form `Σ β_i dq^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemibasicForm {
    fiber: Fiber,
    comps: Vec<Expr>,
}

impl SemibasicForm {
    pub fn new(chart: &Chart, fiber: Fiber, comps: Vec<Expr>) -> Result<Self> {
        chart.check_len("semibasic form", comps.len())?;
        forbid_kinds("semibasic form", &comps, &[other_fiber_kind(fiber)])?;
        Ok(SemibasicForm {
            fiber,
            comps: simplify_all(comps),
        })
    }

    pub fn zero(chart: &Chart, fiber: Fiber) -> Self {
        SemibasicForm {
            fiber,
            comps: vec![Expr::zero(); chart.dim()],
        }
    }

    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn is_zero_form(&self) -> bool {
        self.comps.iter().all(Expr::is_literal_zero)
    }

    /// `β(X) = Σ β_i A^i`.
    pub fn eval(&self, x: &PhaseField) -> Expr {
        Expr::sum(self.comps.iter().zip(x.base()).map(|(b, a)| b * a)).simplify()
    }

    pub fn to_one_form(&self) -> OneForm {
        let mut coeffs = self.comps.clone();
        coeffs.extend(std::iter::repeat_n(Expr::zero(), self.comps.len()));
        OneForm {
            fiber: self.fiber,
            coeffs,
        }
    }
}

/// One-form on phase space over `(dq, dv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    fiber: Fiber,
    coeffs: Vec<Expr>,
}

impl OneForm {
    pub fn new(chart: &Chart, fiber: Fiber, coeffs: Vec<Expr>) -> Result<Self> {
        if coeffs.len() != 2 * chart.dim() {
            return Err(Error::Dimension(format!(
                "one-form: expected {} coefficients, got {}",
                2 * chart.dim(),
                coeffs.len()
            )));
        }
        Ok(OneForm {
            fiber,
            coeffs: simplify_all(coeffs),
        })
    }

    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn base_part(&self) -> &[Expr] {
        &self.coeffs[..self.coeffs.len() / 2]
    }

    pub fn fiber_part(&self) -> &[Expr] {
        &self.coeffs[self.coeffs.len() / 2..]
    }

    pub fn eval(&self, x: &PhaseField) -> Expr {
        Expr::sum(self.coeffs.iter().zip(x.components()).map(|(c, a)| c * a)).simplify()
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        OneForm {
            fiber: self.fiber,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a + b).simplify())
                .collect(),
        }
    }

    pub fn sub(&self, other: &OneForm) -> OneForm {
        OneForm {
            fiber: self.fiber,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a - b).simplify())
                .collect(),
        }
    }

    pub fn is_zero(&self, seed: u64) -> Verdict {
        all_zero(&self.coeffs, seed)
    }

    /// Fiber coefficients vanish.
    pub fn is_semibasic(&self, seed: u64) -> Verdict {
        all_zero(self.fiber_part(), seed)
    }

    pub fn as_semibasic(&self) -> SemibasicForm {
        SemibasicForm {
            fiber: self.fiber,
            comps: self.base_part().to_vec(),
        }
    }
}

/// Two-form on phase space, `Ω_ab` over `(dq, dv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    fiber: Fiber,
    coeffs: Vec<Vec<Expr>>,
}

impl TwoForm {
    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }

    pub fn coeff(&self, a: usize, b: usize) -> &Expr {
        &self.coeffs[a][b]
    }

    pub fn neg(&self) -> TwoForm {
        TwoForm {
            fiber: self.fiber,
            coeffs: self
                .coeffs
                .iter()
                .map(|r| r.iter().map(|e| (-e).simplify()).collect())
                .collect(),
        }
    }

    /// `(i_X ω)_b = Σ_a X^a Ω_ab`.
    pub fn contract(&self, x: &PhaseField) -> OneForm {
        let xs = x.components();
        let m = xs.len();
        let coeffs = (0..m)
            .map(|b| {
                Expr::sum(
                    (0..m)
                        .filter(|&a| {
                            !self.coeffs[a][b].is_literal_zero() && !xs[a].is_literal_zero()
                        })
                        .map(|a| &xs[a] * &self.coeffs[a][b]),
                )
                .simplify()
            })
            .collect();
        OneForm {
            fiber: self.fiber,
            coeffs,
        }
    }

    pub fn is_antisymmetric(&self, seed: u64) -> Verdict {
        let m = self.coeffs.len();
        let mut sums = Vec::new();
        for a in 0..m {
            for b in a..m {
                sums.push(&self.coeffs[a][b] + &self.coeffs[b][a]);
            }
        }
        all_zero(&sums, seed)
    }

    /// `dω = 0`: every cyclic sum `∂_a Ω_bc + ∂_b Ω_ca + ∂_c Ω_ab` vanishes.
    pub fn is_closed(&self, chart: &Chart, seed: u64) -> Result<Verdict> {
        let vars = chart.phase_vars(self.fiber);
        let m = vars.len();
        let mut sums = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                for c in b + 1..m {
                    sums.push(
                        self.coeffs[b][c].diff(&vars[a])?
                            + self.coeffs[c][a].diff(&vars[b])?
                            + self.coeffs[a][b].diff(&vars[c])?,
                    );
                }
            }
        }
        Ok(all_zero(&sums, seed))
    }

    pub fn is_zero(&self, seed: u64) -> Verdict {
        all_zero(self.coeffs.iter().flatten(), seed)
    }

    pub fn determinant(&self) -> Expr {
        linalg::determinant(&self.coeffs)
    }
}

pub fn vertical_lift(chart: &Chart, x: &VectorFieldQ) -> PhaseField {
    PhaseField::raw(
        Fiber::Velocity,
        vec![Expr::zero(); chart.dim()],
        x.comps().to_vec(),
    )
}

/// `X^c = X^i ∂/∂q^i + q̇^j ∂X^i/∂q^j ∂/∂q̇^i`.
pub fn complete_lift(chart: &Chart, x: &VectorFieldQ) -> Result<PhaseField> {
    let qd: Vec<Expr> = chart.velocities().iter().map(Symbol::expr).collect();
    let mut vert = Vec::with_capacity(chart.dim());
    for c in x.comps() {
        vert.push(c.directional(chart.coords(), &qd)?);
    }
    Ok(PhaseField::raw(Fiber::Velocity, x.comps().to_vec(), vert))
}

/// Vertical endomorphism `S = dq^i ⊗ ∂/∂q̇^i`.
pub fn apply_s(x: &PhaseField) -> PhaseField {
    PhaseField::raw(x.fiber, vec![Expr::zero(); x.base.len()], x.base.clone())
}

/// Liouville field `q̇^i ∂/∂q̇^i`.
pub fn liouville(chart: &Chart) -> PhaseField {
    PhaseField::raw(
        Fiber::Velocity,
        vec![Expr::zero(); chart.dim()],
        chart.velocities().iter().map(Symbol::expr).collect(),
    )
}

pub fn differential(chart: &Chart, fiber: Fiber, f: &Expr) -> Result<OneForm> {
    Ok(OneForm {
        fiber,
        coeffs: f.gradient(&chart.phase_vars(fiber))?,
    })
}

/// Adjoint of `S`: moves fiber coefficients onto the `dq` slots.
pub fn s_star(theta: &OneForm) -> OneForm {
    let mut coeffs = theta.fiber_part().to_vec();
    coeffs.extend(std::iter::repeat_n(Expr::zero(), coeffs.len()));
    OneForm {
        fiber: theta.fiber,
        coeffs,
    }
}

/// `α_L = S*(dL) = ∂L/∂q̇^i dq^i`.
pub fn poincare_cartan_1form(chart: &Chart, l: &Expr) -> Result<OneForm> {
    Ok(s_star(&differential(chart, Fiber::Velocity, l)?))
}

/// `ω_L = −dα_L`.
pub fn poincare_cartan_2form(chart: &Chart, l: &Expr) -> Result<TwoForm> {
    Ok(exterior_derivative(chart, &poincare_cartan_1form(chart, l)?)?.neg())
}

/// `(dθ)_ab = ∂_a θ_b − ∂_b θ_a`.
pub fn exterior_derivative(chart: &Chart, theta: &OneForm) -> Result<TwoForm> {
    let vars = chart.phase_vars(theta.fiber);
    let m = vars.len();
    let mut grads = Vec::with_capacity(m);
    for c in &theta.coeffs {
        grads.push(c.gradient(&vars)?);
    }
    let mut coeffs = vec![vec![Expr::zero(); m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let v = (&grads[b][a] - &grads[a][b]).simplify();
            coeffs[b][a] = (-&v).simplify();
            coeffs[a][b] = v;
        }
    }
    Ok(TwoForm {
        fiber: theta.fiber,
        coeffs,
    })
}

/// Cartan's formula `L_X θ = i_X dθ + d(i_X θ)`.
pub fn lie_derivative(chart: &Chart, x: &PhaseField, theta: &OneForm) -> Result<OneForm> {
    same_fiber(x.fiber, theta.fiber)?;
    let a = exterior_derivative(chart, theta)?.contract(x);
    let b = differential(chart, theta.fiber, &theta.eval(x))?;
    Ok(a.add(&b))
}

/// Canonical one-form `θ_Q = p_i dq^i` on `T*Q`.
pub fn canonical_1form(chart: &Chart) -> OneForm {
    let mut coeffs: Vec<Expr> = chart.momenta().iter().map(Symbol::expr).collect();
    coeffs.extend(std::iter::repeat_n(Expr::zero(), chart.dim()));
    OneForm {
        fiber: Fiber::Momentum,
        coeffs,
    }
}

/// `ω_Q = −dθ_Q = dq^i ∧ dp_i`.
pub fn canonical_2form(chart: &Chart) -> TwoForm {
    exterior_derivative(chart, &canonical_1form(chart))
        .expect("linear coefficients")
        .neg()
}

#[derive(Debug, Clone)]
pub struct Hessian {
    pub w: ExprMatrix,
    pub det: Expr,
    pub regular: Verdict,
}

/// `W_ij = ∂²L/∂q̇^i∂q̇^j`; regular iff `det W` is not identically zero.
pub fn hessian(chart: &Chart, l: &Expr, seed: u64) -> Result<Hessian> {
    let v = chart.velocities();
    let grad = l.gradient(v)?;
    let n = chart.dim();
    let mut w = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let e = grad[i].diff(&v[j])?;
            w[j][i] = e.clone();
            w[i][j] = e;
        }
    }
    let det = linalg::determinant(&w);
    let regular = match zero_verdict(&det, seed) {
        Verdict::True => Verdict::False,
        Verdict::False => Verdict::True,
        Verdict::Indeterminate => Verdict::Indeterminate,
    };
    Ok(Hessian { w, det, regular })
}

/// `E_L = Δ(L) − L`.
pub fn energy(chart: &Chart, l: &Expr) -> Result<Expr> {
    Ok((liouville(chart).apply(chart, l)? - l).simplify())
}

/// Fibred map `(q, v) ↦ (q, D_i(q, v))` between `TQ` and `T*Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FibredMorphism {
    pub comps: Vec<Expr>,
}

/// `D_β(q, q̇) = (q, β_i(q, q̇))`.
pub fn form_to_morphism(beta: &SemibasicForm) -> FibredMorphism {
    FibredMorphism {
        comps: beta.comps.clone(),
    }
}

pub fn morphism_to_form(d: &FibredMorphism, fiber: Fiber) -> SemibasicForm {
    SemibasicForm {
        fiber,
        comps: d.comps.clone(),
    }
}

/// Legendre transform `p_i = ∂L/∂q̇^i`, with a symbolic inverse when `L` is
/// quadratic in the velocities.
#[derive(Debug, Clone)]
pub struct LegendreTransform {
    forward: Vec<Expr>,
    inverse: Option<Vec<Expr>>,
    hessian: ExprMatrix,
}

impl LegendreTransform {
    pub fn new(chart: &Chart, l: &Expr, seed: u64) -> Result<Self> {
        let h = hessian(chart, l, seed)?;
        match h.regular {
            Verdict::True => {}
            Verdict::False => {
                return Err(Error::NotInvertible(format!("det W = {} vanishes", h.det)))
            }
            Verdict::Indeterminate => {
                return Err(Error::Indeterminate("regularity of the Hessian".into()))
            }
        }
        let v = chart.velocities();
        let forward = l.gradient(v)?;
        let mut third = Vec::new();
        for row in &h.w {
            for e in row {
                for s in v {
                    third.push(e.diff(s)?);
                }
            }
        }
        let quadratic = all_zero(&third, seed).is_true();
        let inverse = if quadratic && chart.dim() <= linalg::SYMBOLIC_LIMIT {
            let zero_v = v.iter().map(|s| (s.clone(), Expr::zero())).collect();
            let (winv, _) = linalg::inverse(&h.w)?;
            let shifted: Vec<Expr> = forward
                .iter()
                .zip(chart.momenta())
                .map(|(f, p)| p.expr() - f.subs(&zero_v))
                .collect();
            Some(linalg::mat_vec(&winv, &shifted))
        } else {
            None
        };
        Ok(LegendreTransform {
            forward,
            inverse,
            hessian: h.w,
        })
    }

    /// `p_i(q, q̇)`.
    pub fn forward(&self) -> &[Expr] {
        &self.forward
    }

    /// `q̇^i(q, p)` when available symbolically.
    pub fn inverse(&self) -> Option<&[Expr]> {
        self.inverse.as_deref()
    }

    pub fn as_morphism(&self) -> FibredMorphism {
        FibredMorphism {
            comps: self.forward.clone(),
        }
    }

    /// Pull a `T*Q` expression back to `TQ` by substituting `p = ∂L/∂q̇`.
    pub fn pull_back(&self, chart: &Chart, f: &Expr) -> Expr {
        let map = chart
            .momenta()
            .iter()
            .cloned()
            .zip(self.forward.iter().cloned())
            .collect();
        f.subs(&map)
    }

    /// Push a `TQ` expression to `T*Q` through the symbolic inverse.
    pub fn push_forward(&self, chart: &Chart, f: &Expr) -> Option<Expr> {
        let inv = self.inverse.as_ref()?;
        let map = chart
            .velocities()
            .iter()
            .cloned()
            .zip(inv.iter().cloned())
            .collect();
        Some(f.subs(&map))
    }

    /// Solve `∂L/∂q̇(q, v) = p` for `v` at one point by Newton iteration.
    pub fn invert_point(&self, chart: &Chart, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let n = chart.dim();
        let params = chart.parameter_bindings();
        let mut slots = chart.coords().to_vec();
        slots.extend(chart.velocities().iter().cloned());
        if let Some(inv) = &self.inverse {
            let mut slots = chart.coords().to_vec();
            slots.extend(chart.momenta().iter().cloned());
            let input: Vec<f64> = q.iter().chain(p).copied().collect();
            return inv
                .iter()
                .map(|e| Ok(Program::compile(e, &slots, &params)?.eval(&input)?))
                .collect();
        }
        let f: Vec<Program> = self
            .forward
            .iter()
            .map(|e| Program::compile(e, &slots, &params))
            .collect::<std::result::Result<_, _>>()?;
        let w: Vec<Program> = self
            .hessian
            .iter()
            .flatten()
            .map(|e| Program::compile(e, &slots, &params))
            .collect::<std::result::Result<_, _>>()?;
        let mut v = vec![0.0; n];
        for _ in 0..100 {
            let input: Vec<f64> = q.iter().chain(&v).copied().collect();
            let mut r = Vec::with_capacity(n);
            for (fi, pi) in f.iter().zip(p) {
                r.push(pi - fi.eval(&input)?);
            }
            let jac: Vec<f64> = w
                .iter()
                .map(|e| e.eval(&input))
                .collect::<std::result::Result<_, _>>()?;
            let dv = linalg::solve_numeric(&jac, &r)
                .ok_or_else(|| Error::NotInvertible("singular Hessian at point".into()))?;
            let step: f64 = dv.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (vi, di) in v.iter_mut().zip(&dv) {
                *vi += di;
            }
            if step <= 1e-14 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
                return Ok(v);
            }
        }
        Err(Error::NotInvertible(
            "Newton iteration did not converge".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::is_zero;

    fn expr_is_zero(e: &Expr, seed: u64) -> bool {
        is_zero(e, seed).unwrap_or(false)
    }

    fn one_dof(params: &[(&str, f64)]) -> Chart {
        Chart::with_parameters(&["q"], params).unwrap()
    }

    #[test]
    fn naming_and_lookup() {
        let c = Chart::with_parameters(&["x", "φ"], &[("m", 1.0)]).unwrap();
        assert_eq!(c.lookup("xd").unwrap(), Symbol::velocity("xd"));
        assert_eq!(c.lookup("qd_φ").unwrap(), Symbol::velocity("φd"));
        assert_eq!(c.lookup("p_x").unwrap(), Symbol::momentum("p_x"));
        assert_eq!(c.lookup("m").unwrap(), Symbol::parameter("m"));
        assert!(c.lookup("z").is_none());
        assert!(Chart::new(&["q", "qd"]).is_err());
        assert!(Chart::new::<&str>(&[]).is_err());
        assert!(Chart::with_parameters(&["q"], &[("q", 1.0)]).is_err());
    }

    #[test]
    fn lifts_of_exponential_field() {
        let c = one_dof(&[("k", 1.0), ("m", 1.0)]);
        let e = c.parse("exp(k/m*q)").unwrap();
        let x = VectorFieldQ::new(&c, vec![e.clone()]).unwrap();
        let xc = complete_lift(&c, &x).unwrap();
        assert_eq!(xc.base()[0], e);
        let want = c.parse("k/m*qd*exp(k/m*q)").unwrap();
        assert!(expr_is_zero(&(&xc.vert()[0] - want), 0));
        assert_eq!(apply_s(&xc), vertical_lift(&c, &x));
        assert!(apply_s(&liouville(&c)).is_zero(0).is_true());
    }

    #[test]
    fn vector_field_on_q_rejects_velocities() {
        let c = one_dof(&[]);
        assert!(VectorFieldQ::new(&c, vec![c.qd(0)]).is_err());
        assert!(VectorFieldQ::new(&c, vec![c.q(0), c.q(0)]).is_err());
    }

    #[test]
    fn disk_cartan_forms() {
        let c = Chart::with_parameters(&["φ"], &[("m", 1.0), ("r", 1.0)]).unwrap();
        let l = c.parse("m*r^2*φd^2/4").unwrap();
        let a = poincare_cartan_1form(&c, &l).unwrap();
        assert_eq!(a.coeffs()[0], c.parse("m*r^2*φd/2").unwrap());
        assert!(a.coeffs()[1].is_literal_zero());
        let w = poincare_cartan_2form(&c, &l).unwrap();
        assert_eq!(w.coeff(0, 1), &c.parse("m*r^2/2").unwrap());
        assert!(w.is_antisymmetric(0).is_true());
        assert!(w.is_closed(&c, 0).unwrap().is_true());
    }

    #[test]
    fn disk_lie_derivative_of_alpha() {
        let c = Chart::with_parameters(&["φ"], &[("m", 1.0), ("r", 1.0), ("μ", 0.1), ("g", 9.8)])
            .unwrap();
        let l = c.parse("m*r^2*φd^2/4").unwrap();
        let a = poincare_cartan_1form(&c, &l).unwrap();
        let x = PhaseField::tangent(
            &c,
            vec![c.parse("r*φd").unwrap()],
            vec![c.parse("μ*g").unwrap()],
        )
        .unwrap();
        let lx = lie_derivative(&c, &x, &a).unwrap();
        let want = [
            c.parse("μ*m*g*r^2/2").unwrap(),
            c.parse("m*r^3/2*φd").unwrap(),
        ];
        for (got, want) in lx.coeffs().iter().zip(want) {
            assert!(expr_is_zero(&(got - want), 0));
        }
    }

    #[test]
    fn polisher_hessian_energy_alpha() {
        let c = Chart::with_parameters(&["x", "y", "θ"], &[("m", 1.0), ("r", 1.0), ("ω", 1.0)])
            .unwrap();
        let l = c.parse("m*(xd^2 + yd^2 + r^2*θd^2 + r^2*ω^2)").unwrap();
        let h = hessian(&c, &l, 0).unwrap();
        assert!(h.regular.is_true());
        assert_eq!(h.w[2][2], c.parse("2*m*r^2").unwrap());
        assert!(h.w[0][1].is_literal_zero());
        let e = energy(&c, &l).unwrap();
        let want = c.parse("m*(xd^2+yd^2+r^2*θd^2) - m*r^2*ω^2").unwrap();
        assert!(expr_is_zero(&(e - want), 0));
        let a = poincare_cartan_1form(&c, &l).unwrap();
        assert_eq!(a.coeffs()[2], c.parse("2*m*r^2*θd").unwrap());
    }

    #[test]
    fn singular_lagrangian() {
        let c = one_dof(&[]);
        let h = hessian(&c, &c.qd(0), 0).unwrap();
        assert_eq!(h.regular, Verdict::False);
        assert!(matches!(
            LegendreTransform::new(&c, &c.qd(0), 0),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn legendre_quadratic_inverse() {
        let c = one_dof(&[("m", 2.0)]);
        let l = c.parse("m*qd^2/2 + q*qd").unwrap();
        let leg = LegendreTransform::new(&c, &l, 0).unwrap();
        assert_eq!(leg.forward()[0], c.parse("m*qd + q").unwrap());
        let inv = leg.inverse().unwrap();
        assert!(expr_is_zero(
            &(&inv[0] - c.parse("(p_q - q)/m").unwrap()),
            0
        ));
        let v = leg.invert_point(&c, &[1.0], &[5.0]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_newton_fallback() {
        let c = one_dof(&[]);
        let l = c.parse("qd^4/4 + qd^2/2").unwrap();
        let leg = LegendreTransform::new(&c, &l, 0).unwrap();
        assert!(leg.inverse().is_none());
        let v = leg.invert_point(&c, &[0.3], &[10.0]).unwrap();
        assert!((v[0].powi(3) + v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_matches_legendre_morphism() {
        let c = one_dof(&[("m", 1.0)]);
        let l = c.parse("m*qd^2/2 - q^2").unwrap();
        let a = poincare_cartan_1form(&c, &l).unwrap();
        let leg = LegendreTransform::new(&c, &l, 0).unwrap();
        assert_eq!(
            morphism_to_form(&leg.as_morphism(), Fiber::Velocity),
            a.as_semibasic()
        );
    }

    #[test]
    fn form_morphism_round_trip() {
        let c = Chart::with_parameters(&["q1", "q2"], &[("c", 1.0)]).unwrap();
        let b = SemibasicForm::new(
            &c,
            Fiber::Velocity,
            vec![c.parse("c*q1d").unwrap(), c.parse("q2d").unwrap()],
        )
        .unwrap();
        assert_eq!(morphism_to_form(&form_to_morphism(&b), Fiber::Velocity), b);
    }

    #[test]
    fn exterior_derivative_of_velocity_dq() {
        let c = one_dof(&[]);
        let th = OneForm::new(&c, Fiber::Velocity, vec![c.qd(0), Expr::zero()]).unwrap();
        let d = exterior_derivative(&c, &th).unwrap();
        // d(q̇ dq) = dq̇ ∧ dq
        assert_eq!(d.coeff(1, 0), &Expr::one());
        assert_eq!(d.coeff(0, 1), &Expr::int(-1));
        let dq = OneForm::new(&c, Fiber::Velocity, vec![Expr::one(), Expr::zero()]).unwrap();
        assert!(lie_derivative(&c, &liouville(&c), &dq)
            .unwrap()
            .is_zero(0)
            .is_true());
    }

    #[test]
    fn canonical_symplectic_form() {
        let c = one_dof(&[]);
        let w = canonical_2form(&c);
        assert_eq!(w.coeff(0, 1), &Expr::one());
    }
}
