//! Symbolic and numerical toolkit for Lagrangian and Hamiltonian systems
//! subject to external forces: forced Euler-Lagrange dynamics, symmetries and
//! their conserved quantities, Rayleigh dissipation, momentum maps and
//! cyclic reduction.

pub mod bundle;
pub mod dynamics;
pub mod expr;
pub mod fixtures;
pub mod linalg;
pub mod rayleigh;
pub mod reduction;
pub mod simulate;
pub mod symmetry;

pub use bundle::{
    Chart, Fiber, FibredMorphism, LegendreTransform, OneForm, PhaseField, SemibasicForm, TwoForm,
    VectorFieldQ,
};
pub use dynamics::{ForcedHamiltonianSystem, ForcedLagrangianSystem};
pub use expr::{parse_expr, Bindings, Expr, ExprError, Symbol, SymbolKind, Verdict};
pub use symmetry::SymmetryReport;

/// Errors raised by the geometric and numerical layers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid component: {0}")]
    Component(String),
    #[error("singular Hessian: {0}")]
    SingularHessian(String),
    #[error("Legendre transform not invertible: {0}")]
    NotInvertible(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("not a symmetry, residual {0}")]
    NotASymmetry(Expr),
    #[error("verdict indeterminate: {0}")]
    Indeterminate(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Zero test mapped to a tri-state verdict.
pub fn zero_verdict(e: &Expr, seed: u64) -> Verdict {
    Verdict::from(expr::is_zero(e, seed))
}

pub fn all_zero<'a, I: IntoIterator<Item = &'a Expr>>(exprs: I, seed: u64) -> Verdict {
    let mut out = Verdict::True;
    for e in exprs {
        out = out.and(zero_verdict(e, seed));
        if out == Verdict::False {
            break;
        }
    }
    out
}
