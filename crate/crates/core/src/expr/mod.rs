//! Immutable symbolic expressions over coordinates, velocities, momenta and
//! parameters.
//!
//! Constants are exact rationals; floating point only enters at evaluation.
//! Operators on [`Expr`] build raw trees, and [`Expr::simplify`] brings them to
//! the canonical form: flattened sums and products, like terms combined,
//! factors and terms sorted by the total order on expressions.

mod diff;
mod display;
mod eval;
mod parse;
mod poly;
mod simplify;
mod zero;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use eval::{Bindings, Program};
pub use parse::{parse_expr, ParseError, SymbolTable};
pub use poly::Polynomial;
pub(crate) use zero::sample_value;
pub use zero::{is_zero, is_zero_with, Verdict, ZeroTestConfig};

/// Exact rational constant.
pub type Rational = BigRational;

pub(crate) fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Kind of a symbol. The declaration order is the rank used by the total
/// symbol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Coordinate,
    Velocity,
    Momentum,
    Parameter,
    Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    kind: SymbolKind,
    name: Arc<str>,
}

impl Symbol {
    pub fn new(name: &str, kind: SymbolKind) -> Self {
        Symbol {
            kind,
            name: Arc::from(name),
        }
    }

    pub fn coordinate(name: &str) -> Self {
        Self::new(name, SymbolKind::Coordinate)
    }

    pub fn velocity(name: &str) -> Self {
        Self::new(name, SymbolKind::Velocity)
    }

    pub fn momentum(name: &str) -> Self {
        Self::new(name, SymbolKind::Momentum)
    }

    pub fn parameter(name: &str) -> Self {
        Self::new(name, SymbolKind::Parameter)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn expr(&self) -> Expr {
        Expr::symbol(self.clone())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Elementary functions of one argument. `sqrt` is represented as a power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
    /// Sign of the argument. Its derivative is not available.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    Num(Rational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Rational),
    Func(Func, Expr),
    /// Euclidean norm of a tuple.
    Norm(Vec<Expr>),
    /// `∫₀¹ body d(var)`, evaluated by quadrature.
    Integral {
        body: Expr,
        var: Symbol,
    },
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Num(_) => 0,
            Node::Sym(_) => 1,
            Node::Pow(..) => 2,
            Node::Func(..) => 3,
            Node::Norm(_) => 4,
            Node::Mul(_) => 5,
            Node::Add(_) => 6,
            Node::Integral { .. } => 7,
        }
    }
}

struct Inner {
    node: Node,
    canonical: bool,
}

/// A symbolic expression. Cloning is cheap; equality and hashing are
/// structural.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.node == other.0.node
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.node.hash(state)
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn cmp_slices(a: &[Expr], b: &[Expr]) -> Ordering {
    // Compare from the most significant (last) element, the way polynomial
    // terms are usually ordered.
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        match a.rank().cmp(&b.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Sym(x), Node::Sym(y)) => x.cmp(y),
            (Node::Add(x), Node::Add(y)) | (Node::Mul(x), Node::Mul(y)) => cmp_slices(x, y),
            (Node::Norm(x), Node::Norm(y)) => cmp_slices(x, y),
            (Node::Pow(bx, ex), Node::Pow(by, ey)) => bx.cmp(by).then_with(|| ex.cmp(ey)),
            (Node::Func(fx, ax), Node::Func(fy, ay)) => fx.cmp(fy).then_with(|| ax.cmp(ay)),
            (Node::Integral { body: bx, var: vx }, Node::Integral { body: by, var: vy }) => {
                vx.cmp(vy).then_with(|| bx.cmp(by))
            }
            _ => unreachable!("ranks are equal"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    pub(crate) fn from_node(node: Node) -> Expr {
        let canonical = matches!(node, Node::Num(_) | Node::Sym(_));
        Expr(Arc::new(Inner { node, canonical }))
    }

    pub(crate) fn canonical(node: Node) -> Expr {
        Expr(Arc::new(Inner {
            node,
            canonical: true,
        }))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0.node
    }

    pub(crate) fn is_canonical(&self) -> bool {
        self.0.canonical
    }

    pub fn rational(r: Rational) -> Expr {
        Expr::from_node(Node::Num(r))
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(rat_int(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(rat(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn symbol(s: Symbol) -> Expr {
        Expr::from_node(Node::Sym(s))
    }

    /// Sum of the given terms (raw; call [`Expr::simplify`] to canonicalize).
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let terms: Vec<Expr> = terms.into_iter().collect();
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::from_node(Node::Add(terms)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let factors: Vec<Expr> = factors.into_iter().collect();
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::from_node(Node::Mul(factors)),
        }
    }

    pub fn pow_rational(&self, exponent: Rational) -> Expr {
        Expr::from_node(Node::Pow(self.clone(), exponent))
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow_rational(rat_int(n))
    }

    pub fn sqrt(&self) -> Expr {
        self.pow_rational(rat(1, 2))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        Expr::from_node(Node::Func(f, arg))
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self.clone())
    }

    pub fn ln(&self) -> Expr {
        Expr::apply(Func::Log, self.clone())
    }

    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self.clone())
    }

    pub fn abs(&self) -> Expr {
        Expr::apply(Func::Abs, self.clone())
    }

    pub fn norm<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        Expr::from_node(Node::Norm(items.into_iter().collect()))
    }

    /// `∫₀¹ body d(var)`.
    pub fn integral(body: Expr, var: Symbol) -> Expr {
        Expr::from_node(Node::Integral { body, var })
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.as_rational().and_then(|r| r.to_f64())
    }

    /// True when the expression is literally the constant zero.
    pub fn is_literal_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_zero())
    }

    pub fn is_literal_one(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_one())
    }

    pub fn is_negative_number(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_negative())
    }

    /// Free symbols, in the total symbol order.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Add(xs) | Node::Mul(xs) | Node::Norm(xs) => {
                xs.iter().for_each(|x| x.collect_symbols(out))
            }
            Node::Pow(b, _) => b.collect_symbols(out),
            Node::Func(_, a) => a.collect_symbols(out),
            Node::Integral { body, var } => {
                let mut inner = BTreeSet::new();
                body.collect_symbols(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
        }
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(x) => x == s,
            Node::Add(xs) | Node::Mul(xs) | Node::Norm(xs) => xs.iter().any(|x| x.depends_on(s)),
            Node::Pow(b, _) => b.depends_on(s),
            Node::Func(_, a) => a.depends_on(s),
            Node::Integral { body, var } => var != s && body.depends_on(s),
        }
    }

    pub fn depends_on_kind(&self, kind: SymbolKind) -> bool {
        self.free_symbols().iter().any(|s| s.kind() == kind)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Num(_) | Node::Sym(_) => 0,
            Node::Add(xs) | Node::Mul(xs) | Node::Norm(xs) => xs.iter().map(Expr::size).sum(),
            Node::Pow(b, _) => b.size(),
            Node::Func(_, a) => a.size(),
            Node::Integral { body, .. } => body.size(),
        }
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Self {
        Expr::symbol(s)
    }
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Self {
        Expr::symbol(s.clone())
    }
}

fn neg_one() -> Expr {
    Expr::int(-1)
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$tr::$method(self, rhs.clone())
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                ops::$tr::$method(self.clone(), rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$tr::$method(self.clone(), rhs.clone())
            }
        }
        impl ops::$tr<i64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                ops::$tr::$method(self, Expr::int(rhs))
            }
        }
        impl ops::$tr<i64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                ops::$tr::$method(self.clone(), Expr::int(rhs))
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([
    a,
    Expr::product([neg_one(), b])
]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, |a, b| Expr::product([a, b.recip()]));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product([neg_one(), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

/// Errors raised by the expression kernel.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("derivative of `{0}` is not available")]
    DerivativeUnavailable(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero test indeterminate after {attempts} sample attempts")]
    Indeterminate { attempts: usize },
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
