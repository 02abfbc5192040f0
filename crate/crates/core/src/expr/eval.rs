use std::collections::HashMap;
use std::sync::OnceLock;

use num_traits::{Signed, ToPrimitive};

use super::{rational_to_f64, Expr, ExprError, Func, Node, Rational, Symbol};

/// Numeric values for named symbols.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    values: HashMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn extend(&mut self, other: &Bindings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (&'a str, f64)>>(iter: T) -> Self {
        let mut b = Bindings::new();
        for (k, v) in iter {
            b.set(k, v);
        }
        b
    }
}

fn checked(v: f64, what: &str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain(format!("{what} is not finite")))
    }
}

/// Real power with rational exponent. Odd roots of negative numbers are
/// real; even roots of negative numbers are a domain error.
pub(crate) fn real_pow(x: f64, p: &Rational) -> Result<f64, ExprError> {
    let n = p.numer();
    let d = p.denom();
    if x == 0.0 && p.is_negative() {
        return Err(ExprError::Domain("division by zero".into()));
    }
    let v = if d == &num_bigint::BigInt::from(1) {
        match n.to_i32() {
            Some(k) => x.powi(k),
            None => x.powf(rational_to_f64(p)),
        }
    } else if x < 0.0 {
        let d_even = (d % 2u32) == num_bigint::BigInt::from(0);
        if d_even {
            return Err(ExprError::Domain("even root of a negative number".into()));
        }
        let n_odd = (n % 2u32) != num_bigint::BigInt::from(0);
        let mag = (-x).powf(rational_to_f64(p));
        if n_odd {
            -mag
        } else {
            mag
        }
    } else {
        x.powf(rational_to_f64(p))
    };
    checked(v, "power")
}

fn apply_func(f: Func, a: f64) -> Result<f64, ExprError> {
    let v = match f {
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(ExprError::Domain("log of a non-positive number".into()));
            }
            a.ln()
        }
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Abs => a.abs(),
        Func::Sign => {
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    };
    checked(v, f.name())
}

/// Gauss-Legendre nodes and weights on [0, 1] (composite, 4 panels of 12).
pub(crate) fn quadrature_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let base = gauss_legendre(12);
        let panels = 4;
        let w = 1.0 / panels as f64;
        let mut out = Vec::with_capacity(base.len() * panels);
        for k in 0..panels {
            let a = k as f64 * w;
            for &(x, wt) in &base {
                out.push((a + (x + 1.0) * 0.5 * w, wt * 0.5 * w));
            }
        }
        out
    })
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

impl Expr {
    /// IEEE double evaluation. Every free symbol must be bound.
    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        Ok(eval_mag(self, b, false)?.0)
    }
}

/// Value together with a magnitude scale: the same evaluation with every sum
/// replaced by the sum of absolute values. Used to judge cancellation.
pub(crate) fn eval_with_magnitude(e: &Expr, b: &Bindings) -> Result<(f64, f64), ExprError> {
    eval_mag(e, b, true)
}

fn eval_mag(e: &Expr, b: &Bindings, want_mag: bool) -> Result<(f64, f64), ExprError> {
    Ok(match e.node() {
        Node::Num(r) => {
            let v = rational_to_f64(r);
            (v, v.abs())
        }
        Node::Sym(s) => {
            let v = b
                .get(s.name())
                .ok_or_else(|| ExprError::Unbound(s.name().to_string()))?;
            (v, v.abs())
        }
        Node::Add(ts) => {
            let (mut v, mut m) = (0.0, 0.0);
            for t in ts {
                let (tv, tm) = eval_mag(t, b, want_mag)?;
                v += tv;
                m += tm;
            }
            (checked(v, "sum")?, m)
        }
        Node::Mul(fs) => {
            let (mut v, mut m) = (1.0, 1.0);
            for f in fs {
                let (fv, fm) = eval_mag(f, b, want_mag)?;
                v *= fv;
                m *= fm;
            }
            (checked(v, "product")?, m)
        }
        Node::Pow(base, p) => {
            let (bv, bm) = eval_mag(base, b, want_mag)?;
            let v = real_pow(bv, p)?;
            let m = if want_mag && !p.is_negative() {
                bm.powf(rational_to_f64(p))
            } else {
                v.abs()
            };
            (v, m)
        }
        Node::Func(f, a) => {
            let (av, _) = eval_mag(a, b, want_mag)?;
            let v = apply_func(*f, av)?;
            (v, v.abs())
        }
        Node::Norm(xs) => {
            let mut s = 0.0;
            for x in xs {
                let (xv, _) = eval_mag(x, b, want_mag)?;
                s += xv * xv;
            }
            let v = checked(s.sqrt(), "norm")?;
            (v, v)
        }
        Node::Integral { body, var } => {
            let mut inner = b.clone();
            let (mut v, mut m) = (0.0, 0.0);
            for &(t, w) in quadrature_rule() {
                inner.set(var.name(), t);
                let (bv, bm) = eval_mag(body, &inner, want_mag)?;
                v += w * bv;
                m += w * bm;
            }
            (checked(v, "integral")?, m)
        }
    })
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Add(usize),
    Mul(usize),
    Powi(i32),
    Pow(Rational),
    Func(Func),
    Norm(usize),
    Integral { body: Box<Program>, slot: usize },
}

/// An expression compiled to a flat stack program over a slot vector.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    arity: usize,
}

impl Program {
    /// Compile `e`; symbols listed in `slots` become inputs, all other free
    /// symbols must be bound in `constants`.
    pub fn compile(e: &Expr, slots: &[Symbol], constants: &Bindings) -> Result<Program, ExprError> {
        let index: HashMap<&str, usize> = slots
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name(), i))
            .collect();
        let mut ops = Vec::new();
        emit(e, &index, slots.len(), constants, &mut ops)?;
        Ok(Program {
            ops,
            arity: slots.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, inputs: &[f64]) -> Result<f64, ExprError> {
        let mut stack = Vec::with_capacity(16);
        self.eval_with(inputs, &mut stack)
    }

    pub fn eval_with(&self, inputs: &[f64], stack: &mut Vec<f64>) -> Result<f64, ExprError> {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(i) => stack.push(inputs[*i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s: f64 = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let s: f64 = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Powi(k) => {
                    let x = stack.pop().unwrap();
                    if x == 0.0 && *k < 0 {
                        return Err(ExprError::Domain("division by zero".into()));
                    }
                    stack.push(x.powi(*k));
                }
                Op::Pow(p) => {
                    let x = stack.pop().unwrap();
                    stack.push(real_pow(x, p)?);
                }
                Op::Func(f) => {
                    let x = stack.pop().unwrap();
                    stack.push(apply_func(*f, x)?);
                }
                Op::Norm(n) => {
                    let at = stack.len() - n;
                    let s: f64 = stack[at..].iter().map(|x| x * x).sum();
                    stack.truncate(at);
                    stack.push(s.sqrt());
                }
                Op::Integral { body, slot } => {
                    let mut local = inputs.to_vec();
                    local.resize(body.arity, 0.0);
                    let mut inner = Vec::with_capacity(16);
                    let mut acc = 0.0;
                    for &(t, w) in quadrature_rule() {
                        local[*slot] = t;
                        acc += w * body.eval_with(&local, &mut inner)?;
                    }
                    stack.push(acc);
                }
            }
        }
        let v = stack.pop().unwrap_or(0.0);
        checked(v, "program result")
    }
}

fn emit(
    e: &Expr,
    index: &HashMap<&str, usize>,
    arity: usize,
    constants: &Bindings,
    ops: &mut Vec<Op>,
) -> Result<(), ExprError> {
    match e.node() {
        Node::Num(r) => ops.push(Op::Const(rational_to_f64(r))),
        Node::Sym(s) => match index.get(s.name()) {
            Some(&i) => ops.push(Op::Var(i)),
            None => match constants.get(s.name()) {
                Some(v) => ops.push(Op::Const(v)),
                None => return Err(ExprError::Unbound(s.name().to_string())),
            },
        },
        Node::Add(xs) | Node::Mul(xs) | Node::Norm(xs) => {
            for x in xs {
                emit(x, index, arity, constants, ops)?;
            }
            ops.push(match e.node() {
                Node::Add(_) => Op::Add(xs.len()),
                Node::Mul(_) => Op::Mul(xs.len()),
                _ => Op::Norm(xs.len()),
            });
        }
        Node::Pow(b, p) => {
            emit(b, index, arity, constants, ops)?;
            match (
                p.denom() == &num_bigint::BigInt::from(1),
                p.numer().to_i32(),
            ) {
                (true, Some(k)) => ops.push(Op::Powi(k)),
                _ => ops.push(Op::Pow(p.clone())),
            }
        }
        Node::Func(f, a) => {
            emit(a, index, arity, constants, ops)?;
            ops.push(Op::Func(*f));
        }
        Node::Integral { body, var } => {
            let mut inner: HashMap<&str, usize> = index.clone();
            inner.insert(var.name(), arity);
            let mut body_ops = Vec::new();
            emit(body, &inner, arity + 1, constants, &mut body_ops)?;
            ops.push(Op::Integral {
                body: Box::new(Program {
                    ops: body_ops,
                    arity: arity + 1,
                }),
                slot: arity,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Symbol, SymbolKind};

    #[test]
    fn kinetic_energy_value() {
        let m = Symbol::parameter("m").expr();
        let qd = Symbol::velocity("qd").expr();
        let e = m * qd.powi(2) / 2;
        let b = Bindings::new().with("m", 2.0).with("qd", 3.0);
        assert_eq!(e.eval(&b).unwrap(), 9.0);
    }

    #[test]
    fn quotient_of_equal_symbols() {
        let q = Symbol::coordinate("q").expr();
        let e = &q / &q;
        assert_eq!(e.eval(&Bindings::new().with("q", 5.0)).unwrap(), 1.0);
    }

    #[test]
    fn log_of_zero_is_domain_error() {
        let q = Symbol::coordinate("q").expr();
        let r = q.ln().eval(&Bindings::new().with("q", 0.0));
        assert!(matches!(r, Err(ExprError::Domain(_))));
    }

    #[test]
    fn unbound_symbol_is_reported() {
        let q = Symbol::coordinate("q").expr();
        assert_eq!(
            q.eval(&Bindings::new()),
            Err(ExprError::Unbound("q".into()))
        );
    }

    #[test]
    fn odd_root_of_negative() {
        let x = Symbol::coordinate("x").expr();
        let e = x.pow_rational(crate::expr::rat(2, 3));
        let v = e.eval(&Bindings::new().with("x", -8.0)).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!(x.sqrt().eval(&Bindings::new().with("x", -1.0)).is_err());
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let t = Symbol::new("_t", SymbolKind::Time);
        let e = Expr::integral(t.expr().powi(7) * 8, t);
        assert!((e.eval(&Bindings::new()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn compiled_program_agrees_with_tree_walk() {
        let q = Symbol::coordinate("q");
        let qd = Symbol::velocity("qd");
        let k = Symbol::parameter("k");
        let e = (k.expr() * q.expr()).exp() * qd.expr().powi(3) / (q.expr().powi(2) + 1)
            + Expr::norm([q.expr(), qd.expr()]).sqrt()
            - qd.expr().cos();
        let consts = Bindings::new().with("k", 0.3);
        let p = Program::compile(&e, &[q.clone(), qd.clone()], &consts).unwrap();
        for &(a, b) in &[(0.5, 1.5), (-1.2, 0.3), (2.0, -0.7)] {
            let direct = e
                .eval(&Bindings::new().with("q", a).with("qd", b).with("k", 0.3))
                .unwrap();
            let compiled = p.eval(&[a, b]).unwrap();
            assert!((direct - compiled).abs() < 1e-13);
        }
    }
}
