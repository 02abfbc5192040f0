use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{rat_int, Expr, Func, Node, Rational};

impl Expr {
    /// Canonical form: flattened and sorted sums and products, folded
    /// constants, like terms and like bases combined.
    pub fn simplify(&self) -> Expr {
        simplify(self)
    }
}

pub(crate) fn simplify(e: &Expr) -> Expr {
    if e.is_canonical() {
        return e.clone();
    }
    match e.node() {
        Node::Num(_) | Node::Sym(_) => Expr::canonical(e.node().clone()),
        Node::Add(ts) => make_add(ts.iter().map(simplify).collect()),
        Node::Mul(fs) => make_mul(fs.iter().map(simplify).collect()),
        Node::Pow(b, p) => make_pow(simplify(b), p.clone()),
        Node::Func(f, a) => make_func(*f, simplify(a)),
        Node::Norm(xs) => make_norm(xs.iter().map(simplify).collect()),
        Node::Integral { body, var } => {
            let body = simplify(body);
            if body.depends_on(var) {
                Expr::canonical(Node::Integral {
                    body,
                    var: var.clone(),
                })
            } else {
                body
            }
        }
    }
}

fn num(r: Rational) -> Expr {
    Expr::canonical(Node::Num(r))
}

/// Split a canonical term into its rational coefficient and the rest.
fn split_coeff(t: &Expr) -> (Rational, Expr) {
    if let Node::Mul(fs) = t.node() {
        if let Node::Num(c) = fs[0].node() {
            let rest = if fs.len() == 2 {
                fs[1].clone()
            } else {
                Expr::canonical(Node::Mul(fs[1..].to_vec()))
            };
            return (c.clone(), rest);
        }
    }
    (Rational::one(), t.clone())
}

fn scale(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    let mut fs = vec![num(c)];
    match rest.node() {
        Node::Mul(inner) => fs.extend(inner.iter().cloned()),
        _ => fs.push(rest),
    }
    Expr::canonical(Node::Mul(fs))
}

pub(crate) fn make_add(terms: Vec<Expr>) -> Expr {
    let mut constant = Rational::zero();
    let mut pairs: Vec<(Expr, Rational)> = Vec::with_capacity(terms.len());
    let push = |t: &Expr, constant: &mut Rational, pairs: &mut Vec<(Expr, Rational)>| match t.node()
    {
        Node::Num(r) => *constant += r,
        _ => {
            let (c, rest) = split_coeff(t);
            pairs.push((rest, c));
        }
    };
    for t in &terms {
        match t.node() {
            Node::Add(inner) => inner
                .iter()
                .for_each(|x| push(x, &mut constant, &mut pairs)),
            _ => push(t, &mut constant, &mut pairs),
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<Expr> = Vec::with_capacity(pairs.len() + 1);
    if !constant.is_zero() {
        out.push(num(constant.clone()));
    }
    let mut iter = pairs.into_iter().peekable();
    while let Some((rest, mut c)) = iter.next() {
        while let Some((next, _)) = iter.peek() {
            if *next == rest {
                c += iter.next().unwrap().1;
            } else {
                break;
            }
        }
        if !c.is_zero() {
            out.push(scale(c, rest));
        }
    }
    match out.len() {
        0 => num(Rational::zero()),
        1 => out.pop().unwrap(),
        _ => Expr::canonical(Node::Add(out)),
    }
}

pub(crate) fn make_mul(factors: Vec<Expr>) -> Expr {
    let mut coeff = Rational::one();
    let mut bases: Vec<(Expr, Rational)> = Vec::with_capacity(factors.len());
    let mut exp_args: Vec<Expr> = Vec::new();

    let mut stack: Vec<Expr> = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Num(r) => coeff *= r,
            Node::Mul(inner) => stack.extend(inner.iter().rev().cloned()),
            Node::Pow(b, p) => bases.push((b.clone(), p.clone())),
            Node::Func(Func::Exp, a) => exp_args.push(a.clone()),
            _ => bases.push((f.clone(), Rational::one())),
        }
    }
    if coeff.is_zero() {
        return num(coeff);
    }

    bases.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<Expr> = Vec::with_capacity(bases.len() + 1);
    let mut needs_pass = false;
    let mut iter = bases.into_iter().peekable();
    while let Some((base, mut p)) = iter.next() {
        while let Some((next, _)) = iter.peek() {
            if *next == base {
                p += iter.next().unwrap().1;
            } else {
                break;
            }
        }
        if p.is_zero() {
            continue;
        }
        let merged = make_pow(base, p);
        match merged.node() {
            Node::Num(r) => coeff *= r,
            Node::Mul(_) | Node::Func(Func::Exp, _) => {
                needs_pass = true;
                out.push(merged);
            }
            _ => out.push(merged),
        }
    }
    if !exp_args.is_empty() {
        let e = make_func(Func::Exp, make_add(exp_args));
        match e.node() {
            Node::Num(r) => coeff *= r,
            Node::Func(Func::Exp, _) => out.push(e),
            _ => {
                needs_pass = true;
                out.push(e);
            }
        }
    }
    if coeff.is_zero() {
        return num(coeff);
    }
    if needs_pass {
        out.push(num(coeff));
        return make_mul(out);
    }
    out.sort();
    if out.is_empty() {
        return num(coeff);
    }
    if coeff.is_one() && out.len() == 1 {
        return out.pop().unwrap();
    }
    if out.len() == 1 {
        if let Node::Add(ts) = out[0].node() {
            let c = num(coeff);
            return make_add(
                ts.iter()
                    .map(|t| make_mul(vec![c.clone(), t.clone()]))
                    .collect(),
            );
        }
    }
    if !coeff.is_one() {
        out.insert(0, num(coeff));
    }
    Expr::canonical(Node::Mul(out))
}

fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

/// Exact integer `d`-th root of a non-negative integer, when it exists.
fn exact_root(n: &BigInt, d: u32) -> Option<BigInt> {
    let r = n.nth_root(d);
    if num_traits::pow::pow(r.clone(), d as usize) == *n {
        Some(r)
    } else {
        None
    }
}

fn rational_power(base: &Rational, p: &Rational) -> Option<Rational> {
    let n = p.numer().to_i64()?;
    let d = p.denom().to_u32()?;
    if base.is_zero() {
        return if n > 0 { Some(Rational::zero()) } else { None };
    }
    if n.unsigned_abs() > 4096 {
        return None;
    }
    let root = if d == 1 {
        base.clone()
    } else {
        if base.is_negative() && d % 2 == 0 {
            return None;
        }
        let sign = if base.is_negative() { -1 } else { 1 };
        let a = base.abs();
        let rn = exact_root(a.numer(), d)?;
        let rd = exact_root(a.denom(), d)?;
        Rational::new(rn * sign, rd)
    };
    let n32 = i32::try_from(n).ok()?;
    Some(num_traits::pow::Pow::pow(&root, n32))
}

pub(crate) fn make_pow(base: Expr, p: Rational) -> Expr {
    if p.is_zero() {
        return num(Rational::one());
    }
    if p.is_one() {
        return base;
    }
    match base.node() {
        Node::Num(r) => {
            if r.is_one() {
                return num(Rational::one());
            }
            if let Some(v) = rational_power(r, &p) {
                return num(v);
            }
            Expr::canonical(Node::Pow(base, p))
        }
        Node::Pow(b2, p2) if is_integer(&p) => make_pow(b2.clone(), p2 * &p),
        Node::Mul(fs) if is_integer(&p) => {
            make_mul(fs.iter().map(|f| make_pow(f.clone(), p.clone())).collect())
        }
        Node::Func(Func::Exp, a) => make_func(Func::Exp, make_mul(vec![num(p.clone()), a.clone()])),
        _ => Expr::canonical(Node::Pow(base, p)),
    }
}

pub(crate) fn make_func(f: Func, a: Expr) -> Expr {
    match (f, a.node()) {
        (Func::Exp, Node::Num(r)) if r.is_zero() => num(Rational::one()),
        (Func::Exp, Node::Func(Func::Log, x)) => x.clone(),
        (Func::Log, Node::Num(r)) if r.is_one() => num(Rational::zero()),
        (Func::Log, Node::Func(Func::Exp, x)) => x.clone(),
        (Func::Sin, Node::Num(r)) if r.is_zero() => num(Rational::zero()),
        (Func::Cos, Node::Num(r)) if r.is_zero() => num(Rational::one()),
        (Func::Abs, Node::Num(r)) => num(r.abs()),
        (Func::Abs, Node::Func(Func::Abs, _)) => a.clone(),
        (Func::Sign, Node::Num(r)) => num(if r.is_zero() {
            Rational::zero()
        } else if r.is_negative() {
            -Rational::one()
        } else {
            Rational::one()
        }),
        _ => Expr::canonical(Node::Func(f, a)),
    }
}

fn make_norm(xs: Vec<Expr>) -> Expr {
    match xs.len() {
        0 => num(Rational::zero()),
        1 => make_func(Func::Abs, xs.into_iter().next().unwrap()),
        _ => {
            if xs.iter().all(|x| matches!(x.node(), Node::Num(_))) {
                let sq: Vec<Expr> = xs.iter().map(|x| make_pow(x.clone(), rat_int(2))).collect();
                return make_pow(make_add(sq), super::rat(1, 2));
            }
            Expr::canonical(Node::Norm(xs))
        }
    }
}
