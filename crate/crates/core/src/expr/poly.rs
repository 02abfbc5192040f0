use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::simplify::{make_add, make_mul, make_pow, simplify};
use super::{Expr, Node, Rational, Symbol};

impl Expr {
    /// Replace symbols by expressions, then simplify.
    pub fn subs(&self, map: &HashMap<Symbol, Expr>) -> Expr {
        simplify(&subs_raw(self, map))
    }

    pub fn subs1(&self, s: &Symbol, with: &Expr) -> Expr {
        let mut m = HashMap::new();
        m.insert(s.clone(), with.clone());
        self.subs(&m)
    }

    /// Distribute products over sums and expand positive integer powers of
    /// sums. Function arguments are left alone.
    pub fn expand(&self) -> Expr {
        expand(&simplify(self))
    }

    /// View the expression as a polynomial in `vars` with coefficients free of
    /// those variables. Returns `None` when it is not one.
    pub fn as_polynomial(&self, vars: &[Symbol]) -> Option<Polynomial> {
        let e = self.expand();
        let terms: Vec<Expr> = match e.node() {
            Node::Add(ts) => ts.clone(),
            _ => vec![e.clone()],
        };
        let mut acc: BTreeMap<Vec<u32>, Vec<Expr>> = BTreeMap::new();
        for t in terms {
            let factors: Vec<Expr> = match t.node() {
                Node::Mul(fs) => fs.clone(),
                _ => vec![t.clone()],
            };
            let mut exps = vec![0u32; vars.len()];
            let mut coeff = Vec::new();
            for f in factors {
                let (base, p) = match f.node() {
                    Node::Pow(b, p) => (b.clone(), Some(p.clone())),
                    _ => (f.clone(), None),
                };
                let var_idx = base
                    .as_symbol()
                    .and_then(|s| vars.iter().position(|v| v == s));
                match (var_idx, p) {
                    (Some(i), None) => exps[i] += 1,
                    (Some(i), Some(p)) => {
                        if !p.denom().is_positive()
                            || p.denom() != &num_bigint::BigInt::from(1)
                            || p.is_negative()
                        {
                            return None;
                        }
                        exps[i] += p.numer().to_u32()?;
                    }
                    (None, _) => {
                        if vars.iter().any(|v| f.depends_on(v)) {
                            return None;
                        }
                        coeff.push(f);
                    }
                }
            }
            acc.entry(exps).or_default().push(make_mul(coeff));
        }
        let mut terms = BTreeMap::new();
        for (k, v) in acc {
            let c = make_add(v);
            if !c.is_literal_zero() {
                terms.insert(k, c);
            }
        }
        Some(Polynomial {
            vars: vars.to_vec(),
            terms,
        })
    }
}

impl Expr {
    /// `∫₀¹ self d(var)`. Closed form when every term is a power of `var`
    /// times a `var`-free factor; otherwise an integral node.
    pub fn integrate_unit(&self, var: &Symbol) -> Expr {
        let e = self.expand();
        let terms: Vec<Expr> = match e.node() {
            Node::Add(ts) => ts.clone(),
            _ => vec![e.clone()],
        };
        let mut out = Vec::with_capacity(terms.len());
        for t in &terms {
            match split_power(t, var) {
                Some((k, rest)) if k > -Rational::one() => {
                    out.push(make_mul(vec![
                        rest,
                        Expr::rational((k + Rational::one()).recip()),
                    ]));
                }
                _ => return Expr::integral(e, var.clone()),
            }
        }
        make_add(out)
    }
}

/// Write `term` as `var^k * rest` with `rest` free of `var`. Powers of
/// products are split, which is valid for `var ≥ 0`.
fn split_power(term: &Expr, var: &Symbol) -> Option<(Rational, Expr)> {
    if !term.depends_on(var) {
        return Some((Rational::zero(), term.clone()));
    }
    match term.node() {
        Node::Sym(s) if s == var => Some((Rational::one(), Expr::one())),
        Node::Pow(b, p) => {
            let (k, rest) = split_power(b, var)?;
            Some((k * p, make_pow(rest, p.clone())))
        }
        Node::Mul(fs) => {
            let mut k = Rational::zero();
            let mut rest = Vec::with_capacity(fs.len());
            for f in fs {
                let (kf, r) = split_power(f, var)?;
                k += kf;
                rest.push(r);
            }
            Some((k, make_mul(rest)))
        }
        _ => None,
    }
}

fn subs_raw(e: &Expr, map: &HashMap<Symbol, Expr>) -> Expr {
    match e.node() {
        Node::Num(_) => e.clone(),
        Node::Sym(s) => map.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Add(xs) => Expr::from_node(Node::Add(xs.iter().map(|x| subs_raw(x, map)).collect())),
        Node::Mul(xs) => Expr::from_node(Node::Mul(xs.iter().map(|x| subs_raw(x, map)).collect())),
        Node::Norm(xs) => {
            Expr::from_node(Node::Norm(xs.iter().map(|x| subs_raw(x, map)).collect()))
        }
        Node::Pow(b, p) => Expr::from_node(Node::Pow(subs_raw(b, map), p.clone())),
        Node::Func(f, a) => Expr::from_node(Node::Func(*f, subs_raw(a, map))),
        Node::Integral { body, var } => {
            let mut inner = map.clone();
            inner.remove(var);
            Expr::from_node(Node::Integral {
                body: subs_raw(body, &inner),
                var: var.clone(),
            })
        }
    }
}

fn terms_of(e: &Expr) -> Vec<Expr> {
    match e.node() {
        Node::Add(ts) => ts.clone(),
        _ => vec![e.clone()],
    }
}

fn multiply_out(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(make_mul(vec![x.clone(), y.clone()]));
        }
    }
    out
}

fn expand(e: &Expr) -> Expr {
    match e.node() {
        Node::Add(ts) => make_add(ts.iter().map(expand).collect()),
        Node::Mul(fs) => {
            let mut acc = vec![Expr::one()];
            for f in fs {
                let ef = expand(f);
                acc = multiply_out(&acc, &terms_of(&ef));
            }
            make_add(acc)
        }
        Node::Pow(b, p) => {
            let n = if p.denom() == &num_bigint::BigInt::from(1) {
                p.numer().to_i64()
            } else {
                None
            };
            match n {
                Some(n) if n > 1 && matches!(b.node(), Node::Add(_) | Node::Mul(_)) => {
                    let base = terms_of(&expand(b));
                    let mut acc = vec![Expr::one()];
                    for _ in 0..n {
                        acc = multiply_out(&acc, &base);
                    }
                    make_add(acc)
                }
                _ => e.clone(),
            }
        }
        _ => e.clone(),
    }
}

/// Sparse multivariate polynomial with symbolic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub vars: Vec<Symbol>,
    /// Exponent vector -> coefficient (never literally zero).
    pub terms: BTreeMap<Vec<u32>, Expr>,
}

impl Polynomial {
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|k| k.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_expr(&self) -> Expr {
        let terms = self.terms.iter().map(|(k, c)| {
            let mut fs = vec![c.clone()];
            for (v, &e) in self.vars.iter().zip(k) {
                if e > 0 {
                    fs.push(v.expr().powi(e as i64));
                }
            }
            Expr::product(fs)
        });
        Expr::sum(terms).simplify()
    }
}
