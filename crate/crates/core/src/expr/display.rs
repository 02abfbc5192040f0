use std::fmt::{self, Write};

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::{rat, Expr, Node, Rational};

// Binding strengths, loosest first.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn is_integer(r: &Rational) -> bool {
    r.denom() == &BigInt::from(1)
}

fn rational_text(r: &Rational) -> (String, u8) {
    let s = if is_integer(r) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    };
    let prec = if r.is_negative() {
        UNARY
    } else if is_integer(r) {
        ATOM
    } else {
        PRODUCT
    };
    (s, prec)
}

fn wrap(out: &mut String, (s, p): (String, u8), min: u8) {
    if p < min {
        let _ = write!(out, "({s})");
    } else {
        out.push_str(&s);
    }
}

/// Split a term into its numeric coefficient and remaining factors.
fn coefficient(e: &Expr) -> (Rational, Vec<Expr>) {
    match e.node() {
        Node::Num(r) => (r.clone(), vec![]),
        Node::Mul(fs) => match fs.first().map(|f| f.node()) {
            Some(Node::Num(r)) => (r.clone(), fs[1..].to_vec()),
            _ => (Rational::one(), fs.clone()),
        },
        _ => (Rational::one(), vec![e.clone()]),
    }
}

fn render_product(coeff: &Rational, factors: &[Expr]) -> (String, u8) {
    if factors.is_empty() {
        return rational_text(coeff);
    }
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in factors {
        match f.node() {
            Node::Pow(b, p) if p.is_negative() => {
                let q = -p.clone();
                den.push(if q.is_one() {
                    b.clone()
                } else {
                    b.pow_rational(q)
                });
            }
            _ => num.push(f.clone()),
        }
    }
    let negative = coeff.is_negative();
    let c = coeff.abs();
    let mut out = String::new();
    let mut parts = Vec::new();
    if !c.numer().is_one() || num.is_empty() {
        parts.push(c.numer().to_string());
    }
    for f in &num {
        let mut s = String::new();
        wrap(&mut s, render(f), POWER);
        parts.push(s);
    }
    out.push_str(&parts.join("*"));
    let den_count = den.len() + usize::from(!c.denom().is_one());
    if den_count > 0 {
        let mut dparts = Vec::new();
        if !c.denom().is_one() {
            dparts.push(c.denom().to_string());
        }
        for f in &den {
            let mut s = String::new();
            wrap(&mut s, render(f), POWER);
            dparts.push(s);
        }
        out.push('/');
        if den_count > 1 {
            let _ = write!(out, "({})", dparts.join("*"));
        } else {
            out.push_str(&dparts[0]);
        }
    }
    if negative {
        (format!("-{out}"), UNARY)
    } else if num.len() + den_count == 1 && den_count == 0 && c.numer().is_one() {
        let single = render(&num[0]);
        (out, single.1)
    } else {
        (out, PRODUCT)
    }
}

fn render(e: &Expr) -> (String, u8) {
    match e.node() {
        Node::Num(r) => rational_text(r),
        Node::Sym(s) => (s.name().to_string(), ATOM),
        Node::Add(ts) => {
            let mut out = String::new();
            for (i, t) in ts.iter().enumerate() {
                let (c, rest) = coefficient(t);
                if i == 0 {
                    wrap(&mut out, render_product(&c, &rest), SUM);
                } else if c.is_negative() {
                    out.push_str(" - ");
                    wrap(&mut out, render_product(&-c, &rest), PRODUCT);
                } else {
                    out.push_str(" + ");
                    wrap(&mut out, render_product(&c, &rest), PRODUCT);
                }
            }
            (out, SUM)
        }
        Node::Mul(_) => {
            let (c, rest) = coefficient(e);
            render_product(&c, &rest)
        }
        Node::Pow(b, p) => {
            if *p == rat(1, 2) {
                return (format!("sqrt({})", render(b).0), ATOM);
            }
            if p.is_negative() {
                return render_product(&Rational::one(), std::slice::from_ref(e));
            }
            let mut out = String::new();
            wrap(&mut out, render(b), ATOM);
            out.push('^');
            wrap(&mut out, rational_text(p), ATOM);
            (out, POWER)
        }
        Node::Func(f, a) => (format!("{}({})", f.name(), render(a).0), ATOM),
        Node::Norm(xs) => {
            let parts: Vec<String> = xs.iter().map(|x| render(x).0).collect();
            (format!("norm({})", parts.join(", ")), ATOM)
        }
        Node::Integral { body, var } => (
            format!("integral01({}, {})", render(body).0, var.name()),
            ATOM,
        ),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self).0)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse_expr, Symbol};
    use std::collections::HashMap;

    fn table() -> HashMap<String, Symbol> {
        [
            Symbol::coordinate("q"),
            Symbol::coordinate("φ"),
            Symbol::velocity("qd"),
            Symbol::velocity("φd"),
            Symbol::parameter("m"),
            Symbol::parameter("k"),
            Symbol::parameter("r"),
        ]
        .into_iter()
        .map(|s| (s.name().to_string(), s))
        .collect()
    }

    #[test]
    fn prints_readable_forms() {
        let t = table();
        let show = |s: &str| parse_expr(s, &t).unwrap().to_string();
        assert_eq!(show("m*qd^2/2"), "m*qd^2/2");
        assert_eq!(show("-q"), "-q");
        assert_eq!(show("q - qd"), "q - qd");
        assert_eq!(show("1/q"), "1/q");
        assert_eq!(show("sqrt(q)"), "sqrt(q)");
        assert_eq!(show("3/4"), "3/4");
        assert_eq!(show("(q+1)^2"), "(1 + q)^2");
        assert_eq!(show("q^(3/2)"), "q^(3/2)");
    }

    #[test]
    fn round_trip_through_parser() {
        let t = table();
        for src in [
            "m*r^2*φd/2",
            "exp(k/m*q)*m*qd",
            "-(q+qd)^3/(2*m*r)",
            "sin(φ)^2 - cos(q)/q^(1/3) + abs(qd)",
            "norm(q, qd) - 1/sqrt(q^2+1)",
            "(-2)^3 + q^(-2) - 3/2*q",
        ] {
            let e = parse_expr(src, &t).unwrap();
            let again = parse_expr(&e.to_string(), &t).unwrap();
            assert_eq!(e, again, "{src} printed as {e}");
        }
    }
}
