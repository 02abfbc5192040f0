use super::simplify::simplify;
use super::{Expr, ExprError, Func, Node, Symbol};
use num_traits::One;

impl Expr {
    /// Exact partial derivative with respect to `s`, simplified. Symbols of
    /// different kinds are independent.
    pub fn diff(&self, s: &Symbol) -> Result<Expr, ExprError> {
        Ok(simplify(&raw_diff(self, s)?))
    }

    /// Directional derivative `Σ v_a ∂e/∂z_a`.
    pub fn directional(&self, vars: &[Symbol], dir: &[Expr]) -> Result<Expr, ExprError> {
        debug_assert_eq!(vars.len(), dir.len());
        let mut terms = Vec::with_capacity(vars.len());
        for (v, c) in vars.iter().zip(dir) {
            if c.is_literal_zero() || !self.depends_on(v) {
                continue;
            }
            terms.push(c * self.diff(v)?);
        }
        Ok(Expr::sum(terms).simplify())
    }

    pub fn gradient(&self, vars: &[Symbol]) -> Result<Vec<Expr>, ExprError> {
        vars.iter().map(|v| self.diff(v)).collect()
    }
}

fn raw_diff(e: &Expr, s: &Symbol) -> Result<Expr, ExprError> {
    if !e.depends_on(s) {
        return Ok(Expr::zero());
    }
    Ok(match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(x) => {
            if x == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(ts) => {
            let mut out = Vec::with_capacity(ts.len());
            for t in ts {
                if t.depends_on(s) {
                    out.push(raw_diff(t, s)?);
                }
            }
            Expr::sum(out)
        }
        Node::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                if !f.depends_on(s) {
                    continue;
                }
                let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                factors.push(raw_diff(f, s)?);
                factors.extend(
                    fs.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone()),
                );
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Pow(b, p) => Expr::product([
            Expr::rational(p.clone()),
            b.pow_rational(p - super::Rational::one()),
            raw_diff(b, s)?,
        ]),
        Node::Func(f, a) => {
            let da = raw_diff(a, s)?;
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => a.recip(),
                Func::Sin => a.cos(),
                Func::Cos => -a.sin(),
                Func::Abs => a / a.abs(),
                Func::Sign => return Err(ExprError::DerivativeUnavailable("sign".into())),
            };
            outer * da
        }
        Node::Norm(xs) => {
            let mut terms = Vec::with_capacity(xs.len());
            for x in xs {
                if x.depends_on(s) {
                    terms.push(x * raw_diff(x, s)?);
                }
            }
            Expr::sum(terms) / e.clone()
        }
        Node::Integral { body, var } => Expr::integral(raw_diff(body, s)?, var.clone()),
    })
}
