//! Dense matrices of expressions and numeric null spaces of linear identities.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundle::{Chart, Fiber};
use crate::expr::{sample_value, Bindings, Expr, ExprError, Symbol};
use crate::{Error, Result};

pub type ExprMatrix = Vec<Vec<Expr>>;

/// Largest dimension handled by symbolic inversion.
pub const SYMBOLIC_LIMIT: usize = 4;

fn minor(m: &ExprMatrix, row: usize, col: usize) -> ExprMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Determinant by cofactor expansion along the first row.
pub fn determinant(m: &ExprMatrix) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => (&m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]).simplify(),
        n => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if m[0][j].is_literal_zero() {
                    continue;
                }
                let c = &m[0][j] * determinant(&minor(m, 0, j));
                terms.push(if j % 2 == 0 { c } else { -c });
            }
            Expr::sum(terms).simplify()
        }
    }
}

pub fn adjugate(m: &ExprMatrix) -> ExprMatrix {
    let n = m.len();
    if n == 1 {
        return vec![vec![Expr::one()]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = determinant(&minor(m, j, i));
                    if (i + j) % 2 == 0 {
                        c
                    } else {
                        (-c).simplify()
                    }
                })
                .collect()
        })
        .collect()
}

fn is_diagonal(m: &ExprMatrix) -> bool {
    m.iter().enumerate().all(|(i, r)| {
        r.iter()
            .enumerate()
            .all(|(j, e)| i == j || e.is_literal_zero())
    })
}

/// Symbolic inverse `adj(m)/det(m)` together with the determinant.
pub fn inverse(m: &ExprMatrix) -> Result<(ExprMatrix, Expr)> {
    let n = m.len();
    if n > SYMBOLIC_LIMIT {
        return Err(Error::Dimension(format!(
            "symbolic inverse limited to n <= {SYMBOLIC_LIMIT}, got {n}"
        )));
    }
    let det = determinant(m);
    if det.is_literal_zero() {
        return Err(Error::SingularHessian(
            "determinant is identically 0".into(),
        ));
    }
    if is_diagonal(m) {
        let inv = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            m[i][i].recip().simplify()
                        } else {
                            Expr::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        return Ok((inv, det));
    }
    let adj = adjugate(m);
    let rdet = det.recip();
    let inv = adj
        .into_iter()
        .map(|r| r.into_iter().map(|e| (e * &rdet).simplify()).collect())
        .collect();
    Ok((inv, det))
}

pub fn mat_vec(m: &ExprMatrix, v: &[Expr]) -> Vec<Expr> {
    m.iter()
        .map(|r| {
            Expr::sum(
                r.iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_literal_zero() && !b.is_literal_zero())
                    .map(|(a, b)| a * b),
            )
            .simplify()
        })
        .collect()
}

/// Solve `a x = b` for a row-major square matrix.
pub fn solve_numeric(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_row_slice(n, n, a);
    m.lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Monomial,
    Sampled,
}

pub const RANK_TOL: f64 = 1e-8;

/// Coefficient vectors `ξ` (length `k`, reduced row echelon form) with
/// `Σ_a ξ^a conditions[j][a] ≡ 0` for every `j`. Conditions polynomial in the
/// velocities are matched monomial-wise; others are sampled on `TQ`.
pub fn identity_null_space(
    chart: &Chart,
    conditions: &[Vec<Expr>],
    k: usize,
    params: &Bindings,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, ExtractionMethod)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, method) = match monomial_rows(chart, conditions, params, &mut rng)? {
        Some(rows) => (rows, ExtractionMethod::Monomial),
        None => (
            sampled_rows(chart, conditions, params, &mut rng)?,
            ExtractionMethod::Sampled,
        ),
    };
    Ok((rref(null_space(&rows, k)), method))
}

fn sample_bindings<R: rand::Rng>(vars: &[Symbol], params: &Bindings, rng: &mut R) -> Bindings {
    let mut b = params.clone();
    for v in vars {
        b.set(v.name(), sample_value(rng));
    }
    b
}

fn monomial_rows<R: rand::Rng>(
    chart: &Chart,
    conditions: &[Vec<Expr>],
    params: &Bindings,
    rng: &mut R,
) -> Result<Option<Vec<Vec<f64>>>> {
    let qd = chart.velocities();
    let k = conditions.first().map_or(0, Vec::len);
    let mut rows = Vec::new();
    for cond in conditions {
        let mut polys = Vec::with_capacity(k);
        for e in cond {
            match e.expand().as_polynomial(qd) {
                Some(p) => polys.push(p),
                None => return Ok(None),
            }
        }
        let mut monomials: Vec<&Vec<u32>> = polys.iter().flat_map(|p| p.terms.keys()).collect();
        monomials.sort();
        monomials.dedup();
        for m in monomials {
            let coeffs: Vec<Expr> = polys
                .iter()
                .map(|p| p.terms.get(m).cloned().unwrap_or_else(Expr::zero))
                .collect();
            let base_dependent = coeffs
                .iter()
                .any(|e| chart.coords().iter().any(|s| e.depends_on(s)));
            let samples = if base_dependent { k + 4 } else { 1 };
            let mut got = 0;
            for _ in 0..samples * 10 {
                if got == samples {
                    break;
                }
                let b = sample_bindings(chart.coords(), params, rng);
                let row: std::result::Result<Vec<f64>, ExprError> =
                    coeffs.iter().map(|e| e.eval(&b)).collect();
                match row {
                    Ok(r) => {
                        rows.push(r);
                        got += 1;
                    }
                    Err(ExprError::Domain(_)) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            if got < samples {
                return Err(Error::Indeterminate("monomial coefficient matching".into()));
            }
        }
    }
    Ok(Some(rows))
}

fn sampled_rows<R: rand::Rng>(
    chart: &Chart,
    conditions: &[Vec<Expr>],
    params: &Bindings,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let vars = chart.phase_vars(Fiber::Velocity);
    let k = conditions.first().map_or(0, Vec::len);
    let points = 2 * k + 8;
    let mut rows = Vec::new();
    let mut got = 0;
    for _ in 0..points * 10 {
        if got == points {
            break;
        }
        let b = sample_bindings(&vars, params, rng);
        let block: std::result::Result<Vec<Vec<f64>>, ExprError> = conditions
            .iter()
            .map(|cond| cond.iter().map(|e| e.eval(&b)).collect())
            .collect();
        match block {
            Ok(block) => {
                rows.extend(block);
                got += 1;
            }
            Err(ExprError::Domain(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if got < points {
        return Err(Error::Indeterminate("sampled linear conditions".into()));
    }
    Ok(rows)
}

/// Orthonormal basis of `{x : A x = 0}` with rows normalized and rank decided
/// relative to the largest singular value.
fn null_space(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return Vec::new();
    }
    let mut data: Vec<f64> = Vec::new();
    let mut m = 0;
    for r in rows {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            data.extend(r.iter().map(|x| x / norm));
            m += 1;
        }
    }
    if m == 0 {
        return (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let rows_padded = m.max(k);
    data.resize(rows_padded * k, 0.0);
    let a = DMatrix::from_row_slice(rows_padded, k, &data);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    (0..k)
        .filter(|&i| svd.singular_values[i] <= RANK_TOL * smax.max(1.0))
        .map(|i| vt.row(i).iter().copied().collect())
        .collect()
}

fn rref(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-10 {
            continue;
        }
        m.swap(r, piv);
        let p = m[r][col];
        m[r].iter_mut().for_each(|x| *x /= p);
        for i in 0..rows {
            if i != r {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..cols {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    for row in &mut m {
        for x in row.iter_mut() {
            if x.abs() < 1e-12 {
                *x = 0.0;
            }
        }
    }
    m
}

/// Nearest rational with denominator at most 1000 when within 1e-9,
/// otherwise the exact binary value.
pub fn snap(x: f64) -> BigRational {
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut y = x;
    for _ in 0..20 {
        let a = y.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > 1000 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() < 1e-9 {
            return BigRational::new(BigInt::from(h1), BigInt::from(k1));
        }
        let frac = y - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        y = 1.0 / frac;
    }
    BigRational::from_float(x).unwrap_or_default()
}
