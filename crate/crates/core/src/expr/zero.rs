use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eval::eval_with_magnitude;
use super::{Bindings, Expr, ExprError};

/// Outcome of a symbolic check backed by a probabilistic zero test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Indeterminate,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Verdict::True
    }

    /// Conjunction with indeterminate absorbing only when no side is false.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Indeterminate,
        }
    }

    pub fn all<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().fold(Verdict::True, Verdict::and)
    }
}

impl From<Result<bool, ExprError>> for Verdict {
    fn from(r: Result<bool, ExprError>) -> Self {
        match r {
            Ok(b) => Verdict::from_bool(b),
            Err(_) => Verdict::Indeterminate,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroTestConfig {
    pub seed: u64,
    pub samples: usize,
    pub max_attempts: usize,
    pub tolerance: f64,
}

impl ZeroTestConfig {
    pub fn new(seed: u64) -> Self {
        ZeroTestConfig {
            seed,
            samples: 100,
            max_attempts: 1000,
            tolerance: 1e-9,
        }
    }
}

/// Probabilistic zero test: canonical simplification first, then probing
/// at seeded random points drawn from [-2,-0.1] ∪ [0.1,2].
pub fn is_zero(e: &Expr, seed: u64) -> Result<bool, ExprError> {
    is_zero_with(e, &ZeroTestConfig::new(seed))
}

pub fn is_zero_with(e: &Expr, cfg: &ZeroTestConfig) -> Result<bool, ExprError> {
    let s = e.simplify();
    if s.is_literal_zero() {
        return Ok(true);
    }
    if s.as_rational().is_some() {
        return Ok(false);
    }
    let symbols: Vec<_> = s.free_symbols().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut valid = 0;
    let mut attempts = 0;
    while valid < cfg.samples {
        if attempts >= cfg.max_attempts {
            return Err(ExprError::Indeterminate { attempts });
        }
        attempts += 1;
        let mut b = Bindings::new();
        for sym in &symbols {
            b.set(sym.name(), sample_value(&mut rng));
        }
        match eval_with_magnitude(&s, &b) {
            Ok((v, mag)) => {
                if v.abs() > cfg.tolerance * (1.0 + mag) {
                    return Ok(false);
                }
                valid += 1;
            }
            Err(ExprError::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
        if symbols.is_empty() {
            break;
        }
    }
    Ok(true)
}

pub(crate) fn sample_value<R: Rng>(rng: &mut R) -> f64 {
    let mag = rng.random_range(0.1..=2.0);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Symbol;

    #[test]
    fn pythagorean_identity() {
        let q = Symbol::coordinate("q").expr();
        let e = q.sin().powi(2) + q.cos().powi(2) - 1;
        assert!(is_zero(&e, 0).unwrap());
    }

    #[test]
    fn product_of_symbols_is_not_zero() {
        let q = Symbol::coordinate("q").expr();
        let qd = Symbol::velocity("qd").expr();
        assert!(!is_zero(&(q * qd), 0).unwrap());
    }

    #[test]
    fn domain_failures_resample() {
        // log(q) undefined for half the draws, still decidable
        let q = Symbol::coordinate("q").expr();
        let e = (q.ln() * 2) - q.powi(2).ln();
        assert!(is_zero(&e, 3).unwrap());
    }

    #[test]
    fn nowhere_defined_is_indeterminate() {
        let q = Symbol::coordinate("q").expr();
        let e = (-(q.powi(2)) - 1).ln();
        assert!(matches!(
            is_zero(&e, 0),
            Err(ExprError::Indeterminate { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let q = Symbol::coordinate("q").expr();
        let e = (q.clone() * 5).sin() - q.sin();
        assert_eq!(is_zero(&e, 7).unwrap(), is_zero(&e, 7).unwrap());
    }

    #[test]
    fn verdict_logic() {
        use Verdict::*;
        assert_eq!(True.and(Indeterminate), Indeterminate);
        assert_eq!(Indeterminate.and(False), False);
        assert_eq!(Verdict::all([True, True]), True);
    }
}
