//! Inputs shared by the benchmarks.

use forcedmech_core::fixtures::{self, Fixture};
use forcedmech_core::{Chart, Expr};

/// A nested expression in `x, y, z` mixing polynomial and elementary terms.
pub fn nested_expression() -> (Chart, Expr) {
    let c = Chart::new(&["x", "y", "z"]).expect("chart");
    let e = c
        .parse("sin(x*y)^2*exp(z/3) + (x^2 + y^2 + z^2)^3 - cos(x + z)*y^4/(1 + x^2)")
        .expect("expression");
    (c, e)
}

pub fn polisher() -> Fixture {
    fixtures::polisher(0).expect("polisher fixture")
}

pub fn central_force_3d() -> Fixture {
    fixtures::central_force_3d(0).expect("central force fixture")
}
