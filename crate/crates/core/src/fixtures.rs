//! Reference systems with known symmetries and conserved quantities.

use crate::bundle::{Chart, PhaseField, VectorFieldQ};
use crate::dynamics::ForcedLagrangianSystem;
use crate::expr::Expr;
use crate::rayleigh::force_from_dissipation;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub system: ForcedLagrangianSystem,
    pub dissipation: Option<Expr>,
    pub q_candidates: Vec<(String, VectorFieldQ)>,
    pub tq_candidates: Vec<(String, PhaseField)>,
    pub conserved: Vec<(String, Expr)>,
    /// Initial `(q, q̇)`.
    pub initial: Vec<f64>,
}

impl Fixture {
    pub fn chart(&self) -> &Chart {
        self.system.chart()
    }

    pub fn conserved_quantity(&self, name: &str) -> Option<&Expr> {
        self.conserved
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    pub fn tq_candidate(&self, name: &str) -> Option<&PhaseField> {
        self.tq_candidates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    pub fn q_candidate(&self, name: &str) -> Option<&VectorFieldQ> {
        self.q_candidates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }
}

fn p(c: &Chart, s: &str) -> Expr {
    c.parse(s)
        .unwrap_or_else(|e| panic!("fixture expression `{s}`: {e}"))
}

fn dissipative(
    name: &'static str,
    chart: Chart,
    l: &str,
    r: &str,
    seed: u64,
) -> Result<(Fixture, Chart)> {
    let l = p(&chart, l);
    let r = p(&chart, r);
    let beta = force_from_dissipation(&chart, &r)?;
    let system = ForcedLagrangianSystem::new(chart.clone(), l, beta, seed)?;
    Ok((
        Fixture {
            name,
            system,
            dissipation: Some(r),
            q_candidates: Vec::new(),
            tq_candidates: Vec::new(),
            conserved: Vec::new(),
            initial: Vec::new(),
        },
        chart,
    ))
}

/// Particle in a fluid with drag `k q̇²`.
pub fn fluid(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["q"], &[("m", 1.0), ("k", 0.1)])?;
    let (mut f, c) = dissipative("fluid", c, "m*qd^2/2", "k*qd^3/3", seed)?;
    f.q_candidates = vec![
        (
            "X".into(),
            VectorFieldQ::new(&c, vec![p(&c, "exp(k*q/m)")])?,
        ),
        (
            "X_half".into(),
            VectorFieldQ::new(&c, vec![p(&c, "exp(k*q/(2*m))")])?,
        ),
    ];
    f.conserved = vec![("C".into(), p(&c, "m*exp(k*q/m)*qd"))];
    f.initial = vec![0.0, 1.0];
    Ok(f)
}

/// Disk rolling with sliding friction on a rough plane.
pub fn disk(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["φ"], &[("m", 1.0), ("r", 1.0), ("μ", 0.1), ("g", 9.8)])?;
    let (mut f, c) = dissipative("disk", c, "m*r^2*φd^2/4", "μ*m*g*r*φd/2", seed)?;
    f.tq_candidates = vec![
        (
            "X_reversed".into(),
            PhaseField::tangent(&c, vec![p(&c, "r*φd")], vec![p(&c, "μ*g")])?,
        ),
        (
            "X".into(),
            PhaseField::tangent(&c, vec![p(&c, "r*φd")], vec![p(&c, "-μ*g")])?,
        ),
    ];
    f.conserved = vec![
        ("C_reversed".into(), p(&c, "μ*m*g*r^2*φ/2 - m*r^3*φd^2/4")),
        ("C".into(), p(&c, "μ*m*g*r^2*φ/2 + m*r^3*φd^2/4")),
    ];
    f.initial = vec![0.0, 5.0];
    Ok(f)
}

/// Counter-rotating rings of a floor polisher sliding on a rough surface.
pub fn polisher(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(
        &["x", "y", "θ"],
        &[("m", 1.0), ("r", 1.0), ("ω", 1.0), ("μ", 0.1), ("g", 9.8)],
    )?;
    let (mut f, c) = dissipative(
        "polisher",
        c,
        "m*(xd^2 + yd^2 + r^2*θd^2 + r^2*ω^2)",
        "2*μ*m*g*r*ω + μ*m*g*(xd^2 + yd^2)/(2*r*ω)",
        seed,
    )?;
    let z = Expr::zero;
    let tangent = |bx: &str, by: &str, vx: &str, vy: &str| {
        PhaseField::tangent(
            &c,
            vec![p(&c, bx), p(&c, by), z()],
            vec![p(&c, vx), p(&c, vy), z()],
        )
    };
    f.tq_candidates = vec![
        ("X1_reversed".into(), tangent("2*r*ω", "0", "μ*g", "0")?),
        ("X2_reversed".into(), tangent("0", "2*r*ω", "0", "μ*g")?),
        ("X1".into(), tangent("2*r*ω", "0", "-μ*g", "0")?),
        ("X2".into(), tangent("0", "2*r*ω", "0", "-μ*g")?),
    ];
    f.conserved = vec![
        ("C1_reversed".into(), p(&c, "2*m*r*ω*xd - μ*m*g*x")),
        ("C2_reversed".into(), p(&c, "2*m*r*ω*yd - μ*m*g*y")),
        ("C1".into(), p(&c, "2*m*r*ω*xd + μ*m*g*x")),
        ("C2".into(), p(&c, "2*m*r*ω*yd + μ*m*g*y")),
    ];
    f.initial = vec![0.0, 0.0, 0.0, 3.0, -2.0, 0.5];
    Ok(f)
}

pub fn oscillator(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["q"], &[("m", 1.0), ("k", 1.0)])?;
    let system =
        ForcedLagrangianSystem::conservative(c.clone(), p(&c, "m*qd^2/2 - k*q^2/2"), seed)?;
    Ok(Fixture {
        name: "oscillator",
        conserved: vec![("E".into(), system.energy().clone())],
        system,
        dissipation: None,
        q_candidates: Vec::new(),
        tq_candidates: Vec::new(),
        initial: vec![1.0, 0.0],
    })
}

pub fn free_particle(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["x", "y"], &[("m", 1.0)])?;
    let system = ForcedLagrangianSystem::conservative(c.clone(), p(&c, "m*(xd^2 + yd^2)/2"), seed)?;
    Ok(Fixture {
        name: "free_particle",
        q_candidates: vec![
            ("Dx".into(), VectorFieldQ::coordinate(&c, 0)),
            ("Dy".into(), VectorFieldQ::coordinate(&c, 1)),
            (
                "rotation".into(),
                VectorFieldQ::new(&c, vec![-c.q(1), c.q(0)])?,
            ),
        ],
        conserved: vec![
            ("px".into(), p(&c, "m*xd")),
            ("py".into(), p(&c, "m*yd")),
            ("J".into(), p(&c, "m*(x*yd - y*xd)")),
        ],
        system,
        dissipation: None,
        tq_candidates: Vec::new(),
        initial: vec![0.0, 0.0, 1.0, 0.5],
    })
}

/// Harmonic central force in polar coordinates with radial damping.
pub fn planar_central_force(seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["r", "θ"], &[("m", 1.0), ("k", 1.0), ("c", 0.1)])?;
    let (mut f, c) = dissipative(
        "planar_central_force",
        c,
        "m*(rd^2 + r^2*θd^2)/2 - k*r^2/2",
        "c*rd^2/2",
        seed,
    )?;
    f.q_candidates = vec![("rotation".into(), VectorFieldQ::coordinate(&c, 1))];
    f.conserved = vec![("ℓ".into(), p(&c, "m*r^2*θd"))];
    f.initial = vec![1.0, 0.0, 0.0, 1.2];
    Ok(f)
}

/// Harmonic central force in `ℝ³` with damping of the radial velocity,
/// `𝓡 = c (q·q̇)²/2`.
pub fn central_force_3d(seed: u64) -> Result<Fixture> {
    central_3d("central_force_3d", "c*(x*xd + y*yd + z*zd)^2/2", true, seed)
}

/// Harmonic central force in `ℝ³` with isotropic linear drag
/// `𝓡 = c|q̇|²/2`.
pub fn isotropic_drag_3d(seed: u64) -> Result<Fixture> {
    central_3d("isotropic_drag_3d", "c*(xd^2 + yd^2 + zd^2)/2", false, seed)
}

fn central_3d(name: &'static str, r: &str, keeps_j: bool, seed: u64) -> Result<Fixture> {
    let c = Chart::with_parameters(&["x", "y", "z"], &[("m", 1.0), ("k", 1.0), ("c", 0.3)])?;
    let (mut f, c) = dissipative(
        name,
        c,
        "m*(xd^2 + yd^2 + zd^2)/2 - k*(x^2 + y^2 + z^2)/2",
        r,
        seed,
    )?;
    if keeps_j {
        f.conserved = angular_momentum(&c);
    }
    f.initial = vec![1.0, 0.0, 0.2, 0.3, 1.1, -0.4];
    Ok(f)
}

/// `m q × q̇` on a three-dimensional chart.
pub fn angular_momentum(c: &Chart) -> Vec<(String, Expr)> {
    vec![
        ("J1".into(), p(c, "m*(y*zd - z*yd)")),
        ("J2".into(), p(c, "m*(z*xd - x*zd)")),
        ("J3".into(), p(c, "m*(x*yd - y*xd)")),
    ]
}

/// Every fixture above.
pub fn all(seed: u64) -> Result<Vec<Fixture>> {
    Ok(vec![
        fluid(seed)?,
        disk(seed)?,
        polisher(seed)?,
        oscillator(seed)?,
        free_particle(seed)?,
        planar_central_force(seed)?,
        central_force_3d(seed)?,
        isotropic_drag_3d(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::is_zero;
    use crate::Verdict;

    #[test]
    fn all_build() {
        let fs = all(0).unwrap();
        assert_eq!(fs.len(), 8);
        for f in &fs {
            assert_eq!(f.initial.len(), 2 * f.chart().dim(), "{}", f.name);
            assert!(f.system.field().is_ok());
        }
    }

    #[test]
    fn corrected_quantities_are_conserved() {
        for f in all(0).unwrap() {
            for (name, q) in &f.conserved {
                let rate = f.system.time_derivative(q).unwrap();
                let zero = is_zero(&rate, 0).unwrap();
                assert_eq!(
                    zero,
                    !name.ends_with("_reversed"),
                    "{} {name}: {rate}",
                    f.name
                );
            }
        }
    }

    #[test]
    fn isotropic_drag_dissipates_angular_momentum() {
        let f = isotropic_drag_3d(0).unwrap();
        let j = angular_momentum(f.chart());
        let rate = f.system.time_derivative(&j[2].1).unwrap();
        assert_eq!(Verdict::from(is_zero(&rate, 0)), Verdict::False);
    }
}
