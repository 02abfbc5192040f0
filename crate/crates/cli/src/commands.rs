//! The `derive`, `check`, `simulate`, `reduce` and `find` subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use forcedmech_core::bundle::Fiber;
use forcedmech_core::reduction::{
    cyclic_reduce, g_beta_basis, invariance_residuals, momentum_component,
    momentum_conservation_check, AlgebraAction, GBetaBasis, ReducedSystem,
};
use forcedmech_core::simulate::{
    drift, energy_balance_check, integrate, lagrangian_dynamics, monitor, Drift, EnergyBalance,
    Trajectory,
};
use forcedmech_core::symmetry::{analyze_q, analyze_tq, find_polynomial_symmetries};
use forcedmech_core::{
    all_zero, Bindings, Chart, Expr, ForcedHamiltonianSystem, ForcedLagrangianSystem, PhaseField,
    SymmetryReport, VectorFieldQ, Verdict,
};

use crate::error::CliError;
use crate::system::{Action, Integration, Space, SystemFile};

pub const SCHEMA: u32 = 1;

/// Overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: u64,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub degree: Option<u32>,
}

/// What a command produced. `main` goes to `--out` or stdout; `summary`, if
/// any, goes next to it.
#[derive(Debug)]
pub struct Output {
    pub main: String,
    pub summary: Option<String>,
    /// Error to report after the outputs have been written.
    pub deferred: Option<CliError>,
}

impl Output {
    fn text(main: String) -> Self {
        Output {
            main,
            summary: None,
            deferred: None,
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialization");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct SystemSummary {
    coordinates: Vec<String>,
    parameters: BTreeMap<String, f64>,
    lagrangian: Expr,
    force: Vec<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dissipation: Option<Expr>,
}

fn summarize(file: &SystemFile, sys: &ForcedLagrangianSystem) -> SystemSummary {
    let c = sys.chart();
    SystemSummary {
        coordinates: c.coords().iter().map(|s| s.name().to_string()).collect(),
        parameters: c
            .parameters()
            .iter()
            .map(|(s, v)| (s.name().to_string(), *v))
            .collect(),
        lagrangian: sys.lagrangian().clone(),
        force: sys.force().comps().to_vec(),
        dissipation: file.dissipation().cloned(),
    }
}

/// The shorter of the simplified and the expanded form.
fn tidy(e: &Expr) -> Expr {
    let s = e.simplify();
    let x = s.expand().simplify();
    if x.to_string().len() < s.to_string().len() {
        x
    } else {
        s
    }
}

pub fn derive(file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    let sys = file.system(opts.seed)?;
    let c = sys.chart();
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# Lagrangian side").unwrap();
    writeln!(w, "L = {}", sys.lagrangian()).unwrap();
    writeln!(w, "E_L = {}", tidy(sys.energy())).unwrap();
    if let Some(r) = file.dissipation() {
        writeln!(w, "R = {r}").unwrap();
    }
    for (s, b) in c.coords().iter().zip(sys.force().comps()) {
        writeln!(w, "beta_{s} = {b}").unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "# forced Euler-Lagrange equations").unwrap();
    for (i, s) in c.coords().iter().enumerate() {
        let p = &sys.alpha().coeffs()[i];
        let dl = tidy(&sys.lagrangian().diff(s)?);
        let beta = &sys.force().comps()[i];
        let rhs = if beta.is_literal_zero() {
            Expr::zero()
        } else {
            (-beta).simplify()
        };
        writeln!(w, "d/dt({p}) - ({dl}) = {rhs}").unwrap();
    }
    match sys.field() {
        Ok(f) => {
            for (v, a) in c.velocities().iter().zip(f.vert()) {
                writeln!(w, "d/dt {v} = {}", tidy(a)).unwrap();
            }
        }
        Err(e) => writeln!(w, "accelerations: unavailable ({e})").unwrap(),
    }
    writeln!(w).unwrap();
    writeln!(w, "# Hamiltonian side").unwrap();
    match ForcedHamiltonianSystem::from_lagrangian(&sys) {
        Ok(ham) => {
            let leg = sys.legendre()?;
            for (p, f) in c.momenta().iter().zip(leg.forward()) {
                writeln!(w, "{p} = {f}").unwrap();
            }
            writeln!(w, "H = {}", tidy(ham.hamiltonian())).unwrap();
            for (s, g) in c.coords().iter().zip(ham.force().comps()) {
                writeln!(w, "gamma_{s} = {g}").unwrap();
            }
            let f = ham.field()?;
            for (s, e) in c.coords().iter().zip(f.base()) {
                writeln!(w, "d/dt {s} = {}", tidy(e)).unwrap();
            }
            for (p, e) in c.momenta().iter().zip(f.vert()) {
                writeln!(w, "d/dt {p} = {}", tidy(e)).unwrap();
            }
        }
        Err(e) => writeln!(w, "unavailable ({e})").unwrap(),
    }
    Ok(Output::text(out))
}

#[derive(Serialize)]
struct MomentumEntry {
    generator: String,
    momentum: Expr,
    rate: Expr,
    conserved: Verdict,
    force_vanishes: Verdict,
}

#[derive(Serialize)]
struct ActionReport {
    dimension: usize,
    lagrangian_invariant: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    momentum: Vec<MomentumEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_beta: Option<GBetaBasis>,
}

#[derive(Serialize)]
struct CheckReport {
    schema: u32,
    seed: u64,
    system: SystemSummary,
    candidates: Vec<SymmetryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    action: Option<ActionReport>,
}

fn build_action(
    file: &SystemFile,
    seed: u64,
) -> Result<Option<(Vec<String>, AlgebraAction)>, CliError> {
    let chart = &file.chart;
    Ok(match &file.action {
        None => None,
        Some(Action::So3) => Some((
            vec!["e1".into(), "e2".into(), "e3".into()],
            AlgebraAction::so3(chart)?,
        )),
        Some(Action::Custom {
            names,
            generators,
            structure,
        }) => {
            let gens = generators
                .iter()
                .map(|g| VectorFieldQ::new(chart, g.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            Some((
                names.clone(),
                AlgebraAction::new(chart, gens, structure.clone(), seed)?,
            ))
        }
    })
}

fn report_verdicts(r: &SymmetryReport) -> Vec<Verdict> {
    let mut v = vec![r.dynamical, r.cartan];
    v.extend(
        [
            r.forced_lagrangian_symmetry,
            r.lie,
            r.noether,
            r.conservation,
        ]
        .into_iter()
        .flatten(),
    );
    v
}

pub fn check(file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    let sys = file.system(opts.seed)?;
    let chart = &file.chart;
    let n = chart.dim();
    let candidates = file
        .candidates
        .par_iter()
        .map(|cand| match cand.space {
            Space::Q => {
                let x = VectorFieldQ::new(chart, cand.components.clone())?;
                analyze_q(&sys, &cand.name, &x)
            }
            Space::TQ => {
                let xt = PhaseField::tangent(
                    chart,
                    cand.components[..n].to_vec(),
                    cand.components[n..].to_vec(),
                )?;
                analyze_tq(&sys, &cand.name, &xt)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let action = match build_action(file, opts.seed)? {
        None => None,
        Some((names, action)) => {
            let invariant = all_zero(&invariance_residuals(&sys, &action)?, opts.seed);
            let mut momentum = Vec::new();
            let mut g_beta = None;
            if invariant.is_true() {
                for (a, name) in names.iter().enumerate() {
                    let m = momentum_conservation_check(&sys, &action, a)?;
                    momentum.push(MomentumEntry {
                        generator: name.clone(),
                        momentum: momentum_component(&sys, &action, a)?,
                        rate: m.rate,
                        conserved: m.rate_verdict,
                        force_vanishes: m.force_verdict,
                    });
                }
                g_beta = Some(g_beta_basis(&sys, &action)?);
            }
            Some(ActionReport {
                dimension: action.dim(),
                lagrangian_invariant: invariant,
                momentum,
                g_beta,
            })
        }
    };

    let mut verdicts: Vec<Verdict> = candidates.iter().flat_map(report_verdicts).collect();
    if let Some(a) = &action {
        verdicts.push(a.lagrangian_invariant);
        verdicts.extend(
            a.momentum
                .iter()
                .flat_map(|m| [m.conserved, m.force_vanishes]),
        );
    }
    let deferred = verdicts
        .contains(&Verdict::Indeterminate)
        .then(|| CliError::Indeterminate("at least one check could not be decided".into()));

    let report = CheckReport {
        schema: SCHEMA,
        seed: opts.seed,
        system: summarize(file, &sys),
        candidates,
        action,
    };
    Ok(Output {
        main: to_json(&report),
        summary: None,
        deferred,
    })
}

fn integration(file: &SystemFile, opts: &Options) -> Result<Integration, CliError> {
    let mut run = file
        .integration
        .clone()
        .ok_or_else(|| CliError::Usage("the system file has no [integration] section".into()))?;
    if let Some(h) = opts.h {
        run.h = h;
    }
    if let Some(t) = opts.t_end {
        run.t_end = t;
    }
    if !(run.h > 0.0 && run.t_end > 0.0 && run.h.is_finite() && run.t_end.is_finite()) {
        return Err(CliError::Usage("h and T must be positive".into()));
    }
    Ok(run)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn trajectory_csv(
    chart: &Chart,
    traj: &Trajectory,
    monitors: &[(String, Vec<f64>)],
) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(
        chart
            .phase_vars(Fiber::Velocity)
            .iter()
            .map(|s| s.name().to_string()),
    );
    header.extend(monitors.iter().map(|(n, _)| n.clone()));
    let io = |e: csv::Error| CliError::Io("csv".into(), e.into());
    w.write_record(&header).map_err(io)?;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.extend(monitors.iter().map(|(_, v)| fmt_f64(v[k])));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io("csv".into(), e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct SimulationSummary {
    schema: u32,
    seed: u64,
    h: f64,
    #[serde(rename = "T")]
    t_end: f64,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated: Option<String>,
    drift: BTreeMap<String, Drift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_balance: Option<EnergyBalance>,
}

pub fn simulate(file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    let sys = file.system(opts.seed)?;
    let run = integration(file, opts)?;
    let chart = &file.chart;
    let dynamics = lagrangian_dynamics(&sys, &Bindings::new())?;
    let traj = integrate(dynamics.as_ref(), &run.initial, run.h, run.t_end)?;
    let exprs: Vec<Expr> = file.monitors.iter().map(|(_, e)| e.clone()).collect();
    let values = monitor(
        &traj,
        &chart.phase_vars(Fiber::Velocity),
        &exprs,
        &chart.parameter_bindings(),
    )?;
    let monitors: Vec<(String, Vec<f64>)> = file
        .monitors
        .iter()
        .map(|(n, _)| n.clone())
        .zip(values)
        .collect();
    let energy_balance = match file.dissipation() {
        Some(r) => Some(energy_balance_check(&sys, r, &traj, &Bindings::new())?),
        None => None,
    };
    let summary = SimulationSummary {
        schema: SCHEMA,
        seed: opts.seed,
        h: run.h,
        t_end: run.t_end,
        steps: traj.len().saturating_sub(1),
        truncated: traj.truncated.clone(),
        drift: monitors
            .iter()
            .map(|(n, v)| (n.clone(), drift(v)))
            .collect(),
        energy_balance,
    };
    Ok(Output {
        main: trajectory_csv(chart, &traj, &monitors)?,
        summary: Some(to_json(&summary)),
        deferred: None,
    })
}

/// Render a system back into the file format.
pub fn render_system(sys: &ForcedLagrangianSystem, integration: Option<&Integration>) -> String {
    let c = sys.chart();
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "[coordinates]").unwrap();
    let names: Vec<&str> = c.coords().iter().map(|s| s.name()).collect();
    writeln!(w, "{}", names.join(", ")).unwrap();
    if !c.parameters().is_empty() {
        writeln!(w, "\n[parameters]").unwrap();
        for (s, v) in c.parameters() {
            writeln!(w, "{s} = {v:?}").unwrap();
        }
    }
    writeln!(w, "\n[lagrangian]\n{}", tidy(sys.lagrangian())).unwrap();
    if !sys.force().is_zero_form() {
        writeln!(w, "\n[force]").unwrap();
        for (s, b) in c.coords().iter().zip(sys.force().comps()) {
            if !b.is_literal_zero() {
                writeln!(w, "{s} = {b}").unwrap();
            }
        }
    }
    if let Some(run) = integration {
        writeln!(w, "\n[integration]\nh = {:?}\nT = {:?}", run.h, run.t_end).unwrap();
        for (s, v) in c.phase_vars(Fiber::Velocity).iter().zip(&run.initial) {
            writeln!(w, "{s} = {v:?}").unwrap();
        }
    }
    out
}

#[derive(Serialize)]
struct Comparison {
    steps: usize,
    /// Largest deviation of the reduced state from the projected full state.
    max_reduced_error: f64,
    /// Largest deviation of the reconstructed cyclic coordinate.
    max_cyclic_error: f64,
}

#[derive(Serialize)]
struct ReductionReport {
    schema: u32,
    seed: u64,
    cyclic: String,
    mu: f64,
    mu_parameter: String,
    energy_consistent: Verdict,
    routhian: Expr,
    cyclic_velocity: Expr,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn compare(
    sys: &ForcedLagrangianSystem,
    red: &ReducedSystem,
    run: &Integration,
) -> Result<Comparison, CliError> {
    let full = integrate(
        lagrangian_dynamics(sys, &Bindings::new())?.as_ref(),
        &run.initial,
        run.h,
        run.t_end,
    )?;
    let reduced = integrate(
        lagrangian_dynamics(&red.system, &Bindings::new())?.as_ref(),
        &red.project(&run.initial),
        run.h,
        run.t_end,
    )?;
    if full.len() != reduced.len() {
        return Err(CliError::Math(forcedmech_core::Error::Integration(
            "full and reduced runs stopped at different times".into(),
        )));
    }
    let max_reduced_error = full
        .states
        .iter()
        .zip(&reduced.states)
        .flat_map(|(f, r)| {
            red.project(f)
                .into_iter()
                .zip(r.clone())
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let c = red.cyclic;
    let qc = red.reconstruct(&reduced, run.initial[c])?;
    let max_cyclic_error = full
        .states
        .iter()
        .zip(&qc)
        .map(|(f, q)| (f[c] - q).abs())
        .fold(0.0, f64::max);
    Ok(Comparison {
        steps: full.len() - 1,
        max_reduced_error,
        max_cyclic_error,
    })
}

pub fn reduce(file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    let sys = file.system(opts.seed)?;
    let spec = file
        .reduction
        .as_ref()
        .ok_or_else(|| CliError::Usage("the system file has no [reduction] section".into()))?;
    let run = match &file.integration {
        Some(_) => Some(integration(file, opts)?),
        None => None,
    };
    let mu = match (spec.mu, &run) {
        (Some(mu), _) => mu,
        (None, Some(run)) => ReducedSystem::conjugate_momentum(&sys, spec.cyclic, &run.initial)?,
        (None, None) => {
            return Err(CliError::Usage(
                "[reduction] needs `mu` when there is no [integration] section".into(),
            ))
        }
    };
    let red = cyclic_reduce(&sys, spec.cyclic, mu)?;
    let comparison = match &run {
        Some(run) => {
            let p = ReducedSystem::conjugate_momentum(&sys, spec.cyclic, &run.initial)?;
            if (p - mu).abs() <= 1e-12 * mu.abs().max(1.0) {
                Some(compare(&sys, &red, run)?)
            } else {
                None
            }
        }
        None => None,
    };
    let reduced_run = run.as_ref().map(|r| Integration {
        h: r.h,
        t_end: r.t_end,
        initial: red.project(&r.initial),
    });
    let report = ReductionReport {
        schema: SCHEMA,
        seed: opts.seed,
        cyclic: file.chart.coords()[spec.cyclic].name().to_string(),
        mu,
        mu_parameter: red.mu.name().to_string(),
        energy_consistent: red.energy_consistent,
        routhian: tidy(red.system.lagrangian()),
        cyclic_velocity: red.cyclic_velocity.clone(),
        comparison,
    };
    Ok(Output {
        main: render_system(&red.system, reduced_run.as_ref()),
        summary: Some(to_json(&report)),
        deferred: None,
    })
}

#[derive(Serialize)]
struct FindReport {
    schema: u32,
    seed: u64,
    degree: u32,
    fields: Vec<Vec<Expr>>,
}

pub fn find(file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    let sys = file.system(opts.seed)?;
    let degree = opts.degree.unwrap_or(1);
    let fields = find_polynomial_symmetries(&sys, degree)?
        .into_iter()
        .map(|x| x.comps().to_vec())
        .collect();
    Ok(Output::text(to_json(&FindReport {
        schema: SCHEMA,
        seed: opts.seed,
        degree,
        fields,
    })))
}
