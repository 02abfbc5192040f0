//! Fixed-step RK4 integration and drift measurement.

use serde::Serialize;

use crate::bundle::{liouville, Chart, Fiber, PhaseField};
use crate::dynamics::ForcedLagrangianSystem;
use crate::expr::{Bindings, Expr, ExprError, Program, Symbol};
use crate::linalg;
use crate::{Error, Result};

/// Autonomous first-order system `x' = f(x)`.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn rhs(&self, x: &[f64], out: &mut [f64]) -> Result<(), ExprError>;
}

/// A phase-space field compiled to flat evaluation programs.
#[derive(Debug, Clone)]
pub struct CompiledField {
    progs: Vec<Program>,
}

impl CompiledField {
    pub fn new(chart: &Chart, field: &PhaseField, params: &Bindings) -> Result<Self> {
        let slots = chart.phase_vars(field.fiber());
        let progs = field
            .components()
            .iter()
            .map(|e| Program::compile(e, &slots, params))
            .collect::<std::result::Result<_, _>>()?;
        Ok(CompiledField { progs })
    }
}

impl Dynamics for CompiledField {
    fn dim(&self) -> usize {
        self.progs.len()
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let mut stack = Vec::with_capacity(32);
        for (o, p) in out.iter_mut().zip(&self.progs) {
            *o = p.eval_with(x, &mut stack)?;
        }
        Ok(())
    }
}

/// Forced Euler-Lagrange dynamics solving `W B = rhs` numerically at every
/// evaluation. Used when the symbolic inverse of the Hessian is unavailable.
#[derive(Debug, Clone)]
pub struct NumericLagrangian {
    n: usize,
    w: Vec<Program>,
    rhs: Vec<Program>,
}

impl NumericLagrangian {
    pub fn new(sys: &ForcedLagrangianSystem, params: &Bindings) -> Result<Self> {
        let c = sys.chart();
        let slots = c.phase_vars(Fiber::Velocity);
        let compile = |e: &Expr| Program::compile(e, &slots, params);
        let w = sys
            .hessian()
            .w
            .iter()
            .flatten()
            .map(compile)
            .collect::<std::result::Result<_, _>>()?;
        let rhs = sys
            .el_rhs(sys.force())?
            .iter()
            .map(compile)
            .collect::<std::result::Result<_, _>>()?;
        Ok(NumericLagrangian { n: c.dim(), w, rhs })
    }
}

impl Dynamics for NumericLagrangian {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let n = self.n;
        out[..n].copy_from_slice(&x[n..]);
        let w: Vec<f64> = self
            .w
            .iter()
            .map(|p| p.eval(x))
            .collect::<std::result::Result<_, _>>()?;
        let r: Vec<f64> = self
            .rhs
            .iter()
            .map(|p| p.eval(x))
            .collect::<std::result::Result<_, _>>()?;
        let b = linalg::solve_numeric(&w, &r)
            .ok_or_else(|| ExprError::Domain("singular Hessian along trajectory".into()))?;
        out[n..].copy_from_slice(&b);
        Ok(())
    }
}

/// Time-reversed dynamics `x' = −f(x)`.
pub struct Reversed<D>(pub D);

impl<D: Dynamics> Dynamics for Reversed<D> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        self.0.rhs(x, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

/// Dynamics of a forced Lagrangian system with the chart's parameter values
/// overridden by `params`.
pub fn lagrangian_dynamics(
    sys: &ForcedLagrangianSystem,
    params: &Bindings,
) -> Result<Box<dyn Dynamics + Send + Sync>> {
    let mut b = sys.chart().parameter_bindings();
    b.extend(params);
    match sys.field() {
        Ok(f) => Ok(Box::new(CompiledField::new(sys.chart(), f, &b)?)),
        Err(_) => Ok(Box::new(NumericLagrangian::new(sys, &b)?)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Reason the run stopped before the final time, if it did.
    pub truncated: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }
}

fn rk4_step<D: Dynamics + ?Sized>(
    d: &D,
    x: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 4],
    tmp: &mut [f64],
) -> Result<Vec<f64>, ExprError> {
    let n = x.len();
    d.rhs(x, &mut k[0])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[0][i];
    }
    d.rhs(tmp, &mut k[1])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[1][i];
    }
    d.rhs(tmp, &mut k[2])?;
    for i in 0..n {
        tmp[i] = x[i] + h * k[2][i];
    }
    d.rhs(tmp, &mut k[3])?;
    Ok((0..n)
        .map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect())
}

/// Classical fourth-order Runge-Kutta from `t = 0` to `t = T` with step `h`;
/// the final step is shortened to land on `T`.
pub fn integrate<D: Dynamics + ?Sized>(
    d: &D,
    x0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Integration(format!(
            "need h > 0 and T > 0, got h={h}, T={t_end}"
        )));
    }
    if x0.len() != d.dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, expected {}",
            x0.len(),
            d.dim()
        )));
    }
    let mut probe = vec![0.0; d.dim()];
    d.rhs(x0, &mut probe)?;
    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());
    let n = x0.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut truncated = None;
    for s in 0..steps {
        let t = s as f64 * h;
        let step = if s + 1 == steps { t_end - t } else { h };
        let x = states.last().unwrap();
        match rk4_step(d, x, step, &mut k, &mut tmp) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => {
                times.push(if s + 1 == steps {
                    t_end
                } else {
                    (s + 1) as f64 * h
                });
                states.push(next);
            }
            Ok(_) => {
                truncated = Some(format!("non-finite state at t={t}"));
                break;
            }
            Err(e) => {
                truncated = Some(format!("evaluation failed at t={t}: {e}"));
                break;
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        truncated,
    })
}

/// Evaluate expressions over the states of a trajectory.
pub fn monitor(
    traj: &Trajectory,
    slots: &[Symbol],
    exprs: &[Expr],
    params: &Bindings,
) -> Result<Vec<Vec<f64>>> {
    let progs: Vec<Program> = exprs
        .iter()
        .map(|e| Program::compile(e, slots, params))
        .collect::<std::result::Result<_, _>>()?;
    let mut stack = Vec::new();
    progs
        .iter()
        .map(|p| {
            traj.states
                .iter()
                .map(|x| p.eval_with(x, &mut stack).map_err(Error::from))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Drift {
    pub initial: f64,
    pub max_abs: f64,
    pub max_rel: f64,
    /// False when the initial value is too small for a relative measure and
    /// `max_rel` repeats the absolute drift.
    pub relative: bool,
}

/// Drift of a monitored quantity relative to its value at `t = 0`.
pub fn drift(values: &[f64]) -> Drift {
    let initial = values.first().copied().unwrap_or(0.0);
    let max_abs = values
        .iter()
        .map(|v| (v - initial).abs())
        .fold(0.0, f64::max);
    let relative = initial.abs() >= 1e-12;
    Drift {
        initial,
        max_abs,
        max_rel: if relative {
            max_abs / initial.abs()
        } else {
            max_abs
        },
        relative,
    }
}

pub fn drift_report(
    traj: &Trajectory,
    slots: &[Symbol],
    exprs: &[Expr],
    params: &Bindings,
) -> Result<Vec<Drift>> {
    Ok(monitor(traj, slots, exprs, params)?
        .iter()
        .map(|v| drift(v))
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBalance {
    pub max_residual: f64,
    pub tolerance: f64,
}

impl EnergyBalance {
    pub fn holds(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// `max |dE_L/dt + Δ(𝓡)|` over the grid, with `dE_L/dt` from centered
/// differences; tolerance `10 h²`.
pub fn energy_balance_check(
    sys: &ForcedLagrangianSystem,
    dissipation: &Expr,
    traj: &Trajectory,
    params: &Bindings,
) -> Result<EnergyBalance> {
    let c = sys.chart();
    let slots = c.phase_vars(Fiber::Velocity);
    let mut b = c.parameter_bindings();
    b.extend(params);
    let dr = liouville(c).apply(c, dissipation)?;
    let vals = monitor(traj, &slots, &[sys.energy().clone(), dr], &b)?;
    let (e, d) = (&vals[0], &vals[1]);
    let t = &traj.times;
    let mut max_residual: f64 = 0.0;
    for k in 1..t.len().saturating_sub(1) {
        let rate = (e[k + 1] - e[k - 1]) / (t[k + 1] - t[k - 1]);
        max_residual = max_residual.max((rate + d[k]).abs());
    }
    let h = if t.len() > 1 { t[1] - t[0] } else { 0.0 };
    Ok(EnergyBalance {
        max_residual,
        tolerance: 10.0 * h * h,
    })
}
