//! Adaptive TR-BDF2 time integration for banded stiff systems.
//!
//! One step of size `h` is a trapezoidal stage to `t + g h` followed by a BDF2
//! stage to `t + h`, with `g = 2 - sqrt(2)`, so both stages share the iteration
//! matrix `I - (g/2) h J`. A third-order quadrature of the three stage slopes
//! gives the embedded error estimate. Each stage is solved by a simplified
//! Newton iteration; the Jacobian is rebuilt at the start of every step, by
//! colored finite differences or by the system's own analytic Jacobian.
//!
//! Solver failure is not an error: the trajectory up to the failure is returned
//! together with the failure time and reason.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::{BandLu, BandMatrix};
use crate::discretization::SpatialOperator;
use crate::error::{Error, Result};
use crate::grid::StateField;
use crate::math;
use crate::models::ModelSpec;

/// A semi-discrete system `y' = f(t, y)` whose Jacobian is banded.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    /// Half-bandwidth of `df/dy` (equal lower and upper).
    fn half_bandwidth(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]);
    /// Fills `jac` with `df/dy` and returns `true`, or returns `false` to
    /// request finite differences.
    fn analytic_jacobian(&mut self, _t: f64, _y: &[f64], _jac: &mut BandMatrix) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    FiniteDifference,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub newton_max_iter: usize,
    /// Newton stops once the weighted increment norm is below this.
    pub newton_tol: f64,
    pub jacobian: JacobianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            max_steps: 50_000,
            initial_step: None,
            max_step: None,
            newton_max_iter: 10,
            newton_tol: 1e-3,
            jacobian: JacobianMode::FiniteDifference,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(Error::InvalidParams("tolerances must be positive and finite".into()));
        }
        if !positive(self.newton_tol) || self.newton_max_iter == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParams("Newton and step limits must be positive".into()));
        }
        if self.initial_step.is_some_and(|h| !positive(h)) || self.max_step.is_some_and(|h| !positive(h)) {
            return Err(Error::InvalidParams("step sizes must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// The step size fell below the resolvable minimum.
    StepUnderflow,
    MaxSteps,
    /// The accepted state contains NaN or infinite entries.
    NonFinite,
}

impl core::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            FailureReason::StepUnderflow => "step size underflow",
            FailureReason::MaxSteps => "step limit reached",
            FailureReason::NonFinite => "non-finite state",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    pub time: f64,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub newton_failures: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
}

/// Raw output of [`solve_ode`].
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    /// Output times actually reached.
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub stats: SolverStats,
    pub failure: Option<Failure>,
}

/// States at the requested output times. A failed run keeps the samples
/// reached before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateField>,
    pub stats: SolverStats,
    pub failure: Option<Failure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn require_complete(&self) -> Result<()> {
        match self.failure {
            Some(f) => Err(Error::FailedTrajectory { time: f.time }),
            None => Ok(()),
        }
    }

    pub fn final_state(&self) -> &StateField {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

const GAMMA: f64 = 2.0 - core::f64::consts::SQRT_2;
const DIAG: f64 = GAMMA / 2.0;

/// Output times `k T / M`, `k = 0..=M`.
pub fn uniform_times(horizon: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| if k == samples { horizon } else { horizon * k as f64 / samples as f64 }).collect()
}

/// Integrates `model` from `u0` over `[0, horizon]`, sampling `samples + 1` equispaced times.
pub fn integrate(
    model: &ModelSpec,
    u0: &StateField,
    horizon: f64,
    samples: usize,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() || samples == 0 {
        return Err(Error::InvalidParams("horizon must be positive and samples at least 1".into()));
    }
    integrate_at(model, u0, &uniform_times(horizon, samples), opts)
}

/// Integrates `model` from `u0` at `times[0]` and records the state at every entry of `times`.
pub fn integrate_at(model: &ModelSpec, u0: &StateField, times: &[f64], opts: &SolverOptions) -> Result<Trajectory> {
    if u0.species() != model.species() {
        return Err(Error::Mismatch(alloc::format!(
            "initial state has {} species, model has {}",
            u0.species(),
            model.species()
        )));
    }
    u0.check_finite()?;
    let mut op = SpatialOperator::new(model, *u0.grid())?;
    let sol = solve_ode(&mut op, u0.values(), times, opts)?;
    Ok(into_trajectory(sol, u0))
}

pub(crate) fn into_trajectory(sol: OdeSolution, template: &StateField) -> Trajectory {
    let grid = *template.grid();
    let m = template.species();
    let states = sol
        .times
        .iter()
        .zip(sol.values)
        .map(|(&t, v)| StateField::from_interleaved(grid, m, v).expect("solver keeps the state size").with_time(t))
        .collect();
    Trajectory { times: sol.times, states, stats: sol.stats, failure: sol.failure }
}

/// Result of [`steady_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: StateField,
    /// Time at which the residual criterion was met (or the time cap).
    pub time: f64,
    /// `max |du/dt|` at `state`.
    pub residual: f64,
    pub converged: bool,
}

/// Residual level at which a state counts as stationary.
pub const STEADY_RESIDUAL: f64 = 1e-8;
/// Integration time after which the search for a stationary state stops.
pub const STEADY_TIME_CAP: f64 = 20.0;

/// Integrates until `max |du/dt| < 1e-8` or `t >= 20`.
pub fn steady_state(model: &ModelSpec, u0: &StateField, opts: &SolverOptions) -> Result<SteadyState> {
    if u0.species() != model.species() {
        return Err(Error::Mismatch("initial state and model disagree on species count".into()));
    }
    u0.check_finite()?;
    let mut op = SpatialOperator::new(model, *u0.grid())?;
    let mut y = u0.values().to_vec();
    let mut rate = vec![0.0; y.len()];
    let mut t = 0.0;
    let mut window = 0.25;
    loop {
        op.apply(&y, &mut rate);
        let residual = rate.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let converged = residual < STEADY_RESIDUAL;
        if converged || t >= STEADY_TIME_CAP {
            let state = StateField::from_interleaved(*u0.grid(), u0.species(), y)?.with_time(t);
            return Ok(SteadyState { state, time: t, residual, converged });
        }
        let t_next = (t + window).min(STEADY_TIME_CAP);
        let sol = solve_ode(&mut op, &y, &[t, t_next], opts)?;
        if let Some(f) = sol.failure {
            return Err(Error::FailedTrajectory { time: f.time });
        }
        y = sol.values.into_iter().last().expect("final sample");
        t = t_next;
        window *= 2.0;
    }
}

fn wrms(v: &[f64], scale: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v.iter().zip(scale).map(|(a, w)| (a / w) * (a / w)).sum();
    math::sqrt(s / v.len() as f64)
}

struct Workspace {
    jac: BandMatrix,
    iter: BandMatrix,
    lu: BandLu,
    f: Vec<f64>,
    f_scratch: Vec<f64>,
    perturbed: Vec<f64>,
    delta: Vec<f64>,
    scale: Vec<f64>,
}

fn finite_difference_jacobian<S: OdeSystem>(
    sys: &mut S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    ws: &mut Workspace,
    stats: &mut SolverStats,
) {
    let n = y.len();
    let bw = sys.half_bandwidth();
    let groups = (2 * bw + 1).min(n);
    let typical = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) * 1e-3;
    let root_eps = math::sqrt(f64::EPSILON);
    ws.jac.clear();
    for g in 0..groups {
        ws.perturbed.copy_from_slice(y);
        for c in (g..n).step_by(groups) {
            let step = root_eps * y[c].abs().max(typical).max(1e-10);
            ws.perturbed[c] += step;
        }
        sys.rhs(t, &ws.perturbed, &mut ws.f_scratch);
        stats.rhs_evals += 1;
        for c in (g..n).step_by(groups) {
            let step = ws.perturbed[c] - y[c];
            for r in c.saturating_sub(bw)..=(c + bw).min(n - 1) {
                ws.jac.set(r, c, (ws.f_scratch[r] - f0[r]) / step);
            }
        }
    }
}

/// Simplified Newton for `x - dh f(t, x) = rhs`, starting from `x`.
#[allow(clippy::too_many_arguments)]
fn newton<S: OdeSystem>(
    sys: &mut S,
    t: f64,
    dh: f64,
    rhs: &[f64],
    x: &mut [f64],
    ws: &mut Workspace,
    opts: &SolverOptions,
    stats: &mut SolverStats,
) -> bool {
    let mut previous = f64::INFINITY;
    for _ in 0..opts.newton_max_iter {
        sys.rhs(t, x, &mut ws.f_scratch);
        stats.rhs_evals += 1;
        for k in 0..x.len() {
            ws.delta[k] = rhs[k] + dh * ws.f_scratch[k] - x[k];
        }
        ws.lu.solve(&mut ws.delta);
        for k in 0..x.len() {
            x[k] += ws.delta[k];
            ws.scale[k] = opts.atol + opts.rtol * x[k].abs();
        }
        let norm = wrms(&ws.delta, &ws.scale);
        if !norm.is_finite() {
            return false;
        }
        if norm <= opts.newton_tol {
            return true;
        }
        let rate = norm / previous;
        if rate >= 1.0 {
            return false;
        }
        if rate / (1.0 - rate) * norm <= opts.newton_tol {
            return true;
        }
        previous = norm;
    }
    false
}

/// Integrates `sys` from `y0` at `times[0]`, recording `y` at every entry of `times`.
pub fn solve_ode<S: OdeSystem>(sys: &mut S, y0: &[f64], times: &[f64], opts: &SolverOptions) -> Result<OdeSolution> {
    opts.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::Mismatch(alloc::format!("initial value has {} entries, system has {n}", y0.len())));
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParams("output times must be finite and strictly increasing".into()));
    }
    let bw = sys.half_bandwidth().min(n.saturating_sub(1));
    let mut ws = Workspace {
        jac: BandMatrix::zeros(n, bw, bw),
        iter: BandMatrix::zeros(n, bw, bw),
        lu: BandLu::new(n, bw, bw),
        f: vec![0.0; n],
        f_scratch: vec![0.0; n],
        perturbed: vec![0.0; n],
        delta: vec![0.0; n],
        scale: vec![0.0; n],
    };
    let mut stats = SolverStats::default();
    let mut out_times = vec![times[0]];
    let mut values = vec![y0.to_vec()];
    let mut t = times[0];
    let mut y = y0.to_vec();
    let span = times[times.len() - 1] - times[0];

    let finish = |out_times: Vec<f64>, values: Vec<Vec<f64>>, stats, failure| {
        Ok(OdeSolution { times: out_times, values, stats, failure })
    };
    if times.len() == 1 || n == 0 {
        for &to in &times[1..] {
            out_times.push(to);
            values.push(y.clone());
        }
        return finish(out_times, values, stats, None);
    }

    sys.rhs(t, &y, &mut ws.f);
    stats.rhs_evals += 1;
    if ws.f.iter().any(|v| !v.is_finite()) {
        return finish(out_times, values, stats, Some(Failure { time: t, reason: FailureReason::NonFinite }));
    }

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            for k in 0..n {
                ws.scale[k] = opts.atol + opts.rtol * y[k].abs();
            }
            let d0 = wrms(&y, &ws.scale);
            let d1 = wrms(&ws.f, &ws.scale);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span
            } else {
                (0.01 * d0 / d1).min(span)
            }
        }
    };
    if let Some(hmax) = opts.max_step {
        h = h.min(hmax);
    }

    let mut z = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut rhs1 = vec![0.0; n];
    let mut rhs2 = vec![0.0; n];
    let mut est = vec![0.0; n];
    let mut jac_current = false;
    let c_z = 1.0 / (GAMMA * (2.0 - GAMMA));
    let c_y = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
    let w_gamma = 1.0 / (6.0 * GAMMA * (1.0 - GAMMA));
    let w_one = 0.5 - 1.0 / (6.0 * (1.0 - GAMMA));
    let w_zero = 1.0 - w_gamma - w_one;

    for &t_out in &times[1..] {
        loop {
            let remaining = t_out - t;
            if remaining <= 1e-13 * t_out.abs().max(span) {
                t = t_out;
                break;
            }
            if stats.steps + stats.rejected >= opts.max_steps {
                return finish(out_times, values, stats, Some(Failure { time: t, reason: FailureReason::MaxSteps }));
            }
            let min_step = 1e-14 * t.abs().max(span);
            if h < min_step {
                return finish(
                    out_times,
                    values,
                    stats,
                    Some(Failure { time: t, reason: FailureReason::StepUnderflow }),
                );
            }
            let clipped = h >= remaining;
            let h_step = if clipped { remaining } else { h };
            if !jac_current {
                let analytic = opts.jacobian == JacobianMode::Analytic && sys.analytic_jacobian(t, &y, &mut ws.jac);
                if !analytic {
                    let f0 = core::mem::take(&mut ws.f);
                    finite_difference_jacobian(sys, t, &y, &f0, &mut ws, &mut stats);
                    ws.f = f0;
                }
                stats.jacobians += 1;
                jac_current = true;
            }
            let dh = DIAG * h_step;
            ws.iter.set_identity_minus(dh, &ws.jac);
            let factored = ws.lu.refactor(&ws.iter).is_ok();

            // trapezoidal stage
            let mut ok = factored;
            if ok {
                for k in 0..n {
                    rhs1[k] = y[k] + dh * ws.f[k];
                    z[k] = y[k] + GAMMA * h_step * ws.f[k];
                }
                ok = newton(sys, t + GAMMA * h_step, dh, &rhs1, &mut z, &mut ws, opts, &mut stats);
            }
            // BDF2 stage
            if ok {
                for k in 0..n {
                    rhs2[k] = c_z * z[k] - c_y * y[k];
                    let f_gamma = (z[k] - rhs1[k]) / dh;
                    y1[k] = z[k] + (1.0 - GAMMA) * h_step * f_gamma;
                }
                ok = newton(sys, t + h_step, dh, &rhs2, &mut y1, &mut ws, opts, &mut stats);
            }
            if !ok {
                stats.newton_failures += 1;
                h = h_step * 0.25;
                continue;
            }

            for k in 0..n {
                let f_gamma = (z[k] - rhs1[k]) / dh;
                let f_one = (y1[k] - rhs2[k]) / dh;
                let y_hat = y[k] + h_step * (w_zero * ws.f[k] + w_gamma * f_gamma + w_one * f_one);
                est[k] = y_hat - y1[k];
                ws.scale[k] = opts.atol + opts.rtol * y[k].abs().max(y1[k].abs());
            }
            ws.lu.solve(&mut est);
            let err = wrms(&est, &ws.scale);
            let factor = if err > 0.0 { (0.9 * math::cbrt(1.0 / err)).clamp(0.2, 5.0) } else { 5.0 };
            if !(err <= 1.0) {
                stats.rejected += 1;
                h = h_step * factor.min(0.9);
                continue;
            }

            stats.steps += 1;
            t += h_step;
            core::mem::swap(&mut y, &mut y1);
            jac_current = false;
            sys.rhs(t, &y, &mut ws.f);
            stats.rhs_evals += 1;
            if y.iter().chain(&ws.f).any(|v| !v.is_finite()) {
                return finish(out_times, values, stats, Some(Failure { time: t, reason: FailureReason::NonFinite }));
            }
            if !clipped {
                h = h_step * factor;
            }
            if let Some(hmax) = opts.max_step {
                h = h.min(hmax);
            }
        }
        out_times.push(t_out);
        values.push(y.clone());
    }
    finish(out_times, values, stats, None)
}
