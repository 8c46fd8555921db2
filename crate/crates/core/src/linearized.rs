//! Frozen-coefficient linear problems and the Picard iteration built on them.
//!
//! For a frozen field `h` the node flux is
//!
//! ```text
//! q_i = sum_j D_ij(hbar) (u_j,R - u_j,L) / dx - F_ij(hbar) (wL_j u_j,L + wR_j u_j,R)
//! ```
//!
//! with `hbar` the harmonic face average of `h` and weights
//! `wL = h_R / (h_L + h_R)`, `wR = h_L / (h_L + h_R)`. The operator is exactly
//! linear in `u`, and for `u = h` the weighted sum is the harmonic average of
//! `u`, so it then coincides with the nonlinear operator.

use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::difference_norm;
use crate::banded::BandMatrix;
use crate::discretization::FACE_FLOOR;
use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::integrator::{into_trajectory, solve_ode, uniform_times, OdeSystem, SolverOptions, Trajectory};
use crate::models::{ModelSpec, SpeciesMatrix, MAX_SPECIES};

#[derive(Debug, Clone, Copy)]
struct NodeCoefficients {
    diffusion: SpeciesMatrix,
    drift: SpeciesMatrix,
    w_left: [f64; MAX_SPECIES],
    w_right: [f64; MAX_SPECIES],
}

fn node_coefficients(
    model: &ModelSpec,
    grid: &Grid,
    frozen: &[f64],
    slopes: &[[f64; MAX_SPECIES]],
    out: &mut Vec<NodeCoefficients>,
) {
    let m = model.species();
    out.clear();
    for node in 1..grid.cells() {
        let (hl, hr) = (&frozen[(node - 1) * m..node * m], &frozen[node * m..(node + 1) * m]);
        let mut avg = [0.0; MAX_SPECIES];
        let mut w_left = [0.0; MAX_SPECIES];
        let mut w_right = [0.0; MAX_SPECIES];
        for k in 0..m {
            let s = hl[k] + hr[k];
            if s > FACE_FLOOR {
                w_left[k] = hr[k] / s;
                w_right[k] = hl[k] / s;
                avg[k] = 2.0 * hl[k] * hr[k] / s;
            }
        }
        let (diffusion, drift) = model.matrices_with_slopes(&slopes[node], &avg[..m]);
        out.push(NodeCoefficients { diffusion, drift, w_left, w_right });
    }
}

fn apply_frozen(coeffs: &[NodeCoefficients], m: usize, dx: f64, u: &[f64], out: &mut [f64]) {
    let inv_dx = 1.0 / dx;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (idx, c) in coeffs.iter().enumerate() {
        let node = idx + 1;
        let (ul, ur) = (&u[(node - 1) * m..node * m], &u[node * m..(node + 1) * m]);
        for i in 0..m {
            let mut q = 0.0;
            for j in 0..m {
                let face = c.w_left[j] * ul[j] + c.w_right[j] * ur[j];
                q += c.diffusion[(i, j)] * (ur[j] - ul[j]) * inv_dx - c.drift[(i, j)] * face;
            }
            out[(node - 1) * m + i] += q * inv_dx;
            out[node * m + i] -= q * inv_dx;
        }
    }
}

fn jacobian_frozen(coeffs: &[NodeCoefficients], m: usize, dx: f64, jac: &mut BandMatrix) {
    let inv_dx = 1.0 / dx;
    jac.clear();
    for (idx, c) in coeffs.iter().enumerate() {
        let node = idx + 1;
        for i in 0..m {
            for j in 0..m {
                let dq_left = -c.diffusion[(i, j)] * inv_dx - c.drift[(i, j)] * c.w_left[j];
                let dq_right = c.diffusion[(i, j)] * inv_dx - c.drift[(i, j)] * c.w_right[j];
                let (row_l, row_r) = ((node - 1) * m + i, node * m + i);
                let (col_l, col_r) = ((node - 1) * m + j, node * m + j);
                jac.add(row_l, col_l, dq_left * inv_dx);
                jac.add(row_l, col_r, dq_right * inv_dx);
                jac.add(row_r, col_l, -dq_left * inv_dx);
                jac.add(row_r, col_r, -dq_right * inv_dx);
            }
        }
    }
}

/// Semi-discrete rate of change of `state` with coefficients frozen at `frozen`.
pub fn linearized_rhs(model: &ModelSpec, frozen: &StateField, state: &StateField) -> Result<StateField> {
    frozen.ensure_compatible(state)?;
    if state.species() != model.species() {
        return Err(Error::Mismatch("state and model disagree on species count".into()));
    }
    let grid = *state.grid();
    let slopes: Vec<_> = (0..=grid.cells()).map(|k| model.potential_slopes(grid.node(k))).collect();
    let mut coeffs = Vec::with_capacity(grid.cells());
    node_coefficients(model, &grid, frozen.values(), &slopes, &mut coeffs);
    let mut out = vec![0.0; state.values().len()];
    apply_frozen(&coeffs, model.species(), grid.dx(), state.values(), &mut out);
    Ok(StateField::from_interleaved(grid, model.species(), out)?.with_time(state.time))
}

/// Linear system with coefficients frozen along a sampled trajectory,
/// interpolated linearly in time between samples.
#[derive(Debug, Clone)]
pub struct LinearizedSystem<'a> {
    model: &'a ModelSpec,
    grid: Grid,
    times: Vec<f64>,
    frozen: Vec<Vec<f64>>,
    slopes: Vec<[f64; MAX_SPECIES]>,
    cached_time: Option<f64>,
    coeffs: Vec<NodeCoefficients>,
    buffer: Vec<f64>,
}

impl<'a> LinearizedSystem<'a> {
    pub fn new(model: &'a ModelSpec, frozen: &Trajectory) -> Result<Self> {
        let first = frozen.states.first().ok_or_else(|| Error::InvalidParams("empty frozen trajectory".into()))?;
        if first.species() != model.species() {
            return Err(Error::Mismatch("frozen trajectory and model disagree on species count".into()));
        }
        let grid = *first.grid();
        let slopes = (0..=grid.cells()).map(|k| model.potential_slopes(grid.node(k))).collect();
        Ok(Self {
            model,
            grid,
            times: frozen.times.clone(),
            frozen: frozen.states.iter().map(|s| s.values().to_vec()).collect(),
            slopes,
            cached_time: None,
            coeffs: Vec::with_capacity(grid.cells()),
            buffer: vec![0.0; first.values().len()],
        })
    }

    fn refresh(&mut self, t: f64) {
        if self.cached_time == Some(t) {
            return;
        }
        let last = self.times.len() - 1;
        let k = self.times.partition_point(|&tk| tk <= t).clamp(1, last.max(1)) - 1;
        if last == 0 {
            self.buffer.copy_from_slice(&self.frozen[0]);
        } else {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            let theta = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            for (b, (a, c)) in self.buffer.iter_mut().zip(self.frozen[k].iter().zip(&self.frozen[k + 1])) {
                *b = (1.0 - theta) * a + theta * c;
            }
        }
        node_coefficients(self.model, &self.grid, &self.buffer, &self.slopes, &mut self.coeffs);
        self.cached_time = Some(t);
    }
}

impl OdeSystem for LinearizedSystem<'_> {
    fn dim(&self) -> usize {
        self.buffer.len()
    }

    fn half_bandwidth(&self) -> usize {
        2 * self.model.species() - 1
    }

    fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        self.refresh(t);
        apply_frozen(&self.coeffs, self.model.species(), self.grid.dx(), y, out);
    }

    fn analytic_jacobian(&mut self, t: f64, _y: &[f64], jac: &mut BandMatrix) -> bool {
        self.refresh(t);
        jacobian_frozen(&self.coeffs, self.model.species(), self.grid.dx(), jac);
        true
    }
}

/// Solves the linear problem frozen along `frozen`, from `u0`, at the frozen trajectory's times.
pub fn solve_frozen(
    model: &ModelSpec,
    frozen: &Trajectory,
    u0: &StateField,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let mut sys = LinearizedSystem::new(model, frozen)?;
    let sol = solve_ode(&mut sys, u0.values(), &frozen.times, opts)?;
    Ok(into_trajectory(sol, u0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `v_0, v_1, ...`; `v_0` is the initial state held constant in time.
    pub iterates: Vec<Trajectory>,
    /// `|v_{n+1} - v_n|_W`.
    pub diffs: Vec<f64>,
    /// `diffs[k+1] / diffs[k]` where `diffs[k] > 0`.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl PicardReport {
    pub fn final_iterate(&self) -> &Trajectory {
        self.iterates.last().expect("at least the initial iterate")
    }

    /// Geometric mean of the ratios whose numerator exceeds `floor`
    /// (differences below it are dominated by solver tolerance).
    pub fn mean_ratio(&self, floor: f64) -> Option<f64> {
        let logs: Vec<f64> = self
            .diffs
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > floor)
            .map(|w| crate::math::ln(w[1] / w[0]))
            .collect();
        if logs.is_empty() {
            None
        } else {
            Some(crate::math::exp(logs.iter().sum::<f64>() / logs.len() as f64))
        }
    }
}

/// Picard iteration `v_{n+1} = S(v_n)` on `[0, horizon]` with `samples + 1` output times.
pub fn picard_solve(
    model: &ModelSpec,
    u0: &StateField,
    horizon: f64,
    samples: usize,
    opts: &SolverOptions,
    max_iters: usize,
    tol: f64,
) -> Result<PicardReport> {
    if !(horizon > 0.0) || samples == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParams("Picard needs a positive horizon, samples and tolerance".into()));
    }
    if u0.species() != model.species() {
        return Err(Error::Mismatch("initial state and model disagree on species count".into()));
    }
    u0.check_finite()?;
    let times = uniform_times(horizon, samples);
    let constant = Trajectory {
        states: times.iter().map(|t| u0.clone().with_time(*t)).collect(),
        times,
        stats: Default::default(),
        failure: None,
    };
    let mut iterates = vec![constant];
    let mut diffs: Vec<f64> = Vec::new();
    let mut converged = false;
    for n in 0..max_iters {
        let previous = iterates.last().expect("non-empty");
        let next = solve_frozen(model, previous, u0, opts)?;
        if let Some(f) = next.failure {
            return Err(Error::PicardSolve { iterate: n + 1, time: f.time });
        }
        let diff = difference_norm(&next, previous)?.w_norm;
        iterates.push(next);
        diffs.push(diff);
        if diff < tol {
            converged = true;
            break;
        }
    }
    let ratios = diffs.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    Ok(PicardReport { iterates, diffs, ratios, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::spatial_rhs;
    use crate::models::{Family, PhysicalParams};
    use crate::potential::Potential;
    use proptest::prelude::*;

    fn model(family: Family, eps: f64) -> ModelSpec {
        ModelSpec::new(
            family,
            PhysicalParams::two_species([1.5, 1.0], eps),
            vec![Potential::standard_well(), Potential::Zero],
        )
        .unwrap()
    }

    fn field(grid: Grid, vals: Vec<f64>) -> StateField {
        StateField::from_interleaved(grid, 2, vals).unwrap()
    }

    #[test]
    fn epsilon_zero_without_drift_ignores_frozen_field() {
        let grid = Grid::new(8).unwrap();
        let m =
            ModelSpec::new(Family::HardSphere, PhysicalParams::two_species([1.5, 1.0], 0.0), vec![Potential::Zero; 2])
                .unwrap();
        let s = StateField::from_fn(grid, 2, |i, x| 1.0 + x * (i as f64 + 1.0));
        let a = linearized_rhs(&m, &StateField::from_fn(grid, 2, |_, _| 3.0), &s).unwrap();
        let b = linearized_rhs(&m, &StateField::from_fn(grid, 2, |_, x| 0.5 + x * x), &s).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let m = model(Family::Lattice, 0.1);
        let a = StateField::from_fn(Grid::new(8).unwrap(), 2, |_, _| 1.0);
        let b = StateField::from_fn(Grid::new(9).unwrap(), 2, |_, _| 1.0);
        assert!(matches!(linearized_rhs(&m, &a, &b), Err(Error::Mismatch(_))));
    }

    #[test]
    fn picard_at_zero_coupling_contracts_at_grid_rate() {
        let grid = Grid::new(30).unwrap();
        let m = model(Family::HardSphere, 0.0);
        let u0 = StateField::from_fn(grid, 2, |i, x| 1.0 + 0.5 * libm::cos(3.0 * x + i as f64)).normalized().unwrap();
        let opts = SolverOptions::with_tolerances(1e-8, 1e-11);
        let report = picard_solve(&m, &u0, 0.05, 10, &opts, 8, 1e-5).unwrap();
        // only the drift face weights see the frozen field, an O(dx) effect
        assert!(report.converged);
        assert!(report.ratios.iter().all(|r| *r < 0.05));
    }

    proptest! {
        #[test]
        fn self_frozen_matches_nonlinear_operator(
            vals in proptest::collection::vec(0.0f64..3.0, 2 * 8),
            eps in 0.0f64..0.5,
        ) {
            let grid = Grid::new(8).unwrap();
            let s = field(grid, vals);
            for family in Family::ALL {
                let m = model(family, eps);
                let lin = linearized_rhs(&m, &s, &s).unwrap();
                let (full, _) = spatial_rhs(&m, &s).unwrap();
                for (a, b) in lin.values().iter().zip(full.values()) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn linear_in_the_state(
            h in proptest::collection::vec(0.0f64..3.0, 16),
            s1 in proptest::collection::vec(-3.0f64..3.0, 16),
            s2 in proptest::collection::vec(-3.0f64..3.0, 16),
            alpha in -2.0f64..2.0,
            eps in 0.0f64..0.5,
        ) {
            let grid = Grid::new(8).unwrap();
            let m = model(Family::GradFlow, eps);
            let frozen = field(grid, h);
            let comb: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| alpha * a + b).collect();
            let r1 = linearized_rhs(&m, &frozen, &field(grid, s1)).unwrap();
            let r2 = linearized_rhs(&m, &frozen, &field(grid, s2)).unwrap();
            let rc = linearized_rhs(&m, &frozen, &field(grid, comb)).unwrap();
            for k in 0..16 {
                let expect = alpha * r1.values()[k] + r2.values()[k];
                prop_assert!((rc.values()[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()) * 1e2);
            }
        }
    }
}
