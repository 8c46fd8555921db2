//! Conservative finite-volume semi-discretization on the staggered grid.
//!
//! At every interior node the density factors are replaced by the harmonic
//! face average of the two neighbouring cells, which vanishes when either side
//! vanishes and so keeps the scheme positivity preserving. Boundary fluxes are
//! zero (no-flux walls), so the total mass of each species is conserved.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{FluxField, Grid, StateField};
use crate::integrator::OdeSystem;
use crate::models::{ModelSpec, MAX_SPECIES};

/// Sums below this are treated as a vanishing face density.
pub const FACE_FLOOR: f64 = 1e-14;

/// Harmonic face average `2 l r / (l + r)`, zero when `l + r <= 1e-14`.
pub fn face_average(left: f64, right: f64) -> f64 {
    let s = left + right;
    if s > FACE_FLOOR {
        2.0 * left * right / s
    } else {
        0.0
    }
}

/// Partial derivatives of [`face_average`] with respect to `left` and `right`.
pub fn face_average_partials(left: f64, right: f64) -> (f64, f64) {
    let s = left + right;
    if s > FACE_FLOOR {
        let s2 = s * s;
        (2.0 * right * right / s2, 2.0 * left * left / s2)
    } else {
        (0.0, 0.0)
    }
}

/// Semi-discrete time derivative and the node fluxes for `state`.
pub fn spatial_rhs(model: &ModelSpec, state: &StateField) -> Result<(StateField, FluxField)> {
    let op = SpatialOperator::new(model, *state.grid())?;
    if state.species() != model.species() {
        return Err(Error::Mismatch(alloc::format!(
            "state has {} species, model has {}",
            state.species(),
            model.species()
        )));
    }
    let m = model.species();
    let grid = *state.grid();
    let u = state.values();
    let mut flux = vec![0.0; m * (grid.cells() + 1)];
    let mut q = [0.0; MAX_SPECIES];
    for k in 1..grid.cells() {
        op.node_flux(k, &u[(k - 1) * m..k * m], &u[k * m..(k + 1) * m], &mut q);
        flux[k * m..(k + 1) * m].copy_from_slice(&q[..m]);
    }
    let mut dudt = vec![0.0; u.len()];
    op.apply(u, &mut dudt);
    let dudt = StateField::from_interleaved(grid, m, dudt)?.with_time(state.time);
    Ok((dudt, FluxField::new(grid, m, flux)))
}

/// The discrete operator of one model on one grid, with the potential slopes
/// at the nodes precomputed.
#[derive(Debug, Clone)]
pub struct SpatialOperator<'a> {
    model: &'a ModelSpec,
    grid: Grid,
    slopes: Vec<[f64; MAX_SPECIES]>,
}

impl<'a> SpatialOperator<'a> {
    pub fn new(model: &'a ModelSpec, grid: Grid) -> Result<Self> {
        let slopes = (0..=grid.cells()).map(|k| model.potential_slopes(grid.node(k))).collect();
        Ok(Self { model, grid, slopes })
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.model.species() * self.grid.cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node_flux(&self, node: usize, left: &[f64], right: &[f64], q: &mut [f64; MAX_SPECIES]) {
        let m = left.len();
        let inv_dx = 1.0 / self.grid.dx();
        let mut avg = [0.0; MAX_SPECIES];
        for k in 0..m {
            avg[k] = face_average(left[k], right[k]);
        }
        let (d, f) = self.model.matrices_with_slopes(&self.slopes[node], &avg[..m]);
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += d[(i, j)] * (right[j] - left[j]) * inv_dx - f[(i, j)] * avg[j];
            }
            q[i] = acc;
        }
    }

    /// Writes `du/dt` for the interleaved state `u` into `out`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.model.species();
        let inv_dx = 1.0 / self.grid.dx();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut q = [0.0; MAX_SPECIES];
        for k in 1..self.grid.cells() {
            let (left, right) = (&u[(k - 1) * m..k * m], &u[k * m..(k + 1) * m]);
            self.node_flux(k, left, right, &mut q);
            for i in 0..m {
                out[(k - 1) * m + i] += q[i] * inv_dx;
                out[k * m + i] -= q[i] * inv_dx;
            }
        }
    }

    /// Exact Jacobian of [`apply`](Self::apply) in banded storage.
    pub fn jacobian(&self, u: &[f64], jac: &mut BandMatrix) {
        let m = self.model.species();
        let inv_dx = 1.0 / self.grid.dx();
        jac.clear();
        for node in 1..self.grid.cells() {
            let (left, right) = (&u[(node - 1) * m..node * m], &u[node * m..(node + 1) * m]);
            let mut avg = [0.0; MAX_SPECIES];
            let mut w_left = [0.0; MAX_SPECIES];
            let mut w_right = [0.0; MAX_SPECIES];
            for k in 0..m {
                avg[k] = face_average(left[k], right[k]);
                (w_left[k], w_right[k]) = face_average_partials(left[k], right[k]);
            }
            let slopes = &self.slopes[node];
            let (d, f) = self.model.matrices_with_slopes(slopes, &avg[..m]);
            let (dd, df) = self.model.matrix_partials(slopes, &avg[..m]);
            for i in 0..m {
                for c in 0..m {
                    // d q_i / d avg_c through the matrix entries, and the explicit avg_c factor.
                    let mut through_avg = -f[(i, c)];
                    for j in 0..m {
                        through_avg += dd[c][(i, j)] * (right[j] - left[j]) * inv_dx - df[c][(i, j)] * avg[j];
                    }
                    let dq_left = through_avg * w_left[c] - d[(i, c)] * inv_dx;
                    let dq_right = through_avg * w_right[c] + d[(i, c)] * inv_dx;
                    let (col_l, col_r) = ((node - 1) * m + c, node * m + c);
                    let (row_l, row_r) = ((node - 1) * m + i, node * m + i);
                    jac.add(row_l, col_l, dq_left * inv_dx);
                    jac.add(row_l, col_r, dq_right * inv_dx);
                    jac.add(row_r, col_l, -dq_left * inv_dx);
                    jac.add(row_r, col_r, -dq_right * inv_dx);
                }
            }
        }
    }
}

impl OdeSystem for SpatialOperator<'_> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn half_bandwidth(&self) -> usize {
        2 * self.model.species() - 1
    }

    fn rhs(&mut self, _t: f64, y: &[f64], out: &mut [f64]) {
        self.apply(y, out);
    }

    fn analytic_jacobian(&mut self, _t: f64, y: &[f64], jac: &mut BandMatrix) -> bool {
        self.jacobian(y, jac);
        true
    }
}
