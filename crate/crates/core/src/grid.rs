//! Staggered one-dimensional mesh and the fields that live on it.
//!
//! Densities sit at cell midpoints, fluxes at the `J + 1` nodes. Multi-species
//! values are stored species-interleaved: entry `n * m + i` is species `i` in
//! cell (or node) `n`. This is also the unknown ordering seen by the
//! integrator, which keeps the Jacobian banded.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    cells: usize,
    lower: f64,
    upper: f64,
}

impl Grid {
    /// Equidistant grid with `cells` cells on the interval `(-1/2, 1/2)`.
    pub fn new(cells: usize) -> Result<Self> {
        Self::on_interval(-0.5, 0.5, cells)
    }

    pub fn on_interval(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParams("grid needs at least one cell".into()));
        }
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidParams("grid interval must be finite and non-empty".into()));
        }
        Ok(Self { cells, lower, upper })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.cells as f64
    }

    /// Node `x_n = lower + n dx`, `n = 0..=J`. The last node is pinned to `upper`.
    pub fn node(&self, n: usize) -> f64 {
        if n == self.cells {
            self.upper
        } else {
            self.lower + n as f64 * self.dx()
        }
    }

    /// Midpoint of cell `n`, i.e. the average of nodes `n` and `n + 1`.
    pub fn midpoint(&self, n: usize) -> f64 {
        0.5 * (self.node(n) + self.node(n + 1))
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|n| self.node(n)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.cells).map(|n| self.midpoint(n)).collect()
    }
}

/// Per-species densities at the cell midpoints at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: Grid,
    species: usize,
    values: Vec<f64>,
    pub time: f64,
}

impl StateField {
    pub fn zeros(grid: Grid, species: usize) -> Self {
        Self { grid, species, values: vec![0.0; species * grid.cells()], time: 0.0 }
    }

    /// Builds a state from interleaved values (`n * m + i`).
    pub fn from_interleaved(grid: Grid, species: usize, values: Vec<f64>) -> Result<Self> {
        if species == 0 || values.len() != species * grid.cells() {
            return Err(Error::Mismatch(alloc::format!(
                "expected {} values for {} species on {} cells, got {}",
                species * grid.cells(),
                species,
                grid.cells(),
                values.len()
            )));
        }
        Ok(Self { grid, species, values, time: 0.0 })
    }

    /// Builds a state from one profile per species.
    pub fn from_profiles(grid: Grid, profiles: &[Vec<f64>]) -> Result<Self> {
        let m = profiles.len();
        if m == 0 {
            return Err(Error::InvalidParams("at least one species profile required".into()));
        }
        let j = grid.cells();
        if let Some(bad) = profiles.iter().find(|p| p.len() != j) {
            return Err(Error::Mismatch(alloc::format!("profile has {} entries, grid has {j} cells", bad.len())));
        }
        let mut values = vec![0.0; m * j];
        for (i, p) in profiles.iter().enumerate() {
            for (n, &v) in p.iter().enumerate() {
                values[n * m + i] = v;
            }
        }
        Ok(Self { grid, species: m, values, time: 0.0 })
    }

    /// Samples `f(species, x)` at the midpoints.
    pub fn from_fn(grid: Grid, species: usize, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut state = Self::zeros(grid, species);
        for n in 0..grid.cells() {
            let x = grid.midpoint(n);
            for i in 0..species {
                state.values[n * species + i] = f(i, x);
            }
        }
        state
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn get(&self, species: usize, cell: usize) -> f64 {
        self.values[cell * self.species + species]
    }

    pub fn set(&mut self, species: usize, cell: usize, value: f64) {
        self.values[cell * self.species + species] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values of one species, cell by cell.
    pub fn profile(&self, species: usize) -> Vec<f64> {
        self.values.iter().skip(species).step_by(self.species).copied().collect()
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite { species: k % self.species, cell: k / self.species }),
            None => Ok(()),
        }
    }

    /// Rescales every species to unit mass (`dx * sum = 1`).
    pub fn normalized(mut self) -> Result<Self> {
        let dx = self.grid.dx();
        for i in 0..self.species {
            let mass: f64 = dx * self.values.iter().skip(i).step_by(self.species).sum::<f64>();
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::InvalidParams(alloc::format!(
                    "species {} has mass {mass}; cannot normalize",
                    i + 1
                )));
            }
            for v in self.values.iter_mut().skip(i).step_by(self.species) {
                *v /= mass;
            }
        }
        Ok(self)
    }

    /// `self - other`, keeping `self.time`.
    pub fn difference(&self, other: &StateField) -> Result<StateField> {
        self.ensure_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(StateField { grid: self.grid, species: self.species, values, time: self.time })
    }

    /// Cell averages on a grid `factor` times coarser.
    pub fn coarsened(&self, factor: usize) -> Result<StateField> {
        if factor == 0 || !self.grid.cells().is_multiple_of(factor) {
            return Err(Error::InvalidParams(alloc::format!(
                "{} cells cannot be coarsened by {factor}",
                self.grid.cells()
            )));
        }
        let grid = Grid::on_interval(self.grid.lower(), self.grid.upper(), self.grid.cells() / factor)?;
        let m = self.species;
        let mut values = alloc::vec![0.0; m * grid.cells()];
        for (n, chunk) in self.values.chunks(m * factor).enumerate() {
            for (k, v) in chunk.iter().enumerate() {
                values[n * m + k % m] += v / factor as f64;
            }
        }
        Ok(StateField { grid, species: m, values, time: self.time })
    }

    pub fn ensure_compatible(&self, other: &StateField) -> Result<()> {
        if self.grid != other.grid || self.species != other.species {
            return Err(Error::Mismatch(alloc::format!(
                "states on {} cells x {} species and {} cells x {} species",
                self.grid.cells(),
                self.species,
                other.grid.cells(),
                other.species
            )));
        }
        Ok(())
    }
}

/// Fluxes `q_i` at the nodes. The boundary entries are zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    grid: Grid,
    species: usize,
    values: Vec<f64>,
}

impl FluxField {
    pub(crate) fn new(grid: Grid, species: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), species * (grid.cells() + 1));
        Self { grid, species, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn get(&self, species: usize, node: usize) -> f64 {
        self.values[node * self.species + species]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_span_the_domain() {
        let g = Grid::new(10).unwrap();
        assert_eq!(g.node(0), -0.5);
        assert_eq!(g.node(10), 0.5);
        assert!((g.dx() - 0.1).abs() < 1e-15);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        for n in 0..10 {
            assert!((g.midpoint(n) - 0.5 * (nodes[n] + nodes[n + 1])).abs() < 1e-15);
        }
    }

    #[test]
    fn coarsening_averages_and_keeps_mass() {
        let g = Grid::new(6).unwrap();
        let s =
            StateField::from_profiles(g, &[alloc::vec![1.0, 3.0, 2.0, 2.0, 0.0, 6.0], alloc::vec![1.0; 6]]).unwrap();
        let c = s.coarsened(2).unwrap();
        assert_eq!(c.grid().cells(), 3);
        assert_eq!(c.profile(0), alloc::vec![2.0, 2.0, 3.0]);
        assert_eq!(c.profile(1), alloc::vec![1.0; 3]);
        assert!(s.coarsened(4).is_err());
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn interleaving_round_trips_profiles() {
        let g = Grid::new(3).unwrap();
        let s = StateField::from_profiles(g, &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(s.values(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(s.profile(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(s.get(0, 2), 3.0);
    }

    #[test]
    fn normalization_gives_unit_mass() {
        let g = Grid::new(50).unwrap();
        let s = StateField::from_fn(g, 2, |i, x| 1.0 + (i as f64 + 1.0) * x * x).normalized().unwrap();
        for i in 0..2 {
            let mass: f64 = g.dx() * s.profile(i).iter().sum::<f64>();
            assert!((mass - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_entries_are_located() {
        let g = Grid::new(4).unwrap();
        let mut s = StateField::zeros(g, 2);
        s.set(1, 2, f64::NAN);
        assert_eq!(s.check_finite(), Err(Error::NonFinite { species: 1, cell: 2 }));
    }
}
