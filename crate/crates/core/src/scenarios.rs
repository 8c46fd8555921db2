//! Standard parameter sets, potentials and initial data of the reference
//! experiments.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::math;
use crate::models::{Family, ModelSpec, PhysicalParams};
use crate::potential::Potential;

/// Initial profile of one species, sampled at the cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `exp(-k (x - x0)^2)`, rescaled to unit mass.
    NormalizedGaussian {
        center: f64,
        sharpness: f64,
    },
    Uniform {
        level: f64,
    },
    /// `1 + tanh(10 (2x + a - s)) / 2 + tanh(-10 (2x - a - s)) / 2`: a plateau of
    /// height 2 on `|2x - s| < a` over a unit background, rescaled to unit mass.
    TanhPlateau {
        half_width: f64,
        shift: f64,
    },
}

impl Profile {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let xs = grid.midpoints();
        let raw: Vec<f64> = match self {
            Profile::NormalizedGaussian { center, sharpness } => {
                xs.iter().map(|x| math::exp(-sharpness * (x - center) * (x - center))).collect()
            }
            Profile::Uniform { level } => return Ok(vec![*level; xs.len()]),
            Profile::TanhPlateau { half_width: a, shift: s } => xs
                .iter()
                .map(|x| 1.0 + 0.5 * math::tanh(10.0 * (2.0 * x + a - s)) + 0.5 * math::tanh(-10.0 * (2.0 * x - a - s)))
                .collect(),
        };
        let mass = grid.dx() * raw.iter().sum::<f64>();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParams("initial profile has no positive mass".into()));
        }
        Ok(raw.into_iter().map(|v| v / mass).collect())
    }
}

/// Samples one profile per species.
pub fn initial_state(grid: Grid, profiles: &[Profile]) -> Result<StateField> {
    let sampled = profiles.iter().map(|p| p.sample(&grid)).collect::<Result<Vec<_>>>()?;
    StateField::from_profiles(grid, &sampled)
}

/// Equal numbers and sizes, unit diffusivities, `d = 2`.
pub fn symmetric_params(epsilon: f64) -> PhysicalParams {
    PhysicalParams::two_species([1.0, 1.0], epsilon)
}

/// As [`symmetric_params`] with `D1 = 1.5`.
pub fn unequal_diffusivity_params(epsilon: f64) -> PhysicalParams {
    PhysicalParams::two_species([1.5, 1.0], epsilon)
}

/// Single well acting on species 1 only.
pub fn well_potentials() -> Vec<Potential> {
    vec![Potential::standard_well(), Potential::Zero]
}

/// Plateau data for both species: `a = 0.5`, shifted by `+b` and `-b` with `b = 0.05`.
pub fn plateau_profiles() -> Vec<Profile> {
    vec![Profile::TanhPlateau { half_width: 0.5, shift: 0.05 }, Profile::TanhPlateau { half_width: 0.5, shift: -0.05 }]
}

/// Gaussian bump at `x = -0.2` for species 1, uniform species 2.
pub fn bump_profiles() -> Vec<Profile> {
    vec![Profile::NormalizedGaussian { center: -0.2, sharpness: 80.0 }, Profile::Uniform { level: 1.0 }]
}

/// Bump relaxing into a well (symmetric parameters).
pub fn well_relaxation(family: Family, epsilon: f64, cells: usize) -> Result<(ModelSpec, StateField)> {
    let model = ModelSpec::new(family, symmetric_params(epsilon), well_potentials())?;
    Ok((model, initial_state(Grid::new(cells)?, &bump_profiles())?))
}

/// Plateau data without potentials (symmetric parameters).
pub fn plateau_blowup(family: Family, epsilon: f64, cells: usize) -> Result<(ModelSpec, StateField)> {
    let model = ModelSpec::new(family, symmetric_params(epsilon), vec![Potential::Zero; 2])?;
    Ok((model, initial_state(Grid::new(cells)?, &plateau_profiles())?))
}

/// Plateau data in a well with `D1 = 1.5`, used for model comparisons.
pub fn model_comparison(family: Family, epsilon: f64, cells: usize) -> Result<(ModelSpec, StateField)> {
    let model = ModelSpec::new(family, unequal_diffusivity_params(epsilon), well_potentials())?;
    Ok((model, initial_state(Grid::new(cells)?, &plateau_profiles())?))
}

/// Normalized Gibbs density `exp(-V / D) / Z` at the midpoints.
pub fn gibbs_profile(potential: &Potential, diffusivity: f64, grid: &Grid) -> Vec<f64> {
    let raw: Vec<f64> = grid.midpoints().iter().map(|x| math::exp(-potential.value(*x) / diffusivity)).collect();
    let z = grid.dx() * raw.iter().sum::<f64>();
    raw.into_iter().map(|v| v / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_data_peaks_at_four_thirds() {
        let grid = Grid::new(500).unwrap();
        let s = initial_state(grid, &plateau_profiles()).unwrap();
        for i in 0..2 {
            let p = s.profile(i);
            let max = p.iter().cloned().fold(0.0, f64::max);
            assert!((max - 4.0 / 3.0).abs() < 2e-3, "max {max}");
            assert!((grid.dx() * p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
        // the two plateaus are mirror images
        let (p1, p2) = (s.profile(0), s.profile(1));
        for n in 0..500 {
            assert!((p1[n] - p2[499 - n]).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_is_normalized() {
        let grid = Grid::new(200).unwrap();
        let s = initial_state(grid, &bump_profiles()).unwrap();
        assert!((grid.dx() * s.profile(0).iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(s.profile(1).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn zero_mass_profile_is_rejected() {
        let grid = Grid::new(10).unwrap();
        assert!(Profile::NormalizedGaussian { center: 0.0, sharpness: 1e3 }.sample(&grid).is_ok());
        assert!(Profile::NormalizedGaussian { center: 0.0, sharpness: f64::INFINITY }.sample(&grid).is_err());
    }
}
