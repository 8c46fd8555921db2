//! Trajectory norms, ellipticity diagnostics, mass accounting and log-log
//! order fitting.

use alloc::vec;
use alloc::vec::Vec;

use crate::certificates::lipschitz_envelopes;
use crate::error::{Error, Result};
use crate::grid::StateField;
use crate::integrator::Trajectory;
use crate::math;
use crate::models::{ModelSpec, PhysicalParams};

/// Discrete `W(Q_T)` norm: a space-time `L2` term in `u_xx` and `u_t` plus the
/// largest `H1` norm over the output times.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub w_norm: f64,
    pub l2_part: f64,
    pub sup_part: f64,
    /// Per-species `l2_part`.
    pub l2_species: Vec<f64>,
    /// Per-species `sup_part` (each maximized over time on its own).
    pub sup_species: Vec<f64>,
}

/// Norm of a successful trajectory.
pub fn w_norm(traj: &Trajectory) -> Result<NormReport> {
    traj.require_complete()?;
    norm_of_states(&traj.states, &traj.times)
}

/// Norm of the sample-wise difference of two trajectories on the same grid and times.
pub fn difference_norm(traj_a: &Trajectory, traj_b: &Trajectory) -> Result<NormReport> {
    traj_a.require_complete()?;
    traj_b.require_complete()?;
    if traj_a.times.len() != traj_b.times.len()
        || traj_a.times.iter().zip(&traj_b.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::Mismatch("trajectories are sampled at different times".into()));
    }
    let diffs = traj_a.states.iter().zip(&traj_b.states).map(|(a, b)| a.difference(b)).collect::<Result<Vec<_>>>()?;
    norm_of_states(&diffs, &traj_a.times)
}

/// Norm of an arbitrary sequence of states sampled at uniformly spaced `times`.
pub fn norm_of_states(states: &[StateField], times: &[f64]) -> Result<NormReport> {
    let first = states.first().ok_or_else(|| Error::InvalidParams("empty trajectory".into()))?;
    if states.len() != times.len() {
        return Err(Error::Mismatch("one time per state required".into()));
    }
    for s in states {
        first.ensure_compatible(s)?;
    }
    let m = first.species();
    let grid = *first.grid();
    let j = grid.cells();
    let dx = grid.dx();
    let samples = states.len() - 1;
    let dt = if samples > 0 { (times[samples] - times[0]) / samples as f64 } else { 0.0 };
    if samples > 0 && !(dt > 0.0) {
        return Err(Error::InvalidParams("output times must increase".into()));
    }

    let mut l2_sq = vec![0.0; m];
    let mut sup_sq = vec![0.0f64; m];
    let mut sup_total_sq = 0.0f64;
    for (k, state) in states.iter().enumerate() {
        let mut h1_sq = vec![0.0; m];
        for i in 0..m {
            let at = |n: isize| -> f64 {
                // even reflection about both walls
                let idx = if n < 0 {
                    -n - 1
                } else if n >= j as isize {
                    2 * j as isize - n - 1
                } else {
                    n
                };
                state.get(i, idx as usize)
            };
            let mut uxx_sq = 0.0;
            let mut h1 = 0.0;
            for n in 0..j as isize {
                let (l, c, r) = (at(n - 1), at(n), at(n + 1));
                let uxx = (r + l - 2.0 * c) / (dx * dx);
                let ux = (r - l) / (2.0 * dx);
                uxx_sq += uxx * uxx;
                h1 += c * c + ux * ux;
            }
            let mut ut_sq = 0.0;
            if k < samples {
                let next = &states[k + 1];
                for n in 0..j {
                    let ut = (next.get(i, n) - state.get(i, n)) / dt;
                    ut_sq += ut * ut;
                }
            }
            l2_sq[i] += uxx_sq + ut_sq;
            h1_sq[i] = h1;
        }
        for i in 0..m {
            sup_sq[i] = sup_sq[i].max(h1_sq[i]);
        }
        sup_total_sq = sup_total_sq.max(h1_sq.iter().sum());
    }
    // a single sample has no time step; the space-time term then vanishes
    let weight = if samples > 0 { dx * dt } else { 0.0 };
    let l2_species: Vec<f64> = l2_sq.iter().map(|s| math::sqrt(weight * s)).collect();
    let l2_part = math::sqrt(weight * l2_sq.iter().sum::<f64>());
    let sup_part = math::sqrt(dx * sup_total_sq);
    Ok(NormReport {
        w_norm: l2_part + sup_part,
        l2_part,
        sup_part,
        l2_species,
        sup_species: sup_sq.iter().map(|s| math::sqrt(dx * s)).collect(),
    })
}

/// Discrete `L2` distance `sqrt(dx sum (a - b)^2)` over all species.
pub fn l2_distance(a: &StateField, b: &StateField) -> Result<f64> {
    a.ensure_compatible(b)?;
    let sq: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(math::sqrt(a.grid().dx() * sq))
}

/// Per-species mass `dx * sum_n u_i,n`.
pub fn mass_total(state: &StateField) -> Vec<f64> {
    let dx = state.grid().dx();
    (0..state.species()).map(|i| dx * state.profile(i).iter().sum::<f64>()).collect()
}

/// Largest relative change of any species' mass along the trajectory.
pub fn max_relative_mass_drift(traj: &Trajectory) -> f64 {
    let initial = mass_total(&traj.states[0]);
    traj.states
        .iter()
        .flat_map(|s| {
            mass_total(s)
                .into_iter()
                .zip(initial.clone())
                .map(|(m, m0)| (m - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
        })
        .fold(0.0, f64::max)
}

/// Which parameter distinguishes the two species in the ellipticity bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticityCase {
    /// Equal sizes and numbers, `theta = (D1 - D2)^2 / (4 D1 D2)`.
    Diffusivities,
    /// Unit diffusivities, equal numbers, `theta = (1 - s1)^2`.
    Sizes,
    /// Unit diffusivities and sizes, `theta = 9 (1/4 - N1 + N1^2)`.
    Numbers,
}

impl EllipticityCase {
    pub const ALL: [EllipticityCase; 3] =
        [EllipticityCase::Diffusivities, EllipticityCase::Sizes, EllipticityCase::Numbers];

    pub fn name(&self) -> &'static str {
        match self {
            EllipticityCase::Diffusivities => "diffusivities",
            EllipticityCase::Sizes => "sizes",
            EllipticityCase::Numbers => "numbers",
        }
    }

    fn theta(&self, params: &PhysicalParams) -> Result<f64> {
        const TOL: f64 = 1e-12;
        let near = |a: f64, b: f64| (a - b).abs() <= TOL;
        if params.species() != 2 || params.dim != 2 {
            return Err(Error::CaseConditions(alloc::format!("case {}: needs two species and dim = 2", self.name())));
        }
        let d = &params.diffusivity;
        let s = &params.size_frac;
        let n = &params.n_frac;
        let fail = |what: &str| Err(Error::CaseConditions(alloc::format!("case {}: {what}", self.name())));
        match self {
            EllipticityCase::Diffusivities => {
                if !(near(s[0], 1.0) && near(s[1], 1.0) && near(n[0], 0.5) && near(n[1], 0.5)) {
                    return fail("requires unit relative sizes and number fractions 1/2");
                }
                Ok((d[0] - d[1]) * (d[0] - d[1]) / (4.0 * d[0] * d[1]))
            }
            EllipticityCase::Sizes => {
                if !(near(d[0], 1.0) && near(d[1], 1.0) && near(n[0], 0.5) && near(n[1], 0.5)) {
                    return fail("requires unit diffusivities and number fractions 1/2");
                }
                if !near(s[1], 2.0 - s[0]) {
                    return fail("requires relative sizes summing to 2");
                }
                Ok((1.0 - s[0]) * (1.0 - s[0]))
            }
            EllipticityCase::Numbers => {
                if !(near(d[0], 1.0) && near(d[1], 1.0) && near(s[0], 1.0) && near(s[1], 1.0)) {
                    return fail("requires unit diffusivities and relative sizes");
                }
                if !near(n[1], 1.0 - n[0]) {
                    return fail("requires number fractions summing to 1");
                }
                Ok(9.0 * (0.25 - n[0] + n[0] * n[0]))
            }
        }
    }
}

/// First case whose side conditions hold for `params`.
pub fn detect_case(params: &PhysicalParams) -> Option<EllipticityCase> {
    EllipticityCase::ALL.into_iter().find(|c| c.theta(params).is_ok())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub case: EllipticityCase,
    pub theta: f64,
    pub u_star: f64,
    pub epsilon_star: f64,
    /// Minimum of `det(Sym(D))` over a scanned trajectory, if one was scanned.
    pub min_det_sym: Option<DetSymMinimum>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetSymMinimum {
    pub value: f64,
    pub time: f64,
    pub x: f64,
}

/// `eps* = (1 + sqrt(9 + 4 theta)) / ((2 + theta) pi u*)`.
pub fn epsilon_star_formula(theta: f64, u_star: f64) -> f64 {
    (1.0 + math::sqrt(9.0 + 4.0 * theta)) / ((2.0 + theta) * core::f64::consts::PI * u_star)
}

/// Ellipticity threshold for the given case.
pub fn epsilon_star(case: EllipticityCase, params: &PhysicalParams, u_star: f64) -> Result<EllipticityReport> {
    if !(u_star > 0.0) || !u_star.is_finite() {
        return Err(Error::InvalidParams(alloc::format!("u* must be positive, got {u_star}")));
    }
    let theta = case.theta(params)?;
    Ok(EllipticityReport { case, theta, u_star, epsilon_star: epsilon_star_formula(theta, u_star), min_det_sym: None })
}

/// Determinant of the symmetric part of the diffusion matrix at `u`.
pub fn det_sym_diffusion(model: &ModelSpec, u: &[f64]) -> Result<f64> {
    if model.species() != 2 || u.len() != 2 {
        return Err(Error::Mismatch("det(Sym(D)) is defined for two species".into()));
    }
    let (d, _) = model.eval_matrices(0.0, u);
    let skew = 0.5 * (d[(0, 1)] - d[(1, 0)]);
    Ok(d.det2() - skew * skew)
}

/// Minimum of `det(Sym(D))` over every output time and cell of `traj`.
pub fn min_det_sym(model: &ModelSpec, traj: &Trajectory) -> Result<DetSymMinimum> {
    let mut best = DetSymMinimum { value: f64::INFINITY, time: 0.0, x: 0.0 };
    for state in &traj.states {
        let grid = state.grid();
        for n in 0..grid.cells() {
            let v = det_sym_diffusion(model, &[state.get(0, n), state.get(1, n)])?;
            if v < best.value {
                best = DetSymMinimum { value: v, time: state.time, x: grid.midpoint(n) };
            }
        }
    }
    Ok(best)
}

/// Adds the trajectory minimum of `det(Sym(D))` to a report.
pub fn scan_trajectory(report: EllipticityReport, model: &ModelSpec, traj: &Trajectory) -> Result<EllipticityReport> {
    Ok(EllipticityReport { min_det_sym: Some(min_det_sym(model, traj)?), ..report })
}

/// Coercivity bound `min(lambda / (1 + |a|_inf L0(u*)), 1)`.
///
/// The perturbation is split with unit weights (`|a|_inf = 1`), the species
/// diffusivities being part of the envelope.
pub fn practical_bound(model: &ModelSpec, u_star: f64, lambda: f64) -> Result<f64> {
    if !(u_star >= 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParams("u* must be non-negative and lambda positive".into()));
    }
    let envelope = lipschitz_envelopes(model)?;
    let a_sup = if envelope.kappa0 > 0.0 { 1.0 } else { 0.0 };
    Ok((lambda / (1.0 + a_sup * envelope.l0(u_star))).min(1.0))
}

/// Least-squares line through `(ln eps, ln value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParams("order fit needs at least three points".into()));
    }
    if let Some(p) = points.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0) || !e.is_finite() || !v.is_finite()) {
        return Err(Error::InvalidParams(alloc::format!("order fit needs positive data, got {p:?}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(e, v)| (math::ln(*e), math::ln(*v))).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParams("order fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0) * (p.1 - intercept - slope * p.0)).sum();
    Ok(OrderFit { points: points.to_vec(), slope, intercept, residual: math::sqrt(ss / n) })
}

/// Observed order `log(e_coarse / e_fine) / log(refinement)`.
pub fn observed_order(error_coarse: f64, error_fine: f64, refinement: f64) -> f64 {
    math::ln(error_coarse / error_fine) / math::ln(refinement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::integrator::SolverStats;
    use crate::models::Family;
    use crate::potential::Potential;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn static_traj(state: StateField, samples: usize) -> Trajectory {
        let times: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
        let states = times.iter().map(|t| state.clone().with_time(*t)).collect();
        Trajectory { times, states, stats: SolverStats::default(), failure: None }
    }

    fn symmetric_model(eps: f64) -> ModelSpec {
        ModelSpec::new(Family::HardSphere, PhysicalParams::two_species([1.0, 1.0], eps), vec![Potential::Zero; 2])
            .unwrap()
    }

    #[test]
    fn norm_of_zero_and_constant_trajectories() {
        let grid = Grid::new(20).unwrap();
        let zero = static_traj(StateField::zeros(grid, 2), 4);
        assert_eq!(w_norm(&zero).unwrap().w_norm, 0.0);
        let ones = static_traj(StateField::from_fn(grid, 2, |_, _| 1.0), 4);
        let r = w_norm(&ones).unwrap();
        assert_eq!(r.l2_part, 0.0);
        assert!((r.sup_part - math::sqrt(2.0)).abs() < 1e-14);
        assert_eq!(r.w_norm, r.l2_part + r.sup_part);
    }

    #[test]
    fn linear_profile_sup_term() {
        let mut last = 0.0;
        for j in [100, 400, 1600] {
            let grid = Grid::new(j).unwrap();
            let s = StateField::from_fn(grid, 2, |i, x| if i == 0 { x } else { 0.0 });
            let r = w_norm(&static_traj(s, 2)).unwrap();
            last = r.sup_part;
        }
        assert!((last - math::sqrt(13.0 / 12.0)).abs() < 1e-3);
    }

    #[test]
    fn failed_trajectory_has_no_norm() {
        let grid = Grid::new(5).unwrap();
        let mut t = static_traj(StateField::zeros(grid, 2), 2);
        t.failure =
            Some(crate::integrator::Failure { time: 0.3, reason: crate::integrator::FailureReason::StepUnderflow });
        assert_eq!(w_norm(&t), Err(Error::FailedTrajectory { time: 0.3 }));
    }

    #[test]
    fn difference_of_identical_trajectories_vanishes() {
        let grid = Grid::new(10).unwrap();
        let t = static_traj(StateField::from_fn(grid, 2, |i, x| 1.0 + i as f64 * x), 3);
        assert_eq!(difference_norm(&t, &t).unwrap().w_norm, 0.0);
        let shorter = static_traj(StateField::from_fn(grid, 2, |_, _| 1.0), 2);
        assert!(difference_norm(&t, &shorter).is_err());
    }

    #[test]
    fn epsilon_star_examples() {
        let sym = PhysicalParams::two_species([1.0, 1.0], 0.1);
        let r = epsilon_star(EllipticityCase::Diffusivities, &sym, 1.333).unwrap();
        assert_eq!(r.theta, 0.0);
        assert!((r.epsilon_star - 2.0 / (PI * 1.333)).abs() < 1e-15);
        assert!((r.epsilon_star - 0.4776).abs() < 1e-3);
        let r =
            epsilon_star(EllipticityCase::Diffusivities, &PhysicalParams::two_species([1.5, 1.0], 0.1), 1.0).unwrap();
        assert!((r.theta - 0.25 / 6.0).abs() < 1e-15);
        assert!((r.epsilon_star - 0.6279).abs() < 1e-4);
    }

    #[test]
    fn case_conditions_are_checked() {
        let p = PhysicalParams::two_species([1.5, 1.0], 0.1);
        assert!(matches!(epsilon_star(EllipticityCase::Sizes, &p, 1.0), Err(Error::CaseConditions(_))));
        assert!(matches!(epsilon_star(EllipticityCase::Numbers, &p, 1.0), Err(Error::CaseConditions(_))));
        let mut sizes = PhysicalParams::two_species([1.0, 1.0], 0.1);
        sizes.size_frac = vec![0.8, 1.2];
        let r = epsilon_star(EllipticityCase::Sizes, &sizes, 1.0).unwrap();
        assert!((r.theta - 0.04).abs() < 1e-14);
        assert_eq!(detect_case(&sizes), Some(EllipticityCase::Sizes));
        let mut numbers = PhysicalParams::two_species([1.0, 1.0], 0.1);
        numbers.n_frac = vec![0.3, 0.7];
        let r = epsilon_star(EllipticityCase::Numbers, &numbers, 1.0).unwrap();
        assert!((r.theta - 9.0 * (0.25 - 0.3 + 0.09)).abs() < 1e-14);
        assert!(epsilon_star(EllipticityCase::Diffusivities, &numbers, 1.0).is_err());
    }

    #[test]
    fn epsilon_star_decreases_in_theta() {
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let e = epsilon_star_formula(k as f64 * 0.5, 1.0);
            assert!(e < prev);
            prev = e;
        }
        assert!(epsilon_star_formula(1e12, 1.0) < 1e-5);
    }

    #[test]
    fn det_sym_examples() {
        let m = symmetric_model(0.25);
        assert_eq!(det_sym_diffusion(&m, &[0.0, 0.0]).unwrap(), 1.0);
        let v = det_sym_diffusion(&m, &[4.0 / 3.0, 4.0 / 3.0]).unwrap();
        assert!((v - 0.9753).abs() < 1e-4);
        let x = 0.25 * PI * 1.333;
        let v = det_sym_diffusion(&m, &[1.333, 1.333]).unwrap();
        assert!((v - (1.0 + 0.5 * x - 0.5 * x * x)).abs() < 1e-12);
        let u_star = 1.333;
        let eps = 2.0 / (PI * u_star);
        let root = det_sym_diffusion(&symmetric_model(eps), &[u_star, u_star]).unwrap();
        assert!(root.abs() < 1e-10);
        let three = ModelSpec::reference(&[1.0, 1.0, 1.0], vec![Potential::Zero; 3]).unwrap();
        assert!(det_sym_diffusion(&three, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn practical_bound_examples() {
        let reference = ModelSpec::reference(&[1.0, 1.0], vec![Potential::Zero; 2]).unwrap();
        assert_eq!(practical_bound(&reference, 1.333, 0.5).unwrap(), 0.5);
        assert_eq!(practical_bound(&reference, 1.333, 3.0).unwrap(), 1.0);
        let b = practical_bound(&symmetric_model(0.25), 1.333, 1.0).unwrap();
        assert!((b - 1.0 / (1.0 + 0.75 * PI * 1.333)).abs() < 1e-14);
        assert!(b <= 2.0 / (PI * 1.333));
    }

    #[test]
    fn mass_of_uniform_state() {
        let grid = Grid::new(7).unwrap();
        let m = mass_total(&StateField::from_fn(grid, 2, |_, _| 1.0));
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn fit_order_exact_power_laws() {
        for p in [1.0, 2.0] {
            let pts: Vec<(f64, f64)> = [0.025, 0.05, 0.1, 0.2].iter().map(|e| (*e, 3.0 * libm::pow(*e, p))).collect();
            let f = fit_order(&pts).unwrap();
            assert!((f.slope - p).abs() < 1e-12);
            assert!(f.residual < 1e-12);
        }
        assert!(fit_order(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(fit_order(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn w_norm_is_a_norm(
            a in proptest::collection::vec(-2.0f64..2.0, 3 * 2 * 6),
            b in proptest::collection::vec(-2.0f64..2.0, 3 * 2 * 6),
            alpha in -3.0f64..3.0,
        ) {
            let grid = Grid::new(6).unwrap();
            let times = vec![0.0, 0.5, 1.0];
            let build = |v: &[f64]| -> Vec<StateField> {
                v.chunks(12).map(|c| StateField::from_interleaved(grid, 2, c.to_vec()).unwrap()).collect()
            };
            let sa = build(&a);
            let sb = build(&b);
            let scaled: Vec<f64> = a.iter().map(|v| alpha * v).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let na = norm_of_states(&sa, &times).unwrap();
            let nb = norm_of_states(&sb, &times).unwrap();
            let ns = norm_of_states(&build(&scaled), &times).unwrap();
            let nsum = norm_of_states(&build(&sum), &times).unwrap();
            prop_assert!((ns.w_norm - alpha.abs() * na.w_norm).abs() <= 1e-12 * (1.0 + na.w_norm));
            prop_assert!(nsum.w_norm <= na.w_norm + nb.w_norm + 1e-12 * (1.0 + na.w_norm + nb.w_norm));
        }

        #[test]
        fn det_sym_matches_closed_quadratic(eps in 0.0f64..0.8, u_star in 0.0f64..3.0) {
            let v = det_sym_diffusion(&symmetric_model(eps), &[u_star, u_star]).unwrap();
            let x = eps * PI * u_star;
            prop_assert!((v - (1.0 + 0.5 * x - 0.5 * x * x)).abs() < 1e-12 * (1.0 + x * x));
        }

        #[test]
        fn epsilon_star_is_the_root(d1 in 0.2f64..5.0, u_star in 0.1f64..3.0) {
            let params = PhysicalParams::two_species([d1, 1.0], 0.0);
            let r = epsilon_star(EllipticityCase::Diffusivities, &params, u_star).unwrap();
            let model = ModelSpec::new(Family::HardSphere, PhysicalParams { epsilon: r.epsilon_star, ..params },
                vec![Potential::Zero; 2]).unwrap();
            let v = det_sym_diffusion(&model, &[u_star, u_star]).unwrap();
            prop_assert!(v.abs() < 1e-10 * d1.max(1.0));
        }

        #[test]
        fn fit_order_tolerates_small_noise(
            p in 0.5f64..3.0,
            noise in proptest::collection::vec(-0.01f64..0.01, 4),
        ) {
            let eps = [0.025, 0.05, 0.1, 0.2];
            let pts: Vec<(f64, f64)> =
                eps.iter().zip(&noise).map(|(e, n)| (*e, libm::pow(*e, p) * (1.0 + n))).collect();
            prop_assert!((fit_order(&pts).unwrap().slope - p).abs() < 0.05);
        }
    }
}
