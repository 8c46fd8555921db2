use crossdiff_core::analysis::{difference_norm, max_relative_mass_drift, practical_bound};
use crossdiff_core::linearized::{picard_solve, solve_frozen};
use crossdiff_core::scenarios::{plateau_blowup, well_relaxation};
use crossdiff_core::{integrate, steady_state, Error, Family, SolverOptions};

#[test]
fn reruns_are_bit_identical() {
    let (model, u0) = well_relaxation(Family::GradFlow, 0.25, 80).unwrap();
    let opts = SolverOptions::default();
    let a = integrate(&model, &u0, 0.2, 20, &opts).unwrap();
    let b = integrate(&model, &u0, 0.2, 20, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_family_conserves_mass() {
    for family in Family::ALL {
        let (model, u0) = well_relaxation(family, 0.2, 100).unwrap();
        let traj = integrate(&model, &u0, 0.5, 25, &SolverOptions::default()).unwrap();
        assert!(traj.is_complete());
        assert!(max_relative_mass_drift(&traj) < 1e-10, "{family}");
    }
}

#[test]
fn halving_tolerances_moves_the_solution_little() {
    let (model, u0) = well_relaxation(Family::HardSphere, 0.25, 100).unwrap();
    let (rtol, atol) = (1e-6, 1e-9);
    let coarse = integrate(&model, &u0, 1.0, 10, &SolverOptions::with_tolerances(rtol, atol)).unwrap();
    let fine = integrate(&model, &u0, 1.0, 10, &SolverOptions::with_tolerances(rtol / 2.0, atol / 2.0)).unwrap();
    let (a, b) = (coarse.final_state(), fine.final_state());
    let scale = a.values().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let gap = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 10.0 * (rtol * scale + atol), "gap {gap:e}");
}

#[test]
fn beyond_the_ellipticity_threshold_there_is_no_steady_state() {
    // coarse grids damp the unstable modes and relax to the (elliptic) uniform state
    let (model, u0) = plateau_blowup(Family::HardSphere, 0.6, 500).unwrap();
    match steady_state(&model, &u0, &SolverOptions::default()) {
        Ok(ss) => assert!(!ss.converged, "residual {}", ss.residual),
        Err(e) => assert!(matches!(e, Error::FailedTrajectory { .. }), "{e:?}"),
    }
}

#[test]
fn converged_picard_iterate_is_a_fixed_point() {
    let (model, u0) = well_relaxation(Family::HardSphere, 0.1, 60).unwrap();
    let opts = SolverOptions::with_tolerances(1e-8, 1e-10);
    let tol = 1e-5;
    let report = picard_solve(&model, &u0, 0.05, 200, &opts, 30, tol).unwrap();
    assert!(report.converged);
    let v = report.final_iterate();
    let again = solve_frozen(&model, v, &u0, &opts).unwrap();
    assert!(difference_norm(&again, v).unwrap().w_norm < tol);
}

#[test]
fn contraction_below_the_practical_bound() {
    let (model, u0) = well_relaxation(Family::HardSphere, 0.0, 60).unwrap();
    let u_star = u0.values().iter().cloned().fold(0.0, f64::max);
    let bound = practical_bound(&model, u_star, 1.0).unwrap();
    let opts = SolverOptions::with_tolerances(1e-8, 1e-10);
    for fraction in [0.25, 0.5, 0.9] {
        let m = model.with_epsilon(fraction * bound).unwrap();
        let report = picard_solve(&m, &u0, 0.05, 50, &opts, 30, 1e-6).unwrap();
        assert!(report.converged);
        assert!(report.ratios.iter().all(|r| *r < 1.0), "eps {}: {:?}", m.epsilon(), report.ratios);
    }
}
