//! Brute-force stencil oracle, written directly from the closed-form matrices
//! of each family and sharing no code with the library's polynomial tables.
#![allow(dead_code)]

use crossdiff_core::{Family, ModelSpec, StateField};

type Mat = Vec<Vec<f64>>;

struct Consts {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    theta: [f64; 2],
}

fn consts(model: &ModelSpec) -> Consts {
    let p = model.params();
    let d = p.dim as f64;
    let k = 2.0 * std::f64::consts::PI / d;
    let (dd, n, s) = (&p.diffusivity, &p.n_frac, &p.size_frac);
    let a = [k * (d - 1.0) * n[0] * s[0].powi(p.dim as i32), k * (d - 1.0) * n[1] * s[1].powi(p.dim as i32)];
    let b = [
        k * ((d - 1.0) * dd[0] + d * dd[1]) / (dd[0] + dd[1]) * n[0],
        k * ((d - 1.0) * dd[1] + d * dd[0]) / (dd[0] + dd[1]) * n[1],
    ];
    let c = [k * dd[0] / (dd[0] + dd[1]) * n[1], k * dd[1] / (dd[0] + dd[1]) * n[0]];
    let a12 = (d - 1.0) * (c[0] + c[1]);
    let theta = [a[0] * c[0] - a12 * c[1], a[1] * c[1] - a12 * c[0]];
    Consts { a, b, c, theta }
}

/// Diffusion and drift matrices of `model` at `(x, u)`.
pub fn matrices(model: &ModelSpec, x: f64, u: &[f64]) -> (Mat, Mat) {
    let p = model.params();
    let m = p.species();
    let dv: Vec<f64> = model.potentials().iter().map(|v| v.derivative(x)).collect();
    let dd = &p.diffusivity;
    let e = p.epsilon;
    match model.family() {
        Family::Reference => {
            let mut diff = vec![vec![0.0; m]; m];
            let mut drift = vec![vec![0.0; m]; m];
            for i in 0..m {
                diff[i][i] = dd[i];
                drift[i][i] = -dv[i];
            }
            (diff, drift)
        }
        Family::Lattice => {
            let n = &p.n_frac;
            let diff = vec![
                vec![dd[0] * (1.0 - e * n[1] * u[1]), e * dd[0] * n[1] * u[0]],
                vec![e * dd[1] * n[0] * u[1], dd[1] * (1.0 - e * n[0] * u[0])],
            ];
            let drift = vec![
                vec![-dv[0] * (1.0 - e * n[0] * u[0]), e * n[1] * u[0] * dv[0]],
                vec![e * n[0] * u[1] * dv[1], -dv[1] * (1.0 - e * n[1] * u[1])],
            ];
            (diff, drift)
        }
        Family::HardSphere | Family::GradFlow => {
            let k = consts(model);
            let mut diff = vec![
                vec![dd[0] * (1.0 + e * k.a[0] * u[0] - e * k.c[0] * u[1]), e * dd[0] * k.b[0] * u[0]],
                vec![e * dd[1] * k.b[1] * u[1], dd[1] * (1.0 + e * k.a[1] * u[1] - e * k.c[1] * u[0])],
            ];
            if model.family() == Family::GradFlow {
                let g = e * e * u[0] * u[1];
                diff[0][0] -= g * dd[0] * k.theta[0];
                diff[0][1] += g * dd[0] * k.theta[1];
                diff[1][0] += g * dd[1] * k.theta[0];
                diff[1][1] -= g * dd[1] * k.theta[1];
            }
            let drift = vec![
                vec![-dv[0], e * k.c[0] * (dv[0] - dv[1]) * u[0]],
                vec![e * k.c[1] * (dv[1] - dv[0]) * u[1], -dv[1]],
            ];
            (diff, drift)
        }
    }
}

fn harmonic(l: f64, r: f64) -> f64 {
    if l + r > 1e-14 {
        2.0 * l * r / (l + r)
    } else {
        0.0
    }
}

fn divergence(fluxes: &[Vec<f64>], m: usize, cells: usize, dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; m * cells];
    for n in 0..cells {
        for i in 0..m {
            out[n * m + i] = (fluxes[n + 1][i] - fluxes[n][i]) / dx;
        }
    }
    out
}

/// Semi-discrete right-hand side, one stencil at a time.
pub fn rhs(model: &ModelSpec, state: &StateField) -> Vec<f64> {
    let grid = state.grid();
    let (m, cells, dx) = (state.species(), grid.cells(), grid.dx());
    let mut fluxes = vec![vec![0.0; m]; cells + 1];
    for k in 1..cells {
        let h: Vec<f64> = (0..m).map(|j| harmonic(state.get(j, k - 1), state.get(j, k))).collect();
        let (diff, drift) = matrices(model, grid.node(k), &h);
        for i in 0..m {
            fluxes[k][i] =
                (0..m).map(|j| diff[i][j] * (state.get(j, k) - state.get(j, k - 1)) / dx - drift[i][j] * h[j]).sum();
        }
    }
    divergence(&fluxes, m, cells, dx)
}

/// Right-hand side with every matrix factor and the face weights taken from `frozen`.
pub fn linearized(model: &ModelSpec, frozen: &StateField, state: &StateField) -> Vec<f64> {
    let grid = state.grid();
    let (m, cells, dx) = (state.species(), grid.cells(), grid.dx());
    let mut fluxes = vec![vec![0.0; m]; cells + 1];
    for k in 1..cells {
        let h: Vec<f64> = (0..m).map(|j| harmonic(frozen.get(j, k - 1), frozen.get(j, k))).collect();
        let (diff, drift) = matrices(model, grid.node(k), &h);
        for i in 0..m {
            fluxes[k][i] = (0..m)
                .map(|j| {
                    let (hl, hr) = (frozen.get(j, k - 1), frozen.get(j, k));
                    let face = if hl + hr > 1e-14 {
                        (hr * state.get(j, k - 1) + hl * state.get(j, k)) / (hl + hr)
                    } else {
                        0.0
                    };
                    diff[i][j] * (state.get(j, k) - state.get(j, k - 1)) / dx - drift[i][j] * face
                })
                .sum();
        }
    }
    divergence(&fluxes, m, cells, dx)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
