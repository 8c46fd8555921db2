//! Model catalog: the decoupled reference model and three cross-diffusion
//! perturbations of it (lattice exclusion, hard spheres, and the hard-sphere
//! gradient-flow variant).
//!
//! Every family is compiled once into polynomial tables. Each diffusion entry
//! `D_ij(u)` and each drift entry `F_ij(x, u) = sum_s V_s'(x) P_ijs(u)` is a
//! polynomial of degree at most two in the densities, split by order in `eps`:
//!
//! ```text
//! entry = base + eps * first + eps^2 * second
//! ```
//!
//! `base` is the diagonal reference model. The same tables drive evaluation,
//! model differences, Lipschitz envelopes and the analytic Jacobian.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::StateField;
use crate::math;
use crate::potential::Potential;

/// Largest species count a [`ModelSpec`] can carry.
pub const MAX_SPECIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Reference,
    Lattice,
    HardSphere,
    GradFlow,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Reference, Family::Lattice, Family::HardSphere, Family::GradFlow];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Reference => "reference",
            Family::Lattice => "lattice",
            Family::HardSphere => "hardsphere",
            Family::GradFlow => "gradflow",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Dimension of the underlying physics (2 or 3).
    pub dim: u32,
    /// Number fractions `N_i / (N_1 + N_2)`.
    pub n_frac: Vec<f64>,
    /// Diameters relative to the mean diameter.
    pub size_frac: Vec<f64>,
    pub diffusivity: Vec<f64>,
    /// Occupied volume fraction.
    pub epsilon: f64,
}

impl PhysicalParams {
    /// Two species, equal numbers and sizes, `d = 2`.
    pub fn two_species(diffusivity: [f64; 2], epsilon: f64) -> Self {
        Self {
            dim: 2,
            n_frac: alloc::vec![0.5, 0.5],
            size_frac: alloc::vec![1.0, 1.0],
            diffusivity: diffusivity.to_vec(),
            epsilon,
        }
    }

    /// Decoupled species with the given diffusivities (numbers split evenly).
    pub fn decoupled(diffusivity: &[f64]) -> Self {
        let m = diffusivity.len().max(1) as f64;
        Self {
            dim: 2,
            n_frac: alloc::vec![1.0 / m; diffusivity.len()],
            size_frac: alloc::vec![1.0; diffusivity.len()],
            diffusivity: diffusivity.to_vec(),
            epsilon: 0.0,
        }
    }

    pub fn species(&self) -> usize {
        self.diffusivity.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.species();
        if m == 0 || m > MAX_SPECIES {
            return Err(Error::InvalidParams(alloc::format!("species count {m} outside 1..={MAX_SPECIES}")));
        }
        if self.n_frac.len() != m || self.size_frac.len() != m {
            return Err(Error::InvalidParams(
                "n_frac, size_frac and diffusivity must have one entry per species".into(),
            ));
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidParams(alloc::format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if let Some(d) = self.diffusivity.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParams(alloc::format!("diffusivity {d} is not positive")));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParams(alloc::format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.n_frac.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::InvalidParams("number fractions must be non-negative".into()));
        }
        let total: f64 = self.n_frac.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(alloc::format!("number fractions sum to {total}, expected 1")));
        }
        if self.size_frac.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParams("relative diameters must be positive".into()));
        }
        if m == 2 && (self.size_frac[0] + self.size_frac[1] - 2.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(alloc::format!(
                "relative diameters sum to {}, expected 2",
                self.size_frac[0] + self.size_frac[1]
            )));
        }
        Ok(())
    }
}

/// Hard-sphere coefficients and the derived gradient-flow quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub a12: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Coefficients of the two-species hard-sphere model.
pub fn derive_coefficients(params: &PhysicalParams) -> Result<Coefficients> {
    params.validate()?;
    if params.species() != 2 {
        return Err(Error::InvalidParams("hard-sphere coefficients need exactly two species".into()));
    }
    let d = params.dim as f64;
    let pref = 2.0 * PI / d;
    let dd = &params.diffusivity;
    let n = &params.n_frac;
    let s = &params.size_frac;
    let mut a = [0.0; 2];
    let mut b = [0.0; 2];
    let mut c = [0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        a[i] = pref * (d - 1.0) * n[i] * libm::pow(s[i], d);
        b[i] = pref * ((d - 1.0) * dd[i] + d * dd[j]) / (dd[i] + dd[j]) * n[i];
        c[i] = pref * dd[i] / (dd[i] + dd[j]) * n[j];
    }
    let a12 = (d - 1.0) * (c[0] + c[1]);
    Ok(Coefficients { a, b, c, a12, theta1: a[0] * c[0] - a12 * c[1], theta2: a[1] * c[1] - a12 * c[0] })
}

/// Polynomial of degree <= 2 in the species densities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Quadratic {
    pub constant: f64,
    pub linear: [f64; MAX_SPECIES],
    /// `quadratic[k][l]` (only `k <= l` used) multiplies `u_k u_l`.
    pub quadratic: [[f64; MAX_SPECIES]; MAX_SPECIES],
}

impl Quadratic {
    fn eval(&self, u: &[f64]) -> f64 {
        let m = u.len();
        let mut acc = self.constant;
        for k in 0..m {
            acc += self.linear[k] * u[k];
            for l in k..m {
                acc += self.quadratic[k][l] * u[k] * u[l];
            }
        }
        acc
    }

    fn partial(&self, u: &[f64], k: usize) -> f64 {
        let m = u.len();
        let mut acc = self.linear[k];
        for l in 0..m {
            let (lo, hi) = if k <= l { (k, l) } else { (l, k) };
            let q = self.quadratic[lo][hi];
            acc += if l == k { 2.0 * q * u[k] } else { q * u[l] };
        }
        acc
    }

    fn axpy(&mut self, alpha: f64, other: &Quadratic) {
        self.constant += alpha * other.constant;
        for k in 0..MAX_SPECIES {
            self.linear[k] += alpha * other.linear[k];
            for l in 0..MAX_SPECIES {
                self.quadratic[k][l] += alpha * other.quadratic[k][l];
            }
        }
    }

    /// Euclidean norm of the coefficients of the linear part.
    pub fn linear_norm(&self) -> f64 {
        math::sqrt(self.linear.iter().map(|c| c * c).sum())
    }

    pub fn has_quadratic_terms(&self) -> bool {
        self.quadratic.iter().flatten().any(|q| *q != 0.0)
    }
}

/// Diffusion and drift tables for one order in `eps`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixTables {
    pub diffusion: [[Quadratic; MAX_SPECIES]; MAX_SPECIES],
    /// `drift[i][j][s]` multiplies `V_s'(x)` in `F_ij`.
    pub drift: [[[Quadratic; MAX_SPECIES]; MAX_SPECIES]; MAX_SPECIES],
}

#[derive(Debug, Clone, PartialEq)]
struct Tables {
    base: MatrixTables,
    first: MatrixTables,
    second: MatrixTables,
    /// `base + eps first + eps^2 second` at the model's epsilon.
    full: MatrixTables,
}

/// Dense `m x m` matrix over species, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesMatrix {
    m: usize,
    data: [[f64; MAX_SPECIES]; MAX_SPECIES],
}

impl SpeciesMatrix {
    pub fn zeros(m: usize) -> Self {
        assert!(m <= MAX_SPECIES);
        Self { m, data: [[0.0; MAX_SPECIES]; MAX_SPECIES] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut out = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            out.data[i][..r.len()].copy_from_slice(r);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn sub(&self, other: &SpeciesMatrix) -> SpeciesMatrix {
        assert_eq!(self.m, other.m);
        let mut out = *self;
        for i in 0..self.m {
            for j in 0..self.m {
                out.data[i][j] -= other.data[i][j];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..self.m {
            for j in 0..self.m {
                acc = acc.max(self.data[i][j].abs());
            }
        }
        acc
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.m).all(|i| (0..self.m).all(|j| i == j || self.data[i][j] == 0.0))
    }

    /// Determinant of the 2 x 2 case.
    pub fn det2(&self) -> f64 {
        assert_eq!(self.m, 2);
        self.data[0][0] * self.data[1][1] - self.data[0][1] * self.data[1][0]
    }
}

impl Index<(usize, usize)> for SpeciesMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.m && j < self.m);
        &self.data[i][j]
    }
}

impl IndexMut<(usize, usize)> for SpeciesMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.m && j < self.m);
        &mut self.data[i][j]
    }
}

/// A complete, immutable model: family, parameters, potentials and the
/// compiled matrix tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    family: Family,
    params: PhysicalParams,
    coeffs: Option<Coefficients>,
    potentials: Vec<Potential>,
    tables: Box<Tables>,
}

impl ModelSpec {
    pub fn new(family: Family, params: PhysicalParams, potentials: Vec<Potential>) -> Result<Self> {
        params.validate()?;
        let m = params.species();
        if potentials.len() != m {
            return Err(Error::InvalidParams(alloc::format!("{} potentials given for {m} species", potentials.len())));
        }
        if family != Family::Reference && m != 2 {
            return Err(Error::InvalidParams(alloc::format!(
                "the {family} family is defined for two species, got {m}"
            )));
        }
        let coeffs = if m == 2 { Some(derive_coefficients(&params)?) } else { None };
        let tables = Box::new(build_tables(family, &params, coeffs.as_ref()));
        Ok(Self { family, params, coeffs, potentials, tables })
    }

    /// Decoupled linear model `d_t u_i = d_x(D_i d_x u_i + V_i' u_i)`.
    pub fn reference(diffusivity: &[f64], potentials: Vec<Potential>) -> Result<Self> {
        Self::new(Family::Reference, PhysicalParams::decoupled(diffusivity), potentials)
    }

    /// Same model with a different occupied volume fraction.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.epsilon = epsilon;
        Self::new(self.family, params, self.potentials.clone())
    }

    /// Same physical data, different family.
    pub fn with_family(&self, family: Family) -> Result<Self> {
        Self::new(family, self.params.clone(), self.potentials.clone())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn coeffs(&self) -> Option<&Coefficients> {
        self.coeffs.as_ref()
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn species(&self) -> usize {
        self.params.species()
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    /// Epsilon that actually enters the matrices (zero for the reference family).
    pub fn effective_epsilon(&self) -> f64 {
        if self.family == Family::Reference {
            0.0
        } else {
            self.params.epsilon
        }
    }

    pub fn base_tables(&self) -> &MatrixTables {
        &self.tables.base
    }

    pub fn first_order_tables(&self) -> &MatrixTables {
        &self.tables.first
    }

    pub fn second_order_tables(&self) -> &MatrixTables {
        &self.tables.second
    }

    /// `V_s'(x)` for every species.
    pub fn potential_slopes(&self, x: f64) -> [f64; MAX_SPECIES] {
        let mut out = [0.0; MAX_SPECIES];
        for (s, v) in self.potentials.iter().enumerate() {
            out[s] = v.derivative(x);
        }
        out
    }

    /// Diffusion matrix `D(x, u)` and drift matrix `F(x, u)`.
    pub fn eval_matrices(&self, x: f64, u: &[f64]) -> (SpeciesMatrix, SpeciesMatrix) {
        self.matrices_with_slopes(&self.potential_slopes(x), u)
    }

    /// As [`eval_matrices`](Self::eval_matrices) with precomputed potential slopes.
    pub fn matrices_with_slopes(&self, slopes: &[f64; MAX_SPECIES], u: &[f64]) -> (SpeciesMatrix, SpeciesMatrix) {
        let m = self.species();
        debug_assert_eq!(u.len(), m);
        let full = &self.tables.full;
        let mut dmat = SpeciesMatrix::zeros(m);
        let mut fmat = SpeciesMatrix::zeros(m);
        for i in 0..m {
            for j in 0..m {
                dmat.data[i][j] = full.diffusion[i][j].eval(u);
                let mut f = 0.0;
                for s in 0..m {
                    if slopes[s] != 0.0 {
                        f += slopes[s] * full.drift[i][j][s].eval(u);
                    }
                }
                fmat.data[i][j] = f;
            }
        }
        (dmat, fmat)
    }

    /// Partial derivatives `dD/du_k` and `dF/du_k` for each `k`.
    pub fn matrix_partials(
        &self,
        slopes: &[f64; MAX_SPECIES],
        u: &[f64],
    ) -> ([SpeciesMatrix; MAX_SPECIES], [SpeciesMatrix; MAX_SPECIES]) {
        let m = self.species();
        let full = &self.tables.full;
        let mut dd = [SpeciesMatrix::zeros(m); MAX_SPECIES];
        let mut df = [SpeciesMatrix::zeros(m); MAX_SPECIES];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    dd[k].data[i][j] = full.diffusion[i][j].partial(u, k);
                    let mut f = 0.0;
                    for s in 0..m {
                        if slopes[s] != 0.0 {
                            f += slopes[s] * full.drift[i][j][s].partial(u, k);
                        }
                    }
                    df[k].data[i][j] = f;
                }
            }
        }
        (dd, df)
    }

    /// Mobility matrix of the gradient-flow formulation (diagnostic only).
    pub fn mobility(&self, u: &[f64]) -> Result<SpeciesMatrix> {
        let c = self.require_two_species()?;
        let eps = self.effective_epsilon();
        let d = &self.params.diffusivity;
        let (u1, u2) = (u[0], u[1]);
        Ok(SpeciesMatrix::from_rows(&[
            &[d[0] * u1 * (1.0 - eps * c.c[0] * u2), d[0] * c.c[1] * eps * u1 * u2],
            &[d[1] * c.c[0] * eps * u1 * u2, d[1] * u2 * (1.0 - eps * c.c[1] * u1)],
        ]))
    }

    fn require_two_species(&self) -> Result<&Coefficients> {
        self.coeffs.as_ref().ok_or_else(|| Error::InvalidParams("operation needs a two-species model".into()))
    }
}

fn build_tables(family: Family, params: &PhysicalParams, coeffs: Option<&Coefficients>) -> Tables {
    let m = params.species();
    let d = &params.diffusivity;
    let mut base = MatrixTables::default();
    for i in 0..m {
        base.diffusion[i][i].constant = d[i];
        base.drift[i][i][i].constant = -1.0;
    }
    let mut first = MatrixTables::default();
    let mut second = MatrixTables::default();
    let n = &params.n_frac;
    match family {
        Family::Reference => {}
        Family::Lattice => {
            // D = [[D1(1 - e N2 u2), e D1 N2 u1], [e D2 N1 u2, D2(1 - e N1 u1)]]
            first.diffusion[0][0].linear[1] = -d[0] * n[1];
            first.diffusion[0][1].linear[0] = d[0] * n[1];
            first.diffusion[1][0].linear[1] = d[1] * n[0];
            first.diffusion[1][1].linear[0] = -d[1] * n[0];
            // F = [[-V1'(1 - e N1 u1), e N2 u1 V1'], [e N1 u2 V2', -V2'(1 - e N2 u2)]]
            first.drift[0][0][0].linear[0] = n[0];
            first.drift[0][1][0].linear[0] = n[1];
            first.drift[1][0][1].linear[1] = n[0];
            first.drift[1][1][1].linear[1] = n[1];
        }
        Family::HardSphere | Family::GradFlow => {
            let c = coeffs.expect("two-species coefficients");
            first.diffusion[0][0].linear[0] = d[0] * c.a[0];
            first.diffusion[0][0].linear[1] = -d[0] * c.c[0];
            first.diffusion[0][1].linear[0] = d[0] * c.b[0];
            first.diffusion[1][0].linear[1] = d[1] * c.b[1];
            first.diffusion[1][1].linear[0] = -d[1] * c.c[1];
            first.diffusion[1][1].linear[1] = d[1] * c.a[1];
            // F_12 = e c1 (V1' - V2') u1,  F_21 = e c2 (V2' - V1') u2
            first.drift[0][1][0].linear[0] = c.c[0];
            first.drift[0][1][1].linear[0] = -c.c[0];
            first.drift[1][0][1].linear[1] = c.c[1];
            first.drift[1][0][0].linear[1] = -c.c[1];
            if family == Family::GradFlow {
                // e^2 u1 u2 [[-D1 t1, D1 t2], [D2 t1, -D2 t2]]
                second.diffusion[0][0].quadratic[0][1] = -d[0] * c.theta1;
                second.diffusion[0][1].quadratic[0][1] = d[0] * c.theta2;
                second.diffusion[1][0].quadratic[0][1] = d[1] * c.theta1;
                second.diffusion[1][1].quadratic[0][1] = -d[1] * c.theta2;
            }
        }
    }
    let eps = if family == Family::Reference { 0.0 } else { params.epsilon };
    let mut full = base.clone();
    for i in 0..m {
        for j in 0..m {
            full.diffusion[i][j].axpy(eps, &first.diffusion[i][j]);
            full.diffusion[i][j].axpy(eps * eps, &second.diffusion[i][j]);
            for s in 0..m {
                full.drift[i][j][s].axpy(eps, &first.drift[i][j][s]);
                full.drift[i][j][s].axpy(eps * eps, &second.drift[i][j][s]);
            }
        }
    }
    Tables { base, first, second, full }
}

/// Entrywise `model_a - model_b` of the diffusion and drift matrices at `(x, u)`.
pub fn model_difference(
    model_a: &ModelSpec,
    model_b: &ModelSpec,
    x: f64,
    u: &[f64],
) -> Result<(SpeciesMatrix, SpeciesMatrix)> {
    if model_a.species() != model_b.species() {
        return Err(Error::Mismatch(alloc::format!(
            "models have {} and {} species",
            model_a.species(),
            model_b.species()
        )));
    }
    if model_a.potentials() != model_b.potentials() {
        return Err(Error::Mismatch("models use different potentials".into()));
    }
    let (da, fa) = model_a.eval_matrices(x, u);
    let (db, fb) = model_b.eval_matrices(x, u);
    Ok((da.sub(&db), fa.sub(&fb)))
}

/// Free energy `int sum_i [u_i log u_i + u_i V_i / D_i] + eps/2 (a1 u1^2 + 2 a12 u1 u2 + a2 u2^2)`,
/// by the midpoint rule.
pub fn entropy(model: &ModelSpec, state: &StateField) -> Result<f64> {
    let m = model.species();
    if state.species() != m {
        return Err(Error::Mismatch(alloc::format!("state has {} species, model has {m}", state.species())));
    }
    let grid = state.grid();
    let eps = model.effective_epsilon();
    let d = &model.params().diffusivity;
    let coeffs = model.coeffs();
    let mut total = 0.0;
    for n in 0..grid.cells() {
        let x = grid.midpoint(n);
        let mut integrand = 0.0;
        for i in 0..m {
            let u = state.get(i, n);
            if !(u > 0.0) {
                return Err(Error::NonPositiveDensity { species: i, cell: n, value: u });
            }
            integrand += u * math::ln(u) + u * model.potentials()[i].value(x) / d[i];
        }
        if let (Some(c), true) = (coeffs, eps != 0.0) {
            let (u1, u2) = (state.get(0, n), state.get(1, n));
            integrand += 0.5 * eps * (c.a[0] * u1 * u1 + 2.0 * c.a12 * u1 * u2 + c.a[1] * u2 * u2);
        }
        total += integrand;
    }
    Ok(total * grid.dx())
}
