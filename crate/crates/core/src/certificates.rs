//! A priori constants: Lipschitz envelopes of the perturbation, the
//! `K`-functions and the admissible-epsilon function `eps0`, the parabolic
//! regularity constants `C1..C5`, `C_T` / `C_inf`, and the stability
//! prefactors `Gamma1`, `Gamma2`.
//!
//! Embedding and regularity constants of the domain are not computed; they are
//! inputs with unit defaults.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::models::{MatrixTables, ModelSpec, MAX_SPECIES};

/// `L0(R) = kappa0 R`, `L1(R) = kappa1`, `L2(R) = kappa2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LipschitzEnvelope {
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl LipschitzEnvelope {
    pub const ZERO: LipschitzEnvelope = LipschitzEnvelope { kappa0: 0.0, kappa1: 0.0, kappa2: 0.0 };

    /// Envelope of a perturbation that is linear in `u` with slope bound `kappa`.
    pub fn linear(kappa: f64) -> Self {
        Self { kappa0: kappa, kappa1: kappa, kappa2: 0.0 }
    }

    pub fn l0(&self, r: f64) -> f64 {
        self.kappa0 * r
    }

    pub fn l1(&self, _r: f64) -> f64 {
        self.kappa1
    }

    pub fn l2(&self, _r: f64) -> f64 {
        self.kappa2
    }
}

/// Envelope of the model's perturbation matrices, from their polynomial tables.
///
/// The slope bound is the largest Euclidean norm of the linear coefficients of
/// any diffusion or drift entry. Models with quadratic entries need explicit
/// envelopes.
pub fn lipschitz_envelopes(model: &ModelSpec) -> Result<LipschitzEnvelope> {
    let m = model.species();
    let first = model.first_order_tables();
    let second = model.second_order_tables();
    let mut kappa = 0.0f64;
    let mut nonlinear = false;
    let mut visit = |tables: &MatrixTables, order: usize| {
        for i in 0..m {
            for j in 0..m {
                let mut entries = Vec::with_capacity(MAX_SPECIES + 1);
                entries.push(&tables.diffusion[i][j]);
                entries.extend(tables.drift[i][j][..m].iter());
                for e in entries {
                    if order == 1 {
                        kappa = kappa.max(e.linear_norm());
                        nonlinear |= e.has_quadratic_terms();
                    } else {
                        nonlinear |= e.linear_norm() != 0.0 || e.has_quadratic_terms();
                    }
                }
            }
        }
    };
    visit(first, 1);
    visit(second, 2);
    if nonlinear {
        return Err(Error::NeedsExplicitEnvelope);
    }
    Ok(LipschitzEnvelope::linear(kappa))
}

/// Bounds and embedding constants entering the ledger. Defaults are 1, with
/// finite horizon `T = 1`, `|Omega| = 1`, and hypothesis (H) off.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsInput {
    /// Bound on the perturbation coefficients and their derivatives.
    pub m_bound: f64,
    /// Ellipticity constant of the reference diffusion.
    pub lambda: f64,
    pub c_s_inf: f64,
    pub c_s1: f64,
    pub c_s2: f64,
    pub c_s: f64,
    /// Poincare-Wirtinger constant.
    pub c_p: f64,
    pub m_omega: f64,
    pub m_a: f64,
    pub m_b: f64,
    pub m_t: f64,
    pub m_v: f64,
    pub m_v1: f64,
    pub m_v2: f64,
    /// Elliptic regularity constant `C(Omega, M_A, lambda)`.
    pub elliptic_reg: f64,
    pub horizon: f64,
    pub domain_length: f64,
    /// Time-independent diffusion with potential drift: the constants do not depend on `T`.
    pub time_independent: bool,
}

impl Default for ConstantsInput {
    fn default() -> Self {
        Self {
            m_bound: 1.0,
            lambda: 1.0,
            c_s_inf: 1.0,
            c_s1: 1.0,
            c_s2: 1.0,
            c_s: 1.0,
            c_p: 1.0,
            m_omega: 1.0,
            m_a: 1.0,
            m_b: 1.0,
            m_t: 1.0,
            m_v: 1.0,
            m_v1: 1.0,
            m_v2: 1.0,
            elliptic_reg: 1.0,
            horizon: 1.0,
            domain_length: 1.0,
            time_independent: false,
        }
    }
}

impl ConstantsInput {
    /// Input for the time-independent route: `M_B = M_T = 0`, (H) on.
    pub fn time_independent() -> Self {
        Self { m_b: 0.0, m_t: 0.0, time_independent: true, ..Self::default() }
    }

    /// Sets `C_S = C_S^1 + C_S^2`.
    pub fn with_summed_embedding(mut self) -> Self {
        self.c_s = self.c_s1 + self.c_s2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("M", self.m_bound),
            ("C_S_inf", self.c_s_inf),
            ("C_S1", self.c_s1),
            ("C_S2", self.c_s2),
            ("C_S", self.c_s),
            ("C_P", self.c_p),
            ("M_omega", self.m_omega),
            ("M_A", self.m_a),
            ("M_B", self.m_b),
            ("M_T", self.m_t),
            ("M_V", self.m_v),
            ("M_V'", self.m_v1),
            ("M_V''", self.m_v2),
            ("C_reg", self.elliptic_reg),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams(alloc::format!("{name} = {v} must be finite and non-negative")));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams("lambda must be positive".into()));
        }
        if !(self.domain_length > 0.0) || !self.domain_length.is_finite() {
            return Err(Error::InvalidParams("domain length must be positive".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        if self.horizon.is_infinite() && !self.time_independent {
            return Err(Error::InvalidParams("an infinite horizon needs the time-independent hypothesis".into()));
        }
        if self.time_independent && (self.m_b != 0.0 || self.m_t != 0.0) {
            return Err(Error::InvalidParams(
                "time-independent hypothesis requires M_B = M_T = 0 (no time-dependent inputs)".into(),
            ));
        }
        Ok(())
    }
}

/// `K0`, `K1`, `K2` and `eps0` as functions of the radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KFunctions {
    pub envelope: LipschitzEnvelope,
    pub m_bound: f64,
    pub c_s_inf: f64,
    pub c_s2: f64,
    pub c_s: f64,
    /// `C_T` or `C_inf`.
    pub c_time: f64,
}

impl KFunctions {
    pub fn k0(&self, r: f64) -> f64 {
        let e = &self.envelope;
        let rs = self.c_s_inf * r;
        self.m_bound * (5.0 * e.l0(rs) + 2.0 * self.c_s2 * e.l1(rs) * r)
    }

    pub fn k1(&self, r: f64) -> f64 {
        let e = &self.envelope;
        self.c_s * self.m_bound * (e.l1(r) * r + e.l2(r) * r * r)
    }

    pub fn k2(&self, r: f64) -> f64 {
        let e = &self.envelope;
        let lip = e.l0(r) + e.l1(r) * r;
        6.0 * r * self.c_time * self.c_s * lip.max(self.m_bound * (1.0 + r))
    }

    pub fn epsilon0(&self, r: f64) -> f64 {
        (1.0 / (2.0 + 2.0 * self.k0(r))).min(1.0 / (1.0 + self.k1(r)))
    }
}

pub fn k_and_epsilon0(envelope: LipschitzEnvelope, input: &ConstantsInput, c_time: f64) -> KFunctions {
    KFunctions { envelope, m_bound: input.m_bound, c_s_inf: input.c_s_inf, c_s2: input.c_s2, c_s: input.c_s, c_time }
}

/// Regularity constants of the linear problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicConstants {
    /// Absent in the time-independent route, where it would bring in `sqrt(T)`.
    pub c1: Option<f64>,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `C_T`, or for the time-independent route the transformed-problem constant
    /// built from `C5`. The literature names this constant both `C~` and `C~'`;
    /// both refer to this value.
    pub c_tilde: f64,
    /// `C_T` or `C_inf`.
    pub c_time: f64,
    pub time_independent: bool,
}

pub fn parabolic_constants(input: &ConstantsInput) -> Result<ParabolicConstants> {
    input.validate()?;
    if input.time_independent {
        Ok(time_independent_constants(input))
    } else {
        Ok(finite_horizon_constants(input))
    }
}

// Reads only T-free inputs; the horizon never enters.
fn time_independent_constants(input: &ConstantsInput) -> ParabolicConstants {
    let root_w = math::sqrt(input.m_omega);
    let c2 = 1.0 + root_w;
    let c3 = 0.0;
    let c4 = c2 * c2;
    let c5 = input.m_omega * input.m_a + root_w;
    let c_tilde = 2.0
        * (input.elliptic_reg * c5
            + math::sqrt(input.m_omega / input.lambda) * input.m_a
            + math::sqrt(2.0 / input.lambda));
    let weight = (1.0 + input.m_v1) * (1.0 + input.m_v1) + input.m_v2;
    let c_inf = c_tilde * weight * math::exp(input.m_v);
    ParabolicConstants { c1: None, c2, c3, c4, c5, c_tilde, c_time: c_inf, time_independent: true }
}

fn finite_horizon_constants(input: &ConstantsInput) -> ParabolicConstants {
    let t = input.horizon;
    let root_w = math::sqrt(input.m_omega);
    let c1 = math::sqrt(t) / math::sqrt(input.domain_length)
        + (input.c_p + 1.0) * math::sqrt(input.m_omega / (2.0 * input.lambda));
    let c2 = 1.0 + root_w + input.m_b * c1;
    let mt_ma = input.m_t * input.m_a;
    let c3 = 2.0 * mt_ma * (1.0 + 2.0 * mt_ma) + 2.0 * input.m_b * input.m_b * input.m_omega;
    let c4 = (2.0 * c3 + 1.0) * c2 * c2 + input.m_b * input.m_b * c1 * c1;
    let growth = (input.m_t * c1).max(1.0);
    let c5 = input.m_omega * (input.m_a + input.m_b)
        + root_w * growth * math::exp(core::f64::consts::SQRT_2 * input.m_omega * input.m_b * t);
    let c_t = 2.0
        * (input.elliptic_reg * (c5 + input.m_b * c1)
            + math::sqrt(input.m_omega / input.lambda) * (input.m_a + input.m_b)
            + math::sqrt(2.0 / input.lambda) * growth);
    ParabolicConstants { c1: Some(c1), c2, c3, c4, c5, c_tilde: c_t, c_time: c_t, time_independent: false }
}

/// Full ledger for one envelope and one input set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsLedger {
    pub input: ConstantsInput,
    pub parabolic: ParabolicConstants,
    pub k: KFunctions,
}

impl ConstantsLedger {
    pub fn new(envelope: LipschitzEnvelope, input: ConstantsInput) -> Result<Self> {
        let parabolic = parabolic_constants(&input)?;
        let k = k_and_epsilon0(envelope, &input, parabolic.c_time);
        Ok(Self { input, parabolic, k })
    }

    /// Name/value rows: the scalar constants and the `R`-dependent functions at `radius`.
    pub fn rows(&self, radius: f64) -> Vec<(String, f64)> {
        let p = &self.parabolic;
        let e = &self.k.envelope;
        let mut rows: Vec<(String, f64)> = Vec::new();
        let mut push = |name: &str, v: f64| rows.push((name.into(), v));
        push("kappa0", e.kappa0);
        push("kappa1", e.kappa1);
        push("kappa2", e.kappa2);
        if let Some(c1) = p.c1 {
            push("C1", c1);
        }
        push("C2", p.c2);
        push("C3", p.c3);
        push("C4", p.c4);
        push("C5", p.c5);
        if p.time_independent {
            push("C_tilde", p.c_tilde);
            push("C_inf", p.c_time);
        } else {
            push("C_T", p.c_time);
        }
        push("R", radius);
        push("K0(R)", self.k.k0(radius));
        push("K1(R)", self.k.k1(radius));
        push("K2(R)", self.k.k2(radius));
        push("eps0(R)", self.k.epsilon0(radius));
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityGammas {
    pub y0: f64,
    pub y1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `eps0(Y1)`: the admissible perturbation size for this pair of data.
    pub epsilon0: f64,
}

/// Prefactors of the continuous-dependence estimate for initial data with
/// `H^2` norms `norm_u0` and `norm_u0_tilde`.
pub fn stability_gammas(k: &KFunctions, norm_u0: f64, norm_u0_tilde: f64) -> StabilityGammas {
    let y0 = k.c_time * norm_u0;
    let y1 = k.c_time * norm_u0.max(norm_u0_tilde);
    let lift = 1.0 + k.k1(y1);
    StabilityGammas { y0, y1, gamma1: lift * k.c_time, gamma2: lift * k.k2(y1), epsilon0: k.epsilon0(y1) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Family, PhysicalParams};
    use crate::potential::Potential;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn unit_k() -> KFunctions {
        k_and_epsilon0(LipschitzEnvelope::linear(1.0), &ConstantsInput::default(), 1.0)
    }

    #[test]
    fn envelopes_of_catalog_models() {
        let reference = ModelSpec::reference(&[1.0, 1.0], vec![Potential::Zero; 2]).unwrap();
        assert_eq!(lipschitz_envelopes(&reference).unwrap(), LipschitzEnvelope::ZERO);
        let hs = ModelSpec::new(
            Family::HardSphere,
            PhysicalParams::two_species([1.0, 1.0], 0.25),
            vec![Potential::standard_well(), Potential::Zero],
        )
        .unwrap();
        let env = lipschitz_envelopes(&hs).unwrap();
        assert!((env.kappa0 - 3.0 * PI / 4.0).abs() < 1e-14);
        assert_eq!(env.kappa0, env.kappa1);
        assert_eq!(env.kappa2, 0.0);
        // symmetric gradflow has no second-order part
        assert_eq!(lipschitz_envelopes(&hs.with_family(Family::GradFlow).unwrap()).unwrap(), env);
    }

    #[test]
    fn doubling_diffusivities_doubles_kappa() {
        let make = |d: f64| {
            ModelSpec::new(Family::Lattice, PhysicalParams::two_species([d, d], 0.1), vec![Potential::Zero; 2]).unwrap()
        };
        let k1 = lipschitz_envelopes(&make(1.0)).unwrap().kappa0;
        let k2 = lipschitz_envelopes(&make(2.0)).unwrap().kappa0;
        assert!((k2 - 2.0 * k1).abs() < 1e-14);
    }

    #[test]
    fn quadratic_entries_need_explicit_envelopes() {
        let gf =
            ModelSpec::new(Family::GradFlow, PhysicalParams::two_species([1.5, 1.0], 0.1), vec![Potential::Zero; 2])
                .unwrap();
        assert_eq!(lipschitz_envelopes(&gf), Err(Error::NeedsExplicitEnvelope));
    }

    #[test]
    fn zero_envelope_gives_half() {
        let k = k_and_epsilon0(LipschitzEnvelope::ZERO, &ConstantsInput::default(), 3.0);
        for r in [0.0, 1.0, 10.0] {
            assert_eq!(k.k0(r), 0.0);
            assert_eq!(k.k1(r), 0.0);
            assert_eq!(k.epsilon0(r), 0.5);
        }
    }

    #[test]
    fn unit_inputs_give_closed_forms() {
        let k = unit_k();
        for r in [0.1, 0.5, 1.0, 4.0] {
            assert!((k.k0(r) - 7.0 * r).abs() < 1e-14);
            assert!((k.k1(r) - r).abs() < 1e-14);
            assert!((k.epsilon0(r) - 1.0 / (2.0 + 14.0 * r)).abs() < 1e-15);
        }
        assert!((k.epsilon0(1.0) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn time_independent_specialization() {
        let p = parabolic_constants(&ConstantsInput { m_omega: 2.0, ..ConstantsInput::time_independent() }).unwrap();
        assert_eq!(p.c3, 0.0);
        assert_eq!(p.c2, 1.0 + math::sqrt(2.0));
        assert_eq!(p.c4, p.c2 * p.c2);
        assert_eq!(p.c1, None);
        // the finite-horizon route with M_B = M_T = 0 reproduces C2 and C3 too
        let f =
            parabolic_constants(&ConstantsInput { m_b: 0.0, m_t: 0.0, m_omega: 2.0, ..Default::default() }).unwrap();
        assert_eq!(f.c3, 0.0);
        assert_eq!(f.c2, 1.0 + math::sqrt(2.0));
    }

    #[test]
    fn c1_closed_form() {
        let p = parabolic_constants(&ConstantsInput::default()).unwrap();
        assert!((p.c1.unwrap() - (1.0 + core::f64::consts::SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn c_inf_ignores_horizon() {
        let a = parabolic_constants(&ConstantsInput { horizon: 1.0, ..ConstantsInput::time_independent() }).unwrap();
        let b = parabolic_constants(&ConstantsInput { horizon: 1e6, ..ConstantsInput::time_independent() }).unwrap();
        let c = parabolic_constants(&ConstantsInput { horizon: f64::INFINITY, ..ConstantsInput::time_independent() })
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn zero_potential_weight_collapses() {
        let input = ConstantsInput { m_v: 0.0, m_v1: 0.0, m_v2: 0.0, ..ConstantsInput::time_independent() };
        let p = parabolic_constants(&input).unwrap();
        assert_eq!(p.c_time, p.c_tilde);
    }

    #[test]
    fn rejects_time_dependent_inputs_under_hypothesis() {
        let input = ConstantsInput { m_b: 0.5, ..ConstantsInput::time_independent() };
        assert!(parabolic_constants(&input).is_err());
        let input = ConstantsInput { horizon: f64::INFINITY, ..ConstantsInput::default() };
        assert!(parabolic_constants(&input).is_err());
    }

    #[test]
    fn gammas_at_zero_envelope() {
        let k = k_and_epsilon0(LipschitzEnvelope::ZERO, &ConstantsInput::default(), 2.5);
        let g = stability_gammas(&k, 1.0, 1.0);
        assert_eq!(g.gamma1, 2.5);
        assert_eq!(g.gamma2, k.k2(g.y1));
        assert_eq!(g.y0, g.y1);
        assert_eq!(unit_k().epsilon0(stability_gammas(&unit_k(), 1.0, 0.5).y1), 1.0 / 16.0);
    }

    #[test]
    fn ledger_rows_include_constants() {
        let ledger = ConstantsLedger::new(LipschitzEnvelope::ZERO, ConstantsInput::time_independent()).unwrap();
        let rows = ledger.rows(1.0);
        assert!(rows.iter().any(|(n, v)| n == "eps0(R)" && *v == 0.5));
        assert!(rows.iter().any(|(n, _)| n == "C_inf"));
        assert!(!rows.iter().any(|(n, _)| n == "C1"));
    }

    proptest! {
        #[test]
        fn k_functions_monotone_in_radius(kappa in 0.0f64..5.0, m in 0.1f64..5.0, r in 0.0f64..10.0, dr in 0.0f64..1.0) {
            let input = ConstantsInput { m_bound: m, ..ConstantsInput::default() };
            let k = k_and_epsilon0(LipschitzEnvelope::linear(kappa), &input, 1.7);
            prop_assert!(k.k0(r + dr) >= k.k0(r));
            prop_assert!(k.k1(r + dr) >= k.k1(r));
            prop_assert!(k.k2(r + dr) >= k.k2(r));
            prop_assert!(k.epsilon0(r + dr) <= k.epsilon0(r));
            prop_assert!(k.epsilon0(r) <= 0.5 && k.epsilon0(r) > 0.0);
        }

        #[test]
        fn ledger_monotone_in_coefficient_bound(m in 0.1f64..5.0, dm in 0.0f64..2.0, r in 0.0f64..10.0) {
            let env = LipschitzEnvelope::linear(1.3);
            let a = ConstantsLedger::new(env, ConstantsInput { m_bound: m, ..Default::default() }).unwrap();
            let b = ConstantsLedger::new(env, ConstantsInput { m_bound: m + dm, ..Default::default() }).unwrap();
            prop_assert!(b.k.k0(r) >= a.k.k0(r));
            prop_assert!(b.k.k1(r) >= a.k.k1(r));
            prop_assert!(b.k.k2(r) >= a.k.k2(r));
            let ga = stability_gammas(&a.k, 1.0, 2.0);
            let gb = stability_gammas(&b.k, 1.0, 2.0);
            prop_assert!(gb.gamma1 >= ga.gamma1 && gb.gamma2 >= ga.gamma2);
        }

        #[test]
        fn gamma1_never_below_linear_constant(kappa in 0.0f64..3.0, n0 in 0.0f64..5.0, n1 in 0.0f64..5.0) {
            let k = k_and_epsilon0(LipschitzEnvelope::linear(kappa), &ConstantsInput::default(), 2.0);
            prop_assert!(stability_gammas(&k, n0, n1).gamma1 >= k.c_time);
        }
    }
}
