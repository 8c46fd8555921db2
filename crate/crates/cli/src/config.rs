//! Experiment configuration: TOML file, command-line overrides and
//! per-experiment defaults, resolved in that order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use crossdiff_core::certificates::{ConstantsInput, LipschitzEnvelope};
use crossdiff_core::integrator::JacobianMode;
use crossdiff_core::scenarios::Profile;
use crossdiff_core::{Family, ModelSpec, PhysicalParams, Potential, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig5,
    Sweep,
    Compare,
    Picard,
    Constants,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig5 => "fig5",
            Experiment::Sweep => "sweep",
            Experiment::Compare => "compare",
            Experiment::Picard => "picard",
            Experiment::Constants => "constants",
            Experiment::Convergence => "convergence",
        }
    }
}

/// Anything wrong with the configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    NormalizedGaussian {
        center: f64,
        sharpness: f64,
    },
    Uniform {
        #[serde(default = "one")]
        level: f64,
    },
    /// Plateau of half-width `a` shifted by `b`.
    TanhPlateau {
        a: f64,
        b: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    fn profile(&self) -> Profile {
        match *self {
            InitialData::NormalizedGaussian { center, sharpness } => Profile::NormalizedGaussian { center, sharpness },
            InitialData::Uniform { level } => Profile::Uniform { level },
            InitialData::TanhPlateau { a, b } => Profile::TanhPlateau { half_width: a, shift: b },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialDef {
    Zero,
    /// `amplitude (1 - exp(-sharpness (x - center)^2))`.
    Well {
        #[serde(default = "one")]
        amplitude: f64,
        sharpness: f64,
        #[serde(default)]
        center: f64,
    },
    Tabulated {
        x: Vec<f64>,
        v: Vec<f64>,
    },
}

impl PotentialDef {
    fn build(&self) -> Result<Potential, ConfigError> {
        Ok(match self {
            PotentialDef::Zero => Potential::Zero,
            PotentialDef::Well { amplitude, sharpness, center } => {
                Potential::GaussianWell { amplitude: *amplitude, sharpness: *sharpness, center: *center }
            }
            PotentialDef::Tabulated { x, v } => {
                Potential::tabulated(x.clone(), v.clone()).map_err(|e| bad(format!("tabulated potential: {e}")))?
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_steps: Option<usize>,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub newton_tol: Option<f64>,
    /// `analytic` or `finite-difference`.
    pub jacobian: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub radius: Option<f64>,
    /// Explicit linear envelope slope; required for models with quadratic terms.
    pub kappa: Option<f64>,
    pub norm_u0: Option<f64>,
    pub norm_u0_tilde: Option<f64>,
    pub m_bound: Option<f64>,
    pub lambda: Option<f64>,
    pub c_s_inf: Option<f64>,
    pub c_s1: Option<f64>,
    pub c_s2: Option<f64>,
    pub c_s: Option<f64>,
    pub c_p: Option<f64>,
    pub m_omega: Option<f64>,
    pub m_a: Option<f64>,
    pub m_b: Option<f64>,
    pub m_t: Option<f64>,
    pub m_v: Option<f64>,
    pub m_v1: Option<f64>,
    pub m_v2: Option<f64>,
    pub elliptic_reg: Option<f64>,
    pub domain_length: Option<f64>,
    pub time_independent: Option<bool>,
}

/// Contents of a configuration file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<Experiment>,
    pub family: Option<String>,
    pub families: Option<Vec<String>>,
    pub dim: Option<u32>,
    pub n_frac: Option<Vec<f64>>,
    pub size_frac: Option<Vec<f64>>,
    pub diffusivity: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub cells: Option<usize>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
    pub refinements: Option<Vec<usize>>,
    pub u_star: Option<f64>,
    pub initial: Option<Vec<InitialData>>,
    pub potentials: Option<Vec<PotentialDef>>,
    pub svg: Option<bool>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub solver: Option<SolverSection>,
    pub picard: Option<PicardSection>,
    pub constants: Option<ConstantsSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| bad(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<Vec<f64>>,
    pub cells: Option<usize>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Fully resolved configuration, recorded verbatim in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: Experiment,
    pub families: Vec<String>,
    pub dim: u32,
    pub n_frac: Vec<f64>,
    pub size_frac: Vec<f64>,
    pub diffusivity: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub cells: usize,
    pub horizon: f64,
    pub samples: usize,
    pub refinements: Vec<usize>,
    pub u_star: f64,
    pub initial: Vec<InitialData>,
    pub potentials: Vec<PotentialDef>,
    pub svg: bool,
    pub out: PathBuf,
    pub jobs: usize,
    pub solver: SolverSection,
    pub picard: PicardSection,
    pub constants: ConstantsSection,
}

fn well() -> PotentialDef {
    PotentialDef::Well { amplitude: 1.0, sharpness: 120.0, center: 0.0 }
}

fn plateau() -> Vec<InitialData> {
    vec![InitialData::TanhPlateau { a: 0.5, b: 0.05 }, InitialData::TanhPlateau { a: 0.5, b: -0.05 }]
}

fn bump() -> Vec<InitialData> {
    vec![InitialData::NormalizedGaussian { center: -0.2, sharpness: 80.0 }, InitialData::Uniform { level: 1.0 }]
}

impl Resolved {
    /// Built-in settings of each experiment before file and flags apply.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut r = Resolved {
            experiment,
            families: vec!["hardsphere".into()],
            dim: 2,
            n_frac: vec![0.5, 0.5],
            size_frac: vec![1.0, 1.0],
            diffusivity: vec![1.0, 1.0],
            epsilon: vec![0.25],
            cells: 200,
            horizon: 1.0,
            samples: 100,
            refinements: vec![50, 100, 200, 400, 800],
            u_star: 1.333,
            initial: bump(),
            potentials: vec![well(), PotentialDef::Zero],
            svg: false,
            out: PathBuf::from("results"),
            jobs: 0,
            solver: SolverSection::default(),
            picard: PicardSection { max_iters: Some(30), tol: Some(1e-4) },
            constants: ConstantsSection::default(),
        };
        match experiment {
            Experiment::Fig1 | Experiment::Constants => {
                if experiment == Experiment::Constants {
                    r.families = vec!["reference".into()];
                }
            }
            Experiment::Fig2 => r.epsilon = vec![0.0, 0.125, 0.25],
            Experiment::Fig3 => {
                r.epsilon = (0..=12).map(|k| k as f64 * 0.05).map(|e| (e * 100.0).round() / 100.0).collect();
                r.cells = 500;
                r.horizon = 0.1;
                r.initial = plateau();
                r.potentials = vec![PotentialDef::Zero, PotentialDef::Zero];
            }
            Experiment::Fig5 | Experiment::Compare => {
                r.families = vec!["lattice".into(), "hardsphere".into(), "gradflow".into()];
                r.epsilon = vec![0.025, 0.05, 0.1, 0.2];
                r.diffusivity = vec![1.5, 1.0];
                r.initial = plateau();
            }
            Experiment::Sweep => r.epsilon = vec![0.0, 0.05, 0.1, 0.2, 0.3],
            Experiment::Picard => {
                r.epsilon = vec![0.05, 0.1, 0.2];
                r.cells = 100;
                r.horizon = 0.1;
                r.samples = 1000;
            }
            Experiment::Convergence => {
                // the default bump stays elliptic here; larger couplings roughen under refinement
                r.epsilon = vec![0.1];
                r.horizon = 0.1;
                r.samples = 10;
            }
        }
        r
    }

    /// Applies defaults, then `file`, then `flags`. `env_out` is the output
    /// root used when neither the file nor the flags name one.
    pub fn resolve(
        experiment: Experiment,
        file: FileConfig,
        flags: Overrides,
        env_out: Option<PathBuf>,
    ) -> Result<Self, ConfigError> {
        if let Some(e) = file.experiment {
            if e != experiment {
                return Err(bad(format!(
                    "file is for experiment {}, command line asks for {}",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        let mut r = Self::defaults(experiment);
        if let Some(o) = env_out {
            r.out = o;
        }
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = file.$field { r.$field = v; })* };
        }
        take!(
            dim,
            n_frac,
            size_frac,
            diffusivity,
            epsilon,
            cells,
            horizon,
            samples,
            refinements,
            u_star,
            initial,
            potentials,
            svg,
            out,
            jobs
        );
        if let Some(f) = file.family {
            r.families = vec![f];
        }
        if let Some(f) = file.families {
            r.families = f;
        }
        if let Some(s) = file.solver {
            r.solver = s;
        }
        if let Some(p) = file.picard {
            r.picard = PicardSection { max_iters: p.max_iters.or(r.picard.max_iters), tol: p.tol.or(r.picard.tol) };
        }
        if let Some(c) = file.constants {
            r.constants = c;
        }
        let Overrides { epsilon, cells, horizon, samples, out, jobs } = flags;
        if let Some(v) = epsilon {
            r.epsilon = v;
        }
        if let Some(v) = cells {
            r.cells = v;
        }
        if let Some(v) = horizon {
            r.horizon = v;
        }
        if let Some(v) = samples {
            r.samples = v;
        }
        if let Some(v) = out {
            r.out = v;
        }
        if let Some(v) = jobs {
            r.jobs = v;
        }
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.epsilon.is_empty() {
            return Err(bad("epsilon list is empty"));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(bad(format!("epsilon {e} must be finite and non-negative")));
        }
        if self.cells < 2 {
            return Err(bad("cells must be at least 2"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(bad("horizon must be positive"));
        }
        if self.samples == 0 {
            return Err(bad("samples must be at least 1"));
        }
        if self.families.is_empty() {
            return Err(bad("no model family given"));
        }
        for f in &self.families {
            self.family(f)?;
        }
        if matches!(self.experiment, Experiment::Fig5 | Experiment::Compare) && self.families.len() < 2 {
            return Err(bad("comparisons need at least two families"));
        }
        if self.experiment == Experiment::Convergence && self.refinements.len() < 3 {
            return Err(bad("convergence needs at least three refinement levels"));
        }
        if self.refinements.iter().any(|j| *j < 2) {
            return Err(bad("refinement levels need at least 2 cells"));
        }
        let m = self.diffusivity.len();
        if self.initial.len() != m || self.potentials.len() != m {
            return Err(bad(format!(
                "{m} species but {} initial profiles and {} potentials",
                self.initial.len(),
                self.potentials.len()
            )));
        }
        if !(self.u_star > 0.0) {
            return Err(bad("u_star must be positive"));
        }
        self.solver_options()?;
        let tol = self.picard.tol.unwrap_or(1e-4);
        if !(tol > 0.0) || self.picard.max_iters == Some(0) {
            return Err(bad("picard needs a positive tolerance and at least one iteration"));
        }
        // build every model once so physical parameters are checked up front
        for f in &self.families {
            for e in &self.epsilon {
                self.model(self.family(f)?, *e)?;
            }
        }
        if self.experiment == Experiment::Constants {
            self.constants_input()?;
        }
        Ok(())
    }

    pub fn family(&self, name: &str) -> Result<Family, ConfigError> {
        Family::from_name(name)
            .ok_or_else(|| bad(format!("unknown family {name:?}; expected reference, lattice, hardsphere or gradflow")))
    }

    pub fn params(&self, epsilon: f64) -> PhysicalParams {
        PhysicalParams {
            dim: self.dim,
            n_frac: self.n_frac.clone(),
            size_frac: self.size_frac.clone(),
            diffusivity: self.diffusivity.clone(),
            epsilon,
        }
    }

    pub fn model(&self, family: Family, epsilon: f64) -> Result<ModelSpec, ConfigError> {
        let potentials = self.potentials.iter().map(PotentialDef::build).collect::<Result<Vec<_>, _>>()?;
        ModelSpec::new(family, self.params(epsilon), potentials).map_err(|e| bad(e.to_string()))
    }

    pub fn profiles(&self) -> Vec<Profile> {
        self.initial.iter().map(InitialData::profile).collect()
    }

    pub fn solver_options(&self) -> Result<SolverOptions, ConfigError> {
        let s = &self.solver;
        let d = SolverOptions::default();
        let jacobian = match s.jacobian.as_deref() {
            None => d.jacobian,
            Some("analytic") => JacobianMode::Analytic,
            Some("finite-difference") => JacobianMode::FiniteDifference,
            Some(other) => return Err(bad(format!("jacobian must be analytic or finite-difference, got {other:?}"))),
        };
        let opts = SolverOptions {
            rtol: s.rtol.unwrap_or(d.rtol),
            atol: s.atol.unwrap_or(d.atol),
            max_steps: s.max_steps.unwrap_or(d.max_steps),
            initial_step: s.initial_step.or(d.initial_step),
            max_step: s.max_step.or(d.max_step),
            newton_max_iter: s.newton_max_iter.unwrap_or(d.newton_max_iter),
            newton_tol: s.newton_tol.unwrap_or(d.newton_tol),
            jacobian,
        };
        opts.validate().map_err(|e| bad(e.to_string()))?;
        Ok(opts)
    }

    pub fn constants_input(&self) -> Result<ConstantsInput, ConfigError> {
        let c = &self.constants;
        let base = if c.time_independent == Some(true) {
            ConstantsInput::time_independent()
        } else {
            ConstantsInput::default()
        };
        let input = ConstantsInput {
            m_bound: c.m_bound.unwrap_or(base.m_bound),
            lambda: c.lambda.unwrap_or(base.lambda),
            c_s_inf: c.c_s_inf.unwrap_or(base.c_s_inf),
            c_s1: c.c_s1.unwrap_or(base.c_s1),
            c_s2: c.c_s2.unwrap_or(base.c_s2),
            c_s: c.c_s.unwrap_or(base.c_s),
            c_p: c.c_p.unwrap_or(base.c_p),
            m_omega: c.m_omega.unwrap_or(base.m_omega),
            m_a: c.m_a.unwrap_or(base.m_a),
            m_b: c.m_b.unwrap_or(base.m_b),
            m_t: c.m_t.unwrap_or(base.m_t),
            m_v: c.m_v.unwrap_or(base.m_v),
            m_v1: c.m_v1.unwrap_or(base.m_v1),
            m_v2: c.m_v2.unwrap_or(base.m_v2),
            elliptic_reg: c.elliptic_reg.unwrap_or(base.elliptic_reg),
            horizon: self.horizon,
            domain_length: c.domain_length.unwrap_or(base.domain_length),
            time_independent: base.time_independent,
        };
        input.validate().map_err(|e| bad(e.to_string()))?;
        Ok(input)
    }

    /// Envelope from the configured slope, or derived from the first family's tables.
    pub fn envelope(&self) -> Result<LipschitzEnvelope, ConfigError> {
        if let Some(k) = self.constants.kappa {
            if !(k >= 0.0) {
                return Err(bad("kappa must be non-negative"));
            }
            return Ok(LipschitzEnvelope::linear(k));
        }
        let model = self.model(self.family(&self.families[0])?, self.epsilon[0])?;
        crossdiff_core::certificates::lipschitz_envelopes(&model)
            .map_err(|e| bad(format!("{e}; set constants.kappa explicitly")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(exp: Experiment, text: &str, flags: Overrides) -> Result<Resolved, ConfigError> {
        Resolved::resolve(exp, FileConfig::parse(text)?, flags, None)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("celss = 10").is_err());
        assert!(FileConfig::parse("[solver]\nrtoll = 1e-3").is_err());
        assert!(FileConfig::parse("initial = [{ kind = \"uniform\", hight = 2.0 }]").is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let r = resolve(Experiment::Fig3, "cells = 120\nhorizon = 0.05", Overrides::default()).unwrap();
        assert_eq!((r.cells, r.horizon, r.samples), (120, 0.05, 100));
        let flags = Overrides { cells: Some(64), epsilon: Some(vec![0.3]), ..Default::default() };
        let r = resolve(Experiment::Fig3, "cells = 120", flags).unwrap();
        assert_eq!(r.cells, 64);
        assert_eq!(r.epsilon, vec![0.3]);
    }

    #[test]
    fn output_root_precedence() {
        let env = Some(PathBuf::from("env"));
        let r = Resolved::resolve(Experiment::Fig1, FileConfig::default(), Overrides::default(), env.clone()).unwrap();
        assert_eq!(r.out, PathBuf::from("env"));
        let file = FileConfig::parse("out = \"file\"").unwrap();
        let r = Resolved::resolve(Experiment::Fig1, file, Overrides::default(), env).unwrap();
        assert_eq!(r.out, PathBuf::from("file"));
    }

    #[test]
    fn fig3_defaults_follow_the_plateau_setup() {
        let r = Resolved::defaults(Experiment::Fig3);
        assert_eq!((r.cells, r.horizon, r.samples), (500, 0.1, 100));
        assert_eq!(r.epsilon.len(), 13);
        assert_eq!(r.epsilon[12], 0.6);
        assert_eq!(r.epsilon[9], 0.45);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(resolve(Experiment::Fig1, "family = \"smoluchowski\"", Overrides::default()).is_err());
        assert!(resolve(Experiment::Fig1, "epsilon = [-0.1]", Overrides::default()).is_err());
        assert!(resolve(Experiment::Fig1, "diffusivity = [1.0, 0.0]", Overrides::default()).is_err());
        assert!(resolve(Experiment::Fig1, "[solver]\njacobian = \"exact\"", Overrides::default()).is_err());
        assert!(resolve(Experiment::Fig5, "families = [\"lattice\"]", Overrides::default()).is_err());
        assert!(resolve(Experiment::Fig2, "experiment = \"fig3\"", Overrides::default()).is_err());
        assert!(resolve(
            Experiment::Constants,
            "family = \"gradflow\"\ndiffusivity = [1.5, 1.0]",
            Overrides::default()
        )
        .unwrap()
        .envelope()
        .is_err());
    }

    #[test]
    fn tagged_tables_parse() {
        let text = r#"
            diffusivity = [1.0, 2.0]
            initial = [{ kind = "tanh-plateau", a = 0.4, b = 0.0 }, { kind = "uniform" }]
            potentials = [{ kind = "well", sharpness = 50.0 }, { kind = "tabulated", x = [-0.5, 0.5], v = [0.0, 1.0] }]
        "#;
        let r = resolve(Experiment::Sweep, text, Overrides::default()).unwrap();
        assert_eq!(r.initial[1], InitialData::Uniform { level: 1.0 });
        assert!(r.model(Family::HardSphere, 0.1).is_ok());
    }
}
