//! Experiment specifications in TOML.
//!
//! ```toml
//! name = "example1"
//! output_dir = "out/example1"
//! end_time = 0.15
//! snapshot_every = 500          # 0 disables snapshots
//!
//! [problem]
//! kind = "curve"                # or "surface"
//! shape = "example1"
//! resolution = 64               # vertices (curves) or subdivisions (surfaces)
//!
//! [[scheme]]
//! method = "alg1"               # alg1, bgn-curve, alg2, alg3, bgn
//! alpha = 1e-3                  # or "tau"
//! tau = 1e-4
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use curvflow_core::csf::{BgnCurveConfig, CsfConfig};
use curvflow_core::fem::{Preconditioner, SolverConfig, SolverMethod};
use curvflow_core::mcf::{AlphaRule, McfConfig, McfScheme, TimeStepRule};
use curvflow_core::mesh::{
    generate_circle, generate_icosphere, generate_parametrized_curve, generate_surface_example,
    CurveShape, PolygonalCurve, SurfaceShape, TriSurface,
};

use crate::error::{Error, Result};
use crate::io::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub output_dir: PathBuf,
    /// Final time; a run also stops early at extinction.
    pub end_time: f64,
    /// Stop once the length (curves) or area (surfaces) falls below this
    /// fraction of its initial value.
    #[serde(default)]
    pub extinction_fraction: Option<f64>,
    /// Write a mesh snapshot every this many steps (0: never).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Seed for randomized inputs; unused by the deterministic runs.
    #[serde(default)]
    pub seed: u64,
    pub problem: Problem,
    #[serde(rename = "scheme")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default)]
    pub eoc: Option<EocSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Curve,
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub kind: ProblemKind,
    pub shape: String,
    pub resolution: usize,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Grading ratio of the graded circle.
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub r1: Option<f64>,
    #[serde(default)]
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "alg1")]
    Alg1,
    #[serde(rename = "bgn-curve")]
    BgnCurve,
    #[serde(rename = "alg2")]
    Alg2,
    #[serde(rename = "alg3")]
    Alg3,
    #[serde(rename = "bgn")]
    Bgn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Alg1 => "alg1",
            Method::BgnCurve => "bgn-curve",
            Method::Alg2 => "alg2",
            Method::Alg3 => "alg3",
            Method::Bgn => "bgn",
        }
    }

    pub fn kind(self) -> ProblemKind {
        match self {
            Method::Alg1 | Method::BgnCurve => ProblemKind::Curve,
            _ => ProblemKind::Surface,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    /// Only `"tau"` is accepted.
    Coupled(CoupledAlpha),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoupledAlpha {
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauRule {
    #[default]
    Fixed,
    /// `τ = tau · h`.
    Linear,
    /// `τ = tau · h²`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub method: Method,
    /// Output name; defaults to `<method>_<index>`.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub alpha: Option<AlphaSpec>,
    /// Time step, or the coefficient of an adaptive rule.
    pub tau: f64,
    #[serde(default)]
    pub tau_rule: TauRule,
    #[serde(default)]
    pub damping: Option<f64>,
    #[serde(default)]
    pub fixed_point_threshold: Option<f64>,
    #[serde(default)]
    pub max_fixed_point_iterations: Option<usize>,
    #[serde(default)]
    pub solver: Option<SolverSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub method: Option<SolverName>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub preconditioner: Option<PreconditionerName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Cg,
    Bicgstab,
    DenseLu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerName {
    None,
    Jacobi,
    BlockJacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EocSpec {
    /// Circle resolutions, strictly increasing.
    pub resolutions: Vec<usize>,
    /// `c` in `τ ≤ c · h²` with `h = 2π/N`.
    pub tau_coefficient: f64,
}

/// A validated scheme with its core configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeConfig {
    Alg1(CsfConfig),
    BgnCurve(BgnCurveConfig),
    Surface(McfConfig),
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Spec(format!("{what} must be positive and finite, got {v}")))
    }
}

impl SolverSpec {
    fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(m) = self.method {
            cfg.method = match m {
                SolverName::Cg => SolverMethod::Cg,
                SolverName::Bicgstab => SolverMethod::BiCgStab,
                SolverName::DenseLu => SolverMethod::DenseLu,
            };
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        if self.max_iterations.is_some() {
            cfg.max_iterations = self.max_iterations;
        }
        if let Some(p) = self.preconditioner {
            cfg.preconditioner = match p {
                PreconditionerName::None => Preconditioner::None,
                PreconditionerName::Jacobi => Preconditioner::Jacobi,
                PreconditionerName::BlockJacobi => Preconditioner::BlockJacobi,
            };
        }
        cfg
    }
}

impl SchemeSpec {
    pub fn new(method: Method, alpha: Option<f64>, tau: f64) -> Self {
        SchemeSpec {
            method,
            label: None,
            alpha: alpha.map(AlphaSpec::Value),
            tau,
            tau_rule: TauRule::Fixed,
            damping: None,
            fixed_point_threshold: None,
            max_fixed_point_iterations: None,
            solver: None,
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.label.clone().unwrap_or_else(|| format!("{}_{index}", self.method.name()))
    }

    fn fixed_alpha(&self) -> Result<f64> {
        match self.alpha {
            Some(AlphaSpec::Value(a)) => Ok(a),
            Some(AlphaSpec::Coupled(_)) => {
                Err(Error::Spec(format!("{}: alpha = \"tau\" is only supported for surface schemes", self.method.name())))
            }
            None => Err(Error::Spec(format!("{}: alpha is required", self.method.name()))),
        }
    }

    /// Checks the parameters and builds the core configuration.
    pub fn to_config(&self) -> Result<SchemeConfig> {
        positive(self.tau, "tau")?;
        let name = self.method.name();
        if self.method != Method::BgnCurve
            && (self.damping.is_some() || self.fixed_point_threshold.is_some() || self.max_fixed_point_iterations.is_some())
        {
            return Err(Error::Spec(format!("{name}: fixed-point options only apply to bgn-curve")));
        }
        if self.method.kind() == ProblemKind::Curve && self.tau_rule != TauRule::Fixed {
            return Err(Error::Spec(format!("{name}: adaptive time steps are only supported for surfaces")));
        }
        let cfg = match self.method {
            Method::Alg1 => {
                let mut c = CsfConfig::new(self.fixed_alpha()?, self.tau);
                if let Some(s) = &self.solver {
                    c.solver = s.apply(c.solver);
                }
                SchemeConfig::Alg1(c)
            }
            Method::BgnCurve => {
                if self.alpha.is_some() {
                    return Err(Error::Spec("bgn-curve takes no alpha".into()));
                }
                let mut c = BgnCurveConfig::new(self.tau);
                if let Some(d) = self.damping {
                    c.damping = d;
                }
                if let Some(t) = self.fixed_point_threshold {
                    c.threshold = t;
                }
                if let Some(m) = self.max_fixed_point_iterations {
                    c.max_iterations = m;
                }
                if let Some(s) = &self.solver {
                    c.solver = s.apply(c.solver);
                }
                SchemeConfig::BgnCurve(c)
            }
            Method::Alg2 | Method::Alg3 | Method::Bgn => {
                let scheme = match self.method {
                    Method::Alg2 => McfScheme::Transport,
                    Method::Alg3 => McfScheme::Divergence,
                    _ => McfScheme::Bgn,
                };
                let alpha = match (self.method, self.alpha) {
                    (Method::Bgn, Some(_)) => return Err(Error::Spec("bgn takes no alpha".into())),
                    (Method::Bgn, None) => AlphaRule::Fixed(0.0),
                    (_, Some(AlphaSpec::Value(a))) => AlphaRule::Fixed(a),
                    (_, Some(AlphaSpec::Coupled(_))) => AlphaRule::EqualsTau,
                    (_, None) => return Err(Error::Spec(format!("{name}: alpha is required"))),
                };
                let mut c = McfConfig::new(scheme, 0.0, self.tau);
                c.alpha = alpha;
                c.time_step = match self.tau_rule {
                    TauRule::Fixed => TimeStepRule::Fixed(self.tau),
                    TauRule::Linear => TimeStepRule::LinearInH(self.tau),
                    TauRule::Quadratic => TimeStepRule::QuadraticInH(self.tau),
                };
                if let Some(s) = &self.solver {
                    c.solver = s.apply(c.solver);
                }
                SchemeConfig::Surface(c)
            }
        };
        match &cfg {
            SchemeConfig::Alg1(c) => c.validate(),
            SchemeConfig::BgnCurve(c) => c.validate(),
            SchemeConfig::Surface(c) => c.validate(),
        }
        .map_err(|e| Error::Spec(format!("{name}: {e}")))?;
        Ok(cfg)
    }
}

/// The initial mesh of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMesh {
    Curve(PolygonalCurve),
    Surface(TriSurface),
}

impl Problem {
    pub fn build(&self) -> Result<InitialMesh> {
        let spec_err = |e: curvflow_core::Error| Error::Spec(format!("problem: {e}"));
        match self.kind {
            ProblemKind::Curve => {
                let c = if self.shape == "circle" {
                    generate_circle(self.resolution, self.radius.unwrap_or(1.0))
                } else {
                    CurveShape::from_name(&self.shape, self.ratio)
                        .and_then(|s| generate_parametrized_curve(self.resolution, s))
                };
                Ok(InitialMesh::Curve(c.map_err(spec_err)?))
            }
            ProblemKind::Surface => {
                let k = u32::try_from(self.resolution)
                    .ok()
                    .filter(|&k| k <= 8)
                    .ok_or_else(|| Error::Spec(format!("surface subdivisions must be at most 8, got {}", self.resolution)))?;
                let s = match SurfaceShape::from_name(&self.shape, self.r1, self.r2).map_err(spec_err)? {
                    SurfaceShape::Sphere => generate_icosphere(k, self.radius.unwrap_or(1.0)),
                    shape => generate_surface_example(shape, k),
                };
                Ok(InitialMesh::Surface(s.map_err(spec_err)?))
            }
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    /// Checks everything that can be checked without running: parameters,
    /// scheme and problem compatibility, the initial mesh, and that the
    /// output directory can be written.
    pub fn validate(&self) -> Result<()> {
        self.validate_numbers()?;
        self.problem.build()?;
        check_writable(&self.output_dir)
    }

    /// [`ExperimentSpec::validate`] without touching the file system.
    pub fn validate_numbers(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Spec("name must not be empty".into()));
        }
        positive(self.end_time, "end_time")?;
        if let Some(f) = self.extinction_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Spec(format!("extinction_fraction must lie in (0, 1), got {f}")));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::Spec("at least one [[scheme]] is required".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, s) in self.schemes.iter().enumerate() {
            if s.method.kind() != self.problem.kind {
                return Err(Error::Spec(format!(
                    "scheme {i} ({}) does not apply to a {:?} problem",
                    s.method.name(),
                    self.problem.kind
                )));
            }
            let label = s.label(i);
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(Error::Spec(format!("scheme label `{label}` is not a valid file name")));
            }
            if !labels.insert(label.clone()) {
                return Err(Error::Spec(format!("duplicate scheme label `{label}`")));
            }
            s.to_config()?;
        }
        if let Some(eoc) = &self.eoc {
            if eoc.resolutions.len() < 2 {
                return Err(Error::Spec("eoc needs at least two resolutions".into()));
            }
            if eoc.resolutions.windows(2).any(|w| w[1] <= w[0]) || eoc.resolutions[0] < 3 {
                return Err(Error::Spec("eoc resolutions must be strictly increasing and at least 3".into()));
            }
            positive(eoc.tau_coefficient, "eoc.tau_coefficient")?;
        }
        Ok(())
    }
}

fn check_writable(dir: &Path) -> Result<()> {
    let unwritable = |e: std::io::Error| Error::Spec(format!("output_dir {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".curvflow-write-test");
    fs::write(&probe, b"").map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)
}
