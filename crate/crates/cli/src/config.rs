//! Run configuration: JSON in, validated core objects out.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use linf_core::characterization::{CertificationConfig, ProbeFamilyConfig, DEFAULT_T_MULTIPLIERS};
use linf_core::grid::{build_grid, read_field_csv, ClampedData, EllipticMatrix, Grid, ScalarField};
use linf_core::minimizer::{doubling_ladder, ContinuationSchedule, InnerMethod, PenaltyPolicy};
use linf_core::pde_solver::DualMode;
use linf_core::problem::Problem;
use linf_core::supremand::{
    make_additive, make_multiplicative, wrap_phi, Coefficient, Curve, SampleBox, SupremandSpec,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    /// Rows of the constant elliptic matrix `A`.
    pub matrix: Vec<Vec<f64>>,
    pub supremand: SupremandConfig,
    #[serde(default)]
    pub sample_box: Option<BoxConfig>,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub certification: CertConfig,
    #[serde(default = "default_dual_mode")]
    pub dual_mode: DualModeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupremandConfig {
    PureXi,
    Additive {
        coefficient: CoefficientConfig,
        curve: CurveConfig,
    },
    Multiplicative {
        coefficient: CoefficientConfig,
        curve: CurveConfig,
    },
    PhiWrapped {
        inner: Box<SupremandConfig>,
        phi: CurveConfig,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant { value: f64 },
    AffineEta { k: f64, b: f64 },
    EtaSquared { k: f64 },
    SinPiX { amp: f64 },
    ExpEta { eps: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    Identity,
    Affine { slope: f64, intercept: f64 },
    Cubic { k1: f64, k3: f64 },
    Cube,
    Sinh,
}

/// Ranges for `(η, p, ξ)`; `x` ranges over the domain.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub eta: (f64, f64),
    pub p: (f64, f64),
    pub xi: (f64, f64),
}

impl Default for BoxConfig {
    fn default() -> Self {
        BoxConfig {
            eta: (-4.0, 4.0),
            p: (-4.0, 4.0),
            xi: (-4.0, 4.0),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// 1D data `u(a), u'(a), u(b), u'(b)`.
    Interval { ua: f64, dua: f64, ub: f64, dub: f64 },
    Zero,
    /// Traces of `c + g·x + ½ xᵀHx`.
    Quadratic {
        #[serde(default)]
        c: f64,
        #[serde(default)]
        g: [f64; 2],
        #[serde(default)]
        h: [[f64; 2]; 2],
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_tol_factor")]
    pub tol_factor: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub inner: InnerConfig,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            ladder: None,
            p_max: default_p_max(),
            tol_factor: default_tol_factor(),
            max_iter: default_max_iter(),
            penalty: PenaltyConfig::default(),
            inner: InnerConfig::default(),
            early_stop: true,
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyConfig {
    #[default]
    None,
    /// Fixed anchor read from a field CSV (relative to the config file), or
    /// the zero field.
    Fixed {
        eps: f64,
        #[serde(default)]
        anchor_csv: Option<PathBuf>,
    },
    Recentered { eps: f64 },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerConfig {
    #[default]
    Newton,
    Bfgs,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertConfig {
    #[serde(default = "default_band_h")]
    pub band_h: f64,
    #[serde(default = "default_sign_law_tol")]
    pub sign_law_tol: f64,
    #[serde(default = "default_weak_tol")]
    pub weak_tol: f64,
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default = "default_probe_theta")]
    pub probe_theta: f64,
    #[serde(default = "default_radius_range")]
    pub probe_radius: (f64, f64),
    #[serde(default = "default_t_multipliers")]
    pub t_multipliers: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_theta_count")]
    pub theta_count: usize,
}

impl Default for CertConfig {
    fn default() -> Self {
        CertConfig {
            band_h: default_band_h(),
            sign_law_tol: default_sign_law_tol(),
            weak_tol: default_weak_tol(),
            probe_count: default_probe_count(),
            probe_theta: default_probe_theta(),
            probe_radius: default_radius_range(),
            t_multipliers: default_t_multipliers(),
            slack: default_slack(),
            theta_count: default_theta_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualModeConfig {
    Auto,
    UnitBoundary,
    NullVector,
}

impl From<DualModeConfig> for DualMode {
    fn from(m: DualModeConfig) -> Self {
        match m {
            DualModeConfig::Auto => DualMode::Auto,
            DualModeConfig::UnitBoundary => DualMode::UnitBoundary,
            DualModeConfig::NullVector => DualMode::NullVector,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub emit_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            emit_fields: false,
        }
    }
}

fn default_dual_mode() -> DualModeConfig {
    DualModeConfig::Auto
}
fn default_p_max() -> f64 {
    256.0
}
fn default_tol_factor() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    500
}
fn default_true() -> bool {
    true
}
fn default_delta() -> f64 {
    1.0
}
fn default_band_h() -> f64 {
    2.0
}
fn default_sign_law_tol() -> f64 {
    0.05
}
fn default_weak_tol() -> f64 {
    1e-3
}
fn default_probe_count() -> usize {
    ProbeFamilyConfig::default().count
}
fn default_probe_theta() -> f64 {
    ProbeFamilyConfig::default().theta
}
fn default_radius_range() -> (f64, f64) {
    ProbeFamilyConfig::default().radius_range
}
fn default_t_multipliers() -> Vec<f64> {
    DEFAULT_T_MULTIPLIERS.to_vec()
}
fn default_slack() -> f64 {
    1e-9
}
fn default_theta_count() -> usize {
    50
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Parses a config file, reporting the JSON path of the first bad field.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        anyhow::anyhow!("{}: at `{}`: {}", path.display(), at, e.into_inner())
    })
}

fn coefficient(c: CoefficientConfig) -> Coefficient {
    match c {
        CoefficientConfig::Constant { value } => Coefficient::constant(value),
        CoefficientConfig::AffineEta { k, b } => Coefficient::affine_eta(k, b),
        CoefficientConfig::EtaSquared { k } => Coefficient::eta_squared(k),
        CoefficientConfig::SinPiX { amp } => Coefficient::sin_pi_x(amp),
        CoefficientConfig::ExpEta { eps } => Coefficient::exp_eta(eps),
    }
}

fn curve(c: CurveConfig) -> Curve {
    match c {
        CurveConfig::Identity => Curve::identity(),
        CurveConfig::Affine { slope, intercept } => Curve::affine(slope, intercept),
        CurveConfig::Cubic { k1, k3 } => Curve::cubic(k1, k3),
        CurveConfig::Cube => Curve::cube(),
        CurveConfig::Sinh => Curve::sinh(),
    }
}

fn supremand(cfg: &SupremandConfig, bx: &SampleBox) -> Result<SupremandSpec> {
    Ok(match cfg {
        SupremandConfig::PureXi => SupremandSpec::pure_xi(),
        SupremandConfig::Additive { coefficient: a, curve: c } => {
            make_additive(coefficient(*a), curve(*c), bx).context("supremand")?
        }
        SupremandConfig::Multiplicative { coefficient: a, curve: c } => {
            make_multiplicative(coefficient(*a), curve(*c), bx).context("supremand")?
        }
        SupremandConfig::PhiWrapped { inner, phi } => {
            wrap_phi(supremand(inner, bx)?, curve(*phi)).context("supremand.phi")?
        }
    })
}

/// Everything a command needs, validated.
pub struct Built {
    pub problem: Arc<Problem>,
    pub schedule: ContinuationSchedule,
    pub certification: CertificationConfig,
    pub dual_mode: DualMode,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        let d = &self.domain;
        let dim = d.lower.len();
        if d.upper.len() != dim || d.nodes.len() != dim {
            bail!("domain: lower, upper and nodes must have the same length");
        }
        Ok(Arc::new(
            build_grid(dim, &d.lower, &d.upper, &d.nodes).context("domain")?,
        ))
    }

    pub fn sample_box(&self) -> Result<SampleBox> {
        let b = self.sample_box.unwrap_or_default();
        SampleBox::new(&self.domain.lower, &self.domain.upper, b.eta, b.p, b.xi).context("sample_box")
    }

    pub fn supremand(&self) -> Result<(SupremandSpec, SampleBox)> {
        let bx = self.sample_box()?;
        Ok((supremand(&self.supremand, &bx)?, bx))
    }

    /// Builds and cross-validates every block. `base` resolves relative
    /// paths; `ladder` and `seed` override the file.
    pub fn build(&self, base: &Path, ladder: Option<&[f64]>, seed: Option<u64>) -> Result<Built> {
        let grid = self.grid()?;
        let dim = grid.dim();
        if self.matrix.len() != dim || self.matrix.iter().any(|r| r.len() != dim) {
            bail!("matrix: expected a {dim}x{dim} array");
        }
        let entries: Vec<f64> = self.matrix.iter().flatten().cloned().collect();
        let a = EllipticMatrix::new(dim, &entries).context("matrix")?;
        let (spec, _) = self.supremand()?;
        let data = match self.boundary {
            BoundaryConfig::Interval { ua, dua, ub, dub } => {
                ClampedData::interval(&grid, ua, dua, ub, dub).context("boundary")?
            }
            BoundaryConfig::Zero => ClampedData::zero(&grid),
            BoundaryConfig::Quadratic { c, g, h } => ClampedData::from_function(
                &grid,
                move |x| {
                    let y = if x.len() > 1 { x[1] } else { 0.0 };
                    c + g[0] * x[0] + g[1] * y
                        + 0.5 * (h[0][0] * x[0] * x[0] + 2.0 * h[0][1] * x[0] * y + h[1][1] * y * y)
                },
                move |x| {
                    let y = if x.len() > 1 { x[1] } else { 0.0 };
                    [g[0] + h[0][0] * x[0] + h[0][1] * y, g[1] + h[0][1] * x[0] + h[1][1] * y]
                },
            ),
        };
        let problem = Arc::new(Problem::new(grid.clone(), a, data, spec).context("problem")?);

        let s = &self.schedule;
        let penalty = match &s.penalty {
            PenaltyConfig::None => PenaltyPolicy::None,
            PenaltyConfig::Fixed { eps, anchor_csv } => {
                let anchor = match anchor_csv {
                    Some(p) => Some(read_field(&grid, &base.join(p)).context("schedule.penalty.anchor_csv")?),
                    None => None,
                };
                PenaltyPolicy::Fixed { eps: *eps, anchor }
            }
            PenaltyConfig::Recentered { eps } => PenaltyPolicy::Recentered { eps: *eps },
        };
        let schedule = ContinuationSchedule {
            ladder: match (ladder, &s.ladder) {
                (Some(l), _) => l.to_vec(),
                (None, Some(l)) => l.clone(),
                (None, None) => doubling_ladder(s.p_max),
            },
            tol_factor: s.tol_factor,
            max_iter: s.max_iter,
            penalty,
            inner: match s.inner {
                InnerConfig::Newton => InnerMethod::Newton,
                InnerConfig::Bfgs => InnerMethod::Bfgs,
            },
            early_stop: s.early_stop,
            delta: s.delta,
        };
        schedule.validate().context("schedule")?;

        let c = &self.certification;
        let certification = CertificationConfig {
            band_h: c.band_h,
            sign_law_tol: c.sign_law_tol,
            weak_tol: c.weak_tol,
            probes: ProbeFamilyConfig {
                count: c.probe_count,
                theta: c.probe_theta,
                radius_range: c.probe_radius,
                seed: seed.unwrap_or(self.seed),
            },
            t_multipliers: c.t_multipliers.clone(),
            slack: c.slack,
            theta_count: c.theta_count,
        };
        Ok(Built {
            problem,
            schedule,
            certification,
            dual_mode: self.dual_mode.into(),
        })
    }
}

pub fn read_field(grid: &Arc<Grid>, path: &Path) -> Result<ScalarField> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_field_csv(grid, file).with_context(|| format!("reading {}", path.display()))
}
