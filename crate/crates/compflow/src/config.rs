//! Run configuration: TOML `[scenario]` / `[cone]` / `[pipeline]` blocks plus
//! a seed and an output directory.
//!
//! Configs parse strictly (unknown keys are rejected), validate every
//! tolerance as positive, and round-trip through
//! [`RunConfig::to_toml_string`] → [`RunConfig::from_toml_str`] without
//! change. Scenario names refer to the built-in registry; `params` entries
//! override the named scenario's parameters where its family supports it,
//! and `domain_lo`/`domain_hi` override the validity domain.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cells::{CellSide, CellTarget};
use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::order::ConeSpec;
use crate::scenario::{by_name, registry, FieldKind, Scenario};
use crate::transition::Padding;

/// Default cone half-width parameter.
pub const DEFAULT_ETA: f64 = 1e-9;

/// A fully parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioBlock,
    #[serde(default)]
    pub cone: ConeBlock,
    #[serde(default)]
    pub pipeline: PipelineBlock,
    /// Master seed; per-item seeds are derived by stable hashing.
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory; subcommands require one (here or via the CLI).
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// `[scenario]` — which registered system to run, with optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    /// Registry name (`linear2`, `bistable2`, `bistable3`, `lv2`, `ml_sym`,
    /// `lv_cycle`).
    pub name: String,
    /// Parameter overrides by name (`alpha`/`beta` for May–Leonard families,
    /// `k` for the coupled double wells).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    /// Validity-domain override (both ends or neither).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hi: Option<Vec<f64>>,
}

/// `[cone]` — simplicial-cone generators and the boundary-shell width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeBlock {
    /// Generator matrix, or the string `"identity"` for the standard
    /// orthant order.
    #[serde(default)]
    pub matrix: ConeMatrixSpec,
    #[serde(default = "d_eta")]
    pub eta: f64,
}

impl Default for ConeBlock {
    fn default() -> Self {
        Self { matrix: ConeMatrixSpec::default(), eta: DEFAULT_ETA }
    }
}

/// Cone generators: `"identity"` or an explicit row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConeMatrixSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl Default for ConeMatrixSpec {
    fn default() -> Self {
        ConeMatrixSpec::Named("identity".to_string())
    }
}

/// Image-padding rule as config text: `"none"`, `"lipschitz"`, or
/// `"frac:<fraction>"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PaddingSpec(pub Padding);

impl TryFrom<String> for PaddingSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "none" => Ok(PaddingSpec(Padding::None)),
            "lipschitz" => Ok(PaddingSpec(Padding::Lipschitz)),
            other => match other.strip_prefix("frac:") {
                Some(frac) => match frac.parse::<f64>() {
                    Ok(f) if f.is_finite() && f >= 0.0 => Ok(PaddingSpec(Padding::Frac(f))),
                    _ => Err(format!("invalid padding fraction: {frac:?}")),
                },
                None => Err(format!(
                    "unknown padding {other:?}; expected \"none\", \"lipschitz\", or \"frac:<f>\""
                )),
            },
        }
    }
}

impl From<PaddingSpec> for String {
    fn from(p: PaddingSpec) -> String {
        match p.0 {
            Padding::None => "none".to_string(),
            Padding::Lipschitz => "lipschitz".to_string(),
            Padding::Frac(f) => format!("frac:{f}"),
        }
    }
}

/// One invariant-cell request: a backward target and which boundary of its
/// repulsion basin to reconstruct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellBlock {
    /// `"equilibrium"` (with `point`), `"plus_infinity"`, or
    /// `"minus_infinity"`.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// `"upper"` — upper boundary of the upper-repulsion basin (members lie
    /// below the cell); `"lower"` — lower boundary of the lower-repulsion
    /// basin (members lie above it).
    pub side: String,
}

impl CellBlock {
    /// Resolves the request; rejects side/target pairs whose basin is
    /// unbounded on the requested side.
    pub fn build(&self, dim: usize) -> Result<(CellTarget, CellSide)> {
        let side = match self.side.as_str() {
            "upper" => CellSide::UpperBoundaryOfUpperRepulsion,
            "lower" => CellSide::LowerBoundaryOfLowerRepulsion,
            other => {
                return Err(Error::Config(format!(
                    "unknown cell side {other:?}; expected \"upper\" or \"lower\""
                )))
            }
        };
        let target = match self.target.as_str() {
            "plus_infinity" => CellTarget::PlusInfinity,
            "minus_infinity" => CellTarget::MinusInfinity,
            "equilibrium" => {
                let p = self.point.as_ref().ok_or_else(|| {
                    Error::Config("cell target \"equilibrium\" requires a point".into())
                })?;
                if p.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
                }
                CellTarget::Equilibrium(DVector::from_row_slice(p))
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown cell target {other:?}; expected \"equilibrium\", \
                     \"plus_infinity\", or \"minus_infinity\""
                )))
            }
        };
        match (&target, &side) {
            (CellTarget::PlusInfinity, CellSide::UpperBoundaryOfUpperRepulsion) => {
                Err(Error::Config(
                    "the basin repelled from +∞ is unbounded above; request side \"lower\"".into(),
                ))
            }
            (CellTarget::MinusInfinity, CellSide::LowerBoundaryOfLowerRepulsion) => {
                Err(Error::Config(
                    "the basin repelled from −∞ is unbounded below; request side \"upper\"".into(),
                ))
            }
            _ => Ok((target, side)),
        }
    }
}

fn d_eta() -> f64 {
    DEFAULT_ETA
}
fn d_depths() -> Vec<u32> {
    vec![3, 5, 7]
}
fn d_map_time() -> f64 {
    1.0
}
fn d_samples_per_box() -> usize {
    3
}
fn d_padding() -> PaddingSpec {
    PaddingSpec(Padding::Lipschitz)
}
fn d_theta() -> f64 {
    0.05
}
fn d_horizons() -> Vec<f64> {
    vec![20.0, 40.0, 80.0]
}
fn d_epsilons() -> Vec<f64> {
    vec![0.05, 0.1]
}
fn d_grid_nodes() -> usize {
    9
}
fn d_grid_half_extent() -> f64 {
    0.3
}
fn d_bisect_tol() -> f64 {
    1e-3
}
fn d_shell_margin() -> f64 {
    0.01
}
fn d_t_settle() -> f64 {
    30.0
}
fn d_t_backward() -> f64 {
    60.0
}
fn d_occupation_time() -> f64 {
    300.0
}
fn d_occupation_burn() -> f64 {
    60.0
}
fn d_occupation_depth() -> u32 {
    7
}
fn d_entropy_samples() -> usize {
    60
}
fn d_ip_generators() -> usize {
    10
}
fn d_a1_horizon() -> f64 {
    1e4
}
fn d_ip_horizon() -> f64 {
    200.0
}
fn d_a1_queries() -> usize {
    50
}

/// `[pipeline]` — depth schedule, transition-map and audit knobs, cell-grid
/// geometry, recurrence and entropy settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineBlock {
    /// Strictly increasing subdivision depths.
    #[serde(default = "d_depths")]
    pub depths: Vec<u32>,
    /// Time `T` of the sampled box map.
    #[serde(default = "d_map_time")]
    pub map_time: f64,
    #[serde(default = "d_samples_per_box")]
    pub samples_per_box: usize,
    #[serde(default = "d_padding")]
    pub padding: PaddingSpec,
    /// Return tolerance θ for recurrent-time work; interpreted as a
    /// fraction of the attractor diameter when `theta_is_fraction` is set.
    #[serde(default = "d_theta")]
    pub theta: f64,
    #[serde(default)]
    pub theta_is_fraction: bool,
    /// Entropy horizons `T` (strictly increasing).
    #[serde(default = "d_horizons")]
    pub horizons: Vec<f64>,
    /// Entropy radii ε.
    #[serde(default = "d_epsilons")]
    pub epsilons: Vec<f64>,
    /// Cell grid: nodes per hyperplane axis and half-extent.
    #[serde(default = "d_grid_nodes")]
    pub grid_nodes: usize,
    #[serde(default = "d_grid_half_extent")]
    pub grid_half_extent: f64,
    /// Height-bisection tolerance for cell reconstruction.
    #[serde(default = "d_bisect_tol")]
    pub bisect_tol: f64,
    /// Joint-boundary shell width for the intersection audit.
    #[serde(default = "d_shell_margin")]
    pub shell_margin: f64,
    /// Forward settling time for component representatives.
    #[serde(default = "d_t_settle")]
    pub t_settle: f64,
    /// Backward time budget for basin classification.
    #[serde(default = "d_t_backward")]
    pub t_backward: f64,
    /// Occupation-support trajectory length and discarded prefix.
    #[serde(default = "d_occupation_time")]
    pub occupation_time: f64,
    #[serde(default = "d_occupation_burn")]
    pub occupation_burn: f64,
    #[serde(default = "d_occupation_depth")]
    pub occupation_depth: u32,
    /// Recurrent witness for ipset/entropy stages; defaults to the most
    /// central certified equilibrium when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    /// Number of settled orbit samples used as the entropy base set.
    #[serde(default = "d_entropy_samples")]
    pub entropy_samples: usize,
    /// IP-set generator count `k` (2^k − 1 subset sums are verified).
    #[serde(default = "d_ip_generators")]
    pub ip_generators: usize,
    /// Close-return search window for IP generation and the recurrent-time
    /// interval artifact; must exceed one orbit period to find returns.
    #[serde(default = "d_ip_horizon")]
    pub ip_horizon: f64,
    /// Scan horizon and query count for the recurrent-time search.
    #[serde(default = "d_a1_horizon")]
    pub a1_horizon: f64,
    #[serde(default = "d_a1_queries")]
    pub a1_queries: usize,
    /// Invariant cells to reconstruct (audited pairwise for disjointness
    /// when they share a grid).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellBlock>,
}

impl Default for PipelineBlock {
    fn default() -> Self {
        Self {
            depths: d_depths(),
            map_time: d_map_time(),
            samples_per_box: d_samples_per_box(),
            padding: d_padding(),
            theta: d_theta(),
            theta_is_fraction: false,
            horizons: d_horizons(),
            epsilons: d_epsilons(),
            grid_nodes: d_grid_nodes(),
            grid_half_extent: d_grid_half_extent(),
            bisect_tol: d_bisect_tol(),
            shell_margin: d_shell_margin(),
            t_settle: d_t_settle(),
            t_backward: d_t_backward(),
            occupation_time: d_occupation_time(),
            occupation_burn: d_occupation_burn(),
            occupation_depth: d_occupation_depth(),
            witness: None,
            entropy_samples: d_entropy_samples(),
            ip_generators: d_ip_generators(),
            ip_horizon: d_ip_horizon(),
            a1_horizon: d_a1_horizon(),
            a1_queries: d_a1_queries(),
            cells: Vec::new(),
        }
    }
}

/// The scenario and cone a config resolves to.
#[derive(Debug, Clone)]
pub struct Realized {
    pub scenario: Scenario,
    pub cone: ConeSpec,
}

impl ScenarioBlock {
    /// Builds the scenario, applying parameter and domain overrides.
    pub fn build(&self) -> Result<Scenario> {
        let base = by_name(&self.name).ok_or_else(|| {
            let names: Vec<String> =
                registry().iter().map(|s| s.name().to_string()).collect();
            Error::Config(format!(
                "unknown scenario {:?}; registered: {}",
                self.name,
                names.join(", ")
            ))
        })?;
        let domain = match (&self.domain_lo, &self.domain_hi) {
            (None, None) => base.valid_domain().clone(),
            (Some(lo), Some(hi)) => AxisBox::from_slices(lo, hi)?,
            _ => {
                return Err(Error::Config(
                    "domain_lo and domain_hi must be given together".into(),
                ))
            }
        };
        if self.params.is_empty() && self.domain_lo.is_none() {
            return Ok(base);
        }
        let get = |key: &str, fallback: f64| -> f64 {
            self.params.get(key).copied().unwrap_or(fallback)
        };
        for key in self.params.keys() {
            if !base.params().contains_key(key) {
                return Err(Error::Config(format!(
                    "scenario {:?} has no parameter {key:?}",
                    self.name
                )));
            }
        }
        match base.kind() {
            FieldKind::Linear { a } => {
                Scenario::linear(&self.name, a.clone(), domain)
            }
            FieldKind::Bistable { k } => {
                Scenario::bistable(&self.name, domain.dim(), get("k", *k), domain)
            }
            FieldKind::LotkaVolterra { r, a } => {
                Scenario::lotka_volterra(&self.name, r.clone(), a.clone(), domain)
            }
            FieldKind::MayLeonard { alpha, beta, .. } => Scenario::may_leonard(
                &self.name,
                get("alpha", *alpha),
                get("beta", *beta),
                domain,
            ),
        }
    }
}

impl ConeBlock {
    /// Builds the cone for an `n`-dimensional scenario.
    pub fn build(&self, dim: usize) -> Result<ConeSpec> {
        match &self.matrix {
            ConeMatrixSpec::Named(s) if s == "identity" => {
                let g = DMatrix::identity(dim, dim);
                ConeSpec::new(g, self.eta)
            }
            ConeMatrixSpec::Named(other) => Err(Error::Config(format!(
                "unknown cone matrix name {other:?}; expected \"identity\" or explicit rows"
            ))),
            ConeMatrixSpec::Rows(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config(format!(
                        "cone matrix must be {dim}×{dim} to match the scenario"
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                ConeSpec::new(DMatrix::from_row_slice(dim, dim, &flat), self.eta)
            }
        }
    }
}

impl RunConfig {
    /// Parses and validates a config from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Serializes back to TOML; the result re-parses to an equal config.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))
    }

    /// Resolves the scenario and cone.
    pub fn realize(&self) -> Result<Realized> {
        let scenario = self.scenario.build()?;
        let cone = self.cone.build(scenario.dim())?;
        Ok(Realized { scenario, cone })
    }

    /// Structural validation: registered scenario, coherent blocks, and
    /// positive tolerances.
    pub fn validate(&self) -> Result<()> {
        let realized = self.realize()?;
        let dim = realized.scenario.dim();
        let p = &self.pipeline;
        if p.depths.is_empty() || p.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "pipeline.depths must be nonempty and strictly increasing".into(),
            ));
        }
        let positives: [(&str, f64); 11] = [
            ("cone.eta", self.cone.eta),
            ("pipeline.map_time", p.map_time),
            ("pipeline.theta", p.theta),
            ("pipeline.grid_half_extent", p.grid_half_extent),
            ("pipeline.bisect_tol", p.bisect_tol),
            ("pipeline.shell_margin", p.shell_margin),
            ("pipeline.t_settle", p.t_settle),
            ("pipeline.t_backward", p.t_backward),
            ("pipeline.occupation_time", p.occupation_time),
            ("pipeline.a1_horizon", p.a1_horizon),
            ("pipeline.occupation_burn", p.occupation_burn + 1.0),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if p.occupation_burn < 0.0 || p.occupation_burn >= p.occupation_time {
            return Err(Error::Config(
                "pipeline.occupation_burn must lie in [0, occupation_time)".into(),
            ));
        }
        if p.samples_per_box == 0 {
            return Err(Error::Config("pipeline.samples_per_box must be ≥ 1".into()));
        }
        if p.grid_nodes == 0 {
            return Err(Error::Config("pipeline.grid_nodes must be ≥ 1".into()));
        }
        if p.entropy_samples == 0 {
            return Err(Error::Config("pipeline.entropy_samples must be ≥ 1".into()));
        }
        if p.horizons.is_empty()
            || p.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0))
            || p.horizons.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "pipeline.horizons must be positive and strictly increasing".into(),
            ));
        }
        if p.epsilons.is_empty() || p.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Config("pipeline.epsilons must be positive".into()));
        }
        if p.ip_generators == 0 || p.ip_generators > crate::recurrence::MAX_IP_GENERATORS {
            return Err(Error::Config(format!(
                "pipeline.ip_generators must be in 1..={}",
                crate::recurrence::MAX_IP_GENERATORS
            )));
        }
        if !(p.ip_horizon.is_finite() && p.ip_horizon > crate::recurrence::T_MIN_RETURN) {
            return Err(Error::Config(format!(
                "pipeline.ip_horizon must exceed the minimum return time {}",
                crate::recurrence::T_MIN_RETURN
            )));
        }
        if let Some(w) = &p.witness {
            if w.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: w.len() });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: "pipeline.witness" });
            }
        }
        for cell in &p.cells {
            cell.build(dim)?;
        }
        Ok(())
    }

    /// CLI override: replaces the seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// CLI override: replaces the output directory.
    pub fn with_out_dir(mut self, dir: PathBuf) -> Self {
        self.out_dir = Some(dir);
        self
    }

    /// CLI override: truncates the depth schedule at `depth` (appending it
    /// when absent), so the run refines exactly to the requested depth.
    pub fn with_final_depth(mut self, depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("depth override must be ≥ 1".into()));
        }
        self.pipeline.depths.retain(|&d| d < depth);
        self.pipeline.depths.push(depth);
        Ok(self)
    }

    /// CLI override: sets an absolute return tolerance θ.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Config("theta override must be positive and finite".into()));
        }
        self.pipeline.theta = theta;
        self.pipeline.theta_is_fraction = false;
        Ok(self)
    }
}
