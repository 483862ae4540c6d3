//! Experiment configuration and the shipped presets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kinuq_core::collision::CollisionParams;
use kinuq_core::hybrid::CriterionThresholds;
use kinuq_core::uq::LambdaMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    SodDeterministic,
    BlastWave,
    SodUncertain,
    MixedRegimeA,
    MixedRegimeB,
    MixedRegimeC,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    FullKinetic,
    FullFluid,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    None,
    MC,
    MLMC,
    BiFidelity,
    TriFidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnudsenSpec {
    Constant { eps: f64 },
    /// `eps0 + (tanh(1 - 11x) + tanh(1 + 11x)) / 2`.
    Mixed { eps0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nv: usize,
    #[serde(default = "default_l_max")]
    pub l_max: f64,
    /// Resolution used with `--paper-scale`; defaults to twice `nx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_nx: Option<usize>,
    /// Velocity nodes per axis with `--paper-scale`; defaults to 32.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_nv: Option<usize>,
}

fn default_l_max() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Time step at `grid.nx` cells; other resolutions scale it with the
    /// cell size. Without it the step is `cfl * dx / l_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    0.64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub eta0: f64,
    pub delta0: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let t = CriterionThresholds::default();
        Self { eta0: t.eta0, delta0: t.delta0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionConfig {
    pub b: f64,
    pub gamma: f64,
    pub beta0: f64,
    pub n_angular: usize,
    pub corrected: bool,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        let p = CollisionParams::default();
        Self { b: p.b, gamma: p.gamma, beta0: p.beta0, n_angular: p.n_angular, corrected: p.corrected }
    }
}

impl CollisionConfig {
    pub fn params(&self) -> CollisionParams {
        CollisionParams {
            b: self.b,
            gamma: self.gamma,
            beta0: self.beta0,
            n_angular: self.n_angular,
            corrected: self.corrected,
            ..CollisionParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Regression,
    Scalar,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub nx: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Monte Carlo sample count.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// MLMC hierarchy, coarsest first.
    #[serde(default)]
    pub levels: Vec<LevelConfig>,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaChoice,
    #[serde(default)]
    pub shared_streams: bool,
    /// Multi-fidelity candidate set size.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Multi-fidelity basis sizes to evaluate.
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_held_out")]
    pub held_out: usize,
    /// Gram ridge; unset means `1e-10 trace(G) / K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

fn default_samples() -> usize {
    32
}
fn default_lambda() -> LambdaChoice {
    LambdaChoice::Regression
}
fn default_candidates() -> usize {
    100
}
fn default_k() -> Vec<usize> {
    vec![3, 5, 10]
}
fn default_held_out() -> usize {
    20
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            levels: Vec::new(),
            lambda: default_lambda(),
            shared_streams: false,
            candidates: default_candidates(),
            k: default_k(),
            held_out: default_held_out(),
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Cells of the full-kinetic reference.
    pub nx: usize,
    /// Gauss nodes per uncertain factor.
    pub nodes: usize,
    /// Compare estimates with the reference and write `err_*` columns.
    #[serde(default)]
    pub compare: bool,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { nx: 400, nodes: 4, compare: false }
    }
}

/// One constant state of a piecewise-constant custom case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    /// Right end of the piece.
    pub x_end: f64,
    pub rho: f64,
    pub ux: f64,
    #[serde(default)]
    pub uy: f64,
    #[serde(rename = "T")]
    pub temp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryChoice {
    Periodic,
    Specular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCase {
    pub x_min: f64,
    pub x_max: f64,
    pub boundary: BoundaryChoice,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: CaseId,
    pub solver: Solver,
    pub estimator: Estimator,
    pub grid: GridConfig,
    pub time: TimeConfig,
    /// Overrides the case's Knudsen number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knudsen: Option<KnudsenSpec>,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub collision: CollisionConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Record the per-step regime labels of hybrid runs.
    #[serde(default)]
    pub history: bool,
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomCase>,
}

fn default_seed() -> u64 {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
            Ok(())
        };
        if self.grid.nx < 4 {
            bail!("grid.nx must be at least 4");
        }
        if self.grid.nv < 4 || self.grid.nv % 2 != 0 {
            bail!("grid.nv must be even and at least 4");
        }
        pos("grid.l_max", self.grid.l_max)?;
        pos("time.t_final", self.time.t_final)?;
        pos("time.cfl", self.time.cfl)?;
        if let Some(dt) = self.time.dt {
            pos("time.dt", dt)?;
        }
        match self.knudsen {
            Some(KnudsenSpec::Constant { eps }) if !(eps > 0.0) => bail!("knudsen.eps must be positive"),
            Some(KnudsenSpec::Mixed { eps0 }) => pos("knudsen.eps0", eps0)?,
            _ => {}
        }
        if !(self.thresholds.eta0 >= 0.0 && self.thresholds.delta0 >= 0.0) {
            bail!("thresholds must be non-negative");
        }
        pos("collision.b", self.collision.b)?;
        pos("collision.beta0", self.collision.beta0)?;
        if self.sampling.samples == 0 {
            bail!("sampling.samples must be positive");
        }
        for w in self.sampling.levels.windows(2) {
            if w[1].nx != 2 * w[0].nx {
                bail!("MLMC levels must refine by two: {} then {}", w[0].nx, w[1].nx);
            }
        }
        if self.sampling.levels.iter().any(|l| l.samples == 0 || l.nx < 4) {
            bail!("every MLMC level needs samples and at least 4 cells");
        }
        if self.sampling.k.iter().any(|k| *k == 0 || *k > self.sampling.candidates) {
            bail!("multi-fidelity K values must lie in 1..=candidates");
        }
        if self.estimator == Estimator::MLMC && self.sampling.levels.is_empty() {
            bail!("MLMC needs sampling.levels");
        }
        if self.case == CaseId::Custom {
            let c = self.custom.as_ref().context("case Custom needs a [custom] table")?;
            if !(c.x_max > c.x_min) || c.pieces.is_empty() {
                bail!("custom case needs x_min < x_max and at least one piece");
            }
            for p in &c.pieces {
                pos("custom rho", p.rho)?;
                pos("custom T", p.temp)?;
            }
        }
        if self.reference.nx < 4 || self.reference.nodes == 0 {
            bail!("reference needs at least 4 cells and one node");
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        if self.paper_scale {
            self.grid.paper_nx.unwrap_or(2 * self.grid.nx)
        } else {
            self.grid.nx
        }
    }

    pub fn nv(&self) -> usize {
        if self.paper_scale {
            self.grid.paper_nv.unwrap_or(32)
        } else {
            self.grid.nv
        }
    }

    /// Time step for a mesh of `n_cells`.
    pub fn dt_for(&self, n_cells: usize) -> f64 {
        match self.time.dt {
            Some(dt) => dt * self.grid.nx as f64 / n_cells as f64,
            None => {
                let len = match self.case {
                    CaseId::Custom => self.custom.as_ref().map_or(1.0, |c| c.x_max - c.x_min),
                    _ => 1.0,
                };
                self.time.cfl * len / n_cells as f64 / self.grid.l_max
            }
        }
    }

    pub fn lambda_mode(&self) -> LambdaMode {
        match self.sampling.lambda {
            LambdaChoice::Regression => LambdaMode::Regression,
            LambdaChoice::Scalar => LambdaMode::Scalar { block: self.sampling.levels.first().map_or(1, |l| l.nx) },
            LambdaChoice::Unit => LambdaMode::Unit,
        }
    }
}

/// Presets shipped with the repository, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("sod", include_str!("../../../presets/sod.toml")),
    ("blast_eps1", include_str!("../../../presets/blast_eps1.toml")),
    ("blast_eps4", include_str!("../../../presets/blast_eps4.toml")),
    ("sod_uncertain", include_str!("../../../presets/sod_uncertain.toml")),
    ("mixed_a", include_str!("../../../presets/mixed_a.toml")),
    ("mixed_b", include_str!("../../../presets/mixed_b.toml")),
    ("mixed_c", include_str!("../../../presets/mixed_c.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .with_context(|| format!("unknown preset {name}"))?;
    ExperimentConfig::from_toml(text)
}
