//! Run configuration: one TOML file per run. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use sdg_core::families::{self, Parameters};
use sdg_core::{BoundaryPolicy, ControlSet, GameSpec, Scheme, StateGrid, TimePartition};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub partition: Option<PartitionConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub validate: ValidateOptions,
    #[serde(default)]
    pub isaacs: IsaacsOptions,
    #[serde(default)]
    pub deviate: DeviateOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Option<String>,
    pub fixture: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Scalar control points for player 1; the family default when absent.
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub lipschitz: Option<f64>,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default)]
    pub start: f64,
    /// Overrides the family horizon.
    pub horizon: Option<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub epsilon: f64,
    pub paths: usize,
    pub seed: u64,
    pub start_state: Option<Vec<f64>>,
    pub quadrature_points: usize,
    pub output_dir: Option<PathBuf>,
    /// Number of leading paths written to paths.csv.
    pub export_paths: usize,
    /// Feedback table read by `verify` and `deviate`; constructed when absent.
    pub controls: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            paths: 10_000,
            seed: 0,
            start_state: None,
            quadrature_points: 7,
            output_dir: None,
            export_paths: 100,
            controls: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateOptions {
    pub samples: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsaacsOptions {
    pub queries: usize,
    pub seed: u64,
}

impl Default for IsaacsOptions {
    fn default() -> Self {
        Self { queries: 1000, seed: 0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviateOptions {
    /// Window deviations cover this many equal blocks of the partition.
    pub coarse_cells: usize,
}

impl Default for DeviateOptions {
    fn default() -> Self {
        Self { coarse_cells: 10 }
    }
}

/// Built-in fixtures: a family with its default parameters on a fixed lattice.
struct Fixture {
    name: &'static str,
    family: &'static str,
    steps: usize,
    grid: (f64, f64, usize),
}

const FIXTURES: &[Fixture] = &[
    Fixture { name: "bilinear", family: "bilinear-1d", steps: 50, grid: (-4.0, 4.0, 101) },
    Fixture { name: "antisym", family: "antisym-1d", steps: 50, grid: (-4.0, 4.0, 101) },
    Fixture { name: "control-free", family: "control-free", steps: 50, grid: (-4.0, 4.0, 201) },
    Fixture { name: "separable", family: "separable-1d", steps: 50, grid: (-4.0, 4.0, 101) },
    Fixture { name: "pennies", family: "pennies-1d", steps: 50, grid: (-4.0, 4.0, 101) },
];

/// Everything a command needs, resolved from the configuration.
pub struct Resolved {
    pub spec: GameSpec,
    pub scheme: Scheme,
    pub start: Vec<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        let m = &self.model;
        match (&m.family, &m.fixture) {
            (Some(_), Some(_)) => return Err("model: set either `family` or `fixture`, not both".into()),
            (None, None) => return Err("model: one of `family` or `fixture` is required".into()),
            (None, Some(name)) => {
                if fixture(name).is_none() {
                    return Err(format!(
                        "model.fixture: unknown fixture `{name}` (known: {})",
                        FIXTURES.iter().map(|f| f.name).collect::<Vec<_>>().join(", ")
                    ));
                }
            }
            (Some(_), None) => {
                if self.partition.is_none() {
                    return Err("partition: required when `model.family` is set".into());
                }
                if self.grid.is_none() {
                    return Err("grid: required when `model.family` is set".into());
                }
            }
        }
        if m.u.is_some() != m.v.is_some() {
            return Err("model: `u` and `v` must be given together".into());
        }
        let r = &self.run;
        if !(r.epsilon > 0.0 && r.epsilon < 1.0) {
            return Err(format!("run.epsilon: must lie in (0, 1), got {}", r.epsilon));
        }
        if r.paths == 0 {
            return Err("run.paths: must be positive".into());
        }
        if self.validate.samples == 0 {
            return Err("validate.samples: must be positive".into());
        }
        if self.isaacs.queries == 0 {
            return Err("isaacs.queries: must be positive".into());
        }
        if self.deviate.coarse_cells == 0 {
            return Err("deviate.coarse_cells: must be positive".into());
        }
        if let Some(p) = &self.partition {
            if p.steps == 0 {
                return Err("partition.steps: must be positive".into());
            }
        }
        Ok(())
    }

    /// The game alone, for commands that do not need a lattice.
    pub fn spec(&self) -> sdg_core::Result<GameSpec> {
        let m = &self.model;
        let id = match (&m.family, &m.fixture) {
            (Some(f), _) => f.as_str(),
            (None, Some(name)) => fixture(name).map(|f| f.family).unwrap_or_default(),
            (None, None) => "",
        };
        let params: Parameters = m.parameters.clone();
        let controls = match (&m.u, &m.v) {
            (Some(u), Some(v)) => Some((ControlSet::scalar(u)?, ControlSet::scalar(v)?)),
            _ => None,
        };
        let mut spec = families::family(id)?.instantiate(&params, controls)?;
        if let Some(h) = self.partition.as_ref().and_then(|p| p.horizon) {
            spec = spec.with_horizon(h)?;
        }
        if m.lipschitz.is_some() || m.bound.is_some() {
            spec = spec.with_constants(m.lipschitz.unwrap_or(spec.lipschitz()), m.bound.unwrap_or(spec.bound()))?;
        }
        Ok(spec)
    }

    pub fn resolve(&self) -> sdg_core::Result<Resolved> {
        let spec = self.spec()?;
        let fx = self.model.fixture.as_deref().and_then(fixture);
        let (start, steps) = match (&self.partition, fx) {
            (Some(p), _) => (p.start, p.steps),
            (None, Some(f)) => (0.0, f.steps),
            (None, None) => unreachable!("checked at parse time"),
        };
        let partition = TimePartition::uniform(start, spec.horizon(), steps)?;
        let grid = match (&self.grid, fx) {
            (Some(g), _) => StateGrid::new(g.lower.clone(), g.upper.clone(), g.nodes.clone())?.with_boundary(g.boundary),
            (None, Some(f)) => StateGrid::uniform_1d(f.grid.0, f.grid.1, f.grid.2)?,
            (None, None) => unreachable!("checked at parse time"),
        };
        let scheme = Scheme::for_spec(&spec, partition, grid)?.with_quadrature_points(self.run.quadrature_points)?;
        let start = match &self.run.start_state {
            Some(x) => x.clone(),
            None => vec![0.0; spec.state_dim()],
        };
        if start.len() != spec.state_dim() {
            return Err(sdg_core::Error::Usage(format!(
                "run.start_state has {} entries, the state dimension is {}",
                start.len(),
                spec.state_dim()
            )));
        }
        Ok(Resolved { spec, scheme, start })
    }
}

fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}
