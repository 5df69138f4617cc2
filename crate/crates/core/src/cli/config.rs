//! Experiment configuration: presets, overrides and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::cat_oracle::CatMatrix;
use crate::floquet::{
    Floquet, FloquetSpec, IntMatrix2, KickSpec, KineticSpec, KineticVariant, Order,
};
use crate::grid::{Direction, PeriodicGrid, DEFAULT_LOG_FLOOR, DEFAULT_SATURATION_RATIO};
use crate::heisenberg::{HeisenbergRun, Observable};
use crate::qce::{Guards, DEFAULT_UNITARITY_EPS};

/// Grid used by the cat preset at desk scale.
pub const CAT_DESK_GRID: usize = 256;
/// 541² = 292681 points.
pub const CAT_PAPER_GRID: usize = 541;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Cat,
    RotorQuadratic,
    RotorCosine,
    Custom,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cat" => Some(Self::Cat),
            "rotor_quadratic" => Some(Self::RotorQuadratic),
            "rotor_cosine" => Some(Self::RotorCosine),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Cat => "cat",
            Self::RotorQuadratic => "rotor_quadratic",
            Self::RotorCosine => "rotor_cosine",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Cat,
    RotorQuadratic,
    RotorCosine,
}

impl System {
    fn kinetic(self) -> KineticVariant {
        match self {
            Self::Cat => KineticVariant::CatQuadratic,
            Self::RotorQuadratic => KineticVariant::RotorQuadratic,
            Self::RotorCosine => KineticVariant::RotorCosine,
        }
    }

    fn dim(self) -> usize {
        self.kinetic().dim()
    }
}

/// Config as written by a user: every field but `preset` optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub system: Option<System>,
    pub grid_size: Option<usize>,
    pub n_max: Option<usize>,
    pub kick_strength: Option<f64>,
    pub time_step: Option<f64>,
    pub observable: Option<Vec<i64>>,
    pub directions: Option<Vec<Vec<f64>>>,
    pub matrix: Option<[[i64; 2]; 2]>,
    pub order: Option<Order>,
    pub saturation_ratio: Option<f64>,
    pub unitarity_eps: Option<f64>,
    pub log_floor: Option<f64>,
    pub fit_min_n: Option<usize>,
    /// Cat only: use the 541 × 541 grid.
    pub paper_scale: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub chart: Option<bool>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        // a manifest embeds its resolved config under [config]
        #[derive(Deserialize)]
        struct Wrapped {
            config: ExperimentConfig,
        }
        match toml::from_str::<Wrapped>(&text) {
            Ok(w) => Ok(w.config),
            Err(_) => Self::from_toml(&text),
        }
    }

    /// Apply defaults and validate.
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let preset = self.preset.unwrap_or(Preset::Custom);
        let system = match (preset, self.system) {
            (Preset::Cat, None | Some(System::Cat)) => System::Cat,
            (Preset::RotorQuadratic, None | Some(System::RotorQuadratic)) => System::RotorQuadratic,
            (Preset::RotorCosine, None | Some(System::RotorCosine)) => System::RotorCosine,
            (Preset::Custom, Some(s)) => s,
            (Preset::Custom, None) => {
                return Err(CliError::Config("preset `custom` requires `system`".into()))
            }
            (p, Some(s)) => {
                return Err(CliError::Config(format!(
                    "system {s:?} conflicts with preset `{}`",
                    p.name()
                )))
            }
        };
        if preset == Preset::Custom {
            for (name, present) in [
                ("grid_size", self.grid_size.is_some()),
                ("n_max", self.n_max.is_some()),
                ("time_step", self.time_step.is_some()),
            ] {
                if !present {
                    return Err(CliError::Config(format!("preset `custom` requires `{name}`")));
                }
            }
        }
        let paper_scale = self.paper_scale.unwrap_or(false);
        let d = SystemDefaults::of(system, paper_scale);
        let resolved = ResolvedConfig {
            preset,
            system,
            grid_size: self.grid_size.unwrap_or(d.grid_size),
            n_max: self.n_max.unwrap_or(d.n_max),
            kick_strength: match system {
                System::Cat => None,
                _ => Some(self.kick_strength.unwrap_or(d.kick_strength)),
            },
            time_step: self.time_step.unwrap_or(d.time_step),
            observable: self.observable.clone().unwrap_or(d.observable),
            directions: self.directions.clone().unwrap_or(d.directions),
            matrix: match system {
                System::Cat => Some(self.matrix.unwrap_or([[1, 1], [1, 2]])),
                _ => None,
            },
            order: self.order.unwrap_or(d.order),
            saturation_ratio: self.saturation_ratio.unwrap_or(DEFAULT_SATURATION_RATIO),
            unitarity_eps: self.unitarity_eps.unwrap_or(DEFAULT_UNITARITY_EPS),
            log_floor: self.log_floor.unwrap_or(DEFAULT_LOG_FLOOR),
            fit_min_n: self.fit_min_n.unwrap_or(2),
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(preset.name())),
            chart: self.chart.unwrap_or(true),
        };
        if system != System::Cat && self.matrix.is_some() {
            return Err(CliError::Config("`matrix` applies to the cat only".into()));
        }
        if system == System::Cat && self.kick_strength.is_some() {
            return Err(CliError::Config("`kick_strength` applies to rotors only".into()));
        }
        resolved.validate()?;
        Ok(resolved)
    }
}

struct SystemDefaults {
    grid_size: usize,
    n_max: usize,
    kick_strength: f64,
    time_step: f64,
    observable: Vec<i64>,
    directions: Vec<Vec<f64>>,
    order: Order,
}

impl SystemDefaults {
    fn of(system: System, paper_scale: bool) -> Self {
        let tau = 5f64.sqrt() / 2.0;
        match system {
            System::Cat => Self {
                grid_size: if paper_scale { CAT_PAPER_GRID } else { CAT_DESK_GRID },
                n_max: 30,
                kick_strength: 0.0,
                // (T/2)(2π)² = π: every accumulated free phase is a multiple of π
                time_step: 1.0 / (2.0 * PI),
                observable: vec![1, 1],
                directions: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                order: Order::KickThenFree,
            },
            System::RotorQuadratic => Self {
                grid_size: 4096,
                n_max: 300,
                kick_strength: 5.0,
                time_step: tau,
                observable: vec![1],
                directions: vec![vec![1.0]],
                order: Order::FreeThenKick,
            },
            System::RotorCosine => Self {
                grid_size: 16384,
                n_max: 300,
                kick_strength: 11.0,
                time_step: tau,
                observable: vec![1],
                directions: vec![vec![1.0]],
                order: Order::FreeThenKick,
            },
        }
    }
}

/// Fully specified run parameters; this is what gets persisted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub preset: Preset,
    pub system: System,
    pub grid_size: usize,
    pub n_max: usize,
    pub kick_strength: Option<f64>,
    pub time_step: f64,
    pub observable: Vec<i64>,
    pub directions: Vec<Vec<f64>>,
    pub matrix: Option<[[i64; 2]; 2]>,
    pub order: Order,
    pub saturation_ratio: f64,
    pub unitarity_eps: f64,
    pub log_floor: f64,
    pub fit_min_n: usize,
    pub output_dir: PathBuf,
    pub chart: bool,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ResolvedConfig {
    fn validate(&self) -> Result<(), CliError> {
        let dim = self.system.dim();
        if self.grid_size < PeriodicGrid::MIN_POINTS {
            return Err(invalid(format!(
                "grid_size must be at least {}",
                PeriodicGrid::MIN_POINTS
            )));
        }
        if self.system == System::Cat && self.grid_size > 8192 {
            return Err(invalid("grid_size above 8192 per axis is not supported on the torus"));
        }
        if self.n_max < 1 {
            return Err(invalid("n_max must be at least 1"));
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return Err(invalid("time_step must be finite and positive"));
        }
        if let Some(q) = self.kick_strength {
            if !q.is_finite() {
                return Err(invalid("kick_strength must be finite"));
            }
        }
        if self.observable.len() != dim || self.observable.iter().all(|&c| c == 0) {
            return Err(invalid(format!("observable must be a nonzero {dim}-vector")));
        }
        let grid = self.grid()?;
        let (lo, hi) = grid.band();
        if self.observable.iter().any(|&c| c < lo || c > hi) {
            return Err(invalid(format!("observable outside Fourier band [{lo}, {hi}]")));
        }
        if self.directions.is_empty() {
            return Err(invalid("at least one direction is required"));
        }
        for v in &self.directions {
            if v.len() != dim {
                return Err(invalid(format!("direction {v:?} must have {dim} components")));
            }
            Direction::new(v).map_err(|e| invalid(format!("direction {v:?}: {e}")))?;
        }
        if let Some(m) = self.matrix {
            CatMatrix::new(m).map_err(|e| invalid(e.to_string()))?;
        }
        if !(self.saturation_ratio.is_finite() && self.saturation_ratio >= 0.0) {
            return Err(invalid("saturation_ratio must be non-negative"));
        }
        if !(self.unitarity_eps.is_finite() && self.unitarity_eps > 0.0) {
            return Err(invalid("unitarity_eps must be positive"));
        }
        if !(self.log_floor > 0.0 && self.log_floor < 1.0) {
            return Err(invalid("log_floor must lie in (0, 1)"));
        }
        if self.fit_min_n < 1 {
            return Err(invalid("fit_min_n must be at least 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid, CliError> {
        PeriodicGrid::new(self.system.dim(), self.grid_size).map_err(CliError::Numerics)
    }

    pub fn guards(&self) -> Guards {
        Guards {
            saturation_ratio: self.saturation_ratio,
            unitarity_eps: self.unitarity_eps,
            log_floor: self.log_floor,
        }
    }

    pub fn directions(&self) -> Result<Vec<Direction>, CliError> {
        self.directions
            .iter()
            .map(|v| Direction::new(v).map_err(CliError::Numerics))
            .collect()
    }

    pub fn floquet_spec(&self) -> Result<FloquetSpec, CliError> {
        let kick = match self.system {
            System::Cat => KickSpec::Substitution(
                IntMatrix2::unimodular(self.matrix.unwrap_or([[1, 1], [1, 2]]))
                    .map_err(CliError::Numerics)?,
            ),
            _ => KickSpec::Multiplicative {
                strength: self.kick_strength.unwrap_or(0.0),
            },
        };
        Ok(FloquetSpec {
            grid: self.grid()?,
            kinetic: KineticSpec::new(self.system.kinetic(), self.time_step)
                .map_err(CliError::Numerics)?,
            kick,
            order: self.order,
        })
    }

    pub fn heisenberg_run(&self) -> Result<HeisenbergRun, CliError> {
        let floquet = Floquet::new(self.floquet_spec()?).map_err(CliError::Numerics)?;
        let obs = Observable::new(&self.observable).map_err(CliError::Numerics)?;
        HeisenbergRun::new(floquet, obs, self.n_max).map_err(CliError::Numerics)
    }

    /// Equivalent user config with every field explicit.
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            preset: Some(Preset::Custom),
            system: Some(self.system),
            grid_size: Some(self.grid_size),
            n_max: Some(self.n_max),
            kick_strength: self.kick_strength,
            time_step: Some(self.time_step),
            observable: Some(self.observable.clone()),
            directions: Some(self.directions.clone()),
            matrix: self.matrix,
            order: Some(self.order),
            saturation_ratio: Some(self.saturation_ratio),
            unitarity_eps: Some(self.unitarity_eps),
            log_floor: Some(self.log_floor),
            fit_min_n: Some(self.fit_min_n),
            paper_scale: None,
            output_dir: Some(self.output_dir.clone()),
            chart: Some(self.chart),
        }
    }
}
