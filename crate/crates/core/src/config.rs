//! TOML experiment and scene files.
//!
//! An experiment document looks like
//!
//! ```toml
//! version = 1
//! name = "example"
//! controller = "obstacle_aware"
//! seed = 7
//!
//! [plant]
//! mass = 1.0            # scalar (identity times m) or a full matrix
//! dt = 0.01
//! horizon = 5.0
//!
//! [damping]             # optional; defaults to 2 m/Δt, m/Δt, 0.1 m/Δt
//! s_obs = 200.0
//! s_follow = 100.0
//! s_compliant = 20.0
//! gamma_crit = 3.0
//!
//! [field]
//! kind = "linear_attractor"
//! attractor = [2.0, 0.0]
//! max_speed = 1.0
//!
//! [[obstacles]]         # or: scene_file = "scene.toml"
//! shape = "sphere"
//! center = [0.0, 0.0]
//! radius = 0.5
//!
//! [[starts]]
//! position = [-2.0, 0.0]
//! impulses = [{ start = 1.0, duration = 0.01, impact_velocity = [0.0, -1.5] }]
//! ```
//!
//! Unknown keys are errors. A scene file holds `version` and the
//! `[[obstacles]]` array only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerKind, DampingSpec, PlantModel};
use crate::flowfield::BaseField;
use crate::geometry::{Environment, Obstacle};
use crate::simulator::{
    DisturbanceSchedule, Impulse, Integrator, NoiseChannel, NoiseMode, NoiseSpec, PlantState,
    SimConfig,
};
use crate::{Error, Matrix, Result, Vector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleConfig {
    Sphere {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        margin: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_point: Option<Vec<f64>>,
    },
    Box {
        center: Vec<f64>,
        half_extents: Vec<f64>,
        #[serde(default)]
        margin: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_point: Option<Vec<f64>>,
    },
}

impl ObstacleConfig {
    pub fn build(&self) -> Result<Obstacle> {
        let (obstacle, margin, reference) = match self {
            ObstacleConfig::Sphere {
                center,
                radius,
                margin,
                reference_point,
            } => (
                Obstacle::sphere(vector(center), *radius)?,
                *margin,
                reference_point,
            ),
            ObstacleConfig::Box {
                center,
                half_extents,
                margin,
                reference_point,
            } => (
                Obstacle::aabb(vector(center), vector(half_extents))?,
                *margin,
                reference_point,
            ),
        };
        let obstacle = obstacle.with_margin(margin)?;
        match reference {
            Some(point) => obstacle.with_reference_point(vector(point)),
            None => Ok(obstacle),
        }
    }
}

/// Standalone scene document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub version: u32,
    #[serde(default)]
    pub obstacles: Vec<ObstacleConfig>,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: Self = toml::from_str(text).map_err(|e| Error::config(format!("scene: {e}")))?;
        check_version(scene.version)?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Environment> {
        build_environment(&self.obstacles)
    }
}

fn build_environment(obstacles: &[ObstacleConfig]) -> Result<Environment> {
    Environment::new(
        obstacles
            .iter()
            .map(ObstacleConfig::build)
            .collect::<Result<_>>()?,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    LinearAttractor {
        attractor: Vec<f64>,
        max_speed: f64,
    },
    Constant {
        direction: Vec<f64>,
        speed: f64,
    },
    RotatedLinear {
        attractor: Vec<f64>,
        angle: f64,
        max_speed: f64,
    },
}

impl FieldConfig {
    pub fn build(&self) -> Result<BaseField> {
        let field = match self {
            FieldConfig::LinearAttractor {
                attractor,
                max_speed,
            } => {
                positive("max_speed", *max_speed)?;
                BaseField::linear(vector(attractor), *max_speed)
            }
            FieldConfig::Constant { direction, speed } => {
                if !(*speed >= 0.0) {
                    return Err(Error::config(format!("speed must be >= 0, got {speed}")));
                }
                BaseField::constant(vector(direction), *speed)?
            }
            FieldConfig::RotatedLinear {
                attractor,
                angle,
                max_speed,
            } => {
                positive("max_speed", *max_speed)?;
                if attractor.len() < 2 {
                    return Err(Error::config(
                        "rotated_linear needs at least two dimensions",
                    ));
                }
                BaseField::RotatedLinear {
                    attractor: vector(attractor),
                    angle: *angle,
                    max_speed: *max_speed,
                }
            }
        };
        Ok(field)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    ObstacleAware,
    VelocityPreserving,
}

impl From<ControllerChoice> for ControllerKind {
    fn from(choice: ControllerChoice) -> Self {
        match choice {
            ControllerChoice::ObstacleAware => ControllerKind::ObstacleAware,
            ControllerChoice::VelocityPreserving => ControllerKind::VelocityPreserving,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorChoice {
    #[default]
    ExplicitEuler,
    SemiImplicit,
}

impl From<IntegratorChoice> for Integrator {
    fn from(choice: IntegratorChoice) -> Self {
        match choice {
            IntegratorChoice::ExplicitEuler => Integrator::ExplicitEuler,
            IntegratorChoice::SemiImplicit => Integrator::SemiImplicit,
        }
    }
}

/// Scalar mass (times identity) or full mass matrix, rows first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassConfig {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub mass: MassConfig,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<Vec<f64>>,
}

impl PlantConfig {
    pub fn build(&self, dim: usize) -> Result<PlantModel> {
        let mass = match &self.mass {
            MassConfig::Scalar(m) => {
                positive("mass", *m)?;
                Matrix::identity(dim, dim) * *m
            }
            MassConfig::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::config(format!("mass matrix must be {dim}x{dim}")));
                }
                Matrix::from_fn(dim, dim, |i, j| rows[i][j])
            }
        };
        let gravity = match &self.gravity {
            Some(g) => vector(g),
            None => Vector::zeros(dim),
        };
        PlantModel::new(mass, gravity).map_err(|e| match e {
            Error::DimensionMismatch { expected, found } => Error::config(format!(
                "gravity has dimension {found}, expected {expected}"
            )),
            other => Error::config(other.to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub s_obs: f64,
    pub s_follow: f64,
    pub s_compliant: f64,
    #[serde(default = "default_gamma_crit")]
    pub gamma_crit: f64,
}

fn default_gamma_crit() -> f64 {
    DampingSpec::DEFAULT_GAMMA_CRIT
}

/// External force window; give either `force` (N) or the resulting
/// `impact_velocity` (m/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    pub start: f64,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact_velocity: Option<Vec<f64>>,
}

impl ImpulseConfig {
    fn build(&self, plant: &PlantModel) -> Result<Impulse> {
        let force = match (&self.force, &self.impact_velocity) {
            (Some(force), None) => vector(force),
            (None, Some(velocity)) => {
                if !(self.duration > 0.0) {
                    return Err(Error::config("impulse duration must be positive"));
                }
                &plant.mass * vector(velocity) / self.duration
            }
            _ => {
                return Err(Error::config(
                    "impulse needs exactly one of `force` or `impact_velocity`",
                ))
            }
        };
        Ok(Impulse {
            start: self.start,
            duration: self.duration,
            force,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    pub position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impulses: Vec<ImpulseConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModeChoice {
    #[default]
    Measurement,
    Process,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub velocity_std: f64,
    #[serde(default)]
    pub position_std: f64,
    #[serde(default)]
    pub mode: NoiseModeChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelChoice {
    Velocity,
    Position,
}

impl From<ChannelChoice> for NoiseChannel {
    fn from(choice: ChannelChoice) -> Self {
        match choice {
            ChannelChoice::Velocity => NoiseChannel::Velocity,
            ChannelChoice::Position => NoiseChannel::Position,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub channel: ChannelChoice,
    pub levels: Vec<f64>,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub controller: ControllerChoice,
    #[serde(default)]
    pub integrator: IntegratorChoice,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_file: Option<PathBuf>,
    pub plant: PlantConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingConfig>,
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleConfig>,
    pub starts: Vec<StartConfig>,
}

/// An experiment with its scene resolved: one simulation per start.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub runs: Vec<SimConfig>,
    pub sweep: Option<(NoiseChannel, Vec<f64>, usize)>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        check_version(config.version)?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolves the scene (a relative `scene_file` is taken relative to
    /// `base_dir`), validates everything and builds one [`SimConfig`] per start.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Experiment> {
        let env = match (&self.scene_file, self.obstacles.is_empty()) {
            (Some(_), false) => {
                return Err(Error::config(
                    "give either `scene_file` or inline `obstacles`, not both",
                ))
            }
            (Some(path), true) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                if !path.is_file() {
                    return Err(Error::config(format!(
                        "scene file {} does not exist",
                        path.display()
                    )));
                }
                SceneConfig::load(&path)?.build()?
            }
            (None, _) => build_environment(&self.obstacles)?,
        };
        let field = self.field.build()?;
        let dim = field.dim();
        let plant = self.plant.build(dim)?;
        let damping = match &self.damping {
            Some(d) => DampingSpec::new(d.s_obs, d.s_follow, d.s_compliant, d.gamma_crit)?,
            None => DampingSpec::recommended(plant.min_mass(), self.plant.dt),
        };
        let noise = self.noise.clone().unwrap_or_default();
        let noise = NoiseSpec {
            velocity_std: noise.velocity_std,
            position_std: noise.position_std,
            seed: self.seed,
            mode: match noise.mode {
                NoiseModeChoice::Measurement => NoiseMode::Measurement,
                NoiseModeChoice::Process => NoiseMode::Process,
            },
        };
        if self.starts.is_empty() {
            return Err(Error::config("at least one `[[starts]]` entry is required"));
        }

        let mut runs = Vec::with_capacity(self.starts.len());
        for (i, start) in self.starts.iter().enumerate() {
            let xi = vector(&start.position);
            let xi_dot = match &start.velocity {
                Some(v) => vector(v),
                None => Vector::zeros(xi.len()),
            };
            if xi.len() != dim || xi_dot.len() != dim {
                return Err(Error::config(format!("start {i}: dimension must be {dim}")));
            }
            if env.obstacles().iter().any(|o| o.contains(&xi)) {
                return Err(Error::config(format!("start {i} lies inside an obstacle")));
            }
            let impulses = start
                .impulses
                .iter()
                .map(|imp| imp.build(&plant))
                .collect::<Result<Vec<_>>>()?;
            let config = SimConfig {
                env: env.clone(),
                field: field.clone(),
                plant: plant.clone(),
                controller: self.controller.into(),
                damping,
                dt: self.plant.dt,
                horizon: self.plant.horizon,
                start: PlantState { xi, xi_dot, t: 0.0 },
                noise,
                disturbance: DisturbanceSchedule::new(impulses),
                integrator: self.integrator.into(),
            };
            config
                .validate()
                .map_err(|e| Error::config(format!("start {i}: {e}")))?;
            runs.push(config);
        }

        let sweep = match &self.sweep {
            Some(s) => {
                if s.epochs == 0 {
                    return Err(Error::config("sweep epochs must be at least 1"));
                }
                if s.levels.is_empty() || s.levels.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
                    return Err(Error::config(
                        "sweep levels must be a non-empty list of finite values >= 0",
                    ));
                }
                Some((s.channel.into(), s.levels.clone(), s.epochs))
            }
            None => None,
        };

        Ok(Experiment {
            name: self
                .name
                .clone()
                .unwrap_or_else(|| "experiment".to_string()),
            runs,
            sweep,
            output_dir: self.output_dir.clone(),
        })
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "unsupported schema version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::config(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

fn vector(values: &[f64]) -> Vector {
    Vector::from_column_slice(values)
}

/// Bundled scenarios, as `(name, TOML text)`.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig_multi_obstacle",
        include_str!("../scenarios/fig_multi_obstacle.toml"),
    ),
    (
        "fig_noise_velocity",
        include_str!("../scenarios/fig_noise_velocity.toml"),
    ),
    (
        "fig_noise_position",
        include_str!("../scenarios/fig_noise_position.toml"),
    ),
    (
        "flat_wall_impulse",
        include_str!("../scenarios/flat_wall_impulse.toml"),
    ),
    (
        "divergent_damping",
        include_str!("../scenarios/divergent_damping.toml"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(preset, _)| *preset == name)
        .ok_or_else(|| {
            Error::config(format!(
                "unknown preset `{name}`; available: {}",
                preset_names().collect::<Vec<_>>().join(", ")
            ))
        })?;
    ExperimentConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
controller = "velocity_preserving"

[plant]
mass = 2.0
dt = 0.01
horizon = 1.0

[field]
kind = "constant"
direction = [1.0, 0.0]
speed = 0.5

[[starts]]
position = [0.0, 3.0]
"#;

    #[test]
    fn minimal_config_uses_recommended_damping() {
        let experiment = ExperimentConfig::from_toml(MINIMAL)
            .unwrap()
            .build(None)
            .unwrap();
        let run = &experiment.runs[0];
        assert!((run.damping.s_obs - 400.0).abs() < 1e-9);
        assert!((run.damping.s_follow - 200.0).abs() < 1e-9);
        assert!((run.damping.s_compliant - 20.0).abs() < 1e-9);
        assert_eq!(run.damping.gamma_crit, 3.0);
        assert!(run.env.is_empty());
        assert_eq!(run.controller, ControllerKind::VelocityPreserving);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("horizon = 1.0", "horizon = 1.0\ns_folow = 3.0");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let typo =
            format!("{MINIMAL}\n[damping]\ns_obs = 1.0\ns_follow = 1.0\ns_complaint = 1.0\n");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn version_is_checked() {
        assert!(
            ExperimentConfig::from_toml(&MINIMAL.replace("version = 1", "version = 2")).is_err()
        );
    }

    #[test]
    fn invalid_values_fail_validation() {
        let bad_dt = MINIMAL.replace("dt = 0.01", "dt = 0.0");
        assert!(ExperimentConfig::from_toml(&bad_dt)
            .unwrap()
            .build(None)
            .is_err());
        let short = MINIMAL.replace("horizon = 1.0", "horizon = 0.005");
        assert!(ExperimentConfig::from_toml(&short)
            .unwrap()
            .build(None)
            .is_err());
        let bad_dim = MINIMAL.replace("position = [0.0, 3.0]", "position = [0.0, 3.0, 1.0]");
        assert!(ExperimentConfig::from_toml(&bad_dim)
            .unwrap()
            .build(None)
            .is_err());
        let missing = MINIMAL.replace(
            "version = 1",
            "version = 1\nscene_file = \"/nonexistent/scene.toml\"",
        );
        assert!(ExperimentConfig::from_toml(&missing)
            .unwrap()
            .build(None)
            .is_err());
    }

    #[test]
    fn every_preset_round_trips_and_builds() {
        for (name, _) in PRESETS {
            let config = preset(name).unwrap();
            let text = config.to_toml().unwrap();
            let again = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(config, again, "{name}");
            config.build(None).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn impulse_by_impact_velocity() {
        let text = MINIMAL.replace(
            "position = [0.0, 3.0]",
            "position = [0.0, 3.0]\nimpulses = [{ start = 0.1, duration = 0.01, impact_velocity = [0.0, -1.0] }]",
        );
        let experiment = ExperimentConfig::from_toml(&text)
            .unwrap()
            .build(None)
            .unwrap();
        let impulse = &experiment.runs[0].disturbance.impulses[0];
        assert!((&impulse.force - Vector::from_column_slice(&[0.0, -200.0])).amax() < 1e-9);
    }

    #[test]
    fn scene_file_is_resolved_relative_to_the_config() {
        let dir = std::env::temp_dir().join(format!("oad-config-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("scene.toml"),
            "version = 1\n[[obstacles]]\nshape = \"box\"\ncenter = [0.0, 0.0]\nhalf_extents = [1.0, 0.5]\nmargin = 0.1\n",
        )
        .unwrap();
        let text = MINIMAL.replace(
            "controller = \"velocity_preserving\"",
            "controller = \"velocity_preserving\"\nscene_file = \"scene.toml\"",
        );
        let experiment = ExperimentConfig::from_toml(&text)
            .unwrap()
            .build(Some(&dir))
            .unwrap();
        assert_eq!(experiment.runs[0].env.len(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
