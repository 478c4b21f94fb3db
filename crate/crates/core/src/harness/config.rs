//! Scenario configuration: the normative schema, TOML/JSON loading and the
//! canonical resolved echo.

use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::grouping::GroupingConfig;
use crate::metrics::OspaParams;
use crate::motion::{BirthComponent, BirthModel, MotionModel};
use crate::rfs::{Kinematic, Label, LmbDensity};
use crate::sensors::{AcousticModel, PixelGrid, SensorModel, TbdModel};
use crate::smc::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    LmoGom,
    LmbGom,
    GLmbGom,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lmo-gom" => Ok(FilterKind::LmoGom),
            "lmb-gom" => Ok(FilterKind::LmbGom),
            "g-lmb-gom" => Ok(FilterKind::GLmbGom),
            other => Err(Error::InvalidConfig(format!(
                "unknown filter {other:?} (expected lmo-gom, lmb-gom or g-lmb-gom)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Sampling period in seconds.
    pub step_seconds: f64,
    /// Process noise standard deviation.
    pub noise_sigma: f64,
    /// Survival probability.
    pub survival: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            step_seconds: 1.0,
            noise_sigma: 0.01,
            survival: 0.98,
        }
    }
}

impl MotionConfig {
    pub fn build(&self) -> Result<MotionModel> {
        MotionModel::constant_velocity(self.step_seconds, self.noise_sigma, self.survival)
    }
}

fn default_cell() -> f64 {
    1.0
}
fn default_source_intensity() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_blur() -> f64 {
    1.0
}
fn default_template_half() -> usize {
    3
}
fn default_path_loss() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SensorConfig {
    Tbd {
        width: usize,
        height: usize,
        #[serde(default = "default_cell")]
        cell_width: f64,
        #[serde(default = "default_cell")]
        cell_height: f64,
        #[serde(default = "default_source_intensity")]
        source_intensity: f64,
        #[serde(default = "default_blur")]
        blur_var: f64,
        #[serde(default = "default_template_half")]
        template_half: usize,
        /// Noise is the primitive; `snr_db` derives it through the declared
        /// mapping when set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise_var: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snr_db: Option<f64>,
    },
    Acoustic {
        grid_nx: usize,
        grid_ny: usize,
        extent_x: f64,
        extent_y: f64,
        amplitude: f64,
        #[serde(default = "default_path_loss")]
        path_loss: f64,
        noise_var: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_range: Option<f64>,
    },
}

impl SensorConfig {
    pub fn build(&self) -> Result<SensorModel> {
        match self {
            SensorConfig::Tbd {
                width,
                height,
                cell_width,
                cell_height,
                source_intensity,
                blur_var,
                template_half,
                noise_var,
                snr_db,
            } => {
                let grid = PixelGrid::new(*width, *height, *cell_width, *cell_height)?;
                let model = TbdModel::new(grid, *source_intensity, *blur_var, 1.0, *template_half)?;
                let model = match (snr_db, noise_var) {
                    (Some(snr), _) => model.with_snr_db(*snr),
                    (None, Some(var)) => TbdModel { noise_var: *var, ..model },
                    (None, None) => {
                        return Err(Error::InvalidConfig(
                            "TBD sensor needs noise_var or snr_db".into(),
                        ))
                    }
                };
                Ok(SensorModel::Tbd(model))
            }
            SensorConfig::Acoustic {
                grid_nx,
                grid_ny,
                extent_x,
                extent_y,
                amplitude,
                path_loss,
                noise_var,
                min_range,
            } => {
                let mut model = AcousticModel::grid(
                    *grid_nx, *grid_ny, *extent_x, *extent_y, *amplitude, *path_loss, *noise_var,
                )?;
                if let Some(r) = min_range {
                    if *r <= 0.0 {
                        return Err(Error::InvalidConfig("min_range must be positive".into()));
                    }
                    model.min_range = *r;
                }
                Ok(SensorModel::Acoustic(model))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Waypoint {
    pub step: usize,
    pub x: f64,
    pub y: f64,
}

/// One ground-truth object: alive on steps `birth_step <= k < death_step`,
/// initialized at `init` and propagated through the motion model, or pinned
/// to piecewise-linear waypoints when given.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub birth_step: usize,
    pub death_step: usize,
    pub init: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<Waypoint>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BirthComponentConfig {
    pub existence: f64,
    pub mean: [f64; 4],
    pub cov_diag: [f64; 4],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BirthConfig {
    pub components: Vec<BirthComponentConfig>,
}

impl BirthConfig {
    pub fn build(&self) -> Result<BirthModel> {
        BirthModel::new(
            self.components
                .iter()
                .map(|c| BirthComponent {
                    existence: c.existence,
                    mean: Vector4::from_column_slice(&c.mean),
                    covariance: Matrix4::from_diagonal(&Vector4::from_column_slice(&c.cov_diag)),
                })
                .collect(),
        )
    }
}

fn default_init_existence() -> f64 {
    0.95
}
fn default_init_cov() -> [f64; 4] {
    [2.0, 2.0, 0.5, 0.5]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitTrackConfig {
    /// `(birth_time, birth_index)`; defaults to `(0, position+1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<[u32; 2]>,
    #[serde(default = "default_init_existence")]
    pub existence: f64,
    pub mean: [f64; 4],
    #[serde(default = "default_init_cov")]
    pub cov_diag: [f64; 4],
}

/// The complete experiment description; the resolved echo of this struct in
/// canonical JSON reproduces the experiment exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub runs: usize,
    /// Number of time steps.
    pub duration: usize,
    pub filter: FilterKind,
    #[serde(default)]
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    #[serde(default)]
    pub trajectories: Vec<TrajectoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth: Option<BirthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_tracks: Option<Vec<InitTrackConfig>>,
    #[serde(default)]
    pub filter_config: FilterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<GroupingConfig>,
    #[serde(default)]
    pub ospa: OspaParams,
    #[serde(default)]
    pub export_frames: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.duration == 0 {
            return Err(Error::InvalidConfig(
                "runs and duration must be positive".into(),
            ));
        }
        self.filter_config.validate()?;
        for (i, t) in self.trajectories.iter().enumerate() {
            if t.death_step <= t.birth_step {
                return Err(Error::InvalidConfig(format!(
                    "trajectory {i}: death_step must exceed birth_step"
                )));
            }
            if let Some(w) = &t.waypoints {
                if w.len() < 2 || w.windows(2).any(|p| p[1].step <= p[0].step) {
                    return Err(Error::InvalidConfig(format!(
                        "trajectory {i}: waypoints must be at least two, strictly increasing"
                    )));
                }
            }
        }
        if self.filter == FilterKind::GLmbGom && self.grouping.is_none() {
            return Err(Error::InvalidConfig(
                "g-lmb-gom requires a [grouping] section".into(),
            ));
        }
        if self.birth.is_none() && self.init_tracks.as_ref().map_or(true, |v| v.is_empty()) {
            return Err(Error::InvalidConfig(
                "scenario needs birth components or init_tracks".into(),
            ));
        }
        self.sensor.build()?;
        self.motion.build()?;
        Ok(())
    }

    pub fn birth_model(&self) -> Result<BirthModel> {
        match &self.birth {
            Some(b) => b.build(),
            None => Ok(BirthModel::none()),
        }
    }

    /// The initial multi-Bernoulli state sampled from the init tracks.
    pub fn initial_density(
        &self,
        particles: usize,
        stream: RandomStream,
    ) -> Result<LmbDensity<Kinematic>> {
        let Some(init) = &self.init_tracks else {
            return Ok(LmbDensity::empty());
        };
        let mut tracks = Vec::with_capacity(init.len());
        for (i, t) in init.iter().enumerate() {
            let label = t
                .label
                .map(|l| Label::new(l[0], l[1]))
                .unwrap_or_else(|| Label::new(0, i as u32 + 1));
            let mean = Vector4::from_column_slice(&t.mean);
            let sigmas = Vector4::from_column_slice(&t.cov_diag).map(f64::sqrt);
            let mut rng = stream.child(i as u64).rng();
            let w = 1.0 / particles as f64;
            let cloud: Vec<(f64, Kinematic)> = (0..particles)
                .map(|_| {
                    let z = Vector4::from_fn(|_, _| {
                        rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
                    });
                    (w, mean + sigmas.component_mul(&z))
                })
                .collect();
            tracks.push((label, t.existence, cloud));
        }
        LmbDensity::new(tracks)
    }

    /// Canonical JSON echo of the resolved configuration.
    pub fn echo_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde {
            context: "serializing resolved config".into(),
            source: Box::new(e),
        })
    }
}

/// Loads a scenario from TOML (default) or JSON (by `.json` extension).
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let cfg: ScenarioConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Serde {
            context: format!("parsing {}", path.display()),
            source: Box::new(e),
        })?
    } else {
        toml::from_str(&text).map_err(|e| Error::Serde {
            context: format!("parsing {}", path.display()),
            source: Box::new(e),
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
seed = 7
runs = 2
duration = 5
filter = "lmb-gom"

[motion]
noise_sigma = 0.1

[sensor]
kind = "tbd"
width = 20
height = 20
snr_db = 15.0

[[trajectories]]
birth_step = 0
death_step = 5
init = [10.0, 10.0, 0.1, 0.0]

[[init_tracks]]
mean = [10.0, 10.0, 0.1, 0.0]
"#
    }

    #[test]
    fn toml_parses_and_validates() {
        let cfg: ScenarioConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.filter, FilterKind::LmbGom);
        assert!((cfg.motion.survival - 0.98).abs() < 1e-12);
        assert_eq!(cfg.filter_config.extraction_threshold, 0.5);
    }

    #[test]
    fn echo_round_trips_through_json() {
        let cfg: ScenarioConfig = toml::from_str(minimal_toml()).unwrap();
        let echo = cfg.echo_json().unwrap();
        let reloaded: ScenarioConfig = serde_json::from_str(&echo).unwrap();
        reloaded.validate().unwrap();
        assert_eq!(echo, reloaded.echo_json().unwrap());
    }

    #[test]
    fn rejects_bad_trajectory_windows() {
        let mut cfg: ScenarioConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.trajectories[0].death_step = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let with_typo = format!("bogus_field = 3\n{}", minimal_toml());
        assert!(toml::from_str::<ScenarioConfig>(&with_typo).is_err());
    }
}
