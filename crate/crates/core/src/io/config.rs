//! Run configuration as a single TOML document. Every section is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SynthSpec;
use crate::calibration::{ParameterBounds, DEFAULT_PASSES};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_K;
use crate::pv_model::{LossMode, LossParams, ModuleDatasheet, PlantConfig};
use crate::regressors::{ForestConfig, GridSearchSpec, MlpConfig, SvrConfig, DEFAULT_TEST_FRACTION};
use crate::solar_geometry::{SiteLocation, SurfaceOrientation};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub weather: Option<PathBuf>,
    pub measured: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSection {
    pub site: SiteLocation<f64>,
    /// Equator-facing at latitude tilt when absent.
    pub orientation: Option<SurfaceOrientation<f64>>,
    pub datasheet: ModuleDatasheet<f64>,
    pub losses: LossParams<f64>,
}

impl Default for PlantSection {
    /// Synthetic demonstration site.
    fn default() -> Self {
        Self {
            site: SiteLocation { latitude: 36.8, longitude: 10.2, altitude: 10.0, timezone_offset: 1.0 },
            orientation: None,
            datasheet: ModuleDatasheet::fixture(),
            losses: LossParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    /// Bounds for physical mode; unconstrained runs widen them when absent.
    pub bounds: Option<ParameterBounds>,
    pub passes: usize,
    /// Parameters to search; empty means all.
    pub free: Vec<String>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { bounds: None, passes: DEFAULT_PASSES, free: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: LossMode,
    /// Limits-of-agreement multiplier.
    pub k: f64,
    /// Tolerance of the percent-within figure in fit and validation reports, kW.
    pub eps: f64,
    pub test_fraction: f64,
    pub paths: Paths,
    pub plant: PlantSection,
    pub mlp: MlpConfig,
    pub forest: ForestConfig,
    pub svr: SvrConfig,
    pub grid: GridSearchSpec,
    pub calibration: CalibrationSettings,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: LossMode::Physical,
            k: DEFAULT_K,
            eps: 1.0,
            test_fraction: DEFAULT_TEST_FRACTION,
            paths: Paths::default(),
            plant: PlantSection::default(),
            mlp: MlpConfig::default(),
            forest: ForestConfig::default(),
            svr: SvrConfig::default(),
            grid: GridSearchSpec::default(),
            calibration: CalibrationSettings::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses the file and checks that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        for p in [&cfg.paths.weather, &cfg.paths.measured].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn plant_config(&self) -> Result<PlantConfig<f64>> {
        let site = self.plant.site;
        site.validate()?;
        let cfg = PlantConfig {
            site,
            orientation: self.plant.orientation.unwrap_or_else(|| SurfaceOrientation::facing_equator(&site)),
            datasheet: self.plant.datasheet,
            losses: self.plant.losses,
            mode: self.mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configured bounds, or the defaults of the run mode, restricted to `calibration.free`.
    pub fn calibration_bounds(&self) -> Result<ParameterBounds> {
        let mut bounds = self.calibration.bounds.clone().unwrap_or_else(|| ParameterBounds::for_mode(self.mode));
        if !self.calibration.free.is_empty() {
            let free = self.calibration.free.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
            bounds = bounds.only(&free);
        }
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::Config(format!("k = {} must be positive", self.k)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config(format!("eps = {} must be >= 0", self.eps)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!("test_fraction = {} must lie in [0, 1)", self.test_fraction)));
        }
        self.plant_config()?;
        self.calibration_bounds()?.validate(self.mode)
    }
}
