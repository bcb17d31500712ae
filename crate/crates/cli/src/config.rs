//! Run configuration: defaults, optional JSON file, flag overrides on top.

use std::path::{Path, PathBuf};

use mapreg::io::read_json;
use mapreg::{
    IcpConfig, MatchConfig, PerturbationModel, RansacConfig, RegisterConfig, SuccessThreshold,
    VoxelGridParams,
};
use serde::{Deserialize, Serialize};

use crate::commands::CommandError;

/// Everything a command might need. Unset paths fall back to per-command
/// flags; numeric blocks mirror the library configs field for field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    pub scans: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub feature_maps: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub matching: MatchConfig,
    pub ransac: RansacConfig,
    pub icp: IcpConfig,
    pub voxel: VoxelGridParams,
    pub threshold: SuccessThreshold,
    pub perturbation: PerturbationModel,
    /// Scan reduction factor applied before matching.
    pub downsample_factor: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let register = RegisterConfig::default();
        Self {
            map: None,
            scans: None,
            calibration: None,
            feature_maps: None,
            output: None,
            matching: register.matching,
            ransac: register.ransac,
            icp: register.icp,
            voxel: VoxelGridParams::default(),
            threshold: SuccessThreshold::default(),
            perturbation: PerturbationModel::default(),
            downsample_factor: register.downsample_factor,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Defaults, then the JSON file when given, then the --seed flag on top.
    pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> Result<Self, CommandError> {
        let mut cfg: Self = match path {
            Some(p) => {
                if !p.is_file() {
                    return Err(CommandError::MissingInput(format!(
                        "config file not found: {}",
                        p.display()
                    )));
                }
                read_json(p)?
            }
            None => Self::default(),
        };
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    pub fn register_config(&self) -> RegisterConfig {
        RegisterConfig {
            matching: self.matching,
            ransac: self.ransac,
            icp: self.icp,
            downsample_factor: self.downsample_factor,
            seed: self.seed,
        }
    }
}
