//! Experiment configuration: TOML schema, defaults, and validation.
//!
//! Config files speak field units (dB, dBm, meters); the simulation works in
//! linear watts. Conversion happens once, in [`FadingConfig::to_model`] and
//! [`NetworkConfig::to_model`]. Every field has a default, so a config file
//! only lists overrides; unknown keys are rejected to catch typos.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{FadingModel, NetworkModel, RayleighNormalization};
use crate::error::{Error, Result};
use crate::estimator::SourceDistribution;
use crate::model::{db_to_linear, dbm_to_watts, watts_to_dbm};
use crate::results::OutputFormat;

/// One sweep point in both unit systems. The dBm value is the reporting
/// label; the watt value drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub watts: f64,
    pub dbm: f64,
}

/// Total transmit power sweep: an evenly spaced dBm range or explicit watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSweep {
    DbmRange {
        start_dbm: f64,
        stop_dbm: f64,
        num_points: usize,
    },
    Watts {
        watts: Vec<f64>,
    },
}

impl Default for PowerSweep {
    /// 16 points from 5 dBm to 20 dBm, which produces visibly decreasing
    /// variance curves under the default channel constants.
    fn default() -> Self {
        PowerSweep::DbmRange {
            start_dbm: 5.0,
            stop_dbm: 20.0,
            num_points: 16,
        }
    }
}

impl PowerSweep {
    fn validate(&self) -> Result<()> {
        match self {
            PowerSweep::DbmRange {
                start_dbm,
                stop_dbm,
                num_points,
            } => {
                if !(start_dbm.is_finite() && stop_dbm.is_finite() && start_dbm <= stop_dbm) {
                    return Err(Error::InvalidConfig(
                        "power sweep must satisfy start_dbm <= stop_dbm".into(),
                    ));
                }
                if *num_points == 0 {
                    return Err(Error::InvalidConfig(
                        "power sweep needs at least one point".into(),
                    ));
                }
            }
            PowerSweep::Watts { watts } => {
                if watts.is_empty() {
                    return Err(Error::InvalidConfig(
                        "power sweep needs at least one point".into(),
                    ));
                }
                if watts.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::InvalidConfig(
                        "power sweep watts must be finite and positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Sweep points in sweep order. For a dBm range the labels are spaced
    /// exactly (endpoints included verbatim); explicit watt lists get their
    /// labels by conversion.
    pub fn points(&self) -> Vec<SweepPoint> {
        match self {
            PowerSweep::DbmRange {
                start_dbm,
                stop_dbm,
                num_points,
            } => (0..*num_points)
                .map(|i| {
                    let dbm = if *num_points == 1 {
                        *start_dbm
                    } else if i == *num_points - 1 {
                        *stop_dbm
                    } else {
                        let t = i as f64 / (*num_points - 1) as f64;
                        start_dbm + t * (stop_dbm - start_dbm)
                    };
                    SweepPoint {
                        watts: dbm_to_watts(dbm),
                        dbm,
                    }
                })
                .collect(),
            PowerSweep::Watts { watts } => watts
                .iter()
                .map(|&w| SweepPoint {
                    watts: w,
                    dbm: watts_to_dbm(w),
                })
                .collect(),
        }
    }

    /// Sweep points in watts, in sweep order.
    pub fn to_watts(&self) -> Vec<f64> {
        self.points().iter().map(|pt| pt.watts).collect()
    }
}

/// Path loss and fading block, file-facing units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingConfig {
    pub nominal_gain_db: f64,
    pub ref_distance_m: f64,
    pub path_loss_exp: f64,
    pub dist_min_m: f64,
    pub dist_max_m: f64,
    pub rayleigh: RayleighNormalization,
}

impl Default for FadingConfig {
    fn default() -> Self {
        FadingConfig {
            nominal_gain_db: -30.0,
            ref_distance_m: 1.0,
            path_loss_exp: 2.0,
            dist_min_m: 50.0,
            dist_max_m: 150.0,
            rayleigh: RayleighNormalization::default(),
        }
    }
}

impl FadingConfig {
    pub fn to_model(&self) -> FadingModel {
        FadingModel {
            nominal_gain: db_to_linear(self.nominal_gain_db),
            ref_distance: self.ref_distance_m,
            path_loss_exp: self.path_loss_exp,
            dist_min: self.dist_min_m,
            dist_max: self.dist_max_m,
            rayleigh: self.rayleigh,
        }
    }
}

/// Observation-side statistics block, file-facing units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub prior_variance: f64,
    pub obs_gain_mean: f64,
    pub obs_gain_var: f64,
    pub obs_noise_var_min: f64,
    pub obs_noise_var_max: f64,
    pub chan_noise_dbm: f64,
    pub h_power_target: f64,
    pub renormalize_obs_gains: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let m = NetworkModel::default();
        NetworkConfig {
            prior_variance: m.prior_variance,
            obs_gain_mean: m.obs_gain_mean,
            obs_gain_var: m.obs_gain_var,
            obs_noise_var_min: m.obs_noise_var_min,
            obs_noise_var_max: m.obs_noise_var_max,
            chan_noise_dbm: -90.0,
            h_power_target: m.h_power_target,
            renormalize_obs_gains: m.renormalize_obs_gains,
        }
    }
}

impl NetworkConfig {
    pub fn to_model(&self) -> NetworkModel {
        NetworkModel {
            prior_variance: self.prior_variance,
            obs_gain_mean: self.obs_gain_mean,
            obs_gain_var: self.obs_gain_var,
            obs_noise_var_min: self.obs_noise_var_min,
            obs_noise_var_max: self.obs_noise_var_max,
            chan_noise_var: dbm_to_watts(self.chan_noise_dbm),
            h_power_target: self.h_power_target,
            renormalize_obs_gains: self.renormalize_obs_gains,
        }
    }
}

/// Destination for experiment records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: PathBuf::from("results.csv"),
            format: OutputFormat::Csv,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Network sizes to sweep; one geometry is sampled per (K, seed).
    pub k_values: Vec<usize>,
    /// Feedback budgets to sweep; may be empty for full feedback only.
    pub l_values: Vec<u32>,
    pub power_sweep: PowerSweep,
    /// Training-set size M for codebook design.
    pub training_size: usize,
    /// Lloyd stop threshold on the per-round distortion decrease.
    pub distortion_epsilon: f64,
    /// Monte-Carlo evaluation trials per sweep point.
    pub mc_trials: usize,
    /// Every random stream in the experiment derives from this seed.
    pub master_seed: u64,
    /// Source distribution used by measurement-level simulation.
    pub theta: SourceDistribution,
    /// Redraw geometry (h, noise, distances) each trial instead of fixing it
    /// per experiment. Codebooks are still designed for the base geometry.
    pub resample_geometry_per_trial: bool,
    /// Cache trained codebooks on disk, keyed by a config digest.
    pub cache_dir: Option<PathBuf>,
    pub fading: FadingConfig,
    pub network: NetworkConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    /// Study defaults: K in {5, 10}, L in {2, 4}, M = 5000, epsilon = 1e-6,
    /// 5000 trials (a CI-scale stand-in for the full 50000).
    fn default() -> Self {
        ExperimentConfig {
            k_values: vec![5, 10],
            l_values: vec![2, 4],
            power_sweep: PowerSweep::default(),
            training_size: 5000,
            distortion_epsilon: 1e-6,
            mc_trials: 5000,
            master_seed: 1,
            theta: SourceDistribution::default(),
            resample_geometry_per_trial: false,
            cache_dir: None,
            fading: FadingConfig::default(),
            network: NetworkConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse a TOML config file. Validation is separate: parsing rejects
    /// malformed or unknown keys, [`validate`](Self::validate) checks values.
    /// Parse failures are config errors (exit 1), unlike damaged data
    /// artifacts (exit 3), so they map to [`Error::InvalidConfig`].
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Check all invariants, including the model blocks.
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::InvalidConfig("k_values must not be empty".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::InvalidConfig("k_values must be positive".into()));
        }
        if let Some(&l) = self.l_values.iter().find(|&&l| l > 16) {
            return Err(Error::InvalidConfig(format!(
                "l = {l} feedback bits is out of range (max 16)"
            )));
        }
        // Training needs comfortably more samples than codewords, not the
        // bare 2^L the trainer itself requires.
        if let Some(&max_l) = self.l_values.iter().max() {
            let needed = 4 * (1usize << max_l);
            if self.training_size < needed {
                return Err(Error::InvalidConfig(format!(
                    "training_size = {} is too small for l = {max_l}: need at least {needed}",
                    self.training_size
                )));
            }
        }
        if self.training_size == 0 {
            return Err(Error::InvalidConfig("training_size must be positive".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::InvalidConfig("mc_trials must be positive".into()));
        }
        if !(self.distortion_epsilon > 0.0 && self.distortion_epsilon.is_finite()) {
            return Err(Error::InvalidConfig(
                "distortion_epsilon must be finite and positive".into(),
            ));
        }
        self.power_sweep.validate()?;
        self.fading.to_model().validate()?;
        self.network.to_model().validate()?;
        Ok(())
    }
}
