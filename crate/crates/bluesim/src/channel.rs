//! Random network instances and fading realizations.
//!
//! A network instance fixes the geometry: observation gains, observation
//! noise variances, and sensor-to-FC distances. Fading is redrawn per
//! Monte-Carlo trial on top of that fixed geometry, so the channel gain to
//! sensor i is
//!
//! ```text
//! g_i = eta0 * (d_i / d0)^(-alpha/2) * f_i
//! ```
//!
//! with `f_i` Rayleigh-distributed. "Unit variance" Rayleigh is read as unit
//! second moment (`E[f^2] = 1`), the usual convention for fading amplitudes;
//! the literal `Var[f] = 1` normalization is available as an option.

use rand::Rng;
use rand_distr::{Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, ChannelRealization, NetworkParams};
use crate::persist::{join, Reader};

/// Scale convention for the Rayleigh fading amplitude f.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayleighNormalization {
    /// E[f^2] = 1 (unit average power), scale sigma = 1/sqrt(2).
    #[default]
    UnitPower,
    /// Var[f] = 1, scale sigma = 1/sqrt(2 - pi/2).
    UnitVariance,
}

impl RayleighNormalization {
    /// Rayleigh scale parameter sigma for this convention.
    pub fn scale(self) -> f64 {
        match self {
            RayleighNormalization::UnitPower => std::f64::consts::FRAC_1_SQRT_2,
            RayleighNormalization::UnitVariance => {
                1.0 / (2.0 - std::f64::consts::FRAC_PI_2).sqrt()
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            RayleighNormalization::UnitPower => "unit-power",
            RayleighNormalization::UnitVariance => "unit-variance",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "unit-power" => Some(RayleighNormalization::UnitPower),
            "unit-variance" => Some(RayleighNormalization::UnitVariance),
            _ => None,
        }
    }
}

/// Distance-dependent path loss plus Rayleigh fading.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingModel {
    /// Nominal path gain at the reference distance, linear (not dB).
    pub nominal_gain: f64,
    /// Reference distance d0 in meters.
    pub ref_distance: f64,
    /// Path loss exponent alpha (applied as (d/d0)^(-alpha/2) on amplitude).
    pub path_loss_exp: f64,
    /// Minimum sensor-to-FC distance in meters.
    pub dist_min: f64,
    /// Maximum sensor-to-FC distance in meters.
    pub dist_max: f64,
    /// Scale convention for the fading amplitude.
    pub rayleigh: RayleighNormalization,
}

impl Default for FadingModel {
    /// Nominal gain -30 dB at d0 = 1 m, alpha = 2, distances uniform on
    /// [50, 150] m, unit-power Rayleigh.
    fn default() -> Self {
        FadingModel {
            nominal_gain: db_to_linear(-30.0),
            ref_distance: 1.0,
            path_loss_exp: 2.0,
            dist_min: 50.0,
            dist_max: 150.0,
            rayleigh: RayleighNormalization::default(),
        }
    }
}

impl FadingModel {
    /// Check field invariants; call after hand-building or deserializing.
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_gain > 0.0 && self.nominal_gain.is_finite()) {
            return Err(Error::InvalidConfig(
                "nominal path gain must be finite and positive".into(),
            ));
        }
        if !(self.ref_distance > 0.0 && self.ref_distance.is_finite()) {
            return Err(Error::InvalidConfig(
                "reference distance must be finite and positive".into(),
            ));
        }
        if !(self.path_loss_exp >= 0.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::InvalidConfig(
                "path loss exponent must be finite and nonnegative".into(),
            ));
        }
        if !(self.dist_min > 0.0 && self.dist_min <= self.dist_max && self.dist_max.is_finite()) {
            return Err(Error::InvalidConfig(
                "distance range must satisfy 0 < min <= max".into(),
            ));
        }
        Ok(())
    }

    /// Channel gain at `distance` for a given fading amplitude.
    ///
    /// Deterministic core of [`sample_fading`]; exposed so tests can pin the
    /// fading amplitude.
    pub fn gain_at(&self, distance: f64, fading_amplitude: f64) -> f64 {
        debug_assert!(distance > 0.0);
        self.nominal_gain
            * (distance / self.ref_distance).powf(-self.path_loss_exp / 2.0)
            * fading_amplitude
    }
}

/// Statistical description of the sensors' local observation quality.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    /// Prior variance of the source parameter.
    pub prior_variance: f64,
    /// Mean of the Gaussian observation gains h_i.
    pub obs_gain_mean: f64,
    /// Variance of the Gaussian observation gains h_i.
    pub obs_gain_var: f64,
    /// Lower end of the uniform observation-noise-variance range.
    pub obs_noise_var_min: f64,
    /// Upper end of the uniform observation-noise-variance range.
    pub obs_noise_var_max: f64,
    /// Channel noise variance at the FC, watts (same for every sensor).
    pub chan_noise_var: f64,
    /// Mean-square target for the optional observation-gain rescaling.
    pub h_power_target: f64,
    /// Rescale sampled h so its mean square equals `h_power_target`.
    /// Off by default: h ~ Normal(1, 0.09) already implies E[h^2] = 1.09.
    pub renormalize_obs_gains: bool,
}

impl Default for NetworkModel {
    /// h ~ Normal(1, 0.09), observation noise variance uniform on
    /// (0.05, 0.15), channel noise -90 dBm, prior variance 1.
    fn default() -> Self {
        NetworkModel {
            prior_variance: 1.0,
            obs_gain_mean: 1.0,
            obs_gain_var: 0.09,
            obs_noise_var_min: 0.05,
            obs_noise_var_max: 0.15,
            chan_noise_var: crate::model::dbm_to_watts(-90.0),
            h_power_target: 1.2,
            renormalize_obs_gains: false,
        }
    }
}

impl NetworkModel {
    /// Check field invariants; call after hand-building or deserializing.
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::InvalidConfig(
                "prior variance must be finite and positive".into(),
            ));
        }
        if !self.obs_gain_mean.is_finite() {
            return Err(Error::InvalidConfig(
                "observation gain mean must be finite".into(),
            ));
        }
        if !(self.obs_gain_var > 0.0 && self.obs_gain_var.is_finite()) {
            return Err(Error::InvalidConfig(
                "observation gain variance must be finite and positive".into(),
            ));
        }
        if !(self.obs_noise_var_min > 0.0
            && self.obs_noise_var_min <= self.obs_noise_var_max
            && self.obs_noise_var_max.is_finite())
        {
            return Err(Error::InvalidConfig(
                "observation noise variance range must satisfy 0 < min <= max".into(),
            ));
        }
        if !(self.chan_noise_var > 0.0 && self.chan_noise_var.is_finite()) {
            return Err(Error::InvalidConfig(
                "channel noise variance must be finite and positive".into(),
            ));
        }
        if !(self.h_power_target > 0.0 && self.h_power_target.is_finite()) {
            return Err(Error::InvalidConfig(
                "observation gain power target must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draw the observation-side network parameters for `k` sensors.
///
/// RNG consumption order: k observation gains, then k observation noise
/// variances.
pub fn sample_network<R: Rng>(
    model: &NetworkModel,
    k: usize,
    total_power: f64,
    rng: &mut R,
) -> Result<NetworkParams> {
    model.validate()?;
    let normal = Normal::new(model.obs_gain_mean, model.obs_gain_var.sqrt())
        .expect("validated std dev is finite and positive");
    let mut obs_gains: Vec<f64> = (0..k).map(|_| normal.sample(rng)).collect();
    let obs_noise_vars: Vec<f64> = (0..k)
        .map(|_| rng.random_range(model.obs_noise_var_min..model.obs_noise_var_max))
        .collect();

    if model.renormalize_obs_gains {
        let mean_square = obs_gains.iter().map(|h| h * h).sum::<f64>() / k as f64;
        debug_assert!(mean_square > 0.0);
        let scale = (model.h_power_target / mean_square).sqrt();
        for h in &mut obs_gains {
            *h *= scale;
        }
    }

    NetworkParams::new(
        model.prior_variance,
        obs_gains,
        obs_noise_vars,
        vec![model.chan_noise_var; k],
        total_power,
    )
}

/// Draw sensor-to-FC distances, i.i.d. uniform on [dist_min, dist_max).
pub fn sample_distances<R: Rng>(fading: &FadingModel, k: usize, rng: &mut R) -> Vec<f64> {
    debug_assert!(fading.validate().is_ok());
    (0..k)
        .map(|_| rng.random_range(fading.dist_min..fading.dist_max))
        .collect()
}

/// Draw one fading realization over fixed distances.
pub fn sample_fading<R: Rng>(
    fading: &FadingModel,
    distances: &[f64],
    rng: &mut R,
) -> ChannelRealization {
    debug_assert!(fading.validate().is_ok());
    // Rayleigh(sigma) == Weibull(scale = sigma*sqrt(2), shape = 2).
    let sigma = fading.rayleigh.scale();
    let rayleigh = Weibull::new(sigma * std::f64::consts::SQRT_2, 2.0)
        .expect("positive Rayleigh scale");
    let gains = distances
        .iter()
        .map(|&d| fading.gain_at(d, rayleigh.sample(rng)))
        .collect();
    ChannelRealization { gains }
}

/// A fully sampled network: observation parameters plus geometry, with the
/// fading model needed to redraw channel realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkInstance {
    pub params: NetworkParams,
    /// Sensor-to-FC distances in meters, fixed for the instance's lifetime.
    pub distances: Vec<f64>,
    pub fading: FadingModel,
}

const NETWORK_MAGIC: &str = "bluesim-network v1";

impl NetworkInstance {
    /// Draw a complete instance: network parameters, then distances.
    pub fn sample<R: Rng>(
        net: &NetworkModel,
        fading: &FadingModel,
        k: usize,
        total_power: f64,
        rng: &mut R,
    ) -> Result<Self> {
        fading.validate()?;
        let params = sample_network(net, k, total_power, rng)?;
        let distances = sample_distances(fading, k, rng);
        Ok(NetworkInstance {
            params,
            distances,
            fading: fading.clone(),
        })
    }

    /// Draw one fading realization over this instance's geometry.
    pub fn sample_fading<R: Rng>(&self, rng: &mut R) -> ChannelRealization {
        sample_fading(&self.fading, &self.distances, rng)
    }

    /// Write the instance as a versioned flat file (bit-exact round trip).
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let k = self.params.num_sensors();
        let mut out = String::new();
        out.push_str(NETWORK_MAGIC);
        out.push('\n');
        out.push_str(&format!("k = {k}\n"));
        out.push_str(&format!("prior_variance = {}\n", self.params.prior_variance));
        out.push_str(&format!("total_power = {}\n", self.params.total_power));
        out.push_str(&format!("nominal_gain = {}\n", self.fading.nominal_gain));
        out.push_str(&format!("ref_distance = {}\n", self.fading.ref_distance));
        out.push_str(&format!("path_loss_exp = {}\n", self.fading.path_loss_exp));
        out.push_str(&format!("dist_min = {}\n", self.fading.dist_min));
        out.push_str(&format!("dist_max = {}\n", self.fading.dist_max));
        out.push_str(&format!("rayleigh = {}\n", self.fading.rayleigh.name()));
        out.push_str(&format!("obs_gains = {}\n", join(&self.params.obs_gains)));
        out.push_str(&format!(
            "obs_noise_vars = {}\n",
            join(&self.params.obs_noise_vars)
        ));
        out.push_str(&format!(
            "chan_noise_vars = {}\n",
            join(&self.params.chan_noise_vars)
        ));
        out.push_str(&format!("distances = {}\n", join(&self.distances)));
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Read an instance written by [`NetworkInstance::save`].
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Reader::new(path, &text);
        r.expect_magic(NETWORK_MAGIC)?;
        let k = r.kv_usize("k")?;
        let prior_variance = r.kv_f64("prior_variance")?;
        let total_power = r.kv_f64("total_power")?;
        let fading = FadingModel {
            nominal_gain: r.kv_f64("nominal_gain")?,
            ref_distance: r.kv_f64("ref_distance")?,
            path_loss_exp: r.kv_f64("path_loss_exp")?,
            dist_min: r.kv_f64("dist_min")?,
            dist_max: r.kv_f64("dist_max")?,
            rayleigh: {
                let raw = r.kv("rayleigh")?;
                RayleighNormalization::from_name(raw).ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    reason: format!("unknown rayleigh normalization {raw:?}"),
                })?
            },
        };
        let obs_gains = r.kv_f64_vec("obs_gains", k)?;
        let obs_noise_vars = r.kv_f64_vec("obs_noise_vars", k)?;
        let chan_noise_vars = r.kv_f64_vec("chan_noise_vars", k)?;
        let distances = r.kv_f64_vec("distances", k)?;
        r.expect_end()?;
        fading.validate()?;
        let params = NetworkParams::new(
            prior_variance,
            obs_gains,
            obs_noise_vars,
            chan_noise_vars,
            total_power,
        )?;
        Ok(NetworkInstance {
            params,
            distances,
            fading,
        })
    }
}
