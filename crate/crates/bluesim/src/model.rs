//! Core domain types and per-sensor derived quantities.
//!
//! Conventions used throughout the crate:
//!
//! - All powers and variances are stored in **watts** (linear units).
//!   dBm inputs convert as `watts = 10^((dBm - 30) / 10)`; dB gains convert
//!   as `10^(dB / 10)`.
//! - Per-sensor vectors are indexed `0..K` and always carry their length.
//! - Types are immutable value objects after construction; constructors
//!   validate invariants once so downstream math can assume them.

use crate::error::{Error, Result};

/// Convert a dB quantity to linear scale: `10^(x/10)`.
pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Convert a dBm power to watts: `10^((x-30)/10)`.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm - 30.0)
}

/// Convert a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Static description of the sensor network.
///
/// Holds everything that does not change between channel realizations: the
/// observation gains `h`, the observation and channel noise variances, the
/// prior variance of the estimated parameter, and the total transmit power
/// budget shared by all sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Prior variance of the estimated parameter (linear units).
    pub prior_variance: f64,
    /// Local observation gains `h_i`; may be any real, formulas use `h_i^2`.
    pub obs_gains: Vec<f64>,
    /// Observation noise variances, one per sensor, all positive.
    pub obs_noise_vars: Vec<f64>,
    /// Channel noise variances at the fusion center, one per sensor, watts.
    pub chan_noise_vars: Vec<f64>,
    /// Total transmit power budget in watts.
    pub total_power: f64,
}

impl NetworkParams {
    /// Build a validated network description.
    ///
    /// Requires at least one sensor, matching vector lengths, strictly
    /// positive variances, and a positive power budget.
    pub fn new(
        prior_variance: f64,
        obs_gains: Vec<f64>,
        obs_noise_vars: Vec<f64>,
        chan_noise_vars: Vec<f64>,
        total_power: f64,
    ) -> Result<Self> {
        let k = obs_gains.len();
        if k == 0 {
            return Err(Error::InvalidConfig("network needs at least one sensor".into()));
        }
        for (name, v) in [("obs_noise_vars", &obs_noise_vars), ("chan_noise_vars", &chan_noise_vars)] {
            if v.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: v.len() });
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and positive")));
            }
        }
        if !(prior_variance.is_finite() && prior_variance > 0.0) {
            return Err(Error::InvalidConfig("prior_variance must be finite and positive".into()));
        }
        if !(total_power.is_finite() && total_power > 0.0) {
            return Err(Error::InvalidConfig("total_power must be finite and positive".into()));
        }
        if obs_gains.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("obs_gains must be finite".into()));
        }
        Ok(Self { prior_variance, obs_gains, obs_noise_vars, chan_noise_vars, total_power })
    }

    /// Number of sensors `K`.
    pub fn num_sensors(&self) -> usize {
        self.obs_gains.len()
    }

    /// Same network with a different total power budget (used by sweeps).
    pub fn with_total_power(&self, total_power: f64) -> Result<Self> {
        if !(total_power.is_finite() && total_power > 0.0) {
            return Err(Error::InvalidConfig("total_power must be finite and positive".into()));
        }
        let mut p = self.clone();
        p.total_power = total_power;
        Ok(p)
    }
}

/// One draw of the per-sensor fading magnitudes `g_i` (path loss included).
///
/// Magnitudes are stored; all formulas use `g_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<f64>,
}

impl ChannelRealization {
    /// Wrap fading magnitudes, rejecting negative or non-finite entries.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidConfig("channel magnitudes must be finite and >= 0".into()));
        }
        Ok(Self { gains })
    }

    pub fn num_sensors(&self) -> usize {
        self.gains.len()
    }
}

/// A length-K vector of local amplification gains `a_i >= 0`.
///
/// This is both the output of the optimal allocator and the payload of a
/// codebook row. Gains produced by the allocator spend the whole power
/// budget; arbitrary gain vectors may spend less.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    pub gains: Vec<f64>,
}

impl GainVector {
    /// Wrap amplification gains, rejecting negative or non-finite entries.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidConfig("amplification gains must be finite and >= 0".into()));
        }
        Ok(Self { gains })
    }

    /// All-zero gains (every sensor silent).
    pub fn zeros(k: usize) -> Self {
        Self { gains: vec![0.0; k] }
    }

    pub fn num_sensors(&self) -> usize {
        self.gains.len()
    }

    /// Total transmit power this gain vector spends under `params`.
    pub fn total_power(&self, params: &NetworkParams) -> f64 {
        (0..self.gains.len().min(params.num_sensors()))
            .map(|i| sensor_power(params, self, i))
            .sum()
    }
}

/// Per-sensor derived signal-to-noise quantities.
///
/// `osnr[i] = h_i^2 * prior_variance / obs_noise_var_i` (observation SNR),
/// `csnr[i] = g_i^2 / chan_noise_var_i` (channel SNR), and
/// `delta[i] = osnr * csnr / (1 + osnr)`, the composite quality metric that
/// decides which sensors receive transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSnr {
    pub osnr: Vec<f64>,
    pub csnr: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Compute the per-sensor observation SNR, channel SNR, and composite metric.
pub fn compute_snrs(params: &NetworkParams, chan: &ChannelRealization) -> Result<DerivedSnr> {
    let k = params.num_sensors();
    if chan.num_sensors() != k {
        return Err(Error::DimensionMismatch { expected: k, got: chan.num_sensors() });
    }
    let mut osnr = Vec::with_capacity(k);
    let mut csnr = Vec::with_capacity(k);
    let mut delta = Vec::with_capacity(k);
    for i in 0..k {
        let h = params.obs_gains[i];
        let beta = h * h * params.prior_variance / params.obs_noise_vars[i];
        let g = chan.gains[i];
        let gamma = g * g / params.chan_noise_vars[i];
        osnr.push(beta);
        csnr.push(gamma);
        delta.push(beta * gamma / (1.0 + beta));
    }
    Ok(DerivedSnr { osnr, csnr, delta })
}

/// Instantaneous transmit power of sensor `i`:
/// `a_i^2 * obs_noise_var_i * (1 + osnr_i)`.
pub fn sensor_power(params: &NetworkParams, a: &GainVector, i: usize) -> f64 {
    let h = params.obs_gains[i];
    let so2 = params.obs_noise_vars[i];
    let beta = h * h * params.prior_variance / so2;
    a.gains[i] * a.gains[i] * so2 * (1.0 + beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params_k1(h: f64, so2: f64) -> NetworkParams {
        NetworkParams::new(1.0, vec![h], vec![so2], vec![1e-12], 1.0).unwrap()
    }

    #[test]
    fn db_conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(db_to_linear(-30.0), 0.001, max_relative = 1e-15);
        assert_relative_eq!(db_to_linear(-90.0), 1e-9, max_relative = 1e-15);
        // -90 dBm is 1e-9 mW, i.e. 1e-12 W
        assert_relative_eq!(dbm_to_watts(-90.0), 1e-12, max_relative = 1e-15);
        assert_relative_eq!(watts_to_dbm(1e-12), -90.0, max_relative = 1e-12);
    }

    #[test]
    fn snrs_zero_channel() {
        let params = params_k1(1.0, 0.1);
        let chan = ChannelRealization::new(vec![0.0]).unwrap();
        let snr = compute_snrs(&params, &chan).unwrap();
        assert_relative_eq!(snr.osnr[0], 10.0, max_relative = 1e-12);
        assert_eq!(snr.csnr[0], 0.0);
        assert_eq!(snr.delta[0], 0.0);
    }

    #[test]
    fn snrs_hand_computed() {
        // beta = 10, gamma = (1e-5)^2 / 1e-12 = 100, delta = 10*100/11
        let params = params_k1(1.0, 0.1);
        let chan = ChannelRealization::new(vec![1e-5]).unwrap();
        let snr = compute_snrs(&params, &chan).unwrap();
        assert_relative_eq!(snr.csnr[0], 100.0, max_relative = 1e-12);
        assert_relative_eq!(snr.delta[0], 1000.0 / 11.0, max_relative = 1e-12);
    }

    #[test]
    fn snrs_identical_sensors_symmetric() {
        let params =
            NetworkParams::new(1.0, vec![0.8, 0.8], vec![0.1, 0.1], vec![1e-12, 1e-12], 1.0)
                .unwrap();
        let chan = ChannelRealization::new(vec![2e-5, 2e-5]).unwrap();
        let snr = compute_snrs(&params, &chan).unwrap();
        assert_eq!(snr.osnr[0], snr.osnr[1]);
        assert_eq!(snr.csnr[0], snr.csnr[1]);
        assert_eq!(snr.delta[0], snr.delta[1]);
    }

    #[test]
    fn snrs_dimension_mismatch() {
        let params = params_k1(1.0, 0.1);
        let chan = ChannelRealization::new(vec![1e-5, 1e-5]).unwrap();
        assert!(matches!(
            compute_snrs(&params, &chan),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn sensor_power_silent_and_direct() {
        let params = params_k1(1.0, 0.1);
        let silent = GainVector::zeros(1);
        assert_eq!(sensor_power(&params, &silent, 0), 0.0);
        // a=1, h=1, prior=1, so2=0.1 -> 1*0.1*(1+10) = 1.1
        let a = GainVector::new(vec![1.0]).unwrap();
        assert_relative_eq!(sensor_power(&params, &a, 0), 1.1, max_relative = 1e-12);
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(NetworkParams::new(1.0, vec![], vec![], vec![], 1.0).is_err());
        assert!(NetworkParams::new(1.0, vec![1.0], vec![0.0], vec![1e-12], 1.0).is_err());
        assert!(NetworkParams::new(1.0, vec![1.0], vec![0.1], vec![1e-12], 0.0).is_err());
        assert!(NetworkParams::new(0.0, vec![1.0], vec![0.1], vec![1e-12], 1.0).is_err());
        assert!(NetworkParams::new(1.0, vec![1.0], vec![0.1, 0.2], vec![1e-12], 1.0).is_err());
        assert!(GainVector::new(vec![-0.1]).is_err());
        assert!(ChannelRealization::new(vec![f64::NAN]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_params_and_gain() -> impl Strategy<Value = (NetworkParams, GainVector, f64)> {
            (
                -3.0f64..3.0,       // h
                0.01f64..10.0,      // obs noise var
                1e-13f64..1e-11,    // chan noise var
                0.0f64..100.0,      // amplification gain
                0.1f64..10.0,       // prior variance
            )
                .prop_map(|(h, so2, sc2, a, pv)| {
                    let params = NetworkParams::new(pv, vec![h], vec![so2], vec![sc2], 1.0).unwrap();
                    (params, GainVector::new(vec![a]).unwrap(), h)
                })
        }

        proptest! {
            // power formula is invariant to the sign of h and matches the
            // expanded form a^2 (h^2 prior + obs_noise)
            #[test]
            fn power_forms_agree_and_sign_invariant((params, a, h) in arb_params_and_gain()) {
                let p = sensor_power(&params, &a, 0);
                let expanded = a.gains[0] * a.gains[0]
                    * (h * h * params.prior_variance + params.obs_noise_vars[0]);
                prop_assert!((p - expanded).abs() <= 1e-12 * expanded.abs().max(1e-300));

                let mut flipped = params.clone();
                flipped.obs_gains[0] = -h;
                let pf = sensor_power(&flipped, &a, 0);
                prop_assert!((p - pf).abs() <= 1e-12 * p.abs().max(1e-300));
            }

            // delta <= csnr since osnr/(1+osnr) < 1, and everything is finite
            #[test]
            fn delta_below_csnr((params, _a, _h) in arb_params_and_gain(), g in 0.0f64..1e-3) {
                let chan = ChannelRealization::new(vec![g]).unwrap();
                let snr = compute_snrs(&params, &chan).unwrap();
                prop_assert!(snr.delta[0] <= snr.csnr[0]);
                prop_assert!(snr.osnr[0].is_finite());
                prop_assert!(snr.csnr[0].is_finite());
                prop_assert!(snr.delta[0].is_finite());
            }
        }
    }
}
