//! BLUE fusion of received sensor signals and its closed-form variance.
//!
//! The fusion center sees `y_i = g_i a_i (h_i theta + n_i) + w_i` from each
//! sensor. For a fixed gain vector `a` and channel draw `g`, the best linear
//! unbiased estimate and its conditional variance have closed forms; the
//! measurement simulator generates matching synthetic draws so Monte-Carlo
//! experiments can check one against the other.
//!
//! Summations over sensors use Neumaier-compensated accumulation in a fixed
//! order, so results are reproducible bit-for-bit regardless of thread count.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, GainVector, NetworkParams};

/// Samples received at the fusion center, one per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedVector {
    pub samples: Vec<f64>,
}

/// Distribution family for the estimated parameter and the observation
/// noise. The channel noise at the fusion center is always Gaussian; the
/// estimator itself only needs first and second moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDistribution {
    #[default]
    Gaussian,
    /// Zero-mean uniform scaled to the requested variance.
    Uniform,
}

/// Compensated (Neumaier) summation in iteration order.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Best linear unbiased estimate of the parameter from one received vector.
///
/// Sensors with `a_i * g_i * h_i == 0` contribute nothing. Fails with
/// [`Error::AllSilent`] when every sensor is silent, since the normalizer
/// is zero and no estimate exists.
pub fn blue_estimate(
    params: &NetworkParams,
    a: &GainVector,
    chan: &ChannelRealization,
    y: &ReceivedVector,
) -> Result<f64> {
    let k = params.num_sensors();
    for got in [a.num_sensors(), chan.num_sensors(), y.samples.len()] {
        if got != k {
            return Err(Error::DimensionMismatch { expected: k, got });
        }
    }
    let weighted = |i: usize| {
        let (h, ai, g) = (params.obs_gains[i], a.gains[i], chan.gains[i]);
        let v = ai * ai * g * g * params.obs_noise_vars[i] + params.chan_noise_vars[i];
        let s = h * ai * g;
        (s * y.samples[i] / v, s * s / v)
    };
    let num = neumaier_sum((0..k).map(|i| weighted(i).0));
    let den = neumaier_sum((0..k).map(|i| weighted(i).1));
    if den == 0.0 {
        return Err(Error::AllSilent);
    }
    Ok(num / den)
}

/// Conditional variance of the BLUE estimate given gains and channel.
///
/// Returns `+inf` when every sensor is silent; callers treat that as a
/// degenerate but valid value rather than an error.
pub fn blue_variance(params: &NetworkParams, a: &GainVector, chan: &ChannelRealization) -> f64 {
    let k = params.num_sensors();
    assert_eq!(a.num_sensors(), k, "gain vector length mismatch");
    assert_eq!(chan.num_sensors(), k, "channel length mismatch");
    let sum = neumaier_sum((0..k).map(|i| {
        let h = params.obs_gains[i];
        let so2 = params.obs_noise_vars[i];
        let beta = h * h * params.prior_variance / so2;
        let g = chan.gains[i];
        let gamma = g * g / params.chan_noise_vars[i];
        let t = gamma * a.gains[i] * a.gains[i] * so2;
        if t.is_infinite() {
            beta // limit of beta * t / (1 + t) as t -> inf
        } else {
            beta * t / (1.0 + t)
        }
    }));
    if sum == 0.0 {
        f64::INFINITY
    } else {
        params.prior_variance / sum
    }
}

fn draw_zero_mean<R: Rng + ?Sized>(variance: f64, dist: SourceDistribution, rng: &mut R) -> f64 {
    if variance == 0.0 {
        return 0.0;
    }
    match dist {
        SourceDistribution::Gaussian => {
            Normal::new(0.0, variance.sqrt()).expect("valid std dev").sample(rng)
        }
        SourceDistribution::Uniform => {
            // half-width sqrt(3 v) gives variance v
            let w = (3.0 * variance).sqrt();
            (2.0 * rng.random::<f64>() - 1.0) * w
        }
    }
}

/// Draw one synthetic measurement: the true parameter and the vector the
/// fusion center receives. Uses Gaussian draws for the parameter and the
/// observation noise; see [`simulate_measurement_with`] to change that.
pub fn simulate_measurement<R: Rng + ?Sized>(
    params: &NetworkParams,
    a: &GainVector,
    chan: &ChannelRealization,
    rng: &mut R,
) -> (f64, ReceivedVector) {
    simulate_measurement_with(params, a, chan, SourceDistribution::Gaussian, rng)
}

/// [`simulate_measurement`] with an explicit distribution for the parameter
/// and observation noise. The channel noise stays Gaussian.
pub fn simulate_measurement_with<R: Rng + ?Sized>(
    params: &NetworkParams,
    a: &GainVector,
    chan: &ChannelRealization,
    dist: SourceDistribution,
    rng: &mut R,
) -> (f64, ReceivedVector) {
    let k = params.num_sensors();
    assert_eq!(a.num_sensors(), k, "gain vector length mismatch");
    assert_eq!(chan.num_sensors(), k, "channel length mismatch");
    let theta = draw_zero_mean(params.prior_variance, dist, rng);
    let samples = (0..k)
        .map(|i| {
            let n = draw_zero_mean(params.obs_noise_vars[i], dist, rng);
            let w = draw_zero_mean(params.chan_noise_vars[i], SourceDistribution::Gaussian, rng);
            chan.gains[i] * a.gains[i] * (params.obs_gains[i] * theta + n) + w
        })
        .collect();
    (theta, ReceivedVector { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance_k3() -> (NetworkParams, GainVector, ChannelRealization) {
        let params = NetworkParams::new(
            1.0,
            vec![0.9, 1.1, 1.3],
            vec![0.08, 0.12, 0.1],
            vec![1e-12, 2e-12, 0.5e-12],
            0.01,
        )
        .unwrap();
        let a = GainVector::new(vec![0.2, 0.15, 0.3]).unwrap();
        let chan = ChannelRealization::new(vec![1.2e-5, 0.8e-5, 2.0e-5]).unwrap();
        (params, a, chan)
    }

    #[test]
    fn single_sensor_inverts_gain_exactly() {
        // y carries no noise, so the estimate must invert a*g*h exactly
        let params = NetworkParams::new(1.0, vec![1.4], vec![0.1], vec![1e-12], 1.0).unwrap();
        let a = GainVector::new(vec![0.3]).unwrap();
        let chan = ChannelRealization::new(vec![2e-5]).unwrap();
        let theta = 0.7321;
        let y = ReceivedVector { samples: vec![a.gains[0] * chan.gains[0] * params.obs_gains[0] * theta] };
        let est = blue_estimate(&params, &a, &chan, &y).unwrap();
        assert_relative_eq!(est, theta, max_relative = 1e-12);
    }

    #[test]
    fn identical_sensors_match_single_sensor() {
        let params2 = NetworkParams::new(
            1.0, vec![1.1, 1.1], vec![0.1, 0.1], vec![1e-12, 1e-12], 1.0,
        )
        .unwrap();
        let params1 = NetworkParams::new(1.0, vec![1.1], vec![0.1], vec![1e-12], 1.0).unwrap();
        let a2 = GainVector::new(vec![0.25, 0.25]).unwrap();
        let a1 = GainVector::new(vec![0.25]).unwrap();
        let chan2 = ChannelRealization::new(vec![1.5e-5, 1.5e-5]).unwrap();
        let chan1 = ChannelRealization::new(vec![1.5e-5]).unwrap();
        let y = 4.2e-6;
        let est2 = blue_estimate(&params2, &a2, &chan2, &ReceivedVector { samples: vec![y, y] }).unwrap();
        let est1 = blue_estimate(&params1, &a1, &chan1, &ReceivedVector { samples: vec![y] }).unwrap();
        assert_relative_eq!(est2, est1, max_relative = 1e-12);
    }

    #[test]
    fn matches_weighted_least_squares_oracle() {
        // independent WLS route: whiten the linear model and solve with SVD
        let (params, a, chan) = instance_k3();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (_, y) = simulate_measurement(&params, &a, &chan, &mut rng);
            let k = params.num_sensors();
            let mut design = Vec::with_capacity(k);
            let mut rhs = Vec::with_capacity(k);
            for i in 0..k {
                let s = params.obs_gains[i] * a.gains[i] * chan.gains[i];
                let v = a.gains[i] * a.gains[i] * chan.gains[i] * chan.gains[i]
                    * params.obs_noise_vars[i]
                    + params.chan_noise_vars[i];
                design.push(s / v.sqrt());
                rhs.push(y.samples[i] / v.sqrt());
            }
            let mat = nalgebra::DMatrix::from_column_slice(k, 1, &design);
            let vec = nalgebra::DVector::from_column_slice(&rhs);
            let sol = mat.svd(true, true).solve(&vec, 1e-300).unwrap();
            let est = blue_estimate(&params, &a, &chan, &y).unwrap();
            assert_relative_eq!(est, sol[0], max_relative = 1e-10);
        }
    }

    #[test]
    fn all_silent_is_an_error() {
        let (params, _, chan) = instance_k3();
        let silent = GainVector::zeros(3);
        let y = ReceivedVector { samples: vec![0.0; 3] };
        assert!(matches!(blue_estimate(&params, &silent, &chan, &y), Err(Error::AllSilent)));
    }

    #[test]
    fn variance_of_silence_is_infinite() {
        let (params, _, chan) = instance_k3();
        assert_eq!(blue_variance(&params, &GainVector::zeros(3), &chan), f64::INFINITY);
    }

    #[test]
    fn variance_hits_observation_noise_floor_at_large_gain() {
        // as a -> inf the channel noise washes out: variance -> so2 / h^2
        let params = NetworkParams::new(1.0, vec![1.2], vec![0.07], vec![1e-12], 1.0).unwrap();
        let chan = ChannelRealization::new(vec![1e-5]).unwrap();
        let a = GainVector::new(vec![1e8]).unwrap();
        let floor = params.obs_noise_vars[0] / (params.obs_gains[0] * params.obs_gains[0]);
        assert_relative_eq!(blue_variance(&params, &a, &chan), floor, max_relative = 1e-4);
    }

    #[test]
    fn empirical_mse_matches_variance() {
        // Monte-Carlo oracle: MSE of the estimate over many draws vs Eq-form
        // variance, plus unbiasedness of the estimator
        let params = NetworkParams::new(
            1.0,
            vec![1.0, 0.9, 1.2, 1.05, 0.8],
            vec![0.1, 0.08, 0.12, 0.09, 0.11],
            vec![1e-12; 5],
            0.01,
        )
        .unwrap();
        let a = GainVector::new(vec![0.2, 0.25, 0.15, 0.2, 0.3]).unwrap();
        let chan = ChannelRealization::new(vec![1.1e-5, 0.9e-5, 1.3e-5, 0.7e-5, 1.6e-5]).unwrap();
        let predicted = blue_variance(&params, &a, &chan);

        let trials = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut sq_sum = 0.0;
        let mut err_sum = 0.0;
        for _ in 0..trials {
            let (theta, y) = simulate_measurement(&params, &a, &chan, &mut rng);
            let err = blue_estimate(&params, &a, &chan, &y).unwrap() - theta;
            sq_sum += err * err;
            err_sum += err;
        }
        let mse = sq_sum / trials as f64;
        assert_relative_eq!(mse, predicted, max_relative = 0.01);

        // unbiased within 4 standard errors of the mean error
        let se = (predicted / trials as f64).sqrt();
        assert!(
            (err_sum / trials as f64).abs() < 4.0 * se,
            "bias {} exceeds 4 se {}",
            err_sum / trials as f64,
            se
        );
    }

    #[test]
    fn measurement_moments_match_model() {
        let (params, a, chan) = instance_k3();
        let trials = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let k = params.num_sensors();
        let mut mean = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for _ in 0..trials {
            let (_, y) = simulate_measurement(&params, &a, &chan, &mut rng);
            for i in 0..k {
                mean[i] += y.samples[i];
                sq[i] += y.samples[i] * y.samples[i];
            }
        }
        for i in 0..k {
            let g2a2 = chan.gains[i] * chan.gains[i] * a.gains[i] * a.gains[i];
            let h = params.obs_gains[i];
            let var_model = g2a2 * (h * h * params.prior_variance + params.obs_noise_vars[i])
                + params.chan_noise_vars[i];
            let m = mean[i] / trials as f64;
            let v = sq[i] / trials as f64 - m * m;
            // zero mean within 4 standard errors, second moment within 1%
            assert!(m.abs() < 4.0 * (var_model / trials as f64).sqrt(), "sensor {i} mean {m}");
            assert_relative_eq!(v, var_model, max_relative = 0.01);
        }
    }

    #[test]
    fn noiseless_chain_reproduces_theta() {
        // zero noise everywhere with a=g=h=1 passes theta straight through;
        // bypasses the validating constructor since zero variances are only
        // meaningful in this degenerate test
        let params = NetworkParams {
            prior_variance: 1.0,
            obs_gains: vec![1.0, 1.0],
            obs_noise_vars: vec![0.0, 0.0],
            chan_noise_vars: vec![0.0, 0.0],
            total_power: 1.0,
        };
        let a = GainVector::new(vec![1.0, 1.0]).unwrap();
        let chan = ChannelRealization::new(vec![1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (theta, y) = simulate_measurement(&params, &a, &chan, &mut rng);
        for s in y.samples {
            assert_eq!(s, theta);
        }
    }

    #[test]
    fn uniform_source_has_requested_variance() {
        let params = NetworkParams::new(1.0, vec![1.0], vec![0.1], vec![1e-12], 1.0).unwrap();
        let a = GainVector::new(vec![1.0]).unwrap();
        let chan = ChannelRealization::new(vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 400_000usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..trials {
            let (theta, _) =
                simulate_measurement_with(&params, &a, &chan, SourceDistribution::Uniform, &mut rng);
            sum += theta;
            sq += theta * theta;
        }
        let mean = sum / trials as f64;
        let var = sq / trials as f64 - mean * mean;
        assert_relative_eq!(var, params.prior_variance, max_relative = 0.02);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_instance(k: usize) -> impl Strategy<Value = (NetworkParams, GainVector, ChannelRealization)> {
            (
                proptest::collection::vec(0.5f64..1.5, k),
                proptest::collection::vec(0.05f64..0.15, k),
                proptest::collection::vec(0.0f64..0.6, k),
                proptest::collection::vec(0.0f64..3e-5, k),
            )
                .prop_map(move |(h, so2, a, g)| {
                    let params =
                        NetworkParams::new(1.0, h, so2, vec![1e-12; k], 0.01).unwrap();
                    (params, GainVector::new(a).unwrap(), ChannelRealization::new(g).unwrap())
                })
        }

        proptest! {
            // more power at any single sensor never hurts
            #[test]
            fn variance_monotone_in_each_gain((params, a, chan) in arb_instance(4), idx in 0usize..4, bump in 0.01f64..2.0) {
                let before = blue_variance(&params, &a, &chan);
                let mut bigger = a.clone();
                bigger.gains[idx] += bump;
                let after = blue_variance(&params, &bigger, &chan);
                prop_assert!(after <= before || (after.is_infinite() && before.is_infinite()));
            }

            // silent sensors can be deleted without changing anything
            #[test]
            fn silent_sensors_are_inert((params, mut a, chan) in arb_instance(4), zero_at in 0usize..4) {
                a.gains[zero_at] = 0.0;
                let y_full = ReceivedVector { samples: vec![1e-6, -2e-6, 3e-6, 0.5e-6] };

                let keep: Vec<usize> = (0..4).filter(|&i| i != zero_at).collect();
                let sub_params = NetworkParams::new(
                    params.prior_variance,
                    keep.iter().map(|&i| params.obs_gains[i]).collect(),
                    keep.iter().map(|&i| params.obs_noise_vars[i]).collect(),
                    keep.iter().map(|&i| params.chan_noise_vars[i]).collect(),
                    params.total_power,
                ).unwrap();
                let sub_a = GainVector::new(keep.iter().map(|&i| a.gains[i]).collect()).unwrap();
                let sub_chan = ChannelRealization::new(keep.iter().map(|&i| chan.gains[i]).collect()).unwrap();
                let sub_y = ReceivedVector { samples: keep.iter().map(|&i| y_full.samples[i]).collect() };

                let v_full = blue_variance(&params, &a, &chan);
                let v_sub = blue_variance(&sub_params, &sub_a, &sub_chan);
                if v_full.is_finite() {
                    prop_assert!((v_full - v_sub).abs() <= 1e-12 * v_full.abs());
                    let e_full = blue_estimate(&params, &a, &chan, &y_full).unwrap();
                    let e_sub = blue_estimate(&sub_params, &sub_a, &sub_chan, &sub_y).unwrap();
                    prop_assert!((e_full - e_sub).abs() <= 1e-12 * e_full.abs().max(1e-300));
                } else {
                    prop_assert!(v_sub.is_infinite());
                }
            }
        }
    }
}
