//! Closed-form optimal power allocation under a sum-power constraint.
//!
//! Sensors are ranked by the composite metric `delta = osnr*csnr/(1+osnr)`.
//! Only a prefix of the ranking transmits: the active-set size `K1` is the
//! largest `n` for which `sqrt(delta_n) * rho(n) > 1`, where
//!
//! ```text
//! rho(n) = (P_total + sum_{i<=n} beta_i/delta_i) / (sum_{i<=n} beta_i/sqrt(delta_i))
//! ```
//!
//! Active sensors get `a_i = sqrt((sqrt(delta_i) * rho(K1) - 1) / (csnr_i * obs_noise_var_i))`,
//! everyone else stays silent. The resulting allocation spends the whole
//! power budget and minimizes the BLUE-estimator variance.

use crate::error::{Error, Result};
use crate::model::{compute_snrs, ChannelRealization, GainVector, NetworkParams};

/// Optimal allocation for one channel realization.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Amplification gains in original sensor order; inactive sensors are 0.
    pub gains: GainVector,
    /// Number of sensors that transmit (`K1`).
    pub active_count: usize,
    /// `rho(K1)`; NaN when no sensor is viable (`K1 == 0`).
    pub rho_value: f64,
    /// Map from delta-sorted rank to original sensor index.
    pub sort_permutation: Vec<usize>,
}

/// The water-level-like quantity `rho(n)` over the `n` best-ranked sensors.
///
/// `sorted_beta` and `sorted_delta` must be in non-increasing `delta` order;
/// `n` is 1-based. Fails with [`Error::ZeroDelta`] if a zero `delta` falls
/// inside the prefix, since both sums would divide by zero.
pub fn rho(n: usize, sorted_beta: &[f64], sorted_delta: &[f64], p_total: f64) -> Result<f64> {
    assert!(n >= 1 && n <= sorted_delta.len(), "n out of range");
    assert_eq!(sorted_beta.len(), sorted_delta.len(), "beta/delta length mismatch");
    let mut inv_sum = 0.0;
    let mut sqrt_sum = 0.0;
    for i in 0..n {
        if sorted_delta[i] == 0.0 {
            return Err(Error::ZeroDelta { n, index: i });
        }
        inv_sum += sorted_beta[i] / sorted_delta[i];
        sqrt_sum += sorted_beta[i] / sorted_delta[i].sqrt();
    }
    Ok((p_total + inv_sum) / sqrt_sum)
}

/// Largest active-set size `n` with `sqrt(delta_n) * rho(n) > 1`.
///
/// Scans downward from the count of strictly positive deltas; the first hit
/// is the largest qualifying `n`. Requires `sorted_delta[0] > 0`, which makes
/// `n = 1` always qualify in exact arithmetic.
pub fn find_k1(sorted_beta: &[f64], sorted_delta: &[f64], p_total: f64) -> usize {
    debug_assert!(sorted_delta.windows(2).all(|w| w[0] >= w[1]), "delta not sorted");
    assert!(!sorted_delta.is_empty() && sorted_delta[0] > 0.0, "no viable sensor");
    let k_pos = sorted_delta.iter().take_while(|d| **d > 0.0).count();
    for n in (1..=k_pos).rev() {
        let r = rho(n, sorted_beta, sorted_delta, p_total).expect("positive delta prefix");
        if sorted_delta[n - 1].sqrt() * r > 1.0 {
            #[cfg(debug_assertions)]
            if n < k_pos {
                let r_next = rho(n + 1, sorted_beta, sorted_delta, p_total).unwrap();
                debug_assert!(
                    sorted_delta[n].sqrt() * r_next <= 1.0,
                    "two-sided K1 condition violated at n={n}"
                );
            }
            return n;
        }
    }
    // sqrt(delta_1)*rho(1) = 1 + delta_1*P/beta_1 > 1 holds in exact
    // arithmetic; roundoff can eat it only for vanishing delta_1*P
    1
}

/// Compute the variance-minimizing gain vector for one channel realization.
///
/// Channels where every sensor has `delta = 0` yield an all-zero allocation
/// with `active_count == 0` rather than an error, so Monte-Carlo sweeps can
/// record the degenerate draw and move on.
pub fn optimal_gains(params: &NetworkParams, chan: &ChannelRealization) -> Result<AllocationResult> {
    let snr = compute_snrs(params, chan)?;
    let k = params.num_sensors();

    // stable sort by descending delta keeps tied sensors in original order
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| snr.delta[b].total_cmp(&snr.delta[a]));

    let sorted_beta: Vec<f64> = order.iter().map(|&i| snr.osnr[i]).collect();
    let sorted_delta: Vec<f64> = order.iter().map(|&i| snr.delta[i]).collect();

    if sorted_delta[0] == 0.0 {
        return Ok(AllocationResult {
            gains: GainVector::zeros(k),
            active_count: 0,
            rho_value: f64::NAN,
            sort_permutation: order,
        });
    }

    let k1 = find_k1(&sorted_beta, &sorted_delta, params.total_power);
    let rho_k1 = rho(k1, &sorted_beta, &sorted_delta, params.total_power)?;

    let mut gains = vec![0.0; k];
    for (rank, &i) in order.iter().enumerate().take(k1) {
        // roundoff at the rank == k1 boundary can push the radicand
        // marginally negative; clamp before the square root
        let radicand = (sorted_delta[rank].sqrt() * rho_k1 - 1.0).max(0.0);
        gains[i] = (radicand / (snr.csnr[i] * params.obs_noise_vars[i])).sqrt();
    }
    let gains = GainVector::new(gains).expect("gains are nonnegative and finite");

    #[cfg(debug_assertions)]
    {
        let spent = gains.total_power(params);
        debug_assert!(
            (spent - params.total_power).abs() <= 1e-9 * params.total_power,
            "optimal allocation should spend the whole budget: {spent} vs {}",
            params.total_power
        );
    }

    Ok(AllocationResult { gains, active_count: k1, rho_value: rho_k1, sort_permutation: order })
}
