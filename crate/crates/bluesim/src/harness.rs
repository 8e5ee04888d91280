//! Monte-Carlo experiment driver: sweeps K, L, and total power, averaging
//! the achieved estimator variance with full feedback (exact optimal gains)
//! against limited feedback (codebook index broadcast).
//!
//! Reproducibility contract: every random quantity derives from the master
//! seed through named substreams (see [`crate::seeds`]), trials are indexed
//! rather than drawn from a shared iterator, and all reductions run in fixed
//! trial order. Outputs are therefore byte-identical across runs and worker
//! thread counts, and evaluation draws are shared across sweep points, L
//! values, and the full-feedback benchmark (common random numbers), which
//! makes curve comparisons paired rather than independent.

use std::time::Instant;

use rayon::prelude::*;

use crate::allocator::optimal_gains;
use crate::channel::NetworkInstance;
use crate::codebook::{select_index, train, Codebook, TrainingSample};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::estimator::blue_variance;
use crate::model::{ChannelRealization, GainVector, NetworkParams};
use crate::results::{write_results, ResultRecord};
use crate::seeds::{
    derive_seed, stream_rng, STREAM_CODEBOOK_INIT, STREAM_EVAL, STREAM_GEOMETRY, STREAM_TRAINING,
};

/// Per-trial achieved variances at one sweep point, aligned by trial index
/// over shared channel draws.
#[derive(Debug, Clone)]
pub struct PairedPoint {
    pub p_total_dbm: f64,
    pub full: Vec<f64>,
    pub limited: Vec<f64>,
}

/// Geometry and evaluation draws shared by every sweep point for one K.
struct EvalContext {
    k: usize,
    instance: NetworkInstance,
    eval_chans: Vec<ChannelRealization>,
    /// Per-trial geometry when `resample_geometry_per_trial` is set.
    trial_instances: Option<Vec<NetworkInstance>>,
}

impl EvalContext {
    fn build(config: &ExperimentConfig, k: usize) -> Result<Self> {
        let instance = base_instance(config, k)?;
        let net = config.network.to_model();
        let fading = config.fading.to_model();
        let placeholder_power = instance.params.total_power;

        let trial_instances = if config.resample_geometry_per_trial {
            Some(
                (0..config.mc_trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = stream_rng(
                            config.master_seed,
                            &[STREAM_GEOMETRY, k as u64, t as u64],
                        );
                        NetworkInstance::sample(&net, &fading, k, placeholder_power, &mut rng)
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };

        let eval_chans = (0..config.mc_trials)
            .into_par_iter()
            .map(|t| {
                let mut rng =
                    stream_rng(config.master_seed, &[STREAM_EVAL, k as u64, t as u64]);
                match &trial_instances {
                    Some(insts) => insts[t].sample_fading(&mut rng),
                    None => instance.sample_fading(&mut rng),
                }
            })
            .collect();

        Ok(EvalContext {
            k,
            instance,
            eval_chans,
            trial_instances,
        })
    }

    /// Geometry parameters for trial `t` at budget `p_watts`.
    fn trial_params(&self, t: usize, p_watts: f64) -> Result<NetworkParams> {
        let base = match &self.trial_instances {
            Some(insts) => &insts[t].params,
            None => &self.instance.params,
        };
        base.with_total_power(p_watts)
    }
}

/// The experiment's base geometry for `k` sensors: one draw from the
/// geometry substream of the master seed. The stored total power is the
/// first sweep point; sweep evaluation rebinds it per point.
pub fn base_instance(config: &ExperimentConfig, k: usize) -> Result<NetworkInstance> {
    config.validate()?;
    let p_watts = config.power_sweep.points();
    let mut rng = stream_rng(config.master_seed, &[STREAM_GEOMETRY, k as u64]);
    NetworkInstance::sample(
        &config.network.to_model(),
        &config.fading.to_model(),
        k,
        p_watts[0].watts,
        &mut rng,
    )
}

/// Training channels are drawn over the base geometry from per-sample
/// substreams, so the set depends on neither mc_trials nor L.
fn training_samples(
    config: &ExperimentConfig,
    instance: &NetworkInstance,
    k: usize,
    params_p: &NetworkParams,
) -> Result<Vec<TrainingSample>> {
    (0..config.training_size)
        .into_par_iter()
        .map(|m| {
            let mut rng =
                stream_rng(config.master_seed, &[STREAM_TRAINING, k as u64, m as u64]);
            let chan = instance.sample_fading(&mut rng);
            TrainingSample::from_channel(params_p, chan)
        })
        .collect()
}

/// Digest of everything a trained codebook depends on; keys the disk cache.
fn cache_key(config: &ExperimentConfig, k: usize, l: u32, p_watts: f64) -> u64 {
    let f = config.fading.to_model();
    let n = config.network.to_model();
    derive_seed(
        config.master_seed,
        &[
            k as u64,
            u64::from(l),
            p_watts.to_bits(),
            config.training_size as u64,
            config.distortion_epsilon.to_bits(),
            f.nominal_gain.to_bits(),
            f.ref_distance.to_bits(),
            f.path_loss_exp.to_bits(),
            f.dist_min.to_bits(),
            f.dist_max.to_bits(),
            f.rayleigh.scale().to_bits(),
            n.prior_variance.to_bits(),
            n.obs_gain_mean.to_bits(),
            n.obs_gain_var.to_bits(),
            n.obs_noise_var_min.to_bits(),
            n.obs_noise_var_max.to_bits(),
            n.chan_noise_var.to_bits(),
            n.h_power_target.to_bits(),
            u64::from(n.renormalize_obs_gains),
        ],
    )
}

/// Design (or fetch from cache) the codebook for one (K, L, P) point.
///
/// The initialization seed derives from the point itself, so a codebook is
/// the same whether it comes from `run`, the `train` subcommand, or a cache
/// hit (persistence is bit-exact).
pub fn train_codebook(
    config: &ExperimentConfig,
    k: usize,
    l: u32,
    p_watts: f64,
) -> Result<Codebook> {
    config.validate()?;
    let instance = base_instance(config, k)?;
    obtain_codebook(config, &instance, k, l, p_watts)
}

fn obtain_codebook(
    config: &ExperimentConfig,
    instance: &NetworkInstance,
    k: usize,
    l: u32,
    p_watts: f64,
) -> Result<Codebook> {
    let init_seed = derive_seed(
        config.master_seed,
        &[STREAM_CODEBOOK_INIT, k as u64, u64::from(l), p_watts.to_bits()],
    );
    let cache_path = config.cache_dir.as_ref().map(|dir| {
        dir.join(format!(
            "codebook-k{k}-l{l}-{:016x}.txt",
            cache_key(config, k, l, p_watts)
        ))
    });

    if let Some(path) = &cache_path {
        if path.exists() {
            if let Ok(book) = Codebook::load(path) {
                let matches = book.feedback_bits == l
                    && book.num_sensors() == k
                    && book.total_power.to_bits() == p_watts.to_bits()
                    && book.training_size == config.training_size
                    && book.epsilon.to_bits() == config.distortion_epsilon.to_bits()
                    && book.seed == init_seed;
                if matches {
                    return Ok(book);
                }
            }
            // Damaged or mismatched cache entries are retrained below.
        }
    }

    let params_p = instance.params.with_total_power(p_watts)?;
    let samples = training_samples(config, instance, k, &params_p)?;
    let book = train(&params_p, &samples, l, config.distortion_epsilon, init_seed)?;

    if let Some(path) = &cache_path {
        std::fs::create_dir_all(path.parent().expect("cache file has a parent"))?;
        book.save(path)?;
    }
    Ok(book)
}

/// Per-trial optimal-allocation variances at one sweep point.
fn full_point(config: &ExperimentConfig, ctx: &EvalContext, p_watts: f64) -> Result<Vec<f64>> {
    let shared = match ctx.trial_instances {
        None => Some(ctx.instance.params.with_total_power(p_watts)?),
        Some(_) => None,
    };
    (0..config.mc_trials)
        .into_par_iter()
        .map(|t| {
            let owned;
            let params = match &shared {
                Some(p) => p,
                None => {
                    owned = ctx.trial_params(t, p_watts)?;
                    &owned
                }
            };
            let chan = &ctx.eval_chans[t];
            let alloc = optimal_gains(params, chan)?;
            Ok(blue_variance(params, &alloc.gains, chan))
        })
        .collect()
}

/// Per-trial codebook-quantized variances at one sweep point.
///
/// Under fixed geometry the selected codeword already spends the budget by
/// construction. Under per-trial geometry the codebook was designed for a
/// different network, so a raw codeword could overspend the trial's budget;
/// each codeword is rescaled to spend it exactly before selection.
fn limited_point(
    config: &ExperimentConfig,
    ctx: &EvalContext,
    book: &Codebook,
    p_watts: f64,
) -> Result<Vec<f64>> {
    let shared = match ctx.trial_instances {
        None => Some(ctx.instance.params.with_total_power(p_watts)?),
        Some(_) => None,
    };
    (0..config.mc_trials)
        .into_par_iter()
        .map(|t| {
            let owned;
            let params = match &shared {
                Some(p) => p,
                None => {
                    owned = ctx.trial_params(t, p_watts)?;
                    &owned
                }
            };
            let chan = &ctx.eval_chans[t];
            if ctx.trial_instances.is_some() {
                return Ok(best_rescaled_variance(params, book, chan, p_watts));
            }
            let l = select_index(params, book, chan.clone())?;
            Ok(blue_variance(params, &book.codewords[l], chan))
        })
        .collect()
}

/// Lowest variance achievable by any codeword after projecting it onto the
/// trial's power budget. Codewords that spend nothing cannot be projected
/// and count as silent.
fn best_rescaled_variance(
    params: &NetworkParams,
    book: &Codebook,
    chan: &ChannelRealization,
    p_watts: f64,
) -> f64 {
    let mut best = f64::INFINITY;
    for w in &book.codewords {
        let spent = w.total_power(params);
        if !(spent > 0.0 && spent.is_finite()) {
            continue;
        }
        let scale = (p_watts / spent).sqrt();
        let scaled = GainVector::new(w.gains.iter().map(|g| g * scale).collect())
            .expect("a positive rescale keeps gains valid");
        let v = blue_variance(params, &scaled, chan);
        if v < best {
            best = v;
        }
    }
    best
}

/// Mean over finite trials, its standard error, and the infinite-trial
/// count. Trials where no sensor is viable are excluded from the mean but
/// reported, so the policy is auditable from the output alone.
fn summarize(variances: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = variances.iter().copied().filter(|v| v.is_finite()).collect();
    let num_infinite = variances.len() - finite.len();
    let n = finite.len();
    if n == 0 {
        return (f64::INFINITY, 0.0, num_infinite);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    let std_error = if n < 2 {
        0.0
    } else {
        let ss: f64 = finite.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / ((n - 1) as f64 * n as f64)).sqrt()
    };
    (mean, std_error, num_infinite)
}

fn make_record(
    k: usize,
    l: Option<u32>,
    p_total_dbm: f64,
    variances: &[f64],
    codebook_iterations: usize,
    started: Instant,
) -> ResultRecord {
    let (mean_variance, std_error, num_infinite_trials) = summarize(variances);
    ResultRecord {
        k,
        l,
        p_total_dbm,
        mean_variance,
        std_error,
        num_infinite_trials,
        codebook_iterations,
        wall_time_secs: started.elapsed().as_secs_f64(),
    }
}

/// Benchmark curve: exact optimal gains per trial, one record per sweep
/// point.
pub fn run_full_feedback(config: &ExperimentConfig, k: usize) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let ctx = EvalContext::build(config, k)?;
    full_records(config, &ctx)
}

fn full_records(config: &ExperimentConfig, ctx: &EvalContext) -> Result<Vec<ResultRecord>> {
    config
        .power_sweep
        .points()
        .iter()
        .map(|pt| {
            let started = Instant::now();
            let variances = full_point(config, ctx, pt.watts)?;
            Ok(make_record(ctx.k, None, pt.dbm, &variances, 0, started))
        })
        .collect()
}

/// Quantized-feedback curves: one record per (L, sweep point), each with its
/// own codebook (optimal gains depend on the budget, so codebooks cannot be
/// shared across sweep points).
pub fn run_limited_feedback(config: &ExperimentConfig, k: usize) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let ctx = EvalContext::build(config, k)?;
    limited_records(config, &ctx)
}

fn limited_records(config: &ExperimentConfig, ctx: &EvalContext) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    for &l in &config.l_values {
        for pt in config.power_sweep.points() {
            let started = Instant::now();
            let book = obtain_codebook(config, &ctx.instance, ctx.k, l, pt.watts)?;
            let variances = limited_point(config, ctx, &book, pt.watts)?;
            records.push(make_record(
                ctx.k,
                Some(l),
                pt.dbm,
                &variances,
                book.iterations,
                started,
            ));
        }
    }
    Ok(records)
}

/// Full sweep over every configured K: the full-feedback benchmark followed
/// by each limited-feedback curve, written to the configured output file.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    for &k in &config.k_values {
        let ctx = EvalContext::build(config, k)?;
        records.extend(full_records(config, &ctx)?);
        records.extend(limited_records(config, &ctx)?);
    }
    write_results(&records, &config.output.path, config.output.format)?;
    Ok(records)
}

/// Per-trial full vs limited variances over shared draws, one entry per
/// sweep point. This exposes the pairing the records average away, for
/// dominance and gap tests.
pub fn paired_trial_variances(
    config: &ExperimentConfig,
    k: usize,
    l: u32,
) -> Result<Vec<PairedPoint>> {
    config.validate()?;
    let ctx = EvalContext::build(config, k)?;
    config
        .power_sweep
        .points()
        .iter()
        .map(|pt| {
            let book = obtain_codebook(config, &ctx.instance, ctx.k, l, pt.watts)?;
            Ok(PairedPoint {
                p_total_dbm: pt.dbm,
                full: full_point(config, &ctx, pt.watts)?,
                limited: limited_point(config, &ctx, &book, pt.watts)?,
            })
        })
        .collect()
}
