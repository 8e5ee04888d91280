//! Offline codebook design for limited feedback, plus runtime index
//! selection.
//!
//! The fusion center cannot send each sensor a real-valued gain over an
//! L-bit feedback channel, so it quantizes: a codebook of 2^L gain vectors
//! is designed offline against a training set of fading realizations, and at
//! runtime only the index of the best codeword is broadcast.
//!
//! Training is a generalized Lloyd iteration. The distortion of using
//! codeword `a` on a channel whose optimum is `a*` is the variance penalty
//! `|Var(a) - Var(a*)|`; a codebook's distortion is the training-set mean of
//! each sample's best-codeword penalty. The centroid step is medoid-style:
//! candidates are the cell's own training optima plus the cell's previous
//! codeword, so every codeword always satisfies the power constraint and the
//! recorded distortion history never increases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocator::optimal_gains;
use crate::error::{Error, Result};
use crate::estimator::blue_variance;
use crate::model::{ChannelRealization, GainVector, NetworkParams};
use crate::persist::{join, Reader};

/// Hard stop for the Lloyd iteration, in case epsilon is set pathologically
/// small. A run that hits the cap is returned with `converged == false`.
pub const MAX_TRAINING_ITERATIONS: usize = 500;

/// One training point: a fading draw, its optimal gains, and the variance
/// those gains achieve (cached so distortions need one evaluation, not two).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub chan: ChannelRealization,
    pub opt_gains: GainVector,
    /// `blue_variance(opt_gains, chan)`; infinite only when no sensor is
    /// viable for this draw.
    pub opt_variance: f64,
}

impl TrainingSample {
    /// Solve the allocation for `chan` and cache the optimal variance.
    pub fn from_channel(params: &NetworkParams, chan: ChannelRealization) -> Result<Self> {
        let alloc = optimal_gains(params, &chan)?;
        let opt_variance = blue_variance(params, &alloc.gains, &chan);
        Ok(TrainingSample {
            chan,
            opt_gains: alloc.gains,
            opt_variance,
        })
    }
}

/// A trained quantizer: 2^L gain-vector codewords plus training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// Row `l` is the gain vector broadcast as index `l`.
    pub codewords: Vec<GainVector>,
    /// Feedback budget L; `codewords.len() == 1 << feedback_bits`.
    pub feedback_bits: u32,
    /// Power budget the training set was solved under.
    pub total_power: f64,
    /// Seed used for codeword initialization (recorded for replay).
    pub seed: u64,
    /// Number of training samples M.
    pub training_size: usize,
    /// Stop threshold on the per-round distortion decrease.
    pub epsilon: f64,
    /// Lloyd rounds executed; `distortion_history.len() == iterations + 1`.
    pub iterations: usize,
    /// Whether the run stopped by threshold rather than the iteration cap.
    pub converged: bool,
    /// Codebook distortion before training and after each round,
    /// non-increasing.
    pub distortion_history: Vec<f64>,
    /// Cell index per training sample under the final codewords. Training
    /// metadata only; not persisted.
    pub assignment: Vec<usize>,
}

impl Codebook {
    /// Number of sensors each codeword addresses.
    pub fn num_sensors(&self) -> usize {
        self.codewords[0].num_sensors()
    }

    /// Training distortion after the last round.
    pub fn final_distortion(&self) -> f64 {
        *self
            .distortion_history
            .last()
            .expect("history holds at least the initial distortion")
    }
}

/// Variance penalty for broadcasting `codeword` on `sample`'s channel
/// instead of the sample's own optimum.
///
/// Infinite when the codeword silences every sensor the channel supports;
/// zero when the channel supports none (both variances are infinite and no
/// codeword can do better).
pub fn codeword_distortion(
    params: &NetworkParams,
    codeword: &GainVector,
    sample: &TrainingSample,
) -> f64 {
    let v = blue_variance(params, codeword, &sample.chan);
    if v.is_infinite() && sample.opt_variance.is_infinite() {
        return 0.0;
    }
    (v - sample.opt_variance).abs()
}

/// Best codeword index and its distortion; ties keep the lowest index.
fn best_codeword(
    params: &NetworkParams,
    codewords: &[GainVector],
    sample: &TrainingSample,
) -> (usize, f64) {
    let mut best = (0, codeword_distortion(params, &codewords[0], sample));
    for (l, w) in codewords.iter().enumerate().skip(1) {
        let d = codeword_distortion(params, w, sample);
        if d < best.1 {
            best = (l, d);
        }
    }
    best
}

/// Per-sample `(cell index, distortion)` under the nearest-codeword rule.
fn assign(
    params: &NetworkParams,
    codewords: &[GainVector],
    samples: &[TrainingSample],
) -> Vec<(usize, f64)> {
    samples
        .par_iter()
        .map(|s| best_codeword(params, codewords, s))
        .collect()
}

/// Mean over samples of each sample's best-codeword distortion.
///
/// Summation is sequential in training order, so the value is reproducible
/// and, combined with the centroid rule, non-increasing across rounds.
pub fn codebook_distortion(
    params: &NetworkParams,
    book: &Codebook,
    samples: &[TrainingSample],
) -> f64 {
    assert!(!samples.is_empty(), "distortion of an empty training set");
    mean_min_distortion(params, &book.codewords, samples)
}

fn mean_min_distortion(
    params: &NetworkParams,
    codewords: &[GainVector],
    samples: &[TrainingSample],
) -> f64 {
    let mins: Vec<f64> = samples
        .par_iter()
        .map(|s| best_codeword(params, codewords, s).1)
        .collect();
    mins.iter().sum::<f64>() / samples.len() as f64
}

/// Nearest-codeword cell index for every sample; ties keep the lowest index.
pub fn partition(
    params: &NetworkParams,
    book: &Codebook,
    samples: &[TrainingSample],
) -> Vec<usize> {
    assert!(!samples.is_empty(), "partition of an empty training set");
    assign(params, &book.codewords, samples)
        .into_iter()
        .map(|(l, _)| l)
        .collect()
}

/// Medoid-style centroid of one cell.
///
/// Candidates are the previous codeword followed by the cell samples'
/// optimal gains in training order; the winner minimizes the mean distortion
/// over the cell, and ties keep the earliest candidate. Keeping the previous
/// codeword in the candidate set is what makes training distortion
/// non-increasing.
pub fn centroid(
    params: &NetworkParams,
    cell_samples: &[&TrainingSample],
    previous_codeword: &GainVector,
) -> Result<GainVector> {
    if cell_samples.is_empty() {
        return Err(Error::EmptyCell);
    }
    // Compare total distortions; the mean's divisor is shared.
    let total = |cand: &GainVector| -> f64 {
        cell_samples
            .iter()
            .map(|s| codeword_distortion(params, cand, s))
            .sum()
    };
    let prev_total = total(previous_codeword);
    let cand_totals: Vec<f64> = cell_samples
        .par_iter()
        .map(|s| total(&s.opt_gains))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in cand_totals.iter().enumerate() {
        if t < best.map_or(prev_total, |(_, b)| b) {
            best = Some((i, t));
        }
    }
    Ok(match best {
        None => previous_codeword.clone(),
        Some((i, _)) => cell_samples[i].opt_gains.clone(),
    })
}

/// Run the Lloyd iteration from randomly selected initial codewords.
///
/// Initialization draws `2^l` distinct sample indices (repeated gain values
/// are fine, indices are not); each round is a nearest-codeword partition
/// followed by per-cell centroids, and the loop stops once a round improves
/// the distortion by at most `epsilon`.
pub fn train(
    params: &NetworkParams,
    samples: &[TrainingSample],
    l: u32,
    epsilon: f64,
    seed: u64,
) -> Result<Codebook> {
    let n_codewords = 1usize << l;
    if samples.len() < n_codewords {
        return Err(Error::InsufficientTrainingData {
            samples: samples.len(),
            codewords: n_codewords,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<GainVector> = rand::seq::index::sample(&mut rng, samples.len(), n_codewords)
        .iter()
        .map(|i| samples[i].opt_gains.clone())
        .collect();
    train_from_initial(params, samples, initial, epsilon, seed)
}

/// Run the Lloyd iteration from caller-chosen initial codewords.
///
/// `initial.len()` must be a power of two. `seed` is recorded as metadata
/// only; no randomness is consumed here. This entry point exists so a
/// codebook can be grown from a smaller one (seed the first half with a
/// trained book's codewords and the rest with extras).
pub fn train_from_initial(
    params: &NetworkParams,
    samples: &[TrainingSample],
    initial: Vec<GainVector>,
    epsilon: f64,
    seed: u64,
) -> Result<Codebook> {
    let n_codewords = initial.len();
    if !n_codewords.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "initial codebook size {n_codewords} is not a power of two"
        )));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientTrainingData {
            samples: 0,
            codewords: n_codewords,
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(
            "distortion threshold must be finite and positive".into(),
        ));
    }
    let k = params.num_sensors();
    for w in &initial {
        if w.num_sensors() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: w.num_sensors(),
            });
        }
    }

    let mut codewords = initial;
    let mut history = vec![mean_min_distortion(params, &codewords, samples)];
    let mut converged = false;

    for _ in 0..MAX_TRAINING_ITERATIONS {
        let entering = codewords.clone();
        let assigned = assign(params, &codewords, samples);

        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); n_codewords];
        for (s, &(c, _)) in assigned.iter().enumerate() {
            cells[c].push(s);
        }

        // Empty cells get the worst-covered samples' optima (farthest-point
        // reseeding): the replaced codeword served nobody, so no sample's
        // best distortion can increase.
        let empties: Vec<usize> = (0..n_codewords).filter(|&c| cells[c].is_empty()).collect();
        if !empties.is_empty() {
            let mut worst: Vec<usize> = (0..samples.len()).collect();
            worst.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
            for (rank, &c) in empties.iter().enumerate() {
                codewords[c] = samples[worst[rank]].opt_gains.clone();
            }
        }

        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let cell_samples: Vec<&TrainingSample> = cell.iter().map(|&s| &samples[s]).collect();
            codewords[c] = centroid(params, &cell_samples, &codewords[c])?;
        }

        let old_cost = *history.last().expect("history is never empty");
        let new_cost = mean_min_distortion(params, &codewords, samples);
        // The medoid step cannot raise the exact cost (it lowers per-cell
        // sums, and reassignment only lowers per-sample minima), but the
        // recorded cost re-rounds that quantity through a differently
        // associated sum, so at a fixed point it can tick up by ulps. Keep
        // the entering codewords in that case: the history stays
        // non-increasing and matches the returned codebook.
        debug_assert!(
            new_cost <= old_cost * (1.0 + 1e-9),
            "distortion rose beyond roundoff: {old_cost} -> {new_cost}"
        );
        if new_cost > old_cost {
            codewords = entering;
            converged = true;
            break;
        }
        history.push(new_cost);
        if old_cost - new_cost <= epsilon {
            converged = true;
            break;
        }
    }

    let assignment = assign(params, &codewords, samples)
        .iter()
        .map(|&(c, _)| c)
        .collect();

    Ok(Codebook {
        codewords,
        feedback_bits: n_codewords.trailing_zeros(),
        total_power: params.total_power,
        seed,
        training_size: samples.len(),
        epsilon,
        iterations: history.len() - 1,
        converged,
        distortion_history: history,
        assignment,
    })
}

/// Index the fusion center broadcasts for a fresh channel draw: the codeword
/// with the smallest variance penalty against the draw's own optimum,
/// lowest index on ties.
pub fn select_index(
    params: &NetworkParams,
    book: &Codebook,
    chan: ChannelRealization,
) -> Result<usize> {
    let sample = TrainingSample::from_channel(params, chan)?;
    Ok(best_codeword(params, &book.codewords, &sample).0)
}

const CODEBOOK_MAGIC: &str = "bluesim-codebook v1";

impl Codebook {
    /// Write the codebook as a versioned flat file (bit-exact round trip).
    /// `assignment` is training metadata and is not persisted.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(CODEBOOK_MAGIC);
        out.push('\n');
        out.push_str(&format!("k = {}\n", self.num_sensors()));
        out.push_str(&format!("feedback_bits = {}\n", self.feedback_bits));
        out.push_str(&format!("total_power = {}\n", self.total_power));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("training_size = {}\n", self.training_size));
        out.push_str(&format!("epsilon = {}\n", self.epsilon));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        out.push_str(&format!("converged = {}\n", self.converged));
        out.push_str(&format!(
            "distortion_history = {}\n",
            join(&self.distortion_history)
        ));
        for w in &self.codewords {
            out.push_str(&format!("codeword = {}\n", join(&w.gains)));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Read a codebook written by [`Codebook::save`].
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Reader::new(path, &text);
        let parse_err = |reason: String| Error::Parse {
            path: path.display().to_string(),
            reason,
        };

        r.expect_magic(CODEBOOK_MAGIC)?;
        let k = r.kv_usize("k")?;
        let feedback_bits = r.kv_u64("feedback_bits")?;
        if k == 0 {
            return Err(parse_err("k must be at least 1".into()));
        }
        if feedback_bits > 24 {
            return Err(parse_err(format!(
                "feedback_bits = {feedback_bits} is out of range"
            )));
        }
        let feedback_bits = feedback_bits as u32;
        let total_power = r.kv_f64("total_power")?;
        let seed = r.kv_u64("seed")?;
        let training_size = r.kv_usize("training_size")?;
        let epsilon = r.kv_f64("epsilon")?;
        let iterations = r.kv_usize("iterations")?;
        let converged = match r.kv("converged")? {
            "true" => true,
            "false" => false,
            other => return Err(parse_err(format!("converged: expected bool, got {other:?}"))),
        };
        let distortion_history = r.kv_f64_seq("distortion_history")?;
        if distortion_history.len() != iterations + 1 {
            return Err(parse_err(format!(
                "distortion history has {} entries for {} iterations",
                distortion_history.len(),
                iterations
            )));
        }
        let mut codewords = Vec::with_capacity(1 << feedback_bits);
        for _ in 0..(1usize << feedback_bits) {
            let gains = r.kv_f64_vec("codeword", k)?;
            codewords.push(
                GainVector::new(gains)
                    .map_err(|e| parse_err(format!("bad codeword row: {e}")))?,
            );
        }
        r.expect_end()?;
        Ok(Codebook {
            codewords,
            feedback_bits,
            total_power,
            seed,
            training_size,
            epsilon,
            iterations,
            converged,
            distortion_history,
            assignment: Vec::new(),
        })
    }
}
