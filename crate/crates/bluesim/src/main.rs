//! Command-line front end: `train` designs and persists one codebook, `run`
//! executes the configured experiment sweep, `eval` reports the allocation
//! decisions for a single fresh channel draw.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
//! numeric error, 3 i/o error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bluesim::channel::NetworkInstance;
use bluesim::codebook::{select_index, Codebook};
use bluesim::config::ExperimentConfig;
use bluesim::estimator::{blue_estimate, simulate_measurement_with};
use bluesim::harness;
use bluesim::model::{dbm_to_watts, watts_to_dbm};
use bluesim::results::OutputFormat;
use bluesim::seeds::{stream_rng, STREAM_EVAL};
use bluesim::{allocator, estimator, Error, Result};

#[derive(Parser)]
#[command(
    name = "bluesim",
    version,
    about = "Distributed estimation over fading channels: optimal power \
             allocation, limited-feedback codebooks, Monte-Carlo sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML). Built-in defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the config's master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Design a power-allocation codebook and save it to a file.
    Train {
        #[command(flatten)]
        common: CommonArgs,

        /// Network size (default: first configured K).
        #[arg(long, value_name = "N")]
        k: Option<usize>,

        /// Feedback bits (default: first configured L).
        #[arg(long, value_name = "N")]
        l: Option<u32>,

        /// Total power budget in dBm (default: first sweep point).
        #[arg(long, value_name = "DBM")]
        p_dbm: Option<f64>,

        /// Where to write the codebook.
        #[arg(long, value_name = "PATH", default_value = "codebook.txt")]
        out: PathBuf,
    },

    /// Run the full experiment sweep and write one record per curve point.
    Run {
        #[command(flatten)]
        common: CommonArgs,

        /// Override the configured output path.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,

        /// Override the configured output format.
        #[arg(long, value_name = "FMT", value_parser = parse_format)]
        format: Option<OutputFormat>,

        /// Override the configured Monte-Carlo trial count.
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
    },

    /// Draw one channel realization and report what each feedback mode does.
    Eval {
        #[command(flatten)]
        common: CommonArgs,

        /// Codebook file to evaluate (as written by `train`).
        #[arg(long, value_name = "PATH")]
        codebook: PathBuf,
    },
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    OutputFormat::from_flag(s).ok_or_else(|| format!("unknown format {s:?} (use csv or jsonl)"))
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_toml_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn init_threads(common: &CommonArgs) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_train(
    common: &CommonArgs,
    k: Option<usize>,
    l: Option<u32>,
    p_dbm: Option<f64>,
    out: &Path,
) -> Result<()> {
    let config = load_config(common)?;
    config.validate()?;
    let k = k.unwrap_or(config.k_values[0]);
    let l = match l.or_else(|| config.l_values.first().copied()) {
        Some(l) => l,
        None => {
            return Err(Error::InvalidConfig(
                "no feedback bits: pass --l or configure l_values".into(),
            ))
        }
    };
    let p_watts = match p_dbm {
        Some(dbm) => dbm_to_watts(dbm),
        None => config.power_sweep.points()[0].watts,
    };

    let book = harness::train_codebook(&config, k, l, p_watts)?;
    book.save(out)?;
    println!("codebook: {}", out.display());
    println!("sensors = {k}");
    println!("feedback_bits = {l} ({} codewords)", book.codewords.len());
    println!("total_power_dbm = {}", watts_to_dbm(p_watts));
    println!("iterations = {}", book.iterations);
    println!("converged = {}", book.converged);
    println!("final_distortion = {}", book.final_distortion());
    Ok(())
}

fn cmd_run(
    common: &CommonArgs,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    trials: Option<usize>,
) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(path) = out {
        config.output.path = path;
    }
    if let Some(format) = format {
        config.output.format = format;
    }
    if let Some(trials) = trials {
        config.mc_trials = trials;
    }
    let records = harness::run_experiment(&config)?;
    println!(
        "wrote {} records to {}",
        records.len(),
        config.output.path.display()
    );
    Ok(())
}

fn cmd_eval(common: &CommonArgs, codebook: &Path) -> Result<()> {
    let config = load_config(common)?;
    config.validate()?;
    let book = Codebook::load(codebook)?;
    let k = book.num_sensors();

    let instance: NetworkInstance = harness::base_instance(&config, k)?;
    let params = instance.params.with_total_power(book.total_power)?;
    let chan = instance.sample_fading(&mut stream_rng(
        config.master_seed,
        &[STREAM_EVAL, k as u64, 0],
    ));

    let alloc = allocator::optimal_gains(&params, &chan)?;
    let opt_variance = estimator::blue_variance(&params, &alloc.gains, &chan);
    let index = select_index(&params, &book, chan.clone())?;
    let codeword = &book.codewords[index];
    let codeword_variance = estimator::blue_variance(&params, codeword, &chan);

    println!("sensors = {k}");
    println!("total_power_dbm = {}", watts_to_dbm(book.total_power));
    println!("channel_gains = {}", join(&chan.gains));
    println!("optimal_gains = {}", join(&alloc.gains.gains));
    println!("optimal_variance = {opt_variance}");
    println!("selected_index = {index}");
    println!("codeword_gains = {}", join(&codeword.gains));
    println!("codeword_variance = {codeword_variance}");

    // One simulated measurement through the selected codeword, so the whole
    // estimation chain is exercised from the command line.
    let mut rng = stream_rng(config.master_seed, &[STREAM_EVAL, k as u64, 0, 1]);
    let (theta, received) =
        simulate_measurement_with(&params, codeword, &chan, config.theta, &mut rng);
    let estimate = blue_estimate(&params, codeword, &chan, &received)?;
    println!("theta = {theta}");
    println!("estimate = {estimate}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train {
            common,
            k,
            l,
            p_dbm,
            out,
        } => {
            init_threads(common)?;
            cmd_train(common, *k, *l, *p_dbm, out)
        }
        Command::Run {
            common,
            out,
            format,
            trials,
        } => {
            init_threads(common)?;
            cmd_run(common, out.clone(), *format, *trials)
        }
        Command::Eval { common, codebook } => {
            init_threads(common)?;
            cmd_eval(common, codebook)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
