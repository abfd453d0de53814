//! `lrd` command-line front end.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrd_core::dictionary::{builtin_bank, load_bank, BuiltinKind, Dictionary};
use lrd_core::harness::{
    add_awgn, gamma_sweep, load_dataset, psnr, records_to_csv, run_denoise_benchmark, sweep_to_csv, synthetic_dataset,
    synthetic_suite, timing_trace, trace_to_csv, DatasetImage, DenoiseSetup,
};
use lrd_core::io::netpbm::{read_frames, read_image, read_pgm, write_frames, write_image, Image};
use lrd_core::regularization::{denoise_preset, enhance_preset, RegularizationConfig, DEFAULT_ALPHA};
use lrd_core::restore::{denoise_with, enhance, per_channel, ChannelDictionaries, RestorationResult};
use lrd_core::Result;

use settings::{config_error, Settings};

#[derive(Parser)]
#[command(
    name = "lrd",
    version,
    about = "Low-rank deconvolution for denoising and detail enhancement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a PGM/PPM image.
    Denoise(DenoiseArgs),
    /// Enhance the details of a directory of video frames.
    Enhance(EnhanceArgs),
    /// Add noise to a dataset, denoise it and write per-image PSNRs.
    Bench(BenchArgs),
    /// Benchmark a grid of TV weights.
    Sweep(SweepArgs),
    /// Record PSNR and objective after every outer iteration.
    Trace(TraceArgs),
    /// Write a built-in filter bank to a `.nt` file.
    MakeDict(MakeDictArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kruskal rank of each coefficient tensor.
    #[arg(long)]
    rank: Option<usize>,
    /// Maximum number of outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative objective change that stops the solver.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Ridge weight on the factor spectra.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output normalization: percentile, clip or none.
    #[arg(long)]
    normalization: Option<String>,
    /// Percentile target range: unit or input.
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Args)]
struct DictArgs {
    /// Filter bank in `.nt` format; a built-in bank is used when absent.
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Built-in bank kind: dct, gradient or identity.
    #[arg(long)]
    kind: Option<String>,
    /// Built-in filter support, comma separated.
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    /// Number of built-in filters.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Squared-TV weight.
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    dict: DictArgs,
}

#[derive(Args)]
struct EnhanceArgs {
    /// Directory of numbered PGM/PPM frames.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TV weight of the filters after the split.
    #[arg(long)]
    gamma: Option<f64>,
    /// Antiderivative weight of the filters before the split.
    #[arg(long)]
    zeta: Option<f64>,
    /// Gain of the components before the split.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of leading filters that carry `zeta` and `delta`.
    #[arg(long)]
    split: Option<usize>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    dict: DictArgs,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory of clean PGM images; the generated suite is used when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Side length of the generated images.
    #[arg(long)]
    size: Option<usize>,
    /// Noise levels on the 8-bit scale, comma separated.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Clamp noisy inputs to [0, 1].
    #[arg(long)]
    clip_noise: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// CSV file for the per-image records.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    dict: DictArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// TV weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// CSV file for the per-image records.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV file for the mean PSNR per grid point.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    dict: DictArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// Clean PGM image; a generated image is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generated image id (piecewise_constant, piecewise_smooth, textured).
    #[arg(long)]
    image: Option<String>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    clip_noise: bool,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    dict: DictArgs,
}

#[derive(Args)]
struct MakeDictArgs {
    #[arg(long, default_value = "dct")]
    kind: String,
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Built-in bank used when no `--dict` is given.
struct DictDefault {
    support: &'static [usize],
    count: usize,
}

const DENOISE_BANK: DictDefault = DictDefault {
    support: &[5, 5],
    count: 25,
};
const ENHANCE_BANK: DictDefault = DictDefault {
    support: &[5, 11, 11],
    count: 60,
};
/// TV weight selected by a sweep over the generated suite.
const DENOISE_GAMMA: f64 = 1.0;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Denoise(a) => cmd_denoise(a),
        Command::Enhance(a) => cmd_enhance(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Trace(a) => cmd_trace(a),
        Command::MakeDict(a) => cmd_make_dict(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("LRD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_error(format!("LRD_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(format!("cannot configure thread pool: {e}")))
}

fn settings(common: &Common, dict: &DictArgs) -> Result<Settings> {
    let mut s = Settings::load(common.config.as_deref())?;
    s.set("rank", common.rank);
    s.set("iters", common.iters);
    s.set("seed", common.seed);
    s.set("rel_tol", common.rel_tol);
    s.set("alpha", common.alpha);
    s.set("normalization", common.normalization.as_ref());
    s.set("reference", common.reference.as_ref());
    s.set("dict", dict.dict.as_ref().map(|p| p.display()));
    s.set("kind", dict.kind.as_ref());
    s.set_list("support", &dict.support);
    s.set("count", dict.count);
    Ok(s)
}

fn dictionary(s: &Settings, default: &DictDefault) -> Result<Dictionary<f64>> {
    let kind: Option<BuiltinKind> = s.get("kind")?;
    let support: Option<Vec<usize>> = s.list("support")?;
    let count: Option<usize> = s.get("count")?;
    if let Some(path) = s.raw("dict") {
        if kind.is_some() || support.is_some() || count.is_some() {
            return Err(config_error("--dict cannot be combined with built-in bank settings"));
        }
        return load_bank(path);
    }
    builtin_bank(
        kind.unwrap_or(BuiltinKind::Dct),
        support.as_deref().unwrap_or(default.support),
        count.unwrap_or(default.count),
    )
}

fn denoise_config(s: &Settings) -> Result<RegularizationConfig<f64>> {
    let mut cfg = denoise_preset(DENOISE_GAMMA, DEFAULT_ALPHA)?;
    s.apply_regularization(&mut cfg)?;
    cfg.validate(None)?;
    Ok(cfg)
}

fn report(label: &str, results: &[RestorationResult<f64>]) {
    for (c, r) in results.iter().enumerate() {
        let status = if r.converged { "converged" } else { "iteration limit" };
        println!(
            "{label} channel {c}: {} iterations ({status}), {:.3} s",
            r.iterations,
            r.wall_time.as_secs_f64()
        );
    }
}

fn cmd_denoise(a: DenoiseArgs) -> Result<()> {
    let mut s = settings(&a.common, &a.dict)?;
    s.set("gamma", a.gamma);
    let dict = dictionary(&s, &DENOISE_BANK)?;
    let rank = s.get_or("rank", 3)?;
    let config = denoise_config(&s)?;
    let options = s.restore_options()?;
    s.reject_unknown()?;

    let image: Image<f64> = read_image(&a.input)?;
    let results = per_channel(&image.channels, ChannelDictionaries::Shared(&dict), |ch, d| {
        denoise_with(ch, d, rank, &config, &options)
    })?;
    report("denoise", &results);
    let out = Image {
        channels: results.into_iter().map(|r| r.output).collect(),
    };
    write_image(&a.output, &out)
}

fn cmd_enhance(a: EnhanceArgs) -> Result<()> {
    let mut s = settings(&a.common, &a.dict)?;
    s.set("gamma", a.gamma);
    s.set("zeta", a.zeta);
    s.set("delta", a.delta);
    s.set("split", a.split);
    let dict = dictionary(&s, &ENHANCE_BANK)?;
    let m = dict.len();
    let rank = s.get_or("rank", 16)?;
    let split = s.get_or("split", 30.min(m))?;
    let gamma = s.get_or("gamma", 1e-3)?;
    let zeta = s.get_or("zeta", 5e-3)?;
    let delta = s.get_or("delta", 0.6)?;
    let mut config = enhance_preset(m, gamma, zeta, split)?.with_split_delta(m, delta, split)?;
    for key in ["alpha", "gamma_m", "zeta_m", "delta_m", "dc_policy"] {
        if let Some(v) = s.raw(key) {
            config.apply_key_value(key, v)?;
        }
    }
    config.validate(Some(m))?;
    let options = s.restore_options()?;
    s.reject_unknown()?;

    let channels = read_frames::<f64>(&a.frames)?;
    let results = per_channel(&channels, ChannelDictionaries::Shared(&dict), |ch, d| {
        enhance(ch, d, rank, &config, &options)
    })?;
    report("enhance", &results);
    let outputs: Vec<_> = results.into_iter().map(|r| r.output).collect();
    let written = write_frames(&a.out, &outputs)?;
    println!("wrote {} frames to {}", written.len(), a.out.display());
    Ok(())
}

fn dataset(s: &Settings, data: &DatasetArgs) -> Result<(Vec<DatasetImage>, Vec<f64>, bool)> {
    let size = s.get_or("size", 64)?;
    let images = match &data.dataset {
        Some(dir) => load_dataset(dir)?,
        None => synthetic_dataset(size),
    };
    if images.is_empty() {
        return Err(config_error("the dataset contains no images"));
    }
    let sigmas = s.list("sigmas")?.unwrap_or_else(|| vec![30.0, 50.0]);
    let clip = s.get_or("clip_noise", false)?;
    Ok((images, sigmas, clip))
}

fn setup(s: &Settings, clip_noise: bool) -> Result<DenoiseSetup> {
    Ok(DenoiseSetup {
        dict: dictionary(s, &DENOISE_BANK)?,
        rank: s.get_or("rank", 3)?,
        config: denoise_config(s)?,
        restore: s.restore_options()?,
        clip_noise,
    })
}

fn data_settings(common: &Common, dict: &DictArgs, data: &DatasetArgs, gamma: Option<f64>) -> Result<Settings> {
    let mut s = settings(common, dict)?;
    s.set("gamma", gamma);
    s.set("size", data.size);
    s.set_list("sigmas", &data.sigmas);
    s.set("clip_noise", data.clip_noise.then_some(true));
    Ok(s)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let s = data_settings(&a.common, &a.dict, &a.data, a.gamma)?;
    let (images, sigmas, clip) = dataset(&s, &a.data)?;
    let setup = setup(&s, clip)?;
    let seed = s.get_or("seed", 0)?;
    s.reject_unknown()?;

    let report = run_denoise_benchmark(&images, &sigmas, &setup, seed, None)?;
    write_or_print(a.out.as_deref(), &records_to_csv(&report.records))?;
    for r in report.records.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "failed: {} sigma {}: {}",
            r.image_id,
            r.sigma,
            r.error.as_deref().unwrap_or("")
        );
    }
    for m in &report.summary {
        eprintln!(
            "sigma {}: mean input {:.2} dB, mean output {:.2} dB over {} images ({} failed)",
            m.sigma, m.mean_input_psnr, m.mean_output_psnr, m.count, m.failures
        );
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut s = data_settings(&a.common, &a.dict, &a.data, None)?;
    s.set_list("gammas", &a.gammas);
    let (images, sigmas, clip) = dataset(&s, &a.data)?;
    let setup = setup(&s, clip)?;
    let gammas = s.list("gammas")?.unwrap_or_else(|| vec![1e-2, 1e-1, 1.0, 10.0]);
    let seed = s.get_or("seed", 0)?;
    s.reject_unknown()?;

    let report = gamma_sweep(&images, &sigmas, &gammas, &setup, seed, a.out.as_deref())?;
    write_or_print(a.summary.as_deref(), &sweep_to_csv(&report.points))?;
    for (sigma, gamma) in &report.best {
        eprintln!("sigma {sigma}: best gamma {gamma:e}");
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> Result<()> {
    let mut s = settings(&a.common, &a.dict)?;
    s.set("gamma", a.gamma);
    s.set("size", a.size);
    s.set("sigma", a.sigma);
    s.set("image", a.image.as_ref());
    s.set("clip_noise", a.clip_noise.then_some(true));
    let id = s.raw("image").unwrap_or("piecewise_smooth").to_string();
    let size = s.get_or("size", 256)?;
    let clean = match &a.input {
        Some(path) => read_pgm(path)?,
        None => synthetic_suite(size)
            .into_iter()
            .find(|(name, _)| *name == id)
            .map(|(_, img)| img)
            .ok_or_else(|| config_error(format!("unknown generated image '{id}'")))?,
    };
    let sigma = s.get_or("sigma", 30.0)?;
    let clip = s.get_or("clip_noise", false)?;
    let setup = setup(&s, clip)?;
    s.reject_unknown()?;

    let noisy = add_awgn(&clean, sigma, setup.restore.solve.seed, clip)?;
    eprintln!("input PSNR {:.2} dB", psnr(&noisy, &clean, 1.0)?);
    let points = timing_trace(&clean, &noisy, &setup)?;
    write_or_print(a.out.as_deref(), &trace_to_csv(&points))
}

fn cmd_make_dict(a: MakeDictArgs) -> Result<()> {
    let kind: BuiltinKind = a.kind.parse()?;
    let bank: Dictionary<f64> = builtin_bank(kind, &a.support, a.count)?;
    bank.save(&a.out)?;
    println!(
        "wrote {} filters of support {:?} to {}",
        bank.len(),
        bank.support(),
        a.out.display()
    );
    Ok(())
}
