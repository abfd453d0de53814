//! Denoising benchmarks, regularization sweeps and convergence traces.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::noise::{add_awgn, psnr};
use crate::dictionary::Dictionary;
use crate::error::{LrdError, Result};
use crate::io::netpbm;
use crate::regularization::RegularizationConfig;
use crate::restore::{denoise_with, normalize_output, ReferenceSource, ReferenceStats, RestoreOptions};
use crate::solver::lrd_solve_observed;
use crate::tensor::DenseTensor;

/// CSV header written by [`write_records`].
pub const CSV_HEADER: &str = "schema,image,sigma,config_digest,input_psnr,output_psnr,wall_time,iters,seed";
/// Value of the `schema` column.
pub const CSV_SCHEMA: &str = "lrd-bench-1";

/// Everything that defines a denoising method apart from the seed.
#[derive(Clone, Debug)]
pub struct DenoiseSetup {
    pub dict: Dictionary<f64>,
    pub rank: usize,
    pub config: RegularizationConfig<f64>,
    pub restore: RestoreOptions,
    /// Clamp the noisy input to `[0, 1]`.
    pub clip_noise: bool,
}

impl DenoiseSetup {
    /// Short stable hash of the method parameters and filter values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut text = String::new();
        let _ = writeln!(text, "rank = {}", self.rank);
        text.push_str(&self.config.to_text());
        let _ = writeln!(text, "filters = {} {:?}", self.dict.len(), self.dict.support());
        let _ = writeln!(text, "restore = {:?}", self.restore);
        let _ = writeln!(text, "clip_noise = {}", self.clip_noise);
        h.update(text.as_bytes());
        for f in self.dict.filters() {
            for v in f.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex(&h.finalize()[..8])
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-job seed derived from the root seed, the image id and the noise level.
pub fn job_seed(root: u64, image_id: &str, sigma: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update((image_id.len() as u64).to_le_bytes());
    h.update(image_id.as_bytes());
    h.update(sigma.to_bits().to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// One benchmark image; unreadable files keep their error message.
#[derive(Clone, Debug)]
pub struct DatasetImage {
    pub id: String,
    pub image: std::result::Result<DenseTensor<f64>, String>,
}

impl DatasetImage {
    pub fn new(id: impl Into<String>, image: DenseTensor<f64>) -> Self {
        Self {
            id: id.into(),
            image: Ok(image),
        }
    }
}

/// The generated suite as a dataset.
pub fn synthetic_dataset(size: usize) -> Vec<DatasetImage> {
    super::synthetic::synthetic_suite(size)
        .into_iter()
        .map(|(id, img)| DatasetImage::new(id, img))
        .collect()
}

/// All `.pgm` files of `dir` in name order; decoding errors are kept per image.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetImage>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| DatasetImage {
            id: p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            image: netpbm::read_pgm::<f64>(&p).map_err(|e| e.to_string()),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRecord {
    pub image_id: String,
    pub sigma: f64,
    pub config_digest: String,
    pub input_psnr: f64,
    pub output_psnr: f64,
    pub wall_time: f64,
    pub iterations: usize,
    pub seed: u64,
    pub error: Option<String>,
}

/// Mean PSNRs of the successful records at one noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSummary {
    pub sigma: f64,
    pub mean_input_psnr: f64,
    pub mean_output_psnr: f64,
    pub count: usize,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub records: Vec<BenchmarkRecord>,
    pub summary: Vec<SigmaSummary>,
}

fn run_job(
    image_id: &str,
    clean: &DenseTensor<f64>,
    sigma: f64,
    setup: &DenoiseSetup,
    seed: u64,
) -> Result<BenchmarkRecord> {
    let noisy = add_awgn(clean, sigma, seed, setup.clip_noise)?;
    let mut restore = setup.restore.clone();
    restore.solve.seed = seed;
    let result = denoise_with(&noisy, &setup.dict, setup.rank, &setup.config, &restore)?;
    Ok(BenchmarkRecord {
        image_id: image_id.to_string(),
        sigma,
        config_digest: setup.digest(),
        input_psnr: psnr(&noisy, clean, 1.0)?,
        output_psnr: psnr(&result.output, clean, 1.0)?,
        wall_time: result.wall_time.as_secs_f64(),
        iterations: result.iterations,
        seed,
        error: None,
    })
}

fn failed(image_id: &str, sigma: f64, setup: &DenoiseSetup, seed: u64, error: String) -> BenchmarkRecord {
    BenchmarkRecord {
        image_id: image_id.to_string(),
        sigma,
        config_digest: setup.digest(),
        input_psnr: f64::NAN,
        output_psnr: f64::NAN,
        wall_time: 0.0,
        iterations: 0,
        seed,
        error: Some(error),
    }
}

fn benchmark_records(
    images: &[DatasetImage],
    sigmas: &[f64],
    setup: &DenoiseSetup,
    root_seed: u64,
) -> Vec<BenchmarkRecord> {
    let jobs: Vec<(&DatasetImage, f64)> = images
        .iter()
        .flat_map(|img| sigmas.iter().map(move |&s| (img, s)))
        .collect();
    jobs.par_iter()
        .map(|&(img, sigma)| {
            let seed = job_seed(root_seed, &img.id, sigma);
            match &img.image {
                Ok(clean) => run_job(&img.id, clean, sigma, setup, seed)
                    .unwrap_or_else(|e| failed(&img.id, sigma, setup, seed, e.to_string())),
                Err(e) => failed(&img.id, sigma, setup, seed, e.clone()),
            }
        })
        .collect()
}

fn summarize(records: &[BenchmarkRecord], sigmas: &[f64]) -> Vec<SigmaSummary> {
    sigmas
        .iter()
        .map(|&sigma| {
            let at: Vec<_> = records.iter().filter(|r| r.sigma == sigma).collect();
            let ok: Vec<_> = at.iter().filter(|r| r.error.is_none()).collect();
            let mean = |f: fn(&BenchmarkRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64;
            SigmaSummary {
                sigma,
                mean_input_psnr: mean(|r| r.input_psnr),
                mean_output_psnr: mean(|r| r.output_psnr),
                count: ok.len(),
                failures: at.len() - ok.len(),
            }
        })
        .collect()
}

/// Denoises every image at every noise level; optionally writes the CSV.
pub fn run_denoise_benchmark(
    images: &[DatasetImage],
    sigmas: &[f64],
    setup: &DenoiseSetup,
    root_seed: u64,
    out_csv: Option<&Path>,
) -> Result<BenchmarkReport> {
    if sigmas.is_empty() {
        return Err(LrdError::config("no noise levels given"));
    }
    let records = benchmark_records(images, sigmas, setup, root_seed);
    if let Some(path) = out_csv {
        write_records(path, &records)?;
    }
    let summary = summarize(&records, sigmas);
    Ok(BenchmarkReport { records, summary })
}

/// CSV text with [`CSV_HEADER`]; failed records have `NaN` PSNRs.
pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{CSV_SCHEMA},{},{},{},{:.6},{:.6},{:.6},{},{}",
            r.image_id, r.sigma, r.config_digest, r.input_psnr, r.output_psnr, r.wall_time, r.iterations, r.seed
        );
    }
    s
}

pub fn write_records(path: impl AsRef<Path>, records: &[BenchmarkRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Mean PSNR over the images at one `(sigma, gamma)` grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub gamma: f64,
    pub mean_input_psnr: f64,
    pub mean_output_psnr: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub records: Vec<BenchmarkRecord>,
    pub points: Vec<SweepPoint>,
    /// `(sigma, gamma)` with the highest mean output PSNR per noise level.
    pub best: Vec<(f64, f64)>,
}

/// Benchmarks every `gamma` of the grid with otherwise identical settings.
pub fn gamma_sweep(
    images: &[DatasetImage],
    sigmas: &[f64],
    gammas: &[f64],
    setup: &DenoiseSetup,
    root_seed: u64,
    out_csv: Option<&Path>,
) -> Result<SweepReport> {
    if gammas.is_empty() || sigmas.is_empty() {
        return Err(LrdError::config("sweep needs at least one gamma and one sigma"));
    }
    let mut records = Vec::new();
    let mut points = Vec::new();
    for &gamma in gammas {
        let mut s = setup.clone();
        s.config.gamma = gamma;
        s.config.validate(Some(s.dict.len()))?;
        let report = run_denoise_benchmark(images, sigmas, &s, root_seed, None)?;
        points.extend(report.summary.iter().map(|m| SweepPoint {
            sigma: m.sigma,
            gamma,
            mean_input_psnr: m.mean_input_psnr,
            mean_output_psnr: m.mean_output_psnr,
        }));
        records.extend(report.records);
    }
    if let Some(path) = out_csv {
        write_records(path, &records)?;
    }
    let best = sigmas
        .iter()
        .map(|&sigma| {
            let top = points
                .iter()
                .filter(|p| p.sigma == sigma && p.mean_output_psnr.is_finite())
                .max_by(|a, b| a.mean_output_psnr.total_cmp(&b.mean_output_psnr));
            (sigma, top.map_or(f64::NAN, |p| p.gamma))
        })
        .collect();
    Ok(SweepReport { records, points, best })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    /// Solver time in seconds, excluding the PSNR evaluation.
    pub elapsed: f64,
    pub psnr: f64,
    pub objective: f64,
}

/// Output PSNR after each outer iteration of a denoising solve of `noisy`.
pub fn timing_trace(
    clean: &DenseTensor<f64>,
    noisy: &DenseTensor<f64>,
    setup: &DenoiseSetup,
) -> Result<Vec<TracePoint>> {
    clean.check_same_shape(noisy)?;
    let reference = match setup.restore.reference {
        ReferenceSource::Unit => ReferenceStats::unit(),
        ReferenceSource::Input => ReferenceStats::of(noisy, setup.restore.normalization),
    };
    let mut points = Vec::new();
    let mut failure = None;
    lrd_solve_observed(
        noisy,
        &setup.dict,
        setup.rank,
        &setup.config,
        &setup.restore.solve,
        |event, state| {
            let out = normalize_output(&state.reconstruct(), setup.restore.normalization, &reference);
            match psnr(&out, clean, 1.0) {
                Ok(p) => points.push(TracePoint {
                    iteration: event.iteration,
                    elapsed: event.elapsed.as_secs_f64(),
                    psnr: p,
                    objective: event.objective.total,
                }),
                Err(e) => failure = Some(e),
            }
        },
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(points),
    }
}

pub fn trace_to_csv(points: &[TracePoint]) -> String {
    let mut s = String::from("iteration,elapsed,psnr,objective\n");
    for p in points {
        let _ = writeln!(s, "{},{:.6},{:.6},{:e}", p.iteration, p.elapsed, p.psnr, p.objective);
    }
    s
}

/// Sweep rows as CSV (`sigma,gamma,mean_input_psnr,mean_output_psnr`).
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("sigma,gamma,mean_input_psnr,mean_output_psnr\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{:e},{:.6},{:.6}",
            p.sigma, p.gamma, p.mean_input_psnr, p.mean_output_psnr
        );
    }
    s
}
