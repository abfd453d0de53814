use std::path::Path;
use std::process::{Command, Output};

use lrd_core::harness::synthetic_suite;
use lrd_core::io::netpbm::{read_image, read_pgm, write_image, write_pgm, Image};
use lrd_core::tensor::DenseTensor;

fn lrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_test_image(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("in.pgm");
    let (_, img) = synthetic_suite(24).remove(0);
    write_pgm(&path, &img).unwrap();
    path
}

#[test]
fn make_dict_and_denoise_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.nt");
    let out = lrd(&[
        "make-dict",
        "--kind",
        "dct",
        "--support",
        "3,3",
        "--count",
        "6",
        "--out",
        p(&bank),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let input = write_test_image(dir.path());
    let output = dir.path().join("out.pgm");
    let out = lrd(&[
        "denoise",
        "--input",
        p(&input),
        "--dict",
        p(&bank),
        "--rank",
        "2",
        "--gamma",
        "0.5",
        "--iters",
        "3",
        "--seed",
        "1",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let restored: DenseTensor<f64> = read_pgm(&output).unwrap();
    assert_eq!(restored.shape(), &[24, 24]);
}

#[test]
fn color_input_is_restored_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ppm");
    let channels: Vec<_> = synthetic_suite(16).into_iter().map(|(_, t)| t).collect();
    write_image(&input, &Image { channels }).unwrap();
    let output = dir.path().join("out.ppm");
    let out = lrd(&[
        "denoise",
        "--input",
        p(&input),
        "--support",
        "3,3",
        "--count",
        "4",
        "--rank",
        "2",
        "--iters",
        "2",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let img: Image<f64> = read_image(&output).unwrap();
    assert_eq!(img.channels.len(), 3);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_test_image(dir.path());
    let output = dir.path().join("out.pgm");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gamma = not-a-number\nrank = 2\niters = 2\n").unwrap();
    let base = [
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--config",
        p(&cfg),
    ];

    assert_eq!(code(&lrd(&base)), 2);
    let mut fixed = base.to_vec();
    fixed.extend(["--gamma", "0.1", "--support", "3,3", "--count", "4"]);
    let out = lrd(&fixed);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pgm");
    let output = dir.path().join("out.pgm");
    assert_eq!(
        code(&lrd(&["denoise", "--input", p(&missing), "--output", p(&output)])),
        3
    );

    let input = write_test_image(dir.path());
    let bad_gamma = lrd(&["denoise", "--input", p(&input), "--output", p(&output), "--gamma=-1"]);
    assert_eq!(code(&bad_gamma), 2);

    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gama = 1\n").unwrap();
    let unknown = lrd(&[
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("gama"));

    let garbage = dir.path().join("garbage.pgm");
    std::fs::write(&garbage, b"P7 nonsense").unwrap();
    assert_eq!(
        code(&lrd(&["denoise", "--input", p(&garbage), "--output", p(&output)])),
        3
    );

    assert_eq!(code(&lrd(&["frobnicate"])), 2);
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lrd"))
        .env("LRD_THREADS", "zero")
        .args([
            "make-dict",
            "--support",
            "3",
            "--count",
            "2",
            "--out",
            p(&dir.path().join("b.nt")),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn enhance_writes_one_frame_per_input_frame() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for f in 0..4 {
        let t = DenseTensor::from_fn(&[10, 10], |i| ((i[0] + 2 * i[1] + f) % 7) as f64 / 6.0).unwrap();
        write_pgm(frames.join(format!("frame_{f}.pgm")), &t).unwrap();
    }
    let out_dir = dir.path().join("out");
    let out = lrd(&[
        "enhance",
        "--frames",
        p(&frames),
        "--support",
        "3,3,3",
        "--count",
        "6",
        "--split",
        "3",
        "--rank",
        "2",
        "--gamma",
        "1e-3",
        "--zeta",
        "5e-3",
        "--delta",
        "0.6",
        "--iters",
        "2",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 4);
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols[6] = "-";
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = lrd(&[
            "bench",
            "--size",
            "16",
            "--sigmas",
            "30",
            "--support",
            "3,3",
            "--count",
            "4",
            "--rank",
            "2",
            "--iters",
            "2",
            "--seed",
            "5",
            "--out",
            p(&csv),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(csv).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert!(a.starts_with("schema,image,sigma,config_digest,input_psnr,output_psnr,wall_time,iters,seed\n"));
    assert_eq!(a.lines().count(), 4);
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
}

#[test]
fn sweep_and_trace_produce_csv() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("sweep.csv");
    let out = lrd(&[
        "sweep",
        "--size",
        "16",
        "--sigmas",
        "30",
        "--gammas",
        "0.1,1",
        "--support",
        "3,3",
        "--count",
        "4",
        "--rank",
        "2",
        "--iters",
        "2",
        "--summary",
        p(&summary),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 3);

    let trace = dir.path().join("trace.csv");
    let out = lrd(&[
        "trace",
        "--size",
        "16",
        "--image",
        "textured",
        "--support",
        "3,3",
        "--count",
        "4",
        "--rank",
        "2",
        "--iters",
        "3",
        "--out",
        p(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iteration,elapsed,psnr,objective\n"));
    assert!(text.lines().count() >= 2);
}
