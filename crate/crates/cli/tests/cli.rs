use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_ENCODER: &str = "\
memory.n = 6
memory.seed = 3
encoder.c = 4
encoder.h = 4
encoder.w = 4
encoder.kernel = 3
encoder.resize = [16, 16]
short_term.max_epochs = 3
";

fn vismem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vismem"))
        .args(args)
        .env("VISMEM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = vismem(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    vismem(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Binary PPM with a pattern that moves with `seed`.
fn write_ppm(path: &Path, width: usize, height: usize, seed: usize) {
    let mut bytes = format!("P6\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            let v = (x * 7 + y * 13 + seed * 29) % 256;
            let blob = if (x / 5 + y / 5 + seed).is_multiple_of(3) { 200 } else { 20 };
            bytes.extend([v as u8, blob as u8, ((v + blob) / 2) as u8]);
        }
    }
    fs::write(path, bytes).unwrap();
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, text: &str) -> PathBuf {
        let p = self.path("run.toml");
        fs::write(&p, text).unwrap();
        p
    }

    fn images(&self, count: usize) -> PathBuf {
        let dir = self.path("images");
        fs::create_dir_all(&dir).unwrap();
        for i in 0..count {
            let (w, h) = if i % 2 == 0 { (40, 30) } else { (23, 31) };
            write_ppm(&dir.join(format!("img_{i:03}.ppm")), w, h, i);
        }
        dir
    }

    /// Encoded features for `count` frames; returns the manifest path.
    fn features(&self, count: usize) -> PathBuf {
        let cfg = self.config(SMALL_ENCODER);
        let images = self.images(count);
        let out = self.path("features");
        ok(&["--config", s(&cfg), "encode", "--input", s(&images), "--output", s(&out)]);
        out.join("manifest.tsv")
    }
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn encode_is_deterministic_and_resizes_mixed_inputs() {
    let ws = Workspace::new();
    let cfg = ws.config(SMALL_ENCODER);
    let images = ws.images(5);
    let (a, b) = (ws.path("a"), ws.path("b"));
    ok(&["--config", s(&cfg), "encode", "--input", s(&images), "--output", s(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_vismem"))
        .args(["--config", s(&cfg), "encode", "--input", s(&images), "--output", s(&b)])
        .env("VISMEM_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let files = dir_contents(&a);
    assert_eq!(files, dir_contents(&b));
    assert_eq!(files.len(), 6);
    let manifest = String::from_utf8(files.last().unwrap().1.clone()).unwrap();
    assert_eq!(manifest.lines().count(), 5);
    assert!(manifest.starts_with("0\tframe_000000.vft\n"));
    // every cube has the configured dims: 20-byte header plus c·h·w floats
    for (_, bytes) in files.iter().filter(|(n, _)| n.ends_with(".vft")) {
        assert_eq!(bytes.len(), 20 + 4 * 4 * 4 * 4);
    }
}

#[test]
fn encode_empty_dir_gives_empty_manifest() {
    let ws = Workspace::new();
    let cfg = ws.config(SMALL_ENCODER);
    let empty = ws.path("empty");
    fs::create_dir_all(&empty).unwrap();
    fs::write(empty.join("notes.txt"), "not an image").unwrap();
    let out = ws.path("out");
    ok(&["--config", s(&cfg), "encode", "--input", s(&empty), "--output", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("manifest.tsv")).unwrap(), "");
}

#[test]
fn encode_reads_an_image_list() {
    let ws = Workspace::new();
    let cfg = ws.config(SMALL_ENCODER);
    ws.images(3);
    let list = ws.path("list.txt");
    fs::write(&list, "images/img_002.ppm\n\nimages/img_000.ppm\n").unwrap();
    let out = ws.path("out");
    ok(&["--config", s(&cfg), "encode", "--input", s(&list), "--output", s(&out)]);
    assert_eq!(
        fs::read_to_string(out.join("manifest.tsv")).unwrap(),
        "0\tframe_000000.vft\n1\tframe_000001.vft\n"
    );
}

#[test]
fn bad_images_abort_unless_skipped() {
    let ws = Workspace::new();
    let cfg = ws.config(SMALL_ENCODER);
    let images = ws.images(3);
    fs::write(images.join("img_001.ppm"), b"P6\ngarbage").unwrap();
    let out = ws.path("out");
    let args = ["--config", s(&cfg), "encode", "--input", s(&images), "--output", s(&out)];
    assert_eq!(code(&args), 4);
    let mut skip = args.to_vec();
    skip.push("--skip-bad");
    let run = ok(&skip);
    assert!(String::from_utf8_lossy(&run.stderr).contains("img_001.ppm"));
    assert_eq!(
        fs::read_to_string(out.join("manifest.tsv")).unwrap(),
        "0\tframe_000000.vft\n2\tframe_000002.vft\n"
    );
}

#[test]
fn online_scores_are_prefix_identical_under_truncation() {
    let ws = Workspace::new();
    let manifest = ws.features(9);
    let cfg = ws.path("run.toml");
    let full = ws.path("full.jsonl");
    ok(&["--config", s(&cfg), "online", "--input", s(&manifest), "--output", s(&full), "--no-timing"]);

    let text = fs::read_to_string(&manifest).unwrap();
    let short_manifest = manifest.with_file_name("short.tsv");
    fs::write(&short_manifest, text.lines().take(4).map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let short = ws.path("short.jsonl");
    ok(&["--config", s(&cfg), "online", "--input", s(&short_manifest), "--output", s(&short), "--no-timing"]);

    let full = fs::read_to_string(full).unwrap();
    let short = fs::read_to_string(short).unwrap();
    assert_eq!(full.lines().count(), 9);
    assert_eq!(short.lines().count(), 4);
    assert!(full.starts_with(&short));
    for line in full.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        let i = rec["interestingness"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&i));
        assert_eq!(rec["ms"].as_f64(), Some(0.0));
    }
}

#[test]
fn online_writes_density_maps_and_snapshot() {
    let ws = Workspace::new();
    let manifest = ws.features(3);
    let cfg = ws.path("run.toml");
    let maps = ws.path("maps");
    let snap = ws.path("online.vmm");
    let out = ok(&[
        "--config", s(&cfg), "online", "--input", s(&manifest), "--density-out", s(&maps),
        "--memory-out", s(&snap),
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    let names: Vec<String> = dir_contents(&maps).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["frame_000000.pgm", "frame_000001.pgm", "frame_000002.pgm"]);
    let pgm = fs::read(maps.join("frame_000001.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
    assert_eq!(&fs::read(&snap).unwrap()[..4], b"VMM1");
}

#[test]
fn short_term_then_online_from_snapshot() {
    let ws = Workspace::new();
    let manifest = ws.features(6);
    let cfg = ws.path("run.toml");
    let snap = ws.path("st.vmm");
    let report = ok(&["--config", s(&cfg), "short-term", "--input", s(&manifest), "--memory-out", s(&snap)]);
    let report: Value = serde_json::from_slice(&report.stdout).unwrap();
    let epochs = report["epochs"].as_u64().unwrap();
    assert!((1..=3).contains(&epochs));
    assert_eq!(report["epoch_accuracy"].as_array().unwrap().len() as u64, epochs);

    let scores = ok(&[
        "--config", s(&cfg), "online", "--input", s(&manifest), "--memory-in", s(&snap), "--no-timing",
    ]);
    let first: Value = serde_json::from_str(String::from_utf8(scores.stdout).unwrap().lines().next().unwrap()).unwrap();
    let fresh = ok(&["--config", s(&cfg), "online", "--input", s(&manifest), "--no-timing"]);
    let fresh: Value = serde_json::from_str(String::from_utf8(fresh.stdout).unwrap().lines().next().unwrap()).unwrap();
    // the learned memory already holds the first frame
    assert!(first["interestingness"].as_f64().unwrap() < fresh["interestingness"].as_f64().unwrap());
}

#[test]
fn dumped_config_reproduces_outputs() {
    let ws = Workspace::new();
    let manifest = ws.features(5);
    let cfg = ws.path("run.toml");
    let dump = ok(&["--config", s(&cfg), "--seed", "9", "config"]);
    let dumped = ws.path("dumped.toml");
    fs::write(&dumped, &dump.stdout).unwrap();
    assert!(String::from_utf8_lossy(&dump.stdout).contains("memory.seed = 9"));
    let redump = ok(&["--config", s(&dumped), "config"]);
    assert_eq!(dump.stdout, redump.stdout);

    let run = |args: &[&str], tag: &str| {
        let snap = ws.path(&format!("{tag}.vmm"));
        let st = ok(&[args, &["short-term", "--input", s(&manifest), "--memory-out", s(&snap)]].concat());
        let on = ok(&[args, &["online", "--input", s(&manifest), "--memory-in", s(&snap), "--no-timing"]].concat());
        (st.stdout, fs::read(&snap).unwrap(), on.stdout)
    };
    let original = run(&["--config", s(&cfg), "--seed", "9"], "a");
    let replayed = run(&["--config", s(&dumped)], "b");
    assert_eq!(original, replayed);
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval").join(name)
}

#[test]
fn eval_matches_committed_oracle() {
    let out = ok(&[
        "eval",
        "--input",
        s(&fixture("scores.jsonl")),
        "--labels",
        s(&fixture("labels.csv")),
        "--delta",
        "1,2,3",
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let expected: Value = serde_json::from_str(&fs::read_to_string(fixture("expected.json")).unwrap()).unwrap();
    let reports = report["reports"].as_array().unwrap();
    assert_eq!(report["frames"], 50);
    assert_eq!(reports.len(), 2);
    let close = |a: &Value, b: &Value, what: &str| {
        let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        assert!((a - b).abs() <= 1e-12, "{what}: {a} vs {b}");
    };
    for (got, want) in reports.iter().zip(expected.as_array().unwrap()) {
        assert_eq!(got["category_threshold"], want["category_threshold"]);
        assert_eq!(got["positives"], want["positives"]);
        for d in got["online"].as_array().unwrap() {
            let key = format!("{}", d["delta"].as_f64().unwrap());
            close(&d["auc_op"], &want["auc_op"][&key], &format!("auc_op δ={key}"));
            let curve = d["curve"].as_array().unwrap();
            assert_eq!(curve.len(), 50);
            assert_eq!(curve[49][0].as_f64(), Some(1.0));
        }
        for key in ["precision", "auc_roc", "auc_pr"] {
            close(&got[key], &want[key], key);
        }
    }
}

#[test]
fn eval_stride_subsamples_the_curve() {
    let out = ok(&[
        "eval",
        "--input",
        s(&fixture("scores.jsonl")),
        "--labels",
        s(&fixture("labels.csv")),
        "--delta",
        "2",
        "--stride",
        "7",
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let curve = report["reports"][0]["online"][0]["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 8);
}

#[test]
fn exit_codes_separate_failure_kinds() {
    let ws = Workspace::new();
    let bad_cfg = ws.config("memory.capacity = 3\n");
    assert_eq!(code(&["--config", s(&bad_cfg), "config"]), 3);
    assert_eq!(code(&["eval", "--input", "x", "--labels", "y", "--delta", "0.5"]), 3);

    assert_eq!(code(&["online"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);

    let missing = ws.path("missing/manifest.tsv");
    assert_eq!(code(&["online", "--input", s(&missing)]), 4);

    let negatives = ws.path("negatives.csv");
    let labels: String = std::iter::once("index,annotator_count\n".to_string())
        .chain((0..50).map(|i| format!("{i},0\n")))
        .collect();
    fs::write(&negatives, labels).unwrap();
    assert_eq!(code(&["eval", "--input", s(&fixture("scores.jsonl")), "--labels", s(&negatives)]), 5);

    let short = ws.path("short.csv");
    fs::write(&short, "index,annotator_count\n0,1\n").unwrap();
    assert_eq!(code(&["eval", "--input", s(&fixture("scores.jsonl")), "--labels", s(&short)]), 4);
}

#[test]
fn paths_fall_back_to_config() {
    let ws = Workspace::new();
    let cfg = ws.config(&format!(
        "paths.input = \"{}\"\npaths.labels = \"{}\"\n",
        fixture("scores.jsonl").display(),
        fixture("labels.csv").display()
    ));
    let out = ok(&["--config", s(&cfg), "eval"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reports"][0]["online"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_reports_table_and_scaling() {
    let out = ok(&["bench", "--n", "4", "--c", "4", "--sizes", "4,8", "--frames", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("frame_ms"));
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("scaling n=4 c=4: 4x4 -> 8x8"));
    assert_eq!(code(&["bench", "--frames", "0", "--n", "2", "--c", "2", "--sizes", "4"]), 1);
}

#[test]
fn ablate_emits_requested_series() {
    let out = ok(&["ablate", "--suite", "loss-of-interest"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let series = doc["loss_of_interest"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0]["scores"].as_array().unwrap().len(), 6);
    assert!(doc.get("writing").is_none());

    let out = ok(&["ablate", "--suite", "usage", "--seed", "4"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["usage"].as_array().unwrap().len(), 2);
}
