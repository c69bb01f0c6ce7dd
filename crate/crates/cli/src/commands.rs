use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use vismem::ablation::{
    capacity_suite, loss_of_interest, short_term_sensitivity, translation_recall, usage_suite,
    writing_protocol_suite, TwoPatternProtocol,
};
use vismem::bench::{bench_grid, read_scaling, BenchRow};
use vismem::encoder::{write_indexed_features, Encoder, EncoderKind, FeatureStream, Frame};
use vismem::metrics::{evaluate, read_labels, LabeledSequence, OnlinePrecisionOptions};
use vismem::pipeline::{density_map, online_step, read_scores, short_term_learn, write_score};
use vismem::synthetic::SyntheticSpec;
use vismem::{FeatureCube, MemoryBank};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::Suite;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "ppm", "pgm", "pnm"];

fn io_err(path: &Path, e: io::Error) -> CliError {
    vismem::Error::io_at(path, e).into()
}

/// Writes to `path`, or stdout when `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| vismem::Error::Parse(e.to_string()))?;
    writeln!(out).map_err(vismem::Error::from)?;
    out.flush().map_err(vismem::Error::from)?;
    Ok(())
}

/// Images under `input` in lexicographic order, or the paths listed in it.
fn list_images(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_dir() {
        let mut paths = Vec::new();
        for entry in fs::read_dir(input).map_err(|e| io_err(input, e))? {
            let path = entry.map_err(|e| io_err(input, e))?.path();
            let is_image = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if path.is_file() && is_image {
                paths.push(path);
            }
        }
        paths.sort();
        Ok(paths)
    } else {
        let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
        let base = input.parent().unwrap_or(Path::new(""));
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| base.join(l))
            .collect())
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("VISMEM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("VISMEM_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn encode(cfg: &RunConfig, input: &Path, output: &Path, skip_bad: bool) -> Result<(), CliError> {
    if cfg.encoder.kind == EncoderKind::ExternalFeatures {
        return Err(CliError::Config(
            "encoder.kind is external-features; nothing to encode".into(),
        ));
    }
    let encoder = Encoder::new(cfg.encoder.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let images = list_images(input)?;
    let pool = thread_pool()?;
    let results: Vec<vismem::Result<FeatureCube<f32>>> = pool.install(|| {
        images
            .par_iter()
            .enumerate()
            .map(|(i, path)| encoder.encode(&Frame::open(path, i as u64)?))
            .collect()
    });
    let mut cubes = Vec::with_capacity(results.len());
    for (i, (path, result)) in images.iter().zip(results).enumerate() {
        match result {
            Ok(cube) => cubes.push((i as u64, cube)),
            Err(e) if skip_bad => eprintln!("vismem: skipping {}: {e}", path.display()),
            Err(e) => return Err(e.into()),
        }
    }
    let refs: Vec<(u64, &FeatureCube<f32>)> = cubes.iter().map(|(i, c)| (*i, c)).collect();
    let manifest = write_indexed_features(&refs, output)?;
    eprintln!("vismem: encoded {} of {} images -> {}", cubes.len(), images.len(), manifest.display());
    Ok(())
}

fn open_bank(cfg: &RunConfig, memory_in: Option<&Path>, dims: (usize, usize, usize)) -> Result<MemoryBank<f32>, CliError> {
    let m = &cfg.memory;
    let mut bank = match memory_in {
        Some(path) => MemoryBank::<f32>::load(path)?,
        None => MemoryBank::<f32>::init(m.n, dims.0, dims.1, dims.2, m.gamma_w, m.gamma_r, m.seed)?,
    };
    if bank.cube_shape() != dims {
        return Err(vismem::Error::ShapeMismatch {
            expected: bank.cube_shape(),
            got: dims,
        }
        .into());
    }
    bank.set_gamma_w(m.gamma_w)?;
    bank.set_gamma_r(m.gamma_r)?;
    Ok(bank)
}

pub fn short_term(
    cfg: &RunConfig,
    input: &Path,
    memory_in: Option<&Path>,
    memory_out: &Path,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let corpus = vismem::encoder::load_features(input)?;
    let dims = corpus
        .first()
        .map(FeatureCube::shape)
        .ok_or(vismem::Error::DegenerateInput("empty short-term corpus"))?;
    let mut bank = open_bank(cfg, memory_in, dims)?;
    let report = short_term_learn(&mut bank, &corpus, &(&cfg.short_term).into())?;
    bank.save(memory_out)?;
    emit_json(&report, output)
}

pub struct OnlinePaths {
    pub input: PathBuf,
    pub memory_in: Option<PathBuf>,
    pub memory_out: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub density_out: Option<PathBuf>,
}

pub fn online(cfg: &RunConfig, paths: &OnlinePaths, no_timing: bool) -> Result<(), CliError> {
    let stream = FeatureStream::open(&paths.input)?.peekable();
    let mut out = sink(paths.output.as_deref())?;
    if let Some(dir) = &paths.density_out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut bank: Option<MemoryBank<f32>> = match &paths.memory_in {
        Some(p) => Some(open_bank_from(cfg, p)?),
        None => None,
    };
    let density_size = (cfg.encoder.resize.1 as usize, cfg.encoder.resize.0 as usize);
    for item in stream {
        let (entry, x) = item?;
        let bank = match &mut bank {
            Some(b) => b,
            slot => slot.insert(open_bank(cfg, None, x.shape())?),
        };
        let (mut record, read) = online_step(bank, &x, entry.index)?;
        if no_timing {
            record.ms = 0.0;
        }
        write_score(&mut out, &record)?;
        if let Some(dir) = &paths.density_out {
            let map = density_map(&x, &read, density_size, entry.index)?;
            map.write_pgm(&dir.join(format!("frame_{:06}.pgm", entry.index)))?;
        }
    }
    out.flush().map_err(vismem::Error::from)?;
    if let (Some(path), Some(bank)) = (&paths.memory_out, &bank) {
        bank.save(path)?;
    }
    Ok(())
}

fn open_bank_from(cfg: &RunConfig, path: &Path) -> Result<MemoryBank<f32>, CliError> {
    let bank = MemoryBank::<f32>::load(path)?;
    let dims = bank.cube_shape();
    drop(bank);
    open_bank(cfg, Some(path), dims)
}

#[derive(Serialize)]
struct EvalDocument {
    scores: PathBuf,
    labels: PathBuf,
    frames: usize,
    deltas: Vec<f64>,
    stride: usize,
    tie: vismem::metrics::TiePolicy,
    reports: Vec<vismem::metrics::MetricReport>,
}

pub fn eval(cfg: &RunConfig, scores_path: &Path, labels_path: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let records = read_scores(scores_path)?;
    let labels: HashMap<u64, u32> = read_labels(labels_path)?.into_iter().collect();
    let mut counts = Vec::with_capacity(records.len());
    for r in &records {
        let count = labels.get(&r.index).ok_or_else(|| {
            vismem::Error::Parse(format!("no label for frame {} in {}", r.index, labels_path.display()))
        })?;
        counts.push(*count);
    }
    let scores = records.iter().map(|r| r.interestingness).collect();
    let seq = LabeledSequence::new(counts, scores).map_err(|e| CliError::Metric(e.to_string()))?;
    let opts = OnlinePrecisionOptions {
        tie: cfg.eval.tie,
        stride: cfg.eval.stride,
    };
    let reports = cfg
        .eval
        .category_thresholds
        .iter()
        .map(|&k| evaluate(&seq, k, &cfg.eval.deltas, &opts))
        .collect::<vismem::Result<Vec<_>>>()
        .map_err(|e| CliError::Metric(e.to_string()))?;
    emit_json(
        &EvalDocument {
            scores: scores_path.to_path_buf(),
            labels: labels_path.to_path_buf(),
            frames: seq.len(),
            deltas: cfg.eval.deltas.clone(),
            stride: cfg.eval.stride,
            tie: cfg.eval.tie,
            reports,
        },
        output,
    )
}

#[derive(Serialize, Default)]
struct AblationDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    writing: Option<Vec<vismem::ablation::RecallSeries>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<Vec<vismem::ablation::RecallSeries>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    usage: Option<Vec<vismem::ablation::RecallSeries>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_of_interest: Option<Vec<vismem::ablation::InterestSeries>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    translation: Option<vismem::ablation::TranslationRecall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    short_term: Option<vismem::ablation::EpochSensitivity>,
}

pub fn ablate(cfg: &RunConfig, suite: Suite, seed: Option<u64>, output: Option<&Path>) -> Result<(), CliError> {
    let defaults = TwoPatternProtocol::default();
    let base = TwoPatternProtocol {
        gamma_w: cfg.memory.gamma_w,
        gamma_r: cfg.memory.gamma_r,
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let want = |s: Suite| suite == s || suite == Suite::All;
    let mut doc = AblationDocument::default();
    if want(Suite::Writing) {
        doc.writing = Some(writing_protocol_suite(&base)?);
    }
    if want(Suite::Capacity) {
        doc.capacity = Some(capacity_suite(&base, 2, 100)?);
    }
    if want(Suite::Usage) {
        doc.usage = Some(usage_suite(&base, 2)?);
    }
    if want(Suite::LossOfInterest) {
        doc.loss_of_interest = Some(vec![
            loss_of_interest(1.0, base.dims, 10, 5, base.seed)?,
            loss_of_interest(0.2, base.dims, 10, 5, base.seed)?,
        ]);
    }
    if want(Suite::Translation) {
        doc.translation = Some(translation_recall(base.dims, 100, 10, base.seed)?);
    }
    if want(Suite::ShortTerm) {
        let spec = SyntheticSpec {
            seed: seed.unwrap_or(SyntheticSpec::default().seed),
            ..SyntheticSpec::default()
        };
        doc.short_term = Some(short_term_sensitivity(
            &spec,
            cfg.memory.n,
            &[1, 2, 3, 4, 5],
            &cfg.eval.deltas,
            &cfg.eval.category_thresholds,
        )?);
    }
    emit_json(&doc, output)
}

pub struct BenchGrid {
    pub ns: Vec<usize>,
    pub cs: Vec<usize>,
    pub sizes: Vec<usize>,
    pub frames: usize,
    pub seed: u64,
}

/// Read-cost growth for every pair of rows whose `h = w` doubles.
fn doublings(rows: &[BenchRow]) -> Vec<(BenchRow, BenchRow, f64)> {
    let mut out = Vec::new();
    for a in rows {
        for b in rows {
            if (a.n, a.c) == (b.n, b.c) && b.h == 2 * a.h && b.w == 2 * a.w {
                out.push((*a, *b, read_scaling(a, b)));
            }
        }
    }
    out
}

pub fn bench(grid: &BenchGrid, assert_scaling: bool, output: Option<&Path>) -> Result<(), CliError> {
    let rows = bench_grid(&grid.ns, &grid.cs, &grid.sizes, grid.frames, grid.seed)?;
    let mut out = sink(output)?;
    let w = |out: &mut Box<dyn Write>, s: String| writeln!(out, "{s}").map_err(vismem::Error::from);
    w(&mut out, format!("{:>5} {:>5} {:>5} {:>5} {:>10} {:>10}", "n", "c", "h", "w", "read_ms", "frame_ms"))?;
    for r in &rows {
        w(
            &mut out,
            format!("{:>5} {:>5} {:>5} {:>5} {:>10.3} {:>10.3}", r.n, r.c, r.h, r.w, r.read_ms, r.frame_ms),
        )?;
    }
    let mut worst: f64 = 0.0;
    for (a, b, ratio) in doublings(&rows) {
        worst = worst.max(ratio);
        w(
            &mut out,
            format!("scaling n={} c={}: {}x{} -> {}x{} read cost x{ratio:.2}", a.n, a.c, a.h, a.w, b.h, b.w),
        )?;
    }
    out.flush().map_err(vismem::Error::from)?;
    if assert_scaling && worst > 4.6 {
        return Err(CliError::Check(format!("read cost grew x{worst:.2} for a doubling of h = w (limit 4.6)")));
    }
    Ok(())
}
