//! Short-term and online learning on top of the memory, interestingness
//! scores, and per-frame density maps.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{reading_accuracy, MemoryBank, ReadResult};
use crate::numerics::{dot_f64, norm_f64, FeatureCube};
use crate::scalar::Scalar;

/// Per-frame pipeline output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub index: u64,
    /// `(1 - confidence) / 2`.
    pub interestingness: f64,
    pub confidence: f64,
    pub top_cube: usize,
    pub shift_x: usize,
    pub shift_y: usize,
    /// Wall time of the read-then-write step.
    pub ms: f64,
}

#[inline]
pub fn interestingness_from_confidence(confidence: f64) -> f64 {
    (1.0 - confidence) / 2.0
}

/// Read, score, then write `x`. Later frames never influence this score.
pub fn online_step<T: Scalar>(
    bank: &mut MemoryBank<T>,
    x: &FeatureCube<T>,
    index: u64,
) -> Result<(ScoreRecord, ReadResult<T>)> {
    let start = Instant::now();
    let read = bank.read(x)?;
    bank.write(x)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let top = read.top_cube();
    let record = ScoreRecord {
        index,
        interestingness: interestingness_from_confidence(read.confidence),
        confidence: read.confidence,
        top_cube: top,
        shift_x: read.shifts[top].x,
        shift_y: read.shifts[top].y,
        ms,
    };
    Ok((record, read))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTermParams {
    pub max_epochs: usize,
    pub acc_threshold: f64,
    pub patience: usize,
}

impl Default for ShortTermParams {
    fn default() -> Self {
        Self {
            max_epochs: 10,
            acc_threshold: 0.98,
            patience: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Threshold,
    Plateau,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTermReport {
    pub epochs: usize,
    pub epoch_accuracy: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Write-then-read passes over `corpus` until mean reading accuracy reaches
/// the threshold, stops improving for `patience` epochs, or `max_epochs` runs.
pub fn short_term_learn<T: Scalar>(
    bank: &mut MemoryBank<T>,
    corpus: &[FeatureCube<T>],
    params: &ShortTermParams,
) -> Result<ShortTermReport> {
    if corpus.is_empty() {
        return Err(Error::DegenerateInput("empty short-term corpus"));
    }
    if params.max_epochs == 0 || params.patience == 0 {
        return Err(Error::InvalidParameter(
            "max_epochs and patience must be >= 1".into(),
        ));
    }
    let mut epoch_accuracy = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;
    for _ in 0..params.max_epochs {
        let mut total = 0.0;
        for x in corpus {
            bank.write(x)?;
            let read = bank.read(x)?;
            total += reading_accuracy(&read.recalled, x)?;
        }
        let mean = total / corpus.len() as f64;
        epoch_accuracy.push(mean);
        if mean >= params.acc_threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
        if mean > best {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                stop_reason = StopReason::Plateau;
                break;
            }
        }
    }
    Ok(ShortTermReport {
        epochs: epoch_accuracy.len(),
        epoch_accuracy,
        stop_reason,
    })
}

/// Per-pixel recall discrepancy, min-max normalized into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    pub index: u64,
    pub height: usize,
    pub width: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl DensityMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// 8-bit binary portable graymap (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.values
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io_at(path, e))
    }
}

/// Cosine distance between the channel vectors of `x` and the recalled tensor
/// at each feature cell, bilinearly upsampled to `(height, width)` and
/// min-max normalized. Cells where either vector is zero map to 0.
pub fn density_map<T: Scalar>(
    x: &FeatureCube<T>,
    read: &ReadResult<T>,
    out_size: (usize, usize),
    index: u64,
) -> Result<DensityMap> {
    let recalled = &read.recalled;
    x.ensure_same_shape(recalled)?;
    let (out_h, out_w) = out_size;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidDimensions("density map size must be >= 1".into()));
    }
    let cells = cell_distances(x, recalled);
    let (_, h, w) = x.shape();
    let mut values = bilinear_upsample(&cells, h, w, out_h, out_w);
    normalize_min_max(&mut values);
    Ok(DensityMap {
        index,
        height: out_h,
        width: out_w,
        values,
    })
}

const DISTANCE_FLOOR: f64 = 1e-12;

fn cell_distances<T: Scalar>(x: &FeatureCube<T>, recalled: &FeatureCube<T>) -> Vec<f64> {
    let (c, h, w) = x.shape();
    let mut a = vec![T::zero(); c];
    let mut b = vec![T::zero(); c];
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                a[k] = x.get(k, i, j);
                b[k] = recalled.get(k, i, j);
            }
            let na = norm_f64(&a);
            let nb = norm_f64(&b);
            let d = if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                1.0 - (dot_f64(&a, &b) / (na * nb)).clamp(-1.0, 1.0)
            };
            // rounding residue of identical cells
            out.push(if d < DISTANCE_FLOOR { 0.0 } else { d });
        }
    }
    out
}

/// Half-pixel-centred bilinear resampling with edge clamping.
fn bilinear_upsample(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let axis = |dst: usize, n_src: usize, n_dst: usize| {
        let pos = ((dst as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5)
            .clamp(0.0, (n_src - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n_src - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (r0, r1, fr) = axis(r, h, out_h);
        for col in 0..out_w {
            let (c0, c1, fc) = axis(col, w, out_w);
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

fn normalize_min_max(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > DISTANCE_FLOOR {
        values.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// One JSON object per line.
pub fn write_scores<W: Write>(mut out: W, records: &[ScoreRecord]) -> Result<()> {
    for r in records {
        write_score(&mut out, r)?;
    }
    Ok(())
}

pub fn write_score<W: Write>(out: &mut W, record: &ScoreRecord) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if let Some(prev) = out.last().map(|r: &ScoreRecord| r.index) {
            if rec.index <= prev {
                return Err(Error::Parse(format!(
                    "{}:{}: frame index {} not increasing",
                    path.display(),
                    n + 1,
                    rec.index
                )));
            }
        }
        out.push(rec);
    }
    Ok(out)
}
