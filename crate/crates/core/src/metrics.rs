//! Online precision and its area under the curve (AUC-OP), plus precision at
//! half recall, AUC-ROC, and AUC-PR.
//!
//! Online precision at window length `n` only looks at ground-truth positive
//! frames. A positive frame `t` counts as a true positive when its score ranks
//! within the top `⌈δ·K⌉` of the `min(n, t)` frames ending at `t`, where `K` is
//! the number of positives in that window; otherwise it is a false positive.
//! Nothing after `t` is ever consulted.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a frame's rank is computed when other frames in its window share its score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// `rank = 1 + #{strictly greater}`.
    #[default]
    Optimistic,
    /// `rank = 1 + #{greater or equal, excluding the frame itself}`.
    Pessimistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlinePrecisionOptions {
    pub tie: TiePolicy,
    /// Evaluate `n = 1, 1 + stride, 1 + 2·stride, ...` only.
    pub stride: usize,
}

impl Default for OnlinePrecisionOptions {
    fn default() -> Self {
        Self {
            tie: TiePolicy::Optimistic,
            stride: 1,
        }
    }
}

/// Annotator votes and predicted scores for one ordered sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    pub annotator_counts: Vec<u32>,
    pub scores: Vec<f64>,
}

impl LabeledSequence {
    pub fn new(annotator_counts: Vec<u32>, scores: Vec<f64>) -> Result<Self> {
        if annotator_counts.len() != scores.len() {
            return Err(Error::InvalidDimensions(format!(
                "{} labels vs {} scores",
                annotator_counts.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(Self {
            annotator_counts,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Frames with at least `threshold` votes are positives.
    pub fn labels(&self, threshold: u32) -> Vec<bool> {
        self.annotator_counts.iter().map(|&c| c >= threshold).collect()
    }
}

fn check_inputs(labels: &[bool], scores: &[f64]) -> Result<usize> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidDimensions(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("no positive frames"));
    }
    Ok(positives)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 1.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be >= 1, got {delta}")));
    }
    Ok(())
}

/// `⌈δ·K⌉`, tolerant of representation error in `δ·K`.
#[inline]
pub fn rank_budget(delta: f64, positives_in_window: usize) -> usize {
    (delta * positives_in_window as f64 - 1e-9).ceil() as usize
}

/// Per-frame verdicts at window length `n`: `Some(true)` for a true positive,
/// `Some(false)` for a false positive, `None` for frames labelled negative.
pub fn online_verdicts(
    labels: &[bool],
    scores: &[f64],
    n: usize,
    delta: f64,
    tie: TiePolicy,
) -> Result<Vec<Option<bool>>> {
    check_inputs(labels, scores)?;
    check_delta(delta)?;
    if n == 0 || n > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "window length {n} outside 1..={}",
            labels.len()
        )));
    }
    Ok((0..labels.len())
        .map(|t| {
            if !labels[t] {
                return None;
            }
            let start = (t + 1).saturating_sub(n);
            let mut ahead = 0usize;
            let mut k = 0usize;
            for j in start..=t {
                if labels[j] {
                    k += 1;
                }
                if j != t && outranks(scores[j], scores[t], tie) {
                    ahead += 1;
                }
            }
            Some(ahead < rank_budget(delta, k))
        })
        .collect())
}

/// Online precision `s(n)` for a single window length.
pub fn online_precision(
    labels: &[bool],
    scores: &[f64],
    n: usize,
    delta: f64,
    tie: TiePolicy,
) -> Result<f64> {
    let verdicts = online_verdicts(labels, scores, n, delta, tie)?;
    let tp = verdicts.iter().filter(|v| **v == Some(true)).count();
    let positives = verdicts.iter().filter(|v| v.is_some()).count();
    Ok(tp as f64 / positives as f64)
}

#[inline]
fn outranks(other: f64, own: f64, tie: TiePolicy) -> bool {
    match tie {
        TiePolicy::Optimistic => other > own,
        TiePolicy::Pessimistic => other >= own,
    }
}

/// `s(n)` for every `n` in `1..=N` (subsampled by `opts.stride`), as `(n, s)`.
///
/// Each positive frame is visited once, growing its window backward, so the
/// whole curve costs `O(N · P)`.
pub fn online_precision_curve(
    labels: &[bool],
    scores: &[f64],
    delta: f64,
    opts: &OnlinePrecisionOptions,
) -> Result<Vec<(usize, f64)>> {
    let positives = check_inputs(labels, scores)?;
    check_delta(delta)?;
    if opts.stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let total = labels.len();
    // diff[n] accumulates true positives for window length n (1-based)
    let mut diff = vec![0i64; total + 2];
    for t in (0..total).filter(|&t| labels[t]) {
        let mut ahead = 0usize;
        let mut k = 0usize;
        let mut last_hit = false;
        for len in 1..=t + 1 {
            let j = t + 1 - len;
            if labels[j] {
                k += 1;
            }
            if j != t && outranks(scores[j], scores[t], opts.tie) {
                ahead += 1;
            }
            last_hit = ahead < rank_budget(delta, k);
            if last_hit {
                diff[len] += 1;
                diff[len + 1] -= 1;
            }
        }
        // windows longer than the prefix see the same frames
        if last_hit && t + 2 <= total {
            diff[t + 2] += 1;
            diff[total + 1] -= 1;
        }
    }
    let mut curve = Vec::with_capacity(total / opts.stride + 1);
    let mut running = 0i64;
    for (n, d) in diff.iter().enumerate().take(total + 1).skip(1) {
        running += d;
        if (n - 1) % opts.stride == 0 {
            curve.push((n, running as f64 / positives as f64));
        }
    }
    Ok(curve)
}

/// Area under the online-precision curve: the mean of `s(n)` over the
/// evaluated window lengths, i.e. the uniform-grid integral over `n/N`.
pub fn auc_op(
    labels: &[bool],
    scores: &[f64],
    delta: f64,
    opts: &OnlinePrecisionOptions,
) -> Result<f64> {
    let curve = online_precision_curve(labels, scores, delta, opts)?;
    Ok(curve.iter().map(|(_, s)| s).sum::<f64>() / curve.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalMetrics {
    /// Precision at the first threshold reaching 50% recall.
    pub precision: f64,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

/// Precision at 50% recall, AUC-ROC (rank statistic with averaged tie ranks),
/// and AUC-PR (step integration of interpolated precision).
pub fn traditional_metrics(labels: &[bool], scores: &[f64]) -> Result<TraditionalMetrics> {
    let positives = check_inputs(labels, scores)?;
    let negatives = labels.len() - positives;
    if negatives == 0 {
        return Err(Error::UndefinedMetric("no negative frames"));
    }
    Ok(TraditionalMetrics {
        precision: precision_at_recall(labels, scores, 0.5)?,
        auc_roc: auc_roc(labels, scores)?,
        auc_pr: auc_pr(labels, scores)?,
    })
}

pub fn auc_roc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let positives = check_inputs(labels, scores)?;
    let negatives = labels.len() - positives;
    if negatives == 0 {
        return Err(Error::UndefinedMetric("no negative frames"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// `(recall, precision)` after each distinct score threshold, descending.
fn pr_points(labels: &[bool], scores: &[f64], positives: usize) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if labels[k] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
        i = j + 1;
    }
    points
}

pub fn precision_at_recall(labels: &[bool], scores: &[f64], recall: f64) -> Result<f64> {
    let positives = check_inputs(labels, scores)?;
    let points = pr_points(labels, scores, positives);
    Ok(points
        .iter()
        .find(|(r, _)| *r >= recall - 1e-12)
        .map(|&(_, p)| p)
        .unwrap_or(positives as f64 / labels.len() as f64))
}

pub fn auc_pr(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let positives = check_inputs(labels, scores)?;
    let points = pr_points(labels, scores, positives);
    let mut interp = vec![0.0; points.len()];
    let mut best = 0.0f64;
    for (k, &(_, p)) in points.iter().enumerate().rev() {
        best = best.max(p);
        interp[k] = best;
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (&(r, _), &p) in points.iter().zip(&interp) {
        area += (r - prev_recall) * p;
        prev_recall = r;
    }
    Ok(area)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub auc_op: f64,
    /// `(n / N, s(n))` pairs.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub category_threshold: u32,
    pub frames: usize,
    pub positives: usize,
    pub online: Vec<DeltaResult>,
    pub precision: Option<f64>,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
}

/// Full evaluation for one annotation category. The traditional metrics are
/// left empty when the sequence has no negatives.
pub fn evaluate(
    seq: &LabeledSequence,
    category_threshold: u32,
    deltas: &[f64],
    opts: &OnlinePrecisionOptions,
) -> Result<MetricReport> {
    let labels = seq.labels(category_threshold);
    let positives = check_inputs(&labels, &seq.scores)?;
    let total = labels.len() as f64;
    let mut online = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let curve = online_precision_curve(&labels, &seq.scores, delta, opts)?;
        let auc = curve.iter().map(|(_, s)| s).sum::<f64>() / curve.len() as f64;
        online.push(DeltaResult {
            delta,
            auc_op: auc,
            curve: curve.into_iter().map(|(n, s)| (n as f64 / total, s)).collect(),
        });
    }
    let traditional = traditional_metrics(&labels, &seq.scores).ok();
    Ok(MetricReport {
        category_threshold,
        frames: labels.len(),
        positives,
        online,
        precision: traditional.map(|m| m.precision),
        auc_roc: traditional.map(|m| m.auc_roc),
        auc_pr: traditional.map(|m| m.auc_pr),
    })
}

/// Labels file: one header line, then `index, annotator_count` rows separated
/// by commas, tabs, or spaces.
pub fn read_labels(path: &Path) -> Result<Vec<(u64, u32)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    parse_labels(std::io::BufReader::new(f))
}

pub fn parse_labels<R: BufRead>(reader: R) -> Result<Vec<(u64, u32)>> {
    let mut rows = Vec::new();
    for (line_no, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line
            .split([',', '\t', ' '])
            .filter(|f| !f.is_empty());
        let bad = |what: &str| Error::Parse(format!("labels line {}: {what}", line_no + 1));
        let index = fields
            .next()
            .ok_or_else(|| bad("missing index"))?
            .parse::<u64>()
            .map_err(|_| bad("bad index"))?;
        let count = fields
            .next()
            .ok_or_else(|| bad("missing annotator count"))?
            .parse::<u32>()
            .map_err(|_| bad("bad annotator count"))?;
        rows.push((index, count));
    }
    Ok(rows)
}
