//! Controlled experiments on the memory: writing sparsity, capacity, usage
//! balancing, loss of interest, translation recall, and short-term epochs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::memory::{reading_accuracy, MemoryBank, WritePolicy};
use crate::numerics::{circular_shift, FeatureCube, ShiftIndex};
use crate::pipeline::{online_step, short_term_learn, ShortTermParams};
use crate::metrics::auc_op;
use crate::synthetic::{SyntheticSpec, SyntheticSuite};

/// Write `f1` then `f2` then `f1` again, `reps` times each, reading both
/// patterns back after every write.
#[derive(Clone, Debug)]
pub struct TwoPatternProtocol {
    pub capacity: usize,
    pub dims: (usize, usize, usize),
    pub gamma_w: f64,
    pub gamma_r: f64,
    pub reps: usize,
    pub seed: u64,
    pub policy: WritePolicy,
}

impl Default for TwoPatternProtocol {
    fn default() -> Self {
        Self {
            capacity: 100,
            dims: (8, 8, 8),
            gamma_w: 5.0,
            gamma_r: 5.0,
            reps: 5,
            seed: 7,
            policy: WritePolicy::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RecallSeries {
    pub label: String,
    /// Which pattern was written at each step (1 or 2).
    pub written: Vec<u8>,
    pub f1_accuracy: Vec<f64>,
    pub f2_accuracy: Vec<f64>,
}

impl RecallSeries {
    /// Steps (0-based) of the middle phase, where `f2` is being written.
    pub fn f2_phase(&self) -> std::ops::Range<usize> {
        let start = self.written.iter().position(|&p| p == 2).unwrap_or(0);
        let len = self.written.iter().filter(|&&p| p == 2).count();
        start..start + len
    }
}

/// The two random test patterns for a given seed, `U(0, 1)` entries.
pub fn test_patterns(dims: (usize, usize, usize), seed: u64) -> Result<(FeatureCube<f32>, FeatureCube<f32>)> {
    let (c, h, w) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let f1 = FeatureCube::random_uniform(c, h, w, 0.5, &mut rng)?;
    let f2 = FeatureCube::random_uniform(c, h, w, 0.5, &mut rng)?;
    let shift = |f: FeatureCube<f32>| {
        let data = f.as_slice().iter().map(|v| v + 0.5).collect();
        FeatureCube::new(c, h, w, data)
    };
    Ok((shift(f1)?, shift(f2)?))
}

pub fn two_pattern_recall(p: &TwoPatternProtocol, label: &str) -> Result<RecallSeries> {
    let (c, h, w) = p.dims;
    let mut bank = MemoryBank::<f32>::init(p.capacity, c, h, w, p.gamma_w, p.gamma_r, p.seed)?;
    let (f1, f2) = test_patterns(p.dims, p.seed)?;
    let schedule: Vec<u8> = std::iter::repeat_n(1u8, p.reps)
        .chain(std::iter::repeat_n(2u8, p.reps))
        .chain(std::iter::repeat_n(1u8, p.reps))
        .collect();
    let mut f1_accuracy = Vec::with_capacity(schedule.len());
    let mut f2_accuracy = Vec::with_capacity(schedule.len());
    for &which in &schedule {
        let x = if which == 1 { &f1 } else { &f2 };
        bank.write_with(x, p.policy)?;
        f1_accuracy.push(reading_accuracy(&bank.read(&f1)?.recalled, &f1)?);
        f2_accuracy.push(reading_accuracy(&bank.read(&f2)?.recalled, &f2)?);
    }
    Ok(RecallSeries {
        label: label.to_string(),
        written: schedule,
        f1_accuracy,
        f2_accuracy,
    })
}

/// Sparse (tangent) writing against plain softmax writing at the same rate.
pub fn writing_protocol_suite(base: &TwoPatternProtocol) -> Result<Vec<RecallSeries>> {
    let sparse = TwoPatternProtocol {
        policy: WritePolicy::default(),
        ..base.clone()
    };
    let plain = TwoPatternProtocol {
        policy: WritePolicy::NonSparse {
            gamma: base.gamma_w,
        },
        ..base.clone()
    };
    Ok(vec![
        two_pattern_recall(&sparse, "sparse")?,
        two_pattern_recall(&plain, "non-sparse")?,
    ])
}

/// Small against large capacity, usage balancing disabled in both.
pub fn capacity_suite(base: &TwoPatternProtocol, small: usize, large: usize) -> Result<Vec<RecallSeries>> {
    let policy = WritePolicy::Sparse {
        usage_balancing: false,
    };
    let mk = |n| TwoPatternProtocol {
        capacity: n,
        policy,
        ..base.clone()
    };
    Ok(vec![
        two_pattern_recall(&mk(small), &format!("n={small}"))?,
        two_pattern_recall(&mk(large), &format!("n={large}"))?,
    ])
}

/// Same capacity with and without usage balancing.
pub fn usage_suite(base: &TwoPatternProtocol, capacity: usize) -> Result<Vec<RecallSeries>> {
    let mk = |usage_balancing| TwoPatternProtocol {
        capacity,
        policy: WritePolicy::Sparse { usage_balancing },
        ..base.clone()
    };
    Ok(vec![
        two_pattern_recall(&mk(true), &format!("n={capacity} with usage"))?,
        two_pattern_recall(&mk(false), &format!("n={capacity} without usage"))?,
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct InterestSeries {
    pub gamma_w: f64,
    pub scores: Vec<f64>,
}

/// Online scores on `A` followed by `B` repeated `repeats` times.
pub fn loss_of_interest(
    gamma_w: f64,
    dims: (usize, usize, usize),
    capacity: usize,
    repeats: usize,
    seed: u64,
) -> Result<InterestSeries> {
    let (c, h, w) = dims;
    let mut bank = MemoryBank::<f32>::init(capacity, c, h, w, gamma_w, 5.0, seed)?;
    let (a, b) = test_patterns(dims, seed.wrapping_add(1))?;
    let mut scores = Vec::with_capacity(repeats + 1);
    scores.push(online_step(&mut bank, &a, 0)?.0.interestingness);
    for t in 0..repeats {
        scores.push(online_step(&mut bank, &b, t as u64 + 1)?.0.interestingness);
    }
    Ok(InterestSeries { gamma_w, scores })
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationRecall {
    pub shifts_tested: usize,
    pub min_confidence: f64,
    pub exact_shift_recoveries: usize,
}

/// Saturate the memory with `x`, then query every circular translation of it.
pub fn translation_recall(
    dims: (usize, usize, usize),
    capacity: usize,
    writes: usize,
    seed: u64,
) -> Result<TranslationRecall> {
    let (c, h, w) = dims;
    let mut bank = MemoryBank::<f32>::init(capacity, c, h, w, 5.0, 5.0, seed)?;
    let (x, _) = test_patterns(dims, seed)?;
    for _ in 0..writes {
        bank.write(&x)?;
    }
    let home = bank.read(&x)?.top_cube();
    let home_shift = bank.read(&x)?.shifts[home];
    let mut min_confidence = f64::INFINITY;
    let mut exact = 0;
    for sx in 0..h {
        for sy in 0..w {
            let s = ShiftIndex { x: sx, y: sy };
            let r = bank.read(&circular_shift(&x, s))?;
            min_confidence = min_confidence.min(r.confidence);
            if r.top_cube() == home && r.shifts[home] == home_shift.compose(s, h, w) {
                exact += 1;
            }
        }
    }
    Ok(TranslationRecall {
        shifts_tested: h * w,
        min_confidence,
        exact_shift_recoveries: exact,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochSensitivity {
    pub epochs: Vec<usize>,
    pub category_thresholds: Vec<u32>,
    pub deltas: Vec<f64>,
    /// `auc_op[e][k][d]`: AUC-OP after `epochs[e]` short-term epochs, with
    /// positives at `category_thresholds[k]`, at `deltas[d]`.
    pub auc_op: Vec<Vec<Vec<f64>>>,
}

impl EpochSensitivity {
    /// Largest absolute AUC-OP difference between two epoch settings over
    /// every threshold and delta.
    pub fn max_gap(&self, a: usize, b: usize) -> f64 {
        self.auc_op[a]
            .iter()
            .flatten()
            .zip(self.auc_op[b].iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Element-wise mean over several runs with the same axes.
    pub fn mean(runs: &[EpochSensitivity]) -> Result<EpochSensitivity> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidParameter("no runs to average".into()))?;
        let mut out = first.clone();
        for (e, row) in out.auc_op.iter_mut().enumerate() {
            for (k, cells) in row.iter_mut().enumerate() {
                for (d, cell) in cells.iter_mut().enumerate() {
                    *cell = runs.iter().map(|r| r.auc_op[e][k][d]).sum::<f64>() / runs.len() as f64;
                }
            }
        }
        Ok(out)
    }
}

/// Final online AUC-OP on a synthetic suite as a function of the number of
/// short-term epochs (early stopping disabled).
pub fn short_term_sensitivity(
    spec: &SyntheticSpec,
    capacity: usize,
    epochs: &[usize],
    deltas: &[f64],
    category_thresholds: &[u32],
) -> Result<EpochSensitivity> {
    let suite = SyntheticSuite::generate(spec)?;
    let (c, h, w) = spec.dims;
    let mut rows = Vec::with_capacity(epochs.len());
    for &e in epochs {
        let mut bank = MemoryBank::<f32>::init(capacity, c, h, w, 5.0, 5.0, spec.seed)?;
        let params = ShortTermParams {
            max_epochs: e,
            acc_threshold: f64::INFINITY,
            patience: usize::MAX,
        };
        short_term_learn(&mut bank, &suite.background, &params)?;
        let mut scores = Vec::with_capacity(suite.stream.len());
        for (t, x) in suite.stream.iter().enumerate() {
            scores.push(online_step(&mut bank, x, t as u64)?.0.interestingness);
        }
        let mut per_k = Vec::with_capacity(category_thresholds.len());
        for &k in category_thresholds {
            let labels: Vec<bool> = suite.annotator_counts.iter().map(|&n| n >= k).collect();
            per_k.push(
                deltas
                    .iter()
                    .map(|&d| auc_op(&labels, &scores, d, &Default::default()))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        rows.push(per_k);
    }
    Ok(EpochSensitivity {
        epochs: epochs.to_vec(),
        category_thresholds: category_thresholds.to_vec(),
        deltas: deltas.to_vec(),
        auc_op: rows,
    })
}
