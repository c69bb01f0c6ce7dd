//! Wall-clock timing of memory reads and online steps.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::memory::MemoryBank;
use crate::numerics::FeatureCube;
use crate::pipeline::online_step;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub frames: usize,
    /// Median milliseconds per read.
    pub read_ms: f64,
    /// Median milliseconds per full online step (read then write).
    pub frame_ms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Times `frames` reads and `frames` online steps on random inputs, after
/// one warm-up step.
pub fn bench_dims(n: usize, c: usize, h: usize, w: usize, frames: usize, seed: u64) -> Result<BenchRow> {
    if frames == 0 {
        return Err(Error::InvalidParameter("frames must be >= 1".into()));
    }
    let mut bank = MemoryBank::<f32>::init(n, c, h, w, 5.0, 5.0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let inputs = (0..frames + 1)
        .map(|_| FeatureCube::<f32>::random_normal(c, h, w, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    online_step(&mut bank, &inputs[0], 0)?;

    let mut reads = Vec::with_capacity(frames);
    for x in &inputs[1..] {
        let t0 = Instant::now();
        std::hint::black_box(bank.read(x)?);
        reads.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mut steps = Vec::with_capacity(frames);
    for (t, x) in inputs[1..].iter().enumerate() {
        let t0 = Instant::now();
        std::hint::black_box(online_step(&mut bank, x, t as u64 + 1)?);
        steps.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok(BenchRow {
        n,
        c,
        h,
        w,
        frames,
        read_ms: median(reads),
        frame_ms: median(steps),
    })
}

/// Benchmarks every combination of the given axes.
pub fn bench_grid(
    ns: &[usize],
    cs: &[usize],
    sizes: &[usize],
    frames: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &c in cs {
            for &s in sizes {
                rows.push(bench_dims(n, c, s, s, frames, seed)?);
            }
        }
    }
    Ok(rows)
}

/// Read-cost growth from `small` to `large`.
pub fn read_scaling(small: &BenchRow, large: &BenchRow) -> f64 {
    large.read_ms / small.read_ms
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn bench_row_reports_dims() {
        let row = bench_dims(4, 2, 4, 4, 3, 1).unwrap();
        assert_eq!((row.n, row.c, row.h, row.w, row.frames), (4, 2, 4, 4, 3));
        assert!(row.read_ms >= 0.0);
        assert!(bench_dims(4, 2, 4, 4, 0, 1).is_err());
    }
}
