//! The 4-D visual memory: `n` cubes of shape `c × h × w`, a usage vector, and
//! the writing and reading rates.
//!
//! Writing is a per-cube moving average toward the input, weighted by a
//! tangent-sparsified softmax over plain cosine similarities and rebalanced
//! toward under-used cubes. Reading matches the input against every circular
//! translation of every cube via FFT correlation, and recalls a weighted sum of
//! the best-aligned cubes.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    accumulate_shifted, argmax, check_dims, cosine_similarity, cosine_with_norms, dot_f64,
    norm_f64, softmax, sparse_softmax, CorrelationWorkspace, Correlator, CubeSpectrum,
    FeatureCube, ShiftIndex,
};
use crate::scalar::Scalar;

/// Usage at or above this level on every cube counts as "all memory used".
pub const FULL_USAGE: f64 = 1.0 - 1e-6;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"VMM1";

/// How a write turns similarities into per-cube weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WritePolicy {
    /// Tangent-sparsified softmax at the bank's writing rate, optionally
    /// rebalanced by the usage vector.
    Sparse { usage_balancing: bool },
    /// Plain `softmax(gamma · D)`, no tangent map and no usage rebalancing.
    NonSparse { gamma: f64 },
}

impl Default for WritePolicy {
    fn default() -> Self {
        WritePolicy::Sparse {
            usage_balancing: true,
        }
    }
}

/// Outcome of a memory read.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadResult<T> {
    pub recalled: FeatureCube<T>,
    pub weights: Vec<f64>,
    pub similarities: Vec<f64>,
    pub shifts: Vec<ShiftIndex>,
    /// Channel-averaged cosine between `recalled` and the query.
    pub confidence: f64,
}

impl<T> ReadResult<T> {
    /// Cube with the largest reading weight.
    pub fn top_cube(&self) -> usize {
        argmax(&self.weights)
    }

    pub fn top_shift(&self) -> ShiftIndex {
        self.shifts[self.top_cube()]
    }
}

/// Spectra and norms derived from the cubes, kept in step with every write.
#[derive(Clone, Debug)]
struct DerivedState<T: Scalar> {
    correlator: Correlator<T>,
    spectra: Vec<CubeSpectrum<T>>,
    norms: Vec<f64>,
}

impl<T: Scalar> DerivedState<T> {
    fn build(cubes: &[FeatureCube<T>], h: usize, w: usize) -> Self {
        let correlator = Correlator::new(h, w);
        let spectra = cubes.iter().map(|m| correlator.spectrum(m)).collect();
        let norms = cubes.iter().map(|m| m.norm()).collect();
        Self {
            correlator,
            spectra,
            norms,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MemoryBank<T: Scalar> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    cubes: Vec<FeatureCube<T>>,
    usage: Vec<T>,
    gamma_w: T,
    gamma_r: T,
    step: u64,
    seed: u64,
    derived: DerivedState<T>,
}

impl<T: Scalar> PartialEq for MemoryBank<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && self.cubes == other.cubes
            && self.usage == other.usage
            && self.gamma_w == other.gamma_w
            && self.gamma_r == other.gamma_r
            && self.step == other.step
            && self.seed == other.seed
    }
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be > 0, got {rate}")));
    }
    Ok(())
}

impl<T: Scalar> MemoryBank<T> {
    /// Fresh bank with cubes drawn from `U(-b, b)`, `b = sqrt(6 / (c·h·w))`,
    /// and zero usage. Deterministic in `seed`.
    pub fn init(
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        gamma_w: f64,
        gamma_r: f64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimensions("memory capacity must be >= 1".into()));
        }
        check_dims(c, h, w)?;
        check_rate("gamma_w", gamma_w)?;
        check_rate("gamma_r", gamma_r)?;
        let bound = init_bound(c, h, w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cubes = (0..n)
            .map(|_| FeatureCube::random_uniform(c, h, w, bound, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(
            cubes,
            vec![T::zero(); n],
            T::from_f64_lossy(gamma_w),
            T::from_f64_lossy(gamma_r),
            0,
            seed,
        ))
    }

    /// Bank from explicit state. All cubes must share a shape.
    pub fn from_parts(
        cubes: Vec<FeatureCube<T>>,
        usage: Vec<T>,
        gamma_w: f64,
        gamma_r: f64,
        step: u64,
        seed: u64,
    ) -> Result<Self> {
        let first = cubes
            .first()
            .ok_or_else(|| Error::InvalidDimensions("memory capacity must be >= 1".into()))?;
        for m in &cubes[1..] {
            first.ensure_same_shape(m)?;
        }
        if cubes.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("memory cube"));
        }
        if usage.len() != cubes.len() {
            return Err(Error::InvalidDimensions(format!(
                "usage length {} != capacity {}",
                usage.len(),
                cubes.len()
            )));
        }
        if usage
            .iter()
            .any(|u| !(*u >= T::zero() && *u <= T::one()))
        {
            return Err(Error::InvalidParameter("usage entries must lie in [0, 1]".into()));
        }
        check_rate("gamma_w", gamma_w)?;
        check_rate("gamma_r", gamma_r)?;
        Ok(Self::assemble(
            cubes,
            usage,
            T::from_f64_lossy(gamma_w),
            T::from_f64_lossy(gamma_r),
            step,
            seed,
        ))
    }

    fn assemble(
        cubes: Vec<FeatureCube<T>>,
        usage: Vec<T>,
        gamma_w: T,
        gamma_r: T,
        step: u64,
        seed: u64,
    ) -> Self {
        let (c, h, w) = cubes[0].shape();
        let derived = DerivedState::build(&cubes, h, w);
        Self {
            n: cubes.len(),
            c,
            h,
            w,
            cubes,
            usage,
            gamma_w,
            gamma_r,
            step,
            seed,
            derived,
        }
    }

    /// `(n, c, h, w)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn cube_shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn capacity(&self) -> usize {
        self.n
    }

    pub fn cubes(&self) -> &[FeatureCube<T>] {
        &self.cubes
    }

    pub fn usage(&self) -> &[T] {
        &self.usage
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w.as_f64()
    }

    pub fn gamma_r(&self) -> f64 {
        self.gamma_r.as_f64()
    }

    pub fn set_gamma_w(&mut self, gamma_w: f64) -> Result<()> {
        check_rate("gamma_w", gamma_w)?;
        self.gamma_w = T::from_f64_lossy(gamma_w);
        Ok(())
    }

    pub fn set_gamma_r(&mut self, gamma_r: f64) -> Result<()> {
        check_rate("gamma_r", gamma_r)?;
        self.gamma_r = T::from_f64_lossy(gamma_r);
        Ok(())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_input(&self, x: &FeatureCube<T>) -> Result<f64> {
        if x.shape() != self.cube_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.cube_shape(),
                got: x.shape(),
            });
        }
        let nx = x.norm();
        if nx == 0.0 {
            return Err(Error::DegenerateInput("zero-norm memory input"));
        }
        if !nx.is_finite() {
            return Err(Error::NonFinite("memory input"));
        }
        Ok(nx)
    }

    /// Plain cosine similarity of `x` to every cube, without shift search.
    pub fn cosine_scores(&self, x: &FeatureCube<T>) -> Result<Vec<f64>> {
        let nx = self.check_input(x)?;
        self.cubes
            .iter()
            .zip(&self.derived.norms)
            .map(|(m, &nm)| {
                if nm == 0.0 {
                    Err(Error::DegenerateInput("zero-norm memory cube"))
                } else {
                    Ok(cosine_with_norms(x.as_slice(), m.as_slice(), nx, nm))
                }
            })
            .collect()
    }

    /// Sparse writing weights with usage rebalancing.
    pub fn writing_vector(&self, x: &FeatureCube<T>) -> Result<Vec<f64>> {
        self.weights_for(x, WritePolicy::default())
    }

    fn weights_for(&self, x: &FeatureCube<T>, policy: WritePolicy) -> Result<Vec<f64>> {
        let scores = self.cosine_scores(x)?;
        match policy {
            WritePolicy::NonSparse { gamma } => {
                check_rate("gamma", gamma)?;
                let logits: Vec<f64> = scores.iter().map(|d| gamma * d).collect();
                Ok(softmax(&logits))
            }
            WritePolicy::Sparse { usage_balancing } => {
                let base = sparse_softmax(&scores, self.gamma_w())?;
                if usage_balancing {
                    Ok(rebalance_by_usage(base, &self.usage))
                } else {
                    Ok(base)
                }
            }
        }
    }

    /// Writes `x` with sparse, usage-balanced weights. Returns the weights
    /// that were applied.
    pub fn write(&mut self, x: &FeatureCube<T>) -> Result<Vec<f64>> {
        self.write_with(x, WritePolicy::default())
    }

    /// Writes `x` with `softmax(gamma · D)` weights.
    pub fn write_nonsparse(&mut self, x: &FeatureCube<T>, gamma: f64) -> Result<Vec<f64>> {
        self.write_with(x, WritePolicy::NonSparse { gamma })
    }

    pub fn write_with(&mut self, x: &FeatureCube<T>, policy: WritePolicy) -> Result<Vec<f64>> {
        let weights = self.weights_for(x, policy)?;
        let x_spectrum = self.derived.correlator.spectrum(x);
        for (i, &wf) in weights.iter().enumerate() {
            let wt = T::from_f64_lossy(wf);
            self.usage[i] = usage_update(self.usage[i], wt);
            if wf == 0.0 {
                continue;
            }
            blend_into(&mut self.cubes[i], x, wt);
            self.derived.spectra[i].blend(&x_spectrum, wt);
            self.derived.norms[i] = norm_f64(self.cubes[i].as_slice());
        }
        self.step += 1;
        Ok(weights)
    }

    /// Translation-invariant read. Does not modify the bank.
    pub fn read(&self, x: &FeatureCube<T>) -> Result<ReadResult<T>> {
        let nx = self.check_input(x)?;
        let corr = &self.derived.correlator;
        let xs = corr.spectrum(x);
        let mut ws = CorrelationWorkspace::default();
        let mut resp = Vec::with_capacity(self.h * self.w);
        let mut similarities = Vec::with_capacity(self.n);
        let mut shifts = Vec::with_capacity(self.n);
        for (spectrum, &nm) in self.derived.spectra.iter().zip(&self.derived.norms) {
            if nm == 0.0 {
                return Err(Error::DegenerateInput("zero-norm memory cube"));
            }
            corr.response(&xs, spectrum, &mut ws, &mut resp);
            let (s, shift) = corr.best_shift(&resp, nx, nm);
            similarities.push(s);
            shifts.push(shift);
        }
        let weights = sparse_softmax(&similarities, self.gamma_r())?;
        let mut acc = vec![0.0f64; x.len()];
        for ((cube, &shift), &r) in self.cubes.iter().zip(&shifts).zip(&weights) {
            // exp underflow leaves exact zeros; they contribute nothing
            if r != 0.0 {
                accumulate_shifted(&mut acc, cube, shift, r);
            }
        }
        let recalled = FeatureCube::from_raw_unchecked(
            self.c,
            self.h,
            self.w,
            acc.into_iter().map(T::from_f64_lossy).collect(),
        );
        let confidence = reading_confidence(&recalled, x);
        Ok(ReadResult {
            recalled,
            weights,
            similarities,
            shifts,
            confidence,
        })
    }

    /// Serializes the bank (`VMM1` layout, little-endian, `f32` payload).
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 4 * (self.n * self.c * self.h * self.w + self.n));
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        for d in [self.n, self.c, self.h, self.w] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.gamma_w.to_f32_bits().to_le_bytes());
        out.extend_from_slice(&self.gamma_r.to_f32_bits().to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for cube in &self.cubes {
            for v in cube.as_slice() {
                out.extend_from_slice(&v.to_f32_bits().to_le_bytes());
            }
        }
        for u in &self.usage {
            out.extend_from_slice(&u.to_f32_bits().to_le_bytes());
        }
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader::new(bytes);
        let magic = rd.array4()?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::BadMagic {
                expected: SNAPSHOT_MAGIC,
                found: magic,
            });
        }
        let n = rd.u32()? as usize;
        let c = rd.u32()? as usize;
        let h = rd.u32()? as usize;
        let w = rd.u32()? as usize;
        if n == 0 {
            return Err(Error::InvalidDimensions("snapshot declares n = 0".into()));
        }
        check_dims(c, h, w)?;
        let gamma_w = T::from_f32_bits(rd.u32()?);
        let gamma_r = T::from_f32_bits(rd.u32()?);
        let step = rd.u64()?;
        let seed = rd.u64()?;
        let per_cube = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Error::InvalidDimensions("cube size overflows".into()))?;
        let total = per_cube
            .checked_mul(n)
            .and_then(|v| v.checked_add(n))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::InvalidDimensions("snapshot size overflows".into()))?;
        rd.require(total)?;
        let mut cubes = Vec::with_capacity(n);
        for _ in 0..n {
            let data = (0..per_cube)
                .map(|_| rd.u32().map(T::from_f32_bits))
                .collect::<Result<Vec<T>>>()?;
            cubes.push(FeatureCube::new(c, h, w, data)?);
        }
        let usage = (0..n)
            .map(|_| rd.u32().map(T::from_f32_bits))
            .collect::<Result<Vec<T>>>()?;
        rd.finish()?;
        Self::from_parts(cubes, usage, gamma_w.as_f64(), gamma_r.as_f64(), step, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
        f.write_all(&self.snapshot()).map_err(|e| Error::io_at(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io_at(path, e))?;
        Self::restore(&bytes)
    }
}

pub fn init_bound(c: usize, h: usize, w: usize) -> f64 {
    (6.0 / (c * h * w) as f64).sqrt()
}

/// Shrinks weights that fall below their cube's usage by `(1 - usage)` and
/// renormalizes the whole vector to sum to one. Once every cube is used the
/// base vector is returned unchanged.
pub fn rebalance_by_usage<T: Scalar>(mut weights: Vec<f64>, usage: &[T]) -> Vec<f64> {
    let min_usage = usage
        .iter()
        .map(|u| u.as_f64())
        .fold(f64::INFINITY, f64::min);
    if min_usage >= FULL_USAGE {
        return weights;
    }
    for (wi, u) in weights.iter_mut().zip(usage) {
        let u = u.as_f64();
        if *wi < u {
            *wi *= 1.0 - u;
        }
    }
    let sum: f64 = weights.iter().sum();
    if sum > 0.0 {
        weights.iter_mut().for_each(|v| *v /= sum);
    }
    weights
}

/// `u ← (1 - w)·u + w`, kept inside `[0, 1]`.
#[inline]
pub fn usage_update<T: Scalar>(u: T, w: T) -> T {
    ((T::one() - w) * u + w).max(T::zero()).min(T::one())
}

/// `m ← (1 - w)·m + w·x`, each entry kept between its old value and `x`.
fn blend_into<T: Scalar>(m: &mut FeatureCube<T>, x: &FeatureCube<T>, w: T) {
    let keep = T::one() - w;
    for (a, &b) in m.as_mut_slice().iter_mut().zip(x.as_slice()) {
        let v = keep * *a + w * b;
        let (lo, hi) = if *a <= b { (*a, b) } else { (b, *a) };
        *a = v.max(lo).min(hi);
    }
}

/// Mean over channels of the per-channel cosine between `recalled` and `x`.
/// A channel where either side has zero norm contributes 0.
pub fn reading_confidence<T: Scalar>(recalled: &FeatureCube<T>, x: &FeatureCube<T>) -> f64 {
    let c = x.channels();
    let total: f64 = (0..c)
        .map(|k| {
            let a = recalled.channel(k);
            let b = x.channel(k);
            let na = norm_f64(a);
            let nb = norm_f64(b);
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                (dot_f64(a, b) / (na * nb)).clamp(-1.0, 1.0)
            }
        })
        .sum();
    total / c as f64
}

/// Global cosine similarity between a recalled tensor and the original input.
pub fn reading_accuracy<T: Scalar>(recalled: &FeatureCube<T>, original: &FeatureCube<T>) -> Result<f64> {
    cosine_similarity(recalled, original)
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        let available = self.bytes.len() - self.pos;
        if available < needed {
            return Err(Error::Truncated { needed, available });
        }
        Ok(())
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.require(N)?;
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }

    pub(crate) fn array4(&mut self) -> Result<[u8; 4]> {
        self.take::<4>()
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::TrailingBytes(extra)),
        }
    }
}
