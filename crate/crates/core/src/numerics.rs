//! Dense feature tensors, circular translation, and FFT-based circular
//! cross-correlation.
//!
//! Storage is generic over [`Scalar`]; every reduction (dot products, norms,
//! channel sums of spectra) accumulates in `f64`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cosine scores are clamped to `[-1 + ε, 1 - ε]` before the tangent map.
pub const TANGENT_CLAMP_EPS: f64 = 1e-6;

/// One frame's `c × h × w` feature tensor, stored channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCube<T> {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureCube<T> {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        check_dims(c, h, w)?;
        if data.len() != c * h * w {
            return Err(Error::InvalidDimensions(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                c,
                h,
                w
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature cube"));
        }
        Ok(Self { c, h, w, data })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Result<Self> {
        check_dims(c, h, w)?;
        Ok(Self {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        })
    }

    /// Builds a cube from `f(channel, row, col)`.
    pub fn from_fn(
        c: usize,
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(c, h, w)?;
        let mut data = Vec::with_capacity(c * h * w);
        for k in 0..c {
            for i in 0..h {
                for j in 0..w {
                    data.push(f(k, i, j));
                }
            }
        }
        Self::new(c, h, w, data)
    }

    /// Entries drawn independently from `U(-bound, bound)`.
    pub fn random_uniform<R: Rng + ?Sized>(
        c: usize,
        h: usize,
        w: usize,
        bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(c, h, w)?;
        let data = (0..c * h * w)
            .map(|_| T::from_f64_lossy(rng.random_range(-bound..=bound)))
            .collect();
        Ok(Self { c, h, w, data })
    }

    /// Entries drawn independently from the standard normal distribution.
    pub fn random_normal<R: Rng + ?Sized>(c: usize, h: usize, w: usize, rng: &mut R) -> Result<Self> {
        check_dims(c, h, w)?;
        let normal = rand_distr::StandardNormal;
        let data = (0..c * h * w)
            .map(|_| T::from_f64_lossy(rng.sample::<f64, _>(normal)))
            .collect();
        Ok(Self { c, h, w, data })
    }

    pub(crate) fn from_raw_unchecked(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), c * h * w);
        Self { c, h, w, data }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.data[(k * self.h + i) * self.w + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: T) {
        self.data[(k * self.h + i) * self.w + j] = v;
    }

    pub fn channel(&self, k: usize) -> &[T] {
        let plane = self.h * self.w;
        &self.data[k * plane..(k + 1) * plane]
    }

    pub fn norm(&self) -> f64 {
        norm_f64(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dims(c: usize, h: usize, w: usize) -> Result<()> {
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidDimensions(format!(
            "cube dims must be >= 1, got {c}x{h}x{w}"
        )));
    }
    Ok(())
}

/// A 2-D circular translation `(x, y)` with `x` along rows and `y` along
/// columns, always reduced into `[0, h) × [0, w)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ShiftIndex {
    pub x: usize,
    pub y: usize,
}

impl ShiftIndex {
    pub fn new(x: i64, y: i64, h: usize, w: usize) -> Self {
        Self {
            x: x.rem_euclid(h as i64) as usize,
            y: y.rem_euclid(w as i64) as usize,
        }
    }

    pub fn compose(self, other: ShiftIndex, h: usize, w: usize) -> Self {
        Self {
            x: (self.x + other.x) % h,
            y: (self.y + other.y) % w,
        }
    }

    pub fn inverse(self, h: usize, w: usize) -> Self {
        Self {
            x: (h - self.x % h) % h,
            y: (w - self.y % w) % w,
        }
    }

    #[inline]
    pub fn linear(self, w: usize) -> usize {
        self.x * w + self.y
    }
}

#[inline]
pub(crate) fn dot_f64<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x.as_f64() * y.as_f64())
        .sum()
}

#[inline]
pub(crate) fn norm_f64<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|&x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
}

/// Cosine of two equal-length slices with precomputed norms.
#[inline]
pub(crate) fn cosine_with_norms<T: Scalar>(a: &[T], b: &[T], na: f64, nb: f64) -> f64 {
    (dot_f64(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Global cosine similarity `Σ(a⊙b) / (‖a‖_F ‖b‖_F)`, clamped into `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &FeatureCube<T>, b: &FeatureCube<T>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput("zero-norm tensor in cosine similarity"));
    }
    Ok(cosine_with_norms(&a.data, &b.data, na, nb))
}

/// Circularly translates every channel so that `out[k][i][j] = a[k][i - s.x][j - s.y]`
/// (indices modulo `h`, `w`).
pub fn circular_shift<T: Scalar>(a: &FeatureCube<T>, s: ShiftIndex) -> FeatureCube<T> {
    let (c, h, w) = a.shape();
    let sx = s.x % h;
    let sy = s.y % w;
    let mut out = vec![T::zero(); a.len()];
    for k in 0..c {
        let src = a.channel(k);
        let dst = &mut out[k * h * w..(k + 1) * h * w];
        for i in 0..h {
            let si = (i + h - sx) % h;
            let src_row = &src[si * w..(si + 1) * w];
            let dst_row = &mut dst[i * w..(i + 1) * w];
            // dst[j] = src[j - sy]
            dst_row[sy..].copy_from_slice(&src_row[..w - sy]);
            dst_row[..sy].copy_from_slice(&src_row[w - sy..]);
        }
    }
    FeatureCube::from_raw_unchecked(c, h, w, out)
}

/// `acc += weight * circular_shift(a, s)`, accumulated in `f64`.
pub(crate) fn accumulate_shifted<T: Scalar>(
    acc: &mut [f64],
    a: &FeatureCube<T>,
    s: ShiftIndex,
    weight: f64,
) {
    let (c, h, w) = a.shape();
    let sx = s.x % h;
    let sy = s.y % w;
    for k in 0..c {
        let src = a.channel(k);
        let dst = &mut acc[k * h * w..(k + 1) * h * w];
        for i in 0..h {
            let si = (i + h - sx) % h;
            let src_row = &src[si * w..(si + 1) * w];
            let dst_row = &mut dst[i * w..(i + 1) * w];
            for (j, d) in dst_row.iter_mut().enumerate() {
                let sj = (j + w - sy) % w;
                *d += weight * src_row[sj].as_f64();
            }
        }
    }
}

/// 2-D spectra of every channel of a cube. Bins are kept in column-major
/// (transposed) order; the layout is private to [`Correlator`].
#[derive(Clone, Debug, PartialEq)]
pub struct CubeSpectrum<T> {
    c: usize,
    h: usize,
    w: usize,
    bins: Vec<Complex<T>>,
}

impl<T: Scalar> CubeSpectrum<T> {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    /// In-place `self ← (1 - weight)·self + weight·other`. The forward FFT is
    /// linear, so this tracks the spectrum of a cube under the same update.
    pub(crate) fn blend(&mut self, other: &CubeSpectrum<T>, weight: T) {
        let keep = T::one() - weight;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a = *a * keep + *b * weight;
        }
    }
}

/// Reusable buffers for [`Correlator::response`].
#[derive(Default)]
pub struct CorrelationWorkspace {
    acc: Vec<Complex<f64>>,
    tmp: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

/// Planned FFTs for circular cross-correlation of `h × w` planes.
#[derive(Clone)]
pub struct Correlator<T: Scalar> {
    h: usize,
    w: usize,
    fwd_row: Arc<dyn Fft<T>>,
    fwd_col: Arc<dyn Fft<T>>,
    inv_row: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

impl<T: Scalar> std::fmt::Debug for Correlator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Correlator")
            .field("h", &self.h)
            .field("w", &self.w)
            .finish()
    }
}

fn transpose<C: Copy>(src: &[C], dst: &mut [C], rows: usize, cols: usize) {
    for i in 0..rows {
        for j in 0..cols {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
}

impl<T: Scalar> Correlator<T> {
    pub fn new(h: usize, w: usize) -> Self {
        assert!(h >= 1 && w >= 1, "correlator dims must be >= 1");
        let mut planner = FftPlanner::<T>::new();
        let mut planner64 = FftPlanner::<f64>::new();
        Self {
            h,
            w,
            fwd_row: planner.plan_fft_forward(w),
            fwd_col: planner.plan_fft_forward(h),
            inv_row: planner64.plan_fft_inverse(w),
            inv_col: planner64.plan_fft_inverse(h),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    /// Forward 2-D FFT of every channel.
    pub fn spectrum(&self, cube: &FeatureCube<T>) -> CubeSpectrum<T> {
        let (c, h, w) = cube.shape();
        assert_eq!((h, w), (self.h, self.w), "cube does not match correlator dims");
        let plane = h * w;
        let mut rows: Vec<Complex<T>> = cube
            .as_slice()
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        let scratch_len = self
            .fwd_row
            .get_inplace_scratch_len()
            .max(self.fwd_col.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];
        self.fwd_row.process_with_scratch(&mut rows, &mut scratch);
        let mut bins = vec![Complex::new(T::zero(), T::zero()); c * plane];
        for k in 0..c {
            transpose(
                &rows[k * plane..(k + 1) * plane],
                &mut bins[k * plane..(k + 1) * plane],
                h,
                w,
            );
        }
        self.fwd_col.process_with_scratch(&mut bins, &mut scratch);
        CubeSpectrum { c, h, w, bins }
    }

    /// Unnormalized circular cross-correlation summed over channels:
    /// `out[a*w + b] = Σ_k Σ_{p,q} x[k][p][q] · m[k][p+a][q+b]`.
    pub fn response(
        &self,
        x: &CubeSpectrum<T>,
        m: &CubeSpectrum<T>,
        ws: &mut CorrelationWorkspace,
        out: &mut Vec<f64>,
    ) {
        assert_eq!(x.shape(), m.shape(), "spectrum shapes differ");
        let (c, h, w) = x.shape();
        let plane = h * w;
        ws.acc.clear();
        ws.acc.resize(plane, Complex::new(0.0, 0.0));
        for k in 0..c {
            let xs = &x.bins[k * plane..(k + 1) * plane];
            let ms = &m.bins[k * plane..(k + 1) * plane];
            for ((acc, a), b) in ws.acc.iter_mut().zip(xs).zip(ms) {
                let (ar, ai) = (a.re.as_f64(), a.im.as_f64());
                let (br, bi) = (b.re.as_f64(), b.im.as_f64());
                // conj(a) * b
                acc.re += ar * br + ai * bi;
                acc.im += ar * bi - ai * br;
            }
        }
        let scratch_len = self
            .inv_row
            .get_inplace_scratch_len()
            .max(self.inv_col.get_inplace_scratch_len());
        ws.scratch.resize(scratch_len, Complex::new(0.0, 0.0));
        self.inv_col.process_with_scratch(&mut ws.acc, &mut ws.scratch);
        ws.tmp.clear();
        ws.tmp.resize(plane, Complex::new(0.0, 0.0));
        transpose(&ws.acc, &mut ws.tmp, w, h);
        self.inv_row.process_with_scratch(&mut ws.tmp, &mut ws.scratch);
        let scale = 1.0 / plane as f64;
        out.clear();
        out.extend(ws.tmp.iter().map(|v| v.re * scale));
    }

    /// Best shift `s` maximizing `cos(x, circular_shift(m, s))` given the raw
    /// response and both Frobenius norms. Ties go to the lowest linear index.
    pub fn best_shift(&self, response: &[f64], norm_x: f64, norm_m: f64) -> (f64, ShiftIndex) {
        let (h, w) = (self.h, self.w);
        let mut best = f64::NEG_INFINITY;
        let mut best_shift = ShiftIndex::default();
        for sx in 0..h {
            let ax = (h - sx) % h;
            for sy in 0..w {
                let ay = (w - sy) % w;
                let v = response[ax * w + ay];
                if v > best {
                    best = v;
                    best_shift = ShiftIndex { x: sx, y: sy };
                }
            }
        }
        ((best / (norm_x * norm_m)).clamp(-1.0, 1.0), best_shift)
    }
}

/// Maximum cosine similarity of `x` against every circular translation of `m`,
/// with the translation that attains it.
pub fn max_corr_similarity<T: Scalar>(
    x: &FeatureCube<T>,
    m: &FeatureCube<T>,
) -> Result<(f64, ShiftIndex)> {
    x.ensure_same_shape(m)?;
    let nx = x.norm();
    let nm = m.norm();
    if nx == 0.0 || nm == 0.0 {
        return Err(Error::DegenerateInput("zero-norm tensor in correlation"));
    }
    let corr = Correlator::new(x.height(), x.width());
    let xs = corr.spectrum(x);
    let ms = corr.spectrum(m);
    let mut ws = CorrelationWorkspace::default();
    let mut resp = Vec::new();
    corr.response(&xs, &ms, &mut ws, &mut resp);
    Ok(corr.best_shift(&resp, nx, nm))
}

/// Reference for [`max_corr_similarity`]: evaluates the cosine at all `h·w`
/// shifts directly. Quadratic in `h·w`.
pub fn brute_force_max_corr<T: Scalar>(
    x: &FeatureCube<T>,
    m: &FeatureCube<T>,
) -> Result<(f64, ShiftIndex)> {
    x.ensure_same_shape(m)?;
    let nx = x.norm();
    let nm = m.norm();
    if nx == 0.0 || nm == 0.0 {
        return Err(Error::DegenerateInput("zero-norm tensor in correlation"));
    }
    let (c, h, w) = x.shape();
    let mut best = f64::NEG_INFINITY;
    let mut best_shift = ShiftIndex::default();
    for sx in 0..h {
        for sy in 0..w {
            let mut dot = 0.0;
            for k in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        let mi = (i + h - sx) % h;
                        let mj = (j + w - sy) % w;
                        dot += x.get(k, i, j).as_f64() * m.get(k, mi, mj).as_f64();
                    }
                }
            }
            if dot > best {
                best = dot;
                best_shift = ShiftIndex { x: sx, y: sy };
            }
        }
    }
    Ok(((best / (nx * nm)).clamp(-1.0, 1.0), best_shift))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// `softmax(rate · tan(π/2 · clamp(score, -1+ε, 1-ε)))`.
pub fn sparse_softmax(scores: &[f64], rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate must be > 0, got {rate}")));
    }
    if scores.is_empty() {
        return Err(Error::DegenerateInput("empty score vector"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("similarity scores"));
    }
    let lim = 1.0 - TANGENT_CLAMP_EPS;
    let logits: Vec<f64> = scores
        .iter()
        .map(|&s| rate * (FRAC_PI_2 * s.clamp(-lim, lim)).tan())
        .collect();
    Ok(softmax(&logits))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_cube(c: usize, h: usize, w: usize, seed: u64) -> FeatureCube<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureCube::random_normal(c, h, w, &mut rng).unwrap()
    }

    fn unit_at(c: usize, h: usize, w: usize, at: (usize, usize, usize)) -> FeatureCube<f32> {
        FeatureCube::from_fn(c, h, w, |k, i, j| if (k, i, j) == at { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn cosine_identity_antipodal_orthogonal() {
        let a = rand_cube(3, 4, 5, 1);
        assert_abs_diff_eq!(cosine_similarity(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let neg = a.scaled(-1.0);
        assert_abs_diff_eq!(cosine_similarity(&a, &neg).unwrap(), -1.0, epsilon = 1e-12);
        let e1 = unit_at(2, 3, 3, (0, 1, 1));
        let e2 = unit_at(2, 3, 3, (1, 0, 2));
        assert_eq!(cosine_similarity(&e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn cosine_rejects_zero_norm_and_shape_mismatch() {
        let z = FeatureCube::<f32>::zeros(2, 2, 2).unwrap();
        let a = rand_cube(2, 2, 2, 3);
        assert!(matches!(cosine_similarity(&a, &z), Err(Error::DegenerateInput(_))));
        let b = rand_cube(2, 2, 3, 3);
        assert!(matches!(cosine_similarity(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn cube_constructor_validates() {
        assert!(FeatureCube::<f32>::new(0, 1, 1, vec![]).is_err());
        assert!(FeatureCube::<f32>::new(1, 1, 2, vec![1.0]).is_err());
        assert!(matches!(
            FeatureCube::<f32>::new(1, 1, 1, vec![f32::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn shift_identity_and_inverse() {
        let a = rand_cube(3, 5, 7, 4);
        assert_eq!(circular_shift(&a, ShiftIndex::default()), a);
        for (p, q) in [(1, 2), (4, 6), (0, 3), (2, 0)] {
            let s = ShiftIndex { x: p, y: q };
            let back = circular_shift(&circular_shift(&a, s), s.inverse(5, 7));
            assert_eq!(back, a);
        }
    }

    #[test]
    fn shift_matches_index_remapping_loop() {
        let a = rand_cube(2, 6, 4, 5);
        for sx in 0..6 {
            for sy in 0..4 {
                let got = circular_shift(&a, ShiftIndex { x: sx, y: sy });
                for k in 0..2 {
                    for i in 0..6 {
                        for j in 0..4 {
                            let src = a.get(k, (i + 6 - sx) % 6, (j + 4 - sy) % 4);
                            assert_eq!(got.get(k, i, j), src);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn max_corr_identity_and_translation() {
        let x = rand_cube(3, 8, 8, 6);
        let (s, shift) = max_corr_similarity(&x, &x).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-5);
        assert_eq!(shift, ShiftIndex::default());
        for (p, q) in [(3, 5), (7, 1), (0, 4)] {
            let shifted = circular_shift(&x, ShiftIndex { x: p, y: q });
            let (s, shift) = max_corr_similarity(&shifted, &x).unwrap();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-5);
            assert_eq!(shift, ShiftIndex { x: p, y: q });
        }
    }

    #[test]
    fn max_corr_matches_brute_force_small_sweep() {
        for seed in 0..100 {
            let x = rand_cube(3, 8, 8, 1000 + seed);
            let m = rand_cube(3, 8, 8, 5000 + seed);
            let (fs, fshift) = max_corr_similarity(&x, &m).unwrap();
            let (bs, bshift) = brute_force_max_corr(&x, &m).unwrap();
            assert!((fs - bs).abs() <= 1e-5, "seed {seed}: {fs} vs {bs}");
            assert_eq!(fshift, bshift, "seed {seed}");
        }
    }

    #[test]
    fn brute_force_degenerate_spatial_dims() {
        let x = rand_cube(5, 1, 1, 8);
        let m = rand_cube(5, 1, 1, 9);
        let (s, shift) = brute_force_max_corr(&x, &m).unwrap();
        assert_abs_diff_eq!(s, cosine_similarity(&x, &m).unwrap(), epsilon = 1e-12);
        assert_eq!(shift, ShiftIndex::default());
        let (fs, _) = max_corr_similarity(&x, &m).unwrap();
        assert_abs_diff_eq!(fs, s, epsilon = 1e-6);
    }

    #[test]
    fn max_corr_non_square_planes() {
        let x = rand_cube(2, 5, 9, 10);
        let m = rand_cube(2, 5, 9, 11);
        let (fs, fshift) = max_corr_similarity(&x, &m).unwrap();
        let (bs, bshift) = brute_force_max_corr(&x, &m).unwrap();
        assert!((fs - bs).abs() <= 1e-5);
        assert_eq!(fshift, bshift);
    }

    #[test]
    fn sparse_softmax_examples() {
        let u = sparse_softmax(&[0.3; 4], 5.0).unwrap();
        for v in &u {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
        let one_hot = sparse_softmax(&[1.0, 0.0], 5.0).unwrap();
        assert!(one_hot[0] >= 1.0 - 1e-6);
        assert!(one_hot[1] <= 1e-6);

        // closed form evaluated term by term
        let scores = [0.5f64, 0.3, 0.0];
        let e: Vec<f64> = scores
            .iter()
            .map(|s| (5.0 * (std::f64::consts::PI / 2.0 * s).tan()).exp())
            .collect();
        let total: f64 = e.iter().sum();
        let got = sparse_softmax(&scores, 5.0).unwrap();
        for (g, ei) in got.iter().zip(&e) {
            assert_abs_diff_eq!(*g, ei / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn sparse_softmax_errors() {
        assert!(matches!(sparse_softmax(&[0.1, f64::NAN], 1.0), Err(Error::NonFinite(_))));
        assert!(sparse_softmax(&[0.1], 0.0).is_err());
        assert!(sparse_softmax(&[], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sparse_softmax_simplex_and_argmax(
            scores in prop::collection::vec(-1.0f64..=1.0, 1..40),
            rate in 0.05f64..20.0,
        ) {
            let w = sparse_softmax(&scores, rate).unwrap();
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            let top = argmax(&scores);
            let wtop = argmax(&w);
            prop_assert!(scores[wtop] == scores[top]);
        }

        #[test]
        fn shifts_compose_additively(
            seed in 0u64..1000,
            a in (0usize..6, 0usize..5),
            b in (0usize..6, 0usize..5),
        ) {
            let x = rand_cube(2, 6, 5, seed);
            let sa = ShiftIndex { x: a.0, y: a.1 };
            let sb = ShiftIndex { x: b.0, y: b.1 };
            let twice = circular_shift(&circular_shift(&x, sa), sb);
            prop_assert_eq!(twice, circular_shift(&x, sa.compose(sb, 6, 5)));
        }

        #[test]
        fn fft_translation_invariance(seed in 0u64..10_000, sx in 0usize..16, sy in 0usize..16) {
            let x = rand_cube(4, 16, 16, seed);
            let (s, _) = max_corr_similarity(&x, &circular_shift(&x, ShiftIndex { x: sx, y: sy })).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-5);
        }
    }
}
