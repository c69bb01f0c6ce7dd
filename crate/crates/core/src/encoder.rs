//! Frame encoding and the on-disk feature format.
//!
//! The baseline encoder is a fixed random filter bank: resize, per-image
//! channel standardization, `c` seeded `k×k×3` filters with `tanh`, then
//! average pooling down to `(h, w)`. Frames can also come pre-encoded as
//! feature files listed in a manifest.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::ByteReader;
use crate::numerics::FeatureCube;

pub const FEATURE_MAGIC: [u8; 4] = *b"VFT1";
pub const FEATURE_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.tsv";
const HEADER_LEN: usize = 20;

/// An RGB frame with its position in the sequence.
#[derive(Clone, Debug)]
pub struct Frame {
    pub pixels: RgbImage,
    pub index: u64,
    pub source: String,
}

impl Frame {
    pub fn new(pixels: RgbImage, index: u64, source: impl Into<String>) -> Self {
        Self {
            pixels,
            index,
            source: source.into(),
        }
    }

    pub fn open(path: &Path, index: u64) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(Self::new(img.to_rgb8(), index, path.display().to_string()))
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    BaselineFilterBank,
    ExternalFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub seed: u64,
    /// Target `(W', H')` of the resize stage.
    pub resize: (u32, u32),
    /// Odd filter side length.
    pub kernel: usize,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            kind: EncoderKind::BaselineFilterBank,
            c: 64,
            h: 12,
            w: 12,
            seed: 0,
            resize: (192, 192),
            kernel: 5,
        }
    }
}

impl EncoderSpec {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::InvalidDimensions(format!(
                "encoder output dims must be >= 1, got ({}, {}, {})",
                self.c, self.h, self.w
            )));
        }
        if self.kind == EncoderKind::ExternalFeatures {
            return Ok(());
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel must be odd, got {}",
                self.kernel
            )));
        }
        let (rw, rh) = (self.resize.0 as usize, self.resize.1 as usize);
        if rw < self.kernel || rh < self.kernel {
            return Err(Error::InvalidDimensions(format!(
                "resize {rw}x{rh} is below kernel size {}",
                self.kernel
            )));
        }
        if rw % self.w != 0 || rh % self.h != 0 {
            return Err(Error::InvalidDimensions(format!(
                "resize {rw}x{rh} is not a multiple of the pooled size {}x{}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    /// Pooling stride in resized pixels, `(rows, cols)`.
    pub fn pool_stride(&self) -> (usize, usize) {
        (
            self.resize.1 as usize / self.h,
            self.resize.0 as usize / self.w,
        )
    }
}

/// A baseline encoder with its filter bank materialized.
#[derive(Clone, Debug)]
pub struct Encoder {
    spec: EncoderSpec,
    /// `c × 3 × k × k`, row-major.
    filters: Vec<f32>,
}

impl Encoder {
    pub fn new(spec: EncoderSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind == EncoderKind::ExternalFeatures {
            return Err(Error::InvalidParameter(
                "external-features encoder has no filter bank; load feature files instead".into(),
            ));
        }
        let k = spec.kernel;
        let fan_in = 3 * k * k;
        let bound = (3.0 / fan_in as f64).sqrt() as f32;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let filters = (0..spec.c * fan_in)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Ok(Self { spec, filters })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn encode(&self, frame: &Frame) -> Result<FeatureCube<f32>> {
        let (rw, rh) = self.spec.resize;
        if frame.width() == 0 || frame.height() == 0 {
            return Err(Error::Decode {
                path: PathBuf::from(&frame.source),
                reason: "empty image".into(),
            });
        }
        let resized = if (frame.width(), frame.height()) == (rw, rh) {
            frame.pixels.clone()
        } else {
            image::imageops::resize(&frame.pixels, rw, rh, FilterType::Triangle)
        };
        let planes = standardize(&resized);
        let activations = self.convolve(&planes, rh as usize, rw as usize);
        Ok(self.pool(&activations, rh as usize, rw as usize))
    }

    /// Same-size convolution with zero padding, followed by `tanh`.
    fn convolve(&self, planes: &[Vec<f32>; 3], rows: usize, cols: usize) -> Vec<f32> {
        let k = self.spec.kernel;
        let r = (k / 2) as isize;
        let mut out = vec![0.0f32; self.spec.c * rows * cols];
        for (f, plane_out) in out.chunks_exact_mut(rows * cols).enumerate() {
            let filt = &self.filters[f * 3 * k * k..(f + 1) * 3 * k * k];
            for (ch, plane) in planes.iter().enumerate() {
                let taps = &filt[ch * k * k..(ch + 1) * k * k];
                for di in -r..=r {
                    for dj in -r..=r {
                        let wgt = taps[((di + r) as usize) * k + (dj + r) as usize];
                        let (i_lo, i_hi) = ((-di).max(0) as usize, (rows as isize - di.max(0)) as usize);
                        let (j_lo, j_hi) = ((-dj).max(0) as usize, (cols as isize - dj.max(0)) as usize);
                        for i in i_lo..i_hi {
                            let src_row = ((i as isize + di) as usize) * cols;
                            let dst = &mut plane_out[i * cols + j_lo..i * cols + j_hi];
                            let src = &plane[(src_row as isize + j_lo as isize + dj) as usize
                                ..(src_row as isize + j_hi as isize + dj) as usize];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += wgt * s;
                            }
                        }
                    }
                }
            }
            plane_out.iter_mut().for_each(|v| *v = v.tanh());
        }
        out
    }

    fn pool(&self, act: &[f32], rows: usize, cols: usize) -> FeatureCube<f32> {
        let (c, h, w) = self.spec.dims();
        let (sr, sc) = self.spec.pool_stride();
        let scale = 1.0 / (sr * sc) as f64;
        FeatureCube::from_fn(c, h, w, |k, i, j| {
            let plane = &act[k * rows * cols..(k + 1) * rows * cols];
            let mut acc = 0.0f64;
            for y in i * sr..(i + 1) * sr {
                acc += plane[y * cols + j * sc..y * cols + (j + 1) * sc]
                    .iter()
                    .map(|&v| v as f64)
                    .sum::<f64>();
            }
            (acc * scale) as f32
        })
        .expect("validated dims")
    }
}

/// Encodes one frame with a freshly built encoder.
pub fn encode(spec: &EncoderSpec, frame: &Frame) -> Result<FeatureCube<f32>> {
    Encoder::new(spec.clone())?.encode(frame)
}

/// Zero-mean, unit-variance planes per color channel; constant channels become zero.
fn standardize(img: &RgbImage) -> [Vec<f32>; 3] {
    let len = (img.width() * img.height()) as usize;
    let mut planes = [vec![0.0f32; len], vec![0.0f32; len], vec![0.0f32; len]];
    for (p, px) in img.pixels().enumerate() {
        for (plane, &v) in planes.iter_mut().zip(&px.0) {
            plane[p] = v as f32;
        }
    }
    for plane in planes.iter_mut() {
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / len as f64;
        let var = plane.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / len as f64;
        let sd = var.sqrt();
        if sd < 1e-12 {
            plane.iter_mut().for_each(|v| *v = 0.0);
        } else {
            plane.iter_mut().for_each(|v| *v = ((*v as f64 - mean) / sd) as f32);
        }
    }
    planes
}

pub fn feature_bytes(cube: &FeatureCube<f32>) -> Vec<u8> {
    let (c, h, w) = cube.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cube.len());
    out.extend_from_slice(&FEATURE_MAGIC);
    for v in [FEATURE_VERSION, c as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in cube.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_feature_bytes(bytes: &[u8]) -> Result<FeatureCube<f32>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.array4()?;
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            expected: FEATURE_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (c, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let count = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::InvalidDimensions(format!("({c}, {h}, {w}) overflows")))?;
    let payload = count
        .checked_mul(4)
        .ok_or_else(|| Error::InvalidDimensions(format!("({c}, {h}, {w}) overflows")))?;
    let needed = HEADER_LEN + payload;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::TrailingBytes(bytes.len() - needed));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureCube::new(c, h, w, data)
}

pub fn write_feature_file(path: &Path, cube: &FeatureCube<f32>) -> Result<()> {
    fs::write(path, feature_bytes(cube)).map_err(|e| Error::io_at(path, e))
}

pub fn read_feature_file(path: &Path) -> Result<FeatureCube<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io_at(path, e))?;
    parse_feature_bytes(&bytes)
}

/// One manifest line: frame index, feature file relative to the manifest,
/// optional timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub index: u64,
    pub path: PathBuf,
    pub timestamp: Option<f64>,
}

pub fn feature_file_name(index: u64) -> String {
    format!("frame_{index:06}.vft")
}

pub fn write_manifest<W: Write>(mut out: W, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        match e.timestamp {
            Some(ts) => writeln!(out, "{}\t{}\t{}", e.index, e.path.display(), ts)?,
            None => writeln!(out, "{}\t{}", e.index, e.path.display())?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Vec<ManifestEntry>> {
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Manifest {
                line: lineno,
                reason: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let index: u64 = fields[0].trim().parse().map_err(|_| Error::Manifest {
            line: lineno,
            reason: format!("bad index {:?}", fields[0]),
        })?;
        if let Some(prev) = entries.last() {
            if index <= prev.index {
                return Err(Error::Manifest {
                    line: lineno,
                    reason: format!("index {index} does not follow {}", prev.index),
                });
            }
        }
        let timestamp = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<f64>().map_err(|_| Error::Manifest {
                line: lineno,
                reason: format!("bad timestamp {s:?}"),
            })?),
        };
        entries.push(ManifestEntry {
            index,
            path: PathBuf::from(fields[1]),
            timestamp,
        });
    }
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    parse_manifest(BufReader::new(file))
}

/// Writes `frame_%06d.vft` files and `manifest.tsv` into `dir`, indexing
/// cubes from 0, and returns the manifest path.
pub fn write_features(cubes: &[FeatureCube<f32>], dir: &Path) -> Result<PathBuf> {
    let indexed: Vec<(u64, &FeatureCube<f32>)> =
        cubes.iter().enumerate().map(|(i, c)| (i as u64, c)).collect();
    write_indexed_features(&indexed, dir)
}

pub fn write_indexed_features(cubes: &[(u64, &FeatureCube<f32>)], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
    let mut entries = Vec::with_capacity(cubes.len());
    for &(index, cube) in cubes {
        let name = feature_file_name(index);
        write_feature_file(&dir.join(&name), cube)?;
        entries.push(ManifestEntry {
            index,
            path: PathBuf::from(name),
            timestamp: None,
        });
    }
    let manifest = dir.join(MANIFEST_NAME);
    let file = fs::File::create(&manifest).map_err(|e| Error::io_at(&manifest, e))?;
    write_manifest(BufWriter::new(file), &entries)?;
    Ok(manifest)
}

/// Lazily reads the cubes of a manifest in order, checking that every file
/// matches the dims of the first.
pub struct FeatureStream {
    base: PathBuf,
    entries: std::vec::IntoIter<ManifestEntry>,
    dims: Option<(usize, usize, usize)>,
}

impl FeatureStream {
    pub fn open(manifest: &Path) -> Result<Self> {
        let entries = read_manifest(manifest)?;
        Ok(Self {
            base: manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries: entries.into_iter(),
            dims: None,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() == 0
    }

    fn load(&mut self, entry: &ManifestEntry) -> Result<FeatureCube<f32>> {
        let path = self.base.join(&entry.path);
        if !path.is_file() {
            return Err(Error::MissingFile {
                index: entry.index,
                path,
            });
        }
        let cube = read_feature_file(&path)?;
        match self.dims {
            Some(expected) if expected != cube.shape() => Err(Error::DimMismatch {
                index: entry.index,
                path,
                expected,
                got: cube.shape(),
            }),
            _ => {
                self.dims = Some(cube.shape());
                Ok(cube)
            }
        }
    }
}

impl Iterator for FeatureStream {
    type Item = Result<(ManifestEntry, FeatureCube<f32>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let entry = self.entries.next()?;
        Some(self.load(&entry).map(|cube| (entry, cube)))
    }
}

pub fn load_features(manifest: &Path) -> Result<Vec<FeatureCube<f32>>> {
    FeatureStream::open(manifest)?
        .map(|r| r.map(|(_, cube)| cube))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn small_spec() -> EncoderSpec {
        EncoderSpec {
            c: 8,
            h: 4,
            w: 4,
            seed: 3,
            resize: (32, 32),
            kernel: 3,
            ..Default::default()
        }
    }

    fn textured(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImage::new(w, h);
        // blocky texture so that resampling keeps structure
        let blocks: Vec<[u8; 3]> = (0..64).map(|_| rng.random()).collect();
        for (x, y, px) in img.enumerate_pixels_mut() {
            *px = Rgb(blocks[((y / 4 % 8) * 8 + x / 4 % 8) as usize]);
        }
        img
    }

    #[test]
    fn encoding_is_deterministic() {
        let frame = Frame::new(textured(32, 32, 1), 0, "t");
        let a = encode(&small_spec(), &frame).unwrap();
        let b = encode(&small_spec(), &frame).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (8, 4, 4));
        assert!(a.norm() > 0.0);
        let other = encode(&EncoderSpec { seed: 4, ..small_spec() }, &frame).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn constant_frame_encodes_to_zero() {
        let frame = Frame::new(RgbImage::from_pixel(40, 30, Rgb([90, 20, 200])), 0, "flat");
        let cube = encode(&small_spec(), &frame).unwrap();
        assert!(cube.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixed_sizes_share_output_dims() {
        let enc = Encoder::new(small_spec()).unwrap();
        for (w, h) in [(32, 32), (17, 50), (100, 64)] {
            let cube = enc.encode(&Frame::new(textured(w, h, 2), 0, "m")).unwrap();
            assert_eq!(cube.shape(), (8, 4, 4));
        }
    }

    fn shift_right(img: &RgbImage, by: u32, wrap: bool) -> RgbImage {
        let w = img.width();
        RgbImage::from_fn(w, img.height(), |x, y| {
            if x >= by {
                *img.get_pixel(x - by, y)
            } else if wrap {
                *img.get_pixel(x + w - by, y)
            } else {
                *img.get_pixel(0, y)
            }
        })
    }

    /// Mean absolute difference between `b` and `a` moved one cell right,
    /// over cells away from the image border, relative to the mean |a|.
    fn interior_shift_error(a: &FeatureCube<f32>, b: &FeatureCube<f32>, offset: usize) -> f64 {
        let (c, h, w) = a.shape();
        let (mut diff, mut total) = (0.0f64, 0.0f64);
        for k in 0..c {
            for i in 1..h - 1 {
                for j in 2..w - 1 {
                    diff += ((b.get(k, i, j) - a.get(k, i, j - offset)) as f64).abs();
                    total += (a.get(k, i, j - offset) as f64).abs();
                }
            }
        }
        diff / total
    }

    #[test]
    fn stride_translation_shifts_interior_cells() {
        let spec = EncoderSpec {
            h: 8,
            w: 8,
            resize: (64, 64),
            ..small_spec()
        };
        let (_, stride) = spec.pool_stride();
        let enc = Encoder::new(spec).unwrap();
        let base = textured(64, 64, 5);
        let a = enc.encode(&Frame::new(base.clone(), 0, "a")).unwrap();

        // wrapped: identical statistics, only zero padding at the border differs
        let wrapped = enc
            .encode(&Frame::new(shift_right(&base, stride as u32, true), 1, "w"))
            .unwrap();
        assert!(interior_shift_error(&a, &wrapped, 1) < 1e-5);

        // edge-filled: normalization statistics move a little
        let filled = enc
            .encode(&Frame::new(shift_right(&base, stride as u32, false), 2, "f"))
            .unwrap();
        let moved = interior_shift_error(&a, &filled, 1);
        assert!(moved < 0.25, "relative diff {moved}");
        assert!(moved < interior_shift_error(&a, &filled, 0));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_kernel = EncoderSpec { kernel: 4, ..small_spec() };
        assert!(matches!(Encoder::new(bad_kernel), Err(Error::InvalidParameter(_))));
        let tiny = EncoderSpec {
            resize: (2, 2),
            h: 1,
            w: 1,
            ..small_spec()
        };
        assert!(matches!(Encoder::new(tiny), Err(Error::InvalidDimensions(_))));
        let indivisible = EncoderSpec { resize: (30, 32), ..small_spec() };
        assert!(Encoder::new(indivisible).is_err());
        let external = EncoderSpec {
            kind: EncoderKind::ExternalFeatures,
            ..small_spec()
        };
        assert!(external.validate().is_ok());
        assert!(Encoder::new(external).is_err());
    }

    #[test]
    fn undecodable_image_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.png");
        fs::write(&p, b"not an image").unwrap();
        assert!(matches!(Frame::open(&p, 0), Err(Error::Decode { .. })));
    }

    #[test]
    fn feature_file_layout() {
        let cube = FeatureCube::new(1, 1, 2, vec![1.0f32, -2.5]).unwrap();
        let bytes = feature_bytes(&cube);
        assert_eq!(&bytes[..4], b"VFT1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..20], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 28);
        assert_eq!(parse_feature_bytes(&bytes).unwrap(), cube);
    }

    #[test]
    fn feature_file_errors_are_distinct() {
        let cube = FeatureCube::new(1, 1, 2, vec![1.0f32, 2.0]).unwrap();
        let good = feature_bytes(&cube);
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(parse_feature_bytes(&magic), Err(Error::BadMagic { .. })));
        let mut version = good.clone();
        version[4] = 2;
        assert!(matches!(parse_feature_bytes(&version), Err(Error::UnsupportedVersion(2))));
        assert!(matches!(parse_feature_bytes(&good[..25]), Err(Error::Truncated { .. })));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(parse_feature_bytes(&long), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn features_round_trip_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cubes: Vec<_> = (0..5)
            .map(|_| FeatureCube::<f32>::random_normal(3, 2, 4, &mut rng).unwrap())
            .collect();
        let manifest = write_features(&cubes, dir.path()).unwrap();
        assert!(dir.path().join("frame_000004.vft").is_file());
        assert_eq!(load_features(&manifest).unwrap(), cubes);
        let text = fs::read_to_string(&manifest).unwrap();
        assert_eq!(text.lines().next(), Some("0\tframe_000000.vft"));
    }

    #[test]
    fn empty_manifest_is_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_features(&[], dir.path()).unwrap();
        assert!(load_features(&manifest).unwrap().is_empty());
    }

    #[test]
    fn mixed_dims_name_the_offending_entry() {
        let dir = tempfile::tempdir().unwrap();
        let a = FeatureCube::<f32>::zeros(2, 2, 2).unwrap();
        let b = FeatureCube::<f32>::zeros(2, 3, 2).unwrap();
        let manifest = write_indexed_features(&[(0, &a), (7, &b)], dir.path()).unwrap();
        match load_features(&manifest) {
            Err(Error::DimMismatch { index, path, .. }) => {
                assert_eq!(index, 7);
                assert!(path.ends_with("frame_000007.vft"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join(MANIFEST_NAME);
        fs::write(&manifest, "3\tframe_000003.vft\t12.5\n").unwrap();
        assert!(matches!(
            load_features(&manifest),
            Err(Error::MissingFile { index: 3, .. })
        ));
    }

    #[test]
    fn manifest_parsing() {
        let text = "0\ta.vft\n\n2\tb.vft\t1.25\n";
        let entries = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].timestamp, Some(1.25));
        assert!(matches!(
            parse_manifest("1\ta\n1\tb\n".as_bytes()),
            Err(Error::Manifest { line: 2, .. })
        ));
        assert!(matches!(
            parse_manifest("x\ta\n".as_bytes()),
            Err(Error::Manifest { line: 1, .. })
        ));
        let mut buf = Vec::new();
        write_manifest(&mut buf, &entries).unwrap();
        assert_eq!(parse_manifest(buf.as_slice()).unwrap(), entries);
    }
}
