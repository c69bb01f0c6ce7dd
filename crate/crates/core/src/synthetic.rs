//! Seeded synthetic feature streams with annotator-style labels.
//!
//! A handful of background scenes are shown in segments, drifting by circular
//! translation with additive noise. Localized objects are sometimes pasted
//! into a segment; the first frames of an object that has never been seen
//! before carry annotator votes, later reappearances carry none.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{circular_shift, FeatureCube, ShiftIndex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: (usize, usize, usize),
    pub seed: u64,
    pub scenes: usize,
    pub objects: usize,
    pub stream_len: usize,
    /// Short-term corpus size (background-only frames).
    pub corpus_len: usize,
    pub segment_len: (usize, usize),
    pub noise: f64,
    pub object_size: usize,
    /// Frames per one-column camera drift inside a segment; 0 keeps the view fixed.
    pub drift_period: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dims: (16, 8, 8),
            seed: 11,
            scenes: 4,
            objects: 10,
            stream_len: 200,
            corpus_len: 912,
            segment_len: (8, 20),
            noise: 0.1,
            object_size: 3,
            drift_period: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSuite {
    pub background: Vec<FeatureCube<f32>>,
    pub stream: Vec<FeatureCube<f32>>,
    pub annotator_counts: Vec<u32>,
}

fn add_noise(x: &FeatureCube<f32>, sigma: f64, rng: &mut ChaCha8Rng) -> Result<FeatureCube<f32>> {
    let (c, h, w) = x.shape();
    let noise = FeatureCube::<f32>::random_normal(c, h, w, rng)?;
    let data = x
        .as_slice()
        .iter()
        .zip(noise.as_slice())
        .map(|(a, n)| a + sigma as f32 * n)
        .collect();
    FeatureCube::new(c, h, w, data)
}

impl SyntheticSuite {
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        let (c, h, w) = spec.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let scenes = (0..spec.scenes.max(1))
            .map(|_| FeatureCube::<f32>::random_normal(c, h, w, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let size = spec.object_size.clamp(1, h.min(w));
        let objects = (0..spec.objects)
            .map(|_| {
                let pattern = FeatureCube::<f32>::random_normal(c, size, size, &mut rng)?;
                Ok(pattern.scaled(3.0))
            })
            .collect::<Result<Vec<_>>>()?;

        let random_shift =
            |rng: &mut ChaCha8Rng| ShiftIndex::new(rng.random_range(0..h) as i64, rng.random_range(0..w) as i64, h, w);

        let mut background = Vec::with_capacity(spec.corpus_len);
        for _ in 0..spec.corpus_len {
            let scene = scenes.choose(&mut rng).expect("at least one scene");
            let s = random_shift(&mut rng);
            background.push(add_noise(&circular_shift(scene, s), spec.noise, &mut rng)?);
        }

        let mut stream = Vec::with_capacity(spec.stream_len);
        let mut counts = Vec::with_capacity(spec.stream_len);
        let mut seen = vec![false; objects.len()];
        let (lo, hi) = (spec.segment_len.0.max(1), spec.segment_len.1.max(spec.segment_len.0.max(1)));
        while stream.len() < spec.stream_len {
            let scene = &scenes[rng.random_range(0..scenes.len())];
            let seg_len = rng.random_range(lo..=hi);
            let base = random_shift(&mut rng);
            let object = if !objects.is_empty() && rng.random_bool(0.5) {
                let unseen: Vec<usize> = (0..objects.len()).filter(|&o| !seen[o]).collect();
                let pick = if !unseen.is_empty() && rng.random_bool(0.6) {
                    *unseen.choose(&mut rng).expect("non-empty")
                } else {
                    rng.random_range(0..objects.len())
                };
                Some((pick, rng.random_range(0..h), rng.random_range(0..w)))
            } else {
                None
            };
            let novel = object.map(|(o, _, _)| !seen[o]).unwrap_or(false);
            if let Some((o, _, _)) = object {
                seen[o] = true;
            }
            let mut composed = scene.clone();
            if let Some((o, oi, oj)) = object {
                let pat = &objects[o];
                for k in 0..c {
                    for i in 0..size {
                        for j in 0..size {
                            let (ti, tj) = ((oi + i) % h, (oj + j) % w);
                            composed.set(k, ti, tj, composed.get(k, ti, tj) + pat.get(k, i, j));
                        }
                    }
                }
            }
            for f in 0..seg_len {
                if stream.len() >= spec.stream_len {
                    break;
                }
                let step = f.checked_div(spec.drift_period).unwrap_or(0);
                let drift = ShiftIndex::new(0, step as i64, h, w);
                let frame = circular_shift(&composed, base.compose(drift, h, w));
                stream.push(add_noise(&frame, spec.noise, &mut rng)?);
                counts.push(match (novel, f) {
                    (true, 0) => 2,
                    (true, 1..=2) => 1,
                    _ => 0,
                });
            }
        }
        Ok(Self {
            background,
            stream,
            annotator_counts: counts,
        })
    }
}
