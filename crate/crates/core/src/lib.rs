//! Visual memory for online novelty scoring of video feature streams.

pub mod ablation;
pub mod bench;
pub mod encoder;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use memory::{MemoryBank, ReadResult, WritePolicy};
pub use numerics::{FeatureCube, ShiftIndex};
pub use scalar::Scalar;

pub type FeatureCube32 = FeatureCube<f32>;
pub type FeatureCube64 = FeatureCube<f64>;
pub type MemoryBank32 = MemoryBank<f32>;
pub type MemoryBank64 = MemoryBank<f64>;
