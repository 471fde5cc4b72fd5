//! Turns videos into filtered audio-image-text observations and computes
//! dataset statistics over the result.

pub mod analytics;
pub mod border_crop;
pub mod caption;
pub mod error;
pub mod ingest;
pub mod media;
pub mod packer;
pub mod pair_extract;
pub mod par;
pub mod segmenter;
pub mod synth;

pub use error::{Error, Result};
