use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid audio clip: {0}")]
    InvalidClip(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unreadable media {path}: {reason}")]
    UnreadableMedia { path: PathBuf, reason: String },

    #[error("decoder crashed on {path}: {reason}")]
    DecoderCrash { path: PathBuf, reason: String },

    #[error("border removal leaves {width}x{height}, below the minimum crop side")]
    FrameAllDark { width: u32, height: u32 },

    #[error("crop box {x0},{y0} {w}x{h} is outside a {width}x{height} frame")]
    BoxOutOfBounds {
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("no frame inside window starting at sample {start_sample}")]
    NoFrameInWindow { start_sample: u64 },

    #[error("captioner failure: {0}")]
    CaptionerFailure(String),

    #[error("malformed wav: {0}")]
    MalformedWav(String),

    #[error("wrong wav format: {0}")]
    WrongFormat(String),

    #[error("malformed shard: {0}")]
    MalformedShard(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("all clips are silent (total spectral power is zero)")]
    AllSilent,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("probabilities are not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("zip error: {0}")]
    Zip(#[from] zip::result::ZipError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
