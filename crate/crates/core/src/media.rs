//! Shared frame and audio types.
//!
//! Frames are RGB24 row-major buffers tagged with an exact timestamp
//! (frame index over a rational frame rate). Audio clips are always one
//! second of mono signed 16-bit PCM at 16 kHz.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Audio sample rate of every stream handled by the pipeline.
pub const SAMPLE_RATE: u32 = 16_000;

/// Samples in one clip (one second at [`SAMPLE_RATE`]).
pub const CLIP_SAMPLES: usize = SAMPLE_RATE as usize;

/// A frame rate as an exact fraction `num / den` frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fps {
    num: u32,
    den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidConfig(format!(
                "frame rate {num}/{den} must be positive"
            )));
        }
        let g = gcd(num as u64, den as u64) as u32;
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// First audio sample at or after the presentation time of `frame`.
    pub fn frame_to_sample_ceil(self, frame: u64) -> u64 {
        let scaled = frame as u128 * SAMPLE_RATE as u128 * self.den as u128;
        scaled.div_ceil(self.num as u128) as u64
    }

    /// Presentation time of `frame` expressed in (fractional) samples, scaled by `num`.
    ///
    /// Comparing `frame_time_scaled(k)` against `sample * num` is exact.
    pub(crate) fn frame_time_scaled(self, frame: u64) -> u128 {
        frame as u128 * SAMPLE_RATE as u128 * self.den as u128
    }

    /// Number of frames whose presentation time is strictly before `sample`.
    pub fn frames_before_sample(self, sample: u64) -> u64 {
        // k * 16000 * den < sample * num
        let lhs = sample as u128 * self.num as u128;
        let per = SAMPLE_RATE as u128 * self.den as u128;
        lhs.div_ceil(per) as u64
    }

    /// Parses `"30"`, `"30000/1001"` or `"29.97"`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidConfig(format!("unparseable frame rate {text:?}"));
        if let Some((n, d)) = text.split_once('/') {
            let n: u32 = n.trim().parse().map_err(|_| bad())?;
            let d: u32 = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d);
        }
        if let Ok(n) = text.parse::<u32>() {
            return Self::new(n, 1);
        }
        let value: f64 = text.parse().map_err(|_| bad())?;
        if !value.is_finite() || value <= 0.0 {
            return Err(bad());
        }
        Self::new((value * 1000.0).round() as u32, 1000)
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Exact presentation time of a frame: `index / fps` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    pub index: u64,
    pub fps: Fps,
}

impl Timestamp {
    pub fn new(index: u64, fps: Fps) -> Self {
        Self { index, fps }
    }

    pub fn seconds(self) -> f64 {
        self.index as f64 * self.fps.den as f64 / self.fps.num as f64
    }
}

/// One decoded RGB24 frame.
///
/// Pixel data is shared behind an `Arc`, so cloning a frame is cheap.
#[derive(Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    width: u32,
    height: u32,
    pixels: Arc<[u8]>,
    timestamp: Timestamp,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, timestamp: Timestamp) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero dimension {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} frame needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels: pixels.into(),
            timestamp,
        })
    }

    /// A frame with every channel byte set to `level`.
    pub fn filled(width: u32, height: u32, level: u8, timestamp: Timestamp) -> Result<Self> {
        let len = width as usize * height as usize * 3;
        Self::new(width, height, vec![level; len], timestamp)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn with_timestamp(mut self, timestamp: Timestamp) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// RGB triple at column `x`, row `y`.
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let stride = self.width as usize * 3;
        let start = y as usize * stride;
        &self.pixels[start..start + stride]
    }

    pub fn same_dimensions(&self, other: &FrameBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl fmt::Debug for FrameBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("timestamp", &self.timestamp)
            .finish_non_exhaustive()
    }
}

/// Arithmetic mean over every channel byte of the frame.
pub fn mean_pixel(frame: &FrameBuffer) -> f64 {
    let sum: u64 = frame.pixels().iter().map(|&b| b as u64).sum();
    sum as f64 / frame.pixels().len() as f64
}

/// Exactly one second of mono 16 kHz PCM.
#[derive(Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Arc<[i16]>,
    start_sample: u64,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>, start_sample: u64) -> Result<Self> {
        if samples.len() != CLIP_SAMPLES {
            return Err(Error::InvalidClip(format!(
                "clip must hold {CLIP_SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            samples: samples.into(),
            start_sample,
        })
    }

    pub fn from_slice(samples: &[i16], start_sample: u64) -> Result<Self> {
        Self::new(samples.to_vec(), start_sample)
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    /// Offset of the first sample within the source video's audio stream.
    pub fn start_sample(&self) -> u64 {
        self.start_sample
    }

    pub fn start_time(&self) -> f64 {
        self.start_sample as f64 / SAMPLE_RATE as f64
    }
}

impl fmt::Debug for AudioClip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AudioClip")
            .field("start_sample", &self.start_sample)
            .finish_non_exhaustive()
    }
}

/// Every numeric threshold used while extracting pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Border rows/columns with no channel above this level are peeled.
    pub border_threshold: u8,
    /// Mean squared difference above which consecutive frames start a new fragment.
    pub cut_threshold: f64,
    /// Samples with `|x|` above this level are not silent.
    pub silence_amp: u16,
    /// Seconds of continuous silence that disqualify a clip.
    pub silence_dur: f64,
    /// Images whose mean pixel does not exceed this are discarded.
    pub dark_mean: f64,
    pub keep_every: usize,
    pub out_size: u32,
    pub min_crop_dim: u32,
    /// Extra frames compared past a candidate cut; 0 disables lookahead.
    pub fade_lookahead: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            border_threshold: 15,
            cut_threshold: 90.0,
            silence_amp: 100,
            silence_dur: 0.5,
            dark_mean: 10.0,
            keep_every: 3,
            out_size: 512,
            min_crop_dim: 64,
            fade_lookahead: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.cut_threshold >= 0.0) {
            return bad("cut_threshold must be non-negative");
        }
        if !(self.silence_dur >= 0.0) {
            return bad("silence_dur must be non-negative");
        }
        if !(self.dark_mean >= 0.0) {
            return bad("dark_mean must be non-negative");
        }
        if self.keep_every < 1 {
            return bad("keep_every must be at least 1");
        }
        if self.out_size < 1 {
            return bad("out_size must be at least 1");
        }
        if self.min_crop_dim < 1 {
            return bad("min_crop_dim must be at least 1");
        }
        Ok(())
    }

    /// Minimum silent run length, in samples.
    pub fn silence_run(&self) -> usize {
        (self.silence_dur * SAMPLE_RATE as f64).round() as usize
    }
}
