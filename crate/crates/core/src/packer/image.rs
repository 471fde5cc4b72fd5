use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat as CodecFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Fps, FrameBuffer, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum ImageFormat {
    Jpeg { quality: u8 },
    Png,
}

impl Default for ImageFormat {
    fn default() -> Self {
        Self::Jpeg { quality: 90 }
    }
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Jpeg { .. } => "jpg",
            Self::Png => "png",
        }
    }
}

/// An image file's bytes together with its extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub extension: String,
    pub bytes: Vec<u8>,
}

pub fn encode_image(frame: &FrameBuffer, format: ImageFormat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        ImageFormat::Jpeg { quality } => {
            if !(1..=100).contains(&quality) {
                return Err(Error::InvalidConfig(format!(
                    "jpeg quality {quality} outside 1..=100"
                )));
            }
            JpegEncoder::new_with_quality(&mut out, quality).write_image(
                frame.pixels(),
                frame.width(),
                frame.height(),
                ExtendedColorType::Rgb8,
            )?;
        }
        ImageFormat::Png => {
            PngEncoder::new(&mut out).write_image(
                frame.pixels(),
                frame.width(),
                frame.height(),
                ExtendedColorType::Rgb8,
            )?;
        }
    }
    Ok(out)
}

/// Decodes a JPEG or PNG into an RGB24 frame stamped at frame 0.
pub fn decode_image(bytes: &[u8]) -> Result<FrameBuffer> {
    let format = image::guess_format(bytes)?;
    if !matches!(format, CodecFormat::Jpeg | CodecFormat::Png) {
        return Err(Error::InvalidFrame(format!(
            "unsupported image format {format:?}"
        )));
    }
    let img = image::load(Cursor::new(bytes), format)?.to_rgb8();
    let (w, h) = img.dimensions();
    FrameBuffer::new(
        w,
        h,
        img.into_raw(),
        Timestamp::new(0, Fps::integer(1).expect("1 fps is valid")),
    )
}
