//! A minimal uncompressed container for synthetic test videos.
//!
//! Layout: one ASCII header line
//! `AVTSYN1 width=W height=H fps=N/D frames=F samples=S video=0|1 audio=0|1\n`
//! followed by `F` RGB24 frames and `S` signed 16-bit little-endian samples
//! (mono, 16 kHz). The decoder side emits exactly what the external decoder
//! contract expects, so fixtures exercise the same process plumbing as real
//! media.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::media::{Fps, SAMPLE_RATE};

const MAGIC: &str = "AVTSYN1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthHeader {
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
    pub frames: u64,
    pub samples: u64,
    pub has_video: bool,
    pub has_audio: bool,
}

impl SynthHeader {
    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64 * 3
    }

    fn line(&self) -> String {
        format!(
            "{MAGIC} width={} height={} fps={} frames={} samples={} video={} audio={}\n",
            self.width,
            self.height,
            self.fps,
            self.frames,
            self.samples,
            self.has_video as u8,
            self.has_audio as u8
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidConfig(format!("bad synthetic header: {m}"));
        let mut parts = line.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad("missing magic"));
        }
        let mut header = SynthHeader {
            width: 0,
            height: 0,
            fps: Fps::integer(1).expect("1 fps is valid"),
            frames: 0,
            samples: 0,
            has_video: false,
            has_audio: false,
        };
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(part))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| bad(part));
            match k {
                "width" => header.width = num(v)? as u32,
                "height" => header.height = num(v)? as u32,
                "fps" => header.fps = Fps::parse(v)?,
                "frames" => header.frames = num(v)?,
                "samples" => header.samples = num(v)?,
                "video" => header.has_video = num(v)? == 1,
                "audio" => header.has_audio = num(v)? == 1,
                _ => return Err(bad(part)),
            }
        }
        Ok(header)
    }

    /// Container duration: the longer of the two streams.
    pub fn duration(&self) -> f64 {
        let video = if self.has_video {
            self.frames as f64 / self.fps.as_f64()
        } else {
            0.0
        };
        let audio = if self.has_audio {
            self.samples as f64 / SAMPLE_RATE as f64
        } else {
            0.0
        };
        video.max(audio)
    }
}

/// Writes a synthetic video. `frame` is called once per frame index and must
/// return exactly `width * height * 3` bytes.
pub fn write_synth<F>(path: &Path, header: &SynthHeader, mut frame: F, audio: &[i16]) -> Result<()>
where
    F: FnMut(u64) -> Vec<u8>,
{
    if header.has_audio && audio.len() as u64 != header.samples {
        return Err(Error::InvalidConfig(
            "audio length does not match header".into(),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(header.line().as_bytes())?;
    if header.has_video {
        for k in 0..header.frames {
            let bytes = frame(k);
            if bytes.len() as u64 != header.frame_bytes() {
                return Err(Error::InvalidConfig(format!(
                    "frame {k} has {} bytes",
                    bytes.len()
                )));
            }
            out.write_all(&bytes)?;
        }
    }
    if header.has_audio {
        for s in audio {
            out.write_all(&s.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<(SynthHeader, BufReader<File>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    Ok((SynthHeader::parse(line.trim_end())?, reader))
}

pub fn read_header(path: &Path) -> Result<SynthHeader> {
    open(path).map(|(h, _)| h)
}

/// Probe report in the `key=value` format the ingest module parses.
pub fn probe_report(path: &Path) -> Result<String> {
    let (h, _) = open(path)?;
    let mut report = String::new();
    if h.has_video {
        report.push_str(&format!(
            "codec_type=video\nwidth={}\nheight={}\nr_frame_rate={}\nnb_frames={}\n",
            h.width, h.height, h.fps, h.frames
        ));
    }
    if h.has_audio {
        report.push_str("codec_type=audio\n");
    }
    report.push_str(&format!("duration={:.6}\n", h.duration()));
    Ok(report)
}

/// Copies the raw RGB24 frame stream to `out`.
pub fn emit_video(path: &Path, out: &mut impl Write) -> Result<()> {
    let (h, reader) = open(path)?;
    if !h.has_video {
        return Err(Error::InvalidConfig("no video stream".into()));
    }
    let copied = std::io::copy(&mut reader.take(h.frames * h.frame_bytes()), out)?;
    if copied != h.frames * h.frame_bytes() {
        return Err(Error::InvalidConfig("truncated video stream".into()));
    }
    Ok(())
}

/// Copies the raw s16le audio stream to `out`.
pub fn emit_audio(path: &Path, out: &mut impl Write) -> Result<()> {
    let (h, mut reader) = open(path)?;
    if !h.has_audio {
        return Err(Error::InvalidConfig("no audio stream".into()));
    }
    if h.has_video {
        std::io::copy(
            &mut (&mut reader).take(h.frames * h.frame_bytes()),
            &mut std::io::sink(),
        )?;
    }
    let copied = std::io::copy(&mut reader.take(h.samples * 2), out)?;
    if copied != h.samples * 2 {
        return Err(Error::InvalidConfig("truncated audio stream".into()));
    }
    Ok(())
}

/// Ready-made fixtures shared by tests, benches and the demo corpus.
pub mod fixtures {
    use super::*;

    /// A square wave that never goes quiet: `|x| = amplitude` everywhere.
    pub fn busy_audio(samples: usize, amplitude: i16) -> Vec<i16> {
        (0..samples)
            .map(|i| {
                if (i / 8) % 2 == 0 {
                    amplitude
                } else {
                    -amplitude
                }
            })
            .collect()
    }

    /// A textured, never-dark frame whose content depends on `scene`.
    pub fn scene_frame(width: u32, height: u32, scene: u32) -> Vec<u8> {
        let mut px = Vec::with_capacity((width * height * 3) as usize);
        for y in 0..height {
            for x in 0..width {
                let v = 60 + ((x * 7 + y * 3 + scene * 97) % 120) as u8;
                let base = [v, v.wrapping_add((scene * 40) as u8 % 60), 200 - v / 2];
                px.extend_from_slice(&base);
            }
        }
        px
    }

    /// Pads a frame with black bars of the given thickness on every side.
    pub fn letterbox(inner: &[u8], width: u32, height: u32, bar: u32) -> Vec<u8> {
        let (ow, oh) = (width + 2 * bar, height + 2 * bar);
        let mut px = vec![0u8; (ow * oh * 3) as usize];
        for y in 0..height {
            let src = &inner[(y * width * 3) as usize..((y + 1) * width * 3) as usize];
            let start = (((y + bar) * ow + bar) * 3) as usize;
            px[start..start + src.len()].copy_from_slice(src);
        }
        px
    }

    /// Single-scene video of `frames` frames with `samples` of busy audio.
    pub fn single_scene(
        path: &Path,
        width: u32,
        height: u32,
        fps: Fps,
        frames: u64,
        samples: u64,
    ) -> Result<()> {
        let header = SynthHeader {
            width,
            height,
            fps,
            frames,
            samples,
            has_video: true,
            has_audio: true,
        };
        let frame = scene_frame(width, height, 0);
        write_synth(
            path,
            &header,
            |_| frame.clone(),
            &busy_audio(samples as usize, 3_000),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip_and_streams() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.avtsyn");
        let header = SynthHeader {
            width: 4,
            height: 2,
            fps: Fps::integer(30).unwrap(),
            frames: 3,
            samples: 5,
            has_video: true,
            has_audio: true,
        };
        write_synth(&path, &header, |k| vec![k as u8; 24], &[1, -2, 3, -4, 5]).unwrap();
        assert_eq!(read_header(&path).unwrap(), header);

        let mut video = Vec::new();
        emit_video(&path, &mut video).unwrap();
        assert_eq!(video.len(), 72);
        assert_eq!(video[24], 1);

        let mut audio = Vec::new();
        emit_audio(&path, &mut audio).unwrap();
        assert_eq!(
            audio,
            [1i16, -2, 3, -4, 5]
                .iter()
                .flat_map(|s| s.to_le_bytes())
                .collect::<Vec<_>>()
        );

        let report = probe_report(&path).unwrap();
        assert!(report.contains("r_frame_rate=30/1"));
        assert!(report.contains("codec_type=audio"));
    }

    #[test]
    fn audio_only_file_has_no_video_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.avtsyn");
        let header = SynthHeader {
            width: 0,
            height: 0,
            fps: Fps::integer(30).unwrap(),
            frames: 0,
            samples: 3,
            has_video: false,
            has_audio: true,
        };
        write_synth(&path, &header, |_| Vec::new(), &[0, 0, 0]).unwrap();
        assert!(!probe_report(&path).unwrap().contains("codec_type=video"));
        assert!(emit_video(&path, &mut Vec::new()).is_err());
    }

    #[test]
    fn letterbox_places_content_in_the_middle() {
        let inner = vec![9u8; 2 * 2 * 3];
        let boxed = fixtures::letterbox(&inner, 2, 2, 1);
        assert_eq!(boxed.len(), 4 * 4 * 3);
        assert_eq!(boxed[0], 0);
        assert_eq!(boxed[(4 + 1) * 3], 9);
    }
}
