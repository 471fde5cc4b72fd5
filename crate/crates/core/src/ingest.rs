//! Decoding through an external process.
//!
//! The decoder is described by three command templates (probe, video,
//! audio). `{input}` is replaced with the media path and `{self}` with the
//! path of the running executable. Templates are split on whitespace and run
//! without a shell, so paths containing spaces are passed through intact.
//!
//! Contract:
//! - probe prints `key=value` lines; `codec_type=` starts a stream section and
//!   `width`, `height`, `r_frame_rate`, `nb_frames`, `duration` are read;
//! - video writes headerless RGB24 frames at native resolution to stdout;
//! - audio writes headerless s16le mono 16 kHz PCM to stdout.

use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::border_crop::compute_crop_box;
use crate::error::{Error, Result};
use crate::media::{FilterConfig, Fps, FrameBuffer, Timestamp};
use crate::pair_extract::{ExtractedPair, PcmReader, VideoExtractor, VideoSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub fps: Fps,
    pub duration: f64,
    pub src_width: u32,
    pub src_height: u32,
    /// Frame count when the probe reports it.
    pub frame_count: Option<u64>,
}

impl VideoMeta {
    /// Index of the frame used as the border reference.
    pub fn middle_frame_index(&self) -> u64 {
        match self.frame_count {
            Some(n) => n / 2,
            None => (self.duration * self.fps.as_f64() / 2.0).floor() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub probe: String,
    pub video: String,
    pub audio: String,
}

impl Default for DecoderSpec {
    fn default() -> Self {
        Self {
            probe: "ffprobe -v error -show_entries \
                    stream=codec_type,width,height,r_frame_rate,nb_frames:format=duration \
                    -of default=noprint_wrappers=1 {input}"
                .into(),
            video: "ffmpeg -v error -nostdin -i {input} -map 0:v:0 -f rawvideo -pix_fmt rgb24 -".into(),
            audio: "ffmpeg -v error -nostdin -i {input} -map 0:a:0 -f s16le -acodec pcm_s16le -ac 1 -ar 16000 -"
                .into(),
        }
    }
}

impl DecoderSpec {
    /// Decoder for the built-in synthetic container, served by the `avt` binary itself.
    pub fn synthetic() -> Self {
        Self {
            probe: "{self} synth-decode probe {input}".into(),
            video: "{self} synth-decode video {input}".into(),
            audio: "{self} synth-decode audio {input}".into(),
        }
    }

    fn command(template: &str, input: &Path) -> Result<Command> {
        let self_exe = std::env::current_exe().ok();
        let mut args = template.split_whitespace().map(|token| {
            let mut token = token.replace("{input}", &input.to_string_lossy());
            if let Some(exe) = &self_exe {
                token = token.replace("{self}", &exe.to_string_lossy());
            }
            token
        });
        let program = args
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty decoder command template".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args);
        Ok(cmd)
    }
}

/// Video id derived from a media path: the file stem.
pub fn video_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

#[derive(Debug, Default)]
struct StreamInfo {
    codec_type: String,
    width: Option<u32>,
    height: Option<u32>,
    fps: Option<Fps>,
    frames: Option<u64>,
}

/// Parses a probe report into stream metadata.
pub fn parse_probe(path: &Path, report: &str) -> Result<VideoMeta> {
    let unreadable = |reason: &str| Error::UnreadableMedia {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let mut streams: Vec<StreamInfo> = Vec::new();
    let mut duration: Option<f64> = None;
    for line in report.lines() {
        let Some((key, value)) = line.trim().split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "codec_type" => streams.push(StreamInfo {
                codec_type: value.to_string(),
                ..Default::default()
            }),
            "duration" => {
                if let Ok(d) = value.parse::<f64>() {
                    if d.is_finite() && d >= 0.0 {
                        duration = Some(duration.map_or(d, |cur: f64| cur.max(d)));
                    }
                }
            }
            key => {
                let Some(stream) = streams.last_mut() else {
                    continue;
                };
                match key {
                    "width" => stream.width = value.parse().ok(),
                    "height" => stream.height = value.parse().ok(),
                    "r_frame_rate" => stream.fps = Fps::parse(value).ok(),
                    "nb_frames" => stream.frames = value.parse().ok(),
                    _ => {}
                }
            }
        }
    }
    let video = streams
        .iter()
        .find(|s| s.codec_type == "video")
        .ok_or_else(|| unreadable("no video stream"))?;
    if !streams.iter().any(|s| s.codec_type == "audio") {
        return Err(unreadable("no audio stream"));
    }
    let (Some(width), Some(height), Some(fps)) = (video.width, video.height, video.fps) else {
        return Err(unreadable("video stream lacks dimensions or frame rate"));
    };
    if width == 0 || height == 0 {
        return Err(unreadable("zero-sized video"));
    }
    Ok(VideoMeta {
        video_id: video_id_for(path),
        fps,
        duration: duration.ok_or_else(|| unreadable("no duration"))?,
        src_width: width,
        src_height: height,
        frame_count: video.frames,
    })
}

/// Asks the decoder for stream metadata. Corrupt, empty or single-stream
/// files fail with [`Error::UnreadableMedia`].
pub fn probe(path: &Path, spec: &DecoderSpec) -> Result<VideoMeta> {
    let unreadable = |reason: String| Error::UnreadableMedia {
        path: path.to_path_buf(),
        reason,
    };
    let len = std::fs::metadata(path)
        .map_err(|e| unreadable(e.to_string()))?
        .len();
    if len == 0 {
        return Err(unreadable("empty file".into()));
    }
    let output = DecoderSpec::command(&spec.probe, path)?
        .stdin(Stdio::null())
        .output()
        .map_err(|e| unreadable(format!("cannot run probe: {e}")))?;
    if !output.status.success() {
        return Err(unreadable(format!(
            "probe exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    parse_probe(path, &String::from_utf8_lossy(&output.stdout))
}

/// A running decoder process with its stdout exposed.
struct DecoderProcess {
    child: Child,
    stderr: Option<JoinHandle<String>>,
    path: PathBuf,
}

impl DecoderProcess {
    fn spawn(template: &str, path: &Path) -> Result<(Self, ChildStdout)> {
        let mut child = DecoderSpec::command(template, path)?
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::DecoderCrash {
                path: path.to_path_buf(),
                reason: format!("spawn failed: {e}"),
            })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut err = child.stderr.take().expect("stderr is piped");
        // drained on a side thread so a chatty decoder never blocks on a full pipe
        let stderr = std::thread::spawn(move || {
            let mut text = String::new();
            let _ = err.read_to_string(&mut text);
            text
        });
        Ok((
            Self {
                child,
                stderr: Some(stderr),
                path: path.to_path_buf(),
            },
            stdout,
        ))
    }

    fn wait(mut self) -> Result<()> {
        let status = self.child.wait()?;
        let stderr = self
            .stderr
            .take()
            .and_then(|h| h.join().ok())
            .unwrap_or_default();
        if !status.success() {
            return Err(Error::DecoderCrash {
                path: self.path.clone(),
                reason: format!("decoder exited with {status}: {}", stderr.trim()),
            });
        }
        Ok(())
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        if let Some(h) = self.stderr.take() {
            let _ = h.join();
        }
    }
}

/// Pull-based iterator over decoded frames; frame `k` is stamped `k / fps`.
pub struct FrameStream {
    reader: BufReader<ChildStdout>,
    width: u32,
    height: u32,
    fps: Fps,
    next_index: u64,
    done: bool,
}

impl FrameStream {
    fn read_frame(&mut self) -> Result<Option<FrameBuffer>> {
        let len = self.width as usize * self.height as usize * 3;
        let mut buf = vec![0u8; len];
        let mut filled = 0;
        while filled < len {
            match self.reader.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < len {
            return Err(Error::DecoderCrash {
                path: PathBuf::new(),
                reason: format!(
                    "truncated frame {} ({filled} of {len} bytes)",
                    self.next_index
                ),
            });
        }
        let frame = FrameBuffer::new(
            self.width,
            self.height,
            buf,
            Timestamp::new(self.next_index, self.fps),
        )?;
        self.next_index += 1;
        Ok(Some(frame))
    }
}

impl Iterator for FrameStream {
    type Item = Result<FrameBuffer>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_frame() {
            Ok(Some(f)) => Some(Ok(f)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Both decoder channels of one video.
pub struct DecodedStreams {
    pub frames: FrameStream,
    pub audio: PcmReader<BufReader<ChildStdout>>,
    video_proc: DecoderProcess,
    audio_proc: DecoderProcess,
}

impl DecodedStreams {
    /// Drains what is left of both channels and checks that both decoders exited cleanly.
    pub fn finish(self) -> Result<()> {
        let DecodedStreams {
            frames,
            mut audio,
            video_proc,
            audio_proc,
        } = self;
        let mut rest = frames.reader;
        std::io::copy(&mut rest, &mut std::io::sink())?;
        audio.drain()?;
        let v = video_proc.wait();
        let a = audio_proc.wait();
        v.and(a)
    }

    pub fn abort(self) {
        self.video_proc.kill();
        self.audio_proc.kill();
    }
}

/// Starts the video and audio decoders for `path`.
pub fn open_streams(path: &Path, spec: &DecoderSpec, meta: &VideoMeta) -> Result<DecodedStreams> {
    let (video_proc, video_out) = DecoderProcess::spawn(&spec.video, path)?;
    let (audio_proc, audio_out) = match DecoderProcess::spawn(&spec.audio, path) {
        Ok(pair) => pair,
        Err(e) => {
            video_proc.kill();
            return Err(e);
        }
    };
    Ok(DecodedStreams {
        frames: FrameStream {
            reader: BufReader::with_capacity(1 << 20, video_out),
            width: meta.src_width,
            height: meta.src_height,
            fps: meta.fps,
            next_index: 0,
            done: false,
        },
        audio: PcmReader::new(BufReader::new(audio_out)),
        video_proc,
        audio_proc,
    })
}

/// Decodes frames up to the middle of the video and returns the middle one
/// (or the last frame if the stream is shorter than the probe claimed).
pub fn read_middle_frame(path: &Path, spec: &DecoderSpec, meta: &VideoMeta) -> Result<FrameBuffer> {
    let (proc, out) = DecoderProcess::spawn(&spec.video, path)?;
    let mut stream = FrameStream {
        reader: BufReader::with_capacity(1 << 20, out),
        width: meta.src_width,
        height: meta.src_height,
        fps: meta.fps,
        next_index: 0,
        done: false,
    };
    let target = meta.middle_frame_index();
    let mut last = None;
    for frame in stream.by_ref() {
        let frame = match frame {
            Ok(f) => f,
            Err(e) => {
                proc.kill();
                return Err(with_path(e, path));
            }
        };
        let reached = frame.timestamp().index >= target;
        last = Some(frame);
        if reached {
            break;
        }
    }
    match last {
        Some(frame) if frame.timestamp().index >= target => {
            proc.kill();
            Ok(frame)
        }
        other => {
            proc.wait()?;
            other.ok_or_else(|| Error::UnreadableMedia {
                path: path.to_path_buf(),
                reason: "no frames decoded".into(),
            })
        }
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::DecoderCrash { reason, .. } => Error::DecoderCrash {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    }
}

/// Full extraction for one video file: probe, border detection on the middle
/// frame, then a single streaming pass over both channels. Pairs are handed to
/// `sink` as they are produced; on error the caller must discard them.
pub fn extract_video<F>(
    path: &Path,
    spec: &DecoderSpec,
    config: &FilterConfig,
    sink: F,
) -> Result<VideoSummary>
where
    F: FnMut(ExtractedPair) -> Result<()>,
{
    let meta = probe(path, spec)?;
    let middle = read_middle_frame(path, spec, &meta)?;
    let crop = compute_crop_box(&middle, config.border_threshold, config.min_crop_dim)?;
    log::debug!(
        "{}: crop box {:?} from frame {}",
        meta.video_id,
        crop,
        middle.timestamp().index
    );

    let mut streams = open_streams(path, spec, &meta)?;
    let result = drive(&mut streams, &meta, crop, config, sink);
    match result {
        Ok(summary) => {
            streams.finish().map_err(|e| with_path(e, path))?;
            Ok(summary)
        }
        Err(e) => {
            streams.abort();
            Err(with_path(e, path))
        }
    }
}

fn drive<F>(
    streams: &mut DecodedStreams,
    meta: &VideoMeta,
    crop: crate::border_crop::CropBox,
    config: &FilterConfig,
    sink: F,
) -> Result<VideoSummary>
where
    F: FnMut(ExtractedPair) -> Result<()>,
{
    let mut extractor = VideoExtractor::new(
        meta.video_id.clone(),
        meta.fps,
        crop,
        config,
        &mut streams.audio,
        sink,
    );
    for frame in streams.frames.by_ref() {
        extractor.push_frame(frame?)?;
    }
    extractor.finish().map(|(summary, _)| summary)
}
