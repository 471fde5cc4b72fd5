//! Audio-image pair extraction within fragments.
//!
//! Each fragment is cut into consecutive one-second audio windows starting at
//! the fragment's first sample; a trailing partial second is ignored. The
//! frame closest to the middle of each window becomes its image. Windows with
//! a long enough silent run, or whose image is too dark, are dropped, and of
//! the survivors only every `keep_every`-th one is kept.

use std::io::Read;

use crate::border_crop::{apply_crop, CropBox};
use crate::error::{Error, Result};
use crate::media::{mean_pixel, AudioClip, FilterConfig, Fps, FrameBuffer, CLIP_SAMPLES};
use crate::segmenter::CutDetector;

const WINDOW: u64 = CLIP_SAMPLES as u64;

/// A kept observation before a global id has been assigned.
#[derive(Debug, Clone)]
pub struct ExtractedPair {
    pub video_id: String,
    pub fragment_index: usize,
    pub window_index: usize,
    pub image: FrameBuffer,
    pub audio: AudioClip,
}

/// A kept observation with its dataset-wide id.
#[derive(Debug, Clone)]
pub struct PairRecord {
    pub global_id: u64,
    pub video_id: String,
    pub fragment_index: usize,
    pub window_index: usize,
    pub image: FrameBuffer,
    pub audio: AudioClip,
}

/// Splits fragment audio into consecutive one-second clips.
///
/// `start_sample` is the offset of `samples[0]` in the source stream and is
/// carried into each clip. A remainder shorter than a second is dropped.
pub fn window_audio(samples: &[i16], start_sample: u64) -> Vec<AudioClip> {
    samples
        .chunks_exact(CLIP_SAMPLES)
        .enumerate()
        .map(|(i, chunk)| {
            AudioClip::from_slice(chunk, start_sample + (i * CLIP_SAMPLES) as u64)
                .expect("chunk has exactly one second of samples")
        })
        .collect()
}

/// Distance of `frame` to the middle of the window starting at `window_start`,
/// scaled by the frame-rate numerator so the comparison stays in integers.
fn distance_to_middle(fps: Fps, frame: u64, window_start: u64) -> u128 {
    let middle = (window_start + WINDOW / 2) as u128 * fps.num() as u128;
    fps.frame_time_scaled(frame).abs_diff(middle)
}

fn frame_in_window(fps: Fps, frame: u64, window_start: u64) -> bool {
    let t = fps.frame_time_scaled(frame);
    let lo = window_start as u128 * fps.num() as u128;
    let hi = (window_start + WINDOW) as u128 * fps.num() as u128;
    t >= lo && t < hi
}

/// Picks the frame nearest to the middle of the one-second window starting at
/// sample `window_start`. Only frames inside the window qualify; ties go to
/// the earlier frame.
pub fn middle_frame(frames: &[FrameBuffer], window_start: u64) -> Result<FrameBuffer> {
    let mut best: Option<(u128, &FrameBuffer)> = None;
    for frame in frames {
        let ts = frame.timestamp();
        if !frame_in_window(ts.fps, ts.index, window_start) {
            continue;
        }
        let d = distance_to_middle(ts.fps, ts.index, window_start);
        if best.map_or(true, |(bd, bf)| {
            d < bd || (d == bd && ts.index < bf.timestamp().index)
        }) {
            best = Some((d, frame));
        }
    }
    best.map(|(_, f)| f.clone()).ok_or(Error::NoFrameInWindow {
        start_sample: window_start,
    })
}

/// True when the clip contains at least `min_run` consecutive samples with
/// `|x| <= silence_amp`.
pub fn is_silent(clip: &AudioClip, silence_amp: u16, min_run: usize) -> bool {
    if min_run == 0 {
        return true;
    }
    let mut run = 0usize;
    for &s in clip.samples() {
        if s.unsigned_abs() > silence_amp {
            run = 0;
        } else {
            run += 1;
            if run >= min_run {
                return true;
            }
        }
    }
    false
}

/// True when the image's mean pixel does not surpass `dark_mean`.
pub fn is_dark(image: &FrameBuffer, dark_mean: f64) -> bool {
    mean_pixel(image) <= dark_mean
}

/// Keeps positions `0, keep_every, 2 * keep_every, ...`.
pub fn subsample<T>(items: Vec<T>, keep_every: usize) -> Vec<T> {
    let step = keep_every.max(1);
    items.into_iter().step_by(step).collect()
}

/// Crops the centered square of side `min(width, height)` and rescales it to
/// `out_size x out_size` with bilinear interpolation (pixel-center aligned).
pub fn center_crop_resize(frame: &FrameBuffer, out_size: u32) -> FrameBuffer {
    let (w, h) = (frame.width(), frame.height());
    let side = w.min(h);
    let ox = (w - side) / 2;
    let oy = (h - side) / 2;
    let out = out_size as usize;
    let mut px = vec![0u8; out * out * 3];

    if side == out_size {
        for y in 0..out {
            let row = frame.row(oy + y as u32);
            let src = &row[ox as usize * 3..(ox + side) as usize * 3];
            px[y * out * 3..(y + 1) * out * 3].copy_from_slice(src);
        }
        return FrameBuffer::new(out_size, out_size, px, frame.timestamp())
            .expect("output buffer sized for out_size");
    }

    let scale = side as f64 / out_size as f64;
    let last = (side - 1) as f64;
    // per-axis source indices and weights, shared by both axes since the crop is square
    let taps: Vec<(usize, usize, f32)> = (0..out)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(side as usize - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect();

    let src = frame.pixels();
    let stride = w as usize * 3;
    let at = |x: usize, y: usize, c: usize| -> f32 {
        src[(oy as usize + y) * stride + (ox as usize + x) * 3 + c] as f32
    };
    for (y, &(y0, y1, fy)) in taps.iter().enumerate() {
        for (x, &(x0, x1, fx)) in taps.iter().enumerate() {
            for c in 0..3 {
                let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                px[(y * out + x) * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    FrameBuffer::new(out_size, out_size, px, frame.timestamp())
        .expect("output buffer sized for out_size")
}

/// Sequential access to a mono PCM stream by absolute sample offset.
pub trait SampleSource {
    /// Returns samples `[start, end)`, or `None` if the stream ends first.
    /// Successive calls must not go backwards.
    fn read_range(&mut self, start: u64, end: u64) -> Result<Option<Vec<i16>>>;
}

impl<T: SampleSource + ?Sized> SampleSource for &mut T {
    fn read_range(&mut self, start: u64, end: u64) -> Result<Option<Vec<i16>>> {
        (**self).read_range(start, end)
    }
}

/// An in-memory PCM stream.
#[derive(Debug, Clone)]
pub struct MemorySource {
    samples: Vec<i16>,
}

impl MemorySource {
    pub fn new(samples: Vec<i16>) -> Self {
        Self { samples }
    }
}

impl SampleSource for MemorySource {
    fn read_range(&mut self, start: u64, end: u64) -> Result<Option<Vec<i16>>> {
        if end as usize > self.samples.len() {
            return Ok(None);
        }
        Ok(Some(self.samples[start as usize..end as usize].to_vec()))
    }
}

/// Reads signed 16-bit little-endian PCM from a byte stream, discarding
/// anything before the requested offset.
pub struct PcmReader<R> {
    inner: R,
    position: u64,
    exhausted: bool,
}

impl<R: Read> PcmReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            position: 0,
            exhausted: false,
        }
    }

    pub fn into_inner(self) -> R {
        self.inner
    }

    /// Reads up to `n` samples; fewer only at end of stream.
    fn read_samples(&mut self, n: usize) -> Result<Vec<i16>> {
        let mut bytes = vec![0u8; n * 2];
        let mut filled = 0;
        while filled < bytes.len() {
            match self.inner.read(&mut bytes[filled..]) {
                Ok(0) => {
                    self.exhausted = true;
                    break;
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let whole = filled / 2;
        self.position += whole as u64;
        Ok(bytes[..whole * 2]
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect())
    }

    /// Drains the rest of the stream and returns how many samples it held in total.
    pub fn drain(&mut self) -> Result<u64> {
        while !self.exhausted {
            self.read_samples(CLIP_SAMPLES)?;
        }
        Ok(self.position)
    }
}

impl<R: Read> SampleSource for PcmReader<R> {
    fn read_range(&mut self, start: u64, end: u64) -> Result<Option<Vec<i16>>> {
        debug_assert!(start >= self.position, "PcmReader cannot seek backwards");
        while self.position < start && !self.exhausted {
            let skip = (start - self.position).min(CLIP_SAMPLES as u64) as usize;
            self.read_samples(skip)?;
        }
        if self.position < start {
            return Ok(None);
        }
        let want = (end - start) as usize;
        let got = self.read_samples(want)?;
        Ok((got.len() == want).then_some(got))
    }
}

/// Per-fragment accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FragmentSummary {
    pub fragment_index: usize,
    pub start_frame: u64,
    pub end_frame: u64,
    pub windows: u64,
    pub silence_dropped: u64,
    pub dark_dropped: u64,
    pub no_frame_dropped: u64,
    pub subsample_dropped: u64,
    pub emitted: u64,
}

impl FragmentSummary {
    /// Every window is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.windows
            == self.silence_dropped
                + self.dark_dropped
                + self.no_frame_dropped
                + self.subsample_dropped
                + self.emitted
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub frames: u64,
    pub fragments: Vec<FragmentSummary>,
}

impl VideoSummary {
    pub fn total(&self) -> FragmentSummary {
        self.fragments
            .iter()
            .fold(FragmentSummary::default(), |mut acc, f| {
                acc.windows += f.windows;
                acc.silence_dropped += f.silence_dropped;
                acc.dark_dropped += f.dark_dropped;
                acc.no_frame_dropped += f.no_frame_dropped;
                acc.subsample_dropped += f.subsample_dropped;
                acc.emitted += f.emitted;
                acc
            })
    }
}

struct OpenFragment {
    summary: FragmentSummary,
    start_sample: u64,
    next_window: u64,
    best: Option<(u128, FrameBuffer)>,
    survivors: usize,
}

impl OpenFragment {
    fn new(index: usize, start_frame: u64, fps: Fps) -> Self {
        Self {
            summary: FragmentSummary {
                fragment_index: index,
                start_frame,
                end_frame: start_frame,
                ..FragmentSummary::default()
            },
            start_sample: fps.frame_to_sample_ceil(start_frame),
            next_window: 0,
            best: None,
            survivors: 0,
        }
    }

    fn window_start(&self) -> u64 {
        self.start_sample + self.next_window * WINDOW
    }
}

/// Streams cropped frames through cut detection and window extraction for one video.
pub struct VideoExtractor<'a, S, F> {
    video_id: String,
    config: &'a FilterConfig,
    crop: CropBox,
    fps: Fps,
    detector: CutDetector,
    audio: S,
    audio_exhausted: bool,
    sink: F,
    current: Option<OpenFragment>,
    finished: Vec<FragmentSummary>,
    frames_seen: u64,
}

impl<'a, S, F> VideoExtractor<'a, S, F>
where
    S: SampleSource,
    F: FnMut(ExtractedPair) -> Result<()>,
{
    pub fn new(
        video_id: impl Into<String>,
        fps: Fps,
        crop: CropBox,
        config: &'a FilterConfig,
        audio: S,
        sink: F,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            config,
            crop,
            fps,
            detector: CutDetector::new(config.cut_threshold, config.fade_lookahead),
            audio,
            audio_exhausted: false,
            sink,
            current: None,
            finished: Vec::new(),
            frames_seen: 0,
        }
    }

    /// Feeds the next decoded (uncropped) frame.
    pub fn push_frame(&mut self, frame: FrameBuffer) -> Result<()> {
        self.frames_seen += 1;
        let cropped = apply_crop(&frame, &self.crop)?;
        for classified in self.detector.push(cropped)? {
            self.accept(classified.frame, classified.starts_fragment)?;
        }
        Ok(())
    }

    /// Flushes pending frames and returns the accounting plus the audio source.
    pub fn finish(mut self) -> Result<(VideoSummary, S)> {
        for classified in self.detector.finish()? {
            self.accept(classified.frame, classified.starts_fragment)?;
        }
        self.close_fragment();
        let summary = VideoSummary {
            video_id: self.video_id,
            frames: self.frames_seen,
            fragments: self.finished,
        };
        Ok((summary, self.audio))
    }

    fn close_fragment(&mut self) {
        if let Some(open) = self.current.take() {
            self.finished.push(open.summary);
        }
    }

    fn accept(&mut self, frame: FrameBuffer, starts_fragment: bool) -> Result<()> {
        let k = frame.timestamp().index;
        if starts_fragment || self.current.is_none() {
            self.close_fragment();
            let index = self.finished.len();
            self.current = Some(OpenFragment::new(index, k, self.fps));
        }
        let fps = self.fps;
        let open = self.current.as_mut().expect("fragment opened above");
        open.summary.end_frame = k + 1;

        let ws = open.window_start();
        if frame_in_window(fps, k, ws) {
            let d = distance_to_middle(fps, k, ws);
            if open.best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                open.best = Some((d, frame));
            }
        }

        // windows ending at or before the presentation time of frame k + 1 are complete
        let horizon = fps.frame_time_scaled(k + 1);
        loop {
            let open = self.current.as_ref().expect("fragment opened above");
            let we = open.window_start() + WINDOW;
            if (we as u128) * fps.num() as u128 > horizon {
                break;
            }
            self.close_window()?;
        }
        Ok(())
    }

    fn close_window(&mut self) -> Result<()> {
        let open = self
            .current
            .as_mut()
            .expect("window belongs to an open fragment");
        let ws = open.window_start();
        let best = open.best.take();
        open.next_window += 1;
        let window_index = (open.next_window - 1) as usize;

        if self.audio_exhausted {
            return Ok(());
        }
        let Some(samples) = self.audio.read_range(ws, ws + WINDOW)? else {
            // audio shorter than video: later windows are dropped as well
            self.audio_exhausted = true;
            return Ok(());
        };
        let open = self
            .current
            .as_mut()
            .expect("window belongs to an open fragment");
        open.summary.windows += 1;
        let clip = AudioClip::new(samples, ws)?;
        if is_silent(&clip, self.config.silence_amp, self.config.silence_run()) {
            open.summary.silence_dropped += 1;
            return Ok(());
        }
        let Some((_, image)) = best else {
            open.summary.no_frame_dropped += 1;
            return Ok(());
        };
        if is_dark(&image, self.config.dark_mean) {
            open.summary.dark_dropped += 1;
            return Ok(());
        }
        let position = open.survivors;
        open.survivors += 1;
        if position % self.config.keep_every != 0 {
            open.summary.subsample_dropped += 1;
            return Ok(());
        }
        open.summary.emitted += 1;
        let fragment_index = open.summary.fragment_index;
        let image = center_crop_resize(&image, self.config.out_size);
        (self.sink)(ExtractedPair {
            video_id: self.video_id.clone(),
            fragment_index,
            window_index,
            image,
            audio: clip,
        })
    }
}

/// Runs extraction over in-memory frames and audio.
pub fn extract_from_memory(
    video_id: &str,
    frames: &[FrameBuffer],
    audio: &[i16],
    crop: CropBox,
    config: &FilterConfig,
) -> Result<(VideoSummary, Vec<ExtractedPair>)> {
    let Some(first) = frames.first() else {
        return Ok((
            VideoSummary {
                video_id: video_id.to_string(),
                ..Default::default()
            },
            Vec::new(),
        ));
    };
    let mut pairs = Vec::new();
    let mut extractor = VideoExtractor::new(
        video_id,
        first.timestamp().fps,
        crop,
        config,
        MemorySource::new(audio.to_vec()),
        |p| {
            pairs.push(p);
            Ok(())
        },
    );
    for frame in frames {
        extractor.push_frame(frame.clone())?;
    }
    let (summary, _) = extractor.finish()?;
    Ok((summary, pairs))
}

/// Numbers pairs `0..N` in `(video_id, fragment_index, window_index)` order.
pub fn assign_global_ids(mut pairs: Vec<ExtractedPair>) -> Vec<PairRecord> {
    pairs.sort_by(|a, b| {
        (a.video_id.as_str(), a.fragment_index, a.window_index).cmp(&(
            b.video_id.as_str(),
            b.fragment_index,
            b.window_index,
        ))
    });
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, p)| PairRecord {
            global_id: i as u64,
            video_id: p.video_id,
            fragment_index: p.fragment_index,
            window_index: p.window_index,
            image: p.image,
            audio: p.audio,
        })
        .collect()
}
