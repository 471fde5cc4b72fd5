//! Cut detection by mean squared difference between consecutive frames.
//!
//! A fragment boundary is placed at frame `k` when the MSD between frame
//! `k - 1` and frame `k` exceeds the cut threshold. With a lookahead of `N`
//! frames the previous frame is also compared against frames `k + 1 ..= k + N`
//! and the boundary lands on the first of them that exceeds the threshold,
//! which catches fades that never jump far enough in a single step.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::media::{Fps, FrameBuffer};

/// Half-open frame range `[start_frame, end_frame)` of one fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentBoundary {
    pub fragment_index: usize,
    pub start_frame: u64,
    pub end_frame: u64,
    pub fps: Fps,
}

impl SegmentBoundary {
    pub fn start_time(&self) -> f64 {
        self.start_frame as f64 / self.fps.as_f64()
    }

    pub fn end_time(&self) -> f64 {
        self.end_frame as f64 / self.fps.as_f64()
    }

    pub fn frame_count(&self) -> u64 {
        self.end_frame - self.start_frame
    }
}

/// Mean over every channel position of the squared 8-bit difference.
pub fn frame_msd(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    if !a.same_dimensions(b) {
        return Err(Error::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / a.pixels().len() as f64)
}

/// A frame together with the detector's verdict.
#[derive(Debug, Clone)]
pub struct ClassifiedFrame {
    pub frame: FrameBuffer,
    /// True for the first frame of every fragment, including the very first frame.
    pub starts_fragment: bool,
}

/// Streaming cut detector. Holds at most `lookahead + 2` frames.
#[derive(Debug)]
pub struct CutDetector {
    threshold: f64,
    lookahead: usize,
    anchor: Option<FrameBuffer>,
    pending: VecDeque<FrameBuffer>,
}

impl CutDetector {
    pub fn new(threshold: f64, lookahead: usize) -> Self {
        Self {
            threshold,
            lookahead,
            anchor: None,
            pending: VecDeque::new(),
        }
    }

    /// Feeds the next frame; returns every frame whose verdict is now final, in order.
    pub fn push(&mut self, frame: FrameBuffer) -> Result<Vec<ClassifiedFrame>> {
        let mut out = Vec::new();
        if self.anchor.is_none() {
            self.anchor = Some(frame.clone());
            out.push(ClassifiedFrame {
                frame,
                starts_fragment: true,
            });
            return Ok(out);
        }
        self.pending.push_back(frame);
        while self.pending.len() > self.lookahead {
            self.resolve_front(&mut out)?;
        }
        Ok(out)
    }

    /// Flushes frames still waiting on lookahead.
    pub fn finish(&mut self) -> Result<Vec<ClassifiedFrame>> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            self.resolve_front(&mut out)?;
        }
        Ok(out)
    }

    fn resolve_front(&mut self, out: &mut Vec<ClassifiedFrame>) -> Result<()> {
        let anchor = self
            .anchor
            .as_ref()
            .expect("anchor is set before frames are queued");
        let horizon = self.pending.len().min(self.lookahead + 1);
        let mut cut_at = None;
        for (j, candidate) in self.pending.iter().take(horizon).enumerate() {
            if frame_msd(anchor, candidate)? > self.threshold {
                cut_at = Some(j);
                break;
            }
        }
        match cut_at {
            Some(j) => {
                for _ in 0..j {
                    let frame = self.pending.pop_front().unwrap();
                    out.push(ClassifiedFrame {
                        frame,
                        starts_fragment: false,
                    });
                }
                let frame = self.pending.pop_front().unwrap();
                self.anchor = Some(frame.clone());
                out.push(ClassifiedFrame {
                    frame,
                    starts_fragment: true,
                });
            }
            None => {
                let frame = self.pending.pop_front().unwrap();
                self.anchor = Some(frame.clone());
                out.push(ClassifiedFrame {
                    frame,
                    starts_fragment: false,
                });
            }
        }
        Ok(())
    }
}

/// Splits an in-memory frame sequence into fragments that tile it.
pub fn split_segments(
    frames: &[FrameBuffer],
    cut_threshold: f64,
    lookahead: usize,
) -> Result<Vec<SegmentBoundary>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let fps = first.timestamp().fps;
    let mut detector = CutDetector::new(cut_threshold, lookahead);
    let mut starts = Vec::new();
    let mut index = 0u64;
    let mut record = |classified: Vec<ClassifiedFrame>| {
        for c in classified {
            if c.starts_fragment {
                starts.push(index);
            }
            index += 1;
        }
    };
    for frame in frames {
        record(detector.push(frame.clone())?);
    }
    record(detector.finish()?);

    let total = frames.len() as u64;
    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, &start)| SegmentBoundary {
            fragment_index: i,
            start_frame: start,
            end_frame: starts.get(i + 1).copied().unwrap_or(total),
            fps,
        })
        .collect())
}
