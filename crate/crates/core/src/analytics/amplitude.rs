use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::media::{AudioClip, CLIP_SAMPLES};

/// Full 16-bit amplitude resolution.
pub const EXACT_BINS: usize = 65_536;

/// Above this many bins counts are stored sparsely.
const DENSE_LIMIT: usize = 1_024;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Counts {
    /// `bins * CLIP_SAMPLES` cells, row-major by bin.
    Dense(Vec<u64>),
    /// One map per timestamp: bin -> count.
    Sparse(Vec<BTreeMap<u32, u64>>),
}

/// Counts of (amplitude bin, timestamp) occurrences across clips.
///
/// Bin `b` covers samples `x` with `(x + 32768) * bins / 65536 == b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeMatrix {
    bins: usize,
    clips: u64,
    counts: Counts,
}

impl AmplitudeMatrix {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 || EXACT_BINS % bins != 0 {
            return Err(Error::InvalidConfig(format!(
                "amplitude bins {bins} must divide {EXACT_BINS}"
            )));
        }
        let counts = if bins <= DENSE_LIMIT {
            Counts::Dense(vec![0; bins * CLIP_SAMPLES])
        } else {
            Counts::Sparse(vec![BTreeMap::new(); CLIP_SAMPLES])
        };
        Ok(Self {
            bins,
            clips: 0,
            counts,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn clips(&self) -> u64 {
        self.clips
    }

    pub fn bin_of(&self, sample: i16) -> usize {
        (sample as i32 + 32_768) as usize * self.bins / EXACT_BINS
    }

    pub fn add_clip(&mut self, clip: &AudioClip) {
        self.clips += 1;
        let bins = self.bins;
        match &mut self.counts {
            Counts::Dense(cells) => {
                for (t, &s) in clip.samples().iter().enumerate() {
                    let b = (s as i32 + 32_768) as usize * bins / EXACT_BINS;
                    cells[b * CLIP_SAMPLES + t] += 1;
                }
            }
            Counts::Sparse(columns) => {
                for (t, &s) in clip.samples().iter().enumerate() {
                    let b = ((s as i32 + 32_768) as usize * bins / EXACT_BINS) as u32;
                    *columns[t].entry(b).or_insert(0) += 1;
                }
            }
        }
    }

    pub fn get(&self, bin: usize, t: usize) -> u64 {
        match &self.counts {
            Counts::Dense(cells) => cells[bin * CLIP_SAMPLES + t],
            Counts::Sparse(columns) => columns[t].get(&(bin as u32)).copied().unwrap_or(0),
        }
    }

    pub fn column_sum(&self, t: usize) -> u64 {
        match &self.counts {
            Counts::Dense(cells) => (0..self.bins).map(|b| cells[b * CLIP_SAMPLES + t]).sum(),
            Counts::Sparse(columns) => columns[t].values().sum(),
        }
    }

    pub fn max_count(&self) -> u64 {
        match &self.counts {
            Counts::Dense(cells) => cells.iter().copied().max().unwrap_or(0),
            Counts::Sparse(columns) => columns
                .iter()
                .flat_map(|c| c.values().copied())
                .max()
                .unwrap_or(0),
        }
    }

    /// Element-wise sum. Both matrices must use the same binning.
    pub fn merge(mut self, other: AmplitudeMatrix) -> AmplitudeMatrix {
        assert_eq!(
            self.bins, other.bins,
            "cannot merge matrices with different binning"
        );
        self.clips += other.clips;
        match (&mut self.counts, other.counts) {
            (Counts::Dense(a), Counts::Dense(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            (Counts::Sparse(a), Counts::Sparse(b)) => {
                for (col, other_col) in a.iter_mut().zip(b) {
                    for (bin, c) in other_col {
                        *col.entry(bin).or_insert(0) += c;
                    }
                }
            }
            _ => unreachable!("storage follows the bin count"),
        }
        self
    }

    /// Grayscale rendering as binary PGM (P5): one column per timestamp, one
    /// row per bin with the highest amplitude at the top. Zero counts are
    /// white (255) and the maximum count is black (0).
    pub fn write_pgm(&self, out: &mut impl Write) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", CLIP_SAMPLES, self.bins)?;
        let max = self.max_count();
        let mut row = vec![0u8; CLIP_SAMPLES];
        for bin in (0..self.bins).rev() {
            for (t, px) in row.iter_mut().enumerate() {
                *px = shade(self.get(bin, t), max);
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    pub fn render_pgm(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_pgm(&mut out)?;
        Ok(out)
    }
}

/// `round(255 * (1 - count / max))`; an all-zero matrix is white.
pub fn shade(count: u64, max: u64) -> u8 {
    if max == 0 {
        return 255;
    }
    (255.0 * (1.0 - count as f64 / max as f64)).round() as u8
}

/// Counts amplitude occurrences per timestamp over all clips.
pub fn amplitude_matrix(clips: &[AudioClip], bins: usize) -> Result<AmplitudeMatrix> {
    let empty = AmplitudeMatrix::new(bins)?;
    Ok(crate::par::fold_reduce(
        clips,
        || empty.clone(),
        |mut acc, clip| {
            acc.add_clip(clip);
            acc
        },
        AmplitudeMatrix::merge,
    ))
}
