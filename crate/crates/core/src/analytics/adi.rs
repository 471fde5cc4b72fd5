use serde::{Deserialize, Serialize};

use super::spectrum::{SpectrumAnalyzer, SPECTRUM_LEN};
use crate::error::{Error, Result};
use crate::media::AudioClip;

pub const MAX_FREQ: f64 = 8_000.0;
pub const DEFAULT_ADI_BINS: usize = 32;

/// Grouped power is accumulated in fixed point with this many fractional
/// bits, which makes merging exactly associative.
const FRACTION_BITS: i32 = 16;

pub fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

/// Equal-width partition of the mel axis over 0..=8000 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct MelBinning {
    bins: usize,
    /// Bin index for every integer frequency 0..=8000.
    lookup: Vec<u16>,
}

impl MelBinning {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 || bins > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "adi bins must be at least 2, got {bins}"
            )));
        }
        let lookup = (0..SPECTRUM_LEN)
            .map(|f| bin_for(f as f64, bins) as u16)
            .collect();
        Ok(Self { bins, lookup })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Bin of frequency `f` in Hz.
    pub fn bin_of(&self, f: f64) -> Result<usize> {
        if !(0.0..=MAX_FREQ).contains(&f) {
            return Err(Error::OutOfRange(format!(
                "frequency {f} Hz outside 0..=8000"
            )));
        }
        Ok(bin_for(f, self.bins))
    }

    /// Lower and upper edge in Hz of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let step = mel(MAX_FREQ) / self.bins as f64;
        (
            inverse_mel(step * i as f64),
            inverse_mel(step * (i + 1) as f64),
        )
    }

    /// Frequency in Hz at the mel midpoint of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        let step = mel(MAX_FREQ) / self.bins as f64;
        inverse_mel(step * (i as f64 + 0.5))
    }

    /// Sums a one-sided power spectrum into the bins.
    pub fn group(&self, power: &[f64]) -> Vec<f64> {
        let mut grouped = vec![0.0; self.bins];
        for (p, &b) in power.iter().zip(&self.lookup) {
            grouped[b as usize] += p;
        }
        grouped
    }
}

fn bin_for(f: f64, bins: usize) -> usize {
    let pos = bins as f64 * mel(f) / mel(MAX_FREQ);
    (pos.floor() as usize).min(bins - 1)
}

fn inverse_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Shannon entropy in nats. Zero probabilities contribute nothing.
pub fn shannon(p: &[f64]) -> Result<f64> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(total));
    }
    Ok(-p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdiClass {
    Low,
    Medium,
    High,
}

/// Class boundaries: the thirds of `ln bins`, rounded to four decimals.
/// For 32 bins these are 1.1552 and 2.3105.
pub fn tertiles(bins: usize) -> (f64, f64) {
    let max = (bins as f64).ln();
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    (round4(max / 3.0), round4(2.0 * max / 3.0))
}

/// Low for `[0, t1]`, Medium for `(t1, t2)`, High for `[t2, ln bins]`.
pub fn classify_adi(h: f64, bins: usize) -> Result<AdiClass> {
    let max = (bins as f64).ln();
    if !(0.0..=max + 1e-9).contains(&h) {
        return Err(Error::OutOfRange(format!("adi {h} outside 0..={max}")));
    }
    let (t1, t2) = tertiles(bins);
    Ok(if h <= t1 {
        AdiClass::Low
    } else if h < t2 {
        AdiClass::Medium
    } else {
        AdiClass::High
    })
}

/// Mergeable per-bin power totals in fixed point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedPower {
    pub clips: u64,
    pub totals: Vec<u128>,
}

impl GroupedPower {
    pub fn new(bins: usize) -> Self {
        Self {
            clips: 0,
            totals: vec![0; bins],
        }
    }

    pub fn add_grouped(&mut self, grouped: &[f64]) {
        self.clips += 1;
        let scale = 2f64.powi(FRACTION_BITS);
        for (t, &g) in self.totals.iter_mut().zip(grouped) {
            *t += (g * scale).round() as u128;
        }
    }

    pub fn merge(mut self, other: GroupedPower) -> GroupedPower {
        self.clips += other.clips;
        for (a, b) in self.totals.iter_mut().zip(other.totals) {
            *a += b;
        }
        self
    }

    pub fn power(&self) -> Vec<f64> {
        let scale = 2f64.powi(-FRACTION_BITS);
        self.totals.iter().map(|&t| t as f64 * scale).collect()
    }

    pub fn report(&self) -> Result<AdiReport> {
        if self.clips == 0 {
            return Err(Error::EmptyCorpus);
        }
        let total: u128 = self.totals.iter().sum();
        if total == 0 {
            return Err(Error::AllSilent);
        }
        let probabilities: Vec<f64> = self
            .totals
            .iter()
            .map(|&t| t as f64 / total as f64)
            .collect();
        // renormalize so rounding in the division never trips the sum check
        let s: f64 = probabilities.iter().sum();
        let probabilities: Vec<f64> = probabilities.iter().map(|p| p / s).collect();
        let adi = shannon(&probabilities)?;
        let bins = self.totals.len();
        Ok(AdiReport {
            clips: self.clips,
            bins,
            adi,
            class: classify_adi(adi.min((bins as f64).ln()), bins)?,
            power: self.power(),
            probabilities,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiReport {
    pub clips: u64,
    pub bins: usize,
    pub adi: f64,
    pub class: AdiClass,
    pub power: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Accumulates the mel-grouped power of one clip.
pub fn accumulate(
    acc: &mut GroupedPower,
    analyzer: &SpectrumAnalyzer,
    binning: &MelBinning,
    clip: &AudioClip,
) {
    acc.add_grouped(&binning.group(&analyzer.power(clip)));
}

/// Mel-grouped power totals of a set of clips.
pub fn grouped_power(clips: &[AudioClip], bins: usize) -> Result<GroupedPower> {
    let binning = MelBinning::new(bins)?;
    let analyzer = SpectrumAnalyzer::new();
    Ok(crate::par::fold_reduce(
        clips,
        || GroupedPower::new(bins),
        |mut acc, clip| {
            accumulate(&mut acc, &analyzer, &binning, clip);
            acc
        },
        GroupedPower::merge,
    ))
}

/// Same as [`grouped_power`] but always single-threaded.
pub fn grouped_power_seq(clips: &[AudioClip], bins: usize) -> Result<GroupedPower> {
    let binning = MelBinning::new(bins)?;
    let analyzer = SpectrumAnalyzer::new();
    let mut acc = GroupedPower::new(bins);
    for clip in clips {
        accumulate(&mut acc, &analyzer, &binning, clip);
    }
    Ok(acc)
}

/// Acoustic diversity index of a set of clips.
pub fn adi(clips: &[AudioClip], bins: usize) -> Result<AdiReport> {
    grouped_power(clips, bins)?.report()
}

pub fn adi_seq(clips: &[AudioClip], bins: usize) -> Result<AdiReport> {
    grouped_power_seq(clips, bins)?.report()
}
