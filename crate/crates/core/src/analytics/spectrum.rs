use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::media::{AudioClip, CLIP_SAMPLES};

/// Number of one-sided spectrum bins for a clip: 0..=8000 Hz at 1 Hz spacing.
pub const SPECTRUM_LEN: usize = CLIP_SAMPLES / 2 + 1;

/// Symmetric Hann window `0.5 * (1 - cos(2 pi k / (n - 1)))`.
pub fn hann(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::OutOfRange(format!(
            "hann window needs n >= 2, got {n}"
        )));
    }
    let d = (n - 1) as f64;
    Ok((0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / d).cos()))
        .collect())
}

/// Hann-windowed power spectrum of one-second clips. Planned once and
/// shared across threads.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Arc<[f64]>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("len", &self.window.len())
            .finish()
    }
}

impl Default for SpectrumAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl SpectrumAnalyzer {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(CLIP_SAMPLES);
        let window = hann(CLIP_SAMPLES).expect("clip length is above 2").into();
        Self { fft, window }
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Windowed samples `x[t] * w[t]`.
    pub fn windowed(&self, clip: &AudioClip) -> Vec<f64> {
        clip.samples()
            .iter()
            .zip(self.window.iter())
            .map(|(&s, &w)| s as f64 * w)
            .collect()
    }

    /// `|X[f]|^2` for f in 0..=8000.
    pub fn power(&self, clip: &AudioClip) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .windowed(clip)
            .into_iter()
            .map(|v| Complex::new(v, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..SPECTRUM_LEN].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Energy of the windowed signal recovered from a one-sided power spectrum
/// of an even-length real transform.
pub fn one_sided_energy(power: &[f64], n: usize) -> f64 {
    let last = power.len() - 1;
    let inner: f64 = power[1..last].iter().sum();
    (power[0] + 2.0 * inner + power[last]) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n^2) transform, evaluated only at the requested bins.
    fn naive_power(x: &[f64], bins: &[usize]) -> Vec<f64> {
        let n = x.len() as f64;
        bins.iter()
            .map(|&f| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * f as f64 * t as f64 / n;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn chirp() -> AudioClip {
        let s = (0..CLIP_SAMPLES)
            .map(|t| {
                let x = t as f64 / 16_000.0;
                (8_000.0 * (2.0 * std::f64::consts::PI * (200.0 * x + 1_500.0 * x * x)).sin()
                    + 300.0 * ((t * 7919) % 211) as f64
                    - 31_500.0) as i16
            })
            .collect();
        AudioClip::new(s, 0).unwrap()
    }

    #[test]
    fn hann_examples() {
        let w = hann(4).unwrap();
        let expected = [0.0, 0.75, 0.75, 0.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
        assert_eq!(hann(2).unwrap(), vec![0.0, 0.0]);
        assert!(hann(1).is_err());
        let w = hann(16_000).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(w[15_999].abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct_transform() {
        let analyzer = SpectrumAnalyzer::new();
        let clip = chirp();
        let power = analyzer.power(&clip);
        assert_eq!(power.len(), SPECTRUM_LEN);
        let bins = [0, 1, 2, 57, 200, 999, 1_000, 4_321, 7_999, 8_000];
        let direct = naive_power(&analyzer.windowed(&clip), &bins);
        for (&f, d) in bins.iter().zip(direct) {
            let rel = (power[f] - d).abs() / d.max(1.0);
            assert!(rel < 1e-9, "bin {f}: fft {} direct {d}", power[f]);
        }
    }

    #[test]
    fn parseval_holds() {
        let analyzer = SpectrumAnalyzer::new();
        let clip = chirp();
        let energy: f64 = analyzer.windowed(&clip).iter().map(|v| v * v).sum();
        let recovered = one_sided_energy(&analyzer.power(&clip), CLIP_SAMPLES);
        assert!((energy - recovered).abs() / energy < 1e-6);
    }

    #[test]
    fn sine_peaks_at_its_frequency() {
        let s = (0..CLIP_SAMPLES)
            .map(|t| {
                (10_000.0 * (2.0 * std::f64::consts::PI * 1_000.0 * t as f64 / 16_000.0).sin())
                    as i16
            })
            .collect();
        let power = SpectrumAnalyzer::new().power(&AudioClip::new(s, 0).unwrap());
        let peak = (0..SPECTRUM_LEN)
            .max_by(|&a, &b| power[a].total_cmp(&power[b]))
            .unwrap();
        assert_eq!(peak, 1_000);
    }
}
