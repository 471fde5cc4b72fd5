//! Canonical 44-byte-header WAV for one-second mono 16 kHz 16-bit clips.

use crate::error::{Error, Result};
use crate::media::{AudioClip, CLIP_SAMPLES, SAMPLE_RATE};

pub const HEADER_LEN: usize = 44;
const DATA_LEN: usize = CLIP_SAMPLES * 2;
/// Size of every encoded clip: header plus 32,000 data bytes.
pub const WAV_FILE_LEN: usize = HEADER_LEN + DATA_LEN;

const CHANNELS: u16 = 1;
const BITS: u16 = 16;

pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let block_align = CHANNELS * BITS / 8;
    let byte_rate = SAMPLE_RATE * block_align as u32;
    let mut out = Vec::with_capacity(WAV_FILE_LEN);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((WAV_FILE_LEN - 8) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&CHANNELS.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&BITS.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(DATA_LEN as u32).to_le_bytes());
    for s in clip.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a RIFF/WAVE file holding exactly one clip. Unknown chunks are
/// skipped; anything other than PCM mono 16-bit 16 kHz with 16,000 samples is
/// rejected with [`Error::WrongFormat`].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let malformed = |m: &str| Error::MalformedWav(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let len = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start.checked_add(len).filter(|&e| e <= bytes.len());
        let Some(body_end) = body_end else {
            return Err(malformed("chunk runs past end of file"));
        };
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("short fmt chunk"));
                }
                fmt = Some((
                    u16_at(body, 0),
                    u16_at(body, 2),
                    u32_at(body, 4),
                    u16_at(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are padded to even length
        at = body_end + (len & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if format != 1 {
        return Err(Error::WrongFormat(format!(
            "format tag {format}, expected PCM"
        )));
    }
    if channels != CHANNELS {
        return Err(Error::WrongFormat(format!(
            "{channels} channels, expected mono"
        )));
    }
    if rate != SAMPLE_RATE {
        return Err(Error::WrongFormat(format!(
            "{rate} Hz, expected {SAMPLE_RATE}"
        )));
    }
    if bits != BITS {
        return Err(Error::WrongFormat(format!(
            "{bits} bits per sample, expected {BITS}"
        )));
    }
    if data.len() != DATA_LEN {
        return Err(Error::WrongFormat(format!(
            "{} data bytes, expected {DATA_LEN}",
            data.len()
        )));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    AudioClip::new(samples, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp() -> AudioClip {
        AudioClip::new(
            (0..16_000)
                .map(|i| (i as i32 * 5 - 40_000).clamp(-32_768, 32_767) as i16)
                .collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn canonical_header_bytes() {
        let bytes = encode_wav(&ramp());
        assert_eq!(bytes.len(), 32_044);
        let expected_header: [u8; 44] = [
            b'R', b'I', b'F', b'F', 0x24, 0x7d, 0, 0, b'W', b'A', b'V', b'E', b'f', b'm', b't',
            b' ', 16, 0, 0, 0, 1, 0, 1, 0, 0x80, 0x3e, 0, 0, 0x00, 0x7d, 0, 0, 2, 0, 16, 0, b'd',
            b'a', b't', b'a', 0x00, 0x7d, 0, 0,
        ];
        assert_eq!(&bytes[..44], &expected_header);
    }

    #[test]
    fn zero_clip_has_zero_data() {
        let bytes = encode_wav(&AudioClip::new(vec![0; 16_000], 0).unwrap());
        assert!(bytes[44..].iter().all(|&b| b == 0));
        assert_eq!(bytes.len() - 44, 32_000);
    }

    #[test]
    fn rejects_foreign_files() {
        let good = encode_wav(&ramp());
        assert!(matches!(
            decode_wav(&good[..30]),
            Err(Error::MalformedWav(_))
        ));
        assert!(matches!(decode_wav(b"RIFX"), Err(Error::MalformedWav(_))));

        let mut stereo = good.clone();
        stereo[22] = 2;
        assert!(matches!(decode_wav(&stereo), Err(Error::WrongFormat(_))));

        let mut rate = good.clone();
        rate[24..28].copy_from_slice(&44_100u32.to_le_bytes());
        assert!(matches!(decode_wav(&rate), Err(Error::WrongFormat(_))));

        let mut float = good.clone();
        float[20] = 3;
        assert!(matches!(decode_wav(&float), Err(Error::WrongFormat(_))));

        let mut short = good[..44 + 100].to_vec();
        short[40..44].copy_from_slice(&100u32.to_le_bytes());
        assert!(matches!(decode_wav(&short), Err(Error::WrongFormat(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let good = encode_wav(&ramp());
        let mut with_list = good[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&good[36..]);
        assert_eq!(decode_wav(&with_list).unwrap().samples(), ramp().samples());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>()) {
            let samples: Vec<i16> = (0..16_000u64)
                .map(|i| (i.wrapping_mul(6364136223846793005).wrapping_add(seed) >> 48) as i16)
                .collect();
            let clip = AudioClip::new(samples, 0).unwrap();
            let bytes = encode_wav(&clip);
            prop_assert_eq!(bytes.len(), WAV_FILE_LEN);
            let back = decode_wav(&bytes).unwrap();
            prop_assert_eq!(back.samples(), clip.samples());
        }
    }
}
