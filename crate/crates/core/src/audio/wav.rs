use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes)
}

pub fn write_wav(
    clip: &AudioClip,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), AudioError> {
    fs::write(path, write_wav_bytes(clip, encoding))?;
    Ok(())
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let malformed = |msg: &str| AudioError::MalformedContainer(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }

    let mut format = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                format = Some(Format {
                    tag: u16_at(body, 0),
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let format = format.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if format.channels != 1 {
        return Err(AudioError::ChannelCountError(format.channels));
    }
    let samples: Vec<f64> = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(malformed("odd-sized 16-bit data chunk"));
            }
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                .collect()
        }
        (FORMAT_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(malformed("data chunk not a multiple of 4 bytes"));
            }
            data.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                format_tag: tag,
                bits,
            })
        }
    };
    AudioClip::new(samples, format.sample_rate)
}

pub(crate) fn quantize_pcm16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Canonical 44-byte header followed by the data chunk.
pub fn write_wav_bytes(clip: &AudioClip, encoding: WavEncoding) -> Vec<u8> {
    let (tag, bits) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 16u16),
        WavEncoding::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = (clip.len() * block_align as usize) as u32;
    let rate = clip.sample_rate_hz();

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in clip.samples() {
                out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in clip.samples() {
                out.extend_from_slice(&(s as f32).to_le_bytes());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm16_file(channels: u16, samples: &[i16]) -> Vec<u8> {
        let data_len = (samples.len() * 2) as u32;
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data_len).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&16000u32.to_le_bytes());
        b.extend_from_slice(&(32000u32 * channels as u32).to_le_bytes());
        b.extend_from_slice(&(2 * channels).to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&data_len.to_le_bytes());
        for s in samples {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b
    }

    #[test]
    fn pcm16_linear_mapping() {
        let clip = read_wav_bytes(&pcm16_file(1, &[0, 16384, -32768])).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate_hz(), 16000);
    }

    #[test]
    fn stereo_rejected() {
        let err = read_wav_bytes(&pcm16_file(2, &[0, 0, 1, 1])).unwrap_err();
        assert!(matches!(err, AudioError::ChannelCountError(2)));
    }

    #[test]
    fn twenty_four_bit_rejected() {
        let mut b = pcm16_file(1, &[0, 0, 0]);
        b[34] = 24;
        assert!(matches!(
            read_wav_bytes(&b),
            Err(AudioError::UnsupportedEncoding { bits: 24, .. })
        ));
    }

    #[test]
    fn truncated_chunk_is_malformed() {
        let b = pcm16_file(1, &[1, 2, 3, 4]);
        assert!(matches!(
            read_wav_bytes(&b[..b.len() - 3]),
            Err(AudioError::MalformedContainer(_))
        ));
        assert!(matches!(
            read_wav_bytes(b"RIFX0000WAVE"),
            Err(AudioError::MalformedContainer(_))
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut b = pcm16_file(1, &[16384]);
        // splice a LIST chunk with odd size (padded) between fmt and data
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), &[1, 2, 3, 0]].concat();
        b.splice(36..36, list);
        let clip = read_wav_bytes(&b).unwrap();
        assert_eq!(clip.samples(), &[0.5]);
    }

    #[test]
    fn full_scale_clamps() {
        let clip = AudioClip::new(vec![1.0], 16000).unwrap();
        let bytes = write_wav_bytes(&clip, WavEncoding::Pcm16);
        assert_eq!(&bytes[44..], &32767i16.to_le_bytes());
        let clip = AudioClip::new(vec![0.0], 16000).unwrap();
        assert_eq!(&write_wav_bytes(&clip, WavEncoding::Pcm16)[44..], &[0, 0]);
    }

    #[test]
    fn header_sizes() {
        let clip = AudioClip::new(vec![0.1; 160], 16000).unwrap();
        let bytes = write_wav_bytes(&clip, WavEncoding::Pcm16);
        assert_eq!(bytes.len(), 44 + 320);
        assert_eq!(u32_at(&bytes, 40), 320);
        assert_eq!(u32_at(&bytes, 4), 36 + 320);
        assert_eq!(u32_at(&bytes, 24), 16000);
        assert_eq!(u16_at(&bytes, 34), 16);
    }

    #[test]
    fn float32_passthrough() {
        let clip = AudioClip::new(vec![0.25, -1.5, 0.125], 8000).unwrap();
        let back = read_wav_bytes(&write_wav_bytes(&clip, WavEncoding::Float32)).unwrap();
        assert_eq!(back, clip);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn pcm16_round_trip_is_exact(data in proptest::collection::vec(any::<i16>(), 0..64)) {
            let file = pcm16_file(1, &data);
            let clip = read_wav_bytes(&file).unwrap();
            let rewritten = write_wav_bytes(&clip, WavEncoding::Pcm16);
            prop_assert_eq!(&rewritten[44..], &file[44..]);
            prop_assert_eq!(read_wav_bytes(&rewritten).unwrap(), clip);
        }
    }
}
