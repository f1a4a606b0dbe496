//! Minimal PCM WAV reader and writer.
//!
//! Reads 8/16/24-bit integer and 32-bit float PCM (plain or extensible
//! header), mono or multi-channel; channels are averaged to mono. Anything
//! else is an unsupported-format error. The writer emits 16-bit mono PCM.

use std::fs;
use std::path::Path;

use crate::audio::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decodes a WAV file to mono, rejecting tracks below 16 kHz.
///
/// Multi-channel audio is averaged; the result is peak-normalized only if
/// averaging or float input pushed the peak above 1. The original sample
/// rate is preserved.
pub fn load_audio(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = fs::read(path.as_ref())?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::UnsupportedFormat("not a RIFF/WAVE file".into()));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => fmt = Some(FmtChunk::parse(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos += 8 + size + (size & 1); // chunks are word-aligned
    }
    let fmt = fmt.ok_or_else(|| Error::UnsupportedFormat("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::UnsupportedFormat("missing data chunk".into()))?;

    if fmt.sample_rate < 16_000 {
        return Err(Error::SampleRateTooLow(fmt.sample_rate));
    }

    let channels = fmt.channels as usize;
    let bytes_per_sample = (fmt.bits_per_sample / 8) as usize;
    let frame_size = bytes_per_sample * channels;
    if frame_size == 0 {
        return Err(Error::UnsupportedFormat("zero-size frames".into()));
    }
    let frames = data.len() / frame_size;
    let mut samples = Vec::with_capacity(frames);
    let inv_channels = 1.0 / channels as f64;
    for f in 0..frames {
        let mut acc = 0.0;
        for c in 0..channels {
            let off = f * frame_size + c * bytes_per_sample;
            acc += decode_sample(&data[off..off + bytes_per_sample], fmt.format)?;
        }
        samples.push(acc * inv_channels);
    }
    let mut w = Waveform::new(samples, fmt.sample_rate);
    w.peak_normalize();
    Ok(w)
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

impl FmtChunk {
    fn parse(body: &[u8]) -> Result<FmtChunk> {
        if body.len() < 16 {
            return Err(Error::UnsupportedFormat("fmt chunk too short".into()));
        }
        let mut format = u16::from_le_bytes([body[0], body[1]]);
        let channels = u16::from_le_bytes([body[2], body[3]]);
        let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
        let bits_per_sample = u16::from_le_bytes([body[14], body[15]]);
        if format == FORMAT_EXTENSIBLE {
            // The real format is the first two bytes of the SubFormat GUID.
            if body.len() < 26 {
                return Err(Error::UnsupportedFormat("extensible fmt too short".into()));
            }
            format = u16::from_le_bytes([body[24], body[25]]);
        }
        let supported = matches!(
            (format, bits_per_sample),
            (FORMAT_PCM, 8) | (FORMAT_PCM, 16) | (FORMAT_PCM, 24) | (FORMAT_IEEE_FLOAT, 32)
        );
        if !supported {
            return Err(Error::UnsupportedFormat(format!(
                "codec tag {format}, {bits_per_sample}-bit"
            )));
        }
        if channels == 0 {
            return Err(Error::UnsupportedFormat("zero channels".into()));
        }
        Ok(FmtChunk {
            format,
            channels,
            sample_rate,
            bits_per_sample,
        })
    }
}

fn decode_sample(raw: &[u8], format: u16) -> Result<f64> {
    Ok(match (format, raw.len()) {
        (FORMAT_PCM, 1) => (raw[0] as f64 - 128.0) / 128.0,
        (FORMAT_PCM, 2) => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32768.0,
        (FORMAT_PCM, 3) => {
            let v = i32::from_le_bytes([0, raw[0], raw[1], raw[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        (FORMAT_IEEE_FLOAT, 4) => {
            f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64
        }
        _ => return Err(Error::UnsupportedFormat("sample layout".into())),
    })
}

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1].
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_wav {
    //! Hand-assembled WAV bytes for decoder tests.

    pub fn pcm16(sample_rate: u32, channels: &[Vec<i16>]) -> Vec<u8> {
        let nch = channels.len() as u16;
        let frames = channels[0].len();
        let data_len = frames * 2 * nch as usize;
        let mut out = header(1, nch, sample_rate, 16, data_len);
        for f in 0..frames {
            for ch in channels {
                out.extend_from_slice(&ch[f].to_le_bytes());
            }
        }
        out
    }

    pub fn pcm8(sample_rate: u32, samples: &[u8]) -> Vec<u8> {
        let mut out = header(1, 1, sample_rate, 8, samples.len());
        out.extend_from_slice(samples);
        out
    }

    pub fn float32(sample_rate: u32, samples: &[f32]) -> Vec<u8> {
        let mut out = header(3, 1, sample_rate, 32, samples.len() * 4);
        for &s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn pcm24(sample_rate: u32, samples: &[i32]) -> Vec<u8> {
        let mut out = header(1, 1, sample_rate, 24, samples.len() * 3);
        for &s in samples {
            let b = s.to_le_bytes();
            out.extend_from_slice(&b[0..3]);
        }
        out
    }

    fn header(format: u16, channels: u16, rate: u32, bits: u16, data_len: usize) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let block = channels * bits / 8;
        out.extend_from_slice(&(rate * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        out
    }
}
