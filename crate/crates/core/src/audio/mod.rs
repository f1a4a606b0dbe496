//! Waveform ingestion, resampling, 8-bit quantization, windowing and
//! augmentation.
//!
//! The pipeline is: decode PCM WAV to a mono [`Waveform`], resample down to
//! 16 kHz, quantize to 256 levels, then cut (context, shifted-target)
//! training windows. Tracks below 16 kHz are discarded rather than
//! upsampled.

pub mod augment;
pub mod cache;
pub mod quantize;
pub mod resample;
pub mod wav;
pub mod windows;

pub use augment::{augment, Augmentation};
pub use cache::{CacheMeta, WindowCache};
pub use quantize::{
    dequantize, dequantize_signal, quantize, quantize_signal, QuantScheme, SILENCE_LEVEL,
};
pub use resample::resample;
pub use wav::{load_audio, write_wav_pcm16};
pub use windows::{make_windows, TrainingWindow, WindowConfig, WindowSet, PAST_LEN, T_CTX};

/// The toolkit's working sample rate.
pub const TARGET_RATE: u32 = 16_000;

/// Mono floating-point audio in [-1, 1] at a known sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Waveform {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Scales samples so the peak is at most 1, only when it exceeds 1.
    pub fn peak_normalize(&mut self) {
        let peak = self.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if peak > 1.0 {
            let inv = 1.0 / peak;
            for s in &mut self.samples {
                *s *= inv;
            }
        }
    }
}
