//! Waveform augmentation: amplitude scaling and time shifts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::Waveform;

/// One drawn augmentation. Gain is attenuation-only so quantization never
/// clips; the shift drops the head of the signal rather than rotating it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmentation {
    pub gain: f64,
    pub shift: usize,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation {
        gain: 1.0,
        shift: 0,
    };

    /// Draws gain uniformly in [0.5, 1.0], then a shift in
    /// 0..=sample_rate/10 samples (up to 100 ms).
    pub fn draw(sample_rate: u32, rng: &mut ChaCha8Rng) -> Augmentation {
        let gain = 0.5 + 0.5 * rng.random::<f64>();
        let shift = rng.random_range(0..=(sample_rate as usize / 10));
        Augmentation { gain, shift }
    }

    pub fn apply(&self, w: &Waveform) -> Waveform {
        let start = self.shift.min(w.samples.len());
        let samples = w.samples[start..].iter().map(|&s| s * self.gain).collect();
        Waveform::new(samples, w.sample_rate)
    }
}

/// Draws and applies one augmentation; deterministic under a seeded rng.
pub fn augment(w: &Waveform, rng: &mut ChaCha8Rng) -> Waveform {
    Augmentation::draw(w.sample_rate, rng).apply(w)
}
