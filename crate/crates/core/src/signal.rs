//! Synthetic test signals: sines, detuned sine sums, plucked strings.
//!
//! Used by the acceptance harness to build corpora with known spectral
//! content, and handy for smoke-testing the pipeline without real
//! recordings.

use rand::Rng;

use crate::audio::Waveform;
use crate::numerics::rng::stream;

pub fn sine(freq: f64, amplitude: f64, sample_rate: u32, n_samples: usize) -> Waveform {
    let w = 2.0 * std::f64::consts::PI * freq / sample_rate as f64;
    let samples = (0..n_samples).map(|i| (w * i as f64).sin() * amplitude).collect();
    Waveform::new(samples, sample_rate)
}

/// Sum of slightly detuned partials around each base frequency, normalized
/// to the requested peak amplitude.
pub fn detuned_sines(
    base_freqs: &[f64],
    detune_cents: f64,
    amplitude: f64,
    sample_rate: u32,
    n_samples: usize,
) -> Waveform {
    let mut samples = vec![0.0; n_samples];
    for (k, &f0) in base_freqs.iter().enumerate() {
        for (d, sign) in [(0.0, 1.0), (detune_cents, 0.7), (-detune_cents, 0.7)] {
            let f = f0 * 2f64.powf(d / 1200.0);
            let w = 2.0 * std::f64::consts::PI * f / sample_rate as f64;
            let phase = k as f64 * 0.7;
            for (i, s) in samples.iter_mut().enumerate() {
                *s += sign * (w * i as f64 + phase).sin();
            }
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = amplitude / peak;
        for s in &mut samples {
            *s *= scale;
        }
    }
    Waveform::new(samples, sample_rate)
}

/// Plucked-string synthesis: a noise burst in a delay line, averaged with
/// its neighbor and decayed each pass.
pub fn karplus_strong(
    freq: f64,
    decay: f64,
    amplitude: f64,
    sample_rate: u32,
    n_samples: usize,
    seed: u64,
) -> Waveform {
    let period = (sample_rate as f64 / freq).max(2.0) as usize;
    let mut rng = stream(seed, "karplus");
    let mut line: Vec<f64> = (0..period)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * amplitude)
        .collect();
    let mut read = 0usize;
    let samples = (0..n_samples)
        .map(|_| {
            let current = line[read];
            let next = line[(read + 1) % period];
            line[read] = decay * 0.5 * (current + next);
            read = (read + 1) % period;
            current
        })
        .collect();
    Waveform::new(samples, sample_rate)
}

/// A polyphonic corpus track: detuned sine chords with plucked-string
/// onsets layered on top, deterministic under the seed.
pub fn polyphonic(seed: u64, sample_rate: u32, seconds: f64) -> Waveform {
    let n = (sample_rate as f64 * seconds) as usize;
    let mut rng = stream(seed, "polyphonic");
    let roots = [110.0, 146.83, 196.0, 220.0, 261.63, 329.63];
    let root = roots[rng.random_range(0..roots.len())];
    let chord = [root, root * 1.5, root * 2.0];
    let mut w = detuned_sines(&chord, 6.0, 0.45, sample_rate, n);

    let plucks = (seconds as usize).max(1) * 2;
    for p in 0..plucks {
        let onset = rng.random_range(0..n.max(1));
        let freq = roots[rng.random_range(0..roots.len())] * 2f64.powi(rng.random_range(0..3));
        let len = (sample_rate as f64 * 0.5) as usize;
        let pluck = karplus_strong(freq, 0.996, 0.4, sample_rate, len, seed ^ (p as u64) << 16);
        for (i, &s) in pluck.samples.iter().enumerate() {
            if onset + i < n {
                w.samples[onset + i] += s;
            }
        }
    }
    w.peak_normalize();
    w
}
