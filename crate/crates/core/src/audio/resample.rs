//! Polyphase windowed-sinc (Kaiser) downsampling.
//!
//! Resampling by a rational factor L/M is done with a lowpass prototype
//! designed at the conceptually upsampled rate and decomposed into L phases,
//! so only the taps that contribute to an output sample are ever evaluated.
//! Each phase is normalized to unit DC gain. Only downsampling is supported;
//! tracks below the target rate are discarded upstream.

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Half-width of the sinc kernel in input samples.
const HALF_TAPS: usize = 24;
/// Kaiser window shape parameter (~90 dB stopband).
const KAISER_BETA: f64 = 8.6;
/// Cutoff safety factor below the output Nyquist.
const CUTOFF: f64 = 0.945;

/// Resamples to `target_rate`. Output length is `round(len·target/source)`.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::Config("target rate must be positive".into()));
    }
    if w.sample_rate < target_rate {
        return Err(Error::InvalidInput(format!(
            "upsampling {} Hz to {} Hz is not supported; track should be discarded",
            w.sample_rate, target_rate
        )));
    }
    if w.sample_rate == target_rate {
        return Ok(w.clone());
    }

    let g = gcd(w.sample_rate as u64, target_rate as u64);
    let l = (target_rate as u64 / g) as usize; // phases
    let m = (w.sample_rate as u64 / g) as usize; // decimation

    let out_len = output_len(w.len(), w.sample_rate, target_rate);
    if out_len == 0 {
        return Ok(Waveform::new(Vec::new(), target_rate));
    }

    let phases = build_phases(l, m);
    let x = &w.samples;
    let n_in = x.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let u = n * m; // position in the upsampled stream
        let q = (u / l) as i64; // aligned input index
        let p = u % l; // phase
        let taps = &phases[p];
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate() {
            let k = q + (j as i64) - (HALF_TAPS as i64);
            if k >= 0 && k < n_in {
                acc += x[k as usize] * h;
            }
        }
        out.push(acc);
    }
    Ok(Waveform::new(out, target_rate))
}

pub fn output_len(input_len: usize, source_rate: u32, target_rate: u32) -> usize {
    // round(len·target/source), half-up, in integer arithmetic
    ((input_len as u64 * target_rate as u64 + source_rate as u64 / 2) / source_rate as u64) as usize
}

/// Tap tables per phase. Phase p, tap j applies to x[q + j - HALF_TAPS]
/// where the filter is evaluated at offset (j - HALF_TAPS) - p/L input
/// samples from the output point.
fn build_phases(l: usize, m: usize) -> Vec<Vec<f64>> {
    // Cutoff relative to the input Nyquist: 1/m (the output Nyquist), with
    // a safety rolloff.
    let fc = CUTOFF / m as f64;
    let width = HALF_TAPS as f64;
    let mut phases = Vec::with_capacity(l);
    for p in 0..l {
        let frac = p as f64 / l as f64;
        let mut taps = Vec::with_capacity(2 * HALF_TAPS + 1);
        let mut sum = 0.0;
        for j in 0..=2 * HALF_TAPS {
            let t = (j as f64 - width) - frac; // offset in input samples
            let v = fc * sinc(fc * t) * kaiser(t / width, KAISER_BETA);
            sum += v;
            taps.push(v);
        }
        // Unit DC gain per phase removes passband ripple from the
        // decomposition.
        let inv = 1.0 / sum;
        for v in &mut taps {
            *v *= inv;
        }
        phases.push(taps);
    }
    phases
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn kaiser(t: f64, beta: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - t * t).sqrt()) / bessel_i0(beta)
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..40 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, n: usize) -> Waveform {
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin() * 0.9)
            .collect();
        Waveform::new(samples, rate)
    }

    /// Naive DFT magnitude peak over bins 1..n/2.
    fn dft_peak_bin(x: &[f64]) -> usize {
        let n = x.len();
        let mut best = (0usize, -1.0);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (k, mag);
            }
        }
        best.0
    }

    #[test]
    fn same_rate_is_bitwise_identity() {
        let w = sine(440.0, 16_000, 1000);
        let r = resample(&w, 16_000).unwrap();
        assert_eq!(w, r);
    }

    #[test]
    fn upsampling_is_rejected() {
        let w = sine(440.0, 16_000, 100);
        assert!(resample(&w, 32_000).is_err());
    }

    #[test]
    fn one_khz_tone_survives_32k_to_16k() {
        let w = sine(1000.0, 32_000, 8192);
        let r = resample(&w, 16_000).unwrap();
        assert_eq!(r.len(), 4096);
        // 1 kHz at 16 kHz over 4096 samples sits in bin 256.
        let peak = dft_peak_bin(&r.samples);
        assert!(
            (peak as i64 - 256).unsigned_abs() <= 1,
            "peak at bin {peak}, expected 256±1"
        );
        // Amplitude should be preserved within a few percent.
        let rms = (r.samples.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
        assert!((rms - 0.9 / 2.0f64.sqrt()).abs() < 0.02, "rms {rms}");
    }

    #[test]
    fn fractional_ratio_44k1_to_16k() {
        let w = sine(1000.0, 44_100, 16_384);
        let r = resample(&w, 16_000).unwrap();
        assert_eq!(r.len(), output_len(16_384, 44_100, 16_000));
        let n = 4096;
        let peak = dft_peak_bin(&r.samples[..n]);
        // 1 kHz over 4096 samples at 16 kHz: bin 256.
        assert!((peak as i64 - 256).unsigned_abs() <= 1, "peak at bin {peak}");
    }

    #[test]
    fn exact_one_third_length_from_48k() {
        let w = sine(440.0, 48_000, 32_000);
        let r = resample(&w, 16_000).unwrap();
        assert_eq!(r.len(), 10_667); // round(32000/3)
    }

    #[test]
    fn dc_gain_is_unity() {
        let w = Waveform::new(vec![0.5; 9600], 48_000);
        let r = resample(&w, 16_000).unwrap();
        // Interior samples (away from edge effects) should stay at 0.5.
        for &v in &r.samples[100..r.len() - 100] {
            assert!((v - 0.5).abs() < 1e-6, "{v}");
        }
    }
}
