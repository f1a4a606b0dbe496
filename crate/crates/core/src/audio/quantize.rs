//! 8-bit amplitude quantization, linear or mu-law companded.
//!
//! Linear is the default scheme; mu-law (μ = 255) is kept behind a flag for
//! parity with convolutional-baseline lineage. Reports must name the scheme
//! in use. Dequantization returns the midpoint of the level's amplitude bin,
//! so the round-trip error is bounded by half the local bin width in both
//! schemes.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const MU: f64 = 255.0;

/// Quantization level representing digital silence (linear zero).
pub const SILENCE_LEVEL: u8 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantScheme {
    Linear,
    MuLaw,
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantScheme::Linear => write!(f, "linear"),
            QuantScheme::MuLaw => write!(f, "mu-law"),
        }
    }
}

impl FromStr for QuantScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "linear" => Ok(QuantScheme::Linear),
            "mu-law" | "mu_law" | "mulaw" => Ok(QuantScheme::MuLaw),
            other => Err(Error::Config(format!(
                "unknown quantization scheme '{other}' (expected linear | mu-law)"
            ))),
        }
    }
}

/// Maps an amplitude to a level in 0..=255. Input is clamped to [-1, 1].
pub fn quantize(x: f64, scheme: QuantScheme) -> u8 {
    let x = x.clamp(-1.0, 1.0);
    let y = match scheme {
        QuantScheme::Linear => x,
        QuantScheme::MuLaw => compand(x),
    };
    let level = ((y + 1.0) / 2.0 * 256.0).floor();
    level.clamp(0.0, 255.0) as u8
}

/// Midpoint of the amplitude bin addressed by `level`.
pub fn dequantize(level: u8, scheme: QuantScheme) -> f64 {
    match scheme {
        QuantScheme::Linear => (level as f64 + 0.5) / 128.0 - 1.0,
        QuantScheme::MuLaw => {
            // Bin edges live in the companded domain; the midpoint is taken
            // after expanding so it bisects the bin in amplitude.
            let y_lo = level as f64 / 128.0 - 1.0;
            let y_hi = (level as f64 + 1.0) / 128.0 - 1.0;
            (expand(y_lo) + expand(y_hi)) / 2.0
        }
    }
}

pub fn quantize_signal(samples: &[f64], scheme: QuantScheme) -> Vec<u8> {
    samples.iter().map(|&x| quantize(x, scheme)).collect()
}

pub fn dequantize_signal(levels: &[u8], scheme: QuantScheme) -> Vec<f64> {
    levels.iter().map(|&l| dequantize(l, scheme)).collect()
}

/// sign(x)·ln(1+μ|x|)/ln(1+μ)
fn compand(x: f64) -> f64 {
    x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln()
}

/// Inverse companding: sign(y)·((1+μ)^|y| − 1)/μ
fn expand(y: f64) -> f64 {
    y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU
}

/// Amplitude-domain edges of a level's bin.
pub fn bin_edges(level: u8, scheme: QuantScheme) -> (f64, f64) {
    let y_lo = level as f64 / 128.0 - 1.0;
    let y_hi = (level as f64 + 1.0) / 128.0 - 1.0;
    match scheme {
        QuantScheme::Linear => (y_lo, y_hi),
        QuantScheme::MuLaw => (expand(y_lo), expand(y_hi)),
    }
}
