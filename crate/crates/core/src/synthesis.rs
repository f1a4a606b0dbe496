//! Autoregressive generation: sample the next level, append it, repeat.
//!
//! Each step feeds the last T_ctx levels (left-padded with silence) through
//! the model and samples the next level from the temperature-scaled softmax
//! of the final position's logits; argmax is the temperature-to-zero limit.
//! For the conditioned model the 4000-sample past window slides along with
//! generation. The context is recomputed from scratch every step — correct
//! and simple at desk scale; incremental caches are out of scope.

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{
    dequantize_signal, load_audio, quantize_signal, resample, Waveform, SILENCE_LEVEL,
    TARGET_RATE,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Temperature {
    /// Always take the highest-scoring level (ties to the lowest index).
    Argmax,
    Value(f64),
}

impl Temperature {
    pub fn validate(&self) -> Result<()> {
        match self {
            Temperature::Argmax => Ok(()),
            Temperature::Value(t) if *t > 0.0 && t.is_finite() => Ok(()),
            Temperature::Value(t) => Err(Error::Config(format!(
                "temperature must be > 0 in probabilistic mode, got {t}"
            ))),
        }
    }
}

impl std::str::FromStr for Temperature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Temperature> {
        if s == "argmax" {
            return Ok(Temperature::Argmax);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("bad temperature '{s}'")))?;
        Ok(Temperature::Value(v))
    }
}

#[derive(Clone, Debug)]
pub enum SeedSource {
    /// i.i.d. uniform levels covering one full context window.
    Noise,
    /// No seed material; the context is all silence padding.
    Silence,
    /// A waveform snippet, resampled and quantized with the model's scheme.
    Snippet(PathBuf),
}

#[derive(Clone, Debug)]
pub struct GenerationSpec {
    pub seed_source: SeedSource,
    pub n_samples: usize,
    pub temperature: Temperature,
    pub rng_seed: u64,
    /// Prepend the seed material to the returned sequence.
    pub include_seed: bool,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec {
            seed_source: SeedSource::Noise,
            n_samples: 16_000,
            temperature: Temperature::Value(1.0),
            rng_seed: 0,
            include_seed: true,
        }
    }
}

/// Draws one level from softmax(logits / temperature), or the argmax.
pub fn sample_next(logits: &[f64], temperature: Temperature, rng: &mut ChaCha8Rng) -> Result<u8> {
    if logits.is_empty() || logits.len() > 256 {
        return Err(Error::InvalidInput(format!(
            "expected up to 256 logits, got {}",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sampling logits".into()));
    }
    temperature.validate()?;
    match temperature {
        Temperature::Argmax => {
            let mut best = 0usize;
            for (i, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = i;
                }
            }
            Ok(best as u8)
        }
        Temperature::Value(t) => {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|&v| ((v - max) / t).exp()).collect();
            let total: f64 = weights.iter().sum();
            let coin = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if coin < acc {
                    return Ok(i as u8);
                }
            }
            Ok((weights.len() - 1) as u8)
        }
    }
}

fn seed_levels(model: &Model, spec: &GenerationSpec) -> Result<Vec<u8>> {
    match &spec.seed_source {
        SeedSource::Silence => Ok(Vec::new()),
        SeedSource::Noise => {
            let mut rng = stream(spec.rng_seed, "noise-seed");
            Ok((0..model.t_ctx()).map(|_| rng.random::<u8>()).collect())
        }
        SeedSource::Snippet(path) => {
            let w = load_audio(path)?;
            let w = resample(&w, TARGET_RATE)?;
            let levels = quantize_signal(&w.samples, model.scheme);
            if levels.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "seed snippet {} holds no samples",
                    path.display()
                )));
            }
            Ok(levels)
        }
    }
}

/// The generated audio plus the raw level sequence for reproducibility
/// diffing.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub waveform: Waveform,
    pub levels: Vec<u8>,
    pub seed_len: usize,
}

/// Runs the sampling loop: window the last T_ctx levels (left-padded with
/// silence), take the final position's logits, sample, append, repeat.
pub fn generate(model: &Model, spec: &GenerationSpec) -> Result<Generated> {
    spec.temperature.validate()?;
    let t_ctx = model.t_ctx();
    let past_len = model.spec.past_len();
    let seed = seed_levels(model, spec)?;
    let seed_len = seed.len();
    let mut buf = seed;
    let mut rng = stream(spec.rng_seed, "sampling");
    for _ in 0..spec.n_samples {
        let have = buf.len().min(t_ctx);
        let mut window = vec![SILENCE_LEVEL; t_ctx - have];
        window.extend_from_slice(&buf[buf.len() - have..]);
        let past = past_len.map(|p| {
            let history = &buf[..buf.len() - have];
            Model::pad_past(history, p)
        });
        let logits = model.logits(&window, past.as_deref())?;
        let (t, c) = logits.dims2("generate")?;
        let last_row = &logits.data()[(t - 1) * c..];
        buf.push(sample_next(last_row, spec.temperature, &mut rng)?);
    }
    let levels = if spec.include_seed {
        buf
    } else {
        buf[seed_len..].to_vec()
    };
    let samples = dequantize_signal(&levels, model.scheme);
    Ok(Generated {
        waveform: Waveform::new(samples, TARGET_RATE),
        levels,
        seed_len: if spec.include_seed { seed_len } else { 0 },
    })
}

/// Writes the WAV plus the side-channel text file of emitted levels
/// (one per line).
pub fn write_outputs(
    generated: &Generated,
    wav_path: impl AsRef<std::path::Path>,
    levels_path: impl AsRef<std::path::Path>,
) -> Result<()> {
    crate::audio::write_wav_pcm16(
        wav_path,
        &generated.waveform.samples,
        generated.waveform.sample_rate,
    )?;
    let mut text = String::with_capacity(generated.levels.len() * 4);
    for &l in &generated.levels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(levels_path, text)?;
    Ok(())
}

/// Naive DFT magnitude peak over bins 1..n/2; the usual oracle for checking
/// generated tones.
pub fn dft_peak_bin(samples: &[f64]) -> usize {
    let n = samples.len();
    let mut best = (0usize, -1.0f64);
    for k in 1..n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        let w = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        for (i, &v) in samples.iter().enumerate() {
            let ang = w * i as f64;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::QuantScheme;
    use crate::model::ModelSpec;
    use crate::numerics::rng::stream;
    use crate::transformer::TransformerConfig;

    fn tiny_model() -> Model {
        Model::init(
            ModelSpec::Transformer(TransformerConfig {
                layers: 1,
                heads: 2,
                embed: 8,
                ff_width: 16,
                dropout: 0.0,
                t_ctx: 32,
            }),
            QuantScheme::Linear,
            5,
        )
        .unwrap()
    }

    #[test]
    fn argmax_takes_the_unique_maximum() {
        let mut logits = vec![0.0; 256];
        logits[37] = 3.0;
        let mut rng = stream(0, "t");
        for _ in 0..10 {
            assert_eq!(
                sample_next(&logits, Temperature::Argmax, &mut rng).unwrap(),
                37
            );
        }
    }

    #[test]
    fn argmax_breaks_ties_toward_the_lowest_level() {
        let mut logits = vec![0.0; 256];
        logits[9] = 5.0;
        logits[200] = 5.0;
        let mut rng = stream(0, "t");
        assert_eq!(
            sample_next(&logits, Temperature::Argmax, &mut rng).unwrap(),
            9
        );
    }

    #[test]
    fn uniform_sampling_passes_a_chi_square_test() {
        let logits = vec![0.0; 256];
        let mut rng = stream(42, "chi2");
        let draws = 100_000usize;
        let mut counts = [0u32; 256];
        for _ in 0..draws {
            let l = sample_next(&logits, Temperature::Value(1.0), &mut rng).unwrap();
            counts[l as usize] += 1;
        }
        let expected = draws as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99th percentile of chi-square with 255 degrees of freedom.
        assert!(chi2 < 310.5, "chi2 = {chi2}");
    }

    #[test]
    fn low_temperature_sharpens_to_the_larger_logit() {
        // Levels 0 and 1 get logits 0 and 1; everything else is buried.
        let mut logits = vec![-1e9; 256];
        logits[0] = 0.0;
        logits[1] = 1.0;
        let mut rng = stream(7, "sharp");
        let mut ones = 0usize;
        let draws = 10_000;
        for _ in 0..draws {
            if sample_next(&logits, Temperature::Value(0.01), &mut rng).unwrap() == 1 {
                ones += 1;
            }
        }
        // Odds between the two classes are e^100.
        assert!(ones as f64 / draws as f64 > 0.999, "{ones}/{draws}");
    }

    #[test]
    fn non_positive_temperature_is_a_configuration_error() {
        let logits = vec![0.0; 256];
        let mut rng = stream(0, "t");
        assert!(sample_next(&logits, Temperature::Value(0.0), &mut rng).is_err());
        assert!(sample_next(&logits, Temperature::Value(-1.0), &mut rng).is_err());
    }

    #[test]
    fn sampling_frequencies_track_the_softmax() {
        let mut logits = vec![-1e9; 256];
        logits[10] = 0.0;
        logits[11] = 2.0f64.ln(); // p(11) = 2·p(10)
        let mut rng = stream(3, "freq");
        let mut counts = [0usize; 2];
        let draws = 60_000;
        for _ in 0..draws {
            match sample_next(&logits, Temperature::Value(1.0), &mut rng).unwrap() {
                10 => counts[0] += 1,
                11 => counts[1] += 1,
                other => panic!("impossible level {other}"),
            }
        }
        let ratio = counts[1] as f64 / counts[0] as f64;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn argmax_generation_is_deterministic() {
        let model = tiny_model();
        let spec = GenerationSpec {
            seed_source: SeedSource::Noise,
            n_samples: 40,
            temperature: Temperature::Argmax,
            rng_seed: 11,
            include_seed: true,
        };
        let a = generate(&model, &spec).unwrap();
        let b = generate(&model, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.levels.len(), model.t_ctx() + 40);
    }

    #[test]
    fn zero_samples_returns_the_dequantized_seed() {
        let model = tiny_model();
        let spec = GenerationSpec {
            seed_source: SeedSource::Noise,
            n_samples: 0,
            temperature: Temperature::Value(1.0),
            rng_seed: 3,
            include_seed: true,
        };
        let out = generate(&model, &spec).unwrap();
        let mut rng = stream(3, "noise-seed");
        let seed: Vec<u8> = (0..model.t_ctx()).map(|_| rng.random::<u8>()).collect();
        assert_eq!(out.levels, seed);
        let expect = dequantize_signal(&seed, QuantScheme::Linear);
        assert_eq!(out.waveform.samples, expect);
    }

    #[test]
    fn silence_seed_generates_requested_length_only() {
        let model = tiny_model();
        let spec = GenerationSpec {
            seed_source: SeedSource::Silence,
            n_samples: 25,
            temperature: Temperature::Value(0.8),
            rng_seed: 9,
            include_seed: true,
        };
        let out = generate(&model, &spec).unwrap();
        assert_eq!(out.levels.len(), 25);
        assert_eq!(out.seed_len, 0);
    }

    #[test]
    fn empty_snippet_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        crate::audio::write_wav_pcm16(&path, &[], 16_000).unwrap();
        let model = tiny_model();
        let spec = GenerationSpec {
            seed_source: SeedSource::Snippet(path),
            n_samples: 4,
            temperature: Temperature::Value(1.0),
            rng_seed: 0,
            include_seed: true,
        };
        assert!(generate(&model, &spec).is_err());
    }

    #[test]
    fn conditioned_generation_slides_the_past_window() {
        use crate::conditioner::ConditionerConfig;
        let model = Model::init(
            ModelSpec::CondTransformer {
                xf: TransformerConfig {
                    layers: 1,
                    heads: 2,
                    embed: 8,
                    ff_width: 16,
                    dropout: 0.0,
                    t_ctx: 16,
                },
                cond: ConditionerConfig {
                    conv_layers: 2,
                    filters: 8,
                    latent_dim: 8,
                    past_len: 32,
                },
            },
            QuantScheme::Linear,
            13,
        )
        .unwrap();
        let spec = GenerationSpec {
            seed_source: SeedSource::Noise,
            n_samples: 30,
            temperature: Temperature::Value(1.0),
            rng_seed: 4,
            include_seed: false,
        };
        let out = generate(&model, &spec).unwrap();
        assert_eq!(out.levels.len(), 30);
    }

    #[test]
    fn outputs_write_wav_and_level_file() {
        let dir = tempfile::tempdir().unwrap();
        let model = tiny_model();
        let out = generate(
            &model,
            &GenerationSpec {
                n_samples: 10,
                seed_source: SeedSource::Silence,
                temperature: Temperature::Argmax,
                rng_seed: 0,
                include_seed: true,
            },
        )
        .unwrap();
        let wav = dir.path().join("g.wav");
        let lv = dir.path().join("g.levels.txt");
        write_outputs(&out, &wav, &lv).unwrap();
        let reread = crate::audio::load_audio(&wav).unwrap();
        assert_eq!(reread.len(), 10);
        let text = std::fs::read_to_string(&lv).unwrap();
        assert_eq!(text.lines().count(), 10);
        for line in text.lines() {
            let _: u8 = line.parse().unwrap();
        }
    }

    #[test]
    fn dft_oracle_finds_a_pure_tone() {
        let w = crate::signal::sine(440.0, 0.9, 16_000, 1600);
        // 440 Hz over 1600 samples at 16 kHz: bin 44 exactly.
        assert_eq!(dft_peak_bin(&w.samples), 44);
    }
}
