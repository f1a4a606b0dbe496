//! Python bindings: audio I/O, quantization, model construction, scoring
//! and generation.
//!
//! Build with `cargo build -p wavegen-py --release`, then import the
//! produced cdylib as `wavegen_py` (see python/smoke_test.py, which copies
//! it next to itself under the right name).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wavegen_core::audio::{self, QuantScheme};
use wavegen_core::conditioner::ConditionerConfig;
use wavegen_core::config::PresetKind;
use wavegen_core::error::Error;
use wavegen_core::model::{Model as CoreModel, ModelSpec};
use wavegen_core::synthesis::{self, GenerationSpec, SeedSource, Temperature};
use wavegen_core::train::checkpoint::{load_checkpoint, save_checkpoint, spec_to_text};
use wavegen_core::train::metrics::{cross_entropy, top_k_accuracy};
use wavegen_core::transformer::TransformerConfig;
use wavegen_core::wavenet::WavenetConfig;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_scheme(scheme: &str) -> PyResult<QuantScheme> {
    scheme.parse().map_err(py_err)
}

/// Decode a PCM WAV file to (mono samples in [-1,1], sample_rate).
#[pyfunction]
fn load_audio(path: &str) -> PyResult<(Vec<f64>, u32)> {
    let w = audio::load_audio(path).map_err(py_err)?;
    Ok((w.samples, w.sample_rate))
}

/// Write mono 16-bit PCM.
#[pyfunction]
fn write_wav(path: &str, samples: Vec<f64>, sample_rate: u32) -> PyResult<()> {
    audio::write_wav_pcm16(path, &samples, sample_rate).map_err(py_err)
}

/// Kaiser windowed-sinc downsampling to `target_rate`.
#[pyfunction]
fn resample(samples: Vec<f64>, sample_rate: u32, target_rate: u32) -> PyResult<Vec<f64>> {
    let w = audio::Waveform::new(samples, sample_rate);
    Ok(audio::resample(&w, target_rate).map_err(py_err)?.samples)
}

/// Map amplitudes to 8-bit levels; scheme is "linear" or "mu-law".
#[pyfunction]
#[pyo3(signature = (samples, scheme = "linear"))]
fn quantize(samples: Vec<f64>, scheme: &str) -> PyResult<Vec<u8>> {
    Ok(audio::quantize_signal(&samples, parse_scheme(scheme)?))
}

/// Map 8-bit levels back to bin-center amplitudes.
#[pyfunction]
#[pyo3(signature = (levels, scheme = "linear"))]
fn dequantize(levels: Vec<u8>, scheme: &str) -> PyResult<Vec<f64>> {
    Ok(audio::dequantize_signal(&levels, parse_scheme(scheme)?))
}

/// A waveform model: transformer, wavenet, or conditioned transformer.
#[pyclass]
struct Model {
    inner: CoreModel,
}

#[pymethods]
impl Model {
    /// Causal transformer with the given architecture.
    #[staticmethod]
    #[pyo3(signature = (layers, heads, embed, ff_width, t_ctx, seed = 0, scheme = "linear", dropout = 0.1))]
    #[allow(clippy::too_many_arguments)]
    fn transformer(
        layers: usize,
        heads: usize,
        embed: usize,
        ff_width: usize,
        t_ctx: usize,
        seed: u64,
        scheme: &str,
        dropout: f64,
    ) -> PyResult<Model> {
        let spec = ModelSpec::Transformer(TransformerConfig {
            layers,
            heads,
            embed,
            ff_width,
            dropout,
            t_ctx,
        });
        Ok(Model {
            inner: CoreModel::init(spec, parse_scheme(scheme)?, seed).map_err(py_err)?,
        })
    }

    /// Dilated-convolution baseline.
    #[staticmethod]
    #[pyo3(signature = (stacks, layers_per_stack, filters, t_ctx, seed = 0, scheme = "linear", gated = true))]
    fn wavenet(
        stacks: usize,
        layers_per_stack: usize,
        filters: usize,
        t_ctx: usize,
        seed: u64,
        scheme: &str,
        gated: bool,
    ) -> PyResult<Model> {
        let spec = ModelSpec::Wavenet(WavenetConfig {
            stacks,
            layers_per_stack,
            filters,
            dilation_base: 2,
            gated,
            t_ctx,
        });
        Ok(Model {
            inner: CoreModel::init(spec, parse_scheme(scheme)?, seed).map_err(py_err)?,
        })
    }

    /// Transformer conditioned on a wider past window via a conv encoder.
    #[staticmethod]
    #[pyo3(signature = (layers, heads, embed, ff_width, t_ctx, past_len = 4000, seed = 0, scheme = "linear"))]
    #[allow(clippy::too_many_arguments)]
    fn conditioned_transformer(
        layers: usize,
        heads: usize,
        embed: usize,
        ff_width: usize,
        t_ctx: usize,
        past_len: usize,
        seed: u64,
        scheme: &str,
    ) -> PyResult<Model> {
        let spec = ModelSpec::CondTransformer {
            xf: TransformerConfig {
                layers,
                heads,
                embed,
                ff_width,
                dropout: 0.1,
                t_ctx,
            },
            cond: ConditionerConfig {
                past_len,
                ..ConditionerConfig::default()
            },
        };
        Ok(Model {
            inner: CoreModel::init(spec, parse_scheme(scheme)?, seed).map_err(py_err)?,
        })
    }

    /// One of the six named presets: wavenet-vanilla | wavenet-stacked |
    /// xf-3 | xf-3-cond | xf-6 | xf-8.
    #[staticmethod]
    #[pyo3(signature = (name, t_ctx = None, seed = 0, scheme = "linear"))]
    fn preset(name: &str, t_ctx: Option<usize>, seed: u64, scheme: &str) -> PyResult<Model> {
        let kind: PresetKind = name.parse().map_err(py_err)?;
        Ok(Model {
            inner: CoreModel::init(kind.spec(t_ctx), parse_scheme(scheme)?, seed)
                .map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        Ok(Model {
            inner: load_checkpoint(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn t_ctx(&self) -> usize {
        self.inner.t_ctx()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.to_string()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.params.scalar_count()
    }

    fn describe(&self) -> String {
        spec_to_text(&self.inner.spec, self.inner.scheme)
            .lines()
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Per-position 256-way logits for a level sequence (evaluation mode).
    #[pyo3(signature = (levels, past = None))]
    fn logits(&self, levels: Vec<u8>, past: Option<Vec<u8>>) -> PyResult<Vec<Vec<f64>>> {
        let logits = self
            .inner
            .logits(&levels, past.as_deref())
            .map_err(py_err)?;
        let (t, c) = logits.dims2("logits").map_err(py_err)?;
        Ok((0..t)
            .map(|i| logits.data()[i * c..(i + 1) * c].to_vec())
            .collect())
    }

    /// Teacher-forced scoring of a sequence against its own shift-by-one
    /// targets: returns (mean_nll, top5_accuracy).
    #[pyo3(signature = (levels, past = None))]
    fn score_sequence(&self, levels: Vec<u8>, past: Option<Vec<u8>>) -> PyResult<(f64, f64)> {
        if levels.len() < 2 {
            return Err(PyValueError::new_err("need at least two levels to score"));
        }
        let input = &levels[..levels.len() - 1];
        let target = &levels[1..];
        let logits = self.inner.logits(input, past.as_deref()).map_err(py_err)?;
        let nll = cross_entropy(&logits, target).map_err(py_err)?;
        let top5 = top_k_accuracy(&logits, target, 5).map_err(py_err)?;
        Ok((nll, top5))
    }

    /// Autoregressive sampling. `temperature` is a float or "argmax";
    /// `seed_source` is "noise", "silence", or a WAV path prefixed
    /// "snippet:". Returns (levels, samples).
    #[pyo3(signature = (n_samples, temperature = "1.0", seed = 0, seed_source = "noise", include_seed = false))]
    fn generate(
        &self,
        n_samples: usize,
        temperature: &str,
        seed: u64,
        seed_source: &str,
        include_seed: bool,
    ) -> PyResult<(Vec<u8>, Vec<f64>)> {
        let temperature: Temperature = temperature.parse().map_err(py_err)?;
        let seed_source = match seed_source {
            "noise" => SeedSource::Noise,
            "silence" => SeedSource::Silence,
            other => match other.strip_prefix("snippet:") {
                Some(p) => SeedSource::Snippet(p.into()),
                None => {
                    return Err(PyValueError::new_err(format!(
                        "bad seed_source '{other}'"
                    )))
                }
            },
        };
        let spec = GenerationSpec {
            seed_source,
            n_samples,
            temperature,
            rng_seed: seed,
            include_seed,
        };
        let out = synthesis::generate(&self.inner, &spec).map_err(py_err)?;
        Ok((out.levels, out.waveform.samples))
    }
}

#[pymodule]
fn wavegen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(load_audio, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(dequantize, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
