use anyhow::{anyhow, bail, Context, Result};
use std::path::{Path, PathBuf};

use wavegen_core::audio::{
    augment::Augmentation, cache::CacheMeta, cache::WindowCache, load_audio, quantize_signal,
    resample, QuantScheme, WindowSet, TARGET_RATE,
};
use wavegen_core::config::{PresetKind, ALL_PRESETS};
use wavegen_core::model::{Model, ModelSpec};
use wavegen_core::numerics::rng::stream;
use wavegen_core::synthesis::{generate as run_generation, GenerationSpec, SeedSource, Temperature};
use wavegen_core::train::checkpoint::{load_checkpoint, save_checkpoint, spec_from_text, spec_to_text};
use wavegen_core::train::{evaluate as run_eval, render_report, train as run_training, TrainPlan};

use crate::runconfig::RunConfig;
use crate::{EvalArgs, GenerateArgs, PrepareArgs, TrainArgs};

/// One WAV path per non-empty line; relative paths resolve against the
/// manifest's directory.
fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let p = PathBuf::from(line);
            let resolved = if p.is_absolute() { p } else { base.join(line) };
            (line.to_string(), resolved)
        })
        .collect())
}

struct PrepSettings {
    scheme: QuantScheme,
    t_ctx: usize,
    stride: usize,
    past_len: usize,
    augment_copies: usize,
    seed: u64,
}

/// Decode -> resample -> (augment) -> quantize -> window, for every track.
/// Unreadable tracks are listed and skipped.
fn build_windows(
    entries: &[(String, PathBuf)],
    s: &PrepSettings,
) -> Result<(WindowSet, CacheMeta)> {
    let mut set = WindowSet::new(s.t_ctx, s.past_len, s.scheme);
    let mut total_samples = 0u64;
    let mut ok = 0usize;
    let mut failed = 0usize;
    for (name, path) in entries {
        let result = load_audio(path).and_then(|w| resample(&w, TARGET_RATE));
        let wave = match result {
            Ok(w) => w,
            Err(e) => {
                eprintln!("skipped {name}: {e}");
                failed += 1;
                continue;
            }
        };
        ok += 1;
        total_samples += wave.len() as u64;
        let variants = std::iter::once(wave.clone()).chain((0..s.augment_copies).map(|c| {
            let mut rng = stream(s.seed, &format!("augment/{name}/{c}"));
            Augmentation::draw(wave.sample_rate, &mut rng).apply(&wave)
        }));
        for v in variants {
            set.extend_from_sequence(&quantize_signal(&v.samples, s.scheme), s.stride);
        }
    }
    if ok == 0 {
        bail!(
            "no usable tracks ({failed} failed, 0 decoded); nothing to prepare"
        );
    }
    let meta = CacheMeta {
        scheme: s.scheme,
        t_ctx: s.t_ctx,
        stride: s.stride,
        past_len: s.past_len,
        augment_copies: s.augment_copies,
        tracks: ok,
        windows: set.len(),
        total_samples,
        sources: entries.iter().map(|(n, _)| n.clone()).collect(),
    };
    Ok((set, meta))
}

fn parse_scheme(raw: &str) -> Result<QuantScheme> {
    raw.parse::<QuantScheme>().map_err(|e| anyhow!("{e}"))
}

pub fn prepare(args: PrepareArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    let manifest = cfg
        .resolve_path("manifest", args.manifest)
        .ok_or_else(|| anyhow!("prepare needs --manifest"))?;
    let out = cfg
        .resolve_path("out", args.common.out)
        .ok_or_else(|| anyhow!("prepare needs --out"))?;
    let scheme = parse_scheme(&cfg.resolve("scheme", args.scheme, "linear".into())?)?;
    let t_ctx = cfg.resolve("t_ctx", args.t_ctx, 1600usize)?;
    let stride = cfg.resolve("stride", args.stride, t_ctx / 2)?;
    let with_past = cfg.resolve("with_past", args.with_past.then_some(true), false)?;
    let past_len = if with_past { wavegen_core::audio::PAST_LEN } else { 0 };
    let augment_copies = cfg.resolve("augment_copies", args.augment_copies, 0usize)?;
    let seed = cfg.resolve("seed", args.common.seed, 0u64)?;

    let entries = read_manifest(&manifest)?;
    if entries.is_empty() {
        bail!("manifest {} is empty; zero shards written", manifest.display());
    }

    let settings = PrepSettings {
        scheme,
        t_ctx,
        stride,
        past_len,
        augment_copies,
        seed,
    };

    // Idempotence: identical prepare parameters over the same sources is a
    // cache hit.
    if WindowCache::exists(&out) {
        if let Ok(prev) = WindowCache::load_meta(&out) {
            let same = prev.scheme == scheme
                && prev.t_ctx == t_ctx
                && prev.stride == stride
                && prev.past_len == past_len
                && prev.augment_copies == augment_copies
                && prev.sources == entries.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
            if same {
                println!(
                    "cache hit: {} already holds {} windows from {} tracks",
                    out.display(),
                    prev.windows,
                    prev.tracks
                );
                cfg.write_resolved(&out)?;
                return Ok(());
            }
        }
    }

    let (set, meta) = build_windows(&entries, &settings)?;
    if set.is_empty() {
        bail!("corpus produced zero windows (tracks shorter than t_ctx+1?)");
    }
    WindowCache::write(&out, &set, &meta)?;
    cfg.write_resolved(&out)?;
    println!(
        "prepared {} windows from {} tracks ({:.2} hours) into {}",
        meta.windows,
        meta.tracks,
        meta.total_samples as f64 / TARGET_RATE as f64 / 3600.0,
        out.display()
    );
    Ok(())
}

/// Expands `--model` into an architecture; `custom` pulls its fields from
/// the config file.
fn resolve_spec(
    model_name: &str,
    t_ctx: Option<usize>,
    scheme: QuantScheme,
    cfg: &RunConfig,
) -> Result<ModelSpec> {
    if model_name == "custom" {
        let mut text = String::new();
        let kind = cfg
            .raw()
            .get("kind")
            .ok_or_else(|| anyhow!("model=custom needs kind=... in the config file"))?;
        text.push_str(&format!("kind={kind}\n"));
        text.push_str(&format!("scheme={scheme}\n"));
        text.push_str(&format!("t_ctx={}\n", t_ctx.unwrap_or(1600)));
        for (k, v) in cfg.raw() {
            if k.starts_with("xf_") || k.starts_with("wn_") || k.starts_with("cond_") {
                text.push_str(&format!("{k}={v}\n"));
            }
        }
        let (spec, _) = spec_from_text(&text).map_err(|e| anyhow!("custom model: {e}"))?;
        return Ok(spec);
    }
    let preset: PresetKind = model_name.parse().map_err(|e| anyhow!("{e}"))?;
    Ok(preset.spec(t_ctx))
}

/// Table row label for a known preset, else the canonical config one-liner.
fn display_name(model: &Model) -> String {
    for kind in ALL_PRESETS {
        if kind.spec(Some(model.t_ctx())) == model.spec {
            return kind.table_row().to_string();
        }
    }
    spec_to_text(&model.spec, model.scheme)
        .lines()
        .collect::<Vec<_>>()
        .join(" ")
}

enum CorpusSource {
    Cache(PathBuf),
    Manifest(PathBuf),
}

fn corpus_source(cache: Option<PathBuf>, manifest: Option<PathBuf>) -> Result<CorpusSource> {
    match (cache, manifest) {
        (Some(c), None) => Ok(CorpusSource::Cache(c)),
        (None, Some(m)) => Ok(CorpusSource::Manifest(m)),
        (Some(_), Some(_)) => bail!("give either --cache or --manifest, not both"),
        (None, None) => bail!("a corpus is required: --cache <dir> or --manifest <file>"),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = cfg
        .resolve_path("out", args.common.out)
        .ok_or_else(|| anyhow!("train needs --out"))?;
    let model_name = cfg.resolve("model", args.model, "xf-3".to_string())?;
    let seed = cfg.resolve("seed", args.common.seed, 0u64)?;
    let batch_size = cfg.resolve("batch_size", args.batch_size, 32usize)?;
    let max_epochs = cfg.resolve("max_epochs", args.max_epochs, 30usize)?;
    let max_steps = cfg.resolve_opt("max_steps", args.max_steps)?;
    let t_ctx_flag = cfg.resolve_opt("t_ctx", args.t_ctx)?;
    let source = corpus_source(
        cfg.resolve_path("cache", args.cache),
        cfg.resolve_path("manifest", args.manifest),
    )?;

    // The corpus fixes scheme/t_ctx when it comes from a cache.
    let (windows, scheme, t_ctx) = match source {
        CorpusSource::Cache(dir) => {
            let (set, meta) = WindowCache::load(&dir).map_err(|e| anyhow!("{e}"))?;
            if let Some(flag) = args.scheme {
                let flag = parse_scheme(&flag)?;
                if flag != meta.scheme {
                    bail!("--scheme {flag} conflicts with cache scheme {}", meta.scheme);
                }
            }
            if let Some(t) = t_ctx_flag {
                if t != meta.t_ctx {
                    bail!("--t-ctx {t} conflicts with cache t_ctx {}", meta.t_ctx);
                }
            }
            cfg.note("scheme", meta.scheme);
            cfg.note("t_ctx", meta.t_ctx);
            (set, meta.scheme, meta.t_ctx)
        }
        CorpusSource::Manifest(path) => {
            let scheme = parse_scheme(&cfg.resolve("scheme", args.scheme, "linear".into())?)?;
            let t_ctx = t_ctx_flag.unwrap_or(1600);
            cfg.note("t_ctx", t_ctx);
            let stride = cfg.resolve("stride", None, t_ctx / 2)?;
            let augment_copies = cfg.resolve("augment_copies", args.augment_copies, 0usize)?;
            let spec_probe = resolve_spec(&model_name, Some(t_ctx), scheme, &cfg)?;
            let entries = read_manifest(&path)?;
            if entries.is_empty() {
                bail!("manifest {} is empty", path.display());
            }
            let (set, _) = build_windows(
                &entries,
                &PrepSettings {
                    scheme,
                    t_ctx,
                    stride,
                    past_len: spec_probe.past_len().unwrap_or(0),
                    augment_copies,
                    seed,
                },
            )?;
            (set, scheme, t_ctx)
        }
    };

    let spec = resolve_spec(&model_name, Some(t_ctx), scheme, &cfg)?;
    if let Some(need) = spec.past_len() {
        if windows.past_len != need {
            bail!(
                "model '{model_name}' needs {need}-sample past windows, corpus has {}; prepare the cache with --with-past",
                windows.past_len
            );
        }
    }
    let mut model = Model::init(spec, scheme, seed).map_err(|e| anyhow!("{e}"))?;

    let plan = TrainPlan {
        batch_size,
        max_epochs,
        max_steps,
        seed,
        ..TrainPlan::default()
    };
    std::fs::create_dir_all(&out)?;
    cfg.write_resolved(&out)?;
    let report = run_training(&mut model, &windows, &plan, Some(&out.join("curve.txt")))
        .map_err(|e| anyhow!("{e}"))?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&model, &ckpt).map_err(|e| anyhow!("{e}"))?;
    println!(
        "trained {} for {} steps ({} epochs); val_loss {:.4}, val_top5 {:.2}%; checkpoint {}",
        model_name,
        report.steps,
        report.epochs,
        report.final_val_loss,
        report.final_val_top5 * 100.0,
        ckpt.display()
    );
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = cfg
        .resolve_path("out", args.common.out)
        .ok_or_else(|| anyhow!("eval needs --out"))?;
    let seed = cfg.resolve("seed", args.common.seed, 0u64)?;
    let max_windows = cfg.resolve_opt("max_windows", args.max_windows)?;
    let source = corpus_source(
        cfg.resolve_path("cache", args.cache),
        cfg.resolve_path("manifest", args.manifest),
    )?;

    let mut rows = Vec::new();
    let mut cached: Option<WindowSet> = None;
    for ckpt_path in &args.checkpoints {
        let model = load_checkpoint(ckpt_path).map_err(|e| anyhow!("{}: {e}", ckpt_path.display()))?;
        let windows = match (&source, &cached) {
            (_, Some(w)) if w.t_ctx == model.t_ctx() && w.scheme == model.scheme => w.clone(),
            (CorpusSource::Cache(dir), _) => {
                let (set, _) = WindowCache::load(dir).map_err(|e| anyhow!("{e}"))?;
                set
            }
            (CorpusSource::Manifest(path), _) => {
                let entries = read_manifest(path)?;
                if entries.is_empty() {
                    bail!("manifest {} is empty", path.display());
                }
                // Evaluation never augments.
                let (set, _) = build_windows(
                    &entries,
                    &PrepSettings {
                        scheme: model.scheme,
                        t_ctx: model.t_ctx(),
                        stride: model.t_ctx() / 2,
                        past_len: model.spec.past_len().unwrap_or(0),
                        augment_copies: 0,
                        seed,
                    },
                )?;
                set
            }
        };
        if windows.t_ctx != model.t_ctx() {
            bail!(
                "{}: checkpoint t_ctx {} does not match corpus t_ctx {}",
                ckpt_path.display(),
                model.t_ctx(),
                windows.t_ctx
            );
        }
        if let Some(need) = model.spec.past_len() {
            if windows.past_len != need {
                bail!(
                    "{}: conditioned checkpoint needs {need}-sample past windows (prepare with --with-past)",
                    ckpt_path.display()
                );
            }
        }
        let name = display_name(&model);
        let row = run_eval(&model, &windows, &name, max_windows, seed)
            .map_err(|e| anyhow!("{}: {e}", ckpt_path.display()))?;
        rows.push(row);
        cached = Some(windows);
    }

    let report = render_report(&rows);
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("report.txt"), &report)?;
    cfg.write_resolved(&out)?;
    print!("{report}");
    Ok(())
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    let out = cfg
        .resolve_path("out", args.common.out)
        .ok_or_else(|| anyhow!("generate needs --out"))?;
    let ckpt = cfg
        .resolve_path("checkpoint", args.checkpoint)
        .ok_or_else(|| anyhow!("generate needs --checkpoint"))?;
    let seed = cfg.resolve("seed", args.common.seed, 0u64)?;
    let n_samples = cfg.resolve("n_samples", args.n_samples, 16_000usize)?;
    let temperature_raw = cfg.resolve("temperature", args.temperature, "1.0".to_string())?;
    let temperature: Temperature = temperature_raw.parse().map_err(|e| anyhow!("{e}"))?;
    let include_seed = cfg.resolve("include_seed", args.include_seed, true)?;
    let seed_source_raw = cfg.resolve("seed_source", args.seed_source, "noise".to_string())?;
    let seed_source = match seed_source_raw.as_str() {
        "noise" => SeedSource::Noise,
        "silence" => SeedSource::Silence,
        other => match other.strip_prefix("snippet:") {
            Some(path) => SeedSource::Snippet(PathBuf::from(path)),
            None => bail!(
                "bad --seed-source '{other}' (expected noise | silence | snippet:<path>)"
            ),
        },
    };

    let model = load_checkpoint(&ckpt).map_err(|e| anyhow!("{}: {e}", ckpt.display()))?;
    let spec = GenerationSpec {
        seed_source,
        n_samples,
        temperature,
        rng_seed: seed,
        include_seed,
    };
    let generated = run_generation(&model, &spec).map_err(|e| anyhow!("{e}"))?;
    std::fs::create_dir_all(&out)?;
    let wav = out.join("generated.wav");
    let levels = out.join("generated_levels.txt");
    wavegen_core::synthesis::write_outputs(&generated, &wav, &levels)
        .map_err(|e| anyhow!("{e}"))?;
    cfg.write_resolved(&out)?;
    println!(
        "generated {} samples ({} total levels with seed) into {}",
        n_samples,
        generated.levels.len(),
        wav.display()
    );
    Ok(())
}
