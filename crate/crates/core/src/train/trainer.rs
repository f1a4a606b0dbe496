//! The training loop: seeded shuffling, data-parallel batches, Adam with a
//! staged learning rate, per-epoch validation, and evaluation.
//!
//! Batch items are evaluated concurrently, each on its own tape; gradients
//! are then summed in window order at a barrier, so checkpoints are bitwise
//! reproducible under a fixed seed regardless of thread count. Dropout masks
//! are keyed by (epoch, step, window id), never by thread schedule.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

use crate::audio::windows::WindowSet;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::adam::{adam_step, AdamConfig, AdamState, UpdateOutcome};
use crate::numerics::params::{accumulate_grads, scale_grads, ParamGrads};
use crate::numerics::rng::stream;
use crate::numerics::tape::Tape;
use crate::train::metrics::{cross_entropy, top_k_accuracy};
use crate::train::report::EvalReport;

#[derive(Clone, Debug)]
pub struct TrainPlan {
    pub batch_size: usize,
    /// Staged learning rates; training never revisits an earlier stage.
    pub lr_stages: Vec<f64>,
    /// Epochs to hold the first stage before plateau logic may drop it.
    pub warm_epochs: usize,
    pub max_epochs: usize,
    /// Consecutive validation evaluations without > 0.1% relative
    /// improvement that trigger a stage drop.
    pub plateau_window: usize,
    pub seed: u64,
    /// Fraction of windows held out for validation.
    pub val_fraction: f64,
    /// Hard cap on optimizer steps, across epochs.
    pub max_steps: Option<usize>,
    /// Stop once validation top-5 accuracy reaches this fraction.
    pub early_stop_top5: Option<f64>,
    /// Run batch evaluation on a dedicated pool of this many threads;
    /// `None` uses the global pool (RAYON_NUM_THREADS).
    pub threads: Option<usize>,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            batch_size: 32,
            lr_stages: vec![1e-4, 1e-5, 1e-6],
            warm_epochs: 10,
            max_epochs: 30,
            plateau_window: 2,
            seed: 0,
            val_fraction: 0.05,
            max_steps: None,
            early_stop_top5: None,
            threads: None,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.lr_stages.is_empty() {
            return Err(Error::Config("at least one learning-rate stage".into()));
        }
        if self.lr_stages.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config(
                "learning-rate stages must be non-increasing".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0, 1)".into()));
        }
        if self.plateau_window == 0 {
            return Err(Error::Config("plateau window must be positive".into()));
        }
        Ok(())
    }
}

/// One loss-curve record, written per validation evaluation.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top5: f64,
}

impl CurvePoint {
    pub const HEADER: &'static str = "step, epoch, lr, train_loss, val_loss, val_top5";

    pub fn line(&self) -> String {
        format!(
            "{}, {}, {:e}, {:.6}, {:.6}, {:.6}",
            self.step, self.epoch, self.lr, self.train_loss, self.val_loss, self.val_top5
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub curve: Vec<CurvePoint>,
    pub steps: usize,
    pub epochs: usize,
    pub skipped_updates: usize,
    pub final_val_loss: f64,
    pub final_val_top5: f64,
}

/// Loss and parameter gradients for one window, on its own tape.
fn window_loss_grads(
    model: &Model,
    set: &WindowSet,
    index: usize,
    dropout_tag: &str,
) -> Result<(f64, ParamGrads)> {
    let w = set.window(index);
    let tape = Tape::new();
    let vars = model.params.trace(&tape);
    let mut rng = stream(0, dropout_tag); // tag already folds the run seed in
    let logits = Model::forward_vars(&model.spec, &vars, w.input, w.past, Some(&mut rng))?;
    let loss = logits.cross_entropy(w.target)?;
    let value = loss.value().data()[0];
    let grads = tape.backward(&loss)?;
    Ok((value, model.params.collect_grads(&vars, &grads)))
}

/// Per-item losses and the batch-mean gradient, evaluated concurrently and
/// reduced in window order.
pub(crate) fn batch_loss_grads(
    model: &Model,
    set: &WindowSet,
    indices: &[usize],
    seed: u64,
    epoch: usize,
    step: usize,
) -> Result<(Vec<f64>, ParamGrads)> {
    let results: Vec<Result<(f64, ParamGrads)>> = indices
        .par_iter()
        .map(|&i| {
            let tag = format!("dropout/{seed}/e{epoch}/s{step}/w{i}");
            window_loss_grads(model, set, i, &tag)
        })
        .collect();
    let mut losses = Vec::with_capacity(indices.len());
    let mut acc = ParamGrads::new();
    for r in results {
        let (loss, grads) = r?;
        losses.push(loss);
        accumulate_grads(&mut acc, &grads)?;
    }
    scale_grads(&mut acc, 1.0 / indices.len() as f64);
    Ok((losses, acc))
}

/// Mean cross-entropy and top-5 accuracy over a set of windows, eval mode.
fn validate_windows(model: &Model, set: &WindowSet, indices: &[usize]) -> Result<(f64, f64)> {
    let scored: Vec<Result<(f64, f64, usize)>> = indices
        .par_iter()
        .map(|&i| {
            let w = set.window(i);
            let logits = model.logits(w.input, w.past)?;
            let nll = cross_entropy(&logits, w.target)?;
            let top5 = top_k_accuracy(&logits, w.target, 5)?;
            Ok((nll * w.target.len() as f64, top5 * w.target.len() as f64, w.target.len()))
        })
        .collect();
    let mut nll_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut count = 0usize;
    for r in scored {
        let (nll, hits, n) = r?;
        nll_sum += nll;
        hit_sum += hits;
        count += n;
    }
    if count == 0 {
        return Err(Error::InvalidInput("no windows to validate".into()));
    }
    Ok((nll_sum / count as f64, hit_sum / count as f64))
}

fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trains in place per the plan, returning the loss curve. The curve is
/// also appended to `curve_path` as it is produced, when given.
pub fn train(
    model: &mut Model,
    windows: &WindowSet,
    plan: &TrainPlan,
    curve_path: Option<&Path>,
) -> Result<TrainReport> {
    plan.validate()?;
    if windows.is_empty() {
        return Err(Error::InvalidInput("corpus yields no windows".into()));
    }
    if windows.scheme != model.scheme {
        return Err(Error::Config(format!(
            "quantization scheme mismatch: model {} vs corpus {}",
            model.scheme, windows.scheme
        )));
    }
    if let Some(need) = model.spec.past_len() {
        if windows.past_len != need {
            return Err(Error::Config(format!(
                "conditioned model needs {need}-sample past windows, corpus has {}",
                windows.past_len
            )));
        }
    }
    let threads = plan.threads;
    run_in_pool(threads, move || train_inner(model, windows, plan, curve_path))?
}

fn train_inner(
    model: &mut Model,
    windows: &WindowSet,
    plan: &TrainPlan,
    curve_path: Option<&Path>,
) -> Result<TrainReport> {
    let n = windows.len();

    // Stable validation split: shuffle once, hold out the tail fraction.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(plan.seed, "val-split"));
    let val_n = if n >= 2 && plan.val_fraction > 0.0 {
        ((n as f64 * plan.val_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let (train_idx, val_idx) = order.split_at(n - val_n);
    let train_idx: Vec<usize> = train_idx.to_vec();
    // Without a held-out split, validate on (a sample of) the training set.
    let val_idx: Vec<usize> = if val_idx.is_empty() {
        train_idx.iter().copied().take(64).collect()
    } else {
        val_idx.to_vec()
    };

    let mut adam = AdamState::new(&model.params, AdamConfig::default());
    let mut report = TrainReport::default();
    let mut stage = 0usize;
    let mut best_val = f64::INFINITY;
    let mut plateau_streak = 0usize;

    let mut curve_file = match curve_path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
            writeln!(f, "{}", CurvePoint::HEADER)?;
            Some(f)
        }
        None => None,
    };

    let mut step = 0usize;
    for epoch in 0..plan.max_epochs {
        let mut epoch_order = train_idx.clone();
        epoch_order.shuffle(&mut stream(plan.seed, &format!("shuffle/{epoch}")));

        let mut epoch_loss_sum = 0.0;
        let mut epoch_loss_count = 0usize;
        for batch in epoch_order.chunks(plan.batch_size) {
            if plan.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let (losses, grads) =
                batch_loss_grads(model, windows, batch, plan.seed, epoch, step)?;
            let batch_loss: f64 = losses.iter().sum::<f64>() / losses.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at step {step} (epoch {epoch}); aborting"
                )));
            }
            epoch_loss_sum += batch_loss;
            epoch_loss_count += 1;
            match adam_step(&mut model.params, &grads, &mut adam, plan.lr_stages[stage])? {
                UpdateOutcome::Applied => {}
                UpdateOutcome::SkippedNonFinite { block } => {
                    report.skipped_updates += 1;
                    eprintln!(
                        "warning: skipped update at step {step}: non-finite gradient in {block}"
                    );
                }
            }
            step += 1;
        }
        report.epochs = epoch + 1;

        let (val_loss, val_top5) = validate_windows(model, windows, &val_idx)?;
        let point = CurvePoint {
            step,
            epoch,
            lr: plan.lr_stages[stage],
            train_loss: if epoch_loss_count > 0 {
                epoch_loss_sum / epoch_loss_count as f64
            } else {
                f64::NAN
            },
            val_loss,
            val_top5,
        };
        if let Some(f) = curve_file.as_mut() {
            writeln!(f, "{}", point.line())?;
        }
        report.curve.push(point);
        report.final_val_loss = val_loss;
        report.final_val_top5 = val_top5;

        // Plateau detection: > 0.1% relative improvement resets the streak.
        if val_loss < best_val * (1.0 - 1e-3) {
            best_val = val_loss;
            plateau_streak = 0;
        } else {
            plateau_streak += 1;
            if epoch + 1 >= plan.warm_epochs
                && plateau_streak >= plan.plateau_window
                && stage + 1 < plan.lr_stages.len()
            {
                stage += 1;
                plateau_streak = 0;
            }
        }

        if plan.early_stop_top5.is_some_and(|t| val_top5 >= t) {
            break;
        }
        if plan.max_steps.is_some_and(|m| step >= m) {
            break;
        }
    }
    report.steps = step;
    Ok(report)
}

/// Streams windows (optionally a seeded subsample), accumulating top-5
/// accuracy and mean NLL. Augmentation never applies here.
pub fn evaluate(
    model: &Model,
    windows: &WindowSet,
    model_name: &str,
    max_windows: Option<usize>,
    seed: u64,
) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("corpus yields no windows".into()));
    }
    if windows.scheme != model.scheme {
        return Err(Error::Config(format!(
            "quantization scheme mismatch: checkpoint {} vs corpus {}",
            model.scheme, windows.scheme
        )));
    }
    let mut indices: Vec<usize> = (0..windows.len()).collect();
    if let Some(m) = max_windows {
        indices.shuffle(&mut stream(seed, "eval-subsample"));
        indices.truncate(m.max(1));
        indices.sort_unstable();
    }
    let scored: Vec<Result<(f64, f64, usize)>> = indices
        .par_iter()
        .map(|&i| {
            let w = windows.window(i);
            let logits = model.logits(w.input, w.past)?;
            let nll = cross_entropy(&logits, w.target)?;
            let top5 = top_k_accuracy(&logits, w.target, 5)?;
            Ok((
                nll * w.target.len() as f64,
                top5 * w.target.len() as f64,
                w.target.len(),
            ))
        })
        .collect();
    let mut nll_sum = 0.0;
    let mut hits = 0.0;
    let mut count = 0usize;
    for r in scored {
        let (nll, h, n) = r?;
        nll_sum += nll;
        hits += h;
        count += n;
    }
    Ok(EvalReport {
        model_name: model_name.to_string(),
        top5_accuracy: hits / count as f64,
        mean_nll: nll_sum / count as f64,
        sample_count: count,
        scheme: model.scheme,
        config_summary: crate::train::checkpoint::spec_to_text(&model.spec, model.scheme)
            .lines()
            .collect::<Vec<_>>()
            .join(" "),
    })
}
