// scratch: paired conditioned-vs-unconditioned NLL on a two-regime corpus
use wavegen_core::audio::{quantize_signal, QuantScheme, WindowSet};
use wavegen_core::conditioner::ConditionerConfig;
use wavegen_core::model::{Model, ModelSpec};
use wavegen_core::signal;
use wavegen_core::train::{train, TrainPlan};
use wavegen_core::transformer::TransformerConfig;

fn two_regime_levels(total: usize, segment: usize) -> Vec<u8> {
    let mut samples = Vec::with_capacity(total);
    let mut phase: f64 = 0.0;
    for seg in 0..total.div_ceil(segment) {
        let freq = if seg % 2 == 0 { 220.0 } else { 660.0 };
        let w = 2.0 * std::f64::consts::PI * freq / 16_000.0;
        for _ in 0..segment.min(total - samples.len()) {
            samples.push(phase.sin() * 0.8);
            phase += w;
        }
    }
    let wave = signal::sine(1.0, 0.0, 16_000, 0); // unused, keep signal linked
    let _ = wave;
    quantize_signal(&samples, QuantScheme::Linear)
}

fn main() {
    let t_ctx = 64usize;
    let past = 512usize;
    let segment = 512usize;
    let levels = two_regime_levels(30 * 16_000, segment);

    let mut windows = WindowSet::new(t_ctx, past, QuantScheme::Linear);
    windows.extend_from_sequence(&levels, 41);
    println!("windows: {}", windows.len());

    let xf = TransformerConfig {
        layers: 2,
        heads: 2,
        embed: 32,
        ff_width: 64,
        dropout: 0.0,
        t_ctx,
    };
    let cond = ConditionerConfig {
        conv_layers: 4,
        filters: 16,
        latent_dim: 16,
        past_len: past,
    };
    let plan = TrainPlan {
        batch_size: 8,
        max_epochs: 100,
        max_steps: Some(300),
        warm_epochs: 1000,
        seed: 7,
        ..TrainPlan::default()
    };

    let mut uncond = Model::init(ModelSpec::Transformer(xf), QuantScheme::Linear, 7).unwrap();
    let r1 = train(&mut uncond, &windows, &plan, None).unwrap();
    println!("uncond: steps={} val_nll={:.5} top5={:.4}", r1.steps, r1.final_val_loss, r1.final_val_top5);

    let mut condm = Model::init(
        ModelSpec::CondTransformer { xf, cond },
        QuantScheme::Linear,
        7,
    )
    .unwrap();
    let r2 = train(&mut condm, &windows, &plan, None).unwrap();
    println!("cond:   steps={} val_nll={:.5} top5={:.4}", r2.steps, r2.final_val_loss, r2.final_val_top5);
    println!("direction ok: {}", r2.final_val_loss <= r1.final_val_loss);
}
