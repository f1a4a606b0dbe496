// scratch: top-1 vs argmax-generation lock, amplitude sweep
use wavegen_core::audio::{quantize_signal, QuantScheme, WindowSet};
use wavegen_core::config::PresetKind;
use wavegen_core::model::Model;
use wavegen_core::signal;
use wavegen_core::synthesis::{dft_peak_bin, generate, GenerationSpec, SeedSource, Temperature};
use wavegen_core::train::metrics::top_k_accuracy;
use wavegen_core::train::{train, TrainPlan};

fn main() {
    for amp in [0.95f64, 0.5, 0.3] {
        let t_ctx = 128usize;
        let wave = signal::sine(440.0, amp, 16_000, 32_000);
        let levels = quantize_signal(&wave.samples, QuantScheme::Linear);
        let mut windows = WindowSet::new(t_ctx, 0, QuantScheme::Linear);
        windows.extend_from_sequence(&levels, 63);

        let mut model =
            Model::init(PresetKind::Xf3.spec(Some(t_ctx)), QuantScheme::Linear, 42).unwrap();
        let plan = TrainPlan {
            batch_size: 16,
            max_epochs: 1000,
            max_steps: Some(2000),
            warm_epochs: 1000,
            early_stop_top5: None,
            seed: 42,
            ..TrainPlan::default()
        };
        // Stop early once top-1 on a probe batch is perfect.
        let mut trained_steps = 0;
        let mut top1 = 0.0;
        for round in 0..10 {
            let mut p = plan.clone();
            p.max_steps = Some(200);
            let r = train(&mut model, &windows, &p, None).unwrap();
            trained_steps += r.steps;
            // top-1 over 40 windows
            let mut hits = 0.0;
            let mut n = 0.0;
            for i in (0..windows.len()).step_by(windows.len() / 40) {
                let w = windows.window(i);
                let logits = model.logits(w.input, None).unwrap();
                hits += top_k_accuracy(&logits, w.target, 1).unwrap() * w.target.len() as f64;
                n += w.target.len() as f64;
            }
            top1 = hits / n;
            eprintln!("amp {amp}: round {round} steps {trained_steps} top1 {top1:.4}");
            if top1 > 0.9995 {
                break;
            }
        }
        let dir = std::env::temp_dir().join("wavegen_overfit_probe");
        std::fs::create_dir_all(&dir).unwrap();
        let seed_path = dir.join("seed.wav");
        wavegen_core::audio::write_wav_pcm16(&seed_path, &wave.samples[..1600], 16_000).unwrap();
        let out = generate(
            &model,
            &GenerationSpec {
                seed_source: SeedSource::Snippet(seed_path),
                n_samples: 1600,
                temperature: Temperature::Argmax,
                rng_seed: 1,
                include_seed: false,
            },
        )
        .unwrap();
        let peak = dft_peak_bin(&out.waveform.samples);
        println!("amp {amp}: steps {trained_steps} top1 {top1:.4} -> dft peak {peak} (want 44)");
    }
}
