// Scratch calibration runner (removed before release).
use fame_core::merge::{AugmentConfig, BackgroundMode};
use fame_core::synth::SynthConfig;
use fame_core::train::{split_dataset, train_probe, Augmentation, TrainOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);

    let synth = SynthConfig {
        rng_seed: seed,
        ..SynthConfig::default()
    };
    let dataset = fame_core::synth::generate_synthetic(&synth).unwrap();
    let (train, eval) = split_dataset(&dataset);
    eprintln!("dataset: {} train / {} eval", train.len(), eval.len());

    let opts = TrainOptions {
        rng_seed: seed,
        ..TrainOptions::default()
    };

    let start = std::time::Instant::now();
    for (name, aug) in [
        ("off", Augmentation::Off),
        (
            "intra",
            Augmentation::Fame(AugmentConfig {
                background_mode: BackgroundMode::Intra,
                rng_seed: seed,
                ..AugmentConfig::default()
            }),
        ),
        (
            "inter",
            Augmentation::Fame(AugmentConfig {
                background_mode: BackgroundMode::Inter,
                rng_seed: seed,
                ..AugmentConfig::default()
            }),
        ),
    ] {
        let t0 = std::time::Instant::now();
        let (_, metrics) = train_probe(&dataset, &aug, &opts).unwrap();
        println!(
            "{name:>6}: motion R@1 {:.3}  background R@1 {:.3}  loss {:.4} -> {:.4}  ({:.1}s)",
            metrics.motion_recall_at_1,
            metrics.background_recall_at_1,
            metrics.loss_history.first().unwrap(),
            metrics.loss_history.last().unwrap(),
            t0.elapsed().as_secs_f64(),
        );
    }
    eprintln!("total {:.1}s", start.elapsed().as_secs_f64());
}
