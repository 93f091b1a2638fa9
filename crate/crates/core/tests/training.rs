//! End-to-end training behaviour on small synthetic problems.

use schane::data::{generate_synthetic, split, SplitFractions, SyntheticSpec};
use schane::framework::{train, AugmentPolicy, EncoderParams, EncoderShape, TrainConfig, TrainState};
use schane::objectives::ObjectiveConfig;

fn separable() -> schane::data::Dataset {
    generate_synthetic(&SyntheticSpec {
        class_count: 2,
        feature_dim: 16,
        samples_per_class: 100,
        mean_radius: 4.0,
        noise_sigma: 0.5,
        seed: 3,
    })
    .unwrap()
}

fn encoder(seed: u64) -> EncoderParams {
    let shape = EncoderShape {
        input: 16,
        hidden: vec![32],
        embedding: 16,
        classes: 2,
    };
    EncoderParams::init(&shape, 0.1, seed).unwrap()
}

#[test]
fn ce_loss_decreases_monotonically_on_separable_data() {
    let ds = separable();
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 32,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        augment: AugmentPolicy::identity(),
    };
    let (_, trace) = train(
        TrainState::new(encoder(1), &cfg, 7),
        &cfg,
        &ds,
        None,
        &ObjectiveConfig::ce(),
    )
    .unwrap();
    let losses: Vec<f64> = trace.epochs.iter().map(|e| e.loss).collect();
    assert_eq!(losses.len(), 10);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn identical_seeds_are_bit_reproducible() {
    let ds = generate_synthetic(&SyntheticSpec {
        class_count: 4,
        feature_dim: 16,
        samples_per_class: 30,
        ..Default::default()
    })
    .unwrap();
    let (tr, val, _) = split(&ds, SplitFractions::default(), 2).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let run = || {
        let shape = EncoderShape {
            input: 16,
            hidden: vec![24],
            embedding: 8,
            classes: 4,
        };
        let p = EncoderParams::init(&shape, 0.1, 5).unwrap();
        train(
            TrainState::new(p, &cfg, 9),
            &cfg,
            &tr,
            Some(&val),
            &ObjectiveConfig::default(),
        )
        .unwrap()
    };
    let (a, ta) = run();
    let (b, tb) = run();
    assert_eq!(
        a.params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(ta, tb);
}
