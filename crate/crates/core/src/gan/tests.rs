use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{Mode, Params, Tensor};

fn toy() -> GanConfig {
    GanConfig {
        seed: 3,
        batch_size: 8,
        ..GanConfig::toy(6, 8)
    }
}

/// Segment-dependent planted patterns with a little bit noise.
fn planted(cfg: &GanConfig, n: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = cfg.cells();
    let examples = (0..n)
        .map(|i| {
            let segment = 1 + i % (cfg.n_segments - 1);
            let pattern = |ch: usize, c: usize| (c * 7 + segment * 3 + ch) % 5 == 0;
            let noisy = |ch: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
                (0..cells)
                    .map(|c| {
                        let on = pattern(ch, c) ^ (rng.random::<f64>() < 0.02);
                        if on { 1.0 } else { -1.0 }
                    })
                    .collect()
            };
            Example {
                segment,
                first: noisy(0, &mut rng),
                second: noisy(1, &mut rng),
            }
        })
        .collect();
    TrainingSet {
        rows: cfg.rows,
        width: cfg.width,
        examples,
    }
}

#[test]
fn block_specs_match_built_model() {
    let cfg = toy();
    let model = build_model(&cfg).unwrap();
    let specs = block_specs(&cfg);
    let blocks = model.blocks();
    assert_eq!(specs.len(), blocks.len());
    for (s, b) in specs.iter().zip(&blocks) {
        assert_eq!(s.name, b.name);
        assert_eq!(s.shape, b.tensor.shape());
        assert_eq!(s.trainable, b.trainable);
    }
    for conv in [Convention::CombinedStack, Convention::AllTrainable] {
        assert_eq!(model.param_count(conv), param_count(&cfg, conv));
    }
}

#[test]
fn generator_output_shape_and_range() {
    let model = build_model(&toy()).unwrap();
    let z = [0.3, -1.2, 2.0, 0.7, 0.1, 0.0, -0.4, 1.1, 0.9, -0.8, 0.2, 0.5, -1.0, 0.3, 0.6, -0.2];
    let (a, b) = model.generate(&z, 2).unwrap();
    assert_eq!(a.shape(), &[6, 8]);
    assert_eq!(b.shape(), &[6, 8]);
    assert!(a.data().iter().chain(b.data()).all(|v| v.abs() < 1.0));
    let (a2, b2) = model.generate(&z, 2).unwrap();
    assert_eq!((&a, &b), (&a2, &b2));
    let (c, _) = model.generate(&z, 3).unwrap();
    assert_ne!(c, a2);
}

#[test]
fn segment_out_of_range_is_rejected() {
    let model = build_model(&toy()).unwrap();
    assert!(matches!(model.generate(&[0.0; 16], 5), Err(crate::Error::Contract(_))));
}

#[test]
fn shared_trunk_drives_both_generators() {
    let cfg = toy();
    let model = build_model(&cfg).unwrap();
    let bytes = checkpoint_bytes(&model);
    let mut restored = load_checkpoint(&bytes[..]).unwrap();
    assert_eq!(restored, model);
    let z = [0.5; 16];
    let before = restored.generate(&z, 1).unwrap();
    restored.g_shared[0].dense.weight.data_mut()[0] += 0.5;
    restored.g_shared[0].dense.weight.data_mut()[1] -= 0.5;
    let after = restored.generate(&z, 1).unwrap();
    assert_ne!(before.0, after.0);
    assert_ne!(before.1, after.1);
    // Only one trunk exists in the serialized form as well.
    let names: Vec<String> = restored.blocks().into_iter().map(|b| b.name).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("g_shared.0.dense.kernel")).count(), 1);
    assert_eq!(names.iter().filter(|n| n.starts_with("d_shared.0.kernel")).count(), 1);
}

#[test]
fn checkpoint_rejects_corruption() {
    let model = build_model(&toy()).unwrap();
    let bytes = checkpoint_bytes(&model);
    assert!(load_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(load_checkpoint(&bad[..]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(load_checkpoint(&long[..]).is_err());
}

fn random_batch(cfg: &GanConfig, b: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, [Tensor<f64>; 2]) {
    let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..cfg.n_segments)).collect();
    let mut real = || {
        Tensor::from_vec(
            &[b, cfg.cells()],
            (0..b * cfg.cells()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        )
    };
    (y, [real(), real()])
}

#[test]
fn coupled_gradients_match_finite_differences() {
    let rep = coupled_gradient_check(&toy(), 6, 5).unwrap();
    assert!(rep.generator.max_rel_error < 1e-4, "generator objective: {:?}", rep.generator);
    assert!(rep.discriminator.max_rel_error < 1e-4, "discriminator objective: {:?}", rep.discriminator);
}

#[test]
fn one_step_lowers_discriminator_loss() {
    let mut lowered = 0;
    for trial in 0..100u64 {
        let cfg = GanConfig { seed: trial, ..toy() };
        let mut model = build_model(&cfg).unwrap();
        let data = planted(&cfg, 32, 1000 + trial);
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..data.len())).collect();
        let batch = data.batch(&idx);
        let z = sample_latent(cfg.batch_size, cfg.z_dim, &mut rng);
        let fake = model
            .generator_forward(&z, &batch.segments, Mode::Train, &mut ChaCha8Rng::seed_from_u64(trial))
            .unwrap()
            .outputs;
        let eval = |m: &CoupledGan<f32>| {
            m.discriminator_objective(
                [&batch.real[0], &batch.real[1]],
                [&fake[0], &fake[1]],
                &batch.segments,
                cfg.label_smooth,
                None,
            )
            .unwrap()
            .loss
        };
        let before = eval(&model);
        let mut opt = Optimizers::new(&model);
        train_step(&mut model, &mut opt, &batch, &z, &mut ChaCha8Rng::seed_from_u64(trial), 0).unwrap();
        if eval(&model) < before {
            lowered += 1;
        }
    }
    assert!(lowered >= 95, "loss decreased in {lowered}/100 trials");
}

#[test]
fn unsmoothed_real_loss_is_plain_cross_entropy() {
    let cfg = GanConfig {
        label_smooth: 1.0,
        ..toy()
    };
    let model = CoupledGan::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (y, real) = random_batch(&cfg, 4, &mut rng);
    let mut expect = 0.0;
    for k in 0..2 {
        let logits = model.discriminator_forward(k, &real[k], &y).unwrap().logits;
        let mean_real: f64 =
            logits.data().iter().map(|&z| -(1.0 / (1.0 + (-z).exp())).ln()).sum::<f64>() / 4.0;
        expect += 0.25 * mean_real;
    }
    // Fakes set to the real batch with target 0 add a known term; isolate the
    // real part by subtracting the fake-only objective computed by hand.
    let eval = model
        .discriminator_objective([&real[0], &real[1]], [&real[0], &real[1]], &y, 1.0, None)
        .unwrap();
    let mut fake_part = 0.0;
    for k in 0..2 {
        let logits = model.discriminator_forward(k, &real[k], &y).unwrap().logits;
        fake_part += 0.25 * logits.data().iter().map(|&z| -(1.0 - 1.0 / (1.0 + (-z).exp())).ln()).sum::<f64>() / 4.0;
    }
    assert!((eval.loss - fake_part - expect).abs() < 1e-12);
}

#[test]
fn zero_epochs_leave_model_unchanged() {
    let cfg = GanConfig { epochs: 0, ..toy() };
    let mut model = build_model(&cfg).unwrap();
    let before = model.clone();
    let history = train(&mut model, &planted(&cfg, 16, 1), None).unwrap();
    assert!(history.is_empty());
    assert_eq!(model, before);
}

#[test]
fn training_is_deterministic() {
    let cfg = GanConfig { epochs: 3, ..toy() };
    let data = planted(&cfg, 24, 2);
    let run = || {
        let mut m = build_model(&cfg).unwrap();
        let h = train(&mut m, &data, None).unwrap();
        (checkpoint_bytes(&m), h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.len(), 3);
}

#[test]
fn max_steps_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GanConfig {
        epochs: 10,
        checkpoint_every: 2,
        max_steps: Some(7),
        ..toy()
    };
    let data = planted(&cfg, 16, 4);
    let mut m = build_model(&cfg).unwrap();
    let history = train(&mut m, &data, Some(dir.path())).unwrap();
    // Two steps per epoch: 3 full epochs plus one step of the fourth.
    assert_eq!(history.iter().map(|h| h.steps).sum::<usize>(), 7);
    assert_eq!(history.len(), 4);
    assert!(dir.path().join("epoch_00002.rgan").exists());
    assert!(!dir.path().join("epoch_00004.rgan").exists());
}

#[test]
fn divergence_is_reported() {
    let cfg = GanConfig {
        adam: crate::nn::AdamConfig {
            lr: 1e30,
            ..Default::default()
        },
        epochs: 5,
        ..toy()
    };
    let mut m = build_model(&cfg).unwrap();
    let err = train(&mut m, &planted(&cfg, 16, 5), None).unwrap_err();
    assert!(matches!(err, crate::Error::Divergence { .. }), "{err}");
}

#[test]
fn batch_statistics_converge_on_planted_data() {
    let cfg = GanConfig {
        epochs: 500,
        ..toy()
    };
    let data = planted(&cfg, 32, 6);
    let mut m = build_model(&cfg).unwrap();
    let history = train(&mut m, &data, None).unwrap();
    assert_eq!(history.len(), 500);
    let gap = |h: &TrainStats| {
        (0..2)
            .map(|k| (h.real_mean[k] - h.fake_mean[k]).abs() + (h.real_std[k] - h.fake_std[k]).abs())
            .sum::<f64>()
    };
    let windows: Vec<f64> = history
        .chunks(125)
        .map(|w| w.iter().map(gap).sum::<f64>() / w.len() as f64)
        .collect();
    for pair in windows.windows(2) {
        assert!(pair[1] < pair[0], "gap did not shrink: {windows:?}");
    }
    let tail = &history[375..];
    for k in 0..2 {
        let acc = tail.iter().map(|h| h.d_accuracy[k]).sum::<f64>() / tail.len() as f64;
        assert!((0.35..=0.65).contains(&acc), "head {k} accuracy {acc}");
    }
}
