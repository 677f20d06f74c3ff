use affectgan_core::began::*;
use affectgan_core::dsp::TILE_LEN;
use affectgan_core::nn::Shape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tile(seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..TILE_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn full_size_encoding_is_deterministic_and_input_dependent() {
    let model = BeganModel::<f32>::new(BeganArch::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (a, b) = (tile(1), tile(2));
    let ea = model.encode(&a).unwrap();
    assert_eq!(ea.feature_map.len(), Shape::new(256, 32, 2).len());
    assert_eq!(ea.latent.len(), LATENT_DIM);
    assert_eq!(ea, model.encode(&a).unwrap());
    assert_ne!(ea.latent, model.encode(&b).unwrap().latent);
    assert!(model.encode(&a[1..]).is_err());
}

#[test]
fn same_seed_same_model() {
    let arch = BeganArch {
        input: Shape::new(1, 8, 8),
        channels: vec![2, 4],
        latent_dim: 5,
    };
    let m1 = BeganModel::<f32>::new(arch.clone(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let m2 = BeganModel::<f32>::new(arch, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(m1, m2);
    let z = [0.3f32, -0.2, 0.9, -1.0, 0.0];
    let g = m1.generate(&z).unwrap();
    assert_eq!(g, m2.generate(&z).unwrap());
    assert!(g.iter().all(|v| v.abs() <= 1.0));
    assert!(m1.generate(&z[..4]).is_err());
}

#[test]
fn stubbed_losses_drive_k_linearly_then_clamp() {
    let mut s = EquilibriumState::new(0.7, 0.001).unwrap();
    assert_eq!(s.k, 0.0);
    for step in 1..=6666 {
        s = s.update(0.5, 0.2);
        assert!((s.k - 1.5e-4 * step as f64).abs() < 1e-12, "step {step}");
        assert!((s.m_global - 0.65).abs() < 1e-12);
    }
    for _ in 0..10 {
        s = s.update(0.5, 0.2);
        assert_eq!(s.k, 1.0);
    }
}

#[test]
fn m_global_tracks_shrinking_losses() {
    let mut s = EquilibriumState::new(0.7, 0.001).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..50 {
        let l_real = 0.8 * 0.95f64.powi(i);
        let l_gen = 0.5 * l_real;
        s = s.update(l_real, l_gen);
        let expected = l_real + (0.7 * l_real - l_gen).abs();
        assert!((s.m_global - expected).abs() < 1e-12);
        assert!(s.m_global < prev);
        prev = s.m_global;
    }
}

#[test]
fn non_finite_batch_leaves_the_model_untouched() {
    let arch = BeganArch {
        input: Shape::new(1, 8, 8),
        channels: vec![2, 4],
        latent_dim: 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut model = BeganModel::<f32>::new(arch, &mut rng).unwrap();
    let before = model.clone();
    let mut optim = BeganOptimizers::new(&model, began_adam(1e-3));
    let mut x = vec![0.0f32; 64];
    x[5] = f32::NAN;
    let z = [LatentSample::sample(&mut rng, 5)];
    let eq = EquilibriumState::new(0.7, 0.001).unwrap();
    let err = began_step(&mut model, &mut optim, &[&x], &z, &eq);
    assert!(matches!(err, Err(affectgan_core::Error::NonFiniteLoss { .. })));
    assert_eq!(model, before);
}

#[test]
fn miniature_training_logs_every_epoch() {
    let arch = BeganArch {
        input: Shape::new(1, 8, 8),
        channels: vec![2, 4],
        latent_dim: 5,
    };
    let tiles: Vec<Vec<f32>> = (0..10).map(|s| tile(s).into_iter().take(64).collect()).collect();
    let refs: Vec<&[f32]> = tiles.iter().map(|t| t.as_slice()).collect();
    let cfg = BeganConfig {
        epochs: 3,
        batch_size: 4,
        ..Default::default()
    };
    let mut seen = Vec::new();
    let run = train_began(&refs, arch.clone(), &cfg, |log| seen.push(log.epoch)).unwrap();
    assert_eq!(seen, [0, 1, 2]);
    assert_eq!(run.steps.len(), cfg.steps_for(10));
    for log in &run.steps {
        assert!((0.0..=1.0).contains(&log.k));
        assert!((log.m_global - (log.l_real + (0.7 * log.l_real - log.l_gen).abs())).abs() < 1e-12);
    }
    let again = train_began(&refs, arch, &cfg, |_| {}).unwrap();
    assert_eq!(run.steps, again.steps);
    assert_eq!(run.model, again.model);
}
