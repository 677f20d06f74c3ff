//! Central finite-difference checks on miniature f64 networks.

use affectgan_core::affect::{head_gradients, head_loss, AffectHead, HeadArch};
use affectgan_core::began::{began_gradients, began_objectives, BeganArch, BeganModel, LatentSample};
use affectgan_core::nn::Shape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Worst relative error of `analytic` against `(f(θ+h) - f(θ-h)) / 2h`,
/// perturbing `params(model)[i]` in place.
pub fn worst_error<M>(
    model: &mut M,
    analytic: &[f64],
    params: impl Fn(&mut M) -> &mut [f64],
    loss: impl Fn(&M) -> f64,
) -> f64 {
    assert_eq!(params(model).len(), analytic.len());
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = params(model)[i];
        params(model)[i] = orig + STEP;
        let up = loss(model);
        params(model)[i] = orig - STEP;
        let down = loss(model);
        params(model)[i] = orig;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * STEP)));
    }
    worst
}

pub fn mini_began_arch() -> BeganArch {
    BeganArch {
        input: Shape::new(1, 4, 4),
        channels: vec![2, 3],
        latent_dim: 3,
    }
}

fn mini_batch(rng: &mut ChaCha8Rng, arch: &BeganArch, n: usize) -> (Vec<Vec<f64>>, Vec<LatentSample<f64>>) {
    let real = (0..n)
        .map(|_| (0..arch.input.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let z = (0..n).map(|_| LatentSample::sample(rng, arch.latent_dim)).collect();
    (real, z)
}

/// Worst errors of `∂L_D/∂θ_D` (encoder features, projection, decoder).
pub fn discriminator_errors(seed: u64, k: f64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = mini_began_arch();
    let mut model = BeganModel::<f64>::new(arch.clone(), &mut rng).unwrap();
    let (real, z) = mini_batch(&mut rng, &arch, 3);
    let refs: Vec<&[f64]> = real.iter().map(|x| x.as_slice()).collect();
    let g = began_gradients(&model, &refs, &z, k).unwrap().discriminator;
    let l_d = |m: &BeganModel<f64>| began_objectives(m, &refs, &z, k).unwrap().0;
    [
        worst_error(
            &mut model,
            &g.features,
            |m| m.discriminator.encoder.features.params_mut(),
            l_d,
        ),
        worst_error(
            &mut model,
            &g.projection,
            |m| m.discriminator.encoder.projection.params_mut(),
            l_d,
        ),
        worst_error(&mut model, &g.decoder, |m| m.discriminator.decoder.params_mut(), l_d),
    ]
}

/// Worst error of `∂L_G/∂θ_G`.
pub fn generator_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = mini_began_arch();
    let mut model = BeganModel::<f64>::new(arch.clone(), &mut rng).unwrap();
    let (real, z) = mini_batch(&mut rng, &arch, 3);
    let refs: Vec<&[f64]> = real.iter().map(|x| x.as_slice()).collect();
    let g = began_gradients(&model, &refs, &z, 0.0).unwrap().generator;
    let l_g = |m: &BeganModel<f64>| began_objectives(m, &refs, &z, 0.0).unwrap().1;
    worst_error(&mut model, &g, |m| m.generator.params_mut(), l_g)
}

pub fn mini_head_arch() -> HeadArch {
    HeadArch {
        input: Shape::new(3, 2, 2),
        conv_channels: vec![4, 3],
        hidden: 5,
    }
}

/// Worst error of the head MSE gradient.
pub fn head_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = mini_head_arch();
    let mut head = AffectHead::<f64>::new(arch.clone(), &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..arch.input.len()).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let ts: Vec<[f64; 2]> = (0..4)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let (_, g) = head_gradients(&head, &refs, &ts).unwrap();
    worst_error(
        &mut head,
        &g,
        |h| h.net.params_mut(),
        |h| head_loss(h, &refs, &ts).unwrap(),
    )
}
