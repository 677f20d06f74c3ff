//! Boundary-equilibrium GAN with an autoencoder discriminator.
//!
//! The discriminator reconstructs its input; its reconstruction error is the
//! per-sample loss. Training balances the error on real tiles (`L_real`)
//! against the error on generated tiles (`L_gen`) with a proportional
//! controller `k`:
//!
//! ```text
//! L_D = L_real - k·L_gen            (discriminator parameters)
//! L_G = L_gen                       (generator parameters)
//! k  ← clamp(k + λ_k·(γ·L_real - L_gen), 0, 1)
//! M  = L_real + |γ·L_real - L_gen|
//! ```
//!
//! The encoder half of the trained discriminator is the reusable audio
//! representation.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::TILE_SHAPE;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Network, NetworkBuilder, Shape, Trace};
use crate::real::Real;

pub const LATENT_DIM: usize = 64;
pub const KERNEL: usize = 3;
/// Consecutive non-finite steps tolerated before training aborts.
pub const MAX_NON_FINITE_STEPS: usize = 10;

/// Layer widths of the encoder / decoder / generator stacks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeganArch {
    pub input: Shape,
    /// Output channels of the stride-2 encoder convolutions.
    pub channels: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for BeganArch {
    fn default() -> Self {
        Self {
            input: TILE_SHAPE,
            channels: vec![32, 64, 128, 256],
            latent_dim: LATENT_DIM,
        }
    }
}

impl BeganArch {
    pub fn validate(&self) -> Result<()> {
        let depth = self.channels.len();
        if depth == 0 || self.latent_dim == 0 || self.channels.contains(&0) {
            return Err(Error::Config("architecture widths must be positive".into()));
        }
        if self.input.channels != 1 {
            return Err(Error::Config("input must have a single channel".into()));
        }
        let scale = 1usize << depth;
        if !self.input.height.is_multiple_of(scale) || !self.input.width.is_multiple_of(scale) {
            return Err(Error::Config("input extent must be divisible by 2^depth".into()));
        }
        Ok(())
    }

    /// Shape of the last convolutional activation of the encoder.
    pub fn feature_shape(&self) -> Shape {
        let scale = 1usize << self.channels.len();
        Shape::new(
            *self.channels.last().expect("validated"),
            self.input.height / scale,
            self.input.width / scale,
        )
    }

    fn feature_stack(&self) -> NetworkBuilder {
        self.channels
            .iter()
            .fold(NetworkBuilder::new(self.input), |b, &c| b.conv(c, KERNEL, 2).elu())
    }

    fn projection(&self) -> NetworkBuilder {
        NetworkBuilder::new(self.feature_shape()).dense(Shape::vector(self.latent_dim))
    }

    /// Mirror of the encoder: each stage is a convolution, ELU and a
    /// nearest-neighbour upsampling; a final convolution and tanh map back to
    /// one channel.
    fn decoder(&self) -> NetworkBuilder {
        let mut widths: Vec<usize> = self.channels.iter().rev().skip(1).copied().collect();
        widths.push((self.channels[0] / 2).max(1));
        let mut b = NetworkBuilder::new(Shape::vector(self.latent_dim)).dense(self.feature_shape());
        for w in widths {
            b = b.conv(w, KERNEL, 1).elu().upsample2x();
        }
        b.conv(self.input.channels, KERNEL, 1).tanh()
    }
}

/// Generator input: components uniform in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample<T> {
    pub z: Vec<T>,
}

impl<T: Real> LatentSample<T> {
    pub fn new(z: Vec<T>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite() || v.abs() > T::one()) {
            return Err(Error::Config("latent components must lie in [-1, 1]".into()));
        }
        Ok(Self { z })
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        Self {
            z: (0..dim).map(|_| T::of(rng.gen_range(-1.0..=1.0))).collect(),
        }
    }
}

/// Encoder output: the last convolutional activation and its dense projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding<T> {
    pub feature_map: Vec<T>,
    pub latent: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder<T> {
    pub features: Network<T>,
    pub projection: Network<T>,
}

impl<T: Real> Encoder<T> {
    pub fn feature_map(&self, x: &[T]) -> Result<Vec<T>> {
        self.features.forward(x)
    }

    pub fn encode(&self, x: &[T]) -> Result<Encoding<T>> {
        let feature_map = self.features.forward(x)?;
        let latent = self.projection.forward(&feature_map)?;
        Ok(Encoding { feature_map, latent })
    }

    pub fn param_count(&self) -> usize {
        self.features.param_count() + self.projection.param_count()
    }

    /// All encoder parameters, feature stack first.
    pub fn params(&self) -> Vec<T> {
        let mut p = self.features.params().to_vec();
        p.extend_from_slice(self.projection.params());
        p
    }

    pub fn set_params(&mut self, mut params: Vec<T>) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let tail = params.split_off(self.features.param_count());
        self.features.set_params(params)?;
        self.projection.set_params(tail)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T> {
    pub encoder: Encoder<T>,
    pub decoder: Network<T>,
}

impl<T: Real> Discriminator<T> {
    pub fn autoencode(&self, x: &[T]) -> Result<Vec<T>> {
        let latent = self.encoder.encode(x)?.latent;
        self.decoder.forward(&latent)
    }
}

/// Per-network gradient buffers of the discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorGrads<T> {
    pub features: Vec<T>,
    pub projection: Vec<T>,
    pub decoder: Vec<T>,
}

impl<T: Real> DiscriminatorGrads<T> {
    pub fn zeros(d: &Discriminator<T>) -> Self {
        Self {
            features: vec![T::zero(); d.encoder.features.param_count()],
            projection: vec![T::zero(); d.encoder.projection.param_count()],
            decoder: vec![T::zero(); d.decoder.param_count()],
        }
    }

    /// `self += scale · other`
    fn add_scaled(&mut self, other: &Self, scale: T) {
        for (dst, src) in [
            (&mut self.features, &other.features),
            (&mut self.projection, &other.projection),
            (&mut self.decoder, &other.decoder),
        ] {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut v = self.features.clone();
        v.extend_from_slice(&self.projection);
        v.extend_from_slice(&self.decoder);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeganModel<T> {
    pub arch: BeganArch,
    pub discriminator: Discriminator<T>,
    pub generator: Network<T>,
}

impl<T: Real> BeganModel<T> {
    pub fn new<R: Rng + ?Sized>(arch: BeganArch, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let features = arch.feature_stack().build(rng);
        let projection = arch.projection().build(rng);
        let decoder = arch.decoder().build(rng);
        let generator = arch.decoder().build(rng);
        Ok(Self {
            arch,
            discriminator: Discriminator {
                encoder: Encoder { features, projection },
                decoder,
            },
            generator,
        })
    }

    pub fn encoder(&self) -> &Encoder<T> {
        &self.discriminator.encoder
    }

    pub fn encode(&self, x: &[T]) -> Result<Encoding<T>> {
        self.discriminator.encoder.encode(x)
    }

    pub fn autoencode(&self, x: &[T]) -> Result<Vec<T>> {
        self.discriminator.autoencode(x)
    }

    pub fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.arch.latent_dim {
            return Err(Error::ShapeMismatch {
                expected: self.arch.latent_dim,
                actual: z.len(),
            });
        }
        self.generator.forward(z)
    }
}

/// Mean absolute difference.
pub fn pixel_loss<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("pixel loss input"));
    }
    let sum: T = a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum();
    Ok(sum / T::of(a.len() as f64))
}

/// Proportional-control state of the equilibrium term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumState {
    pub k: f64,
    pub gamma: f64,
    pub lambda_k: f64,
    pub m_global: f64,
}

impl EquilibriumState {
    pub fn new(gamma: f64, lambda_k: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if !(lambda_k > 0.0 && lambda_k.is_finite()) {
            return Err(Error::Config("lambda_k must be positive".into()));
        }
        Ok(Self {
            k: 0.0,
            gamma,
            lambda_k,
            m_global: 0.0,
        })
    }

    /// State after a step that observed `l_real` and `l_gen`.
    pub fn update(&self, l_real: f64, l_gen: f64) -> Self {
        let balance = self.gamma * l_real - l_gen;
        Self {
            k: (self.k + self.lambda_k * balance).clamp(0.0, 1.0),
            m_global: l_real + balance.abs(),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub l_real: f64,
    pub l_gen: f64,
}

/// Gradients of one BEGAN step.
#[derive(Clone, Debug, PartialEq)]
pub struct BeganGradients<T> {
    /// `∂L_D/∂θ_D` with `L_D = L_real - k·L_gen`.
    pub discriminator: DiscriminatorGrads<T>,
    /// `∂L_G/∂θ_G` with `L_G = L_gen`.
    pub generator: Vec<T>,
    pub losses: StepLosses,
}

#[derive(Default)]
struct DiscTrace<T> {
    features: Trace<T>,
    projection: Trace<T>,
    decoder: Trace<T>,
}

/// Summed per-sample reconstruction loss of a batch, accumulating
/// `scale·∂L/∂θ_D` into `grads`. With `want_input_grad` the total derivative
/// with respect to the inputs (through the network and through the
/// reconstruction target) is returned sample-major, scaled the same way.
fn reconstruction_pass<T: Real>(
    d: &Discriminator<T>,
    xs: &[&[T]],
    scale: T,
    grads: &mut DiscriminatorGrads<T>,
    want_input_grad: bool,
    tr: &mut DiscTrace<T>,
) -> Result<(f64, Option<Vec<T>>)> {
    d.encoder.features.forward_batch_into(xs, &mut tr.features)?;
    let feats: Vec<&[T]> = tr
        .features
        .output()
        .chunks_exact(d.encoder.features.output_shape().len())
        .collect();
    d.encoder.projection.forward_batch_into(&feats, &mut tr.projection)?;
    let latents: Vec<&[T]> = tr
        .projection
        .output()
        .chunks_exact(d.encoder.projection.output_shape().len())
        .collect();
    d.decoder.forward_batch_into(&latents, &mut tr.decoder)?;
    let rec = tr.decoder.output();
    let x = tr.features.input();
    let mut loss = 0.0;
    for (r, t) in rec.chunks_exact(x.len() / xs.len()).zip(xs) {
        loss += pixel_loss(r, t)?.as_f64();
    }
    let unit = scale / T::of(d.encoder.features.input_shape().len() as f64);
    let g_rec: Vec<T> = rec.iter().zip(x).map(|(&r, &t)| sign(r - t) * unit).collect();
    let g_latent = d
        .decoder
        .backward(&mut tr.decoder, &g_rec, &mut grads.decoder, true)
        .expect("input grad requested");
    let g_feat = d
        .encoder
        .projection
        .backward(&mut tr.projection, &g_latent, &mut grads.projection, true)
        .expect("input grad requested");
    let g_x = d
        .encoder
        .features
        .backward(&mut tr.features, &g_feat, &mut grads.features, want_input_grad);
    let g_x = g_x.map(|mut g| {
        for (gv, &gr) in g.iter_mut().zip(&g_rec) {
            *gv -= gr;
        }
        g
    });
    Ok((loss, g_x))
}

#[inline]
fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn check_batch<T: Real>(model: &BeganModel<T>, real: &[&[T]], z: &[LatentSample<T>]) -> Result<()> {
    if real.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if real.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: real.len(),
            right: z.len(),
        });
    }
    for x in real {
        if x.len() != model.arch.input.len() {
            return Err(Error::ShapeMismatch {
                expected: model.arch.input.len(),
                actual: x.len(),
            });
        }
    }
    for s in z {
        if s.z.len() != model.arch.latent_dim {
            return Err(Error::ShapeMismatch {
                expected: model.arch.latent_dim,
                actual: s.z.len(),
            });
        }
    }
    Ok(())
}

/// Batch-mean losses and gradients of both BEGAN objectives at the current
/// parameters.
pub fn began_gradients<T: Real>(
    model: &BeganModel<T>,
    real: &[&[T]],
    z: &[LatentSample<T>],
    k: f64,
) -> Result<BeganGradients<T>> {
    check_batch(model, real, z)?;
    let d = &model.discriminator;
    let inv_b = T::one() / T::of(real.len() as f64);
    let mut real_grads = DiscriminatorGrads::zeros(d);
    let mut fake_grads = DiscriminatorGrads::zeros(d);
    let mut gen_grads = vec![T::zero(); model.generator.param_count()];
    let mut d_trace = DiscTrace::default();
    let mut g_trace = Trace::default();

    let (l_real, _) = reconstruction_pass(d, real, inv_b, &mut real_grads, false, &mut d_trace)?;
    let zs: Vec<&[T]> = z.iter().map(|s| s.z.as_slice()).collect();
    model.generator.forward_batch_into(&zs, &mut g_trace)?;
    let fakes: Vec<&[T]> = g_trace.output().chunks_exact(model.arch.input.len()).collect();
    let (l_gen, g_fake) = reconstruction_pass(d, &fakes, inv_b, &mut fake_grads, true, &mut d_trace)?;
    model
        .generator
        .backward(&mut g_trace, &g_fake.expect("requested"), &mut gen_grads, false);
    let n = real.len() as f64;
    let mut discriminator = real_grads;
    discriminator.add_scaled(&fake_grads, T::of(-k));
    Ok(BeganGradients {
        discriminator,
        generator: gen_grads,
        losses: StepLosses {
            l_real: l_real / n,
            l_gen: l_gen / n,
        },
    })
}

/// `(L_D, L_G)` at the current parameters.
pub fn began_objectives<T: Real>(
    model: &BeganModel<T>,
    real: &[&[T]],
    z: &[LatentSample<T>],
    k: f64,
) -> Result<(T, T)> {
    check_batch(model, real, z)?;
    let n = T::of(real.len() as f64);
    let (mut l_real, mut l_gen) = (T::zero(), T::zero());
    for (x, zs) in real.iter().zip(z) {
        l_real += pixel_loss(&model.autoencode(x)?, x)?;
        let g = model.generate(&zs.z)?;
        l_gen += pixel_loss(&model.autoencode(&g)?, &g)?;
    }
    let (l_real, l_gen) = (l_real / n, l_gen / n);
    Ok((l_real - T::of(k) * l_gen, l_gen))
}

/// Adam state for every parameter group.
#[derive(Clone, Debug)]
pub struct BeganOptimizers<T> {
    features: Adam<T>,
    projection: Adam<T>,
    decoder: Adam<T>,
    generator: Adam<T>,
}

impl<T: Real> BeganOptimizers<T> {
    pub fn new(model: &BeganModel<T>, config: AdamConfig) -> Self {
        let d = &model.discriminator;
        Self {
            features: Adam::new(d.encoder.features.param_count(), config),
            projection: Adam::new(d.encoder.projection.param_count(), config),
            decoder: Adam::new(d.decoder.param_count(), config),
            generator: Adam::new(model.generator.param_count(), config),
        }
    }

    fn apply_discriminator(&mut self, d: &mut Discriminator<T>, g: &DiscriminatorGrads<T>) {
        self.features.update(d.encoder.features.params_mut(), &g.features);
        self.projection.update(d.encoder.projection.params_mut(), &g.projection);
        self.decoder.update(d.decoder.params_mut(), &g.decoder);
    }
}

/// Adam settings used for both BEGAN networks.
pub fn began_adam(lr: f64) -> AdamConfig {
    AdamConfig {
        lr,
        beta1: 0.5,
        beta2: 0.999,
        eps: 1e-8,
    }
}

/// One optimisation step on both networks followed by the equilibrium
/// update. A non-finite loss leaves parameters and state untouched.
pub fn began_step<T: Real>(
    model: &mut BeganModel<T>,
    optim: &mut BeganOptimizers<T>,
    real: &[&[T]],
    z: &[LatentSample<T>],
    eq: &EquilibriumState,
) -> Result<(StepLosses, EquilibriumState)> {
    let grads = began_gradients(model, real, z, eq.k)?;
    let StepLosses { l_real, l_gen } = grads.losses;
    if !l_real.is_finite() || !l_gen.is_finite() {
        return Err(Error::NonFiniteLoss { l_real, l_gen });
    }
    optim.apply_discriminator(&mut model.discriminator, &grads.discriminator);
    optim.generator.update(model.generator.params_mut(), &grads.generator);
    Ok((grads.losses, eq.update(l_real, l_gen)))
}

/// Autoencoder-only step minimising `L_real`; returns the pre-update loss.
pub fn reconstruction_step<T: Real>(
    model: &mut BeganModel<T>,
    optim: &mut BeganOptimizers<T>,
    real: &[&[T]],
) -> Result<f64> {
    if real.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let d = &model.discriminator;
    let inv_b = T::one() / T::of(real.len() as f64);
    let mut grads = DiscriminatorGrads::zeros(d);
    let mut trace = DiscTrace::default();
    let loss = reconstruction_pass(d, real, inv_b, &mut grads, false, &mut trace)?.0 / real.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            l_real: loss,
            l_gen: 0.0,
        });
    }
    optim.apply_discriminator(&mut model.discriminator, &grads);
    Ok(loss)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeganConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub lambda_k: f64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for BeganConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            gamma: 0.7,
            lambda_k: 0.001,
            lr: 1e-4,
            seed: 0,
        }
    }
}

impl BeganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        EquilibriumState::new(self.gamma, self.lambda_k).map(|_| ())
    }

    pub fn steps_for(&self, n_tiles: usize) -> usize {
        self.epochs * n_tiles.div_ceil(self.batch_size)
    }
}

/// Losses and control state after one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub l_real: f64,
    pub l_gen: f64,
    pub k: f64,
    pub m_global: f64,
}

pub struct BeganTraining<T> {
    pub model: BeganModel<T>,
    pub state: EquilibriumState,
    pub steps: Vec<StepLog>,
    /// Last successful step of every epoch.
    pub epochs: Vec<StepLog>,
}

/// Full BEGAN training over in-memory tiles with seeded shuffling.
pub fn train_began(
    tiles: &[&[f32]],
    arch: BeganArch,
    config: &BeganConfig,
    mut on_epoch: impl FnMut(&StepLog),
) -> Result<BeganTraining<f32>> {
    config.validate()?;
    if tiles.is_empty() {
        return Err(Error::Empty("tile store"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = BeganModel::<f32>::new(arch, &mut rng)?;
    let mut optim = BeganOptimizers::new(&model, began_adam(config.lr));
    let mut state = EquilibriumState::new(config.gamma, config.lambda_k)?;
    let mut order: Vec<usize> = (0..tiles.len()).collect();
    let mut steps = Vec::with_capacity(config.steps_for(tiles.len()));
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut failures = 0;
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut last = None;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&[f32]> = idx.iter().map(|&i| tiles[i]).collect();
            let z: Vec<LatentSample<f32>> = (0..batch.len())
                .map(|_| LatentSample::sample(&mut rng, model.arch.latent_dim))
                .collect();
            match began_step(&mut model, &mut optim, &batch, &z, &state) {
                Ok((losses, next)) => {
                    failures = 0;
                    state = next;
                    let log = StepLog {
                        epoch,
                        step,
                        l_real: losses.l_real,
                        l_gen: losses.l_gen,
                        k: state.k,
                        m_global: state.m_global,
                    };
                    steps.push(log);
                    last = Some(log);
                }
                Err(Error::NonFiniteLoss { .. }) => {
                    failures += 1;
                    if failures >= MAX_NON_FINITE_STEPS {
                        return Err(Error::Diverged(failures));
                    }
                }
                Err(e) => return Err(e),
            }
            step += 1;
        }
        if let Some(log) = last {
            on_epoch(&log);
            epochs.push(log);
        }
    }
    Ok(BeganTraining {
        model,
        state,
        steps,
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini_arch() -> BeganArch {
        BeganArch {
            input: Shape::new(1, 4, 4),
            channels: vec![2, 3],
            latent_dim: 3,
        }
    }

    #[test]
    fn standard_shapes() {
        let arch = BeganArch::default();
        assert_eq!(arch.feature_shape(), Shape::new(256, 32, 2));
        assert_eq!(arch.decoder().output_shape(), TILE_SHAPE);
        assert_eq!(arch.feature_stack().output_shape(), arch.feature_shape());
    }

    #[test]
    fn mini_shapes() {
        let arch = mini_arch();
        arch.validate().unwrap();
        assert_eq!(arch.feature_shape(), Shape::new(3, 1, 1));
        assert_eq!(arch.decoder().output_shape(), Shape::new(1, 4, 4));
    }

    #[test]
    fn invalid_arch_rejected() {
        let arch = BeganArch {
            input: Shape::new(1, 6, 4),
            channels: vec![2, 3],
            latent_dim: 3,
        };
        assert!(arch.validate().is_err());
    }

    #[test]
    fn pixel_loss_basics() {
        let a = [0.2f64, -0.4, 0.9];
        assert_eq!(pixel_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(pixel_loss(&[0.0f64; 7], &[1.0; 7]).unwrap(), 1.0);
        assert!(pixel_loss(&[0.0f64; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn equilibrium_update_formula() {
        let eq = EquilibriumState::new(0.7, 0.001).unwrap();
        let next = eq.update(0.5, 0.2);
        assert!((next.k - 0.00015).abs() < 1e-12);
        assert!((next.m_global - 0.65).abs() < 1e-12);
        let saturated = EquilibriumState { k: 1.0, ..eq }.update(0.5, 0.2);
        assert_eq!(saturated.k, 1.0);
        let floored = eq.update(0.1, 0.9);
        assert_eq!(floored.k, 0.0);
    }

    #[test]
    fn equilibrium_rejects_bad_gamma() {
        assert!(EquilibriumState::new(0.0, 0.001).is_err());
        assert!(EquilibriumState::new(1.2, 0.001).is_err());
        assert!(EquilibriumState::new(1.0, 0.001).is_ok());
    }

    #[test]
    fn generate_checks_latent_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = BeganModel::<f64>::new(mini_arch(), &mut rng).unwrap();
        assert!(model.generate(&[0.0; 4]).is_err());
        let out = model.generate(&[0.0; 3]).unwrap();
        assert!(out.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn step_count_follows_batches() {
        let cfg = BeganConfig {
            epochs: 2,
            batch_size: 16,
            ..Default::default()
        };
        assert_eq!(cfg.steps_for(64), 8);
        assert_eq!(cfg.steps_for(65), 10);
    }

    #[test]
    fn encoder_param_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = BeganModel::<f32>::new(mini_arch(), &mut rng).unwrap();
        let mut other = BeganModel::<f32>::new(mini_arch(), &mut rng).unwrap();
        other
            .discriminator
            .encoder
            .set_params(model.encoder().params())
            .unwrap();
        assert_eq!(other.encoder(), model.encoder());
    }
}
