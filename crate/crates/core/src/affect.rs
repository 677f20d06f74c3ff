//! Arousal/valence regression head on top of the frozen encoder feature map.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::began::{Encoder, KERNEL};
use crate::dsp::SpectrogramTile;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Network, NetworkBuilder, Shape, Trace};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadArch {
    /// Encoder feature-map shape consumed by the head.
    pub input: Shape,
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
}

impl HeadArch {
    pub fn for_features(input: Shape) -> Self {
        Self {
            input,
            conv_channels: vec![128, 64],
            hidden: 64,
        }
    }

    fn builder(&self) -> NetworkBuilder {
        let b = self
            .conv_channels
            .iter()
            .fold(NetworkBuilder::new(self.input), |b, &c| b.conv(c, KERNEL, 1).elu());
        b.dense(Shape::vector(self.hidden)).elu().dense(Shape::vector(2)).tanh()
    }
}

/// Convolutions, then dense layers ending in two tanh units
/// `(arousal, valence)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffectHead<T> {
    pub arch: HeadArch,
    pub net: Network<T>,
}

impl<T: Real> AffectHead<T> {
    pub fn new<R: Rng + ?Sized>(arch: HeadArch, rng: &mut R) -> Result<Self> {
        if arch.conv_channels.contains(&0) || arch.hidden == 0 || arch.input.is_empty() {
            return Err(Error::Config("head widths must be positive".into()));
        }
        let net = arch.builder().build(rng);
        Ok(Self { arch, net })
    }

    pub fn predict(&self, feature_map: &[T]) -> Result<[T; 2]> {
        let out = self.net.forward(feature_map)?;
        Ok([out[0], out[1]])
    }

    /// Zeroes the final dense layer so every prediction is exactly `(0, 0)`.
    pub fn zero_output_layer(&mut self) {
        let last = self.net.parametrised_layers() - 1;
        let (w, b) = self.net.layer_params_mut(last).expect("head has parameters");
        w.fill(T::zero());
        b.fill(T::zero());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChunkIndex {
    Chunk(usize),
    Aggregate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmotionPrediction {
    pub arousal: f64,
    pub valence: f64,
    pub utterance_id: String,
    pub chunk: ChunkIndex,
}

/// Per-chunk prediction through the frozen encoder and the head.
pub fn predict_chunk(
    encoder: &Encoder<f32>,
    head: &AffectHead<f32>,
    tile: &SpectrogramTile,
) -> Result<EmotionPrediction> {
    let features = encoder.feature_map(&tile.values)?;
    let [a, v] = head.predict(&features)?;
    Ok(EmotionPrediction {
        arousal: a as f64,
        valence: v as f64,
        utterance_id: tile.utterance_id.clone(),
        chunk: ChunkIndex::Chunk(tile.chunk_index),
    })
}

/// One supervised example: a chunk and its utterance's label.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub utterance_id: String,
    pub chunk_index: usize,
    pub arousal: f64,
    pub valence: f64,
}

/// Gives every chunk the `(arousal, valence)` label of its utterance.
/// Chunks of unlabelled utterances are skipped.
pub fn broadcast_labels<'a>(
    chunks: impl IntoIterator<Item = (&'a str, usize)>,
    labels: &BTreeMap<String, (f64, f64)>,
) -> Result<Vec<TrainingPair>> {
    for &(a, v) in labels.values() {
        for x in [a, v] {
            if !(-1.0..=1.0).contains(&x) {
                return Err(Error::LabelRange(x));
            }
        }
    }
    let pairs: Vec<TrainingPair> = chunks
        .into_iter()
        .filter_map(|(id, idx)| {
            labels.get(id).map(|&(arousal, valence)| TrainingPair {
                utterance_id: id.into(),
                chunk_index: idx,
                arousal,
                valence,
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Empty("labeled chunks"));
    }
    Ok(pairs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            lr: 1e-4,
            seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Batch MSE over both outputs and its parameter gradient.
pub fn head_gradients<T: Real>(head: &AffectHead<T>, features: &[&[T]], targets: &[[T; 2]]) -> Result<(f64, Vec<T>)> {
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: targets.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut grads = vec![T::zero(); head.net.param_count()];
    let scale = T::one() / T::of(features.len() as f64);
    let mut trace = Trace::default();
    head.net.forward_batch_into(features, &mut trace)?;
    let mut loss = 0.0;
    let mut g = Vec::with_capacity(2 * features.len());
    for (y, t) in trace.output().chunks_exact(2).zip(targets) {
        let diff = [y[0] - t[0], y[1] - t[1]];
        loss += 0.5 * (diff[0] * diff[0] + diff[1] * diff[1]).as_f64();
        // d/dy of the batch mean
        g.extend([diff[0] * scale, diff[1] * scale]);
    }
    head.net.backward(&mut trace, &g, &mut grads, false);
    Ok((loss / features.len() as f64, grads))
}

/// Batch MSE without gradients.
pub fn head_loss<T: Real>(head: &AffectHead<T>, features: &[&[T]], targets: &[[T; 2]]) -> Result<f64> {
    let mut loss = 0.0;
    for (x, t) in features.iter().zip(targets) {
        let [a, v] = head.predict(x)?;
        loss += 0.5 * ((a - t[0]).powi(2) + (v - t[1]).powi(2)).as_f64();
    }
    Ok(loss / features.len() as f64)
}

pub struct HeadTraining {
    pub head: AffectHead<f32>,
    /// Mean training MSE of every epoch.
    pub epoch_mse: Vec<f64>,
}

/// Fits a fresh head on precomputed encoder feature maps.
pub fn train_head(
    features: &[&[f32]],
    targets: &[[f32; 2]],
    arch: HeadArch,
    config: &HeadConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<HeadTraining> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::Empty("labeled chunks"));
    }
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: targets.len(),
        });
    }
    if let Some(&x) = targets.iter().flatten().find(|x| !(-1.0..=1.0).contains(*x)) {
        return Err(Error::LabelRange(x as f64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = AffectHead::<f32>::new(arch, &mut rng)?;
    let mut adam = Adam::new(
        head.net.param_count(),
        AdamConfig {
            lr: config.lr,
            ..Default::default()
        },
    );
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut epoch_mse = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let xs: Vec<&[f32]> = idx.iter().map(|&i| features[i]).collect();
            let ts: Vec<[f32; 2]> = idx.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = head_gradients(&head, &xs, &ts)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("head training loss"));
            }
            total += loss * idx.len() as f64;
            adam.update(head.net.params_mut(), &grads);
        }
        let mse = total / features.len() as f64;
        on_epoch(epoch, mse);
        epoch_mse.push(mse);
    }
    Ok(HeadTraining { head, epoch_mse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini() -> HeadArch {
        HeadArch {
            input: Shape::new(3, 2, 2),
            conv_channels: vec![2, 2],
            hidden: 3,
        }
    }

    #[test]
    fn zeroed_output_layer_predicts_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut head = AffectHead::<f32>::new(mini(), &mut rng).unwrap();
        head.zero_output_layer();
        assert_eq!(head.predict(&[0.7; 12]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn standard_head_shapes() {
        let arch = HeadArch::for_features(Shape::new(256, 32, 2));
        let b = arch.builder();
        assert_eq!(b.output_shape(), Shape::vector(2));
    }

    #[test]
    fn broadcast_gives_each_chunk_its_utterance_label() {
        let mut labels = BTreeMap::new();
        labels.insert("a".into(), (0.5, -0.25));
        labels.insert("b".into(), (-1.0, 1.0));
        let chunks = [("a", 0), ("a", 1), ("b", 0), ("c", 0)];
        let pairs = broadcast_labels(chunks.iter().copied(), &labels).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!(pairs[..2].iter().all(|p| (p.arousal, p.valence) == (0.5, -0.25)));
        assert_eq!((pairs[2].arousal, pairs[2].valence), (-1.0, 1.0));
    }

    #[test]
    fn broadcast_rejects_bad_labels_and_empty_sets() {
        let mut labels = BTreeMap::new();
        labels.insert("a".into(), (1.5, 0.0));
        assert_eq!(broadcast_labels([("a", 0)], &labels), Err(Error::LabelRange(1.5)));
        assert!(broadcast_labels([("a", 0)], &BTreeMap::new()).is_err());
    }

    #[test]
    fn train_head_rejects_empty_and_out_of_range() {
        let cfg = HeadConfig {
            epochs: 1,
            ..Default::default()
        };
        assert!(train_head(&[], &[], mini(), &cfg, |_, _| {}).is_err());
        let x = [0.0f32; 12];
        let err = train_head(&[&x], &[[2.0, 0.0]], mini(), &cfg, |_, _| {});
        assert!(matches!(err, Err(Error::LabelRange(_))));
    }

    #[test]
    fn loss_and_gradient_paths_agree_on_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = AffectHead::<f64>::new(mini(), &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let ts = [[0.1, 0.2], [-0.5, 0.3], [0.9, -0.9]];
        let (a, _) = head_gradients(&head, &refs, &ts).unwrap();
        let b = head_loss(&head, &refs, &ts).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
