//! Small trainable backends so the fine-tuning path runs without external
//! model weights.
//!
//! * [`BowTextModel`]: frozen hashed token embeddings, mean-pooled, one tanh
//!   encoder layer and a sigmoid head. Trained with Adam on MSE, using a
//!   separate learning rate for the encoder and for the head.
//! * [`ConvImageModel`]: a frozen bank of 3x3 convolution filters with ReLU,
//!   global average pooling and a two-way softmax head. Trained with Adam on
//!   categorical cross-entropy.
//!
//! Both are deterministic given their seeds, and both implement the regular
//! backend traits so a trained artifact drops straight into the pipeline.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, ImageSentimentBackend, TextSentimentBackend};
use crate::fusion::Sentiment;
use crate::image_sentiment::ImageFineTuneConfig;
use crate::raster::{resize_for_model, Raster};
use crate::text::{preprocess_tweet, ConfigError, TextFineTuneConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no usable training examples")]
    NoExamples,
    #[error("training image {index}: {detail}")]
    BadImage { index: usize, detail: String },
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + Self::EPS);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn target(label: Sentiment) -> f64 {
    label.label() as f64
}

/// Hashed bag-of-words text classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowTextModel {
    dim: usize,
    buckets: usize,
    max_sequence_length: usize,
    embeddings: Vec<f64>,
    encoder_weights: Vec<f64>,
    encoder_bias: Vec<f64>,
    head_weights: Vec<f64>,
    head_bias: f64,
}

impl BowTextModel {
    pub const DIM: usize = 16;
    pub const BUCKETS: usize = 4096;
    const EMBEDDING_SEED: u64 = 0x5eed_e3b0;

    pub fn new(max_sequence_length: usize, seed: u64) -> Self {
        let dim = Self::DIM;
        let mut emb_rng = ChaCha8Rng::seed_from_u64(Self::EMBEDDING_SEED);
        let embeddings = uniform(&mut emb_rng, Self::BUCKETS * dim, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / libm::sqrt(dim as f64);
        Self {
            dim,
            buckets: Self::BUCKETS,
            max_sequence_length,
            embeddings,
            encoder_weights: uniform(&mut rng, dim * dim, scale),
            encoder_bias: vec![0.0; dim],
            head_weights: uniform(&mut rng, dim, scale),
            head_bias: 0.0,
        }
    }

    /// Mean embedding of the first `max_sequence_length` tokens.
    fn pooled(&self, clean: &str) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for tok in clean.split_whitespace().take(self.max_sequence_length) {
            let row = (fnv1a(tok) % self.buckets as u64) as usize * self.dim;
            for (a, e) in acc.iter_mut().zip(&self.embeddings[row..row + self.dim]) {
                *a += e;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Some(acc)
    }

    fn encode(&self, pooled: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let row = &self.encoder_weights[i * self.dim..(i + 1) * self.dim];
                let z: f64 = row.iter().zip(pooled).map(|(w, x)| w * x).sum::<f64>() + self.encoder_bias[i];
                libm::tanh(z)
            })
            .collect()
    }

    fn head(&self, hidden: &[f64]) -> f64 {
        sigmoid(hidden.iter().zip(&self.head_weights).map(|(w, h)| w * h).sum::<f64>() + self.head_bias)
    }

    pub fn predict(&self, clean: &str) -> Option<f64> {
        self.pooled(clean).map(|e| self.head(&self.encode(&e)))
    }
}

impl TextSentimentBackend for BowTextModel {
    fn name(&self) -> &str {
        "bow-linear"
    }

    fn classify(&self, text: &str) -> Result<f64, BackendError> {
        self.predict(text)
            .ok_or_else(|| BackendError::failed("bow-linear", "no tokens"))
    }
}

/// Fine-tunes a fresh [`BowTextModel`] on `(raw text, label)` examples.
///
/// Texts go through the tweet cleaner first; examples that clean to nothing
/// are skipped. The embedding table never changes.
pub fn train_text(
    config: &TextFineTuneConfig,
    examples: &[(String, Sentiment)],
) -> Result<(BowTextModel, Vec<EpochLog>), TrainError> {
    config.validate()?;
    let mut model = BowTextModel::new(config.max_sequence_length, config.seed);
    let data: Vec<(Vec<f64>, f64)> = examples
        .iter()
        .filter_map(|(text, label)| {
            model
                .pooled(&preprocess_tweet(text).text)
                .map(|e| (e, target(*label)))
        })
        .collect();
    if data.is_empty() {
        return Err(TrainError::NoExamples);
    }

    let dim = model.dim;
    let mut enc_opt = Adam::new(config.encoder_learning_rate, dim * dim + dim);
    let mut head_opt = Adam::new(config.head_learning_rate, dim + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e47);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut g_enc = vec![0.0; dim * dim + dim];
            let mut g_head = vec![0.0; dim + 1];
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &data[i];
                let h = model.encode(x);
                let p = model.head(&h);
                epoch_loss += (p - y) * (p - y);
                // d(mean sq err)/dz through the sigmoid
                let dz = 2.0 * (p - y) * p * (1.0 - p) * scale;
                for k in 0..dim {
                    g_head[k] += dz * h[k];
                    let da = dz * model.head_weights[k] * (1.0 - h[k] * h[k]);
                    for j in 0..dim {
                        g_enc[k * dim + j] += da * x[j];
                    }
                    g_enc[dim * dim + k] += da;
                }
                g_head[dim] += dz;
            }
            let mut enc_params: Vec<f64> = model
                .encoder_weights
                .iter()
                .chain(&model.encoder_bias)
                .copied()
                .collect();
            enc_opt.step(&mut enc_params, &g_enc);
            model.encoder_weights.copy_from_slice(&enc_params[..dim * dim]);
            model.encoder_bias.copy_from_slice(&enc_params[dim * dim..]);

            let mut head_params: Vec<f64> = model.head_weights.clone();
            head_params.push(model.head_bias);
            head_opt.step(&mut head_params, &g_head);
            model.head_bias = head_params.pop().unwrap_or_default();
            model.head_weights = head_params;
        }
        log.push(EpochLog {
            epoch,
            loss: epoch_loss / data.len() as f64,
            val_loss: None,
        });
    }
    Ok((model, log))
}

/// Frozen random-feature convolutional base with a trainable softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvImageModel {
    input_side: u32,
    filters: Vec<f64>,
    filter_bias: Vec<f64>,
    /// 2 x FILTERS, row 0 negative, row 1 positive.
    head_weights: Vec<f64>,
    head_bias: [f64; 2],
}

impl ConvImageModel {
    pub const FILTERS: usize = 16;
    const BACKBONE_SEED: u64 = 0x00c0_de19;

    pub fn new(input_side: u32, seed: u64) -> Self {
        let mut base_rng = ChaCha8Rng::seed_from_u64(Self::BACKBONE_SEED);
        let filters = uniform(&mut base_rng, Self::FILTERS * 27, 0.5);
        let filter_bias = uniform(&mut base_rng, Self::FILTERS, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            input_side,
            filters,
            filter_bias,
            head_weights: uniform(&mut rng, 2 * Self::FILTERS, 0.1),
            head_bias: [0.0; 2],
        }
    }

    /// Globally pooled ReLU responses of the frozen filter bank.
    pub fn features(&self, frame: &Raster) -> Result<Vec<f64>, BackendError> {
        if frame.channels() != 3 {
            return Err(BackendError::ChannelMismatch {
                expected: 3,
                actual: frame.channels(),
            });
        }
        let img = if frame.width() == self.input_side && frame.height() == self.input_side {
            frame.clone()
        } else {
            resize_for_model(frame, self.input_side)
                .map_err(|e| BackendError::failed("conv-gap", alloc::format!("{e}")))?
        };
        let side = img.width() as usize;
        if side < 3 {
            return Err(BackendError::failed("conv-gap", "input smaller than filter"));
        }
        let px: Vec<f64> = img.data().iter().map(|&v| v as f64 / 255.0).collect();
        let out_side = side - 2;
        let mut pooled = vec![0.0; Self::FILTERS];
        for (f, acc) in pooled.iter_mut().enumerate() {
            let w = &self.filters[f * 27..(f + 1) * 27];
            for y in 0..out_side {
                for x in 0..out_side {
                    let mut z = self.filter_bias[f];
                    for dy in 0..3 {
                        let row = ((y + dy) * side + x) * 3;
                        let wrow = &w[dy * 9..dy * 9 + 9];
                        for (k, wk) in wrow.iter().enumerate() {
                            z += wk * px[row + k];
                        }
                    }
                    if z > 0.0 {
                        *acc += z;
                    }
                }
            }
            *acc /= (out_side * out_side) as f64;
        }
        Ok(pooled)
    }

    fn probs(&self, feat: &[f64]) -> [f64; 2] {
        let logit = |c: usize| {
            self.head_weights[c * Self::FILTERS..(c + 1) * Self::FILTERS]
                .iter()
                .zip(feat)
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + self.head_bias[c]
        };
        let (a, b) = (logit(0), logit(1));
        let m = a.max(b);
        let (ea, eb) = (libm::exp(a - m), libm::exp(b - m));
        [ea / (ea + eb), eb / (ea + eb)]
    }
}

impl ImageSentimentBackend for ConvImageModel {
    fn name(&self) -> &str {
        "conv-gap"
    }

    fn score_frame(&self, frame: &Raster) -> Result<f64, BackendError> {
        Ok(self.probs(&self.features(frame)?)[1])
    }
}

fn cross_entropy(p: [f64; 2], y: usize) -> f64 {
    -libm::log(p[y].max(1e-12))
}

/// Fine-tunes the softmax head of a [`ConvImageModel`]; the convolutional
/// base stays frozen. The last `validation_split` share of the shuffled
/// examples is held out for the per-epoch validation loss.
pub fn train_image(
    config: &ImageFineTuneConfig,
    examples: &[(Raster, Sentiment)],
) -> Result<(ConvImageModel, Vec<EpochLog>), TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let mut model = ConvImageModel::new(config.input_side, config.seed);
    let mut data = Vec::with_capacity(examples.len());
    for (index, (img, label)) in examples.iter().enumerate() {
        let feat = model.features(img).map_err(|e| TrainError::BadImage {
            index,
            detail: alloc::format!("{e}"),
        })?;
        data.push((feat, label.label() as usize));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1a6e);
    data.shuffle(&mut rng);
    let n_val = (data.len() as f64 * config.validation_split) as usize;
    let n_val = n_val.min(data.len() - 1);
    let (train, val) = data.split_at(data.len() - n_val);

    let k = ConvImageModel::FILTERS;
    let mut opt = Adam::new(config.learning_rate, 2 * k + 2);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; 2 * k + 2];
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &train[i];
                let p = model.probs(x);
                epoch_loss += cross_entropy(p, *y);
                for c in 0..2 {
                    let dz = (p[c] - if c == *y { 1.0 } else { 0.0 }) * scale;
                    for j in 0..k {
                        grad[c * k + j] += dz * x[j];
                    }
                    grad[2 * k + c] += dz;
                }
            }
            let mut params = model.head_weights.clone();
            params.extend_from_slice(&model.head_bias);
            opt.step(&mut params, &grad);
            model.head_bias = [params[2 * k], params[2 * k + 1]];
            params.truncate(2 * k);
            model.head_weights = params;
        }
        let val_loss = (!val.is_empty()).then(|| {
            val.iter().map(|(x, y)| cross_entropy(model.probs(x), *y)).sum::<f64>() / val.len() as f64
        });
        log.push(EpochLog {
            epoch,
            loss: epoch_loss / train.len() as f64,
            val_loss,
        });
    }
    Ok((model, log))
}
