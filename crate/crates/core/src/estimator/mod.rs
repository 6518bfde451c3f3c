//! Scalar regressors from a single-channel spectrogram, trained with Adam on
//! mean squared error and selected by validation loss.
//!
//! Two backbones are available: a linear map over the flattened input, and a
//! small convolutional stack (3x3 same-padded conv, ReLU, 2x2 average pool per
//! block, then global average pooling and an affine head). Gradients are
//! computed by hand-written backpropagation in 64-bit floats.

mod checkpoint;
mod network;

pub use checkpoint::{load_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use network::{forward, grad, Gradients};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};

/// A spectrogram paired with its regression target.
pub type Example<'a> = (&'a MelSpectrogram, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Linear,
    SmallConv,
}

impl Architecture {
    pub fn tag(self) -> u8 {
        match self {
            Architecture::Linear => 0,
            Architecture::SmallConv => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Architecture::Linear),
            1 => Some(Architecture::SmallConv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub architecture: Architecture,
    pub conv_channels: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::SmallConv,
            conv_channels: vec![8, 16, 32],
            learning_rate: 1e-4,
            batch_size: 128,
            max_epochs: 30,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl RegressorConfig {
    pub fn linear() -> Self {
        Self {
            architecture: Architecture::Linear,
            conv_channels: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be at least 1".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Argument("adam_eps must be positive".into()));
        }
        if self.architecture == Architecture::SmallConv
            && (self.conv_channels.is_empty() || self.conv_channels.contains(&0))
        {
            return Err(Error::Argument(
                "small_conv needs a non-empty list of positive channel counts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Parameter tensors in a fixed order.
///
/// Linear: `[weights (n_mels*n_frames), bias (1)]`.
/// Small conv: per block `[kernel (c_out, c_in, 3, 3), bias (c_out)]`, then
/// `[head weights (c_last), head bias (1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    pub architecture: Architecture,
    /// `(n_mels, n_frames)`.
    pub input_shape: (usize, usize),
    pub tensors: Vec<Tensor>,
}

impl RegressorParams {
    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors.iter().map(|t| t.shape.clone()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn conv_channels(&self) -> Vec<usize> {
        match self.architecture {
            Architecture::Linear => Vec::new(),
            Architecture::SmallConv => self.tensors[..self.tensors.len() - 2]
                .iter()
                .step_by(2)
                .map(|k| k.shape[0])
                .collect(),
        }
    }
}

fn layer_shapes(cfg: &RegressorConfig, input_shape: (usize, usize)) -> Result<Vec<(Vec<usize>, usize)>> {
    let (h, w) = input_shape;
    if h == 0 || w == 0 {
        return Err(Error::Shape("empty input shape".into()));
    }
    // (shape, fan_in); fan_in 0 marks a bias
    let mut shapes = Vec::new();
    match cfg.architecture {
        Architecture::Linear => {
            shapes.push((vec![h * w], h * w));
            shapes.push((vec![1], 0));
        }
        Architecture::SmallConv => {
            let (mut h, mut w, mut c_in) = (h, w, 1);
            for &c in &cfg.conv_channels {
                if h < 2 || w < 2 {
                    return Err(Error::Shape(format!(
                        "input {:?} too small for {} pooling blocks",
                        input_shape,
                        cfg.conv_channels.len()
                    )));
                }
                shapes.push((vec![c, c_in, 3, 3], c_in * 9));
                shapes.push((vec![c], 0));
                h /= 2;
                w /= 2;
                c_in = c;
            }
            shapes.push((vec![c_in], c_in));
            shapes.push((vec![1], 0));
        }
    }
    Ok(shapes)
}

/// Weights uniform in `(-s, s)` with `s = sqrt(1 / fan_in)`, biases zero.
pub fn init_params(cfg: &RegressorConfig, input_shape: (usize, usize)) -> Result<RegressorParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_with_rng(cfg, input_shape, &mut rng)
}

fn init_with_rng(
    cfg: &RegressorConfig,
    input_shape: (usize, usize),
    rng: &mut impl Rng,
) -> Result<RegressorParams> {
    let tensors = layer_shapes(cfg, input_shape)?
        .into_iter()
        .map(|(shape, fan_in)| {
            let mut t = Tensor::zeros(shape);
            if fan_in > 0 {
                let s = (1.0 / fan_in as f64).sqrt();
                for v in &mut t.data {
                    *v = rng.random_range(-s..s);
                }
            }
            t
        })
        .collect();
    Ok(RegressorParams {
        architecture: cfg.architecture,
        input_shape,
        tensors,
    })
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Argument("MSE of an empty set".into()));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / preds.len() as f64)
}

pub fn predict_set(params: &RegressorParams, set: &[&MelSpectrogram]) -> Result<Vec<f64>> {
    set.iter().map(|s| forward(params, s)).collect()
}

fn set_loss(params: &RegressorParams, set: &[Example]) -> Result<f64> {
    let preds = set
        .iter()
        .map(|(s, _)| forward(params, s))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = set.iter().map(|(_, t)| *t).collect();
    mse(&preds, &targets)
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &RegressorParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut RegressorParams,
    grads: &Gradients,
    state: &mut AdamState,
    t: u64,
    cfg: &RegressorConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Argument("Adam step index starts at 1".into()));
    }
    if grads.tensors.len() != params.tensors.len()
        || grads
            .tensors
            .iter()
            .zip(&params.tensors)
            .any(|(g, p)| g.len() != p.data.len())
    {
        return Err(Error::Shape("gradient layout does not match parameters".into()));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powf(t as f64);
    let c2 = 1.0 - b2.powf(t as f64);
    for (k, p) in params.tensors.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], &grads.tensors[k]);
        for i in 0..p.data.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Index into `val_loss_curve`; 0 is the untrained model.
    pub best_epoch: usize,
    /// Entry 0 is the initial full-set loss; entry `e` is the sample-weighted
    /// mean mini-batch loss during epoch `e`.
    pub train_loss_curve: Vec<f64>,
    /// Entry `e` is the validation loss after epoch `e`.
    pub val_loss_curve: Vec<f64>,
    pub selected_params: RegressorParams,
}

/// Trains from a seeded initialization, keeping the parameters with the lowest
/// validation loss. The final partial mini-batch of each epoch is used.
pub fn train(cfg: &RegressorConfig, train_set: &[Example], val_set: &[Example]) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InsufficientData(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let shape = train_set[0].0.shape();
    if let Some((s, _)) = train_set.iter().chain(val_set).find(|(s, _)| s.shape() != shape) {
        return Err(Error::Shape(format!(
            "mixed input shapes {:?} and {:?}",
            shape,
            s.shape()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_with_rng(cfg, shape, &mut rng)?;
    let mut adam = AdamState::new(&params);
    let mut step = 0u64;

    let check = |epoch: usize, loss: f64| {
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::Divergence { epoch, loss })
        }
    };
    let mut train_curve = vec![check(0, set_loss(&params, train_set)?)?];
    let mut val_curve = vec![check(0, set_loss(&params, val_set)?)?];
    let mut best = (0usize, val_curve[0], params.clone());

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch: Vec<Example> = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let (loss, g) = grad(&params, &batch)?;
            check(epoch, loss)?;
            weighted += loss * chunk.len() as f64;
            step += 1;
            adam_step(&mut params, &g, &mut adam, step, cfg)?;
        }
        train_curve.push(check(epoch, weighted / train_set.len() as f64)?);
        let val = check(epoch, set_loss(&params, val_set)?)?;
        val_curve.push(val);
        if val < best.1 {
            best = (epoch, val, params.clone());
        }
    }
    Ok(TrainReport {
        best_epoch: best.0,
        train_loss_curve: train_curve,
        val_loss_curve: val_curve,
        selected_params: best.2,
    })
}
