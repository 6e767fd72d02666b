use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{ensure, ensure_finite, Error, Result};
use crate::numgrad::{sigmoid, softplus, AdamState, Matrix};
use crate::rng;
use crate::world::LabeledDataset;

use super::generator::ModelMeta;

/// Smallest probability reported; keeps outputs strictly inside `(0, 1)`.
pub const PROB_FLOOR: f64 = 1e-15;

/// Predicts the probability of the positive target class for each input row.
pub trait TargetClassifier {
    fn input_dim(&self) -> usize;
    fn predict(&self, inputs: &Matrix) -> Result<Vec<f64>>;
}

/// A classifier that can pull probability cotangents back to its inputs.
pub trait DifferentiableClassifier: TargetClassifier {
    type Tape;
    fn forward(&self, inputs: &Matrix) -> Result<(Vec<f64>, Self::Tape)>;
    fn pullback(&self, tape: &Self::Tape, cotangent: &[f64]) -> Result<Matrix>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Hidden width; `0` selects plain logistic regression.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// Mean cross-entropy on the training set after each epoch.
    pub epoch_loss: Vec<f64>,
    pub train_accuracy: f64,
}

/// `sigmoid(w2 · tanh(W1 x + b1) + b2)`, or `sigmoid(w2 · x + b2)` when `hidden == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    input_dim: usize,
    hidden: usize,
    /// hidden×input (empty in logistic mode).
    w1: Matrix,
    b1: Vec<f64>,
    /// Output weights over the hidden units (or the inputs in logistic mode).
    w2: Vec<f64>,
    b2: f64,
    pub target: String,
    pub record: TrainingRecord,
}

pub struct ClassifierTape {
    probs: Vec<f64>,
    /// tanh activations, n×hidden.
    hidden: Option<Matrix>,
}

impl Classifier {
    /// A classifier with all weights zero: predicts 0.5 everywhere.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: Matrix::zeros(hidden, if hidden == 0 { 0 } else { input_dim }),
            b1: vec![0.0; hidden],
            w2: vec![0.0; if hidden == 0 { input_dim } else { hidden }],
            b2: 0.0,
            target: String::new(),
            record: TrainingRecord::default(),
        }
    }

    /// Logistic regression with explicit weights.
    pub fn logistic(weights: Vec<f64>, bias: f64) -> Result<Self> {
        ensure_finite(&weights, "logistic weights")?;
        Ok(Self {
            input_dim: weights.len(),
            hidden: 0,
            w1: Matrix::zeros(0, 0),
            b1: Vec::new(),
            w2: weights,
            b2: bias,
            target: String::new(),
            record: TrainingRecord::default(),
        })
    }

    /// Random initialization with scaled normal weights.
    pub fn random(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut r = rng::rng_from(seed, &[rng::tag("classifier-init")]);
        let mut c = Self::zeros(input_dim, hidden);
        if hidden > 0 {
            let s1 = 1.0 / (input_dim as f64).sqrt();
            for w in c.w1.as_mut_slice() {
                *w = s1 * rng::standard_normal_vec(&mut r, 1)[0];
            }
            let s2 = 1.0 / (hidden as f64).sqrt();
            c.w2 = rng::standard_normal_vec(&mut r, hidden).into_iter().map(|v| v * s2).collect();
        } else {
            let s = 1.0 / (input_dim as f64).sqrt();
            c.w2 = rng::standard_normal_vec(&mut r, input_dim).into_iter().map(|v| v * s).collect();
        }
        c
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<()> {
        ensure(inputs.cols() == self.input_dim, || {
            format!("classifier expects {} inputs, got {}", self.input_dim, inputs.cols())
        })
    }

    fn logits(&self, inputs: &Matrix) -> Result<(Vec<f64>, Option<Matrix>)> {
        self.check_inputs(inputs)?;
        let (z, h) = if self.hidden == 0 {
            (inputs.matvec(&self.w2)?, None)
        } else {
            let mut h = inputs.matmul_t(&self.w1)?;
            for i in 0..h.rows() {
                for (a, b) in h.row_mut(i).iter_mut().zip(&self.b1) {
                    *a = tanh(*a + b);
                }
            }
            (h.matvec(&self.w2)?, Some(h))
        };
        let logits: Vec<f64> = z.into_iter().map(|v| v + self.b2).collect();
        // A non-finite input pixel always surfaces here.
        ensure_finite(&logits, "classifier logits")?;
        Ok((logits, h))
    }

    /// Probability for a single image.
    pub fn classify(&self, image: &[f64]) -> Result<f64> {
        let m = Matrix::from_vec(1, image.len(), image.to_vec())?;
        Ok(self.predict(&m)?[0])
    }

    /// Input gradient of `cotangent · p(image)`.
    pub fn pullback_single(&self, image: &[f64], cotangent: f64) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, image.len(), image.to_vec())?;
        let (_, tape) = self.forward(&m)?;
        Ok(self.pullback(&tape, &[cotangent])?.into_vec())
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    fn set_flat_params(&mut self, v: &[f64]) {
        let n1 = self.w1.as_slice().len();
        let h = self.b1.len();
        let n2 = self.w2.len();
        self.w1.as_mut_slice().copy_from_slice(&v[..n1]);
        self.b1.copy_from_slice(&v[n1..n1 + h]);
        self.w2.copy_from_slice(&v[n1 + h..n1 + h + n2]);
        self.b2 = v[n1 + h + n2];
    }

    /// Mean binary cross-entropy and its gradient with respect to the flat parameters.
    fn loss_and_grad(&self, inputs: &Matrix, labels: &[u8]) -> Result<(f64, Vec<f64>)> {
        let (logits, hidden) = self.logits(inputs)?;
        let m = labels.len() as f64;
        let mut loss = 0.0;
        let dlogit: Vec<f64> = logits
            .iter()
            .zip(labels)
            .map(|(&z, &y)| {
                let y = y as f64;
                loss += softplus(z) - y * z;
                (sigmoid(z) - y) / m
            })
            .collect();
        let mut grad = Vec::with_capacity(self.flat_params().len());
        match hidden {
            None => {
                let gw = Matrix::from_vec(1, dlogit.len(), dlogit.clone())?.matmul(inputs)?;
                grad.extend_from_slice(gw.as_slice());
            }
            Some(h) => {
                let mut dpre = Matrix::zeros(h.rows(), self.hidden);
                for i in 0..h.rows() {
                    for k in 0..self.hidden {
                        let a = h.get(i, k);
                        dpre.set(i, k, dlogit[i] * self.w2[k] * (1.0 - a * a));
                    }
                }
                let gw1 = dpre.t_matmul(inputs)?;
                grad.extend_from_slice(gw1.as_slice());
                for k in 0..self.hidden {
                    grad.push((0..h.rows()).map(|i| dpre.get(i, k)).sum());
                }
                let gw2 = Matrix::from_vec(1, dlogit.len(), dlogit.clone())?.matmul(&h)?;
                grad.extend_from_slice(gw2.as_slice());
            }
        }
        grad.push(dlogit.iter().sum());
        Ok((loss / m, grad))
    }

    /// Mean cross-entropy over a labeled set.
    pub fn mean_loss(&self, inputs: &Matrix, labels: &[u8]) -> Result<f64> {
        let (logits, _) = self.logits(inputs)?;
        Ok(logits
            .iter()
            .zip(labels)
            .map(|(&z, &y)| softplus(z) - y as f64 * z)
            .sum::<f64>()
            / labels.len() as f64)
    }

    pub fn accuracy(&self, inputs: &Matrix, labels: &[u8]) -> Result<f64> {
        let p = self.predict(inputs)?;
        let hits = p.iter().zip(labels).filter(|(p, &y)| (**p >= 0.5) == (y == 1)).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    pub fn save(&self, dir: &Path, stem: &str, meta: &ModelMeta) -> Result<[PathBuf; 2]> {
        let header = ClassifierHeader {
            input_dim: self.input_dim,
            hidden: self.hidden,
            target: self.target.clone(),
            record: self.record.clone(),
            meta: meta.clone(),
        };
        artifact::save(dir, stem, CLASSIFIER_FORMAT, &header, &self.flat_params())
    }

    pub fn load(json_path: &Path) -> Result<(Self, ModelMeta)> {
        let (h, blob): (ClassifierHeader, Vec<f64>) = artifact::load(json_path, CLASSIFIER_FORMAT)?;
        let mut c = Self::zeros(h.input_dim, h.hidden);
        if blob.len() != c.flat_params().len() {
            return Err(Error::artifact(json_path, "classifier blob size disagrees with header"));
        }
        c.set_flat_params(&blob);
        c.target = h.target;
        c.record = h.record;
        Ok((c, h.meta))
    }
}

const CLASSIFIER_FORMAT: &str = "classifier";

#[derive(Serialize, Deserialize)]
struct ClassifierHeader {
    input_dim: usize,
    hidden: usize,
    target: String,
    record: TrainingRecord,
    meta: ModelMeta,
}

impl TargetClassifier for Classifier {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let (logits, _) = self.logits(inputs)?;
        Ok(logits.into_iter().map(prob).collect())
    }
}

/// `tanh` through a single `exp`; several times faster than the libm routine.
fn tanh(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

fn prob(logit: f64) -> f64 {
    sigmoid(logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

impl DifferentiableClassifier for Classifier {
    type Tape = ClassifierTape;

    fn forward(&self, inputs: &Matrix) -> Result<(Vec<f64>, ClassifierTape)> {
        let (logits, hidden) = self.logits(inputs)?;
        let probs: Vec<f64> = logits.iter().map(|&z| prob(z)).collect();
        // dp/dlogit = σ(z)σ(−z), kept exact even where the reported value is floored.
        let slopes = logits.iter().map(|&z| sigmoid(z) * sigmoid(-z)).collect();
        Ok((probs, ClassifierTape { probs: slopes, hidden }))
    }

    fn pullback(&self, tape: &ClassifierTape, cotangent: &[f64]) -> Result<Matrix> {
        ensure(cotangent.len() == tape.probs.len(), || {
            "classifier cotangent length mismatch".to_string()
        })?;
        let dlogit: Vec<f64> = cotangent.iter().zip(&tape.probs).map(|(c, s)| c * s).collect();
        match &tape.hidden {
            None => Ok(Matrix::from_fn(dlogit.len(), self.input_dim, |i, j| dlogit[i] * self.w2[j])),
            Some(h) => {
                let mut dpre = Matrix::zeros(h.rows(), self.hidden);
                for i in 0..h.rows() {
                    for k in 0..self.hidden {
                        let a = h.get(i, k);
                        dpre.set(i, k, dlogit[i] * self.w2[k] * (1.0 - a * a));
                    }
                }
                dpre.matmul(&self.w1)
            }
        }
    }
}

/// Trains on explicit binary labels with mini-batch Adam.
pub fn train_classifier_on(
    inputs: &Matrix,
    labels: &[u8],
    target: &str,
    config: &ClassifierConfig,
) -> Result<Classifier> {
    ensure(inputs.rows() == labels.len() && !labels.is_empty(), || {
        "classifier inputs and labels must be non-empty and aligned".to_string()
    })?;
    ensure(config.epochs >= 1 && config.batch_size >= 1 && config.learning_rate > 0.0, || {
        "classifier config needs epochs >= 1, batch >= 1 and a positive learning rate".to_string()
    })?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateLabels(format!(
            "target `{target}` has a single class in the training labels"
        )));
    }

    let mut model = Classifier::random(inputs.cols(), config.hidden, config.seed);
    model.target = target.to_string();
    let mut params = model.flat_params();
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let mut shuffle_rng = rng::rng_from(config.seed, &[rng::tag("classifier-shuffle")]);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let x = inputs.select_rows(batch);
            let y: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let (_, grad) = model.loss_and_grad(&x, &y)?;
            (params, adam) = adam.step(params, &grad)?;
            model.set_flat_params(&params);
        }
        epoch_loss.push(model.mean_loss(inputs, labels)?);
    }
    model.record = TrainingRecord {
        epoch_loss,
        train_accuracy: model.accuracy(inputs, labels)?,
    };
    Ok(model)
}

/// Trains a target classifier on the dataset's binarized target labels.
pub fn train_classifier(dataset: &LabeledDataset, target: &str, config: &ClassifierConfig) -> Result<Classifier> {
    let labels = dataset.binarized(target)?;
    train_classifier_on(&dataset.images, &labels, target, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_predict_half() {
        let c = Classifier::zeros(6, 4);
        let x = Matrix::from_fn(3, 6, |i, j| (i * j) as f64 * 0.1);
        assert_eq!(c.predict(&x).unwrap(), vec![0.5; 3]);
        assert_eq!(Classifier::zeros(6, 0).predict(&x).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let c = Classifier::zeros(6, 4);
        assert!(c.classify(&[0.0; 5]).is_err());
    }

    #[test]
    fn single_class_labels_are_degenerate() {
        let x = Matrix::from_fn(4, 2, |i, j| (i + j) as f64);
        let r = train_classifier_on(&x, &[1, 1, 1, 1], "t", &ClassifierConfig::default());
        assert!(matches!(r, Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn logistic_gradient_is_output_weight_scaled() {
        let c = Classifier::logistic(vec![2.0, -1.0], 0.3).unwrap();
        let x = [0.2, 0.4];
        let p = c.classify(&x).unwrap();
        let g = c.pullback_single(&x, 1.0).unwrap();
        let s = p * (1.0 - p);
        assert!((g[0] - 2.0 * s).abs() < 1e-15 && (g[1] + s).abs() < 1e-15);
    }
}
