//! Generator evaluation: label model, inception score, generate score.
//!
//! The inception score of a sample batch is computed against a fixed
//! label model (a small classifier trained once on real data and then
//! frozen): confident per-image predictions plus a uniform class mix
//! over the batch score high. The batch is cut into consecutive
//! equal-size splits; each split `S` scores
//! `exp(mean_{x in S} KL(p(y|x) || p_mean(S)))`, which lies in
//! `[1, k]` for `k` classes.
//!
//! The generate score condenses the split series into a stability
//! number in `[0, 1]`: the distance of the final split's score from the
//! series mean, normalized by the series range. Low values mean the
//! score settled; high values mean the final state is an outlier
//! against the run's own history — a mode-collapse flag that needs no
//! held-out data.
//!
//! The label model must clear an accuracy gate on held-out real data
//! before it may be used; scoring against a weak classifier would make
//! every generator look alike.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::checkpoint::{read_mlp, write_mlp};
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use crate::ndnum::{Matrix, RngStream};

/// Class count the label model always predicts over.
pub const CLASSES: usize = 10;

/// Holdout accuracy the label model must reach before it may score.
pub const ACCURACY_GATE: f64 = 0.90;

/// Probability floor inside KL terms; keeps `ln` finite at hard zeros.
const KL_FLOOR: f64 = 1e-12;

const MODEL_MAGIC: [u8; 8] = *b"PPGANLM1";
const HIDDEN: usize = 64;
const SGD_BATCH: usize = 32;
const SGD_RATE: f64 = 0.05;
/// Fraction of the corpus held out for the accuracy gate.
const HOLDOUT_FRACTION: f64 = 0.2;

/// Row-wise stable softmax: subtract each row's max before
/// exponentiating, so huge logits cannot overflow.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let (m, k) = (logits.rows(), logits.cols());
    let mut out = Vec::with_capacity(m * k);
    for i in 0..m {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / sum));
    }
    Matrix::from_vec(m, k, out).expect("softmax preserves the shape")
}

/// A frozen classifier mapping flattened images to 10-class
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModel {
    net: MlpParams,
}

impl LabelModel {
    pub fn new(net: MlpParams) -> Result<Self> {
        if net.out_dim() != CLASSES {
            return Err(Error::Shape(format!(
                "label model must emit {CLASSES} class scores, emits {}",
                net.out_dim()
            )));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &MlpParams {
        &self.net
    }

    pub fn in_dim(&self) -> usize {
        self.net.in_dim()
    }

    /// Class probabilities, one row per image.
    pub fn predict_proba(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.net.forward(batch)?))
    }

    /// Arg-max class per image.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<u8>> {
        let probs = self.predict_proba(batch)?;
        Ok((0..probs.rows())
            .map(|i| {
                let row = probs.row(i);
                let mut best = 0usize;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best as u8
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&MODEL_MAGIC)?;
        write_mlp(&mut w, &self.net)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "bad label model magic {magic:02x?}, expected {MODEL_MAGIC:02x?}"
            )));
        }
        Self::new(read_mlp(&mut r)?)
    }
}

/// Train the label model on `(images, labels)` with plain minibatch SGD
/// on cross-entropy, holding out the final 20% of rows for the accuracy
/// gate. Fails with the measured accuracy if the gate is missed.
pub fn train_label_model(
    images: &Matrix,
    labels: &[u8],
    epochs: usize,
    stream: &mut RngStream,
) -> Result<LabelModel> {
    if images.rows() != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(Error::Data(format!(
            "label {bad} out of range, classes run 0..{CLASSES}"
        )));
    }
    if epochs == 0 {
        return Err(Error::Parameter("epochs must be at least 1".to_string()));
    }
    let n = images.rows();
    let holdout = ((n as f64 * HOLDOUT_FRACTION) as usize).max(1);
    if holdout >= n {
        return Err(Error::Data(format!(
            "corpus of {n} rows is too small to hold out {holdout}"
        )));
    }
    let train_n = n - holdout;

    let mut net = MlpParams::init(
        &[images.cols(), HIDDEN, CLASSES],
        &[Activation::Relu, Activation::Linear],
        stream,
    )?;

    let batch = SGD_BATCH.min(train_n);
    let steps_per_epoch = train_n.div_ceil(batch);
    for _ in 0..epochs {
        for _ in 0..steps_per_epoch {
            let indices: Vec<usize> = (0..batch).map(|_| stream.next_index(train_n)).collect();
            let x = images.select_rows(&indices)?;
            let probs = softmax_rows(&net.forward(&x)?);
            // d(mean cross-entropy)/d(logits) = (p - onehot) / batch.
            let mut upstream = probs.data().to_vec();
            for (row, &idx) in indices.iter().enumerate() {
                upstream[row * CLASSES + labels[idx] as usize] -= 1.0;
            }
            for v in &mut upstream {
                *v /= batch as f64;
            }
            let upstream = Matrix::from_vec(batch, CLASSES, upstream)?;
            let (per_example, _) = net.backward_batch(&x, &upstream)?;
            let mut grad = vec![0.0; per_example.param_count()];
            for i in 0..per_example.examples() {
                for (g, p) in grad.iter_mut().zip(per_example.example(i)) {
                    *g += p;
                }
            }
            net.apply_update(&grad, -SGD_RATE)?;
        }
    }

    let model = LabelModel::new(net)?;
    let held_indices: Vec<usize> = (train_n..n).collect();
    let held = images.select_rows(&held_indices)?;
    let predicted = model.predict(&held)?;
    let correct = predicted
        .iter()
        .zip(&labels[train_n..])
        .filter(|(p, l)| p == l)
        .count();
    let accuracy = correct as f64 / holdout as f64;
    if accuracy < ACCURACY_GATE {
        return Err(Error::AccuracyGate {
            accuracy,
            required: ACCURACY_GATE,
        });
    }
    Ok(model)
}

/// KL divergence between two probability rows, both floored at 1e-12.
fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            let pi = pi.max(KL_FLOOR);
            let qi = qi.max(KL_FLOOR);
            pi * (pi.ln() - qi.ln())
        })
        .sum()
}

/// Inception score of each consecutive split of the prediction batch.
/// `splits` must divide the row count exactly.
pub fn inception_score(probs: &Matrix, splits: usize) -> Result<Vec<f64>> {
    let n = probs.rows();
    if splits == 0 {
        return Err(Error::Parameter("splits must be at least 1".to_string()));
    }
    if n == 0 || n % splits != 0 {
        return Err(Error::Parameter(format!(
            "splits must divide the sample count exactly: {splits} splits over {n} rows"
        )));
    }
    let k = probs.cols();
    let size = n / splits;
    let mut scores = Vec::with_capacity(splits);
    for s in 0..splits {
        let rows = s * size..(s + 1) * size;
        let mut marginal = vec![0.0; k];
        for i in rows.clone() {
            for (m, &p) in marginal.iter_mut().zip(probs.row(i)) {
                *m += p;
            }
        }
        for m in &mut marginal {
            *m /= size as f64;
        }
        let mean_kl = rows
            .map(|i| kl_divergence(probs.row(i), &marginal))
            .sum::<f64>()
            / size as f64;
        scores.push(mean_kl.exp());
    }
    Ok(scores)
}

/// Stability of an inception-score series: distance of the final split's
/// score from the series mean, over the series range. Zero range (a
/// perfectly flat series) scores 0.
pub fn generate_score(is_values: &[f64]) -> Result<f64> {
    if is_values.is_empty() {
        return Err(Error::Parameter(
            "generate score needs at least one split score".to_string(),
        ));
    }
    let n = is_values.len() as f64;
    let mean = is_values.iter().sum::<f64>() / n;
    let max = is_values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let min = is_values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if max == min {
        return Ok(0.0);
    }
    Ok((is_values[n as usize - 1] - mean).abs() / (max - min))
}

/// Everything one scoring pass produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Per-split inception scores, in split order.
    pub is_values: Vec<f64>,
    pub is_mean: f64,
    /// Population standard deviation of the split scores.
    pub is_std: f64,
    pub gs: f64,
}

/// Sample `samples` images from the generator, classify them, and
/// compute the split inception scores plus the generate score.
pub fn score_generator(
    generator: &MlpParams,
    model: &LabelModel,
    samples: usize,
    splits: usize,
    stream: &mut RngStream,
) -> Result<ScoreReport> {
    if generator.out_dim() != model.in_dim() {
        return Err(Error::Shape(format!(
            "generator emits {} dims but the label model consumes {}",
            generator.out_dim(),
            model.in_dim()
        )));
    }
    let z = Matrix::gaussian(samples, generator.in_dim(), stream, 0.0, 1.0);
    let images = generator.forward(&z)?;
    let probs = model.predict_proba(&images)?;
    let is_values = inception_score(&probs, splits)?;
    let gs = generate_score(&is_values)?;
    let n = is_values.len() as f64;
    let is_mean = is_values.iter().sum::<f64>() / n;
    let is_std =
        (is_values.iter().map(|v| (v - is_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ScoreReport {
        is_values,
        is_mean,
        is_std,
        gs,
    })
}
