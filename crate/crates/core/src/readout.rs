//! Readout classifiers trained on liquid state vectors.
//!
//! * `sgd`: a single softmax layer trained on cross-entropy with mini-batch
//!   SGD.
//! * `svm1`: one-vs-rest linear SVM on binarized state vectors.
//! * `svm2`: the same SVM on the raw normalized vectors.
//!
//! Both SVMs minimize the L2-regularized hinge loss by primal subgradient
//! descent, sharing the mini-batch loop with the softmax readout.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;
use crate::seed;

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("training needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("empty data set")]
    Empty,
    #[error("{vectors} vectors but {labels} labels")]
    LabelCount { vectors: usize, labels: usize },
    #[error("vector {index} has {got} features, expected {expected}")]
    FeatureCount {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("invalid hyper-parameters: {0}")]
    Hyper(String),
    #[error("not a readout model file")]
    BadMagic,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown readout kind tag {0}")]
    UnknownKind(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ReadoutError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutKind {
    Sgd,
    Svm1,
    Svm2,
}

impl ReadoutKind {
    pub const ALL: [ReadoutKind; 3] = [Self::Sgd, Self::Svm1, Self::Svm2];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Svm1 => "svm1",
            Self::Svm2 => "svm2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
    }

    fn tag(&self) -> u8 {
        match self {
            Self::Sgd => 0,
            Self::Svm1 => 1,
            Self::Svm2 => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Self::Sgd),
            1 => Ok(Self::Svm1),
            2 => Ok(Self::Svm2),
            other => Err(ReadoutError::UnknownKind(other)),
        }
    }

    fn binarizes(&self) -> bool {
        matches!(self, Self::Svm1)
    }
}

impl std::fmt::Display for ReadoutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadoutHyper {
    /// Initial step size; epoch `e` (from 1) uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 strength on the weights (biases are not regularized).
    pub l2: f64,
    pub seed: u64,
    /// Record the full-data objective after every epoch.
    pub track_loss: bool,
}

impl Default for ReadoutHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 100,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
            track_loss: false,
        }
    }
}

impl ReadoutHyper {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ReadoutError::Hyper("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ReadoutError::Hyper("batch_size must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ReadoutError::Hyper("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Linear scores `W x + b` with one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel<S> {
    pub kind: ReadoutKind,
    pub n_classes: usize,
    pub n_features: usize,
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<S>,
    pub biases: Vec<S>,
    pub hyper: ReadoutHyper,
    /// Objective after each epoch, when `hyper.track_loss` is set.
    pub loss_history: Vec<f64>,
}

/// 1 where the value exceeds 0.5, else 0. Exactly 0.5 maps to 0.
pub fn binarize<S: Scalar>(v: &[S]) -> Vec<S> {
    let half = S::of(0.5);
    v.iter()
        .map(|&x| if x > half { S::one() } else { S::zero() })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(scores: &[S]) -> Vec<S> {
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<S: Scalar>(scores: &[S]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl<S: Scalar> ReadoutModel<S> {
    /// All-zero parameters.
    pub fn zeros(kind: ReadoutKind, n_classes: usize, n_features: usize, hyper: ReadoutHyper) -> Self {
        Self {
            kind,
            n_classes,
            n_features,
            weights: vec![S::zero(); n_classes * n_features],
            biases: vec![S::zero(); n_classes],
            hyper,
            loss_history: Vec::new(),
        }
    }

    pub fn row(&self, class: usize) -> &[S] {
        &self.weights[class * self.n_features..(class + 1) * self.n_features]
    }

    /// Raw class scores for an already preprocessed feature vector.
    pub fn scores_raw(&self, x: &[S]) -> Vec<S> {
        (0..self.n_classes)
            .map(|c| {
                self.row(c)
                    .iter()
                    .zip(x)
                    .fold(self.biases[c], |acc, (&w, &xi)| acc + w * xi)
            })
            .collect()
    }

    /// Class scores, binarizing the input first for `svm1`.
    pub fn scores(&self, x: &[S]) -> Vec<S> {
        if self.kind.binarizes() {
            self.scores_raw(&binarize(x))
        } else {
            self.scores_raw(x)
        }
    }

    pub fn predict(&self, x: &[S]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|w| w.is_finite())
    }
}

/// Objective value and gradient for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<S> {
    pub loss: f64,
    /// Same layout as [`ReadoutModel::weights`].
    pub grad_w: Vec<S>,
    pub grad_b: Vec<S>,
}

fn l2_term<S: Scalar>(model: &ReadoutModel<S>, l2: f64) -> f64 {
    0.5 * l2 * model.weights.iter().map(|w| w.as_f64().powi(2)).sum::<f64>()
}

/// Mean cross-entropy of the softmax over `xs` plus `l2/2 |W|^2`.
pub fn softmax_loss_grad<S: Scalar>(
    model: &ReadoutModel<S>,
    xs: &[&[S]],
    ys: &[usize],
    l2: f64,
) -> LossGrad<S> {
    let (c, f) = (model.n_classes, model.n_features);
    let mut grad_w = vec![S::zero(); c * f];
    let mut grad_b = vec![S::zero(); c];
    let mut loss = 0.0;
    let inv_n = S::of(1.0 / xs.len() as f64);
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&model.scores_raw(x));
        loss -= p[y].as_f64().max(f64::MIN_POSITIVE).ln();
        for k in 0..c {
            let delta = (p[k] - if k == y { S::one() } else { S::zero() }) * inv_n;
            if delta == S::zero() {
                continue;
            }
            grad_b[k] = grad_b[k] + delta;
            let row = &mut grad_w[k * f..(k + 1) * f];
            for (g, &xi) in row.iter_mut().zip(x.iter()) {
                *g = *g + delta * xi;
            }
        }
    }
    loss /= xs.len() as f64;
    add_l2(model, l2, &mut grad_w);
    LossGrad {
        loss: loss + l2_term(model, l2),
        grad_w,
        grad_b,
    }
}

/// One-vs-rest hinge loss: for every class `k`, the mean over samples of
/// `max(0, 1 - t_k (w_k x + b_k))` with `t_k = +1` for the sample's class and
/// `-1` otherwise, summed over classes, plus `l2/2 |W|^2`. The gradient is
/// the subgradient that takes 0 at the kink.
pub fn hinge_loss_grad<S: Scalar>(
    model: &ReadoutModel<S>,
    xs: &[&[S]],
    ys: &[usize],
    l2: f64,
) -> LossGrad<S> {
    let (c, f) = (model.n_classes, model.n_features);
    let mut grad_w = vec![S::zero(); c * f];
    let mut grad_b = vec![S::zero(); c];
    let mut loss = 0.0;
    let inv_n = S::of(1.0 / xs.len() as f64);
    for (x, &y) in xs.iter().zip(ys) {
        let scores = model.scores_raw(x);
        for k in 0..c {
            let t = if k == y { S::one() } else { -S::one() };
            let margin = S::one() - t * scores[k];
            if margin > S::zero() {
                loss += margin.as_f64();
                let delta = -t * inv_n;
                grad_b[k] = grad_b[k] + delta;
                let row = &mut grad_w[k * f..(k + 1) * f];
                for (g, &xi) in row.iter_mut().zip(x.iter()) {
                    *g = *g + delta * xi;
                }
            }
        }
    }
    loss /= xs.len() as f64;
    add_l2(model, l2, &mut grad_w);
    LossGrad {
        loss: loss + l2_term(model, l2),
        grad_w,
        grad_b,
    }
}

fn add_l2<S: Scalar>(model: &ReadoutModel<S>, l2: f64, grad_w: &mut [S]) {
    if l2 > 0.0 {
        let l2 = S::of(l2);
        for (g, &w) in grad_w.iter_mut().zip(&model.weights) {
            *g = *g + l2 * w;
        }
    }
}

fn check_data<S: Scalar>(vectors: &[Vec<S>], labels: &[u16]) -> Result<usize> {
    if vectors.is_empty() {
        return Err(ReadoutError::Empty);
    }
    if vectors.len() != labels.len() {
        return Err(ReadoutError::LabelCount {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let width = vectors[0].len();
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != width) {
        return Err(ReadoutError::FeatureCount {
            index: i,
            got: v.len(),
            expected: width,
        });
    }
    Ok(width)
}

fn train<S: Scalar>(
    kind: ReadoutKind,
    vectors: &[Vec<S>],
    labels: &[u16],
    hyper: &ReadoutHyper,
) -> Result<ReadoutModel<S>> {
    hyper.validate()?;
    let width = check_data(vectors, labels)?;
    let mut seen: Vec<u16> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(ReadoutError::SingleClass(seen.len()));
    }
    let n_classes = *seen.last().unwrap() as usize + 1;

    let inputs: Vec<Vec<S>> = if kind.binarizes() {
        vectors.iter().map(|v| binarize(v)).collect()
    } else {
        vectors.to_vec()
    };
    let ys: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let objective = match kind {
        ReadoutKind::Sgd => softmax_loss_grad::<S>,
        ReadoutKind::Svm1 | ReadoutKind::Svm2 => hinge_loss_grad::<S>,
    };

    let mut model = ReadoutModel::zeros(kind, n_classes, width, *hyper);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut xs: Vec<&[S]> = Vec::with_capacity(hyper.batch_size);
    let mut bys: Vec<usize> = Vec::with_capacity(hyper.batch_size);
    for epoch in 0..hyper.epochs {
        let mut rng = seed::rng(seed::derive(hyper.seed, seed::stream::READOUT, epoch as u64));
        order.shuffle(&mut rng);
        let lr = S::of(hyper.learning_rate / ((epoch + 1) as f64).sqrt());
        for batch in order.chunks(hyper.batch_size) {
            xs.clear();
            bys.clear();
            xs.extend(batch.iter().map(|&i| inputs[i].as_slice()));
            bys.extend(batch.iter().map(|&i| ys[i]));
            let g = objective(&model, &xs, &bys, hyper.l2);
            for (w, gw) in model.weights.iter_mut().zip(&g.grad_w) {
                *w = *w - lr * *gw;
            }
            for (b, gb) in model.biases.iter_mut().zip(&g.grad_b) {
                *b = *b - lr * *gb;
            }
        }
        if hyper.track_loss {
            let all: Vec<&[S]> = inputs.iter().map(|v| v.as_slice()).collect();
            model.loss_history.push(objective(&model, &all, &ys, hyper.l2).loss);
        }
    }
    Ok(model)
}

/// Softmax readout trained with mini-batch SGD on cross-entropy.
pub fn train_sgd<S: Scalar>(
    vectors: &[Vec<S>],
    labels: &[u16],
    hyper: &ReadoutHyper,
) -> Result<ReadoutModel<S>> {
    train(ReadoutKind::Sgd, vectors, labels, hyper)
}

/// One-vs-rest linear SVM; `binarize_first` selects `svm1` over `svm2`.
pub fn train_svm<S: Scalar>(
    vectors: &[Vec<S>],
    labels: &[u16],
    hyper: &ReadoutHyper,
    binarize_first: bool,
) -> Result<ReadoutModel<S>> {
    let kind = if binarize_first {
        ReadoutKind::Svm1
    } else {
        ReadoutKind::Svm2
    };
    train(kind, vectors, labels, hyper)
}

pub fn train_readout<S: Scalar>(
    kind: ReadoutKind,
    vectors: &[Vec<S>],
    labels: &[u16],
    hyper: &ReadoutHyper,
) -> Result<ReadoutModel<S>> {
    train(kind, vectors, labels, hyper)
}

/// Fraction of vectors whose predicted class equals the label.
pub fn evaluate<S: Scalar>(model: &ReadoutModel<S>, vectors: &[Vec<S>], labels: &[u16]) -> Result<f64> {
    let width = check_data(vectors, labels)?;
    if width != model.n_features {
        return Err(ReadoutError::FeatureCount {
            index: 0,
            got: width,
            expected: model.n_features,
        });
    }
    let correct = vectors
        .iter()
        .zip(labels)
        .filter(|(v, &l)| model.predict(v) == l as usize)
        .count();
    Ok(correct as f64 / vectors.len() as f64)
}

pub const MODEL_MAGIC: [u8; 4] = *b"LSMR";
pub const MODEL_VERSION: u16 = 1;

impl<S: Scalar> ReadoutModel<S> {
    /// Little-endian blob: magic, version `u16`, kind `u8`, classes `u32`,
    /// features `u32`, then weights and biases as `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        out.write_all(&[self.kind.tag()])?;
        out.write_all(&(self.n_classes as u32).to_le_bytes())?;
        out.write_all(&(self.n_features as u32).to_le_bytes())?;
        for p in self.weights.iter().chain(&self.biases) {
            out.write_all(&p.as_f64().to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != MODEL_MAGIC {
            return Err(ReadoutError::BadMagic);
        }
        let mut b2 = [0u8; 2];
        input.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != MODEL_VERSION {
            return Err(ReadoutError::UnsupportedVersion(version));
        }
        let mut b1 = [0u8; 1];
        input.read_exact(&mut b1)?;
        let kind = ReadoutKind::from_tag(b1[0])?;
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let n_classes = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b4)?;
        let n_features = u32::from_le_bytes(b4) as usize;
        let mut model = Self::zeros(kind, n_classes, n_features, ReadoutHyper::default());
        let mut b8 = [0u8; 8];
        for p in model.weights.iter_mut().chain(model.biases.iter_mut()) {
            input.read_exact(&mut b8)?;
            *p = S::of(f64::from_le_bytes(b8));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng as _;

    /// Two well separated clusters per class around distinct corners.
    fn separable(n_per_class: usize, classes: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u16>) {
        let mut rng = seed::rng(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in 0..classes {
            for _ in 0..n_per_class {
                let mut v = vec![0.0; dim];
                for (j, x) in v.iter_mut().enumerate() {
                    let centre = if j % classes == c { 0.9 } else { 0.1 };
                    *x = centre + rng.gen_range(-0.08..0.08);
                }
                xs.push(v);
                ys.push(c as u16);
            }
        }
        (xs, ys)
    }

    #[test]
    fn binarize_truth_table() {
        assert_eq!(binarize(&[0.2f64, 0.5, 0.7]), [0.0, 0.0, 1.0]);
        assert_eq!(binarize(&[0.0f32; 4]), [0.0; 4]);
        let once = binarize(&[0.51f64, 0.49, 1.0, 0.0]);
        assert_eq!(binarize(&once), once);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0f64, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1] && p[1] > p[2]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0f64, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0f64; 3]), 0);
    }

    #[test]
    fn sgd_separates_two_clusters() {
        let (xs, ys) = separable(40, 2, 2, 1);
        let hyper = ReadoutHyper {
            epochs: 50,
            ..Default::default()
        };
        let m = train_sgd(&xs, &ys, &hyper).unwrap();
        assert_eq!(evaluate(&m, &xs, &ys).unwrap(), 1.0);
        assert!(m.is_finite());
    }

    #[test]
    fn zero_epochs_is_chance() {
        let (xs, ys) = separable(10, 2, 2, 1);
        let hyper = ReadoutHyper {
            epochs: 0,
            ..Default::default()
        };
        let m = train_sgd(&xs, &ys, &hyper).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        // Ties resolve to class 0, which is half the set.
        assert_eq!(evaluate(&m, &xs, &ys).unwrap(), 0.5);
    }

    #[test]
    fn svm_separates_and_svm1_collapses_on_low_inputs() {
        let (xs, ys) = separable(30, 3, 6, 2);
        for bin in [false, true] {
            let m = train_svm(&xs, &ys, &ReadoutHyper::default(), bin).unwrap();
            assert_eq!(evaluate(&m, &xs, &ys).unwrap(), 1.0);
        }

        // Every value <= 0.5 binarizes to zero: only the biases can learn and
        // the majority class wins.
        let low: Vec<Vec<f64>> = (0..50).map(|i| vec![0.5, (i % 5) as f64 / 10.0]).collect();
        let labels: Vec<u16> = (0..50).map(|i| u16::from(i % 10 < 7)).collect();
        let m = train_svm(&low, &labels, &ReadoutHyper::default(), true).unwrap();
        assert_eq!(evaluate(&m, &low, &labels).unwrap(), 0.7);
        let m = train_svm(&low, &labels, &ReadoutHyper::default(), false).unwrap();
        assert!(m.weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![0.1f64], vec![0.2]];
        assert!(matches!(
            train_sgd(&xs, &[3, 3], &ReadoutHyper::default()),
            Err(ReadoutError::SingleClass(1))
        ));
        assert!(matches!(
            train_svm(&xs, &[0, 0], &ReadoutHyper::default(), false),
            Err(ReadoutError::SingleClass(1))
        ));
    }

    #[test]
    fn hand_set_weights_evaluate_to_two_thirds() {
        let mut m = ReadoutModel::<f64>::zeros(ReadoutKind::Sgd, 2, 2, ReadoutHyper::default());
        // Class 0 scores x0, class 1 scores x1.
        m.weights = vec![1.0, 0.0, 0.0, 1.0];
        let xs = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.7, 0.3]];
        assert_eq!(evaluate(&m, &xs, &[0, 1, 1]).unwrap(), 2.0 / 3.0);
        assert_eq!(evaluate(&m, &xs, &[0, 1, 0]).unwrap(), 1.0);
        assert!(matches!(evaluate(&m, &[], &[]), Err(ReadoutError::Empty)));
        assert!(matches!(
            evaluate(&m, &[vec![1.0]], &[0]),
            Err(ReadoutError::FeatureCount { .. })
        ));
    }

    #[test]
    fn training_is_reproducible() {
        let (xs, ys) = separable(20, 3, 5, 4);
        let h = ReadoutHyper {
            epochs: 5,
            seed: 9,
            ..Default::default()
        };
        for kind in ReadoutKind::ALL {
            let a = train_readout(kind, &xs, &ys, &h).unwrap();
            let b = train_readout(kind, &xs, &ys, &h).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sgd_loss_decreases_on_separable_set() {
        let (xs, ys) = separable(30, 2, 4, 5);
        let h = ReadoutHyper {
            epochs: 30,
            learning_rate: 0.02,
            track_loss: true,
            ..Default::default()
        };
        let m = train_sgd(&xs, &ys, &h).unwrap();
        assert_eq!(m.loss_history.len(), 30);
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", m.loss_history);
        }
    }

    #[test]
    fn model_blob_round_trip() {
        let (xs, ys) = separable(10, 3, 4, 6);
        let m = train_svm(&xs, &ys, &ReadoutHyper { epochs: 3, ..Default::default() }, true).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"LSMR");
        assert_eq!(buf.len(), 4 + 2 + 1 + 4 + 4 + 8 * (3 * 4 + 3));
        let back = ReadoutModel::<f64>::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.biases, m.biases);
        assert_eq!(back.kind, ReadoutKind::Svm1);
        assert_eq!(evaluate(&back, &xs, &ys).unwrap(), evaluate(&m, &xs, &ys).unwrap());
        buf[0] = b'X';
        assert!(matches!(
            ReadoutModel::<f64>::read_from(buf.as_slice()),
            Err(ReadoutError::BadMagic)
        ));
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_shift(scores in prop::collection::vec(-10.0f64..10.0, 1..8), shift in -100.0f64..100.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            // Shifting can merge near-ties through rounding; compare against
            // the shifted scores' own ranking when they are well separated.
            let best = argmax(&scores);
            let gap = scores.iter().enumerate().filter(|&(i, _)| i != best)
                .map(|(_, s)| scores[best] - s).fold(f64::INFINITY, f64::min);
            prop_assume!(gap > 1e-9);
            prop_assert_eq!(argmax(&shifted), best);
        }

        #[test]
        fn softmax_is_a_distribution(scores in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            let p = softmax(&scores);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
