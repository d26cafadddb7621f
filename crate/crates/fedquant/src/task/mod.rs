//! Training tasks, datasets, and gradient machinery.
//!
//! Three task kinds are supported. The synthetic quadratic has an exact
//! curvature certificate (its per-device Hessians are constructed with a
//! prescribed spectrum) and a closed-form optimum, so convergence-bound
//! checks run against it. Multinomial logistic regression is the convex
//! reduced-scale image model. The two-layer MLP reproduces the full-scale
//! experiment's architecture; it is not assumption-certified and is excluded
//! from bound checking.

mod digits;
mod idx;
mod logistic;
mod mlp;
mod quadratic;

pub use digits::{synthetic_digits, SyntheticDigitsSpec};
pub use idx::{
    load_mnist_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels,
    IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use logistic::LogisticTask;
pub use mlp::MlpTask;
pub use quadratic::{make_synthetic_quadratic, QuadraticTask};

use crate::error::{Error, Result};
use rand::Rng;

/// Dense model vector of dimension `d`.
pub type ModelVector = Vec<f64>;

/// A labeled classification dataset with row-major features in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassData {
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl ClassData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.features.len() != self.len() * self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.n_features,
                got: self.features.len(),
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::Infeasible(format!(
                "label {bad} outside 0..{}",
                self.n_classes
            )));
        }
        Ok(())
    }
}

/// Mini-batch of indices into one device shard, sampled uniformly without
/// replacement.
#[derive(Clone, Debug)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sample a mini-batch from a shard of `shard_len` samples. Batch sizes
/// larger than the shard degrade to the full shard.
pub fn sample_minibatch<R: Rng + ?Sized>(
    shard_len: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<MiniBatch> {
    if shard_len == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let amount = batch_size.min(shard_len);
    let indices = rand::seq::index::sample(rng, shard_len, amount).into_vec();
    Ok(MiniBatch { indices })
}

/// Exact strong-convexity/smoothness constants of a certified task.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CurvatureCertificate {
    pub mu: f64,
    pub gamma: f64,
}

/// Deterministically partition `data` into `devices` shards of `per_device`
/// samples each. The permutation is drawn from `rng`, the shards form an
/// exact partition of the first `devices * per_device` samples after
/// shuffling.
pub fn partition<R: Rng + ?Sized>(
    data: ClassData,
    devices: usize,
    per_device: usize,
    rng: &mut R,
) -> Result<(ClassData, Vec<std::ops::Range<usize>>)> {
    data.validate()?;
    if devices == 0 || per_device == 0 {
        return Err(Error::EmptyInput("shard plan"));
    }
    let need = devices * per_device;
    if need > data.len() {
        return Err(Error::Infeasible(format!(
            "need {need} samples for {devices} devices x {per_device}, dataset has {}",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    // Fisher-Yates from the supplied stream
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order.truncate(need);
    let mut features = Vec::with_capacity(need * data.n_features);
    let mut labels = Vec::with_capacity(need);
    for &i in &order {
        features.extend_from_slice(data.row(i));
        labels.push(data.labels[i]);
    }
    let shuffled = ClassData {
        features,
        n_features: data.n_features,
        labels,
        n_classes: data.n_classes,
    };
    let ranges = (0..devices)
        .map(|k| k * per_device..(k + 1) * per_device)
        .collect();
    Ok((shuffled, ranges))
}

/// A training task bound to its per-device datasets.
#[derive(Clone, Debug)]
pub enum Task {
    Quadratic(QuadraticTask),
    Logistic(LogisticTask),
    Mlp2(MlpTask),
}

impl Task {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Task::Quadratic(_) => "quadratic",
            Task::Logistic(_) => "logistic",
            Task::Mlp2(_) => "mlp2",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.dim(),
            Task::Logistic(t) => t.dim(),
            Task::Mlp2(t) => t.dim(),
        }
    }

    pub fn devices(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.devices(),
            Task::Logistic(t) => t.devices(),
            Task::Mlp2(t) => t.devices(),
        }
    }

    pub fn shard_len(&self, device: usize) -> usize {
        match self {
            Task::Quadratic(t) => t.shard_len(device),
            Task::Logistic(t) => t.shard_len(device),
            Task::Mlp2(t) => t.shard_len(device),
        }
    }

    /// Mean per-sample loss over the pooled training data.
    pub fn global_loss(&self, w: &[f64]) -> Result<f64> {
        match self {
            Task::Quadratic(t) => t.global_loss(w),
            Task::Logistic(t) => t.global_loss(w),
            Task::Mlp2(t) => t.global_loss(w),
        }
    }

    /// Mean gradient over the pooled training data.
    pub fn global_gradient(&self, w: &[f64]) -> Result<ModelVector> {
        match self {
            Task::Quadratic(t) => t.global_gradient(w),
            Task::Logistic(t) => t.global_gradient(w),
            Task::Mlp2(t) => t.global_gradient(w),
        }
    }

    pub fn device_loss(&self, w: &[f64], device: usize) -> Result<f64> {
        match self {
            Task::Quadratic(t) => t.device_loss(w, device),
            Task::Logistic(t) => t.device_loss(w, device),
            Task::Mlp2(t) => t.device_loss(w, device),
        }
    }

    /// Mean gradient over a mini-batch of one device's shard.
    pub fn device_gradient(&self, w: &[f64], device: usize, batch: &MiniBatch) -> Result<ModelVector> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        match self {
            Task::Quadratic(t) => t.device_gradient(w, device, &batch.indices),
            Task::Logistic(t) => t.device_gradient(w, device, &batch.indices),
            Task::Mlp2(t) => t.device_gradient(w, device, &batch.indices),
        }
    }

    /// Full-shard gradient of one device.
    pub fn device_gradient_full(&self, w: &[f64], device: usize) -> Result<ModelVector> {
        let all: Vec<usize> = (0..self.shard_len(device)).collect();
        self.device_gradient(w, device, &MiniBatch { indices: all })
    }

    /// Held-out accuracy; `None` for tasks without a classification test set.
    pub fn test_accuracy(&self, w: &[f64]) -> Option<f64> {
        match self {
            Task::Quadratic(_) => None,
            Task::Logistic(t) => Some(t.test_accuracy(w)),
            Task::Mlp2(t) => Some(t.test_accuracy(w)),
        }
    }

    /// Known optimum when the task has one in closed form.
    pub fn optimum(&self) -> Option<&[f64]> {
        match self {
            Task::Quadratic(t) => Some(t.optimum()),
            _ => None,
        }
    }

    pub fn error_to_optimum(&self, w: &[f64]) -> Option<f64> {
        self.optimum().map(|star| {
            w.iter()
                .zip(star.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
    }

    /// Exact curvature constants, available only for assumption-certified
    /// tasks.
    pub fn certificate(&self) -> Option<CurvatureCertificate> {
        match self {
            Task::Quadratic(t) => Some(t.certificate()),
            _ => None,
        }
    }

    /// Initial model: zeros for the convex tasks, scaled-uniform for the MLP.
    pub fn initial_model<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelVector {
        match self {
            Task::Quadratic(_) | Task::Logistic(_) => vec![0.0; self.dim()],
            Task::Mlp2(t) => t.initial_model(rng),
        }
    }
}

/// Numerically stable log-sum-exp used by both classification tasks.
pub(crate) fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_data(n: usize) -> ClassData {
        ClassData {
            features: (0..n * 3).map(|i| (i % 7) as f64 / 7.0).collect(),
            n_features: 3,
            labels: (0..n).map(|i| i % 2).collect(),
            n_classes: 2,
        }
    }

    #[test]
    fn partition_is_exact_and_deterministic() {
        let data = tiny_data(20);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let (d1, s1) = partition(data.clone(), 4, 5, &mut r1).unwrap();
        let (d2, s2) = partition(data, 4, 5, &mut r2).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(s1, s2);
        // shards cover 0..20 exactly once
        let covered: usize = s1.iter().map(|r| r.len()).sum();
        assert_eq!(covered, 20);
        assert_eq!(s1[0], 0..5);
        assert_eq!(s1[3], 15..20);
    }

    #[test]
    fn partition_rejects_undersized_data() {
        let data = tiny_data(9);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        assert!(partition(data, 2, 5, &mut r).is_err());
    }

    #[test]
    fn minibatch_without_replacement() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let b = sample_minibatch(50, 10, &mut r).unwrap();
        assert_eq!(b.len(), 10);
        let mut seen = b.indices.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10);
        // oversized batch degrades to the full shard
        let full = sample_minibatch(5, 99, &mut r).unwrap();
        assert_eq!(full.len(), 5);
        assert!(sample_minibatch(0, 3, &mut r).is_err());
        assert!(sample_minibatch(5, 0, &mut r).is_err());
    }

    #[test]
    fn log_sum_exp_stable() {
        let z = [1000.0, 1000.0];
        let lse = log_sum_exp(&z);
        assert!((lse - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-9);
    }
}
