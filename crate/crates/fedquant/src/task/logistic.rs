//! Multinomial logistic regression over sharded classification data.
//!
//! The model is a linear score per class plus bias, trained with softmax
//! cross-entropy. Parameter layout: class-major weight rows followed by the
//! bias block, `d = classes * (features + 1)`.

use super::{log_sum_exp, ClassData, ModelVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LogisticTask {
    train: ClassData,
    shards: Vec<std::ops::Range<usize>>,
    test: ClassData,
}

impl LogisticTask {
    pub fn new(
        train: ClassData,
        shards: Vec<std::ops::Range<usize>>,
        test: ClassData,
    ) -> Result<Self> {
        train.validate()?;
        test.validate()?;
        if test.n_features != train.n_features || test.n_classes != train.n_classes {
            return Err(Error::DimensionMismatch {
                expected: train.n_features,
                got: test.n_features,
            });
        }
        if shards.is_empty() {
            return Err(Error::EmptyInput("shard list"));
        }
        if shards.iter().any(|r| r.end > train.len() || r.is_empty()) {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            train,
            shards,
            test,
        })
    }

    pub fn dim(&self) -> usize {
        self.train.n_classes * (self.train.n_features + 1)
    }

    pub fn n_classes(&self) -> usize {
        self.train.n_classes
    }

    pub fn devices(&self) -> usize {
        self.shards.len()
    }

    pub fn shard_len(&self, device: usize) -> usize {
        self.shards[device].len()
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let c = self.train.n_classes;
        let f = self.train.n_features;
        let bias = &w[c * f..];
        for k in 0..c {
            let row = &w[k * f..(k + 1) * f];
            out[k] = bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn mean_loss_over(&self, w: &[f64], data: &ClassData, idx: impl Iterator<Item = usize>) -> f64 {
        let c = data.n_classes;
        let mut logits = vec![0.0; c];
        let mut total = 0.0;
        let mut count = 0usize;
        for i in idx {
            self.logits(w, data.row(i), &mut logits);
            total += log_sum_exp(&logits) - logits[data.labels[i]];
            count += 1;
        }
        total / count as f64
    }

    pub fn global_loss(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        Ok(self.mean_loss_over(w, &self.train, 0..self.train.len()))
    }

    pub fn device_loss(&self, w: &[f64], device: usize) -> Result<f64> {
        self.check_dim(w)?;
        Ok(self.mean_loss_over(w, &self.train, self.shards[device].clone()))
    }

    fn accumulate_gradient(&self, w: &[f64], i: usize, g: &mut [f64], logits: &mut [f64]) {
        let c = self.train.n_classes;
        let f = self.train.n_features;
        let x = self.train.row(i);
        self.logits(w, x, logits);
        let lse = log_sum_exp(logits);
        for k in 0..c {
            let p = (logits[k] - lse).exp();
            let coef = p - if k == self.train.labels[i] { 1.0 } else { 0.0 };
            let row = &mut g[k * f..(k + 1) * f];
            for (gx, &xv) in row.iter_mut().zip(x) {
                *gx += coef * xv;
            }
            g[c * f + k] += coef;
        }
    }

    pub fn global_gradient(&self, w: &[f64]) -> Result<ModelVector> {
        self.check_dim(w)?;
        let mut g = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.train.n_classes];
        for i in 0..self.train.len() {
            self.accumulate_gradient(w, i, &mut g, &mut logits);
        }
        let inv = 1.0 / self.train.len() as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        Ok(g)
    }

    pub fn device_gradient(&self, w: &[f64], device: usize, batch: &[usize]) -> Result<ModelVector> {
        self.check_dim(w)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let start = self.shards[device].start;
        let mut g = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.train.n_classes];
        for &k in batch {
            self.accumulate_gradient(w, start + k, &mut g, &mut logits);
        }
        let inv = 1.0 / batch.len() as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        Ok(g)
    }

    pub fn test_accuracy(&self, w: &[f64]) -> f64 {
        let c = self.test.n_classes;
        let f = self.test.n_features;
        let bias = &w[c * f..];
        let mut hits = 0usize;
        for i in 0..self.test.len() {
            let x = self.test.row(i);
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for k in 0..c {
                let row = &w[k * f..(k + 1) * f];
                let z = bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if z > best {
                    best = z;
                    arg = k;
                }
            }
            if arg == self.test.labels[i] {
                hits += 1;
            }
        }
        hits as f64 / self.test.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn balanced_binary() -> (ClassData, Vec<std::ops::Range<usize>>, ClassData) {
        let data = ClassData {
            features: vec![
                0.9, 0.1, //
                0.8, 0.2, //
                0.1, 0.9, //
                0.2, 0.8,
            ],
            n_features: 2,
            labels: vec![0, 0, 1, 1],
            n_classes: 2,
        };
        (data.clone(), vec![0..2, 2..4], data)
    }

    #[test]
    fn loss_at_zero_is_ln_classes() {
        let (train, shards, test) = balanced_binary();
        let task = LogisticTask::new(train, shards, test).unwrap();
        let w = vec![0.0; task.dim()];
        assert_relative_eq!(
            task.global_loss(&w).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dimension_checks() {
        let (train, shards, test) = balanced_binary();
        let task = LogisticTask::new(train, shards, test).unwrap();
        assert_eq!(task.dim(), 2 * 3);
        assert!(task.global_loss(&vec![0.0; 5]).is_err());
        assert!(task
            .device_gradient(&vec![0.0; 6], 0, &[])
            .is_err());
    }

    // Finite-difference oracle for the softmax gradient.
    #[test]
    fn gradient_matches_central_differences() {
        let (train, shards, test) = balanced_binary();
        let task = LogisticTask::new(train, shards, test).unwrap();
        let w: Vec<f64> = (0..task.dim()).map(|i| 0.05 * (i as f64) - 0.1).collect();
        let g = task.global_gradient(&w).unwrap();
        let h = 1e-6;
        for i in 0..task.dim() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd =
                (task.global_loss(&wp).unwrap() - task.global_loss(&wm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn training_direction_improves_accuracy() {
        let (train, shards, test) = balanced_binary();
        let task = LogisticTask::new(train, shards, test).unwrap();
        let mut w = vec![0.0; task.dim()];
        for _ in 0..200 {
            let g = task.global_gradient(&w).unwrap();
            for (wx, gx) in w.iter_mut().zip(g.iter()) {
                *wx -= 0.5 * gx;
            }
        }
        assert_eq!(task.test_accuracy(&w), 1.0);
        assert!(task.global_loss(&w).unwrap() < std::f64::consts::LN_2);
    }
}
