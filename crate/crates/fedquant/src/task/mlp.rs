//! Two-layer ReLU network with softmax output and hand-written backprop.
//!
//! Architecture: input -> fully connected (hidden units, ReLU) -> fully
//! connected (classes, softmax). Parameter layout is `[W1 | b1 | W2 | b2]`
//! with row-major weight blocks; at the reference sizes (784, 200, 10) this
//! is 159,010 parameters. The task is non-convex, so it carries no curvature
//! certificate and is excluded from bound evaluation.

use super::{log_sum_exp, ClassData, ModelVector};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct MlpTask {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    train: ClassData,
    shards: Vec<std::ops::Range<usize>>,
    test: ClassData,
}

struct Layout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

impl MlpTask {
    pub fn new(
        n_hidden: usize,
        train: ClassData,
        shards: Vec<std::ops::Range<usize>>,
        test: ClassData,
    ) -> Result<Self> {
        train.validate()?;
        test.validate()?;
        if n_hidden == 0 {
            return Err(Error::ZeroDimension);
        }
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
            n_in: train.n_features,
            n_hidden,
            n_out: train.n_classes,
            train,
            shards,
            test,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_hidden * self.n_in + self.n_hidden + self.n_out * self.n_hidden + self.n_out
    }

    fn layout(&self) -> Layout {
        let w1 = 0..self.n_hidden * self.n_in;
        let b1 = w1.end..w1.end + self.n_hidden;
        let w2 = b1.end..b1.end + self.n_out * self.n_hidden;
        let b2 = w2.end..w2.end + self.n_out;
        Layout { w1, b1, w2, b2 }
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

    /// Scaled uniform init, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` per weight
    /// block and zero biases.
    pub fn initial_model<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelVector {
        let l = self.layout();
        let mut w = vec![0.0; self.dim()];
        let s1 = 1.0 / (self.n_in as f64).sqrt();
        for x in &mut w[l.w1] {
            *x = (rng.random::<f64>() * 2.0 - 1.0) * s1;
        }
        let s2 = 1.0 / (self.n_hidden as f64).sqrt();
        for x in &mut w[l.w2] {
            *x = (rng.random::<f64>() * 2.0 - 1.0) * s2;
        }
        w
    }

    fn forward(&self, w: &[f64], x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        let l = self.layout();
        let w1 = &w[l.w1];
        let b1 = &w[l.b1];
        let w2 = &w[l.w2];
        let b2 = &w[l.b2];
        for h in 0..self.n_hidden {
            let row = &w1[h * self.n_in..(h + 1) * self.n_in];
            let z = b1[h] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            hidden[h] = z.max(0.0);
        }
        for k in 0..self.n_out {
            let row = &w2[k * self.n_hidden..(k + 1) * self.n_hidden];
            logits[k] = b2[k] + row.iter().zip(hidden.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn mean_loss_over(&self, w: &[f64], data: &ClassData, idx: impl Iterator<Item = usize>) -> f64 {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        let mut total = 0.0;
        let mut count = 0usize;
        for i in idx {
            self.forward(w, data.row(i), &mut hidden, &mut logits);
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

    fn accumulate_gradient(
        &self,
        w: &[f64],
        i: usize,
        g: &mut [f64],
        hidden: &mut [f64],
        logits: &mut [f64],
        delta_h: &mut [f64],
    ) {
        let l = self.layout();
        let x = self.train.row(i);
        self.forward(w, x, hidden, logits);
        let lse = log_sum_exp(logits);
        let w2 = &w[l.w2.clone()];

        delta_h.iter_mut().for_each(|d| *d = 0.0);
        for k in 0..self.n_out {
            let p = (logits[k] - lse).exp();
            let coef = p - if k == self.train.labels[i] { 1.0 } else { 0.0 };
            let row = &mut g[l.w2.start + k * self.n_hidden..l.w2.start + (k + 1) * self.n_hidden];
            for (gx, &h) in row.iter_mut().zip(hidden.iter()) {
                *gx += coef * h;
            }
            g[l.b2.start + k] += coef;
            let w2_row = &w2[k * self.n_hidden..(k + 1) * self.n_hidden];
            for (d, &wv) in delta_h.iter_mut().zip(w2_row) {
                *d += coef * wv;
            }
        }
        for h in 0..self.n_hidden {
            if hidden[h] > 0.0 {
                let d = delta_h[h];
                let row = &mut g[l.w1.start + h * self.n_in..l.w1.start + (h + 1) * self.n_in];
                for (gx, &xv) in row.iter_mut().zip(x) {
                    *gx += d * xv;
                }
                g[l.b1.start + h] += d;
            }
        }
    }

    pub fn global_gradient(&self, w: &[f64]) -> Result<ModelVector> {
        self.check_dim(w)?;
        let all: Vec<usize> = (0..self.train.len()).collect();
        self.gradient_over(w, &all)
    }

    fn gradient_over(&self, w: &[f64], rows: &[usize]) -> Result<ModelVector> {
        let mut g = vec![0.0; self.dim()];
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        let mut delta_h = vec![0.0; self.n_hidden];
        for &i in rows {
            self.accumulate_gradient(w, i, &mut g, &mut hidden, &mut logits, &mut delta_h);
        }
        let inv = 1.0 / rows.len() as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        Ok(g)
    }

    pub fn device_gradient(&self, w: &[f64], device: usize, batch: &[usize]) -> Result<ModelVector> {
        self.check_dim(w)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let start = self.shards[device].start;
        let rows: Vec<usize> = batch.iter().map(|&k| start + k).collect();
        self.gradient_over(w, &rows)
    }

    pub fn test_accuracy(&self, w: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        let mut hits = 0usize;
        for i in 0..self.test.len() {
            self.forward(w, self.test.row(i), &mut hidden, &mut logits);
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for (k, &z) in logits.iter().enumerate() {
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
