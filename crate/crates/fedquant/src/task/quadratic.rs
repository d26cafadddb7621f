//! Synthetic least-squares task with an exact curvature certificate.
//!
//! Every device owns `per_device` samples `(a, y)` with per-sample loss
//! `0.5 (a^T w - y)^2`. The sample directions are laid out so each device's
//! Hessian `(1/D) sum a a^T` equals `Q diag(lambda) Q^T` exactly, with
//! `lambda` spread linearly over `[mu, gamma]` and `Q` a random orthonormal
//! basis. Local and global curvature therefore match the requested constants,
//! and the global optimum has the closed form `Q diag(1/lambda) Q^T r`.

use super::ModelVector;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct QuadraticTask {
    dim: usize,
    per_device: usize,
    /// n x dim sample rows, device k owning rows [k*D, (k+1)*D).
    rows: Vec<f64>,
    targets: Vec<f64>,
    devices: usize,
    w_star: ModelVector,
    mu: f64,
    gamma: f64,
    loss_floor: f64,
}

/// Build the task. Requires `0 < mu <= gamma`, `per_device >= dim` (so every
/// device's Hessian has full rank), and `dim >= 2` whenever `mu != gamma`.
pub fn make_synthetic_quadratic<R: Rng + ?Sized>(
    dim: usize,
    devices: usize,
    per_device: usize,
    mu: f64,
    gamma: f64,
    label_noise: f64,
    rng: &mut R,
) -> Result<QuadraticTask> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(mu.is_finite() && gamma.is_finite()) || mu <= 0.0 || mu > gamma {
        return Err(Error::InfeasibleSpectrum { dim, mu, gamma });
    }
    if dim < 2 && mu != gamma {
        return Err(Error::InfeasibleSpectrum { dim, mu, gamma });
    }
    if devices == 0 {
        return Err(Error::EmptyInput("device list"));
    }
    if per_device < dim {
        return Err(Error::Infeasible(format!(
            "per-device sample count {per_device} below dimension {dim}; the local Hessians would be singular"
        )));
    }
    if !label_noise.is_finite() || label_noise < 0.0 {
        return Err(Error::NonFinite("label noise"));
    }

    let basis = random_orthonormal(dim, rng);
    let eigvals: Vec<f64> = if dim == 1 {
        vec![mu]
    } else {
        (0..dim)
            .map(|j| mu + (gamma - mu) * j as f64 / (dim - 1) as f64)
            .collect()
    };

    let mut w_true = vec![0.0; dim];
    for x in w_true.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    let scale = 1.0 / (dim as f64).sqrt();
    w_true.iter_mut().for_each(|x| *x *= scale);

    // direction counts per device: slot s covers eigen-direction s % dim
    let mut counts = vec![0usize; dim];
    for s in 0..per_device {
        counts[s % dim] += 1;
    }

    let n = devices * per_device;
    let mut rows = vec![0.0; n * dim];
    let mut targets = vec![0.0; n];
    for dev in 0..devices {
        for s in 0..per_device {
            let j = s % dim;
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mag = sign * (per_device as f64 * eigvals[j] / counts[j] as f64).sqrt();
            let row = &mut rows[(dev * per_device + s) * dim..(dev * per_device + s + 1) * dim];
            let q_j = &basis[j * dim..(j + 1) * dim];
            for (r, &q) in row.iter_mut().zip(q_j) {
                *r = mag * q;
            }
            let clean: f64 = row.iter().zip(w_true.iter()).map(|(a, w)| a * w).sum();
            let eps: f64 = StandardNormal.sample(rng);
            targets[dev * per_device + s] = clean + label_noise * eps;
        }
    }

    // normal equations in the eigenbasis: w* = Q diag(1/lambda) Q^T r
    let mut r_vec = vec![0.0; dim];
    for i in 0..n {
        let row = &rows[i * dim..(i + 1) * dim];
        let y = targets[i];
        for (r, &a) in r_vec.iter_mut().zip(row) {
            *r += a * y;
        }
    }
    r_vec.iter_mut().for_each(|r| *r /= n as f64);
    let mut w_star = vec![0.0; dim];
    for j in 0..dim {
        let q_j = &basis[j * dim..(j + 1) * dim];
        let proj: f64 = q_j.iter().zip(r_vec.iter()).map(|(q, r)| q * r).sum();
        let coef = proj / eigvals[j];
        for (w, &q) in w_star.iter_mut().zip(q_j) {
            *w += coef * q;
        }
    }

    let mut task = QuadraticTask {
        dim,
        per_device,
        rows,
        targets,
        devices,
        w_star,
        mu,
        gamma,
        loss_floor: 0.0,
    };
    task.loss_floor = task.global_loss(&task.w_star.clone())?;
    Ok(task)
}

/// Random orthonormal basis via modified Gram-Schmidt on a Gaussian matrix,
/// stored row-major (row j = q_j).
fn random_orthonormal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut basis = vec![0.0; dim * dim];
    for j in 0..dim {
        let (done, current) = basis.split_at_mut(j * dim);
        let q = &mut current[..dim];
        loop {
            for x in q.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            // two orthogonalization passes keep the basis clean at d ~ 10^2
            for _ in 0..2 {
                for k in 0..j {
                    let prev = &done[k * dim..(k + 1) * dim];
                    let dot: f64 = q.iter().zip(prev).map(|(a, b)| a * b).sum();
                    for (x, &p) in q.iter_mut().zip(prev) {
                        *x -= dot * p;
                    }
                }
            }
            let norm: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                q.iter_mut().for_each(|x| *x /= norm);
                break;
            }
        }
    }
    basis
}

impl QuadraticTask {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn shard_len(&self, _device: usize) -> usize {
        self.per_device
    }

    pub fn optimum(&self) -> &[f64] {
        &self.w_star
    }

    pub fn certificate(&self) -> super::CurvatureCertificate {
        super::CurvatureCertificate {
            mu: self.mu,
            gamma: self.gamma,
        }
    }

    /// Mean loss at the optimum (the least-squares residual floor).
    pub fn loss_floor(&self) -> f64 {
        self.loss_floor
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        Ok(())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn mean_loss(&self, w: &[f64], range: std::ops::Range<usize>) -> f64 {
        let mut total = 0.0;
        for i in range.clone() {
            let resid: f64 =
                self.row(i).iter().zip(w).map(|(a, x)| a * x).sum::<f64>() - self.targets[i];
            total += 0.5 * resid * resid;
        }
        total / range.len() as f64
    }

    pub fn global_loss(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        Ok(self.mean_loss(w, 0..self.targets.len()))
    }

    pub fn device_loss(&self, w: &[f64], device: usize) -> Result<f64> {
        self.check_dim(w)?;
        let start = device * self.per_device;
        Ok(self.mean_loss(w, start..start + self.per_device))
    }

    pub fn global_gradient(&self, w: &[f64]) -> Result<ModelVector> {
        self.check_dim(w)?;
        let mut g = vec![0.0; self.dim];
        for i in 0..self.targets.len() {
            let row = self.row(i);
            let resid: f64 = row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() - self.targets[i];
            for (gx, &a) in g.iter_mut().zip(row) {
                *gx += resid * a;
            }
        }
        let inv = 1.0 / self.targets.len() as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        Ok(g)
    }

    /// Mean gradient over the given within-shard indices.
    pub fn device_gradient(&self, w: &[f64], device: usize, batch: &[usize]) -> Result<ModelVector> {
        self.check_dim(w)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let start = device * self.per_device;
        let mut g = vec![0.0; self.dim];
        for &k in batch {
            let i = start + k;
            let row = self.row(i);
            let resid: f64 = row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() - self.targets[i];
            for (gx, &a) in g.iter_mut().zip(row) {
                *gx += resid * a;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        Ok(g)
    }

    /// Hessian-vector product of the pooled problem, exact by construction.
    pub fn hessian_vec(&self, v: &[f64]) -> Result<ModelVector> {
        self.check_dim(v)?;
        let n = self.targets.len();
        let mut out = vec![0.0; self.dim];
        for i in 0..n {
            let row = self.row(i);
            let dot: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
            for (o, &a) in out.iter_mut().zip(row) {
                *o += dot * a;
            }
        }
        out.iter_mut().for_each(|x| *x /= n as f64);
        Ok(out)
    }
}
