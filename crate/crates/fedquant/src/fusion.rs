//! Fusion-weight design for model aggregation over noisy, quantized links.
//!
//! Each participating device gets an effective SNR
//! `theta = 1 / (quantization distortion + d * sigma^2)`; minimizing the
//! fusion-error bound `sum w^2 / theta` over the probability simplex has the
//! closed-form solution `w = theta / sum(theta)` (Cauchy-Schwarz equality).
//! Baseline schemes used for comparison: uniform `1/N`, and weights
//! proportional to `(2^b - 1)^2` (higher resolution gets more weight,
//! regardless of link quality).

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

/// Identity of a device: group index `m` and within-group index `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DeviceId {
    pub group: usize,
    pub index: usize,
}

impl DeviceId {
    pub fn new(group: usize, index: usize) -> Self {
        Self { group, index }
    }
}

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d{},{}", self.group, self.index)
    }
}

/// A device's effective signal-to-noise ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveSnr {
    pub device: DeviceId,
    pub theta: f64,
}

/// Effective SNR `1 / (quant_distortion + d * sigma^2)`.
///
/// A noiseless distortion-free link makes the denominator zero; that case is
/// rejected with a distinct error so the caller can substitute a configured
/// ceiling if it wants one.
pub fn effective_snr(quant_distortion: f64, dim: usize, sigma: f64) -> Result<f64> {
    if !quant_distortion.is_finite() || quant_distortion < 0.0 {
        return Err(Error::NonFinite("quantization distortion"));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::NonFinite("link noise std"));
    }
    let denom = quant_distortion + dim as f64 * sigma * sigma;
    if denom <= 0.0 {
        return Err(Error::DegenerateLink);
    }
    Ok(1.0 / denom)
}

/// Non-negative weights over the participating devices, summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusionWeights {
    weights: BTreeMap<DeviceId, f64>,
}

const SUM_TOLERANCE: f64 = 1e-12;

impl FusionWeights {
    /// Validating constructor: all weights finite and non-negative, sum 1
    /// within `1e-12`.
    pub fn new(weights: BTreeMap<DeviceId, f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("fusion weights"));
        }
        let mut sum = 0.0;
        for &w in weights.values() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(w));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidWeights(sum - 1.0));
        }
        Ok(Self { weights })
    }

    pub fn get(&self, device: &DeviceId) -> Option<f64> {
        self.weights.get(device).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Devices in deterministic (group, index) order.
    pub fn iter(&self) -> impl Iterator<Item = (&DeviceId, &f64)> {
        self.weights.iter()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceId> {
        self.weights.keys()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.values().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }

    /// Sum of weights over devices of one group.
    pub fn group_sum(&self, group: usize) -> f64 {
        self.weights
            .iter()
            .filter(|(d, _)| d.group == group)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Fusion-error objective `sum w^2 / theta` that the optimal weights minimize.
pub fn fusion_objective(weights: &FusionWeights, thetas: &[EffectiveSnr]) -> Result<f64> {
    let mut obj = 0.0;
    for snr in thetas {
        let w = weights
            .get(&snr.device)
            .ok_or_else(|| Error::WeightMismatch(format!("missing weight for {}", snr.device)))?;
        obj += w * w / snr.theta;
    }
    Ok(obj)
}

/// SNR-proportional weights `w = theta / sum(theta)`.
pub fn optimal_weights(thetas: &[EffectiveSnr]) -> Result<FusionWeights> {
    if thetas.is_empty() {
        return Err(Error::EmptyInput("effective SNR list"));
    }
    let mut total = 0.0;
    for snr in thetas {
        if !snr.theta.is_finite() || snr.theta <= 0.0 {
            return Err(Error::NonPositiveSnr(snr.theta));
        }
        total += snr.theta;
    }
    let map: BTreeMap<DeviceId, f64> = thetas
        .iter()
        .map(|snr| (snr.device, snr.theta / total))
        .collect();
    if map.len() != thetas.len() {
        return Err(Error::WeightMismatch("duplicate device id".into()));
    }
    FusionWeights::new(map)
}

/// Baseline weighting schemes from the experimental comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BaselineScheme {
    /// `1/N` for every participating device.
    Uniform,
    /// Proportional to `(2^b - 1)^2`: higher-resolution devices dominate.
    ResolutionProportional,
}

/// Baseline weights over the participating devices given their bit-widths.
pub fn baseline_weights(scheme: BaselineScheme, devices: &[(DeviceId, u32)]) -> Result<FusionWeights> {
    if devices.is_empty() {
        return Err(Error::EmptyInput("participating devices"));
    }
    let raw: Vec<f64> = match scheme {
        BaselineScheme::Uniform => vec![1.0; devices.len()],
        BaselineScheme::ResolutionProportional => devices
            .iter()
            .map(|&(_, bits)| (((1u64 << bits) - 1) as f64).powi(2))
            .collect(),
    };
    let total: f64 = raw.iter().sum();
    let map: BTreeMap<DeviceId, f64> = devices
        .iter()
        .zip(raw.iter())
        .map(|(&(id, _), &r)| (id, r / total))
        .collect();
    if map.len() != devices.len() {
        return Err(Error::WeightMismatch("duplicate device id".into()));
    }
    FusionWeights::new(map)
}
