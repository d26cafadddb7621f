//! Differentially private stochastic quantization on a uniform grid.
//!
//! A `b`-bit quantizer places `2^b` levels uniformly over `[lo, hi]` and maps
//! an input to one of the two levels bracketing it. The mapping probability is
//! the closed-form optimum of the distortion-minimization problem under an
//! `eps1`-DP ratio constraint: the nearer level is chosen with probability
//! `e^eps1 / (e^eps1 + 1)`, the farther with `1 / (e^eps1 + 1)`. At
//! `eps1 = 0` this degenerates to a fair coin between the bracketing levels;
//! as `eps1` grows it approaches deterministic nearest-level rounding.
//!
//! The module also provides the LaplaceSQ baseline: the classical unbiased
//! stochastic quantizer followed by additive Laplace noise calibrated to the
//! same per-coordinate privacy loss. Its distortion grows as `2*rho^2/eps1^2`
//! while the DP quantizer's distortion stays bounded by the cell geometry.

use crate::error::{Error, Result, MAX_BITS};
use rand::distr::Open01;
use rand::Rng;

/// Probability of mapping to the nearer of two levels under an `eps1`-DP
/// ratio constraint; `1 - p` is the farther-level probability.
///
/// Stable for any `eps1 >= 0` including values that overflow `exp`.
#[inline]
fn high_probability(eps1: f64) -> f64 {
    // e^eps / (e^eps + 1) computed as a logistic to stay finite for large eps
    1.0 / (1.0 + (-eps1).exp())
}

fn check_eps(eps1: f64) -> Result<()> {
    if !eps1.is_finite() || eps1 < 0.0 {
        return Err(Error::InvalidEpsilon(eps1));
    }
    Ok(())
}

/// Optimal mapping probability for one quantization cell.
///
/// `dist_lower` and `dist_upper` are the distances from the input to the
/// lower and upper bracketing level. Returns the probability of mapping to
/// the lower level; ties go to the lower level.
pub fn optimal_probability(dist_lower: f64, dist_upper: f64, eps1: f64) -> Result<f64> {
    if !dist_lower.is_finite() || !dist_upper.is_finite() || dist_lower < 0.0 || dist_upper < 0.0 {
        return Err(Error::NegativeDistance {
            lower: dist_lower,
            upper: dist_upper,
        });
    }
    check_eps(eps1)?;
    let p_high = high_probability(eps1);
    if dist_lower <= dist_upper {
        Ok(p_high)
    } else {
        Ok(1.0 - p_high)
    }
}

/// One quantization cell: the two bracketing levels and the probability of
/// mapping to the lower one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantCell {
    pub lower_level: f64,
    pub upper_level: f64,
    pub p_to_lower: f64,
}

/// A uniform-grid stochastic quantizer with per-coordinate privacy loss.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct QuantizerSpec {
    bits: u32,
    lo: f64,
    hi: f64,
    eps1: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, lo: f64, hi: f64, eps1: f64) -> Result<Self> {
        if bits < 1 || bits > MAX_BITS {
            return Err(Error::InvalidBits(bits));
        }
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        check_eps(eps1)?;
        Ok(Self { bits, lo, hi, eps1 })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    /// Same grid, different privacy loss.
    pub fn with_eps1(&self, eps1: f64) -> Result<Self> {
        Self::new(self.bits, self.lo, self.hi, eps1)
    }

    pub fn num_levels(&self) -> usize {
        1usize << self.bits
    }

    /// Spacing between adjacent levels.
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.num_levels() - 1) as f64
    }

    /// Level `j` for `j = 0..2^b`; the endpoints are exactly `lo` and `hi`.
    pub fn level(&self, j: usize) -> f64 {
        debug_assert!(j < self.num_levels());
        if j == 0 {
            self.lo
        } else if j == self.num_levels() - 1 {
            self.hi
        } else {
            self.lo + j as f64 * self.step()
        }
    }

    /// The full grid, strictly increasing when `lo < hi`.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.num_levels()).map(|j| self.level(j)).collect()
    }

    fn check_in_range(&self, a: f64) -> Result<()> {
        if !a.is_finite() || a < self.lo || a > self.hi {
            return Err(Error::OutOfRange {
                value: a,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Index `i` of the cell `[q_i, q_{i+1})` containing `a`; the top cell is
    /// closed on both ends so `a = hi` belongs to it.
    ///
    /// Uses clamped index arithmetic rather than a scan so cell-edge lookups
    /// stay stable under floating-point drift.
    pub fn cell_index(&self, a: f64) -> Result<usize> {
        self.check_in_range(a)?;
        let n = self.num_levels();
        if self.lo == self.hi || n == 2 {
            return Ok(0);
        }
        let raw = ((a - self.lo) / self.step()).floor();
        let max_cell = (n - 2) as f64;
        Ok(raw.clamp(0.0, max_cell) as usize)
    }

    /// The cell containing `a` together with its optimal mapping probability.
    pub fn cell(&self, a: f64) -> Result<QuantCell> {
        let i = self.cell_index(a)?;
        let lower = self.level(i);
        let upper = self.level((i + 1).min(self.num_levels() - 1));
        let p = optimal_probability((a - lower).abs(), (upper - a).abs(), self.eps1)?;
        Ok(QuantCell {
            lower_level: lower,
            upper_level: upper,
            p_to_lower: p,
        })
    }

    /// Randomized quantization of a scalar. On-grid inputs are still
    /// randomized: the input's own level is merely the nearer of the pair.
    pub fn quantize<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<f64> {
        let cell = self.cell(a)?;
        let u: f64 = rng.random();
        if u < cell.p_to_lower {
            Ok(cell.lower_level)
        } else {
            Ok(cell.upper_level)
        }
    }

    /// Coordinate-wise quantization. Randomness is consumed in index order
    /// from `rng`, so a fixed stream gives bit-identical output.
    pub fn quantize_vector<R: Rng + ?Sized>(&self, a: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        a.iter()
            .enumerate()
            .map(|(index, &x)| {
                self.quantize(x, rng).map_err(|e| match e {
                    Error::OutOfRange { value, lo, hi } => Error::OutOfRangeAt {
                        index,
                        value,
                        lo,
                        hi,
                    },
                    other => other,
                })
            })
            .collect()
    }

    /// Mean of the two-point output distribution at `a`.
    pub fn expected_value(&self, a: f64) -> Result<f64> {
        let c = self.cell(a)?;
        Ok(c.p_to_lower * c.lower_level + (1.0 - c.p_to_lower) * c.upper_level)
    }

    /// Expected squared quantization error at `a`:
    /// `(e^eps1 * min(dl^2, du^2) + max(dl^2, du^2)) / (e^eps1 + 1)`.
    pub fn expected_distortion(&self, a: f64) -> Result<f64> {
        let i = self.cell_index(a)?;
        let dl2 = (a - self.level(i)).powi(2);
        let du2 = (self.level((i + 1).min(self.num_levels() - 1)) - a).powi(2);
        let p_high = high_probability(self.eps1);
        Ok(p_high * dl2.min(du2) + (1.0 - p_high) * dl2.max(du2))
    }

    /// Supremum of the expected distortion over all privacy losses, attained
    /// in the `eps1 -> 0` limit: the plain average of the two squared
    /// distances.
    pub fn distortion_cap(&self, a: f64) -> Result<f64> {
        let i = self.cell_index(a)?;
        let dl2 = (a - self.level(i)).powi(2);
        let du2 = (self.level((i + 1).min(self.num_levels() - 1)) - a).powi(2);
        Ok(0.5 * (dl2 + du2))
    }

    /// Expected squared error of element-wise quantization of a vector.
    pub fn vector_expected_distortion(&self, a: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (index, &x) in a.iter().enumerate() {
            total += self.expected_distortion(x).map_err(|e| match e {
                Error::OutOfRange { value, lo, hi } => Error::OutOfRangeAt {
                    index,
                    value,
                    lo,
                    hi,
                },
                other => other,
            })?;
        }
        Ok(total)
    }
}

/// Sample from a zero-mean Laplace distribution with the given scale.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// The LaplaceSQ baseline: an unbiased stochastic quantizer followed by
/// Laplace noise with scale `sensitivity / eps1` per coordinate.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LaplaceSqSpec {
    bits: u32,
    lo: f64,
    hi: f64,
    eps1: f64,
    sensitivity: f64,
}

impl LaplaceSqSpec {
    pub fn new(bits: u32, lo: f64, hi: f64, eps1: f64, sensitivity: f64) -> Result<Self> {
        if bits < 1 || bits > MAX_BITS {
            return Err(Error::InvalidBits(bits));
        }
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        if !eps1.is_finite() || eps1 <= 0.0 {
            return Err(Error::NonPositiveEpsilon(eps1));
        }
        if !sensitivity.is_finite() || sensitivity <= 0.0 {
            return Err(Error::InvalidSensitivity(sensitivity));
        }
        Ok(Self {
            bits,
            lo,
            hi,
            eps1,
            sensitivity,
        })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Laplace scale `rho / eps1`.
    pub fn noise_scale(&self) -> f64 {
        self.sensitivity / self.eps1
    }

    /// Noise variance `2 * rho^2 / eps1^2`.
    pub fn noise_variance(&self) -> f64 {
        2.0 * self.noise_scale().powi(2)
    }

    fn grid(&self) -> QuantizerSpec {
        // eps1 = 0 here only addresses the shared grid geometry
        QuantizerSpec {
            bits: self.bits,
            lo: self.lo,
            hi: self.hi,
            eps1: 0.0,
        }
    }

    /// Unbiased stochastic quantization: maps `a` to the upper level with
    /// probability `(a - q_i) / (q_{i+1} - q_i)`, so `E[Q_b(a)] = a`. Grid
    /// levels are fixed points.
    pub fn unbiased_quantize<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<f64> {
        let grid = self.grid();
        let i = grid.cell_index(a)?;
        let lower = grid.level(i);
        let upper = grid.level((i + 1).min(grid.num_levels() - 1));
        if upper == lower {
            return Ok(lower);
        }
        let p_up = (a - lower) / (upper - lower);
        let u: f64 = rng.random();
        Ok(if u < p_up { upper } else { lower })
    }

    /// The full mechanism: unbiased quantization plus Laplace noise.
    pub fn sample<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<f64> {
        let q = self.unbiased_quantize(a, rng)?;
        Ok(q + sample_laplace(self.noise_scale(), rng))
    }

    /// Element-wise application with index-order randomness.
    pub fn sample_vector<R: Rng + ?Sized>(&self, a: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        a.iter()
            .enumerate()
            .map(|(index, &x)| {
                self.sample(x, rng).map_err(|e| match e {
                    Error::OutOfRange { value, lo, hi } => Error::OutOfRangeAt {
                        index,
                        value,
                        lo,
                        hi,
                    },
                    other => other,
                })
            })
            .collect()
    }

    /// Expected squared error `E|L(a) - a|^2 = E|Q_b(a) - a|^2 + 2 rho^2 / eps1^2`.
    ///
    /// For the unbiased quantizer the two-point variance has the closed form
    /// `(a - q_i)(q_{i+1} - a)`.
    pub fn expected_distortion(&self, a: f64) -> Result<f64> {
        let grid = self.grid();
        let i = grid.cell_index(a)?;
        let lower = grid.level(i);
        let upper = grid.level((i + 1).min(grid.num_levels() - 1));
        Ok((a - lower) * (upper - a) + self.noise_variance())
    }

    /// Expected squared error of the element-wise mechanism.
    pub fn vector_expected_distortion(&self, a: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for &x in a {
            total += self.expected_distortion(x)?;
        }
        Ok(total)
    }
}
