use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// How M's weights are charged in `bits_M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightCoding {
    /// Discretized zero-mean Gaussian per weight.
    Gaussian { sigma_w: f64, delta_w: f64 },
    /// A flat price per non-zero weight.
    CountBased { bits_per_weight: u32 },
}

/// Precision constants of the two-part code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingScheme {
    pub sigma_e: f64,
    pub delta_e: f64,
    pub weight_coding: WeightCoding,
    pub zero_weight_threshold: f64,
}

impl Default for CodingScheme {
    fn default() -> Self {
        Self {
            sigma_e: 0.1,
            delta_e: 1.0 / 256.0,
            weight_coding: WeightCoding::CountBased {
                bits_per_weight: 16,
            },
            zero_weight_threshold: 1e-3,
        }
    }
}

/// `-log2(delta * phi(x / sigma) / sigma)` clamped below at zero.
fn gaussian_bits(x: f64, sigma: f64, delta: f64) -> f64 {
    let z = x / sigma;
    let bits = (sigma * (2.0 * PI).sqrt() / delta).log2() + z * z / (2.0 * LN_2);
    bits.max(0.0)
}

impl CodingScheme {
    pub fn validate(&self) -> Result<()> {
        let ok_scale = |s: f64, d: f64| s.is_finite() && d.is_finite() && s > 0.0 && d > 0.0 && d <= s;
        if !ok_scale(self.sigma_e, self.delta_e) {
            return Err(Error::Config(format!(
                "residual coding needs 0 < delta_e <= sigma_e (got {}, {})",
                self.delta_e, self.sigma_e
            )));
        }
        if let WeightCoding::Gaussian { sigma_w, delta_w } = self.weight_coding {
            if !ok_scale(sigma_w, delta_w) {
                return Err(Error::Config(format!(
                    "weight coding needs 0 < delta_w <= sigma_w (got {delta_w}, {sigma_w})"
                )));
            }
        }
        if !(self.zero_weight_threshold > 0.0 && self.zero_weight_threshold.is_finite()) {
            return Err(Error::Config("zero_weight_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Bits to transmit one signed residual.
    pub fn residual_bits(&self, d: f64) -> f64 {
        gaussian_bits(d, self.sigma_e, self.delta_e)
    }

    /// Bits to transmit the weight vector.
    pub fn weight_bits(&self, weights: &[f64]) -> f64 {
        match self.weight_coding {
            WeightCoding::Gaussian { sigma_w, delta_w } => {
                weights.iter().map(|&w| gaussian_bits(w, sigma_w, delta_w)).sum()
            }
            WeightCoding::CountBased { bits_per_weight } => {
                let live = weights
                    .iter()
                    .filter(|w| w.abs() > self.zero_weight_threshold)
                    .count();
                f64::from(bits_per_weight) * live as f64
            }
        }
    }
}

/// Two-part code length of some history under a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeLengthReport {
    /// Sum of squared prediction errors.
    pub e: f64,
    pub bits_h: f64,
    pub bits_m: f64,
    pub total: f64,
    pub steps_scored: usize,
}

impl CodeLengthReport {
    pub fn new(e: f64, bits_h: f64, bits_m: f64, steps_scored: usize) -> Self {
        Self {
            e,
            bits_h,
            bits_m,
            total: bits_m + bits_h,
            steps_scored,
        }
    }
}
