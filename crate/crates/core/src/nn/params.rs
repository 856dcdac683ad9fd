use rand::Rng;

use super::spec::NetSpec;
use crate::error::{Error, Result};

/// The learnable weight vector of a network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetParams {
    pub weights: Vec<f64>,
}

impl NetParams {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("weight {i}")));
        }
        Ok(Self { weights })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
        }
    }

    /// Uniform in [-0.1, 0.1].
    pub fn init(spec: &NetSpec, rng: &mut impl Rng) -> Self {
        Self {
            weights: (0..spec.n_weights)
                .map(|_| rng.random_range(-0.1..=0.1))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn hash(&self) -> String {
        crate::rng::hash_f64s(&self.weights)
    }
}

/// `w <- w - learning_rate * g`.
pub fn sgd_step(params: &NetParams, gradient: &[f64], learning_rate: f64) -> Result<NetParams> {
    if gradient.len() != params.weights.len() {
        return Err(Error::Dimension {
            context: "gradient",
            expected: params.weights.len(),
            got: gradient.len(),
        });
    }
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i}")));
    }
    let weights = params
        .weights
        .iter()
        .zip(gradient)
        .map(|(w, g)| w - learning_rate * g)
        .collect();
    NetParams::new(weights)
}
