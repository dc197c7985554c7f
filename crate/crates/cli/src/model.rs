//! The persisted result of `learn`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use simplex_metric::corpus::{EmbeddingConfig, Vocabulary};
use simplex_metric::optimizer::{FitResult, OptimizerConfig};
use simplex_metric::simplex::invert_param;
use simplex_metric::{Error, MetricParam};

use crate::CliError;

pub const MODEL_VERSION: u32 = 1;

/// Tolerance on `lambda_metric = invert(theta_hat)` when loading.
const INVERSE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub final_loglikelihood: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

/// Floats are written in shortest round-trip form, so a write/read cycle
/// reproduces every coordinate bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub terms: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub lambda_metric: Vec<f64>,
    pub embedding: EmbeddingConfig,
    pub fit: FitMetadata,
}

impl ModelFile {
    pub fn new(vocab: &Vocabulary, fit: &FitResult, embedding: EmbeddingConfig, optimizer: OptimizerConfig) -> Self {
        Self {
            version: MODEL_VERSION,
            terms: vocab.terms().to_vec(),
            theta_hat: fit.theta_hat.coords().to_vec(),
            lambda_metric: fit.lambda_metric.coords().to_vec(),
            embedding,
            fit: FitMetadata {
                iterations: fit.iterations,
                converged: fit.converged,
                final_loglikelihood: fit.final_loglikelihood(),
                seed: optimizer.seed,
                optimizer,
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != MODEL_VERSION {
            return Err(CliError::Model(format!("unsupported model version {}", self.version)));
        }
        let v = self.terms.len();
        if self.theta_hat.len() != v || self.lambda_metric.len() != v {
            return Err(Error::DimensionMismatch { expected: v, found: self.theta_hat.len().min(self.lambda_metric.len()) }.into());
        }
        self.embedding.validate()?;
        let theta = MetricParam::new(self.theta_hat.clone())?;
        let lambda = MetricParam::new(self.lambda_metric.clone())?;
        let expected = invert_param(&theta);
        let dev = lambda.coords().iter().zip(expected.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if dev > INVERSE_TOLERANCE {
            return Err(CliError::Model(format!("lambda_metric is not the inverse of theta_hat (deviation {dev:.3e})")));
        }
        Vocabulary::from_terms(self.terms.clone())?;
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<Vocabulary, CliError> {
        Ok(Vocabulary::from_terms(self.terms.clone())?)
    }

    pub fn lambda(&self) -> Result<MetricParam, CliError> {
        Ok(MetricParam::new(self.lambda_metric.clone())?)
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let model: ModelFile = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use simplex_metric::optimizer::estimate_theta;
    use simplex_metric::SimplexPoint;

    fn model() -> ModelFile {
        let data = vec![
            SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            SimplexPoint::new(vec![0.15, 0.25, 0.2, 0.4]).unwrap(),
        ];
        let fit = estimate_theta(&data, &OptimizerConfig::default()).unwrap();
        let vocab = Vocabulary::from_terms(["a", "b", "c", "d"].map(String::from).to_vec()).unwrap();
        ModelFile::new(&vocab, &fit, EmbeddingConfig::default(), OptimizerConfig::default())
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
        for (a, b) in m.theta_hat.iter().zip(&back.theta_hat).chain(m.lambda_metric.iter().zip(&back.lambda_metric)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_inconsistent_models() {
        let mut m = model();
        m.lambda_metric.swap(0, 3);
        let err = m.validate();
        assert!(matches!(err, Err(CliError::Model(_))), "{err:?}");
        let mut m = model();
        m.version = 7;
        assert!(m.validate().is_err());
        let mut m = model();
        m.terms.pop();
        assert!(m.validate().is_err());
    }
}
