use thiserror::Error;

use crate::synth::AbChoice;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Mean squared error.
pub fn mse(pred: &[f64], reference: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: reference.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty("mse needs at least one pair"));
    }
    let sum: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

/// Fraction of exact verdict matches. A parse failure (`None`) counts as wrong.
pub fn ab_accuracy(extracted: &[Option<AbChoice>], gold: &[AbChoice]) -> Result<f64, MetricError> {
    if extracted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: extracted.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::Empty("accuracy needs at least one item"));
    }
    let hits = extracted
        .iter()
        .zip(gold)
        .filter(|(e, g)| **e == Some(**g))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}
