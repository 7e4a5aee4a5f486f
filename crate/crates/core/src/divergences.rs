//! Reference divergences between explicit finite distributions.
//!
//! For any `p`, `q`:
//! `hellinger² <= total_variation <= √2·hellinger <= √chi2_divergence`,
//! with Hellinger normalized so that disjoint supports are at distance 1.

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(FiniteDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::domain("weights must have positive mass"));
        }
        FiniteDistribution::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn pairs<'a>(p: &'a FiniteDistribution, q: &'a FiniteDistribution) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    Ok(p.probs.iter().copied().zip(q.probs.iter().copied()))
}

pub fn hellinger(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    let s: f64 = pairs(p, q)?.map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s).sqrt().min(1.0))
}

pub fn total_variation(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    Ok(0.5 * pairs(p, q)?.map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `Σ (p - q)² / q`; infinite when `p` puts mass where `q` has none.
pub fn chi2_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in pairs(p, q)? {
        if b > 0.0 {
            total += (a - b) * (a - b) / b;
        } else if a > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}
