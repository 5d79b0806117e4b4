//! Getis-Ord Gi* hot/cold-spot classification of a tower-indexed field.
//!
//! Weights are a binary distance band: every tower within `band_m` of the
//! center (the center itself included) contributes with weight one. The
//! statistic is the standardized difference between a neighborhood sum and
//! its expectation under spatial randomness.

use crate::error::{Error, Result};
use crate::metrics::PopulationVector;
use crate::towers::TowerNetwork;

/// Two-sided confidence level for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confidence {
    C90,
    C95,
    C99,
}

impl Confidence {
    pub fn z_crit(&self) -> f64 {
        match self {
            Confidence::C90 => 1.645,
            Confidence::C95 => 1.96,
            Confidence::C99 => 2.576,
        }
    }

    pub fn level(&self) -> f64 {
        match self {
            Confidence::C90 => 0.90,
            Confidence::C95 => 0.95,
            Confidence::C99 => 0.99,
        }
    }

    pub fn from_level(level: f64) -> Result<Self> {
        if (level - 0.90).abs() < 1e-9 {
            Ok(Confidence::C90)
        } else if (level - 0.95).abs() < 1e-9 {
            Ok(Confidence::C95)
        } else if (level - 0.99).abs() < 1e-9 {
            Ok(Confidence::C99)
        } else {
            Err(Error::InvalidConfig(format!(
                "confidence must be one of 0.90, 0.95, 0.99; got {level}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Hot,
    Cold,
    Neutral,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::Hot => "hot",
            Classification::Cold => "cold",
            Classification::Neutral => "neutral",
        }
    }
}

/// Per-tower outcome, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct GiStarRow {
    pub tower_id: String,
    pub value: f64,
    pub z: f64,
    pub classification: Classification,
}

/// Compute Gi* z-scores for every tower and classify at the given
/// confidence. A tower whose band covers the whole network carries no
/// information and gets z = 0.
pub fn gi_star(
    values: &PopulationVector,
    network: &TowerNetwork,
    band_m: f64,
    confidence: Confidence,
) -> Result<Vec<GiStarRow>> {
    let n = network.len();
    if n < 2 {
        return Err(Error::TooFewTowers(n));
    }
    if values.len() != n {
        return Err(Error::VectorLengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if !(band_m >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "distance band must be non-negative, got {band_m}"
        )));
    }
    let x = values.counts();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let s = (x.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    if s == 0.0 {
        return Err(Error::DegenerateField);
    }
    let z_crit = confidence.z_crit();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let neighbors = network.within_radius(i, band_m);
        let w = neighbors.len() as f64;
        let band_sum: f64 = neighbors.iter().map(|&j| x[j as usize]).sum();
        let denom_sq = (nf * w - w * w) / (nf - 1.0);
        let z = if denom_sq <= 0.0 {
            0.0
        } else {
            (band_sum - mean * w) / (s * denom_sq.sqrt())
        };
        let classification = if z >= z_crit {
            Classification::Hot
        } else if z <= -z_crit {
            Classification::Cold
        } else {
            Classification::Neutral
        };
        rows.push(GiStarRow {
            tower_id: network.id(i).to_string(),
            value: x[i as usize],
            z,
            classification,
        });
    }
    Ok(rows)
}
