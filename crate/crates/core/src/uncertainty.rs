//! Spatial uncertainty: a meters-valued risk measure for each detected
//! home, driven by how strongly and how far the runner-up locations compete.

use rayon::prelude::*;

use crate::detect::HomeDetection;
use crate::error::{Error, Result};
use crate::numeric::median;
use crate::towers::TowerNetwork;

/// SU of a detection: for each available competitor (L2, L3), weight half
/// the distance to L1 by the score ratio p_k/p1, and sum. No competitors
/// means zero uncertainty.
pub fn spatial_uncertainty(detection: &HomeDetection, network: &TowerNetwork) -> Result<f64> {
    let l1 = network.require(&detection.l1().tower_id)?;
    let p1 = detection.l1().score as f64;
    let mut su = 0.0;
    for competitor in detection.ranked.iter().skip(1) {
        let lk = network.require(&competitor.tower_id)?;
        let pk = competitor.score as f64;
        su += (pk / p1) * network.distance(l1, lk) / 2.0;
    }
    Ok(su)
}

/// Fill `su_m` on every detection.
pub fn attach_su(detections: &mut [HomeDetection], network: &TowerNetwork) -> Result<()> {
    detections
        .par_iter_mut()
        .try_for_each(|det| -> Result<()> {
            det.su_m = Some(spatial_uncertainty(det, network)?);
            Ok(())
        })
}

/// Upper bound on acceptable SU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuThreshold {
    max_su_m: f64,
}

impl SuThreshold {
    pub fn new(max_su_m: f64) -> Result<Self> {
        if !(max_su_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SU threshold must be positive, got {max_su_m}"
            )));
        }
        Ok(Self { max_su_m })
    }

    pub fn from_km(km: f64) -> Result<Self> {
        Self::new(km * 1000.0)
    }

    pub fn max_su_m(&self) -> f64 {
        self.max_su_m
    }
}

/// Keep detections with SU strictly below the threshold, preserving order.
/// Returns the kept set and how many were dropped. Detections without an
/// SU value are a pipeline error.
pub fn su_filter(
    detections: Vec<HomeDetection>,
    threshold: SuThreshold,
) -> Result<(Vec<HomeDetection>, u64)> {
    let mut kept = Vec::with_capacity(detections.len());
    let mut dropped = 0u64;
    for det in detections {
        let su = det
            .su_m
            .ok_or_else(|| Error::MissingUncertainty(det.user_id.clone()))?;
        if su < threshold.max_su_m {
            kept.push(det);
        } else {
            dropped += 1;
        }
    }
    Ok((kept, dropped))
}

/// One group of the SU summary: median SU over the detections of one
/// algorithm in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct SuSummaryRow {
    pub algorithm: crate::detect::Algorithm,
    pub month: String,
    pub median_su_m: f64,
    pub n: u64,
}

/// Median SU per (algorithm, month) group, sorted by group key. Groups
/// with no detections simply do not appear.
pub fn su_summary(detections: &[HomeDetection]) -> Result<Vec<SuSummaryRow>> {
    let mut groups: std::collections::BTreeMap<(crate::detect::Algorithm, &str), Vec<f64>> =
        std::collections::BTreeMap::new();
    for det in detections {
        let su = det
            .su_m
            .ok_or_else(|| Error::MissingUncertainty(det.user_id.clone()))?;
        groups
            .entry((det.algorithm, det.month.as_str()))
            .or_default()
            .push(su);
    }
    Ok(groups
        .into_iter()
        .map(|((algorithm, month), mut sus)| {
            sus.sort_unstable_by(|a, b| a.partial_cmp(b).expect("SU values are finite"));
            SuSummaryRow {
                algorithm,
                month: month.to_string(),
                n: sus.len() as u64,
                median_su_m: median(&sus).expect("group is non-empty"),
            }
        })
        .collect())
}

/// Median SU of detections grouped by their L1 tower, sorted by tower id.
/// This is the tower-indexed SU field that hot/cold-spot classification
/// consumes.
pub fn median_su_by_tower(detections: &[HomeDetection]) -> Result<Vec<(String, f64, u64)>> {
    let mut groups: std::collections::BTreeMap<&str, Vec<f64>> =
        std::collections::BTreeMap::new();
    for det in detections {
        let su = det
            .su_m
            .ok_or_else(|| Error::MissingUncertainty(det.user_id.clone()))?;
        groups.entry(&det.l1().tower_id).or_default().push(su);
    }
    Ok(groups
        .into_iter()
        .map(|(tower, mut sus)| {
            sus.sort_unstable_by(|a, b| a.partial_cmp(b).expect("SU values are finite"));
            let n = sus.len() as u64;
            (
                tower.to_string(),
                median(&sus).expect("group is non-empty"),
                n,
            )
        })
        .collect())
}
