//! Agreement and validation metrics: SMC between two detection sets, and
//! the cosine-similarity angle between tower-indexed population vectors.

use std::collections::HashMap;

use crate::detect::HomeDetection;
use crate::error::{Error, Result};
use crate::towers::TowerNetwork;

/// Tower-indexed counts (or any non-negative field) in network order. The
/// fixed basis makes vectors from different algorithms directly comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    counts: Vec<f64>,
}

impl PopulationVector {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        for (i, &v) in counts.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("#{i}")));
            }
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&v| v == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Count detected homes per tower over the full network; towers nobody was
/// assigned to get zero.
pub fn population_vector<'a>(
    detections: impl IntoIterator<Item = &'a HomeDetection>,
    network: &TowerNetwork,
) -> Result<PopulationVector> {
    let mut counts = vec![0.0f64; network.len()];
    for det in detections {
        let idx = network.require(&det.l1().tower_id)?;
        counts[idx as usize] += 1.0;
    }
    Ok(PopulationVector { counts })
}

/// Build a vector from explicit per-tower home counts (ground truth).
pub fn population_vector_from_homes<'a>(
    homes: impl IntoIterator<Item = &'a str>,
    network: &TowerNetwork,
) -> Result<PopulationVector> {
    let mut counts = vec![0.0f64; network.len()];
    for tower in homes {
        let idx = network.require(tower)?;
        counts[idx as usize] += 1.0;
    }
    Ok(PopulationVector { counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcResult {
    pub smc: f64,
    pub n_common: u64,
}

/// Simple matching coefficient between two detection sets: over the users
/// (per month) detected by BOTH, the fraction whose L1 towers coincide.
/// Users missing from either side are omitted entirely.
pub fn smc<'a>(
    a: impl IntoIterator<Item = &'a HomeDetection>,
    b: impl IntoIterator<Item = &'a HomeDetection>,
) -> Result<SmcResult> {
    let index: HashMap<(&str, &str), &str> = b
        .into_iter()
        .map(|det| {
            (
                (det.user_id.as_str(), det.month.as_str()),
                det.l1().tower_id.as_str(),
            )
        })
        .collect();
    let mut common = 0u64;
    let mut matches = 0u64;
    for det in a {
        if let Some(&l1_b) = index.get(&(det.user_id.as_str(), det.month.as_str())) {
            common += 1;
            if det.l1().tower_id == l1_b {
                matches += 1;
            }
        }
    }
    if common == 0 {
        return Err(Error::EmptyCommonSet);
    }
    Ok(SmcResult {
        smc: matches as f64 / common as f64,
        n_common: common,
    })
}

/// Angle between two population vectors, in degrees. 0° means identical
/// spatial patterns up to scale. Computed from the normalized vectors via
/// the half-angle form 2·atan2(‖û−v̂‖, ‖û+v̂‖), which stays accurate where
/// arccos of the clamped cosine loses all precision (angles near 0°).
pub fn csm(x: &PopulationVector, y: &PopulationVector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::VectorLengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let norm = |v: &PopulationVector| v.counts.iter().map(|&a| a * a).sum::<f64>().sqrt();
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut diff_sq = 0.0;
    let mut sum_sq = 0.0;
    for (&a, &b) in x.counts.iter().zip(&y.counts) {
        let (ua, ub) = (a / nx, b / ny);
        diff_sq += (ua - ub) * (ua - ub);
        sum_sq += (ua + ub) * (ua + ub);
    }
    let angle = 2.0 * diff_sq.sqrt().atan2(sum_sq.sqrt());
    Ok(angle.to_degrees().abs())
}

/// Pearson correlation over paired samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::VectorLengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// One (algorithm, month) point of the SU-vs-CSM scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPoint {
    pub algorithm: crate::detect::Algorithm,
    pub month: String,
    pub median_su_m: f64,
    pub csm_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub n_points: usize,
    pub excluded: Vec<String>,
}

/// Pearson R between median SU and CSM across (algorithm, month) points,
/// optionally excluding whole months (outlier handling).
pub fn su_csm_correlation(
    points: &[CorrelationPoint],
    exclude_months: &[String],
) -> Result<CorrelationResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in points {
        if exclude_months.contains(&p.month) {
            continue;
        }
        xs.push(p.median_su_m);
        ys.push(p.csm_deg);
    }
    let r = pearson(&xs, &ys)?;
    Ok(CorrelationResult {
        r,
        n_points: xs.len(),
        excluded: exclude_months.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{Algorithm, RankedTower};

    fn det(user: &str, month: &str, l1: &str) -> HomeDetection {
        HomeDetection {
            user_id: user.into(),
            month: month.into(),
            algorithm: Algorithm::MaxActivities,
            ranked: vec![RankedTower {
                tower_id: l1.into(),
                score: 1,
            }],
            su_m: None,
        }
    }

    #[test]
    fn smc_identity_and_partial_agreement() {
        let a = vec![
            det("u1", "2007-06", "A"),
            det("u2", "2007-06", "B"),
            det("u3", "2007-06", "A"),
            det("u4", "2007-06", "C"),
        ];
        assert_eq!(smc(&a, &a).unwrap(), SmcResult { smc: 1.0, n_common: 4 });

        let b = vec![
            det("u1", "2007-06", "A"),
            det("u2", "2007-06", "A"),
            det("u3", "2007-06", "A"),
            det("u4", "2007-06", "B"),
        ];
        let r = smc(&a, &b).unwrap();
        assert_eq!(r.n_common, 4);
        assert!((r.smc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smc_omits_users_detected_by_one_side_only() {
        let a = vec![det("u1", "2007-06", "A"), det("u2", "2007-06", "B")];
        let b = vec![det("u1", "2007-06", "A"), det("u9", "2007-06", "B")];
        let r = smc(&a, &b).unwrap();
        assert_eq!(r.n_common, 1);
        assert_eq!(r.smc, 1.0);
    }

    #[test]
    fn smc_disjoint_sets_error() {
        let a = vec![det("u1", "2007-06", "A")];
        let b = vec![det("u2", "2007-06", "A")];
        assert!(matches!(smc(&a, &b), Err(Error::EmptyCommonSet)));
    }

    #[test]
    fn csm_analytic_angles() {
        let v = |c: Vec<f64>| PopulationVector::new(c).unwrap();
        assert!(csm(&v(vec![3.0, 1.0, 0.0]), &v(vec![3.0, 1.0, 0.0]))
            .unwrap()
            .abs()
            < 1e-9);
        assert!((csm(&v(vec![1.0, 0.0]), &v(vec![0.0, 1.0])).unwrap() - 90.0).abs() < 1e-9);
        assert!((csm(&v(vec![1.0, 0.0]), &v(vec![1.0, 1.0])).unwrap() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn csm_scale_invariance() {
        let x = PopulationVector::new(vec![3.0, 1.0, 2.0]).unwrap();
        let y = PopulationVector::new(vec![1.0, 4.0, 0.5]).unwrap();
        let scaled = PopulationVector::new(vec![3000.0, 1000.0, 2000.0]).unwrap();
        let base = csm(&x, &y).unwrap();
        assert!((csm(&scaled, &y).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn csm_zero_vector_error() {
        let x = PopulationVector::new(vec![0.0, 0.0]).unwrap();
        let y = PopulationVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(csm(&x, &y), Err(Error::ZeroVector)));
    }

    #[test]
    fn population_vector_counts_l1_per_tower() {
        let network = TowerNetwork::new(vec![
            ("T1".into(), 0.0, 0.0),
            ("T2".into(), 1000.0, 0.0),
            ("T3".into(), 2000.0, 0.0),
        ])
        .unwrap();
        let dets = vec![
            det("u1", "2007-06", "T1"),
            det("u2", "2007-06", "T1"),
            det("u3", "2007-06", "T1"),
            det("u4", "2007-06", "T2"),
        ];
        let v = population_vector(&dets, &network).unwrap();
        assert_eq!(v.counts(), &[3.0, 1.0, 0.0]);
        assert_eq!(v.sum(), 4.0);
        assert!(population_vector(&[], &network).unwrap().is_zero());
    }

    #[test]
    fn pearson_textbook_cases() {
        assert!(
            (pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12
        );
        // Hand computation for (1,2),(2,4),(3,0): means (2, 2);
        // sxy = -2, sxx = 2, syy = 8 → r = -2/4 = -0.5.
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 0.0]).unwrap();
        assert!((r + 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_guards() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientPoints(2))
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance("x"))
        ));
    }

    #[test]
    fn correlation_respects_month_exclusions() {
        let mk = |month: &str, su: f64, csm: f64| CorrelationPoint {
            algorithm: Algorithm::MaxActivities,
            month: month.into(),
            median_su_m: su,
            csm_deg: csm,
        };
        let points = vec![
            mk("2007-05", 100.0, 80.0),
            mk("2007-06", 1.0, 1.0),
            mk("2007-07", 2.0, 2.0),
            mk("2007-08", 3.0, 3.0),
            mk("2007-09", 4.0, 4.0),
        ];
        let all = su_csm_correlation(&points, &[]).unwrap();
        let trimmed = su_csm_correlation(&points, &["2007-05".to_string()]).unwrap();
        assert_eq!(trimmed.n_points, 4);
        assert!((trimmed.r - 1.0).abs() < 1e-12);
        assert!(all.r < 1.0);
    }
}
