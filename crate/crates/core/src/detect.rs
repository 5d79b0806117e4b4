//! The five home-detection criteria: rank a user-month's towers and emit
//! the top three candidate home locations with their scores.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::percentile;
use crate::towers::TowerNetwork;
use crate::trace::{NightWindow, UserMonthTrace};

/// Detection criterion. The spatial variants group scores over a perimeter
/// around each tower; the night variants count only night-window activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    MaxActivities,
    MaxDistinctDays,
    NightWindow,
    SpatialPerimeter,
    NightWindowSpatialPerimeter,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::MaxActivities,
        Algorithm::MaxDistinctDays,
        Algorithm::NightWindow,
        Algorithm::SpatialPerimeter,
        Algorithm::NightWindowSpatialPerimeter,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MaxActivities => "max_activities",
            Algorithm::MaxDistinctDays => "max_distinct_days",
            Algorithm::NightWindow => "night_window",
            Algorithm::SpatialPerimeter => "spatial_perimeter",
            Algorithm::NightWindowSpatialPerimeter => "night_window_spatial_perimeter",
        }
    }

    /// Parse a criterion name; the positional aliases `1`..`5` are accepted.
    pub fn from_name(s: &str) -> Option<Algorithm> {
        match s {
            "max_activities" | "1" => Some(Algorithm::MaxActivities),
            "max_distinct_days" | "2" => Some(Algorithm::MaxDistinctDays),
            "night_window" | "3" => Some(Algorithm::NightWindow),
            "spatial_perimeter" | "4" => Some(Algorithm::SpatialPerimeter),
            "night_window_spatial_perimeter" | "5" => {
                Some(Algorithm::NightWindowSpatialPerimeter)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A criterion plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub night: NightWindow,
    pub radius_m: f64,
}

impl AlgorithmSpec {
    /// Default parameters: 7pm-9am night window, 1000 m perimeter.
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            night: NightWindow::default(),
            radius_m: 1000.0,
        }
    }

    pub fn with_radius(mut self, radius_m: f64) -> Result<Self> {
        if !(radius_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "perimeter radius must be positive, got {radius_m}"
            )));
        }
        self.radius_m = radius_m;
        Ok(self)
    }

    pub fn with_night(mut self, night: NightWindow) -> Self {
        self.night = night;
        self
    }
}

/// One ranked candidate location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedTower {
    pub tower_id: String,
    pub score: u32,
}

/// A detected home: up to three ranked locations, plus the spatial
/// uncertainty once the uncertainty pass has filled it in.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeDetection {
    pub user_id: String,
    pub month: String,
    pub algorithm: Algorithm,
    pub ranked: Vec<RankedTower>,
    pub su_m: Option<f64>,
}

impl HomeDetection {
    pub fn l1(&self) -> &RankedTower {
        &self.ranked[0]
    }

    pub fn l2(&self) -> Option<&RankedTower> {
        self.ranked.get(1)
    }

    pub fn l3(&self) -> Option<&RankedTower> {
        self.ranked.get(2)
    }
}

/// Score every visited tower under the given criterion. Towers whose score
/// is zero are dropped, so an all-zero criterion (no night activity, say)
/// yields an empty map and, downstream, no detection.
pub fn score_towers(
    trace: &UserMonthTrace,
    spec: &AlgorithmSpec,
    network: &TowerNetwork,
) -> Result<BTreeMap<u32, u32>> {
    let base: BTreeMap<u32, u32> = match spec.algorithm {
        Algorithm::MaxActivities | Algorithm::SpatialPerimeter => trace
            .per_tower()
            .iter()
            .map(|(&t, s)| (t, s.total_count))
            .collect(),
        Algorithm::MaxDistinctDays => trace
            .per_tower()
            .iter()
            .map(|(&t, s)| (t, s.distinct_days()))
            .collect(),
        Algorithm::NightWindow | Algorithm::NightWindowSpatialPerimeter => trace
            .per_tower()
            .iter()
            .filter(|(_, s)| s.night_count > 0)
            .map(|(&t, s)| (t, s.night_count))
            .collect(),
    };
    match spec.algorithm {
        Algorithm::SpatialPerimeter | Algorithm::NightWindowSpatialPerimeter => {
            group_scores(&base, network, spec.radius_m)
        }
        _ => Ok(base),
    }
}

/// Aggregate each tower's score with every other scored tower within
/// `radius_m`. The aggregate is attributed to the center tower; towers
/// absent from `base` contribute nothing and receive no group score.
pub fn group_scores(
    base: &BTreeMap<u32, u32>,
    network: &TowerNetwork,
    radius_m: f64,
) -> Result<BTreeMap<u32, u32>> {
    let towers: Vec<u32> = base.keys().copied().collect();
    for &t in &towers {
        if t as usize >= network.len() {
            return Err(Error::UnknownTower(format!("#{t}")));
        }
    }
    let mut grouped = BTreeMap::new();
    for &center in &towers {
        let mut sum = 0u32;
        for &other in &towers {
            if network.distance(center, other) <= radius_m {
                sum += base[&other];
            }
        }
        grouped.insert(center, sum);
    }
    Ok(grouped)
}

/// Rank the scored towers and return the top three as a detection, or
/// `None` when no tower qualifies under the criterion. Ties break by higher
/// raw activity count, then by lexicographically smaller tower id, so the
/// result is deterministic.
pub fn detect_home(
    trace: &UserMonthTrace,
    spec: &AlgorithmSpec,
    network: &TowerNetwork,
) -> Result<Option<HomeDetection>> {
    let scores = score_towers(trace, spec, network)?;
    if scores.is_empty() {
        return Ok(None);
    }
    let mut ranked: Vec<(u32, u32)> = scores.into_iter().collect();
    ranked.sort_by(|&(ta, sa), &(tb, sb)| {
        sb.cmp(&sa)
            .then_with(|| {
                let ca = trace.per_tower()[&ta].total_count;
                let cb = trace.per_tower()[&tb].total_count;
                cb.cmp(&ca)
            })
            .then_with(|| network.id(ta).cmp(network.id(tb)))
    });
    ranked.truncate(3);
    Ok(Some(HomeDetection {
        user_id: trace.user_id().to_string(),
        month: trace.month().label().to_string(),
        algorithm: spec.algorithm,
        ranked: ranked
            .into_iter()
            .map(|(t, score)| RankedTower {
                tower_id: network.id(t).to_string(),
                score,
            })
            .collect(),
        su_m: None,
    }))
}

/// Per-algorithm tallies of detections and of how many carried L2/L3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlgorithmCounts {
    pub homes: u64,
    pub with_l2: u64,
    pub with_l3: u64,
}

impl AlgorithmCounts {
    pub fn pct_l2(&self) -> f64 {
        percent(self.with_l2, self.homes)
    }

    pub fn pct_l3(&self) -> f64 {
        percent(self.with_l3, self.homes)
    }
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

pub fn detection_counts(detections: &[HomeDetection]) -> BTreeMap<Algorithm, AlgorithmCounts> {
    let mut counts: BTreeMap<Algorithm, AlgorithmCounts> = BTreeMap::new();
    for det in detections {
        let c = counts.entry(det.algorithm).or_default();
        c.homes += 1;
        if det.l2().is_some() {
            c.with_l2 += 1;
        }
        if det.l3().is_some() {
            c.with_l3 += 1;
        }
    }
    counts
}

/// One row of the activity-concentration table: at a given percentile, the
/// share of a user-month's activity falling on its top-1/2/3 towers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopShareRow {
    pub percentile: u8,
    pub shares: [f64; 3],
}

pub const TOP_SHARE_PERCENTILES: [u8; 5] = [5, 25, 50, 75, 95];

/// Distribution of per-user activity concentration. Each trace contributes
/// one share per rank (zero when the user visited fewer towers than the
/// rank), and the table reports fixed percentiles of each rank's shares.
pub fn top_share_percentiles(traces: &[UserMonthTrace]) -> Result<Vec<TopShareRow>> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("no traces to summarize"));
    }
    let mut per_rank: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for trace in traces {
        let mut totals: Vec<u32> = trace.per_tower().values().map(|s| s.total_count).collect();
        totals.sort_unstable_by(|a, b| b.cmp(a));
        let sum: u64 = totals.iter().map(|&c| c as u64).sum();
        for rank in 0..3 {
            let share = match totals.get(rank) {
                Some(&c) => c as f64 / sum as f64,
                None => 0.0,
            };
            per_rank[rank].push(share);
        }
    }
    for ranks in per_rank.iter_mut() {
        ranks.sort_unstable_by(|a, b| a.partial_cmp(b).expect("shares are finite"));
    }
    Ok(TOP_SHARE_PERCENTILES
        .iter()
        .map(|&p| TopShareRow {
            percentile: p,
            shares: [
                percentile(&per_rank[0], p as f64).expect("non-empty"),
                percentile(&per_rank[1], p as f64).expect("non-empty"),
                percentile(&per_rank[2], p as f64).expect("non-empty"),
            ],
        })
        .collect())
}
