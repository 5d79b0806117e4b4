//! Seeded synthetic CDR generator with per-user ground-truth homes.
//!
//! Every random choice flows from (seed, fixed stream id), with one stream
//! per user, so generation is reproducible record-for-record no matter how
//! users are partitioned across threads. Users place most activity at their
//! home tower (more so at night), the rest at a few anchor towers near home
//! and at random towers nearby. A holiday plan transfers the home role to a
//! distant tower for the configured months, which is what degrades home
//! detection in summer.

use chrono::{Datelike, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::calendar::WindowSet;
use crate::error::{Error, Result};
use crate::records::{ActivityKind, CdrRecord, Direction};
use crate::towers::TowerNetwork;
use crate::trace::NightWindow;

const STREAM_NETWORK: u64 = 1;
const STREAM_USERS: u64 = 2;
const STREAM_USER_BASE: u64 = 16;

/// Fraction of records that are calls rather than texts.
pub const CALL_FRACTION: f64 = 0.65;

/// Spatial layout of the tower network.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityProfile {
    Uniform,
    Clustered { k: u32, spread_m: f64 },
}

impl DensityProfile {
    fn parse(s: &str) -> Option<Self> {
        if s == "uniform" {
            return Some(DensityProfile::Uniform);
        }
        let inner = s.strip_prefix("clustered(")?.strip_suffix(')')?;
        let (k, spread) = inner.split_once(',')?;
        Some(DensityProfile::Clustered {
            k: k.trim().parse().ok()?,
            spread_m: spread.trim().parse().ok()?,
        })
    }
}

impl std::fmt::Display for DensityProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DensityProfile::Uniform => f.write_str("uniform"),
            DensityProfile::Clustered { k, spread_m } => {
                write!(f, "clustered({k},{spread_m})")
            }
        }
    }
}

/// Seasonal displacement plan.
#[derive(Debug, Clone, PartialEq)]
pub enum Holiday {
    None,
    Summer {
        displaced_fraction: f64,
        months: Vec<u32>,
        displacement_min_m: f64,
    },
}

impl Holiday {
    fn parse(s: &str) -> Option<Self> {
        if s == "none" {
            return Some(Holiday::None);
        }
        let inner = s.strip_prefix("summer(")?.strip_suffix(')')?;
        let mut parts = inner.splitn(3, ',');
        let frac = parts.next()?.trim().parse().ok()?;
        let months = parts
            .next()?
            .trim()
            .split('+')
            .map(|m| m.trim().parse::<u32>().ok())
            .collect::<Option<Vec<_>>>()?;
        let min_m = parts.next()?.trim().parse().ok()?;
        Some(Holiday::Summer {
            displaced_fraction: frac,
            months,
            displacement_min_m: min_m,
        })
    }

    fn months(&self) -> &[u32] {
        match self {
            Holiday::None => &[],
            Holiday::Summer { months, .. } => months,
        }
    }
}

impl std::fmt::Display for Holiday {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Holiday::None => f.write_str("none"),
            Holiday::Summer {
                displaced_fraction,
                months,
                displacement_min_m,
            } => {
                let ms: Vec<String> = months.iter().map(|m| m.to_string()).collect();
                write!(
                    f,
                    "summer({displaced_fraction},{},{displacement_min_m})",
                    ms.join("+")
                )
            }
        }
    }
}

/// Full description of one synthetic world. Serializes to and from a flat
/// key=value file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_towers: u32,
    pub extent_m: f64,
    pub density: DensityProfile,
    pub n_users: u32,
    pub period_start: NaiveDate,
    pub period_end: NaiveDate,
    pub events_per_user_day: f64,
    pub home_bias: f64,
    pub night_home_boost: f64,
    pub holiday: Holiday,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_towers: 400,
            extent_m: 100_000.0,
            density: DensityProfile::Clustered {
                k: 6,
                spread_m: 8_000.0,
            },
            n_users: 2_000,
            period_start: NaiveDate::from_ymd_opt(2007, 5, 1).unwrap(),
            period_end: NaiveDate::from_ymd_opt(2007, 10, 31).unwrap(),
            events_per_user_day: 4.0,
            home_bias: 0.48,
            night_home_boost: 1.5,
            holiday: Holiday::None,
        }
    }
}

const CONFIG_KEYS: [&str; 10] = [
    "seed",
    "n_towers",
    "extent_m",
    "density",
    "n_users",
    "period",
    "events_per_user_day",
    "home_bias",
    "night_home_boost",
    "holiday",
];

impl GeneratorConfig {
    /// Parse the flat key=value format. Every key is required; `#` starts a
    /// comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: std::collections::HashMap<&str, String> = std::collections::HashMap::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("expected key = value, got `{line}`"))
            })?;
            let key = key.trim();
            let canonical = CONFIG_KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| Error::UnknownConfigKey(key.to_string()))?;
            seen.insert(canonical, value.trim().to_string());
        }
        let get = |key: &'static str| -> Result<&String> {
            seen.get(key).ok_or(Error::MissingConfigKey(key))
        };
        let bad = |key: &str, reason: &str| Error::BadConfigValue {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let parse_num = |key: &'static str, value: &str| -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| bad(key, "not a number"))
        };

        let period = get("period")?;
        let (start, end) = period
            .split_once("..")
            .ok_or_else(|| bad("period", "expected YYYY-MM-DD..YYYY-MM-DD"))?;
        let parse_date = |s: &str| {
            NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                .map_err(|_| bad("period", "expected YYYY-MM-DD..YYYY-MM-DD"))
        };

        let config = Self {
            seed: get("seed")?
                .parse()
                .map_err(|_| bad("seed", "not an integer"))?,
            n_towers: get("n_towers")?
                .parse()
                .map_err(|_| bad("n_towers", "not an integer"))?,
            extent_m: parse_num("extent_m", get("extent_m")?)?,
            density: DensityProfile::parse(get("density")?)
                .ok_or_else(|| bad("density", "expected uniform or clustered(k,spread_m)"))?,
            n_users: get("n_users")?
                .parse()
                .map_err(|_| bad("n_users", "not an integer"))?,
            period_start: parse_date(start)?,
            period_end: parse_date(end)?,
            events_per_user_day: parse_num("events_per_user_day", get("events_per_user_day")?)?,
            home_bias: parse_num("home_bias", get("home_bias")?)?,
            night_home_boost: parse_num("night_home_boost", get("night_home_boost")?)?,
            holiday: Holiday::parse(get("holiday")?).ok_or_else(|| {
                bad(
                    "holiday",
                    "expected none or summer(fraction,m+m,min_meters)",
                )
            })?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Canonical key=value rendering; `parse` round-trips it.
    pub fn to_key_values(&self) -> String {
        format!(
            "seed = {}\nn_towers = {}\nextent_m = {}\ndensity = {}\nn_users = {}\nperiod = {}..{}\nevents_per_user_day = {}\nhome_bias = {}\nnight_home_boost = {}\nholiday = {}\n",
            self.seed,
            self.n_towers,
            self.extent_m,
            self.density,
            self.n_users,
            self.period_start,
            self.period_end,
            self.events_per_user_day,
            self.home_bias,
            self.night_home_boost,
            self.holiday,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: String| {
            Err(Error::BadConfigValue {
                key: key.to_string(),
                reason,
            })
        };
        if self.n_towers < 3 {
            return fail("n_towers", format!("need at least 3, got {}", self.n_towers));
        }
        if self.n_users == 0 {
            return fail("n_users", "need at least 1".into());
        }
        if !(self.extent_m > 0.0) {
            return fail("extent_m", format!("must be positive, got {}", self.extent_m));
        }
        if self.period_start > self.period_end {
            return fail("period", "start after end".into());
        }
        if !(self.events_per_user_day > 0.0) {
            return fail(
                "events_per_user_day",
                format!("must be positive, got {}", self.events_per_user_day),
            );
        }
        if !(0.0..=1.0).contains(&self.home_bias) {
            return fail("home_bias", format!("must be in [0,1], got {}", self.home_bias));
        }
        if !(self.night_home_boost >= 0.0) {
            return fail(
                "night_home_boost",
                format!("must be non-negative, got {}", self.night_home_boost),
            );
        }
        match &self.density {
            DensityProfile::Uniform => {}
            DensityProfile::Clustered { k, spread_m } => {
                if *k == 0 {
                    return fail("density", "clustered needs k >= 1".into());
                }
                if !(*spread_m > 0.0) {
                    return fail("density", format!("spread must be positive, got {spread_m}"));
                }
            }
        }
        if let Holiday::Summer {
            displaced_fraction,
            months,
            displacement_min_m,
        } = &self.holiday
        {
            if !(0.0..=1.0).contains(displaced_fraction) {
                return fail(
                    "holiday",
                    format!("displaced fraction must be in [0,1], got {displaced_fraction}"),
                );
            }
            if months.is_empty() || months.iter().any(|m| !(1..=12).contains(m)) {
                return fail("holiday", "months must be in 1..=12".into());
            }
            if !(*displacement_min_m >= 0.0) {
                return fail(
                    "holiday",
                    format!("displacement must be non-negative, got {displacement_min_m}"),
                );
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> Result<WindowSet> {
        WindowSet::from_range(self.period_start, self.period_end)
    }
}

/// One user's ground truth: the fixed home, a few anchor towers, and an
/// optional holiday destination.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTruth {
    pub user_id: String,
    pub home_tower: u32,
    pub anchors: Vec<u32>,
    pub holiday_tower: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub users: Vec<UserTruth>,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn id_width(n: u32) -> usize {
    n.to_string().len()
}

/// Lay out the tower network for the configured density profile.
pub fn generate_network(config: &GeneratorConfig) -> Result<TowerNetwork> {
    config.validate()?;
    let mut rng = seeded(config.seed, STREAM_NETWORK);
    let e = config.extent_m;
    let width = id_width(config.n_towers);
    let mut towers = Vec::with_capacity(config.n_towers as usize);
    match &config.density {
        DensityProfile::Uniform => {
            for i in 0..config.n_towers {
                let x = rng.random_range(0.0..e);
                let y = rng.random_range(0.0..e);
                towers.push((format!("T{i:0width$}"), x, y));
            }
        }
        DensityProfile::Clustered { k, spread_m } => {
            let centers: Vec<(f64, f64)> = (0..*k)
                .map(|_| (rng.random_range(0.0..e), rng.random_range(0.0..e)))
                .collect();
            let normal = rand_distr::Normal::new(0.0, *spread_m)
                .map_err(|_| Error::InvalidConfig("bad cluster spread".into()))?;
            for i in 0..config.n_towers {
                let (cx, cy) = centers[rng.random_range(0..centers.len())];
                let x = (cx + rng.sample(normal)).clamp(0.0, e);
                let y = (cy + rng.sample(normal)).clamp(0.0, e);
                towers.push((format!("T{i:0width$}"), x, y));
            }
        }
    }
    TowerNetwork::new(towers)
}

/// Assign every user a home (denser areas attract more homes), 1 to 3
/// anchors near the home, and possibly a distant holiday tower.
pub fn generate_users(config: &GeneratorConfig, network: &TowerNetwork) -> Result<GroundTruth> {
    config.validate()?;
    let mut rng = seeded(config.seed, STREAM_USERS);
    let n = network.len() as u32;

    // Home weight of a tower: how many towers sit within a twentieth of
    // the extent. Picking homes by this weight concentrates them where the
    // network itself is dense.
    let density_radius = config.extent_m / 20.0;
    let weights: Vec<f64> = (0..n)
        .map(|t| network.within_radius(t, density_radius).len() as f64)
        .collect();
    let home_dist = WeightedIndex::new(&weights)
        .map_err(|_| Error::InvalidConfig("tower density weights are degenerate".into()))?;

    let anchor_radius = config.extent_m / 5.0;
    let (displaced_fraction, displacement_min_m) = match &config.holiday {
        Holiday::None => (0.0, 0.0),
        Holiday::Summer {
            displaced_fraction,
            displacement_min_m,
            ..
        } => (*displaced_fraction, *displacement_min_m),
    };

    let width = id_width(config.n_users);
    let mut users = Vec::with_capacity(config.n_users as usize);
    for u in 0..config.n_users {
        let home = rng.sample(&home_dist) as u32;

        let mut radius = anchor_radius;
        let mut candidates: Vec<u32>;
        loop {
            candidates = network
                .within_radius(home, radius)
                .into_iter()
                .filter(|&t| t != home)
                .collect();
            if !candidates.is_empty() {
                break;
            }
            radius *= 2.0;
        }
        let n_anchors = rng.random_range(1..=3usize).min(candidates.len());
        let anchors: Vec<u32> = candidates
            .choose_multiple(&mut rng, n_anchors)
            .copied()
            .collect();

        let holiday_tower = if displaced_fraction > 0.0 && rng.random_bool(displaced_fraction) {
            let far: Vec<u32> = (0..n)
                .filter(|&t| network.distance(home, t) >= displacement_min_m)
                .collect();
            let tower = far.choose(&mut rng).copied().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no tower lies {displacement_min_m} m from tower {}; extent too small",
                    network.id(home)
                ))
            })?;
            Some(tower)
        } else {
            None
        };

        users.push(UserTruth {
            user_id: format!("u{u:0width$}"),
            home_tower: home,
            anchors,
            holiday_tower,
        });
    }
    Ok(GroundTruth { users })
}

/// Event-placement context for one user, precomputed once.
struct UserWorld {
    home: u32,
    holiday: Option<u32>,
    holiday_months: Vec<u32>,
    anchors: Vec<u32>,
    nearby_home: Vec<u32>,
    nearby_holiday: Vec<u32>,
}

impl UserWorld {
    fn new(config: &GeneratorConfig, network: &TowerNetwork, user: &UserTruth) -> Self {
        let nearby_radius = config.extent_m / 10.0;
        let nearby = |center: u32| -> Vec<u32> {
            network
                .within_radius(center, nearby_radius)
                .into_iter()
                .filter(|&t| t != center)
                .collect()
        };
        Self {
            home: user.home_tower,
            holiday: user.holiday_tower,
            holiday_months: config.holiday.months().to_vec(),
            anchors: user.anchors.clone(),
            nearby_home: nearby(user.home_tower),
            nearby_holiday: user.holiday_tower.map(nearby).unwrap_or_default(),
        }
    }

    /// The tower currently playing the home role, and its surroundings.
    fn stage(&self, month: u32) -> (u32, &[u32]) {
        match self.holiday {
            Some(h) if self.holiday_months.contains(&month) => (h, &self.nearby_holiday),
            _ => (self.home, &self.nearby_home),
        }
    }
}

/// Generate one user's records for the whole period, sorted by timestamp.
/// Each user draws from its own RNG stream, so the result depends only on
/// (seed, user index).
pub fn user_records(
    config: &GeneratorConfig,
    network: &TowerNetwork,
    user: &UserTruth,
    user_index: u32,
) -> Vec<CdrRecord> {
    let mut rng = seeded(config.seed, STREAM_USER_BASE + user_index as u64);
    let world = UserWorld::new(config, network, user);
    let night = NightWindow::default();
    let poisson = Poisson::new(config.events_per_user_day).expect("validated mean");

    let mut records = Vec::new();
    let mut date = config.period_start;
    while date <= config.period_end {
        let n_events = rng.sample(poisson) as u32;
        let (home, nearby) = world.stage(date.month());
        for _ in 0..n_events {
            let hour = rng.random_range(0..24u32);
            let minute = rng.random_range(0..60u32);
            let second = rng.random_range(0..60u32);
            let boost = if night.contains_hour(hour as u8) {
                config.night_home_boost
            } else {
                1.0
            };
            let p_home = (config.home_bias * boost).min(1.0);
            let tower = if rng.random_bool(p_home) {
                home
            } else if !world.anchors.is_empty() && (nearby.is_empty() || rng.random_bool(0.7)) {
                world.anchors[rng.random_range(0..world.anchors.len())]
            } else if !nearby.is_empty() {
                nearby[rng.random_range(0..nearby.len())]
            } else {
                home
            };
            let direction = if rng.random_bool(0.5) {
                Direction::Outgoing
            } else {
                Direction::Incoming
            };
            let kind = if rng.random_bool(CALL_FRACTION) {
                ActivityKind::Call
            } else {
                ActivityKind::Text
            };
            let duration_s = match kind {
                ActivityKind::Call => rng.random_range(10..=600u32),
                ActivityKind::Text => 0,
            };
            records.push(CdrRecord {
                user_id: user.user_id.clone(),
                timestamp: date.and_hms_opt(hour, minute, second).expect("valid time"),
                tower_id: network.id(tower).to_string(),
                direction,
                kind,
                duration_s,
            });
        }
        date = date.succ_opt().expect("date within calendar range");
    }
    records.sort_by_key(|r| r.timestamp);
    records
}

/// Materialize the full record stream in (user, timestamp) order. Fine for
/// test-sized runs; large runs should stream users through `user_records`.
pub fn generate_cdr(
    config: &GeneratorConfig,
    network: &TowerNetwork,
    truth: &GroundTruth,
) -> Vec<CdrRecord> {
    truth
        .users
        .iter()
        .enumerate()
        .flat_map(|(i, user)| user_records(config, network, user, i as u32))
        .collect()
}
