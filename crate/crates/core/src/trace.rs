//! Per-user per-month aggregation of raw records into the traces the
//! detection criteria consume.
//!
//! Aggregation is a commutative monoid merge over per-tower counters, so
//! records may arrive in any order and in any partitioning: any schedule
//! yields an identical trace. Distinct active days are tracked as a
//! day-of-month bitmask (months have at most 31 days).

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use crate::calendar::{MonthWindow, WindowSet};
use crate::error::{Error, Result};
use crate::records::{parse_raw, CdrRecord, LineError, CDR_HEADER};
use crate::towers::TowerNetwork;

/// Hour-of-day window that may span midnight. Half-open: an hour `h`
/// qualifies iff `h >= start` or `h < end` when the window wraps, and
/// `start <= h < end` when it does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NightWindow {
    start_h: u8,
    end_h: u8,
}

impl NightWindow {
    pub fn new(start_h: u8, end_h: u8) -> Result<Self> {
        if start_h >= 24 || end_h >= 24 {
            return Err(Error::InvalidConfig(format!(
                "night window hours must be in [0,24), got {start_h}..{end_h}"
            )));
        }
        Ok(Self { start_h, end_h })
    }

    pub fn start_h(&self) -> u8 {
        self.start_h
    }

    pub fn end_h(&self) -> u8 {
        self.end_h
    }

    pub fn contains_hour(&self, h: u8) -> bool {
        if self.start_h < self.end_h {
            h >= self.start_h && h < self.end_h
        } else {
            h >= self.start_h || h < self.end_h
        }
    }
}

impl Default for NightWindow {
    /// The 7pm-9am window used by the time-constrained criteria.
    fn default() -> Self {
        Self {
            start_h: 19,
            end_h: 9,
        }
    }
}

/// Aggregates for one tower within one user-month.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TowerStats {
    pub total_count: u32,
    pub night_count: u32,
    day_mask: u32,
}

impl TowerStats {
    /// Construct directly from counts; `distinct_days` becomes the low bits
    /// of the day mask. Handy for tests and in-memory pipelines.
    pub fn with_counts(total_count: u32, distinct_days: u32, night_count: u32) -> Self {
        debug_assert!(distinct_days <= 31);
        Self {
            total_count,
            night_count,
            day_mask: if distinct_days >= 32 {
                u32::MAX
            } else {
                (1u32 << distinct_days) - 1
            },
        }
    }

    pub fn distinct_days(&self) -> u32 {
        self.day_mask.count_ones()
    }

    fn add_event(&mut self, day_bit: u32, night: bool) {
        self.total_count += 1;
        self.day_mask |= 1 << day_bit;
        if night {
            self.night_count += 1;
        }
    }

    fn merge(&mut self, other: &TowerStats) {
        self.total_count += other.total_count;
        self.night_count += other.night_count;
        self.day_mask |= other.day_mask;
    }
}

/// Per-user per-month trace: activity counters per visited tower. Towers
/// with zero activity are absent by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMonthTrace {
    user_id: String,
    month: MonthWindow,
    per_tower: BTreeMap<u32, TowerStats>,
}

impl UserMonthTrace {
    pub fn from_tower_stats(
        user_id: impl Into<String>,
        month: MonthWindow,
        per_tower: impl IntoIterator<Item = (u32, TowerStats)>,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            month,
            per_tower: per_tower.into_iter().collect(),
        }
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn month(&self) -> &MonthWindow {
        &self.month
    }

    pub fn per_tower(&self) -> &BTreeMap<u32, TowerStats> {
        &self.per_tower
    }

    pub fn n_towers(&self) -> usize {
        self.per_tower.len()
    }

    /// Total records aggregated into this trace.
    pub fn total_records(&self) -> u64 {
        self.per_tower.values().map(|s| s.total_count as u64).sum()
    }

    /// Merge a trace built from a disjoint partition of the same user-month.
    pub fn merge(&mut self, other: &UserMonthTrace) -> Result<()> {
        if self.user_id != other.user_id || self.month.label() != other.month.label() {
            return Err(Error::TraceKeyMismatch {
                expected: format!("{}/{}", self.user_id, self.month.label()),
                got: format!("{}/{}", other.user_id, other.month.label()),
            });
        }
        for (tower, stats) in &other.per_tower {
            self.per_tower.entry(*tower).or_default().merge(stats);
        }
        Ok(())
    }
}

/// Build the trace of one user in one month. All records must belong to
/// that user and fall inside the window; an empty input is an error so the
/// caller can skip the user-month explicitly.
pub fn build_trace(
    user_id: &str,
    month: &MonthWindow,
    records: &[CdrRecord],
    night: NightWindow,
    network: &TowerNetwork,
) -> Result<UserMonthTrace> {
    if records.is_empty() {
        return Err(Error::EmptyTrace(user_id.to_string()));
    }
    let mut per_tower: BTreeMap<u32, TowerStats> = BTreeMap::new();
    for rec in records {
        if rec.user_id != user_id {
            return Err(Error::TraceKeyMismatch {
                expected: user_id.to_string(),
                got: rec.user_id.clone(),
            });
        }
        let date = rec.date();
        if !month.contains(date) {
            return Err(Error::InvalidWindow(format!(
                "record at {} outside month {}",
                date,
                month.label()
            )));
        }
        let tower = network.require(&rec.tower_id)?;
        per_tower
            .entry(tower)
            .or_default()
            .add_event(month.day_bit(date), night.contains_hour(rec.hour()));
    }
    Ok(UserMonthTrace {
        user_id: user_id.to_string(),
        month: month.clone(),
        per_tower,
    })
}

/// Group records by (user, month window), dropping and counting records that
/// fall outside every window.
pub fn split_months(
    records: impl IntoIterator<Item = CdrRecord>,
    windows: &WindowSet,
) -> (BTreeMap<(String, usize), Vec<CdrRecord>>, u64) {
    let mut grouped: BTreeMap<(String, usize), Vec<CdrRecord>> = BTreeMap::new();
    let mut dropped = 0u64;
    for rec in records {
        match windows.index_of(rec.date()) {
            Some(w) => grouped
                .entry((rec.user_id.clone(), w))
                .or_default()
                .push(rec),
            None => dropped += 1,
        }
    }
    (grouped, dropped)
}

/// Counters from a streaming ingest pass.
#[derive(Debug, Default, Clone)]
pub struct IngestReport {
    pub parsed: u64,
    pub malformed: u64,
    pub dropped_out_of_window: u64,
    /// First few malformed lines, for diagnostics.
    pub error_sample: Vec<LineError>,
}

const ERROR_SAMPLE_CAP: usize = 10;

/// Streaming per-user aggregation: a single pass over a record stream into
/// per-(user, month) traces. Memory scales with users x months x visited
/// towers, never with record count.
pub struct TraceAccumulator<'a> {
    network: &'a TowerNetwork,
    windows: &'a WindowSet,
    night: NightWindow,
    users: HashMap<String, Vec<Option<HashMap<u32, TowerStats>>>>,
    report: IngestReport,
}

impl<'a> TraceAccumulator<'a> {
    pub fn new(network: &'a TowerNetwork, windows: &'a WindowSet, night: NightWindow) -> Self {
        Self {
            network,
            windows,
            night,
            users: HashMap::new(),
            report: IngestReport::default(),
        }
    }

    fn add_resolved(&mut self, user_id: &str, date: chrono::NaiveDate, hour: u8, tower: u32) {
        let Some(w) = self.windows.index_of(date) else {
            self.report.dropped_out_of_window += 1;
            return;
        };
        let slots = match self.users.get_mut(user_id) {
            Some(slots) => slots,
            None => self
                .users
                .entry(user_id.to_string())
                .or_insert_with(|| vec![None; self.windows.len()]),
        };
        let agg = slots[w].get_or_insert_with(HashMap::new);
        let day_bit = self.windows.get(w).day_bit(date);
        agg.entry(tower)
            .or_default()
            .add_event(day_bit, self.night.contains_hour(hour));
        self.report.parsed += 1;
    }

    /// Add one already-parsed record. Unknown towers are fatal.
    pub fn add_record(&mut self, rec: &CdrRecord) -> Result<()> {
        let tower = self.network.require(&rec.tower_id)?;
        self.add_resolved(&rec.user_id, rec.date(), rec.hour(), tower);
        Ok(())
    }

    /// Single-pass CSV ingest. Malformed lines are counted and sampled;
    /// unknown tower ids abort with an error.
    pub fn ingest_csv<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let got = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if got != CDR_HEADER {
            return Err(Error::BadHeader {
                expected: CDR_HEADER.into(),
                got,
            });
        }
        let mut line = 1u64;
        let mut rec = csv::StringRecord::new();
        loop {
            match rdr.read_record(&mut rec) {
                Ok(false) => break,
                Ok(true) => {
                    line += 1;
                    match parse_raw(&rec, line) {
                        Ok(raw) => {
                            use chrono::Timelike;
                            let tower = self.network.require(raw.tower_id)?;
                            self.add_resolved(
                                raw.user_id,
                                raw.timestamp.date(),
                                raw.timestamp.time().hour() as u8,
                                tower,
                            );
                        }
                        Err(e) => {
                            self.report.malformed += 1;
                            if self.report.error_sample.len() < ERROR_SAMPLE_CAP {
                                self.report.error_sample.push(e);
                            }
                        }
                    }
                }
                Err(e) => {
                    line += 1;
                    self.report.malformed += 1;
                    if self.report.error_sample.len() < ERROR_SAMPLE_CAP {
                        self.report.error_sample.push(LineError {
                            line,
                            reason: e.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Finish the pass: traces sorted by (user_id, month), plus counters.
    pub fn finish(self) -> (Vec<UserMonthTrace>, IngestReport) {
        let mut user_ids: Vec<String> = self.users.keys().cloned().collect();
        user_ids.sort_unstable();
        let mut traces = Vec::new();
        let mut users = self.users;
        for user_id in user_ids {
            let slots = users.remove(&user_id).expect("key from same map");
            for (w, slot) in slots.into_iter().enumerate() {
                if let Some(agg) = slot {
                    traces.push(UserMonthTrace {
                        user_id: user_id.clone(),
                        month: self.windows.get(w).clone(),
                        per_tower: agg.into_iter().collect(),
                    });
                }
            }
        }
        (traces, self.report)
    }
}
