//! Month windows: labeled, inclusive date ranges that never straddle a
//! calendar-month boundary. Analysis runs month by month, and partial months
//! (a dataset starting mid-May, say) are first-class.

use chrono::{Datelike, Days, NaiveDate};

use crate::error::{Error, Result};

/// An inclusive date range inside a single calendar month.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthWindow {
    label: String,
    start: NaiveDate,
    end: NaiveDate,
}

impl MonthWindow {
    /// Both dates must fall in the same calendar month, `start <= end`.
    /// The label is derived as `YYYY-MM`.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidWindow(format!(
                "start {start} is after end {end}"
            )));
        }
        if (start.year(), start.month()) != (end.year(), end.month()) {
            return Err(Error::InvalidWindow(format!(
                "{start}..{end} spans more than one calendar month"
            )));
        }
        let label = format!("{:04}-{:02}", start.year(), start.month());
        Ok(Self { label, start, end })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Number of days covered, `end - start + 1`.
    pub fn n_days(&self) -> u32 {
        (self.end - self.start).num_days() as u32 + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Day-of-window bit position for `date` (0-based day of month offset).
    /// Callers must check `contains` first.
    pub(crate) fn day_bit(&self, date: NaiveDate) -> u32 {
        date.day() - 1
    }
}

/// Split an inclusive date range on calendar-month boundaries.
/// The first and last windows may be partial months.
pub fn windows_from_range(from: NaiveDate, to: NaiveDate) -> Result<Vec<MonthWindow>> {
    if from > to {
        return Err(Error::InvalidWindow(format!("{from}..{to} is empty")));
    }
    let mut windows = Vec::new();
    let mut cursor = from;
    while cursor <= to {
        let month_end = last_day_of_month(cursor);
        let end = month_end.min(to);
        windows.push(MonthWindow::new(cursor, end)?);
        cursor = month_end
            .checked_add_days(Days::new(1))
            .expect("date overflow");
    }
    Ok(windows)
}

fn last_day_of_month(d: NaiveDate) -> NaiveDate {
    let (y, m) = (d.year(), d.month());
    let first_next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    }
    .expect("valid date");
    first_next.pred_opt().expect("valid date")
}

/// A validated, ordered set of non-overlapping month windows.
#[derive(Debug, Clone)]
pub struct WindowSet {
    windows: Vec<MonthWindow>,
}

impl WindowSet {
    pub fn new(mut windows: Vec<MonthWindow>) -> Result<Self> {
        windows.sort_by_key(|w| w.start);
        for pair in windows.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::OverlappingWindows(
                    pair[0].label.clone(),
                    pair[1].label.clone(),
                ));
            }
        }
        Ok(Self { windows })
    }

    pub fn from_range(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        Self::new(windows_from_range(from, to)?)
    }

    /// Parse `YYYY-MM` or `YYYY-MM:YYYY-MM` into the full months it names.
    pub fn from_labels(spec: &str) -> Result<Self> {
        fn label(s: &str) -> Result<(i32, u32)> {
            let parsed = (|| {
                let (y, m) = s.split_once('-')?;
                let y: i32 = y.parse().ok()?;
                let m: u32 = m.parse().ok()?;
                (1..=12).contains(&m).then_some((y, m))
            })();
            parsed
                .ok_or_else(|| Error::InvalidConfig(format!("bad month `{s}`; expected YYYY-MM")))
        }
        let (from, to) = match spec.split_once(':') {
            Some((a, b)) => (label(a)?, label(b)?),
            None => {
                let m = label(spec)?;
                (m, m)
            }
        };
        let start = NaiveDate::from_ymd_opt(from.0, from.1, 1).expect("validated month");
        let next = match to.1 {
            12 => NaiveDate::from_ymd_opt(to.0 + 1, 1, 1),
            m => NaiveDate::from_ymd_opt(to.0, m + 1, 1),
        }
        .expect("validated month");
        Self::from_range(start, next.pred_opt().expect("valid date"))
    }

    pub fn windows(&self) -> &[MonthWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn get(&self, idx: usize) -> &MonthWindow {
        &self.windows[idx]
    }

    /// Window containing `date`, if any.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let i = self.windows.partition_point(|w| w.start <= date);
        if i == 0 {
            return None;
        }
        let w = &self.windows[i - 1];
        w.contains(date).then_some(i - 1)
    }
}
