//! Raw activity records and the CDR CSV reader.
//!
//! One record is one timestamped activity event (call or text, incoming or
//! outgoing) of one user at one tower. The reader is tolerant per line:
//! malformed lines surface as positioned errors the caller can count and
//! skip while the stream continues.

use std::fmt;
use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

pub const CDR_HEADER: &str = "user_id,timestamp,tower_id,direction,kind,duration_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Incoming,
    Outgoing,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Incoming => "in",
            Direction::Outgoing => "out",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "in" => Some(Direction::Incoming),
            "out" => Some(Direction::Outgoing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityKind {
    Call,
    Text,
}

impl ActivityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityKind::Call => "call",
            ActivityKind::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "call" => Some(ActivityKind::Call),
            "text" => Some(ActivityKind::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdrRecord {
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub tower_id: String,
    pub direction: Direction,
    pub kind: ActivityKind,
    pub duration_s: u32,
}

impl CdrRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    pub fn hour(&self) -> u8 {
        use chrono::Timelike;
        self.timestamp.time().hour() as u8
    }
}

/// A record parse failure at a specific input line, recoverable by skipping.
#[derive(Debug, Clone)]
pub struct LineError {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Borrowed view of one CSV record's fields, before any allocation.
/// The single parsing path shared by the owned-record reader and the
/// streaming aggregator.
pub(crate) struct RawRecord<'a> {
    pub user_id: &'a str,
    pub timestamp: NaiveDateTime,
    pub tower_id: &'a str,
    pub direction: Direction,
    pub kind: ActivityKind,
    pub duration_s: u32,
}

impl<'a> RawRecord<'a> {
    pub(crate) fn to_owned(&self) -> CdrRecord {
        CdrRecord {
            user_id: self.user_id.to_string(),
            timestamp: self.timestamp,
            tower_id: self.tower_id.to_string(),
            direction: self.direction,
            kind: self.kind,
            duration_s: self.duration_s,
        }
    }
}

/// Parse `YYYY-MM-DDTHH:MM:SS` without going through a format-string engine;
/// this sits on the hot path for multi-million-record files.
pub(crate) fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let b = s.as_bytes();
    if b.len() != 19 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':'
    {
        return None;
    }
    fn num(b: &[u8]) -> Option<u32> {
        let mut v: u32 = 0;
        for &c in b {
            if !c.is_ascii_digit() {
                return None;
            }
            v = v * 10 + (c - b'0') as u32;
        }
        Some(v)
    }
    let year = num(&b[0..4])? as i32;
    let month = num(&b[5..7])?;
    let day = num(&b[8..10])?;
    let hour = num(&b[11..13])?;
    let min = num(&b[14..16])?;
    let sec = num(&b[17..19])?;
    NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, min, sec)
}

pub(crate) fn parse_raw<'a>(rec: &'a csv::StringRecord, line: u64) -> std::result::Result<RawRecord<'a>, LineError> {
    let err = |reason: String| LineError { line, reason };
    if rec.len() != 6 {
        return Err(err(format!("expected 6 fields, got {}", rec.len())));
    }
    let timestamp = parse_timestamp(&rec[1])
        .ok_or_else(|| err(format!("bad timestamp `{}`", &rec[1])))?;
    let direction = Direction::parse(&rec[3])
        .ok_or_else(|| err(format!("bad direction `{}` (want in|out)", &rec[3])))?;
    let kind = ActivityKind::parse(&rec[4])
        .ok_or_else(|| err(format!("bad kind `{}` (want call|text)", &rec[4])))?;
    let duration_s: u32 = rec[5]
        .parse()
        .map_err(|_| err(format!("bad duration `{}`", &rec[5])))?;
    if kind == ActivityKind::Text && duration_s != 0 {
        return Err(err(format!("text with non-zero duration {duration_s}")));
    }
    if rec[0].is_empty() || rec[2].is_empty() {
        return Err(err("empty user_id or tower_id".into()));
    }
    Ok(RawRecord {
        user_id: &rec[0],
        timestamp,
        tower_id: &rec[2],
        direction,
        kind,
        duration_s,
    })
}

/// Streaming CDR reader. Yields records in input order; each malformed line
/// comes through as `Err(LineError)` and the stream continues.
pub struct CdrReader<R: Read> {
    inner: csv::StringRecordsIntoIter<R>,
    line: u64,
}

impl<R: Read> CdrReader<R> {
    /// Checks the header eagerly; a wrong header is fatal, not per-line.
    pub fn new(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let got = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if got != CDR_HEADER {
            return Err(Error::BadHeader {
                expected: CDR_HEADER.into(),
                got,
            });
        }
        Ok(Self {
            inner: rdr.into_records(),
            line: 1,
        })
    }
}

impl<R: Read> Iterator for CdrReader<R> {
    type Item = std::result::Result<CdrRecord, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.inner.next()?;
        self.line += 1;
        let line = self.line;
        Some(match rec {
            Ok(rec) => parse_raw(&rec, line).map(|r| r.to_owned()),
            Err(e) => Err(LineError {
                line,
                reason: e.to_string(),
            }),
        })
    }
}

/// Parse a whole stream, separating records from per-line errors.
pub fn parse_cdr<R: Read>(reader: R) -> Result<(Vec<CdrRecord>, Vec<LineError>)> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for item in CdrReader::new(reader)? {
        match item {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    Ok((records, errors))
}

/// Validate that every record's tower exists in the network. Unknown towers
/// are fatal, unlike per-line format errors.
pub fn validate_towers(records: &[CdrRecord], network: &crate::towers::TowerNetwork) -> Result<()> {
    for r in records {
        network.require(&r.tower_id)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_all(input: &str) -> (Vec<CdrRecord>, Vec<LineError>) {
        parse_cdr(input.as_bytes()).unwrap()
    }

    #[test]
    fn parses_call_and_text() {
        let input = "user_id,timestamp,tower_id,direction,kind,duration_s\n\
                     u1,2007-06-03T20:15:00,T7,out,call,42\n\
                     u1,2007-06-03T20:15:00,T7,out,text,0\n";
        let (recs, errs) = read_all(input);
        assert!(errs.is_empty());
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].user_id, "u1");
        assert_eq!(recs[0].tower_id, "T7");
        assert_eq!(recs[0].direction, Direction::Outgoing);
        assert_eq!(recs[0].kind, ActivityKind::Call);
        assert_eq!(recs[0].duration_s, 42);
        assert_eq!(recs[0].hour(), 20);
        assert_eq!(recs[1].kind, ActivityKind::Text);
        assert_eq!(recs[1].duration_s, 0);
    }

    #[test]
    fn malformed_line_is_recoverable() {
        let input = "user_id,timestamp,tower_id,direction,kind,duration_s\n\
                     u1,bad-time,T7,out,call,42\n\
                     u2,2007-06-03T08:00:00,T7,in,call,10\n";
        let (recs, errs) = read_all(input);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].user_id, "u2");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 2);
        assert!(errs[0].reason.contains("bad timestamp"));
    }

    #[test]
    fn text_with_duration_is_malformed() {
        let input = "user_id,timestamp,tower_id,direction,kind,duration_s\n\
                     u1,2007-06-03T20:15:00,T7,out,text,5\n";
        let (recs, errs) = read_all(input);
        assert!(recs.is_empty());
        assert_eq!(errs.len(), 1);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let input = "user,when,tower\nu1,x,T7\n";
        assert!(matches!(
            CdrReader::new(input.as_bytes()),
            Err(Error::BadHeader { .. })
        ));
    }

    #[test]
    fn timestamp_rejects_invalid_dates() {
        assert!(parse_timestamp("2007-06-03T20:15:00").is_some());
        assert!(parse_timestamp("2007-02-30T00:00:00").is_none());
        assert!(parse_timestamp("2007-06-03T24:00:00").is_none());
        assert!(parse_timestamp("2007-06-03 20:15:00").is_none());
    }
}
