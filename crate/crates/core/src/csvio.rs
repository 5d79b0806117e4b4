//! Readers and writers for the pipeline's CSV formats. All files are
//! UTF-8, LF-terminated, with a fixed checked header; none of the field
//! values ever needs quoting.

use std::io::{BufWriter, Read, Write};

use chrono::{Datelike, NaiveDate, Timelike};
use rayon::prelude::*;

use crate::calendar::WindowSet;
use crate::detect::{Algorithm, AlgorithmCounts, HomeDetection, RankedTower, TopShareRow};
use crate::error::{Error, Result};
use crate::hotspot::GiStarRow;
use crate::metrics::{CorrelationResult, PopulationVector, SmcResult};
use crate::records::{CdrRecord, CDR_HEADER};
use crate::synth::{GeneratorConfig, GroundTruth};
use crate::towers::TowerNetwork;
use crate::uncertainty::SuSummaryRow;

pub const DETECTION_HEADER: &str = "user_id,month,algorithm,l1,p1,l2,p2,l3,p3,su_m";
pub const GROUND_TRUTH_HEADER: &str = "user_id,home_tower_id";
pub const VECTOR_HEADER: &str = "tower_id,value";
pub const HOTSPOT_HEADER: &str = "tower_id,value,z,classification";

fn check_header(got: &csv::StringRecord, expected: &str) -> Result<()> {
    let got = got.iter().collect::<Vec<_>>().join(",");
    if got == expected {
        Ok(())
    } else {
        Err(Error::BadHeader {
            expected: expected.to_string(),
            got,
        })
    }
}

fn write_record(buf: &mut Vec<u8>, rec: &CdrRecord) {
    let d = rec.timestamp.date();
    let t = rec.timestamp.time();
    // Hot path: format fields directly instead of going through a CSV
    // writer; no field can contain a separator.
    write!(
        buf,
        "{},{:04}-{:02}-{:02}T{:02}:{:02}:{:02},{},{},{},{}\n",
        rec.user_id,
        d.year(),
        d.month(),
        d.day(),
        t.hour(),
        t.minute(),
        t.second(),
        rec.tower_id,
        rec.direction.as_str(),
        rec.kind.as_str(),
        rec.duration_s
    )
    .expect("writing to a Vec cannot fail");
}

/// Write an in-memory record slice as CDR CSV.
pub fn write_cdr<W: Write>(records: &[CdrRecord], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(CDR_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(4096);
    for rec in records {
        buf.clear();
        write_record(&mut buf, rec);
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

const GENERATION_CHUNK: usize = 512;

/// Generate and write the full synthetic CDR stream without materializing
/// it. Users are generated in parallel within fixed-size chunks and written
/// strictly in user order, so the bytes do not depend on the thread count.
/// Returns the number of records written.
pub fn write_cdr_stream<W: Write>(
    config: &GeneratorConfig,
    network: &TowerNetwork,
    truth: &GroundTruth,
    out: W,
) -> Result<u64> {
    let mut out = BufWriter::new(out);
    out.write_all(CDR_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    let mut total = 0u64;
    for (chunk_idx, chunk) in truth.users.chunks(GENERATION_CHUNK).enumerate() {
        let base = chunk_idx * GENERATION_CHUNK;
        let buffers: Vec<(u64, Vec<u8>)> = chunk
            .par_iter()
            .enumerate()
            .map(|(i, user)| {
                let records =
                    crate::synth::user_records(config, network, user, (base + i) as u32);
                let mut buf = Vec::with_capacity(records.len() * 56);
                for rec in &records {
                    write_record(&mut buf, rec);
                }
                (records.len() as u64, buf)
            })
            .collect();
        for (n, buf) in buffers {
            total += n;
            out.write_all(&buf)?;
        }
    }
    out.flush()?;
    Ok(total)
}

/// Scan a CDR stream for its date span and return the full months covering
/// it, so callers can detect without being told the period.
pub fn infer_month_windows<R: Read>(input: R) -> Result<WindowSet> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    check_header(rdr.headers()?, CDR_HEADER)?;
    let mut span: Option<(NaiveDate, NaiveDate)> = None;
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec)? {
        let Some(ts) = rec.get(1) else { continue };
        let Some(prefix) = ts.get(..10) else { continue };
        let Ok(date) = NaiveDate::parse_from_str(prefix, "%Y-%m-%d") else {
            continue;
        };
        span = Some(match span {
            None => (date, date),
            Some((lo, hi)) => (lo.min(date), hi.max(date)),
        });
    }
    let Some((lo, hi)) = span else {
        return Err(Error::EmptyInput("no dated records to infer months from"));
    };
    let start = NaiveDate::from_ymd_opt(lo.year(), lo.month(), 1).expect("valid date");
    let next = match hi.month() {
        12 => NaiveDate::from_ymd_opt(hi.year() + 1, 1, 1),
        m => NaiveDate::from_ymd_opt(hi.year(), m + 1, 1),
    }
    .expect("valid date");
    WindowSet::from_range(start, next.pred_opt().expect("valid date"))
}

/// Render a float so that parsing it back recovers the same value.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write detections in a fixed row format; absent L2/L3/SU become empty
/// fields.
pub fn write_detections<W: Write>(detections: &[HomeDetection], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{DETECTION_HEADER}")?;
    for det in detections {
        let rank = |i: usize| match det.ranked.get(i) {
            Some(r) => (r.tower_id.as_str(), r.score.to_string()),
            None => ("", String::new()),
        };
        let (l1, p1) = rank(0);
        let (l2, p2) = rank(1);
        let (l3, p3) = rank(2);
        let su = det.su_m.map(fmt_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            det.user_id, det.month, det.algorithm, l1, p1, l2, p2, l3, p3, su
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_detections<R: Read>(input: R) -> Result<Vec<HomeDetection>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, DETECTION_HEADER)?;
    let mut out = Vec::new();
    let mut line = 1u64;
    for rec in rdr.records() {
        let rec = rec?;
        line += 1;
        let malformed = |reason: &str| Error::MalformedLine {
            line,
            reason: reason.to_string(),
        };
        if rec.len() != 10 {
            return Err(malformed(&format!("expected 10 fields, got {}", rec.len())));
        }
        let algorithm = Algorithm::from_name(&rec[2])
            .ok_or_else(|| malformed(&format!("unknown algorithm `{}`", &rec[2])))?;
        let mut ranked = Vec::new();
        for i in 0..3 {
            let tower = &rec[3 + 2 * i];
            let score = &rec[4 + 2 * i];
            match (tower.is_empty(), score.is_empty()) {
                (true, true) => continue,
                (false, false) => ranked.push(RankedTower {
                    tower_id: tower.to_string(),
                    score: score
                        .parse()
                        .map_err(|_| malformed(&format!("bad score `{score}`")))?,
                }),
                _ => return Err(malformed("tower and score must be present together")),
            }
        }
        if ranked.is_empty() {
            return Err(malformed("detection without L1"));
        }
        let su_m = if rec[9].is_empty() {
            None
        } else {
            Some(
                rec[9]
                    .parse()
                    .map_err(|_| malformed(&format!("bad su_m `{}`", &rec[9])))?,
            )
        };
        out.push(HomeDetection {
            user_id: rec[0].to_string(),
            month: rec[1].to_string(),
            algorithm,
            ranked,
            su_m,
        });
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(
    truth: &GroundTruth,
    network: &TowerNetwork,
    out: W,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{GROUND_TRUTH_HEADER}")?;
    for user in &truth.users {
        writeln!(out, "{},{}", user.user_id, network.id(user.home_tower))?;
    }
    out.flush()?;
    Ok(())
}

/// Ground-truth pairs in file order: (user_id, home_tower_id).
pub fn read_ground_truth<R: Read>(input: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, GROUND_TRUTH_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Write a tower-indexed field; rows carry an optional occupancy count.
pub fn write_vector<W: Write>(rows: &[(String, f64, u64)], with_n: bool, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    if with_n {
        writeln!(out, "{VECTOR_HEADER},n")?;
    } else {
        writeln!(out, "{VECTOR_HEADER}")?;
    }
    for (tower, value, n) in rows {
        if with_n {
            writeln!(out, "{tower},{},{n}", fmt_f64(*value))?;
        } else {
            writeln!(out, "{tower},{}", fmt_f64(*value))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a tower-indexed field into a vector aligned to the network; towers
/// missing from the file get 0. Accepts the plain format and the variant
/// with a trailing count column.
pub fn read_vector<R: Read>(input: R, network: &TowerNetwork) -> Result<PopulationVector> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?;
    let got = headers.iter().collect::<Vec<_>>().join(",");
    if got != VECTOR_HEADER && got != format!("{VECTOR_HEADER},n") {
        return Err(Error::BadHeader {
            expected: VECTOR_HEADER.to_string(),
            got,
        });
    }
    let mut counts = vec![0.0f64; network.len()];
    let mut line = 1u64;
    for rec in rdr.records() {
        let rec = rec?;
        line += 1;
        let idx = network.require(&rec[0])?;
        let value: f64 = rec[1].parse().map_err(|_| Error::MalformedLine {
            line,
            reason: format!("bad value `{}`", &rec[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue(rec[0].to_string()));
        }
        counts[idx as usize] = value;
    }
    PopulationVector::new(counts)
}

pub fn write_hotspots<W: Write>(rows: &[GiStarRow], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{HOTSPOT_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.tower_id,
            fmt_f64(row.value),
            fmt_f64(row.z),
            row.classification.name()
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_detection_counts<W: Write>(
    counts: &std::collections::BTreeMap<Algorithm, AlgorithmCounts>,
    out: W,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "algorithm,homes,with_l2,pct_l2,with_l3,pct_l3")?;
    for (algo, c) in counts {
        writeln!(
            out,
            "{algo},{},{},{},{},{}",
            c.homes,
            c.with_l2,
            fmt_f64(c.pct_l2()),
            c.with_l3,
            fmt_f64(c.pct_l3())
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_top_shares<W: Write>(rows: &[TopShareRow], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "percentile,top1_share,top2_share,top3_share")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.percentile,
            fmt_f64(row.shares[0]),
            fmt_f64(row.shares[1]),
            fmt_f64(row.shares[2])
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_su_summary<W: Write>(rows: &[SuSummaryRow], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "algorithm,month,median_su_m,n")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.algorithm,
            row.month,
            fmt_f64(row.median_su_m),
            row.n
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of the pairwise agreement matrix, one per (month, pair).
pub fn write_smc_matrix<W: Write>(
    rows: &[(String, Algorithm, Algorithm, SmcResult)],
    out: W,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "month,algo_a,algo_b,smc,n_common")?;
    for (month, a, b, r) in rows {
        writeln!(out, "{month},{a},{b},{},{}", fmt_f64(r.smc), r.n_common)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_validation<W: Write>(rows: &[(String, Algorithm, f64, u64)], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "month,algorithm,csm_deg,n_detections")?;
    for (month, algo, csm, n) in rows {
        writeln!(out, "{month},{algo},{},{n}", fmt_f64(*csm))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_accuracy<W: Write>(rows: &[(String, Algorithm, f64, u64)], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "month,algorithm,accuracy,n_detections")?;
    for (month, algo, acc, n) in rows {
        writeln!(out, "{month},{algo},{},{n}", fmt_f64(*acc))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_correlation<W: Write>(result: &CorrelationResult, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "r,n_points,excluded")?;
    writeln!(
        out,
        "{},{},{}",
        fmt_f64(result.r),
        result.n_points,
        result.excluded.join("+")
    )?;
    out.flush()?;
    Ok(())
}

pub fn write_filter_report<W: Write>(
    threshold_m: f64,
    kept: u64,
    dropped: u64,
    out: W,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "threshold_m,kept,dropped")?;
    writeln!(out, "{},{kept},{dropped}", fmt_f64(threshold_m))?;
    out.flush()?;
    Ok(())
}
