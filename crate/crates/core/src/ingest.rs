//! Check-in ingestion.
//!
//! Both formats carry the same eight columns:
//! `user_id, venue_id, category_id, category_name, lat, lon, tz_offset_minutes, utc_timestamp`.
//! `foursquare_tsv` is tab-separated without a header; `csv` is comma-separated
//! with a header row. The timestamp column accepts either integer epoch seconds
//! or the dataset's `Tue Apr 03 18:00:09 +0000 2012` form.

use std::io::Read;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::model::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckinFormat {
    FoursquareTsv,
    Csv,
}

impl std::str::FromStr for CheckinFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "foursquare_tsv" | "tsv" => Ok(CheckinFormat::FoursquareTsv),
            "csv" => Ok(CheckinFormat::Csv),
            other => Err(format!("unknown check-in format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number in the input.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub reports: Vec<Report>,
    pub errors: Vec<LineError>,
}

pub const FOURSQUARE_TIME_FORMAT: &str = "%a %b %d %H:%M:%S %z %Y";

pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    DateTime::parse_from_str(s, FOURSQUARE_TIME_FORMAT)
        .map(|dt| dt.timestamp())
        .map_err(|e| format!("unparseable timestamp {s:?}: {e}"))
}

pub fn format_timestamp(epoch_s: i64) -> String {
    DateTime::from_timestamp(epoch_s, 0)
        .map(|dt| dt.format("%a %b %d %H:%M:%S +0000 %Y").to_string())
        .unwrap_or_else(|| epoch_s.to_string())
}

/// Parse a check-in stream. Bad lines are collected in `errors` rather than
/// aborting the parse.
pub fn parse_checkins<R: Read>(stream: R, format: CheckinFormat) -> ParseOutcome {
    let mut builder = csv::ReaderBuilder::new();
    builder.flexible(true);
    match format {
        CheckinFormat::FoursquareTsv => {
            builder.delimiter(b'\t').has_headers(false).quoting(false);
        }
        CheckinFormat::Csv => {
            builder.delimiter(b',').has_headers(true);
        }
    }
    let mut reader = builder.from_reader(stream);
    let mut out = ParseOutcome::default();
    for record in reader.records() {
        match record {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                if rec.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                match parse_record(&rec) {
                    Ok(r) => out.reports.push(r),
                    Err(message) => out.errors.push(LineError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(LineError { line, message: e.to_string() });
            }
        }
    }
    out
}

fn parse_record(rec: &csv::StringRecord) -> Result<Report, String> {
    if rec.len() != 8 {
        return Err(format!("expected 8 columns, found {}", rec.len()));
    }
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    let user_id = field(0);
    if user_id.is_empty() {
        return Err("empty user_id".into());
    }
    let lat: f64 = field(4).parse().map_err(|_| format!("bad lat {:?}", field(4)))?;
    let lon: f64 = field(5).parse().map_err(|_| format!("bad lon {:?}", field(5)))?;
    field(6).parse::<i64>().map_err(|_| format!("bad tz offset {:?}", field(6)))?;
    let timestamp = parse_timestamp(field(7))?;
    let category = field(3);
    let payload = (!category.is_empty()).then(|| category.to_string());
    Report::new(user_id, lat, lon, timestamp, payload).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TSV: &str = "470\t49bbd6c0f964a520f4531fe3\t4bf58dd8d48988d127951735\tArts & Crafts Store\t40.719810375488535\t-74.00258103213994\t-240\tTue Apr 03 18:00:09 +0000 2012\n\
979\t4a43c0aef964a520c6a61fe3\t4bf58dd8d48988d1df941735\tBridge\t40.60679958140643\t-74.04416981025437\t-240\tTue Apr 03 18:00:25 +0000 2012\n\
69\t4c5cc7b485a1e21e00d35711\t4bf58dd8d48988d103941735\tHome (private)\t40.716161684843215\t-73.88307005845945\t-240\t1333476042\n";

    #[test]
    fn three_well_formed_lines() {
        let out = parse_checkins(TSV.as_bytes(), CheckinFormat::FoursquareTsv);
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        assert_eq!(out.reports.len(), 3);
        let r = &out.reports[0];
        assert_eq!(r.user_id, "470");
        assert_eq!(r.payload.as_deref(), Some("Arts & Crafts Store"));
        assert_eq!(r.lat, 40.719810375488535);
        assert_eq!(r.lon, -74.00258103213994);
        assert_eq!(r.timestamp, 1_333_476_009);
        assert_eq!(out.reports[2].timestamp, 1_333_476_042);
    }

    #[test]
    fn invalid_lat_is_collected() {
        let data = "1\tv\tc\tCafe\t95.0\t-74.0\t-240\t100\n2\tv\tc\tCafe\t40.0\t-74.0\t-240\t100\n";
        let out = parse_checkins(data.as_bytes(), CheckinFormat::FoursquareTsv);
        assert_eq!(out.reports.len(), 1);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 1);
        assert!(out.errors[0].message.contains("lat"), "{}", out.errors[0].message);
    }

    #[test]
    fn malformed_lines_do_not_abort() {
        let data = "garbage\n1\tv\tc\tCafe\t40.0\t-74.0\t-240\tnot-a-time\n3\tv\tc\tCafe\t40.0\t-74.0\t-240\t100\n";
        let out = parse_checkins(data.as_bytes(), CheckinFormat::FoursquareTsv);
        assert_eq!(out.reports.len(), 1);
        assert_eq!(out.errors.len(), 2);
    }

    #[test]
    fn empty_stream() {
        let out = parse_checkins(&b""[..], CheckinFormat::Csv);
        assert!(out.reports.is_empty() && out.errors.is_empty());
    }

    #[test]
    fn csv_with_header_and_quoted_name() {
        let data = "user_id,venue_id,category_id,category_name,lat,lon,tz_offset_minutes,utc_timestamp\n\
7,v1,c1,\"Food, Drink\",40.5,-73.9,-300,1000\n";
        let out = parse_checkins(data.as_bytes(), CheckinFormat::Csv);
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        assert_eq!(out.reports[0].payload.as_deref(), Some("Food, Drink"));
        assert_eq!(out.reports[0].timestamp, 1000);
    }

    #[test]
    fn timestamp_format_round_trip() {
        let s = format_timestamp(1_333_476_009);
        assert_eq!(s, "Tue Apr 03 18:00:09 +0000 2012");
        assert_eq!(parse_timestamp(&s).unwrap(), 1_333_476_009);
    }
}
