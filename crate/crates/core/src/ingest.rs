//! Station metadata and temperature record ingestion.
//!
//! Records arrive as `station_id,timestamp,temp_c` rows. Each station is laid
//! onto a dense index `start + k * step`; slots without a reading are kept and
//! masked rather than dropped.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeDelta, Timelike, Utc};

use crate::error::{Error, Result};

pub const RECORDS_HEADER: [&str; 3] = ["station_id", "timestamp", "temp_c"];
pub const METADATA_HEADER: [&str; 7] = [
    "station_id",
    "name",
    "group",
    "region",
    "latitude",
    "longitude",
    "altitude_m",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Ukh,
    Ukl,
    Ih,
    Il,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Ih, Group::Il, Group::Ukh, Group::Ukl];

    pub fn code(self) -> &'static str {
        match self {
            Group::Ukh => "UKH",
            Group::Ukl => "UKL",
            Group::Ih => "IH",
            Group::Il => "IL",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UKH" => Ok(Group::Ukh),
            "UKL" => Ok(Group::Ukl),
            "IH" => Ok(Group::Ih),
            "IL" => Ok(Group::Il),
            other => Err(Error::contract(format!("unknown station group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Uk,
    Piemonte,
    ValleDAosta,
}

impl Region {
    pub fn code(self) -> &'static str {
        match self {
            Region::Uk => "UK",
            Region::Piemonte => "Piemonte",
            Region::ValleDAosta => "ValleDAosta",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "uk" => Ok(Region::Uk),
            "piemonte" => Ok(Region::Piemonte),
            "valledaosta" => Ok(Region::ValleDAosta),
            _ => Err(Error::contract(format!("unknown region {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationMeta {
    pub station_id: String,
    pub name: String,
    pub group: Group,
    pub region: Region,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_m: f64,
}

impl StationMeta {
    pub fn validate(&self) -> Result<()> {
        if self.station_id.is_empty() || !self.station_id.is_ascii() {
            return Err(Error::contract(format!(
                "station id {:?} must be non-empty ASCII",
                self.station_id
            )));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::contract(format!(
                "{}: latitude {} outside [-90, 90]",
                self.station_id, self.latitude
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::contract(format!(
                "{}: longitude {} outside [-180, 180]",
                self.station_id, self.longitude
            )));
        }
        if self.altitude_m.is_nan() || self.altitude_m < 0.0 {
            return Err(Error::contract(format!(
                "{}: altitude {} is negative",
                self.station_id, self.altitude_m
            )));
        }
        let uk_group = matches!(self.group, Group::Ukh | Group::Ukl);
        if uk_group != (self.region == Region::Uk) {
            return Err(Error::contract(format!(
                "{}: group {} is inconsistent with region {}",
                self.station_id, self.group, self.region
            )));
        }
        Ok(())
    }
}

/// Parses a metadata CSV and checks every station plus id uniqueness.
pub fn parse_metadata<R: Read>(reader: R) -> Result<Vec<StationMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &METADATA_HEADER)?;

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad {} value {:?}", METADATA_HEADER[i], field(i)),
            })
        };
        let meta = StationMeta {
            station_id: field(0).to_string(),
            name: field(1).to_string(),
            group: field(2).parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            region: field(3).parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            latitude: number(4)?,
            longitude: number(5)?,
            altitude_m: number(6)?,
        };
        meta.validate()?;
        if !seen.insert(meta.station_id.clone()) {
            return Err(Error::contract(format!(
                "station id {} appears twice in metadata",
                meta.station_id
            )));
        }
        out.push(meta);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn write_metadata<W: Write>(writer: W, stations: &[StationMeta]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(METADATA_HEADER)?;
    for s in stations {
        wtr.write_record([
            s.station_id.clone(),
            s.name.clone(),
            s.group.to_string(),
            s.region.to_string(),
            s.latitude.to_string(),
            s.longitude.to_string(),
            s.altitude_m.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<metadata>", e))?;
    Ok(())
}

pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = found.len() == expected.len()
        && found.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}

/// One station's readings on a dense, fixed-step index.
///
/// Missing slots hold `NaN` in `values` and `true` in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSeries {
    station_id: String,
    start: DateTime<Utc>,
    step: TimeDelta,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl TemperatureSeries {
    /// Builds a series from optional readings; `None` marks a missing slot.
    pub fn from_options(
        station_id: impl Into<String>,
        start: DateTime<Utc>,
        step: TimeDelta,
        readings: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self> {
        if step <= TimeDelta::zero() {
            return Err(Error::contract("series step must be positive"));
        }
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for r in readings {
            match r {
                Some(v) if v.is_finite() => {
                    values.push(v);
                    missing.push(false);
                }
                Some(v) => {
                    return Err(Error::contract(format!(
                        "non-finite reading {v} at slot {}",
                        values.len()
                    )))
                }
                None => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        Ok(TemperatureSeries {
            station_id: station_id.into(),
            start,
            step,
            values,
            missing,
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step(&self) -> TimeDelta {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn timestamp(&self, k: usize) -> DateTime<Utc> {
        self.start + self.step * k as i32
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        (!self.missing[k]).then(|| self.values[k])
    }

    /// `(timestamp, reading)` for every slot, missing ones as `None`.
    pub fn iter(&self) -> impl Iterator<Item = (DateTime<Utc>, Option<f64>)> + '_ {
        (0..self.len()).map(move |k| (self.timestamp(k), self.get(k)))
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        (!self.is_empty()).then(|| self.timestamp(self.len() - 1))
    }
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.strip_suffix('Z').unwrap_or(s);
    NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

struct RawRow {
    line: u64,
    ts: DateTime<Utc>,
    value: Option<f64>,
}

/// Parses the records of a single station onto a dense `expected_step` index.
///
/// Fails if the stream holds more than one station id.
pub fn parse_records<R: Read>(reader: R, expected_step: TimeDelta) -> Result<TemperatureSeries> {
    let mut by_station = parse_records_by_station(reader, expected_step)?;
    if by_station.len() > 1 {
        return Err(Error::contract(format!(
            "expected one station, found {}",
            by_station.len()
        )));
    }
    let (_, series) = by_station.pop_first().ok_or(Error::EmptyInput)?;
    Ok(series)
}

/// Parses a records stream that may interleave several stations.
pub fn parse_records_by_station<R: Read>(
    reader: R,
    expected_step: TimeDelta,
) -> Result<BTreeMap<String, TemperatureSeries>> {
    if expected_step <= TimeDelta::zero() || TimeDelta::days(1).num_seconds() % expected_step.num_seconds() != 0 {
        return Err(Error::contract(format!(
            "step of {expected_step} does not divide a day"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &RECORDS_HEADER)?;

    let mut rows: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => Error::Parse {
                line: p.line(),
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let station = record.get(0).unwrap_or("");
        if station.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty station_id".into(),
            });
        }
        let raw_ts = record.get(1).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed timestamp {raw_ts:?}"),
        })?;
        let raw_value = record.get(2).unwrap_or("");
        let value = if raw_value.is_empty() {
            None
        } else {
            match raw_value.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("malformed temperature {raw_value:?}"),
                    })
                }
            }
        };
        rows.entry(station.to_string())
            .or_default()
            .push(RawRow { line, ts, value });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    rows.into_iter()
        .map(|(station, rows)| {
            let series = densify(&station, rows, expected_step)?;
            Ok((station, series))
        })
        .collect()
}

fn densify(station: &str, mut rows: Vec<RawRow>, step: TimeDelta) -> Result<TemperatureSeries> {
    rows.sort_by_key(|r| (r.ts, r.line));
    let step_s = step.num_seconds();
    for r in &rows {
        if r.ts.timestamp().rem_euclid(step_s) != 0 || r.ts.nanosecond() != 0 {
            return Err(Error::Parse {
                line: r.line,
                message: format!(
                    "timestamp {} is not aligned to a {}-minute grid",
                    format_timestamp(r.ts),
                    step.num_minutes()
                ),
            });
        }
    }
    for pair in rows.windows(2) {
        if pair[0].ts == pair[1].ts {
            return Err(Error::Duplicate {
                line: pair[1].line,
                station_id: station.to_string(),
                timestamp: format_timestamp(pair[1].ts),
            });
        }
    }
    let start = rows[0].ts;
    let last = rows[rows.len() - 1].ts;
    let len = ((last - start).num_seconds() / step_s) as usize + 1;
    let mut slots = vec![None; len];
    for r in rows {
        let k = ((r.ts - start).num_seconds() / step_s) as usize;
        slots[k] = r.value;
    }
    TemperatureSeries::from_options(station, start, step, slots)
}

/// Writes series as records CSV. Missing slots are written with an empty
/// `temp_c`; stations appear in the order given.
pub fn write_records<'a, W: Write>(
    writer: W,
    series: impl IntoIterator<Item = &'a TemperatureSeries>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RECORDS_HEADER)?;
    for s in series {
        for (ts, v) in s.iter() {
            let value = v.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record([s.station_id(), &format_timestamp(ts), &value])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

/// Averages a half-hourly series into hourly means.
///
/// The pair `(H:00, H:30)` lands on hour `H`. An hour with one observed half
/// takes that value; an hour with neither is missing.
pub fn to_hourly(series: &TemperatureSeries) -> Result<TemperatureSeries> {
    if series.step() != TimeDelta::minutes(30) {
        return Err(Error::contract(format!(
            "to_hourly needs a 30-minute series, got a {}-minute step",
            series.step().num_minutes()
        )));
    }
    let start = series
        .start()
        .with_minute(0)
        .and_then(|t| t.with_second(0))
        .expect("minute 0 is always valid");
    let offset = usize::from(series.start() != start);
    let hours = (series.len() + offset).div_ceil(2);
    let mut sum = vec![0.0; hours];
    let mut count = vec![0u8; hours];
    for k in 0..series.len() {
        if let Some(v) = series.get(k) {
            let h = (k + offset) / 2;
            sum[h] += v;
            count[h] += 1;
        }
    }
    let readings = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / f64::from(c)));
    TemperatureSeries::from_options(series.station_id(), start, TimeDelta::hours(1), readings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingReport {
    pub station_id: String,
    pub total_slots: usize,
    pub missing_slots: usize,
    pub missing_pct: f64,
}

impl MissingReport {
    fn new(station_id: &str, total_slots: usize, missing_slots: usize) -> Self {
        MissingReport {
            station_id: station_id.to_string(),
            total_slots,
            missing_slots,
            missing_pct: 100.0 * missing_slots as f64 / total_slots as f64,
        }
    }
}

/// Missing percentage over the series' own span.
pub fn missing_report(series: &TemperatureSeries) -> Result<MissingReport> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(MissingReport::new(
        series.station_id(),
        series.len(),
        series.missing_count(),
    ))
}

/// Missing percentage over the fixed period `[from, until)`; slots of the
/// period not covered by the series count as missing.
pub fn missing_report_over(
    series: &TemperatureSeries,
    from: DateTime<Utc>,
    until: DateTime<Utc>,
) -> Result<MissingReport> {
    let step_s = series.step().num_seconds();
    let span_s = (until - from).num_seconds();
    if span_s <= 0 || span_s % step_s != 0 {
        return Err(Error::contract(format!(
            "span {}..{} is empty or not a whole number of steps",
            format_timestamp(from),
            format_timestamp(until)
        )));
    }
    let total = (span_s / step_s) as usize;
    let present = series
        .iter()
        .filter(|(ts, v)| v.is_some() && *ts >= from && *ts < until)
        .count();
    Ok(MissingReport::new(series.station_id(), total, total - present))
}

pub const MISSING_HEADER: [&str; 4] = ["station_id", "total_slots", "missing_slots", "missing_pct"];

pub fn write_missing_reports<W: Write>(writer: W, reports: &[MissingReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(MISSING_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.station_id.clone(),
            r.total_slots.to_string(),
            r.missing_slots.to_string(),
            format!("{:.2}", r.missing_pct),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<missing>", e))?;
    Ok(())
}
