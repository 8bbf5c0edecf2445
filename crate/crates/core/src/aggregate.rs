//! Hour-of-day mean temperature panels over 10-, 30- and 60-day windows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Timelike};

use crate::error::{Error, Result};
use crate::ingest::{check_header, TemperatureSeries};

pub const HOURS: usize = 24;

pub(crate) const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scale {
    /// Each month split into days 1-10, 11-20 and 21 to month end.
    Day10,
    /// Calendar months.
    Day30,
    /// Jan-Feb, Mar-Apr, ..., Nov-Dec.
    Day60A,
    /// Dec-Jan, Feb-Mar, ..., Oct-Nov.
    Day60B,
}

impl Scale {
    pub const ALL: [Scale; 4] = [Scale::Day10, Scale::Day30, Scale::Day60A, Scale::Day60B];

    pub fn token(self) -> &'static str {
        match self {
            Scale::Day10 => "10d",
            Scale::Day30 => "30d",
            Scale::Day60A => "60da",
            Scale::Day60B => "60db",
        }
    }

    pub fn window_count(self) -> usize {
        match self {
            Scale::Day10 => 36,
            Scale::Day30 => 12,
            Scale::Day60A | Scale::Day60B => 6,
        }
    }

    /// The `(year label, window index)` a calendar date falls in.
    ///
    /// Under [`Scale::Day60B`] January belongs to the previous year's
    /// December-January window.
    pub fn locate(self, date: NaiveDate) -> (i32, usize) {
        let m0 = date.month0() as usize;
        let year = date.year();
        match self {
            Scale::Day10 => {
                let third = match date.day() {
                    1..=10 => 0,
                    11..=20 => 1,
                    _ => 2,
                };
                (year, m0 * 3 + third)
            }
            Scale::Day30 => (year, m0),
            Scale::Day60A => (year, m0 / 2),
            Scale::Day60B => {
                let label = if m0 == 0 { year - 1 } else { year };
                (label, m0.div_ceil(2) % 6)
            }
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scale::ALL
            .into_iter()
            .find(|sc| sc.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::contract(format!("unknown scale {s:?} (expected 10d, 30d, 60da or 60db)"))
            })
    }
}

/// Days `first..=last` of a month; `last == None` runs to the month's end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayRange {
    pub month: u32,
    pub first: u32,
    pub last: Option<u32>,
}

impl DayRange {
    fn whole(month: u32) -> Self {
        DayRange {
            month,
            first: 1,
            last: None,
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date.month() == self.month
            && date.day() >= self.first
            && self.last.is_none_or(|l| date.day() <= l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub label: String,
    pub days: Vec<DayRange>,
}

impl Window {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.days.iter().any(|r| r.contains(date))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowCalendar {
    scale: Scale,
    windows: Vec<Window>,
}

impl WindowCalendar {
    pub fn build(scale: Scale) -> Self {
        let windows = match scale {
            Scale::Day10 => (1..=12u32)
                .flat_map(|m| {
                    let name = MONTH_NAMES[m as usize - 1];
                    [(1, Some(10), "1-10"), (11, Some(20), "11-20"), (21, None, "21-end")]
                        .into_iter()
                        .map(move |(first, last, tag)| Window {
                            label: format!("{name}:{tag}"),
                            days: vec![DayRange { month: m, first, last }],
                        })
                })
                .collect(),
            Scale::Day30 => (1..=12u32)
                .map(|m| Window {
                    label: MONTH_NAMES[m as usize - 1].to_string(),
                    days: vec![DayRange::whole(m)],
                })
                .collect(),
            Scale::Day60A => (0..6u32).map(|i| pair_window(2 * i + 1, 2 * i + 2)).collect(),
            Scale::Day60B => std::iter::once(pair_window(12, 1))
                .chain((1..6u32).map(|i| pair_window(2 * i, 2 * i + 1)))
                .collect(),
        };
        WindowCalendar { scale, windows }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn label(&self, w: usize) -> &str {
        &self.windows[w].label
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.windows.iter().position(|w| w.label == label)
    }
}

fn pair_window(a: u32, b: u32) -> Window {
    Window {
        label: format!("{}-{}", MONTH_NAMES[a as usize - 1], MONTH_NAMES[b as usize - 1]),
        days: vec![DayRange::whole(a), DayRange::whole(b)],
    }
}

/// Per-station grid of mean temperature by `(year, window, hour)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowHourPanel {
    station_id: String,
    calendar: WindowCalendar,
    years: Vec<i32>,
    means: Vec<Option<f64>>,
    /// Contributing readings per cell; unknown for panels read back from CSV.
    counts: Option<Vec<u32>>,
}

impl WindowHourPanel {
    fn offset(&self, year_idx: usize, window: usize, hour: usize) -> usize {
        (year_idx * self.calendar.len() + window) * HOURS + hour
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn calendar(&self) -> &WindowCalendar {
        &self.calendar
    }

    pub fn scale(&self) -> Scale {
        self.calendar.scale
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn window_count(&self) -> usize {
        self.calendar.len()
    }

    pub fn mean(&self, year_idx: usize, window: usize, hour: usize) -> Option<f64> {
        self.means[self.offset(year_idx, window, hour)]
    }

    pub fn count(&self, year_idx: usize, window: usize, hour: usize) -> Option<u32> {
        let i = self.offset(year_idx, window, hour);
        self.counts.as_ref().map(|c| c[i])
    }

    /// Valid `(year, mean)` pairs of one `(window, hour)` cell, in year order.
    pub fn year_series(&self, window: usize, hour: usize) -> Result<Vec<(i32, f64)>> {
        if window >= self.window_count() || hour >= HOURS {
            return Err(Error::contract(format!(
                "cell ({window}, {hour}) outside a {}x{HOURS} panel",
                self.window_count()
            )));
        }
        Ok(self
            .years
            .iter()
            .enumerate()
            .filter_map(|(yi, &y)| self.mean(yi, window, hour).map(|m| (y, m)))
            .collect())
    }

    /// Mean over valid years of each hour in `window`.
    pub fn hourly_climatology(&self, window: usize) -> [Option<f64>; HOURS] {
        std::array::from_fn(|h| {
            let vals: Vec<f64> = (0..self.years.len())
                .filter_map(|yi| self.mean(yi, window, h))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
    }
}

/// Averages every reading into its `(year, window, hour)` cell.
///
/// Masked slots are skipped, so a raw series yields invalid cells where a
/// window-hour has no observed reading.
pub fn hourly_window_means(
    series: &TemperatureSeries,
    calendar: &WindowCalendar,
) -> Result<WindowHourPanel> {
    let scale = calendar.scale();
    let located: Vec<(i32, usize, usize, f64)> = series
        .iter()
        .filter_map(|(ts, v)| {
            v.map(|v| {
                let (year, w) = scale.locate(ts.date_naive());
                (year, w, ts.hour() as usize, v)
            })
        })
        .collect();
    let (Some(lo), Some(hi)) = (
        located.iter().map(|r| r.0).min(),
        located.iter().map(|r| r.0).max(),
    ) else {
        return Err(Error::EmptyPanel);
    };

    let years: Vec<i32> = (lo..=hi).collect();
    let cells = years.len() * calendar.len() * HOURS;
    let mut sums = vec![0.0; cells];
    let mut counts = vec![0u32; cells];
    for (year, w, h, v) in located {
        let i = (((year - lo) as usize) * calendar.len() + w) * HOURS + h;
        sums[i] += v;
        counts[i] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / f64::from(c)))
        .collect();
    Ok(WindowHourPanel {
        station_id: series.station_id().to_string(),
        calendar: calendar.clone(),
        years,
        means,
        counts: Some(counts),
    })
}

pub const PANEL_HEADER: [&str; 7] = [
    "station_id",
    "scale",
    "year",
    "window_label",
    "hour",
    "mean_temp",
    "valid",
];

pub fn write_panels<'a, W: Write>(
    writer: W,
    panels: impl IntoIterator<Item = &'a WindowHourPanel>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PANEL_HEADER)?;
    for p in panels {
        for (yi, year) in p.years.iter().enumerate() {
            for w in 0..p.window_count() {
                for h in 0..HOURS {
                    let m = p.mean(yi, w, h);
                    wtr.write_record([
                        p.station_id(),
                        p.scale().token(),
                        &year.to_string(),
                        p.calendar.label(w),
                        &h.to_string(),
                        &m.map(|v| v.to_string()).unwrap_or_default(),
                        if m.is_some() { "true" } else { "false" },
                    ])?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<panel>", e))?;
    Ok(())
}

/// Reads a panel export back, one panel per `(station, scale)`, sorted.
pub fn read_panels<R: Read>(reader: R) -> Result<Vec<WindowHourPanel>> {
    type Key = (String, Scale);
    type Cells = BTreeMap<(i32, usize, usize), Option<f64>>;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &PANEL_HEADER)?;

    let mut cells: BTreeMap<Key, Cells> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} in panel row"),
        };
        let scale: Scale = record[1].parse().map_err(|_| bad("scale"))?;
        let calendar = WindowCalendar::build(scale);
        let year: i32 = record[2].parse().map_err(|_| bad("year"))?;
        let w = calendar.index_of(&record[3]).ok_or_else(|| bad("window_label"))?;
        let h: usize = record[4].parse().map_err(|_| bad("hour"))?;
        if h >= HOURS {
            return Err(bad("hour"));
        }
        let valid = match &record[6] {
            "true" => true,
            "false" => false,
            _ => return Err(bad("valid flag")),
        };
        let mean = if valid {
            Some(record[5].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("mean_temp"))?)
        } else {
            None
        };
        cells
            .entry((record[0].to_string(), scale))
            .or_default()
            .insert((year, w, h), mean);
    }

    cells
        .into_iter()
        .map(|((station_id, scale), grid)| {
            let calendar = WindowCalendar::build(scale);
            let lo = grid.keys().map(|k| k.0).min().ok_or(Error::EmptyPanel)?;
            let hi = grid.keys().map(|k| k.0).max().ok_or(Error::EmptyPanel)?;
            let years: Vec<i32> = (lo..=hi).collect();
            let mut means = vec![None; years.len() * calendar.len() * HOURS];
            for ((y, w, h), m) in grid {
                means[(((y - lo) as usize) * calendar.len() + w) * HOURS + h] = m;
            }
            Ok(WindowHourPanel {
                station_id,
                calendar,
                years,
                means,
                counts: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeDelta, TimeZone, Utc};

    fn hourly_series(start: chrono::DateTime<Utc>, hours: usize, f: impl Fn(usize) -> Option<f64>) -> TemperatureSeries {
        TemperatureSeries::from_options("S", start, TimeDelta::hours(1), (0..hours).map(f)).unwrap()
    }

    #[test]
    fn window_counts() {
        for scale in Scale::ALL {
            assert_eq!(WindowCalendar::build(scale).len(), scale.window_count());
        }
    }

    #[test]
    fn february_third_group_runs_to_month_end() {
        let cal = WindowCalendar::build(Scale::Day10);
        let w = cal.index_of("Feb:21-end").unwrap();
        let nonleap = NaiveDate::from_ymd_opt(2003, 2, 28).unwrap();
        assert!(cal.windows()[w].contains(nonleap));
        assert_eq!(Scale::Day10.locate(nonleap), (2003, w));
        let leap = NaiveDate::from_ymd_opt(2004, 2, 29).unwrap();
        assert_eq!(Scale::Day10.locate(leap), (2004, w));
    }

    #[test]
    fn month_labels() {
        let cal = WindowCalendar::build(Scale::Day30);
        let labels: Vec<&str> = cal.windows().iter().map(|w| w.label.as_str()).collect();
        assert_eq!(labels, MONTH_NAMES);
    }

    #[test]
    fn dec_jan_window_spans_years() {
        let cal = WindowCalendar::build(Scale::Day60B);
        assert_eq!(cal.label(0), "Dec-Jan");
        assert_eq!(cal.label(1), "Feb-Mar");
        assert_eq!(cal.label(5), "Oct-Nov");
        assert_eq!(Scale::Day60B.locate(NaiveDate::from_ymd_opt(2002, 12, 31).unwrap()), (2002, 0));
        assert_eq!(Scale::Day60B.locate(NaiveDate::from_ymd_opt(2003, 1, 1).unwrap()), (2002, 0));
        assert_eq!(Scale::Day60B.locate(NaiveDate::from_ymd_opt(2003, 2, 1).unwrap()), (2003, 1));
        let a = WindowCalendar::build(Scale::Day60A);
        assert_eq!(a.label(0), "Jan-Feb");
        assert_eq!(a.label(5), "Nov-Dec");
    }

    #[test]
    fn constant_series_gives_constant_cells() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        let s = hourly_series(start, 24 * 400, |_| Some(5.0));
        for scale in Scale::ALL {
            let p = hourly_window_means(&s, &WindowCalendar::build(scale)).unwrap();
            for yi in 0..p.years().len() {
                for w in 0..p.window_count() {
                    for h in 0..HOURS {
                        if let Some(m) = p.mean(yi, w, h) {
                            assert_eq!(m, 5.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn two_point_mean() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        // Two days; hour 0 readings 4.0 and 6.0, others missing.
        let s = hourly_series(start, 48, |k| match k {
            0 => Some(4.0),
            24 => Some(6.0),
            _ => None,
        });
        let p = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap();
        assert_eq!(p.mean(0, 0, 0), Some(5.0));
        assert_eq!(p.count(0, 0, 0), Some(2));
        assert_eq!(p.mean(0, 0, 1), None);
    }

    #[test]
    fn diurnal_sine_recovered_at_hour_six() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        let gen = |h: usize| 10.0 + 5.0 * (2.0 * std::f64::consts::PI * h as f64 / 24.0).sin();
        // Closed form at hour 6: sin(pi/2) = 1.
        assert!((gen(6) - 15.0).abs() < 1e-12);
        let s = hourly_series(start, 24 * 365 * 2, |k| Some(gen(k % 24)));
        for scale in Scale::ALL {
            let p = hourly_window_means(&s, &WindowCalendar::build(scale)).unwrap();
            for w in 0..p.window_count() {
                for (_, m) in p.year_series(w, 6).unwrap() {
                    assert!((m - 15.0).abs() < 1e-9, "{scale} window {w}: {m}");
                }
            }
        }
    }

    #[test]
    fn year_series_filters_invalid_years() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        let hours_3y = 24 * (365 * 3 + 1);
        // Drop every reading in January 2003.
        let s = hourly_series(start, hours_3y, |k| {
            let ts = start + TimeDelta::hours(k as i64);
            (!(ts.year() == 2003 && ts.month() == 1)).then_some(1.0)
        });
        let p = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap();
        let jan = p.year_series(0, 0).unwrap();
        assert_eq!(jan.iter().map(|r| r.0).collect::<Vec<_>>(), vec![2002, 2004]);
        assert_eq!(p.year_series(1, 0).unwrap().len(), 3);
        assert!(p.year_series(12, 0).is_err());
    }

    #[test]
    fn all_missing_is_empty_panel() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        let s = hourly_series(start, 10, |_| None);
        let err = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap_err();
        assert!(matches!(err, Error::EmptyPanel));
    }

    #[test]
    fn ten_day_cells_roll_up_to_months() {
        let start = Utc.with_ymd_and_hms(2003, 1, 1, 0, 0, 0).unwrap();
        let s = hourly_series(start, 24 * 366 * 2, |k| {
            let x = k as f64;
            (k % 97 != 0).then(|| (x * 0.37).sin() * 8.0 + x * 1e-4)
        });
        let d10 = hourly_window_means(&s, &WindowCalendar::build(Scale::Day10)).unwrap();
        let d30 = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap();
        assert_eq!(d10.years(), d30.years());
        for yi in 0..d30.years().len() {
            for m in 0..12 {
                for h in 0..HOURS {
                    let (mut num, mut den) = (0.0, 0u32);
                    for t in 0..3 {
                        if let Some(v) = d10.mean(yi, m * 3 + t, h) {
                            let c = d10.count(yi, m * 3 + t, h).unwrap();
                            num += v * f64::from(c);
                            den += c;
                        }
                    }
                    match d30.mean(yi, m, h) {
                        Some(v) => assert!((v - num / f64::from(den)).abs() < 1e-9),
                        None => assert_eq!(den, 0),
                    }
                }
            }
        }
    }

    #[test]
    fn panel_csv_round_trip() {
        let start = Utc.with_ymd_and_hms(2002, 1, 1, 0, 0, 0).unwrap();
        let s = hourly_series(start, 24 * 90, |k| (k % 5 != 0).then_some(k as f64 * 0.25));
        let p = hourly_window_means(&s, &WindowCalendar::build(Scale::Day10)).unwrap();
        let mut buf = Vec::new();
        write_panels(&mut buf, [&p]).unwrap();
        let back = read_panels(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].means, p.means);
        assert_eq!(back[0].years, p.years);
    }
}
