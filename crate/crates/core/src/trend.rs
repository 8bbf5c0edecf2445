//! Mann-Kendall trend test, Sen's slope and the lag-1 serial-correlation
//! check, applied per `(window, hour)` across years.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use libm::erfc;

use crate::aggregate::{Scale, WindowCalendar, WindowHourPanel, HOURS};
use crate::error::{Error, Result};
use crate::ingest::check_header;

/// Two-sided significance level used to call a trend.
pub const SIGNIFICANCE: f64 = 0.05;

/// Fewest valid years a cell needs before it is tested.
pub const MIN_TREND_YEARS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    NoTrend,
}

impl Direction {
    fn classify(s: i64, p_value: f64) -> Self {
        if p_value >= SIGNIFICANCE || s == 0 {
            Direction::NoTrend
        } else if s > 0 {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MkResult {
    pub n: usize,
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    pub p_value: f64,
    pub direction: Direction,
}

impl MkResult {
    /// The no-information result for a fully tied sample.
    fn flat(n: usize) -> Self {
        MkResult {
            n,
            s: 0,
            var_s: 0.0,
            z: 0.0,
            p_value: 1.0,
            direction: Direction::NoTrend,
        }
    }
}

/// Two-sided standard normal tail probability `P(|Z| >= |z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Mann-Kendall test with tie-corrected variance and continuity correction.
pub fn mk_test(x: &[f64]) -> Result<MkResult> {
    let n = x.len();
    if n < MIN_TREND_YEARS {
        return Err(Error::SampleTooSmall {
            needed: MIN_TREND_YEARS,
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("mk_test input must be finite"));
    }

    let mut s: i64 = 0;
    for k in 0..n - 1 {
        for j in k + 1..n {
            s += match x[j].partial_cmp(&x[k]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }

    let tie_term: i64 = tie_groups(x)
        .into_iter()
        .map(|t| t * (t - 1) * (2 * t + 5))
        .sum();
    let n_i = n as i64;
    let var_num = n_i * (n_i - 1) * (2 * n_i + 5) - tie_term;
    if var_num <= 0 {
        return Err(Error::Degenerate("all values tied, Var(S) = 0".into()));
    }
    let var_s = var_num as f64 / 18.0;
    let sd = var_s.sqrt();
    let z = match s {
        0 => 0.0,
        s if s > 0 => (s - 1) as f64 / sd,
        s => (s + 1) as f64 / sd,
    };
    let p_value = two_sided_p(z);
    Ok(MkResult {
        n,
        s,
        var_s,
        z,
        p_value,
        direction: Direction::classify(s, p_value),
    })
}

/// Sizes of groups of exactly equal values (groups of one omitted).
fn tie_groups(x: &[f64]) -> Vec<i64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| g.len() as i64)
        .filter(|&t| t > 1)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenSlope {
    pub slope: f64,
    pub pair_count: usize,
}

/// Median of the pairwise slopes `(x_j - x_k) / (t_j - t_k)`, `j > k`.
pub fn sen_slope(x: &[f64], t: &[f64]) -> Result<SenSlope> {
    if x.len() != t.len() {
        return Err(Error::contract(format!(
            "sen_slope: {} values but {} times",
            x.len(),
            t.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    if t.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::contract("sen_slope: times must be strictly increasing"));
    }

    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for k in 0..n - 1 {
        for j in k + 1..n {
            let slope = (x[j] - x[k]) / (t[j] - t[k]);
            if slope.is_finite() {
                slopes.push(slope);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::Degenerate("no finite pairwise slope".into()));
    }
    let m = slopes.len();
    let (lower, &mut upper, _) = slopes.select_nth_unstable_by(m / 2, f64::total_cmp);
    let slope = if m % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().max_by(f64::total_cmp).expect("m >= 2");
        (below + upper) / 2.0
    };
    Ok(SenSlope {
        slope,
        pair_count: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerialCorrelation {
    pub r1: f64,
    /// `1.96 / sqrt(n)`.
    pub bound: f64,
    pub flagged: bool,
}

/// Mean-centred lag-1 autocorrelation with the biased (`n`) denominator.
pub fn lag1_autocorrelation(x: &[f64]) -> Result<SerialCorrelation> {
    let n = x.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: n });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::Degenerate("constant sequence has no autocorrelation".into()));
    }
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let r1 = num / denom;
    let bound = 1.96 / (n as f64).sqrt();
    Ok(SerialCorrelation {
        r1,
        bound,
        flagged: r1.abs() > bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendCell {
    pub window: usize,
    pub hour: usize,
    pub mk: MkResult,
    pub sen: SenSlope,
    pub lag1: Option<f64>,
    pub serial_corr_flag: bool,
}

/// `(window x hour)` grid of trend cells for one station and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSurface {
    station_id: String,
    calendar: WindowCalendar,
    cells: Vec<Option<TrendCell>>,
}

impl TrendSurface {
    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn scale(&self) -> Scale {
        self.calendar.scale()
    }

    pub fn calendar(&self) -> &WindowCalendar {
        &self.calendar
    }

    pub fn cell(&self, window: usize, hour: usize) -> Option<&TrendCell> {
        self.cells[window * HOURS + hour].as_ref()
    }

    pub fn present_cells(&self) -> impl Iterator<Item = &TrendCell> {
        self.cells.iter().flatten()
    }

    /// The 24 Sen slopes of one window; `None` if any hour is absent.
    pub fn slope_curve(&self, window: usize) -> Option<Vec<f64>> {
        (0..HOURS)
            .map(|h| self.cell(window, h).map(|c| c.sen.slope))
            .collect()
    }
}

/// Trend statistics for one year-series. A fully tied series yields
/// `S = 0, p = 1` rather than an error.
pub fn trend_cell(window: usize, hour: usize, years: &[(i32, f64)]) -> Result<TrendCell> {
    let x: Vec<f64> = years.iter().map(|r| r.1).collect();
    let t: Vec<f64> = years.iter().map(|r| f64::from(r.0)).collect();
    let mk = match mk_test(&x) {
        Ok(mk) => mk,
        Err(Error::Degenerate(_)) => MkResult::flat(x.len()),
        Err(e) => return Err(e),
    };
    let sen = sen_slope(&x, &t)?;
    let (lag1, serial_corr_flag) = match lag1_autocorrelation(&x) {
        Ok(sc) => (Some(sc.r1), sc.flagged),
        Err(_) => (None, false),
    };
    Ok(TrendCell {
        window,
        hour,
        mk,
        sen,
        lag1,
        serial_corr_flag,
    })
}

/// One cell per `(window, hour)` with at least [`MIN_TREND_YEARS`] valid years.
pub fn trend_surface(panel: &WindowHourPanel) -> TrendSurface {
    let windows = panel.window_count();
    let cells = (0..windows * HOURS)
        .map(|i| {
            let (w, h) = (i / HOURS, i % HOURS);
            let years = panel.year_series(w, h).ok()?;
            if years.len() < MIN_TREND_YEARS {
                return None;
            }
            trend_cell(w, h, &years).ok()
        })
        .collect();
    TrendSurface {
        station_id: panel.station_id().to_string(),
        calendar: panel.calendar().clone(),
        cells,
    }
}

pub const TREND_HEADER: [&str; 12] = [
    "station_id",
    "scale",
    "window_label",
    "hour",
    "n",
    "S",
    "var_S",
    "z",
    "p_value",
    "sen_slope",
    "lag1",
    "serial_flag",
];

/// Writes present cells only, in `(window, hour)` order per surface.
pub fn write_trends<'a, W: Write>(
    writer: W,
    surfaces: impl IntoIterator<Item = &'a TrendSurface>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TREND_HEADER)?;
    for surf in surfaces {
        for c in surf.present_cells() {
            wtr.write_record([
                surf.station_id(),
                surf.scale().token(),
                surf.calendar.label(c.window),
                &c.hour.to_string(),
                &c.mk.n.to_string(),
                &c.mk.s.to_string(),
                &c.mk.var_s.to_string(),
                &c.mk.z.to_string(),
                &c.mk.p_value.to_string(),
                &c.sen.slope.to_string(),
                &c.lag1.map(|r| r.to_string()).unwrap_or_default(),
                if c.serial_corr_flag { "true" } else { "false" },
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<trend>", e))?;
    Ok(())
}

/// Reads a trend export, one surface per `(station, scale)`, sorted.
pub fn read_trends<R: Read>(reader: R) -> Result<Vec<TrendSurface>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &TREND_HEADER)?;

    let mut surfaces: BTreeMap<(String, Scale), TrendSurface> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} in trend row"),
        };
        let num = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| bad(TREND_HEADER[i]))
        };
        let scale: Scale = record[1].parse().map_err(|_| bad("scale"))?;
        let surf = surfaces
            .entry((record[0].to_string(), scale))
            .or_insert_with(|| {
                let calendar = WindowCalendar::build(scale);
                TrendSurface {
                    station_id: record[0].to_string(),
                    cells: vec![None; calendar.len() * HOURS],
                    calendar,
                }
            });
        let window = surf.calendar.index_of(&record[2]).ok_or_else(|| bad("window_label"))?;
        let hour: usize = record[3].parse().map_err(|_| bad("hour"))?;
        if hour >= HOURS {
            return Err(bad("hour"));
        }
        let n: usize = record[4].parse().map_err(|_| bad("n"))?;
        let s: i64 = record[5].parse().map_err(|_| bad("S"))?;
        let p_value = num(8)?;
        let lag1 = match &record[10] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|_| bad("lag1"))?),
        };
        surf.cells[window * HOURS + hour] = Some(TrendCell {
            window,
            hour,
            mk: MkResult {
                n,
                s,
                var_s: num(6)?,
                z: num(7)?,
                p_value,
                direction: Direction::classify(s, p_value),
            },
            sen: SenSlope {
                slope: num(9)?,
                pair_count: n * n.saturating_sub(1) / 2,
            },
            lag1,
            serial_corr_flag: &record[11] == "true",
        });
    }
    Ok(surfaces.into_values().collect())
}
