//! Plot-ready outputs: banded contour grids, the monthly cluster table and
//! per-region silhouette averages for radar charts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use crate::aggregate::{Scale, WindowCalendar};
use crate::error::{Error, Result};
use crate::ingest::{check_header, Group, Region, StationMeta};
use crate::similarity::ClusterReport;
use crate::trend::TrendSurface;

/// Slope bands in °C/yr, left-open and right-closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlopeBand {
    /// (-1.0, -0.03]
    StrongCooling,
    /// (-0.03, 0.0]
    Cooling,
    /// (0.0, 0.03]
    Warming,
    /// (0.03, 1.0]
    StrongWarming,
}

impl SlopeBand {
    /// Slopes beyond ±1 fall into the outer bands.
    pub fn of(slope: f64) -> Self {
        if slope <= -0.03 {
            SlopeBand::StrongCooling
        } else if slope <= 0.0 {
            SlopeBand::Cooling
        } else if slope <= 0.03 {
            SlopeBand::Warming
        } else {
            SlopeBand::StrongWarming
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SlopeBand::StrongCooling => "(-1.0,-0.03]",
            SlopeBand::Cooling => "(-0.03,0.0]",
            SlopeBand::Warming => "(0.0,0.03]",
            SlopeBand::StrongWarming => "(0.03,1.0]",
        }
    }
}

impl fmt::Display for SlopeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// p-value bands, left-open and right-closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PBand {
    /// (0.001, 0.05]; smaller p-values are folded in here.
    Significant,
    /// (0.05, 0.10]
    Marginal,
    /// (0.10, 1]
    NotSignificant,
}

impl PBand {
    pub fn of(p: f64) -> Self {
        if p <= 0.05 {
            PBand::Significant
        } else if p <= 0.10 {
            PBand::Marginal
        } else {
            PBand::NotSignificant
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PBand::Significant => "(0.001,0.05]",
            PBand::Marginal => "(0.05,0.10]",
            PBand::NotSignificant => "(0.10,1]",
        }
    }
}

impl fmt::Display for PBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn bin_cell(slope: f64, p: f64) -> (SlopeBand, PBand) {
    (SlopeBand::of(slope), PBand::of(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourCell {
    pub window: usize,
    pub hour: usize,
    pub sen_slope: f64,
    pub p_value: f64,
    pub slope_band: SlopeBand,
    pub p_band: PBand,
}

/// Banded `(window x hour)` grid for one station and scale. Absent trend
/// cells are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub station_id: String,
    pub calendar: WindowCalendar,
    pub cells: Vec<ContourCell>,
}

impl ContourGrid {
    pub fn scale(&self) -> Scale {
        self.calendar.scale()
    }
}

pub fn contour_grid(surface: &TrendSurface) -> ContourGrid {
    let cells = surface
        .present_cells()
        .map(|c| {
            let (slope_band, p_band) = bin_cell(c.sen.slope, c.mk.p_value);
            ContourCell {
                window: c.window,
                hour: c.hour,
                sen_slope: c.sen.slope,
                p_value: c.mk.p_value,
                slope_band,
                p_band,
            }
        })
        .collect();
    ContourGrid {
        station_id: surface.station_id().to_string(),
        calendar: surface.calendar().clone(),
        cells,
    }
}

pub const CONTOUR_HEADER: [&str; 8] = [
    "station_id",
    "scale",
    "window_label",
    "hour",
    "sen_slope",
    "p_value",
    "slope_band",
    "p_band",
];

pub fn write_contours<'a, W: Write>(
    writer: W,
    grids: impl IntoIterator<Item = &'a ContourGrid>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CONTOUR_HEADER)?;
    for g in grids {
        for c in &g.cells {
            wtr.write_record([
                g.station_id.as_str(),
                g.scale().token(),
                g.calendar.label(c.window),
                &c.hour.to_string(),
                &c.sen_slope.to_string(),
                &c.p_value.to_string(),
                c.slope_band.label(),
                c.p_band.label(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<contour>", e))?;
    Ok(())
}

/// One station's cluster membership in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub station_id: String,
    /// 0-based cluster id.
    pub cluster: usize,
    pub silhouette: f64,
}

impl ClusterReport {
    pub fn memberships(&self) -> Vec<Membership> {
        self.rows()
            .into_iter()
            .map(|(label, cluster, silhouette)| Membership {
                station_id: label.to_string(),
                cluster,
                silhouette,
            })
            .collect()
    }
}

/// Reads a `station_id,cluster_id,silhouette` file (1-based cluster ids).
pub fn read_assignments<R: Read>(reader: R) -> Result<Vec<Membership>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &crate::similarity::ASSIGNMENT_HEADER)?;
    rdr.records()
        .map(|record| {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("bad {what} in cluster row"),
            };
            let cluster: usize = record[1].parse().map_err(|_| bad("cluster_id"))?;
            Ok(Membership {
                station_id: record[0].to_string(),
                cluster: cluster.checked_sub(1).ok_or_else(|| bad("cluster_id"))?,
                silhouette: record[2].parse().map_err(|_| bad("silhouette"))?,
            })
        })
        .collect()
}

pub fn roman(n: usize) -> String {
    const DIGITS: [(usize, &str); 9] = [
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut n = n;
    let mut out = String::new();
    for (value, digits) in DIGITS {
        while n >= value {
            out.push_str(digits);
            n -= value;
        }
    }
    out
}

fn meta_index(meta: &[StationMeta]) -> HashMap<&str, &StationMeta> {
    meta.iter().map(|m| (m.station_id.as_str(), m)).collect()
}

/// Tab-separated month-by-group cluster table.
///
/// Columns are `month, group, Cluster I .. Cluster K, S_score`; each cell
/// lists the group's stations in that cluster, sorted and comma-separated.
/// `S_score` is the month's mean silhouette to two decimals.
pub fn cluster_table(
    monthly: &BTreeMap<String, Vec<Membership>>,
    meta: &[StationMeta],
) -> Result<String> {
    let months = WindowCalendar::build(Scale::Day30);
    for w in months.windows() {
        if !monthly.contains_key(&w.label) {
            return Err(Error::MissingMonth(w.label.clone()));
        }
    }
    let index = meta_index(meta);
    let k = monthly
        .values()
        .flatten()
        .map(|m| m.cluster + 1)
        .max()
        .unwrap_or(0);

    let mut out = String::from("month\tgroup");
    for c in 1..=k {
        out.push_str(&format!("\tCluster {}", roman(c)));
    }
    out.push_str("\tS_score\n");

    for w in months.windows() {
        let rows = &monthly[&w.label];
        let mut cells: BTreeMap<(Group, usize), Vec<&str>> = BTreeMap::new();
        for m in rows {
            let station = index
                .get(m.station_id.as_str())
                .ok_or_else(|| Error::UnknownStation(m.station_id.clone()))?;
            cells.entry((station.group, m.cluster)).or_default().push(&m.station_id);
        }
        let score = if rows.is_empty() {
            f64::NAN
        } else {
            rows.iter().map(|m| m.silhouette).sum::<f64>() / rows.len() as f64
        };
        for group in Group::ALL {
            out.push_str(&format!("{}\t{}", w.label, group));
            for c in 0..k {
                let mut names = cells.get(&(group, c)).cloned().unwrap_or_default();
                names.sort_unstable();
                out.push('\t');
                out.push_str(&names.join(", "));
            }
            out.push_str(&format!("\t{score:.2}\n"));
        }
    }
    Ok(out)
}

/// The six radar spokes: UK groups plus the Italian groups split by region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RadarRegion {
    Ukh,
    Ukl,
    IlAv,
    IlP,
    IhAv,
    IhP,
}

impl RadarRegion {
    pub const ALL: [RadarRegion; 6] = [
        RadarRegion::Ukh,
        RadarRegion::Ukl,
        RadarRegion::IlAv,
        RadarRegion::IlP,
        RadarRegion::IhAv,
        RadarRegion::IhP,
    ];

    pub fn of(meta: &StationMeta) -> Result<Self> {
        match (meta.group, meta.region) {
            (Group::Ukh, Region::Uk) => Ok(RadarRegion::Ukh),
            (Group::Ukl, Region::Uk) => Ok(RadarRegion::Ukl),
            (Group::Il, Region::ValleDAosta) => Ok(RadarRegion::IlAv),
            (Group::Il, Region::Piemonte) => Ok(RadarRegion::IlP),
            (Group::Ih, Region::ValleDAosta) => Ok(RadarRegion::IhAv),
            (Group::Ih, Region::Piemonte) => Ok(RadarRegion::IhP),
            (g, r) => Err(Error::contract(format!(
                "{}: group {g} cannot sit in region {r}",
                meta.station_id
            ))),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            RadarRegion::Ukh => "UKH",
            RadarRegion::Ukl => "UKL",
            RadarRegion::IlAv => "IL_AV",
            RadarRegion::IlP => "IL_P",
            RadarRegion::IhAv => "IH_AV",
            RadarRegion::IhP => "IH_P",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarEntry {
    /// 0-based cluster id.
    pub cluster: usize,
    pub region: RadarRegion,
    pub mean_silhouette: f64,
    pub count: usize,
}

/// Mean silhouette per `(cluster, region)` for one month; empty
/// combinations are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarSheet {
    pub month: String,
    pub entries: Vec<RadarEntry>,
}

pub fn radar_sheet(month: &str, memberships: &[Membership], meta: &[StationMeta]) -> Result<RadarSheet> {
    let index = meta_index(meta);
    let mut groups: BTreeMap<(usize, RadarRegion), Vec<f64>> = BTreeMap::new();
    let mut sorted: Vec<&Membership> = memberships.iter().collect();
    sorted.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    for m in sorted {
        let station = index
            .get(m.station_id.as_str())
            .ok_or_else(|| Error::UnknownStation(m.station_id.clone()))?;
        groups
            .entry((m.cluster, RadarRegion::of(station)?))
            .or_default()
            .push(m.silhouette);
    }
    let entries = groups
        .into_iter()
        .map(|((cluster, region), s)| RadarEntry {
            cluster,
            region,
            mean_silhouette: s.iter().sum::<f64>() / s.len() as f64,
            count: s.len(),
        })
        .collect();
    Ok(RadarSheet {
        month: month.to_string(),
        entries,
    })
}

pub const RADAR_HEADER: [&str; 5] = ["month", "cluster", "region", "mean_silhouette", "count"];

/// Cluster ids are written 1-based.
pub fn write_radar<'a, W: Write>(
    writer: W,
    sheets: impl IntoIterator<Item = &'a RadarSheet>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RADAR_HEADER)?;
    for sheet in sheets {
        for e in &sheet.entries {
            wtr.write_record([
                sheet.month.clone(),
                (e.cluster + 1).to_string(),
                e.region.code().to_string(),
                e.mean_silhouette.to_string(),
                e.count.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<radar>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn station(id: &str, group: Group, region: Region) -> StationMeta {
        StationMeta {
            station_id: id.into(),
            name: id.into(),
            group,
            region,
            latitude: 45.0,
            longitude: 7.0,
            altitude_m: 500.0,
        }
    }

    fn member(id: &str, cluster: usize, s: f64) -> Membership {
        Membership {
            station_id: id.into(),
            cluster,
            silhouette: s,
        }
    }

    #[test]
    fn band_edges() {
        assert_eq!(PBand::of(0.05), PBand::Significant);
        assert_eq!(PBand::of(0.0500001), PBand::Marginal);
        assert_eq!(PBand::of(0.10), PBand::Marginal);
        assert_eq!(PBand::of(0.1000001), PBand::NotSignificant);
        assert_eq!(PBand::of(0.0004), PBand::Significant);
        assert_eq!(PBand::of(1.0), PBand::NotSignificant);
        assert_eq!(SlopeBand::of(0.03), SlopeBand::Warming);
        assert_eq!(SlopeBand::of(0.031), SlopeBand::StrongWarming);
        assert_eq!(SlopeBand::of(0.0), SlopeBand::Cooling);
        assert_eq!(SlopeBand::of(-0.03), SlopeBand::StrongCooling);
        assert_eq!(SlopeBand::of(-7.0), SlopeBand::StrongCooling);
        assert_eq!(SlopeBand::of(7.0), SlopeBand::StrongWarming);
    }

    #[test]
    fn roman_numerals() {
        assert_eq!(
            (1..=5).map(roman).collect::<Vec<_>>(),
            vec!["I", "II", "III", "IV", "V"]
        );
        assert_eq!(roman(14), "XIV");
    }

    #[test]
    fn radar_means() {
        let meta = vec![
            station("A", Group::Ih, Region::Piemonte),
            station("B", Group::Ih, Region::Piemonte),
            station("C", Group::Ih, Region::Piemonte),
            station("D", Group::Ukl, Region::Uk),
        ];
        let sheet = radar_sheet(
            "Jan",
            &[member("A", 0, 0.5), member("B", 0, 0.5), member("C", 1, 0.2), member("D", 1, 0.0)],
            &meta,
        )
        .unwrap();
        assert_eq!(
            sheet.entries,
            vec![
                RadarEntry { cluster: 0, region: RadarRegion::IhP, mean_silhouette: 0.5, count: 2 },
                RadarEntry { cluster: 1, region: RadarRegion::Ukl, mean_silhouette: 0.0, count: 1 },
                RadarEntry { cluster: 1, region: RadarRegion::IhP, mean_silhouette: 0.2, count: 1 },
            ]
        );
        let err = radar_sheet("Jan", &[member("Z", 0, 0.1)], &meta).unwrap_err();
        assert!(matches!(err, Error::UnknownStation(s) if s == "Z"));
    }

    #[test]
    fn table_layout() {
        let meta = vec![
            station("VP", Group::Ih, Region::ValleDAosta),
            station("OL", Group::Ih, Region::ValleDAosta),
            station("AY", Group::Ukl, Region::Uk),
        ];
        let months = WindowCalendar::build(Scale::Day30);
        let mut monthly: BTreeMap<String, Vec<Membership>> = months
            .windows()
            .iter()
            .map(|w| {
                (
                    w.label.clone(),
                    vec![member("VP", 0, 0.6), member("OL", 0, 0.42), member("AY", 1, 0.6)],
                )
            })
            .collect();
        let table = cluster_table(&monthly, &meta).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "month\tgroup\tCluster I\tCluster II\tS_score");
        assert_eq!(lines[1], "Jan\tIH\tOL, VP\t\t0.54");
        assert_eq!(lines[2], "Jan\tIL\t\t\t0.54");
        assert_eq!(lines[4], "Jan\tUKL\t\tAY\t0.54");
        assert_eq!(lines.len(), 1 + 12 * 4);
        assert_eq!(table, cluster_table(&monthly, &meta).unwrap());

        monthly.remove("May");
        assert!(matches!(cluster_table(&monthly, &meta), Err(Error::MissingMonth(m)) if m == "May"));
    }

    proptest! {
        #[test]
        fn emitted_bands_round_trip(slope in -2.0f64..2.0, p in 0.0f64..=1.0) {
            let (sb, pb) = bin_cell(slope, p);
            let slope_back: f64 = slope.to_string().parse().unwrap();
            let p_back: f64 = p.to_string().parse().unwrap();
            prop_assert_eq!(bin_cell(slope_back, p_back), (sb, pb));
        }
    }
}
