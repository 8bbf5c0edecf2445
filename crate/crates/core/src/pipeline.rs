//! Stage wiring shared by the CLI and the end-to-end tests.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::aggregate::{hourly_window_means, write_panels, Scale, WindowCalendar, WindowHourPanel};
use crate::error::{Error, Result};
use crate::impute::{seasonal_split_impute, BlockKey, SeasonalBlockPlan};
use crate::ingest::{missing_report, to_hourly, write_missing_reports, StationMeta, TemperatureSeries};
use crate::report::{contour_grid, radar_sheet, write_contours, write_radar, cluster_table, Membership};
use crate::similarity::{cluster_report, dcor_matrix, pairwise_dtw, ClusterReport, DistanceMatrix, DtwConfig};
use crate::trend::{trend_surface, write_trends, TrendSurface};

pub type Features = Vec<(String, Vec<f64>)>;

/// What each station contributes as its 24-hour clustering curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureKind {
    /// Sen slope per hour.
    #[default]
    Slope,
    /// Mean temperature per hour, averaged over years.
    Value,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slope" => Ok(FeatureKind::Slope),
            "value" => Ok(FeatureKind::Value),
            _ => Err(Error::contract(format!("unknown feature kind {s:?} (slope or value)"))),
        }
    }
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Halves a 30-minute series to hourly and, when `block` is set, fills gaps.
pub fn prepare_series(series: &TemperatureSeries, block: Option<BlockKey>) -> Result<TemperatureSeries> {
    let hourly = if series.step() == chrono::TimeDelta::minutes(30) {
        to_hourly(series)?
    } else {
        series.clone()
    };
    match block {
        Some(block_key) => seasonal_split_impute(
            &hourly,
            SeasonalBlockPlan {
                block_key,
                ..SeasonalBlockPlan::default()
            },
        ),
        None => Ok(hourly),
    }
}

/// One curve per station from `window` of each surface, sorted by station.
pub fn slope_features(surfaces: &[TrendSurface], window: usize) -> Result<Features> {
    let mut out: Features = surfaces
        .iter()
        .map(|s| {
            s.slope_curve(window).map(|c| (s.station_id().to_string(), c)).ok_or_else(|| {
                Error::contract(format!(
                    "{} has an incomplete slope curve in window {}",
                    s.station_id(),
                    s.calendar().label(window)
                ))
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub fn value_features(panels: &[WindowHourPanel], window: usize) -> Result<Features> {
    let mut out: Features = panels
        .iter()
        .map(|p| {
            p.hourly_climatology(window)
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .map(|c| (p.station_id().to_string(), c))
                .ok_or_else(|| {
                    Error::contract(format!(
                        "{} has hours without data in window {}",
                        p.station_id(),
                        p.calendar().label(window)
                    ))
                })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Slope curves for distance correlation: one window, or every window
/// concatenated in calendar order.
pub fn dcor_features(surfaces: &[TrendSurface], window: Option<usize>) -> Result<Features> {
    match window {
        Some(w) => slope_features(surfaces, w),
        None => {
            let windows = surfaces.first().map_or(0, |s| s.calendar().len());
            let per_window = (0..windows)
                .map(|w| slope_features(surfaces, w))
                .collect::<Result<Vec<_>>>()?;
            let mut out: Features = Vec::new();
            for (i, (label, _)) in per_window.first().into_iter().flatten().enumerate() {
                let curve = per_window.iter().flat_map(|f| f[i].1.iter().copied()).collect();
                out.push((label.clone(), curve));
            }
            Ok(out)
        }
    }
}

/// Clusters one month's curves and keeps the matrix they were scored on.
pub fn cluster_features(features: &Features, k: usize, dtw: &DtwConfig) -> Result<(DistanceMatrix, ClusterReport)> {
    let matrix = pairwise_dtw(features, dtw)?;
    let report = cluster_report(&matrix, k)?;
    Ok((matrix, report))
}

/// Writes `dist_`, `clusters_` and `merges_` files for one window label.
pub fn write_cluster_files(dir: &Path, label: &str, matrix: &DistanceMatrix, report: &ClusterReport) -> Result<()> {
    let stem = label.replace([':', '/'], "_");
    let mut f = create_file(&dir.join(format!("dist_{stem}.csv")))?;
    matrix.write_csv(&mut f)?;
    let mut f = create_file(&dir.join(format!("clusters_{stem}.csv")))?;
    report.write_assignments(&mut f)?;
    let mut f = create_file(&dir.join(format!("merges_{stem}.csv")))?;
    report.write_merges(&mut f)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Scales for panel, trend and contour output. Clustering always uses
    /// the monthly scale.
    pub scales: Vec<Scale>,
    pub k: usize,
    pub dtw: DtwConfig,
    pub features: FeatureKind,
    /// `None` aggregates raw data, skipping missing slots.
    pub impute: Option<BlockKey>,
    pub dcor_permutations: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scales: Scale::ALL.to_vec(),
            k: 4,
            dtw: DtwConfig::default(),
            features: FeatureKind::Slope,
            impute: Some(BlockKey::Month),
            dcor_permutations: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineSummary {
    pub files: Vec<PathBuf>,
    pub mean_silhouette: BTreeMap<String, f64>,
}

/// Runs every stage and writes all outputs under `out_dir`.
pub fn run_pipeline(
    meta: &[StationMeta],
    series: &[TemperatureSeries],
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineSummary> {
    cfg.dtw.validate()?;
    let mut summary = PipelineSummary::default();
    let mut emit = |name: &str, write: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let path = out_dir.join(name);
        let mut f = create_file(&path)?;
        write(&mut f)?;
        f.flush().map_err(|e| Error::io(&path, e))?;
        summary.files.push(path);
        Ok(())
    };

    let mut series: Vec<&TemperatureSeries> = series.iter().collect();
    series.sort_by(|a, b| a.station_id().cmp(b.station_id()));
    let missing = series
        .iter()
        .map(|s| missing_report(s))
        .collect::<Result<Vec<_>>>()?;
    emit("missing.csv", &|f| write_missing_reports(f, &missing))?;

    let prepared = series
        .par_iter()
        .map(|s| prepare_series(s, cfg.impute))
        .collect::<Result<Vec<_>>>()?;

    let mut scales = cfg.scales.clone();
    if !scales.contains(&Scale::Day30) {
        scales.push(Scale::Day30);
    }
    let mut monthly: Option<(Vec<WindowHourPanel>, Vec<TrendSurface>)> = None;
    for scale in scales {
        let calendar = WindowCalendar::build(scale);
        let panels = prepared
            .par_iter()
            .map(|s| hourly_window_means(s, &calendar))
            .collect::<Result<Vec<_>>>()?;
        let surfaces: Vec<TrendSurface> = panels.par_iter().map(trend_surface).collect();
        if cfg.scales.contains(&scale) {
            let token = scale.token();
            emit(&format!("panel_{token}.csv"), &|f| write_panels(f, &panels))?;
            emit(&format!("trend_{token}.csv"), &|f| write_trends(f, &surfaces))?;
            let grids: Vec<_> = surfaces.iter().map(contour_grid).collect();
            emit(&format!("contour_{token}.csv"), &|f| write_contours(f, &grids))?;
        }
        if scale == Scale::Day30 {
            monthly = Some((panels, surfaces));
        }
    }
    let (panels, surfaces) = monthly.expect("monthly scale always runs");

    let months = WindowCalendar::build(Scale::Day30);
    let clustered = (0..months.len())
        .into_par_iter()
        .map(|w| {
            let features = match cfg.features {
                FeatureKind::Slope => slope_features(&surfaces, w)?,
                FeatureKind::Value => value_features(&panels, w)?,
            };
            cluster_features(&features, cfg.k, &cfg.dtw)
        })
        .collect::<Result<Vec<_>>>()?;

    let cluster_dir = out_dir.join("cluster");
    let mut memberships: BTreeMap<String, Vec<Membership>> = BTreeMap::new();
    let mut sheets = Vec::new();
    for (w, (matrix, report)) in clustered.iter().enumerate() {
        let label = months.label(w);
        write_cluster_files(&cluster_dir, label, matrix, report)?;
        summary.mean_silhouette.insert(label.to_string(), report.mean_silhouette);
        let members = report.memberships();
        sheets.push(radar_sheet(label, &members, meta)?);
        memberships.insert(label.to_string(), members);
    }
    let table = cluster_table(&memberships, meta)?;
    emit("cluster_table.tsv", &|f| {
        f.write_all(table.as_bytes()).map_err(|e| Error::io("cluster_table.tsv", e))
    })?;
    emit("radar.csv", &|f| write_radar(f, &sheets))?;

    let dcor = dcor_matrix(&dcor_features(&surfaces, None)?, cfg.dcor_permutations, cfg.seed)?;
    emit("dcor.csv", &|f| dcor.write_csv(f))?;
    if dcor.p_values.is_some() {
        emit("dcor_p.csv", &|f| dcor.write_p_values_csv(f))?;
    }
    Ok(summary)
}
