//! `diurnal`: command-line driver for the hourly temperature trend pipeline.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::TimeDelta;
use clap::{Args, CommandFactory, Parser, Subcommand};
use diurnal_core::aggregate::{hourly_window_means, read_panels, write_panels, Scale, WindowCalendar};
use diurnal_core::impute::BlockKey;
use diurnal_core::ingest::{
    missing_report, missing_report_over, parse_metadata, parse_records_by_station, parse_timestamp,
    write_metadata, write_missing_reports, write_records,
};
use diurnal_core::pipeline::{
    cluster_features, create_file, dcor_features, open_file, prepare_series, run_pipeline, slope_features,
    value_features, write_cluster_files, FeatureKind, PipelineConfig,
};
use diurnal_core::report::{cluster_table, contour_grid, radar_sheet, read_assignments, write_contours, write_radar};
use diurnal_core::similarity::{dcor_matrix, DtwConfig, PointwiseDistance};
use diurnal_core::synth::{demo_network, synth_station, SynthConfig};
use diurnal_core::trend::{read_trends, trend_surface, write_trends, TrendSurface};
use diurnal_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "diurnal", version, about = "Hourly air-temperature trend and pattern analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Window scale: 10d, 30d, 60da or 60db.
    #[arg(long, global = true)]
    scale: Option<Scale>,
    /// Number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// DTW regularization strength.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// DTW move weights as wh,wv,wd.
    #[arg(long, global = true, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Global {
    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir().join(default_name))
    }

    fn dtw(&self, distance: PointwiseDistance) -> DtwConfig {
        let [wh, wv, wd] = self.weights.unwrap_or([1.0, 1.0, 2.0]);
        DtwConfig {
            wh,
            wv,
            wd,
            lambda: self.lambda.unwrap_or(0.0),
            distance,
        }
    }
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three weights wh,wv,wd".to_string())
}

#[derive(Debug, Args)]
struct InputStep {
    /// Record spacing in minutes (60 or 30); 30-minute data is averaged to hours.
    #[arg(long, default_value_t = 60)]
    step: i64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fill gaps by seasonal-block interpolation.
    Impute {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "month")]
        block: BlockKey,
        #[command(flatten)]
        step: InputStep,
        /// Also write per-station missing percentages here.
        #[arg(long)]
        missing_report: Option<PathBuf>,
        /// Fixed period FROM,UNTIL for the missing-percentage denominator.
        #[arg(long)]
        span: Option<String>,
    },
    /// Per-hour window means for each station and year.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregate raw readings, skipping missing slots, instead of imputing first.
        #[arg(long)]
        skip_missing: bool,
        #[arg(long, default_value = "month")]
        block: BlockKey,
        #[command(flatten)]
        step: InputStep,
    },
    /// Mann-Kendall and Sen's slope per window and hour.
    Trend {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DTW distances, clustering and silhouettes per window.
    Cluster {
        /// Trend CSV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Panel CSV, required with --features value.
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long, default_value = "slope")]
        features: FeatureKind,
        #[arg(long, default_value = "absolute")]
        distance: PointwiseDistance,
        /// Station metadata; enables the cluster table.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Distance correlation matrix between stations' slope curves.
    Dcor {
        #[arg(long = "in")]
        input: PathBuf,
        /// Restrict to one window label; all windows are concatenated otherwise.
        #[arg(long)]
        window: Option<String>,
        /// Permutations for p-values (at least 99).
        #[arg(long)]
        perm: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Band slopes and p-values for contour plots.
    Contour {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean silhouette per cluster and region from cluster files.
    Radar {
        #[arg(long)]
        clusters_dir: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic records.
    Synth(SynthArgs),
    /// Run every stage from records and metadata.
    Run {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[command(flatten)]
        step: InputStep,
        #[arg(long)]
        skip_missing: bool,
        #[arg(long, default_value = "slope")]
        features: FeatureKind,
        #[arg(long)]
        perm: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Write a demo network of this many stations (records.csv + meta.csv).
    #[arg(long)]
    demo: Option<usize>,
    #[arg(long, default_value = "SYN")]
    id: String,
    #[arg(long, default_value_t = 10.0)]
    base: f64,
    #[arg(long, default_value_t = 5.0)]
    diurnal: f64,
    #[arg(long, default_value_t = 8.0)]
    annual: f64,
    #[arg(long, default_value_t = 0.0)]
    trend: f64,
    #[arg(long, default_value_t = 0.0)]
    trend_diurnal: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 20)]
    years: u32,
    #[arg(long, default_value_t = 2002)]
    start_year: i32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_series(path: &Path, step: &InputStep, block: Option<BlockKey>) -> Result<Vec<diurnal_core::TemperatureSeries>> {
    let minutes = match step.step {
        30 | 60 => step.step,
        other => return Err(Error::Contract(format!("--step must be 30 or 60, got {other}"))),
    };
    parse_records_by_station(open_file(path)?, TimeDelta::minutes(minutes))?
        .values()
        .map(|s| prepare_series(s, block))
        .collect()
}

fn read_surfaces(path: &Path, scale: Option<Scale>) -> Result<Vec<TrendSurface>> {
    let all = read_trends(open_file(path)?)?;
    let scale = match scale {
        Some(s) => s,
        None => {
            let scales: std::collections::BTreeSet<Scale> = all.iter().map(|s| s.scale()).collect();
            match scales.len() {
                0 => return Err(Error::EmptyInput),
                1 => *scales.iter().next().expect("one scale"),
                _ => return Err(Error::Contract("trend file holds several scales; pick one with --scale".into())),
            }
        }
    };
    let picked: Vec<TrendSurface> = all.into_iter().filter(|s| s.scale() == scale).collect();
    if picked.is_empty() {
        return Err(Error::Contract(format!("no {scale} rows in {}", path.display())));
    }
    Ok(picked)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Impute {
            input,
            out,
            block,
            step,
            missing_report: report_path,
            span,
        } => {
            let minutes = step.step;
            let raw = parse_records_by_station(open_file(input)?, TimeDelta::minutes(minutes))?;
            let mut filled = Vec::new();
            let mut reports = Vec::new();
            for s in raw.values() {
                let hourly = prepare_series(s, None)?;
                reports.push(match span {
                    Some(span) => {
                        let (from, until) = parse_span(span)?;
                        missing_report_over(&hourly, from, until)?
                    }
                    None => missing_report(&hourly)?,
                });
                filled.push(prepare_series(&hourly, Some(*block))?);
            }
            write_records(create_file(&g.output(out, "imputed.csv"))?, &filled)?;
            if let Some(p) = report_path {
                write_missing_reports(create_file(p)?, &reports)?;
            }
        }
        Command::Aggregate {
            input,
            out,
            skip_missing,
            block,
            step,
        } => {
            let scale = g.scale.unwrap_or(Scale::Day30);
            let series = read_series(input, step, (!skip_missing).then_some(*block))?;
            let calendar = WindowCalendar::build(scale);
            let panels = series
                .iter()
                .map(|s| hourly_window_means(s, &calendar))
                .collect::<Result<Vec<_>>>()?;
            let path = g.output(out, &format!("panel_{scale}.csv"));
            write_panels(create_file(&path)?, &panels)?;
        }
        Command::Trend { input, out } => {
            let panels: Vec<_> = read_panels(open_file(input)?)?
                .into_iter()
                .filter(|p| g.scale.is_none_or(|s| p.scale() == s))
                .collect();
            if panels.is_empty() {
                return Err(Error::EmptyPanel);
            }
            let surfaces: Vec<TrendSurface> = panels.iter().map(trend_surface).collect();
            let (flagged, tested) = surfaces
                .iter()
                .flat_map(|s| s.present_cells())
                .fold((0, 0), |(f, t), c| (f + usize::from(c.serial_corr_flag), t + 1));
            if flagged > 0 {
                eprintln!("warning: {flagged} of {tested} cells show lag-1 serial correlation (not prewhitened)");
            }
            let name = match g.scale {
                Some(s) => format!("trend_{s}.csv"),
                None => "trend.csv".to_string(),
            };
            write_trends(create_file(&g.output(out, &name))?, &surfaces)?;
        }
        Command::Cluster {
            input,
            panel,
            features,
            distance,
            meta,
        } => {
            let scale = g.scale.unwrap_or(Scale::Day30);
            let surfaces = read_surfaces(input, Some(scale))?;
            let panels = match (features, panel) {
                (FeatureKind::Value, Some(p)) => read_panels(open_file(p)?)?
                    .into_iter()
                    .filter(|p| p.scale() == scale)
                    .collect(),
                (FeatureKind::Value, None) => {
                    return Err(Error::Contract("--features value needs --panel".into()))
                }
                _ => Vec::new(),
            };
            let dtw = g.dtw(*distance);
            let k = g.k.unwrap_or(4);
            let calendar = WindowCalendar::build(scale);
            let dir = g.out_dir();
            let mut monthly = BTreeMap::new();
            for w in 0..calendar.len() {
                let curves = match features {
                    FeatureKind::Slope => slope_features(&surfaces, w)?,
                    FeatureKind::Value => value_features(&panels, w)?,
                };
                let (matrix, report) = cluster_features(&curves, k, &dtw)?;
                write_cluster_files(&dir, calendar.label(w), &matrix, &report)?;
                monthly.insert(calendar.label(w).to_string(), report.memberships());
            }
            if let (Some(meta), Scale::Day30) = (meta, scale) {
                let meta = parse_metadata(open_file(meta)?)?;
                let table = cluster_table(&monthly, &meta)?;
                let path = dir.join("cluster_table.tsv");
                std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Dcor {
            input,
            window,
            perm,
            out,
        } => {
            let surfaces = read_surfaces(input, g.scale)?;
            let w = match window {
                Some(label) => Some(surfaces[0].calendar().index_of(label).ok_or_else(|| {
                    Error::Contract(format!("no window {label:?} at scale {}", surfaces[0].scale()))
                })?),
                None => None,
            };
            let m = dcor_matrix(&dcor_features(&surfaces, w)?, *perm, g.seed.unwrap_or(0))?;
            let path = g.output(out, "dcor.csv");
            m.write_csv(create_file(&path)?)?;
            if m.p_values.is_some() {
                m.write_p_values_csv(create_file(&path.with_file_name("dcor_p.csv"))?)?;
            }
        }
        Command::Contour { input, out } => {
            let surfaces = read_surfaces(input, g.scale)?;
            let grids: Vec<_> = surfaces.iter().map(contour_grid).collect();
            let name = format!("contour_{}.csv", surfaces[0].scale());
            write_contours(create_file(&g.output(out, &name))?, &grids)?;
        }
        Command::Radar {
            clusters_dir,
            meta,
            out,
        } => {
            let meta = parse_metadata(open_file(meta)?)?;
            let months = WindowCalendar::build(Scale::Day30);
            let mut sheets = Vec::new();
            for w in months.windows() {
                let path = clusters_dir.join(format!("clusters_{}.csv", w.label));
                if !path.exists() {
                    continue;
                }
                let members = read_assignments(open_file(&path)?)?;
                sheets.push(radar_sheet(&w.label, &members, &meta)?);
            }
            if sheets.is_empty() {
                return Err(Error::Contract(format!(
                    "no clusters_<Month>.csv files in {}",
                    clusters_dir.display()
                )));
            }
            write_radar(create_file(&g.output(out, "radar.csv"))?, &sheets)?;
        }
        Command::Synth(args) => {
            let seed = g.seed.unwrap_or(0);
            match args.demo {
                Some(n) => {
                    let (meta, series) = demo_network(n, args.years, seed)?;
                    let dir = g.out_dir();
                    write_records(create_file(&dir.join("records.csv"))?, &series)?;
                    write_metadata(create_file(&dir.join("meta.csv"))?, &meta)?;
                }
                None => {
                    let s = synth_station(&SynthConfig {
                        station_id: args.id.clone(),
                        base: args.base,
                        diurnal_amplitude: args.diurnal,
                        annual_amplitude: args.annual,
                        trend: args.trend,
                        trend_diurnal_amplitude: args.trend_diurnal,
                        noise_sd: args.noise,
                        start_year: args.start_year,
                        years: args.years,
                        seed,
                    })?;
                    write_records(create_file(&g.output(&args.out, "records.csv"))?, [&s])?;
                }
            }
        }
        Command::Run {
            records,
            meta,
            step,
            skip_missing,
            features,
            perm,
        } => {
            let meta = parse_metadata(open_file(meta)?)?;
            let series: Vec<_> = parse_records_by_station(open_file(records)?, TimeDelta::minutes(step.step))?
                .into_values()
                .collect();
            let cfg = PipelineConfig {
                scales: g.scale.map_or_else(|| Scale::ALL.to_vec(), |s| vec![s]),
                k: g.k.unwrap_or(4),
                dtw: g.dtw(PointwiseDistance::Absolute),
                features: *features,
                impute: (!skip_missing).then_some(BlockKey::Month),
                dcor_permutations: *perm,
                seed: g.seed.unwrap_or(0),
            };
            run_pipeline(&meta, &series, &cfg, &g.out_dir())?;
        }
    }
    Ok(())
}

fn parse_span(span: &str) -> Result<(chrono::DateTime<chrono::Utc>, chrono::DateTime<chrono::Utc>)> {
    let bad = || Error::Contract(format!("--span must be FROM,UNTIL timestamps, got {span:?}"));
    let (a, b) = span.split_once(',').ok_or_else(bad)?;
    let from = parse_timestamp(a).or_else(|| parse_timestamp(&format!("{}T00:00:00", a.trim())));
    let until = parse_timestamp(b).or_else(|| parse_timestamp(&format!("{}T00:00:00", b.trim())));
    Ok((from.ok_or_else(bad)?, until.ok_or_else(bad)?))
}

/// I/O failures exit 2; anything else is a usage or contract problem and
/// exits 1 with the usage line.
fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_io() {
        return ExitCode::from(2);
    }
    eprintln!("\n{}", Cli::command().render_usage());
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let args = match config::expand_args(&Cli::command(), std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
