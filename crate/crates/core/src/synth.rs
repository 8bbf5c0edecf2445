//! Deterministic synthetic hourly stations for tests and demos.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, TimeDelta, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{Group, Region, StationMeta, TemperatureSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub station_id: String,
    pub base: f64,
    pub diurnal_amplitude: f64,
    pub annual_amplitude: f64,
    /// °C per year added uniformly to every hour.
    pub trend: f64,
    /// Extra °C per year scaled by `sin(2π·hour/24)`; gives the per-hour
    /// trend curve a shape. Zero by default.
    pub trend_diurnal_amplitude: f64,
    pub noise_sd: f64,
    pub start_year: i32,
    pub years: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            station_id: "SYN".into(),
            base: 10.0,
            diurnal_amplitude: 5.0,
            annual_amplitude: 8.0,
            trend: 0.0,
            trend_diurnal_amplitude: 0.0,
            noise_sd: 0.0,
            start_year: 2002,
            years: 20,
            seed: 0,
        }
    }
}

/// Day of year on a 365-day calendar; Feb 29 shares Feb 28's position so
/// every other date has the same phase in every year.
fn no_leap_day_of_year(date: NaiveDate) -> u32 {
    let day = date.day().min(if date.month() == 2 { 28 } else { 31 });
    NaiveDate::from_ymd_opt(2001, date.month(), day)
        .expect("valid in a non-leap year")
        .ordinal()
}

/// Hourly series from Jan 1 of `start_year` through Dec 31 of the last year:
/// `base + A_d sin(2π h/24) + A_a sin(2π doy/365.25) + trend(h)·(year - start) + ε`.
pub fn synth_station(cfg: &SynthConfig) -> Result<TemperatureSeries> {
    if cfg.years == 0 {
        return Err(Error::contract("synthetic station needs at least one year"));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::contract(format!("noise sd must be >= 0, got {}", cfg.noise_sd)));
    }
    let start = NaiveDate::from_ymd_opt(cfg.start_year, 1, 1)
        .ok_or_else(|| Error::contract(format!("bad start year {}", cfg.start_year)))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc();
    let end = NaiveDate::from_ymd_opt(cfg.start_year + cfg.years as i32, 1, 1)
        .ok_or_else(|| Error::contract("end year out of range"))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc();
    let hours = (end - start).num_hours() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::contract(e.to_string()))?;
    let readings = (0..hours).map(|k| {
        let ts = start + TimeDelta::hours(k as i64);
        let hour_phase = (2.0 * PI * f64::from(ts.hour()) / 24.0).sin();
        let annual_phase = (2.0 * PI * f64::from(no_leap_day_of_year(ts.date_naive())) / 365.25).sin();
        let elapsed = f64::from(ts.year() - cfg.start_year);
        let trend = cfg.trend + cfg.trend_diurnal_amplitude * hour_phase;
        let eps = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        Some(
            cfg.base
                + cfg.diurnal_amplitude * hour_phase
                + cfg.annual_amplitude * annual_phase
                + trend * elapsed
                + eps,
        )
    });
    TemperatureSeries::from_options(cfg.station_id.clone(), start, TimeDelta::hours(1), readings)
}

/// A small multi-region network: metadata plus synthetic series with
/// scattered gaps. Station `i` uses seed `seed + i`.
pub fn demo_network(stations: usize, years: u32, seed: u64) -> Result<(Vec<StationMeta>, Vec<TemperatureSeries>)> {
    const LAYOUT: [(Group, Region, f64); 6] = [
        (Group::Ukh, Region::Uk, 900.0),
        (Group::Ukl, Region::Uk, 200.0),
        (Group::Il, Region::ValleDAosta, 500.0),
        (Group::Il, Region::Piemonte, 400.0),
        (Group::Ih, Region::ValleDAosta, 1700.0),
        (Group::Ih, Region::Piemonte, 1400.0),
    ];
    let mut meta = Vec::with_capacity(stations);
    let mut series = Vec::with_capacity(stations);
    for i in 0..stations {
        let (group, region, altitude) = LAYOUT[i % LAYOUT.len()];
        let uk = region == Region::Uk;
        let id = format!("S{i:02}");
        meta.push(StationMeta {
            station_id: id.clone(),
            name: format!("Synthetic {i}"),
            group,
            region,
            latitude: if uk { 56.5 } else { 45.3 },
            longitude: if uk { -3.5 } else { 7.4 },
            altitude_m: altitude + i as f64,
        });
        let cfg = SynthConfig {
            station_id: id,
            base: 14.0 - altitude / 200.0,
            diurnal_amplitude: if uk { 3.0 } else { 6.0 },
            annual_amplitude: if uk { 6.0 } else { 10.0 },
            trend: if uk { 0.0 } else { 0.05 },
            trend_diurnal_amplitude: if i % 2 == 0 { 0.03 } else { -0.03 },
            noise_sd: 0.8,
            start_year: 2002,
            years,
            seed: seed.wrapping_add(i as u64),
        };
        let full = synth_station(&cfg)?;
        // Knock out a deterministic sprinkling of slots.
        let gapped = full
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| ((k * 7919 + i * 104_729) % 211 != 0).then_some(v));
        series.push(TemperatureSeries::from_options(
            full.station_id(),
            full.start(),
            full.step(),
            gapped,
        )?);
    }
    Ok((meta, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{hourly_window_means, Scale, WindowCalendar, HOURS};
    use crate::trend::sen_slope;

    #[test]
    fn same_seed_same_bits() {
        let cfg = SynthConfig {
            noise_sd: 0.5,
            years: 2,
            seed: 7,
            ..SynthConfig::default()
        };
        let a = synth_station(&cfg).unwrap();
        let b = synth_station(&cfg).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = synth_station(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn spans_whole_years() {
        let s = synth_station(&SynthConfig {
            years: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        // 2002..=2004, 2004 is a leap year.
        assert_eq!(s.len(), 24 * (365 * 3 + 1));
        assert_eq!(s.missing_count(), 0);
    }

    #[test]
    fn stationary_without_trend_or_noise() {
        let s = synth_station(&SynthConfig {
            years: 5,
            annual_amplitude: 0.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap();
        for w in 0..12 {
            for h in 0..HOURS {
                let ys = p.year_series(w, h).unwrap();
                assert!(ys.iter().all(|(_, m)| (m - ys[0].1).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn exact_trend_recovered_outside_february() {
        // With an annual cycle, the only year-to-year difference apart from
        // the trend is Feb 29 entering February windows in leap years.
        let s = synth_station(&SynthConfig {
            trend: 0.05,
            years: 8,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = hourly_window_means(&s, &WindowCalendar::build(Scale::Day30)).unwrap();
        for w in (0..12).filter(|&w| w != 1) {
            for h in 0..HOURS {
                let ys = p.year_series(w, h).unwrap();
                let x: Vec<f64> = ys.iter().map(|r| r.1).collect();
                let t: Vec<f64> = ys.iter().map(|r| f64::from(r.0)).collect();
                assert!((sen_slope(&x, &t).unwrap().slope - 0.05).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synth_station(&SynthConfig { years: 0, ..SynthConfig::default() }).is_err());
        assert!(synth_station(&SynthConfig { noise_sd: -1.0, ..SynthConfig::default() }).is_err());
    }

    #[test]
    fn demo_network_is_consistent() {
        let (meta, series) = demo_network(6, 1, 3).unwrap();
        assert_eq!(meta.len(), 6);
        for m in &meta {
            m.validate().unwrap();
        }
        assert!(series.iter().all(|s| s.missing_count() > 0));
    }
}
