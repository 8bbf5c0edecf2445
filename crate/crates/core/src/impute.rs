//! Seasonally segmented gap filling.
//!
//! The series is split into blocks (calendar months by default). Each block's
//! slots, concatenated across years in time order, are interpolated on their
//! ordinal positions independently of every other block.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};

use crate::error::{Error, Result};
use crate::ingest::TemperatureSeries;

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// Maps a timestamp onto a block label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockKey {
    /// Calendar month 1-12.
    #[default]
    Month,
    /// Meteorological season: DJF, MAM, JJA, SON.
    Season,
}

impl BlockKey {
    /// Block index; months are 0-11, seasons 0-3 (DJF first).
    pub fn block_of(self, ts: DateTime<Utc>) -> usize {
        let m0 = ts.month0() as usize;
        match self {
            BlockKey::Month => m0,
            BlockKey::Season => ((m0 + 1) % 12) / 3,
        }
    }

    pub fn label(self, block: usize) -> String {
        match self {
            BlockKey::Month => MONTHS[block].to_string(),
            BlockKey::Season => ["DJF", "MAM", "JJA", "SON"][block].to_string(),
        }
    }
}

impl FromStr for BlockKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "month" => Ok(BlockKey::Month),
            "season" => Ok(BlockKey::Season),
            other => Err(Error::contract(format!(
                "unknown block key {other:?} (expected month or season)"
            ))),
        }
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKey::Month => "month",
            BlockKey::Season => "season",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeasonalBlockPlan {
    pub block_key: BlockKey,
    pub interpolation: Interpolation,
}

/// Fills every masked slot of `series` block by block.
///
/// Observed slots pass through bit-for-bit. Interior gaps are interpolated
/// between the nearest observed neighbours of the same block; gaps at a
/// block's edges copy the nearest observed value.
pub fn seasonal_split_impute(
    series: &TemperatureSeries,
    plan: SeasonalBlockPlan,
) -> Result<TemperatureSeries> {
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..series.len() {
        blocks
            .entry(plan.block_key.block_of(series.timestamp(k)))
            .or_default()
            .push(k);
    }

    let mut filled: Vec<f64> = series.values().to_vec();
    for (block, slots) in &blocks {
        if slots.iter().all(|&k| !series.missing()[k]) {
            continue;
        }
        let observed: Vec<(usize, f64)> = slots
            .iter()
            .enumerate()
            .filter_map(|(pos, &k)| series.get(k).map(|v| (pos, v)))
            .collect();
        if observed.is_empty() {
            return Err(Error::ImputationImpossible {
                block: plan.block_key.label(*block),
            });
        }
        match plan.interpolation {
            Interpolation::Linear => fill_linear(slots, &observed, &mut filled),
        }
    }

    TemperatureSeries::from_options(
        series.station_id(),
        series.start(),
        series.step(),
        filled.into_iter().map(Some),
    )
}

fn fill_linear(slots: &[usize], observed: &[(usize, f64)], out: &mut [f64]) {
    // `next` indexes the first observed point at or after the current position.
    let mut next = 0;
    for (pos, &k) in slots.iter().enumerate() {
        while next < observed.len() && observed[next].0 < pos {
            next += 1;
        }
        if next < observed.len() && observed[next].0 == pos {
            continue;
        }
        let before = next.checked_sub(1).map(|i| observed[i]);
        let after = observed.get(next).copied();
        out[k] = match (before, after) {
            (Some((p0, v0)), Some((p1, v1))) => {
                v0 + (v1 - v0) * ((pos - p0) as f64 / (p1 - p0) as f64)
            }
            (Some((_, v)), None) | (None, Some((_, v))) => v,
            (None, None) => unreachable!("block has at least one observation"),
        };
    }
}
