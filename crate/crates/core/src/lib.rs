//! Hourly air-temperature trend analysis.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`]: station metadata and records onto a dense hourly index.
//! * [`impute`]: seasonally segmented gap filling.
//! * [`aggregate`]: hour-of-day means over 10-, 30- and 60-day windows.
//! * [`trend`]: Mann-Kendall tests and Sen's slopes per window and hour.
//! * [`similarity`]: DTW distances, average-linkage clustering, silhouettes
//!   and distance correlation between stations' diurnal slope curves.
//! * [`report`]: banded contour grids, the cluster table and radar data.
//!
//! [`synth`] generates deterministic stations for testing and
//! [`pipeline`] wires the stages together.

pub mod aggregate;
pub mod error;
pub mod impute;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod trend;

pub use aggregate::{Scale, WindowCalendar, WindowHourPanel};
pub use error::{Error, Result};
pub use ingest::{MissingReport, StationMeta, TemperatureSeries};
pub use similarity::{ClusterReport, DcorResult, DistanceMatrix, DtwConfig};
pub use trend::{MkResult, SenSlope, TrendCell, TrendSurface};
