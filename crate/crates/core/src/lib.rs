//! Period estimation for time series of random objects in metric spaces.
//!
//! The pipeline scans candidate periods with per-phase Fréchet means
//! ([`scan`]), chooses the penalty weight with an information criterion
//! ([`tuning`]) and extracts the periodic component ([`component`]).
//! [`simulation`] holds generators and a Monte Carlo harness, [`io`] the file
//! formats used by the command-line tool.

pub mod component;
pub mod error;
pub mod io;
pub mod metric;
pub mod scan;
pub mod simulation;
pub mod tuning;

pub use component::{extract_component, PeriodicComponent};
pub use error::{Error, Result};
pub use metric::{MetricSpace, SpaceKind};
pub use scan::{scan, ObjectSeries, ScanResult};
pub use tuning::{select, Criterion, IcReport, LambdaPath};
