//! Configuration, scenario presets, bathymetries and snapshot output.

pub mod bathymetry;
pub mod config;
pub mod presets;
pub mod run;
pub mod snapshot;

pub use bathymetry::{bathymetry, Bathymetry};
pub use config::{load_config, parse_config, Format, RunConfig};
pub use presets::{preset, Preset, PRESETS};
pub use run::{run_to_directory, RunSummary};
pub use snapshot::{write_snapshot, Snapshot, SnapshotWriter};
