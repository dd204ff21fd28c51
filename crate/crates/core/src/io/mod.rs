//! File formats, fixtures, run configuration and report emission.

mod config;
mod fixture;
mod report;
mod series;
mod synth;

pub use config::{CalibrationSettings, Paths, PlantSection, RunConfig};
pub use fixture::{load_table4_fixture, table4_rows, Table4Row, TABLE4};
pub use report::{config_hash, write_json, write_plot_data, Report};
pub use series::{load_dataset, load_power, load_weather, parse_timestamp, write_power, write_weather};
pub use synth::{synthetic_weather, SynthSpec};
