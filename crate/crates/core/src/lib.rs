//! Digital model of a photovoltaic plant.
//!
//! * [`solar_geometry`]: sun position and angle of incidence.
//! * [`pv_model`]: weather to plant power through the single-diode model.
//! * [`metrics`]: error metrics and Bland-Altman agreement.
//! * [`regressors`]: perceptron, random forest and support vector surrogates.
//! * [`calibration`]: loss-parameter estimation by coordinate search.
//! * [`io`] and [`cli`]: file formats, configuration and the `pvtwin` binary.
//!
//! Physics and statistics are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pv_model;
pub mod regressors;
pub mod scalar;
pub mod solar_geometry;

pub use error::{Error, Result};
pub use pv_model::LossMode;
pub use scalar::Real;

/// Scalar used by the regression, calibration and I/O layers.
pub type Scalar = f64;

pub type SiteLocation = solar_geometry::SiteLocation<Scalar>;
pub type SolarPosition = solar_geometry::SolarPosition<Scalar>;
pub type SurfaceOrientation = solar_geometry::SurfaceOrientation<Scalar>;
pub type WeatherSample = pv_model::WeatherSample<Scalar>;
pub type WeatherSeries = pv_model::WeatherSeries<Scalar>;
pub type ModuleDatasheet = pv_model::ModuleDatasheet<Scalar>;
pub type LossParams = pv_model::LossParams<Scalar>;
pub type DiodeParams = pv_model::DiodeParams<Scalar>;
pub type OperatingPoint = pv_model::OperatingPoint<Scalar>;
pub type PlantConfig = pv_model::PlantConfig<Scalar>;
pub type PowerSeries = pv_model::PowerSeries<Scalar>;
pub type MetricsReport = metrics::MetricsReport<Scalar>;
pub type BlandAltmanReport = metrics::BlandAltmanReport<Scalar>;
