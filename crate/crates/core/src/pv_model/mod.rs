//! Forward plant model: weather sample to DC power in kW.
//!
//! The chain is sun position, angle of incidence, plane-of-array
//! irradiance (isotropic sky, IAM on beam only, soiling on the total),
//! PVsyst cell temperature, De Soto parameter translation, single-diode
//! maximum power point and finally the multiplicative DC loss chain.

mod diode;
mod irradiance;
mod plant;
mod temperature;

pub use diode::{desoto_params, max_power_point, open_circuit_voltage, solve_current, BOLTZMANN_EV, G_REF, T_REF_C};
pub use irradiance::{decompose_ghi, incidence_angle_modifier, poa_equivalent, poa_irradiance, PoaComponents};
pub use plant::{
    dc_power_kw, power_from_poa, simulate_sample, simulate_series, system_power, SampleBreakdown,
    MIN_EFFECTIVE_IRRADIANCE,
};
pub use temperature::cell_temperature;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solar_geometry::{SiteLocation, SurfaceOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample<T> {
    pub timestamp: DateTime<Utc>,
    /// Global horizontal irradiance, W/m².
    pub ghi: T,
    /// Direct normal irradiance, W/m².
    pub dni: Option<T>,
    /// Diffuse horizontal irradiance, W/m².
    pub dhi: Option<T>,
    /// Air temperature, °C.
    pub temp_air: T,
    /// Wind speed, m/s.
    pub wind_speed: T,
}

impl<T: Real> WeatherSample<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, x: T| {
            Error::validation(format!("{}: {name} = {x} must be finite and >= 0", self.timestamp))
        };
        if !(self.ghi >= T::zero()) || !self.ghi.is_finite() {
            return Err(bad("ghi", self.ghi));
        }
        for (name, v) in [("dni", self.dni), ("dhi", self.dhi)] {
            if let Some(x) = v {
                if !(x >= T::zero()) || !x.is_finite() {
                    return Err(bad(name, x));
                }
            }
        }
        if !(self.wind_speed >= T::zero()) || !self.wind_speed.is_finite() {
            return Err(bad("wind_speed", self.wind_speed));
        }
        if !self.temp_air.is_finite() {
            return Err(Error::validation(format!("{}: temp_air is not finite", self.timestamp)));
        }
        Ok(())
    }
}

/// Non-empty weather records with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries<T> {
    samples: Vec<WeatherSample<T>>,
    /// Set when beam/diffuse were reconstructed from GHI on ingest.
    pub decomposed: bool,
}

impl<T: Real> WeatherSeries<T> {
    pub fn new(samples: Vec<WeatherSample<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("weather series is empty"));
        }
        for s in &samples {
            s.validate()?;
        }
        for w in samples.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::validation(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].timestamp
                )));
            }
        }
        Ok(Self { samples, decomposed: false })
    }

    pub fn samples(&self) -> &[WeatherSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        self.samples.iter().map(|s| s.timestamp).collect()
    }
}

/// Reference constants of the five-parameter module model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleDatasheet<T> {
    /// Short-circuit current temperature coefficient, A/°C.
    pub alpha_sc: T,
    /// Modified ideality factor at reference conditions, V.
    pub a_ref: T,
    #[serde(rename = "I_L_ref")]
    pub i_l_ref: T,
    #[serde(rename = "I_o_ref")]
    pub i_o_ref: T,
    #[serde(rename = "R_sh_ref")]
    pub r_sh_ref: T,
    #[serde(rename = "R_s")]
    pub r_s: T,
    /// Band gap at reference temperature, eV.
    #[serde(rename = "EgRef")]
    pub eg_ref: T,
    /// Band gap temperature coefficient, 1/°C.
    #[serde(rename = "dEgdT")]
    pub deg_dt: T,
}

impl<T: Real> ModuleDatasheet<T> {
    /// Repository fixture module (60-cell crystalline silicon class).
    /// These are not published values of any plant.
    pub fn fixture() -> Self {
        let l = T::lit;
        Self {
            alpha_sc: l(0.004),
            a_ref: l(1.6),
            i_l_ref: l(6.0),
            i_o_ref: l(5e-10),
            r_sh_ref: l(300.0),
            r_s: l(0.4),
            eg_ref: l(1.121),
            deg_dt: l(-2.677e-4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [("I_L_ref", self.i_l_ref), ("I_o_ref", self.i_o_ref), ("R_sh_ref", self.r_sh_ref), ("a_ref", self.a_ref), ("EgRef", self.eg_ref)];
        for (name, v) in pos {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::validation(format!("datasheet {name} = {v} must be > 0")));
            }
        }
        if !(self.r_s >= T::zero()) {
            return Err(Error::validation(format!("datasheet R_s = {} must be >= 0", self.r_s)));
        }
        if !self.alpha_sc.is_finite() || !self.deg_dt.is_finite() {
            return Err(Error::validation("datasheet temperature coefficients must be finite"));
        }
        Ok(())
    }
}

/// Whether loss parameters must stay physically meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    #[default]
    Physical,
    /// Admits negative or near-unity loss fractions.
    Unconstrained,
}

impl std::str::FromStr for LossMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Self::Physical),
            "unconstrained" => Ok(Self::Unconstrained),
            other => Err(Error::validation(format!("unknown mode {other:?} (physical|unconstrained)"))),
        }
    }
}

/// Plant-level loss and thermal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct LossParams<T> {
    pub lid: T,
    /// Constant heat loss coefficient, W/(m²·K).
    pub u_c: T,
    /// Wind heat loss coefficient, W·s/(m³·K).
    pub u_v: T,
    pub eta_m: T,
    pub iam_b: T,
    pub albedo: T,
    pub wiring: T,
    pub soiling: T,
    pub mismatch: T,
    pub connection: T,
    pub alpha_absorption: T,
    pub nameplate_rating: T,
    pub n_modules: u32,
}

impl<T: Real> Default for LossParams<T> {
    /// Starting values of the calibration workflow; `alpha_absorption`,
    /// `mismatch`, `connection` and `nameplate_rating` are not part of that
    /// table and take 0.9 / 0 / 0 / 0. `n_modules` = 1000 is a fixture value.
    fn default() -> Self {
        let l = T::lit;
        Self {
            lid: l(0.15),
            u_c: l(20.0),
            u_v: l(0.0),
            eta_m: l(0.1),
            iam_b: l(0.05),
            albedo: l(0.2),
            wiring: l(0.02),
            soiling: l(0.02),
            mismatch: l(0.0),
            connection: l(0.0),
            alpha_absorption: l(0.9),
            nameplate_rating: l(0.0),
            n_modules: 1000,
        }
    }
}

impl<T: Real> LossParams<T> {
    /// The fractional losses entering `(1 - x)` factors.
    pub fn loss_fractions(&self) -> [(&'static str, T); 6] {
        [
            ("lid", self.lid),
            ("wiring", self.wiring),
            ("soiling", self.soiling),
            ("mismatch", self.mismatch),
            ("connection", self.connection),
            ("nameplate_rating", self.nameplate_rating),
        ]
    }

    /// Names of parameters violating the physical-mode invariants.
    pub fn physical_violations(&self) -> Vec<&'static str> {
        let zero = T::zero();
        let one = T::one();
        let mut out = Vec::new();
        for (name, v) in self.loss_fractions() {
            if !(v >= zero && v < one) {
                out.push(name);
            }
        }
        if !(self.albedo > zero && self.albedo < one) {
            out.push("albedo");
        }
        if !(self.eta_m > zero && self.eta_m < one) {
            out.push("eta_m");
        }
        if !(self.alpha_absorption > zero && self.alpha_absorption <= one) {
            out.push("alpha_absorption");
        }
        if !(self.iam_b >= zero) {
            out.push("iam_b");
        }
        out
    }

    pub fn validate(&self, mode: LossMode) -> Result<()> {
        if !(self.u_c > T::zero()) || !(self.u_v >= T::zero()) {
            return Err(Error::Config(format!(
                "heat loss coefficients must satisfy u_c > 0 and u_v >= 0 (u_c = {}, u_v = {})",
                self.u_c, self.u_v
            )));
        }
        if self.n_modules < 1 {
            return Err(Error::validation("n_modules must be >= 1"));
        }
        let all_finite = self.loss_fractions().iter().all(|(_, v)| v.is_finite())
            && [self.eta_m, self.iam_b, self.albedo, self.alpha_absorption].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::validation("loss parameters must be finite"));
        }
        if mode == LossMode::Physical {
            let bad = self.physical_violations();
            if !bad.is_empty() {
                return Err(Error::validation(format!(
                    "loss parameters outside physical range: {}",
                    bad.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Operating-condition single-diode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams<T> {
    pub i_l: T,
    pub i_o: T,
    pub r_s: T,
    /// Infinite when the effective irradiance is zero.
    pub r_sh: T,
    #[serde(rename = "nNsVth")]
    pub n_ns_vth: T,
}

impl<T: Real> DiodeParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.i_o > z && self.r_sh > z && self.n_ns_vth > z && self.i_l >= z && self.r_s >= z) {
            return Err(Error::validation(format!("invalid diode parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatingPoint<T> {
    pub v_mp: T,
    pub i_mp: T,
    pub p_mp: T,
    pub v_oc: T,
    pub i_sc: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PlantConfig<T> {
    pub site: SiteLocation<T>,
    pub orientation: SurfaceOrientation<T>,
    pub datasheet: ModuleDatasheet<T>,
    pub losses: LossParams<T>,
    #[serde(default)]
    pub mode: LossMode,
}

impl<T: Real> PlantConfig<T> {
    /// Fixture plant at `site`: equator-facing at latitude tilt, fixture module, default losses.
    pub fn fixture(site: SiteLocation<T>) -> Self {
        Self {
            site,
            orientation: SurfaceOrientation::facing_equator(&site),
            datasheet: ModuleDatasheet::fixture(),
            losses: LossParams::default(),
            mode: LossMode::Physical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        self.orientation.validate()?;
        self.datasheet.validate()?;
        self.losses.validate(self.mode)
    }
}

/// Plant output in kW aligned with its weather timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries<T> {
    pub timestamps: Vec<DateTime<Utc>>,
    pub power_kw: Vec<T>,
}

impl<T: Real> PowerSeries<T> {
    pub fn new(timestamps: Vec<DateTime<Utc>>, power_kw: Vec<T>) -> Result<Self> {
        if timestamps.len() != power_kw.len() {
            return Err(Error::validation(format!(
                "power series has {} timestamps but {} values",
                timestamps.len(),
                power_kw.len()
            )));
        }
        Ok(Self { timestamps, power_kw })
    }

    pub fn len(&self) -> usize {
        self.power_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_kw.is_empty()
    }

    /// Checks that both series share exactly the same timestamps.
    pub fn ensure_aligned(&self, other: &PowerSeries<T>) -> Result<()> {
        if self.timestamps != other.timestamps {
            return Err(Error::validation("power series timestamps are not aligned"));
        }
        Ok(())
    }
}
