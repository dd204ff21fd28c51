//! Sun position and angle of incidence on a tilted plane.
//!
//! Sun position uses the low-order Meeus series (as in the NOAA solar
//! calculator): geometric mean longitude and anomaly, equation of centre,
//! apparent longitude, obliquity correction, then declination and the
//! equation of time. Accuracy is a few hundredths of a degree for
//! 1950–2100, well inside the 0.5° the irradiance model needs.

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const J2000: f64 = 2_451_545.0;
const DAYS_PER_CENTURY: f64 = 36_525.0;
const FIRST_YEAR: i32 = 1950;
const LAST_YEAR: i32 = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation<T> {
    /// Degrees north.
    pub latitude: T,
    /// Degrees east.
    pub longitude: T,
    /// Metres above sea level.
    pub altitude: T,
    /// Hours from UTC; only used to interpret local-time input files.
    pub timezone_offset: T,
}

impl<T: Real> SiteLocation<T> {
    pub fn new(latitude: T, longitude: T, altitude: T, timezone_offset: T) -> Result<Self> {
        let site = Self { latitude, longitude, altitude, timezone_offset };
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |x: T, lo: f64, hi: f64| x >= T::lit(lo) && x <= T::lit(hi);
        if !in_range(self.latitude, -90.0, 90.0) {
            return Err(Error::validation(format!("latitude {} outside [-90, 90]", self.latitude)));
        }
        if !in_range(self.longitude, -180.0, 180.0) {
            return Err(Error::validation(format!("longitude {} outside [-180, 180]", self.longitude)));
        }
        if !(self.altitude >= T::lit(-430.0)) {
            return Err(Error::validation(format!("altitude {} below -430 m", self.altitude)));
        }
        if !in_range(self.timezone_offset, -14.0, 14.0) {
            return Err(Error::validation(format!("timezone offset {} h outside [-14, 14]", self.timezone_offset)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition<T> {
    /// Apparent (refraction corrected) zenith, degrees in [0, 180].
    pub zenith: T,
    /// Degrees clockwise from north in [0, 360).
    pub azimuth: T,
}

impl<T: Real> SolarPosition<T> {
    pub fn apparent_elevation(&self) -> T {
        T::lit(90.0) - self.zenith
    }

    pub fn is_up(&self) -> bool {
        self.zenith < T::lit(90.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOrientation<T> {
    /// Degrees from horizontal, [0, 90].
    pub tilt: T,
    /// Degrees clockwise from north, [0, 360).
    pub surface_azimuth: T,
}

impl<T: Real> SurfaceOrientation<T> {
    pub fn new(tilt: T, surface_azimuth: T) -> Result<Self> {
        let s = Self { tilt, surface_azimuth };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tilt >= T::zero() && self.tilt <= T::lit(90.0)) {
            return Err(Error::validation(format!("tilt {} outside [0, 90]", self.tilt)));
        }
        if !(self.surface_azimuth >= T::zero() && self.surface_azimuth < T::lit(360.0)) {
            return Err(Error::validation(format!(
                "surface azimuth {} outside [0, 360)",
                self.surface_azimuth
            )));
        }
        Ok(())
    }

    /// Fixed-tilt convention: tilt equal to |latitude|, facing the equator.
    pub fn facing_equator(site: &SiteLocation<T>) -> Self {
        let surface_azimuth = if site.latitude >= T::zero() { T::lit(180.0) } else { T::zero() };
        Self { tilt: site.latitude.abs(), surface_azimuth }
    }
}

/// Low-precision solar coordinates for one instant.
struct SunCoordinates<T> {
    declination_deg: T,
    equation_of_time_min: T,
}

fn julian_centuries(ts: &DateTime<Utc>) -> f64 {
    let unix_days = ts.timestamp() as f64 / 86_400.0 + f64::from(ts.timestamp_subsec_nanos()) * 1e-9 / 86_400.0;
    let jd = unix_days + 2_440_587.5;
    (jd - J2000) / DAYS_PER_CENTURY
}

fn sun_coordinates<T: Real>(jc: T) -> SunCoordinates<T> {
    let l = T::lit;
    let mean_long = (l(280.466_46) + jc * (l(36_000.769_83) + jc * l(0.000_303_2))) % l(360.0);
    let mean_anom = l(357.529_11) + jc * (l(35_999.050_29) - l(0.000_153_7) * jc);
    let ecc = l(0.016_708_634) - jc * (l(0.000_042_037) + l(0.000_000_126_7) * jc);
    let m = mean_anom.to_radians();
    let centre = m.sin() * (l(1.914_602) - jc * (l(0.004_817) + l(0.000_014) * jc))
        + (m + m).sin() * (l(0.019_993) - l(0.000_101) * jc)
        + (l(3.0) * m).sin() * l(0.000_289);
    let true_long = mean_long + centre;
    let omega = (l(125.04) - l(1934.136) * jc).to_radians();
    let app_long = true_long - l(0.005_69) - l(0.004_78) * omega.sin();
    let mean_obliq = l(23.0)
        + (l(26.0) + (l(21.448) - jc * (l(46.815) + jc * (l(0.000_59) - jc * l(0.001_813)))) / l(60.0)) / l(60.0);
    let obliq = (mean_obliq + l(0.002_56) * omega.cos()).to_radians();
    let declination = (obliq.sin() * app_long.to_radians().sin()).asin();

    let y = (obliq / l(2.0)).tan().powi(2);
    let l0 = mean_long.to_radians();
    let eot_rad = y * (l0 + l0).sin() - l(2.0) * ecc * m.sin()
        + l(4.0) * ecc * y * m.sin() * (l0 + l0).cos()
        - l(0.5) * y * y * (l(4.0) * l0).sin()
        - l(1.25) * ecc * ecc * (m + m).sin();
    SunCoordinates {
        declination_deg: declination.to_degrees(),
        equation_of_time_min: l(4.0) * eot_rad.to_degrees(),
    }
}

/// Atmospheric refraction in degrees for a true elevation in degrees.
///
/// Saemundsson's formula; zero below -1° and above 85°.
fn refraction<T: Real>(elevation: T) -> T {
    let l = T::lit;
    if elevation <= l(-1.0) || elevation >= l(85.0) {
        return T::zero();
    }
    let arcmin = l(1.02) / (elevation + l(10.3) / (elevation + l(5.11))).to_radians().tan();
    arcmin.max(T::zero()) / l(60.0)
}

fn check_year(ts: &DateTime<Utc>) -> Result<()> {
    if ts.year() < FIRST_YEAR || ts.year() > LAST_YEAR {
        return Err(Error::Range(format!(
            "timestamp {ts} outside supported years {FIRST_YEAR}-{LAST_YEAR}"
        )));
    }
    Ok(())
}

/// Apparent sun position at `ts` seen from `site`.
pub fn solar_position<T: Real>(ts: &DateTime<Utc>, site: &SiteLocation<T>) -> Result<SolarPosition<T>> {
    check_year(ts)?;
    let l = T::lit;
    let sun = sun_coordinates(T::lit(julian_centuries(ts)));

    let minutes = f64::from(ts.num_seconds_from_midnight()) / 60.0 + f64::from(ts.nanosecond() % 1_000_000_000) * 1e-9 / 60.0;
    let solar_time = (T::lit(minutes) + sun.equation_of_time_min + l(4.0) * site.longitude) % l(1440.0);
    let hour_angle = (solar_time / l(4.0) - l(180.0)).to_radians();

    let lat = site.latitude.to_radians();
    let dec = sun.declination_deg.to_radians();
    let cos_zen = (lat.sin() * dec.sin() + lat.cos() * dec.cos() * hour_angle.cos()).max(-T::one()).min(T::one());
    let true_zenith = cos_zen.acos().to_degrees();

    let azimuth_south = hour_angle
        .sin()
        .atan2(hour_angle.cos() * lat.sin() - dec.tan() * lat.cos())
        .to_degrees();
    let mut azimuth = (azimuth_south + l(180.0)) % l(360.0);
    if azimuth < T::zero() {
        azimuth = azimuth + l(360.0);
    }
    if azimuth >= l(360.0) {
        azimuth = azimuth - l(360.0);
    }

    let elevation = l(90.0) - true_zenith;
    let zenith = (l(90.0) - (elevation + refraction(elevation))).max(T::zero()).min(l(180.0));
    Ok(SolarPosition { zenith, azimuth })
}

/// Equation of time in minutes at `ts`.
pub fn equation_of_time<T: Real>(ts: &DateTime<Utc>) -> Result<T> {
    check_year(ts)?;
    Ok(sun_coordinates(T::lit(julian_centuries(ts))).equation_of_time_min)
}

/// UTC instant of local solar noon on `date` at `site`.
pub fn solar_noon<T: Real>(date: NaiveDate, site: &SiteLocation<T>) -> Result<DateTime<Utc>> {
    let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("valid midnight"));
    check_year(&midnight)?;
    // two fixed-point passes on the equation of time evaluated at the noon estimate
    let mut noon_min = 720.0 - 4.0 * site.longitude.as_f64();
    for _ in 0..2 {
        let at = midnight + chrono::Duration::milliseconds((noon_min * 60_000.0).round() as i64);
        let eot = sun_coordinates(f64::lit(julian_centuries(&at))).equation_of_time_min;
        noon_min = 720.0 - 4.0 * site.longitude.as_f64() - eot;
    }
    Ok(midnight + chrono::Duration::milliseconds((noon_min * 60_000.0).round() as i64))
}

/// Angle between the sun vector and the surface normal, degrees in [0, 180].
pub fn angle_of_incidence<T: Real>(pos: &SolarPosition<T>, surf: &SurfaceOrientation<T>) -> T {
    let zen = pos.zenith.to_radians();
    let tilt = surf.tilt.to_radians();
    let daz = (pos.azimuth - surf.surface_azimuth).to_radians();
    let cos_aoi = tilt.cos() * zen.cos() + tilt.sin() * zen.sin() * daz.cos();
    cos_aoi.max(-T::one()).min(T::one()).acos().to_degrees().max(T::zero()).min(T::lit(180.0))
}
