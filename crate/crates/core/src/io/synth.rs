//! Seeded synthetic weather for fixtures and demonstrations.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pv_model::{decompose_ghi, WeatherSample, WeatherSeries};
use crate::solar_geometry::{solar_position, SiteLocation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub start: DateTime<Utc>,
    pub days: u32,
    pub step_minutes: u32,
    pub seed: u64,
    /// Daily mean air temperature, °C.
    pub mean_temp: f64,
    /// Half the diurnal temperature swing, °C.
    pub temp_amplitude: f64,
    pub mean_wind: f64,
    /// 0 gives clear sky throughout.
    pub cloudiness: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap(),
            days: 10,
            step_minutes: 15,
            seed: 0,
            mean_temp: 24.0,
            temp_amplitude: 6.0,
            mean_wind: 3.0,
            cloudiness: 0.3,
        }
    }
}

/// Clear-sky GHI of the Haurwitz model, W/m².
fn haurwitz(zenith_deg: f64) -> f64 {
    let c = zenith_deg.to_radians().cos();
    if c <= 0.0 {
        0.0
    } else {
        1098.0 * c * (-0.057 / c).exp()
    }
}

/// Clear-sky irradiance attenuated by an AR(1) cloud process, a sinusoidal
/// diurnal temperature and noisy wind. Beam and diffuse come from the GHI
/// decomposition, so the series is flagged as decomposed.
pub fn synthetic_weather(site: &SiteLocation<f64>, spec: &SynthSpec) -> Result<WeatherSeries<f64>> {
    if spec.days == 0 || spec.step_minutes == 0 {
        return Err(Error::validation("synthetic weather needs days >= 1 and step_minutes >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.cloudiness) {
        return Err(Error::validation(format!("cloudiness {} must lie in [0, 1]", spec.cloudiness)));
    }
    let n = (spec.days as i64 * 24 * 60 / spec.step_minutes as i64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let step_h = spec.step_minutes as f64 / 60.0;
    // cloud state decorrelates over roughly two hours
    let phi = (-step_h / 2.0).exp();
    let mut cloud = 0.0_f64;

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let timestamp = spec.start + Duration::minutes(k as i64 * spec.step_minutes as i64);
        let pos = solar_position(&timestamp, site)?;
        cloud = phi * cloud + (1.0 - phi * phi).sqrt() * unit.sample(&mut rng);
        let cover = (spec.cloudiness * (1.0 + cloud)).clamp(0.0, 0.9);
        let ghi = haurwitz(pos.zenith) * (1.0 - cover);
        let (dni, dhi) = decompose_ghi(ghi, pos.zenith)?;

        let local_h = (timestamp.timestamp() as f64 / 3600.0 + site.timezone_offset).rem_euclid(24.0);
        let diurnal = (std::f64::consts::TAU * (local_h - 9.0) / 24.0).sin();
        let temp_air = spec.mean_temp + spec.temp_amplitude * diurnal + 0.3 * unit.sample(&mut rng);
        let wind_speed = (spec.mean_wind + rng.gen_range(-1.0..1.0_f64) * spec.mean_wind * 0.5).max(0.0);
        samples.push(WeatherSample { timestamp, ghi, dni: Some(dni), dhi: Some(dhi), temp_air, wind_speed });
    }
    let mut series = WeatherSeries::new(samples)?;
    series.decomposed = true;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let site = SiteLocation::new(36.8, 10.2, 10.0, 1.0).unwrap();
        let spec = SynthSpec { days: 2, seed: 9, ..SynthSpec::default() };
        let a = synthetic_weather(&site, &spec).unwrap();
        let b = synthetic_weather(&site, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 96);
        let peak = a.samples().iter().map(|s| s.ghi).fold(0.0, f64::max);
        assert!(peak > 400.0 && peak < 1100.0, "{peak}");
        assert!(a.samples().iter().any(|s| s.ghi == 0.0));
        let other = synthetic_weather(&site, &SynthSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn clear_sky_peaks_near_noon() {
        assert!((haurwitz(0.0) - 1098.0 * (-0.057f64).exp()).abs() < 1e-12);
        assert_eq!(haurwitz(95.0), 0.0);
    }
}
