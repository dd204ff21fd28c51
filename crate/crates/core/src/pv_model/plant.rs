use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cell_temperature, decompose_ghi, desoto_params, max_power_point, poa_irradiance, LossMode, LossParams,
    ModuleDatasheet, OperatingPoint, PlantConfig, PoaComponents, PowerSeries, WeatherSample, WeatherSeries,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solar_geometry::{angle_of_incidence, solar_position, SolarPosition};

/// Effective irradiance below which the plant produces nothing, W/m².
pub const MIN_EFFECTIVE_IRRADIANCE: f64 = 1.0;

/// Applies the DC loss chain to one module's maximum power (W), returning plant kW.
pub fn system_power<T: Real>(p_mp: T, losses: &LossParams<T>, mode: LossMode) -> Result<T> {
    if !(p_mp >= T::zero()) {
        return Err(Error::validation(format!("module power {p_mp} must be >= 0")));
    }
    let chain = [losses.mismatch, losses.wiring, losses.connection, losses.lid, losses.nameplate_rating];
    if mode == LossMode::Physical {
        if let Some(bad) = chain.iter().find(|&&x| T::one() - x < T::zero()) {
            return Err(Error::validation(format!("loss factor 1 - {bad} is negative")));
        }
    }
    let n = T::from_u32(losses.n_modules).expect("module count representable");
    let derate = chain.iter().fold(T::one(), |acc, &x| acc * (T::one() - x));
    Ok(p_mp / T::lit(1000.0) * n * derate)
}

/// Plant kW from an effective (post-soiling) plane-of-array irradiance.
pub fn dc_power_kw<T: Real>(
    g_eff: T,
    temp_air: T,
    wind: T,
    datasheet: &ModuleDatasheet<T>,
    losses: &LossParams<T>,
    mode: LossMode,
) -> Result<(T, OperatingPoint<T>, T)> {
    let t_cell = cell_temperature(g_eff, temp_air, wind, losses)?;
    if g_eff < T::lit(MIN_EFFECTIVE_IRRADIANCE) {
        return Ok((t_cell, OperatingPoint::default(), T::zero()));
    }
    let dp = desoto_params(g_eff, t_cell, datasheet)?;
    let op = max_power_point(&dp)?;
    let kw = system_power(op.p_mp, losses, mode)?;
    Ok((t_cell, op, kw))
}

/// Plant kW when the irradiance is already a plane-of-array total (soiling still applies).
pub fn power_from_poa<T: Real>(g_poa: T, temp_air: T, wind: T, cfg: &PlantConfig<T>) -> Result<T> {
    let g_eff = (g_poa * (T::one() - cfg.losses.soiling)).max(T::zero());
    dc_power_kw(g_eff, temp_air, wind, &cfg.datasheet, &cfg.losses, cfg.mode).map(|(_, _, kw)| kw)
}

/// Every intermediate quantity of one simulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBreakdown<T> {
    pub position: SolarPosition<T>,
    pub aoi: T,
    pub dni: T,
    pub dhi: T,
    pub poa: PoaComponents<T>,
    pub t_cell: T,
    pub operating_point: OperatingPoint<T>,
    pub power_kw: T,
}

fn in_context(err: Error, ts: &chrono::DateTime<chrono::Utc>) -> Error {
    match err {
        Error::Validation(m) => Error::Validation(format!("{ts}: {m}")),
        Error::Config(m) => Error::Config(format!("{ts}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{ts}: {m}")),
        Error::Range(m) => Error::Range(format!("{ts}: {m}")),
        other => other,
    }
}

pub fn simulate_sample<T: Real>(w: &WeatherSample<T>, cfg: &PlantConfig<T>) -> Result<SampleBreakdown<T>> {
    let run = || -> Result<SampleBreakdown<T>> {
        let position = solar_position(&w.timestamp, &cfg.site)?;
        let (dni, dhi) = match (w.dni, w.dhi) {
            (Some(dni), Some(dhi)) => (dni, dhi),
            _ => decompose_ghi(w.ghi, position.zenith)?,
        };
        let full = WeatherSample { dni: Some(dni), dhi: Some(dhi), ..*w };
        let aoi = angle_of_incidence(&position, &cfg.orientation);
        let poa = poa_irradiance(&full, &position, &cfg.orientation, &cfg.losses)?;
        let (t_cell, operating_point, power_kw) =
            dc_power_kw(poa.effective, w.temp_air, w.wind_speed, &cfg.datasheet, &cfg.losses, cfg.mode)?;
        Ok(SampleBreakdown { position, aoi, dni, dhi, poa, t_cell, operating_point, power_kw })
    };
    run().map_err(|e| in_context(e, &w.timestamp))
}

/// Simulates plant output for every weather sample. Samples are evaluated
/// in parallel; the result does not depend on evaluation order.
pub fn simulate_series<T: Real>(weather: &WeatherSeries<T>, cfg: &PlantConfig<T>) -> Result<PowerSeries<T>> {
    cfg.validate()?;
    let results: Vec<Result<T>> = weather
        .samples()
        .par_iter()
        .map(|w| simulate_sample(w, cfg).map(|b| b.power_kw))
        .collect();
    let power_kw = results.into_iter().collect::<Result<Vec<T>>>()?;
    PowerSeries::new(weather.timestamps(), power_kw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_single_module() {
        let losses = LossParams {
            mismatch: 0.0,
            wiring: 0.0,
            connection: 0.0,
            lid: 0.0,
            nameplate_rating: 0.0,
            n_modules: 1,
            ..LossParams::default()
        };
        assert!((system_power(250.0_f64, &losses, LossMode::Physical).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chain_arithmetic() {
        let losses = LossParams {
            mismatch: 0.01,
            wiring: 0.02,
            connection: 0.005,
            lid: 0.15,
            nameplate_rating: 0.0,
            n_modules: 10,
            ..LossParams::default()
        };
        let kw = system_power(300.0_f64, &losses, LossMode::Physical).unwrap();
        let expected = 3.0 * 0.99 * 0.98 * 0.995 * 0.85;
        assert!((kw - expected).abs() < 1e-12);
        assert!((kw - 2.4616).abs() < 5e-5);
    }

    #[test]
    fn zero_power_for_any_losses() {
        let losses = LossParams { wiring: -0.1, soiling: -0.1, ..LossParams::default() };
        assert_eq!(system_power(0.0, &losses, LossMode::Unconstrained).unwrap(), 0.0);
    }

    #[test]
    fn negative_factor_only_in_unconstrained_mode() {
        let losses = LossParams { lid: 1.2, ..LossParams::default() };
        assert!(system_power(100.0, &losses, LossMode::Physical).is_err());
        assert!(system_power(100.0, &losses, LossMode::Unconstrained).unwrap() < 0.0);
    }

    #[test]
    fn homogeneous_in_power_and_module_count() {
        let mut losses = LossParams::<f64>::default();
        let a = system_power(120.0, &losses, LossMode::Physical).unwrap();
        let b = system_power(240.0, &losses, LossMode::Physical).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        losses.n_modules *= 3;
        let c = system_power(120.0, &losses, LossMode::Physical).unwrap();
        assert!((c - 3.0 * a).abs() < 1e-12);
    }
}
