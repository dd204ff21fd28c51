use serde::{Deserialize, Serialize};

use super::{LossParams, WeatherSample};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solar_geometry::{angle_of_incidence, SolarPosition, SurfaceOrientation};

/// Solar constant used for the clearness index, W/m².
const SOLAR_CONSTANT: f64 = 1367.0;
/// Above this zenith all irradiance is treated as diffuse.
const HORIZON_ZENITH: f64 = 87.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoaComponents<T> {
    pub beam: T,
    pub sky_diffuse: T,
    pub ground_reflected: T,
    /// Sum of the components after soiling, W/m².
    pub effective: T,
}

/// ASHRAE-form incidence angle modifier, zero at and beyond grazing incidence.
pub fn incidence_angle_modifier<T: Real>(aoi_deg: T, iam_b: T) -> T {
    if aoi_deg >= T::lit(90.0) {
        return T::zero();
    }
    let cos_aoi = aoi_deg.to_radians().cos();
    (T::one() - iam_b * (T::one() / cos_aoi - T::one())).max(T::zero()).min(T::one())
}

/// Isotropic-sky transposition onto the module plane.
pub fn poa_irradiance<T: Real>(
    w: &WeatherSample<T>,
    pos: &SolarPosition<T>,
    surf: &SurfaceOrientation<T>,
    losses: &LossParams<T>,
) -> Result<PoaComponents<T>> {
    w.validate()?;
    let (Some(dni), Some(dhi)) = (w.dni, w.dhi) else {
        return Err(Error::validation(format!(
            "{}: dni/dhi missing; decompose GHI first",
            w.timestamp
        )));
    };
    let half = T::lit(0.5);
    let aoi = angle_of_incidence(pos, surf);
    let cos_aoi = aoi.to_radians().cos().max(T::zero());
    let cos_tilt = surf.tilt.to_radians().cos();

    let beam = dni * cos_aoi * incidence_angle_modifier(aoi, losses.iam_b);
    let sky_diffuse = dhi * (T::one() + cos_tilt) * half;
    let ground_reflected = (w.ghi * losses.albedo * (T::one() - cos_tilt) * half).max(T::zero());
    let effective = (beam + sky_diffuse + ground_reflected) * (T::one() - losses.soiling);
    Ok(PoaComponents { beam, sky_diffuse, ground_reflected, effective: effective.max(T::zero()) })
}

/// Loss-free plane-of-array global irradiance: no IAM, no soiling, configured albedo.
///
/// Used as the irradiance coordinate when a weather sample is fed to a
/// (G, T) regression surrogate.
pub fn poa_equivalent<T: Real>(
    w: &WeatherSample<T>,
    pos: &SolarPosition<T>,
    surf: &SurfaceOrientation<T>,
    albedo: T,
) -> Result<T> {
    let bare = LossParams { iam_b: T::zero(), soiling: T::zero(), albedo, ..LossParams::default() };
    poa_irradiance(w, pos, surf, &bare).map(|c| c.effective)
}

/// Splits GHI into (DNI, DHI) with the Erbs diffuse-fraction correlation.
///
/// DHI is formed as the remainder `ghi - dni * cos(zenith)` so the split
/// reconstructs GHI.
pub fn decompose_ghi<T: Real>(ghi: T, zenith_deg: T) -> Result<(T, T)> {
    if !(ghi >= T::zero()) || !ghi.is_finite() {
        return Err(Error::validation(format!("ghi {ghi} must be finite and >= 0")));
    }
    if ghi == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    if zenith_deg >= T::lit(HORIZON_ZENITH) {
        return Ok((T::zero(), ghi));
    }
    let l = T::lit;
    let cos_z = zenith_deg.to_radians().cos();
    let kt = (ghi / (l(SOLAR_CONSTANT) * cos_z)).max(T::zero()).min(T::one());
    let diffuse_fraction = if kt <= l(0.22) {
        T::one() - l(0.09) * kt
    } else if kt <= l(0.8) {
        l(0.9511) - l(0.1604) * kt + l(4.388) * kt.powi(2) - l(16.638) * kt.powi(3) + l(12.336) * kt.powi(4)
    } else {
        l(0.165)
    };
    let dni = (ghi * (T::one() - diffuse_fraction) / cos_z).max(T::zero());
    let dhi = ghi - dni * cos_z;
    Ok((dni, dhi))
}
