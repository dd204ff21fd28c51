use super::LossParams;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// PVsyst steady-state cell temperature, °C.
pub fn cell_temperature<T: Real>(g_poa: T, temp_air: T, wind: T, losses: &LossParams<T>) -> Result<T> {
    if !(g_poa >= T::zero()) {
        return Err(Error::validation(format!("plane-of-array irradiance {g_poa} must be >= 0")));
    }
    let heat_loss = losses.u_c + losses.u_v * wind;
    if !(heat_loss > T::zero()) || !heat_loss.is_finite() {
        return Err(Error::Config(format!(
            "heat loss u_c + u_v * wind = {heat_loss} must be positive"
        )));
    }
    Ok(temp_air + g_poa * losses.alpha_absorption * (T::one() - losses.eta_m) / heat_loss)
}
