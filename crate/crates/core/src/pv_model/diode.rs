use super::{DiodeParams, ModuleDatasheet, OperatingPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boltzmann constant, eV/K.
pub const BOLTZMANN_EV: f64 = 8.617332e-5;
/// Reference cell temperature, °C.
pub const T_REF_C: f64 = 25.0;
/// Reference irradiance, W/m².
pub const G_REF: f64 = 1000.0;

const KELVIN: f64 = 273.15;
const MAX_ITER: usize = 200;

/// Translates datasheet reference constants to operating conditions.
pub fn desoto_params<T: Real>(g_eff: T, t_cell: T, ds: &ModuleDatasheet<T>) -> Result<DiodeParams<T>> {
    let l = T::lit;
    if !(g_eff >= T::zero()) {
        return Err(Error::validation(format!("effective irradiance {g_eff} must be >= 0")));
    }
    if !(t_cell > l(-KELVIN)) {
        return Err(Error::validation(format!("cell temperature {t_cell} °C below absolute zero")));
    }
    // Both temperatures go through the same conversion so reference conditions reproduce exactly.
    let t_k = t_cell + l(KELVIN);
    let t_ref_k = l(T_REF_C) + l(KELVIN);
    let dt = t_cell - l(T_REF_C);
    let ratio = t_k / t_ref_k;

    let n_ns_vth = ds.a_ref * ratio;
    let i_l = g_eff / l(G_REF) * (ds.i_l_ref + ds.alpha_sc * dt);
    let eg = ds.eg_ref * (T::one() + ds.deg_dt * dt);
    let i_o = ds.i_o_ref * ratio.powi(3) * ((ds.eg_ref / t_ref_k - eg / t_k) / l(BOLTZMANN_EV)).exp();
    let r_sh = if g_eff > T::zero() { ds.r_sh_ref * (l(G_REF) / g_eff) } else { T::infinity() };

    Ok(DiodeParams { i_l: i_l.max(T::zero()), i_o, r_s: ds.r_s, r_sh, n_ns_vth })
}

/// Residual of the implicit diode equation and its derivative with respect to `i`.
#[inline]
fn current_residual<T: Real>(dp: &DiodeParams<T>, v: T, i: T) -> (T, T) {
    let vd = v + i * dp.r_s;
    let e = (vd / dp.n_ns_vth).exp();
    let f = dp.i_l - dp.i_o * (e - T::one()) - vd / dp.r_sh - i;
    let df = -dp.i_o * e * dp.r_s / dp.n_ns_vth - dp.r_s / dp.r_sh - T::one();
    (f, df)
}

/// Safeguarded Newton iteration on a strictly decreasing function with `f(lo) >= 0 >= f(hi)`.
fn decreasing_root<T: Real, F>(f: F, mut lo: T, mut hi: T, start: T, tol: T, what: &str) -> Result<T>
where
    F: Fn(T) -> (T, T),
{
    let mut x = start.max(lo).min(hi);
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if fx.abs() < tol {
            return Ok(x);
        }
        if fx > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let width_floor = T::epsilon() * T::lit(4.0) * (T::one() + x.abs());
        if hi - lo <= width_floor {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            lo + (hi - lo) / T::lit(2.0)
        };
    }
    Err(Error::numerical(format!("{what} did not converge in {MAX_ITER} iterations")))
}

/// Terminal current at voltage `v`.
pub fn solve_current<T: Real>(dp: &DiodeParams<T>, v: T) -> Result<T> {
    if !(v >= T::zero()) {
        return Err(Error::validation(format!("voltage {v} must be >= 0")));
    }
    let tol = T::tol_floor(1e-10) * dp.i_l.max(T::one());
    let residual = |i: T| current_residual(dp, v, i);

    let hi = dp.i_l + dp.i_o;
    let mut lo = -(T::one() + dp.i_l);
    let mut expansions = 0;
    while residual(lo).0 < T::zero() {
        lo = lo * T::lit(2.0);
        expansions += 1;
        if expansions > MAX_ITER {
            return Err(Error::numerical(format!("could not bracket current at v = {v}")));
        }
    }
    // explicit series-free estimate as the starting point
    let start = dp.i_l - dp.i_o * ((v / dp.n_ns_vth).exp() - T::one()) - v / dp.r_sh;
    decreasing_root(residual, lo, hi, start, tol, "current solve")
}

/// Voltage at which the terminal current is zero.
pub fn open_circuit_voltage<T: Real>(dp: &DiodeParams<T>) -> Result<T> {
    if dp.i_l <= T::zero() {
        return Ok(T::zero());
    }
    let hi = dp.n_ns_vth * (dp.i_l / dp.i_o).ln_1p();
    let tol = T::tol_floor(1e-12) * dp.i_l.max(T::one());
    let residual = |v: T| {
        let e = (v / dp.n_ns_vth).exp();
        (
            dp.i_l - dp.i_o * (e - T::one()) - v / dp.r_sh,
            -dp.i_o * e / dp.n_ns_vth - T::one() / dp.r_sh,
        )
    };
    decreasing_root(residual, T::zero(), hi, hi, tol, "open-circuit voltage solve")
}

/// Maximum power point by golden-section search over voltage.
pub fn max_power_point<T: Real>(dp: &DiodeParams<T>) -> Result<OperatingPoint<T>> {
    dp.validate()?;
    if dp.i_l <= T::zero() {
        return Ok(OperatingPoint::default());
    }
    let v_oc = open_circuit_voltage(dp)?;
    let i_sc = solve_current(dp, T::zero())?;

    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let power = |v: T| -> Result<(T, T)> {
        let i = solve_current(dp, v)?;
        Ok((v * i, i))
    };

    let mut a = T::zero();
    let mut b = v_oc;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut pc, mut ic) = power(c)?;
    let (mut pd, mut id) = power(d)?;
    let tol = T::tol_floor(1e-10) * v_oc;
    while b - a > tol {
        if pc >= pd {
            b = d;
            d = c;
            pd = pc;
            id = ic;
            c = b - inv_phi * (b - a);
            (pc, ic) = power(c)?;
        } else {
            a = c;
            c = d;
            pc = pd;
            ic = id;
            d = a + inv_phi * (b - a);
            (pd, id) = power(d)?;
        }
    }
    let (v_mp, i_mp) = if pc >= pd { (c, ic) } else { (d, id) };
    let i_mp = i_mp.max(T::zero());
    Ok(OperatingPoint { v_mp, i_mp, p_mp: v_mp * i_mp, v_oc, i_sc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_params() -> DiodeParams<f64> {
        desoto_params(1000.0, 25.0, &ModuleDatasheet::fixture()).unwrap()
    }

    #[test]
    fn reference_conditions_are_a_fixed_point() {
        let ds = ModuleDatasheet::<f64>::fixture();
        let dp = desoto_params(1000.0, 25.0, &ds).unwrap();
        assert_eq!(dp.i_l, ds.i_l_ref);
        assert_eq!(dp.i_o, ds.i_o_ref);
        assert_eq!(dp.r_sh, ds.r_sh_ref);
        assert_eq!(dp.n_ns_vth, ds.a_ref);
        assert_eq!(dp.r_s, ds.r_s);
    }

    #[test]
    fn irradiance_scales_linearly() {
        let ds = ModuleDatasheet::<f64>::fixture();
        let dp = desoto_params(500.0, 25.0, &ds).unwrap();
        assert_eq!(dp.i_l, ds.i_l_ref / 2.0);
        assert_eq!(dp.r_sh, 2.0 * ds.r_sh_ref);
    }

    #[test]
    fn zero_irradiance_gives_infinite_shunt() {
        let dp = desoto_params(0.0, 25.0, &ModuleDatasheet::<f64>::fixture()).unwrap();
        assert!(dp.r_sh.is_infinite());
        assert_eq!(dp.i_l, 0.0);
        assert_eq!(max_power_point(&dp).unwrap(), OperatingPoint::default());
    }

    #[test]
    fn short_circuit_with_no_series_resistance() {
        let mut dp = fixture_params();
        dp.r_s = 0.0;
        assert!((solve_current(&dp, 0.0).unwrap() - dp.i_l).abs() < 1e-12);
    }

    #[test]
    fn dark_cell_at_zero_volts() {
        let mut dp = fixture_params();
        dp.i_l = 0.0;
        assert!(solve_current(&dp, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn negative_voltage_rejected() {
        assert!(solve_current(&fixture_params(), -1.0).is_err());
    }

    #[test]
    fn residual_meets_tolerance_across_curve() {
        let dp = fixture_params();
        let v_oc = open_circuit_voltage(&dp).unwrap();
        for k in 0..=100 {
            let v = v_oc * f64::from(k) / 100.0;
            let i = solve_current(&dp, v).unwrap();
            let (r, _) = current_residual(&dp, v, i);
            assert!(r.abs() < 1e-10 * dp.i_l.max(1.0), "v={v} residual={r}");
        }
    }

    #[test]
    fn ideal_diode_open_circuit_closed_form() {
        let dp = DiodeParams { i_l: 6.0, i_o: 5e-10, r_s: 0.0, r_sh: 1e12, n_ns_vth: 1.6 };
        let v_oc = open_circuit_voltage(&dp).unwrap();
        let expected = 1.6 * (1.0 + 6.0 / 5e-10_f64).ln();
        assert!(((v_oc - expected) / expected).abs() < 1e-6);
        let op = max_power_point(&dp).unwrap();
        assert!(((op.v_oc - expected) / expected).abs() < 1e-6);
    }

    #[test]
    fn operating_point_invariants() {
        let op = max_power_point(&fixture_params()).unwrap();
        assert!(op.v_mp > 0.0 && op.v_mp <= op.v_oc);
        assert!(op.i_mp > 0.0 && op.i_mp <= op.i_sc);
        assert_eq!(op.p_mp, op.v_mp * op.i_mp);
    }

    #[test]
    fn f32_pipeline_agrees_with_f64() {
        let dp64 = fixture_params();
        let dp32 = desoto_params(1000.0_f32, 25.0, &ModuleDatasheet::<f32>::fixture()).unwrap();
        let p64 = max_power_point(&dp64).unwrap().p_mp;
        let p32 = f64::from(max_power_point(&dp32).unwrap().p_mp);
        assert!(((p64 - p32) / p64).abs() < 1e-4, "{p64} vs {p32}");
    }
}
