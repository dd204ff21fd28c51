//! Loss-parameter estimation by cyclic coordinate grid search.
//!
//! Each unfrozen parameter is visited in a fixed order; its grid is centred
//! on the incumbent and spans the full bound range on the first pass. The
//! span of a parameter halves after each visit, except when the best point
//! sits on the grid edge, where it doubles instead so the search can travel
//! along correlated valleys. A candidate replaces the incumbent only if it
//! strictly lowers the objective. After an improving pass the search also
//! tries extrapolating along that pass's net displacement. It ends after the
//! pass budget, or once a pass on an already fine grid stops improving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::pv_model::{poa_equivalent, simulate_series, decompose_ghi, LossMode, LossParams, PlantConfig, PowerSeries, WeatherSeries};
use crate::regressors::{predict_mlp, MlpModel};
use crate::solar_geometry::solar_position;

/// Default tolerance for the percent-within figure of calibration reports, kW.
pub const DEFAULT_REPORT_EPS: f64 = 1.0;

/// Relative improvement of a full pass below which the search stops.
const CONVERGENCE_REL: f64 = 1e-9;

/// A stalled pass only ends the search once every grid span has shrunk below
/// this fraction of its bound range; coarser grids can hide the optimum
/// between two points.
const MIN_SPAN_FRACTION: f64 = 1e-6;

/// Default number of passes.
pub const DEFAULT_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Lid,
    UC,
    UV,
    EtaM,
    IamB,
    Albedo,
    Wiring,
    Soiling,
    Mismatch,
    Connection,
    AlphaAbsorption,
}

impl Param {
    /// Visit order of the search.
    pub const ORDER: [Param; 11] = [
        Param::Lid,
        Param::UC,
        Param::UV,
        Param::EtaM,
        Param::IamB,
        Param::Albedo,
        Param::Wiring,
        Param::Soiling,
        Param::Mismatch,
        Param::Connection,
        Param::AlphaAbsorption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Lid => "lid",
            Param::UC => "u_c",
            Param::UV => "u_v",
            Param::EtaM => "eta_m",
            Param::IamB => "iam_b",
            Param::Albedo => "albedo",
            Param::Wiring => "wiring",
            Param::Soiling => "soiling",
            Param::Mismatch => "mismatch",
            Param::Connection => "connection",
            Param::AlphaAbsorption => "alpha_absorption",
        }
    }

    pub fn get(self, p: &LossParams<f64>) -> f64 {
        match self {
            Param::Lid => p.lid,
            Param::UC => p.u_c,
            Param::UV => p.u_v,
            Param::EtaM => p.eta_m,
            Param::IamB => p.iam_b,
            Param::Albedo => p.albedo,
            Param::Wiring => p.wiring,
            Param::Soiling => p.soiling,
            Param::Mismatch => p.mismatch,
            Param::Connection => p.connection,
            Param::AlphaAbsorption => p.alpha_absorption,
        }
    }

    pub fn set(self, p: &mut LossParams<f64>, v: f64) {
        let slot = match self {
            Param::Lid => &mut p.lid,
            Param::UC => &mut p.u_c,
            Param::UV => &mut p.u_v,
            Param::EtaM => &mut p.eta_m,
            Param::IamB => &mut p.iam_b,
            Param::Albedo => &mut p.albedo,
            Param::Wiring => &mut p.wiring,
            Param::Soiling => &mut p.soiling,
            Param::Mismatch => &mut p.mismatch,
            Param::Connection => &mut p.connection,
            Param::AlphaAbsorption => &mut p.alpha_absorption,
        };
        *slot = v;
    }

    fn is_fraction(self) -> bool {
        matches!(
            self,
            Param::Lid
                | Param::EtaM
                | Param::Albedo
                | Param::Wiring
                | Param::Soiling
                | Param::Mismatch
                | Param::Connection
        )
    }
}

impl std::str::FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Param::ORDER
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown loss parameter {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lower: f64,
    pub upper: f64,
    pub grid_points: usize,
    #[serde(default)]
    pub frozen: bool,
}

impl ParamRange {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper, grid_points: 11, frozen: false }
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Search ranges for every loss parameter, in visit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub ranges: Vec<(Param, ParamRange)>,
    /// Tolerance used for the percent-within figure of the reports, kW.
    #[serde(default = "default_report_eps")]
    pub report_eps: f64,
}

fn default_report_eps() -> f64 {
    DEFAULT_REPORT_EPS
}

impl ParameterBounds {
    pub fn physical() -> Self {
        let r = ParamRange::new;
        let ranges = Param::ORDER
            .into_iter()
            .map(|p| {
                let range = match p {
                    Param::Lid => r(0.0, 0.2),
                    Param::UC => r(9.0, 45.0),
                    Param::UV => r(0.0, 6.0),
                    Param::EtaM => r(0.05, 0.3),
                    Param::IamB => r(0.0, 0.2),
                    Param::Albedo => r(0.05, 0.95),
                    Param::Wiring | Param::Soiling | Param::Mismatch | Param::Connection => r(0.0, 0.1),
                    Param::AlphaAbsorption => r(0.7, 1.0),
                };
                (p, range)
            })
            .collect();
        Self { ranges, report_eps: DEFAULT_REPORT_EPS }
    }

    /// Physical bounds with every fractional parameter widened to [-0.2, 0.99].
    pub fn unconstrained() -> Self {
        let mut b = Self::physical();
        for (p, r) in &mut b.ranges {
            if p.is_fraction() {
                r.lower = -0.2;
                r.upper = 0.99;
            }
        }
        b
    }

    pub fn for_mode(mode: LossMode) -> Self {
        match mode {
            LossMode::Physical => Self::physical(),
            LossMode::Unconstrained => Self::unconstrained(),
        }
    }

    pub fn range(&self, p: Param) -> Option<&ParamRange> {
        self.ranges.iter().find(|(q, _)| *q == p).map(|(_, r)| r)
    }

    pub fn range_mut(&mut self, p: Param) -> Option<&mut ParamRange> {
        self.ranges.iter_mut().find(|(q, _)| *q == p).map(|(_, r)| r)
    }

    /// Freezes everything except `free`.
    pub fn only(mut self, free: &[Param]) -> Self {
        for (p, r) in &mut self.ranges {
            r.frozen = !free.contains(p);
        }
        self
    }

    pub fn freeze_all(mut self) -> Self {
        for (_, r) in &mut self.ranges {
            r.frozen = true;
        }
        self
    }

    pub fn with_grid_points(mut self, n: usize) -> Self {
        for (_, r) in &mut self.ranges {
            r.grid_points = n;
        }
        self
    }

    pub fn free_params(&self) -> impl Iterator<Item = (Param, &ParamRange)> + '_ {
        self.ranges.iter().filter(|(_, r)| !r.frozen).map(|(p, r)| (*p, r))
    }

    pub fn validate(&self, mode: LossMode) -> Result<()> {
        for (i, (p, _)) in self.ranges.iter().enumerate() {
            if self.ranges[..i].iter().any(|(q, _)| q == p) {
                return Err(Error::Config(format!("parameter {} listed twice in bounds", p.name())));
            }
        }
        if !(self.report_eps >= 0.0) {
            return Err(Error::Config(format!("report_eps = {} must be >= 0", self.report_eps)));
        }
        for (p, r) in self.free_params() {
            if !(r.lower.is_finite() && r.upper.is_finite() && r.lower < r.upper) {
                return Err(Error::Config(format!("{}: bounds [{}, {}] need lower < upper", p.name(), r.lower, r.upper)));
            }
            if r.grid_points < 2 {
                return Err(Error::Config(format!("{}: need at least 2 grid points", p.name())));
            }
            for v in [r.lower, r.upper] {
                let mut probe = LossParams::default();
                p.set(&mut probe, v);
                let thermal_ok = probe.u_c > 0.0 && probe.u_v >= 0.0;
                let physical_ok = mode != LossMode::Physical || !probe.physical_violations().contains(&p.name());
                if !thermal_ok || !physical_ok {
                    return Err(Error::Config(format!("{}: bound {v} is not admissible in {mode:?} mode", p.name())));
                }
            }
        }
        Ok(())
    }
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self::physical()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params_before: LossParams<f64>,
    pub params_after: LossParams<f64>,
    pub mse_before: f64,
    pub mse_after: f64,
    pub metrics_before: MetricsReport<f64>,
    pub metrics_after: MetricsReport<f64>,
    /// Objective at the start and after every completed pass.
    pub trace: Vec<f64>,
    /// Completed passes.
    pub iterations: usize,
    pub converged: bool,
    pub mode: LossMode,
    /// Parameters of `params_after` outside their physical ranges.
    pub out_of_physical_range: Vec<String>,
}

/// One line of the before/after parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamChange {
    pub parameter: String,
    pub before: f64,
    pub after: f64,
}

impl CalibrationResult {
    pub fn parameter_table(&self) -> Vec<ParamChange> {
        Param::ORDER
            .into_iter()
            .map(|p| ParamChange {
                parameter: p.name().to_string(),
                before: p.get(&self.params_before),
                after: p.get(&self.params_after),
            })
            .collect()
    }
}

fn simulated(losses: &LossParams<f64>, weather: &WeatherSeries<f64>, cfg: &PlantConfig<f64>) -> Result<PowerSeries<f64>> {
    let cfg = PlantConfig { losses: *losses, ..*cfg };
    simulate_series(weather, &cfg)
}

/// Mean squared difference between `target` and the plant simulated with `losses`, kW².
pub fn objective(
    losses: &LossParams<f64>,
    weather: &WeatherSeries<f64>,
    target: &PowerSeries<f64>,
    cfg: &PlantConfig<f64>,
) -> Result<f64> {
    if target.timestamps != weather.timestamps() {
        return Err(Error::validation("target power series is not aligned with the weather series"));
    }
    let sim = simulated(losses, weather, cfg)?;
    Ok(compute_metrics(&target.power_kw, &sim.power_kw, 0.0)?.mse)
}

/// Evenly spaced points of width `span` centred on `centre`, shifted to stay inside the range.
fn grid(range: &ParamRange, centre: f64, span: f64) -> Vec<f64> {
    let span = span.min(range.upper - range.lower);
    let lo = (centre - span / 2.0).clamp(range.lower, (range.upper - span).max(range.lower));
    let n = range.grid_points;
    (0..n).map(|k| (lo + span * k as f64 / (n - 1) as f64).clamp(range.lower, range.upper)).collect()
}

/// Extrapolates along the net displacement of a pass, `current + t * (current - origin)`
/// for doubling `t`, clamped into the bounds. Returns the best trial point.
fn pattern_move(
    origin: &LossParams<f64>,
    current: &LossParams<f64>,
    free: &[(Param, ParamRange)],
    eval: impl Fn(&LossParams<f64>) -> Result<f64> + Sync,
) -> Result<Option<(LossParams<f64>, f64)>> {
    const STEPS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let trials: Vec<LossParams<f64>> = STEPS
        .iter()
        .map(|&t| {
            let mut trial = *current;
            for (p, r) in free {
                let v = p.get(current) + t * (p.get(current) - p.get(origin));
                p.set(&mut trial, v.clamp(r.lower, r.upper));
            }
            trial
        })
        .collect();
    let scores: Vec<Result<f64>> = trials.par_iter().map(&eval).collect();
    let mut pick: Option<(LossParams<f64>, f64)> = None;
    for (trial, s) in trials.into_iter().zip(scores) {
        let s = s?;
        if pick.as_ref().is_none_or(|(_, b)| s < *b) {
            pick = Some((trial, s));
        }
    }
    Ok(pick)
}

pub fn calibrate(
    weather: &WeatherSeries<f64>,
    target: &PowerSeries<f64>,
    cfg: &PlantConfig<f64>,
    bounds: &ParameterBounds,
    passes: usize,
) -> Result<CalibrationResult> {
    if weather.is_empty() {
        return Err(Error::validation("calibration needs a non-empty weather series"));
    }
    if passes == 0 {
        return Err(Error::validation("calibration needs at least one pass"));
    }
    cfg.validate()?;
    bounds.validate(cfg.mode)?;
    let free: Vec<(Param, ParamRange)> = bounds.free_params().map(|(p, r)| (p, *r)).collect();
    let start = cfg.losses;
    for (p, r) in &free {
        if !r.contains(p.get(&start)) {
            return Err(Error::Config(format!(
                "starting {} = {} lies outside [{}, {}]",
                p.name(),
                p.get(&start),
                r.lower,
                r.upper
            )));
        }
    }

    let mse_before = objective(&start, weather, target, cfg)?;
    let mut current = start;
    let mut best = mse_before;
    let mut trace = vec![mse_before];
    let mut iterations = 0;
    let mut converged = free.is_empty() || best == 0.0;

    // per-parameter grid span as a fraction of its bound range
    let mut scale = vec![1.0_f64; free.len()];
    while !converged && iterations < passes {
        let pass_start = best;
        let origin = current;
        for ((p, range), scale) in free.iter().zip(scale.iter_mut()) {
            let here = p.get(&current);
            let candidates = grid(range, here, (range.upper - range.lower) * *scale);
            let scores: Vec<Result<f64>> = candidates
                .par_iter()
                .map(|&v| {
                    let mut trial = current;
                    p.set(&mut trial, v);
                    objective(&trial, weather, target, cfg)
                })
                .collect();
            let mut pick: Option<(usize, f64)> = None;
            for (k, s) in scores.into_iter().enumerate() {
                let s = s?;
                let better = match pick {
                    None => true,
                    Some((b, bs)) => {
                        s < bs || (s == bs && (candidates[k] - here).abs() < (candidates[b] - here).abs())
                    }
                };
                if better {
                    pick = Some((k, s));
                }
            }
            match pick {
                Some((k, s)) if s < best => {
                    p.set(&mut current, candidates[k]);
                    best = s;
                    // a move to the edge of the grid suggests the optimum lies further out
                    let edge = k == 0 || k + 1 == candidates.len();
                    *scale = if edge { (*scale * 2.0).min(1.0) } else { *scale * 0.5 };
                }
                _ => *scale *= 0.5,
            }
        }
        if best < pass_start {
            if let Some((moved, s)) = pattern_move(&origin, &current, &free, |trial| objective(trial, weather, target, cfg))? {
                if s < best {
                    current = moved;
                    best = s;
                }
            }
        }
        iterations += 1;
        trace.push(best);
        log::debug!("calibration pass {iterations}: mse {best:.6e}");
        let stalled = pass_start - best < CONVERGENCE_REL * pass_start;
        let fine = scale.iter().all(|&s| s <= MIN_SPAN_FRACTION);
        if best == 0.0 || (stalled && fine) {
            converged = true;
        }
    }

    let before_sim = simulated(&start, weather, cfg)?;
    let after_sim = simulated(&current, weather, cfg)?;
    let metrics_before = compute_metrics(&target.power_kw, &before_sim.power_kw, bounds.report_eps)?;
    let metrics_after = compute_metrics(&target.power_kw, &after_sim.power_kw, bounds.report_eps)?;
    Ok(CalibrationResult {
        params_before: start,
        params_after: current,
        mse_before,
        mse_after: best,
        metrics_before,
        metrics_after,
        trace,
        iterations,
        converged,
        mode: cfg.mode,
        out_of_physical_range: current.physical_violations().into_iter().map(String::from).collect(),
    })
}

/// Surrogate power at each weather sample: the regression evaluated at the
/// loss-free plane-of-array irradiance and the air temperature.
pub fn surrogate_target(
    weather: &WeatherSeries<f64>,
    cfg: &PlantConfig<f64>,
    predict: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<PowerSeries<f64>> {
    let power: Vec<Result<f64>> = weather
        .samples()
        .par_iter()
        .map(|w| {
            let pos = solar_position(&w.timestamp, &cfg.site)?;
            let (dni, dhi) = match (w.dni, w.dhi) {
                (Some(a), Some(b)) => (a, b),
                _ => decompose_ghi(w.ghi, pos.zenith)?,
            };
            let full = crate::pv_model::WeatherSample { dni: Some(dni), dhi: Some(dhi), ..*w };
            let g = poa_equivalent(&full, &pos, &cfg.orientation, cfg.losses.albedo)?;
            Ok(if g < 1.0 { 0.0 } else { predict(g, w.temp_air).max(0.0) })
        })
        .collect();
    PowerSeries::new(weather.timestamps(), power.into_iter().collect::<Result<_>>()?)
}

pub fn calibrate_against_surrogate(
    weather: &WeatherSeries<f64>,
    mlp: &MlpModel,
    cfg: &PlantConfig<f64>,
    bounds: &ParameterBounds,
    passes: usize,
) -> Result<CalibrationResult> {
    let target = surrogate_target(weather, cfg, |g, t| predict_mlp(mlp, g, t))?;
    calibrate(weather, &target, cfg, bounds, passes)
}

#[cfg(test)]
mod tests {
    use chrono::{Duration, TimeZone, Utc};

    use super::*;
    use crate::pv_model::WeatherSample;
    use crate::solar_geometry::SiteLocation;

    fn site() -> SiteLocation<f64> {
        SiteLocation::new(36.8, 10.2, 10.0, 1.0).unwrap()
    }

    /// One clear day, hourly.
    fn weather() -> WeatherSeries<f64> {
        let t0 = Utc.with_ymd_and_hms(2021, 6, 1, 4, 0, 0).unwrap();
        let samples = (0..16)
            .map(|h| {
                let x = (h as f64 - 7.5) / 8.0;
                let ghi = (900.0 * (1.0 - x * x)).max(0.0);
                WeatherSample {
                    timestamp: t0 + Duration::hours(h),
                    ghi,
                    dni: None,
                    dhi: None,
                    temp_air: 22.0 + 8.0 * (1.0 - x * x),
                    wind_speed: 2.0,
                }
            })
            .collect();
        WeatherSeries::new(samples).unwrap()
    }

    #[test]
    fn objective_is_zero_at_truth_and_grows_with_lid() {
        let w = weather();
        let cfg = PlantConfig::fixture(site());
        let target = simulate_series(&w, &cfg).unwrap();
        assert_eq!(objective(&cfg.losses, &w, &target, &cfg).unwrap(), 0.0);
        let mut worse = cfg.losses;
        worse.lid += 0.05;
        assert!(objective(&worse, &w, &target, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn fixed_point_at_truth() {
        let w = weather();
        let cfg = PlantConfig::fixture(site());
        let target = simulate_series(&w, &cfg).unwrap();
        let res = calibrate(&w, &target, &cfg, &ParameterBounds::physical(), 5).unwrap();
        assert_eq!(res.params_after, res.params_before);
        assert_eq!(res.mse_after, 0.0);
        assert!(res.converged);
    }

    #[test]
    fn frozen_bounds_leave_params_unchanged() {
        let w = weather();
        let cfg = PlantConfig::fixture(site());
        let mut truth = cfg;
        truth.losses.lid = 0.05;
        let target = simulate_series(&w, &truth).unwrap();
        let res = calibrate(&w, &target, &cfg, &ParameterBounds::physical().freeze_all(), 3).unwrap();
        assert_eq!(res.params_after, cfg.losses);
        assert_eq!(res.mse_after, res.mse_before);
        assert!(res.mse_before > 0.0);
    }

    #[test]
    fn recovers_single_parameter() {
        let w = weather();
        let cfg = PlantConfig::fixture(site());
        let mut truth = cfg;
        truth.losses.lid = 0.063;
        let target = simulate_series(&w, &truth).unwrap();
        let res = calibrate(&w, &target, &cfg, &ParameterBounds::physical().only(&[Param::Lid]), 30).unwrap();
        assert!((res.params_after.lid - 0.063).abs() < 1e-3, "{}", res.params_after.lid);
        assert!(res.mse_after < 1e-4 * res.mse_before);
        assert!(res.trace.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn grid_stays_in_range() {
        let r = ParamRange::new(0.0, 0.2);
        let g = grid(&r, 0.19, 0.1);
        assert_eq!(g.len(), 11);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[10] - 0.2).abs() < 1e-15);
        let g = grid(&r, 0.1, 1.0);
        assert_eq!((g[0], g[10]), (0.0, 0.2));
    }

    #[test]
    fn bounds_validation() {
        assert!(ParameterBounds::physical().validate(LossMode::Physical).is_ok());
        assert!(ParameterBounds::unconstrained().validate(LossMode::Physical).is_err());
        assert!(ParameterBounds::unconstrained().validate(LossMode::Unconstrained).is_ok());
        let mut b = ParameterBounds::physical();
        b.range_mut(Param::UC).unwrap().lower = 0.0;
        assert!(b.validate(LossMode::Unconstrained).is_err());
        let mut b = ParameterBounds::physical();
        b.range_mut(Param::Lid).unwrap().grid_points = 1;
        assert!(b.validate(LossMode::Physical).is_err());
        assert_eq!("eta_m".parse::<Param>().unwrap(), Param::EtaM);
    }

    #[test]
    fn misaligned_target_is_rejected() {
        let w = weather();
        let cfg = PlantConfig::fixture(site());
        let mut target = simulate_series(&w, &cfg).unwrap();
        target.timestamps.pop();
        target.power_kw.pop();
        assert!(matches!(objective(&cfg.losses, &w, &target, &cfg), Err(Error::Validation(_))));
    }
}
