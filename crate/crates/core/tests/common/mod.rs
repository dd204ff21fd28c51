//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvtwin::calibration::{ParameterBounds, Param};
use pvtwin::io::{synthetic_weather, SynthSpec};
use pvtwin::pv_model::{DiodeParams, LossParams, ModuleDatasheet, PlantConfig, WeatherSeries};
use pvtwin::regressors::{train_svr, Dataset, ForestModel, GridSearchSpec, Row, SvrConfig, predict_svr};
use pvtwin::solar_geometry::SiteLocation;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- diode

/// Terminal current at `v` from a bracketed Newton iteration on the implicit
/// single-diode equation. `hint` seeds the iteration.
pub fn oracle_current(dp: &DiodeParams<f64>, v: f64, hint: f64) -> f64 {
    let f = |i: f64| {
        let vd = v + i * dp.r_s;
        dp.i_l - dp.i_o * ((vd / dp.n_ns_vth).exp() - 1.0) - vd / dp.r_sh - i
    };
    let df = |i: f64| {
        let vd = v + i * dp.r_s;
        -dp.i_o * dp.r_s / dp.n_ns_vth * (vd / dp.n_ns_vth).exp() - dp.r_s / dp.r_sh - 1.0
    };
    // f is strictly decreasing in i
    let mut hi = dp.i_l.max(0.0) + 1.0;
    let mut lo = -1.0;
    while f(lo) < 0.0 {
        lo = 2.0 * lo - 1.0;
    }
    let mut i = hint.clamp(lo, hi);
    for _ in 0..200 {
        let fi = f(i);
        if fi == 0.0 {
            return i;
        }
        if fi > 0.0 {
            lo = i;
        } else {
            hi = i;
        }
        let mut next = i - fi / df(i);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - i).abs() <= 1e-15 * i.abs().max(1.0) {
            return next;
        }
        i = next;
    }
    i
}

/// Open-circuit voltage by bisection on the zero-current residual.
pub fn oracle_voc(dp: &DiodeParams<f64>) -> f64 {
    let g = |v: f64| dp.i_l - dp.i_o * ((v / dp.n_ns_vth).exp() - 1.0) - v / dp.r_sh;
    let (mut lo, mut hi) = (0.0, dp.n_ns_vth * (dp.i_l / dp.i_o + 1.0).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest V·I(V) over `n` evenly spaced voltages on [0, v_oc].
pub fn dense_sweep_pmp(dp: &DiodeParams<f64>, n: usize) -> f64 {
    let voc = oracle_voc(dp);
    let mut i = dp.i_l;
    let mut best: f64 = 0.0;
    for k in 0..n {
        let v = voc * k as f64 / (n - 1) as f64;
        i = oracle_current(dp, v, i);
        best = best.max(v * i);
    }
    best
}

/// Datasheet drawn around typical crystalline-silicon values.
pub fn random_datasheet(r: &mut impl Rng) -> ModuleDatasheet<f64> {
    ModuleDatasheet {
        alpha_sc: r.gen_range(0.001..0.006),
        a_ref: r.gen_range(1.2..2.2),
        i_l_ref: r.gen_range(4.0..10.0),
        i_o_ref: 10f64.powf(r.gen_range(-11.0..-8.5)),
        r_sh_ref: r.gen_range(100.0..1000.0),
        r_s: r.gen_range(0.05..0.6),
        eg_ref: 1.121,
        deg_dt: -2.677e-4,
    }
}

// ---------------------------------------------------------------- forest

pub fn six_rows() -> Vec<Row> {
    vec![
        Row { g: 100.0, t: 20.0, p: 15.0 },
        Row { g: 250.0, t: 22.0, p: 41.0 },
        Row { g: 400.0, t: 25.0, p: 66.0 },
        Row { g: 550.0, t: 27.0, p: 88.0 },
        Row { g: 700.0, t: 30.0, p: 112.0 },
        Row { g: 850.0, t: 33.0, p: 133.0 },
    ]
}

/// Noisy plant-like surface on `n` random (g, t) points.
pub fn surface_rows(n: usize, seed: u64) -> Vec<Row> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let g: f64 = r.gen_range(0.0..1100.0);
            let t: f64 = r.gen_range(10.0..45.0);
            let noise: f64 = r.gen_range(-3.0..3.0);
            Row { g, t, p: 0.17 * g * (1.0 - 0.004 * (t - 25.0)) + noise }
        })
        .collect()
}

/// Out-of-bag RMSE enumerated row by row from the recorded in-bag multisets.
pub fn hand_oob_rmse(m: &ForestModel, rows: &[Row]) -> Option<f64> {
    let mut sse = 0.0;
    let mut n = 0;
    for &row in &m.train_indices {
        let preds: Vec<f64> = m
            .trees
            .iter()
            .zip(&m.in_bag)
            .filter(|(_, bag)| !bag.contains(&row))
            .map(|(tree, _)| tree.predict(rows[row].features()))
            .collect();
        if preds.is_empty() {
            continue;
        }
        let mean = preds.iter().sum::<f64>() / preds.len() as f64;
        sse += (mean - rows[row].p).powi(2);
        n += 1;
    }
    (n > 0).then(|| (sse / n as f64).sqrt())
}

// ---------------------------------------------------------------- grid

/// One scored cell of the brute-force re-evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCell {
    pub c: f64,
    pub eps: f64,
    pub gamma: f64,
    pub percent: f64,
    pub mae: f64,
}

/// Trains every cell on the training split and scores it with hand-written
/// loops, then picks the winner by sorting on the documented key.
pub fn brute_force_grid(data: &Dataset, spec: &GridSearchSpec) -> (Vec<OracleCell>, OracleCell) {
    let gammas = if spec.gamma_values.is_empty() { vec![spec.base.gamma] } else { spec.gamma_values.clone() };
    let mut cells = Vec::new();
    for &c in &spec.c_values {
        for &eps in &spec.eps_values {
            for &gamma in &gammas {
                let model = train_svr(data, &SvrConfig { c, eps, gamma, ..spec.base.clone() }).unwrap();
                let (mut within, mut abs, mut n) = (0usize, 0.0, 0usize);
                for r in data.train_rows() {
                    let d = r.p - predict_svr(&model, r.features());
                    if d.abs() <= eps {
                        within += 1;
                    }
                    abs += d.abs();
                    n += 1;
                }
                cells.push(OracleCell { c, eps, gamma, percent: 100.0 * within as f64 / n as f64, mae: abs / n as f64 });
            }
        }
    }
    let mut sorted = cells.clone();
    sorted.sort_by(|a, b| {
        b.percent
            .total_cmp(&a.percent)
            .then(a.mae.total_cmp(&b.mae))
            .then(a.c.total_cmp(&b.c))
            .then(a.eps.total_cmp(&b.eps))
            .then(a.gamma.total_cmp(&b.gamma))
    });
    (cells, sorted[0])
}

/// Smooth nonlinear surface with a little structured noise.
pub fn wavy_rows(n: usize) -> Vec<Row> {
    (0..n)
        .map(|i| {
            let g = 900.0 * i as f64 / (n - 1) as f64;
            let t = 15.0 + (i * 7 % 13) as f64;
            Row { g, t, p: 40.0 * (g / 250.0).sin() + 0.3 * t + 0.5 * ((i % 3) as f64 - 1.0) }
        })
        .collect()
}

// ---------------------------------------------------------------- mlp

/// Largest relative gap between the analytic gradient and central differences
/// for one random network, batch and parameter vector.
pub fn gradient_check(seed: u64) -> f64 {
    use pvtwin::regressors::mlp::Network;
    let mut r = rng(seed);
    let hidden = [r.gen_range(1..9), r.gen_range(1..9)];
    let mut net = Network::init(hidden, &mut r);
    let params: Vec<f64> = (0..net.n_params()).map(|_| r.gen_range(-1.0..1.0)).collect();
    net.set_params(&params);
    let n = r.gen_range(2..12);
    let xs: Vec<[f64; 2]> = (0..n).map(|_| [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]).collect();
    let ys: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();

    let (_, analytic) = net.loss_and_gradient(&xs, &ys);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] = params[k] + h;
        net.set_params(&p);
        let up = net.loss(&xs, &ys);
        p[k] = params[k] - h;
        net.set_params(&p);
        let down = net.loss(&xs, &ys);
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs());
        // both sides vanish for weights feeding inactive units
        if scale > 1e-7 {
            worst = worst.max((analytic[k] - numeric).abs() / scale);
        }
    }
    net.set_params(&params);
    worst
}

// ---------------------------------------------------------------- plant

pub fn demo_site() -> SiteLocation<f64> {
    SiteLocation::new(36.8, 10.2, 10.0, 1.0).unwrap()
}

pub fn demo_weather(days: u32) -> WeatherSeries<f64> {
    synthetic_weather(&demo_site(), &SynthSpec { days, ..SynthSpec::default() }).unwrap()
}

/// Plant with known (lid, eta_m, albedo) and the starting configuration.
pub fn recovery_plant() -> (PlantConfig<f64>, PlantConfig<f64>) {
    let start = PlantConfig::fixture(demo_site());
    let truth = PlantConfig {
        losses: LossParams { lid: 0.05, eta_m: 0.12, albedo: 0.3, ..start.losses },
        ..start
    };
    (truth, start)
}

pub fn recovery_bounds() -> ParameterBounds {
    ParameterBounds::physical().only(&[Param::Lid, Param::EtaM, Param::Albedo])
}
