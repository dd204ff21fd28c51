//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use pvtwin::calibration::{calibrate, DEFAULT_PASSES};
use pvtwin::io::{load_table4_fixture, table4_rows};
use pvtwin::metrics::{bland_altman, compute_metrics};
use pvtwin::pv_model::{desoto_params, max_power_point, simulate_series, ModuleDatasheet};
use pvtwin::regressors::*;

use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, limit: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    check(took < limit, format!("{detail}; {:.2} s of {} s", took.as_secs_f64(), limit.as_secs()))
}

fn diode_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ds = random_datasheet(&mut r);
        let g = r.gen_range(50.0..1200.0);
        let t = r.gen_range(-10.0..75.0);
        let dp = desoto_params(g, t, &ds).map_err(|e| e.to_string())?;
        let p = max_power_point(&dp).map_err(|e| e.to_string())?.p_mp;
        let sweep = dense_sweep_pmp(&dp, 1_000_000);
        worst = worst.max((p - sweep).abs() / sweep);
    }
    if worst >= 1e-4 {
        return Err(format!("max relative gap {worst:.3e}"));
    }
    within_time(start, Duration::from_secs(60), format!("max relative gap {worst:.3e}"))
}

fn reference_fixed_point() -> Outcome {
    let mut r = rng(7);
    let sheets: Vec<ModuleDatasheet<f64>> =
        std::iter::once(ModuleDatasheet::fixture()).chain((0..20).map(|_| random_datasheet(&mut r))).collect();
    for ds in &sheets {
        let dp = desoto_params(1000.0, 25.0, ds).map_err(|e| e.to_string())?;
        let same = dp.i_l == ds.i_l_ref
            && dp.i_o == ds.i_o_ref
            && dp.r_s == ds.r_s
            && dp.r_sh == ds.r_sh_ref
            && dp.n_ns_vth == ds.a_ref;
        if !same {
            return Err(format!("{dp:?} differs from {ds:?}"));
        }
    }
    Ok(format!("{} datasheets reproduced exactly", sheets.len()))
}

fn table4_mlp_fit() -> Outcome {
    let start = Instant::now();
    let data = load_table4_fixture();
    let cfg = MlpConfig::default();
    let m = train_mlp(&data, &cfg).map_err(|e| e.to_string())?;
    let (xs, ys) = MlpModel::training_batch(&data, &m.stats);
    let loss = m.network.loss(&xs, &ys);
    let meas: Vec<f64> = data.train_rows().map(|r| r.p).collect();
    let pred: Vec<f64> = data.train_rows().map(|r| predict_mlp(&m, r.g, r.t)).collect();
    let r2 = compute_metrics(&meas, &pred, 1.0).map_err(|e| e.to_string())?.r2.unwrap_or(f64::NAN);
    let detail = format!("R² {r2:.6}, normalized loss {loss:.3e} after {} epochs", m.loss_curve.len());
    if !(r2 >= 0.99 && loss < 1e-3 && m.loss_curve.len() <= 2000) {
        return Err(detail);
    }
    within_time(start, Duration::from_secs(10), detail)
}

fn mlp_gradient() -> Outcome {
    let worst = (0..10).map(gradient_check).fold(0.0, f64::max);
    check(worst < 1e-4, format!("max relative error {worst:.3e} over 10 networks"))
}

fn forest_oob() -> Outcome {
    let rows = six_rows();
    let data = Dataset::new(rows.clone()).unwrap();
    let m = train_forest(&data, &ForestConfig { n_trees: 3, seed: 0, ..ForestConfig::default() })
        .map_err(|e| e.to_string())?;
    let (Some(got), Some(hand)) = (m.oob_rmse, hand_oob_rmse(&m, &rows)) else {
        return Err("no out-of-bag rows in the 6-row fixture".into());
    };
    if (got - hand).abs() >= 1e-12 {
        return Err(format!("oob {got} vs hand {hand}"));
    }
    let surface = Dataset::new(surface_rows(500, 1)).unwrap();
    let curve = oob_curve(&surface, &ForestConfig::default(), &[10, 700]).map_err(|e| e.to_string())?;
    let (e10, e700) = (curve[0].1.unwrap_or(f64::NAN), curve[1].1.unwrap_or(f64::NAN));
    check(e700 <= e10, format!("6-row oob {got:.6} = hand {hand:.6}; 500-row oob {e10:.4} at 10 trees, {e700:.4} at 700"))
}

fn svr_contract() -> Outcome {
    let fixtures = [
        load_table4_fixture(),
        Dataset::new(wavy_rows(30)).unwrap(),
        Dataset::new(surface_rows(80, 2)).unwrap(),
        Dataset::new(six_rows()).unwrap(),
    ];
    let mut trained = 0;
    for data in &fixtures {
        for kernel in [Kernel::Linear, Kernel::Rbf, Kernel::Polynomial] {
            for c in [0.1, 1.0, 10.0, 100.0] {
                let cfg = SvrConfig { kernel, c, eps: 0.5, degree: 2, ..SvrConfig::default() };
                let m = train_svr(data, &cfg).map_err(|e| e.to_string())?;
                if let Some(b) = m.coefficients.iter().find(|b| b.abs() > c) {
                    return Err(format!("coefficient {b} outside [-{c}, {c}] ({kernel:?})"));
                }
                trained += 1;
            }
        }
    }

    // p = 2g + 1 with the temperature column held fixed
    let line: Vec<Row> = (0..41).map(|i| Row { g: 2.5 * i as f64, t: 25.0, p: 5.0 * i as f64 + 1.0 }).collect();
    let data = Dataset::new(line.clone()).unwrap();
    let m = train_svr(&data, &SvrConfig { kernel: Kernel::Linear, eps: 0.1, c: 100.0, ..SvrConfig::default() })
        .map_err(|e| e.to_string())?;
    let meas: Vec<f64> = line.iter().map(|r| r.p).collect();
    let pred: Vec<f64> = line.iter().map(|r| predict_svr(&m, r.features())).collect();
    let pct = compute_metrics(&meas, &pred, 0.1).map_err(|e| e.to_string())?.percent_within_eps;
    let slope = m.primal_coefficients().map(|(w, _)| w[0]).unwrap_or(f64::NAN);
    if pct != 100.0 || (slope - 2.0).abs() >= 1e-2 {
        return Err(format!("noiseless line: {pct}% within eps, slope {slope}"));
    }

    let spec = GridSearchSpec {
        c_values: vec![0.5, 5.0, 50.0, 500.0],
        eps_values: vec![0.25, 0.5, 1.0, 2.0],
        gamma_values: vec![],
        base: SvrConfig { kernel: Kernel::Rbf, gamma: 2.0, ..SvrConfig::default() },
        scoring: ScoringSplit::Train,
    };
    let grid_data = Dataset::new(wavy_rows(40)).unwrap();
    let got = grid_search_svr(&grid_data, &spec).map_err(|e| e.to_string())?;
    let (_, best) = brute_force_grid(&grid_data, &spec);
    let sel = got.best().ok_or("grid selected nothing")?;
    check(
        (sel.c, sel.eps, sel.gamma) == (best.c, best.eps, best.gamma),
        format!(
            "{trained} fits inside the box; line {pct}% within eps, slope {slope:.4}; 4x4 grid picks c={} eps={} (oracle c={} eps={})",
            sel.c, sel.eps, best.c, best.eps
        ),
    )
}

fn metrics_identities() -> Outcome {
    let mut r = rng(99);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.gen_range(1..300);
        let shift = r.gen_range(-5.0..5.0);
        let meas: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..10.0)).collect();
        let pred: Vec<f64> = meas.iter().map(|m| m + shift + r.gen_range(-1.0..1.0)).collect();
        let m = compute_metrics(&meas, &pred, 0.5).map_err(|e| e.to_string())?;
        worst = worst.max((m.rmse * m.rmse - (m.sigma * m.sigma + m.me * m.me)).abs());
    }
    if worst >= 1e-12 {
        return Err(format!("rmse identity off by {worst:.3e}"));
    }

    // independent recomputation of the report on the table4 fixture columns
    let rows = table4_rows();
    let meas: Vec<f64> = rows.iter().map(|r| r.measured).collect();
    let mut gap: f64 = 0.0;
    for model in [rows.iter().map(|r| r.before_model).collect::<Vec<_>>(), rows.iter().map(|r| r.after_model).collect()] {
        let rep = compute_metrics(&meas, &model, 1.0).map_err(|e| e.to_string())?;
        let n = meas.len() as f64;
        let d: Vec<f64> = meas.iter().zip(&model).map(|(a, b)| a - b).collect();
        let me = d.iter().sum::<f64>() / n;
        let mse = d.iter().map(|x| x * x).sum::<f64>() / n;
        let sigma = (d.iter().map(|x| (x - me).powi(2)).sum::<f64>() / n).sqrt();
        let mae = d.iter().map(|x| x.abs()).sum::<f64>() / n;
        let mean_meas = meas.iter().sum::<f64>() / n;
        let ss_tot: f64 = meas.iter().map(|m| (m - mean_meas).powi(2)).sum();
        let r2 = 1.0 - d.iter().map(|x| x * x).sum::<f64>() / ss_tot;
        let within = 100.0 * d.iter().filter(|x| x.abs() <= 1.0).count() as f64 / n;
        for (a, b) in [
            (rep.me, me),
            (rep.mse, mse),
            (rep.rmse, mse.sqrt()),
            (rep.sigma, sigma),
            (rep.mae, mae),
            (rep.r2.unwrap_or(f64::NAN), r2),
            (rep.percent_within_eps, within),
            (rep.mu, -me),
        ] {
            gap = gap.max((a - b).abs());
        }
    }
    if !(gap < 1e-9) {
        return Err(format!("table4 report differs from recomputation by {gap:.3e}"));
    }

    // reference summary figures: mse, mean error and standard deviation
    let (mse, me, sd): (f64, f64, f64) = (638.92733514, 19.29, 16.331738628);
    let derived = (mse - me * me).sqrt();
    // half a unit in the last printed place of the mean error, propagated
    let allowed = me * 0.005 / derived + 0.5e-8 / (2.0 * derived);
    check(
        (derived - sd).abs() <= allowed,
        format!(
            "identity gap {worst:.1e}; table4 recomputation gap {gap:.1e}; sqrt(mse - me²) = {derived:.4} vs sd {sd} (allowed ±{allowed:.4})"
        ),
    )
}

fn bland_altman_coverage() -> Outcome {
    let same: Vec<f64> = (0..50).map(|i| i as f64 * 1.5).collect();
    let ident = bland_altman(&same, &same, 1.96).map_err(|e| e.to_string())?.percent_within;
    if ident != 100.0 {
        return Err(format!("identical series give {ident}%"));
    }
    let mut r = rng(5);
    let meas: Vec<f64> = (0..2000).map(|_| r.gen_range(0.0..100.0)).collect();
    let pred: Vec<f64> = meas
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(&mut r);
            m + z
        })
        .collect();
    let pct = bland_altman(&meas, &pred, 1.96).map_err(|e| e.to_string())?.percent_within;
    check((93.5..=96.5).contains(&pct), format!("identical 100%; 2000 normal differences {pct:.2}% within limits"))
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let w = demo_weather(10);
    let (truth, initial) = recovery_plant();
    let target = simulate_series(&w, &truth).map_err(|e| e.to_string())?;
    let res = calibrate(&w, &target, &initial, &recovery_bounds(), DEFAULT_PASSES).map_err(|e| e.to_string())?;
    let p = res.params_after;
    let reduction = 1.0 - res.mse_after / res.mse_before;
    let detail = format!(
        "{} samples; lid {:.4}, eta_m {:.4}, albedo {:.4}; mse {:.4} -> {:.3e} ({:.4}% reduction)",
        w.len(),
        p.lid,
        p.eta_m,
        p.albedo,
        res.mse_before,
        res.mse_after,
        100.0 * reduction
    );
    let ok = (p.lid - 0.05).abs() <= 0.05
        && (p.eta_m - 0.12).abs() <= 0.05
        && (p.albedo - 0.3).abs() <= 0.05
        && reduction >= 0.99;
    if !ok {
        return Err(detail);
    }
    within_time(start, Duration::from_secs(120), detail)
}

fn physics_monotonicity() -> Outcome {
    let ds = ModuleDatasheet::<f64>::fixture();
    let p = |g: f64, t: f64| max_power_point(&desoto_params(g, t, &ds).unwrap()).unwrap().p_mp;
    for t in [0.0, 25.0, 50.0] {
        let mut prev = 0.0;
        for k in 1..=2400 {
            let g = k as f64 * 0.5;
            let now = p(g, t);
            if !(now > prev) {
                return Err(format!("p_mp not increasing at g = {g}, t = {t}"));
            }
            prev = now;
        }
    }
    let mut prev = f64::INFINITY;
    for k in 0..=600 {
        let t = k as f64 * 0.1;
        let now = p(800.0, t);
        if !(now < prev) {
            return Err(format!("p_mp not decreasing at t = {t}"));
        }
        prev = now;
    }
    Ok("strictly increasing in g on (0, 1200] and decreasing in t on [0, 60]".into())
}

fn run_cli(args: &[&str], out: &Path, threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pvtwin"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n);
    }
    let status = cmd.output().map_err(|e| e.to_string())?.status;
    if status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {status}"))
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let config = d.join("truth.toml");
    std::fs::write(&config, "[plant.losses]\nlid = 0.05\neta_m = 0.12\n").map_err(|e| e.to_string())?;
    run_cli(&["synth-weather", "--days", "2"], &d.join("w"), None)?;
    let weather = d.join("w/weather.csv");
    run_cli(&["simulate", "--config", config.to_str().unwrap(), "--weather", weather.to_str().unwrap()], &d.join("s"), None)?;
    let measured = d.join("s/power.csv");

    let commands: Vec<Vec<&str>> = vec![
        vec!["fit-mlp", "--seed", "3"],
        vec!["fit-rf", "--seed", "3"],
        vec!["fit-svr", "--seed", "3"],
        vec!["grid-search", "--seed", "3"],
        vec![
            "estimate-params", "--seed", "3", "--weather", weather.to_str().unwrap(),
            "--measured", measured.to_str().unwrap(), "--passes", "8",
        ],
    ];
    let mut compared = 0;
    for (k, args) in commands.iter().enumerate() {
        let a = d.join(format!("a{k}"));
        let b = d.join(format!("b{k}"));
        run_cli(args, &a, Some("1"))?;
        run_cli(args, &b, None)?;
        let mut names: Vec<_> = std::fs::read_dir(&a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
        let mut other: Vec<_> = std::fs::read_dir(&b).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
        names.sort();
        other.sort();
        if names != other || names.is_empty() {
            return Err(format!("{}: output file sets differ", args[0]));
        }
        for name in &names {
            let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!("{}: {} differs between runs", args[0], name.to_string_lossy()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across single- and multi-threaded runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("diode solver vs dense sweep", diode_oracle),
        ("reference-condition fixed point", reference_fixed_point),
        ("table4 MLP fit", table4_mlp_fit),
        ("MLP gradient check", mlp_gradient),
        ("forest out-of-bag error", forest_oob),
        ("SVR contract and grid search", svr_contract),
        ("metrics identities", metrics_identities),
        ("Bland-Altman coverage", bland_altman_coverage),
        ("calibration recovery", calibration_recovery),
        ("physics monotonicity", physics_monotonicity),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
