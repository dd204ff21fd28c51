//! Command-line entry points.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::calibration::{calibrate, surrogate_target, CalibrationResult, ParamChange};
use crate::error::{Error, Result};
use crate::io::{
    config_hash, load_dataset, load_power, load_table4_fixture, load_weather, synthetic_weather, write_json,
    write_plot_data, write_power, write_weather, Report, RunConfig,
};
use crate::metrics::{bland_altman, compute_metrics, BlandAltmanReport, MetricsReport};
use crate::pv_model::{simulate_series, LossMode, PlantConfig, WeatherSeries};
use crate::regressors::{
    grid_search_svr, load_model, oob_curve, save_model, train_forest, train_mlp, train_svr, Dataset, GridRow,
    Kernel, MaxFeatures, RegressorModel, ScoringSplit,
};

#[derive(Debug, Parser)]
#[command(name = "pvtwin", version, about = "PV plant modelling, regression surrogates and loss calibration")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Loss-parameter regime: physical or unconstrained.
    #[arg(long, global = true)]
    mode: Option<LossMode>,
    /// Limits-of-agreement multiplier.
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Tolerance of the percent-within figure, kW.
    #[arg(long, global = true)]
    eps_report: Option<f64>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weather + plant configuration to a power series.
    Simulate(SimulateArgs),
    /// Train the perceptron surrogate.
    FitMlp(FitMlpArgs),
    /// Train the random forest and its out-of-bag curve.
    FitRf(FitRfArgs),
    /// Train one support vector regressor.
    FitSvr(FitSvrArgs),
    /// Exhaustive (C, eps, gamma) search for the support vector regressor.
    GridSearch(GridArgs),
    /// Calibrate loss parameters against measured or surrogate power.
    EstimateParams(EstimateArgs),
    /// Compare measured and modelled power series.
    Validate(ValidateArgs),
    /// Write a seeded synthetic weather file.
    SynthWeather(SynthArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// `table4` for the shipped fixture, or a file with irradiance, temperature, power_kw|power_w.
    #[arg(long, default_value = "table4")]
    data: String,
    /// Held-out fraction; 0 trains on every row.
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    weather: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitMlpArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Two comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct FitRfArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_features: Option<MaxFeatures>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Tree counts at which the out-of-bag curve is evaluated.
    #[arg(long, value_delimiter = ',')]
    oob_counts: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct FitSvrArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    c_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gamma_values: Option<Vec<f64>>,
    #[arg(long)]
    kernel: Option<Kernel>,
    /// Score on the training split (default) or the held-out split.
    #[arg(long)]
    held_out: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    weather: Option<PathBuf>,
    /// Measured power series to calibrate against.
    #[arg(long, conflicts_with = "surrogate")]
    measured: Option<PathBuf>,
    /// Saved regressor whose predictions serve as the reference.
    #[arg(long)]
    surrogate: Option<PathBuf>,
    #[arg(long)]
    passes: Option<usize>,
    /// Comma-separated parameters to search; the rest stay fixed.
    #[arg(long, value_delimiter = ',')]
    free: Option<Vec<String>>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    measured: PathBuf,
    #[arg(long)]
    modelled: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    step_minutes: Option<u32>,
    #[arg(long)]
    cloudiness: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run_command<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn hash(&self) -> Result<String> {
        // output location does not change the computation
        let mut c = self.cfg.clone();
        c.paths.out_dir = None;
        config_hash(&c)
    }

    fn report<B: Serialize>(&self, kind: &str, body: B) -> Result<Report<B>> {
        Ok(Report::new(kind, self.cfg.seed, self.hash()?, body))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn dataset(&self, args: &DataArgs) -> Result<Dataset> {
        let rows = if args.data == "table4" {
            load_table4_fixture().rows().to_vec()
        } else {
            load_dataset(Path::new(&args.data))?
        };
        let frac = args.test_fraction.unwrap_or(self.cfg.test_fraction);
        if !(0.0..1.0).contains(&frac) {
            return Err(Error::validation(format!("test fraction {frac} must lie in [0, 1)")));
        }
        if frac == 0.0 {
            Dataset::new(rows)
        } else {
            Dataset::split(rows, frac, self.cfg.seed)
        }
    }

    fn weather(&self, flag: &Option<PathBuf>, plant: &PlantConfig<f64>) -> Result<WeatherSeries<f64>> {
        let path = flag
            .clone()
            .or_else(|| self.cfg.paths.weather.clone())
            .ok_or_else(|| Error::validation("no weather file given (--weather or paths.weather)"))?;
        load_weather(&path, &plant.site)
    }
}

#[derive(Serialize)]
struct FitReport<C> {
    model: &'static str,
    data: String,
    n_train: usize,
    n_test: usize,
    train: MetricsReport<f64>,
    test: Option<MetricsReport<f64>>,
    config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    oob_rmse: Option<f64>,
}

fn split_metrics(model: &RegressorModel, data: &Dataset, eps: f64) -> Result<(MetricsReport<f64>, Option<MetricsReport<f64>>)> {
    let eval = |rows: Vec<&crate::regressors::Row>| -> Result<MetricsReport<f64>> {
        let meas: Vec<f64> = rows.iter().map(|r| r.p).collect();
        let pred: Vec<f64> = rows.iter().map(|r| model.predict(r.g, r.t)).collect();
        compute_metrics(&meas, &pred, eps)
    };
    let train = eval(data.train_rows().collect())?;
    let test = if data.test_indices().is_empty() { None } else { Some(eval(data.test_rows().collect())?) };
    Ok((train, test))
}

#[derive(Serialize)]
struct SimulateReport {
    samples: usize,
    decomposed: bool,
    peak_kw: f64,
    /// Trapezoidal integral of the power series, kWh.
    energy_kwh: f64,
    plant: PlantConfig<f64>,
}

#[derive(Serialize)]
struct GridReport<'a> {
    data: String,
    scoring: ScoringSplit,
    kernel: Kernel,
    rows: &'a [GridRow],
    selected: Option<&'a GridRow>,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    reference: &'a str,
    parameters: Vec<ParamChange>,
    result: &'a CalibrationResult,
}

#[derive(Serialize)]
struct ValidateReport {
    metrics: MetricsReport<f64>,
    bland_altman: BlandAltmanSummary,
}

#[derive(Serialize)]
struct BlandAltmanSummary {
    mean_diff: f64,
    sd_diff: f64,
    loa_low: f64,
    loa_high: f64,
    k: f64,
    percent_within: f64,
    n: usize,
}

impl From<&BlandAltmanReport<f64>> for BlandAltmanSummary {
    fn from(b: &BlandAltmanReport<f64>) -> Self {
        Self {
            mean_diff: b.mean_diff,
            sd_diff: b.sd_diff,
            loa_low: b.loa_low,
            loa_high: b.loa_high,
            k: b.k,
            percent_within: b.percent_within,
            n: b.pairs.len(),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(e) = cli.eps_report {
        cfg.eps = e;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out_dir = Some(o.clone());
    }
    let out = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("pvtwin-out"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let seed = cfg.seed;
    let mut ctx = Ctx { cfg, out };
    match cli.command {
        Command::Simulate(a) => {
            ctx.cfg.validate()?;
            let plant = ctx.cfg.plant_config()?;
            let weather = ctx.weather(&a.weather, &plant)?;
            let power = simulate_series(&weather, &plant)?;
            write_power(&ctx.path("power.csv"), &power)?;
            let energy_kwh = power
                .timestamps
                .windows(2)
                .zip(power.power_kw.windows(2))
                .map(|(t, p)| (t[1] - t[0]).num_seconds() as f64 / 3600.0 * (p[0] + p[1]) / 2.0)
                .sum();
            let body = SimulateReport {
                samples: power.len(),
                decomposed: weather.decomposed,
                peak_kw: power.power_kw.iter().copied().fold(0.0, f64::max),
                energy_kwh,
                plant,
            };
            write_json(&ctx.path("simulate_report.json"), &ctx.report("simulate", body)?)
        }
        Command::FitMlp(a) => {
            let c = &mut ctx.cfg.mlp;
            c.seed = seed;
            c.epochs = a.epochs.unwrap_or(c.epochs);
            c.learning_rate = a.learning_rate.unwrap_or(c.learning_rate);
            if a.batch_size.is_some() {
                c.batch_size = a.batch_size;
            }
            if let Some(h) = &a.hidden {
                c.hidden_widths = match h[..] {
                    [a, b] => [a, b],
                    _ => return Err(Error::validation("--hidden takes exactly two widths")),
                };
            }
            ctx.cfg.validate()?;
            let data = ctx.dataset(&a.data)?;
            let model = train_mlp(&data, &ctx.cfg.mlp)?;
            let curve: Vec<Vec<f64>> =
                model.loss_curve.iter().enumerate().map(|(i, &l)| vec![(i + 1) as f64, l]).collect();
            write_plot_data(&ctx.path("mlp_loss_curve.csv"), &["epoch", "loss"], &curve)?;
            let model = RegressorModel::Mlp(model);
            save_model(&model, &ctx.path("model_mlp.json"))?;
            let (train, test) = split_metrics(&model, &data, ctx.cfg.eps)?;
            let body = FitReport {
                model: "mlp",
                data: a.data.data.clone(),
                n_train: data.train_indices().len(),
                n_test: data.test_indices().len(),
                train,
                test,
                config: ctx.cfg.mlp.clone(),
                oob_rmse: None,
            };
            write_json(&ctx.path("fit_mlp_report.json"), &ctx.report("fit-mlp", body)?)
        }
        Command::FitRf(a) => {
            let c = &mut ctx.cfg.forest;
            c.seed = seed;
            c.n_trees = a.trees.unwrap_or(c.n_trees);
            c.max_features = a.max_features.unwrap_or(c.max_features);
            c.min_samples_leaf = a.min_samples_leaf.unwrap_or(c.min_samples_leaf);
            ctx.cfg.validate()?;
            let data = ctx.dataset(&a.data)?;
            let n = ctx.cfg.forest.n_trees;
            let counts = a.oob_counts.clone().unwrap_or_else(|| {
                let mut v: Vec<usize> = [1, 10, 25, 50, 100, 200, 300, 400, 500, 600, 700, 800, 1000]
                    .into_iter()
                    .filter(|&c| c < n)
                    .collect();
                v.push(n);
                v
            });
            let curve = oob_curve(&data, &ctx.cfg.forest, &counts)?;
            let rows: Vec<Vec<f64>> =
                curve.iter().filter_map(|&(c, e)| e.map(|e| vec![c as f64, e])).collect();
            write_plot_data(&ctx.path("rf_oob_curve.csv"), &["n_trees", "oob_rmse"], &rows)?;
            let forest = train_forest(&data, &ctx.cfg.forest)?;
            let oob_rmse = forest.oob_rmse;
            let model = RegressorModel::Forest(forest);
            save_model(&model, &ctx.path("model_forest.json"))?;
            let (train, test) = split_metrics(&model, &data, ctx.cfg.eps)?;
            let body = FitReport {
                model: "forest",
                data: a.data.data.clone(),
                n_train: data.train_indices().len(),
                n_test: data.test_indices().len(),
                train,
                test,
                config: ctx.cfg.forest.clone(),
                oob_rmse,
            };
            write_json(&ctx.path("fit_rf_report.json"), &ctx.report("fit-rf", body)?)
        }
        Command::FitSvr(a) => {
            let c = &mut ctx.cfg.svr;
            c.seed = seed;
            c.kernel = a.kernel.unwrap_or(c.kernel);
            c.c = a.c.unwrap_or(c.c);
            c.eps = a.eps.unwrap_or(c.eps);
            c.gamma = a.gamma.unwrap_or(c.gamma);
            ctx.cfg.validate()?;
            let data = ctx.dataset(&a.data)?;
            let model = RegressorModel::Svr(train_svr(&data, &ctx.cfg.svr)?);
            save_model(&model, &ctx.path("model_svr.json"))?;
            let (train, test) = split_metrics(&model, &data, ctx.cfg.svr.eps)?;
            let body = FitReport {
                model: "svr",
                data: a.data.data.clone(),
                n_train: data.train_indices().len(),
                n_test: data.test_indices().len(),
                train,
                test,
                config: ctx.cfg.svr.clone(),
                oob_rmse: None,
            };
            write_json(&ctx.path("fit_svr_report.json"), &ctx.report("fit-svr", body)?)
        }
        Command::GridSearch(a) => {
            let g = &mut ctx.cfg.grid;
            g.base.seed = seed;
            if let Some(v) = &a.c_values {
                g.c_values = v.clone();
            }
            if let Some(v) = &a.eps_values {
                g.eps_values = v.clone();
            }
            if let Some(v) = &a.gamma_values {
                g.gamma_values = v.clone();
            }
            g.base.kernel = a.kernel.unwrap_or(g.base.kernel);
            if a.held_out {
                g.scoring = ScoringSplit::Test;
            }
            ctx.cfg.validate()?;
            let data = ctx.dataset(&a.data)?;
            let result = grid_search_svr(&data, &ctx.cfg.grid)?;
            let rows: Vec<Vec<f64>> = result
                .rows
                .iter()
                .map(|r| {
                    vec![r.c, r.eps, r.gamma, r.percent_within_eps.unwrap_or(f64::NAN), r.mae.unwrap_or(f64::NAN)]
                })
                .collect();
            write_plot_data(&ctx.path("grid.csv"), &["c", "eps", "gamma", "percent_within_eps", "mae"], &rows)?;
            let body = GridReport {
                data: a.data.data.clone(),
                scoring: ctx.cfg.grid.scoring,
                kernel: ctx.cfg.grid.base.kernel,
                rows: &result.rows,
                selected: result.best(),
            };
            write_json(&ctx.path("grid_search_report.json"), &ctx.report("grid-search", body)?)
        }
        Command::EstimateParams(a) => {
            if let Some(p) = a.passes {
                ctx.cfg.calibration.passes = p;
            }
            if let Some(f) = &a.free {
                ctx.cfg.calibration.free = f.clone();
            }
            ctx.cfg.validate()?;
            let plant = ctx.cfg.plant_config()?;
            let mut bounds = ctx.cfg.calibration_bounds()?;
            if let Some(n) = a.grid_points {
                bounds = bounds.with_grid_points(n);
            }
            let weather = ctx.weather(&a.weather, &plant)?;
            let measured = a.measured.clone().or_else(|| ctx.cfg.paths.measured.clone());
            let (reference, target) = match (&measured, &a.surrogate) {
                (Some(p), None) => ("measured", load_power(p, plant.site.timezone_offset)?),
                (None, Some(p)) => {
                    let model = load_model(p)?;
                    ("surrogate", surrogate_target(&weather, &plant, |g, t| model.predict(g, t))?)
                }
                _ => return Err(Error::validation("give exactly one of --measured or --surrogate")),
            };
            let result = calibrate(&weather, &target, &plant, &bounds, ctx.cfg.calibration.passes)?;
            let trace: Vec<Vec<f64>> = result.trace.iter().enumerate().map(|(i, &m)| vec![i as f64, m]).collect();
            write_plot_data(&ctx.path("calibration_trace.csv"), &["pass", "mse"], &trace)?;
            let body = EstimateReport { reference, parameters: result.parameter_table(), result: &result };
            write_json(&ctx.path("estimate_params_report.json"), &ctx.report("estimate-params", body)?)
        }
        Command::Validate(a) => {
            ctx.cfg.validate()?;
            let tz = ctx.cfg.plant.site.timezone_offset;
            let meas = load_power(&a.measured, tz)?;
            let model = load_power(&a.modelled, tz)?;
            meas.ensure_aligned(&model)?;
            let metrics = compute_metrics(&meas.power_kw, &model.power_kw, ctx.cfg.eps)?;
            let ba = bland_altman(&meas.power_kw, &model.power_kw, ctx.cfg.k)?;
            let pairs: Vec<Vec<f64>> = ba.pairs.iter().map(|&(m, d)| vec![m, d]).collect();
            write_plot_data(&ctx.path("bland_altman.csv"), &["average", "difference"], &pairs)?;
            let overlay: Vec<Vec<f64>> = meas
                .timestamps
                .iter()
                .zip(meas.power_kw.iter().zip(&model.power_kw))
                .map(|(t, (&m, &p))| vec![t.timestamp() as f64, m, p])
                .collect();
            write_plot_data(&ctx.path("overlay.csv"), &["unix_time", "measured_kw", "modelled_kw"], &overlay)?;
            let body = ValidateReport { metrics, bland_altman: (&ba).into() };
            write_json(&ctx.path("validate_report.json"), &ctx.report("validate", body)?)
        }
        Command::SynthWeather(a) => {
            let s = &mut ctx.cfg.synth;
            s.seed = seed;
            s.days = a.days.unwrap_or(s.days);
            s.step_minutes = a.step_minutes.unwrap_or(s.step_minutes);
            s.cloudiness = a.cloudiness.unwrap_or(s.cloudiness);
            ctx.cfg.validate()?;
            let plant = ctx.cfg.plant_config()?;
            let weather = synthetic_weather(&plant.site, &ctx.cfg.synth)?;
            write_weather(&ctx.path("weather.csv"), &weather)
        }
    }
}
