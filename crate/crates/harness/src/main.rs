use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use statrs::distribution::{ContinuousCDF, Normal};

use ratkrig::krige::{fit_ok, fit_rk, FitOptions};
use ratkrig::metrics::{loocv_ok, loocv_rk, loocv_uk, LoocvReport};
use ratkrig::testfns::Registry;
use ratkrig::universal::fit_uk;
use ratkrig::{DataSet, KernelFamily, RegressionBasis, UkVariant};
use ratkrig_harness::design::{design_equispaced, design_uniform};
use ratkrig_harness::{
    load_model, run_experiment, save_model, ExperimentConfig, ExperimentKind, HarnessError, Method, SavedModel,
};

#[derive(Parser)]
#[command(name = "ratkrig", version, about = "Rational kriging fits and simulation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a seeded uniform design (or a CSV file) and save it as JSON.
    Fit(FitArgs),
    /// Predict from a saved model on a grid or at points read from CSV.
    Predict(PredictArgs),
    /// Leave-one-out cross-validation RMSE.
    Loocv(LoocvArgs),
    /// Run a replicated simulation study.
    Experiment(ExperimentArgs),
    /// List the registered test functions.
    ListFns,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Rq,
    Matern32,
    Exp,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Rq => KernelFamily::RationalQuadratic,
            KernelArg::Matern32 => KernelFamily::Matern32,
            KernelArg::Exp => KernelFamily::Exponential,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Ok,
    Rk,
    Limit,
    Idw,
    Uk,
    Urk,
    Koh,
    Rkkoh,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ok => Method::Ok,
            MethodArg::Rk => Method::Rk,
            MethodArg::Limit => Method::Limit,
            MethodArg::Idw => Method::Idw,
            MethodArg::Uk => Method::Uk,
            MethodArg::Urk => Method::Urk,
            MethodArg::Koh => Method::Koh,
            MethodArg::Rkkoh => Method::RkKoh,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Test function sampled on a uniform design.
    #[arg(long = "fn", default_value = "beam")]
    function: String,
    /// CSV with input columns followed by the response; overrides --fn.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "rk")]
    method: MethodArg,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// CSV of query points, one per line.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Equispaced grid size on [0, 1] for one-input models.
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LoocvArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Re-estimate length-scales in every fold.
    #[arg(long)]
    refit: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// beam, onedim-a1, universal-sin2x, borehole, calibration or custom.
    #[arg(long)]
    experiment: Option<String>,
    /// Flat key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "fn")]
    function: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    kernel: Vec<KernelArg>,
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<MethodArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Result CSV; the summary goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    loocv: bool,
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Loocv(a) => cmd_loocv(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::ListFns => cmd_list_fns(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = record?
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::InvalidDesign(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_data(a: &DataArgs) -> Result<DataSet, HarnessError> {
    if let Some(path) = &a.data {
        let rows = read_csv_rows(path)?;
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r[..r.len().saturating_sub(1)].to_vec()).collect();
        let y: Vec<f64> = rows.iter().filter_map(|r| r.last().copied()).collect();
        return Ok(DataSet::from_rows(&x, y)?);
    }
    let registry = Registry::builtin();
    let tf = registry.get(&a.function)?;
    let x = design_uniform(a.n, tf.dim(), a.seed);
    let y = (0..a.n)
        .map(|i| tf.eval_unit(&x.row(i).iter().copied().collect::<Vec<_>>()))
        .collect::<ratkrig::Result<Vec<_>>>()?;
    Ok(DataSet::new(x, y.into())?)
}

fn fit_model(a: &DataArgs, data: &DataSet, opts: &FitOptions) -> Result<SavedModel, HarnessError> {
    let family = KernelFamily::from(a.kernel);
    let basis = RegressionBasis::centered_linear(data.p());
    Ok(match Method::from(a.method) {
        Method::Ok => SavedModel::Ok(fit_ok(data, family, opts)?),
        Method::Rk => SavedModel::Rk(fit_rk(data, family, opts)?, opts.regularization.clone()),
        Method::Uk => SavedModel::Uk(fit_uk(data, &basis, family, UkVariant::Plain, opts)?, opts.regularization.clone()),
        Method::Urk => {
            SavedModel::Uk(fit_uk(data, &basis, family, UkVariant::Rational, opts)?, opts.regularization.clone())
        }
        m => return Err(HarnessError::InvalidConfig(format!("`fit` supports ok, rk, uk and urk, not {m}"))),
    })
}

fn cmd_fit(a: FitArgs) -> Result<ExitCode, HarnessError> {
    let data = load_data(&a.data)?;
    let opts = FitOptions::default();
    let model = fit_model(&a.data, &data, &opts)?;
    let theta: Vec<String> = model.spec().lengthscales().iter().map(|t| t.to_string()).collect();
    println!("model {} kernel {} n {} theta {}", model.kind(), model.spec().family(), data.n(), theta.join(";"));
    match &model {
        SavedModel::Ok(m) => println!("mu_hat {}", m.mu()),
        SavedModel::Rk(m, _) => println!("mu_hat {}", m.mu()),
        SavedModel::Uk(m, _) => {
            let beta: Vec<String> = m.beta().iter().map(|b| b.to_string()).collect();
            println!("beta {}", beta.join(";"));
        }
    }
    if let Some(out) = &a.out {
        save_model(&model, out)?;
        println!("saved {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(a: PredictArgs) -> Result<ExitCode, HarnessError> {
    let model = load_model(&a.model)?;
    let points: Vec<Vec<f64>> = match &a.points {
        Some(path) => read_csv_rows(path)?,
        None if model.data().p() == 1 => design_equispaced(a.grid, 0.0, 1.0)?.into_iter().map(|v| vec![v]).collect(),
        None => return Err(HarnessError::InvalidConfig("--points is required for multi-input models".into())),
    };
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(HarnessError::InvalidConfig(format!("alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - a.alpha / 2.0);
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
        let mut header: Vec<String> = (0..model.data().p()).map(|j| format!("x{j}")).collect();
        header.extend(["mean", "sd", "lower", "upper"].map(String::from));
        w.write_record(&header)?;
        for x in &points {
            let pred = model.predict(x)?;
            let (lo, hi) = pred.interval(z);
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.extend([pred.mean, pred.sd, lo, hi].map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    match &a.out {
        Some(out) => std::fs::write(out, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_loocv(a: LoocvArgs) -> Result<ExitCode, HarnessError> {
    let data = load_data(&a.data)?;
    let opts = FitOptions::default();
    let report: LoocvReport = match fit_model(&a.data, &data, &opts)? {
        SavedModel::Ok(m) => loocv_ok(&m, a.refit, &opts)?,
        SavedModel::Rk(m, _) => loocv_rk(&m, a.refit, &opts)?,
        SavedModel::Uk(m, _) => loocv_uk(&m, a.refit, &opts)?,
    };
    println!("loocv_rmse {} folds {} failed {}", report.rmse, report.n_folds, report.failures.len());
    for (i, e) in &report.failures {
        eprintln!("fold {i}: {e}");
    }
    Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::preset(ExperimentKind::Custom),
    };
    if let Some(id) = &a.experiment {
        let kind: ExperimentKind = id.parse()?;
        if a.config.is_none() || kind != cfg.experiment {
            cfg = ExperimentConfig { out: cfg.out.clone(), threads: cfg.threads, ..ExperimentConfig::preset(kind) };
        }
    }
    if let Some(f) = &a.function {
        cfg.function = f.clone();
    }
    if !a.kernel.is_empty() {
        cfg.kernels = a.kernel.iter().map(|k| KernelFamily::from(*k)).collect();
    }
    if !a.method.is_empty() {
        cfg.methods = a.method.iter().map(|m| Method::from(*m)).collect();
    }
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.replications = a.reps.unwrap_or(cfg.replications);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    cfg.grid = a.grid.unwrap_or(cfg.grid);
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.loocv |= a.loocv;
    cfg.timing |= a.timing;
    Ok(cfg)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<ExitCode, HarnessError> {
    let cfg = experiment_config(&a)?;
    let output = run_experiment(&cfg)?;
    match &cfg.out {
        Some(out) => {
            for path in output.write(out)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            print!("{}", output.csv()?);
            eprintln!("{}", serde_json::to_string_pretty(&output.summary)?);
        }
    }
    let failures = output.failures();
    if failures > 0 {
        eprintln!("{failures} of {} rows failed", output.rows.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_list_fns() -> Result<ExitCode, HarnessError> {
    let registry = Registry::builtin();
    for name in registry.names() {
        let tf = registry.get(name)?;
        let domain: Vec<String> = tf.domain().iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
        println!("{name}\tp={}\t{}", tf.dim(), domain.join(" x "));
    }
    Ok(ExitCode::SUCCESS)
}
