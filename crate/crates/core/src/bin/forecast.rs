use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use solar_forecast::data_model::{missing_report, write_daily_csv, write_hourly_csv};
use solar_forecast::imputation::{
    evaluate_daily_imputation, evaluate_hourly_imputation, fit_temp_model, impute_daily, impute_hourly, TempModel,
};
use solar_forecast::neural::{gradient_check, LstmMode, NetConfig, NetKind, Network, Sample};
use solar_forecast::pipeline::{
    biotopo_like, daily_from_hourly, detrend_hourly, load_series, run_prequential, synthesize_station,
    write_outputs, PipelineError, RunConfig, SynthConfig,
};
use solar_forecast::quality_control::apply_qc;
use solar_forecast::solar_geometry::daily_extraterrestrial_insolation;

const EXIT_OTHER: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "forecast", version, about = "Day-ahead solar irradiance and insolation forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prequential run of the configured models; writes report.json,
    /// report.csv and forecasts.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the screening counters to this file.
        #[arg(long)]
        qc_report: Option<PathBuf>,
    },
    /// Screens the configured irradiance series against physical limits.
    Qc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fills gaps and optionally scores the filling on held-out values.
    Impute {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "hourly")]
        mode: ImputeMode,
        #[arg(long, value_enum, default_value = "hs")]
        temp_model: TempModelArg,
        /// Fraction of measured values to hide and reconstruct.
        #[arg(long)]
        mask_eval: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Writes a synthetic station in the ingestion CSV schema.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 365)]
        days: usize,
        #[arg(long, default_value_t = 0.0)]
        gap_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, value_enum)]
        model: NetArg,
        #[arg(long, default_value_t = 10)]
        input: usize,
        #[arg(long, default_value_t = 1)]
        output: usize,
        #[arg(long, default_value_t = 100)]
        instances: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long)]
        single_step: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeMode {
    Hourly,
    Daily,
}

#[derive(Clone, Copy, ValueEnum)]
enum TempModelArg {
    Hs,
    Logistic,
}

impl From<TempModelArg> for TempModel {
    fn from(v: TempModelArg) -> Self {
        match v {
            TempModelArg::Hs => TempModel::HargreavesSamani,
            TempModelArg::Logistic => TempModel::Logistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NetArg {
    Slfnn,
    Mlfnn,
    Lstm,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: if e.is_data_error() { EXIT_DATA } else { EXIT_OTHER },
            message: e.to_string(),
        }
    }
}

fn data_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_OTHER,
        message: e.to_string(),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data_failure(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::from_json(&text)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).map_err(io_failure)?;
    File::create(dir.join(name)).map(BufWriter::new).map_err(io_failure)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(create(dir, name)?, value).map_err(io_failure)
}

fn cmd_run(config: &Path, out: &Path, qc_report: Option<&Path>) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let output = run_prequential(&cfg)?;
    write_outputs(out, &output)?;
    if let Some(path) = qc_report {
        let file = File::create(path).map(BufWriter::new).map_err(io_failure)?;
        serde_json::to_writer_pretty(file, &output.report.qc).map_err(io_failure)?;
    }
    for m in &output.report.models {
        let s = &m.eval.kc.complete;
        log::info!("{}: kc MAE {:.4}, RMSE {:.4}, MBE {:.4} over {} values", m.model, s.mae, s.rmse, s.mbe, s.n);
    }
    Ok(if output.report.all_models_diverged() {
        EXIT_DIVERGED
    } else {
        0
    })
}

fn cmd_qc(config: &Path, out: &Path) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let (hourly, _) = load_series(&cfg)?;
    let (screened, report) = apply_qc(&hourly, &cfg.station.position).map_err(data_failure)?;
    write_json(out, "qc_report.json", &report)?;
    write_hourly_csv(create(out, "screened.csv")?, &cfg.station.code, "irradiance", &screened).map_err(io_failure)?;
    println!(
        "{} slots: {} retained, {} above I0, {} below 3% of clear sky, {} without data",
        report.n_input,
        report.n_retained,
        report.n_dropped_above_upper,
        report.n_dropped_below_lower,
        report.n_dropped_incomplete
    );
    Ok(0)
}

fn cmd_impute(
    config: &Path,
    out: &Path,
    mode: ImputeMode,
    temp_model: TempModel,
    mask_eval: Option<f64>,
    seed: u64,
) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let pos = cfg.station.position;
    let (hourly, temps) = load_series(&cfg)?;
    let (screened, _) = apply_qc(&hourly, &pos).map_err(data_failure)?;
    match mode {
        ImputeMode::Hourly => {
            let kc = detrend_hourly(&screened, &pos).map_err(data_failure)?;
            let filled = impute_hourly(&kc).map_err(data_failure)?;
            write_hourly_csv(create(out, "kc_imputed.csv")?, &cfg.station.code, "kc", &filled).map_err(io_failure)?;
            if let Some(frac) = mask_eval {
                let cmp = evaluate_hourly_imputation(&kc, frac, seed, impute_hourly).map_err(data_failure)?;
                let stats = cmp.stats().map_err(data_failure)?;
                println!("held out {}: kc MAE {:.4}, RMSE {:.4}, MBE {:.4}", stats.n, stats.mae, stats.rmse, stats.mbe);
                write_json(out, "imputation_eval.json", &stats)?;
            }
        }
        ImputeMode::Daily => {
            let daily = daily_from_hourly(&screened, temps.as_ref(), &pos).map_err(data_failure)?;
            let h0: Vec<f64> = (0..daily.n_days())
                .map(|d| daily_extraterrestrial_insolation(&pos, daily.julian_day(d)))
                .collect();
            let coeffs = fit_temp_model(&daily, &h0, temp_model).map_err(data_failure)?;
            let filled = impute_daily(&daily, &coeffs, &h0).map_err(data_failure)?;
            println!(
                "{:?}: a = {}, b = {}; {} days filled, {} left empty",
                coeffs.model,
                coeffs.a,
                coeffs.b,
                filled.n_imputed,
                filled.unfillable.len()
            );
            write_daily_csv(create(out, "daily_imputed.csv")?, &cfg.station.code, &filled.series)
                .map_err(io_failure)?;
            write_json(out, "temperature_model.json", &coeffs)?;
            if let Some(frac) = mask_eval {
                let cmp = evaluate_daily_imputation(&daily, &h0, frac, seed, temp_model).map_err(data_failure)?;
                let stats = cmp.stats().map_err(data_failure)?;
                println!("held out {}: MAE {:.1}, RMSE {:.1}, MBE {:.1} Wh/m²", stats.n, stats.mae, stats.rmse, stats.mbe);
                write_json(out, "imputation_eval.json", &stats)?;
            }
        }
    }
    Ok(0)
}

fn cmd_synth(seed: u64, days: usize, gap_fraction: f64, out: &Path) -> Result<u8, Failure> {
    let cfg = SynthConfig::new(seed, days, gap_fraction);
    let meta = biotopo_like(cfg.start_date, days);
    let s = synthesize_station(&cfg, &meta.position)?;
    write_hourly_csv(create(out, "hourly.csv")?, &meta.code, "irradiance", &s.hourly).map_err(io_failure)?;
    write_daily_csv(create(out, "daily.csv")?, &meta.code, &s.daily).map_err(io_failure)?;
    write_json(out, "station.json", &s.meta)?;
    let report = missing_report(&s.hourly).map_err(data_failure)?;
    println!(
        "{} days, {:.1}% missing, longest gap {} slots, {} single-slot gaps",
        days, report.pct_missing, report.longest_gap, report.one_size_gap_count
    );
    Ok(0)
}

fn cmd_gradcheck(
    model: NetArg,
    input: usize,
    output: usize,
    instances: u64,
    seed: u64,
    epsilon: f64,
    single_step: bool,
) -> Result<u8, Failure> {
    let kind = match model {
        NetArg::Slfnn => NetKind::SlFnn,
        NetArg::Mlfnn => NetKind::MlFnn,
        NetArg::Lstm => NetKind::Lstm,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut cfg = NetConfig::new(kind, input, output, seed.wrapping_add(i));
        if single_step {
            cfg.lstm_mode = LstmMode::SingleStep;
        }
        let net = Network::init(cfg).map_err(data_failure)?;
        let sample = Sample {
            input: (0..input).map(|_| rng.gen_range(0.0..1.2)).collect(),
            target: (0..output).map(|_| rng.gen_range(0.0..1.2)).collect(),
        };
        worst = worst.max(gradient_check(&net, &[sample], epsilon).map_err(data_failure)?);
    }
    println!("max relative gradient error over {instances} instances: {worst:.3e}");
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, qc_report } => cmd_run(&config, &out, qc_report.as_deref()),
        Command::Qc { config, out } => cmd_qc(&config, &out),
        Command::Impute {
            config,
            out,
            mode,
            temp_model,
            mask_eval,
            seed,
        } => cmd_impute(&config, &out, mode, temp_model.into(), mask_eval, seed),
        Command::Synth {
            seed,
            days,
            gap_fraction,
            out,
        } => cmd_synth(seed, days, gap_fraction, &out),
        Command::Gradcheck {
            model,
            input,
            output,
            instances,
            seed,
            epsilon,
            single_step,
        } => cmd_gradcheck(model, input, output, instances, seed, epsilon, single_step),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
