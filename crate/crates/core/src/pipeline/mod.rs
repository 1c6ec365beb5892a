//! End-to-end runs: screening, gap filling, detrending, prequential
//! forecasting and scoring.
//!
//! Two tracks share the same loop. The hourly track forecasts the 13
//! clear-sky index values of the next day from the previous `window_days`
//! days (130 values by default); the daily track forecasts one insolation
//! ratio from `window_days` daily ratios.
//!
//! At step `t` every model sees the window of days `t-W+1..=t` and forecasts
//! day `t+1`. The forecast is recorded first; only then does the model learn
//! from the new pair. ARIMA is refitted on each window; networks take one
//! gradient step per day on the latest `batch_windows` window/target pairs
//! once that many exist.

mod detrend;
mod report;
mod synth;

use std::path::PathBuf;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detrend::{daily_from_hourly, detrend_daily, detrend_hourly, retrend_daily, retrend_hourly};
pub use report::{write_forecasts_csv, write_outputs, write_report_csv};
pub use synth::{biotopo_like, synthesize_station, KcProcess, SynthConfig, SyntheticStation, MIN_SYNTH_DAYS};

use crate::arima::{self, ArimaError, ArimaOrder, FitOptions};
use crate::data_model::{
    ingest_csv, missing_report, DailySeries, DataError, HourlySeries, HourlyUnit, MissingReport, Provenance,
    StationMeta,
};
use crate::imputation::{fit_temp_model, impute_daily, impute_hourly, ImputeError, TempModel, TempModelCoeffs};
use crate::metrics::{quarter_stats, MetricsError, QuarterStats};
use crate::neural::{LstmMode, NetConfig, NetKind, Network, NeuralError, Sample, DEFAULT_LEARNING_RATE};
use crate::quality_control::{apply_qc, QcError, QcReport};
use crate::solar_geometry::{
    clear_sky_profile, daily_clear_sky_insolation, daily_extraterrestrial_insolation, GeoPosition, HOURS_PER_DAY,
};

pub const DEFAULT_WINDOW_DAYS: usize = 10;
pub const PERSISTENCE: &str = "persistence";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Qc(#[from] QcError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error("series of {n_days} days is too short; need at least {needed}")]
    TooShort { n_days: usize, needed: usize },
    #[error("no measured target values to score {0}")]
    NoMeasuredTargets(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    /// True for problems with the input data or configuration, as opposed to
    /// I/O failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, PipelineError::Io(_) | PipelineError::Csv(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    HourlyIrradiance,
    DailyInsolation,
}

impl Track {
    pub fn values_per_day(self) -> usize {
        match self {
            Track::HourlyIrradiance => HOURS_PER_DAY,
            Track::DailyInsolation => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Arima,
    Slfnn,
    Mlfnn,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Arima, ModelKind::Slfnn, ModelKind::Mlfnn, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "arima",
            ModelKind::Slfnn => "slfnn",
            ModelKind::Mlfnn => "mlfnn",
            ModelKind::Lstm => "lstm",
        }
    }

    fn net_kind(self) -> Option<NetKind> {
        match self {
            ModelKind::Arima => None,
            ModelKind::Slfnn => Some(NetKind::SlFnn),
            ModelKind::Mlfnn => Some(NetKind::MlFnn),
            ModelKind::Lstm => Some(NetKind::Lstm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ArimaMode {
    /// Minimum-AIC order over the 27-order grid, chosen afresh per window.
    #[default]
    Auto,
    Fixed {
        p: usize,
        d: usize,
        q: usize,
        #[serde(default = "yes")]
        intercept: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationOptions {
    pub temp_model: TempModel,
    /// Fixed temperature-model coefficients; fitted on the series when absent.
    #[serde(default)]
    pub temp_coeffs: Option<TempModelCoeffs>,
}

impl Default for ImputationOptions {
    fn default() -> Self {
        Self {
            temp_model: TempModel::HargreavesSamani,
            temp_coeffs: None,
        }
    }
}

fn default_irradiance_variable() -> String {
    "irradiance".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv {
        path: PathBuf,
        #[serde(default = "default_irradiance_variable")]
        irradiance_variable: String,
        #[serde(default)]
        t_max_variable: Option<String>,
        #[serde(default)]
        t_min_variable: Option<String>,
    },
}

fn default_window() -> usize {
    DEFAULT_WINDOW_DAYS
}

fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}

fn default_batch() -> usize {
    crate::neural::DEFAULT_BATCH_WINDOWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub station: StationMeta,
    pub track: Track,
    pub models: Vec<ModelKind>,
    #[serde(default = "default_window")]
    pub window_days: usize,
    pub seed: u64,
    #[serde(default)]
    pub imputation: ImputationOptions,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_windows: usize,
    #[serde(default)]
    pub lstm_mode: LstmMode,
    #[serde(default)]
    pub arima: ArimaMode,
    pub data: DataSource,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        self.station.validate()?;
        if self.window_days == 0 {
            return bad("window_days must be at least 1");
        }
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return bad("models are listed more than once");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_windows == 0 {
            return bad("batch_windows must be at least 1");
        }
        if let ArimaMode::Fixed { p, d, q, .. } = self.arima {
            ArimaOrder::new(p, d, q).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Data preparation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationSummary {
    /// Forecast-scale values filled by the hourly neighbour rules.
    pub n_hourly_imputed: usize,
    /// Daily insolation values filled from the temperature model.
    pub n_temperature_imputed: usize,
    /// Daily ratios carried forward because no temperature range was available.
    pub n_carried_forward: usize,
    pub temp_coeffs: Option<TempModelCoeffs>,
}

/// Gap-free forecast-scale series with the information needed to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub track: Track,
    pub start_date: NaiveDate,
    pub position: GeoPosition,
    pub n_days: usize,
    /// Day-major clear-sky index (hourly) or `H / H_clear` (daily).
    pub kc: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// Physical measurement behind each measured value.
    pub observed: Vec<Option<f64>>,
    /// Clear-sky irradiance or insolation of each value; 0 with the sun down.
    pub clear_sky: Vec<f64>,
    pub qc: QcReport,
    pub missing: MissingReport,
    pub imputation: ImputationSummary,
}

impl PreparedData {
    pub fn values_per_day(&self) -> usize {
        self.track.values_per_day()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(day as u64)
    }
}

/// Raw irradiance plus optional daily temperatures for the configured source.
pub fn load_series(config: &RunConfig) -> Result<(HourlySeries, Option<DailySeries>), PipelineError> {
    match &config.data {
        DataSource::Synthetic(synth) => {
            let s = synthesize_station(synth, &config.station.position)?;
            Ok((s.hourly, Some(s.daily)))
        }
        DataSource::Csv {
            path,
            irradiance_variable,
            t_max_variable,
            t_min_variable,
        } => {
            let ingested = ingest_csv(path)?;
            let station = &config.station.code;
            let hourly = ingested
                .hourly(station, irradiance_variable, HourlyUnit::Irradiance)?
                .ok_or_else(|| {
                    PipelineError::Config(format!("no {irradiance_variable:?} records for station {station:?}"))
                })?;
            let temps = ingested.daily(station, None, t_max_variable.as_deref(), t_min_variable.as_deref())?;
            Ok((hourly, temps))
        }
    }
}

pub fn prepare(config: &RunConfig) -> Result<PreparedData, PipelineError> {
    let (hourly, temps) = load_series(config)?;
    prepare_series(config, &hourly, temps.as_ref())
}

/// Screens, fills and detrends already-loaded series.
pub fn prepare_series(
    config: &RunConfig,
    hourly: &HourlySeries,
    temps: Option<&DailySeries>,
) -> Result<PreparedData, PipelineError> {
    let pos = config.station.position;
    let missing = missing_report(hourly)?;
    let (screened, qc) = apply_qc(hourly, &pos)?;
    let n_days = screened.n_days();
    let mut out = PreparedData {
        track: config.track,
        start_date: screened.start_date(),
        position: pos,
        n_days,
        kc: Vec::new(),
        provenance: Vec::new(),
        observed: Vec::new(),
        clear_sky: Vec::new(),
        qc,
        missing,
        imputation: ImputationSummary {
            n_hourly_imputed: 0,
            n_temperature_imputed: 0,
            n_carried_forward: 0,
            temp_coeffs: None,
        },
    };
    match config.track {
        Track::HourlyIrradiance => {
            let kc = detrend_hourly(&screened, &pos)?;
            let filled = impute_hourly(&kc)?;
            out.imputation.n_hourly_imputed = kc.iter_slots().filter(|s| s.is_missing()).count();
            for d in 0..n_days {
                let cst = clear_sky_profile(&pos, filled.julian_day(d));
                for (h, &clear) in cst.iter().enumerate() {
                    let slot = filled.days()[d][h];
                    let prov = slot.provenance().expect("imputation fills every slot");
                    out.kc.push(slot.value().expect("imputation fills every slot"));
                    out.provenance.push(prov);
                    out.observed.push(match prov {
                        Provenance::Measured => screened.days()[d][h].value(),
                        Provenance::Imputed => None,
                    });
                    out.clear_sky.push(clear);
                }
            }
        }
        Track::DailyInsolation => {
            let daily = daily_from_hourly(&screened, temps, &pos)?;
            let h0: Vec<f64> = (0..n_days)
                .map(|d| daily_extraterrestrial_insolation(&pos, daily.julian_day(d)))
                .collect();
            let coeffs = match config.imputation.temp_coeffs {
                Some(c) => Some(c),
                None => match fit_temp_model(&daily, &h0, config.imputation.temp_model) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        log::warn!("temperature model not fitted ({e}); daily gaps carried forward");
                        None
                    }
                },
            };
            out.imputation.temp_coeffs = coeffs;
            let filled = match &coeffs {
                Some(c) => {
                    let imp = impute_daily(&daily, c, &h0)?;
                    out.imputation.n_temperature_imputed = imp.n_imputed;
                    imp.series
                }
                None => daily.clone(),
            };
            let ratio = detrend_daily(&filled, &pos)?;
            let mut last = crate::imputation::FIRST_DAY_FILL;
            for d in 0..n_days {
                let slot = ratio.entries()[d].insolation;
                let (value, prov) = match (slot.value(), slot.provenance()) {
                    (Some(v), Some(p)) => (v, p),
                    _ => {
                        out.imputation.n_carried_forward += 1;
                        (last, Provenance::Imputed)
                    }
                };
                last = value;
                out.kc.push(value);
                out.provenance.push(prov);
                out.observed.push(match prov {
                    Provenance::Measured => daily.entries()[d].insolation.value(),
                    Provenance::Imputed => None,
                });
                out.clear_sky.push(daily_clear_sky_insolation(&pos, daily.julian_day(d)));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Prequential loop

/// One forecast value and what it is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub day: usize,
    pub date: NaiveDate,
    pub slot: usize,
    pub kc_pred: f64,
    pub phys_pred: f64,
    pub kc_obs: f64,
    pub phys_obs: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOrder {
    pub day: usize,
    /// `None` when no order could be fitted and persistence was used.
    pub order: Option<ArimaOrder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLog {
    pub model: String,
    /// `values_per_day` records per forecast day, in day order.
    pub records: Vec<ForecastRecord>,
    /// Sum of each day's physical forecasts.
    pub daily_phys_pred: Vec<f64>,
    pub train_steps: u64,
    pub diverged_at_step: Option<u64>,
    pub arima_orders: Vec<StepOrder>,
    pub arima_nonconverged: usize,
}

/// First and last step index: the window of step `t` ends on day `t`.
fn step_range(n_days: usize, window: usize) -> Result<std::ops::RangeInclusive<usize>, PipelineError> {
    if n_days < window + 1 {
        return Err(PipelineError::TooShort {
            n_days,
            needed: window + 1,
        });
    }
    Ok(window - 1..=n_days - 2)
}

fn window_of(data: &PreparedData, window: usize, t: usize) -> &[f64] {
    let v = data.values_per_day();
    &data.kc[(t + 1 - window) * v..(t + 1) * v]
}

fn day_values(data: &PreparedData, day: usize) -> &[f64] {
    let v = data.values_per_day();
    &data.kc[day * v..(day + 1) * v]
}

fn persistence_forecast(window: &[f64], v: usize) -> Vec<f64> {
    vec![*window.last().expect("non-empty window"); v]
}

enum Forecaster {
    Persistence,
    Arima(ArimaMode),
    Net(Box<Network>),
}

impl Forecaster {
    fn name(&self) -> String {
        match self {
            Forecaster::Persistence => PERSISTENCE.into(),
            Forecaster::Arima(_) => ModelKind::Arima.name().into(),
            Forecaster::Net(n) => n.config().kind.name().into(),
        }
    }
}

fn arima_step(mode: ArimaMode, window: &[f64], v: usize, log: &mut ModelLog, day: usize) -> Vec<f64> {
    let fitted = match mode {
        ArimaMode::Auto => arima::select_order(window),
        ArimaMode::Fixed { p, d, q, intercept } => ArimaOrder::new(p, d, q).and_then(|o| {
            arima::fit_with(
                window,
                o,
                FitOptions {
                    intercept,
                    ..Default::default()
                },
            )
        }),
    };
    let result: Result<(ArimaOrder, Vec<f64>), ArimaError> =
        fitted.and_then(|f| {
            if !f.converged {
                log.arima_nonconverged += 1;
            }
            arima::forecast(&f, window, v).map(|fc| (f.order, fc))
        });
    match result {
        Ok((order, fc)) if fc.iter().all(|x| x.is_finite()) => {
            log.arima_orders.push(StepOrder { day, order: Some(order) });
            fc
        }
        other => {
            if let Err(e) = other {
                log::warn!("ARIMA failed for day {day}: {e}; using persistence");
            }
            log.arima_orders.push(StepOrder { day, order: None });
            persistence_forecast(window, v)
        }
    }
}

fn run_forecaster(mut model: Forecaster, data: &PreparedData, config: &RunConfig) -> Result<ModelLog, PipelineError> {
    let v = data.values_per_day();
    let w = config.window_days;
    let steps = step_range(data.n_days, w)?;
    let first = *steps.start();
    let mut log = ModelLog {
        model: model.name(),
        records: Vec::with_capacity(steps.clone().count() * v),
        daily_phys_pred: Vec::with_capacity(steps.clone().count()),
        train_steps: 0,
        diverged_at_step: None,
        arima_orders: Vec::new(),
        arima_nonconverged: 0,
    };
    for t in steps {
        let target = t + 1;
        let window = window_of(data, w, t);
        let pred = match &mut model {
            Forecaster::Persistence => persistence_forecast(window, v),
            Forecaster::Arima(mode) => arima_step(*mode, window, v, &mut log, target),
            Forecaster::Net(net) => net.predict(window).map_err(|e| PipelineError::Config(e.to_string()))?,
        };
        let date = data.date(target);
        let phys: Vec<f64> = match data.track {
            Track::HourlyIrradiance => retrend_hourly(&pred, &data.position, date),
            Track::DailyInsolation => vec![retrend_daily(pred[0], &data.position, date)],
        };
        log.daily_phys_pred.push(phys.iter().sum());
        for s in 0..v {
            let i = target * v + s;
            log.records.push(ForecastRecord {
                day: target,
                date,
                slot: s,
                kc_pred: pred[s],
                phys_pred: phys[s],
                kc_obs: data.kc[i],
                phys_obs: data.observed[i],
                provenance: data.provenance[i],
            });
        }

        // learn from the day just scored
        if let Forecaster::Net(net) = &mut model {
            let b = config.batch_windows;
            if t + 1 >= first + b && !net.is_diverged() {
                let batch: Vec<Sample> = (t + 1 - b..=t)
                    .map(|s| Sample {
                        input: window_of(data, w, s).to_vec(),
                        target: day_values(data, s + 1).to_vec(),
                    })
                    .collect();
                match net.train_step(&batch) {
                    Ok(_) => log.train_steps += 1,
                    Err(NeuralError::Diverged { step }) => log.diverged_at_step = Some(step),
                    Err(e) => return Err(PipelineError::Config(e.to_string())),
                }
            }
        }
    }
    Ok(log)
}

fn build_forecaster(kind: ModelKind, data: &PreparedData, config: &RunConfig) -> Result<Forecaster, PipelineError> {
    let Some(net_kind) = kind.net_kind() else {
        return Ok(Forecaster::Arima(config.arima));
    };
    let v = data.values_per_day();
    let mut cfg = NetConfig::new(
        net_kind,
        config.window_days * v,
        v,
        config.seed.wrapping_add(kind as u64),
    );
    cfg.learning_rate = config.learning_rate;
    cfg.batch_windows = config.batch_windows;
    cfg.lstm_mode = config.lstm_mode;
    Network::init(cfg)
        .map(|n| Forecaster::Net(Box::new(n)))
        .map_err(|e| PipelineError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Scoring

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Forecast scale; percentage errors are left out here.
    pub kc: QuarterStats,
    /// Irradiance (Wh/m²) or insolation (Wh/(m²·day)).
    pub physical: QuarterStats,
}

/// Scores a forecast log. Only targets whose provenance is measured count.
pub fn evaluate(records: &[ForecastRecord], values_per_day: usize) -> Result<EvalReport, MetricsError> {
    let mask: Vec<bool> = records.iter().map(|r| r.provenance == Provenance::Measured).collect();
    let pick = |f: &dyn Fn(&ForecastRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mut kc = quarter_stats(
        &pick(&|r| r.kc_pred),
        &pick(&|r| r.kc_obs),
        &mask,
        values_per_day,
    )?;
    for s in std::iter::once(&mut kc.complete).chain(kc.quarters.iter_mut().flatten()) {
        s.mape_pct = None;
        s.mpe_pct = None;
        s.n_pct_excluded = 0;
    }
    let phys_mask: Vec<bool> = records
        .iter()
        .zip(&mask)
        .map(|(r, m)| *m && r.phys_obs.is_some())
        .collect();
    let physical = quarter_stats(
        &pick(&|r| r.phys_pred),
        &pick(&|r| r.phys_obs.unwrap_or(0.0)),
        &phys_mask,
        values_per_day,
    )?;
    Ok(EvalReport { kc, physical })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaSummary {
    pub orders: Vec<StepOrder>,
    /// Steps where no order could be fitted and persistence stood in.
    pub fallback_steps: usize,
    /// Fits stopped by the iteration cap.
    pub nonconverged_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub eval: EvalReport,
    /// Whole-series forecast-scale MAE below the persistence baseline's.
    pub beats_persistence: Option<bool>,
    pub train_steps: u64,
    pub diverged: bool,
    pub diverged_at_step: Option<u64>,
    pub arima: Option<ArimaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub init_scheme: String,
    pub optimizer: String,
    pub learning_rate: f64,
    pub batch_windows: usize,
    pub lstm_mode: LstmMode,
    pub arima: ArimaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub station: String,
    pub track: Track,
    pub seed: u64,
    pub window_days: usize,
    pub n_days: usize,
    pub n_forecast_days: usize,
    pub qc: QcReport,
    pub missing: MissingReport,
    pub imputation: ImputationSummary,
    pub metadata: RunMetadata,
    pub persistence: ModelReport,
    pub models: Vec<ModelReport>,
    pub config: RunConfig,
    pub runtime_secs: f64,
}

impl RunReport {
    /// Every requested model stopped training because of divergence. ARIMA
    /// never diverges.
    pub fn all_models_diverged(&self) -> bool {
        self.models.iter().all(|m| m.diverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    /// Requested models in configuration order, then persistence.
    pub logs: Vec<ModelLog>,
}

fn model_report(log: &ModelLog, v: usize, baseline_mae: Option<f64>) -> Result<ModelReport, PipelineError> {
    let eval = evaluate(&log.records, v).map_err(|e| match e {
        MetricsError::Empty => PipelineError::NoMeasuredTargets(log.model.clone()),
        other => other.into(),
    })?;
    let arima = (log.model == ModelKind::Arima.name()).then(|| ArimaSummary {
        fallback_steps: log.arima_orders.iter().filter(|o| o.order.is_none()).count(),
        orders: log.arima_orders.clone(),
        nonconverged_fits: log.arima_nonconverged,
    });
    Ok(ModelReport {
        model: log.model.clone(),
        beats_persistence: baseline_mae.map(|b| eval.kc.complete.mae < b),
        eval,
        train_steps: log.train_steps,
        diverged: log.diverged_at_step.is_some(),
        diverged_at_step: log.diverged_at_step,
        arima,
    })
}

/// Prequential run on prepared data.
pub fn run_prepared(config: &RunConfig, data: &PreparedData) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let started = Instant::now();
    let steps = step_range(data.n_days, config.window_days)?;
    let mut forecasters = Vec::with_capacity(config.models.len() + 1);
    for kind in &config.models {
        forecasters.push(build_forecaster(*kind, data, config)?);
    }
    forecasters.push(Forecaster::Persistence);
    let logs = forecasters
        .into_par_iter()
        .map(|f| run_forecaster(f, data, config))
        .collect::<Result<Vec<_>, _>>()?;

    let v = data.values_per_day();
    let persistence = model_report(logs.last().expect("persistence log"), v, None)?;
    let baseline = persistence.eval.kc.complete.mae;
    let models = logs[..logs.len() - 1]
        .iter()
        .map(|l| model_report(l, v, Some(baseline)))
        .collect::<Result<Vec<_>, _>>()?;
    for m in &models {
        if m.diverged {
            log::warn!("{} diverged at step {:?}", m.model, m.diverged_at_step);
        }
    }
    let report = RunReport {
        station: config.station.code.clone(),
        track: config.track,
        seed: config.seed,
        window_days: config.window_days,
        n_days: data.n_days,
        n_forecast_days: steps.count(),
        qc: data.qc.clone(),
        missing: data.missing.clone(),
        imputation: data.imputation.clone(),
        metadata: RunMetadata {
            init_scheme: "weights uniform in ±1/sqrt(fan_in) (LSTM matrices ±1/sqrt(hidden)); biases 0; LSTM forget-gate bias 1".into(),
            optimizer: "plain gradient descent on mean squared error".into(),
            learning_rate: config.learning_rate,
            batch_windows: config.batch_windows,
            lstm_mode: config.lstm_mode,
            arima: config.arima,
        },
        persistence,
        models,
        config: config.clone(),
        runtime_secs: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, logs })
}

/// Loads, prepares and runs the configured station.
pub fn run_prequential(config: &RunConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let data = prepare(config)?;
    run_prepared(config, &data)
}
