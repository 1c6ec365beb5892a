//! Seeded synthetic stations for tests and demonstrations.
//!
//! Each day draws a cloudiness class (sticky from one day to the next), the
//! class fixes a daily clear-sky index level, and hourly values wander
//! around it as a clipped AR(1). Gaps are injected as a mixture of single
//! slots, sub-day runs, multi-week runs and multi-year outages until the
//! requested fraction is reached exactly.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::detrend::daily_from_hourly;
use super::PipelineError;
use crate::data_model::{
    DailyEntry, DailySeries, DailyUnit, DayClass, HourlySeries, HourlyUnit, Region, Slot, StationMeta,
};
use crate::solar_geometry::{clear_sky_profile, daily_extraterrestrial_insolation, GeoPosition, HOURS_PER_DAY};

pub const MIN_SYNTH_DAYS: usize = 30;
const KC_MIN: f64 = 0.05;
const KC_MAX: f64 = 1.0;

/// Gap length classes: single slots, up to a day, up to a month, longer.
const GAP_CLASSES: [(f64, usize, usize); 4] = [(0.35, 1, 1), (0.30, 2, 13), (0.25, 14, 390), (0.10, 391, 4745)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KcProcess {
    /// Daily level from the day class, hourly AR(1) around it.
    Regimes {
        /// Probability of keeping yesterday's class.
        persistence: f64,
        phi: f64,
        sigma: f64,
    },
    /// One AR(1) across all daylight hours, ignoring day classes.
    Ar1 { mean: f64, phi: f64, sigma: f64 },
}

impl Default for KcProcess {
    fn default() -> Self {
        KcProcess::Regimes {
            persistence: 0.6,
            phi: 0.7,
            sigma: 0.08,
        }
    }
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date")
}

fn default_mix() -> [f64; 5] {
    [0.15, 0.25, 0.3, 0.2, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Relative weights of the day classes, cloudiest first.
    #[serde(default = "default_mix")]
    pub regime_mix: [f64; 5],
    /// Fraction of hourly slots to blank out.
    #[serde(default)]
    pub gap_fraction: f64,
    #[serde(default)]
    pub kc_process: KcProcess,
}

impl SynthConfig {
    pub fn new(seed: u64, n_days: usize, gap_fraction: f64) -> Self {
        Self {
            seed,
            n_days,
            start_date: default_start(),
            regime_mix: default_mix(),
            gap_fraction,
            kc_process: KcProcess::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStation {
    /// Irradiance with gaps.
    pub hourly: HourlySeries,
    /// Insolation summed from `hourly`, with temperature extremes.
    pub daily: DailySeries,
    pub meta: StationMeta,
}

/// A lowland Pacific-coast station at 1.41° N.
pub fn biotopo_like(start: NaiveDate, n_days: usize) -> StationMeta {
    StationMeta {
        code: "SYN-BIOTOPO".into(),
        name: "Synthetic Biotopo".into(),
        position: GeoPosition {
            latitude_deg: 1.41,
            longitude_deg: -78.28,
            altitude_m: 512.0,
        },
        region: Region::Pacific,
        period: (start, start + chrono::Days::new(n_days.saturating_sub(1) as u64)),
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn check(cfg: &SynthConfig) -> Result<(), PipelineError> {
    let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
    if cfg.n_days < MIN_SYNTH_DAYS {
        return bad("synthetic stations need at least 30 days");
    }
    if !(0.0..1.0).contains(&cfg.gap_fraction) {
        return bad("gap_fraction must lie in [0, 1)");
    }
    if cfg.regime_mix.iter().any(|w| !(*w >= 0.0)) || cfg.regime_mix.iter().sum::<f64>() <= 0.0 {
        return bad("regime_mix needs nonnegative weights with a positive sum");
    }
    let (phi, sigma) = match cfg.kc_process {
        KcProcess::Regimes {
            persistence,
            phi,
            sigma,
        } => {
            if !(0.0..=1.0).contains(&persistence) {
                return bad("regime persistence must lie in [0, 1]");
            }
            (phi, sigma)
        }
        KcProcess::Ar1 { mean, phi, sigma } => {
            if !mean.is_finite() {
                return bad("AR(1) mean must be finite");
            }
            (phi, sigma)
        }
    };
    if !(phi.abs() < 1.0) || !(sigma >= 0.0 && sigma.is_finite()) {
        return bad("kc process needs |phi| < 1 and sigma >= 0");
    }
    Ok(())
}

/// Clear-sky index for every slot of every day, before gaps.
fn kc_grid(cfg: &SynthConfig, pos: &GeoPosition, series: &HourlySeries) -> Vec<[f64; HOURS_PER_DAY]> {
    let mut rng = rng_stream(cfg.seed, 1);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut dev = 0.0;
    let mut class = pick_weighted(&mut rng, &cfg.regime_mix);
    (0..cfg.n_days)
        .map(|d| {
            let (level, phi, sigma) = match cfg.kc_process {
                KcProcess::Regimes {
                    persistence,
                    phi,
                    sigma,
                } => {
                    if d > 0 && rng.gen::<f64>() >= persistence {
                        class = pick_weighted(&mut rng, &cfg.regime_mix);
                    }
                    let (lo, hi) = DayClass::ALL[class].bounds();
                    let kt = rng.gen_range(lo.max(0.05)..hi);
                    let jd = series.julian_day(d);
                    let clear: f64 = clear_sky_profile(pos, jd).iter().sum();
                    let h0 = daily_extraterrestrial_insolation(pos, jd);
                    ((kt * h0 / clear).clamp(KC_MIN, KC_MAX), phi, sigma)
                }
                KcProcess::Ar1 { mean, phi, sigma } => (mean, phi, sigma),
            };
            std::array::from_fn(|_| {
                dev = phi * dev + sigma * unit.sample(&mut rng);
                (level + dev).clamp(KC_MIN, KC_MAX)
            })
        })
        .collect()
}

/// Indices of exactly `round(fraction * n)` slots to blank out.
fn gap_mask(n: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let target = (fraction * n as f64).round() as usize;
    let mut rng = rng_stream(seed, 2);
    let mut mask = vec![false; n];
    let mut count = 0;
    let weights: Vec<f64> = GAP_CLASSES.iter().map(|c| c.0).collect();
    // random placement first, then a sweep so the count is exact
    let mut attempts = 0;
    while count < target && attempts < 100_000 {
        attempts += 1;
        let (_, lo, hi) = GAP_CLASSES[pick_weighted(&mut rng, &weights)];
        let len = rng.gen_range(lo..=hi);
        let start = rng.gen_range(0..n);
        for m in mask.iter_mut().skip(start).take(len) {
            if count == target {
                break;
            }
            if !*m {
                *m = true;
                count += 1;
            }
        }
    }
    for m in mask.iter_mut() {
        if count == target {
            break;
        }
        if !*m {
            *m = true;
            count += 1;
        }
    }
    mask
}

pub fn synthesize_station(cfg: &SynthConfig, pos: &GeoPosition) -> Result<SyntheticStation, PipelineError> {
    check(cfg)?;
    pos.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut hourly = HourlySeries::empty(cfg.start_date, HourlyUnit::Irradiance, cfg.n_days);
    let kc = kc_grid(cfg, pos, &hourly);

    let mut t_rng = rng_stream(cfg.seed, 3);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut temps = Vec::with_capacity(cfg.n_days);
    for (d, row) in kc.iter().enumerate() {
        let jd = hourly.julian_day(d);
        let cst = clear_sky_profile(pos, jd);
        let mut total = 0.0;
        for h in 0..HOURS_PER_DAY {
            let v = row[h] * cst[h];
            total += v;
            hourly.set(d, h, Slot::Measured(v))?;
        }
        let kt = total / daily_extraterrestrial_insolation(pos, jd);
        let t_min = 18.0 + unit.sample(&mut t_rng);
        let range = (4.0 + 10.0 * kt + unit.sample(&mut t_rng)).max(0.5);
        temps.push(DailyEntry {
            insolation: Slot::Missing,
            t_max: Some(t_min + range),
            t_min: Some(t_min),
        });
    }

    let mask = gap_mask(cfg.n_days * HOURS_PER_DAY, cfg.gap_fraction, cfg.seed);
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        hourly.set(i / HOURS_PER_DAY, i % HOURS_PER_DAY, Slot::Missing)?;
    }
    let temps = DailySeries::new(cfg.start_date, DailyUnit::Insolation, temps)?;
    let daily = daily_from_hourly(&hourly, Some(&temps), pos)?;
    let mut meta = biotopo_like(cfg.start_date, cfg.n_days);
    meta.position = *pos;
    Ok(SyntheticStation { hourly, daily, meta })
}
