//! Gap filling.
//!
//! Hourly clear-sky-index series are filled by neighbour averaging in
//! chronological order; daily insolation is filled from the temperature
//! range with a Hargreaves–Samani or logistic model of `H / H0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DailySeries, DailyUnit, HourlySeries, HourlyUnit, Slot};
use crate::metrics::{compute_stats, ErrorStats, MetricsError};
use crate::solar_geometry::HOURS_PER_DAY;

/// Value used for missing slots on the first day, where no history exists.
pub const FIRST_DAY_FILL: f64 = 1.0;
/// Minimum number of complete days needed to fit a temperature model.
pub const MIN_FIT_DAYS: usize = 30;

const LOGISTIC_MAX_ITER: usize = 100;
const LOGISTIC_STEP_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("hourly imputation expects a clear-sky index series")]
    WrongUnit,
    #[error("need at least {needed} usable days, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("reference insolation has {got} days, series has {expected}")]
    ReferenceLength { expected: usize, got: usize },
    #[error("fitted Hargreaves–Samani coefficient {0} is not positive")]
    NonPositiveCoefficient(f64),
    #[error("mask fraction {0} outside (0, 0.5]")]
    MaskFraction(f64),
    #[error("no measured values to hold out")]
    NothingToMask,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

// ---------------------------------------------------------------------------
// Hourly rules

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Fills every missing slot of a clear-sky index series.
///
/// Day 0 gaps take [`FIRST_DAY_FILL`]. Later days are swept 06:00, 07:00..17:00,
/// 18:00 so that "the previous hour of the current day" may itself be a value
/// filled earlier in the sweep:
///
/// * 06:00: mean of yesterday 06:00 and today 07:00 (yesterday alone if
///   07:00 is missing too);
/// * 18:00: mean of today 17:00 and yesterday 18:00;
/// * otherwise: mean of yesterday same hour, today previous hour and today
///   next hour, dropping the next hour when it is missing.
pub fn impute_hourly(series: &HourlySeries) -> Result<HourlySeries, ImputeError> {
    if series.unit() != HourlyUnit::ClearSkyIndex {
        return Err(ImputeError::WrongUnit);
    }
    let mut days = series.days().to_vec();
    let last = HOURS_PER_DAY - 1;
    for d in 0..days.len() {
        if d == 0 {
            for slot in days[0].iter_mut().filter(|s| s.is_missing()) {
                *slot = Slot::Imputed(FIRST_DAY_FILL);
            }
            continue;
        }
        let (before, rest) = days.split_at_mut(d);
        let prev = &before[d - 1];
        let cur = &mut rest[0];
        let known = |s: Slot| s.value().expect("earlier slots are filled");
        for h in 0..HOURS_PER_DAY {
            if !cur[h].is_missing() {
                continue;
            }
            let value = if h == 0 {
                match cur[1].value() {
                    Some(next) => mean(&[known(prev[0]), next]),
                    None => known(prev[0]),
                }
            } else if h == last {
                mean(&[known(cur[last - 1]), known(prev[last])])
            } else {
                match cur[h + 1].value() {
                    Some(next) => mean(&[known(prev[h]), known(cur[h - 1]), next]),
                    None => mean(&[known(prev[h]), known(cur[h - 1])]),
                }
            };
            cur[h] = Slot::Imputed(value);
        }
    }
    Ok(HourlySeries::from_parts_unchecked(
        series.start_date(),
        HourlyUnit::ClearSkyIndex,
        days,
    ))
}

// ---------------------------------------------------------------------------
// Temperature models

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TempModel {
    HargreavesSamani,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempModelCoeffs {
    pub model: TempModel,
    pub a: f64,
    /// Unused by Hargreaves–Samani.
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl TempModelCoeffs {
    /// Modelled `H / H0` for a daily temperature range. Hargreaves–Samani
    /// output is clipped to [0, 1]; `None` for a negative range.
    pub fn ratio(&self, delta_t: f64) -> Option<f64> {
        if !(delta_t >= 0.0) {
            return None;
        }
        Some(match self.model {
            TempModel::HargreavesSamani => (self.a * delta_t.sqrt()).clamp(0.0, 1.0),
            TempModel::Logistic => sigmoid(self.a + self.b * delta_t),
        })
    }
}

/// Fits a temperature model to paired `(ΔT, H/H0)` samples. Pairs with a
/// negative or non-finite temperature range are skipped.
pub fn fit_temp_pairs(delta_t: &[f64], ratio: &[f64], model: TempModel) -> Result<TempModelCoeffs, ImputeError> {
    let mut xs = Vec::with_capacity(delta_t.len());
    let mut ys = Vec::with_capacity(delta_t.len());
    let mut skipped = 0usize;
    for (&x, &y) in delta_t.iter().zip(ratio) {
        if x >= 0.0 && x.is_finite() && y.is_finite() {
            xs.push(x);
            ys.push(y);
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::warn!("temperature model fit skipped {skipped} rows with negative or invalid range");
    }
    if xs.len() < MIN_FIT_DAYS {
        return Err(ImputeError::InsufficientData {
            needed: MIN_FIT_DAYS,
            found: xs.len(),
        });
    }
    match model {
        TempModel::HargreavesSamani => fit_hargreaves_samani(&xs, &ys),
        TempModel::Logistic => Ok(fit_logistic(&xs, &ys)),
    }
}

fn fit_hargreaves_samani(delta_t: &[f64], ratio: &[f64]) -> Result<TempModelCoeffs, ImputeError> {
    let (sxy, sxx) = delta_t.iter().zip(ratio).fold((0.0, 0.0), |(sxy, sxx), (&dt, &y)| {
        let x = dt.sqrt();
        (sxy + x * y, sxx + x * x)
    });
    let a = sxy / sxx;
    if !(a > 0.0 && a.is_finite()) {
        return Err(ImputeError::NonPositiveCoefficient(a));
    }
    Ok(TempModelCoeffs {
        model: TempModel::HargreavesSamani,
        a,
        b: 0.0,
    })
}

fn logistic_sse(a: f64, b: f64, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = sigmoid(a + b * x) - y;
            r * r
        })
        .sum()
}

/// Least-squares logistic fit by damped Newton iteration, falling back to
/// the Gauss–Newton matrix when the Hessian is not positive definite.
fn fit_logistic(xs: &[f64], ys: &[f64]) -> TempModelCoeffs {
    let m = mean(ys).clamp(1e-6, 1.0 - 1e-6);
    let (mut a, mut b) = (logit(m), 0.0);
    let mut f = logistic_sse(a, b, xs, ys);
    for _ in 0..LOGISTIC_MAX_ITER {
        let (mut g0, mut g1) = (0.0, 0.0);
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        let (mut n00, mut n01, mut n11) = (0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            let s = sigmoid(a + b * x);
            let d1 = s * (1.0 - s);
            let d2 = d1 * (1.0 - 2.0 * s);
            let r = s - y;
            g0 += 2.0 * r * d1;
            g1 += 2.0 * r * d1 * x;
            let gn = 2.0 * d1 * d1;
            let full = gn + 2.0 * r * d2;
            n00 += gn;
            n01 += gn * x;
            n11 += gn * x * x;
            h00 += full;
            h01 += full * x;
            h11 += full * x * x;
        }
        let det = h00 * h11 - h01 * h01;
        if !(h00 > 0.0 && det > 0.0) {
            let ridge = 1e-12 * (n00 + n11).max(1e-300);
            h00 = n00 + ridge;
            h01 = n01;
            h11 = n11 + ridge;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            break;
        }
        let da = -(h11 * g0 - h01 * g1) / det;
        let db = -(h00 * g1 - h01 * g0) / det;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let f_new = logistic_sse(a + t * da, b + t * db, xs, ys);
            if f_new <= f {
                accepted = Some(f_new);
                break;
            }
            t *= 0.5;
        }
        let Some(f_new) = accepted else {
            break;
        };
        a += t * da;
        b += t * db;
        f = f_new;
        if (t * da).abs().max((t * db).abs()) < LOGISTIC_STEP_TOL {
            break;
        }
    }
    TempModelCoeffs {
        model: TempModel::Logistic,
        a,
        b,
    }
}

fn check_reference(daily: &DailySeries, h0: &[f64]) -> Result<(), ImputeError> {
    if h0.len() != daily.n_days() {
        return Err(ImputeError::ReferenceLength {
            expected: daily.n_days(),
            got: h0.len(),
        });
    }
    Ok(())
}

/// Fits a temperature model on days with measured insolation and both
/// temperature extremes; `h0` is the per-day extraterrestrial insolation.
pub fn fit_temp_model(daily: &DailySeries, h0: &[f64], model: TempModel) -> Result<TempModelCoeffs, ImputeError> {
    check_reference(daily, h0)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = daily
        .entries()
        .iter()
        .zip(h0)
        .filter_map(|(e, &h0)| match e.insolation {
            Slot::Measured(h) if h0 > 0.0 => Some((e.temperature_range()?, h / h0)),
            _ => None,
        })
        .unzip();
    fit_temp_pairs(&xs, &ys, model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyImputation {
    pub series: DailySeries,
    pub n_imputed: usize,
    /// Days left missing for lack of temperature data.
    pub unfillable: Vec<usize>,
}

/// Fills missing insolation with `H0 * model(ΔT)`.
pub fn impute_daily(daily: &DailySeries, coeffs: &TempModelCoeffs, h0: &[f64]) -> Result<DailyImputation, ImputeError> {
    check_reference(daily, h0)?;
    let mut entries = daily.entries().to_vec();
    let mut n_imputed = 0;
    let mut unfillable = Vec::new();
    for (d, e) in entries.iter_mut().enumerate() {
        if !e.insolation.is_missing() {
            continue;
        }
        match e.temperature_range().and_then(|dt| coeffs.ratio(dt)) {
            Some(r) if h0[d] >= 0.0 => {
                e.insolation = Slot::Imputed(h0[d] * r);
                n_imputed += 1;
            }
            _ => unfillable.push(d),
        }
    }
    if !unfillable.is_empty() {
        log::warn!("{} days could not be imputed (no temperature range)", unfillable.len());
    }
    Ok(DailyImputation {
        series: DailySeries::from_parts_unchecked(daily.start_date(), DailyUnit::Insolation, entries),
        n_imputed,
        unfillable,
    })
}

// ---------------------------------------------------------------------------
// Hold-out evaluation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub day: usize,
    pub slot: usize,
    pub truth: f64,
    pub imputed: f64,
}

/// Held-out measured values paired with what imputation put in their place.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskedComparison {
    pub pairs: Vec<HeldOut>,
    /// Masked slots the method left empty.
    pub n_unfilled: usize,
}

impl MaskedComparison {
    pub fn stats(&self) -> Result<ErrorStats, ImputeError> {
        self.stats_scaled(|_, _| 1.0)
    }

    /// Statistics after multiplying both sides by `scale(day, slot)`, e.g. the
    /// clear-sky irradiance to report errors in physical units.
    pub fn stats_scaled(&self, scale: impl Fn(usize, usize) -> f64) -> Result<ErrorStats, ImputeError> {
        let (pred, obs): (Vec<f64>, Vec<f64>) = self
            .pairs
            .iter()
            .map(|p| {
                let k = scale(p.day, p.slot);
                (p.imputed * k, p.truth * k)
            })
            .unzip();
        let mask = vec![true; pred.len()];
        Ok(compute_stats(&pred, &obs, &mask)?)
    }
}

/// Picks `round(fraction * n)` (at least one) of `n` candidates, sorted.
fn choose_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>, ImputeError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(ImputeError::MaskFraction(fraction));
    }
    if n == 0 {
        return Err(ImputeError::NothingToMask);
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Hides a seeded random fraction of the measured slots, runs `impute`, and
/// pairs each hidden value with its replacement.
pub fn evaluate_hourly_imputation<F>(
    series: &HourlySeries,
    mask_fraction: f64,
    seed: u64,
    impute: F,
) -> Result<MaskedComparison, ImputeError>
where
    F: FnOnce(&HourlySeries) -> Result<HourlySeries, ImputeError>,
{
    let candidates: Vec<(usize, usize, f64)> = series
        .days()
        .iter()
        .enumerate()
        .flat_map(|(d, row)| {
            row.iter().enumerate().filter_map(move |(h, s)| match s {
                Slot::Measured(v) => Some((d, h, *v)),
                _ => None,
            })
        })
        .collect();
    let picked = choose_mask(candidates.len(), mask_fraction, seed)?;
    let mut masked = series.clone();
    for &i in &picked {
        let (d, h, _) = candidates[i];
        masked.set(d, h, Slot::Missing).expect("index from the series itself");
    }
    let filled = impute(&masked)?;
    let mut out = MaskedComparison::default();
    for &i in &picked {
        let (day, slot, truth) = candidates[i];
        match filled.get(day, slot).and_then(Slot::value) {
            Some(imputed) => out.pairs.push(HeldOut {
                day,
                slot,
                truth,
                imputed,
            }),
            None => out.n_unfilled += 1,
        }
    }
    Ok(out)
}

/// Hold-out evaluation of a temperature model: the model is refitted on the
/// masked series before filling it.
pub fn evaluate_daily_imputation(
    daily: &DailySeries,
    h0: &[f64],
    mask_fraction: f64,
    seed: u64,
    model: TempModel,
) -> Result<MaskedComparison, ImputeError> {
    check_reference(daily, h0)?;
    let candidates: Vec<(usize, f64)> = daily
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(d, e)| match e.insolation {
            Slot::Measured(v) => Some((d, v)),
            _ => None,
        })
        .collect();
    let picked = choose_mask(candidates.len(), mask_fraction, seed)?;
    let mut entries = daily.entries().to_vec();
    for &i in &picked {
        entries[candidates[i].0].insolation = Slot::Missing;
    }
    let masked = DailySeries::from_parts_unchecked(daily.start_date(), daily.unit(), entries);
    let coeffs = fit_temp_model(&masked, h0, model)?;
    let filled = impute_daily(&masked, &coeffs, h0)?.series;
    let mut out = MaskedComparison::default();
    for &i in &picked {
        let (day, truth) = candidates[i];
        match filled.entries()[day].insolation.value() {
            Some(imputed) => out.pairs.push(HeldOut {
                day,
                slot: 0,
                truth,
                imputed,
            }),
            None => out.n_unfilled += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::DailyEntry;
    use chrono::NaiveDate;
    use rand::Rng;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
    }

    fn kc_days(rows: Vec<[Slot; HOURS_PER_DAY]>) -> HourlySeries {
        HourlySeries::new(start(), HourlyUnit::ClearSkyIndex, rows).unwrap()
    }

    #[test]
    fn middle_hour_rule() {
        let mut prev = [Slot::Measured(0.3); HOURS_PER_DAY];
        prev[4] = Slot::Measured(0.6);
        let mut cur = [Slot::Measured(0.3); HOURS_PER_DAY];
        cur[3] = Slot::Measured(0.4);
        cur[4] = Slot::Missing;
        cur[5] = Slot::Measured(0.5);
        let out = impute_hourly(&kc_days(vec![prev, cur])).unwrap();
        assert!((out.get(1, 4).unwrap().value().unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(out.get(1, 4).unwrap(), Slot::Imputed(_)));

        cur[5] = Slot::Missing;
        let out = impute_hourly(&kc_days(vec![prev, cur])).unwrap();
        assert!((out.get(1, 4).unwrap().value().unwrap() - 0.5).abs() < 1e-15);
        // 11:00 then averages yesterday 0.3, imputed 10:00 = 0.5, and 12:00 = 0.3
        assert!((out.get(1, 5).unwrap().value().unwrap() - 1.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn edge_hour_rules() {
        let mut prev = [Slot::Measured(0.2); HOURS_PER_DAY];
        prev[0] = Slot::Measured(0.1);
        prev[12] = Slot::Measured(0.9);
        let mut cur = [Slot::Measured(0.5); HOURS_PER_DAY];
        cur[0] = Slot::Missing;
        cur[1] = Slot::Measured(0.3);
        cur[11] = Slot::Measured(0.7);
        cur[12] = Slot::Missing;
        let out = impute_hourly(&kc_days(vec![prev, cur])).unwrap();
        assert!((out.get(1, 0).unwrap().value().unwrap() - 0.2).abs() < 1e-15);
        assert!((out.get(1, 12).unwrap().value().unwrap() - 0.8).abs() < 1e-15);

        cur[1] = Slot::Missing;
        let out = impute_hourly(&kc_days(vec![prev, cur])).unwrap();
        assert_eq!(out.get(1, 0).unwrap().value(), Some(0.1));
    }

    #[test]
    fn first_day_gets_one() {
        let mut first = [Slot::Measured(0.4); HOURS_PER_DAY];
        first[0] = Slot::Missing;
        first[7] = Slot::Missing;
        let out = impute_hourly(&kc_days(vec![first])).unwrap();
        assert_eq!(out.get(0, 0), Some(Slot::Imputed(1.0)));
        assert_eq!(out.get(0, 7), Some(Slot::Imputed(1.0)));
    }

    #[test]
    fn rejects_irradiance() {
        let s = HourlySeries::empty(start(), HourlyUnit::Irradiance, 2);
        assert!(matches!(impute_hourly(&s), Err(ImputeError::WrongUnit)));
    }

    #[test]
    fn fills_everything_and_keeps_measured() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rows: Vec<_> = (0..20)
                .map(|_| {
                    std::array::from_fn(|_| {
                        if rng.gen_bool(0.4) {
                            Slot::Missing
                        } else {
                            Slot::Measured(rng.gen_range(0.05..1.2))
                        }
                    })
                })
                .collect();
            let s = kc_days(rows);
            let out = impute_hourly(&s).unwrap();
            let (lo, hi) = s
                .iter_slots()
                .filter_map(Slot::value)
                .fold((1.0_f64, 1.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            for (a, b) in s.iter_slots().zip(out.iter_slots()) {
                match a {
                    Slot::Measured(_) => assert_eq!(a, b),
                    _ => {
                        let v = b.value().unwrap();
                        assert!(matches!(b, Slot::Imputed(_)));
                        assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                    }
                }
            }
            assert_eq!(impute_hourly(&s).unwrap(), out);
        }
    }

    fn synthetic_daily(coeffs: TempModelCoeffs, n: usize) -> (DailySeries, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut entries = Vec::new();
        let mut h0 = Vec::new();
        for _ in 0..n {
            let ref_h = rng.gen_range(9000.0..11000.0);
            let dt = rng.gen_range(2.0..14.0);
            let t_min = rng.gen_range(12.0..20.0);
            entries.push(DailyEntry {
                insolation: Slot::Measured(ref_h * coeffs.ratio(dt).unwrap()),
                t_max: Some(t_min + dt),
                t_min: Some(t_min),
            });
            h0.push(ref_h);
        }
        (DailySeries::new(start(), DailyUnit::Insolation, entries).unwrap(), h0)
    }

    #[test]
    fn hargreaves_samani_round_trip() {
        let truth = TempModelCoeffs {
            model: TempModel::HargreavesSamani,
            a: 0.17,
            b: 0.0,
        };
        let (daily, h0) = synthetic_daily(truth, 365);
        let fit = fit_temp_model(&daily, &h0, TempModel::HargreavesSamani).unwrap();
        assert!((fit.a - 0.17).abs() < 1e-6);

        // residual orthogonal to the regressor sqrt(ΔT)
        let dot: f64 = daily
            .entries()
            .iter()
            .zip(&h0)
            .map(|(e, h)| {
                let x = e.temperature_range().unwrap().sqrt();
                (e.insolation.value().unwrap() / h - fit.a * x) * x
            })
            .sum();
        assert!(dot.abs() <= 1e-8);
    }

    #[test]
    fn logistic_round_trip() {
        let truth = TempModelCoeffs {
            model: TempModel::Logistic,
            a: -1.0,
            b: 0.15,
        };
        let (daily, h0) = synthetic_daily(truth, 365);
        let fit = fit_temp_model(&daily, &h0, TempModel::Logistic).unwrap();
        assert!((fit.a + 1.0).abs() < 1e-3, "a = {}", fit.a);
        assert!((fit.b - 0.15).abs() < 1e-3, "b = {}", fit.b);
    }

    #[test]
    fn logistic_constant_ratio() {
        let dt: Vec<f64> = (0..40).map(|i| 3.0 + i as f64 * 0.25).collect();
        let y = vec![0.35; 40];
        let fit = fit_temp_pairs(&dt, &y, TempModel::Logistic).unwrap();
        assert!((fit.a - logit(0.35)).abs() < 1e-12);
        assert!(fit.b.abs() < 1e-12);
    }

    #[test]
    fn fit_needs_enough_days() {
        let dt = vec![5.0; 29];
        let y = vec![0.4; 29];
        assert!(matches!(
            fit_temp_pairs(&dt, &y, TempModel::HargreavesSamani),
            Err(ImputeError::InsufficientData { found: 29, .. })
        ));
        let mut dt = vec![5.0; 31];
        dt[0] = -1.0;
        dt[1] = -2.0;
        let y = vec![0.4; 31];
        assert!(fit_temp_pairs(&dt, &y, TempModel::HargreavesSamani).is_err());
    }

    #[test]
    fn model_outputs() {
        let logistic = TempModelCoeffs {
            model: TempModel::Logistic,
            a: -3.0,
            b: 0.5,
        };
        assert_eq!(logistic.ratio(6.0), Some(0.5));
        let hs = TempModelCoeffs {
            model: TempModel::HargreavesSamani,
            a: 0.1,
            b: 0.0,
        };
        assert!((hs.ratio(16.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(hs.ratio(0.0), Some(0.0));
        assert_eq!(hs.ratio(-1.0), None);
        let big = TempModelCoeffs { a: 0.5, ..hs };
        assert_eq!(big.ratio(25.0), Some(1.0));
    }

    #[test]
    fn impute_daily_fills_and_reports() {
        let coeffs = TempModelCoeffs {
            model: TempModel::Logistic,
            a: -3.0,
            b: 0.5,
        };
        let entries = vec![
            DailyEntry {
                insolation: Slot::Missing,
                t_max: Some(20.0),
                t_min: Some(14.0),
            },
            DailyEntry {
                insolation: Slot::Missing,
                t_max: None,
                t_min: Some(14.0),
            },
            DailyEntry {
                insolation: Slot::Measured(3000.0),
                t_max: Some(20.0),
                t_min: Some(14.0),
            },
        ];
        let daily = DailySeries::new(start(), DailyUnit::Insolation, entries).unwrap();
        let out = impute_daily(&daily, &coeffs, &[10_000.0; 3]).unwrap();
        assert_eq!(out.series.entries()[0].insolation, Slot::Imputed(5000.0));
        assert_eq!(out.unfillable, vec![1]);
        assert_eq!(out.n_imputed, 1);
        assert_eq!(out.series.entries()[2].insolation, Slot::Measured(3000.0));
        assert!(impute_daily(&daily, &coeffs, &[1.0; 2]).is_err());
    }

    #[test]
    fn evaluation_with_perfect_oracle() {
        let rows: Vec<_> = (0..10)
            .map(|d| std::array::from_fn(|h| Slot::Measured(0.1 + 0.01 * (d * 13 + h) as f64)))
            .collect();
        let s = kc_days(rows);
        let truth = s.clone();
        let cmp = evaluate_hourly_imputation(&s, 0.3, 5, |_| Ok(truth.clone())).unwrap();
        let st = cmp.stats().unwrap();
        assert_eq!((st.mae, st.rmse, st.mbe), (0.0, 0.0, 0.0));
        assert_eq!(st.n, 39);
    }

    #[test]
    fn evaluation_on_constant_series() {
        let s = kc_days(vec![[Slot::Measured(0.7); HOURS_PER_DAY]; 30]);
        let cmp = evaluate_hourly_imputation(&s, 0.2, 3, impute_hourly).unwrap();
        // only first-day holes get the constant 1.0 instead of 0.7
        for p in &cmp.pairs {
            if p.day == 0 {
                assert_eq!(p.imputed, 1.0);
            } else {
                assert!((p.imputed - 0.7).abs() < 1e-15);
            }
        }
        let later = MaskedComparison {
            pairs: cmp.pairs.iter().filter(|p| p.day > 0).copied().collect(),
            n_unfilled: 0,
        };
        assert!(later.stats().unwrap().mae < 1e-15);
    }

    #[test]
    fn evaluation_is_seeded_and_validated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<_> = (0..40)
            .map(|d| std::array::from_fn(|h| Slot::Measured(0.5 + 0.3 * ((d * 13 + h) as f64 / 9.0).sin() + rng.gen_range(-0.02..0.02))))
            .collect();
        let s = kc_days(rows);
        let a = evaluate_hourly_imputation(&s, 0.2, 9, impute_hourly).unwrap();
        let b = evaluate_hourly_imputation(&s, 0.2, 9, impute_hourly).unwrap();
        assert_eq!(a, b);
        let st = a.stats().unwrap();
        assert!(st.mae.is_finite() && st.rmse.is_finite() && st.mbe.is_finite());
        assert!(st.mae > 0.0);
        assert!(matches!(
            evaluate_hourly_imputation(&s, 0.6, 9, impute_hourly),
            Err(ImputeError::MaskFraction(_))
        ));
        let empty = HourlySeries::empty(start(), HourlyUnit::ClearSkyIndex, 3);
        assert!(matches!(
            evaluate_hourly_imputation(&empty, 0.2, 9, impute_hourly),
            Err(ImputeError::NothingToMask)
        ));
    }

    #[test]
    fn daily_evaluation_runs() {
        let truth = TempModelCoeffs {
            model: TempModel::Logistic,
            a: -1.0,
            b: 0.15,
        };
        let (daily, h0) = synthetic_daily(truth, 200);
        let cmp = evaluate_daily_imputation(&daily, &h0, 0.25, 4, TempModel::Logistic).unwrap();
        assert_eq!(cmp.pairs.len(), 50);
        assert!(cmp.stats().unwrap().mae < 1e-3);
    }
}
