//! Conversion between physical series and clear-sky-relative ratios.

use chrono::{Datelike, NaiveDate};

use crate::data_model::{DailyEntry, DailySeries, DailyUnit, DataError, HourlySeries, HourlyUnit, Slot};
use crate::solar_geometry::{clear_sky_profile, daily_clear_sky_insolation, GeoPosition, HOURS_PER_DAY};

fn julian_day(date: NaiveDate) -> u16 {
    date.ordinal() as u16
}

/// Clear-sky index `I / I_cst` per slot. Slots with the sun at or below the
/// horizon have no clear-sky reference and become missing.
pub fn detrend_hourly(series: &HourlySeries, pos: &GeoPosition) -> Result<HourlySeries, DataError> {
    if series.unit() != HourlyUnit::Irradiance {
        return Err(DataError::Header("detrending expects an irradiance series"));
    }
    let mut dark = 0usize;
    let days = series
        .days()
        .iter()
        .enumerate()
        .map(|(d, row)| {
            let cst = clear_sky_profile(pos, series.julian_day(d));
            std::array::from_fn(|h| match row[h].value() {
                Some(v) if cst[h] > 0.0 => row[h].with_value(v / cst[h]),
                Some(_) => {
                    dark += 1;
                    Slot::Missing
                }
                None => Slot::Missing,
            })
        })
        .collect();
    if dark > 0 {
        log::debug!("{dark} samples without a clear-sky reference left missing");
    }
    Ok(HourlySeries::from_parts_unchecked(
        series.start_date(),
        HourlyUnit::ClearSkyIndex,
        days,
    ))
}

/// Physical irradiance for one day of clear-sky index values; negative
/// indices are floored at zero.
pub fn retrend_hourly(kc: &[f64], pos: &GeoPosition, date: NaiveDate) -> Vec<f64> {
    let cst = clear_sky_profile(pos, julian_day(date));
    kc.iter().zip(cst).map(|(k, c)| k.max(0.0) * c).collect()
}

/// Daily insolation over clear-sky insolation, `H / H_clear`.
pub fn detrend_daily(series: &DailySeries, pos: &GeoPosition) -> Result<DailySeries, DataError> {
    if series.unit() != DailyUnit::Insolation {
        return Err(DataError::Header("detrending expects an insolation series"));
    }
    let entries = series
        .entries()
        .iter()
        .enumerate()
        .map(|(d, e)| {
            let clear = daily_clear_sky_insolation(pos, series.julian_day(d));
            let insolation = match e.insolation.value() {
                Some(v) if clear > 0.0 => e.insolation.with_value(v / clear),
                _ => Slot::Missing,
            };
            DailyEntry { insolation, ..*e }
        })
        .collect();
    Ok(DailySeries::from_parts_unchecked(series.start_date(), DailyUnit::Ratio, entries))
}

pub fn retrend_daily(ratio: f64, pos: &GeoPosition, date: NaiveDate) -> f64 {
    ratio.max(0.0) * daily_clear_sky_insolation(pos, julian_day(date))
}

/// Daily insolation as the sum of the 13 hourly values, measured only when
/// every daylight slot is measured; temperatures come from `temps`, matched
/// by date.
pub fn daily_from_hourly(
    hourly: &HourlySeries,
    temps: Option<&DailySeries>,
    pos: &GeoPosition,
) -> Result<DailySeries, DataError> {
    if hourly.unit() != HourlyUnit::Irradiance {
        return Err(DataError::Header("daily insolation needs an irradiance series"));
    }
    let entries = (0..hourly.n_days())
        .map(|d| {
            let cst = clear_sky_profile(pos, hourly.julian_day(d));
            let row = &hourly.days()[d];
            let complete = (0..HOURS_PER_DAY).all(|h| cst[h] <= 0.0 || row[h].is_measured());
            let insolation = if complete {
                Slot::Measured((0..HOURS_PER_DAY).filter(|&h| cst[h] > 0.0).filter_map(|h| row[h].value()).sum())
            } else {
                Slot::Missing
            };
            let date = hourly.date(d);
            let (t_max, t_min) = temps
                .and_then(|t| {
                    let offset = (date - t.start_date()).num_days();
                    usize::try_from(offset).ok().and_then(|i| t.entries().get(i))
                })
                .map_or((None, None), |e| (e.t_max, e.t_min));
            DailyEntry {
                insolation,
                t_max,
                t_min,
            }
        })
        .collect();
    DailySeries::new(hourly.start_date(), DailyUnit::Insolation, entries)
}
