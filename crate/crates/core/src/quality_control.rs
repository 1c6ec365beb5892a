//! Fixed physical-limit screening of hourly irradiance.
//!
//! A sample `v` at a daylight instant survives when
//! `0.03 * I_cst <= v <= I0`. With the sun at or below the horizon only an
//! exact zero survives; anything else is counted as below the lower bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{HourlySeries, HourlyUnit, Slot};
use crate::solar_geometry::{
    clear_sky_irradiance, extraterrestrial_irradiance, solar_position, GeoPosition, GeometryError, FIRST_HOUR,
};

/// Lower bound as a fraction of clear-sky irradiance.
pub const LOWER_BOUND_FRACTION: f64 = 0.03;

#[derive(Debug, Error)]
pub enum QcError {
    #[error("invalid station position: {0}")]
    Position(#[from] GeometryError),
    #[error("quality control expects an irradiance series")]
    WrongUnit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcReport {
    pub n_input: usize,
    /// Slots with no record to check.
    pub n_dropped_incomplete: usize,
    pub n_dropped_above_upper: usize,
    pub n_dropped_below_lower: usize,
    pub n_retained: usize,
}

impl QcReport {
    pub fn n_dropped(&self) -> usize {
        self.n_dropped_above_upper + self.n_dropped_below_lower
    }

    pub fn reconciles(&self) -> bool {
        self.n_input
            == self.n_dropped_incomplete + self.n_dropped_above_upper + self.n_dropped_below_lower + self.n_retained
    }
}

/// Upper (`I0`) and lower (`0.03 * I_cst`) limits for one slot.
pub fn slot_limits(pos: &GeoPosition, julian_day: u16, hour_idx: usize) -> Option<(f64, f64)> {
    let instant = solar_position(pos, julian_day, FIRST_HOUR + hour_idx as u8);
    let cst = clear_sky_irradiance(&instant).ok()?;
    Some((LOWER_BOUND_FRACTION * cst, extraterrestrial_irradiance(&instant)))
}

enum Verdict {
    Keep,
    AboveUpper,
    BelowLower,
}

fn judge(v: f64, limits: Option<(f64, f64)>) -> Verdict {
    match limits {
        Some((lo, _)) if v < lo => Verdict::BelowLower,
        Some((_, hi)) if v > hi => Verdict::AboveUpper,
        Some(_) => Verdict::Keep,
        None if v == 0.0 => Verdict::Keep,
        None => Verdict::BelowLower,
    }
}

pub fn apply_qc(series: &HourlySeries, pos: &GeoPosition) -> Result<(HourlySeries, QcReport), QcError> {
    pos.validate()?;
    if series.unit() != HourlyUnit::Irradiance {
        return Err(QcError::WrongUnit);
    }
    let mut report = QcReport::default();
    let mut days = series.days().to_vec();
    for (d, row) in days.iter_mut().enumerate() {
        let jd = series.julian_day(d);
        for (h, slot) in row.iter_mut().enumerate() {
            report.n_input += 1;
            let Some(v) = slot.value() else {
                report.n_dropped_incomplete += 1;
                continue;
            };
            match judge(v, slot_limits(pos, jd, h)) {
                Verdict::Keep => report.n_retained += 1,
                Verdict::AboveUpper => {
                    report.n_dropped_above_upper += 1;
                    *slot = Slot::Missing;
                }
                Verdict::BelowLower => {
                    report.n_dropped_below_lower += 1;
                    *slot = Slot::Missing;
                }
            }
        }
    }
    Ok((
        HourlySeries::from_parts_unchecked(series.start_date(), HourlyUnit::Irradiance, days),
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::missing_report;
    use chrono::NaiveDate;

    fn pos() -> GeoPosition {
        GeoPosition::new(1.41, -78.28, 512.0).unwrap()
    }

    fn june() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 6, 21).unwrap()
    }

    fn noon_limits() -> (f64, f64) {
        let jd = HourlySeries::empty(june(), HourlyUnit::Irradiance, 1).julian_day(0);
        slot_limits(&pos(), jd, 6).unwrap()
    }

    fn one_slot(v: f64) -> HourlySeries {
        let mut s = HourlySeries::empty(june(), HourlyUnit::Irradiance, 1);
        s.set(0, 6, Slot::Measured(v)).unwrap();
        s
    }

    #[test]
    fn bound_examples() {
        let (lo, hi) = noon_limits();
        let cst = lo / LOWER_BOUND_FRACTION;

        let (out, r) = apply_qc(&one_slot(hi + 1.0), &pos()).unwrap();
        assert_eq!(out.get(0, 6), Some(Slot::Missing));
        assert_eq!(r.n_dropped_above_upper, 1);

        let (out, r) = apply_qc(&one_slot(lo), &pos()).unwrap();
        assert_eq!(out.get(0, 6), Some(Slot::Measured(lo)));
        assert_eq!(r.n_retained, 1);

        let (out, _) = apply_qc(&one_slot(0.5 * cst), &pos()).unwrap();
        assert!(out.get(0, 6).unwrap().is_measured());

        let (out, r) = apply_qc(&one_slot(hi), &pos()).unwrap();
        assert!(out.get(0, 6).unwrap().is_measured());
        assert_eq!(r.n_dropped(), 0);

        let (_, r) = apply_qc(&one_slot(0.99 * lo), &pos()).unwrap();
        assert_eq!(r.n_dropped_below_lower, 1);
        assert_eq!(r.n_input, 13);
        assert_eq!(r.n_dropped_incomplete, 12);
        assert!(r.reconciles());
    }

    #[test]
    fn night_slots_keep_only_zero() {
        // early January: the sun is below the horizon at 06:00 at this latitude
        let jan = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        assert!(slot_limits(&pos(), 1, 0).is_none());
        let mut s = HourlySeries::empty(jan, HourlyUnit::Irradiance, 2);
        s.set(0, 0, Slot::Measured(0.0)).unwrap();
        s.set(1, 0, Slot::Measured(3.0)).unwrap();
        let (out, r) = apply_qc(&s, &pos()).unwrap();
        assert_eq!(out.get(0, 0), Some(Slot::Measured(0.0)));
        assert_eq!(out.get(1, 0), Some(Slot::Missing));
        assert_eq!(r.n_dropped_below_lower, 1);
    }

    #[test]
    fn idempotent_and_reconciled() {
        let (lo, hi) = noon_limits();
        let mut s = HourlySeries::empty(june(), HourlyUnit::Irradiance, 1);
        for (h, v) in [(3, hi * 2.0), (4, lo * 0.5), (6, (lo + hi) / 2.0), (12, 5000.0)] {
            s.set(0, h, Slot::Measured(v)).unwrap();
        }
        let before = missing_report(&s).unwrap();
        let (once, r) = apply_qc(&s, &pos()).unwrap();
        let (twice, r2) = apply_qc(&once, &pos()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(r2.n_dropped(), 0);
        let after = missing_report(&once).unwrap();
        assert_eq!(after.n_missing - before.n_missing, r.n_dropped());
        assert_eq!(before.n_missing, r.n_dropped_incomplete);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = GeoPosition {
            latitude_deg: 95.0,
            longitude_deg: 0.0,
            altitude_m: 0.0,
        };
        assert!(matches!(apply_qc(&one_slot(1.0), &bad), Err(QcError::Position(_))));
        let kc = HourlySeries::empty(june(), HourlyUnit::ClearSkyIndex, 1);
        assert!(matches!(apply_qc(&kc, &pos()), Err(QcError::WrongUnit)));
    }
}
