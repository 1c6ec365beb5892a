//! Extraterrestrial and clear-sky irradiance on a horizontal surface.
//!
//! Irradiance values are hourly: one sample per local hour from 06:00 to
//! 18:00, so a W/m² value doubles as the Wh/m² collected over that hour and
//! daily insolation is the plain sum of the 13 samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Solar constant in W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// First and last local hour of the daily sampling window.
pub const FIRST_HOUR: u8 = 6;
pub const LAST_HOUR: u8 = 18;
/// Number of hourly samples per day.
pub const HOURS_PER_DAY: usize = (LAST_HOUR - FIRST_HOUR + 1) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("sun is at or below the horizon (sin beta = {0})")]
    BelowHorizon(f64),
    #[error("reference value must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("altitude {0} must be finite and non-negative")]
    Altitude(f64),
}

/// Location of a weather station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPosition {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Carried for reporting only.
    #[serde(default)]
    pub altitude_m: f64,
}

impl GeoPosition {
    pub fn new(latitude_deg: f64, longitude_deg: f64, altitude_m: f64) -> Result<Self, GeometryError> {
        let pos = Self {
            latitude_deg,
            longitude_deg,
            altitude_m,
        };
        pos.validate()?;
        Ok(pos)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(GeometryError::Latitude(self.latitude_deg));
        }
        if !(-180.0..=180.0).contains(&self.longitude_deg) {
            return Err(GeometryError::Longitude(self.longitude_deg));
        }
        if !(self.altitude_m.is_finite() && self.altitude_m >= 0.0) {
            return Err(GeometryError::Altitude(self.altitude_m));
        }
        Ok(())
    }

    pub fn latitude_rad(&self) -> f64 {
        self.latitude_deg.to_radians()
    }
}

/// Sun position for one hourly sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarInstant {
    pub julian_day: u16,
    pub local_hour: u8,
    pub declination_rad: f64,
    pub hour_angle_rad: f64,
    pub sin_beta: f64,
}

/// Elevation sine from latitude, declination and hour angle (all radians).
pub fn sin_elevation(latitude_rad: f64, declination_rad: f64, hour_angle_rad: f64) -> f64 {
    latitude_rad.cos() * declination_rad.cos() * hour_angle_rad.cos()
        + latitude_rad.sin() * declination_rad.sin()
}

/// Cooper's declination for day of year `julian_day`.
pub fn declination(julian_day: u16) -> f64 {
    let angle = (360.0 * (284.0 + f64::from(julian_day)) / 365.0).to_radians();
    23.45_f64.to_radians() * angle.sin()
}

/// Hour angle, zero at local noon and 15 degrees per hour.
pub fn hour_angle(local_hour: u8) -> f64 {
    (15.0 * (f64::from(local_hour) - 12.0)).to_radians()
}

/// Sun position at `local_hour` of `julian_day`.
///
/// Panics if `julian_day` is outside 1..=366 or `local_hour` outside 6..=18.
pub fn solar_position(pos: &GeoPosition, julian_day: u16, local_hour: u8) -> SolarInstant {
    assert!((1..=366).contains(&julian_day), "julian day {julian_day} out of range");
    assert!(
        (FIRST_HOUR..=LAST_HOUR).contains(&local_hour),
        "local hour {local_hour} out of range"
    );
    let declination_rad = declination(julian_day);
    let hour_angle_rad = hour_angle(local_hour);
    SolarInstant {
        julian_day,
        local_hour,
        declination_rad,
        hour_angle_rad,
        sin_beta: sin_elevation(pos.latitude_rad(), declination_rad, hour_angle_rad),
    }
}

/// Orbital eccentricity correction for `julian_day`.
fn eccentricity_factor(julian_day: u16) -> f64 {
    1.0 + 0.033 * (360.0 * (f64::from(julian_day) - 3.0) / 365.0).to_radians().cos()
}

/// Top-of-atmosphere irradiance on a horizontal plane; 0 with the sun down.
pub fn extraterrestrial_irradiance(instant: &SolarInstant) -> f64 {
    if instant.sin_beta <= 0.0 {
        return 0.0;
    }
    SOLAR_CONSTANT * eccentricity_factor(instant.julian_day) * instant.sin_beta
}

/// Kreith & Kreider clear-sky atmospheric transmittance.
pub fn transmittance(sin_beta: f64) -> Result<f64, GeometryError> {
    if !(sin_beta > 0.0) {
        return Err(GeometryError::BelowHorizon(sin_beta));
    }
    Ok(0.56 * ((-0.65 / sin_beta).exp() + (-0.095 / sin_beta).exp()))
}

/// Clear-sky irradiance `I0 * tau`.
pub fn clear_sky_irradiance(instant: &SolarInstant) -> Result<f64, GeometryError> {
    let tau = transmittance(instant.sin_beta)?;
    Ok(extraterrestrial_irradiance(instant) * tau)
}

/// Daily extraterrestrial insolation: sum of the 13 hourly `I0` samples.
pub fn daily_extraterrestrial_insolation(pos: &GeoPosition, julian_day: u16) -> f64 {
    (FIRST_HOUR..=LAST_HOUR)
        .map(|h| extraterrestrial_irradiance(&solar_position(pos, julian_day, h)))
        .sum()
}

/// Clear-sky irradiance for each of the 13 hourly slots; 0 where the sun is down.
pub fn clear_sky_profile(pos: &GeoPosition, julian_day: u16) -> [f64; HOURS_PER_DAY] {
    let mut out = [0.0; HOURS_PER_DAY];
    for (slot, h) in out.iter_mut().zip(FIRST_HOUR..=LAST_HOUR) {
        *slot = clear_sky_irradiance(&solar_position(pos, julian_day, h)).unwrap_or(0.0);
    }
    out
}

/// Daily clear-sky insolation: sum of the hourly clear-sky profile.
pub fn daily_clear_sky_insolation(pos: &GeoPosition, julian_day: u16) -> f64 {
    clear_sky_profile(pos, julian_day).iter().sum()
}

/// Clear-sky index `measured / clear_sky`. Not clamped to [0, 1].
pub fn clear_sky_index(measured: f64, clear_sky: f64) -> Result<f64, GeometryError> {
    if !(clear_sky > 0.0) {
        return Err(GeometryError::NonPositiveReference(clear_sky));
    }
    Ok(measured / clear_sky)
}

/// Clearness index `H / H0`.
pub fn clearness_index(daily_insolation: f64, h0: f64) -> Result<f64, GeometryError> {
    if !(h0 > 0.0) {
        return Err(GeometryError::NonPositiveReference(h0));
    }
    Ok(daily_insolation / h0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instant(julian_day: u16, sin_beta: f64) -> SolarInstant {
        SolarInstant {
            julian_day,
            local_hour: 12,
            declination_rad: 0.0,
            hour_angle_rad: 0.0,
            sin_beta,
        }
    }

    #[test]
    fn extraterrestrial_examples() {
        assert!((extraterrestrial_irradiance(&instant(3, 1.0)) - 1412.111).abs() < 1e-9);
        assert!((extraterrestrial_irradiance(&instant(3, 0.5)) - 706.0555).abs() < 1e-9);
        for d in [1, 100, 200, 365] {
            assert_eq!(extraterrestrial_irradiance(&instant(d, 0.0)), 0.0);
            assert_eq!(extraterrestrial_irradiance(&instant(d, -0.3)), 0.0);
        }
    }

    #[test]
    fn transmittance_examples() {
        let hand = 0.56 * ((-0.65_f64).exp() + (-0.095_f64).exp());
        assert!((transmittance(1.0).unwrap() - hand).abs() < 1e-15);
        assert!((hand - 0.80159).abs() < 1e-5);
        // 0.56 * (e^-1.3 + e^-0.19)
        assert!((transmittance(0.5).unwrap() - 0.615715).abs() < 1e-6);
        assert!(transmittance(1e-4).unwrap() < 1e-100);
        assert!(transmittance(0.0).is_err());
        assert!(transmittance(-0.2).is_err());
    }

    #[test]
    fn transmittance_monotone_on_grid() {
        let top = transmittance(1.0).unwrap();
        let mut prev = 0.0;
        for i in 1..=1000 {
            let tau = transmittance(i as f64 / 1000.0).unwrap();
            assert!(tau > 0.0 && tau <= top);
            assert!(tau >= prev);
            prev = tau;
        }
    }

    #[test]
    fn clear_sky_examples() {
        let i = clear_sky_irradiance(&instant(3, 1.0)).unwrap();
        assert!((i - 1131.9404).abs() < 1e-4);
        let half = clear_sky_irradiance(&instant(3, 0.5)).unwrap();
        assert!(i > half);
        assert!(clear_sky_irradiance(&instant(3, 0.0)).is_err());
    }

    #[test]
    fn extraterrestrial_linear_in_sin_beta() {
        for d in [1_u16, 90, 180, 270] {
            for k in 1..=50 {
                let x = k as f64 / 100.0;
                let single = extraterrestrial_irradiance(&instant(d, x));
                let double = extraterrestrial_irradiance(&instant(d, 2.0 * x));
                assert!((double - 2.0 * single).abs() <= 1e-12 * double);
            }
        }
    }

    #[test]
    fn position_examples() {
        let equator = GeoPosition::new(0.0, 0.0, 0.0).unwrap();
        let noon = solar_position(&equator, 81, 12);
        assert!((noon.sin_beta - 1.0).abs() < 0.01);

        let d = 172;
        let phi = declination(d).to_degrees();
        let matched = GeoPosition::new(phi, 0.0, 0.0).unwrap();
        assert!((solar_position(&matched, d, 12).sin_beta - 1.0).abs() < 1e-15);

        let biotopo = GeoPosition::new(1.41, -78.28, 512.0).unwrap();
        assert!(solar_position(&biotopo, 1, 6).sin_beta <= 0.1);
    }

    #[test]
    fn position_recomputes_exactly() {
        let pos = GeoPosition::new(1.41, -78.28, 512.0).unwrap();
        for d in (1..=366).step_by(7) {
            for h in FIRST_HOUR..=LAST_HOUR {
                let s = solar_position(&pos, d, h);
                let again = pos.latitude_rad().cos() * s.declination_rad.cos() * s.hour_angle_rad.cos()
                    + pos.latitude_rad().sin() * s.declination_rad.sin();
                assert_eq!(s.sin_beta, again);
            }
        }
    }

    #[test]
    fn daily_extraterrestrial_sum() {
        let equator = GeoPosition::new(0.0, 0.0, 0.0).unwrap();
        let h0 = daily_extraterrestrial_insolation(&equator, 81);
        let noon = extraterrestrial_irradiance(&solar_position(&equator, 81, 12));
        let brute: f64 = (6..=18)
            .map(|h| extraterrestrial_irradiance(&solar_position(&equator, 81, h)))
            .sum();
        assert_eq!(h0, brute);
        assert!(h0 >= noon);

        // polar night
        let pole = GeoPosition::new(89.0, 0.0, 0.0).unwrap();
        assert_eq!(daily_extraterrestrial_insolation(&pole, 355), 0.0);
    }

    #[test]
    fn ratio_indices() {
        assert_eq!(clear_sky_index(800.0, 800.0).unwrap(), 1.0);
        assert_eq!(clear_sky_index(0.0, 800.0).unwrap(), 0.0);
        assert_eq!(clear_sky_index(500.0, 1000.0).unwrap(), 0.5);
        assert!(clear_sky_index(1.0, 0.0).is_err());
        assert_eq!(clearness_index(4000.0, 4000.0).unwrap(), 1.0);
        assert_eq!(clearness_index(0.0, 4000.0).unwrap(), 0.0);
        assert_eq!(clearness_index(2000.0, 4000.0).unwrap(), 0.5);
        assert!(clearness_index(1.0, -1.0).is_err());
    }

    #[test]
    fn position_validation() {
        assert!(GeoPosition::new(91.0, 0.0, 0.0).is_err());
        assert!(GeoPosition::new(0.0, -181.0, 0.0).is_err());
        assert!(GeoPosition::new(0.0, 0.0, -1.0).is_err());
        assert!(GeoPosition::new(f64::NAN, 0.0, 0.0).is_err());
    }
}
