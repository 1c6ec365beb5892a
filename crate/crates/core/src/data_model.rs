//! Series containers, CSV ingestion and day classification.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solar_geometry::{GeoPosition, GeometryError, FIRST_HOUR, HOURS_PER_DAY, LAST_HOUR};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unusable csv header: missing column `{0}`")]
    Header(&'static str),
    #[error("series is empty")]
    EmptySeries,
    #[error("invalid value {value} at day {day}, slot {slot}: {reason}")]
    InvalidValue {
        day: usize,
        slot: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("index out of range: day {day}, slot {slot}")]
    OutOfRange { day: usize, slot: usize },
    #[error("clearness index {0} outside (0, 1]")]
    ClearnessOutOfRange(f64),
    #[error("invalid station metadata: {0}")]
    Station(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Imputed,
}

/// One sample of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Measured(f64),
    Imputed(f64),
    Missing,
}

impl Slot {
    pub fn value(self) -> Option<f64> {
        match self {
            Slot::Measured(v) | Slot::Imputed(v) => Some(v),
            Slot::Missing => None,
        }
    }

    pub fn provenance(self) -> Option<Provenance> {
        match self {
            Slot::Measured(_) => Some(Provenance::Measured),
            Slot::Imputed(_) => Some(Provenance::Imputed),
            Slot::Missing => None,
        }
    }

    pub fn is_measured(self) -> bool {
        matches!(self, Slot::Measured(_))
    }

    pub fn is_missing(self) -> bool {
        matches!(self, Slot::Missing)
    }

    /// Same provenance, new value.
    pub fn with_value(self, v: f64) -> Slot {
        match self {
            Slot::Measured(_) => Slot::Measured(v),
            Slot::Imputed(_) => Slot::Imputed(v),
            Slot::Missing => Slot::Missing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourlyUnit {
    /// Wh/m² per hour.
    Irradiance,
    /// Dimensionless clear-sky index.
    ClearSkyIndex,
}

pub type DayRow = [Slot; HOURS_PER_DAY];

/// Day-major grid of the 13 hourly samples (06:00..=18:00) per day.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start_date: NaiveDate,
    unit: HourlyUnit,
    days: Vec<DayRow>,
}

fn check_value(unit_nonneg: bool, day: usize, slot: usize, s: Slot) -> Result<(), DataError> {
    if let Some(v) = s.value() {
        if !v.is_finite() {
            return Err(DataError::InvalidValue {
                day,
                slot,
                value: v,
                reason: "not finite",
            });
        }
        if unit_nonneg && v < 0.0 {
            return Err(DataError::InvalidValue {
                day,
                slot,
                value: v,
                reason: "negative",
            });
        }
    }
    Ok(())
}

impl HourlySeries {
    pub fn new(start_date: NaiveDate, unit: HourlyUnit, days: Vec<DayRow>) -> Result<Self, DataError> {
        let nonneg = unit == HourlyUnit::Irradiance;
        for (d, row) in days.iter().enumerate() {
            for (h, s) in row.iter().enumerate() {
                check_value(nonneg, d, h, *s)?;
            }
        }
        Ok(Self {
            start_date,
            unit,
            days,
        })
    }

    /// A series of `n_days` with every slot missing.
    pub fn empty(start_date: NaiveDate, unit: HourlyUnit, n_days: usize) -> Self {
        Self {
            start_date,
            unit,
            days: vec![[Slot::Missing; HOURS_PER_DAY]; n_days],
        }
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn unit(&self) -> HourlyUnit {
        self.unit
    }

    pub fn days(&self) -> &[DayRow] {
        &self.days
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    pub fn julian_day(&self, day: usize) -> u16 {
        self.date(day).ordinal() as u16
    }

    pub fn get(&self, day: usize, slot: usize) -> Option<Slot> {
        self.days.get(day).and_then(|r| r.get(slot)).copied()
    }

    pub fn set(&mut self, day: usize, slot: usize, value: Slot) -> Result<(), DataError> {
        check_value(self.unit == HourlyUnit::Irradiance, day, slot, value)?;
        let cell = self
            .days
            .get_mut(day)
            .and_then(|r| r.get_mut(slot))
            .ok_or(DataError::OutOfRange { day, slot })?;
        *cell = value;
        Ok(())
    }

    /// All slots in chronological order.
    pub fn iter_slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.days.iter().flat_map(|r| r.iter().copied())
    }

    /// Keeps only the first `n_days` days.
    pub fn truncated(&self, n_days: usize) -> Self {
        Self {
            start_date: self.start_date,
            unit: self.unit,
            days: self.days[..n_days.min(self.days.len())].to_vec(),
        }
    }

    pub(crate) fn from_parts_unchecked(start_date: NaiveDate, unit: HourlyUnit, days: Vec<DayRow>) -> Self {
        Self {
            start_date,
            unit,
            days,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyUnit {
    /// Wh/(m²·day).
    Insolation,
    /// Dimensionless ratio to a daily reference insolation.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyEntry {
    pub insolation: Slot,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
}

impl DailyEntry {
    pub fn missing() -> Self {
        Self {
            insolation: Slot::Missing,
            t_max: None,
            t_min: None,
        }
    }

    /// Daily temperature range when both extremes are present.
    pub fn temperature_range(&self) -> Option<f64> {
        Some(self.t_max? - self.t_min?)
    }
}

/// One entry per day: insolation plus temperature extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    start_date: NaiveDate,
    unit: DailyUnit,
    entries: Vec<DailyEntry>,
}

fn check_entry(day: usize, e: &DailyEntry) -> Result<(), DataError> {
    check_value(true, day, 0, e.insolation)?;
    for t in [e.t_max, e.t_min].into_iter().flatten() {
        if !t.is_finite() {
            return Err(DataError::InvalidValue {
                day,
                slot: 0,
                value: t,
                reason: "temperature not finite",
            });
        }
    }
    if let (Some(hi), Some(lo)) = (e.t_max, e.t_min) {
        if hi < lo {
            return Err(DataError::InvalidValue {
                day,
                slot: 0,
                value: hi - lo,
                reason: "t_max below t_min",
            });
        }
    }
    Ok(())
}

impl DailySeries {
    pub fn new(start_date: NaiveDate, unit: DailyUnit, entries: Vec<DailyEntry>) -> Result<Self, DataError> {
        for (d, e) in entries.iter().enumerate() {
            check_entry(d, e)?;
        }
        Ok(Self {
            start_date,
            unit,
            entries,
        })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn unit(&self) -> DailyUnit {
        self.unit
    }

    pub fn entries(&self) -> &[DailyEntry] {
        &self.entries
    }

    pub fn n_days(&self) -> usize {
        self.entries.len()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    pub fn julian_day(&self, day: usize) -> u16 {
        self.date(day).ordinal() as u16
    }

    pub fn set(&mut self, day: usize, entry: DailyEntry) -> Result<(), DataError> {
        check_entry(day, &entry)?;
        let cell = self.entries.get_mut(day).ok_or(DataError::OutOfRange { day, slot: 0 })?;
        *cell = entry;
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(start_date: NaiveDate, unit: DailyUnit, entries: Vec<DailyEntry>) -> Self {
        Self {
            start_date,
            unit,
            entries,
        }
    }
}

/// Read access shared by hourly and daily series for gap accounting.
pub trait SlotGrid {
    fn n_days(&self) -> usize;
    fn slots_per_day(&self) -> usize;
    fn slot(&self, day: usize, idx: usize) -> Slot;
}

impl SlotGrid for HourlySeries {
    fn n_days(&self) -> usize {
        self.days.len()
    }
    fn slots_per_day(&self) -> usize {
        HOURS_PER_DAY
    }
    fn slot(&self, day: usize, idx: usize) -> Slot {
        self.days[day][idx]
    }
}

impl SlotGrid for DailySeries {
    fn n_days(&self) -> usize {
        self.entries.len()
    }
    fn slots_per_day(&self) -> usize {
        1
    }
    fn slot(&self, day: usize, _idx: usize) -> Slot {
        self.entries[day].insolation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Pacific,
    Andean,
    Amazonia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub code: String,
    pub name: String,
    pub position: GeoPosition,
    pub region: Region,
    pub period: (NaiveDate, NaiveDate),
}

impl StationMeta {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.code.trim().is_empty() {
            return Err(DataError::Station("empty station code".into()));
        }
        if self.period.0 > self.period.1 {
            return Err(DataError::Station(format!(
                "period start {} after end {}",
                self.period.0, self.period.1
            )));
        }
        self.position.validate()?;
        Ok(())
    }
}

/// Cloudiness class of a day by clearness index, ordered from cloudiest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayClass {
    Cloudy,
    PartiallyHighCloud,
    PartiallyLowCloud,
    Sunny,
    VerySunny,
}

impl DayClass {
    pub const ALL: [DayClass; 5] = [
        DayClass::Cloudy,
        DayClass::PartiallyHighCloud,
        DayClass::PartiallyLowCloud,
        DayClass::Sunny,
        DayClass::VerySunny,
    ];

    /// Clearness-index interval `(lower, upper]` of the class.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            DayClass::Cloudy => (0.0, 0.2),
            DayClass::PartiallyHighCloud => (0.2, 0.4),
            DayClass::PartiallyLowCloud => (0.4, 0.6),
            DayClass::Sunny => (0.6, 0.75),
            DayClass::VerySunny => (0.75, 1.0),
        }
    }
}

/// Classifies a day by its clearness index; upper edges are inclusive.
pub fn classify_day(kt: f64) -> Result<DayClass, DataError> {
    if !(kt > 0.0 && kt <= 1.0) {
        return Err(DataError::ClearnessOutOfRange(kt));
    }
    Ok(DayClass::ALL
        .into_iter()
        .find(|c| kt <= c.bounds().1)
        .unwrap_or(DayClass::VerySunny))
}

/// Day-index spans of the four quarters of an `n_days` series. Remainder
/// days go to the earlier quarters.
pub fn quarter_ranges(n_days: usize) -> [Range<usize>; 4] {
    let base = n_days / 4;
    let rem = n_days % 4;
    let mut start = 0;
    std::array::from_fn(|q| {
        let len = base + usize::from(q < rem);
        let r = start..start + len;
        start += len;
        r
    })
}

/// Quarter (0..4) containing `day` of an `n_days` series.
pub fn quarter_of(day: usize, n_days: usize) -> usize {
    quarter_ranges(n_days)
        .iter()
        .position(|r| r.contains(&day))
        .unwrap_or(3)
}

/// Gap accounting. Any slot that is not measured (missing or imputed)
/// counts as missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingReport {
    pub n_total: usize,
    pub n_measured: usize,
    pub n_missing: usize,
    pub pct_missing: f64,
    pub per_quarter: [usize; 4],
    pub longest_gap: usize,
    /// Single missing slots with a known value on both sides.
    pub one_size_gap_count: usize,
}

pub fn missing_report<S: SlotGrid + ?Sized>(series: &S) -> Result<MissingReport, DataError> {
    let n_days = series.n_days();
    let per_day = series.slots_per_day();
    if n_days == 0 || per_day == 0 {
        return Err(DataError::EmptySeries);
    }
    let quarters = quarter_ranges(n_days);
    let mut per_quarter = [0usize; 4];
    let mut n_missing = 0;
    let mut longest_gap = 0;
    let mut one_size = 0;
    let mut run = 0usize;
    // whether the current run started right after a known value
    let mut run_opened_by_known = false;
    let mut seen_known = false;

    for (q, range) in quarters.iter().enumerate() {
        for day in range.clone() {
            for idx in 0..per_day {
                if series.slot(day, idx).is_measured() {
                    if run == 1 && run_opened_by_known {
                        one_size += 1;
                    }
                    run = 0;
                    seen_known = true;
                } else {
                    if run == 0 {
                        run_opened_by_known = seen_known;
                    }
                    run += 1;
                    longest_gap = longest_gap.max(run);
                    n_missing += 1;
                    per_quarter[q] += 1;
                }
            }
        }
    }
    let n_total = n_days * per_day;
    Ok(MissingReport {
        n_total,
        n_measured: n_total - n_missing,
        n_missing,
        pct_missing: 100.0 * n_missing as f64 / n_total as f64,
        per_quarter,
        longest_gap,
        one_size_gap_count: one_size,
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub timestamp: NaiveDateTime,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: usize,
    /// Rows lacking station, variable, timestamp or value.
    pub rows_incomplete: usize,
    /// Rows with an unparseable timestamp, value or provenance.
    pub rows_malformed: usize,
    /// Repeated (station, variable, timestamp) rows; the first one is kept.
    pub duplicates: usize,
}

/// Parsed CSV records grouped by (station, variable), sorted by time.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    groups: BTreeMap<(String, String), Vec<Observation>>,
    pub stats: IngestStats,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).unwrap()))
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested, DataError> {
    ingest_reader(File::open(path)?)
}

pub fn ingest_reader<R: Read>(reader: R) -> Result<Ingested, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Ingested::default();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(out);
    }
    let col = |name: &'static str| headers.iter().position(|h| h == name).ok_or(DataError::Header(name));
    let (c_station, c_variable, c_time, c_value) = (col("station")?, col("variable")?, col("timestamp")?, col("value")?);
    let c_prov = headers.iter().position(|h| h == "provenance");

    let mut seen: HashSet<(String, String, NaiveDateTime)> = HashSet::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping unreadable row: {e}");
                out.stats.rows_read += 1;
                out.stats.rows_malformed += 1;
                continue;
            }
        };
        out.stats.rows_read += 1;
        let field = |i: usize| record.get(i).filter(|s| !s.is_empty());
        let (Some(station), Some(variable), Some(ts), Some(value)) =
            (field(c_station), field(c_variable), field(c_time), field(c_value))
        else {
            out.stats.rows_incomplete += 1;
            continue;
        };
        let timestamp = parse_timestamp(ts).filter(|t| t.minute() == 0 && t.second() == 0);
        let value = value.parse::<f64>().ok().filter(|v| v.is_finite());
        let provenance = match c_prov.and_then(field) {
            None | Some("measured") => Some(Provenance::Measured),
            Some("imputed") => Some(Provenance::Imputed),
            Some(_) => None,
        };
        let (Some(timestamp), Some(value), Some(provenance)) = (timestamp, value, provenance) else {
            out.stats.rows_malformed += 1;
            continue;
        };
        if !seen.insert((station.to_string(), variable.to_string(), timestamp)) {
            log::warn!("duplicate record {station}/{variable} at {timestamp}; keeping the first");
            out.stats.duplicates += 1;
            continue;
        }
        out.groups
            .entry((station.to_string(), variable.to_string()))
            .or_default()
            .push(Observation {
                timestamp,
                value,
                provenance,
            });
    }
    for obs in out.groups.values_mut() {
        obs.sort_by_key(|o| o.timestamp);
    }
    Ok(out)
}

fn to_slot(o: &Observation) -> Slot {
    match o.provenance {
        Provenance::Measured => Slot::Measured(o.value),
        Provenance::Imputed => Slot::Imputed(o.value),
    }
}

impl Ingested {
    pub fn keys(&self) -> impl Iterator<Item = &(String, String)> {
        self.groups.keys()
    }

    pub fn observations(&self, station: &str, variable: &str) -> Option<&[Observation]> {
        self.groups
            .get(&(station.to_string(), variable.to_string()))
            .map(Vec::as_slice)
    }

    /// Hourly grid for one station variable spanning its first to last date.
    /// Samples outside 06:00..=18:00 are ignored.
    pub fn hourly(&self, station: &str, variable: &str, unit: HourlyUnit) -> Result<Option<HourlySeries>, DataError> {
        let Some(obs) = self.observations(station, variable) else {
            return Ok(None);
        };
        let (Some(first), Some(last)) = (obs.first(), obs.last()) else {
            return Ok(None);
        };
        let start = first.timestamp.date();
        let n_days = (last.timestamp.date() - start).num_days() as usize + 1;
        let mut series = HourlySeries::empty(start, unit, n_days);
        let mut ignored = 0usize;
        for o in obs {
            let hour = o.timestamp.hour() as u8;
            if !(FIRST_HOUR..=LAST_HOUR).contains(&hour) {
                ignored += 1;
                continue;
            }
            let day = (o.timestamp.date() - start).num_days() as usize;
            series.set(day, usize::from(hour - FIRST_HOUR), to_slot(o))?;
        }
        if ignored > 0 {
            log::debug!("{station}/{variable}: ignored {ignored} samples outside the daylight window");
        }
        Ok(Some(series))
    }

    /// Daily series assembled from up to three station variables; the date
    /// span is the union of the variables present.
    pub fn daily(
        &self,
        station: &str,
        insolation: Option<&str>,
        t_max: Option<&str>,
        t_min: Option<&str>,
    ) -> Result<Option<DailySeries>, DataError> {
        let vars = [insolation, t_max, t_min].map(|v| v.and_then(|v| self.observations(station, v)));
        let dates: Vec<NaiveDate> = vars
            .iter()
            .flatten()
            .flat_map(|o| [o.first(), o.last()])
            .flatten()
            .map(|o| o.timestamp.date())
            .collect();
        let (Some(&start), Some(&end)) = (dates.iter().min(), dates.iter().max()) else {
            return Ok(None);
        };
        let n_days = (end - start).num_days() as usize + 1;
        let mut entries = vec![DailyEntry::missing(); n_days];
        let day_of = |o: &Observation| (o.timestamp.date() - start).num_days() as usize;
        for o in vars[0].unwrap_or(&[]) {
            entries[day_of(o)].insolation = to_slot(o);
        }
        for o in vars[1].unwrap_or(&[]) {
            entries[day_of(o)].t_max = Some(o.value);
        }
        for o in vars[2].unwrap_or(&[]) {
            entries[day_of(o)].t_min = Some(o.value);
        }
        DailySeries::new(start, DailyUnit::Insolation, entries).map(Some)
    }
}

fn provenance_str(p: Provenance) -> &'static str {
    match p {
        Provenance::Measured => "measured",
        Provenance::Imputed => "imputed",
    }
}

/// Writes the non-missing slots of an hourly series in the ingestion schema
/// plus a `provenance` column.
pub fn write_hourly_csv<W: Write>(w: W, station: &str, variable: &str, series: &HourlySeries) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["station", "variable", "timestamp", "value", "provenance"])?;
    for (d, row) in series.days().iter().enumerate() {
        let date = series.date(d);
        for (h, slot) in row.iter().enumerate() {
            let (Some(v), Some(p)) = (slot.value(), slot.provenance()) else {
                continue;
            };
            let ts = date.and_hms_opt(u32::from(FIRST_HOUR) + h as u32, 0, 0).unwrap();
            wtr.write_record([
                station,
                variable,
                &ts.format("%Y-%m-%dT%H:%M:%S").to_string(),
                &v.to_string(),
                provenance_str(p),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a daily series as three variables (insolation, t_max, t_min).
pub fn write_daily_csv<W: Write>(w: W, station: &str, series: &DailySeries) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["station", "variable", "timestamp", "value", "provenance"])?;
    for (d, e) in series.entries().iter().enumerate() {
        let ts = series.date(d).format("%Y-%m-%d").to_string();
        if let (Some(v), Some(p)) = (e.insolation.value(), e.insolation.provenance()) {
            wtr.write_record([station, "insolation", &ts, &v.to_string(), provenance_str(p)])?;
        }
        for (name, t) in [("t_max", e.t_max), ("t_min", e.t_min)] {
            if let Some(t) = t {
                wtr.write_record([station, name, &ts, &t.to_string(), "measured"])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn classify_boundaries() {
        assert_eq!(classify_day(0.2).unwrap(), DayClass::Cloudy);
        assert_eq!(classify_day(0.75).unwrap(), DayClass::Sunny);
        assert_eq!(classify_day(0.61).unwrap(), DayClass::Sunny);
        assert_eq!(classify_day(0.2000001).unwrap(), DayClass::PartiallyHighCloud);
        assert_eq!(classify_day(0.4).unwrap(), DayClass::PartiallyHighCloud);
        assert_eq!(classify_day(0.6).unwrap(), DayClass::PartiallyLowCloud);
        assert_eq!(classify_day(1.0).unwrap(), DayClass::VerySunny);
        assert!(classify_day(0.0).is_err());
        assert!(classify_day(1.0001).is_err());
        assert!(classify_day(f64::NAN).is_err());
    }

    #[test]
    fn classify_monotone() {
        let mut prev = DayClass::Cloudy;
        for i in 1..=10_000 {
            let c = classify_day(i as f64 / 10_000.0).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn quarters_partition() {
        for n in 0..50 {
            let q = quarter_ranges(n);
            assert_eq!(q[0].start, 0);
            assert_eq!(q[3].end, n);
            for w in q.windows(2) {
                assert_eq!(w[0].end, w[1].start);
                assert!(w[0].len() >= w[1].len());
            }
        }
        assert_eq!(quarter_ranges(10), [0..3, 3..6, 6..8, 8..10]);
    }

    #[test]
    fn missing_report_examples() {
        let mut s = HourlySeries::new(date(2020, 1, 1), HourlyUnit::Irradiance, vec![[Slot::Measured(1.0); 13]; 8]).unwrap();
        let full = missing_report(&s).unwrap();
        assert_eq!(full.pct_missing, 0.0);
        assert_eq!(full.longest_gap, 0);
        for d in [0, 2, 4, 6] {
            s.set(d, 5, Slot::Missing).unwrap();
        }
        let r = missing_report(&s).unwrap();
        assert_eq!(r.per_quarter, [1, 1, 1, 1]);
        assert_eq!(r.n_missing, 4);
        assert_eq!(r.one_size_gap_count, 4);
        assert_eq!(r.longest_gap, 1);
    }

    #[test]
    fn gap_scan_on_daily_pattern() {
        // M, _, M
        let entries = [Slot::Measured(1.0), Slot::Missing, Slot::Measured(1.0)]
            .map(|s| DailyEntry {
                insolation: s,
                t_max: None,
                t_min: None,
            })
            .to_vec();
        let s = DailySeries::new(date(2020, 1, 1), DailyUnit::Insolation, entries).unwrap();
        let r = missing_report(&s).unwrap();
        assert_eq!(r.one_size_gap_count, 1);
        assert_eq!(r.longest_gap, 1);

        // leading and trailing single gaps are not bounded by known values
        let entries = [Slot::Missing, Slot::Measured(1.0), Slot::Missing]
            .map(|s| DailyEntry {
                insolation: s,
                t_max: None,
                t_min: None,
            })
            .to_vec();
        let s = DailySeries::new(date(2020, 1, 1), DailyUnit::Insolation, entries).unwrap();
        assert_eq!(missing_report(&s).unwrap().one_size_gap_count, 0);
    }

    #[test]
    fn missing_report_rejects_empty() {
        let s = HourlySeries::empty(date(2020, 1, 1), HourlyUnit::Irradiance, 0);
        assert!(matches!(missing_report(&s), Err(DataError::EmptySeries)));
    }

    #[test]
    fn series_validation() {
        let mut s = HourlySeries::empty(date(2020, 1, 1), HourlyUnit::Irradiance, 1);
        assert!(s.set(0, 0, Slot::Measured(-1.0)).is_err());
        assert!(s.set(0, 0, Slot::Measured(f64::INFINITY)).is_err());
        assert!(s.set(1, 0, Slot::Measured(1.0)).is_err());
        let mut kc = HourlySeries::empty(date(2020, 1, 1), HourlyUnit::ClearSkyIndex, 1);
        assert!(kc.set(0, 0, Slot::Measured(-0.1)).is_ok());
        let bad = DailyEntry {
            insolation: Slot::Measured(1.0),
            t_max: Some(10.0),
            t_min: Some(12.0),
        };
        assert!(DailySeries::new(date(2020, 1, 1), DailyUnit::Insolation, vec![bad]).is_err());
    }

    #[test]
    fn station_validation() {
        let mut st = StationMeta {
            code: "BIO".into(),
            name: "Biotopo".into(),
            position: GeoPosition::new(1.41, -78.28, 512.0).unwrap(),
            region: Region::Pacific,
            period: (date(2005, 1, 1), date(2017, 1, 1)),
        };
        assert!(st.validate().is_ok());
        st.period = (date(2018, 1, 1), date(2017, 1, 1));
        assert!(st.validate().is_err());
        st.period = (date(2005, 1, 1), date(2017, 1, 1));
        st.code = " ".into();
        assert!(st.validate().is_err());
    }

    fn day_csv(skip_value_at: Option<u32>) -> String {
        let mut s = String::from("station,variable,timestamp,value\n");
        for h in 6..=18 {
            let v = if Some(h) == skip_value_at { String::new() } else { format!("{}", 100 + h) };
            s.push_str(&format!("S1,irradiance,2020-03-01T{h:02}:00:00,{v}\n"));
        }
        s
    }

    #[test]
    fn ingest_complete_day() {
        let ing = ingest_reader(day_csv(None).as_bytes()).unwrap();
        let s = ing.hourly("S1", "irradiance", HourlyUnit::Irradiance).unwrap().unwrap();
        assert_eq!(s.n_days(), 1);
        assert_eq!(missing_report(&s).unwrap().n_missing, 0);
        assert_eq!(s.get(0, 0), Some(Slot::Measured(106.0)));
        assert_eq!(ing.stats.rows_read, 13);
    }

    #[test]
    fn ingest_drops_incomplete_row() {
        let ing = ingest_reader(day_csv(Some(9)).as_bytes()).unwrap();
        assert_eq!(ing.stats.rows_incomplete, 1);
        let s = ing.hourly("S1", "irradiance", HourlyUnit::Irradiance).unwrap().unwrap();
        assert_eq!(s.get(0, 3), Some(Slot::Missing));
        assert_eq!(missing_report(&s).unwrap().n_missing, 1);
    }

    #[test]
    fn ingest_empty_and_bad_header() {
        let ing = ingest_reader("".as_bytes()).unwrap();
        assert_eq!(ing.keys().count(), 0);
        assert_eq!(ing.stats, IngestStats::default());
        let ing = ingest_reader("station,variable,timestamp,value\n".as_bytes()).unwrap();
        assert_eq!(ing.keys().count(), 0);
        assert!(matches!(
            ingest_reader("station,var,timestamp,value\nS,x,2020-01-01,1\n".as_bytes()),
            Err(DataError::Header("variable"))
        ));
    }

    #[test]
    fn ingest_malformed_and_duplicates() {
        let csv = "station,variable,timestamp,value\n\
                   S1,irradiance,2020-03-01T07:00:00,10\n\
                   S1,irradiance,2020-03-01T07:00:00,20\n\
                   S1,irradiance,not-a-date,5\n\
                   S1,irradiance,2020-03-01T08:00:00,abc\n\
                   S1,irradiance,2020-03-01T08:30:00,3\n\
                   S1,irradiance,2020-03-02T08:00:00,7\n";
        let ing = ingest_reader(csv.as_bytes()).unwrap();
        assert_eq!(ing.stats.duplicates, 1);
        assert_eq!(ing.stats.rows_malformed, 3);
        let s = ing.hourly("S1", "irradiance", HourlyUnit::Irradiance).unwrap().unwrap();
        assert_eq!(s.n_days(), 2);
        assert_eq!(s.get(0, 1), Some(Slot::Measured(10.0)));
    }

    #[test]
    fn ingest_daily_variables() {
        let csv = "station,variable,timestamp,value\n\
                   S1,t_max,2020-03-01,25.5\n\
                   S1,t_min,2020-03-01,14.0\n\
                   S1,t_max,2020-03-03,26\n\
                   S1,insolation,2020-03-02,4100\n";
        let ing = ingest_reader(csv.as_bytes()).unwrap();
        let d = ing.daily("S1", Some("insolation"), Some("t_max"), Some("t_min")).unwrap().unwrap();
        assert_eq!(d.n_days(), 3);
        assert_eq!(d.entries()[0].temperature_range(), Some(11.5));
        assert_eq!(d.entries()[1].insolation, Slot::Measured(4100.0));
        assert_eq!(d.entries()[2].t_min, None);
    }

    #[test]
    fn hourly_round_trip_is_bit_exact() {
        let mut s = HourlySeries::empty(date(2021, 6, 1), HourlyUnit::Irradiance, 3);
        let vals = [0.1 + 0.2, 1.0 / 3.0, 123.456789e-3, 987.0000000001];
        for (i, v) in vals.iter().enumerate() {
            s.set(i % 3, i * 3, Slot::Measured(*v)).unwrap();
        }
        s.set(2, 12, Slot::Imputed(42.0)).unwrap();
        let mut buf = Vec::new();
        write_hourly_csv(&mut buf, "S1", "irradiance", &s).unwrap();
        let back = ingest_reader(buf.as_slice())
            .unwrap()
            .hourly("S1", "irradiance", HourlyUnit::Irradiance)
            .unwrap()
            .unwrap();
        assert_eq!(back, s);
    }
}
