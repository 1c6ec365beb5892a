//! Run outputs: `report.json`, `report.csv` and `forecasts.csv`.
//!
//! The CSV files carry no timing information, so identical runs produce
//! identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ModelLog, ModelReport, PipelineError, RunOutput, RunReport, Track};
use crate::data_model::Provenance;
use crate::metrics::{ErrorStats, QuarterStats};
use crate::solar_geometry::FIRST_HOUR;

const SCOPES: [&str; 5] = ["complete", "Q1", "Q2", "Q3", "Q4"];
const STATS: [&str; 6] = ["mae", "rmse", "mbe", "mape_pct", "mpe_pct", "n"];

fn stat_value(s: &ErrorStats, stat: &str) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match stat {
        "mae" => s.mae.to_string(),
        "rmse" => s.rmse.to_string(),
        "mbe" => s.mbe.to_string(),
        "mape_pct" => opt(s.mape_pct),
        "mpe_pct" => opt(s.mpe_pct),
        "n" => s.n.to_string(),
        _ => unreachable!("unknown statistic"),
    }
}

fn write_stats<W: Write>(
    w: &mut csv::Writer<W>,
    model: &str,
    unit: &str,
    q: &QuarterStats,
) -> Result<(), csv::Error> {
    let scoped = std::iter::once(Some(&q.complete)).chain(q.quarters.iter().map(Option::as_ref));
    for (scope, stats) in SCOPES.iter().zip(scoped) {
        for stat in STATS {
            let value = stats.map(|s| stat_value(s, stat)).unwrap_or_default();
            w.write_record([model, unit, scope, stat, value.as_str()])?;
        }
    }
    Ok(())
}

/// One row per model, unit, scope and statistic. Empty quarters and
/// undefined percentage errors leave the value blank.
pub fn write_report_csv<W: Write>(out: W, report: &RunReport) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "unit", "scope", "stat", "value"])?;
    let physical = match report.track {
        Track::HourlyIrradiance => "irradiance",
        Track::DailyInsolation => "insolation",
    };
    let all: Vec<&ModelReport> = report.models.iter().chain(std::iter::once(&report.persistence)).collect();
    for m in all {
        write_stats(&mut w, &m.model, "kc", &m.eval.kc)?;
        write_stats(&mut w, &m.model, physical, &m.eval.physical)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_forecasts_csv<W: Write>(out: W, track: Track, logs: &[ModelLog]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "hour", "model", "kc_pred", "phys_pred", "observed", "provenance"])?;
    for log in logs {
        for r in &log.records {
            let hour = match track {
                Track::HourlyIrradiance => (usize::from(FIRST_HOUR) + r.slot).to_string(),
                Track::DailyInsolation => String::new(),
            };
            let provenance = match r.provenance {
                Provenance::Measured => "measured",
                Provenance::Imputed => "imputed",
            };
            w.write_record([
                r.date.to_string(),
                hour,
                log.model.clone(),
                r.kc_pred.to_string(),
                r.phys_pred.to_string(),
                r.phys_obs.map(|v| v.to_string()).unwrap_or_default(),
                provenance.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let json = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(json, &output.report)?;
    write_report_csv(BufWriter::new(File::create(dir.join("report.csv"))?), &output.report)?;
    write_forecasts_csv(
        BufWriter::new(File::create(dir.join("forecasts.csv"))?),
        output.report.track,
        &output.logs,
    )?;
    Ok(())
}
