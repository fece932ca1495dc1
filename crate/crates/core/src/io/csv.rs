//! The canonical measurement CSV.
//!
//! Header: `timestamp_s,v_V,i_A,t_K,gni_Wm2,s_true_Wm2,p_max_true_W`.
//! The first four columns are required on read; the remaining three are
//! optional (empty cells allowed). Timestamps must be strictly increasing.

use crate::error::{Error, Result};
use crate::estimators::MeasurementSample;
use crate::pv::types::PlantModel;
use crate::pv::S_MIN;
use crate::sim::{correct_temperature_reading, SimRecord};
use std::path::Path;

pub const CSV_HEADER: &str = "timestamp_s,v_V,i_A,t_K,gni_Wm2,s_true_Wm2,p_max_true_W";

/// One row of the canonical CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRecord {
    pub timestamp: f64,
    pub v: f64,
    pub i: f64,
    /// Raw temperature reading [K] (before any offset correction).
    pub t_raw: f64,
    pub gni: Option<f64>,
    pub s_true: Option<f64>,
    pub p_max_true: Option<f64>,
}

impl From<&SimRecord> for CsvRecord {
    fn from(r: &SimRecord) -> Self {
        CsvRecord {
            timestamp: r.timestamp,
            v: r.v,
            i: r.i,
            t_raw: r.t_raw,
            gni: r.gni,
            s_true: Some(r.s_true),
            p_max_true: Some(r.p_max_true),
        }
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

/// Write records with the canonical header. Fixed six-decimal formatting
/// keeps identical runs byte-identical.
pub fn write_measurements(path: &Path, records: &[CsvRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(io_err)?;
    for r in records {
        writer
            .write_record(&[
                format!("{:.3}", r.timestamp),
                format!("{:.6}", r.v),
                format!("{:.6}", r.i),
                format!("{:.6}", r.t_raw),
                fmt_opt(r.gni),
                fmt_opt(r.s_true),
                fmt_opt(r.p_max_true),
            ])
            .map_err(io_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::invalid("csv write", e.to_string())
}

/// Read and validate the canonical CSV: header-addressed columns, strictly
/// increasing timestamps, errors carrying the offending line number.
pub fn read_measurements(path: &Path) -> Result<Vec<CsvRecord>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::MalformedData {
            path: display.clone(),
            line: 0,
            message: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedData {
            path: display.clone(),
            line: 1,
            message: format!("bad header: {e}"),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::MalformedData {
            path: display.clone(),
            line: 1,
            message: format!("missing required column '{name}'"),
        })
    };
    let c_ts = required("timestamp_s")?;
    let c_v = required("v_V")?;
    let c_i = required("i_A")?;
    let c_t = required("t_K")?;
    let c_gni = col("gni_Wm2");
    let c_s = col("s_true_Wm2");
    let c_p = col("p_max_true_W");

    let mut out = Vec::new();
    let mut prev_ts: Option<f64> = None;
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row.map_err(|e| Error::MalformedData {
            path: display.clone(),
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize, name: &str| -> Result<f64> {
            let raw = row.get(c).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::MalformedData {
                path: display.clone(),
                line,
                message: format!("bad {name} value '{raw}'"),
            })
        };
        let optional = |c: Option<usize>, name: &str| -> Result<Option<f64>> {
            match c {
                None => Ok(None),
                Some(c) => match row.get(c) {
                    None | Some("") => Ok(None),
                    Some(raw) => raw.parse::<f64>().map(Some).map_err(|_| {
                        Error::MalformedData {
                            path: display.clone(),
                            line,
                            message: format!("bad {name} value '{raw}'"),
                        }
                    }),
                },
            }
        };

        let timestamp = field(c_ts, "timestamp_s")?;
        if let Some(prev) = prev_ts {
            if timestamp <= prev {
                return Err(Error::MalformedData {
                    path: display,
                    line,
                    message: format!(
                        "timestamps not strictly increasing ({timestamp} after {prev})"
                    ),
                });
            }
        }
        prev_ts = Some(timestamp);

        out.push(CsvRecord {
            timestamp,
            v: field(c_v, "v_V")?,
            i: field(c_i, "i_A")?,
            t_raw: field(c_t, "t_K")?,
            gni: optional(c_gni, "gni_Wm2")?,
            s_true: optional(c_s, "s_true_Wm2")?,
            p_max_true: optional(c_p, "p_max_true_W")?,
        });
    }
    Ok(out)
}

/// Ingestion behaviour.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Apply the mounting-offset correction using the previous irradiance
    /// estimate.
    pub correct_temperature: bool,
    /// Drop samples whose quick irradiance estimate falls below `s_min`
    /// (daylight filtering).
    pub daylight_filter: bool,
    pub s_min: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            correct_temperature: false,
            daylight_filter: true,
            s_min: S_MIN,
        }
    }
}

/// Outcome of ingesting CSV records into measurement samples.
#[derive(Debug)]
pub struct IngestReport {
    pub samples: Vec<MeasurementSample>,
    /// (timestamp, reason) of dropped rows.
    pub dropped: Vec<(f64, String)>,
    /// Ground truth carried through for evaluation, aligned with `samples`.
    pub s_true: Vec<Option<f64>>,
    pub p_max_true: Vec<Option<f64>>,
}

/// Turn raw CSV records into estimator-ready samples. Daylight filtering and
/// the temperature correction both need a quick per-row irradiance estimate,
/// which uses the analytical closed form against the supplied model.
pub fn ingest(
    records: &[CsvRecord],
    model: Option<&PlantModel>,
    options: IngestOptions,
) -> Result<IngestReport> {
    if (options.daylight_filter || options.correct_temperature) && model.is_none() {
        return Err(Error::invalid(
            "ingest",
            "daylight filtering and temperature correction need a plant model",
        ));
    }

    let mut samples = Vec::with_capacity(records.len());
    let mut dropped = Vec::new();
    let mut s_true = Vec::new();
    let mut p_max_true = Vec::new();
    let mut prev_estimate: Option<f64> = None;

    for r in records {
        let t = if options.correct_temperature {
            // The first sample has no prior estimate; use the raw reading.
            match prev_estimate {
                Some(s_prev) => correct_temperature_reading(r.t_raw, s_prev),
                None => r.t_raw,
            }
        } else {
            r.t_raw
        };
        let sample = MeasurementSample {
            timestamp: r.timestamp,
            v: r.v.max(0.0),
            i: r.i.max(0.0),
            t,
            gni: r.gni,
        };
        if let Err(e) = sample.validate() {
            dropped.push((r.timestamp, e.to_string()));
            continue;
        }

        if options.daylight_filter || options.correct_temperature {
            let model = model.unwrap();
            match crate::estimators::analytical_estimate(
                &sample,
                model,
                1e-6,
                crate::estimators::AcceptanceRange {
                    s_min: options.s_min,
                    s_max: crate::pv::S_MAX,
                },
            ) {
                Ok(est) => prev_estimate = Some(est.s_hat),
                Err(e) => {
                    if options.daylight_filter {
                        dropped.push((r.timestamp, e.to_string()));
                        continue;
                    }
                }
            }
        }

        samples.push(sample);
        s_true.push(r.s_true);
        p_max_true.push(r.p_max_true);
    }

    Ok(IngestReport {
        samples,
        dropped,
        s_true,
        p_max_true,
    })
}
