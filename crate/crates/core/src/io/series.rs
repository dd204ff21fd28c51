//! Weather and power time series as delimited text with a header row.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime, SecondsFormat, TimeZone, Utc};

use crate::error::{Error, Result};
use crate::pv_model::{decompose_ghi, PowerSeries, WeatherSample, WeatherSeries};
use crate::regressors::Row;
use crate::solar_geometry::{solar_position, SiteLocation};

const NAIVE_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

/// RFC 3339 instants are taken as is; naive local times are shifted by
/// `tz_offset_hours` (hours east of UTC).
pub fn parse_timestamp(s: &str, tz_offset_hours: f64) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    let naive = NAIVE_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| format!("unrecognised timestamp {s:?}"))?;
    let offset = FixedOffset::east_opt((tz_offset_hours * 3600.0).round() as i32)
        .ok_or_else(|| format!("invalid timezone offset {tz_offset_hours}"))?;
    offset
        .from_local_datetime(&naive)
        .single()
        .map(|t| t.with_timezone(&Utc))
        .ok_or_else(|| format!("ambiguous local time {s:?}"))
}

fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

struct Table {
    path: String,
    columns: HashMap<String, usize>,
    records: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let label = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(file);
        let parse_err = |line: usize, msg: String| Error::Parse { path: label.clone(), line, msg };
        let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let columns = header.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            records.push((line, rec));
        }
        if records.is_empty() {
            return Err(Error::validation(format!("{label}: no data rows")));
        }
        Ok(Self { path: label, columns, records })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line, msg: msg.into() }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.columns.get(name).copied().ok_or_else(|| self.err(1, format!("missing column {name:?}")))
    }

    fn number(&self, line: usize, rec: &csv::StringRecord, col: usize, name: &str) -> Result<f64> {
        let raw = rec.get(col).unwrap_or("");
        raw.parse::<f64>().map_err(|_| self.err(line, format!("{name}: cannot parse {raw:?} as a number")))
    }

    fn optional(&self, line: usize, rec: &csv::StringRecord, col: Option<usize>, name: &str) -> Result<Option<f64>> {
        match col {
            Some(c) if !rec.get(c).unwrap_or("").is_empty() => self.number(line, rec, c, name).map(Some),
            _ => Ok(None),
        }
    }

    fn timestamp(&self, line: usize, rec: &csv::StringRecord, col: usize, tz: f64) -> Result<DateTime<Utc>> {
        parse_timestamp(rec.get(col).unwrap_or(""), tz).map_err(|m| self.err(line, m))
    }
}

/// Reads `timestamp, ghi, [dni], [dhi], temp_air, wind_speed`. When beam or
/// diffuse is missing it is reconstructed from GHI and the series is flagged
/// as decomposed.
pub fn load_weather(path: &Path, site: &SiteLocation<f64>) -> Result<WeatherSeries<f64>> {
    let table = Table::read(path)?;
    let ts = table.require("timestamp")?;
    let ghi = table.require("ghi")?;
    let temp = table.require("temp_air")?;
    let wind = table.require("wind_speed")?;
    let dni = table.columns.get("dni").copied();
    let dhi = table.columns.get("dhi").copied();

    let mut samples = Vec::with_capacity(table.records.len());
    let mut decomposed = false;
    let mut prev: Option<DateTime<Utc>> = None;
    for (line, rec) in &table.records {
        let line = *line;
        let timestamp = table.timestamp(line, rec, ts, site.timezone_offset)?;
        if prev.is_some_and(|p| timestamp <= p) {
            return Err(table.err(line, "timestamps must be strictly increasing"));
        }
        prev = Some(timestamp);
        let mut s = WeatherSample {
            timestamp,
            ghi: table.number(line, rec, ghi, "ghi")?,
            dni: table.optional(line, rec, dni, "dni")?,
            dhi: table.optional(line, rec, dhi, "dhi")?,
            temp_air: table.number(line, rec, temp, "temp_air")?,
            wind_speed: table.number(line, rec, wind, "wind_speed")?,
        };
        if s.dni.is_none() || s.dhi.is_none() {
            let pos = solar_position(&timestamp, site).map_err(|e| table.err(line, e.to_string()))?;
            let (b, d) = decompose_ghi(s.ghi, pos.zenith).map_err(|e| table.err(line, e.to_string()))?;
            s.dni = Some(b);
            s.dhi = Some(d);
            decomposed = true;
        }
        s.validate().map_err(|e| table.err(line, e.to_string()))?;
        samples.push(s);
    }
    let mut series = WeatherSeries::new(samples)?;
    series.decomposed = decomposed;
    Ok(series)
}

pub fn write_weather(path: &Path, weather: &WeatherSeries<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    w.write_record(["timestamp", "ghi", "dni", "dhi", "temp_air", "wind_speed"]).map_err(|e| csv_io(path, e))?;
    for s in weather.samples() {
        w.write_record([
            format_timestamp(&s.timestamp),
            s.ghi.to_string(),
            opt(s.dni),
            opt(s.dhi),
            s.temp_air.to_string(),
            s.wind_speed.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `timestamp` plus either `power_kw` or `power_w`; values are returned in kW.
pub fn load_power(path: &Path, tz_offset_hours: f64) -> Result<PowerSeries<f64>> {
    let table = Table::read(path)?;
    let ts = table.require("timestamp")?;
    let (col, scale, name) = match (table.columns.get("power_kw"), table.columns.get("power_w")) {
        (Some(&c), None) => (c, 1.0, "power_kw"),
        (None, Some(&c)) => (c, 1e-3, "power_w"),
        (Some(_), Some(_)) => return Err(table.err(1, "declare either power_kw or power_w, not both")),
        (None, None) => return Err(table.err(1, "missing power column (power_kw or power_w)")),
    };
    let mut times = Vec::with_capacity(table.records.len());
    let mut power = Vec::with_capacity(table.records.len());
    for (line, rec) in &table.records {
        let t = table.timestamp(*line, rec, ts, tz_offset_hours)?;
        if times.last().is_some_and(|p| t <= *p) {
            return Err(table.err(*line, "timestamps must be strictly increasing"));
        }
        let p = table.number(*line, rec, col, name)?;
        if !p.is_finite() {
            return Err(table.err(*line, format!("{name} is not finite")));
        }
        times.push(t);
        power.push(p * scale);
    }
    PowerSeries::new(times, power)
}

/// Reads regression rows: `irradiance`, `temperature` and `power_kw` or `power_w`.
pub fn load_dataset(path: &Path) -> Result<Vec<Row>> {
    let table = Table::read(path)?;
    let g = table.require("irradiance")?;
    let t = table.require("temperature")?;
    let (col, scale, name) = match (table.columns.get("power_kw"), table.columns.get("power_w")) {
        (Some(&c), None) => (c, 1.0, "power_kw"),
        (None, Some(&c)) => (c, 1e-3, "power_w"),
        _ => return Err(table.err(1, "declare exactly one of power_kw or power_w")),
    };
    table
        .records
        .iter()
        .map(|(line, rec)| {
            Ok(Row {
                g: table.number(*line, rec, g, "irradiance")?,
                t: table.number(*line, rec, t, "temperature")?,
                p: table.number(*line, rec, col, name)? * scale,
            })
        })
        .collect()
}

pub fn write_power(path: &Path, series: &PowerSeries<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["timestamp", "power_kw"]).map_err(|e| csv_io(path, e))?;
    for (t, p) in series.timestamps.iter().zip(&series.power_kw) {
        w.write_record([format_timestamp(t), p.to_string()]).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serde(format!("{}: {other:?}", path.display())),
    }
}
