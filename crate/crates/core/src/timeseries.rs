//! Calendar-aware hourly time series, CSV ingestion and weekly windowing.
//!
//! A week is the fundamental unit: 168 hours, indexed 1..=168 starting at
//! Monday 00:00. Hour indices in [`WindowLayout`] are 1-based to match that
//! convention; all internal storage is 0-based.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in one week.
pub const WEEK_HOURS: usize = 168;
/// Hours in one day.
pub const DAY_HOURS: usize = 24;

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("series must contain at least one value")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("file {path} has no header row")]
    MissingHeader { path: String },
    #[error("column `{column}` not found (available: {available})")]
    MissingColumn { column: String, available: String },
    #[error("non-numeric cell `{cell}` in column `{column}` at data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("gap in hourly sequence at data row {row}: expected hour {expected}, found {found}")]
    HourGap {
        row: usize,
        expected: i64,
        found: i64,
    },
    #[error("row {row} has {found} fields, header declares {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("series `{name}` is too short: {hours} hours, need at least one full aligned week")]
    TooShort { name: String, hours: usize },
    #[error("invalid window layout: {0}")]
    InvalidLayout(String),
    #[error("week vector has length {len}, expected {expected}")]
    BadWeekLength { len: usize, expected: usize },
    #[error("series must share a common length for export")]
    LengthMismatch,
}

/// Day of the week, Monday first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayOfWeek {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Monday,
        DayOfWeek::Tuesday,
        DayOfWeek::Wednesday,
        DayOfWeek::Thursday,
        DayOfWeek::Friday,
        DayOfWeek::Saturday,
        DayOfWeek::Sunday,
    ];

    /// Position within the week, Monday = 0.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|d| *d == self).unwrap()
    }

    /// The day reached after advancing `days` calendar days.
    pub fn advance(self, days: usize) -> DayOfWeek {
        Self::ALL[(self.index() + days) % 7]
    }

    /// Days to wait until `other` next occurs (0 if equal).
    pub fn days_until(self, other: DayOfWeek) -> usize {
        (other.index() + 7 - self.index()) % 7
    }
}

impl fmt::Display for DayOfWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DayOfWeek::Monday => "monday",
            DayOfWeek::Tuesday => "tuesday",
            DayOfWeek::Wednesday => "wednesday",
            DayOfWeek::Thursday => "thursday",
            DayOfWeek::Friday => "friday",
            DayOfWeek::Saturday => "saturday",
            DayOfWeek::Sunday => "sunday",
        };
        f.write_str(s)
    }
}

impl FromStr for DayOfWeek {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mon" | "monday" => Ok(DayOfWeek::Monday),
            "tue" | "tuesday" => Ok(DayOfWeek::Tuesday),
            "wed" | "wednesday" => Ok(DayOfWeek::Wednesday),
            "thu" | "thursday" => Ok(DayOfWeek::Thursday),
            "fri" | "friday" => Ok(DayOfWeek::Friday),
            "sat" | "saturday" => Ok(DayOfWeek::Saturday),
            "sun" | "sunday" => Ok(DayOfWeek::Sunday),
            other => Err(format!("unknown day of week `{other}`")),
        }
    }
}

/// An hourly value sequence (MW) starting at 00:00 of `start_day`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyTimeseries {
    name: String,
    start_day: DayOfWeek,
    values: Vec<f64>,
}

impl HourlyTimeseries {
    pub fn new(
        name: impl Into<String>,
        start_day: DayOfWeek,
        values: Vec<f64>,
    ) -> Result<Self, TimeseriesError> {
        if values.is_empty() {
            return Err(TimeseriesError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TimeseriesError::NonFinite { index });
        }
        Ok(Self {
            name: name.into(),
            start_day,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start_day(&self) -> DayOfWeek {
        self.start_day
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Day of week of sample `i`.
    pub fn day_of_week(&self, i: usize) -> DayOfWeek {
        self.start_day.advance(i / DAY_HOURS)
    }

    /// Hour of day (0..24) of sample `i`.
    pub fn hour_of_day(&self, i: usize) -> usize {
        i % DAY_HOURS
    }

    /// A copy with every value shifted by `c`. Used by equivariance checks
    /// and scenario construction.
    pub fn shifted(&self, c: f64) -> HourlyTimeseries {
        HourlyTimeseries {
            name: self.name.clone(),
            start_day: self.start_day,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

/// Split of the 168-hour week into a contiguous observation range followed by
/// a contiguous forecast range. Bounds are 1-based inclusive hour-of-week
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLayout {
    obs_start: usize,
    obs_end: usize,
    fcst_start: usize,
    fcst_end: usize,
}

impl WindowLayout {
    pub fn new(
        obs_start: usize,
        obs_end: usize,
        fcst_start: usize,
        fcst_end: usize,
    ) -> Result<Self, TimeseriesError> {
        if obs_start < 1 || obs_start > obs_end {
            return Err(TimeseriesError::InvalidLayout(format!(
                "observation range {obs_start}..{obs_end} is empty or not 1-based"
            )));
        }
        if fcst_start > fcst_end {
            return Err(TimeseriesError::InvalidLayout(format!(
                "forecast range {fcst_start}..{fcst_end} is empty"
            )));
        }
        if fcst_end > WEEK_HOURS {
            return Err(TimeseriesError::InvalidLayout(format!(
                "forecast range ends at {fcst_end}, past hour {WEEK_HOURS}"
            )));
        }
        if fcst_start != obs_end + 1 {
            return Err(TimeseriesError::InvalidLayout(format!(
                "observation range must end where the forecast range begins \
                 (obs ends {obs_end}, fcst starts {fcst_start})"
            )));
        }
        Ok(Self {
            obs_start,
            obs_end,
            fcst_start,
            fcst_end,
        })
    }

    /// Monday observation: obs hours 1..=24, forecast hours 25..=168.
    pub fn monday() -> Self {
        Self::new(1, 24, 25, WEEK_HOURS).unwrap()
    }

    /// Tuesday observation: obs hours 25..=48, forecast hours 49..=168.
    pub fn tuesday() -> Self {
        Self::new(25, 48, 49, WEEK_HOURS).unwrap()
    }

    pub fn obs_len(&self) -> usize {
        self.obs_end - self.obs_start + 1
    }

    pub fn fcst_len(&self) -> usize {
        self.fcst_end - self.fcst_start + 1
    }

    /// Total window width |obs| + |fcst|.
    pub fn width(&self) -> usize {
        self.obs_len() + self.fcst_len()
    }

    /// 0-based half-open observation range.
    pub fn obs_range(&self) -> std::ops::Range<usize> {
        self.obs_start - 1..self.obs_end
    }

    /// 0-based half-open forecast range.
    pub fn fcst_range(&self) -> std::ops::Range<usize> {
        self.fcst_start - 1..self.fcst_end
    }

    /// 1-based hour-of-week indices of the forecast range.
    pub fn fcst_hours(&self) -> Vec<usize> {
        (self.fcst_start..=self.fcst_end).collect()
    }
}

/// How a series aligns to `anchor`-starting weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeekAlignment {
    /// Hours skipped before the first aligned week.
    pub leading_hours: usize,
    /// Number of complete aligned weeks.
    pub full_weeks: usize,
    /// Hours dropped after the last complete week.
    pub trailing_hours: usize,
}

/// Alignment diagnostics for slicing `ts` into `anchor`-starting weeks.
pub fn week_alignment(ts: &HourlyTimeseries, anchor: DayOfWeek) -> WeekAlignment {
    let leading = ts.start_day().days_until(anchor) * DAY_HOURS;
    let avail = ts.len().saturating_sub(leading);
    WeekAlignment {
        leading_hours: leading,
        full_weeks: avail / WEEK_HOURS,
        trailing_hours: avail % WEEK_HOURS,
    }
}

/// Absolute sample index at which aligned week `week` begins.
pub fn week_start_index(ts: &HourlyTimeseries, anchor: DayOfWeek, week: usize) -> usize {
    week_alignment(ts, anchor).leading_hours + week * WEEK_HOURS
}

/// Splits the series into consecutive non-overlapping weeks of 168 hours
/// starting at 00:00 of `anchor`. A trailing partial week is dropped.
pub fn slice_weeks(
    ts: &HourlyTimeseries,
    anchor: DayOfWeek,
) -> Result<Vec<Vec<f64>>, TimeseriesError> {
    let align = week_alignment(ts, anchor);
    if align.full_weeks == 0 {
        return Err(TimeseriesError::TooShort {
            name: ts.name().to_string(),
            hours: ts.len(),
        });
    }
    let vals = ts.values();
    Ok((0..align.full_weeks)
        .map(|w| {
            let start = align.leading_hours + w * WEEK_HOURS;
            vals[start..start + WEEK_HOURS].to_vec()
        })
        .collect())
}

/// Extracts the observation and forecast vectors of one week.
pub fn extract_window(
    week: &[f64],
    layout: &WindowLayout,
) -> Result<(Vec<f64>, Vec<f64>), TimeseriesError> {
    if week.len() != WEEK_HOURS {
        return Err(TimeseriesError::BadWeekLength {
            len: week.len(),
            expected: WEEK_HOURS,
        });
    }
    Ok((
        week[layout.obs_range()].to_vec(),
        week[layout.fcst_range()].to_vec(),
    ))
}

/// Reads one named column of an `hour,<name>,...` CSV file.
///
/// The `hour` column must be a gapless 0-based integer sequence. `start_day`
/// declares the day of week of row 0; the file format does not carry it.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    column: &str,
    start_day: DayOfWeek,
) -> Result<HourlyTimeseries, TimeseriesError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => TimeseriesError::Io {
                path: path_str.clone(),
                source: match e.into_kind() {
                    csv::ErrorKind::Io(io) => io,
                    _ => unreachable!(),
                },
            },
            _ => TimeseriesError::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| TimeseriesError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    if headers.is_empty() {
        return Err(TimeseriesError::MissingHeader { path: path_str });
    }
    let hour_col = headers.iter().position(|h| h.trim() == "hour").ok_or_else(|| {
        TimeseriesError::MissingColumn {
            column: "hour".to_string(),
            available: headers.iter().collect::<Vec<_>>().join(","),
        }
    })?;
    let value_col = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| TimeseriesError::MissingColumn {
            column: column.to_string(),
            available: headers.iter().collect::<Vec<_>>().join(","),
        })?;

    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1; // 1-based data row, matching spreadsheet intuition
        let record = record.map_err(|e| TimeseriesError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        if record.len() != headers.len() {
            return Err(TimeseriesError::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let hour_cell = record.get(hour_col).unwrap_or("").trim();
        let hour: i64 = hour_cell
            .parse()
            .map_err(|_| TimeseriesError::NonNumericCell {
                row,
                column: "hour".to_string(),
                cell: hour_cell.to_string(),
            })?;
        let expected = i as i64;
        if hour != expected {
            return Err(TimeseriesError::HourGap {
                row,
                expected,
                found: hour,
            });
        }
        let cell = record.get(value_col).unwrap_or("").trim();
        let value: f64 = cell.parse().map_err(|_| TimeseriesError::NonNumericCell {
            row,
            column: column.to_string(),
            cell: cell.to_string(),
        })?;
        values.push(value);
    }

    HourlyTimeseries::new(column, start_day, values)
}

/// Writes one or more equally long series as `hour,<name-1>,...` CSV.
///
/// Values are written with the shortest round-trip `f64` formatting, so
/// ingesting the file back yields bitwise-equal values.
pub fn export_csv(
    path: impl AsRef<Path>,
    series: &[&HourlyTimeseries],
) -> Result<(), TimeseriesError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let first = series.first().ok_or(TimeseriesError::Empty)?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(TimeseriesError::LengthMismatch);
    }
    let file = std::fs::File::create(path).map_err(|source| TimeseriesError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| TimeseriesError::Io {
        path: path_str.clone(),
        source,
    };

    let mut header = String::from("hour");
    for s in series {
        header.push(',');
        header.push_str(s.name());
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for i in 0..first.len() {
        let mut line = i.to_string();
        for s in series {
            line.push(',');
            line.push_str(&format!("{}", s.values()[i]));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}
