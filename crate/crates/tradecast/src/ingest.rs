//! Trade CSV parsing, slice filtering and daily series construction.
//!
//! Required columns (matched case-insensitively, any order): `Direction`,
//! `Year`, `Date`, `Weekday`, `Country`, `Commodity`, `Transport_Mode`,
//! `Measure`, `Value`, `Cumulative`. Extra columns are ignored. Dates are
//! either ISO `YYYY-MM-DD` or day-first `D/MM/YYYY`; a slash date such as
//! `03/04/2015` is always read as 3 April.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Exports,
    Imports,
    Reimports,
    Reexports,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Exports => "Exports",
            Direction::Imports => "Imports",
            Direction::Reimports => "Reimports",
            Direction::Reexports => "Reexports",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exports" => Ok(Direction::Exports),
            "imports" => Ok(Direction::Imports),
            "reimports" => Ok(Direction::Reimports),
            "reexports" => Ok(Direction::Reexports),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Which column of the trade data a series is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    DailyValue,
    #[default]
    Cumulative,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::DailyValue => "daily_value",
            Target::Cumulative => "cumulative",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "daily_value" | "value" | "daily" => Ok(Target::DailyValue),
            "cumulative" => Ok(Target::Cumulative),
            other => Err(format!("unknown target `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub direction: Direction,
    pub year: i32,
    pub date: NaiveDate,
    pub weekday: String,
    pub country: String,
    pub commodity: String,
    pub transport_mode: String,
    pub measure: String,
    pub value: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedCsv {
    pub records: Vec<TradeRecord>,
    pub rejected: Vec<MalformedRow>,
}

impl ParsedCsv {
    /// Earliest and latest record date.
    pub fn span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let min = self.records.iter().map(|r| r.date).min()?;
        let max = self.records.iter().map(|r| r.date).max()?;
        Some((min, max))
    }
}

const COLUMNS: [&str; 10] = [
    "direction",
    "year",
    "date",
    "weekday",
    "country",
    "commodity",
    "transport_mode",
    "measure",
    "value",
    "cumulative",
];

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .ok()
}

/// Decimal number with optional thousands separators.
pub fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s.trim().chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_currency(measure: &str) -> bool {
    measure.contains('$')
}

fn parse_row(row: &csv::StringRecord, index: &[usize; 10]) -> std::result::Result<TradeRecord, String> {
    let field = |k: usize| -> std::result::Result<&str, String> {
        row.get(index[k])
            .map(str::trim)
            .ok_or_else(|| format!("missing field `{}`", COLUMNS[k]))
    };
    let direction = field(0)?.parse::<Direction>()?;
    let year = field(1)?
        .parse::<i32>()
        .map_err(|_| format!("bad year `{}`", field(1).unwrap_or_default()))?;
    let date_text = field(2)?;
    let date = parse_date(date_text).ok_or_else(|| format!("bad date `{date_text}`"))?;
    let measure = field(7)?.to_string();
    let number = |k: usize| -> std::result::Result<f64, String> {
        let text = field(k)?;
        let v = parse_number(text).ok_or_else(|| format!("bad {} `{text}`", COLUMNS[k]))?;
        if v < 0.0 && is_currency(&measure) {
            return Err(format!("negative {} `{text}` for a currency measure", COLUMNS[k]));
        }
        Ok(v)
    };
    Ok(TradeRecord {
        direction,
        year,
        date,
        weekday: field(3)?.to_string(),
        country: field(4)?.to_string(),
        commodity: field(5)?.to_string(),
        transport_mode: field(6)?.to_string(),
        value: number(8)?,
        cumulative: number(9)?,
        measure,
    })
}

/// Parses every data row, collecting malformed rows instead of stopping.
/// Fails outright if a required column is missing or if more than half the
/// rows are malformed.
pub fn parse_csv<R: Read>(input: R) -> Result<ParsedCsv> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let mut index = [0usize; 10];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(Error::MissingHeader(name))?;
    }

    let mut parsed = ParsedCsv::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => match parse_row(&row, &index) {
                Ok(record) => parsed.records.push(record),
                Err(reason) => parsed.rejected.push(MalformedRow {
                    line: row.position().map_or(line, |p| p.line()),
                    reason,
                }),
            },
            Err(e) if matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) => {
                parsed.rejected.push(MalformedRow {
                    line: e.position().map_or(line, |p| p.line()),
                    reason: "invalid UTF-8".into(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    let total = parsed.records.len() + parsed.rejected.len();
    if parsed.rejected.len() * 2 > total {
        let first = &parsed.rejected[0];
        return Err(Error::TooManyRejected {
            rejected: parsed.rejected.len(),
            total,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok(parsed)
}

/// One slice of the data: a direction plus exact country, commodity,
/// transport mode and measure labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterCriteria {
    pub direction: Direction,
    pub country: String,
    pub commodity: String,
    pub transport_mode: String,
    pub measure: String,
}

impl FilterCriteria {
    /// The aggregate slice: all countries, commodities and transport modes in dollars.
    pub fn all(direction: Direction) -> Self {
        Self {
            direction,
            country: "All".into(),
            commodity: "All".into(),
            transport_mode: "All".into(),
            measure: "$".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("country", &self.country),
            ("commodity", &self.commodity),
            ("transport_mode", &self.transport_mode),
            ("measure", &self.measure),
        ] {
            if v.trim().is_empty() {
                return Err(Error::Usage(format!("filter field `{name}` is empty")));
            }
        }
        Ok(())
    }

    pub fn matches(&self, r: &TradeRecord) -> bool {
        r.direction == self.direction
            && r.country.trim() == self.country.trim()
            && r.commodity.trim() == self.commodity.trim()
            && r.transport_mode.trim() == self.transport_mode.trim()
            && r.measure.trim() == self.measure.trim()
    }
}

impl fmt::Display for FilterCriteria {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "direction={} country={} commodity={} transport_mode={} measure={}",
            self.direction, self.country, self.commodity, self.transport_mode, self.measure
        )
    }
}

pub fn filter_records(records: &[TradeRecord], criteria: &FilterCriteria) -> Result<Vec<TradeRecord>> {
    criteria.validate()?;
    let out: Vec<TradeRecord> = records.iter().filter(|r| criteria.matches(r)).cloned().collect();
    if out.is_empty() {
        return Err(Error::EmptyResult(criteria.to_string()));
    }
    Ok(out)
}

/// Collapses records to one value per date: daily values are summed,
/// cumulative values take the last record for the date in file order.
pub fn build_daily_series(records: &[TradeRecord], target: Target) -> Result<BTreeMap<NaiveDate, f64>> {
    if let Some(first) = records.first() {
        if records.iter().any(|r| r.direction != first.direction) {
            return Err(Error::MixedSlice("directions"));
        }
        if records.iter().any(|r| r.measure.trim() != first.measure.trim()) {
            return Err(Error::MixedSlice("measures"));
        }
    }
    let mut points = BTreeMap::new();
    for r in records {
        match target {
            Target::DailyValue => *points.entry(r.date).or_insert(0.0) += r.value,
            Target::Cumulative => {
                points.insert(r.date, r.cumulative);
            }
        }
    }
    Ok(points)
}

/// A gap-free daily series: `values[k]` belongs to `start_date + k` days.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
    pub target: Target,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, k: usize) -> NaiveDate {
        self.start_date + Days::new(k as u64)
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.values.len().saturating_sub(1))
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.values.len()).map(|k| self.date_at(k))
    }

    /// Rejects series too short for any downstream use.
    pub fn ensure_usable(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::BadSeries(format!(
                "series has {} point(s); at least 2 are needed",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Dates on which a cumulative series decreases without a new calendar
    /// year starting. The source data resets its running total each year, so
    /// drops at year boundaries are expected.
    pub fn cumulative_drops(&self) -> Vec<NaiveDate> {
        self.values
            .windows(2)
            .enumerate()
            .filter_map(|(k, w)| {
                let date = self.date_at(k + 1);
                (w[1] < w[0] && date.year() == self.date_at(k).year()).then_some(date)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "value"])?;
        for (date, v) in self.dates().zip(&self.values) {
            w.write_record([date.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `date,value` file written by [`DailySeries::write_csv`].
    pub fn read_csv<R: Read>(input: R, target: Target) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut points = BTreeMap::new();
        for (k, row) in reader.records().enumerate() {
            let row = row?;
            let line = k + 2;
            let date = row
                .get(0)
                .and_then(parse_date)
                .ok_or_else(|| Error::BadSeries(format!("line {line}: bad date")))?;
            let value = row
                .get(1)
                .and_then(parse_number)
                .ok_or_else(|| Error::BadSeries(format!("line {line}: bad value")))?;
            if points.insert(date, value).is_some() {
                return Err(Error::BadSeries(format!("line {line}: duplicate date {date}")));
            }
        }
        let series = calendarize(&points, target)?;
        if series.len() != points.len() {
            return Err(Error::BadSeries("series file has missing dates".into()));
        }
        Ok(series)
    }
}

/// True when the header row is exactly `date,value`, i.e. the file is a
/// series written by the ingest step rather than raw trade data.
pub fn is_series_header(header_line: &str) -> bool {
    let cols: Vec<String> = header_line
        .trim()
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    cols == ["date", "value"]
}

/// Fills the calendar between the first and last date: zeros for daily
/// values, the previous day's value for cumulative totals.
pub fn calendarize(points: &BTreeMap<NaiveDate, f64>, target: Target) -> Result<DailySeries> {
    let (&start, _) = points.first_key_value().ok_or(Error::EmptySeries)?;
    let (&end, _) = points.last_key_value().ok_or(Error::EmptySeries)?;
    let len = (end - start).num_days() as usize + 1;
    let mut values = Vec::with_capacity(len);
    let mut previous = 0.0;
    for k in 0..len {
        let date = start + Days::new(k as u64);
        let v = match (points.get(&date), target) {
            (Some(&v), _) => v,
            (None, Target::DailyValue) => 0.0,
            (None, Target::Cumulative) => previous,
        };
        values.push(v);
        previous = v;
    }
    Ok(DailySeries {
        start_date: start,
        values,
        target,
    })
}
