//! Dated forecasts and the `date,scaled,value` forecast file.

use std::io::{Read, Write};

use chrono::{Days, NaiveDate};
use tradecast_core::forecast::recursive_forecast;
use tradecast_core::{inverse_scale, scale, Model};

use crate::ingest::{parse_date, parse_number, DailySeries};
use crate::{Error, Result};

pub const DEFAULT_HORIZON: usize = 180;

/// The `horizon` days following `last_observed`.
pub fn extend_dates(last_observed: NaiveDate, horizon: usize) -> Result<Vec<NaiveDate>> {
    if horizon < 1 {
        return Err(tradecast_core::Error::BadHorizon.into());
    }
    (1..=horizon as u64)
        .map(|k| {
            last_observed
                .checked_add_days(Days::new(k))
                .ok_or_else(|| Error::BadSeries("forecast runs past the calendar".into()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub start_date: NaiveDate,
    pub scaled_values: Vec<f64>,
    pub original_values: Vec<f64>,
    pub horizon: usize,
}

impl ForecastResult {
    /// Recursive forecast seeded with the last `lookback` observations of
    /// `series`, scaled with the model's own scaler.
    pub fn from_series(model: &Model, series: &DailySeries, horizon: usize) -> Result<Self> {
        let lookback = model.lookback();
        if series.len() < lookback {
            return Err(Error::BadSeries(format!(
                "series has {} points; the model needs {lookback} to seed a forecast",
                series.len()
            )));
        }
        let seed = scale(&series.values[series.len() - lookback..], model.scaler());
        let scaled_values = recursive_forecast(model, &seed, horizon)?;
        let original_values = inverse_scale(&scaled_values, model.scaler());
        if let Some(step) = original_values.iter().position(|v| !v.is_finite()) {
            return Err(tradecast_core::Error::NonFiniteForecast(step).into());
        }
        let dates = extend_dates(series.end_date(), horizon)?;
        Ok(Self {
            start_date: dates[0],
            scaled_values,
            original_values,
            horizon,
        })
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.horizon as u64).map(|k| self.start_date + Days::new(k))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "scaled", "value"])?;
        for ((date, s), v) in self.dates().zip(&self.scaled_values).zip(&self.original_values) {
            w.write_record([date.to_string(), s.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut dates = Vec::new();
        let mut scaled_values = Vec::new();
        let mut original_values = Vec::new();
        for (k, row) in reader.records().enumerate() {
            let row = row?;
            let bad = || Error::BadSeries(format!("forecast line {}: malformed row", k + 2));
            dates.push(row.get(0).and_then(parse_date).ok_or_else(bad)?);
            scaled_values.push(row.get(1).and_then(parse_number).ok_or_else(bad)?);
            original_values.push(row.get(2).and_then(parse_number).ok_or_else(bad)?);
        }
        let start_date = *dates.first().ok_or(Error::EmptySeries)?;
        if dates
            .iter()
            .enumerate()
            .any(|(k, d)| *d != start_date + Days::new(k as u64))
        {
            return Err(Error::BadSeries("forecast dates are not consecutive".into()));
        }
        Ok(Self {
            start_date,
            horizon: dates.len(),
            scaled_values,
            original_values,
        })
    }
}
