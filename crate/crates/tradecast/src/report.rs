//! Loss summaries, multi-series CSV tables and SVG line charts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use chrono::{Datelike, Months, NaiveDate};
use serde::Serialize;
use tradecast_core::{loss_summary, TrainReport};

use crate::ingest::{parse_date, parse_number, Direction};
use crate::json::to_string_sorted;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorRole {
    TrainTrue,
    TrainPred,
    TestTrue,
    TestPred,
    Forecast,
}

impl ColorRole {
    pub fn color(self) -> &'static str {
        match self {
            ColorRole::TrainTrue => "#1f77b4",
            ColorRole::TrainPred => "#ffbf00",
            ColorRole::TestTrue => "#2ca02c",
            ColorRole::TestPred => "#d62728",
            ColorRole::Forecast => "#9467bd",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColorRole::TrainTrue => "train_true",
            ColorRole::TrainPred => "train_pred",
            ColorRole::TestTrue => "test_true",
            ColorRole::TestPred => "test_pred",
            ColorRole::Forecast => "forecast",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [
            ColorRole::TrainTrue,
            ColorRole::TrainPred,
            ColorRole::TestTrue,
            ColorRole::TestPred,
            ColorRole::Forecast,
        ]
        .into_iter()
        .find(|r| r.as_str() == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub role: ColorRole,
}

impl Series {
    pub fn new(label: impl Into<String>, role: ColorRole, dates: Vec<NaiveDate>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            dates,
            values,
            role,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dates.is_empty() {
            return Err(Error::Plot(format!("series `{}` is empty", self.label)));
        }
        if self.dates.len() != self.values.len() {
            return Err(Error::Plot(format!(
                "series `{}` has {} dates but {} values",
                self.label,
                self.dates.len(),
                self.values.len()
            )));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Plot(format!(
                "series `{}` dates are not strictly increasing",
                self.label
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Plot(format!("series `{}` has non-finite values", self.label)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub series: Vec<Series>,
    pub width: u32,
    pub height: u32,
}

impl PlotSpec {
    pub fn new(title: impl Into<String>, series: Vec<Series>) -> Self {
        Self {
            title: title.into(),
            series,
            width: 960,
            height: 480,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::Plot("no series to draw".into()));
        }
        if self.width < 200 || self.height < 150 {
            return Err(Error::Plot("canvas smaller than 200x150".into()));
        }
        self.series.iter().try_for_each(Series::validate)
    }
}

struct CountingWriter<W> {
    inner: W,
    count: usize,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// One `date` column plus one column per series over the union of their
/// dates; a series with no value on a date leaves that cell empty.
pub fn emit_series_csv<W: Write>(series: &[Series], out: W) -> Result<usize> {
    series.iter().try_for_each(Series::validate)?;
    let dates: BTreeSet<NaiveDate> = series.iter().flat_map(|s| s.dates.iter().copied()).collect();
    let lookup: Vec<BTreeMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| s.dates.iter().copied().zip(s.values.iter().copied()).collect())
        .collect();

    let mut w = csv::Writer::from_writer(CountingWriter { inner: out, count: 0 });
    w.write_record(std::iter::once("date").chain(series.iter().map(|s| s.label.as_str())))?;
    for date in dates {
        let mut row = vec![date.to_string()];
        row.extend(
            lookup
                .iter()
                .map(|m| m.get(&date).map(f64::to_string).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    let inner = w.into_inner().map_err(|e| Error::Write(e.into_error()))?;
    Ok(inner.count)
}

/// Reads a table written by [`emit_series_csv`]. Column labels that name a
/// [`ColorRole`] get that role; any other label gets `default_role`.
pub fn read_series_csv<R: Read>(input: R, default_role: ColorRole) -> Result<Vec<Series>> {
    let mut reader = csv::Reader::from_reader(input);
    let labels: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut series: Vec<Series> = labels
        .iter()
        .map(|l| {
            Series::new(
                l.clone(),
                ColorRole::from_label(l).unwrap_or(default_role),
                Vec::new(),
                Vec::new(),
            )
        })
        .collect();
    for (k, row) in reader.records().enumerate() {
        let row = row?;
        let date = row
            .get(0)
            .and_then(parse_date)
            .ok_or_else(|| Error::BadSeries(format!("line {}: bad date", k + 2)))?;
        for (s, cell) in series.iter_mut().zip(row.iter().skip(1)) {
            if cell.trim().is_empty() {
                continue;
            }
            let v =
                parse_number(cell).ok_or_else(|| Error::BadSeries(format!("line {}: bad value `{cell}`", k + 2)))?;
            s.dates.push(date);
            s.values.push(v);
        }
    }
    Ok(series)
}

fn escape_xml(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '&' => "&amp;".to_string(),
            '<' => "&lt;".to_string(),
            '>' => "&gt;".to_string(),
            '"' => "&quot;".to_string(),
            '\'' => "&apos;".to_string(),
            c => c.to_string(),
        })
        .collect()
}

fn axis_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

/// Y range over every value, padded by 5% of the span. A flat range is
/// padded by 5% of `max(|value|, 1)` instead.
pub fn padded_y_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.05 * lo.abs().max(1.0)
    };
    Some((lo - pad, hi + pad))
}

/// First day of every month inside `[start, end]`, thinned to at most 12.
fn month_ticks(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut ticks = Vec::new();
    let mut month = NaiveDate::from_ymd_opt(start.year(), start.month(), 1).expect("valid month start");
    if month < start {
        month = month + Months::new(1);
    }
    while month <= end {
        ticks.push(month);
        month = month + Months::new(1);
    }
    let stride = ticks.len().div_ceil(12).max(1);
    ticks.into_iter().step_by(stride).collect()
}

const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Standalone SVG 1.1 line chart: linear date axis, linear value axis, one
/// polyline per series, month tick labels, legend and title.
pub fn emit_svg_lines<W: Write>(spec: &PlotSpec, mut out: W) -> Result<usize> {
    spec.validate()?;
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let (plot_w, plot_h) = (w - MARGIN_LEFT - MARGIN_RIGHT, h - MARGIN_TOP - MARGIN_BOTTOM);

    let first = spec
        .series
        .iter()
        .filter_map(|s| s.dates.first())
        .min()
        .copied()
        .expect("validated");
    let last = spec
        .series
        .iter()
        .filter_map(|s| s.dates.last())
        .max()
        .copied()
        .expect("validated");
    let (x0, x1) = if first == last {
        (first.pred_opt().unwrap_or(first), last.succ_opt().unwrap_or(last))
    } else {
        (first, last)
    };
    let x_span = (x1 - x0).num_days() as f64;
    let (y0, y1) = padded_y_range(spec.series.iter().flat_map(|s| s.values.iter().copied())).expect("validated");

    let px = |d: NaiveDate| MARGIN_LEFT + (d - x0).num_days() as f64 / x_span * plot_w;
    let py = |v: f64| MARGIN_TOP + (1.0 - (v - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="28" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        w / 2.0,
        escape_xml(&spec.title)
    );

    // Axes.
    let (left, right, top, bottom) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_TOP, MARGIN_TOP + plot_h);
    let _ = writeln!(svg, r##"<g stroke="#333333" stroke-width="1">"##);
    let _ = writeln!(
        svg,
        r#"<line x1="{left:.1}" y1="{bottom:.1}" x2="{right:.1}" y2="{bottom:.1}"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left:.1}" y1="{top:.1}" x2="{left:.1}" y2="{bottom:.1}"/>"#
    );
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r##"<g font-family="sans-serif" font-size="11" fill="#333333">"##);
    for tick in month_ticks(x0, x1) {
        let x = px(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333333"/>"##,
            bottom + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            bottom + 20.0,
            tick.format("%Y-%m")
        );
    }
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * f64::from(k) / 4.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="#333333"/>"##,
            left - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + 4.0,
            axis_label(v)
        );
    }
    let _ = writeln!(svg, "</g>");

    for s in &spec.series {
        let points: Vec<String> = s
            .dates
            .iter()
            .zip(&s.values)
            .map(|(&d, &v)| format!("{:.3},{:.3}", px(d), py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-role="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.role.as_str(),
            s.role.color(),
            points.join(" ")
        );
    }

    // Legend, top-right inside the plot area.
    let legend_x = right - 170.0;
    let _ = writeln!(svg, r#"<g font-family="sans-serif" font-size="12">"#);
    for (k, s) in spec.series.iter().enumerate() {
        let y = top + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{legend_x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/>"#,
            legend_x + 24.0,
            s.role.color()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            legend_x + 30.0,
            y + 4.0,
            escape_xml(&s.label)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");

    out.write_all(svg.as_bytes())?;
    Ok(svg.len())
}

/// Serialized [`TrainReport`] plus its highest and lowest epoch loss.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReportFile {
    pub epoch_losses: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub highest_loss: Option<f64>,
    pub lowest_loss: Option<f64>,
    pub wall_time_secs: f64,
}

impl From<&TrainReport> for TrainReportFile {
    fn from(r: &TrainReport) -> Self {
        let summary = loss_summary(&r.epoch_losses).ok();
        Self {
            epoch_losses: r.epoch_losses.clone(),
            final_train_loss: r.final_train_loss,
            final_test_loss: r.final_test_loss,
            highest_loss: summary.map(|s| s.0),
            lowest_loss: summary.map(|s| s.1),
            wall_time_secs: r.wall_time_secs,
        }
    }
}

impl TrainReportFile {
    pub fn to_json(&self) -> Result<String> {
        to_string_sorted(self)
    }
}

pub fn write_epoch_losses_csv<W: Write>(losses: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (k, loss) in losses.iter().enumerate() {
        w.write_record([(k + 1).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpan {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Per-direction loss table and headline diagnostics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub direction: Direction,
    pub highest_loss: f64,
    pub lowest_loss: f64,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub rmse_original_units: f64,
    pub data_span: DataSpan,
    pub forecast_horizon: usize,
    /// `|f(x) - x|` at the last scaled observation.
    pub fixed_point_gap: f64,
    /// Largest step-to-step change of the scaled forecast.
    pub max_forecast_drift: f64,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        to_string_sorted(self)
    }
}
