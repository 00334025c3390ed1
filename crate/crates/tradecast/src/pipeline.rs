//! The end-to-end run: ingest, split and scale, train, predict, forecast and
//! report. Each CLI subcommand is a slice of this flow.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use tradecast_core::forecast::{drift_trace, fixed_point_gap};
use tradecast_core::lstm::LayerSpec;
use tradecast_core::train::evaluate_loss;
use tradecast_core::{
    fit_scaler, init_model, inverse_scale, loss_summary, make_windows, predict_one_step_series, rmse, scale,
    split_values, train_model, FitScope, Model, ScalerParams, SplitSpec, TrainConfig, TrainReport, WindowedDataset,
};

use crate::forecast::ForecastResult;
use crate::ingest::{
    build_daily_series, calendarize, filter_records, is_series_header, parse_csv, DailySeries, Direction,
    FilterCriteria, Target,
};
use crate::json::to_string_sorted;
use crate::model_file::{ModelFile, TrainConfigFile};
use crate::report::{
    emit_series_csv, emit_svg_lines, read_series_csv, write_epoch_losses_csv, ColorRole, DataSpan, PlotSpec,
    RunSummary, Series, TrainReportFile,
};
use crate::{Error, Result};

/// Everything besides the input file that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// `None` when the input is already a `date,value` series.
    pub criteria: Option<FilterCriteria>,
    pub target: Target,
    pub lookback: usize,
    pub fit_scope: FitScope,
    pub config: TrainConfig,
    pub horizon: usize,
}

impl RunSettings {
    pub fn new(criteria: Option<FilterCriteria>) -> Self {
        Self {
            criteria,
            target: Target::Cumulative,
            lookback: 1,
            fit_scope: FitScope::TrainOnly,
            config: TrainConfig::default(),
            horizon: crate::forecast::DEFAULT_HORIZON,
        }
    }
}

/// Collects the files a command writes, all inside one directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Loads either a trade CSV (filtered with `criteria`) or a `date,value`
/// series file, returning a gap-free daily series of at least two points.
pub fn load_series(path: &Path, criteria: Option<&FilterCriteria>, target: Target) -> Result<DailySeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let series = if is_series_header(&String::from_utf8_lossy(first_line)) {
        info!("{}: reading date,value series", path.display());
        DailySeries::read_csv(bytes.as_slice(), target)?
    } else {
        let criteria = criteria.ok_or_else(|| {
            Error::Usage(format!(
                "{} is trade data; --direction is required to select a slice",
                path.display()
            ))
        })?;
        let parsed = parse_csv(bytes.as_slice())?;
        for row in parsed.rejected.iter().take(10) {
            warn!("{}:{}: skipped malformed row: {}", path.display(), row.line, row.reason);
        }
        if parsed.rejected.len() > 10 {
            warn!("{} more malformed rows skipped", parsed.rejected.len() - 10);
        }
        if let Some((start, end)) = parsed.span() {
            info!("{} records from {start} to {end}", parsed.records.len());
        }
        let slice = filter_records(&parsed.records, criteria)?;
        let points = build_daily_series(&slice, target)?;
        calendarize(&points, target)?
    };
    series.ensure_usable()?;
    if target == Target::Cumulative {
        let drops = series.cumulative_drops();
        if let Some(first) = drops.first() {
            warn!(
                "cumulative series decreases within a year on {} day(s), first {first}",
                drops.len()
            );
        }
    }
    Ok(series)
}

/// Scaled train/test partitions and their supervised windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scaler: ScalerParams,
    pub split_index: usize,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

/// Splits, fits the scaler over `scope`, scales and windows each partition.
pub fn prepare(series: &DailySeries, train_fraction: f64, lookback: usize, scope: FitScope) -> Result<Prepared> {
    let spec = SplitSpec::new(train_fraction)?;
    let (train, _) = split_values(&series.values, &spec)?;
    let fit_on = match scope {
        FitScope::TrainOnly => train,
        FitScope::FullSeries => series.values.as_slice(),
    };
    let scaler = fit_scaler(fit_on, scope)?;
    prepare_with_scaler(series, train_fraction, lookback, scaler)
}

/// As [`prepare`], reusing an existing scaler.
pub fn prepare_with_scaler(
    series: &DailySeries,
    train_fraction: f64,
    lookback: usize,
    scaler: ScalerParams,
) -> Result<Prepared> {
    let spec = SplitSpec::new(train_fraction)?;
    let (train, test) = split_values(&series.values, &spec)?;
    Ok(Prepared {
        scaler,
        split_index: train.len(),
        train: make_windows(&scale(train, &scaler), lookback)?,
        test: make_windows(&scale(test, &scaler), lookback)?,
    })
}

pub struct Trained {
    pub model_file: ModelFile,
    pub report: TrainReport,
    pub prepared: Prepared,
}

pub fn train(series: &DailySeries, settings: &RunSettings) -> Result<Trained> {
    let prepared = prepare(
        series,
        settings.config.train_fraction,
        settings.lookback,
        settings.fit_scope,
    )?;
    let initial = init_model(
        &LayerSpec::default_stack(),
        prepared.scaler,
        settings.lookback,
        settings.config.seed,
    )?;
    info!(
        "training {} parameters on {} samples ({} test) for {} epochs",
        initial.param_count(),
        prepared.train.len(),
        prepared.test.len(),
        settings.config.epochs
    );
    let started = Instant::now();
    let (model, mut report) = train_model(&initial, &prepared.train, &prepared.test, &settings.config)?;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    if let (Some(first), Some(last)) = (report.epoch_losses.first(), report.epoch_losses.last()) {
        info!(
            "epoch loss {first:.6} -> {last:.6}; test loss {:.6}",
            report.final_test_loss
        );
    }
    Ok(Trained {
        model_file: ModelFile {
            model,
            train_config: settings.config,
        },
        report,
        prepared,
    })
}

pub fn write_training_outputs(out: &mut OutputDir, trained: &Trained) -> Result<()> {
    out.write("model.json", trained.model_file.to_json()?.as_bytes())?;
    out.write(
        "train_report.json",
        TrainReportFile::from(&trained.report).to_json()?.as_bytes(),
    )?;
    let mut losses = Vec::new();
    write_epoch_losses_csv(&trained.report.epoch_losses, &mut losses)?;
    out.write("epoch_losses.csv", &losses)?;
    Ok(())
}

/// Teacher-forced predictions for one partition in original units, paired
/// with the true values and their dates.
pub struct Overlay {
    pub truth: Series,
    pub predicted: Series,
}

fn overlay(
    model: &Model,
    series: &DailySeries,
    dataset: &WindowedDataset,
    first_target_index: usize,
    roles: (ColorRole, ColorRole),
) -> Result<Overlay> {
    let predicted = inverse_scale(&predict_one_step_series(model, dataset)?, model.scaler());
    let dates: Vec<_> = (0..dataset.len())
        .map(|k| series.date_at(first_target_index + k))
        .collect();
    let truth = series.values[first_target_index..first_target_index + dataset.len()].to_vec();
    Ok(Overlay {
        truth: Series::new(roles.0.as_str(), roles.0, dates.clone(), truth),
        predicted: Series::new(roles.1.as_str(), roles.1, dates, predicted),
    })
}

pub fn overlays(model: &Model, series: &DailySeries, prepared: &Prepared) -> Result<(Overlay, Overlay)> {
    let lookback = model.lookback();
    let train = overlay(
        model,
        series,
        &prepared.train,
        lookback,
        (ColorRole::TrainTrue, ColorRole::TrainPred),
    )?;
    let test = overlay(
        model,
        series,
        &prepared.test,
        prepared.split_index + lookback,
        (ColorRole::TestTrue, ColorRole::TestPred),
    )?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub rmse_original_units: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

/// Re-derives the train/test windows of `series` with the model's own scaler
/// and split fraction and scores the model on both.
pub fn evaluate(model_file: &ModelFile, series: &DailySeries) -> Result<Evaluation> {
    let model = &model_file.model;
    let prepared = prepare_with_scaler(
        series,
        model_file.train_config.train_fraction,
        model.lookback(),
        *model.scaler(),
    )?;
    let (_, test) = overlays(model, series, &prepared)?;
    Ok(Evaluation {
        final_train_loss: evaluate_loss(model, &prepared.train)?,
        final_test_loss: evaluate_loss(model, &prepared.test)?,
        rmse_original_units: rmse(&test.predicted.values, &test.truth.values)?,
        train_samples: prepared.train.len(),
        test_samples: prepared.test.len(),
    })
}

pub fn figure_title(direction: Option<Direction>, target: Target, what: &str) -> String {
    let subject = direction.map_or("Series", Direction::as_str);
    let target = match target {
        Target::Cumulative => "cumulative",
        Target::DailyValue => "daily",
    };
    format!("{subject}: {what} ({target} values)")
}

pub fn render_figures(
    out: &mut OutputDir,
    train: &Overlay,
    test: &Overlay,
    history: &DailySeries,
    forecast: &ForecastResult,
    direction: Option<Direction>,
) -> Result<()> {
    let overlay_spec = PlotSpec::new(
        figure_title(direction, history.target, "true and predicted, train and test"),
        vec![
            train.truth.clone(),
            train.predicted.clone(),
            test.truth.clone(),
            test.predicted.clone(),
        ],
    );
    let mut svg = Vec::new();
    emit_svg_lines(&overlay_spec, &mut svg)?;
    out.write("fig_overlay.svg", &svg)?;

    let forecast_spec = PlotSpec::new(
        figure_title(direction, history.target, &format!("{}-day forecast", forecast.horizon)),
        vec![
            Series::new(
                "observed",
                ColorRole::TrainTrue,
                history.dates().collect(),
                history.values.clone(),
            ),
            Series::new(
                "forecast",
                ColorRole::Forecast,
                forecast.dates().collect(),
                forecast.original_values.clone(),
            ),
        ],
    );
    let mut svg = Vec::new();
    emit_svg_lines(&forecast_spec, &mut svg)?;
    out.write("fig_forecast.svg", &svg)?;
    Ok(())
}

/// Reproducibility record written before training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub input_path: String,
    pub direction: Option<Direction>,
    pub country: Option<String>,
    pub commodity: Option<String>,
    pub transport_mode: Option<String>,
    pub measure: Option<String>,
    pub target: Target,
    pub lookback: usize,
    pub fit_scope: String,
    pub config: TrainConfigFile,
    pub horizon: usize,
    pub output_directory: String,
    pub created_at: String,
    pub artifact_versions: String,
}

impl RunManifest {
    pub fn new(input: &Path, settings: &RunSettings, out: &Path) -> Self {
        let c = settings.criteria.as_ref();
        Self {
            input_path: input.display().to_string(),
            direction: c.map(|c| c.direction),
            country: c.map(|c| c.country.clone()),
            commodity: c.map(|c| c.commodity.clone()),
            transport_mode: c.map(|c| c.transport_mode.clone()),
            measure: c.map(|c| c.measure.clone()),
            target: settings.target,
            lookback: settings.lookback,
            fit_scope: settings.fit_scope.as_str().into(),
            config: (&settings.config).into(),
            horizon: settings.horizon,
            output_directory: out.display().to_string(),
            created_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            artifact_versions: format!("tradecast {}", env!("CARGO_PKG_VERSION")),
        }
    }

    pub fn settings(&self) -> Result<RunSettings> {
        let criteria = match self.direction {
            None => None,
            Some(direction) => {
                let all = FilterCriteria::all(direction);
                Some(FilterCriteria {
                    direction,
                    country: self.country.clone().unwrap_or(all.country),
                    commodity: self.commodity.clone().unwrap_or(all.commodity),
                    transport_mode: self.transport_mode.clone().unwrap_or(all.transport_mode),
                    measure: self.measure.clone().unwrap_or(all.measure),
                })
            }
        };
        let fit_scope = FitScope::parse(&self.fit_scope)
            .ok_or_else(|| Error::Usage(format!("manifest: unknown fit_scope `{}`", self.fit_scope)))?;
        Ok(RunSettings {
            criteria,
            target: self.target,
            lookback: self.lookback,
            fit_scope,
            config: (&self.config).into(),
            horizon: self.horizon,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_string_sorted(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("manifest {}: {e}", path.display())))
    }
}

/// Full pipeline; writes every artifact into `out`.
pub fn run_all(input: &Path, settings: &RunSettings, out: &mut OutputDir) -> Result<RunSummary> {
    let direction = settings
        .criteria
        .as_ref()
        .map(|c| c.direction)
        .ok_or_else(|| Error::Usage("run-all requires --direction".into()))?;
    settings.config.validate()?;

    let series = load_series(input, settings.criteria.as_ref(), settings.target)?;
    info!(
        "series: {} days from {} to {}",
        series.len(),
        series.start_date,
        series.end_date()
    );
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    out.write("series.csv", &buf)?;

    let manifest = RunManifest::new(input, settings, out.path());
    out.write("manifest.json", manifest.to_json()?.as_bytes())?;

    let trained = train(&series, settings)?;
    write_training_outputs(out, &trained)?;
    let model = &trained.model_file.model;

    let (train_overlay, test_overlay) = overlays(model, &series, &trained.prepared)?;
    for (name, o) in [
        ("overlay_train.csv", &train_overlay),
        ("overlay_test.csv", &test_overlay),
    ] {
        let mut buf = Vec::new();
        emit_series_csv(&[o.truth.clone(), o.predicted.clone()], &mut buf)?;
        out.write(name, &buf)?;
    }

    let forecast = ForecastResult::from_series(model, &series, settings.horizon)?;
    let mut buf = Vec::new();
    forecast.write_csv(&mut buf)?;
    out.write("forecast.csv", &buf)?;

    let last_scaled = model.scaler().scale_one(*series.values.last().expect("usable series"));
    let seed_window = scale(&series.values[series.len() - model.lookback()..], model.scaler());
    let drift = drift_trace(&seed_window, &forecast.scaled_values);
    let (highest_loss, lowest_loss) = loss_summary(&trained.report.epoch_losses).unwrap_or((f64::NAN, f64::NAN));
    let summary = RunSummary {
        direction,
        highest_loss,
        lowest_loss,
        final_train_loss: trained.report.final_train_loss,
        final_test_loss: trained.report.final_test_loss,
        rmse_original_units: rmse(&test_overlay.predicted.values, &test_overlay.truth.values)?,
        data_span: DataSpan {
            start: series.start_date,
            end: series.end_date(),
        },
        forecast_horizon: settings.horizon,
        fixed_point_gap: fixed_point_gap(model, last_scaled)?,
        max_forecast_drift: drift.iter().copied().fold(0.0, f64::max),
    };
    info!(
        "fixed-point gap {:.3e}, largest forecast step {:.3e}",
        summary.fixed_point_gap, summary.max_forecast_drift
    );
    out.write("run_summary.json", summary.to_json()?.as_bytes())?;

    render_figures(out, &train_overlay, &test_overlay, &series, &forecast, Some(direction))?;
    Ok(summary)
}

/// Re-renders the run's figures from its CSVs and adds a forecast-only chart.
pub fn plot_run(run_dir: &Path, out: &mut OutputDir) -> Result<()> {
    let read = |name: &str| -> Result<Vec<u8>> {
        let path = run_dir.join(name);
        fs::read(&path).map_err(|e| Error::io(path, e))
    };
    let manifest = RunManifest::load(&run_dir.join("manifest.json")).ok();
    let direction = manifest.as_ref().and_then(|m| m.direction);
    let target = manifest.as_ref().map_or(Target::Cumulative, |m| m.target);

    let pair = |name: &str, role: ColorRole| -> Result<Overlay> {
        let mut cols = read_series_csv(read(name)?.as_slice(), role)?.into_iter();
        match (cols.next(), cols.next()) {
            (Some(truth), Some(predicted)) => Ok(Overlay { truth, predicted }),
            _ => Err(Error::BadSeries(format!("{name}: expected two series columns"))),
        }
    };
    let train = pair("overlay_train.csv", ColorRole::TrainTrue)?;
    let test = pair("overlay_test.csv", ColorRole::TestTrue)?;
    let history = DailySeries::read_csv(read("series.csv")?.as_slice(), target)?;
    let forecast = ForecastResult::read_csv(read("forecast.csv")?.as_slice())?;
    render_figures(out, &train, &test, &history, &forecast, direction)?;

    // The forecast on its own axis, where a flat trajectory is easy to see.
    let alone = PlotSpec::new(
        figure_title(
            direction,
            target,
            &format!("{}-day forecast trajectory", forecast.horizon),
        ),
        vec![Series::new(
            "forecast",
            ColorRole::Forecast,
            forecast.dates().collect(),
            forecast.original_values.clone(),
        )],
    );
    let mut svg = Vec::new();
    emit_svg_lines(&alone, &mut svg)?;
    out.write("fig_forecast_only.svg", &svg)?;
    Ok(())
}
