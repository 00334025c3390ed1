//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on data or model errors, 2 on usage errors.
//! Diagnostics go to stderr; stdout carries only the paths of written files.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::builder::RangedU64ValueParser;
use clap::{Args, Parser, Subcommand};
use log::info;
use tradecast_core::{FitScope, TrainConfig};

use crate::config::ConfigOverrides;
use crate::forecast::{ForecastResult, DEFAULT_HORIZON};
use crate::ingest::{Direction, FilterCriteria, Target};
use crate::json::to_string_sorted;
use crate::model_file::ModelFile;
use crate::pipeline::{self, OutputDir, RunManifest, RunSettings};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "tradecast",
    version,
    about = "Forecast daily trade values with a small stacked LSTM"
)]
pub struct Cli {
    /// Seed for weight initialization and shuffling.
    #[arg(long, global = true, env = "TRADE_FORECAST_SEED")]
    pub seed: Option<u64>,
    /// JSON file of training settings (TrainConfig field names).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory all outputs are written to.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and filter trade data into a daily `date,value` series.
    Ingest(IngestArgs),
    /// Train a model and write model.json, train_report.json and epoch_losses.csv.
    Train(TrainArgs),
    /// Recursively forecast from the end of a series with a saved model.
    Forecast(ForecastArgs),
    /// Score a saved model on the train and test partitions of a series.
    Evaluate(EvaluateArgs),
    /// Redraw a previous run's figures from its CSVs, plus a forecast-only chart.
    Plot(PlotArgs),
    /// Run the whole pipeline and write every artifact.
    RunAll(RunAllArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SliceArgs {
    /// Trade direction (Exports, Imports, Reimports, Reexports).
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long, default_value = "All")]
    pub country: String,
    #[arg(long, default_value = "All")]
    pub commodity: String,
    #[arg(long, default_value = "All")]
    pub transport_mode: String,
    #[arg(long, default_value = "$")]
    pub measure: String,
    /// Series to model: cumulative or daily_value.
    #[arg(long, default_value = "cumulative")]
    pub target: Target,
}

impl SliceArgs {
    fn criteria(&self) -> Option<FilterCriteria> {
        self.direction.map(|direction| FilterCriteria {
            direction,
            country: self.country.clone(),
            commodity: self.commodity.clone(),
            transport_mode: self.transport_mode.clone(),
            measure: self.measure.clone(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    /// Input window length.
    #[arg(long, default_value_t = 1, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub lookback: usize,
    /// Fit the scaler on the training partition or the whole series.
    #[arg(long, default_value = "train-only", value_parser = parse_fit_scope)]
    pub fit_scope: FitScope,
    /// Passes over the training samples [default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam step size [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Share of the series used for training [default: 0.7].
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Samples per optimizer step [default: 1].
    #[arg(long, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub batch_size: Option<usize>,
    /// Shuffle training samples each epoch.
    #[arg(long)]
    pub shuffle: bool,
    /// Carry LSTM state between consecutive training samples.
    #[arg(long)]
    pub stateful: bool,
}

fn parse_fit_scope(s: &str) -> std::result::Result<FitScope, String> {
    FitScope::parse(s).ok_or_else(|| format!("expected train-only or full-series, got `{s}`"))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Trade CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub slice: SliceArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Trade CSV, or a `date,value` series from `ingest`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub slice: SliceArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// model.json written by `train` or `run-all`.
    #[arg(long)]
    pub model: PathBuf,
    /// Series to continue; the forecast starts the day after its last date.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub slice: SliceArgs,
    /// Days to forecast.
    #[arg(long, default_value_t = DEFAULT_HORIZON, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The series the model was trained on.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub slice: SliceArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory holding a previous run's CSVs (defaults to --out).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunAllArgs {
    /// Trade CSV, or a `date,value` series from `ingest`.
    #[arg(long, required_unless_present = "manifest")]
    pub input: Option<PathBuf>,
    /// Repeat a previous run from its manifest.json.
    #[arg(long, conflicts_with = "input")]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub slice: SliceArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Days to forecast.
    #[arg(long, default_value_t = DEFAULT_HORIZON, value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub horizon: usize,
}

pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

impl Cli {
    fn out_dir(&self) -> Result<OutputDir> {
        let out = self
            .out
            .as_ref()
            .ok_or_else(|| Error::Usage("missing required flag --out <DIR>".into()))?;
        OutputDir::create(out)
    }

    /// Defaults, then the config file, then flags (seed: flag or
    /// `TRADE_FORECAST_SEED`, then config file).
    fn train_config(&self, training: &TrainingArgs) -> Result<TrainConfig> {
        let mut config = TrainConfig::default();
        if let Some(path) = &self.config {
            config = ConfigOverrides::load(path)?.apply(config);
        }
        let flags = ConfigOverrides {
            train_fraction: training.train_fraction,
            batch_size: training.batch_size,
            epochs: training.epochs,
            learning_rate: training.learning_rate,
            shuffle: training.shuffle.then_some(true),
            stateful: training.stateful.then_some(true),
            seed: self.seed,
            ..ConfigOverrides::default()
        };
        let config = flags.apply(config);
        config.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(config)
    }

    fn settings(&self, slice: &SliceArgs, training: &TrainingArgs, horizon: usize) -> Result<RunSettings> {
        Ok(RunSettings {
            criteria: slice.criteria(),
            target: slice.target,
            lookback: training.lookback,
            fit_scope: training.fit_scope,
            config: self.train_config(training)?,
            horizon,
        })
    }
}

fn require_direction(slice: &SliceArgs, command: &str) -> Result<()> {
    if slice.direction.is_none() {
        return Err(Error::Usage(format!("{command} requires --direction <DIRECTION>")));
    }
    Ok(())
}

/// Runs a parsed command and returns the paths it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Ingest(args) => {
            require_direction(&args.slice, "ingest")?;
            let mut out = cli.out_dir()?;
            let series = pipeline::load_series(&args.input, args.slice.criteria().as_ref(), args.slice.target)?;
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            out.write("series.csv", &buf)?;
            Ok(out.into_written())
        }
        Command::Train(args) => {
            let settings = cli.settings(&args.slice, &args.training, DEFAULT_HORIZON)?;
            let mut out = cli.out_dir()?;
            let series = pipeline::load_series(&args.input, settings.criteria.as_ref(), settings.target)?;
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            out.write("series.csv", &buf)?;
            let manifest = RunManifest::new(&args.input, &settings, out.path());
            out.write("manifest.json", manifest.to_json()?.as_bytes())?;
            let trained = pipeline::train(&series, &settings)?;
            pipeline::write_training_outputs(&mut out, &trained)?;
            Ok(out.into_written())
        }
        Command::Forecast(args) => {
            let model_file = ModelFile::load(&args.model)?;
            let mut out = cli.out_dir()?;
            let series = pipeline::load_series(&args.input, args.slice.criteria().as_ref(), args.slice.target)?;
            let forecast = ForecastResult::from_series(&model_file.model, &series, args.horizon)?;
            info!(
                "forecast {} days from {}: last value {}",
                forecast.horizon,
                forecast.start_date,
                forecast.original_values.last().copied().unwrap_or(f64::NAN)
            );
            let mut buf = Vec::new();
            forecast.write_csv(&mut buf)?;
            out.write("forecast.csv", &buf)?;
            Ok(out.into_written())
        }
        Command::Evaluate(args) => {
            let model_file = ModelFile::load(&args.model)?;
            let mut out = cli.out_dir()?;
            let series = pipeline::load_series(&args.input, args.slice.criteria().as_ref(), args.slice.target)?;
            let evaluation = pipeline::evaluate(&model_file, &series)?;
            info!(
                "train loss {:.6e}, test loss {:.6e}, test RMSE {:.6e}",
                evaluation.final_train_loss, evaluation.final_test_loss, evaluation.rmse_original_units
            );
            out.write("evaluation.json", to_string_sorted(&evaluation)?.as_bytes())?;
            Ok(out.into_written())
        }
        Command::Plot(args) => {
            let mut out = cli.out_dir()?;
            let run_dir = args.run_dir.clone().unwrap_or_else(|| out.path().to_path_buf());
            pipeline::plot_run(&run_dir, &mut out)?;
            Ok(out.into_written())
        }
        Command::RunAll(args) => {
            let (input, settings, out_path) = match &args.manifest {
                Some(path) => {
                    let manifest = RunManifest::load(path)?;
                    let out = cli
                        .out
                        .clone()
                        .unwrap_or_else(|| PathBuf::from(&manifest.output_directory));
                    (PathBuf::from(&manifest.input_path), manifest.settings()?, out)
                }
                None => {
                    require_direction(&args.slice, "run-all")?;
                    let input = args.input.clone().expect("clap enforces --input");
                    let out = cli
                        .out
                        .clone()
                        .ok_or_else(|| Error::Usage("missing required flag --out <DIR>".into()))?;
                    (input, cli.settings(&args.slice, &args.training, args.horizon)?, out)
                }
            };
            let mut out = OutputDir::create(&out_path)?;
            pipeline::run_all(&input, &settings, &mut out)?;
            Ok(out.into_written())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        parse_args(std::iter::once("tradecast").chain(args.iter().copied()))
    }

    #[test]
    fn run_all_defaults() {
        let cli = parse(&[
            "run-all",
            "--input",
            "trade.csv",
            "--direction",
            "Exports",
            "--out",
            "results",
        ])
        .unwrap();
        assert_eq!(cli.out, Some(PathBuf::from("results")));
        let Command::RunAll(args) = &cli.command else { panic!() };
        assert_eq!(args.horizon, 180);
        assert_eq!(args.slice.target, Target::Cumulative);
        assert_eq!(args.slice.direction, Some(Direction::Exports));
        let settings = cli.settings(&args.slice, &args.training, args.horizon).unwrap();
        assert_eq!(settings.lookback, 1);
        assert_eq!(settings.fit_scope, FitScope::TrainOnly);
        let c = settings.config;
        assert_eq!((c.train_fraction, c.batch_size, c.epochs), (0.7, 1, 100));
        assert_eq!(settings.criteria, Some(FilterCriteria::all(Direction::Exports)));
    }

    #[test]
    fn train_without_input_names_the_flag() {
        let err = parse(&["train"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--input"));
    }

    #[test]
    fn zero_horizon_is_a_usage_error() {
        let err = parse(&["forecast", "--horizon", "0"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("horizon") || err.to_string().contains("0"));
        let err = parse(&["forecast", "--model", "m.json", "--input", "s.csv", "--horizon", "0"]).unwrap_err();
        assert!(err.to_string().contains("--horizon"));
    }

    #[test]
    fn unknown_flags_are_rejected() {
        let err = parse(&["run-all", "--input", "x", "--direction", "Exports", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(parse(&["predict"]).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"epochs": 7, "learning_rate": 0.01, "seed": 3}"#).unwrap();
        let p = path.to_str().unwrap();
        let cli = parse(&["--config", p, "train", "--input", "x", "--epochs", "9"]).unwrap();
        let Command::Train(args) = &cli.command else { panic!() };
        let c = cli.train_config(&args.training).unwrap();
        assert_eq!((c.epochs, c.learning_rate), (9, 0.01));
        // No --seed flag here; the seed comes from the config file unless the
        // environment supplies one.
        if std::env::var_os("TRADE_FORECAST_SEED").is_none() {
            assert_eq!(c.seed, 3);
        }
        let cli = parse(&["--seed", "11", "--config", p, "train", "--input", "x"]).unwrap();
        let Command::Train(args) = &cli.command else { panic!() };
        assert_eq!(cli.train_config(&args.training).unwrap().seed, 11);
    }

    #[test]
    fn invalid_hyperparameters_are_usage_errors() {
        let cli = parse(&["train", "--input", "x", "--train-fraction", "1.5"]).unwrap();
        let Command::Train(args) = &cli.command else { panic!() };
        assert!(matches!(cli.train_config(&args.training), Err(Error::Usage(_))));
    }

    #[test]
    fn missing_out_is_a_usage_error() {
        let cli = parse(&["ingest", "--input", "x", "--direction", "Imports"]).unwrap();
        let err = execute(&cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cli = parse(&["ingest", "--input", "x", "--out", "o"]).unwrap();
        assert_eq!(execute(&cli).unwrap_err().exit_code(), 2);
    }
}
