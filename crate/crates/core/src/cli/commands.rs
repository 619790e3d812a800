use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::export::export_forecast;
use crate::data::{load_dataset, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::eval::{rolling_window_evaluate, EvalReport, ModelForecaster, SeasonalNaive, Standardizer};
use crate::forecast::{monte_carlo_forecast, ExogenousKind, ExogenousSpec, ExogenousVariable, ForecastOptions};
use crate::model::{init_params, load_checkpoint, save_checkpoint, Checkpoint, ModelParams};
use crate::tensor::Tensor;
use crate::train::{loss_history_csv, train_from};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Train,
    Forecast,
    Evaluate,
    Relevance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub verb: Verb,
    pub config: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Invocation {
    pub fn new(verb: Verb, config: impl Into<PathBuf>) -> Self {
        Self {
            verb,
            config: config.into(),
            checkpoint: None,
            seed: None,
            out: None,
        }
    }
}

/// Everything a command needs, validated before any computation or output.
struct Prepared {
    config: RunConfig,
    out: PathBuf,
    checkpoint: PathBuf,
    hash: String,
}

fn prepare(inv: &Invocation) -> Result<Prepared> {
    let mut config = RunConfig::load(&inv.config)?;
    if let Some(seed) = inv.seed {
        config.seed = seed;
    }
    if let Some(out) = &inv.out {
        config.output_dir = out.clone();
    }
    let out = config.output_dir.clone();
    let checkpoint = inv.checkpoint.clone().unwrap_or_else(|| out.join("checkpoint.json"));
    let hash = config.hash();
    Ok(Prepared { config, out, checkpoint, hash })
}

fn load_data(config: &RunConfig) -> Result<TimeSeriesDataset> {
    load_dataset(&config.data.path, &config.data.time_features)
}

fn read_checkpoint(path: &Path) -> Result<(Checkpoint, ModelParams)> {
    if !path.exists() {
        return Err(Error::Usage(format!(
            "checkpoint {} not found; run `train` first or pass --checkpoint",
            path.display()
        )));
    }
    let ckpt = load_checkpoint(path)?;
    let params = ckpt.params()?;
    Ok((ckpt, params))
}

fn check_names(ckpt: &Checkpoint, data: &TimeSeriesDataset) -> Result<()> {
    if ckpt.target_names != data.target_names || ckpt.exogenous_names != data.exogenous_names {
        return Err(Error::Usage(format!(
            "dataset columns {:?} / {:?} do not match the checkpoint's {:?} / {:?}",
            data.target_names, data.exogenous_names, ckpt.target_names, ckpt.exogenous_names
        )));
    }
    Ok(())
}

fn scale(scaler: &Option<Standardizer>, t: &Tensor) -> Result<Tensor> {
    match scaler {
        Some(s) => s.transform(t),
        None => Ok(t.clone()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn train_rows(config: &RunConfig, data: &TimeSeriesDataset) -> Result<usize> {
    let rows = config.data.train_rows.unwrap_or(data.train_len());
    if rows > data.train_len() {
        return Err(Error::Config(format!(
            "data.train_rows = {rows} exceeds the {} observed rows",
            data.train_len()
        )));
    }
    Ok(rows)
}

/// Exogenous distribution over `centers` (`[tau x D]`, standardized) with
/// the configured uncertain variables.
fn exogenous_spec(config: &RunConfig, names: &[String], centers: &Tensor) -> Result<ExogenousSpec> {
    let horizon = centers.rows();
    let mut spec = ExogenousSpec::known(centers)?;
    for u in &config.forecast.exogenous {
        let d = names
            .iter()
            .position(|n| *n == u.name)
            .ok_or_else(|| Error::Config(format!("forecast.exogenous: unknown variable `{}`", u.name)))?;
        spec.variables[d] = ExogenousVariable {
            kind: ExogenousKind::Gaussian,
            center: spec.variables[d].center.clone(),
            std: u.schedule_values(horizon),
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn check_uncertain_names(config: &RunConfig, names: &[String]) -> Result<()> {
    match config.forecast.exogenous.iter().find(|u| !names.contains(&u.name)) {
        Some(u) => Err(Error::Config(format!("forecast.exogenous: unknown variable `{}`", u.name))),
        None => Ok(()),
    }
}

/// Runs one verb, writing artifacts under the output directory and a
/// human-readable summary to `stdout`.
pub fn run_command(inv: &Invocation, stdout: &mut dyn Write) -> Result<()> {
    let prepared = prepare(inv)?;
    match inv.verb {
        Verb::Train => train_command(&prepared, stdout),
        Verb::Forecast => forecast_command(&prepared, stdout),
        Verb::Evaluate => evaluate_command(&prepared, stdout),
        Verb::Relevance => relevance_command(&prepared, stdout),
    }
}

fn say(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn train_command(p: &Prepared, stdout: &mut dyn Write) -> Result<()> {
    let config = &p.config;
    let data = load_data(config)?;
    let rows = train_rows(config, &data)?;
    let x = data.x.slice_rows(0, rows)?;
    let u = data.u.slice_rows(0, rows)?;
    if data.exogenous_names.is_empty() {
        return Err(Error::Config("the model needs at least one exogenous column or time feature".into()));
    }
    let train_config = config.train.train_config(config.seed);
    if train_config.window > rows {
        return Err(Error::Config(format!(
            "train.window = {} exceeds the {rows} training rows",
            train_config.window
        )));
    }
    check_uncertain_names(config, &data.exogenous_names)?;
    let target_scaling = Standardizer::fit(&x)?;
    let exogenous_scaling = Standardizer::fit_allow_constant(&u)?;
    let model_config = config.model.model_config(x.cols(), u.cols());
    model_config.validate()?;
    let x = target_scaling.transform(&x)?;
    let u = exogenous_scaling.transform(&u)?;

    let wrap = |params: &ModelParams| {
        let mut c = Checkpoint::new(params);
        c.target_names = data.target_names.clone();
        c.exogenous_names = data.exogenous_names.clone();
        c.target_scaling = Some(target_scaling.clone());
        c.exogenous_scaling = Some(exogenous_scaling.clone());
        c
    };

    create_dir(&p.out)?;
    let initial = init_params(&model_config, config.seed)?;
    let outcome = train_from(initial, &x, &u, &train_config, |iteration, params| {
        save_checkpoint(p.out.join(format!("checkpoint-{iteration}.json")), &wrap(params))
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(Error::Diverged { iteration, message, last_good }) => {
            let path = p.out.join("checkpoint-last-good.json");
            save_checkpoint(&path, &wrap(&last_good))?;
            return Err(Error::Diverged {
                iteration,
                message: format!("{message}; parameters before the failing step saved to {}", path.display()),
                last_good,
            });
        }
        Err(e) => return Err(e),
    };
    save_checkpoint(&p.checkpoint, &wrap(&outcome.params))?;
    let loss_path = p.out.join("loss.csv");
    write_file(&loss_path, &loss_history_csv(&outcome.losses))?;
    let last = outcome.losses.last().map_or("n/a".to_string(), |l| format!("{l:.6}"));
    say(
        stdout,
        &format!(
            "trained {} parameters for {} iterations on {rows} rows (final loss {last})\ncheckpoint: {}\nloss history: {}\n",
            outcome.params.parameter_count(),
            outcome.losses.len(),
            p.checkpoint.display(),
            loss_path.display()
        ),
    )
}

fn forecast_command(p: &Prepared, stdout: &mut dyn Write) -> Result<()> {
    let config = &p.config;
    let (ckpt, params) = read_checkpoint(&p.checkpoint)?;
    let data = load_data(config)?;
    check_names(&ckpt, &data)?;
    check_uncertain_names(config, &data.exogenous_names)?;
    let t = data.train_len();
    let horizon = config.forecast.horizon.unwrap_or(data.horizon_capacity());
    if horizon == 0 || horizon > data.horizon_capacity() {
        return Err(Error::Config(format!(
            "forecast horizon {horizon} needs exogenous rows past the last target; the dataset has {}",
            data.horizon_capacity()
        )));
    }
    let x = scale(&ckpt.target_scaling, &data.x)?;
    let u = scale(&ckpt.exogenous_scaling, &data.u)?;
    let spec = exogenous_spec(config, &data.exogenous_names, &u.slice_rows(t, t + horizon)?)?;
    let options = ForecastOptions {
        trials: config.forecast.trials,
        seed: config.seed,
        levels: config.forecast.levels.clone(),
        chunk_size: config.forecast.chunk_size,
        parallel: config.forecast.parallel,
    };
    let result = monte_carlo_forecast(&params, &x, &u.slice_rows(0, t)?, &spec, &options)?;
    let timestamps: Vec<String> = (t..t + horizon)
        .map(|i| data.timestamp_at(i).map_or(String::new(), |ts| ts.to_string()))
        .collect();
    let scaler = if config.forecast.standardized_output { None } else { ckpt.target_scaling.as_ref() };
    create_dir(&p.out)?;
    let (csv, json) = export_forecast(&result, scaler, &data.target_names, &timestamps, &p.hash, &p.out, "forecast")?;
    say(
        stdout,
        &format!(
            "forecast {horizon} steps from row {t} with {} trials\nquantiles: {}\nmetadata: {}\n",
            result.trials(),
            csv.display(),
            json.display()
        ),
    )
}

fn evaluate_command(p: &Prepared, stdout: &mut dyn Write) -> Result<()> {
    let config = &p.config;
    let (ckpt, params) = read_checkpoint(&p.checkpoint)?;
    let data = load_data(config)?;
    check_names(&ckpt, &data)?;
    check_uncertain_names(config, &data.exogenous_names)?;
    let e = &config.evaluate;
    let origin = config
        .data
        .train_rows
        .ok_or_else(|| Error::Config("evaluate needs data.train_rows to mark the first forecast origin".into()))?;
    let required = origin + e.windows * e.horizon;
    if required > data.train_len() {
        return Err(Error::Config(format!(
            "evaluation needs {required} observed rows ({origin} + {} x {}), the dataset has {}",
            e.windows,
            e.horizon,
            data.train_len()
        )));
    }
    if let Some(period) = e.baseline_period {
        if period > origin {
            return Err(Error::Config(format!("evaluate.baseline_period {period} exceeds the {origin} history rows")));
        }
    }
    let x = scale(&ckpt.target_scaling, &data.x)?;
    let u = scale(&ckpt.exogenous_scaling, &data.u)?;
    let options = ForecastOptions {
        trials: e.trials,
        seed: config.seed,
        levels: vec![0.5],
        chunk_size: config.forecast.chunk_size,
        parallel: config.forecast.parallel,
    };
    let names = data.exogenous_names.clone();
    let model = ModelForecaster {
        params: &params,
        options,
        exogenous: Box::new(move |centers| exogenous_spec(config, &names, centers)),
    };
    create_dir(&p.out)?;
    let mut reports = vec![("evaluation.csv", rolling_window_evaluate(&model, &x, &u, origin, e.horizon, e.windows)?)];
    if let Some(period) = e.baseline_period {
        let baseline = SeasonalNaive { period, trials: e.trials, seed: config.seed };
        reports.push((
            "evaluation-baseline.csv",
            rolling_window_evaluate(&baseline, &x, &u, origin, e.horizon, e.windows)?,
        ));
    }
    for (file, report) in &mut reports {
        report.seed = Some(config.seed);
        report.config_hash = Some(p.hash.clone());
        write_file(&p.out.join(*file), &report.to_csv())?;
        say(stdout, &report.summary_table())?;
        say(stdout, "\n")?;
    }
    if let [(_, model), (_, baseline)] = reports.as_slice() {
        say(stdout, &skill_line(model, baseline))?;
    }
    Ok(())
}

fn skill_line(model: &EvalReport, baseline: &EvalReport) -> String {
    format!(
        "CRPS relative to {}: {:+.1}%\n",
        baseline.forecaster,
        100.0 * (model.mean() / baseline.mean() - 1.0)
    )
}

fn relevance_command(p: &Prepared, stdout: &mut dyn Write) -> Result<()> {
    let (ckpt, params) = read_checkpoint(&p.checkpoint)?;
    let weights = params
        .relevance()?
        .ok_or_else(|| Error::Usage("the checkpoint's model has no relevance network (use_ard = false)".into()))?;
    let names: Vec<String> = if ckpt.exogenous_names.len() == weights.len() {
        ckpt.exogenous_names.clone()
    } else {
        (0..weights.len()).map(|d| format!("u{d}")).collect()
    };
    let mut table: Vec<(String, f64)> = names.into_iter().zip(weights).collect();
    table.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut csv = String::from("variable,weight\n");
    let mut text = format!("{:<24} {:>12}\n", "variable", "weight");
    for (name, w) in &table {
        csv.push_str(&format!("{name},{w:.16e}\n"));
        text.push_str(&format!("{name:<24} {w:>12.6}\n"));
    }
    create_dir(&p.out)?;
    write_file(&p.out.join("relevance.csv"), &csv)?;
    say(stdout, &text)
}
