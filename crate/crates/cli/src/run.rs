//! Command orchestration and artifact writing.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use notmf_core::eval::{
    grid_search, make_synthetic, score, write_score_table, Split, SyntheticSpec,
};
use notmf_core::{
    archive, fit, forecast_observations, rolling_forecast, MaskedMatrix, ModelConfig,
};

use crate::args::{
    Cli, Command, DataArgs, EvalArgs, FitArgs, ForecastArgs, RollingArgs, SplitArgs, SynthArgs,
};
use crate::csvio::{load_csv, save_panel, write_panel, LabeledPanel};
use crate::error::{CliError, CliResult};

pub const MODEL_FILE: &str = "model.bin";
pub const TRACE_FILE: &str = "objective_trace.csv";
pub const FORECAST_FILE: &str = "forecast.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const SCORES_FILE: &str = "scores.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const OBSERVED_FILE: &str = "observed.csv";

/// Runs one command, reporting written artifacts on `log`.
pub fn run(cli: Cli, log: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth(&a, log),
        Command::Fit(a) => fit_cmd(&a, log),
        Command::Forecast(a) => forecast_cmd(&a, log),
        Command::Rolling(a) => rolling_cmd(&a, log),
        Command::Eval(a) => eval_cmd(&a, log),
    }
}

/// Column ranges `[0, train)`, `[train, train + val)`, and the test span
/// that follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Columns {
    pub fn resolve(split: &SplitArgs, total: usize, default_test: usize) -> CliResult<Self> {
        let test = split.test_cols.unwrap_or(default_test);
        let val = split.val_cols;
        let train = match split.train_cols {
            Some(t) => t,
            None => total.checked_sub(val + test).ok_or_else(|| {
                CliError::Usage(format!(
                    "validation ({val}) plus test ({test}) columns exceed the {total} available"
                ))
            })?,
        };
        if train == 0 || train + val + test > total {
            return Err(CliError::Usage(format!(
                "split train={train} val={val} test={test} does not fit in {total} columns"
            )));
        }
        Ok(Self { train, val, test })
    }

    /// Columns a final model is trained on: everything before the test span.
    pub fn history(&self) -> usize {
        self.train + self.val
    }
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

fn note(log: &mut dyn Write, path: &Path) {
    let _ = writeln!(log, "wrote {}", path.display());
}

/// Per-series location and scale estimated on observed history entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaling {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            sd: vec![1.0; n],
        }
    }

    pub fn estimate(data: &MaskedMatrix, history: usize) -> CliResult<Self> {
        let mut mean = Vec::with_capacity(data.n_rows());
        let mut sd = Vec::with_capacity(data.n_rows());
        for i in 0..data.n_rows() {
            let obs: Vec<f64> = data
                .row_observed(i)?
                .iter()
                .filter(|&&t| t < history)
                .map(|&t| data.values()[(i, t)])
                .collect();
            if obs.is_empty() {
                mean.push(0.0);
                sd.push(1.0);
                continue;
            }
            let mu = obs.iter().sum::<f64>() / obs.len() as f64;
            let var = obs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / obs.len() as f64;
            mean.push(mu);
            sd.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Self { mean, sd })
    }

    pub fn apply(&self, data: &MaskedMatrix) -> CliResult<MaskedMatrix> {
        let values = DMatrix::from_fn(data.n_rows(), data.n_cols(), |i, t| {
            (data.values()[(i, t)] - self.mean[i]) / self.sd[i]
        });
        Ok(MaskedMatrix::new(values, data.mask().clone())?)
    }

    pub fn invert(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(values.nrows(), values.ncols(), |i, t| {
            values[(i, t)] * self.sd[i] + self.mean[i]
        })
    }
}

fn prepare(
    data: &DataArgs,
    history: usize,
    panel: &LabeledPanel,
) -> CliResult<(MaskedMatrix, Scaling)> {
    if !data.standardize {
        return Ok((panel.data.clone(), Scaling::identity(panel.data.n_rows())));
    }
    let scaling = Scaling::estimate(&panel.data, history)?;
    Ok((scaling.apply(&panel.data)?, scaling))
}

/// Time labels for forecast columns; steps past the input reuse the last
/// label with a `+k` suffix.
fn forecast_labels(times: &[String], start: usize, count: usize) -> Vec<String> {
    let last = times.last().map(String::as_str).unwrap_or("t");
    (start..start + count)
        .map(|t| match times.get(t) {
            Some(label) => label.clone(),
            None => format!("{last}+{}", t + 1 - times.len()),
        })
        .collect()
}

fn config_echo(cfg: &ModelConfig) -> String {
    format!(
        "variant={}\nrank={}\norder={}\nseason={}\nlambda={}\nrho={}\niters={}\ncg_iters={}\ncg_tol={}\nseed={}\n",
        cfg.variant,
        cfg.rank,
        cfg.order,
        cfg.effective_season(),
        cfg.lambda,
        cfg.rho,
        cfg.outer_iters,
        cfg.cg_iters,
        cfg.cg_tol,
        cfg.seed
    )
}

/// Writes forecast.csv and metrics.txt. Forecast columns that overlap the
/// input are scored against its observed entries.
#[allow(clippy::too_many_arguments)]
fn emit_forecast(
    out_dir: &Path,
    command: &str,
    panel: &LabeledPanel,
    cfg: &ModelConfig,
    extra: &[(&str, String)],
    start: usize,
    forecast: &DMatrix<f64>,
    started: Instant,
    log: &mut dyn Write,
) -> CliResult<()> {
    let labels = forecast_labels(&panel.times, start, forecast.ncols());
    let path = out_dir.join(FORECAST_FILE);
    write_file(&path, |w| {
        write_panel(w, &panel.corner, &panel.series, &labels, forecast, None)
    })?;
    note(log, &path);

    let mut report = format!("command={command}\n");
    report += &config_echo(cfg);
    for (k, v) in extra {
        let _ = writeln!(report, "{k}={v}");
    }
    let _ = writeln!(
        report,
        "forecast_start={start}\nforecast_cols={}",
        forecast.ncols()
    );
    let available = panel
        .data
        .n_cols()
        .saturating_sub(start)
        .min(forecast.ncols());
    if available > 0 {
        let truth = panel.data.columns(start..start + available)?;
        let predicted = forecast.columns(0, available).into_owned();
        match score(&truth, &predicted) {
            Ok(r) => {
                let _ = writeln!(
                    report,
                    "mape={}\nrmse={}\nn_evaluated={}\nn_percentage={}",
                    r.mape, r.rmse, r.n_evaluated, r.n_percentage
                );
                let _ = writeln!(log, "{command}: mape={:.4} rmse={:.4}", r.mape, r.rmse);
            }
            Err(notmf_core::Error::NothingToScore) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let _ = writeln!(
        report,
        "wall_clock_seconds={}",
        started.elapsed().as_secs_f64()
    );
    let path = out_dir.join(METRICS_FILE);
    write_file(&path, |w| w.write_all(report.as_bytes()))?;
    note(log, &path);
    Ok(())
}

fn synth(a: &SynthArgs, log: &mut dyn Write) -> CliResult<()> {
    let syn = make_synthetic(&SyntheticSpec {
        n_series: a.series,
        n_steps: a.steps,
        rank: a.true_rank,
        season: a.season,
        order: a.order,
        noise_sd: a.noise,
        missing_rate: a.missing,
        seed: a.seed,
    })?;
    create_out(&a.out)?;
    let series: Vec<String> = (0..a.series).map(|i| format!("s{i}")).collect();
    let times: Vec<String> = (0..a.steps).map(|t| format!("t{t}")).collect();
    let truth = LabeledPanel {
        corner: "series".into(),
        series,
        times,
        data: MaskedMatrix::dense(syn.full.clone())?,
    };
    let observed = LabeledPanel {
        data: syn.observed,
        ..truth.clone()
    };
    for (name, panel) in [(TRUTH_FILE, &truth), (OBSERVED_FILE, &observed)] {
        let path = a.out.join(name);
        save_panel(&path, panel)?;
        note(log, &path);
    }
    Ok(())
}

fn fit_cmd(a: &FitArgs, log: &mut dyn Write) -> CliResult<()> {
    let panel = load_csv(&a.data.input, a.data.zero_as_missing)?;
    let cols = Columns::resolve(&a.split, panel.data.n_cols(), 0)?;
    let (data, _) = prepare(&a.data, cols.history(), &panel)?;
    let model = fit(&data.columns(0..cols.history())?, &a.model.config())?;
    create_out(&a.data.out)?;

    let path = a.data.out.join(MODEL_FILE);
    archive::save(&path, &model)?;
    note(log, &path);
    let path = a.data.out.join(TRACE_FILE);
    write_file(&path, |w| {
        writeln!(w, "iteration,objective")?;
        for (i, v) in model.objective_trace().iter().enumerate() {
            writeln!(w, "{},{}", i + 1, v)?;
        }
        Ok(())
    })?;
    note(log, &path);
    Ok(())
}

fn forecast_cmd(a: &ForecastArgs, log: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    if a.horizon == 0 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    let panel = load_csv(&a.data.input, a.data.zero_as_missing)?;
    let (model, scaling, history) = match &a.model_path {
        Some(path) => {
            let model = archive::load(path)?;
            let history = model.x().ncols();
            if model.w().ncols() != panel.data.n_rows() || history > panel.data.n_cols() {
                return Err(CliError::Usage(format!(
                    "model covers {} series x {history} steps, input is {} x {}",
                    model.w().ncols(),
                    panel.data.n_rows(),
                    panel.data.n_cols()
                )));
            }
            let (_, scaling) = prepare(&a.data, history, &panel)?;
            (model, scaling, history)
        }
        None => {
            let cols = Columns::resolve(&a.split, panel.data.n_cols(), 0)?;
            let (data, scaling) = prepare(&a.data, cols.history(), &panel)?;
            let model = fit(&data.columns(0..cols.history())?, &a.model.config())?;
            (model, scaling, cols.history())
        }
    };
    let result = forecast_observations(&model, a.horizon)?;
    create_out(&a.data.out)?;
    emit_forecast(
        &a.data.out,
        "forecast",
        &panel,
        model.config(),
        &[
            ("horizon", a.horizon.to_string()),
            ("standardize", a.data.standardize.to_string()),
        ],
        history,
        &scaling.invert(&result.values),
        started,
        log,
    )
}

fn rolling_cmd(a: &RollingArgs, log: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    if a.horizon == 0 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    let panel = load_csv(&a.data.input, a.data.zero_as_missing)?;
    let windows = match (a.windows, a.split.test_cols) {
        (Some(s), _) => s,
        (None, Some(test)) => test / a.horizon,
        (None, None) => 1,
    };
    if windows == 0 {
        return Err(CliError::Usage(format!(
            "test span is shorter than one horizon of {}",
            a.horizon
        )));
    }
    let span = windows * a.horizon;
    let cols = Columns::resolve(&a.split, panel.data.n_cols(), span)?;
    if span > cols.test {
        return Err(CliError::Usage(format!(
            "{windows} windows of {} steps exceed the {} test columns",
            a.horizon, cols.test
        )));
    }
    let (data, scaling) = prepare(&a.data, cols.history(), &panel)?;
    let cfg = a.model.config();
    let outcome = rolling_forecast(
        &data.columns(0..cols.history() + span)?,
        &cfg,
        cols.history(),
        a.horizon,
        windows,
    )?;
    create_out(&a.data.out)?;
    emit_forecast(
        &a.data.out,
        "rolling",
        &panel,
        &cfg,
        &[
            ("horizon", a.horizon.to_string()),
            ("windows", windows.to_string()),
            ("standardize", a.data.standardize.to_string()),
        ],
        cols.history(),
        &scaling.invert(&outcome.forecast.values),
        started,
        log,
    )
}

fn eval_cmd(a: &EvalArgs, log: &mut dyn Write) -> CliResult<()> {
    let panel = load_csv(&a.data.input, a.data.zero_as_missing)?;
    let cols = Columns::resolve(&a.split, panel.data.n_cols(), 0)?;
    if cols.val == 0 {
        return Err(CliError::Usage("eval needs --val-cols".into()));
    }
    if a.data.standardize {
        // Grid scores are computed on the fitted scale, where MAPE is not meaningful.
        return Err(CliError::Usage(
            "eval does not support --standardize".into(),
        ));
    }
    let data = &panel.data;
    let split = Split {
        train: 0..cols.train,
        validation: cols.train..cols.history(),
    };
    let search = grid_search(
        data,
        &split,
        &a.model.config(),
        a.horizon,
        &a.lambdas,
        &a.rhos,
    )?;
    create_out(&a.data.out)?;
    let path: PathBuf = a.data.out.join(SCORES_FILE);
    write_file(&path, |w| write_score_table(w, &search.table))?;
    note(log, &path);
    let _ = writeln!(
        log,
        "best lambda={} rho={} mape={} rmse={}",
        search.best.lambda, search.best.rho, search.best.report.mape, search.best.report.rmse
    );
    Ok(())
}
