//! The `record-edge` command line.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use record_edge_core::adequacy::{
    fit_trend, monitor_envelope, MonitorOptions, DEFAULT_GRID_POINTS, DEFAULT_SIM, DEFAULT_Y_MAX,
};
use record_edge_core::confidence::{
    default_prob_grid, interval_from_curve, profile_endpoint, profile_prob, refine_interval,
    ConfidenceCurve, EndpointProfile, Interval, IntervalEnd, ProbProfile,
};
use record_edge_core::estimation::observed_information_se;
use record_edge_core::prediction::{
    default_time_grid, prediction_curve, prob_break, DEFAULT_LAMBDA,
};
use record_edge_core::records::{expected_records, simulate_record_counts};
use record_edge_core::rng::{simulate_margins, stream_rng};
use record_edge_core::{fit_mle, FitResult, ModelParams, RaceTime, Sample, VolumeModel};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ingest::{
    parse_national_records, read_results_csv, to_exceedance, write_results_csv, ExceedanceSample,
    IngestError, Nation, ParseMode, RaceResult, DEFAULT_THRESHOLD,
};
use crate::report::{num, to_pretty, Format, Report, Table};

/// Seed used when neither `--seed` nor `RECORD_EDGE_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_260_124;

#[derive(Debug, Parser)]
#[command(
    name = "record-edge",
    version,
    about = "Sub-threshold race results: fit, predict, confidence curves, monitoring"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Race results (CSV unless --input-format says otherwise).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = InputFormat::Csv)]
    pub input_format: InputFormat,
    /// Qualifying cut, M:SS.ss.
    #[arg(long, global = true, default_value = DEFAULT_THRESHOLD)]
    pub threshold: String,
    /// Expected number of sub-threshold races per season.
    #[arg(long, global = true, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, global = true, env = "RECORD_EDGE_SEED")]
    pub seed: Option<u64>,
    /// Parametric-bootstrap replicates for `monitor`.
    #[arg(long, global = true, default_value_t = DEFAULT_SIM)]
    pub sim: usize,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output format for data files; `json` without --out-dir prints JSON.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Use `a,sigma` instead of fitting.
    #[arg(long, global = true, value_parser = parse_params, allow_hyphen_values = true)]
    pub params: Option<ModelParams>,
    /// Abort on bad input rows and on non-convergence.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Csv,
    /// The fixed-width national-records table.
    FixedWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Focus {
    Prob,
    Endpoint,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Maximum-likelihood fit with standard errors and endpoint.
    Fit,
    /// Probability that the season best beats each target time.
    Predict {
        #[arg(long = "target")]
        targets: Vec<String>,
        /// Fixed number of races per season instead of Poisson(lambda).
        #[arg(long)]
        races: Option<u32>,
    },
    /// Profile-likelihood confidence curve for a probability or the endpoint.
    Confcurve {
        #[arg(long, value_enum)]
        focus: Focus,
        /// Target time for `--focus prob`.
        #[arg(long)]
        target: Option<String>,
        #[arg(long = "level", default_values_t = [0.9])]
        levels: Vec<f64>,
        #[arg(long)]
        races: Option<u32>,
        /// Endpoint grid size.
        #[arg(long, default_value_t = 201)]
        grid_points: usize,
        /// Endpoint grid spans (max y, max y + span].
        #[arg(long, default_value_t = 30.0)]
        gamma_span: f64,
    },
    /// Monitoring process with a parametric-bootstrap envelope.
    Monitor {
        #[arg(long, default_value_t = DEFAULT_Y_MAX)]
        y_max: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        /// Evaluate replicates at the original parameters instead of refitting.
        #[arg(long)]
        no_refit: bool,
    },
    /// Log-linear trend in scale across seasons.
    Trend,
    /// Record counts in i.i.d. sequences.
    Records {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
    },
    /// Rewrite the input results as CSV.
    Convert {
        /// Destination file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic results CSV drawn from the model.
    Simulate {
        #[arg(long, default_value_t = 126)]
        n: usize,
        #[arg(long, default_value_t = 0.208, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 2.609)]
        sigma: f64,
        #[arg(long, default_value_t = 19)]
        seasons: u32,
        #[arg(long, default_value_t = 2005)]
        first_season: i32,
        /// Log-scale slope per season applied to sigma.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        trend: f64,
        /// Destination file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Predict { .. } => "predict",
            Command::Confcurve { .. } => "confcurve",
            Command::Monitor { .. } => "monitor",
            Command::Trend => "trend",
            Command::Records { .. } => "records",
            Command::Simulate { .. } => "simulate",
            Command::Convert { .. } => "convert",
        }
    }
}

fn parse_params(text: &str) -> Result<ModelParams, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [a, sigma] = parts[..] else {
        return Err("expected a,sigma".into());
    };
    let a: f64 = a
        .parse()
        .map_err(|_| format!("shape `{a}` is not a number"))?;
    let sigma: f64 = sigma
        .parse()
        .map_err(|_| format!("scale `{sigma}` is not a number"))?;
    ModelParams::new(a, sigma).map_err(|e| e.to_string())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Compute(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

impl From<record_edge_core::Error> for CliError {
    fn from(e: record_edge_core::Error) -> Self {
        match e {
            record_edge_core::Error::Domain(_) => CliError::Compute(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Effective configuration embedded in every report. The output directory is
/// left out so that reruns into different directories stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: Option<String>,
    pub input_format: InputFormat,
    pub threshold: String,
    pub threshold_s: f64,
    pub lambda: f64,
    pub seed: u64,
    pub sim: usize,
    pub format: Format,
    pub params: Option<[f64; 2]>,
    pub strict: bool,
    pub args: Command,
}

struct Ctx {
    global: GlobalArgs,
    threshold: RaceTime,
    seed: u64,
    format: Format,
    config: Value,
}

fn time_text(seconds: f64) -> String {
    RaceTime::from_seconds(seconds).map_or_else(|_| "-".into(), |t| t.to_string())
}

fn opt4(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

impl Ctx {
    fn new(global: GlobalArgs, command: &Command) -> Result<Self, CliError> {
        let threshold = RaceTime::parse(&global.threshold)
            .map_err(|e| usage(format!("--threshold `{}`: {e}", global.threshold)))?;
        if threshold.centis() == 0 {
            return Err(usage("--threshold must be positive"));
        }
        if !(global.lambda.is_finite() && global.lambda > 0.0) {
            return Err(usage("--lambda must be positive"));
        }
        if global.sim == 0 {
            return Err(usage("--sim must be at least 1"));
        }
        let seed = global.seed.unwrap_or(DEFAULT_SEED);
        let format = global.format.unwrap_or(Format::Csv);
        let config = RunConfig {
            input: global.input.as_ref().map(|p| p.display().to_string()),
            input_format: global.input_format,
            threshold: threshold.to_string(),
            threshold_s: threshold.seconds(),
            lambda: global.lambda,
            seed,
            sim: global.sim,
            format,
            params: global.params.map(|p| [p.a(), p.sigma()]),
            strict: global.strict,
            args: command.clone(),
        };
        Ok(Self {
            config: serde_json::to_value(config).expect("serializable"),
            global,
            threshold,
            seed,
            format,
        })
    }

    fn parse_mode(&self) -> ParseMode {
        if self.global.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        }
    }

    fn load(&self, command: &str) -> Result<ExceedanceSample, CliError> {
        Ok(to_exceedance(&self.read_results(command)?, self.threshold))
    }

    fn read_results(&self, command: &str) -> Result<Vec<RaceResult>, CliError> {
        let path = self
            .global
            .input
            .as_ref()
            .ok_or_else(|| usage(format!("`{command}` needs --input")))?;
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.clone(),
            source,
        })?;
        let parsed = match self.global.input_format {
            InputFormat::Csv => read_results_csv(text.as_bytes(), self.parse_mode())?,
            InputFormat::FixedWidth => parse_national_records(&text, self.parse_mode())?,
        };
        for w in &parsed.warnings {
            eprintln!(
                "warning: {}: line {}: {}",
                path.display(),
                w.line,
                w.message
            );
        }
        Ok(parsed.results)
    }

    fn sample_of(&self, ex: &ExceedanceSample) -> Result<Sample, CliError> {
        ex.to_sample()
            .map_err(|_| usage(format!("no results below the threshold {}", self.threshold)))
    }

    /// Fits, or evaluates the pinned parameters on the sample.
    fn fit(&self, sample: &Sample) -> Result<FitResult, CliError> {
        let fit = match self.global.params {
            Some(params) => FitResult {
                params,
                se: observed_information_se(sample, &params),
                loglik: params
                    .log_likelihood(sample.values())
                    .map_err(|e| CliError::Compute(e.to_string()))?,
                n: sample.len(),
                converged: true,
                at_boundary: params
                    .endpoint()
                    .is_some_and(|g| sample.max() >= g * (1.0 - 1e-9)),
                iterations: 0,
            },
            None => fit_mle(sample, None)?,
        };
        if !fit.converged {
            if self.global.strict {
                return Err(CliError::Compute(
                    "maximum-likelihood fit did not converge".into(),
                ));
            }
            eprintln!("warning: maximum-likelihood fit did not converge");
        }
        Ok(fit)
    }

    fn volume(&self, races: Option<u32>) -> Result<VolumeModel, CliError> {
        Ok(match races {
            Some(n) => VolumeModel::fixed(n)?,
            None => VolumeModel::poisson(self.global.lambda)?,
        })
    }

    fn target(&self, text: &str) -> Result<RaceTime, CliError> {
        let t = RaceTime::parse(text).map_err(|e| usage(format!("target `{text}`: {e}")))?;
        if t >= self.threshold {
            return Err(usage(format!(
                "target {t} must be faster than the threshold {}",
                self.threshold
            )));
        }
        Ok(t)
    }

    fn emit(&self, report: Report, human: String, out: &mut dyn Write) -> Result<(), CliError> {
        let stdout_err = |source| CliError::Output {
            path: PathBuf::from("<stdout>"),
            source,
        };
        match &self.global.out_dir {
            Some(dir) => {
                let files =
                    report
                        .write_to_dir(dir, self.format)
                        .map_err(|source| CliError::Output {
                            path: dir.clone(),
                            source,
                        })?;
                out.write_all(human.as_bytes()).map_err(stdout_err)?;
                for f in files {
                    writeln!(out, "wrote {}", f.display()).map_err(stdout_err)?;
                }
            }
            None if self.global.format == Some(Format::Json) => {
                out.write_all(to_pretty(&report.embedded_json()).as_bytes())
                    .map_err(stdout_err)?;
            }
            None => out.write_all(human.as_bytes()).map_err(stdout_err)?,
        }
        Ok(())
    }

    fn report(&self, command: &'static str, result: Value, tables: Vec<Table>) -> Report {
        Report {
            command,
            config: self.config.clone(),
            result,
            tables,
        }
    }
}

fn fit_json(fit: &FitResult, threshold_s: f64, pinned: bool) -> Value {
    let gamma = fit.endpoint();
    json!({
        "a": fit.params.a(),
        "sigma": fit.params.sigma(),
        "se_a": num(fit.se.map(|s| s.se_a)),
        "se_sigma": num(fit.se.map(|s| s.se_sigma)),
        "loglik": num(Some(fit.loglik)),
        "n": fit.n,
        "converged": fit.converged,
        "at_boundary": fit.at_boundary,
        "iterations": fit.iterations,
        "pinned": pinned,
        "endpoint": num(gamma),
        "r0_s": num(gamma.map(|g| threshold_s - g)),
    })
}

fn interval_end_json(e: &IntervalEnd) -> Value {
    json!({ "value": num(Some(e.value)), "at_natural_bound": e.at_natural_bound, "open": e.open })
}

fn interval_json(i: &Interval) -> Value {
    json!({ "level": i.level, "lo": interval_end_json(&i.lo), "hi": interval_end_json(&i.hi) })
}

/// Runs one parsed command line, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Ctx::new(cli.global.clone(), &cli.command)?;
    match &cli.command {
        Command::Fit => cmd_fit(&ctx, out),
        Command::Predict { targets, races } => cmd_predict(&ctx, targets, *races, out),
        Command::Confcurve {
            focus,
            target,
            levels,
            races,
            grid_points,
            gamma_span,
        } => cmd_confcurve(
            &ctx,
            *focus,
            target.as_deref(),
            levels,
            *races,
            *grid_points,
            *gamma_span,
            out,
        ),
        Command::Monitor {
            y_max,
            grid_points,
            no_refit,
        } => cmd_monitor(&ctx, *y_max, *grid_points, !*no_refit, out),
        Command::Trend => cmd_trend(&ctx, out),
        Command::Records { n, replicates } => cmd_records(&ctx, *n, *replicates, out),
        Command::Simulate {
            n,
            a,
            sigma,
            seasons,
            first_season,
            trend,
            output,
        } => cmd_simulate(
            &ctx,
            *n,
            *a,
            *sigma,
            *seasons,
            *first_season,
            *trend,
            output.as_ref(),
            out,
        ),
        Command::Convert { output } => {
            let results = ctx.read_results("convert")?;
            write_csv_to(&results, output.as_ref(), out)
        }
    }
    .map_err(|e| {
        if let CliError::Usage(msg) = e {
            CliError::Usage(format!("{}: {msg}", cli.command.name()))
        } else {
            e
        }
    })
}

fn cmd_fit(ctx: &Ctx, out: &mut dyn Write) -> Result<(), CliError> {
    let ex = ctx.load("fit")?;
    let sample = ctx.sample_of(&ex)?;
    let fit = ctx.fit(&sample)?;
    let threshold_s = ctx.threshold.seconds();

    let mut result = fit_json(&fit, threshold_s, ctx.global.params.is_some());
    result["excluded"] = json!(ex.excluded);
    result["r0"] = json!(fit.endpoint().map(|g| time_text(threshold_s - g)));

    let mut h = String::new();
    let se =
        |f: fn(&record_edge_core::estimation::StandardErrors) -> f64| opt4(fit.se.as_ref().map(f));
    let _ = writeln!(h, "n        {} (excluded {})", fit.n, ex.excluded);
    let _ = writeln!(h, "a        {:.4}  se {}", fit.params.a(), se(|s| s.se_a));
    let _ = writeln!(
        h,
        "sigma    {:.4}  se {}",
        fit.params.sigma(),
        se(|s| s.se_sigma)
    );
    let _ = writeln!(h, "loglik   {:.4}", fit.loglik);
    match fit.endpoint() {
        Some(g) => {
            let _ = writeln!(h, "endpoint {g:.2}  r0 {}", time_text(threshold_s - g));
        }
        None => {
            let _ = writeln!(h, "endpoint none (shape not positive)");
        }
    }
    let _ = writeln!(
        h,
        "converged {}{}",
        fit.converged,
        if fit.at_boundary {
            " (at boundary)"
        } else {
            ""
        }
    );
    ctx.emit(ctx.report("fit", result, Vec::new()), h, out)
}

fn cmd_predict(
    ctx: &Ctx,
    targets: &[String],
    races: Option<u32>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let threshold_s = ctx.threshold.seconds();
    let (params, fit) = match ctx.global.params {
        Some(p) if ctx.global.input.is_none() => (p, None),
        _ => {
            let sample = ctx.sample_of(&ctx.load("predict")?)?;
            let fit = ctx.fit(&sample)?;
            (fit.params, Some(fit))
        }
    };
    let volume = ctx.volume(races)?;

    let mut rejected = Vec::new();
    let mut target_rows = Vec::new();
    let mut h = String::new();
    let _ = writeln!(
        h,
        "a {:.4}  sigma {:.4}  {}",
        params.a(),
        params.sigma(),
        volume_text(&volume)
    );
    for text in targets {
        match ctx
            .target(text)
            .and_then(|t| Ok((t, prob_break(&params, &volume, t.seconds(), threshold_s)?)))
        {
            Ok((t, p)) => {
                let _ = writeln!(h, "P(season best beats {t}) = {p:.4}");
                target_rows.push(json!({
                    "target": t.to_string(),
                    "target_s": t.seconds(),
                    "margin": (ctx.threshold.centis() - t.centis()) as f64 / 100.0,
                    "p_break": p,
                }));
            }
            Err(e) => {
                target_rows.push(json!({ "target": text, "error": e.to_string() }));
                rejected.push(e.to_string());
            }
        }
    }

    let curve = prediction_curve(
        &params,
        &volume,
        threshold_s,
        &default_time_grid(&params, threshold_s),
    )?;
    let mut table = Table::new("curve", &["race_time_s", "race_time", "p_break"]);
    for p in &curve.points {
        table.push(vec![
            json!(p.race_time_s),
            json!(time_text(p.race_time_s)),
            json!(p.p_break),
        ]);
    }
    let result = json!({
        "params": { "a": params.a(), "sigma": params.sigma() },
        "fit": fit.map(|f| fit_json(&f, threshold_s, false)),
        "volume": volume_json(&volume),
        "targets": target_rows,
    });
    ctx.emit(ctx.report("predict", result, vec![table]), h, out)?;
    if rejected.is_empty() {
        Ok(())
    } else {
        Err(usage(rejected.join("; ")))
    }
}

fn volume_json(v: &VolumeModel) -> Value {
    match v {
        VolumeModel::Poisson { lambda } => json!({ "model": "poisson", "lambda": lambda }),
        VolumeModel::Fixed { n } => json!({ "model": "fixed", "races": n }),
    }
}

fn volume_text(v: &VolumeModel) -> String {
    match v {
        VolumeModel::Poisson { lambda } => format!("lambda {lambda}"),
        VolumeModel::Fixed { n } => format!("{n} races per season"),
    }
}

fn curve_table(curve: &ConfidenceCurve, extra: Option<(&str, &dyn Fn(f64) -> f64)>) -> Table {
    let mut cols = vec!["focus", "deviance", "confidence", "feasible"];
    if let Some((name, _)) = extra {
        cols.push(name);
    }
    let mut t = Table::new("curve", &cols);
    for p in &curve.points {
        let mut row = vec![
            json!(p.focus),
            num(p.deviance),
            num(p.confidence),
            json!(p.deviance.is_some()),
        ];
        if let Some((_, f)) = extra {
            row.push(num(Some(f(p.focus))));
        }
        t.push(row);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn cmd_confcurve(
    ctx: &Ctx,
    focus: Focus,
    target: Option<&str>,
    levels: &[f64],
    races: Option<u32>,
    grid_points: usize,
    gamma_span: f64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if ctx.global.params.is_some() {
        return Err(usage(
            "--params cannot be used here; the profile needs a fit",
        ));
    }
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(usage("--level must lie in (0, 1)"));
    }
    let ex = ctx.load("confcurve")?;
    let sample = ctx.sample_of(&ex)?;
    let fit = ctx.fit(&sample)?;
    let threshold_s = ctx.threshold.seconds();
    let mut h = String::new();

    let (curve, intervals, mut result, table) = match focus {
        Focus::Prob => {
            let t = ctx.target(target.ok_or_else(|| usage("--focus prob needs --target"))?)?;
            let y0 = (ctx.threshold.centis() - t.centis()) as f64 / 100.0;
            let volume = ctx.volume(races)?;
            let profile = ProbProfile::new(&sample, &fit, y0, volume)?;
            let curve = profile_prob(&sample, &fit, y0, volume, &default_prob_grid())?;
            let intervals = intervals(&profile, &curve, levels)?;
            let _ = writeln!(
                h,
                "P(season best beats {t}): estimate {}",
                opt4(curve.mle_focus)
            );
            for (grid, refined) in &intervals {
                let i = refined.as_ref().unwrap_or(grid);
                let _ = writeln!(
                    h,
                    "{:.0}% interval [{}, {}]",
                    i.level * 100.0,
                    end_text(&i.lo, 4),
                    end_text(&i.hi, 4)
                );
            }
            let result = json!({ "target": t.to_string(), "target_s": t.seconds(), "margin": y0, "volume": volume_json(&volume) });
            let table = curve_table(&curve, None);
            (curve, intervals, result, table)
        }
        Focus::Endpoint => {
            if grid_points < 2 || !(gamma_span.is_finite() && gamma_span > 0.01) {
                return Err(usage(
                    "endpoint grid needs --grid-points >= 2 and --gamma-span > 0.01",
                ));
            }
            let start = sample.max() + 0.01;
            let end = sample.max() + gamma_span;
            let grid: Vec<f64> = (0..grid_points)
                .map(|i| start + (end - start) * i as f64 / (grid_points - 1) as f64)
                .collect();
            let est = profile_endpoint(&sample, &fit, threshold_s, &grid)?;
            let profile = EndpointProfile::new(&sample, &fit);
            let intervals = intervals(&profile, &est.curve, levels)?;
            match est.gamma_hat {
                Some(g) => {
                    let _ = writeln!(h, "endpoint {g:.2}  r0 {}", time_text(threshold_s - g));
                }
                None => {
                    let _ = writeln!(h, "endpoint none (fitted shape not positive)");
                }
            }
            for (grid, refined) in &intervals {
                let i = refined.as_ref().unwrap_or(grid);
                let r0 = |e: &IntervalEnd| {
                    if e.open {
                        "open".to_string()
                    } else {
                        time_text(threshold_s - e.value)
                    }
                };
                let _ = writeln!(
                    h,
                    "{:.0}% interval [{}, {}]  r0 [{}, {}]",
                    i.level * 100.0,
                    end_text(&i.lo, 2),
                    end_text(&i.hi, 2),
                    r0(&i.hi),
                    r0(&i.lo)
                );
            }
            let result = json!({
                "gamma_hat": num(est.gamma_hat),
                "r0_s": num(est.r0_seconds()),
                "r0": est.r0().map(|t| t.to_string()),
            });
            let table = curve_table(&est.curve, Some(("race_time_s", &|g| threshold_s - g)));
            (est.curve, intervals, result, table)
        }
    };

    let infeasible = curve.points.iter().filter(|p| p.deviance.is_none()).count();
    if infeasible > 0 {
        let _ = writeln!(h, "{infeasible} grid points infeasible");
    }
    result["focus"] = json!(curve.focus_name);
    result["mle_focus"] = num(curve.mle_focus);
    result["fit"] = fit_json(&fit, threshold_s, false);
    result["infeasible"] = json!(infeasible);
    result["non_monotone"] = json!(curve.non_monotone);
    result["intervals"] = intervals
        .iter()
        .map(|(g, r)| json!({ "level": g.level, "grid": interval_json(g), "refined": r.as_ref().map(interval_json) }))
        .collect();
    ctx.emit(ctx.report("confcurve", result, vec![table]), h, out)
}

fn end_text(e: &IntervalEnd, digits: usize) -> String {
    if e.open {
        "open".into()
    } else {
        format!("{:.*}", digits, e.value)
    }
}

type IntervalPair = (Interval, Option<Interval>);

fn intervals<P: record_edge_core::confidence::Profile>(
    profile: &P,
    curve: &ConfidenceCurve,
    levels: &[f64],
) -> Result<Vec<IntervalPair>, CliError> {
    levels
        .iter()
        .map(|&l| {
            let grid =
                interval_from_curve(curve, l).map_err(|e| CliError::Compute(e.to_string()))?;
            Ok((grid, refine_interval(profile, curve, l).ok()))
        })
        .collect()
}

fn cmd_monitor(
    ctx: &Ctx,
    y_max: f64,
    grid_points: usize,
    refit: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let ex = ctx.load("monitor")?;
    let sample = ctx.sample_of(&ex)?;
    let fit = ctx.fit(&sample)?;
    let opts = MonitorOptions {
        sim: ctx.global.sim,
        seed: ctx.seed,
        refit,
        y_max,
        grid_points,
    };
    let m = monitor_envelope(&sample, &fit.params, &opts)?;

    let mut cols: Vec<String> = ["y", "observed", "lower", "upper"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=m.envelope.len()).map(|k| format!("sim_{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("curves", &col_refs);
    for (i, y) in m.grid.iter().enumerate() {
        let mut row = vec![
            json!(y),
            json!(m.observed.z[i]),
            json!(m.lower[i]),
            json!(m.upper[i]),
        ];
        row.extend(m.envelope.iter().map(|c| json!(c[i])));
        table.push(row);
    }
    let result = json!({
        "fit": fit_json(&fit, ctx.threshold.seconds(), ctx.global.params.is_some()),
        "sim": m.sim,
        "dropped": m.dropped,
        "refit": refit,
        "sup_abs": m.observed.sup_abs,
        "exceed_fraction": m.exceed_fraction,
        "grid_points": m.grid.len(),
    });
    let mut h = String::new();
    let _ = writeln!(h, "sup |Z_n| {:.4}", m.observed.sup_abs);
    let _ = writeln!(
        h,
        "outside envelope at {:.4} of {} grid points (sim {}, dropped {}, seed {})",
        m.exceed_fraction,
        m.grid.len(),
        m.sim,
        m.dropped,
        ctx.seed
    );
    ctx.emit(ctx.report("monitor", result, vec![table]), h, out)
}

fn cmd_trend(ctx: &Ctx, out: &mut dyn Write) -> Result<(), CliError> {
    let ex = ctx.load("trend")?;
    let by_season = ex.by_season();
    if by_season.len() < 2 {
        return Err(usage(format!(
            "trend needs results from at least two seasons, found {}",
            by_season.len()
        )));
    }
    let t = fit_trend(&by_season)?;
    if !t.converged {
        if ctx.global.strict {
            return Err(CliError::Compute("trend fit did not converge".into()));
        }
        eprintln!("warning: trend fit did not converge");
    }
    let mut table = Table::new("seasons", &["season", "x", "count"]);
    for (season, x, count) in &t.seasons {
        table.push(vec![json!(season), json!(x), json!(count)]);
    }
    let result = json!({
        "a": t.a,
        "sigma0": t.sigma0,
        "trend_gamma": t.trend_gamma,
        "se_trend": num(t.se_trend),
        "wald_z": num(t.wald_z()),
        "loglik": t.loglik,
        "converged": t.converged,
        "seasons": t.seasons.iter().map(|(s, x, c)| json!({ "season": s, "x": x, "count": c })).collect::<Vec<_>>(),
    });
    let mut h = String::new();
    for (season, _, count) in &t.seasons {
        let _ = writeln!(h, "{season}-{:02}  {count}", (season + 1).rem_euclid(100));
    }
    let _ = writeln!(h, "a {:.4}  sigma0 {:.4}", t.a, t.sigma0);
    let _ = writeln!(
        h,
        "trend {:.4}  se {}  z {}",
        t.trend_gamma,
        opt4(t.se_trend),
        opt4(t.wald_z())
    );
    ctx.emit(ctx.report("trend", result, vec![table]), h, out)
}

fn cmd_records(ctx: &Ctx, n: u64, replicates: usize, out: &mut dyn Write) -> Result<(), CliError> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if replicates == 0 {
        return Err(usage("--replicates must be at least 1"));
    }
    let stats = expected_records(n)?;
    let sim = simulate_record_counts(n, replicates, ctx.seed)?;
    let mut table = Table::new("distribution", &["count", "replicates", "fraction"]);
    for (count, k) in sim.distribution() {
        table.push(vec![
            json!(count),
            json!(k),
            json!(k as f64 / replicates as f64),
        ]);
    }
    let se = sim.mean_se();
    let z = (se > 0.0).then(|| (sim.mean() - stats.mean) / se);
    let result = json!({
        "n": n,
        "harmonic": stats.mean,
        "variance": stats.variance,
        "replicates": replicates,
        "sim_mean": sim.mean(),
        "sim_variance": sim.variance(),
        "sim_mean_se": se,
        "sim_skewness": num(Some(sim.skewness())),
        "mean_z": num(z),
    });
    let mut h = String::new();
    let _ = writeln!(h, "H_n {:.4}  variance {:.4}", stats.mean, stats.variance);
    let _ = writeln!(
        h,
        "simulated mean {:.4} (se {:.4}) variance {:.4} over {replicates} replicates, seed {}",
        sim.mean(),
        se,
        sim.variance(),
        ctx.seed
    );
    ctx.emit(ctx.report("records", result, vec![table]), h, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    ctx: &Ctx,
    n: usize,
    a: f64,
    sigma: f64,
    seasons: u32,
    first_season: i32,
    trend: f64,
    output: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if n == 0 || seasons == 0 {
        return Err(usage("--n and --seasons must be at least 1"));
    }
    let base = ModelParams::new(a, sigma)?;
    let mean_x = (seasons - 1) as f64 / 2.0;
    let mut rng = stream_rng(ctx.seed, 0);
    let nation = Nation::parse("SIM").expect("valid code");
    let mut results = Vec::with_capacity(n);
    for j in 0..seasons {
        let count = n / seasons as usize + usize::from((j as usize) < n % seasons as usize);
        let params =
            ModelParams::new(base.a(), base.sigma() * (trend * (j as f64 - mean_x)).exp())?;
        let season = first_season + j as i32;
        for (k, y) in simulate_margins(&params, count, &mut rng)
            .into_iter()
            .enumerate()
        {
            let margin = ((y * 100.0).round() as u32).clamp(1, ctx.threshold.centis() - 1);
            let date = chrono::NaiveDate::from_ymd_opt(season, 11, 1).expect("valid date")
                + chrono::Days::new((k % 120) as u64);
            results.push(RaceResult {
                skater: format!("Skater {:03}", results.len() + 1),
                nation: Some(nation),
                venue: "Simulated".into(),
                date,
                time: RaceTime::from_centis(ctx.threshold.centis() - margin)?,
                pair_rank: None,
            });
        }
    }
    write_csv_to(&results, output, out)
}

fn write_csv_to(
    results: &[RaceResult],
    output: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    match output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| CliError::Output {
                path: path.clone(),
                source,
            })?;
            write_results_csv(results, io::BufWriter::new(file))?;
        }
        None => write_results_csv(results, out)?,
    }
    Ok(())
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
