//! Dataset files and the `recal` command line.
//!
//! Dataset files are comma-separated with a header row. Lines starting with
//! `#` are comments. Two layouts are accepted:
//!
//! * `meanvar`: `time,obs,mean,var`
//! * `members`: `time,obs,member_1,...,member_M` with `M >= 2`; the ensemble
//!   mean and (n - 1 divisor) variance are computed per row.
//!
//! `time` is either integers or ISO-8601 dates (`YYYY-MM-DD`), strictly
//! increasing. An empty or `NA` observation marks a row to be forecast by
//! `predict`; every other command needs all observations.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bootstrap::bootstrap_fit;
use crate::error::{Error, Result};
use crate::harness::{
    self, detrend_linear, forecast_at, generate_synthetic, run_cv, CvMode, CvPlan, Generator, Recalibrator,
    SyntheticSpec,
};
use crate::mos::fit_mos;
use crate::ngr::fit_ngr;
use crate::rng::derive_seed;
use crate::simplex::SimplexSettings;
use crate::training::{Record, TrainingSet};
use crate::verification::PitHistogram;

/// Quantile levels written by `predict` (box-and-whisker set).
pub const PREDICT_QUANTILES: [f64; 5] = [0.01, 0.25, 0.5, 0.75, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetFormat {
    Members,
    Meanvar,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TimeKey {
    Index(i64),
    Date(NaiveDate),
}

impl std::fmt::Display for TimeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeKey::Index(i) => write!(f, "{i}"),
            TimeKey::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub time: TimeKey,
    pub m: f64,
    pub v: f64,
    pub y: Option<f64>,
}

/// Parsed dataset file. Row position is the internal time index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    /// All rows as training cases; fails on any missing observation.
    pub fn training_set(&self) -> Result<TrainingSet> {
        let mut records = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let y = row
                .y
                .ok_or_else(|| Error::Input(format!("missing observation at time {}", row.time)))?;
            records.push(Record { m: row.m, v: row.v, y });
        }
        TrainingSet::new(records)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num(field: &str, what: &str, line: usize) -> Result<f64> {
    let x: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what} '{field}' is not a number")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("{what} '{field}' is not finite")));
    }
    Ok(x)
}

fn parse_time(field: &str, line: usize) -> Result<TimeKey> {
    let f = field.trim();
    if let Ok(i) = f.parse::<i64>() {
        return Ok(TimeKey::Index(i));
    }
    NaiveDate::parse_from_str(f, "%Y-%m-%d")
        .map(TimeKey::Date)
        .map_err(|_| parse_err(line, format!("time '{f}' is neither an integer nor a YYYY-MM-DD date")))
}

/// Parses dataset text in the given layout.
pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(e.position().map_or(1, |p| p.line() as usize), e.to_string()))?
        .clone();
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    let width = header.len();
    match format {
        DatasetFormat::Meanvar if width != 4 => {
            return Err(parse_err(header_line, format!("meanvar layout needs 4 columns (time,obs,mean,var), found {width}")));
        }
        DatasetFormat::Members if width < 4 => {
            return Err(parse_err(
                header_line,
                format!("members layout needs time, obs and at least 2 member columns, found {width} columns"),
            ));
        }
        _ => {}
    }
    if !header.get(0).is_some_and(|h| h.eq_ignore_ascii_case("time"))
        || !header.get(1).is_some_and(|h| h.eq_ignore_ascii_case("obs"))
    {
        return Err(parse_err(header_line, "the first two columns must be 'time' and 'obs'"));
    }

    let mut rows: Vec<DatasetRow> = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let time = parse_time(&rec[0], line)?;
        let obs = rec[1].trim();
        let y = if obs.is_empty() || obs.eq_ignore_ascii_case("na") {
            None
        } else {
            Some(parse_num(obs, "obs", line)?)
        };
        let (m, v) = match format {
            DatasetFormat::Meanvar => {
                let m = parse_num(&rec[2], "mean", line)?;
                let v = parse_num(&rec[3], "var", line)?;
                if v < 0.0 {
                    return Err(parse_err(line, format!("negative ensemble variance {v}")));
                }
                (m, v)
            }
            DatasetFormat::Members => {
                let members: Vec<f64> = (2..rec.len())
                    .map(|j| parse_num(&rec[j], "member", line))
                    .collect::<Result<_>>()?;
                let k = members.len() as f64;
                let mean = members.iter().sum::<f64>() / k;
                let var = members.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (mean, var)
            }
        };
        if let Some(prev) = rows.last() {
            let comparable = matches!(
                (&prev.time, &time),
                (TimeKey::Index(_), TimeKey::Index(_)) | (TimeKey::Date(_), TimeKey::Date(_))
            );
            if !comparable {
                return Err(parse_err(line, "time column mixes integers and dates"));
            }
            if time <= prev.time {
                return Err(parse_err(line, format!("time {time} does not increase after {}", prev.time)));
            }
        }
        rows.push(DatasetRow { time, m, v, y });
    }
    Ok(Dataset { rows })
}

pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text, format)
}

/// Reads a dataset whose rows all carry observations.
pub fn ingest(path: &Path, format: DatasetFormat) -> Result<TrainingSet> {
    read_dataset(path, format)?.training_set()
}

/// Dataset text in the `meanvar` layout, after optional `#` comment lines.
/// Values are written in shortest round-trip form, so re-reading is exact.
pub fn emit_dataset(dataset: &Dataset, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("time,obs,mean,var\n");
    for r in &dataset.rows {
        let obs = r.y.map(|y| y.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.time, obs, r.m, r.v);
    }
    out
}

/// Writes every file to a temporary name and renames it into place. If any
/// step fails, files already written by this call are removed.
pub fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut done: Vec<PathBuf> = Vec::new();
    for (name, contents) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        let res = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            for p in &done {
                let _ = fs::remove_file(p);
            }
            return Err(Error::Io(format!("{}: {e}", target.display())));
        }
        done.push(target);
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "recal", about = "Ensemble forecast recalibration with parameter uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a recalibration model to a dataset and write its parameters.
    Fit(RunArgs),
    /// Forecast rows with missing observations from the preceding rows.
    Predict(RunArgs),
    /// Cross-validate a recalibrator and write scores and summaries.
    Evaluate(RunArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Rolling-window scores as a function of window size.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "meanvar")]
    pub format: DatasetFormat,
    #[arg(long, default_value = "mos-t")]
    pub recalibrator: String,
    /// Rolling training window size.
    #[arg(long, conflicts_with = "loo")]
    pub window: Option<usize>,
    /// Leave-one-out cross-validation.
    #[arg(long)]
    pub loo: bool,
    /// Remove linear trends (fitted on each training set) before fitting.
    #[arg(long)]
    pub detrend: bool,
    #[arg(long = "bootstrap-k", default_value_t = 50)]
    pub bootstrap_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Central interval levels for coverage statistics.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.9])]
    pub levels: Vec<f64>,
    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long = "max-evals", default_value_t = 10_000)]
    pub max_evals: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub ftol: f64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Mos,
    Ngr,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "ngr")]
    pub generator: GeneratorKind,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    /// Error standard deviation (mos) or variance offset (ngr).
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub d: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![30, 50, 100, 400])]
    pub windows: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["ngr-plugin".to_string(), "ngr-bootstrap".to_string()])]
    pub recalibrators: Vec<String>,
}

/// Validated settings shared by fit, predict, evaluate and sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub format: DatasetFormat,
    pub recalibrator: Recalibrator,
    pub mode: Option<CvMode>,
    pub bootstrap_k: usize,
    pub base_seed: u64,
    pub detrend: bool,
    pub out: PathBuf,
    pub levels: Vec<f64>,
    pub threads: usize,
    pub optimizer: SimplexSettings,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        if args.bootstrap_k == 0 {
            return Err(Error::Input("--bootstrap-k must be at least 1".into()));
        }
        for &l in &args.levels {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Input(format!("coverage level {l} outside (0, 1)")));
            }
        }
        if !(args.ftol > 0.0) || args.max_evals == 0 {
            return Err(Error::Input("optimizer needs --ftol > 0 and --max-evals > 0".into()));
        }
        let mode = match (args.window, args.loo) {
            (Some(w), false) => Some(CvMode::Rolling { window: w }),
            (None, true) => Some(CvMode::LeaveOneOut),
            (None, false) => None,
            (Some(_), true) => return Err(Error::Input("--window and --loo are exclusive".into())),
        };
        Ok(RunConfig {
            data: args.data.clone(),
            format: args.format,
            recalibrator: args.recalibrator.parse()?,
            mode,
            bootstrap_k: args.bootstrap_k,
            base_seed: args.seed,
            detrend: args.detrend,
            out: args.out.clone(),
            levels: args.levels.clone(),
            threads: args.threads,
            optimizer: SimplexSettings {
                max_evals: args.max_evals,
                ftol: args.ftol,
                restarts: args.restarts,
                ..SimplexSettings::default()
            },
        })
    }

    fn plan(&self, mode: CvMode) -> CvPlan {
        CvPlan {
            base_seed: self.base_seed,
            bootstrap_k: self.bootstrap_k,
            detrend: self.detrend,
            optimizer: self.optimizer,
            ..CvPlan::new(mode, self.recalibrator)
        }
    }

    /// Header comment lines echoing the configuration. Thread count and
    /// output location are left out so outputs compare equal across them.
    fn echo(&self, command: &str) -> Vec<String> {
        let mode = match self.mode {
            Some(CvMode::Rolling { window }) => format!("rolling window {window}"),
            Some(CvMode::LeaveOneOut) => "leave-one-out".to_string(),
            None => "all rows".to_string(),
        };
        vec![
            format!("recal {command}"),
            format!("data = {}", self.data.display()),
            format!("format = {:?}", self.format).to_lowercase(),
            format!("recalibrator = {}", self.recalibrator),
            format!("mode = {mode}"),
            format!("detrend = {}", self.detrend),
            format!("bootstrap_k = {}", self.bootstrap_k),
            format!("seed = {}", self.base_seed),
            format!(
                "optimizer = max_evals {}, ftol {:e}, xtol {:e}, restarts {}",
                self.optimizer.max_evals, self.optimizer.ftol, self.optimizer.xtol, self.optimizer.restarts
            ),
        ]
    }
}

fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn key_values(comments: &[String], pairs: &[(String, String)]) -> String {
    let mut out = comment_block(comments);
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    pool.install(f)
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let dataset = read_dataset(&cfg.data, cfg.format)?;
    let mut data = dataset.training_set()?;
    let mut pairs = vec![kv("recalibrator", cfg.recalibrator), kv("n", data.len())];
    if let Some(CvMode::Rolling { window }) = cfg.mode {
        // Fit on the most recent `window` rows only.
        let n = data.len();
        let keep: Vec<usize> = (n.saturating_sub(window)..n).collect();
        data = data.select(&keep);
        pairs[1] = kv("n", data.len());
    }
    let offset = dataset.rows.len() - data.len();
    if cfg.detrend {
        let rs = data.records();
        let t = |i: usize| (offset + i) as f64;
        let dm = detrend_linear(&rs.iter().enumerate().map(|(i, r)| (t(i), r.m)).collect::<Vec<_>>())?;
        let dy = detrend_linear(&rs.iter().enumerate().map(|(i, r)| (t(i), r.y)).collect::<Vec<_>>())?;
        pairs.extend([
            kv("trend_m_intercept", dm.trend.intercept),
            kv("trend_m_slope", dm.trend.slope),
            kv("trend_y_intercept", dy.trend.intercept),
            kv("trend_y_slope", dy.trend.slope),
        ]);
        data = TrainingSet::new(
            rs.iter()
                .zip(dm.residuals.iter().zip(&dy.residuals))
                .map(|(r, (&m, &y))| Record { m, v: r.v, y })
                .collect(),
        )?;
    }

    let mut files = Vec::new();
    match cfg.recalibrator {
        Recalibrator::MosPlugin | Recalibrator::MosT => {
            let f = fit_mos(&data)?;
            pairs.extend([
                kv("a_hat", f.a_hat),
                kv("b_hat", f.b_hat),
                kv("c2_hat", f.c2_hat),
                kv("m_bar", f.m_bar),
                kv("ss_m", f.ss_m),
                kv("degrees_of_freedom", f.degrees_of_freedom()),
            ]);
        }
        Recalibrator::NgrPlugin => {
            let f = fit_ngr(&data, &cfg.optimizer)?;
            pairs.extend([
                kv("a", f.params.a),
                kv("b", f.params.b),
                kv("c", f.params.c),
                kv("d", f.params.d),
                kv("log_likelihood", f.log_likelihood),
                kv("converged", f.converged),
                kv("iterations", f.iterations),
            ]);
        }
        Recalibrator::NgrBootstrap => {
            let f = fit_ngr(&data, &cfg.optimizer)?;
            let ens = with_threads(cfg.threads, || {
                bootstrap_fit(&data, cfg.bootstrap_k, cfg.base_seed, &cfg.optimizer)
            })?;
            pairs.extend([
                kv("a", f.params.a),
                kv("b", f.params.b),
                kv("c", f.params.c),
                kv("d", f.params.d),
                kv("log_likelihood", f.log_likelihood),
                kv("converged", f.converged),
                kv("replicates", ens.len()),
                kv("failed_draws", ens.failed_draws),
            ]);
            let mut csv = comment_block(&cfg.echo("fit"));
            csv.push_str("replicate,a,b,c,d\n");
            for (k, p) in ens.replicates.iter().enumerate() {
                let _ = writeln!(csv, "{k},{},{},{},{}", p.a, p.b, p.c, p.d);
            }
            files.push(("replicates.csv".to_string(), csv));
        }
    }
    files.insert(0, ("fit.txt".to_string(), key_values(&cfg.echo("fit"), &pairs)));
    write_outputs(&cfg.out, &files)
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let dataset = read_dataset(&cfg.data, cfg.format)?;
    let targets: Vec<usize> = (0..dataset.rows.len()).filter(|&i| dataset.rows[i].y.is_none()).collect();
    if targets.is_empty() {
        return Err(Error::Input("no rows with a missing observation to predict".into()));
    }
    let window = match cfg.mode {
        Some(CvMode::Rolling { window }) => Some(window),
        Some(CvMode::LeaveOneOut) => return Err(Error::Input("--loo does not apply to predict".into())),
        None => None,
    };
    let plan = cfg.plan(CvMode::LeaveOneOut);
    let forecasts = with_threads(cfg.threads, || {
        targets
            .iter()
            .map(|&t| {
                let mut train: Vec<(f64, Record)> = (0..t)
                    .filter_map(|i| {
                        let r = &dataset.rows[i];
                        r.y.map(|y| (i as f64, Record { m: r.m, v: r.v, y }))
                    })
                    .collect();
                if let Some(w) = window {
                    let skip = train.len().saturating_sub(w);
                    train.drain(..skip);
                }
                let row = &dataset.rows[t];
                forecast_at(&train, t as f64, row.m, row.v, &plan, derive_seed(cfg.base_seed, t as u64))
                    .map_err(|e| match e {
                        Error::InsufficientData { needed, got } => Error::Input(format!(
                            "row {} (time {}) has {got} usable training rows, needs {needed}",
                            t + 1,
                            row.time
                        )),
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = comment_block(&cfg.echo("predict"));
    csv.push_str("time,mean,var,family,location,q01,q25,q50,q75,q99\n");
    for (&t, d) in targets.iter().zip(&forecasts) {
        let row = &dataset.rows[t];
        let _ = write!(csv, "{},{},{},{},{}", row.time, row.m, row.v, d.family(), d.location());
        for p in PREDICT_QUANTILES {
            let _ = write!(csv, ",{}", d.quantile(p)?);
        }
        csv.push('\n');
    }
    write_outputs(&cfg.out, &[("predictions.csv".to_string(), csv)])
}

fn summary_text(echo: &[String], s: &harness::Summary) -> String {
    let mut pairs = vec![
        kv("folds", s.folds),
        kv("failures", s.failures),
        kv("mean_ignorance", s.mean_ignorance),
        kv("mean_crps", s.mean_crps),
        kv("pit_chi_square", s.pit_histogram.chi_square()),
    ];
    for (l, c) in &s.coverage {
        pairs.push(kv(&format!("coverage_{l}"), c));
    }
    key_values(echo, &pairs)
}

fn histogram_csv(echo: &[String], h: &PitHistogram) -> String {
    let mut out = comment_block(echo);
    out.push_str("bin_lo,bin_hi,count\n");
    let edges = PitHistogram::bin_edges();
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", edges[k], edges[k + 1], c);
    }
    out
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let dataset = read_dataset(&cfg.data, cfg.format)?;
    let data = dataset.training_set()?;
    let mode = cfg
        .mode
        .ok_or_else(|| Error::Input("evaluate needs --window W or --loo".into()))?;
    let plan = cfg.plan(mode);
    let out = with_threads(cfg.threads, || run_cv(&data, &plan))?;
    let summary = out.summary(&cfg.levels)?;
    let echo = cfg.echo("evaluate");

    let mut records = comment_block(&echo);
    records.push_str("index,time,obs,location,pit,ignorance,crps\n");
    for f in &out.folds {
        let _ = writeln!(
            records,
            "{},{},{},{},{},{},{}",
            f.index,
            dataset.rows[f.index].time,
            f.y,
            f.forecast.location(),
            f.record.pit,
            f.record.ignorance,
            f.record.crps
        );
    }
    let mut failures = comment_block(&echo);
    failures.push_str("index,time,error\n");
    for f in &out.failures {
        let msg = f.error.to_string().replace(['"', '\n'], " ");
        let _ = writeln!(failures, "{},{},\"{}\"", f.index, dataset.rows[f.index].time, msg);
    }
    write_outputs(
        &cfg.out,
        &[
            ("records.csv".to_string(), records),
            ("summary.txt".to_string(), summary_text(&echo, &summary)),
            ("pit_histogram.csv".to_string(), histogram_csv(&echo, &summary.pit_histogram)),
            ("failures.csv".to_string(), failures),
        ],
    )
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let generator = match args.generator {
        GeneratorKind::Mos => Generator::Mos { a: args.a, b: args.b, c: args.c },
        GeneratorKind::Ngr => Generator::Ngr { a: args.a, b: args.b, c: args.c, d: args.d },
    };
    let spec = SyntheticSpec::new(generator, args.n, args.seed);
    let data = generate_synthetic(&spec)?;
    let dataset = Dataset {
        rows: data
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| DatasetRow {
                time: TimeKey::Index(i as i64 + 1),
                m: r.m,
                v: r.v,
                y: Some(r.y),
            })
            .collect(),
    };
    let comments = vec![
        "recal synth".to_string(),
        format!("generator = {generator:?}"),
        format!(
            "m ~ N({}, {}); v = {} + Gamma({}, {})",
            spec.m_mean, spec.m_var, spec.v_process.shift, spec.v_process.shape, spec.v_process.scale
        ),
        format!("n = {}, seed = {}", spec.n, spec.seed),
    ];
    let text = emit_dataset(&dataset, &comments);
    let dir = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = args
        .out
        .file_name()
        .ok_or_else(|| Error::Input(format!("--out {} is not a file path", args.out.display())))?
        .to_string_lossy()
        .into_owned();
    write_outputs(&dir, &[(name, text)])
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = RunConfig::from_args(&args.run)?;
    let recals: Vec<Recalibrator> = args
        .recalibrators
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    if recals.is_empty() || args.windows.is_empty() {
        return Err(Error::Input("sweep needs at least one window and one recalibrator".into()));
    }
    let data = ingest(&cfg.data, cfg.format)?;
    let template = cfg.plan(CvMode::Rolling { window: args.windows[0] });
    let rows = with_threads(cfg.threads, || harness::sweep(&data, &args.windows, &recals, &template))?;
    let mut echo = cfg.echo("sweep");
    echo.push(format!(
        "windows = {}",
        args.windows.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    ));
    let mut csv = comment_block(&echo);
    csv.push_str("recalibrator,window,folds,failures,mean_ignorance,mean_crps\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.recalibrator, r.window, r.folds, r.failures, r.mean_ignorance, r.mean_crps
        );
    }
    write_outputs(&cfg.out, &[("sweep.csv".to_string(), csv)])
}

/// Parses `args` (including the program name) and runs the command.
/// Help and version requests print and return `Ok`.
pub fn run_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Error::Input(e.render().to_string())),
    };
    match &cli.command {
        Command::Fit(a) => cmd_fit(&RunConfig::from_args(a)?),
        Command::Predict(a) => cmd_predict(&RunConfig::from_args(a)?),
        Command::Evaluate(a) => cmd_evaluate(&RunConfig::from_args(a)?),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}
