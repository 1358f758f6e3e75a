//! Batch front end: `fit`, `qte`, `lqte` and `simulate` subcommands that
//! read CSV input and write coefficient-by-quantile tables as CSV or JSON.
//!
//! Flags may also come from a plain-text `key=value` file given with
//! `--config`; keys are long flag names without the dashes, and flags on the
//! command line take precedence. Exit codes: 0 success, 2 usage, 3 data,
//! 4 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::data::{build_design, load_dataset, Column, DataError, Dataset, DesignSpec, Schema};
use crate::error::{Error, Result};
use crate::inference::{
    bootstrap_cov, covariance_iid, covariance_sandwich, critical_value, ols_covariance, BootstrapSpec,
    CovarianceEstimate, CovarianceMethod, MIN_BOOTSTRAP_REPLICATIONS,
};
use crate::qreg::{fit_grid, fit_ols, quantile_crossings, validate_grid, SolverOptions};
use crate::resample::Clusters;
use crate::simulate::{gen_height_panel, gen_location_scale, mc_study, HeightPanelDgp, LocationScaleDgp, McConfig};
use crate::treatment::{bootstrap_treatment, lqte, qte, TreatmentResult};

#[derive(Debug, Parser)]
#[command(name = "quantkit", version, about = "Quantile regression and quantile treatment effects")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantile regression over a grid of quantiles, with optional OLS block.
    Fit(FitArgs),
    /// Unconditional quantile treatment effects.
    Qte(EffectArgs),
    /// Local quantile treatment effects for compliers.
    Lqte(EffectArgs),
    /// Monte Carlo study on the location-scale model, or synthetic data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads for parallel fits and resampling.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Plain-text key=value file of default flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Continuous regressors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub terms: Vec<String>,
    /// Categorical columns expanded into dummy blocks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fixed_effects: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Comma-separated list or `start:stop:step`.
    #[arg(long, default_value = "0.25,0.5,0.75")]
    pub taus: String,
    /// iid, sandwich, bootstrap, cluster-bootstrap or none.
    #[arg(long, default_value = "sandwich")]
    pub se: String,
    #[arg(long, default_value_t = 200)]
    pub bootstrap_reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Column whose labels define resampling clusters.
    #[arg(long)]
    pub cluster: Option<String>,
    /// Append an OLS block with tau = "mean".
    #[arg(long)]
    pub ols: bool,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EffectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Binary treatment column.
    #[arg(long)]
    pub treatment: String,
    /// Binary instrument column (lqte only).
    #[arg(long)]
    pub instrument: Option<String>,
    #[arg(long, default_value = "0.25,0.5,0.75")]
    pub taus: String,
    /// Bootstrap replications for the confidence band; no band when omitted.
    #[arg(long)]
    pub bootstrap_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generate {
    LocationScale,
    HeightPanel,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Write a synthetic dataset instead of running a study.
    #[arg(long, value_enum)]
    pub generate: Option<Generate>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value = "0.1,0.25,0.5,0.75,0.9")]
    pub taus: String,
    /// iid, sandwich or bootstrap.
    #[arg(long, default_value = "sandwich")]
    pub se: String,
    #[arg(long, default_value_t = 100)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1.0)]
    pub intercept: f64,
    #[arg(long, default_value_t = 1.0)]
    pub slope: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale_base: f64,
    #[arg(long, default_value_t = 0.5)]
    pub scale_slope: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// One cell of a report table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            _ => "NA".to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => serde_json::Value::from(*v).to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => serde_json::Value::from(s.as_str()).to_string(),
            _ => "null".to_string(),
        }
    }
}

fn opt(v: Option<f64>) -> Cell {
    v.map_or(Cell::Missing, Cell::Num)
}

/// A header plus rows; rendered as CSV or as a JSON array of objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
                w.write_record(&self.header).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
                }
                w.flush()?;
            }
            Format::Json => {
                out.push(b'[');
                for (i, row) in self.rows.iter().enumerate() {
                    out.extend_from_slice(if i == 0 { b"\n  {" } else { b",\n  {" });
                    for (j, (key, cell)) in self.header.iter().zip(row).enumerate() {
                        if j > 0 {
                            out.push(b',');
                        }
                        write!(out, "{}:{}", serde_json::Value::from(key.as_str()), cell.json())?;
                    }
                    out.push(b'}');
                }
                out.extend_from_slice(b"\n]\n");
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileReportRow {
    /// `None` marks the OLS block.
    pub tau: Option<f64>,
    pub coefficient_name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub method: String,
}

/// Coefficient-by-quantile estimates, one row per (τ, coefficient), with
/// the OLS rows last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantileReport {
    pub rows: Vec<QuantileReportRow>,
}

impl QuantileReport {
    pub const HEADER: [&'static str; 7] =
        ["tau", "coefficient_name", "estimate", "std_error", "ci_lower", "ci_upper", "method"];

    pub fn table(&self) -> Table {
        Table {
            header: Self::HEADER.iter().map(|h| h.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.tau.map_or_else(|| Cell::Text("mean".into()), Cell::Num),
                        Cell::Text(r.coefficient_name.clone()),
                        Cell::Num(r.estimate),
                        opt(r.std_error),
                        opt(r.ci_lower),
                        opt(r.ci_upper),
                        Cell::Text(r.method.clone()),
                    ]
                })
                .collect(),
        }
    }

    fn push_block(&mut self, tau: Option<f64>, names: &[String], beta: &[f64], se: Option<Vec<f64>>, crit: f64, method: &str) {
        for (j, name) in names.iter().enumerate() {
            let s = se.as_ref().map(|s| s[j]);
            self.rows.push(QuantileReportRow {
                tau,
                coefficient_name: name.clone(),
                estimate: beta[j],
                std_error: s,
                ci_lower: s.map(|s| beta[j] - crit * s),
                ci_upper: s.map(|s| beta[j] + crit * s),
                method: method.to_string(),
            });
        }
    }
}

/// Per-τ effect table: `tau,effect,q1,q0,ci_lower,ci_upper`, plus
/// `first_stage` for instrument-based effects.
pub fn effect_table(result: &TreatmentResult) -> Table {
    let mut header = vec!["tau", "effect", "q1", "q0", "ci_lower", "ci_upper"];
    if result.first_stage.is_some() {
        header.push("first_stage");
    }
    let header = header.into_iter().map(String::from).collect();
    let rows = (0..result.taus.len())
        .map(|j| {
            let mut row = vec![
                Cell::Num(result.taus[j]),
                Cell::Num(result.effects[j]),
                Cell::Num(result.q1[j]),
                Cell::Num(result.q0[j]),
                opt(result.band.as_ref().map(|b| b.lower[j])),
                opt(result.band.as_ref().map(|b| b.upper[j])),
            ];
            if let Some(fs) = result.first_stage {
                row.push(Cell::Num(fs));
            }
            row
        })
        .collect();
    Table { header, rows }
}

/// Parse `0.1,0.5,0.9` or `start:stop:step`. Range points are rounded to 12
/// decimals so `0.05:0.95:0.05` yields exactly 0.05, 0.1, …, 0.95.
pub fn parse_taus(text: &str) -> Result<Vec<f64>> {
    let bad = |s: &str| Error::Usage(format!("cannot parse quantile grid `{s}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(text));
    let taus: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else { return Err(bad(text)) };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad(text));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let t = start + i as f64 * step;
                (t * 1e12).round() / 1e12
            })
            .collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    validate_grid(&taus).map_err(|e| Error::Usage(e.to_string()))?;
    Ok(taus)
}

fn parse_method(se: &str) -> Result<Option<CovarianceMethod>> {
    if se == "none" {
        return Ok(None);
    }
    se.parse().map(Some).map_err(Error::Usage)
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Usage(format!("{what} requires an explicit --seed")))
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_BOOTSTRAP_REPLICATIONS {
        return Err(Error::Usage(format!(
            "--bootstrap-reps must be at least {MIN_BOOTSTRAP_REPLICATIONS}, got {reps}"
        )));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<f64> {
    critical_value(level).map_err(|e| Error::Usage(e.to_string()))
}

/// Fit the quantile grid and assemble the report. Fit warnings are pushed
/// onto `warnings`.
pub fn cmd_fit(args: &FitArgs, warnings: &mut Vec<String>) -> Result<QuantileReport> {
    let taus = parse_taus(&args.taus)?;
    let method = parse_method(&args.se)?;
    let crit = check_level(args.level)?;
    let spec = match method {
        Some(CovarianceMethod::Bootstrap | CovarianceMethod::ClusterBootstrap) => {
            check_reps(args.bootstrap_reps)?;
            Some(BootstrapSpec {
                replications: args.bootstrap_reps,
                seed: require_seed(args.seed, "a bootstrap method")?,
            })
        }
        _ => None,
    };
    let cluster_needed = method == Some(CovarianceMethod::ClusterBootstrap);
    if cluster_needed != args.cluster.is_some() {
        return Err(Error::Usage("--cluster is used exactly with --se cluster-bootstrap".into()));
    }

    let mut schema = Schema::new().continuous(&args.response);
    for t in &args.terms {
        schema = schema.continuous(t);
    }
    for f in &args.fixed_effects {
        schema = schema.categorical(f);
    }
    if let Some(c) = &args.cluster {
        if !args.fixed_effects.contains(c) {
            schema = schema.categorical(c);
        }
    }
    let dataset = load_dataset(&args.input, &schema)?;
    let design_spec = DesignSpec::new()
        .intercept(!args.no_intercept)
        .continuous(args.terms.iter().cloned())
        .fixed_effects(args.fixed_effects.iter().cloned());
    let design = build_design(&dataset, &args.response, &design_spec)?;
    if design.dropped_rows > 0 {
        warnings.push(format!("dropped {} rows with missing values", design.dropped_rows));
    }
    let x = design.matrix.values();
    let y = &design.response;
    let names = design.matrix.column_names().to_vec();

    let clusters = match &args.cluster {
        Some(c) => {
            let col = dataset.column(c)?;
            let labels = design
                .rows
                .iter()
                .map(|&i| col.label(i).ok_or_else(|| DataError::MissingValues(c.clone())))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Some(Clusters::from_labels(&labels))
        }
        None => None,
    };

    let opts = SolverOptions::default();
    let fits = fit_grid(x, y, &taus, &opts)?;
    for c in quantile_crossings(x, &fits, 1e-9) {
        warnings.push(format!(
            "fitted quantiles at tau={} and tau={} cross at {} of {} rows",
            c.lower_tau,
            c.upper_tau,
            c.rows.len(),
            x.nrows()
        ));
    }
    let mut report = QuantileReport::default();
    for fit in &fits {
        warnings.extend(fit.warnings.iter().cloned());
        let se = match method {
            None => None,
            Some(m) => Some(covariance(m, fit, x, y, spec, clusters.as_ref(), &opts)?.std_errors()),
        };
        let label = method.map_or("none", |m| m.as_str());
        report.push_block(Some(fit.tau), &names, &fit.beta, se, crit, label);
    }
    if args.ols {
        let ols = fit_ols(x, y)?;
        let se = match method {
            None => None,
            Some(m) => {
                let cov = ols_covariance(x, y, &ols, m, spec, clusters.as_ref())?;
                Some(cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect())
            }
        };
        report.push_block(None, &names, &ols.beta, se, crit, method.map_or("none", |m| m.as_str()));
    }
    Ok(report)
}

fn covariance(
    method: CovarianceMethod,
    fit: &crate::qreg::QuantileFit,
    x: &DMatrix<f64>,
    y: &[f64],
    spec: Option<BootstrapSpec>,
    clusters: Option<&Clusters>,
    opts: &SolverOptions,
) -> Result<CovarianceEstimate> {
    Ok(match method {
        CovarianceMethod::Iid => covariance_iid(fit, x, None)?,
        CovarianceMethod::Sandwich => covariance_sandwich(fit, x, None)?,
        CovarianceMethod::Bootstrap | CovarianceMethod::ClusterBootstrap => {
            bootstrap_cov(x, y, fit.tau, spec.expect("spec set for bootstrap"), clusters, opts)?
        }
    })
}

/// `qte` when `instrumented` is false, otherwise `lqte`.
pub fn cmd_effects(args: &EffectArgs, instrumented: bool, warnings: &mut Vec<String>) -> Result<TreatmentResult> {
    let taus = parse_taus(&args.taus)?;
    check_level(args.level)?;
    let instrument = match (instrumented, &args.instrument) {
        (true, None) => return Err(Error::Usage("lqte requires --instrument".into())),
        (false, Some(_)) => return Err(Error::Usage("qte takes no --instrument; use lqte".into())),
        (_, i) => i.clone(),
    };
    let mut schema = Schema::new().continuous(&args.response).binary(&args.treatment);
    let mut used = vec![args.response.as_str(), args.treatment.as_str()];
    if let Some(z) = instrument.as_deref().filter(|z| *z != args.treatment) {
        schema = schema.binary(z);
        used.push(z);
    }
    let dataset = load_dataset(&args.input, &schema)?;
    let keep = dataset.complete_rows(&used)?;
    if keep.len() < dataset.n_rows() {
        warnings.push(format!("dropped {} rows with missing values", dataset.n_rows() - keep.len()));
    }
    let response = dataset.column(&args.response)?;
    let y: Vec<f64> = keep.iter().filter_map(|&i| response.numeric(i)).collect();
    let binary = |name: &str| -> Result<Vec<u8>> {
        let col = dataset.column(name)?;
        Ok(keep.iter().filter_map(|&i| col.numeric(i)).map(|v| v as u8).collect())
    };
    let d = binary(&args.treatment)?;
    let z = instrument.as_deref().map(binary).transpose()?;

    Ok(match args.bootstrap_reps {
        Some(reps) => {
            check_reps(reps)?;
            let spec = BootstrapSpec {
                replications: reps,
                seed: require_seed(args.seed, "a bootstrap band")?,
            };
            bootstrap_treatment(&y, &d, z.as_deref(), &taus, spec, args.level)?
        }
        None => match &z {
            Some(z) => lqte(&y, &d, z, &taus)?,
            None => qte(&y, &d, &taus)?,
        },
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Table> {
    let dgp = LocationScaleDgp {
        n: args.n,
        intercept: args.intercept,
        slope: args.slope,
        scale_base: args.scale_base,
        scale_slope: args.scale_slope,
        seed: args.seed,
    };
    if let Some(kind) = args.generate {
        let dataset = match kind {
            Generate::LocationScale => gen_location_scale(&dgp)?,
            Generate::HeightPanel => gen_height_panel(&HeightPanelDgp::standard(args.seed))?,
        };
        return Ok(dataset_table(&dataset));
    }
    let method = parse_method(&args.se)?
        .filter(|m| *m != CovarianceMethod::ClusterBootstrap)
        .ok_or_else(|| Error::Usage("simulate supports --se iid, sandwich or bootstrap".into()))?;
    check_level(args.level)?;
    let config = McConfig {
        dgp,
        taus: parse_taus(&args.taus)?,
        replications: args.reps,
        seed: args.seed,
        method,
        bootstrap_replications: args.bootstrap_reps,
        level: args.level,
    };
    let report = mc_study(&config)?;
    Ok(Table {
        header: [
            "tau", "truth", "mean_estimate", "bias", "rmse", "coverage", "mean_std_error", "replications", "failures", "method",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        rows: report
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.tau),
                    Cell::Num(r.truth),
                    Cell::Num(r.mean_estimate),
                    Cell::Num(r.bias),
                    Cell::Num(r.rmse),
                    Cell::Num(r.coverage),
                    Cell::Num(r.mean_std_error),
                    Cell::Int(r.replications),
                    Cell::Int(r.failures),
                    Cell::Text(report.method.as_str().into()),
                ]
            })
            .collect(),
    })
}

fn dataset_table(dataset: &Dataset) -> Table {
    let columns: Vec<_> = dataset.names().iter().map(|n| dataset.column(n).expect("own column")).collect();
    let rows = (0..dataset.n_rows())
        .map(|i| {
            columns
                .iter()
                .map(|c| match c {
                    Column::Categorical(_) => c.label(i).map_or(Cell::Missing, Cell::Text),
                    _ => c.numeric(i).map_or(Cell::Missing, Cell::Num),
                })
                .collect()
        })
        .collect();
    Table {
        header: dataset.names().to_vec(),
        rows,
    }
}

/// Prepend `--key value` pairs from a `key=value` file so that later
/// command-line flags override them. Blank lines and `#` comments are skipped.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos {
        Some(p) => args
            .get(p + 1)
            .ok_or_else(|| Error::Usage("--config needs a path".into()))?
            .clone(),
        None => match args.iter().find_map(|a| a.to_str().and_then(|s| s.strip_prefix("--config="))) {
            Some(p) => OsString::from(p),
            None => return Ok(args),
        },
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", Path::new(&path).display())))?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            return Err(Error::Usage("config files cannot include other config files".into()));
        }
        match value {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    // Insert after the subcommand name.
    let at = args.len().min(2);
    let mut out: Vec<OsString> = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

fn emit(bytes: &[u8], out: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let out = match &cli.command {
        Command::Fit(a) => &a.out,
        Command::Qte(a) | Command::Lqte(a) => &a.out,
        Command::Simulate(a) => &a.out,
    };
    let work = || -> Result<(Vec<u8>, Vec<String>)> {
        let mut warnings = Vec::new();
        let table = match &cli.command {
            Command::Fit(a) => cmd_fit(a, &mut warnings)?.table(),
            Command::Qte(a) => effect_table(&cmd_effects(a, false, &mut warnings)?),
            Command::Lqte(a) => effect_table(&cmd_effects(a, true, &mut warnings)?),
            Command::Simulate(a) => cmd_simulate(a)?,
        };
        Ok((table.render(out.format)?, warnings))
    };
    let (bytes, warnings) = match out.threads {
        Some(0) => return Err(Error::Usage("--threads must be positive".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    for w in warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    emit(&bytes, out, stdout)
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = expand_config(args).and_then(|args| match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, stdout, stderr),
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = stdout.write_all(rendered.as_bytes());
                Ok(())
            } else {
                Err(Error::Usage(rendered.trim_end().trim_start_matches("error: ").to_string()))
            }
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
