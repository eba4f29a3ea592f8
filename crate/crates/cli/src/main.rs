mod manifest;
mod spec;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pathloss::analysis::{self, AnalysisError, LowerModel};
use pathloss::dataset::{
    self, CsvOptions, DataType, DatasetError, Environment, InclusiveRange, LineageStep, SamplePredicate,
    Scenario,
};
use pathloss::synth::{self, DistanceSampling, SynthConfig, SynthError};
use pathloss::{
    fit_ab, fit_abg, fit_ci, AbgModel, CapMode, CiModel, Dataset, EstimationError, FitResult, FrequencyGhz,
    PathLossModel,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "pathloss",
    version,
    about = "Fit, synthesize and compare CI / ABG large-scale path loss models",
    after_long_help = spec::GRAMMAR,
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit CI, AB (fixed gamma) and/or ABG models to a measurement CSV.
    Fit(FitArgs),
    /// Generate a seeded synthetic campaign CSV.
    Synth(SynthArgs),
    /// Fit every model on the full file and on each frequency band.
    Compare(CompareArgs),
    /// Find where two models predict equal path loss at one frequency.
    Crossover(CrossoverArgs),
    /// Tabulate model curves (free space first) over a distance grid.
    Curves(CurvesArgs),
}

/// Ingestion, capping and filtering shared by commands that read a CSV.
#[derive(Args)]
struct InputArgs {
    /// Dataset CSV (frequency_ghz, distance_m, path_loss_db, scenario,
    /// environment, data_type[, source_tag]).
    #[arg(long)]
    input: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Skip invalid rows (recorded in the lineage) instead of failing.
    #[arg(long)]
    skip_invalid: bool,
    /// Path loss cap in dB, e.g. 180 for a measurement system's dynamic range.
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, value_enum, default_value_t = CapArg::Discard)]
    cap_mode: CapArg,
    /// Keep only this scenario (UMI_SC, UMI_OS, UMA, OTHER).
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Keep only this environment (LOS, NLOS).
    #[arg(long)]
    environment: Option<Environment>,
    /// Keep only this data type (M, R, S).
    #[arg(long)]
    data_type: Option<DataType>,
    /// Keep only frequencies in lo:hi GHz.
    #[arg(long, value_parser = spec::range)]
    freq_range: Option<(f64, f64)>,
    /// Keep only distances in lo:hi m.
    #[arg(long, value_parser = spec::range)]
    dist_range: Option<(f64, f64)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CapArg {
    Discard,
    Clamp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelChoice {
    Ci,
    Ab,
    Abg,
    All,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = ModelChoice::All)]
    model: ModelChoice,
    /// Fixed frequency exponent of the AB fit.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Write the fit report (JSON) here, with a manifest alongside.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print full-precision values instead of 4 decimals.
    #[arg(long)]
    full_precision: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Log,
    Uniform,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
#[command(group = clap::ArgGroup::new("truth_model").required(true))]
struct SynthArgs {
    /// CI truth: path loss exponent n.
    #[arg(long, group = "truth_model")]
    truth_ci: Option<f64>,
    /// ABG truth: alpha,beta,gamma.
    #[arg(long, group = "truth_model", value_parser = spec::list)]
    truth_abg: Option<spec::Floats>,
    /// Any truth as a model spec (ci:.. | ab:.. | abg:..).
    #[arg(long, group = "truth_model", value_parser = spec::model)]
    truth: Option<PathLossModel>,
    /// Shadow fading standard deviation, dB.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Comma-separated carrier frequencies, GHz.
    #[arg(long, value_parser = spec::list)]
    freqs: spec::Floats,
    /// Distance range lo:hi, m.
    #[arg(long, value_parser = spec::range)]
    drange: (f64, f64),
    #[arg(long, value_enum, default_value_t = SamplingArg::Log)]
    sampling: SamplingArg,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "OTHER")]
    scenario: Scenario,
    #[arg(long, default_value = "NLOS")]
    environment: Environment,
    /// source_tag written on every row.
    #[arg(long, default_value = "synth")]
    tag: String,
    /// Fraction of samples given an outlier offset.
    #[arg(long, default_value_t = 0.0)]
    outlier_fraction: f64,
    /// Offset added to outlier samples, dB.
    #[arg(long, default_value_t = 20.0)]
    outlier_offset: f64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Frequency bands lo:hi[,lo:hi...] in GHz.
    #[arg(long, value_parser = spec::bands)]
    bands: Option<spec::Bands>,
    /// Write the comparison report (JSON) here, with a manifest alongside.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CrossoverArgs {
    /// First model spec.
    #[arg(long, value_parser = spec::model)]
    a: PathLossModel,
    /// Second model spec.
    #[arg(long, value_parser = spec::model)]
    b: PathLossModel,
    /// Carrier frequency, GHz.
    #[arg(long)]
    freq: f64,
    /// Distance range lo:hi, m.
    #[arg(long, value_parser = spec::range, default_value = "1:1e6")]
    drange: (f64, f64),
    /// Write the result (JSON) here, with a manifest alongside.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    full_precision: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CurvesArgs {
    /// Carrier frequency, GHz.
    #[arg(long)]
    freq: f64,
    /// Model specs, e.g. ci:3.1,abg:3.5,24.4,1.9.
    #[arg(long, value_parser = spec::models)]
    models: spec::Models,
    /// Distance grid lo:hi:log|lin:count.
    #[arg(long, value_parser = spec::grid, default_value = "1:1000:log:50")]
    dgrid: spec::Grid,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    full_precision: bool,
}

/// A failed command: exit status 1 for I/O and usage problems, 2 for domain
/// errors.
#[derive(Debug)]
enum Failure {
    Io(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Domain(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Domain(m) => f.write_str(m),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) | DatasetError::Csv(_) => Failure::Io(format!("dataset error: {e}")),
            _ => Failure::Domain(format!("dataset error: {e}")),
        }
    }
}

impl From<EstimationError> for Failure {
    fn from(e: EstimationError) -> Self {
        let hint = match e {
            EstimationError::RankDeficient { .. } => " (rerun with `--model ab`)",
            _ => "",
        };
        Failure::Domain(format!("estimation error: {e}{hint}"))
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure::Domain(format!("synth error: {e}"))
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Domain(format!("analysis error: {e}"))
    }
}

fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn frequency(f: f64) -> Result<FrequencyGhz, Failure> {
    FrequencyGhz::new(f).map_err(|e| Failure::Domain(format!("model error: {e}")))
}

struct Precision(bool);

impl Precision {
    fn num(&self, x: f64) -> String {
        if self.0 {
            format!("{x}")
        } else {
            format!("{x:.4}")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Crossover(a) => cmd_crossover(a),
        Command::Curves(a) => cmd_curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn load(args: &InputArgs, manifest: &mut RunManifest) -> Result<Dataset, Failure> {
    let bytes = std::fs::read(&args.input).map_err(|e| io_failure(&args.input, e))?;
    manifest.add_input(&args.input, &bytes);
    if !args.delimiter.is_ascii() {
        return Err(Failure::Io(format!("delimiter `{}` must be ASCII", args.delimiter)));
    }
    let options = CsvOptions {
        delimiter: args.delimiter as u8,
        skip_invalid_rows: args.skip_invalid,
    };
    let mut data = dataset::read_csv(&bytes, &args.input.display().to_string(), &options)?;
    if let Some(cap) = args.cap {
        let mode = match args.cap_mode {
            CapArg::Discard => CapMode::Discard,
            CapArg::Clamp => CapMode::Clamp,
        };
        data = data.apply_cap(cap, mode)?;
    }
    let range = |r: Option<(f64, f64)>| r.map(|(lo, hi)| InclusiveRange::new(lo, hi)).transpose();
    let predicate = SamplePredicate {
        scenario: args.scenario,
        environment: args.environment,
        freq_range_ghz: range(args.freq_range)?,
        dist_range_m: range(args.dist_range)?,
        data_type: args.data_type,
    };
    if !predicate.is_empty() {
        data = data.filter(&predicate)?;
    }
    Ok(data)
}

/// Writes `bytes` to `path` and the manifest next to it.
fn emit(path: &Path, bytes: &[u8], mut manifest: RunManifest) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io_failure(path, e))?;
    manifest.outputs.push(path.display().to_string());
    let mpath = manifest::path_for(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, json + "\n").map_err(|e| io_failure(&mpath, e))
}

/// File name of the manifest that will accompany `output`, as embedded in
/// JSON reports.
fn manifest_ref(output: &Option<PathBuf>) -> Option<String> {
    output.as_ref().map(|p| {
        manifest::path_for(p)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct FitEntry {
    model: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    dataset_id: &'a str,
    n_samples: usize,
    lineage: &'a [LineageStep],
    fits: Vec<FitEntry>,
}

fn summary_line(name: &str, fit: &FitResult, p: &Precision) -> String {
    let sigma = p.num(fit.sigma_db);
    match &fit.model {
        PathLossModel::Ci(CiModel { ple, .. }) => {
            format!("{name:<4} ple={} sigma={sigma} dB N={}", p.num(*ple), fit.n_samples)
        }
        PathLossModel::Abg(AbgModel {
            alpha,
            beta_db,
            gamma,
            gamma_fixed,
            ..
        }) => format!(
            "{name:<4} alpha={} beta={} dB gamma={}{} sigma={sigma} dB N={}",
            p.num(*alpha),
            p.num(*beta_db),
            p.num(*gamma),
            if *gamma_fixed { " (fixed)" } else { "" },
            fit.n_samples
        ),
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new();
    let data = load(&args.input, &mut manifest)?;
    let precision = Precision(args.full_precision);
    let chosen: &[&'static str] = match args.model {
        ModelChoice::Ci => &["ci"],
        ModelChoice::Ab => &["ab"],
        ModelChoice::Abg => &["abg"],
        ModelChoice::All => &["ci", "ab", "abg"],
    };
    let mut entries = Vec::new();
    let mut failed = 0;
    for &name in chosen {
        let result = match name {
            "ci" => fit_ci(&data),
            "ab" => fit_ab(&data, args.gamma),
            _ => fit_abg(&data),
        };
        match result {
            Ok(fit) => {
                println!("{}", summary_line(name, &fit, &precision));
                entries.push(FitEntry {
                    model: name,
                    fit: Some(fit),
                    error: None,
                });
            }
            Err(e) => {
                let failure = Failure::from(e);
                eprintln!("{name:<4} {failure}");
                entries.push(FitEntry {
                    model: name,
                    fit: None,
                    error: Some(failure.to_string()),
                });
                failed += 1;
            }
        }
    }
    if let Some(path) = &args.output {
        let report = FitReport {
            manifest: manifest_ref(&args.output),
            dataset_id: data.id(),
            n_samples: data.len(),
            lineage: data.lineage(),
            fits: entries,
        };
        emit(path, &json_bytes(&report), manifest)?;
    }
    match failed {
        0 => Ok(()),
        n => Err(Failure::Domain(format!("{n} of {} fits failed", chosen.len()))),
    }
}

fn model_failure(e: impl fmt::Display) -> Failure {
    Failure::Domain(format!("model error: {e}"))
}

fn write_stdout(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let truth: PathLossModel = match (args.truth_ci, &args.truth_abg, args.truth) {
        (Some(n), _, _) => CiModel::new(n).map_err(model_failure)?.into(),
        (_, Some(spec::Floats(v)), _) => match v[..] {
            [a, b, g] => AbgModel::new(a, b, g).map_err(model_failure)?.into(),
            _ => return Err(Failure::Io(format!("--truth-abg takes alpha,beta,gamma, got {} values", v.len()))),
        },
        (_, _, Some(m)) => m,
        _ => unreachable!("clap requires one truth flag"),
    };
    let mut cfg = SynthConfig::new(truth, args.freqs.0, args.drange, args.sigma, args.n, args.seed);
    cfg.dist_sampling = match args.sampling {
        SamplingArg::Log => DistanceSampling::LogUniform,
        SamplingArg::Uniform => DistanceSampling::Uniform,
    };
    cfg.scenario = args.scenario;
    cfg.environment = args.environment;
    cfg.source_tag = args.tag;
    let mut data = synth::generate(&cfg)?;
    if args.outlier_fraction != 0.0 {
        data = synth::inject_outliers(&data, args.outlier_fraction, args.outlier_offset, args.seed)?;
    }
    let mut csv = Vec::new();
    dataset::write_csv(&data, &mut csv)?;
    match &args.output {
        Some(path) => {
            let mut manifest = RunManifest::new();
            manifest.seeds.push(args.seed);
            emit(path, &csv, manifest)?;
            eprintln!("wrote {} samples to {} (dataset {})", data.len(), path.display(), data.id());
            Ok(())
        }
        None => write_stdout(&csv),
    }
}

#[derive(Serialize)]
struct WithManifest<'a, T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    #[serde(flatten)]
    report: &'a T,
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new();
    let data = load(&args.input, &mut manifest)?;
    let bands = args
        .bands
        .map(|b| b.0)
        .unwrap_or_default()
        .into_iter()
        .map(|(lo, hi)| InclusiveRange::new(lo, hi))
        .collect::<Result<Vec<_>, _>>()?;
    let report = analysis::compare(&data, &bands)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.output {
        let doc = WithManifest {
            manifest: manifest_ref(&args.output),
            report: &report,
        };
        emit(path, &json_bytes(&doc), manifest)?;
    }
    Ok(())
}

fn cmd_crossover(args: CrossoverArgs) -> Result<(), Failure> {
    let f = frequency(args.freq)?;
    let result = analysis::crossover(&args.a, &args.b, f, args.drange)?;
    let p = Precision(args.full_precision);
    println!(
        "A = {}  B = {}  at {} GHz, {}-{} m",
        result.model_a, result.model_b, result.frequency_ghz, result.range_m.lo, result.range_m.hi
    );
    match result.crossovers_m.first() {
        Some(d) => println!("crossover_m={}", p.num(*d)),
        None => println!("crossover_m=none"),
    }
    for s in &result.segments {
        let lower = match s.lower {
            LowerModel::A => "A",
            LowerModel::B => "B",
        };
        println!("  {}-{} m: {lower} lower", p.num(s.from_m), p.num(s.to_m));
    }
    if let Some(path) = &args.output {
        let doc = WithManifest {
            manifest: manifest_ref(&args.output),
            report: &result,
        };
        emit(path, &json_bytes(&doc), RunManifest::new())?;
    }
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> Result<(), Failure> {
    let f = frequency(args.freq)?;
    let grid = &args.dgrid;
    if grid.count == 0 || !(grid.lo >= 1.0 && grid.hi >= grid.lo) {
        return Err(AnalysisError::InvalidDistanceRange {
            lo: grid.lo,
            hi: grid.hi,
        }
        .into());
    }
    let table = analysis::curve_table(&args.models.0, f, &grid.points())?;
    let mut csv = Vec::new();
    table
        .write_csv(&mut csv, (!args.full_precision).then_some(4))
        .map_err(|e| Failure::Io(e.to_string()))?;
    match &args.output {
        Some(path) => emit(path, &csv, RunManifest::new()),
        None => write_stdout(&csv),
    }
}
