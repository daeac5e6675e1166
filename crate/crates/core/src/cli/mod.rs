//! Command-line front end: single tables, pairwise LD over haplotype files,
//! calibration files, simulation studies and manifest replay.

pub mod haplotype;
pub mod manifest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::LdError;
use crate::estimators::{estimate, EstimatorFamily, EstimatorSpec, DEFAULT_BAYES_SAMPLES, DEFAULT_VOLUME_CAP};
use crate::eta::{
    default_gap_grid, log_grid, CalibrationMethod, CalibrationSpec, EtaCalibration, DEFAULT_MC_SAMPLES,
    DEFAULT_TOLERANCE,
};
use crate::measures::{Measure, MeasureValue};
use crate::simulation::rng::mix;
use crate::simulation::{run_distribution_study, run_kendall_study, run_mse_study, StudyConfig, StudyKind};
use crate::tables::{CountTable, DirichletParams, ProbTable};

use haplotype::HaplotypeMatrix;
use manifest::{sha256_file, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_INTERRUPTED: i32 = 130;

pub const THREADS_ENV: &str = "LDCANON_THREADS";
pub const FAILED_MARKER: &str = "FAILED";

static CANCEL: AtomicBool = AtomicBool::new(false);

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl From<LdError> for CliError {
    fn from(e: LdError) -> Self {
        let code = match e {
            LdError::QuadratureFailure { .. } | LdError::EmptyBin { .. } | LdError::DegenerateMarginals => {
                EXIT_NUMERICAL
            }
            LdError::InvalidEstimator(_) | LdError::BudgetExceeded { .. } | LdError::InsufficientSamples { .. } => {
                EXIT_CONFLICT
            }
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        LdError::Io(e).into()
    }
}

fn conflict(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFLICT,
        message: message.into(),
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug, Clone)]
#[command(name = "ldcanon", version, about = "Canonical linkage-disequilibrium measures, estimators and studies")]
struct Cli {
    /// Worker threads; falls back to LDCANON_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Evaluate measures on one probability or count table.
    Measure(MeasureArgs),
    /// Estimate LD for every pair of markers in a haplotype TSV file.
    Pairwise(PairwiseArgs),
    /// Build an eta calibration and optionally check or save it.
    Calibrate(CalibrateArgs),
    /// Run an mse, kendall or distribution study.
    Study(StudyArgs),
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Args, Debug, Clone)]
struct EstimatorOpts {
    /// Estimator for count input: ne, sne[:alpha], be[:alpha] or ve[:alpha].
    #[arg(long)]
    estimator: Option<String>,
    /// Monte Carlo draws for the Bayes estimator.
    #[arg(long, default_value_t = DEFAULT_BAYES_SAMPLES)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest N accepted by the volume estimator of eta.
    #[arg(long, default_value_t = DEFAULT_VOLUME_CAP)]
    volume_cap: u64,
    /// Calibration file to use for eta at its alpha.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("table").required(true).args(["probs", "counts"])))]
struct MeasureArgs {
    /// Four cell probabilities p00,p01,p10,p11.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    probs: Option<Vec<f64>>,
    /// Four cell counts n00,n01,n10,n11.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<u64>>,
    /// Comma-separated measures: d, dprime, r, lambda, q, mi, eta, eta:<alpha>.
    #[arg(long)]
    measures: Option<String>,
    /// Alpha for bare `eta` and for estimators given without one.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    opts: EstimatorOpts,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug, Clone)]
struct PairwiseArgs {
    /// Haplotype TSV: marker ids, then rows of 0, 1 or `.`.
    input: PathBuf,
    #[arg(long, default_value = "eta")]
    measures: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    opts: EstimatorOpts,
    /// Keep only markers whose minor allele frequency exceeds this.
    #[arg(long)]
    min_maf: Option<f64>,
    /// Pairs with fewer complete haplotypes get a null estimate.
    #[arg(long, default_value_t = 1)]
    min_n: u64,
    /// Stop after this many pairs.
    #[arg(long)]
    max_pairs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when absent. A manifest is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Quadrature,
    MonteCarlo,
    Analytic,
}

#[derive(Args, Debug, Clone)]
struct CalibrateArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Quadrature)]
    method: MethodArg,
    /// Absolute tolerance of the quadrature CDF.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Dirichlet draws for the Monte Carlo method.
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare against the closed form (alpha 1 or 1/2 only).
    #[arg(long)]
    check_analytic: bool,
    /// Report max |Q - eta| over odds ratios in [1e-6, 1e6].
    #[arg(long)]
    report_q_gap: bool,
    /// Write the calibration file here; a manifest is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct StudyArgs {
    #[arg(value_enum)]
    kind: KindArg,
    /// Flat key = value configuration; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Mse,
    Kendall,
    Distribution,
}

impl From<KindArg> for StudyKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Mse => StudyKind::Mse,
            KindArg::Kendall => StudyKind::Kendall,
            KindArg::Distribution => StudyKind::Distribution,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Directory for the replayed outputs; defaults to `replay` beside the manifest.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::ArgumentConflict => EXIT_CONFLICT,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    let raw: Vec<String> = argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect();
    match setup_threads(cli.threads).and_then(|()| dispatch(cli.command, raw)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn setup_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| input_error(format!("{THREADS_ENV} must be a positive integer (got '{v}')")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(input_error("thread count must be positive"));
        }
        // A second call in the same process keeps the first pool, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(command: Command, raw: Vec<String>) -> CliResult<()> {
    match command {
        Command::Measure(a) => cmd_measure(&a),
        Command::Pairwise(a) => cmd_pairwise(&a, raw),
        Command::Calibrate(a) => cmd_calibrate(&a, raw),
        Command::Study(a) => cmd_study(&a, raw),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn symmetric(alpha: f64) -> CliResult<DirichletParams> {
    Ok(DirichletParams::symmetric(alpha)?)
}

/// Resolves the estimator flag; SNE and BE default to alpha 1/2.
fn estimator_spec(opts: &EstimatorOpts, alpha: Option<f64>) -> CliResult<EstimatorSpec> {
    let mut spec: EstimatorSpec = opts.estimator.as_deref().unwrap_or("sne").parse()?;
    if spec.alpha.is_none() {
        spec.alpha = match spec.family {
            EstimatorFamily::SemiNaive | EstimatorFamily::Bayes => Some(symmetric(alpha.unwrap_or(0.5))?),
            EstimatorFamily::Volume => alpha.map(symmetric).transpose()?,
            EstimatorFamily::Naive => None,
        };
    }
    spec.mc_samples = opts.mc_samples;
    spec.seed = opts.seed;
    spec.volume_cap = opts.volume_cap;
    Ok(spec)
}

fn load_calibration(path: &Path) -> CliResult<EtaCalibration> {
    let file = File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(EtaCalibration::read(BufReader::new(file))?)
}

/// Parses the measure list; a calibration file replaces eta at its alpha.
fn measure_list(list: Option<&str>, alpha: Option<f64>, calibration: Option<&Path>) -> CliResult<Vec<Measure>> {
    let cal = calibration.map(load_calibration).transpose()?.map(Arc::new);
    let default_alpha = alpha.or(cal.as_ref().map(|c| c.alpha()));
    let mut measures = match list {
        Some(l) => Measure::parse_list(l, default_alpha)?,
        None => Measure::default_set(),
    };
    if let Some(cal) = cal {
        for m in measures.iter_mut() {
            if matches!(m, Measure::Eta(c) if c.alpha() == cal.alpha()) {
                *m = Measure::Eta(cal.clone());
            }
        }
    }
    Ok(measures)
}

#[derive(Debug, Serialize)]
struct Record {
    measure: String,
    estimator: String,
    value: Option<f64>,
    defined: bool,
    inflated: bool,
    std_error: Option<f64>,
}

impl Record {
    fn new(measure: &Measure, estimator: &str, v: &MeasureValue) -> Self {
        let ok = v.defined && !v.value.is_nan();
        Self {
            measure: measure.name(),
            estimator: estimator.into(),
            value: ok.then_some(v.value),
            defined: ok,
            inflated: v.inflated,
            std_error: v.std_error,
        }
    }
}

fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Six significant digits for human-readable tables.
fn six(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{x:.*}", (5 - mag).max(0) as usize)
    } else {
        format!("{x:.5e}")
    }
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn render_records(records: &[Record], format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(records).expect("serializable") + "\n",
        Format::Csv => {
            let mut s = String::from("measure,estimator,value,defined,inflated,std_error\n");
            for r in records {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.measure,
                    r.estimator,
                    opt(r.value, full),
                    r.defined,
                    r.inflated,
                    opt(r.std_error, full)
                );
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:<12} {:<10} {:>14} {:>12}\n", "measure", "estimator", "value", "std_error");
            for r in records {
                let value = match r.value {
                    Some(v) if r.inflated => format!("{}*", six(v)),
                    Some(v) => six(v),
                    None => "undefined".into(),
                };
                let _ = writeln!(
                    s,
                    "{:<12} {:<10} {:>14} {:>12}",
                    r.measure,
                    r.estimator,
                    value,
                    opt(r.std_error, six)
                );
            }
            s
        }
    }
}

fn four<T: Copy>(v: &[T], what: &str) -> CliResult<[T; 4]> {
    <[T; 4]>::try_from(v).map_err(|_| input_error(format!("--{what} needs exactly four comma-separated values")))
}

fn cmd_measure(a: &MeasureArgs) -> CliResult<()> {
    let measures = measure_list(a.measures.as_deref(), a.alpha, a.opts.calibration.as_deref())?;
    let mut records = Vec::with_capacity(measures.len());
    if let Some(p) = &a.probs {
        if a.opts.estimator.is_some() {
            return Err(conflict("--estimator applies to --counts only"));
        }
        let [p00, p01, p10, p11] = four(p, "probs")?;
        let t = ProbTable::new(p00, p01, p10, p11)?;
        for m in &measures {
            records.push(Record::new(m, "exact", &MeasureValue::defined(m.id(), m.of_table(&t))));
        }
    } else {
        let counts = CountTable::from_cells(four(a.counts.as_deref().unwrap_or_default(), "counts")?)?;
        let spec = estimator_spec(&a.opts, a.alpha)?;
        for m in &measures {
            let v = match estimate(&counts, m, &spec) {
                Ok(v) => v,
                Err(LdError::DegenerateMarginals) => MeasureValue::undefined(m.id()),
                Err(e) => return Err(e.into()),
            };
            records.push(Record::new(m, &spec.label(), &v));
        }
    }
    print!("{}", render_records(&records, a.format));
    Ok(())
}

#[derive(Debug, Serialize)]
struct PairRecord {
    marker_i: String,
    marker_j: String,
    n_complete: u64,
    measure: String,
    estimator: String,
    estimate: Option<f64>,
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn cmd_pairwise(a: &PairwiseArgs, raw: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let file = File::open(&a.input).map_err(|e| input_error(format!("{}: {e}", a.input.display())))?;
    let h = HaplotypeMatrix::read(BufReader::new(file))?;
    let alpha = a.alpha.or(Some(0.5));
    let measures = measure_list(Some(&a.measures), alpha, a.opts.calibration.as_deref())?;
    let spec = estimator_spec(&a.opts, a.alpha)?;
    for m in &measures {
        spec.resolve(m)?;
    }
    let kept: Vec<usize> = (0..h.markers().len())
        .filter(|&k| a.min_maf.is_none_or(|lim| h.minor_allele_frequency(k) > lim))
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    'outer: for (x, &i) in kept.iter().enumerate() {
        for &j in &kept[x + 1..] {
            if a.max_pairs.is_some_and(|cap| pairs.len() >= cap) {
                eprintln!("note: stopped after {} pairs (--max-pairs)", pairs.len());
                break 'outer;
            }
            pairs.push((i, j));
        }
    }
    let label = spec.label();
    let rows: Vec<Vec<PairRecord>> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let counts = h.pair_counts(i, j);
            let n: u64 = counts.iter().sum();
            let table = CountTable::from_cells(counts).ok().filter(|_| n >= a.min_n);
            let spec = EstimatorSpec {
                seed: mix(spec.seed, idx as u64),
                ..spec
            };
            measures
                .iter()
                .map(|m| {
                    let estimate = table.as_ref().and_then(|t| match estimate(t, m, &spec) {
                        Ok(v) if v.defined && v.value.is_finite() => Some(v.value),
                        _ => None,
                    });
                    PairRecord {
                        marker_i: h.markers()[i].clone(),
                        marker_j: h.markers()[j].clone(),
                        n_complete: n,
                        measure: m.name(),
                        estimator: label.clone(),
                        estimate,
                    }
                })
                .collect()
        })
        .collect();
    let records: Vec<PairRecord> = rows.into_iter().flatten().collect();
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&records).expect("serializable") + "\n",
        Format::Csv | Format::Table => {
            let mut s = String::from("marker_i,marker_j,n_complete,measure,estimator,estimate\n");
            for r in &records {
                let est = match a.format {
                    Format::Table => opt(r.estimate, six),
                    _ => opt(r.estimate, full),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.marker_i, r.marker_j, r.n_complete, r.measure, r.estimator, est
                );
            }
            s
        }
    };
    match &a.output {
        None => {
            io::stdout().write_all(text.as_bytes())?;
        }
        Some(path) => {
            fs::write(path, &text)?;
            let mut m = RunManifest::new("pairwise", raw, Some(spec.seed));
            m.add_input(&a.input)?;
            if let Some(c) = &a.opts.calibration {
                m.add_input(c)?;
            }
            m.add_output(path)?;
            m.wall_time_s = started.elapsed().as_secs_f64();
            m.write(&manifest_path(path))?;
        }
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, raw: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let method = match a.method {
        MethodArg::Quadrature => CalibrationMethod::Quadrature,
        MethodArg::MonteCarlo => CalibrationMethod::MonteCarlo,
        MethodArg::Analytic if a.alpha == 1.0 => CalibrationMethod::Analytic1,
        MethodArg::Analytic if a.alpha == 0.5 => CalibrationMethod::AnalyticHalf,
        MethodArg::Analytic => return Err(conflict("--method analytic needs --alpha 1 or 0.5")),
    };
    if a.check_analytic && a.alpha != 1.0 && a.alpha != 0.5 {
        return Err(conflict("--check-analytic needs --alpha 1 or 0.5"));
    }
    let spec = CalibrationSpec {
        method,
        tolerance: a.tolerance,
        samples: a.samples,
        seed: a.seed,
    };
    let cal = EtaCalibration::calibrate(a.alpha, spec)?;
    let mut out = format!("alpha={}\nmethod={}\n", a.alpha, cal.method());
    if a.check_analytic {
        let exact = EtaCalibration::for_alpha(a.alpha)?;
        let dev = log_grid(1e-4, 1e4, 201)
            .into_iter()
            .map(|l| (cal.eta(l) - exact.eta(l)).abs())
            .fold(0.0, f64::max);
        let _ = writeln!(out, "max_deviation={dev:.6e}");
    }
    if a.report_q_gap {
        let _ = writeln!(out, "q_gap={:.6e}", cal.q_gap(&default_gap_grid()));
    }
    if let Some(path) = &a.output {
        let mut w = io::BufWriter::new(File::create(path)?);
        cal.write(&mut w)?;
        w.flush()?;
        drop(w);
        let mut m = RunManifest::new("calibrate", raw, Some(a.seed));
        m.add_output(path)?;
        m.wall_time_s = started.elapsed().as_secs_f64();
        m.write(&manifest_path(path))?;
        let _ = writeln!(out, "written={}", path.display());
    }
    print!("{out}");
    Ok(())
}

fn json_text<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn cmd_study(a: &StudyArgs, raw: Vec<String>) -> CliResult<()> {
    let started = Instant::now();
    let kind = StudyKind::from(a.kind);
    let cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
            StudyConfig::parse(kind, &text)?
        }
        None => StudyConfig::new(kind),
    };
    fs::create_dir_all(&a.output)?;
    let marker = a.output.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let _ = ctrlc::set_handler(|| CANCEL.store(true, Ordering::SeqCst));

    let mut files: Vec<(&str, String)> = vec![("config.txt", cfg.to_text())];
    let meta = json!({
        "kind": kind.as_str(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_text(),
    });
    let mut interrupted = false;
    match kind {
        StudyKind::Mse => {
            let report = run_mse_study(&cfg, Some(&CANCEL))?;
            interrupted = report.interrupted;
            files.push(("report.csv", report.to_csv()));
            files.push(("report.json", json_text(&json!({ "metadata": meta, "report": report }))));
        }
        StudyKind::Kendall => {
            let report = run_kendall_study(&cfg)?;
            files.push(("report.csv", report.to_csv()));
            files.push(("report.json", json_text(&json!({ "metadata": meta, "report": report }))));
        }
        StudyKind::Distribution => {
            let report = run_distribution_study(&cfg)?;
            files.push(("report.csv", report.to_csv()));
            files.push(("summary.csv", report.summary_csv()));
            files.push(("scatter.csv", report.scatter_csv()));
            files.push(("report.json", json_text(&json!({ "metadata": meta, "report": report }))));
        }
    }
    interrupted |= CANCEL.load(Ordering::SeqCst);
    let mut m = RunManifest::new("study", raw, Some(cfg.seed));
    if let Some(p) = &a.config {
        m.add_input(p)?;
    }
    for (name, text) in &files {
        let path = a.output.join(name);
        fs::write(&path, text)?;
        m.add_output(&path)?;
    }
    m.wall_time_s = started.elapsed().as_secs_f64();
    if interrupted {
        m.status = "interrupted".into();
        fs::write(&marker, "interrupted; outputs hold partial results\n")?;
    }
    m.write(&a.output.join("manifest.json"))?;
    if interrupted {
        return Err(CliError {
            code: EXIT_INTERRUPTED,
            message: format!("interrupted; partial results in {}", a.output.display()),
        });
    }
    println!("wrote {} files to {}", files.len() + 1, a.output.display());
    Ok(())
}

fn cmd_replay(a: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    let changed = manifest.changed_inputs();
    if !changed.is_empty() {
        return Err(input_error(format!("inputs changed since the run: {}", changed.join(", "))));
    }
    let dir = match &a.output {
        Some(d) => d.clone(),
        None => a.manifest.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    fs::create_dir_all(&dir)?;
    let argv = std::iter::once("ldcanon".to_string()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| input_error(format!("manifest arguments do not parse: {e}")))?;
    let redirect = |p: &Path| dir.join(p.file_name().unwrap_or_default());
    let command = match cli.command {
        Command::Study(mut s) => {
            s.output = dir.clone();
            Command::Study(s)
        }
        Command::Pairwise(mut p) => {
            p.output = p.output.as_deref().map(redirect);
            Command::Pairwise(p)
        }
        Command::Calibrate(mut c) => {
            c.output = c.output.as_deref().map(redirect);
            Command::Calibrate(c)
        }
        _ => return Err(input_error("manifest does not record a replayable command")),
    };
    dispatch(command, manifest.args.clone())?;
    let mut mismatched = Vec::new();
    for (name, digest) in &manifest.outputs {
        let now = sha256_file(&dir.join(name)).ok();
        let ok = now.as_deref() == Some(digest.as_str());
        println!("{name}: {}", if ok { "match" } else { "MISMATCH" });
        if !ok {
            mismatched.push(name.clone());
        }
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_NUMERICAL,
            message: format!("replay differs in {}", mismatched.join(", ")),
        })
    }
}
