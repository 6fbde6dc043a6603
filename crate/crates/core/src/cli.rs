//! Command-line front end: argument parsing, config merging and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use crate::adaptive::{fit_corpus, FitConfig};
use crate::bench::{restore, BlurKernel, HuberTv, RestorationConfig};
use crate::error::{Error, Result};
use crate::grid::Image;
use crate::io::{load_corpus, load_image, save_image};
use crate::report::{bench_csv, emit, read_json, read_weights, Command, ReportEnvelope, RunConfig, WeightEntry};
use crate::suite::run_suite;
use crate::symmetry::{run_scenario, Aggregation, Regularizer, RegularizerSpec, Scenario};
use crate::transforms::AffineParams;

#[derive(Parser, Debug)]
#[command(name = "equisym", version, about = "Symmetry metrics, adaptive affine fits and equivariance benches")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Symmetry error of a corpus under one scenario.
    Metric(Flags),
    /// Per-image affine fits, written as a weights file.
    Adapt(Flags),
    /// Property benches.
    Bench(Flags),
    /// Huber-TV restoration of one image.
    Restore(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Image file or directory; may be repeated.
    #[arg(long)]
    input: Vec<PathBuf>,
    #[arg(long)]
    regularizer: Option<Regularizer>,
    /// Per-pixel combination of the stencil responses.
    #[arg(long)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// `delta` or `gaussian:SIGMA`.
    #[arg(long)]
    kernel: Option<BlurKernel>,
    #[arg(long)]
    iters: Option<usize>,
    /// Also start the affine fit from the most anisotropic scales.
    #[arg(long)]
    multi_start: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with any of the flag values; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Keys accepted in a `--config` file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    input: Option<Vec<PathBuf>>,
    regularizer: Option<Regularizer>,
    aggregation: Option<Aggregation>,
    scenario: Option<Scenario>,
    angles: Option<usize>,
    weights: Option<PathBuf>,
    suite: Option<String>,
    lambda: Option<f64>,
    kernel: Option<BlurKernel>,
    iters: Option<usize>,
    multi_start: Option<bool>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    seed: Option<u64>,
}

fn resolve(command: Command, flags: Flags) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(command);
    if let Some(path) = &flags.config {
        let file: ConfigFile = read_json(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = file.$f { cfg.$f = v; })* };
        }
        take!(input, regularizer, aggregation, scenario, angles, suite, lambda, kernel, jobs, seed, multi_start);
        cfg.weights = file.weights.or(cfg.weights);
        cfg.iters = file.iters.or(cfg.iters);
        cfg.out = file.out.or(cfg.out);
    }
    macro_rules! flag {
        ($($f:ident),*) => { $(if let Some(v) = flags.$f { cfg.$f = v; })* };
    }
    flag!(regularizer, aggregation, scenario, angles, suite, lambda, kernel, jobs, seed);
    if !flags.input.is_empty() {
        cfg.input = flags.input;
    }
    if flags.multi_start {
        cfg.multi_start = true;
    }
    cfg.weights = flags.weights.or(cfg.weights);
    cfg.iters = flags.iters.or(cfg.iters);
    cfg.out = flags.out.or(cfg.out);
    cfg.validate()?;
    Ok(cfg)
}

/// Result of one command: the summary line and the exit code.
pub struct Outcome {
    pub summary: String,
    pub code: i32,
}

fn corpus(cfg: &RunConfig) -> Result<(Vec<String>, Vec<Image>)> {
    let mut names = Vec::new();
    let mut images = Vec::new();
    for p in &cfg.input {
        for (path, img) in load_corpus(p)? {
            names.push(path.display().to_string());
            images.push(img);
        }
    }
    Ok((names, images))
}

fn fit_config(cfg: &RunConfig) -> FitConfig {
    let mut fc = FitConfig {
        angles: cfg.angles,
        multi_start: cfg.multi_start,
        ..FitConfig::default()
    };
    if let Some(n) = cfg.iters {
        fc.max_iters = n;
    }
    fc
}

fn file_name(s: &str) -> Option<&std::ffi::OsStr> {
    Path::new(s).file_name()
}

/// Weights for `names`, matched by path and then by file name.
fn match_weights(entries: &[WeightEntry], names: &[String]) -> Result<Vec<AffineParams>> {
    names
        .iter()
        .map(|n| {
            entries
                .iter()
                .find(|e| &e.file == n)
                .or_else(|| entries.iter().find(|e| file_name(&e.file) == file_name(n)))
                .map(|e| e.w)
                .ok_or_else(|| Error::Usage(format!("no weights for {n}")))
        })
        .collect()
}

fn write_envelope<P: serde::Serialize>(cfg: &RunConfig, out: Option<&Path>, payload: P) -> Result<()> {
    emit(out, &ReportEnvelope::new(cfg, payload).to_json()?)
}

fn metric(cfg: &RunConfig) -> Result<Outcome> {
    let (names, images) = corpus(cfg)?;
    let spec = RegularizerSpec::new(cfg.regularizer)?.with_aggregation(cfg.aggregation);
    let weights = match (cfg.scenario, &cfg.weights) {
        (Scenario::DatasetAdaptive, Some(path)) => Some(match_weights(&read_weights(path)?, &names)?),
        (Scenario::DatasetAdaptive, None) => {
            info!("no --weights given, fitting {} images", images.len());
            let fits = fit_corpus(&images, &spec, &fit_config(cfg))?;
            Some(fits.into_iter().map(|f| f.w).collect())
        }
        _ => None,
    };
    let report = run_scenario(&images, &spec, cfg.scenario, cfg.angles, weights.as_deref())?;
    let summary = format!(
        "epsilon={:.6e} angles={} images={} scenario={} regularizer={}",
        report.epsilon,
        report.angles,
        report.images,
        report.scenario.name(),
        report.regularizer
    );
    write_envelope(cfg, cfg.out.as_deref(), report)?;
    Ok(Outcome { summary, code: 0 })
}

fn adapt(cfg: &RunConfig) -> Result<Outcome> {
    let (names, images) = corpus(cfg)?;
    let spec = RegularizerSpec::new(cfg.regularizer)?.with_aggregation(cfg.aggregation);
    let fits = fit_corpus(&images, &spec, &fit_config(cfg))?;
    let entries: Vec<WeightEntry> = names.iter().zip(&fits).map(|(n, f)| WeightEntry::from_fit(n.clone(), f)).collect();
    let n = entries.len() as f64;
    let summary = format!(
        "images={} converged={} objective_initial={:.6e} objective_final={:.6e}",
        entries.len(),
        entries.iter().filter(|e| e.converged).count(),
        entries.iter().map(|e| e.objective_initial).sum::<f64>() / n,
        entries.iter().map(|e| e.objective_final).sum::<f64>() / n,
    );
    write_envelope(cfg, cfg.out.as_deref(), entries)?;
    Ok(Outcome { summary, code: 0 })
}

fn bench(cfg: &RunConfig) -> Result<Outcome> {
    let results = run_suite(&cfg.suite)?;
    let passed = results.iter().filter(|r| r.pass).count();
    let summary = format!(
        "benches={} passed={} entries={}",
        results.len(),
        passed,
        results.iter().map(|r| r.measured.len()).sum::<usize>()
    );
    let csv = cfg
        .out
        .as_deref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        emit(cfg.out.as_deref(), &bench_csv(&results)?)?;
    } else {
        write_envelope(cfg, cfg.out.as_deref(), &results)?;
    }
    let code = if passed == results.len() { 0 } else { 1 };
    Ok(Outcome { summary, code })
}

#[derive(serde::Serialize)]
struct RestoreReport {
    input: String,
    output: String,
    trace: Vec<f64>,
}

fn restore_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let [input] = cfg.input.as_slice() else {
        return Err(Error::Usage("restore takes exactly one --input image".into()));
    };
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::Usage("restore needs --out for the restored image".into()))?;
    let degraded = load_image(input)?;
    let config = RestorationConfig {
        kernel: cfg.kernel,
        lambda: cfg.lambda,
        iters: cfg.iters.unwrap_or(RestorationConfig::default().iters),
        ..RestorationConfig::default()
    };
    let result = restore(&degraded, &config, HuberTv::Isotropic)?;
    save_image(&result.image, out)?;
    let summary = format!(
        "objective_initial={:.6e} objective_final={:.6e} steps={}",
        result.trace[0],
        result.trace[result.trace.len() - 1],
        result.trace.len() - 1
    );
    let mut report_path = out.as_os_str().to_owned();
    report_path.push(".json");
    let report = RestoreReport {
        input: input.display().to_string(),
        output: out.display().to_string(),
        trace: result.trace,
    };
    write_envelope(cfg, Some(Path::new(&report_path)), report)?;
    Ok(Outcome { summary, code: 0 })
}

/// Runs a resolved configuration on a pool of `cfg.jobs` workers.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.command {
        Command::Metric => metric(cfg),
        Command::Adapt => adapt(cfg),
        Command::Bench => bench(cfg),
        Command::Restore => restore_cmd(cfg),
    })
}

/// Parses `argv` (program name first) into a validated configuration.
pub fn parse_config<I, T>(argv: I) -> std::result::Result<RunConfig, CliExit>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let code = if e.use_stderr() { 2 } else { 0 };
        CliExit {
            message: e.render().to_string(),
            code,
        }
    })?;
    let (command, flags) = match cli.command {
        Sub::Metric(f) => (Command::Metric, f),
        Sub::Adapt(f) => (Command::Adapt, f),
        Sub::Bench(f) => (Command::Bench, f),
        Sub::Restore(f) => (Command::Restore, f),
    };
    resolve(command, flags).map_err(|e| CliExit {
        message: format!("error: {e}"),
        code: e.exit_code(),
    })
}

/// Early exit from argument handling: help text or a usage error.
#[derive(Debug)]
pub struct CliExit {
    pub message: String,
    pub code: i32,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("EQUISYM_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Entry point of the binary; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cfg = match parse_config(argv) {
        Ok(c) => c,
        Err(exit) => {
            if exit.code == 0 {
                print!("{}", exit.message);
            } else {
                eprintln!("{}", exit.message.trim_end());
            }
            return exit.code;
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            // The report goes to stdout when there is no --out; keep it parseable.
            if cfg.out.is_none() && cfg.command != Command::Restore {
                eprintln!("{}", outcome.summary);
            } else {
                println!("{}", outcome.summary);
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
