use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use cpnconf::diagnostics::{aggregate, export_enhanced_model};
use cpnconf::eventlog::{read_log, write_log, EventLog};
use cpnconf::model::ModelFile;
use cpnconf::replay::{ReplayError, ReplayResult, Replayer};
use cpnconf::report::{summary_text, write_deviations, write_fitness_csv};
use cpnconf::trading::{generate, reference_model_file, SimConfig};
use cpnconf::validate::validate_all;
use cpnconf::Cpn;

#[derive(Parser)]
#[command(
    name = "cpnconf",
    version,
    about = "Conformance checking of object-centric event logs on colored Petri nets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file for structural and workflow violations
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Replay an event log on a model and write deviation reports
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Output directory (created if missing)
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for replay (defaults to all cores)
        #[arg(long)]
        jobs: Option<usize>,
        /// Exit with status 1 if any deviation is found or any trace is skipped
        #[arg(long)]
        fail_on_deviation: bool,
    },
    /// Generate an order-book event log
    Generate {
        /// JSON generator settings; flags below override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        traces: Option<usize>,
        /// Turn off every fault injection
        #[arg(long)]
        faithful: bool,
        /// Output JSONL file; the manifest is written next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Print or write the built-in order-book model
    ReferenceModel {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Input problems; reported with exit status 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CmdResult = Result<ExitCode, InputError>;

#[derive(Serialize)]
struct Counts {
    traces: usize,
    events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped_traces: Option<usize>,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    model_sha256: String,
    counts: Counts,
    outputs: Vec<String>,
    wall_time_ms: u128,
}

impl Manifest {
    fn new(command: &'static str, model_bytes: &[u8]) -> Self {
        Manifest {
            tool: "cpnconf",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: BTreeMap::new(),
            seed: None,
            model_sha256: format!("{:x}", Sha256::digest(model_bytes)),
            counts: Counts {
                traces: 0,
                events: 0,
                skipped_traces: None,
            },
            outputs: Vec::new(),
            wall_time_ms: 0,
        }
    }

    fn write(mut self, path: &Path, started: Instant) -> Result<(), InputError> {
        self.wall_time_ms = started.elapsed().as_millis();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| InputError(format!("writing {}: {e}", path.display())))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, InputError> {
    fs::read(path).map_err(|e| InputError(format!("reading {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<(Cpn, Vec<u8>), InputError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| InputError(format!("{}: not UTF-8", path.display())))?;
    let cpn = ModelFile::from_json(&text)
        .and_then(|m| m.build())
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok((cpn, bytes))
}

fn cmd_validate(model: &Path) -> CmdResult {
    let (cpn, _) = load_model(model)?;
    let report = validate_all(&cpn);
    if report.is_valid() {
        println!("{}: valid conservative-workflow net", model.display());
        Ok(ExitCode::SUCCESS)
    } else {
        print!("{report}");
        Ok(ExitCode::from(1))
    }
}

fn replay_with_jobs(
    rp: &Replayer,
    log: &EventLog,
    jobs: Option<usize>,
) -> Result<Vec<Result<ReplayResult, ReplayError>>, InputError> {
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder.build()?;
        Ok(pool.install(|| rp.replay_log(log)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if jobs.is_some_and(|n| n > 1) {
            warn!("built without parallel support; --jobs ignored");
        }
        Ok(rp.replay_log_sequential(log))
    }
}

fn cmd_check(
    model: &Path,
    log_path: &Path,
    out: &Path,
    jobs: Option<usize>,
    fail_on_deviation: bool,
) -> CmdResult {
    let started = Instant::now();
    if jobs == Some(0) {
        return Err(InputError("--jobs must be at least 1".into()));
    }
    let (cpn, model_bytes) = load_model(model)?;
    let report = validate_all(&cpn);
    if !report.is_valid() {
        return Err(InputError(format!(
            "{}: model is not valid\n{report}",
            model.display()
        )));
    }
    let log = read_log(log_path).map_err(|e| InputError(format!("{}: {e}", log_path.display())))?;
    info!(
        "replaying {} traces, {} events",
        log.traces.len(),
        log.event_count()
    );

    let rp = Replayer::new(&cpn)?;
    let mut results = Vec::with_capacity(log.traces.len());
    let mut skipped = 0;
    for outcome in replay_with_jobs(&rp, &log, jobs)? {
        match outcome {
            Ok(r) => results.push(r),
            Err(ReplayError::Syntax { trace, violations }) => {
                skipped += 1;
                for v in &violations {
                    warn!(
                        "trace {trace} skipped: event {}: {}",
                        v.seq.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                        v.message
                    );
                }
            }
            Err(e) => {
                skipped += 1;
                warn!("trace skipped: {e}");
            }
        }
    }

    fs::create_dir_all(out).map_err(|e| InputError(format!("creating {}: {e}", out.display())))?;
    let mut outputs = Vec::new();
    let mut write = |name: &str,
                     body: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>|
     -> Result<(), InputError> {
        let path = out.join(name);
        let mut buf = Vec::new();
        body(&mut buf)?;
        fs::write(&path, buf)
            .map_err(|e| InputError(format!("writing {}: {e}", path.display())))?;
        outputs.push(path.display().to_string());
        Ok(())
    };
    let summary = aggregate(&results, &cpn);
    write("deviations.tsv", &|b| write_deviations(&results, b))?;
    write("fitness.csv", &|b| write_fitness_csv(&results, b))?;
    write("diagnostics.json", &|b| {
        b.extend_from_slice(summary.to_json_pretty().as_bytes());
        Ok(())
    })?;
    let dot = out.join("enhanced_model.dot");
    export_enhanced_model(&cpn, &summary, &dot)
        .map_err(|e| InputError(format!("writing {}: {e}", dot.display())))?;
    outputs.push(dot.display().to_string());

    let mut manifest = Manifest::new("check", &model_bytes);
    manifest.inputs.insert("model", model.display().to_string());
    manifest
        .inputs
        .insert("log", log_path.display().to_string());
    manifest.counts = Counts {
        traces: log.traces.len(),
        events: log.event_count(),
        skipped_traces: Some(skipped),
    };
    manifest.outputs = outputs;
    manifest.write(&out.join("manifest.json"), started)?;

    print!("{}", summary_text(&results));
    if skipped > 0 {
        println!("skipped traces: {skipped}");
    }
    let deviations: usize = results.iter().map(|r| r.deviations.len()).sum();
    if fail_on_deviation && (deviations > 0 || skipped > 0) {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_generate(
    config: Option<&Path>,
    seed: Option<u64>,
    traces: Option<usize>,
    faithful: bool,
    out: &Path,
) -> CmdResult {
    let started = Instant::now();
    let mut cfg = match config {
        Some(p) => {
            let bytes = read(p)?;
            serde_json::from_slice::<SimConfig>(&bytes)
                .map_err(|e| InputError(format!("{}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    if faithful {
        cfg = SimConfig {
            skip_submission_rate: Default::default(),
            sell_deadlock_rate: 0.0,
            corruption_rate: 0.0,
            rule_violation_rate: 0.0,
            ..cfg
        };
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = traces {
        cfg.traces = n;
    }
    let (log, injections) = generate(&cfg)?;
    write_log(&log, out).map_err(|e| InputError(format!("writing {}: {e}", out.display())))?;

    let model = reference_model_file().to_json_pretty();
    let mut manifest = Manifest::new("generate", model.as_bytes());
    if let Some(p) = config {
        manifest.inputs.insert("config", p.display().to_string());
    }
    manifest.seed = Some(cfg.seed);
    manifest.counts = Counts {
        traces: log.traces.len(),
        events: log.event_count(),
        skipped_traces: None,
    };
    manifest.outputs = vec![out.display().to_string()];
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    manifest.write(Path::new(&name), started)?;

    let mean = if log.traces.is_empty() {
        0.0
    } else {
        log.event_count() as f64 / log.traces.len() as f64
    };
    println!(
        "{} traces, {} events ({mean:.2} per trace) written to {}",
        log.traces.len(),
        log.event_count(),
        out.display()
    );
    println!(
        "injected: {} skipped buy submissions, {} skipped sell submissions, {} deadlocks, {} corruptions, {} rule violations",
        injections.skipped_submissions_buy,
        injections.skipped_submissions_sell,
        injections.deadlocks,
        injections.corruptions,
        injections.rule_violations
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_reference_model(out: Option<&Path>) -> CmdResult {
    let text = reference_model_file().to_json_pretty();
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| InputError(format!("writing {}: {e}", p.display())))?
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("CPNCONF_LOG_LEVEL", "warn"),
    )
    .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { model } => cmd_validate(model),
        Command::Check {
            model,
            log,
            out,
            jobs,
            fail_on_deviation,
        } => cmd_check(model, log, out, *jobs, *fail_on_deviation),
        Command::Generate {
            config,
            seed,
            traces,
            faithful,
            out,
        } => cmd_generate(config.as_deref(), *seed, *traces, *faithful, out),
        Command::ReferenceModel { out } => cmd_reference_model(out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
