mod args;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use bopp::bo::{doopt, OptConfig, OptimizationStep};
use bopp::ppl::{Model, NamedTheta};
use bopp::transform::{validate, ValidationReport};
use bopp_bench::{build_model, run_experiment, BenchError, BuiltModel, ExperimentSpec, Method, ModelOptions, ModelVisitor, MODEL_IDS};

use args::{Cli, Command, CompareArgs, Format, ModelArgs, OptimizeArgs, OutputArgs, ValidateArgs};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("model `{model}` failed validation: {report}")]
    Violation { model: String, report: ValidationReport },
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Core(#[from] bopp::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Bench(BenchError::UnknownModel { .. } | BenchError::Invalid(_))
            | CliError::Bench(BenchError::Core(bopp::Error::Parameter(_)))
            | CliError::Core(bopp::Error::Parameter(_)) => 2,
            _ => 1,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Optimize(a) => optimize(a),
        Command::Benchmark(a) => compare(a, "benchmark", vec![Method::Bopp]),
        Command::Compare(a) => compare(a, "compare", Method::ALL.to_vec()),
        Command::Validate(a) => validate_model(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bopp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Contents of a `--model-config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    model: Option<String>,
    #[serde(default)]
    options: ModelOptions,
}

fn resolve_model(a: &ModelArgs) -> Result<(String, ModelOptions)> {
    let cfg: ModelConfig = match &a.model_config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ModelConfig::default(),
    };
    let id = match (a.model.clone(), cfg.model) {
        (Some(flag), Some(file)) if flag != file => {
            return Err(CliError::Usage(format!(
                "--model `{flag}` disagrees with `{file}` in the model config"
            )))
        }
        (Some(id), _) | (None, Some(id)) => id,
        (None, None) => return Err(CliError::Usage("no model given; use --model or a config with `model`".into())),
    };
    if !MODEL_IDS.contains(&id.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown model `{id}`; registered models: {}",
            MODEL_IDS.join(", ")
        )));
    }
    let mut options = cfg.options;
    if a.steps.is_some() {
        options.steps = a.steps;
    }
    if let Some(s) = a.data_seed {
        options.data_seed = s;
    }
    Ok((id, options))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    info!("seed {seed}");
    seed
}

/// Opens the destination: `--output`, else a default-named file in the
/// output directory, else stdout.
fn open_output(o: &OutputArgs, default_name: &str) -> Result<Box<dyn Write>> {
    let path: Option<PathBuf> = match (&o.output, &o.output_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            fs::create_dir_all(dir)?;
            Some(dir.join(default_name))
        }
        (None, None) => None,
    };
    match path {
        Some(p) => {
            info!("writing {}", p.display());
            Ok(Box::new(BufWriter::new(create(&p)?)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn create(p: &Path) -> io::Result<File> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(p)
}

#[derive(Serialize)]
struct StepRecord<'a> {
    m: usize,
    theta_star: NamedTheta<'a>,
    u_star: f64,
    theta_next: NamedTheta<'a>,
    log_z_next: f64,
    wall_ms: u64,
    seed: u64,
}

const STEP_CSV_HEADER: [&str; 7] = ["m", "theta-star", "u-star", "theta-next", "log-z-next", "wall-ms", "seed"];

enum StepSink {
    Json(Box<dyn Write>),
    Csv(Box<csv::Writer<Box<dyn Write>>>),
}

impl StepSink {
    fn new(format: Format, w: Box<dyn Write>) -> Result<Self> {
        Ok(match format {
            Format::Json => StepSink::Json(w),
            Format::Csv => {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(STEP_CSV_HEADER)?;
                c.flush()?;
                StepSink::Csv(Box::new(c))
            }
        })
    }

    /// Writes one record and flushes, so an interrupted run leaves only
    /// complete records behind.
    fn write(&mut self, r: &StepRecord<'_>) -> Result<()> {
        match self {
            StepSink::Json(w) => {
                serde_json::to_writer(&mut *w, r)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            StepSink::Csv(c) => {
                c.write_record([
                    r.m.to_string(),
                    serde_json::to_string(&r.theta_star)?,
                    r.u_star.to_string(),
                    serde_json::to_string(&r.theta_next)?,
                    r.log_z_next.to_string(),
                    r.wall_ms.to_string(),
                    r.seed.to_string(),
                ])?;
                c.flush()?;
            }
        }
        Ok(())
    }
}

struct OptimizeRun {
    cfg: OptConfig,
    ids: Vec<String>,
    timing: bool,
    sink: StepSink,
}

impl ModelVisitor for OptimizeRun {
    type Output = Result<usize>;

    fn visit<M: Model>(mut self, m: &M) -> Result<usize> {
        let seed = self.cfg.seed;
        let mut count = 0;
        for step in doopt(m, self.cfg)? {
            let OptimizationStep {
                m,
                theta_star,
                u_star,
                theta_next,
                log_z_next,
                diagnostics,
                ..
            } = step?;
            self.sink.write(&StepRecord {
                m,
                theta_star: theta_star.named(&self.ids),
                u_star,
                theta_next: theta_next.named(&self.ids),
                log_z_next,
                wall_ms: if self.timing { diagnostics.wall_ms } else { 0 },
                seed,
            })?;
            count += 1;
        }
        Ok(count)
    }
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let (id, options) = resolve_model(&a.model)?;
    let seed = resolve_seed(a.seed);
    let cfg = OptConfig {
        n_init: a.n_init,
        n_particles: a.particles,
        max_iterations: a.iters,
        seed,
        ..Default::default()
    };
    cfg.validate()?;
    let built = build_model(&id, &options)?;
    let name = format!("{id}-optimize-seed{seed}.{}", a.format.extension(true));
    let sink = StepSink::new(a.format, open_output(&a.output, &name)?)?;
    let run = OptimizeRun {
        cfg,
        ids: built.model.optim_ids(),
        timing: !a.output.no_timing,
        sink,
    };
    let n = built.model.visit(run).map_err(|e| as_violation(e, &id))?;
    info!("{n} iterations written");
    Ok(())
}

fn as_violation(e: CliError, model: &str) -> CliError {
    match e {
        CliError::Core(bopp::Error::Validation(report)) => CliError::Violation {
            model: model.to_string(),
            report,
        },
        other => other,
    }
}

fn compare(a: CompareArgs, command: &str, default_methods: Vec<Method>) -> Result<()> {
    let (id, options) = resolve_model(&a.model)?;
    let seed = resolve_seed(a.seed);
    let spec = ExperimentSpec {
        model: id.clone(),
        model_options: options,
        methods: a.methods.unwrap_or(default_methods),
        budget: a.budget,
        n_particles: a.particles,
        runs: a.runs,
        seed,
        n_init: a.n_init,
        rw_scale: a.rw_scale,
        timing: !a.output.no_timing,
        threads: a.threads,
    };
    spec.validate()?;
    let name = format!("{id}-{command}-seed{seed}.{}", a.format.extension(false));
    let mut out = open_output(&a.output, &name)?;
    let table = run_experiment(&spec).map_err(|e| as_violation(e.into(), &id))?;
    match a.format {
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => table.write_json(&mut out)?,
    }
    out.flush()?;
    for s in table.summary() {
        info!(
            "{}: median best log z {:.3} after {} evaluations",
            s.method, s.best_log_z_median, s.eval_index
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationRecord<'a> {
    model: &'a str,
    seed: u64,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

struct ValidateRun {
    probes: usize,
    seed: u64,
}

impl ModelVisitor for ValidateRun {
    type Output = ValidationReport;

    fn visit<M: Model>(self, m: &M) -> ValidationReport {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        validate(m, self.probes, &mut rng)
    }
}

fn validate_model(a: ValidateArgs) -> Result<()> {
    let (id, options) = resolve_model(&a.model)?;
    let seed = resolve_seed(a.seed);
    let built: BuiltModel = build_model(&id, &options)?;
    let report = built.model.visit(ValidateRun { probes: a.probes, seed });
    let name = format!("{id}-validate.{}", a.format.extension(false));
    let mut out = open_output(&a.output, &name)?;
    match a.format {
        Format::Json => {
            serde_json::to_writer(&mut out, &ValidationRecord { model: &id, seed, report: &report })?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut out);
            c.write_record(["model", "seed", "rule", "variable", "message"])?;
            for v in &report.violations {
                c.write_record([id.as_str(), &seed.to_string(), v.rule.id(), &v.variable, &v.message])?;
            }
            c.flush()?;
        }
    }
    out.flush()?;
    if report.ok {
        Ok(())
    } else {
        Err(CliError::Violation { model: id, report })
    }
}
