//! BOPP-vs-PMMH comparison harness.
//!
//! Every method gets the same number of evidence evaluations per run. Rows
//! are recorded per evaluation; `best_log_z` is the running maximum and
//! `dist_to_truth` is the distance of the θ that attains it.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use bopp::bo::{doopt, OptConfig};
use bopp::infer::{pmmh, prior_scales, PmmhConfig, PmmhKernel};
use bopp::ppl::{Model, Theta};

use crate::error::{BenchError, Result};
use crate::registry::{build_model, BuiltModel, ModelOptions, ModelVisitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Method {
    #[serde(rename = "bopp")]
    Bopp,
    #[serde(rename = "pmmh-lmh")]
    PmmhLmh,
    #[serde(rename = "pmmh-rmh")]
    PmmhRmh,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bopp, Method::PmmhLmh, Method::PmmhRmh];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bopp => "bopp",
            Method::PmmhLmh => "pmmh-lmh",
            Method::PmmhRmh => "pmmh-rmh",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BenchError::Invalid(format!("unknown method `{s}`; expected bopp, pmmh-lmh or pmmh-rmh")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: String,
    pub model_options: ModelOptions,
    pub methods: Vec<Method>,
    /// Evidence evaluations per run, shared by every method.
    pub budget: usize,
    pub n_particles: usize,
    pub runs: usize,
    /// Run `r` uses seed `seed + r` for every method.
    pub seed: u64,
    /// Initial prior draws for BOPP; counted against the budget.
    pub n_init: usize,
    /// Random-walk scale of the PMMH-RMH kernel, in prior-range units.
    pub rw_scale: f64,
    /// Record wall-clock time. Off gives reproducible tables.
    pub timing: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            model: "bimodal".into(),
            model_options: ModelOptions::default(),
            methods: Method::ALL.to_vec(),
            budget: 50,
            n_particles: 100,
            runs: 1,
            seed: 0,
            n_init: 5,
            rw_scale: 0.1,
            timing: true,
            threads: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Invalid("at least one method is required".into()));
        }
        if self.n_particles == 0 {
            return Err(BenchError::Invalid("n_particles must be positive".into()));
        }
        if self.n_init < 2 {
            return Err(BenchError::Invalid("n_init must be at least 2".into()));
        }
        if !(self.rw_scale > 0.0) {
            return Err(BenchError::Invalid("rw_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: String,
    pub method: Method,
    pub run: usize,
    pub seed: u64,
    /// 1-based.
    pub eval_index: usize,
    pub theta_json: String,
    pub log_z: f64,
    pub best_log_z: f64,
    pub dist_to_truth: Option<f64>,
    /// Milliseconds since the run started when this evaluation was available.
    pub wall_ms: u64,
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "method",
    "run",
    "seed",
    "eval-index",
    "theta-json",
    "log-z",
    "best-log-z",
    "dist-to-truth",
    "wall-ms",
];

/// Median and quartiles of one metric across runs at one evaluation index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub eval_index: usize,
    pub n_runs: usize,
    pub best_log_z_q25: f64,
    pub best_log_z_median: f64,
    pub best_log_z_q75: f64,
    pub dist_q25: Option<f64>,
    pub dist_median: Option<f64>,
    pub dist_q75: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

/// Linear-interpolation quantile of a non-empty sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

impl ResultsTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Rows of one method at one evaluation index, one per run.
    pub fn at(&self, method: Method, eval_index: usize) -> impl Iterator<Item = &ResultRow> {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.eval_index == eval_index)
    }

    pub fn final_index(&self, method: Method) -> Option<usize> {
        self.rows.iter().filter(|r| r.method == method).map(|r| r.eval_index).max()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for method in self.methods() {
            let last = self.final_index(method).unwrap_or(0);
            for k in 1..=last {
                let rows: Vec<&ResultRow> = self.at(method, k).collect();
                if rows.is_empty() {
                    continue;
                }
                let best: Vec<f64> = rows.iter().map(|r| r.best_log_z).collect();
                let dist: Vec<f64> = rows.iter().filter_map(|r| r.dist_to_truth).collect();
                let dq = |q| (!dist.is_empty()).then(|| quantile(&dist, q));
                out.push(SummaryRow {
                    method,
                    eval_index: k,
                    n_runs: rows.len(),
                    best_log_z_q25: quantile(&best, 0.25),
                    best_log_z_median: median(&best),
                    best_log_z_q75: quantile(&best, 0.75),
                    dist_q25: dq(0.25),
                    dist_median: dq(0.5),
                    dist_q75: dq(0.75),
                });
            }
        }
        out
    }

    /// Writes the header even when there are no rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.model.clone(),
                r.method.to_string(),
                r.run.to_string(),
                r.seed.to_string(),
                r.eval_index.to_string(),
                r.theta_json.clone(),
                r.log_z.to_string(),
                r.best_log_z.to_string(),
                r.dist_to_truth.map(|d| d.to_string()).unwrap_or_default(),
                r.wall_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            rows: &'a [ResultRow],
            summary: Vec<SummaryRow>,
        }
        serde_json::to_writer_pretty(
            w,
            &Doc {
                rows: &self.rows,
                summary: self.summary(),
            },
        )?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in self.summary() {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One evaluation as seen by the harness.
struct Eval {
    theta: Theta,
    log_z: f64,
    wall_ms: u64,
}

struct RunOne<'a> {
    spec: &'a ExperimentSpec,
    method: Method,
    seed: u64,
}

impl ModelVisitor for RunOne<'_> {
    type Output = Result<(Vec<String>, Vec<Eval>)>;

    fn visit<M: Model>(self, m: &M) -> Self::Output {
        let ids = m.optim_ids().to_vec();
        let evals = match self.method {
            Method::Bopp => run_bopp(m, self.spec, self.seed)?,
            Method::PmmhLmh => run_pmmh(m, self.spec, self.seed, PmmhKernel::Lmh)?,
            Method::PmmhRmh => run_pmmh(m, self.spec, self.seed, PmmhKernel::Rmh)?,
        };
        Ok((ids, evals))
    }
}

fn elapsed_ms(start: &Instant, timing: bool) -> u64 {
    if timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn run_bopp<M: Model>(m: &M, spec: &ExperimentSpec, seed: u64) -> Result<Vec<Eval>> {
    let start = Instant::now();
    let cfg = OptConfig {
        n_init: spec.n_init,
        n_particles: spec.n_particles,
        max_iterations: spec.budget.saturating_sub(spec.n_init).max(1),
        seed,
        ..OptConfig::default()
    };
    let mut opt = doopt(m, cfg)?;
    let mut evals: Vec<Eval> = Vec::with_capacity(spec.budget);
    while evals.len() < spec.budget {
        match opt.next() {
            Some(step) => {
                step?;
            }
            None => break,
        }
        let now = elapsed_ms(&start, spec.timing);
        for (theta, log_z) in opt.evaluations().skip(evals.len()) {
            evals.push(Eval {
                theta: theta.clone(),
                log_z,
                wall_ms: now,
            });
        }
    }
    evals.truncate(spec.budget);
    Ok(evals)
}

fn run_pmmh<M: Model>(m: &M, spec: &ExperimentSpec, seed: u64, kernel: PmmhKernel) -> Result<Vec<Eval>> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = prior_scales(m, 20, &mut rng)?;
    let cfg = PmmhConfig {
        n_iters: spec.budget,
        n_particles: spec.n_particles,
        kernel,
        rw_scale: spec.rw_scale,
        scales,
    };
    let chain = pmmh(m, &cfg, &mut rng)?;
    // PMMH produces its samples in one call, so per-evaluation time is
    // interpolated evenly over the run.
    let total = elapsed_ms(&start, spec.timing);
    let n = chain.len().max(1) as u64;
    Ok(chain
        .into_iter()
        .enumerate()
        .map(|(i, s)| Eval {
            theta: s.proposed,
            log_z: s.proposed_log_z,
            wall_ms: total * (i as u64 + 1) / n,
        })
        .collect())
}

fn rows_for_run(built: &BuiltModel, method: Method, run: usize, seed: u64, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let (ids, evals) = built.model.visit(RunOne { spec, method, seed })?;
    let mut best = f64::NEG_INFINITY;
    let mut best_dist = None;
    let mut rows = Vec::with_capacity(evals.len());
    for (k, e) in evals.into_iter().enumerate() {
        // Ties go to the later point, as with the surrogate incumbent.
        if e.log_z >= best {
            best = e.log_z;
            best_dist = built.distance(&e.theta);
        }
        rows.push(ResultRow {
            model: built.id.clone(),
            method,
            run,
            seed,
            eval_index: k + 1,
            theta_json: serde_json::to_string(&e.theta.named(&ids))?,
            log_z: e.log_z,
            best_log_z: best,
            dist_to_truth: best_dist,
            wall_ms: e.wall_ms,
        });
    }
    Ok(rows)
}

/// Runs every (method, run) pair. Runs are spread over worker threads; each
/// owns its RNG, so the table does not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultsTable> {
    spec.validate()?;
    let built = build_model(&spec.model, &spec.model_options)?;
    if spec.budget == 0 || spec.runs == 0 {
        return Ok(ResultsTable::default());
    }
    let jobs: Vec<(Method, usize)> = spec
        .methods
        .iter()
        .flat_map(|m| (0..spec.runs).map(move |r| (*m, r)))
        .collect();
    let threads = match spec.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len());

    let mut results: Vec<Option<Result<Vec<ResultRow>>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let jobs = &jobs;
                let built = &built;
                s.spawn(move || {
                    (w..jobs.len())
                        .step_by(threads)
                        .map(|j| {
                            let (method, run) = jobs[j];
                            let seed = spec.seed.wrapping_add(run as u64);
                            log::info!("{} {method} run {run} (seed {seed})", built.id);
                            (j, rows_for_run(built, method, run, seed, spec))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (j, r) in h.join().expect("experiment worker panicked") {
                results[j] = Some(r);
            }
        }
    });
    let mut table = ResultsTable::default();
    for r in results {
        table.rows.extend(r.expect("every job ran")?);
    }
    Ok(table)
}

/// Where `compare` writes when no path is given.
pub fn default_output_name(spec: &ExperimentSpec) -> PathBuf {
    PathBuf::from(format!("{}-compare-seed{}.csv", spec.model, spec.seed))
}
