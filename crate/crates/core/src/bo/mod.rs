//! The optimization loop: prior-based scaling, marginal evaluations, a GP
//! mixture surrogate and annealed acquisition maximization, exposed as a lazy
//! sequence of [`OptimizationStep`]s.

mod scaling;

use std::time::Instant;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use scaling::{init_scaling, update_scaling, ScalingTransform, R_INF_FACTOR};

use crate::error::{Error, Result};
use crate::gp::{GpDataset, GpMixture, HyperSampler, HyperSamplerConfig, Hyperprior, MeanFunction, SpreadConvention};
use crate::infer::{ais_maximize_log, smc_marginal, AnnealingSchedule, EvidenceEstimate};
use crate::ppl::{Model, Theta, Value};
use crate::transform::{run_prior, validate, DEFAULT_PROBE_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    /// Prior draws used for the initial scaling; all of them are evaluated.
    pub n_init: usize,
    pub n_particles: usize,
    pub resample: bool,
    pub n_hyper_samples: usize,
    pub hyper_sampler: HyperSamplerConfig,
    pub hyperprior_convention: SpreadConvention,
    pub schedule: AnnealingSchedule,
    pub n_ais_chains: usize,
    /// Number of steps the sequence yields, each adding one evaluation.
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            n_init: 5,
            n_particles: 100,
            resample: true,
            n_hyper_samples: 10,
            hyper_sampler: HyperSamplerConfig::default(),
            hyperprior_convention: SpreadConvention::StdDev,
            schedule: AnnealingSchedule::default(),
            n_ais_chains: 8,
            max_iterations: 50,
            seed: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::Parameter(format!("n_init must be at least 2, got {}", self.n_init)));
        }
        if self.n_particles == 0 || self.n_hyper_samples == 0 || self.n_ais_chains == 0 {
            return Err(Error::Parameter(
                "particle, hyperparameter-sample and AIS-chain counts must be positive".into(),
            ));
        }
        self.schedule.validate()
    }
}

/// Timing and surrogate diagnostics for one iteration. Timings are excluded
/// from serialization so that seeded runs serialize identically.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepDiagnostics {
    pub hyper_acceptance: f64,
    /// The hyperparameter sampler failed and the hyperprior mode was used.
    pub hyper_fallback: bool,
    /// The surrogate or acquisition step failed and θ_next is a prior draw.
    pub proposal_fallback: bool,
    /// `ln ζ(θ_next)`, `−∞` on proposal fallback.
    pub log_ei_next: f64,
    pub ais_acceptance: f64,
    /// Largest raw log-evidence estimate seen so far, monotone in `m`.
    pub best_observed_log_z: f64,
    #[serde(skip)]
    pub surrogate_ms: u64,
    #[serde(skip)]
    pub acquisition_ms: u64,
    #[serde(skip)]
    pub evaluation_ms: u64,
    #[serde(skip)]
    pub wall_ms: u64,
}

/// One element of the [`doopt`] sequence.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OptimizationStep {
    /// 1-based iteration index.
    pub m: usize,
    /// Incumbent: the evaluated θ with the highest surrogate mean.
    pub theta_star: Theta,
    /// Output samples from the evaluation at `theta_star`.
    pub omega_star: Vec<(Value, f64)>,
    /// Surrogate estimate of `log p(Y, theta_star)`.
    pub u_star: f64,
    pub theta_next: Theta,
    pub log_z_next: f64,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone)]
struct Evaluation {
    theta: Theta,
    flat: Vec<f64>,
    log_z: f64,
    outputs: Vec<(Value, f64)>,
}

/// Proposal from one surrogate/acquisition round.
struct Proposal {
    theta_next: Theta,
    incumbent: usize,
    u_star: f64,
    log_ei: f64,
    hyper_acceptance: f64,
    hyper_fallback: bool,
    proposal_fallback: bool,
    ais_acceptance: f64,
    surrogate_ms: u64,
    acquisition_ms: u64,
}

/// Lazy optimizer state. Each call to `next` runs one surrogate fit,
/// acquisition maximization and evaluation.
pub struct Optimizer<'a, M: Model> {
    model: &'a M,
    cfg: OptConfig,
    rng: ChaCha8Rng,
    sampler: HyperSampler,
    scaling: Option<ScalingTransform>,
    evals: Vec<Evaluation>,
    m: usize,
    finished: bool,
}

/// Starts an optimization of `m`'s θ. Validation failures are returned
/// before any evaluation is made.
pub fn doopt<M: Model>(m: &M, cfg: OptConfig) -> Result<Optimizer<'_, M>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let report = validate(m, DEFAULT_PROBE_BUDGET, &mut rng);
    if !report.ok {
        return Err(Error::Validation(report));
    }
    let dim = run_prior(m, &mut rng)?.theta.flat_len();
    let hyper_cfg = HyperSamplerConfig {
        n_samples: cfg.n_hyper_samples,
        ..cfg.hyper_sampler.clone()
    };
    let sampler = HyperSampler::new(dim, Hyperprior::with_convention(cfg.hyperprior_convention), hyper_cfg)?;
    Ok(Optimizer {
        model: m,
        cfg,
        rng,
        sampler,
        scaling: None,
        evals: Vec::new(),
        m: 0,
        finished: false,
    })
}

impl<'a, M: Model> Optimizer<'a, M> {
    pub fn config(&self) -> &OptConfig {
        &self.cfg
    }

    pub fn scaling(&self) -> Option<&ScalingTransform> {
        self.scaling.as_ref()
    }

    /// Every `(θ, log z)` evaluated so far, initial points included.
    pub fn evaluations(&self) -> impl Iterator<Item = (&Theta, f64)> {
        self.evals.iter().map(|e| (&e.theta, e.log_z))
    }

    pub fn n_evaluations(&self) -> usize {
        self.evals.len()
    }

    fn evaluate(&mut self, theta: Theta) -> Result<Evaluation> {
        let EvidenceEstimate { log_z, outputs, .. } =
            smc_marginal(self.model, &theta, self.cfg.n_particles, self.cfg.resample, &mut self.rng)?;
        Ok(Evaluation {
            flat: theta.flatten(),
            theta,
            log_z,
            outputs,
        })
    }

    fn initialize(&mut self) -> Result<()> {
        let mut draws = Vec::with_capacity(self.cfg.n_init);
        for _ in 0..self.cfg.n_init {
            let theta = run_prior(self.model, &mut self.rng)?.theta;
            draws.push(theta.flatten());
            let e = self.evaluate(theta)?;
            self.evals.push(e);
        }
        // Keep drawing if too few evaluations had finite evidence to set
        // the output scaling.
        let cap = 20 * self.cfg.n_init;
        while self.evals.iter().filter(|e| e.log_z.is_finite()).count() < 2 {
            if self.evals.len() >= cap {
                return Err(Error::Numerical(format!(
                    "fewer than 2 of {cap} prior draws had finite evidence"
                )));
            }
            let theta = run_prior(self.model, &mut self.rng)?.theta;
            draws.push(theta.flatten());
            let e = self.evaluate(theta)?;
            self.evals.push(e);
        }
        let pairs: Vec<(Vec<f64>, f64)> = self.evals.iter().map(|e| (e.flat.clone(), e.log_z)).collect();
        self.scaling = Some(init_scaling(&draws, &pairs)?);
        Ok(())
    }

    fn prior_proposal(&mut self) -> Result<Theta> {
        Ok(run_prior(self.model, &mut self.rng)?.theta)
    }

    fn propose(&mut self) -> Result<Proposal> {
        let scaling = self.scaling.as_ref().expect("initialized").clone();
        let t0 = Instant::now();
        let data = GpDataset::new(
            self.evals.iter().map(|e| scaling.scale_input(&e.flat)).collect(),
            self.evals.iter().map(|e| scaling.scale_output(e.log_z)).collect(),
        )?;
        let mean = MeanFunction::bump(scaling.r_e(), scaling.r_inf())?;
        let hypers = self.sampler.sample(&data, mean, &mut self.rng);
        let mixture = GpMixture::fit(&data, &hypers.samples, mean);
        let surrogate_ms = t0.elapsed().as_millis() as u64;

        let last = self.evals.len() - 1;
        let mixture = match mixture {
            Ok(m) => m,
            Err(e) => {
                warn!("surrogate fit failed ({e}); proposing a prior draw");
                let theta_next = self.prior_proposal()?;
                let best = self.best_observed_index();
                return Ok(Proposal {
                    theta_next,
                    incumbent: best.unwrap_or(last),
                    u_star: best.map_or(f64::NEG_INFINITY, |i| self.evals[i].log_z),
                    log_ei: f64::NEG_INFINITY,
                    hyper_acceptance: hypers.acceptance_rate,
                    hyper_fallback: hypers.fallback,
                    proposal_fallback: true,
                    ais_acceptance: 0.0,
                    surrogate_ms,
                    acquisition_ms: 0,
                });
            }
        };
        let (incumbent, best_scaled) = mixture.incumbent(&data.inputs).expect("non-empty data");
        let u_star = scaling.unscale_output(best_scaled);

        let t1 = Instant::now();
        let log_zeta = |t: &Theta| mixture.log_expected_improvement(&scaling.scale_input(&t.flatten()), best_scaled);
        let ais = ais_maximize_log(
            self.model,
            log_zeta,
            &self.cfg.schedule,
            self.cfg.n_ais_chains,
            scaling.input_half_width(),
            &mut self.rng,
        );
        let acquisition_ms = t1.elapsed().as_millis() as u64;
        let (theta_next, log_ei, ais_acceptance, proposal_fallback) = match ais {
            Ok(r) if r.log_zeta > f64::NEG_INFINITY => (r.theta, r.log_zeta, r.acceptance_rate, false),
            Ok(_) => {
                warn!("acquisition is zero at every visited state; proposing a prior draw");
                (self.prior_proposal()?, f64::NEG_INFINITY, 0.0, true)
            }
            Err(e @ Error::Model(_)) => return Err(e),
            Err(e) => {
                warn!("acquisition maximization failed ({e}); proposing a prior draw");
                (self.prior_proposal()?, f64::NEG_INFINITY, 0.0, true)
            }
        };
        Ok(Proposal {
            theta_next,
            incumbent,
            u_star,
            log_ei,
            hyper_acceptance: hypers.acceptance_rate,
            hyper_fallback: hypers.fallback,
            proposal_fallback,
            ais_acceptance,
            surrogate_ms,
            acquisition_ms,
        })
    }

    fn best_observed_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.evals.iter().enumerate() {
            if e.log_z.is_finite() && best.is_none_or(|b| e.log_z >= self.evals[b].log_z) {
                best = Some(i);
            }
        }
        best
    }

    fn step(&mut self) -> Result<OptimizationStep> {
        let start = Instant::now();
        if self.scaling.is_none() {
            self.initialize()?;
        }
        let p = self.propose()?;
        let t2 = Instant::now();
        let e = self.evaluate(p.theta_next)?;
        let evaluation_ms = t2.elapsed().as_millis() as u64;
        if let Some(s) = self.scaling.as_mut() {
            s.update(&e.flat, e.log_z);
        }
        let theta_next = e.theta.clone();
        let log_z_next = e.log_z;
        self.evals.push(e);
        self.m += 1;

        let best_observed_log_z = self
            .best_observed_index()
            .map_or(f64::NEG_INFINITY, |i| self.evals[i].log_z);
        let inc = &self.evals[p.incumbent];
        debug!(
            "iteration {}: u* = {:.4}, log z(next) = {:.4}, best observed = {:.4}",
            self.m, p.u_star, log_z_next, best_observed_log_z
        );
        Ok(OptimizationStep {
            m: self.m,
            theta_star: inc.theta.clone(),
            omega_star: inc.outputs.clone(),
            u_star: p.u_star,
            theta_next,
            log_z_next,
            diagnostics: StepDiagnostics {
                hyper_acceptance: p.hyper_acceptance,
                hyper_fallback: p.hyper_fallback,
                proposal_fallback: p.proposal_fallback,
                log_ei_next: p.log_ei,
                ais_acceptance: p.ais_acceptance,
                best_observed_log_z,
                surrogate_ms: p.surrogate_ms,
                acquisition_ms: p.acquisition_ms,
                evaluation_ms,
                wall_ms: start.elapsed().as_millis() as u64,
            },
        })
    }
}

impl<M: Model> Iterator for Optimizer<'_, M> {
    type Item = Result<OptimizationStep>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished || self.m >= self.cfg.max_iterations {
            return None;
        }
        let r = self.step();
        if r.is_err() {
            self.finished = true;
        }
        Some(r)
    }
}
