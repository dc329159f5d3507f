//! Posterior sampling of GP hyperparameters: an L-BFGS mode search followed
//! by HMC, warm-started across successive fits.

use log::warn;
use rand::RngCore;

use super::hmc::{hmc_transition, DualAveraging, HmcState};
use super::hyperprior::Hyperprior;
use super::kernel::GpHyperparameters;
use super::lbfgs::{minimize, LbfgsConfig};
use super::mean::MeanFunction;
use super::posterior::{log_marginal_likelihood, GpDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSamplerConfig {
    pub n_samples: usize,
    /// Transitions between retained samples.
    pub thin: usize,
    /// Adaptation transitions on the first fit.
    pub warmup: usize,
    /// Adaptation transitions on later, warm-started fits.
    pub rewarm: usize,
    pub n_leapfrog: usize,
    pub target_accept: f64,
    pub lbfgs: LbfgsConfig,
}

impl Default for HyperSamplerConfig {
    fn default() -> Self {
        HyperSamplerConfig {
            n_samples: 10,
            thin: 2,
            warmup: 40,
            rewarm: 10,
            n_leapfrog: 8,
            target_accept: 0.75,
            lbfgs: LbfgsConfig {
                max_iters: 40,
                ..LbfgsConfig::default()
            },
        }
    }
}

/// Log posterior of the log hyperparameters and its gradient.
pub fn log_hyper_posterior(
    data: &GpDataset,
    log: &[f64],
    mean: MeanFunction,
    prior: &Hyperprior,
) -> Option<(f64, Vec<f64>)> {
    let h = GpHyperparameters::from_log(log.to_vec()).ok()?;
    let (lml, mut g) = log_marginal_likelihood(data, &h, mean).ok()?;
    let (lp, gp) = prior.log_density(&h);
    g.iter_mut().zip(gp).for_each(|(a, b)| *a += b);
    let v = lml + lp;
    (v.is_finite() && g.iter().all(|x| x.is_finite())).then_some((v, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSamples {
    pub samples: Vec<GpHyperparameters>,
    /// Mode found by the optimizer, or the hyperprior mode on fallback.
    pub mode: GpHyperparameters,
    pub acceptance_rate: f64,
    /// True when sampling failed and the hyperprior mode was used instead.
    pub fallback: bool,
}

/// Stateful sampler that carries the chain position and step size between fits.
#[derive(Debug, Clone)]
pub struct HyperSampler {
    config: HyperSamplerConfig,
    prior: Hyperprior,
    dim: usize,
    position: Option<Vec<f64>>,
    step: Option<f64>,
}

impl HyperSampler {
    pub fn new(dim: usize, prior: Hyperprior, config: HyperSamplerConfig) -> Result<Self> {
        if config.n_samples == 0 || config.n_leapfrog == 0 || config.thin == 0 {
            return Err(Error::Parameter(
                "hyperparameter sampler needs positive sample, thinning and leapfrog counts".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.target_accept) || config.target_accept == 0.0 {
            return Err(Error::Parameter(format!(
                "target acceptance {} outside (0, 1)",
                config.target_accept
            )));
        }
        Ok(HyperSampler {
            config,
            prior,
            dim,
            position: None,
            step: None,
        })
    }

    pub fn prior(&self) -> &Hyperprior {
        &self.prior
    }

    pub fn config(&self) -> &HyperSamplerConfig {
        &self.config
    }

    pub fn sample(&mut self, data: &GpDataset, mean: MeanFunction, rng: &mut dyn RngCore) -> HyperSamples {
        let prior = self.prior;
        let mut target = |x: &[f64]| log_hyper_posterior(data, x, mean, &prior);
        let prior_mode: Vec<f64> = self.prior.mode(self.dim).log_values().to_vec();

        // Mode search from the previous position (or the prior mode).
        let start = self.position.clone().unwrap_or_else(|| prior_mode.clone());
        let neg = |x: &[f64]| log_hyper_posterior(data, x, mean, &prior).map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()));
        let opt = minimize(neg, &start, &self.config.lbfgs)
            .or_else(|| minimize(neg, &prior_mode, &self.config.lbfgs));
        let Some(opt) = opt else {
            warn!("hyperparameter posterior undefined at the starting points; using the hyperprior mode");
            return self.fallback();
        };
        let mode = GpHyperparameters::from_log(opt.x.clone()).expect("layout preserved");

        let Some((log_p, grad)) = target(&opt.x) else {
            return self.fallback();
        };
        let mut state = HmcState {
            x: opt.x.clone(),
            log_p,
            grad,
        };
        let inv_mass: Vec<f64> = self.prior.moments(self.dim).iter().map(|(_, s)| s * s).collect();
        let n_leap = self.config.n_leapfrog;

        let (initial_step, n_adapt) = match self.step {
            Some(s) => (s, self.config.rewarm),
            None => (0.5 / n_leap as f64, self.config.warmup),
        };
        let mut da = DualAveraging::new(initial_step, self.config.target_accept);
        for _ in 0..n_adapt {
            let a = hmc_transition(&mut target, &mut state, da.step(), n_leap, &inv_mass, rng);
            da.update(a);
        }
        let step = if n_adapt > 0 { da.adapted_step() } else { initial_step };

        let mut samples = Vec::with_capacity(self.config.n_samples);
        let mut acc = 0.0;
        let mut n_trans = 0;
        for _ in 0..self.config.n_samples {
            for _ in 0..self.config.thin {
                acc += hmc_transition(&mut target, &mut state, step, n_leap, &inv_mass, rng);
                n_trans += 1;
            }
            samples.push(GpHyperparameters::from_log(state.x.clone()).expect("layout preserved"));
        }
        self.position = Some(state.x);
        self.step = Some(step);
        HyperSamples {
            samples,
            mode,
            acceptance_rate: acc / n_trans as f64,
            fallback: false,
        }
    }

    fn fallback(&mut self) -> HyperSamples {
        let mode = self.prior.mode(self.dim);
        HyperSamples {
            samples: vec![mode.clone()],
            mode,
            acceptance_rate: 0.0,
            fallback: true,
        }
    }
}
