use rand::RngCore;

use super::mh::{accept, propose_local};
use super::smc::smc_marginal;
use crate::error::Result;
use crate::ppl::{Model, Theta};
use crate::transform::{prior_log_density, run_prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PmmhKernel {
    /// Independent proposals from the prior.
    Lmh,
    /// Local random-walk proposals.
    Rmh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmmhConfig {
    pub n_iters: usize,
    pub n_particles: usize,
    pub kernel: PmmhKernel,
    pub rw_scale: f64,
    /// Raw-space length of one scaled unit per flattened θ coordinate, used by
    /// the random-walk kernel.
    pub scales: Vec<f64>,
}

/// One PMMH iteration: the chain state after the MH decision plus the
/// proposal that was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmhSample {
    pub theta: Theta,
    pub log_z: f64,
    pub accepted: bool,
    pub proposed: Theta,
    pub proposed_log_z: f64,
}

/// Particle marginal Metropolis–Hastings over θ, each iteration costing one
/// evidence estimate. A state's stored estimate is the one produced when it
/// was proposed and is never refreshed.
pub fn pmmh<M: Model>(m: &M, cfg: &PmmhConfig, rng: &mut dyn RngCore) -> Result<Vec<PmmhSample>> {
    let mut chain = Vec::with_capacity(cfg.n_iters);
    if cfg.n_iters == 0 {
        return Ok(chain);
    }
    let theta = run_prior(m, rng)?.theta;
    let log_z = smc_marginal(m, &theta, cfg.n_particles, true, rng)?.log_z;
    let mut prior = prior_log_density(m, &theta, rng)?;
    let mut current = (theta, log_z);
    chain.push(PmmhSample {
        theta: current.0.clone(),
        log_z,
        accepted: true,
        proposed: current.0.clone(),
        proposed_log_z: log_z,
    });
    for _ in 1..cfg.n_iters {
        let (proposed, proposal_prior, log_ratio_extra) = match cfg.kernel {
            PmmhKernel::Lmh => {
                let t = run_prior(m, rng)?.theta;
                let p = prior_log_density(m, &t, rng)?;
                // Prior proposal: the prior factors cancel, leaving the
                // likelihood ratio.
                let extra = prior.total - p.total;
                (t, p, extra)
            }
            PmmhKernel::Rmh => {
                let p = propose_local(m, &current.0, &prior, &cfg.scales, cfg.rw_scale, rng)?;
                (p.theta, p.prior, p.log_correction)
            }
        };
        let log_z = if proposal_prior.is_supported() {
            smc_marginal(m, &proposed, cfg.n_particles, true, rng)?.log_z
        } else {
            f64::NEG_INFINITY
        };
        let accepted = log_z > f64::NEG_INFINITY && accept(log_z - current.1 + log_ratio_extra, rng);
        if accepted {
            current = (proposed.clone(), log_z);
            prior = proposal_prior;
        }
        chain.push(PmmhSample {
            theta: current.0.clone(),
            log_z: current.1,
            accepted,
            proposed,
            proposed_log_z: log_z,
        });
    }
    Ok(chain)
}
