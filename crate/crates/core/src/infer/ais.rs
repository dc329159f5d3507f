use rand::RngCore;

use super::mh::{rmh_transition, RmhState};
use crate::error::{Error, Result};
use crate::ppl::{Model, Theta};
use crate::transform::{log_acquisition, prior_log_density, run_prior};

/// Inverse temperatures and transition settings for annealing from the prior
/// to `prior · ζ`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AnnealingSchedule {
    pub betas: Vec<f64>,
    pub steps_per_beta: usize,
    /// Random-walk standard deviation in scaled units.
    pub rw_scale: f64,
}

impl AnnealingSchedule {
    /// `n` geometrically spaced inverse temperatures from `first` to 1.
    pub fn geometric(n: usize, first: f64, steps_per_beta: usize, rw_scale: f64) -> Self {
        let n = n.max(1);
        let betas = if n == 1 {
            vec![1.0]
        } else {
            let ratio = (1.0 / first).ln() / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { 1.0 } else { first * (ratio * i as f64).exp() })
                .collect()
        };
        AnnealingSchedule {
            betas,
            steps_per_beta,
            rw_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::Parameter("annealing schedule has no temperatures".into()));
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("annealing temperatures must be strictly increasing".into()));
        }
        if self.betas[0] < 0.0 || *self.betas.last().unwrap() != 1.0 {
            return Err(Error::Parameter("annealing temperatures must lie in [0, 1] and end at 1".into()));
        }
        if !(self.rw_scale > 0.0) {
            return Err(Error::Parameter("random-walk scale must be positive".into()));
        }
        Ok(())
    }
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule::geometric(20, 1e-3, 3, 0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisResult {
    /// Visited state with the largest acquisition value.
    pub theta: Theta,
    pub log_zeta: f64,
    /// Final annealed importance weight of each chain.
    pub chain_log_weights: Vec<f64>,
    pub acceptance_rate: f64,
    pub n_visited: usize,
}

/// Maximizes `ζ` over executions of the prior program.
///
/// Each chain starts from a prior draw and is annealed through
/// `prior · ζ^β` with random-walk MH transitions. The result is the best
/// state visited by any chain at any temperature; every candidate is a
/// valid prior execution, so implicit model constraints hold by
/// construction.
pub fn ais_maximize<M, Z>(
    m: &M,
    zeta: Z,
    schedule: &AnnealingSchedule,
    n_chains: usize,
    scales: &[f64],
    rng: &mut dyn RngCore,
) -> Result<AisResult>
where
    M: Model,
    Z: Fn(&Theta) -> f64,
{
    anneal(m, |t: &Theta| log_acquisition(zeta(t)), schedule, n_chains, scales, rng)
}

/// As [`ais_maximize`], with `ln ζ` supplied directly so acquisition values
/// that underflow in linear space still rank correctly.
pub fn ais_maximize_log<M, Z>(
    m: &M,
    log_zeta: Z,
    schedule: &AnnealingSchedule,
    n_chains: usize,
    scales: &[f64],
    rng: &mut dyn RngCore,
) -> Result<AisResult>
where
    M: Model,
    Z: Fn(&Theta) -> f64,
{
    let checked = |t: &Theta| {
        let v = log_zeta(t);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Contract(format!("log acquisition value must be below +inf, got {v}")));
        }
        Ok(v)
    };
    anneal(m, checked, schedule, n_chains, scales, rng)
}

fn anneal<M, Z>(
    m: &M,
    log_zeta: Z,
    schedule: &AnnealingSchedule,
    n_chains: usize,
    scales: &[f64],
    rng: &mut dyn RngCore,
) -> Result<AisResult>
where
    M: Model,
    Z: Fn(&Theta) -> Result<f64>,
{
    schedule.validate()?;
    let mut best: Option<(Theta, f64)> = None;
    let consider = |t: &Theta, lz: f64, best: &mut Option<(Theta, f64)>| {
        if best.as_ref().is_none_or(|(_, b)| lz > *b) {
            *best = Some((t.clone(), lz));
        }
    };
    let mut chain_log_weights = Vec::with_capacity(n_chains);
    let mut visited = 0;
    let mut accepted = 0;
    let mut proposed = 0;
    for _ in 0..n_chains.max(1) {
        let theta = run_prior(m, rng)?.theta;
        let lz = log_zeta(&theta)?;
        let prior = prior_log_density(m, &theta, rng)?;
        consider(&theta, lz, &mut best);
        visited += 1;
        // Chain state carries ln ζ; the tempered weight is formed per step.
        let mut state = RmhState { theta, log_w: lz, prior };
        let mut aw = 0.0;
        let mut prev_beta = 0.0;
        for &beta in &schedule.betas {
            if state.log_w > f64::NEG_INFINITY {
                aw += (beta - prev_beta) * state.log_w;
            } else if beta > prev_beta {
                aw = f64::NEG_INFINITY;
            }
            prev_beta = beta;
            for _ in 0..schedule.steps_per_beta {
                let mut tempered = RmhState {
                    log_w: beta * state.log_w,
                    ..state.clone()
                };
                let mut raw = f64::NAN;
                let moved = rmh_transition(
                    &mut tempered,
                    m,
                    |t| {
                        raw = log_zeta(t)?;
                        Ok(beta * raw)
                    },
                    scales,
                    schedule.rw_scale,
                    rng,
                )?;
                proposed += 1;
                if moved {
                    accepted += 1;
                    visited += 1;
                    state = RmhState {
                        log_w: raw,
                        ..tempered
                    };
                    consider(&state.theta, raw, &mut best);
                }
            }
        }
        chain_log_weights.push(aw);
    }
    let (theta, log_zeta) = best.expect("at least one chain");
    Ok(AisResult {
        theta,
        log_zeta,
        chain_log_weights,
        acceptance_rate: if proposed > 0 { accepted as f64 / proposed as f64 } else { 0.0 },
        n_visited: visited,
    })
}
