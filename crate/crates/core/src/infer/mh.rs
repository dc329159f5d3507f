//! Metropolis–Hastings transitions over θ: lightweight MH proposing from the
//! prior and random-walk MH with local moves.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ppl::{DistKind, Model, Theta, Value};
use crate::transform::{prior_log_density, run_prior, PriorDensity};

/// MH acceptance test on a log acceptance ratio.
pub(crate) fn accept(log_ratio: f64, rng: &mut dyn RngCore) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// One LMH transition: propose θ' from the prior and accept with probability
/// `min(1, exp(eval(θ') − eval(θ)))`; the prior proposal cancels the prior
/// density, so `eval` is the weight excluding prior terms.
pub fn lmh_step<M, E>(current: (Theta, f64), m: &M, mut eval: E, rng: &mut dyn RngCore) -> Result<(Theta, f64)>
where
    M: Model,
    E: FnMut(&Theta) -> Result<f64>,
{
    let proposal = run_prior(m, rng)?.theta;
    let log_w = eval(&proposal)?;
    if log_w == f64::NEG_INFINITY {
        return Ok(current);
    }
    if accept(log_w - current.1, rng) {
        Ok((proposal, log_w))
    } else {
        Ok(current)
    }
}

/// A local proposal together with the pieces of its acceptance ratio.
#[derive(Debug, Clone)]
pub(crate) struct LocalProposal {
    pub theta: Theta,
    pub prior: PriorDensity,
    /// Proposal-asymmetry and Jacobian terms, `log q(θ|θ') − log q(θ'|θ)`
    /// with the prior density of prior-resampled components cancelled out.
    pub log_correction: f64,
}

/// Random-walk proposal around `current`.
///
/// Continuous components move by Gaussian steps of standard deviation
/// `rw_scale · scales[d]` per flattened coordinate. Simplex components
/// (Dirichlet-bound) are jittered in log space and renormalized. Integer
/// components are redrawn from the prior with probability `1/D`.
pub(crate) fn propose_local<M: Model>(
    m: &M,
    current: &Theta,
    current_prior: &PriorDensity,
    scales: &[f64],
    rw_scale: f64,
    rng: &mut dyn RngCore,
) -> Result<LocalProposal> {
    if !(rw_scale > 0.0 && rw_scale.is_finite()) {
        return Err(Error::Parameter(format!("random-walk scale must be positive, got {rw_scale}")));
    }
    let dim = current.flat_len().max(1);
    if scales.len() != current.flat_len() {
        return Err(Error::Parameter(format!(
            "expected {} random-walk scales, got {}",
            current.flat_len(),
            scales.len()
        )));
    }
    let mut log_correction = 0.0;
    let mut fresh: Option<Theta> = None;
    let mut redrawn = Vec::new();
    let mut offset = 0;
    let mut values = Vec::with_capacity(current.len());
    for (k, v) in current.values().iter().enumerate() {
        let kind = current_prior.bindings.get(k).map(|b| b.kind);
        let width = v.flat_len();
        let sc = &scales[offset..offset + width];
        offset += width;
        let next = match (v, kind) {
            (Value::Real(x), _) => {
                let z: f64 = StandardNormal.sample(rng);
                Value::Real(x + rw_scale * sc[0] * z)
            }
            (Value::Vector(p), Some(DistKind::Dirichlet)) => {
                let logs: Vec<f64> = p
                    .iter()
                    .map(|&x| {
                        let z: f64 = StandardNormal.sample(rng);
                        x.max(f64::MIN_POSITIVE).ln() + rw_scale * z
                    })
                    .collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let q: Vec<f64> = exps.into_iter().map(|e| e / total).collect();
                // Symmetric in centred log-ratio coordinates; the Jacobian to
                // simplex coordinates is Π pᵢ.
                log_correction += q.iter().map(|x| x.ln()).sum::<f64>()
                    - p.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).sum::<f64>();
                Value::Vector(q)
            }
            (Value::Vector(x), _) => Value::Vector(
                x.iter()
                    .zip(sc)
                    .map(|(x, s)| {
                        let z: f64 = StandardNormal.sample(rng);
                        x + rw_scale * s * z
                    })
                    .collect(),
            ),
            (Value::Int(_), _) => {
                if rng.random::<f64>() < 1.0 / dim as f64 {
                    if fresh.is_none() {
                        fresh = Some(run_prior(m, rng)?.theta);
                    }
                    redrawn.push(k);
                    fresh.as_ref().map(|t| t.get(k).clone()).unwrap_or_else(|| v.clone())
                } else {
                    v.clone()
                }
            }
            (other, _) => other.clone(),
        };
        values.push(next);
    }
    let theta = Theta::new(values);
    let prior = prior_log_density(m, &theta, rng)?;
    if prior.is_supported() {
        for &k in &redrawn {
            let old = current_prior.bindings.get(k).map_or(0.0, |b| b.log_density);
            let new = prior.bindings.get(k).map_or(0.0, |b| b.log_density);
            log_correction += old - new;
        }
    }
    Ok(LocalProposal {
        theta,
        prior,
        log_correction,
    })
}

/// Chain state for random-walk MH with the current prior density cached.
#[derive(Debug, Clone)]
pub(crate) struct RmhState {
    pub theta: Theta,
    pub log_w: f64,
    pub prior: PriorDensity,
}

/// One RMH transition targeting `exp(eval(θ)) · p(θ)`. Returns whether the
/// proposal was accepted.
pub(crate) fn rmh_transition<M, E>(
    state: &mut RmhState,
    m: &M,
    mut eval: E,
    scales: &[f64],
    rw_scale: f64,
    rng: &mut dyn RngCore,
) -> Result<bool>
where
    M: Model,
    E: FnMut(&Theta) -> Result<f64>,
{
    let p = propose_local(m, &state.theta, &state.prior, scales, rw_scale, rng)?;
    if !p.prior.is_supported() {
        return Ok(false);
    }
    let log_w = eval(&p.theta)?;
    if log_w == f64::NEG_INFINITY {
        return Ok(false);
    }
    let ratio = log_w - state.log_w + p.prior.total - state.prior.total + p.log_correction;
    if accept(ratio, rng) {
        *state = RmhState {
            theta: p.theta,
            log_w,
            prior: p.prior,
        };
        Ok(true)
    } else {
        Ok(false)
    }
}

/// One random-walk MH transition targeting `exp(eval(θ)) · p(θ)`.
///
/// `scales` gives the raw-space length of one scaled unit per flattened θ
/// coordinate; continuous steps have standard deviation `rw_scale` in
/// scaled units.
pub fn rmh_step<M, E>(
    current: (Theta, f64),
    m: &M,
    eval: E,
    scales: &[f64],
    rw_scale: f64,
    rng: &mut dyn RngCore,
) -> Result<(Theta, f64)>
where
    M: Model,
    E: FnMut(&Theta) -> Result<f64>,
{
    let prior = prior_log_density(m, &current.0, rng)?;
    let mut state = RmhState {
        theta: current.0,
        log_w: current.1,
        prior,
    };
    rmh_transition(&mut state, m, eval, scales, rw_scale, rng)?;
    Ok((state.theta, state.log_w))
}
