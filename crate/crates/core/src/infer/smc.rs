use rand::{Rng, RngCore};

use crate::error::Result;
use crate::ppl::{Execution, Handler, Model, StepOutcome, Theta, Value};

/// Evidence estimate for fixed θ, with weighted posterior output samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceEstimate {
    /// Estimate of `log p(Y, θ)`, including θ's prior density.
    pub log_z: f64,
    /// Program outputs with normalized weights.
    pub outputs: Vec<(Value, f64)>,
    pub ess: f64,
    pub n_particles: usize,
}

impl EvidenceEstimate {
    fn invalid(n_particles: usize) -> Self {
        EvidenceEstimate {
            log_z: f64::NEG_INFINITY,
            outputs: Vec::new(),
            ess: 0.0,
            n_particles,
        }
    }
}

/// Maximum number of output samples retained per estimate.
pub const MAX_RETAINED_OUTPUTS: usize = 100;

/// Sequential Monte Carlo over the marginal-mode program at `theta`.
///
/// Every particle replays θ, scoring it under its prior, and advances from
/// one observe barrier to the next. With `resample` set, systematic
/// resampling is applied at a barrier whenever the effective sample size
/// falls below half the particle count. Without it this is importance
/// sampling from the prior over the latents.
pub fn smc_marginal<M: Model>(
    m: &M,
    theta: &Theta,
    n_particles: usize,
    resample: bool,
    rng: &mut dyn RngCore,
) -> Result<EvidenceEstimate> {
    let n = n_particles.max(1);
    let handler = Handler::replay(theta).without_choices();
    let mut particles: Vec<Execution<M::State>> = (0..n).map(|_| Execution::start(m)).collect();
    // Log-weight each particle carried at the previous barrier.
    let mut last = vec![0.0; n];
    let mut log_w = vec![0.0; n];
    let mut weights = vec![1.0 / n as f64; n];
    let mut log_z = 0.0;

    loop {
        let mut running = false;
        for p in particles.iter_mut() {
            if p.advance(m, &handler, rng)? == StepOutcome::Continue {
                running = true;
            }
        }
        for (i, p) in particles.iter().enumerate() {
            let now = p.record.log_weight();
            let inc = if now == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                now - last[i]
            };
            last[i] = now;
            log_w[i] = weights[i].ln() + inc;
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(EvidenceEstimate::invalid(n));
        }
        let total: f64 = log_w.iter().map(|lw| (lw - max).exp()).sum();
        log_z += max + total.ln();
        for (w, lw) in weights.iter_mut().zip(&log_w) {
            *w = (lw - max).exp() / total;
        }
        if !running {
            break;
        }
        if resample && ess(&weights) < 0.5 * n as f64 {
            let idx = systematic_resample(&weights, n, rng);
            particles = idx.iter().map(|&i| particles[i].clone()).collect();
            last = idx.iter().map(|&i| last[i]).collect();
            weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        }
    }

    let ess = ess(&weights);
    let mut outputs: Vec<(Value, f64)> = particles
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.0)
        .filter_map(|(p, &w)| p.record.output.clone().map(|o| (o, w)))
        .collect();
    if outputs.len() > MAX_RETAINED_OUTPUTS {
        let w: Vec<f64> = outputs.iter().map(|(_, w)| *w).collect();
        let idx = systematic_resample(&w, MAX_RETAINED_OUTPUTS, rng);
        let keep = 1.0 / MAX_RETAINED_OUTPUTS as f64;
        outputs = idx.into_iter().map(|i| (outputs[i].0.clone(), keep)).collect();
    } else {
        let total: f64 = outputs.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            outputs.iter_mut().for_each(|(_, w)| *w /= total);
        }
    }
    Ok(EvidenceEstimate {
        log_z,
        outputs,
        ess,
        n_particles: n,
    })
}

/// Effective sample size `1 / Σ wᵢ²` of normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        0.0
    }
}

/// Systematic resampling: `count` ancestor indices drawn with a single
/// uniform offset. `weights` must be normalized.
pub fn systematic_resample(weights: &[f64], count: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let u0: f64 = rng.random::<f64>() / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut cum = weights[0];
    let mut i = 0;
    for j in 0..count {
        let u = u0 + j as f64 / count as f64;
        while u > cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}
