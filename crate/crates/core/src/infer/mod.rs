//! Evidence estimation and samplers over θ.

mod ais;
mod mh;
mod pmmh;
mod smc;

use rand::RngCore;

pub use ais::{ais_maximize, ais_maximize_log, AisResult, AnnealingSchedule};
pub use mh::{lmh_step, rmh_step};
pub use pmmh::{pmmh, PmmhConfig, PmmhKernel, PmmhSample};
pub use smc::{ess, smc_marginal, systematic_resample, EvidenceEstimate, MAX_RETAINED_OUTPUTS};

use crate::error::Result;
use crate::ppl::Model;
use crate::transform::run_prior;

/// Per-coordinate half-ranges of `n_draws` prior draws of θ, the raw-space
/// length of one unit of the `[-1, 1]` scaling. Degenerate coordinates get a
/// small positive width.
pub fn prior_scales<M: Model>(m: &M, n_draws: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for _ in 0..n_draws.max(2) {
        let x = run_prior(m, rng)?.theta.flatten();
        if lo.is_empty() {
            lo = x.clone();
            hi = x;
            continue;
        }
        for (i, v) in x.into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    Ok(lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| {
            let w = 0.5 * (h - l);
            if w > 0.0 {
                w
            } else {
                (0.5 * (h + l)).abs().max(1.0) * 1e-6
            }
        })
        .collect())
}
