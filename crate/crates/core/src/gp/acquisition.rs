//! Expected improvement under a mixture of GP posteriors, one per sampled
//! hyperparameter setting.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::kernel::GpHyperparameters;
use super::mean::MeanFunction;
use super::posterior::{GpDataset, GpPosterior};
use crate::error::{Error, Result};

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `ln(φ(z) + zΦ(z))`, accurate far into the lower tail.
fn log_h(z: f64) -> f64 {
    if z > -6.0 {
        return (normal_pdf(z) + z * normal_cdf(z)).ln();
    }
    let t = -z;
    let log_phi = -0.5 * t * t - 0.5 * (2.0 * PI).ln();
    if t > 1e4 {
        return log_phi - 2.0 * t.ln() + (1.0 - 3.0 / (t * t)).ln();
    }
    // Mills ratio Φ(−t)/φ(t) by its continued fraction, then h = φ(1 − tR).
    let mut frac = t;
    for k in (1..=80).rev() {
        frac = t + k as f64 / frac;
    }
    let mills = 1.0 / frac;
    log_phi + (1.0 - t * mills).ln()
}

/// Expected improvement over `best` of a normal with mean `mu` and std `sigma`.
pub fn ei_single(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - best).max(0.0);
    }
    let z = (mu - best) / sigma;
    (sigma * (normal_pdf(z) + z * normal_cdf(z))).max(0.0)
}

/// Natural log of [`ei_single`], finite wherever `sigma > 0`.
pub fn log_ei_single(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - best).max(0.0).ln();
    }
    sigma.ln() + log_h((mu - best) / sigma)
}

/// Equally weighted mixture of GP posteriors.
#[derive(Debug, Clone)]
pub struct GpMixture {
    components: Vec<GpPosterior>,
}

impl GpMixture {
    pub fn fit(data: &GpDataset, hypers: &[GpHyperparameters], mean: MeanFunction) -> Result<Self> {
        if hypers.is_empty() {
            return Err(Error::Parameter("GP mixture needs at least one component".into()));
        }
        let mut components = Vec::with_capacity(hypers.len());
        let mut last_err = None;
        for h in hypers {
            match GpPosterior::fit(data, h, mean) {
                Ok(p) => components.push(p),
                Err(e) => last_err = Some(e),
            }
        }
        if components.is_empty() {
            return Err(last_err.expect("at least one failure"));
        }
        Ok(GpMixture { components })
    }

    pub fn components(&self) -> &[GpPosterior] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn mean_at(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.mean_at(x)).sum::<f64>() / self.len() as f64
    }

    /// Mixture mean and variance of the latent function.
    pub fn predict_latent(&self, x: &[f64]) -> (f64, f64) {
        let n = self.len() as f64;
        let preds: Vec<(f64, f64)> = self.components.iter().map(|c| c.predict_latent(x)).collect();
        let mu = preds.iter().map(|p| p.0).sum::<f64>() / n;
        let second = preds.iter().map(|(m, v)| v + m * m).sum::<f64>() / n;
        (mu, (second - mu * mu).max(0.0))
    }

    /// Incumbent: the evaluated input with the highest mixture mean. Ties go
    /// to the later point. Returns the index and the mean.
    pub fn incumbent(&self, inputs: &[Vec<f64>]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in inputs.iter().enumerate() {
            let m = self.mean_at(x);
            if best.is_none_or(|(_, b)| m >= b) {
                best = Some((i, m));
            }
        }
        best
    }

    /// Expected improvement over `best`, averaged over components, using the
    /// latent (noise-free) predictive std.
    pub fn expected_improvement(&self, x: &[f64], best: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let (mu, var) = c.predict_latent(x);
                ei_single(mu, var.sqrt(), best)
            })
            .sum::<f64>()
            / self.len() as f64
    }

    /// Log of [`expected_improvement`](Self::expected_improvement), computed
    /// in log space so it stays finite in regions where the improvement
    /// underflows.
    pub fn log_expected_improvement(&self, x: &[f64], best: f64) -> f64 {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let (mu, var) = c.predict_latent(x);
                log_ei_single(mu, var.sqrt(), best)
            })
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln() - (self.len() as f64).ln()
    }
}
