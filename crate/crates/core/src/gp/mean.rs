//! Non-stationary prior mean: flat inside the explored region, decaying
//! towards a hard boundary outside it.

use crate::error::{Error, Result};

/// Value returned at and beyond `r_inf`.
pub const BUMP_SENTINEL: f64 = -1e6;

/// Bump mean at radius `r`: zero up to `r_e`, then
/// `ln((r_inf − r)/(r_inf − r_e)) + (r − r_e)/(r_inf − r_e)`, which has zero
/// value and slope at `r_e` and falls to `−∞` at `r_inf`.
pub fn bump_mean(r: f64, r_e: f64, r_inf: f64) -> Result<f64> {
    if !(r_e < r_inf) {
        return Err(Error::Parameter(format!("bump mean needs r_e < r_inf, got {r_e} and {r_inf}")));
    }
    Ok(bump_unchecked(r, r_e, r_inf))
}

fn bump_unchecked(r: f64, r_e: f64, r_inf: f64) -> f64 {
    if r <= r_e {
        0.0
    } else if r >= r_inf {
        BUMP_SENTINEL
    } else {
        let span = r_inf - r_e;
        ((r_inf - r) / span).ln() + (r - r_e) / span
    }
}

/// GP prior mean over scaled inputs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum MeanFunction {
    Zero,
    /// Bump mean of the Euclidean radius from the origin.
    Bump { r_e: f64, r_inf: f64 },
}

impl MeanFunction {
    pub fn bump(r_e: f64, r_inf: f64) -> Result<Self> {
        bump_mean(0.0, r_e, r_inf)?;
        Ok(MeanFunction::Bump { r_e, r_inf })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Bump { r_e, r_inf } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                bump_unchecked(r, r_e, r_inf)
            }
        }
    }
}
