use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::kernel::GpHyperparameters;

/// How the second argument of each hyperprior normal is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadConvention {
    #[default]
    StdDev,
    Variance,
}

/// Independent normal priors on the log hyperparameters, set for inputs and
/// outputs scaled to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Hyperprior {
    pub log_sigma_n: (f64, f64),
    pub log_sigma_32: (f64, f64),
    pub log_sigma_52: (f64, f64),
    pub log_rho: (f64, f64),
    pub log_varrho: (f64, f64),
    pub convention: SpreadConvention,
}

impl Default for Hyperprior {
    fn default() -> Self {
        Hyperprior {
            log_sigma_n: (-5.0, 2.0),
            log_sigma_32: (-7.0, 0.5),
            log_sigma_52: (-0.5, 0.15),
            log_rho: (-1.5, 0.5),
            log_varrho: (-1.0, 0.5),
            convention: SpreadConvention::StdDev,
        }
    }
}

impl Hyperprior {
    pub fn with_convention(convention: SpreadConvention) -> Self {
        Hyperprior {
            convention,
            ..Self::default()
        }
    }

    fn std(&self, spread: f64) -> f64 {
        match self.convention {
            SpreadConvention::StdDev => spread,
            SpreadConvention::Variance => spread.sqrt(),
        }
    }

    /// Per-parameter (mean, std) in log space for a `dim`-dimensional input.
    pub fn moments(&self, dim: usize) -> Vec<(f64, f64)> {
        let mut out = vec![
            (self.log_sigma_n.0, self.std(self.log_sigma_n.1)),
            (self.log_sigma_32.0, self.std(self.log_sigma_32.1)),
            (self.log_sigma_52.0, self.std(self.log_sigma_52.1)),
        ];
        out.extend(std::iter::repeat_n((self.log_rho.0, self.std(self.log_rho.1)), dim));
        out.extend(std::iter::repeat_n((self.log_varrho.0, self.std(self.log_varrho.1)), dim));
        out
    }

    /// Log density of the log-hyperparameters and its gradient.
    pub fn log_density(&self, h: &GpHyperparameters) -> (f64, Vec<f64>) {
        let moments = self.moments(h.dim());
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(moments.len());
        for (x, (mu, sd)) in h.log_values().iter().zip(moments) {
            let z = (x - mu) / sd;
            value += -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            grad.push(-z / sd);
        }
        (value, grad)
    }

    pub fn mode(&self, dim: usize) -> GpHyperparameters {
        GpHyperparameters::from_log(self.moments(dim).into_iter().map(|(m, _)| m).collect())
            .expect("valid hyperparameter layout")
    }

    pub fn sample(&self, dim: usize, rng: &mut dyn RngCore) -> GpHyperparameters {
        let log = self
            .moments(dim)
            .into_iter()
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect();
        GpHyperparameters::from_log(log).expect("valid hyperparameter layout")
    }
}
