//! Gaussian-process surrogate over scaled inputs.

pub mod acquisition;
pub mod hmc;
pub mod hyperprior;
pub mod kernel;
pub mod lbfgs;
pub mod mean;
pub mod posterior;
pub mod sampling;

pub use acquisition::{ei_single, log_ei_single, normal_cdf, normal_pdf, GpMixture};
pub use hyperprior::{Hyperprior, SpreadConvention};
pub use kernel::{kernel, GpHyperparameters};
pub use mean::{bump_mean, MeanFunction, BUMP_SENTINEL};
pub use posterior::{jittered_cholesky, log_marginal_likelihood, GpDataset, GpPosterior};
pub use sampling::{log_hyper_posterior, HyperSampler, HyperSamplerConfig, HyperSamples};
