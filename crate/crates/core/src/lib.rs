//! Marginal maximum a posteriori estimation for trace-based probabilistic
//! models.
//!
//! A [`Model`] declares a subset of its random choices as optimization
//! variables θ. [`bo::doopt`] maximizes the evidence `log p(Y, θ)` over θ while
//! the remaining latent variables are integrated out by particle inference,
//! using Gaussian-process Bayesian optimization that draws on the model
//! itself for domain scaling and for constraint-respecting acquisition
//! maximization.

pub mod bo;
pub mod error;
pub mod gp;
pub mod infer;
pub mod ppl;
pub mod transform;

pub use error::{Error, Result, Rule, Signal, Violation};
pub use ppl::{Ctx, Dist, Flow, FnModel, Handler, Model, Theta, Value};
