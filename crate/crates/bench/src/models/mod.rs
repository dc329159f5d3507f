//! Benchmark and experiment models.

pub mod bimodal;
pub mod dirichlet;
pub mod functions;
pub mod gmm;
pub mod hmm;
pub mod invalid;
pub mod kalman;

pub use bimodal::{make_bimodal_model, BimodalConfig, BimodalModel};
pub use dirichlet::DirichletModel;
pub use functions::FunctionModel;
pub use gmm::{synthetic_gmm_data, GmmModel};
pub use hmm::{hmm_distance, hmm_means, simulate_hmm_data, HmmConfig, HmmData, HmmModel, HmmProposal, MAX_STATES};
pub use invalid::{Breakage, RuleProbe};
pub use kalman::{
    kalman_distance, pickover_step, simulate_kalman_data, KalmanConfig, KalmanModel, KalmanProposal,
};
