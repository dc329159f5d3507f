//! Models addressable by string id, for the CLI and the experiment harness.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bopp::ppl::{Model, Theta};

use crate::data::{load_rows, load_series};
use crate::error::{BenchError, Result};
use crate::functions::Benchmark;
use crate::models::*;

pub const MODEL_IDS: &[&str] = &[
    "bimodal",
    "branin",
    "hartmann6",
    "kalman",
    "hmm",
    "gmm",
    "dirichlet",
    "compliant",
    "bad-multiplicity",
    "bad-measure",
    "bad-direct",
    "bad-unknown-measure",
];

/// Settings for the parameterized models. Unset fields take defaults.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Seed for synthetic data (and the Kalman observation matrix).
    pub data_seed: u64,
    /// Number of time steps for simulated Kalman/HMM data.
    pub steps: Option<usize>,
    /// Kalman observation dimension.
    pub obs_dim: Option<usize>,
    /// CSV file to load instead of simulating.
    pub data: Option<PathBuf>,
    /// Number of GMM components.
    pub components: Option<usize>,
    /// Gaussian noise on benchmark-function values.
    pub noise_std: Option<f64>,
    pub bimodal: Option<BimodalConfig>,
}

/// Parameters the data were generated from, for distance-to-truth metrics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum GroundTruth {
    Kalman { beta: f64, eta: f64 },
    Hmm { means: Vec<f64> },
}

/// A registry model with its data already built.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Bimodal(BimodalModel),
    Function(FunctionModel),
    Kalman(KalmanModel),
    Hmm(HmmModel),
    Gmm(GmmModel),
    Dirichlet(DirichletModel),
    Probe(RuleProbe),
}

/// Generic operation over whichever concrete model an [`AnyModel`] holds.
pub trait ModelVisitor {
    type Output;
    fn visit<M: Model>(self, m: &M) -> Self::Output;
}

impl AnyModel {
    pub fn visit<V: ModelVisitor>(&self, v: V) -> V::Output {
        match self {
            AnyModel::Bimodal(m) => v.visit(m),
            AnyModel::Function(m) => v.visit(m),
            AnyModel::Kalman(m) => v.visit(m),
            AnyModel::Hmm(m) => v.visit(m),
            AnyModel::Gmm(m) => v.visit(m),
            AnyModel::Dirichlet(m) => v.visit(m),
            AnyModel::Probe(m) => v.visit(m),
        }
    }

    pub fn optim_ids(&self) -> Vec<String> {
        struct Ids;
        impl ModelVisitor for Ids {
            type Output = Vec<String>;
            fn visit<M: Model>(self, m: &M) -> Vec<String> {
                m.optim_ids().to_vec()
            }
        }
        self.visit(Ids)
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub id: String,
    pub model: AnyModel,
    pub truth: Option<GroundTruth>,
}

impl BuiltModel {
    /// Distance from θ to the ground truth, if the model has one.
    pub fn distance(&self, theta: &Theta) -> Option<f64> {
        match (&self.truth, &self.model) {
            (Some(GroundTruth::Kalman { beta, eta }), _) => {
                let b = theta.get(0).as_real().ok()?;
                let e = theta.get(1).as_real().ok()?;
                Some(kalman_distance(b, e, *beta, *eta))
            }
            (Some(GroundTruth::Hmm { means }), AnyModel::Hmm(m)) => {
                let est = m.means_of(theta).ok()?;
                Some(hmm_distance(&est, means))
            }
            _ => None,
        }
    }
}

fn unknown(id: &str) -> BenchError {
    BenchError::UnknownModel {
        id: id.to_string(),
        known: MODEL_IDS.join(", "),
    }
}

/// Default Kalman desk-scale settings: 100 steps of 20-dimensional data.
pub fn build_kalman(opts: &ModelOptions) -> Result<(KalmanModel, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.data_seed);
    let k = opts.obs_dim.unwrap_or(20);
    let cfg = KalmanConfig::synthetic(k, opts.steps.unwrap_or(100), &mut rng)?;
    let y = match &opts.data {
        Some(p) => load_rows(p)?,
        None => simulate_kalman_data(&cfg, &mut rng)?,
    };
    let truth = GroundTruth::Kalman {
        beta: cfg.beta,
        eta: cfg.eta,
    };
    Ok((KalmanModel::new(&cfg, &y)?, truth))
}

/// Default HMM desk-scale settings: 200 steps.
pub fn build_hmm(opts: &ModelOptions) -> Result<(HmmModel, GroundTruth)> {
    let cfg = HmmConfig {
        t: opts.steps.unwrap_or(200),
        ..HmmConfig::default()
    };
    let y = match &opts.data {
        Some(p) => load_series(p)?,
        None => simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(opts.data_seed))?.y,
    };
    let truth = GroundTruth::Hmm {
        means: cfg.means.clone(),
    };
    Ok((HmmModel::new(y, cfg.emission_std)?, truth))
}

pub fn build_model(id: &str, opts: &ModelOptions) -> Result<BuiltModel> {
    let (model, truth) = match id {
        "bimodal" => (
            AnyModel::Bimodal(BimodalModel::new(opts.bimodal.clone().unwrap_or_default())),
            None,
        ),
        "branin" | "hartmann6" => {
            let b = if id == "branin" { Benchmark::Branin } else { Benchmark::Hartmann6 };
            let m = FunctionModel::new(b).with_noise(opts.noise_std.unwrap_or(0.0));
            (AnyModel::Function(m), None)
        }
        "kalman" => {
            let (m, t) = build_kalman(opts)?;
            (AnyModel::Kalman(m), Some(t))
        }
        "hmm" => {
            let (m, t) = build_hmm(opts)?;
            (AnyModel::Hmm(m), Some(t))
        }
        "gmm" => {
            let data = match &opts.data {
                Some(p) => load_rows(p)?,
                None => synthetic_gmm_data(30, &mut ChaCha8Rng::seed_from_u64(opts.data_seed)),
            };
            (AnyModel::Gmm(GmmModel::new(data, opts.components.unwrap_or(10))?), None)
        }
        "dirichlet" => (AnyModel::Dirichlet(DirichletModel::default()), None),
        "compliant" => (AnyModel::Probe(RuleProbe::new(Breakage::None)), None),
        "bad-multiplicity" => (AnyModel::Probe(RuleProbe::new(Breakage::Multiplicity)), None),
        "bad-measure" => (AnyModel::Probe(RuleProbe::new(Breakage::MeasureMismatch)), None),
        "bad-direct" => (AnyModel::Probe(RuleProbe::new(Breakage::NotDirectSample)), None),
        "bad-unknown-measure" => (AnyModel::Probe(RuleProbe::new(Breakage::UnknownMeasure)), None),
        _ => return Err(unknown(id)),
    };
    Ok(BuiltModel {
        id: id.to_string(),
        model,
        truth,
    })
}
