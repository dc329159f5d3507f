//! One-dimensional target with a prior centred between two likelihood modes.

use bopp::ppl::{normal_ln_pdf, Ctx, Dist, Flow, Model, Value};
use bopp::Signal;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BimodalConfig {
    pub prior_std: f64,
    pub likelihood_std: f64,
    pub offset: f64,
    pub y: f64,
}

impl Default for BimodalConfig {
    fn default() -> Self {
        BimodalConfig {
            prior_std: 0.5,
            likelihood_std: 0.5,
            offset: 5.0,
            y: 0.0,
        }
    }
}

/// `θ ~ N(0, prior_std)`, `y ~ N(offset − |θ|, likelihood_std)`.
#[derive(Debug, Clone)]
pub struct BimodalModel {
    cfg: BimodalConfig,
    ids: Vec<String>,
}

impl BimodalModel {
    pub fn new(cfg: BimodalConfig) -> Self {
        BimodalModel {
            cfg,
            ids: vec!["theta".into()],
        }
    }

    /// Exact `log p(y, θ)`.
    pub fn log_joint(&self, theta: f64) -> f64 {
        let c = &self.cfg;
        normal_ln_pdf(theta, 0.0, c.prior_std) + normal_ln_pdf(c.y, c.offset - theta.abs(), c.likelihood_std)
    }
}

pub fn make_bimodal_model() -> BimodalModel {
    BimodalModel::new(BimodalConfig::default())
}

impl Model for BimodalModel {
    type State = ();

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) {}

    fn step(&self, _: &mut (), ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        let t = ctx.optim_real("theta", &Dist::normal(0.0, self.cfg.prior_std)?)?;
        ctx.observe_real(&Dist::normal(self.cfg.offset - t.abs(), self.cfg.likelihood_std)?, self.cfg.y)?;
        Ok(Flow::Done(Value::Real(t)))
    }
}
