//! Mixing weights on the simplex: `w ~ Dirichlet(α)` and one noisy
//! observation of the weighted combination of fixed component outputs.

use bopp::ppl::{Ctx, Dist, Flow, Model, Value};
use bopp::Signal;

#[derive(Debug, Clone)]
pub struct DirichletModel {
    alpha: Vec<f64>,
    outputs: Vec<f64>,
    target: f64,
    noise_std: f64,
    ids: Vec<String>,
}

impl DirichletModel {
    /// `outputs[k]` is the contribution of component `k` at full weight; the
    /// observation is `target` with Gaussian noise `noise_std`.
    pub fn new(alpha: Vec<f64>, outputs: Vec<f64>, target: f64, noise_std: f64) -> Self {
        DirichletModel {
            alpha,
            outputs,
            target,
            noise_std,
            ids: vec!["w".into()],
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }
}

impl Default for DirichletModel {
    fn default() -> Self {
        DirichletModel::new(vec![1.0; 3], vec![1.0, 2.0, 4.0], 2.5, 0.2)
    }
}

impl Model for DirichletModel {
    type State = ();

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) {}

    fn step(&self, _: &mut (), ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        let w = ctx.optim_vector("w", &Dist::dirichlet(self.alpha.clone())?)?;
        let mix: f64 = w.iter().zip(&self.outputs).map(|(a, b)| a * b).sum();
        // Latent calibration offset, integrated out by the evidence estimate.
        let spread = ctx.sample_real(&Dist::normal(0.0, 0.1)?)?;
        ctx.observe_real(&Dist::normal(mix + spread, self.noise_std)?, self.target)?;
        Ok(Flow::Done(Value::Vector(w)))
    }
}
