//! Deterministic benchmark functions wrapped as models: uniform prior over
//! the domain and a single `factor(−f(θ))`.

use bopp::ppl::{Ctx, Dist, Flow, Model, Value};
use bopp::{Error, Signal};

use crate::functions::Benchmark;

#[derive(Debug, Clone)]
pub struct FunctionModel {
    bench: Benchmark,
    ids: Vec<String>,
    /// Std of Gaussian noise added to `−f(θ)`; zero for the exact function.
    noise_std: f64,
}

impl FunctionModel {
    pub fn new(bench: Benchmark) -> Self {
        FunctionModel {
            bench,
            ids: (1..=bench.dim()).map(|i| format!("x{i}")).collect(),
            noise_std: 0.0,
        }
    }

    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise_std = std;
        self
    }

    pub fn benchmark(&self) -> Benchmark {
        self.bench
    }
}

impl Model for FunctionModel {
    type State = ();

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) {}

    fn step(&self, _: &mut (), ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        let mut x = Vec::with_capacity(self.ids.len());
        for (id, (lo, hi)) in self.ids.iter().zip(self.bench.domain()) {
            x.push(ctx.optim_real(id, &Dist::uniform(lo, hi)?)?);
        }
        let f = self.bench.eval(&x).map_err(|e| Error::Parameter(e.to_string()))?;
        let noise = if self.noise_std > 0.0 {
            ctx.sample_real(&Dist::normal(0.0, self.noise_std)?)?
        } else {
            0.0
        };
        ctx.factor(-f + noise)?;
        Ok(Flow::Done(Value::Real(f)))
    }
}
