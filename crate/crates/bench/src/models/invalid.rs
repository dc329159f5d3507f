//! Small models that break one optimization-variable rule each, plus a
//! compliant reference.

use bopp::ppl::{Ctx, Dist, Flow, Model, Value};
use bopp::Signal;

/// Which rule a [`RuleProbe`] model breaks, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Breakage {
    None,
    /// θ is bound twice.
    Multiplicity,
    /// θ is normal in one branch and discrete in the other.
    MeasureMismatch,
    /// θ is computed rather than drawn.
    NotDirectSample,
    /// θ is bound to a factor, which has no base measure.
    UnknownMeasure,
}

#[derive(Debug, Clone)]
pub struct RuleProbe {
    breakage: Breakage,
    ids: Vec<String>,
}

impl RuleProbe {
    pub fn new(breakage: Breakage) -> Self {
        RuleProbe {
            breakage,
            ids: vec!["phi".into()],
        }
    }
}

impl Model for RuleProbe {
    type State = ();

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) {}

    fn step(&self, _: &mut (), ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        let phi = match self.breakage {
            Breakage::None => ctx.optim("phi", &Dist::normal(0.0, 1.0)?)?,
            Breakage::Multiplicity => {
                let a = ctx.optim("phi", &Dist::normal(0.0, 1.0)?)?;
                ctx.observe_real(&Dist::normal(a.as_real()?, 1.0)?, 0.0)?;
                ctx.optim("phi", &Dist::normal(0.0, 1.0)?)?
            }
            Breakage::MeasureMismatch => {
                if ctx.sample_real(&Dist::uniform(0.0, 1.0)?)? < 0.5 {
                    ctx.optim("phi", &Dist::normal(0.0, 1.0)?)?
                } else {
                    ctx.optim("phi", &Dist::uniform_discrete(0, 3)?)?
                }
            }
            Breakage::NotDirectSample => {
                let u = ctx.sample_real(&Dist::normal(0.0, 1.0)?)?;
                ctx.assign_optim("phi", Value::Real(2.0 * u))?
            }
            Breakage::UnknownMeasure => ctx.optim("phi", &Dist::factor(0.0))?,
        };
        ctx.observe_real(&Dist::normal(0.0, 1.0)?, 0.3)?;
        Ok(Flow::Done(phi))
    }
}
