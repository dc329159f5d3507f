//! Model programs, execution handlers and execution records.

use rand::RngCore;

use super::dist::{BaseMeasure, Dist, DistKind};
use super::value::{Theta, Value};
use crate::error::{Error, Result, Rule, Signal, Violation};

/// Outcome of one [`Model::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum Flow {
    /// The step ended at an observe barrier; more steps follow.
    Continue,
    /// The program returned its output.
    Done(Value),
}

/// A generative program over sample/observe effects.
///
/// Execution is split into steps so that particle methods can resample
/// between them: each call to [`Model::step`] runs the program from `state`
/// up to (and including) its next observe barrier. Programs without
/// sequential structure run to completion in a single step; [`FnModel`]
/// adapts a plain closure to this form.
pub trait Model: Sync {
    type State: Clone + Send;

    /// Identifiers of the optimization variables, in the order θ is reported.
    fn optim_ids(&self) -> &[String];

    fn start(&self) -> Self::State;

    fn step(&self, state: &mut Self::State, ctx: &mut Ctx<'_>) -> Result<Flow, Signal>;
}

/// Single-step model backed by a closure.
pub struct FnModel<F> {
    ids: Vec<String>,
    body: F,
}

impl<F> FnModel<F>
where
    F: Fn(&mut Ctx<'_>) -> Result<Value, Signal> + Sync,
{
    pub fn new<S: Into<String>>(ids: impl IntoIterator<Item = S>, body: F) -> Self {
        FnModel {
            ids: ids.into_iter().map(Into::into).collect(),
            body,
        }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&mut Ctx<'_>) -> Result<Value, Signal> + Sync,
{
    type State = ();

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) {}

    fn step(&self, _: &mut (), ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        (self.body)(ctx).map(Flow::Done)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservePolicy {
    Score,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimPolicy<'t> {
    /// Draw each optimization variable from its distribution.
    Draw,
    /// Fix each optimization variable to the given value and score it.
    Replay(&'t Theta),
}

/// Execution policy applied to every effect a model issues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Handler<'t> {
    pub observes: ObservePolicy,
    pub optims: OptimPolicy<'t>,
    /// Stop execution as soon as every optimization variable is bound.
    pub halt_when_bound: bool,
    pub record_choices: bool,
}

impl<'t> Handler<'t> {
    /// Draw everything, score every observe.
    pub fn joint() -> Self {
        Handler {
            observes: ObservePolicy::Score,
            optims: OptimPolicy::Draw,
            halt_when_bound: false,
            record_choices: true,
        }
    }

    pub fn ignore_observes() -> Self {
        Handler {
            observes: ObservePolicy::Ignore,
            ..Self::joint()
        }
    }

    /// Conditioning removed, terminating once θ is bound.
    pub fn prior() -> Self {
        Handler {
            observes: ObservePolicy::Ignore,
            optims: OptimPolicy::Draw,
            halt_when_bound: true,
            record_choices: true,
        }
    }

    /// θ fixed and scored, everything else drawn fresh, observes scored.
    pub fn replay(theta: &'t Theta) -> Self {
        Handler {
            observes: ObservePolicy::Score,
            optims: OptimPolicy::Replay(theta),
            halt_when_bound: false,
            record_choices: true,
        }
    }

    /// θ fixed and scored, observes ignored, terminating once θ is bound.
    /// The resulting record carries θ's prior log-density.
    pub fn prior_density(theta: &'t Theta) -> Self {
        Handler {
            observes: ObservePolicy::Ignore,
            optims: OptimPolicy::Replay(theta),
            halt_when_bound: true,
            record_choices: false,
        }
    }

    pub fn without_choices(mut self) -> Self {
        self.record_choices = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(untagged)]
pub enum Address {
    Seq(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Choice {
    pub address: Address,
    pub kind: DistKind,
    pub value: Value,
    pub log_density: f64,
}

/// How an optimization variable was bound during one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub value: Value,
    pub kind: DistKind,
    pub measure: Option<BaseMeasure>,
    pub log_density: f64,
    /// Bound by a direct sample effect (as opposed to assignment).
    pub direct: bool,
    /// Integer range of the binding distribution, for discrete variables.
    pub integer_range: Option<(i64, i64)>,
}

/// The record of one model execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub choices: Vec<Choice>,
    /// Sum of observe (and factor) log-densities.
    pub obs_log_weight: f64,
    /// Sum of log-densities of replayed optimization variables.
    pub optim_log_density: f64,
    /// One slot per optimization id, in declaration order.
    pub bindings: Vec<Option<Binding>>,
    pub output: Option<Value>,
    pub early_terminated: bool,
    /// A replayed θ component fell outside its distribution's support.
    pub rejected: bool,
    counter: usize,
    bound: usize,
}

impl ExecutionRecord {
    pub fn new(n_optim: usize) -> Self {
        ExecutionRecord {
            choices: Vec::new(),
            obs_log_weight: 0.0,
            optim_log_density: 0.0,
            bindings: vec![None; n_optim],
            output: None,
            early_terminated: false,
            rejected: false,
            counter: 0,
            bound: 0,
        }
    }

    /// Observation weight plus replayed-θ density.
    pub fn log_weight(&self) -> f64 {
        if self.rejected {
            f64::NEG_INFINITY
        } else {
            self.obs_log_weight + self.optim_log_density
        }
    }

    pub fn all_bound(&self) -> bool {
        self.bound == self.bindings.len()
    }

    /// θ in declaration order, if every variable was bound.
    pub fn theta(&self) -> Option<Theta> {
        self.bindings
            .iter()
            .map(|b| b.as_ref().map(|b| b.value.clone()))
            .collect::<Option<Vec<_>>>()
            .map(Theta)
    }
}

/// Effect interface passed to model bodies.
pub struct Ctx<'a> {
    ids: &'a [String],
    handler: &'a Handler<'a>,
    rng: &'a mut dyn RngCore,
    rec: &'a mut ExecutionRecord,
}

impl<'a> Ctx<'a> {
    pub fn new(
        ids: &'a [String],
        handler: &'a Handler<'a>,
        rng: &'a mut dyn RngCore,
        rec: &'a mut ExecutionRecord,
    ) -> Self {
        Ctx { ids, handler, rng, rec }
    }

    pub fn rng(&mut self) -> &mut dyn RngCore {
        self.rng
    }

    /// Draw a latent (non-optimization) random choice.
    pub fn sample(&mut self, d: &Dist) -> Result<Value, Signal> {
        let v = d.sample(self.rng)?;
        if self.handler.record_choices {
            let lp = d.log_density(&v)?;
            let address = Address::Seq(self.rec.counter);
            self.rec.choices.push(Choice {
                address,
                kind: d.kind(),
                value: v.clone(),
                log_density: lp,
            });
        }
        self.rec.counter += 1;
        Ok(v)
    }

    pub fn sample_real(&mut self, d: &Dist) -> Result<f64, Signal> {
        Ok(self.sample(d)?.as_real()?)
    }

    pub fn sample_int(&mut self, d: &Dist) -> Result<i64, Signal> {
        Ok(self.sample(d)?.as_int()?)
    }

    pub fn sample_vector(&mut self, d: &Dist) -> Result<Vec<f64>, Signal> {
        match self.sample(d)? {
            Value::Vector(v) => Ok(v),
            other => Err(Error::Type(format!("expected vector, got {}", other.type_name())).into()),
        }
    }

    fn slot(&self, id: &str) -> Result<usize, Signal> {
        self.ids
            .iter()
            .position(|k| k == id)
            .ok_or_else(|| Error::Contract(format!("`{id}` is not a declared optimization variable")).into())
    }

    /// Bind optimization variable `id` by a direct sample from `d`.
    ///
    /// Depending on the handler the value is drawn or replayed from θ; a
    /// replayed value is scored under `d`.
    pub fn optim(&mut self, id: &str, d: &Dist) -> Result<Value, Signal> {
        let k = self.slot(id)?;
        if self.rec.bindings[k].is_some() {
            return Err(Violation::new(Rule::Multiplicity, id, "optimization variable bound more than once").into());
        }
        let measure = d.base_measure();
        if measure.is_none() {
            return Err(Violation::new(
                Rule::UnknownMeasure,
                id,
                format!("{:?} distribution has no base measure", d.kind()),
            )
            .into());
        }
        let (value, log_density) = match self.handler.optims {
            OptimPolicy::Draw => {
                let v = d.sample(self.rng)?;
                let lp = d.log_density(&v)?;
                (v, lp)
            }
            OptimPolicy::Replay(theta) => {
                if theta.len() != self.ids.len() {
                    return Err(Error::Contract(format!(
                        "θ has {} components, model declares {}",
                        theta.len(),
                        self.ids.len()
                    ))
                    .into());
                }
                let v = theta.get(k).clone();
                let lp = d.log_density(&v)?;
                self.rec.optim_log_density += lp;
                (v, lp)
            }
        };
        if self.handler.record_choices {
            self.rec.choices.push(Choice {
                address: Address::Named(id.to_owned()),
                kind: d.kind(),
                value: value.clone(),
                log_density,
            });
        }
        self.rec.bindings[k] = Some(Binding {
            value: value.clone(),
            kind: d.kind(),
            measure,
            log_density,
            direct: true,
            integer_range: d.integer_range(),
        });
        self.rec.bound += 1;
        if log_density == f64::NEG_INFINITY {
            // Outside the support: nothing downstream can rescue this trace.
            self.rec.rejected = true;
            return Err(Signal::Halt);
        }
        if self.handler.halt_when_bound && self.rec.all_bound() {
            return Err(Signal::Halt);
        }
        Ok(value)
    }

    pub fn optim_real(&mut self, id: &str, d: &Dist) -> Result<f64, Signal> {
        Ok(self.optim(id, d)?.as_real()?)
    }

    pub fn optim_int(&mut self, id: &str, d: &Dist) -> Result<i64, Signal> {
        Ok(self.optim(id, d)?.as_int()?)
    }

    pub fn optim_vector(&mut self, id: &str, d: &Dist) -> Result<Vec<f64>, Signal> {
        match self.optim(id, d)? {
            Value::Vector(v) => Ok(v),
            other => Err(Error::Type(format!("expected vector, got {}", other.type_name())).into()),
        }
    }

    /// Bind an optimization variable to a computed value. Optimization
    /// variables must come from a direct sample, so this always raises a
    /// `not-direct-sample` violation.
    pub fn assign_optim(&mut self, id: &str, _value: Value) -> Result<Value, Signal> {
        self.slot(id)?;
        Err(Violation::new(
            Rule::NotDirectSample,
            id,
            "optimization variable assigned a computed value instead of a sample",
        )
        .into())
    }

    /// Condition on `value` under `d`.
    pub fn observe(&mut self, d: &Dist, value: &Value) -> Result<(), Signal> {
        if self.handler.observes == ObservePolicy::Score {
            self.rec.obs_log_weight += d.log_density(value)?;
        }
        Ok(())
    }

    pub fn observe_real(&mut self, d: &Dist, x: f64) -> Result<(), Signal> {
        if self.handler.observes == ObservePolicy::Score {
            self.rec.obs_log_weight += d.log_density(&Value::Real(x))?;
        }
        Ok(())
    }

    /// Add a raw log-weight to the trace, the `factor` observe.
    pub fn factor(&mut self, log_weight: f64) -> Result<(), Signal> {
        self.observe(&Dist::factor(log_weight), &Value::Unit)
    }
}

/// Outcome of advancing an [`Execution`] by one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Finished,
}

/// A suspended model execution: program state plus its record so far.
#[derive(Debug, Clone)]
pub struct Execution<S> {
    pub state: S,
    pub record: ExecutionRecord,
    pub finished: bool,
}

impl<S: Clone> Execution<S> {
    pub fn start<M: Model<State = S>>(m: &M) -> Self {
        Execution {
            state: m.start(),
            record: ExecutionRecord::new(m.optim_ids().len()),
            finished: false,
        }
    }

    /// Runs the program up to its next barrier. A finished execution is left
    /// untouched.
    pub fn advance<M: Model<State = S>>(&mut self, m: &M, h: &Handler<'_>, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        if self.finished {
            return Ok(StepOutcome::Finished);
        }
        let ids = m.optim_ids();
        let flow = {
            let mut ctx = Ctx::new(ids, h, rng, &mut self.record);
            m.step(&mut self.state, &mut ctx)
        };
        match flow {
            Ok(Flow::Continue) => Ok(StepOutcome::Continue),
            Ok(Flow::Done(out)) => {
                self.finished = true;
                self.record.output = Some(out);
                if let Some(k) = self.record.bindings.iter().position(Option::is_none) {
                    return Err(Error::Model(Violation::new(
                        Rule::Multiplicity,
                        ids[k].clone(),
                        "optimization variable never bound",
                    )));
                }
                Ok(StepOutcome::Finished)
            }
            Err(Signal::Halt) => {
                self.finished = true;
                self.record.early_terminated = true;
                Ok(StepOutcome::Finished)
            }
            Err(Signal::Fail(e)) => {
                self.finished = true;
                Err(e)
            }
        }
    }
}

/// Execute `m` to completion (or early termination) under `h`.
pub fn run_model<M: Model>(m: &M, h: &Handler<'_>, rng: &mut dyn RngCore) -> Result<ExecutionRecord> {
    let mut exec = Execution::start(m);
    while exec.advance(m, h, rng)? == StepOutcome::Continue {}
    Ok(exec.record)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ppl::dist::normal_ln_pdf;

    fn single_site() -> FnModel<impl Fn(&mut Ctx<'_>) -> Result<Value, Signal> + Sync> {
        FnModel::new(["x"], |ctx| {
            let x = ctx.optim_real("x", &Dist::normal(0.0, 1.0)?)?;
            ctx.observe_real(&Dist::normal(x, 1.0)?, 0.0)?;
            Ok(Value::Real(x))
        })
    }

    #[test]
    fn joint_handler_scores_observe() {
        let m = single_site();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = run_model(&m, &Handler::joint(), &mut rng).unwrap();
        assert_eq!(rec.choices.len(), 1);
        let x = rec.output.as_ref().unwrap().as_real().unwrap();
        assert!((rec.obs_log_weight - normal_ln_pdf(0.0, x, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn ignore_observes_gives_zero_weight() {
        let m = single_site();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = run_model(&m, &Handler::ignore_observes(), &mut rng).unwrap();
        assert_eq!(rec.obs_log_weight, 0.0);
        assert!(!rec.early_terminated);
    }

    #[test]
    fn replay_fixes_value() {
        let m = single_site();
        let theta = Theta::new(vec![Value::Real(0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = run_model(&m, &Handler::replay(&theta), &mut rng).unwrap();
        assert!((rec.obs_log_weight - (-1.043939)).abs() < 1e-6);
        assert_eq!(rec.output, Some(Value::Real(0.5)));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = FnModel::new(["x"], |ctx| {
            let a = ctx.sample_real(&Dist::gamma(2.0, 1.0)?)?;
            let x = ctx.optim_real("x", &Dist::normal(a, 1.0)?)?;
            let b = ctx.sample_vector(&Dist::dirichlet(vec![1.0; 3])?)?;
            ctx.observe_real(&Dist::normal(x + b[0], 1.0)?, 0.3)?;
            Ok(Value::Real(x))
        });
        let a = run_model(&m, &Handler::joint(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = run_model(&m, &Handler::joint(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn double_binding_is_a_violation() {
        let m = FnModel::new(["x"], |ctx| {
            ctx.optim("x", &Dist::normal(0.0, 1.0)?)?;
            ctx.optim("x", &Dist::normal(0.0, 1.0)?)?;
            Ok(Value::Unit)
        });
        let err = run_model(&m, &Handler::joint(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Model(v) if v.rule == Rule::Multiplicity));
    }

    #[test]
    fn missing_binding_is_a_violation() {
        let m = FnModel::new(["x", "y"], |ctx| {
            ctx.optim("x", &Dist::normal(0.0, 1.0)?)?;
            Ok(Value::Unit)
        });
        let err = run_model(&m, &Handler::joint(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Model(v) if v.rule == Rule::Multiplicity && v.variable == "y"));
    }

    #[test]
    fn unknown_id_is_a_contract_error() {
        let m = FnModel::new(["x"], |ctx| {
            ctx.optim("z", &Dist::normal(0.0, 1.0)?)?;
            Ok(Value::Unit)
        });
        let err = run_model(&m, &Handler::joint(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
