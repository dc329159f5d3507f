//! Execution modes derived from a model: prior (conditioning removed, early
//! termination), marginal (θ fixed and scored) and acquisition (prior plus an
//! acquisition weight), together with validation of the restrictions placed
//! on optimization variables.

use std::fmt;

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result, Rule, Violation};
use crate::ppl::{run_model, BaseMeasure, Binding, ExecutionRecord, Handler, Model, Theta};

pub const DEFAULT_PROBE_BUDGET: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| (a.rule, &a.variable).cmp(&(b.rule, &b.variable)));
        violations.dedup_by(|a, b| a.rule == b.rule && a.variable == b.variable);
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Executes `m` to completion with conditioning removed `probe_budget` times
/// and collects violations of the optimization-variable restrictions.
/// Running past the point where θ is bound is what exposes repeated
/// bindings. Violations are returned as data.
pub fn validate<M: Model>(m: &M, probe_budget: usize, rng: &mut dyn RngCore) -> ValidationReport {
    let ids = m.optim_ids();
    let mut violations = Vec::new();
    let mut measures: Vec<Option<BaseMeasure>> = vec![None; ids.len()];
    let handler = Handler::ignore_observes().without_choices();
    for _ in 0..probe_budget.max(1) {
        match run_model(m, &handler, rng) {
            Ok(rec) => {
                for (k, b) in rec.bindings.iter().enumerate() {
                    let Some(b) = b else { continue };
                    match (measures[k], b.measure) {
                        (None, Some(now)) => measures[k] = Some(now),
                        (Some(seen), Some(now)) if seen != now => violations.push(Violation::new(
                            Rule::MeasureMismatch,
                            ids[k].clone(),
                            format!("bound under {seen:?} in one execution and {now:?} in another"),
                        )),
                        _ => {}
                    }
                }
            }
            Err(Error::Model(v)) => violations.push(v),
            Err(e) => violations.push(Violation::new(
                Rule::NotDirectSample,
                "<model>",
                format!("execution failed: {e}"),
            )),
        }
    }
    ValidationReport::from_violations(violations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorRun {
    pub theta: Theta,
    pub early_terminated: bool,
    pub record: ExecutionRecord,
}

/// Draw θ from the model's generative process with all conditioning removed.
pub fn run_prior<M: Model>(m: &M, rng: &mut dyn RngCore) -> Result<PriorRun> {
    let record = run_model(m, &Handler::prior(), rng)?;
    let theta = record.theta().ok_or_else(|| {
        Error::Model(Violation::new(
            Rule::Multiplicity,
            "<model>",
            "prior run ended with unbound optimization variables",
        ))
    })?;
    Ok(PriorRun {
        theta,
        early_terminated: record.early_terminated,
        record,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRun {
    /// Observation terms plus the density of the replayed θ.
    pub log_weight: f64,
    pub record: ExecutionRecord,
}

/// One execution with θ fixed to `theta` and scored; other choices drawn fresh.
pub fn run_marginal<M: Model>(m: &M, theta: &Theta, rng: &mut dyn RngCore) -> Result<MarginalRun> {
    let record = run_model(m, &Handler::replay(theta), rng)?;
    Ok(MarginalRun {
        log_weight: record.log_weight(),
        record,
    })
}

/// Prior log-density of θ, broken down per component.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDensity {
    pub total: f64,
    pub bindings: Vec<Binding>,
}

impl PriorDensity {
    pub fn is_supported(&self) -> bool {
        self.total > f64::NEG_INFINITY
    }
}

/// Scores θ under the model's prior: θ replayed, observes ignored, execution
/// halted once θ is bound. For models whose θ distribution depends on latent
/// draws this is a single-sample estimate.
pub fn prior_log_density<M: Model>(m: &M, theta: &Theta, rng: &mut dyn RngCore) -> Result<PriorDensity> {
    let record = run_model(m, &Handler::prior_density(theta), rng)?;
    let total = if record.rejected {
        f64::NEG_INFINITY
    } else {
        record.optim_log_density
    };
    let bindings = record.bindings.into_iter().flatten().collect();
    Ok(PriorDensity { total, bindings })
}

/// Prior-mode execution weighted by an acquisition function: returns θ and
/// `ln ζ(θ)`. Prior terms are not part of the weight since θ is drawn from the
/// prior itself.
pub fn run_acquisition<M, Z>(m: &M, zeta: Z, rng: &mut dyn RngCore) -> Result<(Theta, f64)>
where
    M: Model,
    Z: Fn(&Theta) -> f64,
{
    let prior = run_prior(m, rng)?;
    let z = zeta(&prior.theta);
    let log_w = log_acquisition(z)?;
    Ok((prior.theta, log_w))
}

pub(crate) fn log_acquisition(z: f64) -> Result<f64> {
    if z < 0.0 || z.is_nan() {
        return Err(Error::Contract(format!("acquisition value must be non-negative, got {z}")));
    }
    Ok(z.ln())
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ppl::{normal_ln_pdf, Ctx, Dist, FnModel, Value};
    use crate::Signal;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn conjugate_marginal_weight() {
        let m = FnModel::new(["theta"], |ctx: &mut Ctx<'_>| {
            let t = ctx.optim_real("theta", &Dist::normal(0.0, 1.0)?)?;
            ctx.observe_real(&Dist::normal(t, 1.0)?, 0.0)?;
            Ok(Value::Real(t))
        });
        let r = run_marginal(&m, &Theta::new(vec![Value::Real(0.0)]), &mut rng(0)).unwrap();
        assert!((r.log_weight - (-1.837877)).abs() < 1e-6);
        for t in [-1.3, 0.2, 2.5] {
            let r = run_marginal(&m, &Theta::new(vec![Value::Real(t)]), &mut rng(0)).unwrap();
            let analytic = (normal_ln_pdf(t, 0.0, 1.0) + normal_ln_pdf(0.0, t, 1.0)).exp();
            assert!((r.log_weight.exp() - analytic).abs() < 1e-10);
        }
    }

    #[test]
    fn outside_support_is_neg_infinity() {
        let m = FnModel::new(["theta"], |ctx: &mut Ctx<'_>| {
            let t = ctx.optim_real("theta", &Dist::uniform(-3.0, 3.0)?)?;
            ctx.observe_real(&Dist::normal(t, 1.0)?, 0.0)?;
            Ok(Value::Unit)
        });
        let r = run_marginal(&m, &Theta::new(vec![Value::Real(4.0)]), &mut rng(0)).unwrap();
        assert_eq!(r.log_weight, f64::NEG_INFINITY);
    }

    #[test]
    fn prior_run_terminates_early() {
        static DOWNSTREAM: AtomicUsize = AtomicUsize::new(0);
        let m = FnModel::new(["a", "b"], |ctx: &mut Ctx<'_>| {
            let b = ctx.optim_real("b", &Dist::normal(0.0, 1.0)?)?;
            let a = ctx.optim_real("a", &Dist::uniform(0.0, 1.0)?)?;
            DOWNSTREAM.fetch_add(1, Ordering::SeqCst);
            ctx.observe_real(&Dist::normal(a + b, 1.0)?, 0.0)?;
            Ok(Value::Unit)
        });
        let run = run_prior(&m, &mut rng(4)).unwrap();
        assert!(run.early_terminated);
        assert_eq!(DOWNSTREAM.load(Ordering::SeqCst), 0);
        // θ is reported in declaration order, not sampling order.
        let a = run.theta.get(0).as_real().unwrap();
        assert!((0.0..=1.0).contains(&a));
        let (_, _) = run_acquisition(&m, |_| 1.0, &mut rng(5)).unwrap();
        assert_eq!(DOWNSTREAM.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn prior_mean_matches() {
        let m = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            let t = ctx.optim_real("t", &Dist::normal(0.0, 0.5)?)?;
            ctx.observe_real(&Dist::normal(5.0 - t.abs(), 0.5)?, 0.0)?;
            Ok(Value::Unit)
        });
        let mut r = rng(21);
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|_| run_prior(&m, &mut r).unwrap().theta.get(0).as_real().unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn acquisition_weight() {
        let m = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            ctx.optim_real("t", &Dist::normal(0.0, 1.0)?)?;
            Ok(Value::Unit)
        });
        let (_, lw) = run_acquisition(&m, |_| 1.0, &mut rng(1)).unwrap();
        assert_eq!(lw, 0.0);
        let (t, lw) = run_acquisition(&m, |t: &Theta| (-t.get(0).as_real().unwrap().powi(2)).exp(), &mut rng(1)).unwrap();
        let x = t.get(0).as_real().unwrap();
        assert!((lw + x * x).abs() < 1e-12);
        let err = run_acquisition(&m, |_| -1.0, &mut rng(1)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn dirichlet_theta_sums_to_one() {
        let m = FnModel::new(["w"], |ctx: &mut Ctx<'_>| {
            ctx.optim("w", &Dist::dirichlet(vec![1.0; 3])?)?;
            Ok(Value::Unit)
        });
        let (t, _) = run_acquisition(&m, |_| 2.0, &mut rng(3)).unwrap();
        let s: f64 = t.get(0).as_vector().unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rules() {
        let good = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            ctx.optim("t", &Dist::normal(0.0, 0.5)?)?;
            Ok(Value::Unit)
        });
        assert!(validate(&good, DEFAULT_PROBE_BUDGET, &mut rng(0)).ok);

        let branchy = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            if ctx.sample_real(&Dist::uniform(0.0, 1.0)?)? < 0.5 {
                ctx.optim("t", &Dist::normal(0.0, 1.0)?)?;
            }
            Ok(Value::Unit)
        });
        let report = validate(&branchy, DEFAULT_PROBE_BUDGET, &mut rng(0));
        assert_eq!(report.rules(), vec![Rule::Multiplicity]);

        let mixed = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            if ctx.sample_real(&Dist::uniform(0.0, 1.0)?)? < 0.5 {
                ctx.optim("t", &Dist::normal(0.0, 1.0)?)?;
            } else {
                ctx.optim("t", &Dist::discrete(vec![0.5, 0.5])?)?;
            }
            Ok(Value::Unit)
        });
        assert_eq!(validate(&mixed, DEFAULT_PROBE_BUDGET, &mut rng(0)).rules(), vec![Rule::MeasureMismatch]);

        let assigned = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            let x = ctx.sample_real(&Dist::normal(0.0, 1.0)?)?;
            ctx.assign_optim("t", Value::Real(2.0 * x))?;
            Ok(Value::Unit)
        });
        assert_eq!(validate(&assigned, 5, &mut rng(0)).rules(), vec![Rule::NotDirectSample]);

        let factor = FnModel::new(["t"], |ctx: &mut Ctx<'_>| {
            ctx.optim("t", &Dist::factor(0.0))?;
            Ok(Value::Unit)
        });
        assert_eq!(validate(&factor, 5, &mut rng(0)).rules(), vec![Rule::UnknownMeasure]);
    }

    #[test]
    fn signal_halt_is_not_an_error() {
        let m = FnModel::new(["t"], |_ctx: &mut Ctx<'_>| Err(Signal::Halt));
        // Halting before θ is bound leaves θ incomplete, which run_prior reports.
        assert!(run_prior(&m, &mut rng(0)).is_err());
    }
}
