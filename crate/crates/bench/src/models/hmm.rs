//! Hidden Markov model with an unknown number of states.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use bopp::ppl::{Ctx, Dist, Flow, Model, Theta, Value};
use bopp::Signal;

use crate::error::{BenchError, Result};

/// Largest number of states the model can use; all stick-breaking fractions
/// up to this count are always drawn.
pub const MAX_STATES: usize = 5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HmmConfig {
    pub means: Vec<f64>,
    /// Row `k` is the distribution of the next state from state `k`.
    pub transitions: Vec<Vec<f64>>,
    pub emission_std: f64,
    pub t: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            means: vec![-1.0, 0.0, 4.0],
            transitions: vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.75, 0.05], vec![0.1, 0.2, 0.7]],
            emission_std: 0.2,
            t: 500,
        }
    }
}

impl HmmConfig {
    fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 || self.transitions.len() != k || self.transitions.iter().any(|r| r.len() != k) {
            return Err(BenchError::Invalid("transition matrix must be K×K for K means".into()));
        }
        for row in &self.transitions {
            if row.iter().any(|p| *p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(BenchError::Invalid(format!("transition row {row:?} is not on the simplex")));
            }
        }
        if self.emission_std < 0.0 {
            return Err(BenchError::Invalid("emission std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Simulated observations and the hidden state path (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmData {
    pub y: Vec<f64>,
    pub states: Vec<usize>,
}

/// Forward simulation starting in the first state, emitting on the current
/// state.
pub fn simulate_hmm_data(cfg: &HmmConfig, rng: &mut dyn RngCore) -> Result<HmmData> {
    cfg.validate()?;
    let rows: Vec<Dist> = cfg
        .transitions
        .iter()
        .map(|r| Dist::discrete(r.clone()))
        .collect::<bopp::Result<_>>()?;
    let mut x = 0usize;
    let mut y = Vec::with_capacity(cfg.t);
    let mut states = Vec::with_capacity(cfg.t);
    for t in 0..cfg.t {
        if t > 0 {
            x = rows[x].sample(rng)?.as_int()? as usize;
        }
        let z: f64 = StandardNormal.sample(rng);
        y.push(cfg.means[x] + cfg.emission_std * z);
        states.push(x);
    }
    Ok(HmmData { y, states })
}

/// Stick-breaking state means: `μ₀ = min y`, `μ_k = μ_{k−1} + φ_k (max y − μ_{k−1})`.
pub fn hmm_means(y_min: f64, y_max: f64, phis: &[f64]) -> Vec<f64> {
    let mut prev = y_min;
    phis.iter()
        .map(|p| {
            prev += p * (y_max - prev);
            prev
        })
        .collect()
}

/// How the next hidden state is drawn inside the evidence estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HmmProposal {
    /// Draw from the transition, then observe.
    Bootstrap,
    /// Draw from the state posterior given `y_t` and weight by the predictive
    /// density of `y_t`. Same joint distribution, lower-variance evidence.
    #[default]
    Optimal,
}

#[derive(Debug, Clone)]
pub struct HmmState {
    t: usize,
    x: usize,
    k: usize,
    means: Vec<f64>,
    /// Flattened `k × k` transition counts.
    counts: Vec<u32>,
}

/// `K ~ U{1..5}`, `φ_{1..5} ~ U(0, 1)`, state means by stick breaking,
/// transition rows `T_k ~ Dirichlet(1)` (integrated out analytically),
/// `x₁ = 1`, `x_t ~ T_{x_{t−1}}`, `y_t ~ N(μ_{x_t}, σ)`.
#[derive(Debug, Clone)]
pub struct HmmModel {
    y: Vec<f64>,
    y_min: f64,
    y_max: f64,
    emission_std: f64,
    proposal: HmmProposal,
    ids: Vec<String>,
}

impl HmmModel {
    pub fn new(y: Vec<f64>, emission_std: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(BenchError::Invalid("HMM needs at least one observation".into()));
        }
        if !(emission_std > 0.0) {
            return Err(BenchError::Invalid("emission std must be positive".into()));
        }
        let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut ids = vec!["K".to_string()];
        ids.extend((1..=MAX_STATES).map(|i| format!("phi{i}")));
        Ok(HmmModel {
            y,
            y_min,
            y_max,
            emission_std,
            proposal: HmmProposal::default(),
            ids,
        })
    }

    pub fn with_proposal(mut self, proposal: HmmProposal) -> Self {
        self.proposal = proposal;
        self
    }

    /// State means implied by θ, truncated to its `K`.
    pub fn means_of(&self, theta: &Theta) -> bopp::Result<Vec<f64>> {
        let k = theta.get(0).as_int()? as usize;
        let phis: Vec<f64> = (1..=MAX_STATES)
            .map(|i| theta.get(i).as_real())
            .collect::<bopp::Result<_>>()?;
        let mut mu = hmm_means(self.y_min, self.y_max, &phis);
        mu.truncate(k);
        Ok(mu)
    }

    fn emit_ln(&self, mu: f64, y: f64) -> f64 {
        bopp::ppl::normal_ln_pdf(y, mu, self.emission_std)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Model for HmmModel {
    type State = HmmState;

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) -> HmmState {
        HmmState {
            t: 0,
            x: 0,
            k: 0,
            means: Vec::new(),
            counts: Vec::new(),
        }
    }

    fn step(&self, s: &mut HmmState, ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        if s.t == 0 {
            let k = ctx.optim_int("K", &Dist::uniform_discrete(1, MAX_STATES as i64)?)? as usize;
            let mut phis = [0.0; MAX_STATES];
            for (i, p) in phis.iter_mut().enumerate() {
                *p = ctx.optim_real(&self.ids[i + 1], &Dist::uniform(0.0, 1.0)?)?;
            }
            s.k = k;
            s.means = hmm_means(self.y_min, self.y_max, &phis[..k]);
            s.counts = vec![0; k * k];
            s.x = 0;
            ctx.factor(self.emit_ln(s.means[0], self.y[0]))?;
        } else {
            let k = s.k;
            let row = &s.counts[s.x * k..(s.x + 1) * k];
            let n: u32 = row.iter().sum();
            let prior: Vec<f64> = row.iter().map(|c| (*c as f64 + 1.0) / (n as f64 + k as f64)).collect();
            let y = self.y[s.t];
            let next = match self.proposal {
                HmmProposal::Bootstrap => {
                    let j = ctx.sample_int(&Dist::discrete(prior)?)? as usize;
                    ctx.factor(self.emit_ln(s.means[j], y))?;
                    j
                }
                HmmProposal::Optimal => {
                    let logw: Vec<f64> = prior
                        .iter()
                        .zip(&s.means)
                        .map(|(p, mu)| p.ln() + self.emit_ln(*mu, y))
                        .collect();
                    let total = log_sum_exp(&logw);
                    ctx.factor(total)?;
                    if total == f64::NEG_INFINITY {
                        return Ok(Flow::Done(Value::Unit));
                    }
                    let post: Vec<f64> = logw.iter().map(|l| (l - total).exp()).collect();
                    ctx.sample_int(&Dist::discrete(post)?)? as usize
                }
            };
            s.counts[s.x * k + next] += 1;
            s.x = next;
        }
        s.t += 1;
        if s.t >= self.y.len() {
            Ok(Flow::Done(Value::Int(s.x as i64 + 1)))
        } else {
            Ok(Flow::Continue)
        }
    }
}

/// Euclidean distance between the true means and the best-matching choice of
/// estimated states (distinct when there are enough of them), over all
/// orderings.
pub fn hmm_distance(estimated: &[f64], truth: &[f64]) -> f64 {
    fn go(est: &[f64], truth: &[f64], used: &mut Vec<bool>, distinct: bool, acc: f64, best: &mut f64) {
        let Some((&t, rest)) = truth.split_first() else {
            *best = best.min(acc);
            return;
        };
        for i in 0..est.len() {
            if distinct && used[i] {
                continue;
            }
            let d = acc + (est[i] - t).powi(2);
            if d >= *best {
                continue;
            }
            used[i] = true;
            go(est, rest, used, distinct, d, best);
            used[i] = false;
        }
    }
    if estimated.is_empty() {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    let distinct = estimated.len() >= truth.len();
    go(estimated, truth, &mut vec![false; estimated.len()], distinct, 0.0, &mut best);
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn noiseless_emissions_hit_means() {
        let cfg = HmmConfig {
            emission_std: 0.0,
            t: 200,
            ..Default::default()
        };
        let d = simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(d.y.iter().all(|v| [-1.0, 0.0, 4.0].contains(v)));
        assert_eq!(d.states[0], 0);
    }

    #[test]
    fn stick_breaking_is_monotone_and_bounded() {
        let mu = hmm_means(-1.0, 4.0, &[0.2, 0.5, 0.0, 1.0, 0.3]);
        assert!(mu.windows(2).all(|w| w[1] >= w[0]));
        assert!(mu.iter().all(|m| (-1.0..=4.0).contains(m)));
        assert_eq!(mu[3], 4.0);
    }

    #[test]
    fn distance_is_permutation_invariant() {
        let truth = [-1.0, 0.0, 4.0];
        assert_eq!(hmm_distance(&[4.0, 2.0, -1.0, 0.0], &truth), 0.0);
        assert_eq!(hmm_distance(&[0.0, 4.0, -1.0], &truth), 0.0);
        assert!((hmm_distance(&[0.0], &truth) - (1.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn malformed_config() {
        let cfg = HmmConfig {
            transitions: vec![vec![0.5, 0.6, 0.0], vec![0.2, 0.75, 0.05], vec![0.1, 0.2, 0.7]],
            ..Default::default()
        };
        assert!(simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
