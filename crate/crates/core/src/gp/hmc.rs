//! Hamiltonian Monte Carlo with a diagonal mass matrix and dual-averaging
//! step-size adaptation.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Log target and its gradient, `None` where undefined.
pub trait LogTarget {
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl<F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>> LogTarget for F {
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self(x)
    }
}

/// `n_steps` leapfrog steps of size `step` for the Hamiltonian
/// `−log π(x) + ½ pᵀ M⁻¹ p`. Returns the end point, end momentum and the log
/// target with gradient there, or `None` if the trajectory leaves the
/// target's domain.
pub fn leapfrog<T: LogTarget + ?Sized>(
    target: &mut T,
    x: &[f64],
    p: &[f64],
    grad: &[f64],
    step: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> Option<(Vec<f64>, Vec<f64>, f64, Vec<f64>)> {
    let mut x = x.to_vec();
    let mut p = p.to_vec();
    let mut g = grad.to_vec();
    let mut lp = f64::NAN;
    for _ in 0..n_steps {
        for i in 0..x.len() {
            p[i] += 0.5 * step * g[i];
            x[i] += step * inv_mass[i] * p[i];
        }
        let (v, gn) = target.eval(&x)?;
        if !v.is_finite() {
            return None;
        }
        lp = v;
        g = gn;
        for i in 0..x.len() {
            p[i] += 0.5 * step * g[i];
        }
    }
    if n_steps == 0 {
        lp = target.eval(&x)?.0;
    }
    Some((x, p, lp, g))
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
}

/// Hoffman & Gelman's dual-averaging step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_step: f64, target: f64) -> Self {
        DualAveraging {
            target,
            mu: (10.0 * initial_step).ln(),
            h_bar: 0.0,
            log_step: initial_step.ln(),
            log_step_bar: initial_step.ln(),
            t: 0.0,
        }
    }

    pub fn step(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn adapted_step(&self) -> f64 {
        self.log_step_bar.exp()
    }

    pub fn update(&mut self, accept_prob: f64) {
        self.t += 1.0;
        let eta = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob);
        self.log_step = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.t.powf(-Self::KAPPA);
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar;
    }
}

/// Current point of an HMC chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcState {
    pub x: Vec<f64>,
    pub log_p: f64,
    pub grad: Vec<f64>,
}

/// One HMC transition. The step size is jittered by up to ±20% to avoid
/// near-periodic trajectories. Returns the Metropolis acceptance probability.
pub fn hmc_transition<T: LogTarget + ?Sized>(
    target: &mut T,
    state: &mut HmcState,
    step: f64,
    n_leapfrog: usize,
    inv_mass: &[f64],
    rng: &mut dyn RngCore,
) -> f64 {
    let p0: Vec<f64> = inv_mass
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            z / m.sqrt()
        })
        .collect();
    let h0 = -state.log_p + kinetic(&p0, inv_mass);
    let step = step * rng.random_range(0.8..1.2);
    let Some((x, p, lp, g)) = leapfrog(target, &state.x, &p0, &state.grad, step, n_leapfrog, inv_mass) else {
        return 0.0;
    };
    let h1 = -lp + kinetic(&p, inv_mass);
    let accept_prob = if (h0 - h1).is_nan() { 0.0 } else { (h0 - h1).exp().min(1.0) };
    if rng.random::<f64>() < accept_prob {
        *state = HmcState { x, log_p: lp, grad: g };
    }
    accept_prob
}
