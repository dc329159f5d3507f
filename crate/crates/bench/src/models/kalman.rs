//! State-space model with Pickover-attractor dynamics and a linear Gaussian
//! observation, used for parameter estimation of (β, η).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use bopp::ppl::{Ctx, Dist, Flow, Model, Value};
use bopp::Signal;

use crate::error::{BenchError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One step of the attractor map.
pub fn pickover_step(x: [f64; 3], beta: f64, eta: f64) -> [f64; 3] {
    [
        (beta * x[1]).sin() - (2.5 * x[0]).cos() * x[2],
        -(1.5 * x[0]).sin() * x[2] - (eta * x[1]).cos(),
        x[0].sin(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    /// Observation dimension.
    pub k: usize,
    /// Number of time steps.
    pub t: usize,
    pub mu1: [f64; 3],
    pub sigma1: f64,
    pub sigma_q: f64,
    pub sigma_y: f64,
    /// `k × 3` observation matrix.
    pub c: DMatrix<f64>,
    pub beta: f64,
    pub eta: f64,
}

impl KalmanConfig {
    /// Generation settings for the synthetic dataset: deterministic start,
    /// small transition noise, and a `C` whose columns are drawn once from
    /// `Dirichlet(0.1·1)`.
    pub fn synthetic(k: usize, t: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let dir = Dist::dirichlet(vec![0.1; k])?;
        let mut c = DMatrix::zeros(k, 3);
        for j in 0..3 {
            let col = dir.sample(rng)?;
            for (i, v) in col.as_vector()?.iter().enumerate() {
                c[(i, j)] = *v;
            }
        }
        Ok(KalmanConfig {
            k,
            t,
            mu1: [-0.2149, -0.0177, 0.7630],
            sigma1: 0.0,
            sigma_q: 0.01,
            sigma_y: 0.2,
            c,
            beta: -2.3,
            eta: 1.25,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.c.nrows() != self.k || self.c.ncols() != 3 {
            return Err(BenchError::Invalid(format!(
                "C must be {}×3, got {}×{}",
                self.k,
                self.c.nrows(),
                self.c.ncols()
            )));
        }
        if self.sigma1 < 0.0 || self.sigma_q < 0.0 || self.sigma_y < 0.0 {
            return Err(BenchError::Invalid("noise scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// Simulates `t` observations (rows) of dimension `k`.
pub fn simulate_kalman_data(cfg: &KalmanConfig, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let mut out = Vec::with_capacity(cfg.t);
    let mut x = [0.0; 3];
    for step in 0..cfg.t {
        if step == 0 {
            for i in 0..3 {
                x[i] = cfg.mu1[i] + cfg.sigma1 * normal();
            }
        } else {
            let a = pickover_step(x, cfg.beta, cfg.eta);
            for i in 0..3 {
                x[i] = a[i] + cfg.sigma_q * normal();
            }
        }
        let xv = Vector3::from(x);
        let mean = &cfg.c * xv;
        out.push(mean.iter().map(|m| m + cfg.sigma_y * normal()).collect());
    }
    Ok(out)
}

/// How latent states are proposed inside the evidence estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KalmanProposal {
    /// Draw `x_t` from the transition, then observe `y_t`.
    Bootstrap,
    /// Draw `x_t` from `p(x_t | x_{t−1}, y_t)` and weight by `p(y_t | x_{t−1})`,
    /// which is exact here because the observation is linear-Gaussian. The
    /// joint distribution, and hence the evidence, is unchanged.
    #[default]
    Optimal,
}

/// Gaussian quantities shared by every particle at one kind of step.
#[derive(Debug, Clone)]
struct StepGaussian {
    /// Posterior covariance of `x_t` given its predicted mean and `y_t`.
    post_cov: Matrix3<f64>,
    post_chol: Matrix3<f64>,
    /// Cholesky of the predictive covariance of `y_t` and its log determinant.
    pred_chol: Cholesky<f64, Dyn>,
    pred_log_det: f64,
    /// Prior precision scale `1/σ²` applied to the predicted mean.
    prior_prec: f64,
}

impl StepGaussian {
    fn new(c: &DMatrix<f64>, sigma: f64, sigma_y: f64) -> Result<Self> {
        let k = c.nrows();
        let ctc = c.transpose() * c;
        let prior_prec = 1.0 / (sigma * sigma);
        let mut prec = Matrix3::identity() * prior_prec;
        for i in 0..3 {
            for j in 0..3 {
                prec[(i, j)] += ctc[(i, j)] / (sigma_y * sigma_y);
            }
        }
        let post_cov = prec
            .try_inverse()
            .ok_or_else(|| BenchError::Invalid("singular state posterior precision".into()))?;
        let post_chol = post_cov
            .cholesky()
            .ok_or_else(|| BenchError::Invalid("state posterior covariance not positive definite".into()))?
            .l();
        let pred = c * c.transpose() * (sigma * sigma) + DMatrix::identity(k, k) * (sigma_y * sigma_y);
        let pred_chol = pred
            .cholesky()
            .ok_or_else(|| BenchError::Invalid("observation predictive covariance not positive definite".into()))?;
        let pred_log_det = 2.0 * pred_chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(StepGaussian {
            post_cov,
            post_chol,
            pred_chol,
            pred_log_det,
            prior_prec,
        })
    }

    fn pred_log_density(&self, resid: DVector<f64>) -> f64 {
        let mut r = resid;
        let k = r.len();
        self.pred_chol.l_dirty().solve_lower_triangular_mut(&mut r);
        -0.5 * (r.norm_squared() + self.pred_log_det + k as f64 * LN_2PI)
    }
}

#[derive(Debug, Clone)]
pub struct KalmanState {
    t: usize,
    x: [f64; 3],
    beta: f64,
    eta: f64,
}

/// Inference model: `β ~ U(−3, 3)`, `η ~ U(0, 3)`, `x₁ ~ N(0, I)`,
/// `x_t ~ N(A(x_{t−1}; β, η), σ_q² I)`, `y_t ~ N(C x_t, σ_y² I)`.
#[derive(Debug, Clone)]
pub struct KalmanModel {
    c: DMatrix<f64>,
    y: Vec<DVector<f64>>,
    /// `Cᵀ y_t / σ_y²` per step.
    cty: Vec<Vector3<f64>>,
    sigma1: f64,
    sigma_q: f64,
    sigma_y: f64,
    proposal: KalmanProposal,
    first: StepGaussian,
    rest: StepGaussian,
    ids: Vec<String>,
}

impl KalmanModel {
    /// `c` and the noise scales come from `cfg`; the initial state prior is
    /// `N(0, I)` regardless of the generating `mu1`/`sigma1`.
    pub fn new(cfg: &KalmanConfig, y: &[Vec<f64>]) -> Result<Self> {
        cfg.validate()?;
        if !(cfg.sigma_q > 0.0 && cfg.sigma_y > 0.0) {
            return Err(BenchError::Invalid("inference needs sigma_q > 0 and sigma_y > 0".into()));
        }
        if y.iter().any(|r| r.len() != cfg.k) {
            return Err(BenchError::Invalid(format!("every observation row must have {} columns", cfg.k)));
        }
        let sigma1 = 1.0;
        let y: Vec<DVector<f64>> = y.iter().map(|r| DVector::from_column_slice(r)).collect();
        let ct = cfg.c.transpose();
        let cty = y
            .iter()
            .map(|r| {
                let v = &ct * r / (cfg.sigma_y * cfg.sigma_y);
                Vector3::new(v[0], v[1], v[2])
            })
            .collect();
        Ok(KalmanModel {
            first: StepGaussian::new(&cfg.c, sigma1, cfg.sigma_y)?,
            rest: StepGaussian::new(&cfg.c, cfg.sigma_q, cfg.sigma_y)?,
            c: cfg.c.clone(),
            y,
            cty,
            sigma1,
            sigma_q: cfg.sigma_q,
            sigma_y: cfg.sigma_y,
            proposal: KalmanProposal::default(),
            ids: vec!["beta".into(), "eta".into()],
        })
    }

    pub fn with_proposal(mut self, proposal: KalmanProposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn advance(&self, s: &mut KalmanState, ctx: &mut Ctx<'_>) -> Result<(), Signal> {
        let t = s.t;
        let (mean, sigma, g) = if t == 0 {
            (Vector3::zeros(), self.sigma1, &self.first)
        } else {
            (Vector3::from(pickover_step(s.x, s.beta, s.eta)), self.sigma_q, &self.rest)
        };
        let std_normal = Dist::mv_normal_iso(vec![0.0; 3], 1.0)?;
        match self.proposal {
            KalmanProposal::Bootstrap => {
                let z = ctx.sample_vector(&std_normal)?;
                let x = mean + Vector3::new(z[0], z[1], z[2]) * sigma;
                let pred = &self.c * x;
                let obs = Dist::mv_normal_iso(pred.iter().copied().collect(), self.sigma_y)?;
                ctx.observe(&obs, &Value::Vector(self.y[t].iter().copied().collect()))?;
                s.x = [x[0], x[1], x[2]];
            }
            KalmanProposal::Optimal => {
                let resid = &self.y[t] - &self.c * mean;
                ctx.factor(g.pred_log_density(resid))?;
                let m = g.post_cov * (mean * g.prior_prec + self.cty[t]);
                let z = ctx.sample_vector(&std_normal)?;
                let x = m + g.post_chol * Vector3::new(z[0], z[1], z[2]);
                s.x = [x[0], x[1], x[2]];
            }
        }
        s.t += 1;
        Ok(())
    }
}

impl Model for KalmanModel {
    type State = KalmanState;

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) -> KalmanState {
        KalmanState {
            t: 0,
            x: [0.0; 3],
            beta: 0.0,
            eta: 0.0,
        }
    }

    fn step(&self, s: &mut KalmanState, ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        if s.t == 0 {
            s.beta = ctx.optim_real("beta", &Dist::uniform(-3.0, 3.0)?)?;
            s.eta = ctx.optim_real("eta", &Dist::uniform(0.0, 3.0)?)?;
        }
        if s.t < self.y.len() {
            self.advance(s, ctx)?;
        }
        if s.t >= self.y.len() {
            Ok(Flow::Done(Value::Vector(s.x.to_vec())))
        } else {
            Ok(Flow::Continue)
        }
    }
}

/// Distance from `(β, η)` to the generating parameters, taking the better of
/// `η` and `−η` since the two give the same dynamics.
pub fn kalman_distance(beta: f64, eta: f64, truth_beta: f64, truth_eta: f64) -> f64 {
    let d1 = (beta - truth_beta).hypot(eta - truth_eta);
    let d2 = (beta - truth_beta).hypot(eta + truth_eta);
    d1.min(d2)
}
