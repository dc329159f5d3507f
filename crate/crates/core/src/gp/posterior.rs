use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{GpHyperparameters, KernelParams};
use super::mean::MeanFunction;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Scaled input/output pairs the surrogate is conditioned on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpDataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl GpDataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::Parameter(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(d) = inputs.first().map(Vec::len) {
            if inputs.iter().any(|x| x.len() != d) {
                return Err(Error::Parameter("inputs have inconsistent dimensions".into()));
            }
        }
        Ok(GpDataset { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.inputs.push(x);
        self.outputs.push(y);
    }
}

pub(crate) fn gram(inputs: &[Vec<f64>], kp: &KernelParams) -> DMatrix<f64> {
    let m = inputs.len();
    let mut k = DMatrix::zeros(m, m);
    for a in 0..m {
        k[(a, a)] = kp.diag() + kp.noise_var;
        for b in 0..a {
            let v = kp.eval(&inputs[a], &inputs[b]);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    k
}

/// Cholesky factorization, retrying with diagonal jitter growing from
/// `1e-10·trace/m` to `1e-4·trace/m` on failure. Returns the factor and the
/// jitter that was added.
pub fn jittered_cholesky(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = k.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let m = k.nrows().max(1);
    let scale = k.trace() / m as f64;
    let mut rel = 1e-10;
    while rel <= 1e-4 * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut kj = k.clone();
        for i in 0..k.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical("covariance matrix not positive definite after maximum jitter".into()))
}

/// Analytic GP posterior for one hyperparameter setting.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    hyper: GpHyperparameters,
    kp: KernelParams,
    mean: MeanFunction,
    inputs: Vec<Vec<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `(K + σ_n² I)⁻¹ (W − μ(Θ))`.
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpPosterior {
    /// Condition the GP prior on `data`. Empty data gives the prior.
    pub fn fit(data: &GpDataset, hyper: &GpHyperparameters, mean: MeanFunction) -> Result<Self> {
        let kp = hyper.params();
        if let Some(x) = data.inputs.first() {
            if x.len() != hyper.dim() {
                return Err(Error::Parameter(format!(
                    "data is {}-dimensional, hyperparameters {}-dimensional",
                    x.len(),
                    hyper.dim()
                )));
            }
        }
        if data.is_empty() {
            return Ok(GpPosterior {
                hyper: hyper.clone(),
                kp,
                mean,
                inputs: Vec::new(),
                chol: None,
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let k = gram(&data.inputs, &kp);
        let (chol, jitter) = jittered_cholesky(&k)?;
        let resid = DVector::from_iterator(
            data.len(),
            data.inputs.iter().zip(&data.outputs).map(|(x, y)| y - mean.eval(x)),
        );
        let alpha = chol.solve(&resid);
        Ok(GpPosterior {
            hyper: hyper.clone(),
            kp,
            mean,
            inputs: data.inputs.clone(),
            chol: Some(chol),
            alpha,
            jitter,
        })
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn mean_function(&self) -> MeanFunction {
        self.mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor of `K + σ_n² I` (plus jitter), if conditioned on data.
    pub fn cholesky_factor(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l())
    }

    /// Posterior mean and variance of the latent function (no noise term).
    pub fn predict_latent(&self, x: &[f64]) -> (f64, f64) {
        let prior_mu = self.mean.eval(x);
        let prior_var = self.kp.diag();
        let Some(chol) = &self.chol else {
            return (prior_mu, prior_var);
        };
        let ks = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.kp.eval(x, xi)));
        let mu = prior_mu + ks.dot(&self.alpha);
        let mut v = ks;
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let var = (prior_var - v.norm_squared()).max(0.0);
        (mu, var)
    }

    /// Predictive mean and variance of a new observation, `σ_n²` included.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (mu, var) = self.predict_latent(x);
        (mu, var + self.kp.noise_var)
    }

    /// Posterior mean only.
    pub fn mean_at(&self, x: &[f64]) -> f64 {
        let mu = self.mean.eval(x);
        if self.inputs.is_empty() {
            return mu;
        }
        mu + self
            .inputs
            .iter()
            .zip(self.alpha.iter())
            .map(|(xi, a)| self.kp.eval(x, xi) * a)
            .sum::<f64>()
    }
}

/// Log marginal likelihood of `data` and its gradient with respect to the
/// log hyperparameters.
pub fn log_marginal_likelihood(
    data: &GpDataset,
    hyper: &GpHyperparameters,
    mean: MeanFunction,
) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Parameter("log marginal likelihood needs data".into()));
    }
    let kp = hyper.params();
    let m = data.len();
    let k = gram(&data.inputs, &kp);
    let (chol, _) = jittered_cholesky(&k)?;
    let resid = DVector::from_iterator(m, data.inputs.iter().zip(&data.outputs).map(|(x, y)| y - mean.eval(x)));
    let alpha = chol.solve(&resid);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let value = -0.5 * resid.dot(&alpha) - 0.5 * log_det - 0.5 * m as f64 * LN_2PI;

    // ∂/∂θⱼ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θⱼ), accumulated pairwise.
    let k_inv = chol.inverse();
    let n_params = GpHyperparameters::n_params(hyper.dim());
    let mut grad = vec![0.0; n_params];
    let mut g = vec![0.0; n_params];
    for a in 0..m {
        let q_aa = alpha[a] * alpha[a] - k_inv[(a, a)];
        grad[0] += q_aa * kp.noise_var;
        grad[1] += 0.5 * q_aa * 2.0 * kp.var_32;
        grad[2] += 0.5 * q_aa * 2.0 * kp.var_52;
        for b in 0..a {
            let q_ab = alpha[a] * alpha[b] - k_inv[(a, b)];
            kp.eval_with_grad(&data.inputs[a], &data.inputs[b], &mut g);
            for j in 1..n_params {
                grad[j] += q_ab * g[j];
            }
        }
    }
    Ok((value, grad))
}
