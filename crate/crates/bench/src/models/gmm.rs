//! Finite Gaussian mixture with collapsed component parameters, optimized
//! over the concentration `α` and the covariance-prior degrees of freedom `ν`.
//!
//! Each dimension of each component has a normal-inverse-gamma prior, so
//! component parameters are integrated out and points are scored by
//! Student-t predictive densities. Mixture weights `~ Dirichlet(α/K)` are
//! integrated out as well, leaving only the assignments to the evidence
//! estimator.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use bopp::ppl::{Ctx, Dist, Flow, Model, Value};
use bopp::Signal;

use crate::error::{BenchError, Result};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Per-dimension normal-inverse-gamma hyperparameters shared by all
/// components, apart from the shape, which comes from `ν`.
#[derive(Debug, Clone, PartialEq)]
struct NigBase {
    m0: Vec<f64>,
    kappa0: f64,
    /// Scale per unit of shape: `b₀ = a₀ · s²`.
    s2: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Suff {
    n: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmState {
    i: usize,
    alpha: f64,
    a0: f64,
    comps: Vec<Suff>,
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    data: Vec<Vec<f64>>,
    k: usize,
    base: NigBase,
    ids: Vec<String>,
}

impl GmmModel {
    /// `k` mixture components; the prior centre and scale come from the data
    /// mean and variance of each dimension.
    pub fn new(data: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let d = data.first().map(Vec::len).unwrap_or(0);
        if d == 0 || data.iter().any(|r| r.len() != d) {
            return Err(BenchError::Invalid("GMM data must be non-empty rows of equal length".into()));
        }
        if k == 0 {
            return Err(BenchError::Invalid("GMM needs at least one component".into()));
        }
        let n = data.len() as f64;
        let m0: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let s2: Vec<f64> = (0..d)
            .map(|j| {
                let v = data.iter().map(|r| (r[j] - m0[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v
                } else {
                    1.0
                }
            })
            .collect();
        Ok(GmmModel {
            data,
            k,
            base: NigBase { m0, kappa0: 0.1, s2 },
            ids: vec!["alpha".into(), "nu".into()],
        })
    }

    pub fn dim(&self) -> usize {
        self.base.m0.len()
    }

    /// Lower bound of the `ν` prior.
    pub fn nu_lower(&self) -> f64 {
        self.dim() as f64 - 1.0
    }

    fn nu_prior(&self) -> Result<Dist, Signal> {
        // ν must exceed 0 to give a proper shape; d = 1 would put the bound at 0.
        let lo = self.nu_lower().max(1e-3);
        Ok(Dist::uniform(lo, 100.0)?)
    }

    /// Log predictive density of `x` under a component with statistics `c`.
    fn predictive(&self, c: &Suff, a0: f64, x: &[f64]) -> f64 {
        let b = &self.base;
        let mut total = 0.0;
        for j in 0..x.len() {
            let (n, sum, sumsq) = if c.n > 0.0 { (c.n, c.sum[j], c.sumsq[j]) } else { (0.0, 0.0, 0.0) };
            let kn = b.kappa0 + n;
            let mean = if n > 0.0 { sum / n } else { 0.0 };
            let mn = (b.kappa0 * b.m0[j] + sum) / kn;
            let an = a0 + 0.5 * n;
            let ss = if n > 0.0 { sumsq - n * mean * mean } else { 0.0 };
            let bn = a0 * b.s2[j] + 0.5 * ss.max(0.0) + b.kappa0 * n * (mean - b.m0[j]).powi(2) / (2.0 * kn);
            let dof = 2.0 * an;
            let scale2 = bn * (kn + 1.0) / (an * kn);
            let z = (x[j] - mn).powi(2) / (dof * scale2);
            total += libm::lgamma(0.5 * (dof + 1.0)) - libm::lgamma(0.5 * dof) - 0.5 * (dof.ln() + LN_PI + scale2.ln())
                - 0.5 * (dof + 1.0) * z.ln_1p();
        }
        total
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Model for GmmModel {
    type State = GmmState;

    fn optim_ids(&self) -> &[String] {
        &self.ids
    }

    fn start(&self) -> GmmState {
        GmmState {
            i: 0,
            alpha: 0.0,
            a0: 0.0,
            comps: Vec::new(),
        }
    }

    fn step(&self, s: &mut GmmState, ctx: &mut Ctx<'_>) -> Result<Flow, Signal> {
        if s.i == 0 && s.comps.is_empty() {
            s.alpha = ctx.optim_real("alpha", &Dist::uniform(0.01, 100.0)?)?;
            let nu = ctx.optim_real("nu", &self.nu_prior()?)?;
            s.a0 = 0.5 * nu;
            let d = self.dim();
            s.comps = vec![
                Suff {
                    n: 0.0,
                    sum: vec![0.0; d],
                    sumsq: vec![0.0; d],
                };
                self.k
            ];
        }
        let x = &self.data[s.i];
        let kf = self.k as f64;
        let denom = (s.i as f64 + s.alpha).ln();
        let logw: Vec<f64> = s
            .comps
            .iter()
            .map(|c| (c.n + s.alpha / kf).ln() - denom + self.predictive(c, s.a0, x))
            .collect();
        let total = log_sum_exp(&logw);
        ctx.factor(total)?;
        if total == f64::NEG_INFINITY {
            return Ok(Flow::Done(Value::Unit));
        }
        let post: Vec<f64> = logw.iter().map(|l| (l - total).exp()).collect();
        let z = ctx.sample_int(&Dist::discrete(post)?)? as usize;
        let c = &mut s.comps[z];
        c.n += 1.0;
        for (j, v) in x.iter().enumerate() {
            c.sum[j] += v;
            c.sumsq[j] += v * v;
        }
        s.i += 1;
        if s.i >= self.data.len() {
            let occupied = s.comps.iter().filter(|c| c.n > 0.0).count();
            Ok(Flow::Done(Value::Int(occupied as i64)))
        } else {
            Ok(Flow::Continue)
        }
    }
}

/// Small four-dimensional, three-cluster dataset for tests and examples.
pub fn synthetic_gmm_data(n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
    let centres = [[5.0, 3.4, 1.5, 0.2], [5.9, 2.8, 4.3, 1.3], [6.6, 3.0, 5.5, 2.0]];
    (0..n)
        .map(|i| {
            let c = &centres[i % 3];
            c.iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + 0.3 * z
                })
                .collect()
        })
        .collect()
}
