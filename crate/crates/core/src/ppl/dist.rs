//! Distribution objects: sampling, log-density and base-measure tags.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma as GammaSampler, StandardNormal};

use super::Value;
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Reference measure a density is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BaseMeasure {
    /// Lebesgue measure of the given dimension (simplices report `K - 1`).
    Lebesgue(usize),
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    Normal,
    MvNormal,
    Uniform,
    Gamma,
    Dirichlet,
    Discrete,
    UniformDiscrete,
    Factor,
}

#[derive(Debug, Clone, PartialEq)]
enum Covariance {
    /// Per-coordinate standard deviations.
    Diagonal(Vec<f64>),
    /// Lower Cholesky factor and log-determinant of the covariance.
    Full { chol: DMatrix<f64>, log_det: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Normal { mean: f64, std: f64 },
    MvNormal { mean: Vec<f64>, cov: Covariance },
    Uniform { low: f64, high: f64 },
    Gamma { shape: f64, rate: f64 },
    Dirichlet { alpha: Vec<f64>, log_norm: f64 },
    Discrete { probs: Vec<f64> },
    UniformDiscrete { low: i64, high: i64 },
    Factor { log_weight: f64 },
}

/// An immutable, validated distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist(Repr);

fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(param(format!("{what} must be finite, got {x}")))
    }
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(param(format!("{what} must be positive and finite, got {x}")))
    }
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

impl Dist {
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Ok(Dist(Repr::Normal {
            mean: finite(mean, "normal mean")?,
            std: positive(std, "normal std")?,
        }))
    }

    /// Multivariate normal with independent coordinates, given per-coordinate
    /// standard deviations.
    pub fn mv_normal_diag(mean: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if mean.len() != stds.len() || mean.is_empty() {
            return Err(param("mean and std vectors must be non-empty and equal length"));
        }
        for &m in &mean {
            finite(m, "mv-normal mean")?;
        }
        for &s in &stds {
            positive(s, "mv-normal std")?;
        }
        Ok(Dist(Repr::MvNormal {
            mean,
            cov: Covariance::Diagonal(stds),
        }))
    }

    pub fn mv_normal_iso(mean: Vec<f64>, std: f64) -> Result<Self> {
        let stds = vec![std; mean.len()];
        Self::mv_normal_diag(mean, stds)
    }

    pub fn mv_normal(mean: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(param("covariance must be square and match the mean dimension"));
        }
        for &m in &mean {
            finite(m, "mv-normal mean")?;
        }
        if (cov - cov.transpose()).abs().max() > 1e-10 * cov.abs().max().max(1.0) {
            return Err(param("covariance must be symmetric"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| param("covariance must be positive definite"))?
            .unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(Dist(Repr::MvNormal {
            mean,
            cov: Covariance::Full { chol, log_det },
        }))
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        finite(low, "uniform low")?;
        finite(high, "uniform high")?;
        if low >= high {
            return Err(param(format!("uniform requires low < high, got [{low}, {high}]")));
        }
        Ok(Dist(Repr::Uniform { low, high }))
    }

    /// Gamma with shape `k` and rate `λ` (mean `k/λ`).
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Ok(Dist(Repr::Gamma {
            shape: positive(shape, "gamma shape")?,
            rate: positive(rate, "gamma rate")?,
        }))
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(param("dirichlet needs at least two concentrations"));
        }
        for &a in &alpha {
            positive(a, "dirichlet concentration")?;
        }
        let log_norm = ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
        Ok(Dist(Repr::Dirichlet { alpha, log_norm }))
    }

    /// Categorical over `0..probs.len()`; weights are normalized.
    pub fn discrete(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(param("discrete needs at least one category"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(param("discrete weights must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(param("discrete weights must not all be zero"));
        }
        Ok(Dist(Repr::Discrete {
            probs: probs.into_iter().map(|p| p / total).collect(),
        }))
    }

    /// Uniform over the integers `low..=high`.
    pub fn uniform_discrete(low: i64, high: i64) -> Result<Self> {
        if low > high {
            return Err(param(format!("uniform-discrete requires low <= high, got {low}..={high}")));
        }
        Ok(Dist(Repr::UniformDiscrete { low, high }))
    }

    /// Pseudo-distribution whose log-density is the given weight everywhere.
    pub fn factor(log_weight: f64) -> Self {
        Dist(Repr::Factor { log_weight })
    }

    pub fn kind(&self) -> DistKind {
        match self.0 {
            Repr::Normal { .. } => DistKind::Normal,
            Repr::MvNormal { .. } => DistKind::MvNormal,
            Repr::Uniform { .. } => DistKind::Uniform,
            Repr::Gamma { .. } => DistKind::Gamma,
            Repr::Dirichlet { .. } => DistKind::Dirichlet,
            Repr::Discrete { .. } => DistKind::Discrete,
            Repr::UniformDiscrete { .. } => DistKind::UniformDiscrete,
            Repr::Factor { .. } => DistKind::Factor,
        }
    }

    /// `None` for factors, which carry no measure.
    pub fn base_measure(&self) -> Option<BaseMeasure> {
        Some(match &self.0 {
            Repr::Normal { .. } | Repr::Uniform { .. } | Repr::Gamma { .. } => BaseMeasure::Lebesgue(1),
            Repr::MvNormal { mean, .. } => BaseMeasure::Lebesgue(mean.len()),
            Repr::Dirichlet { alpha, .. } => BaseMeasure::Lebesgue(alpha.len() - 1),
            Repr::Discrete { .. } | Repr::UniformDiscrete { .. } => BaseMeasure::Counting,
            Repr::Factor { .. } => return None,
        })
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Value> {
        Ok(match &self.0 {
            Repr::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                Value::Real(mean + std * z)
            }
            Repr::MvNormal { mean, cov } => {
                let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
                let x = match cov {
                    Covariance::Diagonal(stds) => mean.iter().zip(stds).zip(&z).map(|((m, s), z)| m + s * z).collect(),
                    Covariance::Full { chol, .. } => {
                        let lz = chol * DVector::from_vec(z);
                        mean.iter().zip(lz.iter()).map(|(m, v)| m + v).collect()
                    }
                };
                Value::Vector(x)
            }
            Repr::Uniform { low, high } => Value::Real(low + (high - low) * rng.random::<f64>()),
            Repr::Gamma { shape, rate } => Value::Real(gamma_draw(*shape, rng) / rate),
            Repr::Dirichlet { alpha, .. } => Value::Vector(dirichlet_draw(alpha, rng)),
            Repr::Discrete { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                Value::Int(k as i64)
            }
            Repr::UniformDiscrete { low, high } => Value::Int(rng.random_range(*low..=*high)),
            Repr::Factor { .. } => return Err(Error::Unsupported("cannot sample from a factor".into())),
        })
    }

    /// Log-density with respect to [`Dist::base_measure`]; `-inf` outside the
    /// support.
    pub fn log_density(&self, v: &Value) -> Result<f64> {
        Ok(match &self.0 {
            Repr::Normal { mean, std } => normal_ln_pdf(v.as_real()?, *mean, *std),
            Repr::MvNormal { mean, cov } => {
                let x = v.as_vector()?;
                if x.len() != mean.len() {
                    return Err(Error::Type(format!(
                        "expected vector of length {}, got {}",
                        mean.len(),
                        x.len()
                    )));
                }
                match cov {
                    Covariance::Diagonal(stds) => {
                        x.iter().zip(mean).zip(stds).map(|((x, m), s)| normal_ln_pdf(*x, *m, *s)).sum()
                    }
                    Covariance::Full { chol, log_det } => {
                        let r = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(x, m)| x - m));
                        let z = chol
                            .solve_lower_triangular(&r)
                            .ok_or_else(|| Error::Numerical("singular covariance factor".into()))?;
                        -0.5 * z.norm_squared() - 0.5 * log_det - x.len() as f64 * LN_SQRT_2PI
                    }
                }
            }
            Repr::Uniform { low, high } => {
                let x = v.as_real()?;
                if (*low..=*high).contains(&x) {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Repr::Gamma { shape, rate } => {
                let x = v.as_real()?;
                if x > 0.0 && x.is_finite() {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * x.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Repr::Dirichlet { alpha, log_norm } => {
                let x = v.as_vector()?;
                if x.len() != alpha.len() {
                    return Err(Error::Type(format!(
                        "expected simplex vector of length {}, got {}",
                        alpha.len(),
                        x.len()
                    )));
                }
                if !on_simplex(x, 1e-9) {
                    return Ok(f64::NEG_INFINITY);
                }
                log_norm + x.iter().zip(alpha).map(|(x, a)| (a - 1.0) * x.ln()).sum::<f64>()
            }
            Repr::Discrete { probs } => {
                let k = v.as_int()?;
                if k >= 0 && (k as usize) < probs.len() {
                    probs[k as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Repr::UniformDiscrete { low, high } => {
                let k = v.as_int()?;
                if (*low..=*high).contains(&k) {
                    -((high - low + 1) as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Repr::Factor { log_weight } => *log_weight,
        })
    }

    /// The admissible range of a scalar integer-valued distribution, if any.
    pub fn integer_range(&self) -> Option<(i64, i64)> {
        match &self.0 {
            Repr::Discrete { probs } => Some((0, probs.len() as i64 - 1)),
            Repr::UniformDiscrete { low, high } => Some((*low, *high)),
            _ => None,
        }
    }
}

pub fn normal_ln_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

pub(crate) fn on_simplex(x: &[f64], tol: f64) -> bool {
    x.iter().all(|&p| p >= 0.0 && p.is_finite()) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
}

fn gamma_draw(shape: f64, rng: &mut dyn RngCore) -> f64 {
    // Parameters were validated on construction.
    GammaSampler::new(shape, 1.0).expect("validated gamma shape").sample(rng)
}

fn dirichlet_draw(alpha: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let mut g: Vec<f64> = alpha.iter().map(|&a| gamma_draw(a, rng)).collect();
    let mut total: f64 = g.iter().sum();
    if total <= 0.0 {
        // Every gamma draw underflowed (tiny concentrations): fall back to a vertex.
        let k = rng.random_range(0..alpha.len());
        g.iter_mut().for_each(|x| *x = 0.0);
        g[k] = 1.0;
        total = 1.0;
    }
    g.iter_mut().for_each(|x| *x /= total);
    g
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_scale_is_a_parameter_error() {
        assert!(matches!(Dist::normal(0.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(Dist::gamma(-1.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(Dist::dirichlet(vec![1.0, 0.0]), Err(Error::Parameter(_))));
        assert!(matches!(Dist::uniform(3.0, -3.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn dirichlet_draw_lies_on_simplex() {
        let d = Dist::dirichlet(vec![1.0; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = d.sample(&mut rng).unwrap();
            let s: f64 = v.as_vector().unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let d = Dist::normal(0.0, 1.0).unwrap();
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reference_log_densities() {
        let n = Dist::normal(0.0, 1.0).unwrap();
        assert!((n.log_density(&Value::Real(0.0)).unwrap() + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert!((n.log_density(&Value::Real(0.0)).unwrap() - (-0.918939)).abs() < 1e-6);
        let u = Dist::uniform(-3.0, 3.0).unwrap();
        assert_eq!(u.log_density(&Value::Real(5.0)).unwrap(), f64::NEG_INFINITY);
        let c = Dist::discrete(vec![0.2, 0.8]).unwrap();
        assert!((c.log_density(&Value::Int(1)).unwrap() - 0.8f64.ln()).abs() < 1e-15);
        assert_eq!(c.log_density(&Value::Int(2)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn type_mismatch_is_reported() {
        let n = Dist::normal(0.0, 1.0).unwrap();
        assert!(matches!(n.log_density(&Value::Int(0)), Err(Error::Type(_))));
        let c = Dist::discrete(vec![1.0]).unwrap();
        assert!(matches!(c.log_density(&Value::Real(0.0)), Err(Error::Type(_))));
    }

    #[test]
    fn base_measures() {
        assert_eq!(Dist::normal(0.0, 1.0).unwrap().base_measure(), Some(BaseMeasure::Lebesgue(1)));
        assert_eq!(Dist::discrete(vec![1.0, 2.0]).unwrap().base_measure(), Some(BaseMeasure::Counting));
        assert_eq!(
            Dist::dirichlet(vec![1.0; 4]).unwrap().base_measure(),
            Some(BaseMeasure::Lebesgue(3))
        );
        assert_eq!(Dist::factor(0.0).base_measure(), None);
    }

    #[test]
    fn factor_weights_and_refuses_sampling() {
        let f = Dist::factor(-2.5);
        assert_eq!(f.log_density(&Value::Unit).unwrap(), -2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(f.sample(&mut rng), Err(Error::Unsupported(_))));
    }

    #[test]
    fn full_and_diagonal_mvn_agree_on_diagonal_covariance() {
        let mean = vec![0.5, -1.0];
        let full = Dist::mv_normal(mean.clone(), &DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]))).unwrap();
        let diag = Dist::mv_normal_diag(mean, vec![2.0, 0.5]).unwrap();
        let x = Value::Vector(vec![1.3, -0.2]);
        let a = full.log_density(&x).unwrap();
        let b = diag.log_density(&x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
