//! Standard deterministic optimization benchmarks (minimization form).

use std::f64::consts::PI;

use crate::error::{BenchError, Result};

/// Named benchmark function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Branin,
    Hartmann6,
}

impl Benchmark {
    pub fn dim(self) -> usize {
        match self {
            Benchmark::Branin => 2,
            Benchmark::Hartmann6 => 6,
        }
    }

    /// Per-dimension `(low, high)` bounds of the standard domain.
    pub fn domain(self) -> Vec<(f64, f64)> {
        match self {
            Benchmark::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            Benchmark::Hartmann6 => vec![(0.0, 1.0); 6],
        }
    }

    /// Known global minimum value.
    pub fn minimum(self) -> f64 {
        match self {
            Benchmark::Branin => 0.397_887_357_729_738_2,
            Benchmark::Hartmann6 => -3.322_368_011_415_515,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Branin => "branin",
            Benchmark::Hartmann6 => "hartmann6",
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        let dom = self.domain();
        if x.len() != dom.len() {
            return Err(BenchError::Invalid(format!(
                "{} takes {} inputs, got {}",
                self.name(),
                dom.len(),
                x.len()
            )));
        }
        if x.iter().zip(&dom).any(|(v, (lo, hi))| !(lo..=hi).contains(&v)) {
            return Err(BenchError::Invalid(format!("{x:?} is outside the {} domain", self.name())));
        }
        Ok(match self {
            Benchmark::Branin => branin_unchecked(x[0], x[1]),
            Benchmark::Hartmann6 => hartmann6_unchecked(x),
        })
    }
}

pub fn branin(x1: f64, x2: f64) -> Result<f64> {
    Benchmark::Branin.eval(&[x1, x2])
}

pub fn hartmann6(x: &[f64]) -> Result<f64> {
    Benchmark::Hartmann6.eval(x)
}

fn branin_unchecked(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Published minimizer of Hartmann-6.
pub const HARTMANN6_ARGMIN: [f64; 6] = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];

fn hartmann6_unchecked(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let s: f64 = (0..6).map(|j| H6_A[i][j] * (x[j] - H6_P[i][j]).powi(2)).sum();
            H6_ALPHA[i] * (-s).exp()
        })
        .sum::<f64>()
}
