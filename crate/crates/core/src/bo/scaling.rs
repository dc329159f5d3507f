//! Affine maps between raw θ / log-evidence values and the `[-1, 1]`
//! hypercube the surrogate works in.

use log::warn;

use crate::error::{Error, Result};

/// Half-width given to a dimension with no spread.
fn degenerate_width(center: f64) -> f64 {
    center.abs().max(1.0) * 1e-6
}

/// Smallest allowed region radius, so the bump mean stays well defined when
/// every point sits at the origin.
const MIN_RADIUS: f64 = 1e-6;

/// Ratio `r_inf / r_e`.
pub const R_INF_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingTransform {
    lo: Vec<f64>,
    hi: Vec<f64>,
    center: Vec<f64>,
    half_width: Vec<f64>,
    output_floor: f64,
    output_top: f64,
    r_e: f64,
    r_inf: f64,
    #[serde(skip)]
    points: Vec<Vec<f64>>,
}

impl ScalingTransform {
    /// Initial scaling from prior draws and evaluated `(θ, log z)` pairs.
    pub fn init(draws: &[Vec<f64>], evals: &[(Vec<f64>, f64)]) -> Result<Self> {
        if draws.len() < 2 {
            return Err(Error::Parameter(format!(
                "scaling needs at least 2 prior draws, got {}",
                draws.len()
            )));
        }
        let finite: Vec<f64> = evals.iter().map(|e| e.1).filter(|v| v.is_finite()).collect();
        if finite.len() < 2 {
            return Err(Error::Parameter(format!(
                "scaling needs at least 2 finite evaluations, got {}",
                finite.len()
            )));
        }
        let dim = draws[0].len();
        if draws.iter().chain(evals.iter().map(|e| &e.0)).any(|x| x.len() != dim) {
            return Err(Error::Parameter("inconsistent θ dimensions in scaling data".into()));
        }
        let mut lo = draws[0].clone();
        let mut hi = draws[0].clone();
        for x in draws.iter().chain(evals.iter().map(|e| &e.0)) {
            for i in 0..dim {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        let mut s = ScalingTransform {
            center: vec![0.0; dim],
            half_width: vec![0.0; dim],
            lo,
            hi,
            output_floor: finite.iter().cloned().fold(f64::INFINITY, f64::min),
            output_top: finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            r_e: 0.0,
            r_inf: 0.0,
            points: draws.iter().chain(evals.iter().map(|e| &e.0)).cloned().collect(),
        };
        s.refresh_inputs(true);
        s.recompute_radius();
        Ok(s)
    }

    fn refresh_inputs(&mut self, warn_degenerate: bool) {
        for i in 0..self.lo.len() {
            let c = 0.5 * (self.lo[i] + self.hi[i]);
            let w = 0.5 * (self.hi[i] - self.lo[i]);
            self.center[i] = c;
            self.half_width[i] = if w > 0.0 {
                w
            } else {
                if warn_degenerate {
                    warn!("θ dimension {i} has no spread in the scaling data; using a small width");
                }
                degenerate_width(c)
            };
        }
    }

    fn recompute_radius(&mut self) {
        let r = self.points.iter().map(|x| self.radius(x)).fold(0.0, f64::max);
        self.set_radius(r);
    }

    fn set_radius(&mut self, r: f64) {
        self.r_e = r.max(MIN_RADIUS);
        self.r_inf = R_INF_FACTOR * self.r_e;
    }

    /// Incorporates a newly evaluated point. Inputs outside the current box
    /// widen it just enough; the output top moves up for new maxima while the
    /// floor stays put.
    pub fn update(&mut self, theta: &[f64], log_z: f64) {
        let mut widened = false;
        for (i, &v) in theta.iter().enumerate() {
            if v < self.lo[i] {
                self.lo[i] = v;
                widened = true;
            }
            if v > self.hi[i] {
                self.hi[i] = v;
                widened = true;
            }
        }
        self.points.push(theta.to_vec());
        if widened {
            self.refresh_inputs(false);
            self.recompute_radius();
        } else {
            let r = self.radius(theta);
            if r > self.r_e {
                self.set_radius(r);
            }
        }
        if log_z.is_finite() && log_z > self.output_top {
            self.output_top = log_z;
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn input_center(&self) -> &[f64] {
        &self.center
    }

    pub fn input_half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn output_floor(&self) -> f64 {
        self.output_floor
    }

    pub fn output_top(&self) -> f64 {
        self.output_top
    }

    pub fn r_e(&self) -> f64 {
        self.r_e
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn scale_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(v, (c, w))| (v - c) / w)
            .collect()
    }

    pub fn unscale_input(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(v, (c, w))| c + w * v)
            .collect()
    }

    /// Euclidean norm of the scaled input.
    pub fn radius(&self, x: &[f64]) -> f64 {
        self.scale_input(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn output_affine(&self) -> (f64, f64) {
        let w = 0.5 * (self.output_top - self.output_floor);
        if w > 0.0 {
            (self.output_floor + w, w)
        } else {
            let c = self.output_floor;
            let w = degenerate_width(c);
            (c + w, w)
        }
    }

    /// Scaled output; values below the floor (including `−∞`) clamp to −1.
    pub fn scale_output(&self, y: f64) -> f64 {
        let (c, w) = self.output_affine();
        ((y - c) / w).max(-1.0)
    }

    pub fn unscale_output(&self, s: f64) -> f64 {
        let (c, w) = self.output_affine();
        c + w * s
    }

    /// Scales a value difference (such as a predictive std) without shifting.
    pub fn output_half_width(&self) -> f64 {
        self.output_affine().1
    }
}

/// Initial scaling from prior draws and evaluations.
pub fn init_scaling(draws: &[Vec<f64>], evals: &[(Vec<f64>, f64)]) -> Result<ScalingTransform> {
    ScalingTransform::init(draws, evals)
}

/// Functional form of [`ScalingTransform::update`].
pub fn update_scaling(s: &ScalingTransform, theta: &[f64], log_z: f64) -> ScalingTransform {
    let mut out = s.clone();
    out.update(theta, log_z);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic() -> ScalingTransform {
        init_scaling(
            &[vec![0.0], vec![10.0], vec![4.0]],
            &[(vec![0.0], -10.0), (vec![10.0], -2.0)],
        )
        .unwrap()
    }

    #[test]
    fn affine_endpoints() {
        let s = basic();
        assert_eq!(s.scale_input(&[0.0]), vec![-1.0]);
        assert_eq!(s.scale_input(&[10.0]), vec![1.0]);
        assert_eq!(s.scale_input(&[5.0]), vec![0.0]);
        assert_eq!(s.scale_output(-10.0), -1.0);
        assert_eq!(s.scale_output(-2.0), 1.0);
        assert_eq!(s.r_e(), 1.0);
        assert_eq!(s.r_inf(), 1.5);
    }

    #[test]
    fn round_trip() {
        let s = init_scaling(
            &[vec![-3.2, 0.001], vec![7.7, 0.004]],
            &[(vec![1.0, 0.002], -4.0), (vec![2.0, 0.003], 3.0)],
        )
        .unwrap();
        for x in [[0.3, 0.0025], [-100.0, 5.0], [7.7, 0.001]] {
            let back = s.unscale_input(&s.scale_input(&x));
            for i in 0..2 {
                assert!((back[i] - x[i]).abs() < 1e-12 * x[i].abs().max(1.0));
            }
        }
        let y = 1.234;
        assert!((s.unscale_output(s.scale_output(y)) - y).abs() < 1e-12);
    }

    #[test]
    fn inside_point_leaves_scaling_unchanged() {
        let s = basic();
        let t = update_scaling(&s, &[5.0], -6.0);
        assert_eq!(s, ScalingTransform { points: s.points.clone(), ..t.clone() });
        assert_eq!(s.scale_output(-6.0), t.scale_output(-6.0));
    }

    #[test]
    fn low_outputs_do_not_move_the_floor() {
        let s = basic();
        let t = update_scaling(&s, &[5.0], s.output_floor() - 100.0);
        assert_eq!(t.output_floor(), s.output_floor());
        assert_eq!(t.scale_output(s.output_floor() - 100.0), -1.0);
        assert_eq!(t.scale_output(f64::NEG_INFINITY), -1.0);
    }

    #[test]
    fn high_outputs_move_the_top() {
        let s = update_scaling(&basic(), &[5.0], 6.0);
        assert_eq!(s.scale_output(6.0), 1.0);
        assert_eq!(s.scale_output(-10.0), -1.0);
    }

    #[test]
    fn far_point_expands_inputs_and_radius() {
        let s = init_scaling(
            &[vec![-1.0, -1.0], vec![1.0, 1.0]],
            &[(vec![-1.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)],
        )
        .unwrap();
        let old_r = s.r_e();
        let far = vec![1.5 * 2f64.sqrt(), 1.5 * 2f64.sqrt()];
        let t = update_scaling(&s, &far, -1.0);
        for p in t.points.iter() {
            assert!(t.scale_input(p).iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
        let direct = t.points.iter().map(|p| t.radius(p)).fold(0.0, f64::max);
        assert_eq!(t.r_e(), direct);
        assert!(t.r_e() > 0.0);
        assert_eq!(t.r_inf(), 1.5 * t.r_e());
        assert!(old_r > 0.0);
    }

    #[test]
    fn simplex_draws_lie_within_radius() {
        let draws = vec![
            vec![0.2, 0.3, 0.5],
            vec![0.7, 0.1, 0.2],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let s = init_scaling(&draws, &[(draws[0].clone(), -1.0), (draws[1].clone(), 0.0)]).unwrap();
        let max = draws.iter().map(|d| s.radius(d)).fold(0.0, f64::max);
        assert_eq!(s.r_e(), max);
        assert!(draws.iter().all(|d| s.radius(d) <= s.r_e()));
    }

    #[test]
    fn degenerate_dimension_gets_small_width() {
        let s = init_scaling(
            &[vec![2.0, 0.0], vec![2.0, 1.0]],
            &[(vec![2.0, 0.0], 0.0), (vec![2.0, 1.0], 1.0)],
        )
        .unwrap();
        assert_eq!(s.input_half_width()[0], 2e-6);
    }

    #[test]
    fn preconditions() {
        assert!(init_scaling(&[vec![0.0]], &[(vec![0.0], 0.0), (vec![1.0], 1.0)]).is_err());
        assert!(init_scaling(
            &[vec![0.0], vec![1.0]],
            &[(vec![0.0], 0.0), (vec![1.0], f64::NEG_INFINITY)]
        )
        .is_err());
    }
}
