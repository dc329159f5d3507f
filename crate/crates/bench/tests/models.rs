use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bopp::infer::smc_marginal;
use bopp::ppl::{Theta, Value};
use bopp::transform::{prior_log_density, run_marginal};
use bopp_bench::data::load_rows;
use bopp_bench::functions::{branin, hartmann6, Benchmark, HARTMANN6_ARGMIN};
use bopp_bench::models::*;

fn ln_normal(x: f64, mu: f64, sd: f64) -> f64 {
    -0.5 * ((x - mu) / sd).powi(2) - sd.ln() - 0.5 * (2.0 * PI).ln()
}

fn real(v: f64) -> Theta {
    Theta::new(vec![Value::Real(v)])
}

#[test]
fn bimodal_log_joint_at_five() {
    let m = make_bimodal_model();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let lw = run_marginal(&m, &real(5.0), &mut rng).unwrap().log_weight;
    let expected = ln_normal(5.0, 0.0, 0.5) + ln_normal(0.0, 0.0, 0.5);
    assert!((lw - expected).abs() < 1e-12);
    assert!((m.log_joint(5.0) - expected).abs() < 1e-12);
}

#[test]
fn bimodal_is_symmetric() {
    let m = make_bimodal_model();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for t in [0.3, 1.7, 2.5, 4.9, 7.0] {
        let a = run_marginal(&m, &real(t), &mut rng).unwrap().log_weight;
        let b = run_marginal(&m, &real(-t), &mut rng).unwrap().log_weight;
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bimodal_grid_maxima() {
    // Completing the square in |θ|: the prior pulls the likelihood peak at 5
    // halfway back to 0 when both scales are 0.5.
    let m = make_bimodal_model();
    let grid: Vec<f64> = (0..=16_000).map(|i| -8.0 + i as f64 * 1e-3).collect();
    let best = grid.iter().cloned().fold(f64::NEG_INFINITY, |a, t| a.max(m.log_joint(t)));
    let argmax: Vec<f64> = grid.iter().cloned().filter(|t| m.log_joint(*t) > best - 1e-9).collect();
    assert_eq!(argmax.len(), 2);
    assert!((argmax[0] + 2.5).abs() < 1e-3 && (argmax[1] - 2.5).abs() < 1e-3);
}

#[test]
fn function_shims_match_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = FunctionModel::new(Benchmark::Branin);
    let theta = Theta::new(vec![Value::Real(PI), Value::Real(2.275)]);
    let lw = run_marginal(&m, &theta, &mut rng).unwrap().log_weight;
    assert!((lw - (-(225.0f64).ln() - branin(PI, 2.275).unwrap())).abs() < 1e-12);

    let m = FunctionModel::new(Benchmark::Hartmann6);
    let theta = Theta::new(HARTMANN6_ARGMIN.iter().map(|v| Value::Real(*v)).collect());
    let lw = run_marginal(&m, &theta, &mut rng).unwrap().log_weight;
    assert!((lw + hartmann6(&HARTMANN6_ARGMIN).unwrap()).abs() < 1e-12);
}

#[test]
fn noisy_function_shim_is_unbiased() {
    let m = FunctionModel::new(Benchmark::Branin).with_noise(0.5);
    let theta = Theta::new(vec![Value::Real(0.0), Value::Real(0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 4000;
    let mean = (0..n)
        .map(|_| run_marginal(&m, &theta, &mut rng).unwrap().log_weight)
        .sum::<f64>()
        / n as f64;
    let exact = -(225.0f64).ln() - branin(0.0, 0.0).unwrap();
    assert!((mean - exact).abs() < 4.0 * 0.5 / (n as f64).sqrt());
}

fn kalman_setup(t: usize, sigma_q: f64, sigma_y: f64, k: usize, seed: u64) -> (KalmanConfig, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = KalmanConfig::synthetic(k, t, &mut rng).unwrap();
    cfg.sigma_q = sigma_q;
    cfg.sigma_y = sigma_y;
    let y = simulate_kalman_data(&cfg, &mut rng).unwrap();
    (cfg, y)
}

#[test]
fn kalman_data_shape_and_reproducibility() {
    let (cfg, a) = kalman_setup(25, 0.01, 0.2, 20, 3);
    let (_, b) = kalman_setup(25, 0.01, 0.2, 20, 3);
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.t);
    assert!(a.iter().all(|r| r.len() == 20));
}

#[test]
fn kalman_prior_support_and_density() {
    let (cfg, y) = kalman_setup(5, 0.01, 0.2, 20, 1);
    let m = KalmanModel::new(&cfg, &y).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inside = Theta::new(vec![Value::Real(-2.3), Value::Real(1.25)]);
    let d = prior_log_density(&m, &inside, &mut rng).unwrap();
    assert!((d.total - (1.0f64 / 18.0).ln()).abs() < 1e-12);
    for (b, e) in [(-3.5, 1.0), (0.0, -0.1), (0.0, 3.2)] {
        let outside = Theta::new(vec![Value::Real(b), Value::Real(e)]);
        let est = smc_marginal(&m, &outside, 10, true, &mut rng).unwrap();
        assert_eq!(est.log_z, f64::NEG_INFINITY);
    }
}

#[test]
fn kalman_eta_sign_gives_identical_dynamics() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    use rand::Rng;
    for _ in 0..1000 {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let (b, e) = (rng.random_range(-3.0..3.0), rng.random_range(0.0..3.0));
        assert_eq!(pickover_step(x, b, e), pickover_step(x, b, -e));
    }
    assert_eq!(kalman_distance(-2.3, 1.25, -2.3, 1.25), kalman_distance(-2.3, -1.25, -2.3, 1.25));
}

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx`.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { (a.max(b) as f64 / 2.0).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], PI.sqrt() * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn ln_mvn(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().unwrap();
    let r = y - mean;
    let sol = chol.solve(&r);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (r.dot(&sol) + log_det + y.len() as f64 * (2.0 * PI).ln())
}

#[test]
fn kalman_two_step_evidence_matches_quadrature() {
    let (cfg, y) = kalman_setup(2, 1e-6, 1.0, 3, 5);
    let (beta, eta) = (-2.3, 1.25);
    let c = &cfg.c;
    let y1 = DVector::from_column_slice(&y[0]);
    let y2 = DVector::from_column_slice(&y[1]);
    let sy2 = cfg.sigma_y * cfg.sigma_y;

    // x₁ | y₁ is Gaussian; the second observation is integrated numerically.
    let ln_p_y1 = ln_mvn(&y1, &DVector::zeros(3), &(c * c.transpose() + DMatrix::identity(3, 3) * sy2));
    let prec = DMatrix::identity(3, 3) + c.transpose() * c / sy2;
    let cov = prec.clone().try_inverse().unwrap();
    let mean = &cov * (c.transpose() * &y1 / sy2);
    let l = cov.cholesky().unwrap().l();
    let (nodes, weights) = gauss_hermite(40);
    let obs_cov = DMatrix::identity(3, 3) * sy2;
    let mut integral = 0.0;
    for (i, ui) in nodes.iter().enumerate() {
        for (j, uj) in nodes.iter().enumerate() {
            for (k, uk) in nodes.iter().enumerate() {
                let u = DVector::from_vec(vec![*ui, *uj, *uk]) * 2f64.sqrt();
                let x = &mean + &l * u;
                let a = pickover_step([x[0], x[1], x[2]], beta, eta);
                let pred = c * DVector::from_column_slice(&a);
                let w = weights[i] * weights[j] * weights[k] / PI.powf(1.5);
                integral += w * ln_mvn(&y2, &pred, &obs_cov).exp();
            }
        }
    }
    let ln_prior = -(18.0f64).ln();
    let exact = ln_prior + ln_p_y1 + integral.ln();

    let m = KalmanModel::new(&cfg, &y).unwrap();
    let theta = Theta::new(vec![Value::Real(beta), Value::Real(eta)]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let reps = 10;
    let z = (0..reps)
        .map(|_| (smc_marginal(&m, &theta, 20_000, true, &mut rng).unwrap().log_z - exact).exp())
        .sum::<f64>()
        / reps as f64;
    assert!((z - 1.0).abs() < 1e-2, "ratio to quadrature {z}");
}

#[test]
fn kalman_proposals_agree() {
    let (cfg, y) = kalman_setup(10, 0.05, 0.3, 5, 8);
    let theta = Theta::new(vec![Value::Real(-2.0), Value::Real(1.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mean_z = |p: KalmanProposal| {
        let m = KalmanModel::new(&cfg, &y).unwrap().with_proposal(p);
        let est: Vec<f64> = (0..20)
            .map(|_| smc_marginal(&m, &theta, 5000, true, &mut rng).unwrap().log_z)
            .collect();
        let mx = est.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + (est.iter().map(|v| (v - mx).exp()).sum::<f64>() / est.len() as f64).ln()
    };
    let (a, b) = (mean_z(KalmanProposal::Optimal), mean_z(KalmanProposal::Bootstrap));
    assert!((a - b).abs() < 0.1, "optimal {a} vs bootstrap {b}");
}

fn hmm_theta(k: i64, phis: [f64; 5]) -> Theta {
    let mut v = vec![Value::Int(k)];
    v.extend(phis.iter().map(|p| Value::Real(*p)));
    Theta::new(v)
}

#[test]
fn hmm_single_state_has_closed_form_evidence() {
    let cfg = HmmConfig {
        t: 40,
        ..Default::default()
    };
    let y = simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap().y;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let phi1 = 0.3;
    let mu = lo + phi1 * (hi - lo);
    // Uniform prior densities: 1/5 for K and 1 for each φ.
    let exact = -(5.0f64).ln() + y.iter().map(|v| ln_normal(*v, mu, 0.2)).sum::<f64>();
    for proposal in [HmmProposal::Optimal, HmmProposal::Bootstrap] {
        let m = HmmModel::new(y.clone(), 0.2).unwrap().with_proposal(proposal);
        let est = smc_marginal(&m, &hmm_theta(1, [phi1, 0.9, 0.1, 0.5, 0.5]), 10, true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((est.log_z - exact).abs() < 1e-9);
    }
}

#[test]
fn hmm_unused_phis_are_inert() {
    let y = simulate_hmm_data(&HmmConfig { t: 60, ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(3))
        .unwrap()
        .y;
    let m = HmmModel::new(y, 0.2).unwrap();
    let a = smc_marginal(&m, &hmm_theta(2, [0.2, 0.6, 0.1, 0.4, 0.05]), 50, true, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = smc_marginal(&m, &hmm_theta(2, [0.2, 0.6, 0.9, 0.8, 0.95]), 50, true, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a.log_z, b.log_z);
}

#[test]
fn hmm_means_monotone_within_data_range() {
    let y = simulate_hmm_data(&HmmConfig { t: 100, ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(4))
        .unwrap()
        .y;
    let m = HmmModel::new(y.clone(), 0.2).unwrap();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mu = m.means_of(&hmm_theta(5, [0.1, 0.7, 0.3, 0.0, 1.0])).unwrap();
    assert_eq!(mu.len(), 5);
    assert!(mu.windows(2).all(|w| w[1] >= w[0]));
    assert!(mu.iter().all(|v| *v >= lo && *v <= hi));
}

#[test]
fn hmm_occupancy_matches_stationary_distribution() {
    let cfg = HmmConfig {
        t: 200_000,
        ..Default::default()
    };
    let d = simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let t = DMatrix::from_fn(3, 3, |i, j| cfg.transitions[i][j]);
    // Left eigenvector for eigenvalue 1, by power iteration.
    let mut pi = DVector::from_element(3, 1.0 / 3.0);
    for _ in 0..10_000 {
        pi = t.transpose() * pi;
    }
    for k in 0..3 {
        let freq = d.states.iter().filter(|s| **s == k).count() as f64 / cfg.t as f64;
        assert!((freq - pi[k]).abs() < 0.01, "state {k}: {freq} vs {}", pi[k]);
    }
}

#[test]
fn hmm_data_is_reproducible() {
    let cfg = HmmConfig { t: 300, ..Default::default() };
    let a = simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let b = simulate_hmm_data(&cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(a, b);
}

/// Closed-form log marginal likelihood of one cluster under the per-dimension
/// normal-inverse-gamma prior used by the GMM model.
fn nig_cluster(points: &[&Vec<f64>], m0: &[f64], kappa0: f64, a0: f64, s2: &[f64]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points.len() as f64;
    let mut total = 0.0;
    for j in 0..m0.len() {
        let xs: Vec<f64> = points.iter().map(|p| p[j]).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let kn = kappa0 + n;
        let an = a0 + n / 2.0;
        let b0 = a0 * s2[j];
        let bn = b0 + 0.5 * ss + kappa0 * n * (mean - m0[j]).powi(2) / (2.0 * kn);
        total += libm::lgamma(an) - libm::lgamma(a0) + a0 * b0.ln() - an * bn.ln() + 0.5 * (kappa0 / kn).ln()
            - 0.5 * n * (2.0 * PI).ln();
    }
    total
}

/// Exact evidence by enumerating every assignment.
fn gmm_exact(data: &[Vec<f64>], k: usize, alpha: f64, nu: f64) -> f64 {
    let n = data.len();
    let d = data[0].len();
    let m0: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let s2: Vec<f64> = (0..d)
        .map(|j| {
            let v = data.iter().map(|r| (r[j] - m0[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    let a0 = nu / 2.0;
    let mut terms = Vec::new();
    for code in 0..k.pow(n as u32) {
        let z: Vec<usize> = (0..n).map(|i| (code / k.pow(i as u32)) % k).collect();
        let mut lp = libm::lgamma(alpha) - libm::lgamma(n as f64 + alpha);
        for c in 0..k {
            let members: Vec<&Vec<f64>> = (0..n).filter(|i| z[*i] == c).map(|i| &data[i]).collect();
            let nc = members.len() as f64;
            lp += libm::lgamma(nc + alpha / k as f64) - libm::lgamma(alpha / k as f64);
            lp += nig_cluster(&members, &m0, 0.1, a0, &s2);
        }
        terms.push(lp);
    }
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

fn gmm_prior(alpha_range: f64, nu_range: f64) -> f64 {
    -(alpha_range.ln() + nu_range.ln())
}

#[test]
fn gmm_single_point_is_student_t() {
    let x = vec![vec![0.7, -1.2]];
    let m = GmmModel::new(x, 10).unwrap();
    let nu = 5.0;
    let theta = Theta::new(vec![Value::Real(2.0), Value::Real(nu)]);
    let est = smc_marginal(&m, &theta, 10, true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    // At its own mean, with unit scale per unit of shape and κ₀ = 0.1:
    // scale² = (κ₀ + 1)/κ₀.
    let scale2: f64 = 1.1 / 0.1;
    let t_at_loc = libm::lgamma((nu + 1.0) / 2.0) - libm::lgamma(nu / 2.0) - 0.5 * (nu * PI * scale2).ln();
    let exact = 2.0 * t_at_loc + gmm_prior(100.0 - 0.01, 100.0 - 1.0);
    assert!((est.log_z - exact).abs() < 1e-10, "{} vs {exact}", est.log_z);
}

#[test]
fn gmm_evidence_matches_enumeration() {
    let data = synthetic_gmm_data(5, &mut ChaCha8Rng::seed_from_u64(1));
    let k = 3;
    let m = GmmModel::new(data.clone(), k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (alpha, nu) in [(0.05, 4.0), (1.0, 10.0), (80.0, 50.0)] {
        let exact = gmm_exact(&data, k, alpha, nu) + gmm_prior(100.0 - 0.01, 100.0 - 3.0);
        let theta = Theta::new(vec![Value::Real(alpha), Value::Real(nu)]);
        let est = smc_marginal(&m, &theta, 5000, true, &mut rng).unwrap();
        assert!((est.log_z - exact).abs() < 0.05, "alpha {alpha}: {} vs {exact}", est.log_z);
    }
}

#[test]
fn gmm_evidence_is_continuous_in_alpha() {
    let data = synthetic_gmm_data(5, &mut ChaCha8Rng::seed_from_u64(1));
    let sweep: Vec<f64> = (0..2000)
        .map(|i| gmm_exact(&data, 3, 0.5 + 0.05 * i as f64, 6.0))
        .collect();
    let max_jump = sweep.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(max_jump < 0.05, "largest step {max_jump}");
    // Large α approaches the fixed uniform-weights mixture.
    assert!((gmm_exact(&data, 3, 1e6, 6.0) - gmm_exact(&data, 3, 1e9, 6.0)).abs() < 1e-3);
}

#[test]
fn gmm_reads_four_column_csv() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "sl,sw,pl,pw").unwrap();
    for row in synthetic_gmm_data(30, &mut ChaCha8Rng::seed_from_u64(0)) {
        let s: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", s.join(",")).unwrap();
    }
    let rows = load_rows(f.path()).unwrap();
    assert_eq!(rows.len(), 30);
    let m = GmmModel::new(rows, 10).unwrap();
    assert_eq!(m.nu_lower(), 3.0);
}
