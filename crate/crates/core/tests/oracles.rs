use approx::assert_relative_eq;
use expo_entropy::estimators::EstimatorId;
use expo_entropy::losses::{linex_loss, squared_error_loss};
use expo_entropy::sampling::{generate, reduce, SchemeConfig, SchemeKind};
use expo_entropy::simulation::{pri_table, stream_seed, SimulationPlan};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const REPS: usize = 100_000;

fn schemes() -> Vec<SchemeConfig> {
    vec![
        SchemeConfig::iid(2, 4).unwrap(),
        SchemeConfig::record(3, 4).unwrap(),
        SchemeConfig::type2(2, 3, 7).unwrap(),
        SchemeConfig::progressive2(2, vec![1, 2, 0, 1]).unwrap(),
    ]
}

/// Mean and unbiased variance.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn draw(scheme: &SchemeConfig, theta: &[f64], sigma: f64, seed: u64, reps: usize) -> Vec<Vec<Vec<f64>>> {
    (0..reps)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, None, b as u64));
            generate(scheme, theta, sigma, &mut rng).unwrap()
        })
        .collect()
}

#[test]
fn spacing_statistic_is_gamma_distributed() {
    for scheme in schemes() {
        let zeros = vec![0.0; scheme.k];
        let s: Vec<f64> = draw(&scheme, &zeros, 1.0, 17, REPS)
            .iter()
            .map(|raw| reduce(&scheme, raw).unwrap().s)
            .collect();
        let m = scheme.shape_m() as f64;
        let (mean, var) = moments(&s);
        let se_mean = (m / REPS as f64).sqrt();
        // fourth central moment of Gamma(m, 1) is 3m² + 6m
        let se_var = ((3.0 * m * m + 6.0 * m - m * m) / REPS as f64).sqrt();
        assert!((mean - m).abs() < 4.0 * se_mean, "{}: mean {mean} vs {m}", scheme.kind);
        assert!((var - m).abs() < 4.0 * se_var, "{}: var {var} vs {m}", scheme.kind);
    }
}

#[test]
fn scaled_minima_are_shifted_exponentials() {
    let theta = [0.3, -0.2];
    let sigma = 1.5;
    for scheme in schemes().into_iter().filter(|s| s.k == 2) {
        let multiplier = match scheme.kind {
            SchemeKind::Iid => scheme.n as f64,
            SchemeKind::Record => 1.0,
            _ => scheme.n_total.unwrap() as f64,
        };
        let draws = draw(&scheme, &theta, sigma, 23, REPS);
        for (i, &t) in theta.iter().enumerate() {
            let x: Vec<f64> = draws.iter().map(|raw| reduce(&scheme, raw).unwrap().x[i]).collect();
            let (mean, var) = moments(&x);
            let se = sigma / (REPS as f64).sqrt();
            assert!((mean - (multiplier * t + sigma)).abs() < 4.0 * se, "{} x{i}: {mean}", scheme.kind);
            assert_relative_eq!(var, sigma * sigma, max_relative = 0.05);
        }
    }
}

#[test]
fn nth_record_is_a_gamma_sum() {
    let n = 5;
    let scheme = SchemeConfig::record(2, n).unwrap();
    let last: Vec<f64> = draw(&scheme, &[0.0, 0.0], 1.0, 29, REPS).iter().map(|raw| raw[0][n - 1]).collect();
    let (mean, _) = moments(&last);
    let se = (n as f64 / REPS as f64).sqrt();
    assert!((mean - n as f64).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn progressive_censoring_keeps_spacings_independent_of_removals() {
    // with all units on test the normalized spacings (m − j + 1 − Σ_{l<j} R_l)(X_j − X_{j−1}) are unit exponentials
    let scheme = SchemeConfig::progressive2(2, vec![2, 1, 0, 3]).unwrap();
    let removals = [2usize, 1, 0, 3];
    let total = scheme.n_total.unwrap();
    let draws = draw(&scheme, &[0.0, 0.0], 1.0, 31, REPS);
    for j in 1..4 {
        let at_risk = (total - j - removals[..j].iter().sum::<usize>()) as f64;
        let spacing: Vec<f64> = draws.iter().map(|raw| at_risk * (raw[0][j] - raw[0][j - 1])).collect();
        let (mean, var) = moments(&spacing);
        assert!((mean - 1.0).abs() < 4.0 / (REPS as f64).sqrt(), "spacing {j}: {mean}");
        assert_relative_eq!(var, 1.0, max_relative = 0.05);
    }
}

#[test]
fn risk_is_invariant_to_the_scale() {
    let theta = [[0.2, 0.1], [0.8, 0.5]];
    let base_plan = |sigma: f64| {
        let mut p = SimulationPlan::new(
            SchemeConfig::record(2, 4).unwrap(),
            theta.iter().map(|t| t.iter().map(|v| v * sigma).collect()).collect(),
            linex_loss(1.0).unwrap(),
            vec![EstimatorId::Mrie, EstimatorId::Stein, EstimatorId::Bz],
            20_000,
            41,
        );
        p.sigma = sigma;
        p
    };
    let one = pri_table(&base_plan(1.0)).unwrap();
    // same substreams, so the σ = 3 datasets are exact multiples of the σ = 1 ones
    let three = pri_table(&base_plan(3.0)).unwrap();
    for (a, b) in one.rows.iter().zip(&three.rows) {
        assert_eq!(a.estimator, b.estimator);
        let se = a.std_err.unwrap().hypot(b.std_err.unwrap());
        assert!((a.risk - b.risk).abs() < 2.0 * se, "{} {:?}: {} vs {}", a.estimator, a.theta, a.risk, b.risk);
        assert_relative_eq!(a.risk, b.risk, max_relative = 1e-9);
    }
}

#[test]
fn tables_are_reproducible_and_seed_dependent() {
    let plan = SimulationPlan::new(
        SchemeConfig::iid(2, 6).unwrap(),
        vec![vec![0.1, 0.1], vec![0.5, 0.2]],
        squared_error_loss(),
        vec![EstimatorId::Mrie, EstimatorId::Stein, EstimatorId::Bz],
        5_000,
        7,
    );
    let a = pri_table(&plan).unwrap();
    assert_eq!(a, pri_table(&plan).unwrap());
    let other = SimulationPlan { master_seed: 8, ..plan };
    assert_ne!(a.rows[0].risk, pri_table(&other).unwrap().rows[0].risk);
}
