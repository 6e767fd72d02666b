//! Property bodies and sweeps run both by the focused suites and by the acceptance runner.

use latent_bias::discovery::{discovery_loss, DiscoveryConfig, PenaltyMode};
use latent_bias::hyperplane::{abs_cos, project_to_plane, traversal_latents, Hyperplane, TraversalConfig};
use latent_bias::models::Classifier;
use latent_bias::numgrad::{dot, finite_diff_grad, norm, qr_backward, qr_thin, relative_error, Matrix};
use latent_bias::rng;
use latent_bias::world::sample_skewed_pair;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{random_decoder, random_matrix, unit};

pub fn small_config(lambda: f64, penalty: PenaltyMode) -> DiscoveryConfig {
    DiscoveryConfig {
        traversal: TraversalConfig::evenly_spaced(6, -2.0, 2.0).unwrap(),
        lambda,
        penalty,
        ..DiscoveryConfig::default()
    }
}

/// Relative error of the analytic discovery gradient against central differences.
pub fn discovery_gradient_error(seed: u64) -> f64 {
    let d = 10;
    let generator = random_decoder(4, d, seed);
    let classifier = Classifier::random(16, 8, seed);
    let z = random_matrix(2, d, seed, "z");
    let mut r = rng::rng_from(seed, &[rng::tag("params")]);
    let params = rng::standard_normal_vec(&mut r, d + 1);
    let w_t = rng::standard_normal_vec(&mut r, d);
    let known = vec![rng::standard_normal_vec(&mut r, d), rng::standard_normal_vec(&mut r, d)];
    let penalty = if seed % 2 == 0 { PenaltyMode::Absolute } else { PenaltyMode::Signed };
    let cfg = small_config(if seed % 5 == 0 { 0.0 } else { 10.0 }, penalty);

    let loss = |x: &[f64]| -> latent_bias::Result<f64> {
        let h = Hyperplane::new(x[..d].to_vec(), x[d])?;
        Ok(discovery_loss(&h, &z, &generator, &classifier, &w_t, &known, &cfg)?.point.total)
    };
    let h = Hyperplane::new(params[..d].to_vec(), params[d]).unwrap();
    let eval = discovery_loss(&h, &z, &generator, &classifier, &w_t, &known, &cfg).unwrap();
    let mut analytic = eval.grad_normal;
    analytic.push(eval.grad_offset);
    let numeric = finite_diff_grad(loss, &params, 1e-6).unwrap();
    relative_error(&analytic, &numeric)
}

/// Relative error of the QR backward pass on a random tall matrix.
pub fn qr_backward_error(seed: u64) -> f64 {
    let m = 3 + (seed % 5) as usize;
    let n = 1 + (seed % m as u64) as usize;
    let w = random_matrix(m, n, seed, "w");
    let g = random_matrix(m, n, seed, "g");
    let (q, r) = qr_thin(&w).unwrap();
    let analytic = qr_backward(&w, &q, &r, &g).unwrap();
    let f = |x: &[f64]| -> latent_bias::Result<f64> {
        let (q, _) = qr_thin(&Matrix::from_vec(m, n, x.to_vec())?)?;
        Ok(q.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum())
    };
    let numeric = finite_diff_grad(f, w.as_slice(), 1e-6).unwrap();
    relative_error(analytic.as_slice(), &numeric)
}

pub fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

/// Normal, offset and a point of matching dimension.
pub fn plane_strategy() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>)> {
    (2usize..12).prop_flat_map(|d| {
        (
            vec_strategy(d).prop_filter("non-degenerate normal", |w| norm(w) > 1e-3),
            -5.0..5.0f64,
            prop::collection::vec(-50.0..50.0f64, d),
        )
    })
}

pub fn check_projection_residual(w: &[f64], o: f64, z: &[f64]) -> Result<(), TestCaseError> {
    let h = Hyperplane::new(w.to_vec(), o).unwrap();
    let p = project_to_plane(&h, z).unwrap();
    let residual = (dot(w, &p) + o).abs();
    prop_assert!(residual < 1e-9 * (1.0 + norm(z)), "residual {residual}");
    let diff: Vec<f64> = p.iter().zip(z).map(|(a, b)| a - b).collect();
    if norm(&diff) > 1e-9 {
        prop_assert!((abs_cos(&diff, w).unwrap() - 1.0).abs() < 1e-9);
    }
    Ok(())
}

pub fn check_idempotence(w: &[f64], o: f64, z: &[f64]) -> Result<(), TestCaseError> {
    let h = Hyperplane::new(w.to_vec(), o).unwrap();
    let once = project_to_plane(&h, z).unwrap();
    let twice = project_to_plane(&h, &once).unwrap();
    for (a, b) in once.iter().zip(&twice) {
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + norm(z)), "{a} vs {b}");
    }
    Ok(())
}

/// Projection is unchanged and the traversal is unchanged (or reversed for `c < 0`).
pub fn check_plane_scaling(w: &[f64], o: f64, z: &[f64], c: f64) -> Result<(), TestCaseError> {
    let h = Hyperplane::new(w.to_vec(), o).unwrap();
    let hc = h.scaled(c).unwrap();
    let p = project_to_plane(&h, z).unwrap();
    let pc = project_to_plane(&hc, z).unwrap();
    let tol = 1e-10 * (1.0 + norm(z));
    for (a, b) in p.iter().zip(&pc) {
        prop_assert!((a - b).abs() < tol);
    }
    let alphas = TraversalConfig::default().alphas().to_vec();
    let t = traversal_latents(&p, &h, &alphas).unwrap();
    let tc = traversal_latents(&p, &hc, &alphas).unwrap();
    for (i, row) in t.iter().enumerate() {
        let other = if c < 0.0 { &tc[alphas.len() - 1 - i] } else { &tc[i] };
        for (a, b) in row.iter().zip(other) {
            prop_assert!((a - b).abs() < tol);
        }
    }
    Ok(())
}

/// The full objective at `c·(w, o)` equals the one at `(w, o)`.
pub fn check_objective_scaling(seed: u64, c: f64, signed: bool, offset: f64) -> Result<(), TestCaseError> {
    let d = 5;
    let decoder = random_decoder(16, d, seed);
    let classifier = Classifier::random(256, 8, seed + 1);
    let w = random_matrix(1, d, seed, "normal").into_vec();
    let w_t = unit(&random_matrix(1, d, seed, "target").into_vec());
    let known = vec![random_matrix(1, d, seed, "known").into_vec()];
    let z = random_matrix(3, d, seed, "batch");
    let penalty = if signed { PenaltyMode::Signed } else { PenaltyMode::Absolute };
    let cfg = small_config(10.0, penalty);
    let h = Hyperplane::new(w, offset).unwrap();
    let base = discovery_loss(&h, &z, &decoder, &classifier, &w_t, &known, &cfg).unwrap().point;
    let scaled = discovery_loss(&h.scaled(c).unwrap(), &z, &decoder, &classifier, &w_t, &known, &cfg).unwrap().point;
    prop_assert!((base.variation - scaled.variation).abs() < 1e-10, "{base:?} vs {scaled:?}");
    // the signed penalty flips with the normal by construction
    if !signed || c > 0.0 {
        prop_assert!((base.total - scaled.total).abs() < 1e-10, "{base:?} vs {scaled:?}");
    }
    Ok(())
}

/// Joint frequencies `[t][b]` of the skewed sampler over `n` draws.
pub fn sampler_joint(s: f64, n: usize, seed: u64) -> [[f64; 2]; 2] {
    let mut rng = rng::rng_from(seed, &[rng::tag("sampler-test")]);
    let mut counts = [[0usize; 2]; 2];
    for _ in 0..n {
        let (t, b) = sample_skewed_pair(s, &mut rng).unwrap();
        counts[t as usize][b as usize] += 1;
    }
    counts.map(|row| row.map(|c| c as f64 / n as f64))
}

/// Largest deviation of the empirical joint and conditional probabilities from their
/// exact values.
pub fn sampler_deviation(s: f64, n: usize, seed: u64) -> f64 {
    let f = sampler_joint(s, n, seed);
    let p_t1 = f[1][0] + f[1][1];
    let p_t0 = f[0][0] + f[0][1];
    [
        f[1][0] - s / 2.0,
        f[1][1] - (1.0 - s) / 2.0,
        f[0][1] - s / 2.0,
        f[0][0] - (1.0 - s) / 2.0,
        f[1][0] / p_t1 - s,
        f[1][1] / p_t1 - (1.0 - s),
        f[0][0] / p_t0 - (1.0 - s),
        f[0][1] / p_t0 - s,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()))
}
